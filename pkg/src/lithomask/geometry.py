"""Distances between binary patterns, perimeter estimation, and tube
neighborhoods.

Four distances are provided: Hausdorff between closures (d1), Hausdorff
between boundaries (d1_tilde), symmetric-difference area (d2), and the strict
distance d3 = d2 + |P_a - P_b|.  Hausdorff distances are evaluated through the
exact Euclidean distance transform of the grid, so their error is at most one
cell diagonal; perimeters come from sub-pixel marching-squares contours.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.ndimage import binary_dilation, binary_erosion, distance_transform_edt

from .errors import DomainError, GridMismatchError
from .fields import BinaryPattern, l1_distance


@dataclass(frozen=True)
class DistanceReport:
    d1: float
    d1_tilde: float
    d2: float
    d3: float
    perimeter_a: float
    perimeter_b: float

    def __post_init__(self):
        for name in ("d1", "d1_tilde", "d2", "d3", "perimeter_a", "perimeter_b"):
            v = getattr(self, name)
            if not np.isfinite(v) or v < 0:
                raise DomainError(f"distance report entry {name}={v} invalid")

    @staticmethod
    def csv_header() -> str:
        return "d1,d1_tilde,d2,d3,perimeter_a,perimeter_b"

    def csv_row(self) -> str:
        return ",".join(
            format(getattr(self, n), ".17g")
            for n in ("d1", "d1_tilde", "d2", "d3", "perimeter_a", "perimeter_b")
        )


def perimeter(p: BinaryPattern) -> float:
    """Total length of the pattern's marching-squares contours."""
    return p.contour_length()


def _boundary_cells(bitmap: np.ndarray) -> np.ndarray:
    return bitmap & ~binary_erosion(bitmap)


def _distance_to_cells(cells: np.ndarray, spacing: float) -> np.ndarray:
    """Distance from every grid cell to the nearest marked cell."""
    return distance_transform_edt(~cells, sampling=spacing)


def hausdorff_boundary(p: BinaryPattern, q: BinaryPattern) -> float:
    """Symmetric Hausdorff distance between the two boundaries (d1_tilde)."""
    _require_same_grid(p, q)
    bp = _boundary_cells(p.bitmap)
    bq = _boundary_cells(q.bitmap)
    if not bp.any() or not bq.any():
        raise DomainError("hausdorff_boundary needs nonempty boundaries")
    h = p.grid.spacing
    d_pq = float(np.max(_distance_to_cells(bq, h)[bp]))
    d_qp = float(np.max(_distance_to_cells(bp, h)[bq]))
    return max(d_pq, d_qp)


def hausdorff_closure(p: BinaryPattern, q: BinaryPattern) -> float:
    """Symmetric Hausdorff distance between the filled sets (d1)."""
    _require_same_grid(p, q)
    bp, bq = p.bitmap, q.bitmap
    if not bp.any() or not bq.any():
        raise DomainError("hausdorff_closure needs nonempty patterns")
    h = p.grid.spacing
    d_pq = float(np.max(_distance_to_cells(bq, h)[bp]))
    d_qp = float(np.max(_distance_to_cells(bp, h)[bq]))
    return max(d_pq, d_qp)


def _require_same_grid(p: BinaryPattern, q: BinaryPattern):
    if not p.grid.same_grid(q.grid):
        raise GridMismatchError("patterns live on different grids")


def strict_distance(p: BinaryPattern, q: BinaryPattern) -> DistanceReport:
    """All four distances plus both perimeters in one report.

    The Hausdorff entries are defined only for nonempty patterns; when both
    are empty they are 0, and when exactly one is empty they are recorded as
    the window diagonal (the largest distance the grid can express) so the
    report stays finite.
    """
    _require_same_grid(p, q)
    d2 = l1_distance(p.grid, q.grid)
    pa = perimeter(p)
    pb = perimeter(q)
    d3 = d2 + abs(pa - pb)
    if p.is_empty and q.is_empty:
        d1 = d1t = 0.0
    elif p.is_empty or q.is_empty:
        g = p.grid
        d1 = d1t = float(np.hypot((g.nx - 1) * g.spacing, (g.ny - 1) * g.spacing))
    else:
        d1 = hausdorff_closure(p, q)
        d1t = hausdorff_boundary(p, q)
    return DistanceReport(d1=d1, d1_tilde=d1t, d2=d2, d3=d3,
                          perimeter_a=pa, perimeter_b=pb)


def tube(p: BinaryPattern, radius: float) -> BinaryPattern:
    """Morphological dilation of the pattern by a discrete disk."""
    if radius < 0:
        raise DomainError(f"tube radius must be nonnegative, got {radius}")
    h = p.grid.spacing
    n = int(np.floor(radius / h + 1e-12))
    if n == 0 or p.is_empty:
        return p
    ax = np.arange(-n, n + 1)
    DX, DY = np.meshgrid(ax, ax, indexing="ij")
    footprint = (DX * DX + DY * DY) * h * h <= radius * radius + 1e-12
    dilated = binary_dilation(p.bitmap, structure=footprint)
    return BinaryPattern.from_bitmap(dilated, h, p.grid.origin)


def boundary_tube(p: BinaryPattern, radius: float) -> BinaryPattern:
    """Tube neighborhood of the boundary: dilation minus erosion."""
    if radius < 0:
        raise DomainError(f"tube radius must be nonnegative, got {radius}")
    h = p.grid.spacing
    n = int(np.floor(radius / h + 1e-12))
    ax = np.arange(-n, n + 1)
    DX, DY = np.meshgrid(ax, ax, indexing="ij")
    footprint = (DX * DX + DY * DY) * h * h <= radius * radius + 1e-12
    outer = binary_dilation(p.bitmap, structure=footprint)
    inner = binary_erosion(p.bitmap, structure=footprint)
    return BinaryPattern.from_bitmap(outer & ~inner, h, p.grid.origin)
