"""Double-well potential, the perimeter-calibrated phase-field energy, its
sharp-interface limit, and the 1D optimal transition profile.

The energy is

    (c_p / (p' eps)) * int W(u)  +  (c_p eps^(p-1) / p) * int |grad u|^p

over a convex admissible region, with c_p = (int_0^1 W^(1/p'))^-1 chosen so
the limit as eps -> 0 is exactly the perimeter of {u = 1}.  For the default
well W = 9 t^2 (t-1)^2 and p = 2 this reduces to the classical
(1/eps) int W + eps int |grad u|^2.

Fields must vanish outside the admissible region; violations yield the +inf
sentinel rather than an exception so the value propagates through
comparisons.  The zero-trace condition is enforced discretely on a collar of
cells inside the region boundary (width configurable on the region).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad
from scipy.ndimage import binary_erosion

from .errors import ConfigurationError, DomainError
from .fields import BinaryPattern, ScalarField, grad_arrays
from .geometry import perimeter

INF = math.inf

_SUPPORT_TOL = 1e-12
_BINARY_TOL = 1e-9


def double_well(t):
    """Default double well 9 t^2 (t - 1)^2; zeros exactly at 0 and 1."""
    t = np.asarray(t, dtype=float)
    return 9.0 * t**2 * (t - 1.0) ** 2


def double_well_deriv(t):
    t = np.asarray(t, dtype=float)
    return 18.0 * t * (t - 1.0) * (2.0 * t - 1.0)


def compute_cp(well: Callable, p: float) -> float:
    """Normalization (int_0^1 W(s)^{1/p'} ds)^-1 by adaptive quadrature."""
    if not 1.0 < p < np.inf:
        raise DomainError(f"exponent p must lie in (1, inf), got {p}")
    p_conj = p / (p - 1.0)
    integral, _ = quad(lambda s: float(well(s)) ** (1.0 / p_conj), 0.0, 1.0,
                       limit=200)
    if integral < 1e-12:
        raise DomainError("degenerate well: calibration integral vanishes")
    return 1.0 / integral


@dataclass(frozen=True)
class Region:
    """Convex region on which phase fields may be nonzero.

    ``collar_cells`` cells just inside the boundary are forced to zero as the
    discrete version of the zero-trace condition.
    """

    kind: str = "disk"
    center: tuple[float, float] = (0.0, 0.0)
    radius: float | None = None
    halfwidth: tuple[float, float] | None = None
    collar_cells: int = 1

    def __post_init__(self):
        if self.kind == "disk":
            if self.radius is None or self.radius <= 0:
                raise ConfigurationError("disk region needs a positive radius")
        elif self.kind == "rect":
            hw = self.halfwidth
            if hw is None or hw[0] <= 0 or hw[1] <= 0:
                raise ConfigurationError("rect region needs positive half-widths")
        else:
            raise ConfigurationError(f"unknown region kind {self.kind!r}")
        if self.collar_cells < 0:
            raise ConfigurationError("collar_cells must be nonnegative")

    def contains(self, X: np.ndarray, Y: np.ndarray) -> np.ndarray:
        dx = X - self.center[0]
        dy = Y - self.center[1]
        if self.kind == "disk":
            return dx * dx + dy * dy <= self.radius**2
        return (np.abs(dx) <= self.halfwidth[0]) & (np.abs(dy) <= self.halfwidth[1])

    def admissible_mask(self, f: ScalarField) -> np.ndarray:
        """Cells where a field may be nonzero: inside the region, eroded by
        the collar width."""
        X, Y = f.meshgrid()
        inside = self.contains(X, Y)
        for _ in range(self.collar_cells):
            inside = binary_erosion(inside)
        return inside

    @classmethod
    def inscribed_disk(cls, f: ScalarField, collar_cells: int = 1) -> "Region":
        cx = f.origin[0] + (f.nx - 1) / 2.0 * f.spacing
        cy = f.origin[1] + (f.ny - 1) / 2.0 * f.spacing
        r = min((f.nx - 1), (f.ny - 1)) / 2.0 * f.spacing
        return cls(kind="disk", center=(cx, cy), radius=r,
                   collar_cells=collar_cells)


@dataclass(frozen=True)
class DoubleWellSpec:
    """Well, exponent, calibration constant, and admissible region."""

    well: Callable
    well_deriv: Callable | None
    p: float
    c_p: float
    region: Region

    @classmethod
    def default(cls, region: Region, p: float = 2.0) -> "DoubleWellSpec":
        return cls(well=double_well, well_deriv=double_well_deriv, p=p,
                   c_p=compute_cp(double_well, p), region=region)

    @classmethod
    def custom(cls, region: Region, well: Callable,
               well_deriv: Callable | None = None,
               p: float = 2.0) -> "DoubleWellSpec":
        w0, w1 = float(well(0.0)), float(well(1.0))
        if abs(w0) > 1e-12 or abs(w1) > 1e-12:
            raise ConfigurationError("well must vanish at 0 and 1")
        ts = np.linspace(0.05, 0.95, 19)
        if np.any(np.asarray(well(ts)) <= 0):
            raise ConfigurationError("well must be positive inside (0, 1)")
        return cls(well=well, well_deriv=well_deriv, p=p,
                   c_p=compute_cp(well, p), region=region)


def support_violation(u: ScalarField, spec: DoubleWellSpec) -> bool:
    """True when u is materially nonzero outside the admissible cells."""
    allowed = spec.region.admissible_mask(u)
    return bool(np.any(np.abs(u.values[~allowed]) > _SUPPORT_TOL))


def modica_mortola_terms(u: ScalarField, eps: float,
                         spec: DoubleWellSpec) -> tuple[float, float]:
    """The well term and the gradient term of the energy, separately.

    Sums run over the whole grid; since admissible fields vanish outside the
    region and W(0) = 0, this equals the integral over the region.
    """
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    da = u.cell_area
    p = spec.p
    well_term = spec.c_p / ((p / (p - 1.0)) * eps) * float(
        np.sum(spec.well(u.values))) * da
    gx, gy = grad_arrays(u.values, u.spacing)
    mag2 = gx * gx + gy * gy
    grad_term = spec.c_p * eps ** (p - 1.0) / p * float(
        np.sum(mag2 ** (p / 2.0))) * da
    return well_term, grad_term


def modica_mortola(u: ScalarField, eps: float, spec: DoubleWellSpec) -> float:
    """Phase-field perimeter energy; +inf sentinel on support violation."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    if support_violation(u, spec):
        return INF
    well_term, grad_term = modica_mortola_terms(u, eps, spec)
    return well_term + grad_term


def limit_perimeter(u: ScalarField, spec: DoubleWellSpec) -> float:
    """Sharp-interface limit: perimeter of {u = 1} for admissible binary
    fields, +inf sentinel otherwise."""
    v = u.values
    binary = np.all((np.abs(v) <= _BINARY_TOL) | (np.abs(v - 1.0) <= _BINARY_TOL))
    if not binary or support_violation(u, spec):
        return INF
    pattern = BinaryPattern.from_bitmap(v > 0.5, u.spacing, u.origin)
    return perimeter(pattern)


def optimal_profile(eps: float, length: float, spacing: float):
    """1D optimal transition q(x) = 1 / (1 + exp(-3x/eps)), the solution of
    eps q' = 3 q (1 - q) = sqrt(W(q)) for the default well."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    xs = np.arange(-length / 2.0, length / 2.0 + spacing / 2.0, spacing)
    return xs, 1.0 / (1.0 + np.exp(-3.0 * xs / eps))


def sigmoid_profile_field(signed_distance: np.ndarray, eps: float) -> np.ndarray:
    """Sweep the optimal profile along an interface given its signed distance
    (positive inside)."""
    if eps <= 0:
        raise DomainError(f"eps must be positive, got {eps}")
    return 1.0 / (1.0 + np.exp(np.clip(-3.0 * signed_distance / eps, -500, 500)))


def format_energy(value: float) -> str:
    """Serialize an energy; the sentinel becomes the string 'inf'."""
    return "inf" if value == INF else format(value, ".17g")
