"""Forward image formation: coherent field, partially coherent intensity
(dense quadratic form), threshold exposure, and coherence-gap diagnostics.

The coherent path is a single convolution followed by squaring.  The
partially coherent path evaluates the bilinear form

    I(x) = sum_{xi, eta} u(xi) K(x-xi) J(xi-eta) K(x-eta) u(eta) dA^2

directly through displacement lookup tables; it is resource-gated at 96^2
cells because cost and memory grow with the square of the cell count.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ResourceError, ThresholdRangeWarning
from .fields import BinaryPattern, ScalarField, convolve, convolve_adjoint
from .kernels import (SampledKernel, build_smoothed_psf, gaussian, jinc,
                      mutual_intensity, rescale_kernel)
from .steps import heaviside_step

DENSE_CELL_LIMIT = 96 * 96

_JINC_BASE_SUPPORT = 256.0


@dataclass(frozen=True)
class OpticsConfig:
    """Optical system parameters with the PSF sampled on the simulation grid.

    ``sigma=None`` selects fully coherent illumination (J identically 1).
    ``support_radius`` is the radius R of the disk the mask must live in;
    ``None`` disables the support checks (calibration runs use that).
    """

    k: float
    na: float
    sigma: float | None
    psf: SampledKernel
    s0: float
    threshold: float
    eta: float
    support_radius: float | None = None
    psf_kind: str = "smoothed"

    def __post_init__(self):
        if self.k <= 0 or self.na <= 0:
            raise DomainError("wavenumber and numerical aperture must be positive")
        s = self.s
        if not (0 < s <= 1.0 / self.s0):
            raise DomainError(
                f"scale s={s:g} outside (0, 1/s0] for s0={self.s0:g}")
        if self.sigma is not None:
            if not (0 < self.sigma <= s):
                raise DomainError(
                    f"coherency sigma={self.sigma:g} must lie in (0, s={s:g}]")
        if self.eta <= 0:
            raise DomainError("threshold smoothing width eta must be positive")
        if not (1.0 / 3.0 <= self.threshold <= 2.0 / 3.0):
            warnings.warn(
                f"threshold h={self.threshold:g} outside [1/3, 2/3]; the "
                "regularity guarantees degrade",
                ThresholdRangeWarning, stacklevel=3)

    @property
    def s(self) -> float:
        return 1.0 / (self.k * self.na)

    @property
    def k_sigma_na(self) -> float:
        if self.sigma is None:
            raise DomainError("coherent configuration has no sigma")
        return self.k * self.sigma * self.na

    def mutual_intensity_radial(self, r):
        """J evaluated at physical displacement radii (1 when coherent)."""
        if self.sigma is None:
            return np.ones_like(np.asarray(r, dtype=float))
        c = self.k_sigma_na
        z = c * np.asarray(r, dtype=float)
        out = np.empty_like(z)
        small = z < 1e-8
        out[small] = 1.0
        from scipy.special import j1

        zs = z[~small]
        out[~small] = 2.0 * j1(zs) / zs
        return out


def make_optics(k: float, na: float, *, spacing: float, window_halfwidth: float,
                sigma: float | None = None, psf_kind: str = "smoothed",
                deviation: float = 0.05, threshold: float = 0.5,
                eta: float = 0.1, support_radius: float | None = None,
                max_kernel_support: float | None = None) -> OpticsConfig:
    """Build an :class:`OpticsConfig` with the PSF resampled onto the grid.

    ``psf_kind`` selects the model kernel: the band-flat smoothed kernel
    (default), the classical ``jinc``, or a ``gaussian`` substitute used by
    calibration tests.  The kernel grid is capped at the window half-width.
    """
    s = 1.0 / (k * na)
    cap = window_halfwidth if max_kernel_support is None else max_kernel_support
    if psf_kind == "smoothed":
        base = build_smoothed_psf(deviation)
        s0 = base.spec.s0
        scale = s * s0
    elif psf_kind == "jinc":
        base = jinc(1.0, _JINC_BASE_SUPPORT)
        s0, scale = 1.0, s
    elif psf_kind == "gaussian":
        base = gaussian(0.25, 8.0)
        s0, scale = 1.0, s
    else:
        raise DomainError(f"unknown psf kind {psf_kind!r}")
    support = min(base.support * scale, cap)
    psf = rescale_kernel(base, scale, spacing=spacing, support=support)
    return OpticsConfig(k=k, na=na, sigma=sigma, psf=psf, s0=s0,
                        threshold=threshold, eta=eta,
                        support_radius=support_radius, psf_kind=psf_kind)


def _check_mask(u: ScalarField, cfg: OpticsConfig):
    v = u.values
    if v.min() < -1e-9 or v.max() > 1.0 + 1e-9:
        raise DomainError("mask values must lie in [0, 1]")
    if cfg.support_radius is not None:
        outside = u.radii() > cfg.support_radius
        if np.any(np.abs(v[outside]) > 1e-12):
            raise DomainError(
                f"mask not supported in the radius-{cfg.support_radius:g} disk")


def coherent_field(u: ScalarField, cfg: OpticsConfig) -> ScalarField:
    """The coherent image field K * u."""
    _check_mask(u, cfg)
    return convolve(u, cfg.psf)


def _kernel_table(kern: SampledKernel, nx: int, ny: int):
    """Kernel samples on the (2nx-1, 2ny-1) displacement lattice, embedding the
    exact 2D kernel grid so the dense path reproduces the convolution operator
    bit-for-bit (displacements beyond the grid never pair in-window cells)."""
    tab = np.zeros((2 * nx - 1, 2 * ny - 1))
    kg = kern.grid
    kcx, kcy = (kg.shape[0] - 1) // 2, (kg.shape[1] - 1) // 2
    ux, uy = min(kcx, nx - 1), min(kcy, ny - 1)
    tab[nx - 1 - ux:nx + ux, ny - 1 - uy:ny + uy] = \
        kg[kcx - ux:kcx + ux + 1, kcy - uy:kcy + uy + 1]
    return tab


def _dense_machinery(u: ScalarField, cfg: OpticsConfig, allow_large: bool):
    nx, ny = u.nx, u.ny
    n_cells = nx * ny
    if n_cells > DENSE_CELL_LIMIT and not allow_large:
        raise ResourceError(
            f"dense intensity on {nx}x{ny} = {n_cells} cells exceeds the "
            f"{DENSE_CELL_LIMIT}-cell gate; pass allow_large=True to override")
    h = u.spacing
    da = h * h
    ktab = _kernel_table(cfg.psf, nx, ny) * da
    ix = np.repeat(np.arange(nx), ny)
    iy = np.tile(np.arange(ny), nx)
    di = ix[:, None] - ix[None, :] + (nx - 1)
    dj = iy[:, None] - iy[None, :] + (ny - 1)
    M = ktab[di, dj]
    uf = u.values.ravel()
    cols = np.flatnonzero(uf != 0.0)
    if cols.size == 0:
        cols = np.array([0])
    if cfg.sigma is None:
        jtab = np.ones((2 * nx - 1, 2 * ny - 1))
    else:
        ddx = h * np.arange(-(nx - 1), nx)
        ddy = h * np.arange(-(ny - 1), ny)
        DX, DY = np.meshgrid(ddx, ddy, indexing="ij")
        jtab = cfg.mutual_intensity_radial(np.hypot(DX, DY))
    A = M[:, cols] * uf[cols]
    J_cols = jtab[di[np.ix_(cols, cols)], dj[np.ix_(cols, cols)]]
    return M, A, J_cols, cols, di, dj, jtab


def hopkins_intensity(u: ScalarField, cfg: OpticsConfig, *,
                      allow_large: bool = False,
                      force_dense: bool = False) -> ScalarField:
    """Partially coherent areal intensity of the mask ``u``.

    Coherent configurations (``sigma=None``) use the fast path
    I = (K * u)^2, which equals the dense quadratic form with J = 1.
    """
    _check_mask(u, cfg)
    if cfg.sigma is None and not force_dense:
        v = convolve(u, cfg.psf)
        return v.with_values(v.values**2)
    M, A, J_cols, cols, di, dj, jtab = _dense_machinery(u, cfg, allow_large)
    C = A @ J_cols
    vals = np.einsum("ij,ij->i", C, A)
    return u.with_values(vals.reshape(u.nx, u.ny))


def intensity_with_adjoint(u: ScalarField, cfg: OpticsConfig, *,
                           allow_large: bool = False):
    """Intensity plus a closure applying (dI/du)^T to a weight field.

    Coherent path: the adjoint is convolution with the reflected kernel.
    Dense path: the transposed quadratic form.
    """
    _check_mask(u, cfg)
    if cfg.sigma is None:
        v = convolve(u, cfg.psf)
        I = v.with_values(v.values**2)

        def adjoint(w: np.ndarray) -> np.ndarray:
            wf = u.with_values(2.0 * v.values * w)
            return convolve_adjoint(wf, cfg.psf).values

        return I, adjoint

    M, A, J_cols, cols, di, dj, jtab = _dense_machinery(u, cfg, allow_large)
    C = A @ J_cols                      # (N, ncols)
    vals = np.einsum("ij,ij->i", C, A)
    I = u.with_values(vals.reshape(u.nx, u.ny))
    J_block = jtab[di[cols, :], dj[cols, :]]    # (ncols, N)

    def adjoint(w: np.ndarray) -> np.ndarray:
        B = A @ J_block                  # (N, N): B[x,z] = sum_eta J(z-eta) K(x-eta) u(eta)
        g = 2.0 * ((M * B).T @ w.ravel())
        return g.reshape(u.nx, u.ny)

    return I, adjoint


def exposed_set(intensity: ScalarField, threshold: float) -> BinaryPattern:
    """The exposed region { I > h } with its sub-pixel level-h contour."""
    return BinaryPattern.from_level_set(intensity, threshold)


def threshold_smooth(intensity: ScalarField, threshold: float,
                     eta: float) -> ScalarField:
    """Smoothed exposure indicator applied to a precomputed intensity."""
    if eta <= 0:
        raise DomainError("eta must be positive")
    return intensity.with_values(
        heaviside_step((intensity.values - threshold) / eta))


def smoothed_exposure(u: ScalarField, cfg: OpticsConfig,
                      eta: float | None = None, *,
                      allow_large: bool = False) -> ScalarField:
    """Smooth threshold of the intensity: 1 wherever I >= h + eta/2, 0 below
    h - eta/2, smooth in between."""
    eta = cfg.eta if eta is None else eta
    I = hopkins_intensity(u, cfg, allow_large=allow_large)
    return threshold_smooth(I, cfg.threshold, eta)


def coherence_gap(u: ScalarField, cfg: OpticsConfig, *,
                  allow_large: bool = False) -> tuple[float, float]:
    """Sup-norm gap between partially coherent and coherent intensities, and
    its Young-type upper bound ||K||_1^2 * ||J - 1||_inf over the occurring
    displacements (restricted to |d| <= 2R when R is configured)."""
    if cfg.sigma is None:
        I = hopkins_intensity(u, cfg)
        return 0.0, 0.0
    _check_mask(u, cfg)
    I_j = hopkins_intensity(u, cfg, allow_large=allow_large)
    v = convolve(u, cfg.psf)
    gap = float(np.max(np.abs(I_j.values - v.values**2)))
    h = u.spacing
    dx = h * np.arange(-(u.nx - 1), u.nx)
    dy = h * np.arange(-(u.ny - 1), u.ny)
    DX, DY = np.meshgrid(dx, dy, indexing="ij")
    R = np.hypot(DX, DY)
    if cfg.support_radius is not None:
        R = R[R <= 2.0 * cfg.support_radius]
    eps_j = float(np.max(np.abs(cfg.mutual_intensity_radial(R) - 1.0)))
    bound = cfg.psf.grid_l1**2 * eps_j
    return gap, bound
