"""Shared fixtures and independent oracle helpers.

Oracles here are deliberately naive (direct summation, 1D quadrature,
brute-force pair scans) so they stay independent of the code paths they
check.
"""

import numpy as np
import pytest

from lithomask.fields import BinaryPattern, ScalarField
from lithomask.kernels import build_smoothed_psf


@pytest.fixture(scope="session")
def psf_kernel():
    """The default smoothed PSF; built once, reused everywhere."""
    return build_smoothed_psf(0.05)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)


def centered_field(n: int, spacing: float, values=None) -> ScalarField:
    f = ScalarField.centered(n, spacing)
    if values is None:
        return f
    return f.with_values(np.asarray(values, dtype=float))


def disk_bitmap(n: int, spacing: float, radius: float,
                center=(0.0, 0.0)) -> np.ndarray:
    f = ScalarField.centered(n, spacing)
    X, Y = f.meshgrid()
    return np.hypot(X - center[0], Y - center[1]) <= radius


def square_bitmap(n: int, spacing: float, side: float,
                  center=(0.0, 0.0)) -> np.ndarray:
    f = ScalarField.centered(n, spacing)
    X, Y = f.meshgrid()
    return (np.abs(X - center[0]) <= side / 2) & (np.abs(Y - center[1]) <= side / 2)


def disk_pattern(n: int, spacing: float, radius: float,
                 center=(0.0, 0.0)) -> BinaryPattern:
    f = ScalarField.centered(n, spacing)
    return BinaryPattern.from_bitmap(disk_bitmap(n, spacing, radius, center),
                                     spacing, f.origin)


def square_pattern(n: int, spacing: float, side: float,
                   center=(0.0, 0.0)) -> BinaryPattern:
    f = ScalarField.centered(n, spacing)
    return BinaryPattern.from_bitmap(square_bitmap(n, spacing, side, center),
                                     spacing, f.origin)


def smooth_random_mask(n: int, spacing: float, rng, support_radius=None,
                       blur_cells: float = 3.0) -> ScalarField:
    """Random values in [0, 1], smoothed, optionally masked to a disk."""
    from scipy.ndimage import gaussian_filter

    noise = gaussian_filter(rng.standard_normal((n, n)), blur_cells)
    lo, hi = noise.min(), noise.max()
    vals = (noise - lo) / (hi - lo)
    f = ScalarField.centered(n, spacing)
    if support_radius is not None:
        vals = np.where(f.radii() <= support_radius, vals, 0.0)
    return f.with_values(vals)


def dft2_continuous(values: np.ndarray, spacing: float, origin):
    """Continuous-convention Fourier transform of grid samples.

    Approximates F(xi) = integral f(x) exp(-i xi.x) dx by the rectangle rule,
    returned on the DFT frequency grid (angular frequencies).
    """
    n0, n1 = values.shape
    k0 = 2 * np.pi * np.fft.fftfreq(n0, d=spacing)
    k1 = 2 * np.pi * np.fft.fftfreq(n1, d=spacing)
    F = np.fft.fft2(values) * spacing**2
    phase = np.exp(-1j * (np.add.outer(k0 * origin[0], k1 * origin[1])))
    return k0, k1, F * phase


def gauss_cdf_quad(z: float) -> float:
    """Standard normal CDF by direct 1D quadrature (independent oracle)."""
    from scipy.integrate import quad

    val, _ = quad(lambda t: np.exp(-t * t / 2.0) / np.sqrt(2 * np.pi),
                  -12.0, z, limit=200)
    return val
