"""Mask inversion: the regularized objective, its analytic gradient,
projected gradient descent with backtracking, and the eps-continuation sweep
that warm-starts each stage from the previous minimizer.

Objective for a phase field u and target pattern Omega_0:

    F_eps(u) = int |Phi_eta(u) - chi_0|
             + smooth_abs( int |grad Phi_eta(u)| - P(Omega_0) )
             + b * P_eps(u)

with eta = eta(eps) and P_eps the phase-field perimeter energy.  The outer
absolute value of the perimeter mismatch is smoothed as sqrt(x^2 + k^2) - k
so the objective is differentiable; the gradient magnitude carries a small
guard for the same reason.  The gradient is assembled by the chain rule
through the smooth threshold and the intensity operator, whose adjoint is
convolution with the reflected kernel on the coherent path and the transposed
quadratic form on the dense path.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.ndimage import distance_transform_edt

from .errors import ConfigurationError, DomainError
from .fields import (BinaryPattern, ScalarField, grad_adjoint_arrays,
                     grad_arrays, l1_distance)
from .geometry import DistanceReport, perimeter, strict_distance
from .imaging import (OpticsConfig, exposed_set, hopkins_intensity,
                      intensity_with_adjoint)
from .phasefield import INF, DoubleWellSpec, limit_perimeter, support_violation
from .steps import heaviside_step, heaviside_step_deriv

GRAD_GUARD = 1e-12


@dataclass(frozen=True)
class ObjectiveConfig:
    """Weights, schedules, and step control for the inversion."""

    well: DoubleWellSpec
    weight: float                       # perimeter penalty b
    eps_schedule: tuple[float, ...]
    eta0: float | None = None           # eta(eps) = eta0 * eps; default h/2
    kappa: float | None = None          # smooth-abs width; default 1e-3 * P(target)
    step0: float = 1.0
    shrink: float = 0.5
    grow: float = 1.3
    max_iter: int = 200
    max_backtracks: int = 30
    tol: float = 1e-6
    gamma: float | None = None          # L1-ball constraint radius (off by default)
    reference: BinaryPattern | None = None

    def __post_init__(self):
        if self.weight <= 0:
            raise ConfigurationError("perimeter weight must be positive")
        sched = tuple(float(e) for e in self.eps_schedule)
        if len(sched) == 0:
            raise ConfigurationError("eps schedule must be nonempty")
        if any(e <= 0 for e in sched):
            raise ConfigurationError("eps values must be positive")
        if any(b <= a for a, b in zip(sched, sched[1:])):
            raise ConfigurationError("eps schedule must be strictly decreasing")
        object.__setattr__(self, "eps_schedule", sched)
        if self.eta0 is not None and self.eta0 <= 0:
            raise ConfigurationError("eta0 must be positive")
        if self.kappa is not None and self.kappa <= 0:
            raise ConfigurationError("kappa must be positive")
        if self.gamma is not None and self.reference is None:
            raise ConfigurationError("gamma constraint needs a reference pattern")
        if self.max_iter < 1 or self.max_backtracks < 1:
            raise ConfigurationError("max_iter and max_backtracks must be >= 1")

    def eta_of(self, eps: float, threshold: float) -> float:
        eta0 = 0.5 * threshold if self.eta0 is None else self.eta0
        return eta0 * eps

    def kappa_for(self, target_perimeter: float) -> float:
        if self.kappa is not None:
            return self.kappa
        return 1e-3 * max(target_perimeter, 1.0)


@dataclass(frozen=True)
class MinimizeDiagnostics:
    values: tuple[float, ...]      # objective after every accepted step
    iterations: int
    stalled: bool
    converged: bool
    backtracks: int


@dataclass(frozen=True)
class SweepRecord:
    eps: float
    f_eps: float
    d_eta: float
    p_eps: float
    l1_step: float
    iterations: int
    stalled: bool
    minimizer: ScalarField = field(repr=False)


@dataclass(frozen=True)
class SweepTrace:
    records: tuple[SweepRecord, ...]
    bound_constant: float           # max F_eps of the mollified target over the schedule
    final_mask: ScalarField
    final_binary: BinaryPattern
    f_zero: float
    report: DistanceReport

    @property
    def stalled(self) -> bool:
        return any(r.stalled for r in self.records)


# ---------------------------------------------------------------------------
# objective evaluation

def _data_term(I: np.ndarray, u_grid: ScalarField, chi0: np.ndarray,
               p0: float, threshold: float, eta: float, kappa: float,
               need_weights: bool):
    """L1 mismatch of the smoothed exposure plus the smoothed perimeter-
    mismatch penalty; optionally the dF/dI weight field."""
    h = u_grid.spacing
    da = u_grid.cell_area
    t = (I - threshold) / eta
    phi = heaviside_step(t)
    mismatch = phi - chi0
    area_term = float(np.sum(np.abs(mismatch))) * da
    gx, gy = grad_arrays(phi, h)
    mag = np.sqrt(gx * gx + gy * gy + GRAD_GUARD)
    tv = float(np.sum(mag)) * da
    x = tv - p0
    pen = float(np.sqrt(x * x + kappa * kappa) - kappa)
    value = area_term + pen
    if not need_weights:
        return value, area_term, tv, None
    d_phi = np.sign(mismatch) * da
    s_prime = x / np.sqrt(x * x + kappa * kappa)
    d_phi += s_prime * da * grad_adjoint_arrays(gx / mag, gy / mag, h)
    w_I = d_phi * heaviside_step_deriv(t) / eta
    return value, area_term, tv, w_I


def _mm_value_and_grad(u: ScalarField, eps: float, spec: DoubleWellSpec,
                       need_grad: bool):
    da = u.cell_area
    p = spec.p
    p_conj = p / (p - 1.0)
    uv = u.values
    well_term = spec.c_p / (p_conj * eps) * float(np.sum(spec.well(uv))) * da
    gx, gy = grad_arrays(uv, u.spacing)
    mag2 = gx * gx + gy * gy
    grad_term = spec.c_p * eps ** (p - 1.0) / p * float(
        np.sum(mag2 ** (p / 2.0))) * da
    if not need_grad:
        return well_term + grad_term, None
    if spec.well_deriv is None:
        raise ConfigurationError("well derivative required for gradients")
    g = spec.c_p / (p_conj * eps) * np.asarray(spec.well_deriv(uv)) * da
    if p == 2.0:
        flux_x, flux_y = gx, gy
    else:
        m = (mag2 + GRAD_GUARD) ** (p / 2.0 - 1.0)
        flux_x, flux_y = m * gx, m * gy
    g = g + spec.c_p * eps ** (p - 1.0) * da * grad_adjoint_arrays(
        flux_x, flux_y, u.spacing)
    return well_term + grad_term, g


def d_eta(u: ScalarField, target: BinaryPattern, cfg: OpticsConfig,
          eta: float, kappa: float | None = None, *,
          allow_large: bool = False) -> float:
    """Distance between the smoothly exposed image of u and the target."""
    if eta <= 0:
        raise DomainError("eta must be positive")
    p0 = perimeter(target)
    kappa = 1e-3 * max(p0, 1.0) if kappa is None else kappa
    I = hopkins_intensity(u, cfg, allow_large=allow_large)
    value, _, _, _ = _data_term(I.values, u, target.grid.values, p0,
                                cfg.threshold, eta, kappa, need_weights=False)
    return value


def F_eps(u: ScalarField, target: BinaryPattern, cfg: OpticsConfig,
          obj: ObjectiveConfig, eps: float, *,
          allow_large: bool = False) -> float:
    """Full regularized objective; +inf sentinel on support violations."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    if support_violation(u, obj.well):
        return INF
    eta = obj.eta_of(eps, cfg.threshold)
    kappa = obj.kappa_for(perimeter(target))
    value = d_eta(u, target, cfg, eta, kappa, allow_large=allow_large)
    mm, _ = _mm_value_and_grad(u, eps, obj.well, need_grad=False)
    return value + obj.weight * mm


def gradient_F_eps(u: ScalarField, target: BinaryPattern, cfg: OpticsConfig,
                   obj: ObjectiveConfig, eps: float, *,
                   allow_large: bool = False) -> ScalarField:
    """Analytic gradient of F_eps; matches central finite differences."""
    _, grad, _ = _value_and_gradient(u, target, cfg, obj, eps,
                                     allow_large=allow_large)
    return u.with_values(grad)


def _value_and_gradient(u, target, cfg, obj, eps, *, allow_large=False):
    eta = obj.eta_of(eps, cfg.threshold)
    p0 = perimeter(target)
    kappa = obj.kappa_for(p0)
    I, adjoint = intensity_with_adjoint(u, cfg, allow_large=allow_large)
    data, area_term, tv, w_I = _data_term(
        I.values, u, target.grid.values, p0, cfg.threshold, eta, kappa,
        need_weights=True)
    grad = adjoint(w_I)
    mm, mm_grad = _mm_value_and_grad(u, eps, obj.well, need_grad=True)
    value = data + obj.weight * mm
    grad = grad + obj.weight * mm_grad
    parts = {"d_eta": data, "p_eps": mm, "area": area_term, "tv": tv}
    return value, grad, parts


def F_zero(u: ScalarField, target: BinaryPattern, cfg: OpticsConfig,
           weight: float, well: DoubleWellSpec, *,
           allow_large: bool = False) -> float:
    """Sharp-interface objective: strict distance of the exposed set to the
    target plus the perimeter penalty.  +inf for non-binary or unsupported u."""
    p = limit_perimeter(u, well)
    if p == INF:
        return INF
    I = hopkins_intensity(u, cfg, allow_large=allow_large)
    omega = exposed_set(I, cfg.threshold)
    return strict_distance(omega, target).d3 + weight * p


# ---------------------------------------------------------------------------
# projection and descent

def _project_l1_ball(diff: np.ndarray, radius: float) -> np.ndarray:
    """Euclidean projection of a vector onto the L1 ball of given radius."""
    a = np.abs(diff)
    total = a.sum()
    if total <= radius:
        return diff
    srt = np.sort(a.ravel())[::-1]
    cumsum = np.cumsum(srt)
    idx = np.arange(1, srt.size + 1)
    rho = np.nonzero(srt * idx > (cumsum - radius))[0][-1]
    theta = (cumsum[rho] - radius) / (rho + 1.0)
    return np.sign(diff) * np.maximum(a - theta, 0.0)


def _make_projector(u0: ScalarField, obj: ObjectiveConfig):
    allowed = obj.well.region.admissible_mask(u0)
    if obj.gamma is None:
        def project(arr):
            return np.where(allowed, np.clip(arr, 0.0, 1.0), 0.0)
        return project

    ref = obj.reference.grid.values
    da = u0.cell_area
    radius_cells = obj.gamma / da

    def project(arr):
        arr = np.where(allowed, np.clip(arr, 0.0, 1.0), 0.0)
        diff = _project_l1_ball(arr - ref, radius_cells)
        return np.where(allowed, np.clip(ref + diff, 0.0, 1.0), 0.0)

    return project


def minimize_F_eps(u0: ScalarField, target: BinaryPattern, cfg: OpticsConfig,
                   obj: ObjectiveConfig, eps: float, *,
                   allow_large: bool = False
                   ) -> tuple[ScalarField, MinimizeDiagnostics]:
    """Projected gradient descent with backtracking line search.

    Iterates stay in [0,1], vanish on the support collar, and the objective
    never increases across accepted steps.  Returns the best iterate with a
    stall flag when the line search cannot find a decrease.
    """
    project = _make_projector(u0, obj)
    u = u0.with_values(project(u0.values))

    def value_at(arr):
        f = u0.with_values(arr)
        eta = obj.eta_of(eps, cfg.threshold)
        p0 = perimeter(target)
        kappa = obj.kappa_for(p0)
        I = hopkins_intensity(f, cfg, allow_large=allow_large)
        v, _, _, _ = _data_term(I.values, f, target.grid.values, p0,
                                cfg.threshold, eta, kappa, need_weights=False)
        mm, _ = _mm_value_and_grad(f, eps, obj.well, need_grad=False)
        return v + obj.weight * mm

    f_cur, grad, _ = _value_and_gradient(u, target, cfg, obj, eps,
                                         allow_large=allow_large)
    values = [f_cur]
    step = obj.step0
    stalled = False
    converged = False
    total_backtracks = 0
    flat_count = 0
    iterations = 0
    for iterations in range(1, obj.max_iter + 1):
        accepted = False
        t = step
        for bt in range(obj.max_backtracks):
            trial = project(u.values - t * grad)
            f_trial = value_at(trial)
            if f_trial < f_cur:
                accepted = True
                break
            t *= obj.shrink
        total_backtracks += bt
        if not accepted:
            stalled = True
            break
        step = t * obj.grow if bt == 0 else t
        drop = f_cur - f_trial
        u = u.with_values(trial)
        _, grad, _ = _value_and_gradient(u, target, cfg, obj, eps,
                                         allow_large=allow_large)
        f_cur = f_trial
        values.append(f_trial)
        if drop <= obj.tol * max(1.0, abs(f_trial)):
            flat_count += 1
            if flat_count >= 2:
                converged = True
                break
        else:
            flat_count = 0
    diag = MinimizeDiagnostics(values=tuple(values), iterations=iterations,
                               stalled=stalled, converged=converged,
                               backtracks=total_backtracks)
    return u, diag


# ---------------------------------------------------------------------------
# continuation sweep

def signed_distance(pattern: BinaryPattern) -> np.ndarray:
    """Signed distance to the pattern boundary, positive inside."""
    bm = pattern.bitmap
    h = pattern.grid.spacing
    if not bm.any():
        return np.full(bm.shape, -np.inf)
    if bm.all():
        return np.full(bm.shape, np.inf)
    inside = distance_transform_edt(bm, sampling=h)
    outside = distance_transform_edt(~bm, sampling=h)
    return inside - outside


def mollified_target(target: BinaryPattern, eps: float,
                     obj: ObjectiveConfig) -> ScalarField:
    """Initial guess: the optimal transition profile swept along the target
    boundary, projected onto the admissible set."""
    sd = signed_distance(target)
    with np.errstate(over="ignore"):
        vals = 1.0 / (1.0 + np.exp(np.clip(-3.0 * sd / eps, -500.0, 500.0)))
    allowed = obj.well.region.admissible_mask(target.grid)
    return target.grid.with_values(np.where(allowed, vals, 0.0))


def gamma_sweep(target: BinaryPattern, cfg: OpticsConfig,
                obj: ObjectiveConfig, *,
                allow_large: bool = False) -> SweepTrace:
    """Minimize F_eps along the decreasing eps schedule with warm starts.

    The first stage starts from the mollified target; each later stage starts
    from the previous minimizer.  Records the uniform bound constant (the
    objective of the mollified target, the recovery-sequence certificate) and
    scores the final minimizer with the sharp functional after thresholding
    at 1/2.
    """
    records = []
    bound = 0.0
    u = None
    prev = None
    for eps in obj.eps_schedule:
        seed = mollified_target(target, eps, obj)
        f_seed = F_eps(seed, target, cfg, obj, eps, allow_large=allow_large)
        bound = max(bound, f_seed)
        if u is None:
            u = seed
        u, diag = minimize_F_eps(u, target, cfg, obj, eps,
                                 allow_large=allow_large)
        eta = obj.eta_of(eps, cfg.threshold)
        de = d_eta(u, target, cfg, eta, obj.kappa_for(perimeter(target)),
                   allow_large=allow_large)
        mm, _ = _mm_value_and_grad(u, eps, obj.well, need_grad=False)
        l1_step = 0.0 if prev is None else l1_distance(prev, u)
        records.append(SweepRecord(
            eps=eps, f_eps=diag.values[-1], d_eta=de, p_eps=mm,
            l1_step=l1_step, iterations=diag.iterations,
            stalled=diag.stalled, minimizer=u))
        prev = u
    binary = BinaryPattern.from_bitmap(u.values > 0.5, u.spacing, u.origin)
    u_bin = u.with_values(binary.grid.values)
    fz = F_zero(u_bin, target, cfg, obj.weight, obj.well,
                allow_large=allow_large)
    I = hopkins_intensity(u_bin, cfg, allow_large=allow_large)
    omega = exposed_set(I, cfg.threshold)
    report = strict_distance(omega, target)
    return SweepTrace(records=tuple(records), bound_constant=bound,
                      final_mask=u, final_binary=binary, f_zero=fz,
                      report=report)
