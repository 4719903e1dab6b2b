"""The flocking-rate ODE and its spectral growth function.

For a spectral measure mu, define

    Q(x)  = exp( integral of log(1 - x*lam) dmu(lam) ),   x >= 0,
    Q'(x) = Q(x) * integral of (-lam) / (1 - x*lam) dmu(lam).

The flocking schedule f solves f'(t) = c * Q'(f(t)), f(0) = 0, and feeds
every equilibrium quantity through f(T - t).  Q' is bounded in (0, 1] and
globally 4-Lipschitz, so a fixed-step RK4 integrator is accurate and
stiffness-free; off-grid values use shape-preserving (PCHIP) interpolation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, NumericError, ParameterError
from .spectral import SpectralMeasure

#: Default RK4 step count for solve_f.
DEFAULT_ODE_STEPS = 2000

#: Minimum step count accepted by solve_f.
MIN_ODE_STEPS = 100

#: Absolute slack allowed when checking analytic bounds on Q and f.
BOUND_TOL = 1e-8

#: Convergence target for the cycle closed form's scalar root-find.
PHI_INVERSE_TOL = 1e-12


def q_eval(mu: SpectralMeasure, x: float) -> tuple[float, float]:
    """Evaluate (Q(x), Q'(x)) for x >= 0.

    Checks the analytic envelopes 1 <= Q <= 1 + x and 0 < Q' <= 1; a
    violation beyond tolerance means the measure's quadrature is broken.
    """
    if x < 0:
        raise ParameterError(f"q_eval needs x >= 0, got {x}")
    q, qp = _q_pair(mu, float(x))
    if not (1.0 - BOUND_TOL <= q <= 1.0 + x + BOUND_TOL):
        raise NumericError(f"Q({x}) = {q} escapes its envelope [1, 1 + x]")
    if not (0.0 < qp <= 1.0 + BOUND_TOL):
        raise NumericError(f"Q'({x}) = {qp} escapes its envelope (0, 1]")
    return q, qp


def _q_pair(mu: SpectralMeasure, x: float) -> tuple[float, float]:
    lam, w = mu.nodes, mu.weights
    resolvent = 1.0 - x * lam
    q = float(np.exp(w @ np.log(resolvent)))
    qp = q * float(w @ (-lam / resolvent))
    return q, qp


def _q_prime(mu: SpectralMeasure, x: float) -> float:
    return _q_pair(mu, x)[1]


@dataclass
class FlockingSchedule:
    """Tabulated solution of f' = c*Q'(f) on a uniform grid of [0, T]."""

    c: float
    T: float
    grid: np.ndarray
    f_values: np.ndarray
    measure: SpectralMeasure
    _interp: PchipInterpolator = field(init=False, repr=False)

    def __post_init__(self):
        self._interp = PchipInterpolator(self.grid, self.f_values)

    @property
    def steps(self) -> int:
        return self.grid.size - 1

    def value(self, t):
        """f(t) for t in [0, T]; monotone cubic between grid nodes."""
        t = np.asarray(t, dtype=float)
        if np.any(t < -1e-9) or np.any(t > self.T + 1e-9):
            raise ParameterError(f"schedule evaluated outside [0, {self.T}]")
        out = self._interp(np.clip(t, 0.0, self.T))
        return float(out) if out.ndim == 0 else out

    def slope(self, t):
        """f'(t) recovered exactly from the ODE as c * Q'(f(t))."""
        f = np.atleast_1d(self.value(t))
        lam, w = self.measure.nodes, self.measure.weights
        resolvent = 1.0 - f[:, None] * lam[None, :]
        qp = np.exp(np.log(resolvent) @ w) * ((-lam / resolvent) @ w)
        out = self.c * qp
        return float(out[0]) if np.isscalar(t) or np.asarray(t).ndim == 0 else out


def solve_f(
    mu: SpectralMeasure, c: float, T: float, steps: int = DEFAULT_ODE_STEPS
) -> FlockingSchedule:
    """Solve f' = c*Q'(f), f(0) = 0, by classical RK4 with fixed step T/steps.

    The returned schedule is checked against the analytic envelope
    0 <= f(t) <= c*t, the slope monotonicity implied by concavity, and the
    Taylor lower bound c*t - (c^2 t^2/2 + c^3 t^3/6) * Var(mu); violations
    raise NumericError since they indicate quadrature or step-size failure.
    """
    if c <= 0 or T <= 0:
        raise ParameterError(f"solve_f needs c > 0 and T > 0, got c={c}, T={T}")
    if steps < MIN_ODE_STEPS:
        raise ParameterError(f"solve_f needs steps >= {MIN_ODE_STEPS}, got {steps}")
    h = T / steps
    grid = np.linspace(0.0, T, steps + 1)
    f_values = np.empty(steps + 1)
    f_values[0] = 0.0
    f = 0.0
    for k in range(steps):
        k1 = c * _q_prime(mu, f)
        k2 = c * _q_prime(mu, f + 0.5 * h * k1)
        k3 = c * _q_prime(mu, f + 0.5 * h * k2)
        k4 = c * _q_prime(mu, f + h * k3)
        f += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
        f_values[k + 1] = f
    schedule = FlockingSchedule(c=float(c), T=float(T), grid=grid, f_values=f_values, measure=mu)
    _check_schedule(schedule)
    return schedule


def _check_schedule(s: FlockingSchedule) -> None:
    c, t, f = s.c, s.grid, s.f_values
    tol = BOUND_TOL * max(1.0, c * s.T)
    if f[0] != 0.0:
        raise NumericError("schedule must start at f(0) = 0")
    if np.any(f < -tol) or np.any(f > c * t + tol):
        raise NumericError("schedule escapes the envelope 0 <= f(t) <= c*t")
    diffs = np.diff(f)
    if np.any(diffs < -tol):
        raise NumericError("schedule is not nondecreasing")
    if np.any(np.diff(diffs) > tol):
        raise NumericError("schedule slopes are not nonincreasing (concavity lost)")
    var = s.measure.variance()
    lower = c * t - (0.5 * c**2 * t**2 + c**3 * t**3 / 6.0) * var
    if np.any(f < lower - tol):
        raise NumericError("schedule undercuts its Taylor lower bound")


def _phi(x: float) -> float:
    s = np.sqrt(1.0 + 2.0 * x)
    return float(np.log1p(s) - s + x + 0.5)


def _phi_prime(x: float) -> float:
    s = np.sqrt(1.0 + 2.0 * x)
    return float(s / (1.0 + s))


def cycle_closed_form(c: float, t: float) -> float:
    """Closed-form flocking schedule for the cycle limit measure.

    Returns the inverse of Phi(x) = log(1 + sqrt(1+2x)) - sqrt(1+2x) + x + 1/2
    at log(2) + (c*t - 1)/2, computed by safeguarded Newton iteration with a
    bisection fallback; Phi is strictly increasing so the root is unique.
    """
    if c <= 0:
        raise ParameterError(f"cycle_closed_form needs c > 0, got {c}")
    if t < 0:
        raise ParameterError(f"cycle_closed_form needs t >= 0, got {t}")
    target = float(np.log(2.0) + 0.5 * (c * t - 1.0))
    floor = _phi(0.0)
    if target < floor - PHI_INVERSE_TOL:
        raise DomainError(f"target {target} lies below Phi(0) = {floor}")
    if target <= floor:
        return 0.0
    lo, hi = 0.0, max(1.0, target - floor)
    while _phi(hi) < target:
        hi *= 2.0
    x = min(max(target - np.log(2.0) + 0.5, 0.0), hi)
    for _ in range(200):
        err = _phi(x) - target
        if abs(err) <= PHI_INVERSE_TOL:
            return float(x)
        if err > 0:
            hi = x
        else:
            lo = x
        step = err / _phi_prime(x)
        x_new = x - step
        if not (lo < x_new < hi):
            x_new = 0.5 * (lo + hi)
        x = x_new
    raise NumericError("Phi inverse did not converge to tolerance")
