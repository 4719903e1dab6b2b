"""Semi-explicit Nash equilibrium objects on transitive graphs.

Everything is evaluated in the eigenbasis of the Laplacian L.  With
f = f(T - t) and f' = c*Q'(f), the equilibrium feedback matrix is

    P(t) = -f'(T-t) * L * (I - f(T-t) L)^{-1},

whose eigenvalue on the L-eigenvector with eigenvalue lam is
rho(t) = -f'(T-t)*lam / (1 - f(T-t)*lam).  The equilibrium state at time t
is Gaussian; per eigenvalue the mean coefficient is
(1 - f(T-t)*lam) / (1 - f(T)*lam) and the covariance eigenvalue is
sigma^2 * (1 - f(T-t)*lam)^2 * integral_0^t (1 - f(T-s)*lam)^{-2} ds.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError, ParameterError
from .flow import DEFAULT_ODE_STEPS, FlockingSchedule, solve_f
from .graphs import Graph, Transitivity, graph_distances
from .spectral import EigenSystem, SpectralMeasure, empirical_measure, laplacian_eigensystem


@dataclass(frozen=True)
class GaussianLaw:
    """Mean vector and symmetric PSD covariance of a Gaussian state."""

    mean: np.ndarray
    covariance: np.ndarray

    def cov_eigenvalues(self) -> np.ndarray:
        vals = np.linalg.eigvalsh(self.covariance)
        return np.clip(vals, 0.0, None)

    def to_dict(self) -> dict:
        return {
            "mean": [float(v) for v in self.mean],
            "cov_eigenvalues": [float(v) for v in np.sort(self.cov_eigenvalues())[::-1]],
        }


@dataclass
class EquilibriumKernel:
    """Everything needed to evaluate P(t), state laws, and values."""

    graph: Graph
    eigen: EigenSystem
    measure: SpectralMeasure
    schedule: FlockingSchedule
    c: float
    T: float
    sigma: float
    transitivity: Transitivity = field(default=Transitivity.UNKNOWN)

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def degree(self) -> int:
        return int(self.graph.degrees[0])


def build_kernel(
    g: Graph, c: float, T: float, sigma: float, steps: int = DEFAULT_ODE_STEPS
) -> EquilibriumKernel:
    """Assemble the equilibrium kernel for a regular graph without isolated
    vertices.

    The closed-form equilibrium is only guaranteed on transitive graphs; a
    regular graph of unknown transitivity proceeds with a warning, and the
    Riccati residual operation is the arbiter of whether the formula
    actually solves the Nash system there.
    """
    if sigma <= 0:
        raise ParameterError(f"sigma must be positive, got {sigma}")
    if not g.is_regular:
        raise DomainError("equilibrium kernel needs a regular graph")
    if g.min_degree < 1:
        raise DomainError("equilibrium kernel needs a graph without isolated vertices")
    if not g.transitivity.is_transitive():
        warnings.warn(
            "graph transitivity is not established; equilibrium formulas are "
            "only guaranteed for transitive graphs",
            RuntimeWarning,
            stacklevel=2,
        )
    es = laplacian_eigensystem(g)
    mu = empirical_measure(g, es=es)
    schedule = solve_f(mu, c, T, steps)
    return EquilibriumKernel(
        graph=g,
        eigen=es,
        measure=mu,
        schedule=schedule,
        c=float(c),
        T=float(T),
        sigma=float(sigma),
        transitivity=g.transitivity,
    )


def _check_time(k: EquilibriumKernel, t: float) -> float:
    if not -1e-12 <= t <= k.T + 1e-12:
        raise ParameterError(f"t = {t} outside the horizon [0, {k.T}]")
    return min(max(float(t), 0.0), k.T)


def p_eigenvalues(k: EquilibriumKernel, t: float) -> np.ndarray:
    """Eigenvalues of P(t) paired with the columns of k.eigen.eigenvectors."""
    t = _check_time(k, t)
    lam = k.eigen.eigenvalues
    f = k.schedule.value(k.T - t)
    fp = k.schedule.slope(k.T - t)
    return -fp * lam / (1.0 - f * lam)


def p_matrix(k: EquilibriumKernel, t: float) -> np.ndarray:
    """Dense equilibrium feedback matrix P(t), assembled in the eigenbasis."""
    rho = p_eigenvalues(k, t)
    v = k.eigen.eigenvectors
    p = (v * rho) @ v.T
    return 0.5 * (p + p.T)


def equilibrium_control(k: EquilibriumKernel, i: int, t: float, x: np.ndarray) -> float:
    """Player i's equilibrium control -(row i of P(t)) . x."""
    x = np.asarray(x, dtype=float)
    if x.shape != (k.n,):
        raise ParameterError(f"state vector must have length {k.n}, got shape {x.shape}")
    if not 0 <= i < k.n:
        raise ParameterError(f"invalid player index {i}")
    rho = p_eigenvalues(k, t)
    v = k.eigen.eigenvectors
    return float(-(v[i] * rho) @ (v.T @ x))


def _even_step_count(k: EquilibriumKernel, t: float, s_steps: int | None) -> int:
    if s_steps is None:
        s_steps = max(16, math.ceil(k.schedule.steps * t / k.T))
    return s_steps + (s_steps % 2)


def _simpson_weights(m: int, h: float) -> np.ndarray:
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def _covariance_eigenvalues(
    k: EquilibriumKernel, t: float, s_steps: int | None = None
) -> np.ndarray:
    """sigma^2 (1 - f(T-t) lam)^2 * integral_0^t (1 - f(T-s) lam)^{-2} ds,
    per eigenvalue, with composite Simpson in s."""
    if t == 0.0:
        return np.zeros(k.n)
    lam = k.eigen.eigenvalues
    m = _even_step_count(k, t, s_steps)
    s = np.linspace(0.0, t, m + 1)
    f_s = np.atleast_1d(k.schedule.value(k.T - s))
    w = _simpson_weights(m, t / m)
    integrals = ((1.0 - np.outer(lam, f_s)) ** -2) @ w
    f_t = k.schedule.value(k.T - t)
    return k.sigma**2 * (1.0 - f_t * lam) ** 2 * integrals


def state_law(
    k: EquilibriumKernel,
    t: float,
    x0: np.ndarray | None = None,
    s_steps: int | None = None,
) -> GaussianLaw:
    """Gaussian law of the equilibrium state at time t from initial state x0.

    Mean: (I - f(T-t)L)(I - f(T)L)^{-1} x0.  The population average of the
    mean equals the population average of x0 (the all-ones direction has
    eigenvalue 0).
    """
    t = _check_time(k, t)
    v = k.eigen.eigenvectors
    if x0 is None:
        mean = np.zeros(k.n)
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (k.n,):
            raise ParameterError(f"x0 must have length {k.n}, got shape {x0.shape}")
        lam = k.eigen.eigenvalues
        coef = (1.0 - k.schedule.value(k.T - t) * lam) / (1.0 - k.schedule.value(k.T) * lam)
        mean = (v * coef) @ (v.T @ x0)
    cov_eigs = _covariance_eigenvalues(k, t, s_steps)
    cov = (v * cov_eigs) @ v.T
    return GaussianLaw(mean=mean, covariance=0.5 * (cov + cov.T))


def player_variance(k: EquilibriumKernel, t: float, s_steps: int | None = None) -> float:
    """Variance of one player's state at time t (zero initial states).

    On a transitive graph all players share this value; it is the average
    of the covariance eigenvalues.
    """
    t = _check_time(k, t)
    return float(_covariance_eigenvalues(k, t, s_steps).mean())


def game_value(k: EquilibriumKernel, x0: np.ndarray | None = None) -> float:
    """Average equilibrium cost over players:

        |P(0) x0|^2 / (2 Tr P(0))  -  (sigma^2/2) log( Tr P(0) / (n f'(T)) ).
    """
    rho0 = p_eigenvalues(k, 0.0)
    trace = float(rho0.sum())
    if trace <= 0.0:
        raise DomainError("Tr P(0) must be positive (graph needs an edge)")
    first = 0.0
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (k.n,):
            raise ParameterError(f"x0 must have length {k.n}, got shape {x0.shape}")
        v = k.eigen.eigenvectors
        px0 = (v * rho0) @ (v.T @ x0)
        first = float(px0 @ px0) / (2.0 * trace)
    fp_T = k.schedule.slope(k.T)
    return first - 0.5 * k.sigma**2 * math.log(trace / (k.n * fp_T))


def game_value_spectral(k: EquilibriumKernel) -> float:
    """Independent spectral route to the zero-start value:

        -(sigma^2/2) log( integral of (-lam)/(1 - f(T) lam) dmu(lam) ).
    """
    f_T = k.schedule.value(k.T)
    integral = k.measure.integrate(lambda lam: -lam / (1.0 - f_T * lam))
    return -0.5 * k.sigma**2 * math.log(integral)


def limit_variance(
    mu: SpectralMeasure,
    schedule: FlockingSchedule,
    sigma: float,
    t: float,
    s_steps: int | None = None,
) -> float:
    """Large-population variance at time t for limit measure mu:

        sigma^2 * int_0^t int ((1 - lam f(T-t)) / (1 - lam f(T-s)))^2 dmu ds.
    """
    if schedule.measure is not mu and not (
        schedule.measure.kind == mu.kind
        and np.array_equal(schedule.measure.nodes, mu.nodes)
        and np.array_equal(schedule.measure.weights, mu.weights)
    ):
        raise ParameterError("schedule was not built from the given measure")
    T = schedule.T
    if not -1e-12 <= t <= T + 1e-12:
        raise ParameterError(f"t = {t} outside the horizon [0, {T}]")
    t = min(max(float(t), 0.0), T)
    if t == 0.0:
        return 0.0
    if s_steps is None:
        s_steps = max(16, math.ceil(schedule.steps * t / T))
    m = s_steps + (s_steps % 2)
    s = np.linspace(0.0, t, m + 1)
    lam = mu.nodes
    num = 1.0 - lam * schedule.value(T - t)
    denom = 1.0 - np.outer(np.atleast_1d(schedule.value(T - s)), lam)
    inner = ((num[None, :] / denom) ** 2) @ mu.weights
    return float(sigma**2 * (_simpson_weights(m, t / m) @ inner))


def limit_value(mu: SpectralMeasure, schedule: FlockingSchedule, sigma: float) -> float:
    """Large-population limit of the average equilibrium value:

        -(sigma^2/2) log( integral of (-lam)/(1 - lam f(T)) dmu(lam) ).
    """
    f_T = schedule.value(schedule.T)
    integral = mu.integrate(lambda lam: -lam / (1.0 - lam * f_T))
    return -0.5 * sigma**2 * math.log(integral)


def _f_matrix(k: EquilibriumKernel, i: int, t: float) -> np.ndarray:
    """Player i's quadratic-value matrix P e_i e_i^T P / (Tr(P)/n)."""
    rho = p_eigenvalues(k, t)
    v = k.eigen.eigenvectors
    p = (v * rho) @ v.T
    tau = rho.sum() / k.n
    return np.outer(p[:, i], p[i, :]) / tau


def riccati_residual(k: EquilibriumKernel, i: int, t: float) -> float:
    """Max-norm residual of the coupled Riccati system at an interior time.

    The per-player matrices F^j = P e_j e_j^T P / (Tr(P)/n) must satisfy

        dF^i/dt - (sum_j F^j e_j e_j^T) F^i - F^i (sum_j e_j e_j^T F^j)
                + F^i e_i e_i^T F^i = 0.

    dF^i/dt is taken by a five-point central difference on the schedule
    grid (t snaps to the nearest interior node), so the residual of an
    exact solution is differencing noise.
    """
    if k.transitivity is Transitivity.NOT_TRANSITIVE:
        raise DomainError("Riccati residual is defined via the transitive construction")
    if not 0 <= i < k.n:
        raise ParameterError(f"invalid player index {i}")
    t = _check_time(k, t)
    h = k.T / k.schedule.steps
    j = int(round(t / h))
    j = min(max(j, 2), k.schedule.steps - 2)
    t0 = k.schedule.grid[j]

    stencil = [_f_matrix(k, i, k.schedule.grid[j + o]) for o in (-2, -1, 1, 2)]
    f_dot = (stencil[0] - 8.0 * stencil[1] + 8.0 * stencil[2] - stencil[3]) / (12.0 * h)

    rho = p_eigenvalues(k, t0)
    v = k.eigen.eigenvectors
    p = (v * rho) @ v.T
    tau = rho.sum() / k.n
    f_i = np.outer(p[:, i], p[i, :]) / tau
    p_hat = p * (np.diag(p) / tau)[None, :]  # sum_j F^j e_j e_j^T
    own = np.outer(f_i[:, i], f_i[i, :])
    residual = f_dot - p_hat @ f_i - f_i @ p_hat.T + own
    return float(np.abs(residual).max())


def riccati_terminal_residual(k: EquilibriumKernel, i: int) -> float:
    """Max-norm gap between F^i(T) and its boundary value c L e_i e_i^T L."""
    if not 0 <= i < k.n:
        raise ParameterError(f"invalid player index {i}")
    f_T = _f_matrix(k, i, k.T)
    lam = k.eigen.eigenvalues
    v = k.eigen.eigenvectors
    laplacian = (v * lam) @ v.T
    boundary = k.c * np.outer(laplacian[:, i], laplacian[i, :])
    return float(np.abs(f_T - boundary).max())


def covariance_bound(k: EquilibriumKernel, u: int, v: int, t: float) -> float:
    """Correlation-decay bound with gamma = cT/(1+cT):

        2 sigma^2 t gamma^d (1 + d(1-gamma)) / (delta (1-gamma)^2),

    where d is the graph distance between u and v (bound 0 if infinite).
    """
    for vertex in (u, v):
        if not 0 <= vertex < k.n:
            raise ParameterError(f"invalid vertex {vertex}")
    t = _check_time(k, t)
    dist = graph_distances(k.graph, u)[v]
    if math.isinf(dist):
        return 0.0
    gamma = k.c * k.T / (1.0 + k.c * k.T)
    d = float(dist)
    return (
        2.0
        * k.sigma**2
        * t
        * gamma**d
        * (1.0 + d * (1.0 - gamma))
        / (k.degree * (1.0 - gamma) ** 2)
    )
