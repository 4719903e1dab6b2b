"""Social-planner benchmark: minimize the sum of all players' costs.

The planner's problem is solved in closed form on any graph (transitivity
not needed).  With M the Gram matrix of the terminal alignment functionals
(M = L^T L when no vertex is isolated), the value matrix is

    F(t) = c M (I + c(T-t) M)^{-1},

the noise term is h(t) = (sigma^2/2) log det(I + c(T-t) M), and the
optimal control is -F(t) x.  Everything below is evaluated per eigenvalue
nu >= 0 of M, where the F eigenvalue is c*nu / (1 + c(T-t)*nu).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParameterError
from .flow import DEFAULT_ODE_STEPS
from .graphs import Graph
from .spectral import EigenSystem, SpectralMeasure, eigendecompose
from .strategies import LinearProfile, alignment_functionals, _uniform_grid


@dataclass
class CoopKernel:
    """Eigen-representation of the planner's Riccati flow."""

    graph: Graph
    eigen: EigenSystem  # of the PSD matrix M
    c: float
    T: float
    sigma: float

    @property
    def n(self) -> int:
        return self.graph.n


def coop_kernel(g: Graph, c: float, T: float, sigma: float) -> CoopKernel:
    """Build the cooperative kernel.

    Isolated vertices are handled by substituting the identity row for the
    missing neighbor average, exactly as in the per-player cost; for
    non-regular graphs M = L^T L is formed directly (L itself need not be
    symmetric).
    """
    if c <= 0 or T <= 0 or sigma <= 0:
        raise ParameterError(f"c, T, sigma must be positive, got {c}, {T}, {sigma}")
    functionals = alignment_functionals(g)
    gram = functionals.T @ functionals
    es = eigendecompose(0.5 * (gram + gram.T))
    clipped = EigenSystem(np.clip(es.eigenvalues, 0.0, None), es.eigenvectors)
    return CoopKernel(graph=g, eigen=clipped, c=float(c), T=float(T), sigma=float(sigma))


def _check_time(k: CoopKernel, t: float) -> float:
    if not -1e-12 <= t <= k.T + 1e-12:
        raise ParameterError(f"t = {t} outside the horizon [0, {k.T}]")
    return min(max(float(t), 0.0), k.T)


def coop_feedback_eigenvalues(k: CoopKernel, t: float) -> np.ndarray:
    t = _check_time(k, t)
    nu = k.eigen.eigenvalues
    return k.c * nu / (1.0 + k.c * (k.T - t) * nu)


def coop_feedback_matrix(k: CoopKernel, t: float) -> np.ndarray:
    phi = coop_feedback_eigenvalues(k, t)
    v = k.eigen.eigenvectors
    f = (v * phi) @ v.T
    return 0.5 * (f + f.T)


def coop_value(k: CoopKernel, x0: np.ndarray | None = None) -> float:
    """Per-player cooperative value:

        (sigma^2/2) * (1/n) sum_k log(1 + c T nu_k)  [+ x0^T F(0) x0 / (2n)].
    """
    nu = k.eigen.eigenvalues
    value = 0.5 * k.sigma**2 * float(np.mean(np.log1p(k.c * k.T * nu)))
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (k.n,):
            raise ParameterError(f"x0 must have length {k.n}")
        value += 0.5 * float(x0 @ coop_feedback_matrix(k, 0.0) @ x0) / k.n
    return value


def _simpson_weights(m: int, h: float) -> np.ndarray:
    w = np.ones(m + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * (h / 3.0)


def coop_variance(k: CoopKernel, t: float, s_steps: int | None = None) -> float:
    """Population-average state variance under the planner's control:

        sigma^2 * (1/n) sum_k int_0^t ((1 + c(T-t) nu_k)/(1 + c(T-s) nu_k))^2 ds.

    On a transitive graph this is also every single player's variance.
    """
    t = _check_time(k, t)
    if t == 0.0:
        return 0.0
    if s_steps is None:
        s_steps = max(16, math.ceil(DEFAULT_ODE_STEPS * t / k.T))
    m = s_steps + (s_steps % 2)
    s = np.linspace(0.0, t, m + 1)
    nu = k.eigen.eigenvalues
    num = 1.0 + k.c * (k.T - t) * nu
    denom = 1.0 + k.c * np.outer(nu, k.T - s)
    integrals = ((num[:, None] / denom) ** 2) @ _simpson_weights(m, t / m)
    return float(k.sigma**2 * integrals.mean())


def coop_h(k: CoopKernel, t: float) -> float:
    """Noise term via the spectrum: (sigma^2/2) sum log(1 + c(T-t) nu)."""
    t = _check_time(k, t)
    return 0.5 * k.sigma**2 * float(np.sum(np.log1p(k.c * (k.T - t) * k.eigen.eigenvalues)))


def coop_h_logdet(k: CoopKernel, t: float) -> float:
    """Same noise term via a dense log-determinant (independent route)."""
    t = _check_time(k, t)
    v = k.eigen.eigenvectors
    gram = (v * k.eigen.eigenvalues) @ v.T
    sign, logdet = np.linalg.slogdet(np.eye(k.n) + k.c * (k.T - t) * gram)
    if sign <= 0:
        raise ParameterError("cooperative determinant lost positivity")
    return 0.5 * k.sigma**2 * float(logdet)


def coop_profile(k: CoopKernel, steps: int = DEFAULT_ODE_STEPS) -> LinearProfile:
    """The planner's control as a LinearProfile (K(t) = F(t)), usable with
    the strategy-evaluation moment ODEs for cross-checking."""
    return LinearProfile(
        n=k.n,
        T=k.T,
        grid=_uniform_grid(k.T, steps),
        tag="custom",
        matrix_fn=lambda t: coop_feedback_matrix(k, t),
    )


def coop_value_measure(mu: SpectralMeasure, c: float, T: float, sigma: float) -> float:
    """Per-player cooperative value for a (limit) spectral measure:
    (sigma^2/2) * integral of log(1 + c T lam^2) dmu(lam)."""
    return 0.5 * sigma**2 * mu.integrate(lambda lam: np.log1p(c * T * lam**2))


def coop_variance_measure(
    mu: SpectralMeasure, c: float, T: float, sigma: float, t: float, s_steps: int | None = None
) -> float:
    """Cooperative per-player variance for a (limit) spectral measure."""
    if not -1e-12 <= t <= T + 1e-12:
        raise ParameterError(f"t = {t} outside the horizon [0, {T}]")
    t = min(max(float(t), 0.0), T)
    if t == 0.0:
        return 0.0
    if s_steps is None:
        s_steps = max(16, math.ceil(DEFAULT_ODE_STEPS * t / T))
    m = s_steps + (s_steps % 2)
    s = np.linspace(0.0, t, m + 1)
    nu = mu.nodes**2
    num = 1.0 + c * (T - t) * nu
    denom = 1.0 + c * np.outer(nu, T - s)
    integrals = ((num[:, None] / denom) ** 2) @ _simpson_weights(m, t / m)
    return float(sigma**2 * (mu.weights @ integrals))
