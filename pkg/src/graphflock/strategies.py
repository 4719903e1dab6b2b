"""Cost evaluation, best responses, and approximate-equilibrium audits.

A LinearProfile assigns every player the feedback control
alpha_i(t, x) = -(row i of K(t)) . x.  Costs under a profile are computed
by deterministic moment propagation; best responses against a frozen
profile reduce to a backward matrix Riccati equation (derivation in the
comments of best_response).  Together they quantify how far any profile is
from equilibrium, which is what the Nash and epsilon-Nash audits report.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import NumericError, ParameterError
from .flow import DEFAULT_ODE_STEPS
from .graphs import Graph
from .equilibrium import EquilibriumKernel, p_matrix

#: Abort threshold for the backward Riccati solve; this game's Riccati is
#: globally solvable, so exceeding it means a bug or a pathological profile.
RICCATI_BLOWUP_CAP = 1e8


@dataclass
class LinearProfile:
    """Time-dependent linear feedback profile on a uniform grid of [0, T].

    matrix_fn evaluates the full n x n feedback map at any t in [0, T]
    (RK4 needs half-step values); the grid fixes the discretization that
    cost and best-response solvers use.
    """

    n: int
    T: float
    grid: np.ndarray
    tag: str
    matrix_fn: Callable[[float], np.ndarray]
    _stage_cache: list | None = field(default=None, repr=False)

    @property
    def steps(self) -> int:
        return self.grid.size - 1

    def at(self, t: float) -> np.ndarray:
        return self.matrix_fn(float(t))

    def stage_matrices(self) -> list[np.ndarray]:
        """Feedback matrices on the half-step grid (2*steps + 1 points).

        Cached on the profile: audits solve one Riccati per player against
        the same frozen profile, and re-evaluating the map dominates their
        runtime otherwise.
        """
        if self._stage_cache is None:
            half = np.linspace(0.0, self.T, 2 * self.steps + 1)
            self._stage_cache = [self.matrix_fn(float(t)) for t in half]
        return self._stage_cache


def _uniform_grid(T: float, steps: int) -> np.ndarray:
    if steps < 1:
        raise ParameterError(f"profile needs at least one step, got {steps}")
    return np.linspace(0.0, T, steps + 1)


def mf_profile(g: Graph, c: float, T: float, steps: int = DEFAULT_ODE_STEPS) -> LinearProfile:
    """Decentralized mean-field profile: every player applies
    -c x_i / (1 + c(T - t)), independent of the graph."""
    n = g.n
    eye = np.eye(n)

    def matrix_fn(t: float) -> np.ndarray:
        return (c / (1.0 + c * (T - t))) * eye

    return LinearProfile(n=n, T=float(T), grid=_uniform_grid(T, steps), tag="mean_field", matrix_fn=matrix_fn)


def equilibrium_profile(k: EquilibriumKernel) -> LinearProfile:
    """Profile whose rows are the equilibrium feedback P(t)."""
    return LinearProfile(
        n=k.n,
        T=k.T,
        grid=k.schedule.grid.copy(),
        tag="equilibrium",
        matrix_fn=lambda t: p_matrix(k, t),
    )


def zero_profile(g: Graph, T: float, steps: int = DEFAULT_ODE_STEPS) -> LinearProfile:
    """All players apply the zero control (states are Brownian motions)."""
    n = g.n
    zero = np.zeros((n, n))
    return LinearProfile(n=n, T=float(T), grid=_uniform_grid(T, steps), tag="custom", matrix_fn=lambda t: zero)


def custom_profile(
    g: Graph, T: float, matrix_fn: Callable[[float], np.ndarray], steps: int = DEFAULT_ODE_STEPS
) -> LinearProfile:
    return LinearProfile(n=g.n, T=float(T), grid=_uniform_grid(T, steps), tag="custom", matrix_fn=matrix_fn)


def alignment_functionals(g: Graph) -> np.ndarray:
    """Row i is the terminal functional whose square is penalized for
    player i: e_i - (neighbor average), or e_i alone for isolated i."""
    out = np.eye(g.n)
    for i in range(g.n):
        deg = g.degrees[i]
        if deg > 0:
            out[i] -= g.adjacency[i] / deg
    return out


def _check_profile(g: Graph, prof: LinearProfile) -> None:
    if prof.n != g.n:
        raise ParameterError(f"profile is for {prof.n} players, graph has {g.n}")


def profile_costs(
    g: Graph,
    prof: LinearProfile,
    sigma: float,
    c: float,
    x0: np.ndarray | None = None,
) -> np.ndarray:
    """Expected cost of every player under the profile, in one propagation.

    The state is Gaussian with mean m and covariance S solving
    m' = -K m and S' = -K S - S K^T + sigma^2 I; player i accumulates
    (1/2) k_i (S + m m^T) k_i^T along the way (k_i = row i of K) plus the
    terminal penalty (c/2) l_i (S(T) + m m^T) l_i^T.  Integration is RK4
    on the profile grid.
    """
    _check_profile(g, prof)
    n = g.n
    m = np.zeros(n) if x0 is None else np.asarray(x0, dtype=float).copy()
    if m.shape != (n,):
        raise ParameterError(f"x0 must have length {n}")
    s_mat = np.zeros((n, n))
    costs = np.zeros(n)
    h = prof.T / prof.steps
    eye = np.eye(n)
    sig2 = sigma**2
    stages = prof.stage_matrices()

    def derivs(m_cur, s_cur, kmat):
        second = s_cur + np.outer(m_cur, m_cur)
        dm = -kmat @ m_cur
        ds = -kmat @ s_cur - s_cur @ kmat.T + sig2 * eye
        dj = 0.5 * np.einsum("ij,jk,ik->i", kmat, second, kmat)
        return dm, ds, dj

    for j in range(prof.steps):
        k_lo, k_mid, k_hi = stages[2 * j], stages[2 * j + 1], stages[2 * j + 2]
        dm1, ds1, dj1 = derivs(m, s_mat, k_lo)
        dm2, ds2, dj2 = derivs(m + 0.5 * h * dm1, s_mat + 0.5 * h * ds1, k_mid)
        dm3, ds3, dj3 = derivs(m + 0.5 * h * dm2, s_mat + 0.5 * h * ds2, k_mid)
        dm4, ds4, dj4 = derivs(m + h * dm3, s_mat + h * ds3, k_hi)
        m = m + (h / 6.0) * (dm1 + 2 * dm2 + 2 * dm3 + dm4)
        s_mat = s_mat + (h / 6.0) * (ds1 + 2 * ds2 + 2 * ds3 + ds4)
        s_mat = 0.5 * (s_mat + s_mat.T)
        costs += (h / 6.0) * (dj1 + 2 * dj2 + 2 * dj3 + dj4)

    functionals = alignment_functionals(g)
    second = s_mat + np.outer(m, m)
    costs += 0.5 * c * np.einsum("ij,jk,ik->i", functionals, second, functionals)
    return costs


def cost_under_profile(
    g: Graph,
    prof: LinearProfile,
    i: int,
    sigma: float,
    c: float,
    x0: np.ndarray | None = None,
) -> float:
    """Player i's expected cost under the profile."""
    if not 0 <= i < g.n:
        raise ParameterError(f"invalid player index {i}")
    return float(profile_costs(g, prof, sigma, c, x0)[i])


@dataclass
class BestResponse:
    """Optimal value and feedback of one player against a frozen profile."""

    value: float
    grid: np.ndarray
    feedback: np.ndarray  # feedback[j] = optimal control row at grid[j]


def best_response(
    g: Graph,
    prof: LinearProfile,
    i: int,
    c: float,
    sigma: float,
    x0: np.ndarray | None = None,
) -> BestResponse:
    """Exact best response of player i with all other rows of the profile
    frozen.

    Freezing opponents makes player i's problem a linear-quadratic control
    problem.  The quadratic value ansatz v(t, x) = x^T F(t) x / 2 + h(t)
    turns its HJB equation into the backward matrix Riccati system

        F' = F e_i e_i^T F + K^T F + F K - K^T e_i e_i^T F - F e_i e_i^T K,
        h' = -(sigma^2 / 2) Tr F,
        F(T) = c l l^T,   h(T) = 0,

    with l player i's terminal alignment functional, and the optimal
    control is -(e_i^T F(t)) x.  The right-hand side is re-symmetrized
    every step to suppress drift; the returned value is
    x0^T F(0) x0 / 2 + h(0).
    """
    _check_profile(g, prof)
    if not 0 <= i < g.n:
        raise ParameterError(f"invalid player index {i}")
    n = g.n
    ell = alignment_functionals(g)[i]
    f_mat = c * np.outer(ell, ell)
    h_val = 0.0
    steps = prof.steps
    dt = prof.T / steps
    feedback = np.empty((steps + 1, n))
    feedback[steps] = f_mat[i]

    stages = prof.stage_matrices()

    def rhs(f_cur, kmat):
        own = np.outer(f_cur[:, i], f_cur[i, :])
        gmat = kmat.T @ f_cur
        cross = np.outer(kmat[i, :], f_cur[i, :])
        df = own + gmat + gmat.T - cross - cross.T
        dh = -0.5 * sigma**2 * np.trace(f_cur)
        return df, dh

    for j in range(steps, 0, -1):
        k_hi, k_mid, k_lo = stages[2 * j], stages[2 * j - 1], stages[2 * j - 2]
        df1, dh1 = rhs(f_mat, k_hi)
        df2, dh2 = rhs(f_mat - 0.5 * dt * df1, k_mid)
        df3, dh3 = rhs(f_mat - 0.5 * dt * df2, k_mid)
        df4, dh4 = rhs(f_mat - dt * df3, k_lo)
        f_mat = f_mat - (dt / 6.0) * (df1 + 2 * df2 + 2 * df3 + df4)
        f_mat = 0.5 * (f_mat + f_mat.T)
        h_val = h_val - (dt / 6.0) * (dh1 + 2 * dh2 + 2 * dh3 + dh4)
        if np.abs(f_mat).max() > RICCATI_BLOWUP_CAP:
            raise NumericError(
                f"best-response Riccati norm exceeded {RICCATI_BLOWUP_CAP:g} "
                f"near t = {prof.grid[j - 1]:.6g}"
            )
        feedback[j - 1] = f_mat[i]

    value = h_val
    if x0 is not None:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (n,):
            raise ParameterError(f"x0 must have length {n}")
        value += 0.5 * float(x0 @ f_mat @ x0)
    return BestResponse(value=float(value), grid=prof.grid.copy(), feedback=feedback)


def deviation_gap(
    g: Graph,
    prof: LinearProfile,
    i: int,
    c: float,
    sigma: float,
    x0: np.ndarray | None = None,
) -> float:
    """How much player i saves by deviating optimally from the profile.

    Nonnegative up to discretization noise; zero exactly at a Nash
    equilibrium.
    """
    cost = cost_under_profile(g, prof, i, sigma, c, x0)
    return cost - best_response(g, prof, i, c, sigma, x0).value


@dataclass(frozen=True)
class EpsilonBounds:
    """Per-player deviation-gain guarantees for the mean-field profile."""

    per_vertex: np.ndarray
    aggregate: float
    avg_degree_diagnostic: float


def epsilon_bounds(g: Graph, c: float, T: float, sigma: float) -> EpsilonBounds:
    """Guaranteed epsilon-Nash certificates of the mean-field profile:

        eps_v = sigma^2 * (cT/(1+cT)) * sqrt( cT(2+cT) / deg(v) ),

    zero for isolated vertices.  The aggregate bound substitutes
    max(1, min degree), and the diagnostic (1/n) sum (1 v deg)^(-1/2)
    measures denseness in the averaged sense.
    """
    front = sigma**2 * (c * T / (1.0 + c * T)) * math.sqrt(c * T * (2.0 + c * T))
    deg = g.degrees.astype(float)
    per_vertex = np.where(deg >= 1, front / np.sqrt(np.maximum(deg, 1.0)), 0.0)
    aggregate = front / math.sqrt(max(1, g.min_degree))
    diagnostic = float(np.mean(1.0 / np.sqrt(np.maximum(deg, 1.0))))
    return EpsilonBounds(per_vertex=per_vertex, aggregate=aggregate, avg_degree_diagnostic=diagnostic)


def nash_audit(
    g: Graph,
    prof: LinearProfile,
    c: float,
    sigma: float,
    x0: np.ndarray | None = None,
    gap_tolerance: float = 1e-5,
) -> dict:
    """Audit every player's incentive to deviate from the profile.

    For mean-field profiles each gap is compared against its epsilon_v
    certificate; for other profiles against the numerical tolerance alone
    (an exact equilibrium should show pure discretization error).
    """
    _check_profile(g, prof)
    costs = profile_costs(g, prof, sigma, c, x0)
    if prof.tag == "mean_field":
        bounds = epsilon_bounds(g, c, prof.T, sigma).per_vertex
    else:
        bounds = np.zeros(g.n)
    players = []
    for i in range(g.n):
        br = best_response(g, prof, i, c, sigma, x0)
        gap = float(costs[i] - br.value)
        bound = float(bounds[i])
        players.append(
            {
                "vertex": i,
                "cost": float(costs[i]),
                "best_response_value": br.value,
                "gap": gap,
                "epsilon_bound": bound,
                "satisfied": bool(gap <= bound + gap_tolerance),
            }
        )
    gaps = [p["gap"] for p in players]
    return {
        "graph": g.spec(),
        "profile": prof.tag,
        "c": c,
        "sigma": sigma,
        "gap_tolerance": gap_tolerance,
        "players": players,
        "max_gap": max(gaps),
        "all_satisfied": all(p["satisfied"] for p in players),
    }
