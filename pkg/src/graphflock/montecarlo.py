"""Monte Carlo simulation of the controlled particle system.

Paths follow dX_v = alpha_v(t, X) dt + sigma dW_v under any LinearProfile,
discretized by Euler-Maruyama (the noise is additive, so Milstein would
coincide).  Gaussian increments come from counter-based Philox streams
keyed by (seed, step), with the (path, player) layout fixed inside each
step's block: the same config reproduces bit-identical ensembles
regardless of how the work is scheduled.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import NumericError, ParameterError
from .graphs import Graph
from .strategies import LinearProfile

#: Default number of Euler steps per horizon in acceptance runs.
DEFAULT_STEPS_PER_HORIZON = 500

#: Default ensemble size for acceptance runs.
DEFAULT_N_PATHS = 10_000

#: Bounded 1-Lipschitz test functions for concentration checks.
TEST_FUNCTIONS: dict[str, Callable[[np.ndarray], np.ndarray]] = {
    "tanh": np.tanh,
    "clipped_identity": lambda x: np.clip(x, -1.0, 1.0),
    "cosine": np.cos,
}

_TIME_MATCH_TOL = 1e-9


@dataclass(frozen=True)
class SimConfig:
    n_paths: int = DEFAULT_N_PATHS
    dt: float = 1.0 / DEFAULT_STEPS_PER_HORIZON
    seed: int = 0
    record_times: tuple[float, ...] = ()

    def steps_for(self, T: float) -> int:
        steps = round(T / self.dt)
        if steps < 1 or abs(steps * self.dt - T) > _TIME_MATCH_TOL * max(1.0, T):
            raise ParameterError(f"dt = {self.dt} does not divide the horizon T = {T}")
        return steps

    def to_dict(self) -> dict:
        return {
            "n_paths": self.n_paths,
            "dt": self.dt,
            "seed": self.seed,
            "record_times": list(self.record_times),
        }


@dataclass
class PathEnsemble:
    """Recorded states of a simulation: states[t] has shape (n_paths, n)."""

    times: tuple[float, ...]
    states: dict[float, np.ndarray]
    profile_tag: str
    graph_spec: dict
    config: SimConfig
    sigma: float

    def at(self, t: float) -> np.ndarray:
        for rec in self.times:
            if abs(rec - t) <= _TIME_MATCH_TOL:
                return self.states[rec]
        raise ParameterError(f"time {t} was not recorded (recorded: {self.times})")


def _step_generator(seed: int, step: int) -> np.random.Generator:
    # Disjoint 2^128-wide counter blocks per step: streams never overlap.
    return np.random.Generator(np.random.Philox(key=int(seed), counter=step << 128))


def simulate(g: Graph, prof: LinearProfile, sigma: float, cfg: SimConfig) -> PathEnsemble:
    """Euler-Maruyama ensemble of the controlled system under the profile."""
    if prof.n != g.n:
        raise ParameterError(f"profile is for {prof.n} players, graph has {g.n}")
    if cfg.n_paths < 1:
        raise ParameterError(f"n_paths must be >= 1, got {cfg.n_paths}")
    if cfg.dt <= 0:
        raise ParameterError(f"dt must be positive, got {cfg.dt}")
    steps = cfg.steps_for(prof.T)
    record_times = cfg.record_times or (prof.T,)
    record_index: dict[int, float] = {}
    for t in record_times:
        j = round(t / cfg.dt)
        if not 0 <= j <= steps or abs(j * cfg.dt - t) > _TIME_MATCH_TOL * max(1.0, prof.T):
            raise ParameterError(f"record time {t} is not on the simulation grid")
        record_index[j] = float(t)

    n = g.n
    x = np.zeros((cfg.n_paths, n))
    states: dict[float, np.ndarray] = {}
    if 0 in record_index:
        states[record_index[0]] = x.copy()
    noise_scale = sigma * np.sqrt(cfg.dt)
    feedback = [prof.at(j * cfg.dt) for j in range(steps)]
    with np.errstate(over="ignore", invalid="ignore"):  # explosions are detected below
        for j in range(steps):
            increments = _step_generator(cfg.seed, j).standard_normal((cfg.n_paths, n))
            x = x - cfg.dt * (x @ feedback[j].T) + noise_scale * increments
            if not np.isfinite(x).all():
                bad_path = int(np.flatnonzero(~np.isfinite(x).all(axis=1))[0])
                raise NumericError(f"state exploded at step {j + 1}, path {bad_path}")
            if j + 1 in record_index:
                states[record_index[j + 1]] = x.copy()

    return PathEnsemble(
        times=tuple(sorted(states)),
        states=states,
        profile_tag=prof.tag,
        graph_spec=g.spec(),
        config=cfg,
        sigma=sigma,
    )


def _jackknife_se(delete_one: np.ndarray) -> np.ndarray:
    """Jackknife standard error from the delete-one statistic values
    (leading axis indexes the deleted sample)."""
    p = delete_one.shape[0]
    centered = delete_one - delete_one.mean(axis=0)
    return np.sqrt((p - 1) / p * (centered**2).sum(axis=0))


def _variance_and_se(samples: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Unbiased sample variance per column and its jackknife SE."""
    p = samples.shape[0]
    if p < 3:
        raise ParameterError("need at least 3 paths for variance standard errors")
    centered = samples - samples.mean(axis=0)
    ss = (centered**2).sum(axis=0)
    variance = ss / (p - 1)
    # Delete-one sum of squares: SS - d_i^2 * p/(p-1).
    ss_del = ss[None, :] - centered**2 * (p / (p - 1))
    return variance, _jackknife_se(ss_del / (p - 2))


@dataclass(frozen=True)
class EnsembleStats:
    t: float
    mean: np.ndarray
    mean_se: np.ndarray
    variance: np.ndarray
    variance_se: np.ndarray
    covariances: dict


def ensemble_stats(e: PathEnsemble, t: float, pairs: list[tuple[int, int]] | None = None) -> EnsembleStats:
    """Unbiased sample moments at a recorded time, with jackknife standard
    errors; covariances are computed for the requested vertex pairs."""
    samples = e.at(t)
    p, n = samples.shape
    mean = samples.mean(axis=0)
    mean_se = samples.std(axis=0, ddof=1) / np.sqrt(p)
    variance, variance_se = _variance_and_se(samples)
    covariances = {}
    if pairs:
        centered = samples - mean
        for u, v in pairs:
            if not (0 <= u < n and 0 <= v < n):
                raise ParameterError(f"invalid vertex pair ({u}, {v})")
            sxy = float(centered[:, u] @ centered[:, v])
            cov = sxy / (p - 1)
            sxy_del = sxy - centered[:, u] * centered[:, v] * (p / (p - 1))
            covariances[(u, v)] = (cov, float(_jackknife_se(sxy_del / (p - 2))))
    return EnsembleStats(
        t=float(t), mean=mean, mean_se=mean_se, variance=variance,
        variance_se=variance_se, covariances=covariances,
    )


@dataclass(frozen=True)
class ConcentrationReport:
    sample_variance: float
    standard_error: float
    bound: float
    passed: bool


def empirical_measure_test(
    e: PathEnsemble, t: float, h, covariance: np.ndarray
) -> ConcentrationReport:
    """Concentration check for the empirical average of a bounded
    1-Lipschitz test function over the population.

    Compares the across-path variance of (1/n) sum_v h(X_v(t)) with the
    Gaussian-Poincare bound (1/n^2) sum_{j,k} |Cov(X_j, X_k)| computed
    from the analytic covariance matrix; passes when the sample variance
    stays within three standard errors of the bound.
    """
    if isinstance(h, str):
        try:
            h = TEST_FUNCTIONS[h]
        except KeyError as exc:
            raise ParameterError(
                f"unknown test function {h!r}; choose from {sorted(TEST_FUNCTIONS)}"
            ) from exc
    samples = e.at(t)
    n = samples.shape[1]
    covariance = np.asarray(covariance, dtype=float)
    if covariance.shape != (n, n):
        raise ParameterError(f"covariance must be {n}x{n}, got {covariance.shape}")
    averages = np.asarray(h(samples)).mean(axis=1)
    variance, se = _variance_and_se(averages[:, None])
    bound = float(np.abs(covariance).sum()) / n**2
    sample_variance = float(variance[0])
    standard_error = float(se[0])
    return ConcentrationReport(
        sample_variance=sample_variance,
        standard_error=standard_error,
        bound=bound,
        passed=sample_variance <= bound + 3.0 * standard_error,
    )
