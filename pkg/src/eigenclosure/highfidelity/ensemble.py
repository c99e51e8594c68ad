"""Ensembles of depth-averaged high-fidelity solutions and their sample statistics."""
from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .darcy import solve_darcy
from .grf import GrfConfig, LogPermeabilitySampler
from .transport import advance_ade_2d, depth_average

__all__ = ["HifiConfig", "Moments", "EnsembleStats", "run_member", "run_ensemble", "member_seeds"]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class HifiConfig:
    grf: GrfConfig = GrfConfig()
    u_mean: float = 1.0
    nu_p: float = 0.01
    pulse_center: float = 1.0
    pulse_width: float = 0.1
    safety: float = 0.5

    @property
    def grid(self):
        return self.grf.grid

    @property
    def peclet(self) -> float:
        return self.u_mean * self.grid.length_y / self.nu_p

    def initial_condition(self) -> np.ndarray:
        g = self.grid
        pulse = np.exp(-((self.pulse_center - g.x) ** 2) / (2 * self.pulse_width**2))
        return np.repeat(pulse[:, None], g.n_y, axis=1)


@dataclass
class Moments:
    """Count, mean and scatter matrix; ``merge`` is the pairwise (Chan) update."""

    n: int
    mean: np.ndarray
    scatter: np.ndarray

    @classmethod
    def from_samples(cls, rows) -> "Moments":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        mean = rows.mean(axis=0)
        dev = rows - mean
        return cls(rows.shape[0], mean, dev.T @ dev)

    def merge(self, other: "Moments") -> "Moments":
        if self.n == 0:
            return other
        if other.n == 0:
            return self
        n = self.n + other.n
        delta = other.mean - self.mean
        mean = self.mean + delta * other.n / n
        scatter = self.scatter + other.scatter + np.outer(delta, delta) * self.n * other.n / n
        return Moments(n, mean, scatter)

    @property
    def covariance(self) -> np.ndarray:
        return self.scatter / (self.n - 1)


@dataclass
class EnsembleStats:
    n_members: int
    mean: np.ndarray
    covariance: np.ndarray
    t_obs: float
    x: np.ndarray
    seeds: list[int] = field(default_factory=list)
    failed: list[int] = field(default_factory=list)
    members: np.ndarray | None = field(default=None, repr=False)

    @property
    def mean_variance(self) -> np.ndarray:
        """Pointwise variance of the ensemble mean, ``diag(S_N) / N``."""
        return np.diag(self.covariance) / self.n_members


def member_seeds(master_seed: int, n_members: int) -> list[int]:
    ss = np.random.SeedSequence(master_seed)
    return [int(child.generate_state(1)[0]) for child in ss.spawn(n_members)]


def run_member(config: HifiConfig, seed: int, times) -> np.ndarray:
    """Depth-averaged concentration at each of ``times``, shape ``(len(times), n_x)``."""
    log_kappa = LogPermeabilitySampler(config.grf).sample(seed)
    vel = solve_darcy(np.exp(log_kappa), config.u_mean, config.grid)
    times = sorted(float(t) for t in times)
    final, snaps = advance_ade_2d(config.initial_condition(), vel, config.nu_p, times[-1],
                                  safety=config.safety, snapshots=times[:-1] or [times[-1]])
    snaps[times[-1]] = final
    return np.array([depth_average(snaps[t]) for t in times])


def _member_task(args):
    config, seed, times = args
    try:
        return seed, run_member(config, seed, times)
    except (FloatingPointError, ValueError, np.linalg.LinAlgError) as exc:
        log.error("member with seed %d failed: %s", seed, exc)
        return seed, None


def run_ensemble(n_members: int, config: HifiConfig, t_obs, master_seed: int = 0,
                 n_workers: int = 1, seeds=None) -> dict[float, EnsembleStats] | EnsembleStats:
    """Run independent members and return sample statistics at each time.

    ``t_obs`` may be a scalar (one :class:`EnsembleStats`) or a sequence
    (dict keyed by time).
    """
    if n_members < 2:
        raise ValueError("an ensemble needs at least two members")
    scalar = np.isscalar(t_obs)
    times = sorted({float(t) for t in np.atleast_1d(t_obs)})
    if seeds is None:
        seeds = member_seeds(master_seed, n_members)
    seeds = [int(s) for s in seeds]
    tasks = [(config, s, times) for s in seeds]
    if n_workers > 1:
        with ProcessPoolExecutor(n_workers) as pool:
            results = list(pool.map(_member_task, tasks, chunksize=max(1, len(tasks) // (4 * n_workers))))
    else:
        results = [_member_task(t) for t in tasks]

    done = [(s, r) for s, r in results if r is not None]
    failed = [s for s, r in results if r is None]
    if len(done) < 2:
        raise RuntimeError(f"only {len(done)} ensemble members completed")
    moments = [Moments(0, None, None) for _ in times]
    for _, r in done:
        moments = [m.merge(Moments.from_samples(r[i])) for i, m in enumerate(moments)]
    x = config.grid.x
    stats = {
        t: EnsembleStats(m.n, m.mean, m.covariance, t, x, [s for s, _ in done], failed,
                         np.array([r[i] for _, r in done]))
        for i, (t, m) in enumerate(zip(times, moments))
    }
    return stats[times[0]] if scalar else stats
