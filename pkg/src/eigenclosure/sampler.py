"""Deterministic seeding (fractional-derivative fit, then MAP) and DRAM sampling."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg, optimize

from .bayes import ObservationSet, Posterior
from .operator import parameter_names
from .spectral import FradeParams, ObservationOperator

__all__ = [
    "Chain",
    "DramConfig",
    "FitResult",
    "optimize_frade_mle",
    "optimize_map",
    "run_dram",
]

log = logging.getLogger(__name__)


@dataclass
class FitResult:
    x: np.ndarray
    value: float
    converged: bool
    n_evaluations: int
    message: str = ""


def _gaussian_loglike(obs: ObservationSet):
    noise = obs.noise
    norm = noise.log_normalizer(obs.n)

    def loglike(predicted):
        return norm - 0.5 * noise.quadratic(obs.values - predicted)

    return loglike


def optimize_frade_mle(obs: ObservationSet, forward: ObservationOperator, u_mean: float = 1.0,
                       start=(1.5, 0.05), xatol: float = 1e-9, fatol: float = 1e-10):
    """Maximum-likelihood ``(alpha, nu)`` with the fractional spectrum substituted.

    Searches over ``(alpha, log nu)`` with ``alpha`` bounded to ``[1, 2]``.
    Returns ``(FradeParams, FitResult)``; the fit records the log-likelihood.
    """
    if obs.n == 0:
        raise ValueError("no observations")
    grid = forward.grid
    loglike = _gaussian_loglike(obs)
    a = grid.wavenumbers[: forward.n_modes]

    def spectrum(z):
        alpha = min(max(z[0], 1.0), 2.0)
        mu = math.exp(z[1]) * a**alpha * np.exp(0.5j * np.pi * alpha)
        mu[0] = 0.0
        return mu

    def objective(z):
        return -loglike(forward(spectrum(z)))

    # coarse scan guards against the simplex settling on the wrong side of the alpha range
    alphas = np.linspace(1.0, 2.0, 11)
    log_nus = np.log(start[1]) + np.linspace(-3.0, 3.0, 13)
    best = min(((objective((al, ln)), al, ln) for al in alphas for ln in log_nus))
    z0 = np.array(best[1:])
    if objective([start[0], math.log(start[1])]) < best[0]:
        z0 = np.array([start[0], math.log(start[1])])

    total_evals = 0
    res = None
    for _ in range(5):
        res = optimize.minimize(
            objective, z0, method="Nelder-Mead",
            bounds=[(1.0, 2.0), (-30.0, 10.0)],
            options={"xatol": xatol, "fatol": fatol, "maxiter": 4000, "initial_simplex": _simplex(z0, 0.05)},
        )
        total_evals += res.nfev
        if np.allclose(res.x, z0, atol=xatol, rtol=0):
            break
        z0 = res.x
    params = FradeParams(alpha=float(np.clip(res.x[0], 1.0, 2.0)), nu=float(math.exp(res.x[1])), u_mean=u_mean)
    if not res.success:
        log.warning("FRADE fit did not converge: %s", res.message)
    return params, FitResult(res.x.copy(), -float(res.fun), bool(res.success), total_evals, str(res.message))


def _simplex(z0, step):
    z0 = np.asarray(z0, dtype=float)
    simplex = np.tile(z0, (z0.size + 1, 1))
    for i in range(z0.size):
        simplex[i + 1, i] += step
    return simplex


def optimize_map(posterior: Posterior, theta0, xatol: float = 1e-8, fatol: float = 1e-9,
                 max_restarts: int = 20, step: float = 0.1) -> FitResult:
    """Local posterior maximizer by restarted Nelder-Mead from ``theta0``.

    Restarts rebuild the simplex around the incumbent, which keeps the
    search from stalling on a degenerate simplex in higher dimension.
    """
    theta0 = np.asarray(theta0, dtype=float)
    f0 = posterior(theta0)
    if not np.isfinite(f0):
        raise ValueError("posterior is not finite at the starting point")
    best_x, best_f = theta0.copy(), f0
    n_evals, converged, message = 1, False, ""
    d = theta0.size
    scale = step
    for _ in range(max_restarts):
        res = optimize.minimize(
            lambda z: -posterior(z), best_x, method="Nelder-Mead",
            options={"xatol": xatol, "fatol": fatol, "maxfev": 400 * d, "adaptive": d > 4,
                     "initial_simplex": _simplex(best_x, scale)},
        )
        n_evals += res.nfev
        message = str(res.message)
        gain = -res.fun - best_f
        if gain > 0:
            best_x, best_f = res.x.copy(), -float(res.fun)
        if gain <= fatol and res.success:
            converged = True
            break
        scale = max(min(scale, np.max(np.abs(res.x - best_x)) + 1e-3), 1e-3)
    if not converged:
        log.warning("MAP search stopped before convergence: %s", message)
    return FitResult(best_x, best_f, converged, n_evals, message)


@dataclass
class DramConfig:
    n_steps: int = 300_000
    burn_in: int = 100_000
    adapt_start: int = 1000
    adapt_interval: int = 100
    initial_proposal_scale: float = 0.05
    dr_scale: float = 0.2
    epsilon: float = 1e-8
    rng_seed: int = 0
    adapt: bool = True
    delayed_rejection: bool = True

    def __post_init__(self):
        if not 0.0 < self.dr_scale < 1.0:
            raise ValueError("dr_scale must lie in (0, 1)")
        if self.burn_in >= self.n_steps:
            raise ValueError("burn_in must be shorter than the chain")

    @classmethod
    def desk(cls, **overrides):
        return cls(**{"n_steps": 50_000, "burn_in": 10_000, **overrides})


@dataclass
class Chain:
    """Sampled parameter vectors, one row per step, and their log posterior."""

    samples: np.ndarray
    log_post: np.ndarray
    burn_in: int
    names: list[str]
    accepted_first: int = 0
    accepted_second: int = 0
    n_second: int = 0
    n_failed: int = 0
    proposal_cov: np.ndarray | None = None
    adaptations: list[int] = field(default_factory=list)

    @property
    def n_steps(self) -> int:
        return self.samples.shape[0]

    @property
    def acceptance_rate(self) -> float:
        """Overall fraction of accepted moves, counting both stages."""
        return (self.accepted_first + self.accepted_second) / max(self.n_steps, 1)

    @property
    def first_stage_acceptance(self) -> float:
        """Fraction of steps accepted by the plain Metropolis proposal."""
        return self.accepted_first / max(self.n_steps, 1)

    @property
    def posterior_samples(self) -> np.ndarray:
        return self.samples[self.burn_in :]

    @property
    def K(self) -> int:
        return self.samples.shape[1] // 2


def _log_gauss(diff, chol):
    # unnormalized: both DR proposal terms share the same covariance
    z = linalg.solve_triangular(chol, diff, lower=True, check_finite=False)
    return -0.5 * float(z @ z)


def run_dram(log_target, start, config: DramConfig, names=None) -> Chain:
    """Delayed Rejection Adaptive Metropolis with one delayed-rejection stage.

    ``log_target`` maps a parameter vector to its unnormalized log density;
    exceptions and non-finite values count as rejections (except at ``start``).
    """
    rng = np.random.default_rng(config.rng_seed)
    x = np.array(start, dtype=float)
    d = x.size
    try:
        lp = float(log_target(x))
    except Exception as exc:
        raise ValueError("target evaluation failed at the starting point") from exc
    if not np.isfinite(lp):
        raise ValueError("target is not finite at the starting point")
    if config.adapt and config.adapt_start < 2 * d:
        raise ValueError("adapt_start must be at least twice the dimension")

    n_failed = 0

    def target(y):
        nonlocal n_failed
        try:
            val = float(log_target(y))
        except Exception:
            val = -np.inf
        if not np.isfinite(val):
            n_failed += 1
            return -np.inf
        return val

    chol = np.eye(d) * config.initial_proposal_scale
    sd = 2.38**2 / d
    samples = np.empty((config.n_steps, d))
    log_post = np.empty(config.n_steps)
    mean = np.zeros(d)
    scatter = np.zeros((d, d))
    acc1 = acc2 = n2 = 0
    adaptations = []

    for i in range(config.n_steps):
        y1 = x + chol @ rng.standard_normal(d)
        lp1 = target(y1)
        log_a1 = min(0.0, lp1 - lp)
        if math.log(rng.random()) < log_a1:
            x, lp = y1, lp1
            acc1 += 1
        elif config.delayed_rejection:
            n2 += 1
            y2 = x + config.dr_scale * (chol @ rng.standard_normal(d))
            lp2 = target(y2)
            log_a_back = min(0.0, lp1 - lp2) if np.isfinite(lp2) else 0.0
            if np.isfinite(lp2) and log_a_back < 0.0:
                num = lp2 + _log_gauss(y1 - y2, chol) + math.log1p(-math.exp(log_a_back))
                den = lp + _log_gauss(y1 - x, chol) + math.log1p(-math.exp(log_a1))
                log_a2 = min(0.0, num - den)
                if math.log(rng.random()) < log_a2:
                    x, lp = y2, lp2
                    acc2 += 1

        samples[i] = x
        log_post[i] = lp
        # Welford update of the running mean and scatter over the chain history
        delta = x - mean
        mean += delta / (i + 1)
        scatter += np.outer(delta, x - mean)

        n = i + 1
        if config.adapt and n >= config.adapt_start and (n - config.adapt_start) % config.adapt_interval == 0:
            cov = sd * (scatter / (n - 1) + config.epsilon * np.eye(d))
            try:
                chol = np.linalg.cholesky(cov)
                adaptations.append(n)
            except np.linalg.LinAlgError:
                log.debug("skipping adaptation at step %d: covariance not positive definite", n)

    if names is None:
        names = parameter_names(d // 2) if d % 2 == 0 else [f"x_{j + 1}" for j in range(d)]
    return Chain(samples, log_post, config.burn_in, list(names), acc1, acc2, n2, n_failed,
                 chol @ chol.T, adaptations)
