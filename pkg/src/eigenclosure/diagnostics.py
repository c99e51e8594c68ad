"""Posterior post-processing: information gain, summaries, correlations and
push-forward statistics of the mean concentration."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import stats

from .bayes import PriorSpec
from .operator import head_eigenvalues
from .sampler import Chain
from .spectral import FourierGrid, ModalState, ObservationOperator

__all__ = [
    "KlReport",
    "ParameterSummary",
    "EigenvalueSummary",
    "Correlation",
    "Predictive",
    "kl_gaussian_approx",
    "kl_divergence_gaussian",
    "kl_report",
    "posterior_summary",
    "eigenvalue_summary",
    "correlation_matrix",
    "posterior_predictive",
    "thin_indices",
]


def kl_gaussian_approx(samples, prior_logpdf) -> float:
    """Monte Carlo ``E_post[log N(theta; m, s) - log p(theta)]`` from posterior draws."""
    samples = np.asarray(samples, dtype=float)
    std = samples.std(ddof=1)
    if not std > 0:
        raise ValueError("degenerate chain: marginal has zero variance")
    log_ga = stats.norm.logpdf(samples, samples.mean(), std)
    return float(np.mean(log_ga - prior_logpdf(samples)))


def kl_divergence_gaussian(chain: Chain, prior: PriorSpec, index: int, n_samples: int | None = None) -> float:
    samples = chain.posterior_samples[:, index]
    if n_samples is not None:
        samples = samples[thin_indices(samples.size, n_samples)]
    return kl_gaussian_approx(samples, lambda v: prior.marginal_logpdf(v, index))


@dataclass
class KlReport:
    names: list[str]
    kl: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    n_samples: int

    def rows(self):
        K = len(self.names) // 2
        for i, name in enumerate(self.names):
            yield i % K + 1, name, float(self.kl[i]), float(self.mean[i]), float(self.std[i])


def kl_report(chain: Chain, prior: PriorSpec, n_samples: int | None = None) -> KlReport:
    post = chain.posterior_samples
    if n_samples is not None:
        post = post[thin_indices(post.shape[0], n_samples)]
    kl = np.array([
        kl_gaussian_approx(post[:, j], lambda v, j=j: prior.marginal_logpdf(v, j))
        for j in range(post.shape[1])
    ])
    return KlReport(chain.names, kl, post.mean(axis=0), post.std(axis=0, ddof=1), post.shape[0])


def thin_indices(n: int, n_draws: int) -> np.ndarray:
    """``n_draws`` equally spaced indices into ``range(n)``."""
    if n_draws > n:
        raise ValueError(f"cannot draw {n_draws} samples from {n}")
    return np.linspace(0, n - 1, n_draws).round().astype(int)


@dataclass
class ParameterSummary:
    names: list[str]
    mean: np.ndarray
    std: np.ndarray
    ci95: np.ndarray
    ci99: np.ndarray


def _interval_summary(samples, names):
    q = np.quantile(samples, [0.025, 0.975, 0.005, 0.995], axis=0)
    return ParameterSummary(list(names), samples.mean(axis=0), samples.std(axis=0), q[:2].T, q[2:].T)


def posterior_summary(chain: Chain) -> ParameterSummary:
    post = chain.posterior_samples
    if post.shape[0] < 1000:
        raise ValueError("need at least 1000 post-burn-in samples")
    return _interval_summary(post, chain.names)


@dataclass
class EigenvalueSummary:
    """Statistics of ``Re mu_k`` and ``Im mu_k``, mapped sample by sample."""

    real: ParameterSummary
    imag: ParameterSummary
    mapped_mean: np.ndarray

    @property
    def jensen_gap(self) -> np.ndarray:
        """``mean(mu(theta)) - mu(mean(theta))``; nonzero for the exponential mapping."""
        return (self.real.mean + 1j * self.imag.mean) - self.mapped_mean

    def contains(self, mu, level: int = 99) -> tuple[np.ndarray, np.ndarray]:
        mu = np.asarray(mu)
        ci_r = self.real.ci99 if level == 99 else self.real.ci95
        ci_i = self.imag.ci99 if level == 99 else self.imag.ci95
        return ((ci_r[:, 0] <= mu.real) & (mu.real <= ci_r[:, 1]),
                (ci_i[:, 0] <= mu.imag) & (mu.imag <= ci_i[:, 1]))


def eigenvalue_summary(chain: Chain, grid: FourierGrid, u_mean: float) -> EigenvalueSummary:
    post = chain.posterior_samples
    mu = head_eigenvalues(post, grid, u_mean)
    K = chain.K
    real = _interval_summary(mu.real, [f"Re_mu_{k}" for k in range(1, K + 1)])
    imag = _interval_summary(mu.imag, [f"Im_mu_{k}" for k in range(1, K + 1)])
    return EigenvalueSummary(real, imag, head_eigenvalues(post.mean(axis=0), grid, u_mean))


@dataclass
class Correlation:
    """Pearson correlations ordered ``[r_1..r_K, u_1..u_K]``; NaN where undefined."""

    matrix: np.ndarray
    names: list[str]
    undefined: list[str]

    @property
    def mean_abs_offdiag(self) -> float:
        m = self.matrix
        mask = ~np.eye(m.shape[0], dtype=bool) & np.isfinite(m)
        return float(np.abs(m[mask]).mean())


def correlation_matrix(samples, names=None) -> Correlation:
    if isinstance(samples, Chain):
        names = samples.names if names is None else names
        samples = samples.posterior_samples
    samples = np.asarray(samples, dtype=float)
    d = samples.shape[1]
    names = list(names) if names is not None else [f"x_{i + 1}" for i in range(d)]
    std = samples.std(axis=0)
    live = std > 0
    corr = np.full((d, d), np.nan)
    if live.any():
        c = np.atleast_2d(np.corrcoef(samples[:, live], rowvar=False))
        corr[np.ix_(live, live)] = 0.5 * (c + c.T)  # corrcoef is symmetric only to round-off
    idx = np.arange(d)
    corr[idx[live], idx[live]] = 1.0
    return Correlation(corr, names, [n for n, ok in zip(names, live) if not ok])


@dataclass
class Predictive:
    """Push-forward statistics on a ``(times, locations)`` grid."""

    times: np.ndarray
    locations: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    n_draws: int


def posterior_predictive(chain: Chain, tail, initial: ModalState, u_mean: float, times, locations,
                         n_draws: int = 500, n_modes: int | None = None) -> Predictive:
    """Evolve ``c_0`` under spectra built from thinned posterior draws.

    ``tail`` supplies eigenvalues for modes above ``K`` (the fixed tail).
    """
    post = chain.posterior_samples
    draws = post[thin_indices(post.shape[0], n_draws)]
    times = np.atleast_1d(np.asarray(times, dtype=float))
    locations = np.atleast_1d(np.asarray(locations, dtype=float))
    grid = initial.grid
    X, T = np.meshgrid(locations, times)
    forward = ObservationOperator(initial, X.ravel(), T.ravel(), u_mean, n_modes)
    K = chain.K
    mu = np.tile(np.asarray(tail, dtype=complex)[: forward.n_modes], (n_draws, 1))
    mu[:, 0] = 0.0
    mu[:, 1 : K + 1] = head_eigenvalues(draws, grid, u_mean)
    values = np.concatenate([forward.batch(mu[i : i + 64]) for i in range(0, n_draws, 64)])
    shape = (times.size, locations.size)
    return Predictive(
        times, locations,
        values.mean(axis=0).reshape(shape),
        values.std(axis=0).reshape(shape),
        values.min(axis=0).reshape(shape),
        values.max(axis=0).reshape(shape),
        n_draws,
    )
