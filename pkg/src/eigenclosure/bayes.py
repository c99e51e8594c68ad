"""Priors on the transformed eigenvalue parameters, Gaussian data models, and
the posterior that combines them with the spectral forward model."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy import linalg

from .operator import SpectrumParams, head_eigenvalues
from .spectral import FourierGrid, ModalState, ObservationOperator

__all__ = [
    "PriorSpec",
    "NoiseModel",
    "ObservationSet",
    "Posterior",
    "nu_max_from_decay",
    "log_prior",
    "sample_prior",
    "floor_covariance",
    "shrinkage_intensity",
    "shrink_covariance",
    "log_likelihood_iid",
    "log_likelihood_cov",
    "read_observations",
    "write_observations",
]

LN20 = math.log(20.0)


def nu_max_from_decay(length: float, u_mean: float, decay_factor: float) -> float:
    """Largest diffusivity that damps mode 1 by at most ``decay_factor`` per flowthrough."""
    return length * u_mean * math.log(decay_factor) / (4.0 * math.pi**2)


@dataclass(frozen=True)
class PriorSpec:
    """Independent exponential priors on ``-Re mu_k`` and ``u_mean a_k - Im mu_k``.

    The scales put 95% of the mass below ``nu_max a_k^2`` and ``2 u_mean a_k``.
    """

    grid: FourierGrid
    K: int
    u_mean: float = 1.0
    decay_factor: float = 1e10
    nu_max: float | None = None

    def __post_init__(self):
        if self.K < 0:
            raise ValueError("K must be non-negative")
        if self.nu_max is None:
            value = nu_max_from_decay(self.grid.length, self.u_mean, self.decay_factor)
            object.__setattr__(self, "nu_max", value)

    @property
    def wavenumbers(self) -> np.ndarray:
        return self.grid.wavenumbers[1 : self.K + 1]

    @property
    def beta_real(self) -> np.ndarray:
        return self.nu_max * self.wavenumbers**2 / LN20

    @property
    def beta_imag(self) -> np.ndarray:
        return 2.0 * self.u_mean * self.wavenumbers / LN20

    @property
    def scales(self) -> np.ndarray:
        """Exponential scales aligned with ``theta = [r_1..r_K, u_1..u_K]``."""
        return np.concatenate([self.beta_real, self.beta_imag])

    def with_K(self, K: int) -> "PriorSpec":
        return PriorSpec(self.grid, K, self.u_mean, self.decay_factor, self.nu_max)

    def marginal_logpdf(self, values, index: int) -> np.ndarray:
        """Log density of parameter ``index`` of ``theta`` (log of an exponential variate)."""
        beta = self.scales[index]
        values = np.asarray(values, dtype=float)
        return -np.exp(values) / beta + values - math.log(beta)

    def central_interval(self, mass: float = 0.95) -> np.ndarray:
        """Bounds ``(2K, 2)`` holding the central ``mass`` of each log-parameter."""
        tail = 0.5 * (1.0 - mass)
        lo = np.log(-self.scales * math.log1p(-tail))
        hi = np.log(-self.scales * math.log(tail))
        return np.column_stack([lo, hi])


def log_prior(theta, spec: PriorSpec) -> float:
    theta = np.asarray(theta, dtype=float)
    if theta.size != 2 * spec.K:
        raise ValueError(f"expected {2 * spec.K} parameters, got {theta.size}")
    beta = spec.scales
    return float(np.sum(-np.exp(theta) / beta + theta - np.log(beta)))


def sample_prior(spec: PriorSpec, rng_seed=None, size: int | None = None, fixed_tail=None):
    """Draw ``theta`` from the prior.

    Returns a :class:`SpectrumParams` when ``size`` is None, otherwise an array
    of ``size`` parameter vectors.
    """
    rng = np.random.default_rng(rng_seed)
    shape = (2 * spec.K,) if size is None else (size, 2 * spec.K)
    theta = np.log(rng.exponential(1.0, shape) * spec.scales)
    if size is not None:
        return theta
    if fixed_tail is None:
        fixed_tail = np.zeros(spec.grid.n_modes, dtype=complex)
    return SpectrumParams(theta, fixed_tail, spec.grid, spec.u_mean)


def floor_covariance(cov, floor: float = 1e-6) -> np.ndarray:
    """Raise diagonal entries below ``floor``; off-diagonals are kept."""
    cov = np.array(cov, dtype=float)
    idx = np.diag_indices_from(cov)
    cov[idx] = np.maximum(cov[idx], floor)
    return cov


def shrinkage_intensity(samples) -> float:
    """Schafer-Strimmer intensity for shrinking correlations toward the identity.

    ``samples`` has one member per row. Columns with zero variance carry no
    correlation and are skipped.
    """
    X = np.asarray(samples, dtype=float)
    n = X.shape[0]
    if n < 3:
        raise ValueError("need at least three samples")
    std = X.std(axis=0, ddof=1)
    live = std > 0
    Z = (X[:, live] - X[:, live].mean(axis=0)) / std[live]
    W = Z[:, :, None] * Z[:, None, :]
    w_bar = W.mean(axis=0)
    var_r = n / (n - 1) ** 3 * np.sum((W - w_bar) ** 2, axis=0)
    r = n / (n - 1) * w_bar
    off = ~np.eye(r.shape[0], dtype=bool)
    denom = np.sum(r[off] ** 2)
    if denom == 0:
        return 1.0
    return float(np.clip(np.sum(var_r[off]) / denom, 0.0, 1.0))


def shrink_covariance(cov, intensity: float) -> np.ndarray:
    """Pull off-diagonal correlations toward zero; variances are untouched."""
    if not 0.0 <= intensity <= 1.0:
        raise ValueError("shrinkage intensity must lie in [0, 1]")
    cov = np.array(cov, dtype=float)
    diag = np.diag(cov).copy()
    cov *= 1.0 - intensity
    cov[np.diag_indices_from(cov)] = diag
    return cov


@dataclass
class NoiseModel:
    """Additive Gaussian measurement error, either iid or with a full covariance."""

    kind: str = "iid_gaussian"
    sigma: float | None = 0.005
    covariance: np.ndarray | None = None
    variance_floor: float = 1e-6
    _chol: tuple | None = field(default=None, init=False, repr=False)
    _logdet: float | None = field(default=None, init=False, repr=False)

    def __post_init__(self):
        if self.kind == "iid_gaussian":
            if self.sigma is None or self.sigma <= 0:
                raise ValueError("iid noise needs sigma > 0")
        elif self.kind == "covariance":
            if self.covariance is None:
                raise ValueError("covariance noise needs a covariance matrix")
            cov = floor_covariance(self.covariance, self.variance_floor)
            if not np.allclose(cov, cov.T):
                raise ValueError("covariance must be symmetric")
            try:
                self._chol = linalg.cho_factor(cov, lower=True)
            except linalg.LinAlgError as exc:
                raise ValueError("floored covariance is not positive definite") from exc
            self.covariance = cov
            self._logdet = 2.0 * float(np.sum(np.log(np.diag(self._chol[0]))))
        else:
            raise ValueError(f"unknown noise kind {self.kind!r}")

    @classmethod
    def from_ensemble(cls, sample_cov, n_members: int, variance_floor: float = 1e-6,
                      shrinkage: float = 0.0):
        """Covariance of an ensemble mean, ``S_N / N`` with a floored diagonal.

        ``shrinkage`` > 0 first shrinks correlations, which is needed when the
        ensemble is smaller than the number of observations.
        """
        cov = np.asarray(sample_cov) / n_members
        if shrinkage:
            cov = shrink_covariance(cov, shrinkage)
        return cls("covariance", None, cov, variance_floor)

    def quadratic(self, residual) -> float:
        """``r^T S^-1 r`` (or ``|r|^2 / sigma^2``)."""
        residual = np.asarray(residual, dtype=float)
        if self.kind == "iid_gaussian":
            return float(residual @ residual) / self.sigma**2
        return float(residual @ linalg.cho_solve(self._chol, residual))

    def log_normalizer(self, n: int) -> float:
        if self.kind == "iid_gaussian":
            return -0.5 * n * math.log(2.0 * math.pi * self.sigma**2)
        return -0.5 * (n * math.log(2.0 * math.pi) + self._logdet)

    def pointwise_std(self, n: int) -> np.ndarray:
        if self.kind == "iid_gaussian":
            return np.full(n, self.sigma)
        return np.sqrt(np.diag(self.covariance))


@dataclass
class ObservationSet:
    x: np.ndarray
    t: np.ndarray
    values: np.ndarray
    noise: NoiseModel = field(default_factory=NoiseModel)
    series_kind: str = "spatial"

    def __post_init__(self):
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.t = np.broadcast_to(np.asarray(self.t, dtype=float), self.x.shape).copy()
        self.values = np.atleast_1d(np.asarray(self.values, dtype=float))
        if self.values.shape != self.x.shape:
            raise ValueError("values and locations must have equal length")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("observation values must be finite")
        if np.any(self.t < 0):
            raise ValueError("observation times must be non-negative")
        if self.series_kind not in ("spatial", "time"):
            raise ValueError(f"unknown series kind {self.series_kind!r}")
        if self.noise.kind == "covariance" and self.noise.covariance.shape != (self.n, self.n):
            raise ValueError("covariance shape does not match the observations")

    @property
    def n(self) -> int:
        return self.values.size

    def check_domain(self, grid: FourierGrid):
        if np.any(self.x < 0) or np.any(self.x > grid.length):
            raise ValueError(f"observation locations must lie in [0, {grid.length}]")

    def operator(self, initial: ModalState, u_mean: float, n_modes=None) -> ObservationOperator:
        self.check_domain(initial.grid)
        return ObservationOperator(initial, self.x, self.t, u_mean, n_modes)


def write_observations(obs: ObservationSet, path):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["x", "t", "value"])
        for row in zip(obs.x, obs.t, obs.values):
            writer.writerow([repr(float(v)) for v in row])


def read_observations(path, noise: NoiseModel | None = None, series_kind: str | None = None):
    path = Path(path)
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != ["x", "t", "value"]:
            raise ValueError(f"{path}: expected header x,t,value, got {reader.fieldnames}")
        rows = [(float(r["x"]), float(r["t"]), float(r["value"])) for r in reader]
    x, t, v = (np.array(col) for col in zip(*rows))
    if series_kind is None:
        series_kind = "spatial" if np.unique(t).size == 1 else "time"
    return ObservationSet(x, t, v, noise or NoiseModel(), series_kind)


def _check_kind(obs: ObservationSet, kind: str):
    if obs.noise.kind != kind:
        raise ValueError(f"observation noise is {obs.noise.kind!r}, expected {kind!r}")


def log_likelihood_iid(predicted, obs: ObservationSet) -> float:
    _check_kind(obs, "iid_gaussian")
    residual = obs.values - np.asarray(predicted)
    return obs.noise.log_normalizer(obs.n) - 0.5 * obs.noise.quadratic(residual)


def log_likelihood_cov(predicted, obs: ObservationSet) -> float:
    _check_kind(obs, "covariance")
    residual = obs.values - np.asarray(predicted)
    return obs.noise.log_normalizer(obs.n) - 0.5 * obs.noise.quadratic(residual)


class Posterior:
    """Unnormalized log posterior over the inferred head ``theta``.

    The forward operator is restricted to modes that carry signal in the
    initial condition; the remaining eigenvalues come from ``template``.
    """

    def __init__(self, obs: ObservationSet, template: SpectrumParams, prior: PriorSpec,
                 initial: ModalState, n_modes: int | None = None):
        if prior.K != template.K:
            raise ValueError(f"prior has K={prior.K} but parameters have K={template.K}")
        self.obs = obs
        self.template = template
        self.prior = prior
        self.grid = template.grid
        self.u_mean = template.u_mean
        self.forward = obs.operator(initial, template.u_mean, n_modes)
        self._tail = template.fixed_tail[: self.forward.n_modes].copy()
        self._tail[0] = 0.0

    @property
    def K(self) -> int:
        return self.template.K

    @property
    def dim(self) -> int:
        return 2 * self.K

    def spectrum(self, theta) -> np.ndarray:
        """Leading eigenvalues seen by the forward operator."""
        mu = self._tail.copy()
        mu[1 : self.K + 1] = head_eigenvalues(theta, self.grid, self.u_mean)
        return mu

    def spectra(self, thetas) -> np.ndarray:
        thetas = np.atleast_2d(thetas)
        mu = np.tile(self._tail, (thetas.shape[0], 1))
        mu[:, 1 : self.K + 1] = head_eigenvalues(thetas, self.grid, self.u_mean)
        return mu

    def predict(self, theta) -> np.ndarray:
        return self.forward(self.spectrum(theta))

    def log_prior(self, theta) -> float:
        return log_prior(theta, self.prior)

    def log_likelihood(self, theta) -> float:
        predicted = self.predict(theta)
        if self.obs.noise.kind == "iid_gaussian":
            return log_likelihood_iid(predicted, self.obs)
        return log_likelihood_cov(predicted, self.obs)

    def __call__(self, theta) -> float:
        theta = np.asarray(theta, dtype=float)
        if not np.all(np.isfinite(theta)):
            return -np.inf
        with np.errstate(over="ignore"):
            prior = self.log_prior(theta)
        # an overflowing exp(theta) has zero prior density and no finite spectrum
        if not np.isfinite(prior):
            return -np.inf
        value = prior + self.log_likelihood(theta)
        return value if np.isfinite(value) else -np.inf
