"""Variance-based screening of eigenvalue parameters with Sobol total-effect indices."""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .bayes import PriorSpec
from .operator import parameter_names
from .spectral import ObservationOperator

__all__ = [
    "SensitivityResult",
    "sobol_total_effect",
    "select_inferred_set",
    "spectrum_screening_model",
    "screen_eigenvalues",
]

log = logging.getLogger(__name__)

AGGREGATIONS = {"median": np.median, "max": np.max}


@dataclass
class SensitivityResult:
    """Total-effect indices ``S_T[parameter, output]`` and their aggregation.

    Parameters are ordered ``[r_1..r_K, u_1..u_K]``; ``eigen_index`` takes the
    larger of the real- and imaginary-part indices for each mode.
    """

    total_effect: np.ndarray
    output_variance: np.ndarray
    valid_outputs: np.ndarray
    names: list[str]
    threshold: float = 1e-4
    aggregation: str = "median"

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"aggregation must be one of {sorted(AGGREGATIONS)}")

    @property
    def aggregated(self) -> np.ndarray:
        """Indices reduced over usable outputs by ``aggregation`` (median or max).

        Values are raw and may be slightly negative from estimator noise.
        """
        if not self.valid_outputs.any():
            return np.zeros(self.total_effect.shape[0])
        return AGGREGATIONS[self.aggregation](self.total_effect[:, self.valid_outputs], axis=1)

    @property
    def eigen_index(self) -> np.ndarray:
        agg = self.aggregated
        if len(agg) % 2:
            raise ValueError("per-eigenvalue aggregation needs paired r/u parameters")
        K = len(agg) // 2
        return np.maximum(agg[:K], agg[K:])

    @property
    def sensitive_set(self) -> list[int]:
        return [int(k) + 1 for k in np.nonzero(self.eigen_index > self.threshold)[0]]

    def rows(self):
        """Tuples ``(k, param, S_T_max, sensitive)`` for CSV output."""
        agg = self.aggregated
        K = len(agg) // 2
        for i, name in enumerate(self.names):
            k = i % K + 1
            yield k, name, float(max(agg[i], 0.0)), bool(agg[i] > self.threshold)


def _evaluate(model, X, batch_size):
    chunks = [np.asarray(model(X[i : i + batch_size]), dtype=float) for i in range(0, len(X), batch_size)]
    out = np.concatenate(chunks)
    return out[:, None] if out.ndim == 1 else out


def sobol_total_effect(model, bounds, n_base: int = 1024, rng_seed=0, names=None,
                       threshold: float = 1e-4, batch_size: int = 4096,
                       aggregation: str = "median") -> SensitivityResult:
    """Saltelli design with the Jansen total-effect estimator.

    ``model`` maps an ``(n, d)`` array of parameter vectors to ``(n, m)``
    outputs. Inputs are uniform within ``bounds`` (shape ``(d, 2)``); base
    samples come from a scrambled Sobol' sequence seeded by ``rng_seed``.
    """
    bounds = np.asarray(bounds, dtype=float)
    if n_base < 64:
        raise ValueError("n_base must be at least 64")
    if not np.all(np.isfinite(bounds)):
        raise ValueError("bounds must be finite")
    d = bounds.shape[0]
    sampler = qmc.Sobol(2 * d, scramble=True, seed=rng_seed)
    base = sampler.random(n_base)
    lo, hi = bounds[:, 0], bounds[:, 1]
    A = lo + (hi - lo) * base[:, :d]
    B = lo + (hi - lo) * base[:, d:]

    fA = _evaluate(model, A, batch_size)
    fB = _evaluate(model, B, batch_size)
    variance = np.var(np.concatenate([fA, fB]), axis=0)
    valid = variance > 0
    if not valid.all():
        log.warning("%d outputs with zero variance excluded", int((~valid).sum()))
    safe = np.where(valid, variance, 1.0)

    total = np.empty((d, fA.shape[1]))
    for i in range(d):
        ABi = A.copy()
        ABi[:, i] = B[:, i]
        fABi = _evaluate(model, ABi, batch_size)
        total[i] = 0.5 * np.mean((fA - fABi) ** 2, axis=0) / safe
    total[:, ~valid] = 0.0
    if names is None:
        names = [f"x_{i + 1}" for i in range(d)]
    return SensitivityResult(total, variance, valid, list(names), threshold, aggregation)


def select_inferred_set(result: SensitivityResult, threshold: float | None = None):
    """Contiguous head through the largest sensitive mode, and the raw sensitive set."""
    if threshold is not None:
        result = SensitivityResult(result.total_effect, result.output_variance,
                                   result.valid_outputs, result.names, threshold,
                                   result.aggregation)
    sensitive = result.sensitive_set
    if not sensitive:
        log.warning("no eigenvalue exceeds threshold %g; inferring k=1 only", result.threshold)
        return 1, []
    return int(max(sensitive)), [int(k) for k in sensitive]


def spectrum_screening_model(forward: ObservationOperator, base_spectrum, K: int, u_mean: float):
    """Model ``theta -> field at observation points`` with modes ``1..K`` replaced."""
    base = np.asarray(base_spectrum, dtype=complex)[: forward.n_modes]
    a = forward.grid.wavenumbers[1 : K + 1]

    def model(theta):
        theta = np.atleast_2d(theta)
        mu = np.tile(base, (theta.shape[0], 1))
        mu[:, 1 : K + 1] = -np.exp(theta[:, :K]) + 1j * (u_mean * a - np.exp(theta[:, K:]))
        return forward.batch(mu)

    return model


def screen_eigenvalues(forward: ObservationOperator, base_spectrum, prior: PriorSpec,
                       n_base: int = 1024, rng_seed=0, threshold: float = 1e-4,
                       mass: float = 0.95, aggregation: str = "median") -> SensitivityResult:
    """Screen modes ``1..prior.K`` over the central ``mass`` of their prior."""
    model = spectrum_screening_model(forward, base_spectrum, prior.K, prior.u_mean)
    batch = max(64, int(2e7 // max(1, forward.n_obs * forward.n_modes)))
    return sobol_total_effect(model, prior.central_interval(mass), n_base, rng_seed,
                              parameter_names(prior.K), threshold, batch, aggregation)
