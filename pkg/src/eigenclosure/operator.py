"""Eigenvalue parametrization of the uncertain transport operator.

The inferred vector is ``theta = [r_1..r_K, u_1..u_K]`` with

    Re mu_k = -exp(r_k)
    Im mu_k = u_mean a_k - exp(u_k)

so any finite ``theta`` yields decaying modes that propagate downstream. Modes
above ``K`` come from a fixed tail, normally the fractional-derivative fit.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .spectral import FourierGrid

__all__ = [
    "SpectrumParams",
    "OperatorSpectrum",
    "ConstraintReport",
    "assemble_spectrum",
    "params_from_spectrum",
    "lambda_from_mu",
    "mu_from_lambda",
    "check_constraints",
    "spectrum_to_json",
    "spectrum_from_json",
    "parameter_names",
    "head_eigenvalues",
]


def parameter_names(K: int) -> list[str]:
    return [f"r_{k}" for k in range(1, K + 1)] + [f"u_{k}" for k in range(1, K + 1)]


@dataclass(frozen=True)
class SpectrumParams:
    """Inferred head ``theta`` plus the fixed remainder of the spectrum.

    ``fixed_tail`` holds eigenvalues for every mode ``0..n/2`` of the grid; its
    entries ``0..K`` are ignored by :func:`assemble_spectrum`.
    """

    theta: np.ndarray
    fixed_tail: np.ndarray
    grid: FourierGrid
    u_mean: float = 1.0

    def __post_init__(self):
        theta = np.array(self.theta, dtype=float).ravel()
        tail = np.array(self.fixed_tail, dtype=complex).ravel()
        if theta.size % 2:
            raise ValueError("theta must hold r_1..r_K followed by u_1..u_K")
        if tail.shape != (self.grid.n_modes,):
            raise ValueError(f"fixed_tail must have {self.grid.n_modes} entries")
        if theta.size // 2 >= self.grid.n_modes:
            raise ValueError("K exceeds the number of resolved modes")
        if np.any(tail.real[theta.size // 2 + 1 :] > 0):
            raise ValueError("fixed-tail eigenvalues must have non-positive real part")
        theta.setflags(write=False)
        tail.setflags(write=False)
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "fixed_tail", tail)

    @property
    def K(self) -> int:
        return self.theta.size // 2

    @property
    def r(self) -> np.ndarray:
        return self.theta[: self.K]

    @property
    def u(self) -> np.ndarray:
        return self.theta[self.K :]

    def with_theta(self, theta) -> "SpectrumParams":
        return SpectrumParams(theta, self.fixed_tail, self.grid, self.u_mean)


@dataclass(frozen=True)
class OperatorSpectrum:
    """Eigenvalues ``mu_k`` of the full right-hand-side operator, ``k = 0..n/2``."""

    mu: np.ndarray
    grid: FourierGrid

    def __post_init__(self):
        mu = np.array(self.mu, dtype=complex).ravel()
        if mu.shape != (self.grid.n_modes,):
            raise ValueError(f"expected {self.grid.n_modes} eigenvalues")
        mu.setflags(write=False)
        object.__setattr__(self, "mu", mu)

    def lambdas(self, nu_p: float) -> np.ndarray:
        return lambda_from_mu(self, nu_p)


def assemble_spectrum(params: SpectrumParams) -> OperatorSpectrum:
    if not np.all(np.isfinite(params.theta)):
        raise ValueError("non-finite spectrum parameters")
    K = params.K
    a = params.grid.wavenumbers[1 : K + 1]
    mu = params.fixed_tail.copy()
    mu[0] = 0.0
    mu[1 : K + 1] = -np.exp(params.r) + 1j * (params.u_mean * a - np.exp(params.u))
    return OperatorSpectrum(mu, params.grid)


def head_eigenvalues(theta, grid: FourierGrid, u_mean: float) -> np.ndarray:
    """Vectorized mapping for a stack of parameter vectors, shape ``(..., 2K)``."""
    theta = np.asarray(theta, dtype=float)
    K = theta.shape[-1] // 2
    a = grid.wavenumbers[1 : K + 1]
    return -np.exp(theta[..., :K]) + 1j * (u_mean * a - np.exp(theta[..., K:]))


def params_from_spectrum(mu, K: int, grid: FourierGrid, u_mean: float = 1.0) -> np.ndarray:
    """Inverse mapping for modes ``1..K``; requires the open constraint region."""
    mu = np.asarray(mu, dtype=complex)
    head = mu[1 : K + 1]
    decay = -head.real
    drift = u_mean * grid.wavenumbers[1 : K + 1] - head.imag
    if np.any(decay <= 0) or np.any(drift <= 0):
        raise ValueError("eigenvalues outside the region Re < 0, Im < u_mean a_k")
    return np.concatenate([np.log(decay), np.log(drift)])


def lambda_from_mu(spectrum: OperatorSpectrum, nu_p: float) -> np.ndarray:
    """Closure eigenvalues after removing pore-scale diffusion."""
    if nu_p < 0:
        raise ValueError(f"nu_p must be non-negative, got {nu_p}")
    return spectrum.mu + nu_p * spectrum.grid.wavenumbers**2


def mu_from_lambda(lambdas, nu_p: float, grid: FourierGrid) -> OperatorSpectrum:
    return OperatorSpectrum(np.asarray(lambdas) - nu_p * grid.wavenumbers**2, grid)


@dataclass
class ConstraintReport:
    decay: np.ndarray
    downstream: np.ndarray
    mass_conserving: bool
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return self.mass_conserving and bool(self.decay.all()) and bool(self.downstream.all())


def check_constraints(spectrum: OperatorSpectrum, u_mean: float, modes=None) -> ConstraintReport:
    """Per-mode decay and downstream-propagation checks plus ``mu_0 == 0``.

    ``modes`` restricts the per-mode checks to an index range (default: all
    ``k >= 1``). A zero spectrum passes: pure advection neither grows nor
    reverses any mode.
    """
    mu = spectrum.mu
    a = spectrum.grid.wavenumbers
    ks = np.arange(1, mu.size) if modes is None else np.asarray(modes)
    decay = mu.real[ks] <= 0
    downstream = (u_mean * a[ks] - mu.imag[ks] > 0) | ((a[ks] == 0) & (mu.imag[ks] == 0))
    mass = mu[0] == 0
    report = ConstraintReport(decay, downstream, bool(mass))
    for k, d, s in zip(ks, decay, downstream):
        if not d:
            report.violations.append(f"k={k}: Re[mu] > 0")
        if not s:
            report.violations.append(f"k={k}: Im[mu] >= u_mean a_k")
    if not mass:
        report.violations.append("mu_0 != 0")
    return report


def spectrum_to_json(spectrum: OperatorSpectrum) -> str:
    return json.dumps(
        {
            "length": spectrum.grid.length,
            "n_points": spectrum.grid.n_points,
            "mu": [[int(k), float(m.real), float(m.imag)] for k, m in enumerate(spectrum.mu)],
        }
    )


def spectrum_from_json(text: str) -> OperatorSpectrum:
    data = json.loads(text)
    grid = FourierGrid(data["length"], data["n_points"])
    mu = np.zeros(grid.n_modes, dtype=complex)
    for k, re, im in data["mu"]:
        mu[k] = complex(re, im)
    return OperatorSpectrum(mu, grid)
