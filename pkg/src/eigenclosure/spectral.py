"""Exact Fourier-space solution of the 1D generalized advection-diffusion equation.

The mean concentration on a periodic domain ``[0, L)`` evolves as

    dc/dt + u dc/dx = D c

where ``D`` is any shift-invariant linear operator. Its eigenfunctions are the
Fourier modes ``exp(i a_k x)`` with ``a_k = 2 pi k / L`` and its eigenvalues
``mu_k`` fully determine the dynamics, so each coefficient evolves as

    c_k(t) = c_k(0) exp((mu_k - i u a_k) t).

Only the non-negative half of the spectrum is stored; negative wavenumbers follow
from conjugate symmetry of a real field.
"""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

__all__ = [
    "FourierGrid",
    "InitialCondition",
    "ModalState",
    "FradeParams",
    "ObservationOperator",
    "transform_field",
    "transform_initial_condition",
    "propagate",
    "evaluate_field",
    "frade_eigenvalues",
    "excited_modes",
    "EXCITATION_THRESHOLD",
]

EXCITATION_THRESHOLD = 1e-13


@dataclass(frozen=True)
class FourierGrid:
    """Regular periodic grid on ``[0, length)`` with ``n_points`` samples."""

    length: float = 4.0
    n_points: int = 512

    def __post_init__(self):
        if self.length <= 0:
            raise ValueError(f"domain length must be positive, got {self.length}")
        if self.n_points <= 0 or self.n_points % 2:
            raise ValueError(f"n_points must be a positive even integer, got {self.n_points}")

    @property
    def n_modes(self) -> int:
        return self.n_points // 2 + 1

    @property
    def modes(self) -> np.ndarray:
        return np.arange(self.n_modes)

    @property
    def wavenumbers(self) -> np.ndarray:
        return 2.0 * np.pi * self.modes / self.length

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_points) * (self.length / self.n_points)

    @property
    def synthesis_weights(self) -> np.ndarray:
        # mode 0 and the Nyquist mode have no conjugate partner
        w = np.full(self.n_modes, 2.0)
        w[0] = 1.0
        w[-1] = 1.0
        return w


@dataclass(frozen=True)
class InitialCondition:
    """Gaussian pulse ``exp(-(center - x)^2 / (2 width^2))``."""

    center: float = 1.0
    width: float = 0.1

    def __post_init__(self):
        if self.width <= 0:
            raise ValueError(f"width must be positive, got {self.width}")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return np.exp(-((self.center - x) ** 2) / (2.0 * self.width**2))

    def validate(self, grid: FourierGrid):
        if not 0.0 < self.center < grid.length:
            raise ValueError(f"pulse center {self.center} outside (0, {grid.length})")


@dataclass(frozen=True)
class ModalState:
    """Non-negative-wavenumber Fourier coefficients of a real field at ``time``."""

    coeffs: np.ndarray
    grid: FourierGrid
    time: float = 0.0

    def __post_init__(self):
        coeffs = np.asarray(self.coeffs, dtype=complex)
        if coeffs.shape != (self.grid.n_modes,):
            raise ValueError(
                f"expected {self.grid.n_modes} coefficients, got shape {coeffs.shape}"
            )
        coeffs.setflags(write=False)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def mean(self) -> float:
        return float(self.coeffs[0].real)


@dataclass(frozen=True)
class FradeParams:
    """Fractional advection-diffusion closure ``nu * d^alpha / dx^alpha``."""

    alpha: float = 1.5
    nu: float = 0.05
    u_mean: float = 1.0

    def __post_init__(self):
        if not 1.0 <= self.alpha <= 2.0:
            raise ValueError(f"alpha must lie in [1, 2], got {self.alpha}")
        if self.nu <= 0:
            raise ValueError(f"nu must be positive, got {self.nu}")


def transform_field(values, grid: FourierGrid, time: float = 0.0) -> ModalState:
    """Discrete Fourier coefficients of real grid samples."""
    values = np.asarray(values, dtype=float)
    if values.shape != (grid.n_points,):
        raise ValueError(f"expected {grid.n_points} samples, got shape {values.shape}")
    return ModalState(np.fft.rfft(values) / grid.n_points, grid, time)


def transform_initial_condition(ic: InitialCondition, grid: FourierGrid) -> ModalState:
    ic.validate(grid)
    return transform_field(ic(grid.x), grid)


def excited_modes(state: ModalState, threshold: float = EXCITATION_THRESHOLD) -> int:
    """Count of leading modes (including k = 0) whose modulus exceeds ``threshold``."""
    above = np.nonzero(np.abs(state.coeffs) > threshold)[0]
    return int(above[-1]) + 1 if above.size else 0


def _as_spectrum(eigenvalues, grid: FourierGrid) -> np.ndarray:
    mu = np.asarray(eigenvalues, dtype=complex)
    if mu.shape != (grid.n_modes,):
        raise ValueError(f"expected {grid.n_modes} eigenvalues, got shape {mu.shape}")
    if not np.all(np.isfinite(mu)):
        raise ValueError("eigenvalues must be finite")
    return mu


def propagate(state: ModalState, eigenvalues, u_mean: float, dt: float) -> ModalState:
    """Advance every mode exactly by ``dt``."""
    if dt < 0:
        raise ValueError(f"dt must be non-negative, got {dt}")
    mu = _as_spectrum(eigenvalues, state.grid)
    growth = (mu - 1j * u_mean * state.grid.wavenumbers) * dt
    factor = np.exp(growth)
    # keep an inert mode 0 bit-identical
    factor[growth == 0] = 1.0
    return replace(state, coeffs=state.coeffs * factor, time=state.time + dt)


def evaluate_field(state: ModalState, locations) -> np.ndarray:
    """Synthesize the real field at arbitrary points in ``[0, L]``."""
    x = np.atleast_1d(np.asarray(locations, dtype=float))
    grid = state.grid
    if np.any(x < 0) or np.any(x > grid.length):
        raise ValueError(f"locations must lie in [0, {grid.length}]")
    weighted = grid.synthesis_weights * state.coeffs
    phase = np.exp(1j * np.outer(x, grid.wavenumbers))
    return (phase @ weighted).real


def frade_eigenvalues(params: FradeParams, grid: FourierGrid) -> np.ndarray:
    """Eigenvalues ``nu (i a_k)^alpha`` on the principal branch; ``mu_0 = 0``."""
    a = grid.wavenumbers
    mu = params.nu * a**params.alpha * np.exp(0.5j * np.pi * params.alpha)
    mu[0] = 0.0
    return mu


@dataclass
class ObservationOperator:
    """Maps an eigenvalue spectrum to the field at fixed ``(x_i, t_i)`` points.

    Only modes ``0..n_modes-1`` of the initial state take part; the rest are
    dropped. Evaluations are grouped by distinct observation time so that a
    spatial series at one time costs a single matrix-vector product.
    """

    initial: ModalState
    x: np.ndarray
    t: np.ndarray
    u_mean: float = 1.0
    n_modes: int | None = None
    _times: np.ndarray = field(init=False, repr=False)
    _time_index: np.ndarray = field(init=False, repr=False)
    _basis: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        grid = self.initial.grid
        self.x = np.atleast_1d(np.asarray(self.x, dtype=float))
        self.t = np.broadcast_to(np.asarray(self.t, dtype=float), self.x.shape).copy()
        if np.any(self.x < 0) or np.any(self.x > grid.length):
            raise ValueError(f"observation locations must lie in [0, {grid.length}]")
        if np.any(self.t < 0):
            raise ValueError("observation times must be non-negative")
        if self.n_modes is None:
            self.n_modes = grid.n_modes
        k = slice(0, self.n_modes)
        a = grid.wavenumbers[k]
        weighted = grid.synthesis_weights[k] * self.initial.coeffs[k]
        self._times, self._time_index = np.unique(self.t, return_inverse=True)
        # basis[i, k] = w_k c_k(0) exp(i a_k x_i - i u a_k t_i)
        self._basis = weighted * np.exp(1j * np.outer(self.x, a) - 1j * self.u_mean * np.outer(self.t, a))

    @property
    def grid(self) -> FourierGrid:
        return self.initial.grid

    @property
    def n_obs(self) -> int:
        return self.x.size

    def __call__(self, eigenvalues) -> np.ndarray:
        mu = np.asarray(eigenvalues, dtype=complex)[: self.n_modes]
        return self.batch(mu[None, :])[0]

    def batch(self, eigenvalues) -> np.ndarray:
        """Evaluate a stack of spectra, shape ``(B, >= n_modes)`` -> ``(B, n_obs)``."""
        mu = np.asarray(eigenvalues, dtype=complex)[:, : self.n_modes]
        if not np.all(np.isfinite(mu)):
            raise ValueError("eigenvalues must be finite")
        out = np.empty((mu.shape[0], self.n_obs))
        if self._times.size <= 4:
            for j, tj in enumerate(self._times):
                rows = self._time_index == j
                out[:, rows] = (np.exp(mu * tj) @ self._basis[rows].T).real
        else:
            growth = np.exp(mu[:, None, :] * self.t[None, :, None])
            out[:] = np.einsum("bik,ik->bi", growth, self._basis).real
        return out
