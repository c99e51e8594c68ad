"""Log-permeability sampling: squared-exponential Gaussian field, periodic in x."""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

__all__ = ["Grid2D", "GrfConfig", "LogPermeabilitySampler", "sample_log_permeability"]


@dataclass(frozen=True)
class Grid2D:
    """Cell-centered grid; x-centers at ``i dx`` (periodic), y-centers at ``(j + 1/2) dy``."""

    n_x: int = 256
    n_y: int = 32
    length_x: float = 4.0
    length_y: float = 1.0

    def __post_init__(self):
        if self.n_x < 2 or self.n_y < 1:
            raise ValueError("grid needs n_x >= 2 and n_y >= 1")

    @property
    def dx(self) -> float:
        return self.length_x / self.n_x

    @property
    def dy(self) -> float:
        return self.length_y / self.n_y

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.n_x) * self.dx

    @property
    def y(self) -> np.ndarray:
        return (np.arange(self.n_y) + 0.5) * self.dy


@dataclass(frozen=True)
class GrfConfig:
    sigma2: float = 1.0
    ell_x: float = 0.2
    ell_y: float = 0.2
    grid: Grid2D = Grid2D()

    def __post_init__(self):
        if self.ell_x <= 0 or self.ell_y <= 0:
            raise ValueError("correlation lengths must be positive")
        if self.ell_x > 0.1 * self.grid.length_x:
            raise ValueError("ell_x must not exceed 10% of the domain length")
        if self.sigma2 < 0:
            raise ValueError("sigma2 must be non-negative")


class LogPermeabilitySampler:
    """Exact sampler for ``ln kappa ~ N(0, sigma2 exp(-dx^2/2lx^2 - dy^2/2ly^2))``.

    The covariance is separable: circulant in x (diagonalized by the FFT) and
    dense in y (factored once by symmetric eigendecomposition).
    """

    def __init__(self, config: GrfConfig):
        self.config = config

    @cached_property
    def _x_root(self) -> np.ndarray:
        g = self.config.grid
        lag = np.minimum(g.x, g.length_x - g.x)
        row = np.exp(-(lag**2) / (2 * self.config.ell_x**2))
        eig = np.fft.fft(row).real
        # SE kernel wrapped on a long period: negative eigenvalues are round-off
        return np.sqrt(np.clip(eig, 0.0, None))

    @cached_property
    def _y_root(self) -> np.ndarray:
        y = self.config.grid.y
        cov = np.exp(-((y[:, None] - y[None, :]) ** 2) / (2 * self.config.ell_y**2))
        w, v = np.linalg.eigh(cov)
        return v * np.sqrt(np.clip(w, 0.0, None))

    def sample(self, rng) -> np.ndarray:
        """One field of shape ``(n_x, n_y)``."""
        g = self.config.grid
        rng = np.random.default_rng(rng)
        z = rng.standard_normal((g.n_x, g.n_y))
        if self.config.sigma2 == 0:
            return np.zeros_like(z)
        zx = np.fft.ifft(self._x_root[:, None] * np.fft.fft(z, axis=0), axis=0).real
        return np.sqrt(self.config.sigma2) * zx @ self._y_root.T


def sample_log_permeability(config: GrfConfig, rng_seed=None) -> np.ndarray:
    return LogPermeabilitySampler(config).sample(rng_seed)
