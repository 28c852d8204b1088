"""
Stationary exponential-power kernel k(h) = exp(-beta * |h|**alpha) and the
time-covariance matrices it induces on a sampling grid.
"""

from dataclasses import dataclass
from typing import Union

import numpy as np

from .errors import InvalidParameter

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class KernelParams:
    alpha: float = 2.0
    beta: float = 5.0

    def __post_init__(self):
        if not np.isfinite(self.alpha) or not (0.0 < self.alpha <= 2.0):
            # alpha > 2 is not positive semi-definite
            raise InvalidParameter(f"alpha must lie in (0, 2], got {self.alpha}")
        if not np.isfinite(self.beta) or self.beta <= 0.0:
            raise InvalidParameter(f"beta must be positive, got {self.beta}")


class TimeGrid:
    """Sampling times 0 = t_0 < t_1 < ... < t_m = T."""

    def __init__(self, times):
        t = np.asarray(times, dtype=float)
        if t.ndim != 1 or t.size < 3:
            raise InvalidParameter(f"a time grid needs at least 3 times (m >= 2), got {t.size}")
        if not np.all(np.isfinite(t)):
            raise InvalidParameter("grid times must be finite")
        if t[0] != 0.0:
            raise InvalidParameter(f"grid must start at t_0 = 0, got {t[0]}")
        if np.any(np.diff(t) <= 0.0):
            raise InvalidParameter("grid times must be strictly increasing")
        t.setflags(write=False)
        self._times = t

    @classmethod
    def equidistant(cls, horizon: float = 1.0, steps: int = 16) -> "TimeGrid":
        if int(steps) != steps or steps < 2:
            raise InvalidParameter(f"steps must be an integer >= 2, got {steps}")
        if not np.isfinite(horizon) or horizon <= 0.0:
            raise InvalidParameter(f"horizon T must be positive, got {horizon}")
        times = np.linspace(0.0, float(horizon), int(steps) + 1)
        times[-1] = float(horizon)
        return cls(times)

    @property
    def times(self) -> np.ndarray:
        return self._times

    @property
    def horizon(self) -> float:
        return float(self._times[-1])

    @property
    def steps(self) -> int:
        return self._times.size - 1

    @property
    def deltas(self) -> np.ndarray:
        return np.diff(self._times)

    def reversed(self) -> "TimeGrid":
        """Grid mirrored in time, t -> T - t."""
        return TimeGrid(self.horizon - self._times[::-1])

    def __len__(self):
        return self._times.size

    def __eq__(self, other):
        return isinstance(other, TimeGrid) and np.array_equal(self._times, other._times)

    def __repr__(self):
        return f"TimeGrid(T={self.horizon}, m={self.steps})"


def kernel_eval(params: KernelParams, h: ArrayLike) -> ArrayLike:
    """k(h) = exp(-beta |h|^alpha); vectorized over h."""
    out = np.exp(-params.beta * np.abs(h) ** params.alpha)
    if np.ndim(out) == 0:
        return float(out)
    return out


def build_covariance(params: KernelParams, grid: TimeGrid) -> np.ndarray:
    """Sigma_ij = k(t_i - t_j) over the grid; symmetric with unit diagonal."""
    t = grid.times
    lags = t[:, None] - t[None, :]
    return kernel_eval(params, lags)
