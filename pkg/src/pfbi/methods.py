"""Named interpolation methods (linear, gaussian, smc) behind one sampling interface."""

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .bridge import Path, linear_path, sample_bridge
from .errors import InvalidParameter
from .kernel import KernelParams, TimeGrid
from .mvn import RngState
from .smc import SMCInterpolator, Scorer, WeightSchedule

METHODS = ('linear', 'gaussian', 'smc')

Sampler = Callable[[np.ndarray, np.ndarray, RngState], Path]


@dataclass
class InterpolationMethod:
    name: str
    sample: Sampler
    grid: TimeGrid
    params: Optional[KernelParams] = None
    n_particles: Optional[int] = None
    deterministic: bool = False

    def __call__(self, z0, zT, rng: RngState) -> Path:
        return self.sample(z0, zT, rng)


def _mean_of(sampler: Sampler, grid: TimeGrid, k: int) -> Sampler:
    def sample(z0, zT, rng: RngState) -> Path:
        pts = np.mean([sampler(z0, zT, rng.substream(j)).points for j in range(k)], axis=0)
        return Path(grid, pts)
    return sample


def build_method(name: str, grid: TimeGrid, params: Optional[KernelParams] = None,
                 scorer: Optional[Scorer] = None, schedule: Optional[WeightSchedule] = None,
                 n_particles: int = 1000, ess_threshold: Optional[float] = None,
                 mean_of: int = 1) -> InterpolationMethod:
    if mean_of < 1:
        raise InvalidParameter(f"mean-of count must be >= 1, got {mean_of}")
    if name == 'linear':
        return InterpolationMethod('linear', lambda z0, zT, rng: linear_path(z0, zT, grid), grid,
                                   deterministic=True)
    if params is None:
        raise InvalidParameter(f"method '{name}' needs kernel parameters")
    if name == 'gaussian':
        sampler = lambda z0, zT, rng: sample_bridge(z0, zT, params, grid, rng)
        n_particles = None
    elif name == 'smc':
        if scorer is None:
            raise InvalidParameter("method 'smc' needs a discriminator")
        interp = SMCInterpolator(params, grid, scorer, schedule, n_particles, ess_threshold)
        sampler = lambda z0, zT, rng: interp.interpolate(z0, zT, rng)
    else:
        raise InvalidParameter(f"unknown method '{name}', expected one of {', '.join(METHODS)}")
    if mean_of > 1:
        sampler = _mean_of(sampler, grid, mean_of)
    return InterpolationMethod(name, sampler, grid, params, n_particles)
