"""
Gaussian bridge interpolation between two latent endpoints.

Latent coordinates are independent and share the time covariance Sigma; each
coordinate is a copy of the same 1-D bridge. Step k conditions on the whole
history t_0..t_{k-1} plus the endpoint t_m (no Markov shortcut).
"""

import logging
from dataclasses import dataclass
from typing import List

import numpy as np

from .errors import DimensionMismatch, InvalidParameter
from .kernel import KernelParams, TimeGrid, build_covariance
from .mvn import (DEFAULT_JITTER, GaussianCond, RngLike, RngState, as_generator,
                  cholesky_jitter, condition, standard_normal)

logger = logging.getLogger(__name__)


def as_latent(z, dim: int = None) -> np.ndarray:
    z = np.asarray(z, dtype=float)
    if z.ndim != 1:
        raise DimensionMismatch(f"a latent point is a 1-D vector, got shape {z.shape}")
    if not np.all(np.isfinite(z)):
        raise InvalidParameter("latent point has non-finite entries")
    if dim is not None and z.size != dim:
        raise DimensionMismatch(f"expected a {dim}-dimensional latent point, got {z.size}")
    return z


@dataclass
class Path:
    grid: TimeGrid
    points: np.ndarray  # (m+1, d)

    def __post_init__(self):
        self.points = np.asarray(self.points, dtype=float)
        if self.points.ndim != 2 or self.points.shape[0] != len(self.grid):
            raise DimensionMismatch(
                f"path has {self.points.shape[0] if self.points.ndim else 0} points "
                f"but the grid has {len(self.grid)} times")

    @property
    def start(self) -> np.ndarray:
        return self.points[0]

    @property
    def end(self) -> np.ndarray:
        return self.points[-1]

    @property
    def midpoint(self) -> np.ndarray:
        return self.points[self.grid.steps // 2]


def _check_endpoints(z0, zT):
    z0 = as_latent(z0)
    zT = as_latent(zT, dim=z0.size)
    return z0, zT


# ====================== Linear baseline ======================
def linear_path(z0, zT, grid: TimeGrid) -> Path:
    z0, zT = _check_endpoints(z0, zT)
    s = grid.times / grid.horizon
    points = z0[None, :] + s[:, None] * (zT - z0)[None, :]
    points[0] = z0
    points[-1] = zT
    return Path(grid, points)


# ====================== Sequential bridge ======================
def step_conditional(cov: np.ndarray, k: int, jitter: float = DEFAULT_JITTER) -> GaussianCond:
    """Law of Z(t_k) given Z(t_0..t_{k-1}) and Z(t_m)."""
    m = cov.shape[0] - 1
    if not 1 <= k <= m - 1:
        raise InvalidParameter(f"bridge step index must be in [1, {m - 1}], got {k}")
    return condition(cov, free=[k], given=list(range(k)) + [m], jitter=jitter)


def bridge_step_batch(histories: np.ndarray, zT: np.ndarray, cov: np.ndarray,
                      gen: np.random.Generator, cond: GaussianCond = None) -> np.ndarray:
    """
    Extend n histories (n, k, d) covering t_0..t_{k-1} by one point each.
    Returns the new points, shape (n, d).
    """
    n, k, d = histories.shape
    if cond is None:
        cond = step_conditional(cov, k)
    given = np.concatenate([histories, np.broadcast_to(zT, (n, 1, d))], axis=1)
    mean = np.einsum('g,ngd->nd', cond.mean_map[0], given)
    sd = np.sqrt(max(float(cond.cond_var[0, 0]), 0.0))
    return mean + sd * standard_normal(gen, (n, d))


def bridge_step(history, zT, cov: np.ndarray, rng: RngLike) -> np.ndarray:
    """
    Draw Z(t_k) for one path given its points at t_0..t_{k-1} (rows of
    `history`) and the endpoint zT; every coordinate uses the same 1-D law.
    """
    history = np.asarray(history, dtype=float)
    if history.ndim != 2:
        raise DimensionMismatch(f"history must be (k, d), got shape {history.shape}")
    zT = as_latent(zT, dim=history.shape[1])
    cov = np.asarray(cov, dtype=float)
    return bridge_step_batch(history[None], zT, cov, as_generator(rng))[0]


def _step_generators(rng: RngLike, m: int) -> List[np.random.Generator]:
    # per-step substreams for RngState; a bare Generator is consumed sequentially
    if isinstance(rng, RngState):
        return [rng.substream(k).generator() for k in range(1, m)]
    gen = as_generator(rng)
    return [gen] * (m - 1)


def sample_bridge_batch(z0, zT, params: KernelParams, grid: TimeGrid, n: int,
                        rng: RngLike, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """n sequentially sampled bridge paths, shape (n, m+1, d)."""
    z0, zT = _check_endpoints(z0, zT)
    if n < 1:
        raise InvalidParameter(f"number of paths must be >= 1, got {n}")
    m = grid.steps
    cov = build_covariance(params, grid)
    paths = np.empty((n, m + 1, z0.size))
    paths[:, 0] = z0
    paths[:, m] = zT
    for k, gen in zip(range(1, m), _step_generators(rng, m)):
        cond = step_conditional(cov, k, jitter)
        paths[:, k] = bridge_step_batch(paths[:, :k], zT, cov, gen, cond)
    return paths


def sample_bridge(z0, zT, params: KernelParams, grid: TimeGrid, rng: RngLike,
                  jitter: float = DEFAULT_JITTER) -> Path:
    return Path(grid, sample_bridge_batch(z0, zT, params, grid, 1, rng, jitter)[0])


# ====================== Joint oracle ======================
def bridge_marginals(z0, zT, params: KernelParams, grid: TimeGrid,
                     jitter: float = DEFAULT_JITTER):
    """
    Exact interior law given both endpoints: mean (m-1, d) and the shared
    (m-1, m-1) covariance.
    """
    z0, zT = _check_endpoints(z0, zT)
    m = grid.steps
    cov = build_covariance(params, grid)
    cond = condition(cov, free=range(1, m), given=[0, m], jitter=jitter)
    return cond.mean(np.stack([z0, zT])), cond.cond_var


def sample_bridge_joint_batch(z0, zT, params: KernelParams, grid: TimeGrid, n: int,
                              rng: RngLike, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """n paths drawn in one shot from the interior block conditioned on both endpoints."""
    z0, zT = _check_endpoints(z0, zT)
    m = grid.steps
    mean, var = bridge_marginals(z0, zT, params, grid, jitter)
    L = cholesky_jitter(var, jitter)
    eps = standard_normal(as_generator(rng), (n, m - 1, z0.size))
    paths = np.empty((n, m + 1, z0.size))
    paths[:, 0] = z0
    paths[:, m] = zT
    paths[:, 1:m] = mean[None] + np.einsum('ij,njd->nid', L, eps)
    return paths


def sample_bridge_joint_oracle(z0, zT, params: KernelParams, grid: TimeGrid, rng: RngLike,
                               jitter: float = DEFAULT_JITTER) -> Path:
    return Path(grid, sample_bridge_joint_batch(z0, zT, params, grid, 1, rng, jitter)[0])
