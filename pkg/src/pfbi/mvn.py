"""
Multivariate-normal machinery: Cholesky with an escalating jitter schedule,
Gaussian conditioning on index blocks and seeded sampling.

Normal variates are produced by the inverse-CDF method: 53-bit uniforms
strictly inside (0, 1) mapped through scipy.special.ndtri. Every module draws
normals through `standard_normal`, so a fixed (seed, stream) reproduces the
same variates on any platform numpy's PCG64 supports.
"""

import logging
from dataclasses import dataclass, field
from typing import Sequence, Tuple, Union

import numpy as np
from scipy import linalg
from scipy.special import ndtri

from .errors import DimensionMismatch, FactorizationFailure, InvalidParameter

logger = logging.getLogger(__name__)

DEFAULT_JITTER = 1e-8
JITTER_ESCALATIONS = 6  # jitter, 10*jitter, ..., 1e6*jitter

_U53 = 2.0 ** -53
_EPS = np.finfo(float).eps


# ====================== RNG plumbing ======================
@dataclass(frozen=True)
class RngState:
    """
    Seed plus stream id. Identical (seed, stream, keys) give identical draws;
    `substream` derives independent keyed streams, e.g. per particle or step.
    """
    seed: int = 0
    stream: int = 0
    keys: Tuple[int, ...] = field(default=())

    def __post_init__(self):
        if int(self.seed) < 0 or int(self.stream) < 0 or any(int(k) < 0 for k in self.keys):
            raise InvalidParameter(f"seed, stream and keys must be non-negative, got {self.seed}, {self.stream}, {self.keys}")

    def generator(self) -> np.random.Generator:
        ss = np.random.SeedSequence(entropy=int(self.seed), spawn_key=(int(self.stream),) + tuple(int(k) for k in self.keys))
        return np.random.Generator(np.random.PCG64(ss))

    def substream(self, *keys: int) -> "RngState":
        return RngState(self.seed, self.stream, self.keys + tuple(int(k) for k in keys))


RngLike = Union[RngState, np.random.Generator]


def as_generator(rng: RngLike) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, RngState):
        return rng.generator()
    raise TypeError(f"expected RngState or numpy Generator, got {type(rng).__name__}")


def standard_normal(gen: np.random.Generator, shape) -> np.ndarray:
    u = (gen.integers(0, 2 ** 53, size=shape, dtype=np.int64) + 0.5) * _U53
    return ndtri(u)


# ====================== Factorization ======================
def jitter_schedule(jitter: float) -> np.ndarray:
    if jitter < 0:
        raise ValueError(f"jitter must be non-negative, got {jitter}")
    if jitter == 0:
        return np.zeros(1)
    return np.concatenate([[0.0], jitter * 10.0 ** np.arange(JITTER_ESCALATIONS + 1)])


def cholesky_jitter(M: np.ndarray, jitter: float = DEFAULT_JITTER) -> np.ndarray:
    """
    Lower-triangular L with L L^T = M + j I, j the first entry of
    {0, jitter, 10 jitter, ..., 1e6 jitter} for which the factorization succeeds.
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DimensionMismatch(f"expected a square matrix, got shape {M.shape}")
    if M.size == 0:
        return np.zeros_like(M)
    eye = np.eye(M.shape[0])
    for j in jitter_schedule(jitter):
        try:
            L = linalg.cholesky(M + j * eye, lower=True, check_finite=True)
        except (linalg.LinAlgError, ValueError):
            continue
        piv = np.diag(L) ** 2
        if piv.min() <= M.shape[0] * _EPS * piv.max():
            # pivots at rounding level: the solves would amplify noise
            continue
        if j > jitter:
            logger.debug(f"Cholesky needed jitter {j:.1e} (size {M.shape[0]})")
        return L
    raise FactorizationFailure(
        f"Cholesky failed for a {M.shape[0]}x{M.shape[0]} matrix up to jitter "
        f"{jitter_schedule(jitter)[-1]:.1e}; check the grid for (near-)duplicate times")


# ====================== Conditioning ======================
@dataclass(frozen=True)
class GaussianCond:
    """Law of X_free | X_given = g for a zero-mean joint: N(mean_map @ g, cond_var)."""
    mean_map: np.ndarray
    cond_var: np.ndarray
    free: Tuple[int, ...]
    given: Tuple[int, ...]

    def mean(self, observed: np.ndarray) -> np.ndarray:
        """Conditional mean; `observed` has the given block on its first axis."""
        if not self.given:
            return np.zeros((len(self.free),) + np.shape(observed)[1:])
        return np.tensordot(self.mean_map, observed, axes=(1, 0))


def condition(joint_cov: np.ndarray, free: Sequence[int], given: Sequence[int],
              jitter: float = DEFAULT_JITTER) -> GaussianCond:
    joint_cov = np.asarray(joint_cov, dtype=float)
    free = tuple(int(i) for i in free)
    given = tuple(int(i) for i in given)
    n = joint_cov.shape[0]
    if set(free) & set(given):
        raise ValueError("free and given index sets must be disjoint")
    if any(i < 0 or i >= n for i in free + given):
        raise IndexError(f"indices out of range for a {n}x{n} covariance")
    f = np.array(free, dtype=int)
    g = np.array(given, dtype=int)
    S_ff = joint_cov[np.ix_(f, f)]
    if not given:
        return GaussianCond(np.zeros((f.size, 0)), S_ff.copy(), free, given)
    S_fg = joint_cov[np.ix_(f, g)]
    S_gg = joint_cov[np.ix_(g, g)]
    L = cholesky_jitter(S_gg, jitter)
    # mean_map = S_fg S_gg^{-1}, via two triangular solves
    A = linalg.solve_triangular(L, S_fg.T, lower=True)
    mean_map = linalg.solve_triangular(L.T, A, lower=False).T
    cond_var = S_ff - A.T @ A
    cond_var = 0.5 * (cond_var + cond_var.T)
    return GaussianCond(mean_map, cond_var, free, given)


# ====================== Sampling ======================
def sample_mvn(mean: np.ndarray, chol: np.ndarray, rng: RngLike) -> np.ndarray:
    """mean + L eps with eps ~ N(0, I) drawn from rng."""
    mean = np.asarray(mean, dtype=float)
    chol = np.asarray(chol, dtype=float)
    if chol.shape != (mean.size, mean.size):
        raise DimensionMismatch(f"mean has size {mean.size} but chol has shape {chol.shape}")
    eps = standard_normal(as_generator(rng), mean.shape)
    return mean + chol @ eps
