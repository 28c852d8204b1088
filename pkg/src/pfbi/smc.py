"""
Sequential Monte Carlo sampler for the discriminator-reweighted bridge law.

Particles are mutated with the bridge conditionals and resampled with
weights built from the discriminator:

    w_k ~ [f(Z(t_{k-1}))^(xi g(t_{k-1})) f(Z(t_k))^((1-xi) g(t_k))]^(t_k - t_{k-1})
        * [f(Z(t_k))^(xi g(t_k)) f(Z(T))^((1-xi) g(T))]^(T - t_k)

With xi = 0 and g = 1/Delta on an equidistant grid this is w_k ~ f(Z(t_k)).
"""

from dataclasses import dataclass, field
from typing import Callable, List, Optional, Tuple, Union

import numpy as np
from scipy.special import logsumexp

from .bridge import Path, _check_endpoints, bridge_step_batch, step_conditional
from .errors import DegenerateWeights, InvalidParameter
from .kernel import KernelParams, TimeGrid, build_covariance
from .log import init_logger
from .mvn import DEFAULT_JITTER, RngLike, RngState

Scorer = Callable[[np.ndarray], np.ndarray]

UNIT_EXPONENT_ATOL = 1e-12


# ====================== Weight schedule ======================
@dataclass
class WeightSchedule:
    gamma: np.ndarray  # one value per grid time
    xi: float = 0.0

    def __post_init__(self):
        self.gamma = np.asarray(self.gamma, dtype=float)
        if self.gamma.ndim != 1:
            raise InvalidParameter("gamma must be a vector of per-time values")
        if not np.all(np.isfinite(self.gamma)) or np.any(self.gamma < 0):
            raise InvalidParameter("gamma values must be finite and non-negative")
        if not 0.0 <= self.xi <= 1.0:
            raise InvalidParameter(f"xi must lie in [0, 1], got {self.xi}")

    @classmethod
    def preset(cls, grid: TimeGrid) -> "WeightSchedule":
        """xi = 0, gamma = 1/Delta with Delta = T/m."""
        return cls(np.full(len(grid), grid.steps / grid.horizon), 0.0)

    @classmethod
    def constant(cls, grid: TimeGrid, gamma: float, xi: float = 0.0) -> "WeightSchedule":
        return cls(np.full(len(grid), float(gamma)), xi)

    def exponents(self, grid: TimeGrid, k: int) -> Tuple[float, float, float]:
        """Exponents on log f at (t_{k-1}, t_k, T) in the step-k weight."""
        if self.gamma.size != len(grid):
            raise InvalidParameter(f"schedule has {self.gamma.size} gamma values for a grid of {len(grid)} times")
        t = grid.times
        dt = t[k] - t[k - 1]
        rest = grid.horizon - t[k]
        g, xi = self.gamma, self.xi
        return (dt * xi * g[k - 1],
                dt * (1.0 - xi) * g[k] + rest * xi * g[k],
                rest * (1.0 - xi) * g[-1])

    def lookahead_exponents(self, grid: TimeGrid, k: int) -> Tuple[float, float]:
        """Exponents on log f at (t_k, T) of the end-point factor of step k."""
        rest = grid.horizon - grid.times[k]
        return rest * self.xi * self.gamma[k], rest * (1.0 - self.xi) * self.gamma[-1]


# ====================== Ensemble ======================
@dataclass
class ParticleEnsemble:
    paths: np.ndarray          # (N, m+1, d); rows 0..k filled, row m pinned to zT
    grid: TimeGrid
    rng: RngState
    k: int = 0
    log_weights: Optional[np.ndarray] = None
    ancestors: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.log_weights is None:
            self.log_weights = np.full(self.n_particles, -np.log(self.n_particles))

    @classmethod
    def start(cls, z0, zT, grid: TimeGrid, n_particles: int, rng: RngState) -> "ParticleEnsemble":
        if n_particles < 1:
            raise InvalidParameter(f"need at least one particle, got {n_particles}")
        z0, zT = _check_endpoints(z0, zT)
        paths = np.full((n_particles, len(grid), z0.size), np.nan)
        paths[:, 0] = z0
        paths[:, -1] = zT
        return cls(paths, grid, rng)

    @property
    def n_particles(self) -> int:
        return self.paths.shape[0]

    @property
    def partial(self) -> np.ndarray:
        return self.paths[:, :self.k + 1]

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights - logsumexp(self.log_weights))


# ====================== Weights ======================
def _log_f(scorer: Scorer, z: np.ndarray) -> np.ndarray:
    with np.errstate(divide='ignore'):
        return np.log(np.asarray(scorer(z), dtype=float))


def _normalize_log(logw: np.ndarray) -> np.ndarray:
    with np.errstate(invalid='ignore'):
        total = logsumexp(logw)
    if not np.isfinite(total):
        raise DegenerateWeights("all particle weights vanished; the discriminator is ~0 on the whole ensemble")
    return np.exp(logw - total)


def step_weights(ensemble: ParticleEnsemble, scorer: Scorer, sched: WeightSchedule,
                 k: int) -> np.ndarray:
    """Normalized step-k weights of every particle (computed in log space)."""
    if not 1 <= k <= ensemble.k:
        raise InvalidParameter(f"particles are extended through t_{ensemble.k}, cannot weight step {k}")
    a_prev, a_k, a_end = sched.exponents(ensemble.grid, k)
    paths = ensemble.paths
    if a_prev == 0.0 and abs(a_k - 1.0) <= UNIT_EXPONENT_ATOL:
        # unit exponent on f(Z(t_k)); the f(Z(T)) factor is shared and cancels
        raw = np.asarray(scorer(paths[:, k]), dtype=float)
        total = raw.sum()
        if not np.isfinite(total) or total <= 0.0:
            raise DegenerateWeights("all particle weights vanished; the discriminator is ~0 on the whole ensemble")
        return raw / total
    logw = a_k * _log_f(scorer, paths[:, k])
    if a_prev != 0.0:
        logw = logw + a_prev * _log_f(scorer, paths[:, k - 1])
    if a_end != 0.0:
        logw = logw + a_end * _log_f(scorer, paths[:1, -1])[0]
    return _normalize_log(logw)


def log_lookahead(ensemble: ParticleEnsemble, scorer: Scorer, sched: WeightSchedule, k: int) -> np.ndarray:
    b_k, b_end = sched.lookahead_exponents(ensemble.grid, k)
    out = np.zeros(ensemble.n_particles)
    if b_k != 0.0:
        out = out + b_k * _log_f(scorer, ensemble.paths[:, k])
    if b_end != 0.0:
        out = out + b_end * _log_f(scorer, ensemble.paths[:1, -1])[0]
    return out


# ====================== Resampling ======================
def multinomial_indices(weights: np.ndarray, gen: np.random.Generator) -> np.ndarray:
    """N ancestor indices drawn i.i.d. from the weight distribution."""
    cdf = np.cumsum(weights)
    u = gen.random(len(weights)) * cdf[-1]
    return np.minimum(np.searchsorted(cdf, u, side='right'), len(weights) - 1)


def resample_multinomial(ensemble: ParticleEnsemble, weights: np.ndarray,
                         rng: RngLike) -> ParticleEnsemble:
    gen = rng.generator() if isinstance(rng, RngState) else rng
    idx = multinomial_indices(np.asarray(weights, dtype=float), gen)
    return ParticleEnsemble(ensemble.paths[idx], ensemble.grid, ensemble.rng, ensemble.k,
                            ancestors=idx)


def ess(weights: np.ndarray) -> float:
    w = np.asarray(weights, dtype=float)
    return float(1.0 / np.sum(w * w))


# ====================== Interpolator ======================
@dataclass
class SMCRunInfo:
    ess: List[float] = field(default_factory=list)
    resampled: List[bool] = field(default_factory=list)

    @property
    def min_ess(self) -> float:
        return min(self.ess) if self.ess else float('nan')


class SMCInterpolator:
    """
    Particle filter over the bridge: for k = 1..m-1 extend every particle by
    one conditional step, weight, resample. Mutation noise at step k comes
    from substream (k,), resampling from (k, 1), so a run is a pure function
    of (endpoints, RngState) whatever the particle evaluation order.
    """

    def __init__(self, params: KernelParams, grid: TimeGrid, scorer: Scorer,
                 schedule: Optional[WeightSchedule] = None, n_particles: int = 1000,
                 ess_threshold: Optional[float] = None, jitter: float = DEFAULT_JITTER):
        if n_particles < 1:
            raise InvalidParameter(f"need at least one particle, got {n_particles}")
        if ess_threshold is not None and not 0.0 < ess_threshold <= 1.0:
            raise InvalidParameter(f"ESS threshold must lie in (0, 1], got {ess_threshold}")
        self.params = params
        self.grid = grid
        self.scorer = scorer
        self.schedule = schedule if schedule is not None else WeightSchedule.preset(grid)
        if self.schedule.gamma.size != len(grid):
            raise InvalidParameter(
                f"schedule has {self.schedule.gamma.size} gamma values for a grid of {len(grid)} times")
        self.n_particles = int(n_particles)
        self.ess_threshold = ess_threshold
        self.cov = build_covariance(params, grid)
        self.conds = [step_conditional(self.cov, k, jitter) for k in range(1, grid.steps)]
        self.last_run: Optional[SMCRunInfo] = None
        self._init_log()

    def _init_log(self):
        self.logger = init_logger('SMCInterpolator')

    def run(self, z0, zT, rng: RngLike) -> ParticleEnsemble:
        if isinstance(rng, np.random.Generator):
            rng = RngState(int(rng.integers(0, 2 ** 63)))
        ens = ParticleEnsemble.start(z0, zT, self.grid, self.n_particles, rng)
        zT = ens.paths[0, -1]
        n = ens.n_particles
        info = SMCRunInfo()
        lookahead = np.zeros(n)
        for k in range(1, self.grid.steps):
            ens.paths[:, k] = bridge_step_batch(ens.paths[:, :k], zT, self.cov,
                                                rng.substream(k).generator(), self.conds[k - 1])
            ens.k = k
            if self.ess_threshold is None:
                w = step_weights(ens, self.scorer, self.schedule, k)
            else:
                logw = ens.log_weights + np.log(step_weights(ens, self.scorer, self.schedule, k)) - lookahead
                w = _normalize_log(logw)
                lookahead = log_lookahead(ens, self.scorer, self.schedule, k)
            e = ess(w)
            info.ess.append(e)
            if e < 0.01 * n and n > 1:
                self.logger.warning(f"ESS collapsed to {e:.1f} of {n} particles at step {k}")
            if self.ess_threshold is None or e < self.ess_threshold * n:
                ens = resample_multinomial(ens, w, rng.substream(k, 1))
                lookahead = lookahead[ens.ancestors]
                info.resampled.append(True)
            else:
                with np.errstate(divide='ignore'):
                    ens.log_weights = np.log(w)
                info.resampled.append(False)
        self.last_run = info
        self.logger.debug(f"SMC run: {n} particles, {self.grid.steps} steps, min ESS {info.min_ess:.1f}")
        return ens

    def interpolate(self, z0, zT, rng: RngLike,
                    return_ensemble: bool = False) -> Union[Path, Tuple[Path, ParticleEnsemble]]:
        ens = self.run(z0, zT, rng)
        pick = 0
        if not np.allclose(ens.log_weights, ens.log_weights[0]):
            # weighted ensemble left by adaptive resampling: draw the example by weight
            pick = int(multinomial_indices(ens.weights, ens.rng.substream(self.grid.steps, 1).generator())[0])
        path = Path(self.grid, ens.paths[pick].copy())
        return (path, ens) if return_ensemble else path


def smc_interpolate(z0, zT, params: KernelParams, grid: TimeGrid, net: Scorer,
                    sched: Optional[WeightSchedule], n_particles: int, rng: RngLike,
                    return_ensemble: bool = False, ess_threshold: Optional[float] = None):
    interp = SMCInterpolator(params, grid, net, sched, n_particles, ess_threshold)
    return interp.interpolate(z0, zT, rng, return_ensemble)
