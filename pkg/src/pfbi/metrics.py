"""
Latent-space scores for interpolation paths.

mean score   nearest-data Euclidean distance, at the midpoint or averaged
             over the interior points
smoothness   largest turning angle between consecutive path segments
variability  per-coordinate sample std of midpoints, averaged over coordinates
"""

import concurrent.futures
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd

from .bridge import Path
from .discriminator import LatentDataset
from .errors import DimensionMismatch, EmptyDataset, InsufficientSamples, InvalidParameter
from .log import init_logger
from .methods import InterpolationMethod
from .mvn import RngLike, RngState, as_generator

SCORE_MODES = ('interior-average', 'midpoint')
REPORT_COLUMNS = ['method', 'T', 'alpha', 'beta', 'N', 'mean_score', 'mean_std',
                  'smoothness', 'smoothness_std', 'variability']

Points = Union[Path, np.ndarray]


def _points(path: Points) -> np.ndarray:
    return path.points if isinstance(path, Path) else np.asarray(path, dtype=float)


def _dataset(data) -> LatentDataset:
    if isinstance(data, LatentDataset):
        return data
    pts = np.asarray(data, dtype=float)
    if pts.ndim != 2 or pts.shape[0] == 0:
        raise EmptyDataset("mean score needs a non-empty dataset")
    return LatentDataset(pts)


def nearest_distances(points: np.ndarray, data: LatentDataset) -> np.ndarray:
    if points.shape[-1] != data.dim:
        raise DimensionMismatch(f"path dimension {points.shape[-1]} != dataset dimension {data.dim}")
    dist, _ = data.tree.query(points)
    return dist


def mean_score(path: Points, data, mode: str = 'interior-average') -> float:
    pts = _points(path)
    data = _dataset(data)
    m = pts.shape[0] - 1
    if mode == 'midpoint':
        scored = pts[m // 2][None]
    elif mode == 'interior-average':
        scored = pts[1:m] if m >= 2 else pts
    else:
        raise InvalidParameter(f"unknown score mode '{mode}', expected one of {', '.join(SCORE_MODES)}")
    return float(np.mean(nearest_distances(scored, data)))


def smoothness_score(path: Points) -> float:
    pts = _points(path)
    if pts.shape[0] < 3:
        raise InsufficientSamples("smoothness needs at least 3 path points (m >= 2)")
    seg = np.diff(pts, axis=0)
    a, b = seg[:-1], seg[1:]
    na = np.linalg.norm(a, axis=1)
    nb = np.linalg.norm(b, axis=1)
    denom = na * nb
    ok = denom > 0.0
    cos = np.ones_like(denom)
    cos[ok] = np.einsum('ij,ij->i', a[ok], b[ok]) / denom[ok]
    return float(np.max(np.arccos(np.clip(cos, -1.0, 1.0))))


def variability_score(midpoints: Sequence[np.ndarray]) -> float:
    mids = np.asarray(midpoints, dtype=float)
    if mids.ndim != 2 or mids.shape[0] < 2:
        raise InsufficientSamples("variability needs at least two midpoints")
    return float(np.mean(np.std(mids, axis=0, ddof=1)))


def random_pairs(data: LatentDataset, n_pairs: int, rng: RngLike) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Endpoint pairs of two distinct, uniformly chosen dataset rows."""
    if len(data) < 2:
        raise InsufficientSamples("random pairs need at least two data points")
    gen = as_generator(rng)
    i = gen.integers(0, len(data), size=n_pairs)
    j = (i + gen.integers(1, len(data), size=n_pairs)) % len(data)
    return [(data.points[a].copy(), data.points[b].copy()) for a, b in zip(i, j)]


def _std(values: np.ndarray) -> float:
    return float(np.std(values, ddof=1)) if len(values) > 1 else 0.0


# ====================== Report ======================
@dataclass
class ScoreReport:
    method: str
    mean_score: float
    mean_std: float
    smoothness_score: float
    smoothness_std: float
    variability_score: float   # NaN when fewer than two repeats per pair
    n_interpolations: int
    T: Optional[float] = None
    alpha: Optional[float] = None
    beta: Optional[float] = None
    n_particles: Optional[int] = None

    def to_row(self) -> dict:
        return {'method': self.method, 'T': self.T, 'alpha': self.alpha, 'beta': self.beta,
                'N': self.n_particles, 'mean_score': self.mean_score, 'mean_std': self.mean_std,
                'smoothness': self.smoothness_score, 'smoothness_std': self.smoothness_std,
                'variability': self.variability_score}


def reports_frame(reports: Sequence[ScoreReport]) -> pd.DataFrame:
    df = pd.DataFrame([r.to_row() for r in reports], columns=REPORT_COLUMNS)
    df['N'] = df['N'].astype('Int64')
    return df


def write_report(path: str, reports: Sequence[ScoreReport]) -> None:
    reports_frame(reports).to_csv(path, index=False, float_format='%.17g', lineterminator='\n')


# ====================== Evaluation ======================
class MethodEvaluator:
    """
    Runs a method over endpoint pairs. Pair i, repeat r draws from substream
    (i, r) of the run's RngState, so pairs may run on a thread pool without
    changing the report.
    """

    def __init__(self, data: LatentDataset, repeats: int = 1, mode: str = 'interior-average',
                 workers: int = 1):
        if repeats < 1:
            raise InvalidParameter(f"repeats must be >= 1, got {repeats}")
        if mode not in SCORE_MODES:
            raise InvalidParameter(f"unknown score mode '{mode}'")
        self.data = _dataset(data)
        self.repeats = repeats
        self.mode = mode
        self.workers = max(1, int(workers))
        self._init_log()

    def _init_log(self):
        self.logger = init_logger('MethodEvaluator')

    def _score_pair(self, method: InterpolationMethod, z0, zT, rng: RngState):
        means, smooth, mids = [], [], []
        # a deterministic method yields the same path on every repeat
        draws = 1 if method.deterministic else self.repeats
        for r in range(draws):
            path = method(z0, zT, rng.substream(r))
            means.append(mean_score(path, self.data, self.mode))
            smooth.append(smoothness_score(path))
            mids.append(path.midpoint)
        if self.repeats < 2:
            var = float('nan')
        else:
            var = 0.0 if method.deterministic else variability_score(mids)
        return float(np.mean(means)), float(np.mean(smooth)), var

    def evaluate(self, method: InterpolationMethod, endpoints: Sequence[Tuple[np.ndarray, np.ndarray]],
                 rng: RngState) -> ScoreReport:
        if not endpoints:
            raise InsufficientSamples("evaluation needs at least one endpoint pair")
        n = len(endpoints)
        results: List[Optional[Tuple[float, float, float]]] = [None] * n
        if self.workers == 1:
            for i, (z0, zT) in enumerate(endpoints):
                results[i] = self._score_pair(method, z0, zT, rng.substream(i))
        else:
            with concurrent.futures.ThreadPoolExecutor(max_workers=self.workers) as ex:
                fut2idx = {ex.submit(self._score_pair, method, z0, zT, rng.substream(i)): i
                           for i, (z0, zT) in enumerate(endpoints)}
                for fut in concurrent.futures.as_completed(fut2idx):
                    i = fut2idx[fut]
                    try:
                        results[i] = fut.result()
                    except Exception as e:
                        self.logger.error(f"{method.name}: pair {i} failed: {e}")
                        raise
        arr = np.array(results)
        report = ScoreReport(
            method=method.name,
            mean_score=float(arr[:, 0].mean()), mean_std=_std(arr[:, 0]),
            smoothness_score=float(arr[:, 1].mean()), smoothness_std=_std(arr[:, 1]),
            variability_score=float(arr[:, 2].mean()) if self.repeats > 1 else float('nan'),
            n_interpolations=n,
            T=method.grid.horizon,
            alpha=method.params.alpha if method.params else None,
            beta=method.params.beta if method.params else None,
            n_particles=method.n_particles)
        self.logger.info(f"{method.name}: mean score {report.mean_score:.4f} ({report.mean_std:.4f}), "
                         f"smoothness {report.smoothness_score:.4f}, variability {report.variability_score:.4f} "
                         f"over {n} pairs")
        return report


def evaluate_method(method: InterpolationMethod, endpoints, data, repeats: int = 1,
                    mode: str = 'interior-average', rng: RngState = RngState(0),
                    workers: int = 1) -> ScoreReport:
    return MethodEvaluator(data, repeats, mode, workers).evaluate(method, endpoints, rng)
