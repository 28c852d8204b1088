"""
Synthetic latent datasets standing in for an encoder's output: points near a
1-D curve in the plane (arc, ellipse) or near the sphere of radius sqrt(d).
"""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np

from .discriminator import LatentDataset
from .errors import EmptyDataset, InvalidParameter
from .mvn import RngLike, RngState, as_generator, standard_normal

KINDS = ('arc', 'ellipse-curve', 'gaussian-shell')


@dataclass(frozen=True)
class SynthSpec:
    kind: str = 'arc'
    dim: int = 2
    n_points: int = 1000
    noise_sigma: float = 0.05
    seed: int = 0
    radius: float = 1.0
    span_deg: float = 270.0   # leaves a gap the straight chord between the arc ends must cross
    start_deg: float = 0.0
    axis_ratio: float = 0.5   # ellipse: minor / major

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidParameter(f"unknown dataset kind '{self.kind}', expected one of {', '.join(KINDS)}")
        if self.n_points < 1:
            raise InvalidParameter(f"n_points must be >= 1, got {self.n_points}")
        if not self.noise_sigma >= 0:
            raise InvalidParameter(f"noise sigma must be non-negative, got {self.noise_sigma}")
        if self.dim < 1:
            raise InvalidParameter(f"dimension must be >= 1, got {self.dim}")
        if self.kind != 'gaussian-shell' and self.dim < 2:
            raise InvalidParameter(f"kind '{self.kind}' is a planar curve and needs dim >= 2, got {self.dim}")
        if not self.radius > 0 or not self.axis_ratio > 0:
            raise InvalidParameter("radius and axis ratio must be positive")
        if not 0.0 < self.span_deg <= 360.0:
            raise InvalidParameter(f"arc span must lie in (0, 360] degrees, got {self.span_deg}")

    @property
    def is_curve(self) -> bool:
        return self.kind in ('arc', 'ellipse-curve')


def generate(spec: SynthSpec) -> LatentDataset:
    gen = RngState(spec.seed).generator()
    n = spec.n_points
    if spec.is_curve:
        theta = np.deg2rad(spec.start_deg + spec.span_deg * gen.random(n))
        ratio = spec.axis_ratio if spec.kind == 'ellipse-curve' else 1.0
        pts = spec.radius * np.column_stack([np.cos(theta), ratio * np.sin(theta)])
        pts = pts + spec.noise_sigma * standard_normal(gen, (n, 2))
        if spec.dim > 2:
            # curve in the first two coordinates, noise only in the rest
            pts = np.hstack([pts, spec.noise_sigma * standard_normal(gen, (n, spec.dim - 2))])
    else:
        z = standard_normal(gen, (n, spec.dim))
        r = np.sqrt(spec.dim) + spec.noise_sigma * standard_normal(gen, n)
        pts = z / np.linalg.norm(z, axis=1, keepdims=True) * r[:, None]
    return LatentDataset(pts)


def curve_position(spec: SynthSpec, points: np.ndarray) -> np.ndarray:
    """Fraction of the way along the curve (0 start, 1 end) of each point's angle."""
    if not spec.is_curve:
        raise InvalidParameter(f"curve position needs an arc or ellipse dataset, got '{spec.kind}'")
    ratio = spec.axis_ratio if spec.kind == 'ellipse-curve' else 1.0
    ang = np.degrees(np.arctan2(points[:, 1] / ratio, points[:, 0]))
    phi = np.mod(ang - spec.start_deg, 360.0)
    pos = phi / spec.span_deg
    beyond = pos > 1.0
    # points past either end snap to whichever end is closer in angle
    pos[beyond] = np.where(360.0 - phi[beyond] < phi[beyond] - spec.span_deg, 0.0, 1.0)
    return pos


def arc_end_pairs(spec: SynthSpec, data: LatentDataset, n_pairs: int, rng: RngLike,
                  end_fraction: float = 0.1) -> List[Tuple[np.ndarray, np.ndarray]]:
    """Endpoint pairs with z0 near the start of the curve and zT near its end."""
    pos = curve_position(spec, data.points)
    head = np.flatnonzero(pos <= end_fraction)
    tail = np.flatnonzero(pos >= 1.0 - end_fraction)
    if head.size == 0 or tail.size == 0:
        raise EmptyDataset(f"no data within {end_fraction:.0%} of both curve ends")
    gen = as_generator(rng)
    i = gen.choice(head, size=n_pairs)
    j = gen.choice(tail, size=n_pairs)
    return [(data.points[a].copy(), data.points[b].copy()) for a, b in zip(i, j)]
