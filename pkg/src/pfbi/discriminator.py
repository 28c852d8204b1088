"""
Latent-space discriminator f: a ReLU feed-forward net with a sigmoid output,
trained with binary cross-entropy to tell encoded data (label 1) from prior
samples N(0, I_d) (label 0), plus its text weight format.
"""

import os
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.spatial import cKDTree
from scipy.special import expit
from scipy.stats import rankdata

from .errors import DimensionMismatch, EmptyDataset, InvalidParameter, NonFiniteLoss, ParseError
from .log import init_logger
from .mvn import RngState, standard_normal

DEFAULT_HIDDEN = (100, 200, 500)
# |pre-activation| bound at the output: sigmoid(+-30) stays strictly inside (0, 1)
PRE_ACTIVATION_CLAMP = 30.0
WEIGHTS_HEADER = "pfbi-discriminator v1"


# ====================== Data ======================
@dataclass(frozen=True, eq=False)
class LatentDataset:
    points: np.ndarray  # (N, d)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float)
        if pts.ndim != 2 or pts.shape[0] < 1:
            raise EmptyDataset(f"a latent dataset needs at least one point, got shape {pts.shape}")
        if pts.shape[1] < 1:
            raise DimensionMismatch("latent points must have dimension >= 1")
        if not np.all(np.isfinite(pts)):
            raise InvalidParameter("latent dataset contains non-finite values")
        pts.setflags(write=False)
        object.__setattr__(self, 'points', pts)

    @property
    def dim(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]

    @cached_property
    def tree(self) -> cKDTree:
        return cKDTree(self.points)


@dataclass(frozen=True)
class PriorSpec:
    dim: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 1:
            raise InvalidParameter(f"prior dimension must be an integer >= 1, got {self.dim}")

    def sample(self, gen: np.random.Generator, n: int) -> np.ndarray:
        return standard_normal(gen, (n, self.dim))


# ====================== Network ======================
@dataclass(eq=False)
class DiscriminatorNet:
    layer_sizes: Tuple[int, ...]
    weights: List[np.ndarray]
    biases: List[np.ndarray]

    def __post_init__(self):
        self.layer_sizes = tuple(int(s) for s in self.layer_sizes)
        if len(self.layer_sizes) < 2 or self.layer_sizes[-1] != 1 or min(self.layer_sizes) < 1:
            raise DimensionMismatch(f"layer sizes must run from d to 1, got {self.layer_sizes}")
        n_layers = len(self.layer_sizes) - 1
        if len(self.weights) != n_layers or len(self.biases) != n_layers:
            raise DimensionMismatch(
                f"{n_layers} layers declared but {len(self.weights)} weight matrices "
                f"and {len(self.biases)} bias vectors given")
        for i, (W, b) in enumerate(zip(self.weights, self.biases)):
            expected = (self.layer_sizes[i], self.layer_sizes[i + 1])
            if np.shape(W) != expected or np.shape(b) != (expected[1],):
                raise DimensionMismatch(
                    f"layer {i}: expected W {expected} and b ({expected[1]},), "
                    f"got {np.shape(W)} and {np.shape(b)}")

    @classmethod
    def initialize(cls, layer_sizes: Sequence[int], gen: np.random.Generator) -> "DiscriminatorNet":
        """Uniform +-sqrt(6 / (fan_in + fan_out)) weights, zero biases."""
        weights, biases = [], []
        for fan_in, fan_out in zip(layer_sizes[:-1], layer_sizes[1:]):
            limit = np.sqrt(6.0 / (fan_in + fan_out))
            weights.append(gen.uniform(-limit, limit, size=(fan_in, fan_out)))
            biases.append(np.zeros(fan_out))
        return cls(tuple(layer_sizes), weights, biases)

    @property
    def dim(self) -> int:
        return self.layer_sizes[0]

    def logits(self, z: np.ndarray) -> np.ndarray:
        a = z
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            a = np.maximum(a @ W + b, 0.0)
        return (a @ self.weights[-1] + self.biases[-1])[:, 0]

    def forward(self, z):
        """Scores in (0, 1); a single point gives a float, an (n, d) batch gives (n,)."""
        z = np.asarray(z, dtype=float)
        single = z.ndim == 1
        batch = z[None, :] if single else z
        if batch.ndim != 2 or batch.shape[1] != self.dim:
            raise DimensionMismatch(f"discriminator expects dimension {self.dim}, got shape {z.shape}")
        out = expit(np.clip(self.logits(batch), -PRE_ACTIVATION_CLAMP, PRE_ACTIVATION_CLAMP))
        return float(out[0]) if single else out

    __call__ = forward

    def params(self) -> List[np.ndarray]:
        return [p for pair in zip(self.weights, self.biases) for p in pair]

    def loss_and_grads(self, x: np.ndarray, y: np.ndarray) -> Tuple[float, List[np.ndarray]]:
        """Mean BCE on logits and its gradients, ordered like params()."""
        acts, pre = [x], []
        a = x
        for W, b in zip(self.weights[:-1], self.biases[:-1]):
            z = a @ W + b
            pre.append(z)
            a = np.maximum(z, 0.0)
            acts.append(a)
        s = (a @ self.weights[-1] + self.biases[-1])[:, 0]
        loss = float(np.mean(y * np.logaddexp(0.0, -s) + (1.0 - y) * np.logaddexp(0.0, s)))
        ds = ((expit(s) - y) / s.size)[:, None]
        grads_w = [None] * len(self.weights)
        grads_b = [None] * len(self.biases)
        grads_w[-1] = acts[-1].T @ ds
        grads_b[-1] = ds.sum(axis=0)
        da = ds @ self.weights[-1].T
        for i in range(len(self.weights) - 2, -1, -1):
            dz = da * (pre[i] > 0.0)
            grads_w[i] = acts[i].T @ dz
            grads_b[i] = dz.sum(axis=0)
            da = dz @ self.weights[i].T
        return loss, [g for pair in zip(grads_w, grads_b) for g in pair]


def forward(net: DiscriminatorNet, z):
    return net.forward(z)


# ====================== Training ======================
@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 256       # per step, half data and half prior
    steps: int = 2000
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    seed: int = 0
    holdout_fraction: float = 0.2
    log_every: int = 200

    def __post_init__(self):
        if self.batch_size < 2 or self.batch_size % 2:
            raise InvalidParameter(f"batch size must be an even integer >= 2, got {self.batch_size}")
        if self.steps < 1:
            raise InvalidParameter(f"steps must be >= 1, got {self.steps}")
        if not self.learning_rate > 0 or not self.epsilon > 0:
            raise InvalidParameter("learning rate and epsilon must be positive")
        if not (0.0 < self.beta1 < 1.0 and 0.0 < self.beta2 < 1.0):
            raise InvalidParameter("Adam betas must lie in (0, 1)")
        if not 0.0 <= self.holdout_fraction < 1.0:
            raise InvalidParameter(f"holdout fraction must lie in [0, 1), got {self.holdout_fraction}")
        if self.log_every < 1:
            raise InvalidParameter("log_every must be >= 1")


class Adam:
    def __init__(self, params: List[np.ndarray], lr: float, beta1: float, beta2: float, eps: float):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = [np.zeros_like(p) for p in params]
        self.v = [np.zeros_like(p) for p in params]
        self.t = 0

    def step(self, params: List[np.ndarray], grads: List[np.ndarray]):
        self.t += 1
        c1 = 1.0 - self.beta1 ** self.t
        c2 = 1.0 - self.beta2 ** self.t
        for p, g, m, v in zip(params, grads, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)


def bce_loss(scores: np.ndarray, labels: np.ndarray) -> float:
    s = np.clip(scores, 1e-12, 1.0 - 1e-12)
    return float(-np.mean(labels * np.log(s) + (1.0 - labels) * np.log1p(-s)))


def roc_auc(pos_scores: np.ndarray, neg_scores: np.ndarray) -> float:
    """Mann-Whitney estimate of P(score_pos > score_neg), ties counted half."""
    n_pos, n_neg = len(pos_scores), len(neg_scores)
    ranks = rankdata(np.concatenate([pos_scores, neg_scores]))
    return float((ranks[:n_pos].sum() - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg))


def accuracy(pos_scores: np.ndarray, neg_scores: np.ndarray, threshold: float = 0.5) -> float:
    hits = np.count_nonzero(pos_scores > threshold) + np.count_nonzero(neg_scores <= threshold)
    return hits / (len(pos_scores) + len(neg_scores))


@dataclass
class TrainReport:
    train_loss: float
    heldout_loss: float
    heldout_auc: float
    heldout_accuracy: float
    history: List[Dict[str, float]] = field(default_factory=list)


class DiscriminatorTrainer:
    """
    Adam on binary cross-entropy with equal data/prior counts per batch.
    Streams of the seed: 0 init, 1 holdout split, 2 batches, 3 evaluation set.
    """

    def __init__(self, cfg: TrainConfig = TrainConfig()):
        self.cfg = cfg
        self.report: Optional[TrainReport] = None
        self._init_log()

    def _init_log(self):
        self.logger = init_logger('DiscriminatorTrainer')

    def _split(self, data: LatentDataset) -> Tuple[np.ndarray, np.ndarray]:
        n = len(data)
        n_hold = int(round(self.cfg.holdout_fraction * n))
        if n_hold == 0 or n_hold == n:
            return data.points, data.points
        perm = RngState(self.cfg.seed).substream(1).generator().permutation(n)
        return data.points[perm[n_hold:]], data.points[perm[:n_hold]]

    def train(self, data: LatentDataset, prior: PriorSpec,
              arch: Optional[Sequence[int]] = None) -> DiscriminatorNet:
        cfg = self.cfg
        if data.dim != prior.dim:
            raise DimensionMismatch(f"data dimension {data.dim} != prior dimension {prior.dim}")
        layer_sizes = tuple(arch) if arch is not None else (data.dim,) + DEFAULT_HIDDEN + (1,)
        if layer_sizes[0] != data.dim:
            raise DimensionMismatch(
                f"architecture input layer {layer_sizes[0]} does not match data dimension {data.dim}")
        seed = RngState(cfg.seed)
        net = DiscriminatorNet.initialize(layer_sizes, seed.substream(0).generator())
        train_pts, hold_pts = self._split(data)
        eval_gen = seed.substream(3).generator()
        eval_neg = prior.sample(eval_gen, len(hold_pts))
        eval_x = np.vstack([hold_pts, eval_neg])
        eval_y = np.concatenate([np.ones(len(hold_pts)), np.zeros(len(eval_neg))])

        half = cfg.batch_size // 2
        y = np.concatenate([np.ones(half), np.zeros(half)])
        gen = seed.substream(2).generator()
        adam = Adam(net.params(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        history = [{'step': 0, 'eval_loss': bce_loss(net(eval_x), eval_y)}]
        self.logger.info(f"Training {layer_sizes} on {len(train_pts)} points "
                         f"({len(hold_pts)} held out) for {cfg.steps} steps")
        loss = float('nan')
        for step in range(1, cfg.steps + 1):
            pos = train_pts[gen.integers(0, len(train_pts), size=half)]
            neg = prior.sample(gen, half)
            loss, grads = net.loss_and_grads(np.vstack([pos, neg]), y)
            if not np.isfinite(loss) or not all(np.all(np.isfinite(g)) for g in grads):
                self.logger.error(f"Non-finite loss at step {step} (lr={cfg.learning_rate})")
                raise NonFiniteLoss(f"loss became non-finite at step {step}; lower the learning rate")
            adam.step(net.params(), grads)
            if step % cfg.log_every == 0 or step == cfg.steps:
                eval_loss = bce_loss(net(eval_x), eval_y)
                history.append({'step': step, 'train_loss': loss, 'eval_loss': eval_loss})
                self.logger.info(f"step {step}: train loss {loss:.4f}, held-out loss {eval_loss:.4f}")

        scores = net(eval_x)
        n_pos = len(hold_pts)
        self.report = TrainReport(
            train_loss=loss,
            heldout_loss=bce_loss(scores, eval_y),
            heldout_auc=roc_auc(scores[:n_pos], scores[n_pos:]),
            heldout_accuracy=accuracy(scores[:n_pos], scores[n_pos:]),
            history=history)
        self.logger.info(f"Done: held-out loss {self.report.heldout_loss:.4f}, "
                         f"AUC {self.report.heldout_auc:.4f}")
        return net


def train(data: LatentDataset, prior: PriorSpec, cfg: TrainConfig = TrainConfig(),
          arch: Optional[Sequence[int]] = None) -> DiscriminatorNet:
    return DiscriminatorTrainer(cfg).train(data, prior, arch)


# ====================== Weight file ======================
def format_net(net: DiscriminatorNet) -> str:
    lines = [WEIGHTS_HEADER, "dims: " + " ".join(str(s) for s in net.layer_sizes)]
    for W, b in zip(net.weights, net.biases):
        lines.append("W")
        lines.extend(" ".join(repr(float(v)) for v in row) for row in W)
        lines.append("b " + " ".join(repr(float(v)) for v in b))
    lines.append("end")
    return "\n".join(lines) + "\n"


def save_net(net: DiscriminatorNet, path: str):
    with open(path, 'w', newline='\n') as f:
        f.write(format_net(net))


def _floats(tokens: List[str], where: str) -> List[float]:
    try:
        return [float(t) for t in tokens]
    except ValueError as e:
        raise ParseError(f"{where}: {e}") from None


def parse_net(text: str) -> DiscriminatorNet:
    lines = [ln.strip() for ln in text.splitlines() if ln.strip()]
    if not lines or lines[0] != WEIGHTS_HEADER:
        raise ParseError(f"missing header line '{WEIGHTS_HEADER}'")
    if lines[-1] != "end":
        raise ParseError("weight file is truncated (no 'end' line)")
    if len(lines) < 3 or not lines[1].startswith("dims:"):
        raise ParseError("missing 'dims:' line")
    try:
        dims = tuple(int(t) for t in lines[1][len("dims:"):].split())
    except ValueError as e:
        raise ParseError(f"bad dims line: {e}") from None

    blocks: List[Tuple[List[List[float]], Optional[List[float]]]] = []
    for no, ln in enumerate(lines[2:-1], start=3):
        if ln == "W":
            if blocks and blocks[-1][1] is None:
                raise ParseError(f"line {no}: new W block before the previous 'b' line")
            blocks.append(([], None))
        elif ln == "b" or ln.startswith("b "):
            if not blocks or blocks[-1][1] is not None:
                raise ParseError(f"line {no}: 'b' line outside a W block")
            blocks[-1] = (blocks[-1][0], _floats(ln[1:].split(), f"line {no}"))
        else:
            if not blocks or blocks[-1][1] is not None:
                raise ParseError(f"line {no}: matrix row outside a W block")
            blocks[-1][0].append(_floats(ln.split(), f"line {no}"))
    if blocks and blocks[-1][1] is None:
        raise ParseError("last W block has no 'b' line")

    if len(blocks) != len(dims) - 1:
        raise DimensionMismatch(f"dims declare {len(dims) - 1} layers, file has {len(blocks)}")
    weights, biases = [], []
    for i, (rows, b) in enumerate(blocks):
        fan_in, fan_out = dims[i], dims[i + 1]
        if len(rows) != fan_in or any(len(r) != fan_out for r in rows) or len(b) != fan_out:
            raise DimensionMismatch(
                f"layer {i}: declared {fan_in}x{fan_out}, found {len(rows)} rows of "
                f"{sorted({len(r) for r in rows})} values and {len(b)} biases")
        weights.append(np.array(rows, dtype=float).reshape(fan_in, fan_out))
        biases.append(np.array(b, dtype=float))
    return DiscriminatorNet(dims, weights, biases)


def load_net(path: str) -> DiscriminatorNet:
    if not os.path.exists(path):
        raise FileNotFoundError(path)
    with open(path) as f:
        return parse_net(f.read())
