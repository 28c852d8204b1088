"""
Command-line entry point: python -m pfbi <gen|train|interp|eval|plotdata> [flags]

Exit codes: 0 success, 1 usage, 2 data error, 3 numerical failure.
"""

import argparse
import json
import os
import sys
from typing import List, Optional, Sequence

import numpy as np
import pandas as pd

from . import latent_io
from .bridge import as_latent
from .discriminator import (DEFAULT_HIDDEN, DiscriminatorNet, PriorSpec, TrainConfig,
                            DiscriminatorTrainer, load_net, save_net)
from .errors import DimensionError, InvalidParameter, PfbiError
from .kernel import KernelParams, TimeGrid
from .log import init_logger, set_debug_log
from .methods import METHODS, build_method
from .metrics import SCORE_MODES, MethodEvaluator, mean_score, random_pairs, write_report
from .mvn import RngState
from .smc import WeightSchedule
from .synthdata import KINDS, SynthSpec, arc_end_pairs, generate

HEAT_PADDING = 0.1


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise InvalidParameter(f"{self.prog}: {message}")


def _floats(text: str) -> List[float]:
    try:
        return [float(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got '{text}'")


def _ints(text: str) -> List[int]:
    try:
        return [int(v) for v in text.split(',') if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got '{text}'")


def _seed(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer seed, got '{text}'")
    if value < 0:
        raise argparse.ArgumentTypeError(f"seed must be non-negative, got {value}")
    return value


def _sizes(text: str) -> List[int]:
    sizes = _ints(text)
    if not sizes or min(sizes) < 1:
        raise argparse.ArgumentTypeError(f"layer sizes must be positive integers, got '{text}'")
    return sizes


def _names(text: str) -> List[str]:
    return [v.strip() for v in text.split(',') if v.strip()]


# ====================== Flag groups ======================
def _add_kernel_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group('bridge')
    g.add_argument('--alpha', type=float, default=2.0, help="kernel exponent in (0, 2]")
    g.add_argument('--beta', type=float, default=5.0, help="kernel rate > 0")
    g.add_argument('--T', type=float, default=1.0, help="bridge horizon")
    g.add_argument('--steps', type=int, default=16, help="grid steps m")


def _add_smc_flags(p: argparse.ArgumentParser):
    g = p.add_argument_group('smc')
    g.add_argument('--net', help="discriminator weight file (needed for smc)")
    g.add_argument('--particles', type=int, default=1000)
    g.add_argument('--xi', type=float, default=None, help="weight split between interval ends, in [0, 1]")
    g.add_argument('--gamma', type=float, default=None, help="constant gamma (default m/T)")
    g.add_argument('--ess-threshold', type=float, default=None,
                   help="resample only when ESS < threshold*N (default: every step)")


def _add_curve_flags(p: argparse.ArgumentParser):
    p.add_argument('--kind', default='arc', choices=KINDS)
    p.add_argument('--radius', type=float, default=1.0)
    p.add_argument('--span', type=float, default=270.0, help="arc span in degrees")
    p.add_argument('--start', type=float, default=0.0, help="arc start angle in degrees")
    p.add_argument('--axis-ratio', type=float, default=0.5, help="ellipse minor/major")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog='pfbi', description="Particle-filter bridge interpolation in latent space")
    parser.add_argument('--log-file', default=None, help="write DEBUG logs to this file")
    sub = parser.add_subparsers(dest='command', required=True)

    p = sub.add_parser('gen', help="generate a synthetic latent dataset")
    _add_curve_flags(p)
    p.add_argument('--n', type=int, default=1000)
    p.add_argument('--dim', type=int, default=2)
    p.add_argument('--sigma', type=float, default=0.05)
    p.add_argument('--seed', type=_seed, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser('train', help="train the latent discriminator")
    p.add_argument('--data', required=True)
    p.add_argument('--hidden', type=_sizes, default=list(DEFAULT_HIDDEN), help="hidden layer sizes, e.g. 100,200,500")
    p.add_argument('--arch', type=_sizes, default=None, help="full layer sizes d,h1,...,1 (overrides --hidden)")
    p.add_argument('--lr', type=float, default=1e-3)
    p.add_argument('--batch', type=int, default=256)
    p.add_argument('--train-steps', type=int, default=2000)
    p.add_argument('--holdout', type=float, default=0.2)
    p.add_argument('--seed', type=_seed, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser('interp', help="interpolate between two latent points")
    p.add_argument('--method', default='smc', choices=METHODS)
    p.add_argument('--data', help="dataset file for --from-row/--to-row and score printing")
    p.add_argument('--from-row', type=int, default=0)
    p.add_argument('--to-row', type=int, default=1)
    p.add_argument('--z0', type=_floats, default=None, help="start point, comma-separated")
    p.add_argument('--zT', type=_floats, default=None, help="end point, comma-separated")
    _add_kernel_flags(p)
    _add_smc_flags(p)
    p.add_argument('--samples', type=int, default=1)
    p.add_argument('--mean-of', type=int, default=1, help="average this many sampled paths per output path")
    p.add_argument('--compare-gaussian', action='store_true',
                   help="also score gaussian bridges from the same seeds (needs --data)")
    p.add_argument('--score-mode', default='interior-average', choices=SCORE_MODES)
    p.add_argument('--seed', type=_seed, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_interp)

    p = sub.add_parser('eval', help="score interpolation methods over endpoint pairs")
    p.add_argument('--data', required=True)
    p.add_argument('--methods', type=_names, default=list(METHODS))
    p.add_argument('--pairs', type=int, default=50)
    p.add_argument('--pairing', default='random', choices=('random', 'arc-ends'))
    p.add_argument('--end-fraction', type=float, default=0.1)
    _add_curve_flags(p)
    p.add_argument('--repeats', type=int, default=1)
    p.add_argument('--score-mode', default='interior-average', choices=SCORE_MODES)
    p.add_argument('--workers', type=int, default=1)
    _add_kernel_flags(p)
    _add_smc_flags(p)
    p.add_argument('--seed', type=_seed, default=0)
    p.add_argument('--out', required=True)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser('plotdata', help="export plot-ready CSVs of a 2-D latent space")
    p.add_argument('--data', required=True)
    p.add_argument('--paths', nargs='*', default=[], help="path CSV files to overlay")
    p.add_argument('--net', default=None, help="discriminator for the heat-grid")
    p.add_argument('--grid-res', type=int, default=50)
    p.add_argument('--png', default=None, help="also render a static preview image")
    p.add_argument('--out', required=True, help="output directory")
    p.set_defaults(func=cmd_plotdata)
    return parser


def _config(args: argparse.Namespace) -> dict:
    return {k: v for k, v in sorted(vars(args).items()) if k != 'func'}


# ====================== Shared resolution ======================
def _grid(args) -> TimeGrid:
    if args.steps < 2:
        raise InvalidParameter(f"--steps must be >= 2, got {args.steps}")
    if not args.T > 0:
        raise InvalidParameter(f"--T must be positive, got {args.T}")
    return TimeGrid.equidistant(args.T, args.steps)


def _schedule(args, grid: TimeGrid) -> Optional[WeightSchedule]:
    if args.xi is None and args.gamma is None:
        return None
    gamma = args.gamma if args.gamma is not None else grid.steps / grid.horizon
    return WeightSchedule.constant(grid, gamma, args.xi if args.xi is not None else 0.0)


def _net(args, methods: Sequence[str]) -> Optional[DiscriminatorNet]:
    if 'smc' not in methods:
        return None
    if not args.net:
        raise InvalidParameter("method smc needs --net <weight file>")
    return load_net(args.net)


def _method(args, name: str, grid: TimeGrid, params: KernelParams, net, mean_of: int = 1):
    return build_method(name, grid, params, net, _schedule(args, grid), args.particles,
                        args.ess_threshold, mean_of)


def _curve_spec(args, dim: int) -> SynthSpec:
    return SynthSpec(kind=args.kind, dim=dim, radius=args.radius, span_deg=args.span,
                     start_deg=args.start, axis_ratio=args.axis_ratio)


# ====================== Subcommands ======================
def cmd_gen(args, logger) -> int:
    spec = SynthSpec(kind=args.kind, dim=args.dim, n_points=args.n, noise_sigma=args.sigma, seed=args.seed,
                     radius=args.radius, span_deg=args.span, start_deg=args.start, axis_ratio=args.axis_ratio)
    data = generate(spec)
    latent_io.write_latents(args.out, data)
    norms = np.linalg.norm(data.points, axis=1)
    print(f"{spec.kind}: {len(data)} points, dim {data.dim}, "
          f"norm mean {norms.mean():.4f} std {norms.std():.4f} -> {args.out}")
    return 0


def cmd_train(args, logger) -> int:
    data = latent_io.read_latents(args.data)
    arch = args.arch if args.arch is not None else [data.dim] + list(args.hidden) + [1]
    cfg = TrainConfig(batch_size=args.batch, steps=args.train_steps, learning_rate=args.lr,
                      seed=args.seed, holdout_fraction=args.holdout)
    trainer = DiscriminatorTrainer(cfg)
    net = trainer.train(data, PriorSpec(data.dim), arch)
    save_net(net, args.out)
    r = trainer.report
    print(f"train loss {r.train_loss:.4f}  held-out loss {r.heldout_loss:.4f}  "
          f"held-out AUC {r.heldout_auc:.4f}  accuracy {r.heldout_accuracy:.4f} -> {args.out}")
    return 0


def _endpoints(args):
    data = latent_io.read_latents(args.data) if args.data else None
    if (args.z0 is None) != (args.zT is None):
        raise InvalidParameter("give both --z0 and --zT, or neither")
    if args.z0 is not None:
        return data, as_latent(args.z0), as_latent(args.zT)
    if data is None:
        raise InvalidParameter("endpoints need --z0/--zT or --data with --from-row/--to-row")
    for row in (args.from_row, args.to_row):
        if not 0 <= row < len(data):
            raise InvalidParameter(f"row {row} outside dataset of {len(data)} points")
    return data, data.points[args.from_row].copy(), data.points[args.to_row].copy()


def cmd_interp(args, logger) -> int:
    if args.samples < 1:
        raise InvalidParameter(f"--samples must be >= 1, got {args.samples}")
    data, z0, zT = _endpoints(args)
    grid = _grid(args)
    params = KernelParams(args.alpha, args.beta)
    net = _net(args, [args.method])
    method = _method(args, args.method, grid, params, net, args.mean_of)
    seed = RngState(args.seed)
    paths = [method(z0, zT, seed.substream(s)) for s in range(args.samples)]
    latent_io.write_paths(args.out, np.stack([p.points for p in paths]), grid)
    print(f"{args.method}: {len(paths)} path(s) of {len(grid)} points -> {args.out}")

    if data is not None:
        score = np.mean([mean_score(p, data, args.score_mode) for p in paths])
        print(f"{args.method} mean score ({args.score_mode}): {score:.6f}")
        if args.compare_gaussian and args.method != 'gaussian':
            gauss = _method(args, 'gaussian', grid, params, None, args.mean_of)
            g_score = np.mean([mean_score(gauss(z0, zT, seed.substream(s)), data, args.score_mode)
                               for s in range(args.samples)])
            verdict = "beats" if score < g_score else "does not beat"
            print(f"gaussian mean score ({args.score_mode}): {g_score:.6f}; {args.method} {verdict} gaussian")
    elif args.compare_gaussian:
        logger.warning("--compare-gaussian needs --data to score against; skipped")
    return 0


def cmd_eval(args, logger) -> int:
    unknown = [m for m in args.methods if m not in METHODS]
    if unknown or not args.methods:
        raise InvalidParameter(f"unknown method(s) {unknown}, expected a subset of {', '.join(METHODS)}")
    if args.pairs < 1:
        raise InvalidParameter(f"--pairs must be >= 1, got {args.pairs}")
    data = latent_io.read_latents(args.data)
    grid = _grid(args)
    params = KernelParams(args.alpha, args.beta)
    net = _net(args, args.methods)
    seed = RngState(args.seed)
    if args.pairing == 'arc-ends':
        pairs = arc_end_pairs(_curve_spec(args, data.dim), data, args.pairs, seed.substream(0), args.end_fraction)
    else:
        pairs = random_pairs(data, args.pairs, seed.substream(0))

    evaluator = MethodEvaluator(data, args.repeats, args.score_mode, args.workers)
    reports = []
    for name in args.methods:
        # every method sees the same pairs and the same per-pair streams
        reports.append(evaluator.evaluate(_method(args, name, grid, params, net), pairs, seed.substream(1)))
    write_report(args.out, reports)

    for r in reports:
        var = "n/a" if np.isnan(r.variability_score) else f"{r.variability_score:.6f}"
        print(f"{r.method:>8}: mean score {r.mean_score:.6f} (+/- {r.mean_std:.6f})  "
              f"smoothness {r.smoothness_score:.4f}  variability {var}")
    ranked = sorted(reports, key=lambda r: r.mean_score)
    print("ordering by mean score: " + " < ".join(r.method for r in ranked))
    return 0


def _heat_lattice(points: np.ndarray, res: int):
    lo, hi = points.min(axis=0), points.max(axis=0)
    pad = HEAT_PADDING * np.maximum(hi - lo, 1e-12)
    xs = np.linspace(lo[0] - pad[0], hi[0] + pad[0], res)
    ys = np.linspace(lo[1] - pad[1], hi[1] + pad[1], res)
    X, Y = np.meshgrid(xs, ys)
    return np.column_stack([X.ravel(), Y.ravel()])


def _render_png(path: str, dataset: pd.DataFrame, paths: pd.DataFrame, heat: Optional[pd.DataFrame], res: int):
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(6, 6))
    if heat is not None:
        ax.pcolormesh(heat['x'].to_numpy().reshape(res, res), heat['y'].to_numpy().reshape(res, res),
                      heat['score'].to_numpy().reshape(res, res), cmap='viridis', shading='auto', alpha=0.6)
    ax.scatter(dataset['x'], dataset['y'], s=3, c='k', alpha=0.5)
    for _, p in paths.groupby('path'):
        ax.plot(p['x'], p['y'], '-o', ms=2, lw=1)
    ax.set_aspect('equal')
    fig.savefig(path, dpi=120, bbox_inches='tight')
    plt.close(fig)


def cmd_plotdata(args, logger) -> int:
    if args.grid_res < 2:
        raise InvalidParameter(f"--grid-res must be >= 2, got {args.grid_res}")
    data = latent_io.read_latents(args.data)
    if data.dim != 2:
        raise DimensionError(f"plot export needs 2-D latents, dataset has dim {data.dim}")
    os.makedirs(args.out, exist_ok=True)
    dataset = pd.DataFrame(data.points, columns=['x', 'y'])

    frames = []
    offset = 0
    for f in args.paths:
        grid, arr = latent_io.read_paths(f)
        if arr.shape[2] != 2:
            raise DimensionError(f"{f}: plot export needs 2-D paths, got dim {arr.shape[2]}")
        for s in range(arr.shape[0]):
            frames.append(pd.DataFrame({'path': offset + s, 'k': np.arange(len(grid)), 't': grid.times,
                                        'x': arr[s, :, 0], 'y': arr[s, :, 1]}))
        offset += arr.shape[0]
    paths = pd.concat(frames, ignore_index=True) if frames else pd.DataFrame(columns=['path', 'k', 't', 'x', 'y'])

    heat = None
    if args.net:
        net = load_net(args.net)
        lattice = _heat_lattice(data.points, args.grid_res)
        heat = pd.DataFrame({'x': lattice[:, 0], 'y': lattice[:, 1], 'score': net(lattice)})

    fmt = dict(index=False, float_format=latent_io.FLOAT_FORMAT, lineterminator='\n')
    dataset.to_csv(os.path.join(args.out, 'dataset.csv'), **fmt)
    paths.to_csv(os.path.join(args.out, 'paths.csv'), **fmt)
    if heat is not None:
        heat.to_csv(os.path.join(args.out, 'heat.csv'), **fmt)
    print(f"dataset {len(dataset)} rows, paths {len(paths)} rows"
          + (f", heat {len(heat)} rows" if heat is not None else "") + f" -> {args.out}")
    if args.png:
        _render_png(args.png, dataset, paths, heat, args.grid_res)
    return 0


# ====================== Main ======================
def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    logger = init_logger('pfbi')
    try:
        args = parser.parse_args(argv)
        set_debug_log(args.log_file)
        if args.log_file:
            logger = init_logger('pfbi')
        logger.info(f"Run configuration: {json.dumps(_config(args), default=str)}")
        return args.func(args, logger)
    except PfbiError as e:
        logger.error(f"{type(e).__name__}: {e}")
        return e.exit_code
    except OSError as e:
        logger.error(f"I/O error: {e}")
        return 2


if __name__ == '__main__':
    sys.exit(main())
