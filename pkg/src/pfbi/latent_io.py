"""
Text formats for latent point sets and interpolation paths.

    # pfbi-latents v1 dim=<d>          then one point per row, d values
    # pfbi-path v1 dim=<d> paths=<S>   then S*(m+1) rows t,x_1..x_d

Values are written with %.17g and read back with pandas' round-trip float
parser, so parse -> write -> parse is exact.
"""

import io
import re
from typing import Dict, Tuple

import numpy as np
import pandas as pd

from .bridge import Path
from .discriminator import LatentDataset
from .errors import DimensionMismatch, EmptyDataset, InvalidParameter, ParseError
from .kernel import TimeGrid

FLOAT_FORMAT = '%.17g'
LATENTS_MAGIC = 'pfbi-latents v1'
PATH_MAGIC = 'pfbi-path v1'

_HEADER_RE = re.compile(r'^#\s*(pfbi-[a-z]+ v\d+)((?:\s+\w+=\d+)*)\s*$')


def _parse_header(line: str, magic: str) -> Dict[str, int]:
    m = _HEADER_RE.match(line.strip())
    if not m or m.group(1) != magic:
        raise ParseError(f"expected a '# {magic} ...' header, got {line.strip()[:60]!r}")
    fields = dict(kv.split('=') for kv in m.group(2).split())
    return {k: int(v) for k, v in fields.items()}


def _read_rows(f, n_cols: int) -> np.ndarray:
    try:
        df = pd.read_csv(f, header=None, dtype=float, float_precision='round_trip')
    except pd.errors.EmptyDataError:
        raise EmptyDataset("file has a header but no rows") from None
    except (ValueError, pd.errors.ParserError) as e:
        raise ParseError(f"malformed rows: {e}") from None
    if df.shape[1] != n_cols:
        raise DimensionMismatch(f"header declares {n_cols} columns per row, rows have {df.shape[1]}")
    values = df.to_numpy()
    if not np.all(np.isfinite(values)):
        raise ParseError("rows contain missing or non-finite values")
    return values


def _write_rows(f, values: np.ndarray):
    pd.DataFrame(values).to_csv(f, header=False, index=False, float_format=FLOAT_FORMAT,
                                lineterminator='\n')


# ====================== Latent point sets ======================
def format_latents(points: np.ndarray) -> str:
    points = np.atleast_2d(np.asarray(points, dtype=float))
    buf = io.StringIO()
    buf.write(f"# {LATENTS_MAGIC} dim={points.shape[1]}\n")
    _write_rows(buf, points)
    return buf.getvalue()


def write_latents(path: str, data) -> None:
    points = data.points if isinstance(data, LatentDataset) else data
    with open(path, 'w', newline='\n') as f:
        f.write(format_latents(points))


def read_latents(path: str) -> LatentDataset:
    with open(path) as f:
        header = _parse_header(f.readline(), LATENTS_MAGIC)
        if 'dim' not in header:
            raise ParseError("latent header lacks dim=<d>")
        return LatentDataset(_read_rows(f, header['dim']))


# ====================== Paths ======================
def format_paths(paths: np.ndarray, grid: TimeGrid) -> str:
    paths = np.asarray(paths, dtype=float)
    if paths.ndim == 2:
        paths = paths[None]
    S, n_times, d = paths.shape
    if n_times != len(grid):
        raise DimensionMismatch(f"paths have {n_times} points, grid has {len(grid)} times")
    t = np.tile(grid.times, S)[:, None]
    buf = io.StringIO()
    buf.write(f"# {PATH_MAGIC} dim={d} paths={S}\n")
    _write_rows(buf, np.hstack([t, paths.reshape(S * n_times, d)]))
    return buf.getvalue()


def write_paths(path: str, paths, grid: TimeGrid = None) -> None:
    if isinstance(paths, Path):
        paths, grid = paths.points, paths.grid
    with open(path, 'w', newline='\n') as f:
        f.write(format_paths(paths, grid))


def read_paths(path: str) -> Tuple[TimeGrid, np.ndarray]:
    """Returns the shared grid and an (S, m+1, d) array."""
    with open(path) as f:
        header = _parse_header(f.readline(), PATH_MAGIC)
        if 'dim' not in header or 'paths' not in header:
            raise ParseError("path header needs dim=<d> and paths=<S>")
        d, S = header['dim'], header['paths']
        rows = _read_rows(f, d + 1)
    if S < 1 or rows.shape[0] % S:
        raise ParseError(f"{rows.shape[0]} rows cannot hold {S} paths of equal length")
    n_times = rows.shape[0] // S
    t = rows[:, 0].reshape(S, n_times)
    if not np.all(t == t[0]):
        raise ParseError("paths in one file must share the same time grid")
    try:
        grid = TimeGrid(t[0])
    except InvalidParameter as e:
        raise ParseError(f"invalid time column: {e}") from None
    return grid, rows[:, 1:].reshape(S, n_times, d)
