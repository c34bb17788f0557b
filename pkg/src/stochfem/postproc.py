"""Zero level sets of P1 fields and CSV output.

All floats are written with 17 significant digits so files round-trip
exactly.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .mesh import Mesh
from .montecarlo import ErrorTableRow, MomentSeries

__all__ = [
    "LevelSetPolyline",
    "zero_level_set",
    "write_moment_csv",
    "read_moment_csv",
    "write_error_csv",
    "read_error_csv",
    "write_levelset_csv",
    "read_levelset_csv",
    "format_float",
]

ZERO_NUDGE = 1e-14
MOMENT_HEADER = ["step", "time", "E_L2sq", "E_H1sq", "E_L2sq_se", "E_H1sq_se"]
MOMENT_EXTRA = ["E_H1_4th", "E_L2_4th", "E_Lqp1"]
ERROR_HEADER = ["h", "LinfEL2", "order1", "ELinfL2", "order2", "EL2H1", "order3"]
LEVELSET_HEADER = ["x1", "y1", "x2", "y2"]


def format_float(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return "NA"
    return f"{float(x):.17g}"


@dataclass
class LevelSetPolyline:
    """Segments ``(k, 2, 2)``: ``segments[i] = [[x1, y1], [x2, y2]]``."""

    segments: np.ndarray
    triangles: np.ndarray  # source triangle of each segment
    step: int = 0
    time: float = 0.0

    def __len__(self) -> int:
        return self.segments.shape[0]


def zero_level_set(u, mesh: Mesh, step: int = 0, time: float = 0.0) -> LevelSetPolyline:
    """Marching triangles on the P1 interpolant.

    Exact zeros are nudged to ``+1e-14`` first, so every sign-changing
    triangle has exactly two crossing edges and yields one segment.
    """
    u = np.array(u, dtype=float)
    u[u == 0.0] = ZERO_NUDGE
    vals = u[mesh.triangles]  # (T, 3)
    pos = vals > 0
    npos = pos.sum(axis=1)
    cut = np.flatnonzero((npos == 1) | (npos == 2))
    if cut.size == 0:
        return LevelSetPolyline(np.zeros((0, 2, 2)), np.zeros(0, dtype=np.int64), step, time)
    v = vals[cut]
    p = mesh.nodes[mesh.triangles[cut]]  # (k, 3, 2)
    # the odd vertex out is the one whose sign differs from the other two
    odd = np.where(npos[cut] == 1, np.argmax(pos[cut], axis=1), np.argmin(pos[cut], axis=1))
    rows = np.arange(cut.size)
    a = odd
    b = (odd + 1) % 3
    c = (odd + 2) % 3
    ends = []
    for other in (b, c):
        ua, uo = v[rows, a], v[rows, other]
        t = ua / (ua - uo)
        ends.append(p[rows, a] + t[:, None] * (p[rows, other] - p[rows, a]))
    segs = np.stack(ends, axis=1)
    return LevelSetPolyline(segs, cut, step, time)


def _open_for_write(path):
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc


def _read_rows(path) -> list[list[str]]:
    try:
        with open(path, newline="") as fh:
            return list(csv.reader(fh))
    except OSError as exc:
        raise OSError(f"cannot read {path}: {exc}") from exc


def write_moment_csv(series: MomentSeries, out, extended: bool = True) -> None:
    """One row per step ``0..N``; the last three columns are optional."""
    header = MOMENT_HEADER + (MOMENT_EXTRA if extended else [])
    m, se = series.mean, series.stderr
    with _open_for_write(out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for n, t in enumerate(series.times):
            row = [str(n), format_float(t), m["l2_sq"][n], m["h1_sq"][n], se["l2_sq"][n], se["h1_sq"][n]]
            if extended:
                row += [m["h1_4th"][n], m["l2_4th"][n], m["lqp1"][n]]
            w.writerow(row[:2] + [format_float(x) for x in row[2:]])


def read_moment_csv(path) -> dict[str, np.ndarray]:
    rows = _read_rows(path)
    header, body = rows[0], rows[1:]
    cols = list(zip(*body)) if body else [()] * len(header)
    out = {}
    for name, col in zip(header, cols):
        dtype = int if name == "step" else float
        out[name] = np.array([dtype(v) for v in col], dtype=dtype)
    return out


def write_error_csv(rows: list[ErrorTableRow], out) -> None:
    with _open_for_write(out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(ERROR_HEADER)
        for r in rows:
            w.writerow(
                [format_float(v) for v in (r.h, r.err_linf_el2, r.order1, r.err_el_inf_l2, r.order2, r.err_el2_h1, r.order3)]
            )


def read_error_csv(path) -> list[ErrorTableRow]:
    rows = _read_rows(path)
    if not rows or rows[0] != ERROR_HEADER:
        raise ValueError(f"{path}: unexpected error-table header")

    def num(s):
        return None if s == "NA" else float(s)

    out = []
    for r in rows[1:]:
        h, e1, o1, e2, o2, e3, o3 = (num(s) for s in r)
        out.append(ErrorTableRow(h, e1, e2, e3, o1, o2, o3))
    return out


def write_levelset_csv(polyline: LevelSetPolyline, out) -> None:
    with _open_for_write(out) as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LEVELSET_HEADER)
        for (x1, y1), (x2, y2) in polyline.segments:
            w.writerow([format_float(v) for v in (x1, y1, x2, y2)])


def read_levelset_csv(path) -> np.ndarray:
    rows = _read_rows(path)
    if not rows or rows[0] != LEVELSET_HEADER:
        raise ValueError(f"{path}: unexpected level-set header")
    return np.array([[float(v) for v in r] for r in rows[1:]]).reshape(-1, 2, 2)
