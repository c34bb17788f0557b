"""Monte Carlo ensembles: moment series and strong-error tables.

Each sample ``i`` draws its Wiener path from ``sample_seed(master, i)``,
so a sample does not depend on which worker ran it.  Worker results are
folded into the running statistics strictly in sample-index order, which
makes the output independent of ``parallel_width``.
"""
from __future__ import annotations

import math
import multiprocessing as mp
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Iterable

import numpy as np

from .fem import FESpace
from .mesh import MeshHierarchy
from .model import ModelSpec
from .paths import sample_path, sample_seed
from .solver import SchemeConfig, solve_path, step

__all__ = [
    "EnsembleConfig",
    "MomentSeries",
    "ErrorTableRow",
    "EnsembleFailure",
    "run_ensemble",
    "sample_moments",
    "strong_error_study",
    "sample_errors",
    "convergence_rates",
]

MOMENT_KEYS = ("l2_sq", "h1_sq", "h1_4th", "l2_4th", "lqp1")


class EnsembleFailure(RuntimeError):
    def __init__(self, message: str, sample_index: int, seed: int):
        super().__init__(message)
        self.sample_index = sample_index
        self.seed = seed

    def __reduce__(self):
        return (type(self), (str(self), self.sample_index, self.seed))


@dataclass(frozen=True)
class EnsembleConfig:
    n_samples: int
    master_seed: int = 0
    parallel_width: int = 1

    def __post_init__(self):
        if self.n_samples < 1:
            raise ValueError("n_samples must be >= 1")
        if self.parallel_width < 1:
            raise ValueError("parallel_width must be >= 1")


class _Welford:
    """Running mean and variance of equally shaped arrays, in long double."""

    def __init__(self, shape):
        self.n = 0
        self.mean = np.zeros(shape, dtype=np.longdouble)
        self.m2 = np.zeros(shape, dtype=np.longdouble)

    def push(self, x):
        x = np.asarray(x, dtype=np.longdouble)
        self.n += 1
        d = x - self.mean
        self.mean += d / self.n
        self.m2 += d * (x - self.mean)

    def stderr(self) -> np.ndarray:
        if self.n < 2:
            return np.zeros(self.mean.shape)
        return np.sqrt(np.asarray(self.m2 / (self.n - 1) / self.n, dtype=float))


@dataclass
class MomentSeries:
    """Per-step sample means and standard errors for ``n = 0..N``."""

    times: np.ndarray
    mean: dict[str, np.ndarray]
    stderr: dict[str, np.ndarray]
    n_samples: int
    q: int
    mean_newton_iters: float = 0.0
    samples: list[dict[str, np.ndarray]] | None = field(default=None, repr=False)

    @property
    def steps(self) -> np.ndarray:
        return np.arange(self.times.shape[0])

    @property
    def n_steps(self) -> int:
        return self.times.shape[0] - 1


@dataclass(frozen=True)
class ErrorTableRow:
    h: float
    err_linf_el2: float  # sqrt(sup_n E ||e^n||^2)
    err_el_inf_l2: float  # sqrt(E sup_n ||e^n||^2)
    err_el2_h1: float  # sqrt(E tau sum_{n>=1} ||grad e^n||^2)
    order1: float | None = None
    order2: float | None = None
    order3: float | None = None

    @property
    def errors(self) -> tuple[float, float, float]:
        return (self.err_linf_el2, self.err_el_inf_l2, self.err_el2_h1)

    @property
    def orders(self) -> tuple[float | None, float | None, float | None]:
        return (self.order1, self.order2, self.order3)


def _map_ordered(fn: Callable[[int], object], n: int, width: int, init, initargs) -> Iterable:
    """Yield ``fn(i)`` for ``i = 0..n-1`` in index order."""
    if width <= 1 or n <= 1:
        init(*initargs)
        try:
            for i in range(n):
                yield fn(i)
        finally:
            init(None)
        return
    ctx = mp.get_context("fork") if "fork" in mp.get_all_start_methods() else None
    chunk = max(1, n // (4 * width))
    with ProcessPoolExecutor(max_workers=width, mp_context=ctx, initializer=init, initargs=initargs) as pool:
        yield from pool.map(fn, range(n), chunksize=chunk)


# worker-global context, set by the pool initializer
_CTX = None


def _set_ctx(ctx):
    global _CTX
    _CTX = ctx


def sample_moments(index: int, u0, space: FESpace, model: ModelSpec, scheme: SchemeConfig, master_seed: int):
    """Diagnostics of one ensemble member, keyed like :data:`MOMENT_KEYS`."""
    seed = sample_seed(master_seed, index)
    path = sample_path(scheme.n_steps, scheme.tau, seed)
    tr = solve_path(u0, path, model, scheme, space)
    d = tr.diagnostics
    return {
        "l2_sq": d["l2_sq"],
        "h1_sq": d["h1_sq"],
        "h1_4th": d["h1_sq"] ** 2,
        "l2_4th": d["l2_sq"] ** 2,
        "lqp1": d["lqp1"],
        "newton_iters": d["newton_iters"],
    }


def _moment_task(i):
    u0, space, model, scheme, seed = _CTX
    try:
        return sample_moments(i, u0, space, model, scheme, seed)
    except Exception as exc:  # noqa: BLE001 - reraised with replay info
        s = sample_seed(seed, i)
        raise EnsembleFailure(f"sample {i} (seed {s}) failed: {exc}", i, s) from exc


def run_ensemble(
    space: FESpace,
    model: ModelSpec,
    scheme: SchemeConfig,
    ensemble: EnsembleConfig,
    u0,
    keep_samples: bool = False,
) -> MomentSeries:
    """Estimate the moment series over ``ensemble.n_samples`` paths."""
    n = scheme.n_steps + 1
    acc = {k: _Welford(n) for k in MOMENT_KEYS}
    newton = _Welford(n)
    kept = [] if keep_samples else None
    ctx = (np.asarray(u0, dtype=float), space, model, scheme, ensemble.master_seed)
    for res in _map_ordered(_moment_task, ensemble.n_samples, ensemble.parallel_width, _set_ctx, (ctx,)):
        for k in MOMENT_KEYS:
            acc[k].push(res[k])
        newton.push(res["newton_iters"])
        if kept is not None:
            kept.append(res)
    mean = {k: np.asarray(a.mean, dtype=float) for k, a in acc.items()}
    se = {k: a.stderr() for k, a in acc.items()}
    iters = np.asarray(newton.mean, dtype=float)
    return MomentSeries(
        times=scheme.tau * np.arange(n),
        mean=mean,
        stderr=se,
        n_samples=ensemble.n_samples,
        q=model.q,
        mean_newton_iters=float(iters[1:].mean()),
        samples=kept,
    )


def sample_errors(index: int, spaces, prolong, u0s, model, scheme, master_seed, ref: int):
    """Squared L2 and H1 errors against the reference level, per level and step.

    Returns arrays of shape ``(levels, N+1)``.  All levels see the same
    Wiener path; coarse solutions are prolongated to the reference mesh.
    """
    seed = sample_seed(master_seed, index)
    path = sample_path(scheme.n_steps, scheme.tau, seed)
    nlev = len(spaces)
    M, K = spaces[ref].mass, spaces[ref].stiffness
    l2 = np.zeros((nlev, scheme.n_steps + 1))
    h1 = np.zeros_like(l2)
    us = [np.array(u, dtype=float) for u in u0s]

    def measure(n):
        for lev in range(nlev):
            e = prolong[lev] @ us[lev] - us[ref]
            l2[lev, n] = max(M.quad_form(e), 0.0)
            h1[lev, n] = max(K.quad_form(e), 0.0)

    measure(0)
    for n in range(scheme.n_steps):
        dW = float(path.increments[n])
        us = [step(u, dW, model, scheme, sp)[0] for u, sp in zip(us, spaces)]
        measure(n + 1)
    return l2, h1


def _error_task(i):
    spaces, prolong, u0s, model, scheme, seed, ref = _CTX
    try:
        return sample_errors(i, spaces, prolong, u0s, model, scheme, seed, ref)
    except Exception as exc:  # noqa: BLE001
        s = sample_seed(seed, i)
        raise EnsembleFailure(f"sample {i} (seed {s}) failed: {exc}", i, s) from exc


def strong_error_study(
    hierarchy: MeshHierarchy,
    model: ModelSpec,
    scheme: SchemeConfig,
    ensemble: EnsembleConfig,
    initial: Callable,
    row_levels: list[int] | None = None,
    reference_level: int = -1,
) -> list[ErrorTableRow]:
    """Strong errors of each level in ``row_levels`` against the reference level.

    The initial datum on every level is the L2 projection of
    ``initial(x, y)``.  Rows come back coarse to fine with orders filled
    in by :func:`convergence_rates`.
    """
    nlev = len(hierarchy)
    ref = reference_level % nlev
    if row_levels is None:
        row_levels = list(range(ref))
    row_levels = [lv % nlev for lv in row_levels]
    if any(lv > ref for lv in row_levels):
        raise ValueError("row levels must not be finer than the reference level")
    levels = sorted(set(row_levels) | {ref})
    spaces = [FESpace(hierarchy[lv]) for lv in levels]
    prolong = [hierarchy.prolongation_matrix(lv, ref) for lv in levels]
    u0s = [sp.project(initial) for sp in spaces]
    iref = levels.index(ref)

    nlv = len(levels)
    sum_l2 = np.zeros((nlv, scheme.n_steps + 1), dtype=np.longdouble)
    sum_sup = np.zeros(nlv, dtype=np.longdouble)
    sum_h1 = np.zeros(nlv, dtype=np.longdouble)
    ctx = (spaces, prolong, u0s, model, scheme, ensemble.master_seed, iref)
    for l2, h1 in _map_ordered(_error_task, ensemble.n_samples, ensemble.parallel_width, _set_ctx, (ctx,)):
        sum_l2 += l2
        sum_sup += l2.max(axis=1)
        sum_h1 += scheme.tau * h1[:, 1:].sum(axis=1)
    ns = ensemble.n_samples
    rows = []
    for lv in row_levels:
        i = levels.index(lv)
        rows.append(
            ErrorTableRow(
                h=hierarchy[lv].h(),
                err_linf_el2=math.sqrt(float((sum_l2[i] / ns).max())),
                err_el_inf_l2=math.sqrt(float(sum_sup[i] / ns)),
                err_el2_h1=math.sqrt(float(sum_h1[i] / ns)),
            )
        )
    return convergence_rates(rows) if len(rows) > 1 else rows


def _order(prev: float, cur: float) -> float:
    if cur == 0.0 or prev == 0.0 or not (np.isfinite(prev) and np.isfinite(cur)):
        return float("nan")
    return math.log2(prev / cur)


def convergence_rates(rows: list[ErrorTableRow]) -> list[ErrorTableRow]:
    """Attach ``log2(err_{k-1} / err_k)`` to every row after the first.

    Rows must be ordered coarse to fine with ``h`` halving each time.
    Undefined orders (a zero error) come back as NaN.
    """
    if len(rows) < 2:
        raise ValueError("need at least two rows to compute orders")
    for a, b in zip(rows, rows[1:]):
        if not math.isclose(a.h / b.h, 2.0, rel_tol=1e-9):
            raise ValueError(f"mesh sizes must halve between rows, got {a.h} -> {b.h}")
    out = [ErrorTableRow(rows[0].h, *rows[0].errors)]
    for a, b in zip(rows, rows[1:]):
        o = [_order(x, y) for x, y in zip(a.errors, b.errors)]
        out.append(ErrorTableRow(b.h, *b.errors, *o))
    return out
