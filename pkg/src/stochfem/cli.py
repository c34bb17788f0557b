"""Command line entry point: ``stochfem <command> [--config ...]``.

Exit codes: 0 success, 1 numerical or validation failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .config import ConfigError, RunConfig, load_config
from .fem import FESpace
from .mesh import MeshHierarchy, build_uniform_mesh, check_mesh_assumption, read_mesh, DegenerateMeshError
from .model import ModelValidationError
from .montecarlo import EnsembleFailure, run_ensemble, strong_error_study
from .paths import sample_path, sample_seed
from .postproc import (
    format_float,
    write_error_csv,
    write_levelset_csv,
    write_moment_csv,
    zero_level_set,
)
from .solver import PathFailure, solve_path
from .montecarlo import MomentSeries

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _meshes(cfg: RunConfig):
    if cfg.mesh_file:
        return [read_mesh(cfg.mesh_file)]
    return MeshHierarchy.uniform(cfg.nx, cfg.ny, cfg.refinements, cfg.rect).meshes


def cmd_mesh_check(cfg: RunConfig, out) -> int:
    ok = True
    for lev, mesh in enumerate(_meshes(cfg)):
        rep = check_mesh_assumption(mesh)
        status = "PASS" if rep.passed else "FAIL"
        print(f"level {lev}: nodes={mesh.n_nodes} h={mesh.h():.6g} worst={rep.worst_value:.6g} {status}", file=out)
        if not rep.passed:
            ok = False
            for e in rep.violating_edges:
                print(f"  violating edge {e[0]} {e[1]}", file=out)
    return EXIT_OK if ok else EXIT_FAIL


def _space_and_u0(cfg: RunConfig):
    mesh = read_mesh(cfg.mesh_file) if cfg.mesh_file else build_uniform_mesh(cfg.nx, cfg.ny, cfg.rect)
    space = FESpace(mesh)
    return space, space.project(cfg.initial())


def _single_sample(cfg: RunConfig, snapshots=()):
    space, u0 = _space_and_u0(cfg)
    scheme = cfg.scheme()
    path = sample_path(scheme.n_steps, scheme.tau, sample_seed(cfg.seed, 0))
    return space, solve_path(u0, path, cfg.model(), scheme, space, snapshot_steps=snapshots)


def cmd_solve(cfg: RunConfig, out) -> int:
    n = cfg.resolved_steps()
    space, tr = _single_sample(cfg, snapshots=(n,))
    d = tr.diagnostics
    zeros = np.zeros_like(d["l2_sq"])
    series = MomentSeries(
        times=tr.times,
        mean={
            "l2_sq": d["l2_sq"],
            "h1_sq": d["h1_sq"],
            "h1_4th": d["h1_sq"] ** 2,
            "l2_4th": d["l2_sq"] ** 2,
            "lqp1": d["lqp1"],
        },
        stderr={"l2_sq": zeros, "h1_sq": zeros},
        n_samples=1,
        q=cfg.model().q,
    )
    outdir = Path(cfg.dir)
    write_moment_csv(series, outdir / "moments.csv")
    u = tr.snapshots[n]
    with open(outdir / "solution.csv", "w", newline="") as fh:
        fh.write("x,y,u\n")
        for (x, y), v in zip(space.mesh.nodes, u):
            fh.write(f"{format_float(x)},{format_float(y)},{format_float(v)}\n")
    print(
        f"solved {n} steps: |u|_L2^2={d['l2_sq'][-1]:.6g} |grad u|^2={d['h1_sq'][-1]:.6g} "
        f"mean Newton iterations={d['newton_iters'][1:].mean():.2f}",
        file=out,
    )
    return EXIT_OK


def cmd_stability(cfg: RunConfig, out) -> int:
    space, u0 = _space_and_u0(cfg)
    series = run_ensemble(space, cfg.model(), cfg.scheme(), cfg.ensemble(), u0)
    path = Path(cfg.dir) / "moments.csv"
    write_moment_csv(series, path)
    print(
        f"{series.n_samples} samples, {series.n_steps} steps: "
        f"max E L2^2={series.mean['l2_sq'].max():.6g} max E H1^2={series.mean['h1_sq'].max():.6g} -> {path}",
        file=out,
    )
    return EXIT_OK


def cmd_convergence(cfg: RunConfig, out) -> int:
    if cfg.mesh_file:
        raise ConfigError("convergence studies need the built-in uniform hierarchy, not mesh_file")
    nrows = cfg.refinements + 1
    hier = MeshHierarchy.uniform(cfg.nx, cfg.ny, cfg.refinements + cfg.reference_extra, cfg.rect)
    rows = strong_error_study(
        hier,
        cfg.model(),
        cfg.scheme(),
        cfg.ensemble(),
        cfg.initial(),
        row_levels=list(range(nrows)),
        reference_level=len(hier) - 1,
    )
    path = Path(cfg.dir) / "errors.csv"
    write_error_csv(rows, path)
    print(f"{'h':>10} {'LinfEL2':>11} {'order':>7} {'ELinfL2':>11} {'order':>7} {'EL2H1':>11} {'order':>7}", file=out)
    for r in rows:
        o = ["   ---" if v is None else f"{v:7.4f}" for v in r.orders]
        print(
            f"{r.h:10.5f} {r.err_linf_el2:11.4e} {o[0]:>7} {r.err_el_inf_l2:11.4e} {o[1]:>7} "
            f"{r.err_el2_h1:11.4e} {o[2]:>7}",
            file=out,
        )
    return EXIT_OK


def cmd_levelset(cfg: RunConfig, out) -> int:
    n = cfg.resolved_steps()
    snaps = cfg.snapshots or (0, n)
    bad = [s for s in snaps if s < 0 or s > n]
    if bad:
        raise ConfigError(f"snapshot steps {bad} outside [0, {n}]")
    space, tr = _single_sample(cfg, snapshots=snaps)
    for s in sorted(set(snaps)):
        pl = zero_level_set(tr.snapshots[s], space.mesh, step=s, time=s * cfg.tau)
        path = Path(cfg.dir) / f"levelset_{s}.csv"
        write_levelset_csv(pl, path)
        print(f"step {s}: {len(pl)} segments -> {path}", file=out)
    return EXIT_OK


COMMANDS = {
    "mesh-check": cmd_mesh_check,
    "solve": cmd_solve,
    "stability": cmd_stability,
    "convergence": cmd_convergence,
    "levelset": cmd_levelset,
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="stochfem", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", help="config file or built-in name (e.g. test2)")
        s.add_argument("--seed", type=int, help="master seed (overrides config)")
        s.add_argument("--samples", type=int, help="number of Monte Carlo samples")
        s.add_argument("--workers", type=int, help="worker processes (default: config, else CPU count)")
        s.add_argument("--out", help="output directory")
    return p


def main(argv=None, out=None) -> int:
    out = sys.stdout if out is None else out
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        cfg = cfg.with_overrides(seed=args.seed, samples=args.samples, workers=args.workers, dir=args.out)
        return COMMANDS[args.command](cfg, out)
    except ConfigError as exc:
        print(f"stochfem: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ModelValidationError, DegenerateMeshError, EnsembleFailure, PathFailure) as exc:
        print(f"stochfem: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except OSError as exc:
        print(f"stochfem: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except ValueError as exc:  # malformed mesh file or inconsistent inputs
        print(f"stochfem: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
