"""Zero level sets of a single path, written as CSV segments.

Run: python demos/05_level_sets.py [outdir]
"""
import sys
from pathlib import Path

import numpy as np

from stochfem import FESpace, build_uniform_mesh, sample_path, sample_seed, solve_path, zero_level_set
from stochfem.config import load_config
from stochfem.postproc import write_levelset_csv

out = Path(sys.argv[1] if len(sys.argv) > 1 else "out/demo_levelsets")
cfg = load_config("test2_levelset").with_overrides(nx=50, ny=50)
space = FESpace(build_uniform_mesh(cfg.nx, cfg.ny))
scheme = cfg.scheme()
steps = (0, scheme.n_steps // 2, scheme.n_steps)

path = sample_path(scheme.n_steps, scheme.tau, sample_seed(cfg.seed, 0))
tr = solve_path(space.project(cfg.initial()), path, cfg.model(), scheme, space, snapshot_steps=steps)

for s in steps:
    pl = zero_level_set(tr.snapshots[s], space.mesh, step=s, time=s * scheme.tau)
    r = np.linalg.norm(pl.segments.reshape(-1, 2), axis=1)
    write_levelset_csv(pl, out / f"levelset_{s}.csv")
    print(f"t = {pl.time:.3f}: {len(pl):4d} segments, mean radius {r.mean():.4f} (spread {r.std():.4f})")
print("CSV files in", out)
