"""Spatial strong-error rates against a finer reference mesh.

Mirrors the `test1_paper` setup (tau = 1e-6, 20 steps, delta = 1) with
only 20 samples.  Every level sees the same Wiener path; coarse
solutions are prolongated to the reference mesh before measuring.

Run: python demos/04_strong_convergence.py
"""
from stochfem import MeshHierarchy, strong_error_study
from stochfem.config import load_config

cfg = load_config("test1_paper").with_overrides(samples=20)
for extra in (1, 2):
    hier = MeshHierarchy.uniform(cfg.nx, cfg.ny, cfg.refinements + extra)
    rows = strong_error_study(
        hier, cfg.model(), cfg.scheme(), cfg.ensemble(), cfg.initial(),
        row_levels=list(range(cfg.refinements + 1)), reference_level=-1,
    )
    print(f"\nreference {extra} level(s) finer than the last row, {cfg.samples} samples")
    print("      h      sup E L2  order   E sup L2  order    E L2 H1  order")
    for r in rows:
        o = ["   -  " if v is None else f"{v:6.3f}" for v in r.orders]
        print(f"{r.h:8.5f} {r.err_linf_el2:10.3e} {o[0]} {r.err_el_inf_l2:10.3e} {o[1]} "
              f"{r.err_el2_h1:10.3e} {o[2]}")

# With the reference only one level finer, the last H1 order is inflated:
# for an order-1 error the estimate there is biased up by about 0.16.
