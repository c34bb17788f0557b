"""Meshes, the Delaunay check, and the two P1 matrices.

Run: python demos/01_mesh_and_assembly.py
"""
import numpy as np

from stochfem.fem import FESpace
from stochfem.mesh import MeshHierarchy, check_mesh_assumption, mesh_from_arrays

# A 4x4 grid on [-1, 1]^2 and three uniform refinements.
hier = MeshHierarchy.uniform(4, 4, 3)
for mesh in hier.meshes:
    rep = check_mesh_assumption(mesh)
    print(f"level {mesh.level}: {mesh.n_nodes:5d} nodes, h = {mesh.h():.4f}, "
          f"worst cotangent sum {rep.worst_value:+.1e}")

# Two thin triangles sharing a long edge break the condition.
bad = mesh_from_arrays([(0, 0), (1, 0), (0.5, 0.05), (0.5, -0.05)], [(0, 1, 2), (0, 3, 1)])
rep = check_mesh_assumption(bad)
print("\nflat pair passes?", rep.passed, "| violating edges:", rep.violating_edges)

# Mass and stiffness share one sparsity pattern.
space = FESpace(hier[1])
M, K = space.mass, space.stiffness
print(f"\nlevel 1: {M.nnz} stored entries per matrix")
print("sum of M entries (domain area):", round(M.values.sum(), 12))
print("max |K 1|:", np.abs(K @ np.ones(space.n)).max())
off = K.row_indices() != K.column_indices
print("largest off-diagonal of K:", K.values[off].max())

# A few norms of the function x*y.
u = space.interpolate(lambda x, y: x * y)
print(f"\n||I_h(xy)||_L2 = {space.norm_l2(u):.6f}   (exact ||xy||_L2 = {2 / 3:.6f})")
print(f"|I_h(xy)|_H1  = {space.seminorm_h1(u):.6f}   (exact {np.sqrt(8 / 3):.6f})")
