"""P1 finite elements on triangles.

Nodal coefficient vectors are plain ``numpy`` arrays with one entry per
mesh node.  Mass and stiffness matrices of one mesh share a single CSR
pattern, which lets the Newton Jacobian be formed by combining value
arrays directly.
"""
from __future__ import annotations

from typing import Callable

import numpy as np

from .mesh import Mesh, ProlongationMap
from .quadrature import QuadratureRule, map_points, rule_for_degree, strang_fix_7
from .sparse import SparseMatrix, cg_solve

__all__ = [
    "FESpace",
    "local_mass",
    "local_stiffness",
    "assemble_mass",
    "assemble_stiffness",
    "interpolate_nodal",
    "l2_project",
    "discrete_laplacian",
    "norm_l2",
    "seminorm_h1",
    "norm_lp",
    "lp_integral",
    "norm_linf_nodal",
    "prolongate",
    "function_load",
    "composed_load",
    "l2_error",
    "h1_error",
    "SolverFailure",
]


class SolverFailure(RuntimeError):
    """A linear solve inside an FE operation did not converge."""

    def __init__(self, message: str, report=None):
        super().__init__(message)
        self.report = report


def _geometry(mesh: Mesh):
    p = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    x, y = p[..., 0], p[..., 1]
    dbl = (x[:, 1] - x[:, 0]) * (y[:, 2] - y[:, 0]) - (x[:, 2] - x[:, 0]) * (y[:, 1] - y[:, 0])
    area = 0.5 * dbl
    # gradient of barycentric coordinate i: rotate the opposite edge
    grads = np.empty((mesh.n_triangles, 3, 2))
    for i in range(3):
        j, k = (i + 1) % 3, (i + 2) % 3
        grads[:, i, 0] = (y[:, j] - y[:, k]) / dbl
        grads[:, i, 1] = (x[:, k] - x[:, j]) / dbl
    return area, grads


def local_mass(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    d1, d2 = coords[1] - coords[0], coords[2] - coords[0]
    a = 0.5 * abs(d1[0] * d2[1] - d1[1] * d2[0])
    return a / 12.0 * (np.ones((3, 3)) + np.eye(3))


def local_stiffness(coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=float)
    x, y = coords[:, 0], coords[:, 1]
    dbl = (x[1] - x[0]) * (y[2] - y[0]) - (x[2] - x[0]) * (y[1] - y[0])
    g = np.array([[y[(i + 1) % 3] - y[(i + 2) % 3], x[(i + 2) % 3] - x[(i + 1) % 3]] for i in range(3)]) / dbl
    return 0.5 * abs(dbl) * g @ g.T


def _pattern(mesh: Mesh):
    tris = mesh.triangles
    n = mesh.n_nodes
    rows = np.repeat(tris, 3, axis=1).ravel()
    cols = np.tile(tris, (1, 3)).ravel()
    keys = rows * n + cols
    uniq, inverse = np.unique(keys, return_inverse=True)
    r = uniq // n
    c = uniq % n
    offsets = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(np.bincount(r, minlength=n), out=offsets[1:])
    return offsets, c, inverse, uniq.size


def _assemble(mesh: Mesh, local: np.ndarray, pattern=None) -> SparseMatrix:
    offsets, cols, scatter, nnz = _pattern(mesh) if pattern is None else pattern
    vals = np.bincount(scatter, weights=local.reshape(-1), minlength=nnz)
    return SparseMatrix(offsets, cols, vals, mesh.n_nodes, check=False)


def _local_mass_all(area):
    base = (np.ones((3, 3)) + np.eye(3)) / 12.0
    return area[:, None, None] * base


def _local_stiffness_all(area, grads):
    return area[:, None, None] * np.einsum("tid,tjd->tij", grads, grads)


def assemble_mass(mesh: Mesh) -> SparseMatrix:
    """Consistent mass matrix ``M_ij = int phi_i phi_j``."""
    area, _ = _geometry(mesh)
    return _assemble(mesh, _local_mass_all(area))


def assemble_stiffness(mesh: Mesh) -> SparseMatrix:
    """Stiffness matrix ``K_ij = int grad phi_i . grad phi_j`` (natural boundary)."""
    area, grads = _geometry(mesh)
    return _assemble(mesh, _local_stiffness_all(area, grads))


def interpolate_nodal(mesh: Mesh, values) -> np.ndarray:
    """Coefficients of ``I_h v``: the nodal values themselves.

    ``values`` may be an array with one entry per node or a callable
    ``v(x, y)`` evaluated at the nodes.
    """
    if callable(values):
        values = values(mesh.nodes[:, 0], mesh.nodes[:, 1])
    out = np.array(values, dtype=float)
    if out.shape != (mesh.n_nodes,):
        raise ValueError(f"expected {mesh.n_nodes} nodal values, got shape {out.shape}")
    return out


def function_load(mesh: Mesh, f: Callable, rule: QuadratureRule | None = None) -> np.ndarray:
    """``b_i = int f phi_i`` for a callable ``f(x, y)``."""
    rule = strang_fix_7() if rule is None else rule
    pts = map_points(mesh.nodes, mesh.triangles, rule)
    fv = np.asarray(f(pts[..., 0], pts[..., 1]), dtype=float)
    fv = np.broadcast_to(fv, pts.shape[:2])
    return _load_from_point_values(mesh, fv, rule)


def composed_load(mesh: Mesh, u, g: Callable, rule: QuadratureRule | None = None) -> np.ndarray:
    """``b_i = int g(u_h) phi_i`` with ``g`` applied at quadrature points."""
    rule = strang_fix_7() if rule is None else rule
    uq = np.asarray(u)[mesh.triangles] @ rule.points.T  # (T, k)
    return _load_from_point_values(mesh, g(uq), rule)


def _load_from_point_values(mesh: Mesh, fv: np.ndarray, rule: QuadratureRule) -> np.ndarray:
    area = mesh.triangle_areas()
    local = area[:, None] * (fv * rule.weights) @ rule.points  # (T, 3)
    return np.bincount(mesh.triangles.ravel(), weights=local.ravel(), minlength=mesh.n_nodes)


def l2_project(
    mesh: Mesh,
    f: Callable,
    mass: SparseMatrix | None = None,
    rule: QuadratureRule | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """L2 projection of ``f(x, y)`` onto the P1 space."""
    mass = assemble_mass(mesh) if mass is None else mass
    b = function_load(mesh, f, rule)
    x, rep = cg_solve(mass, b, tol=tol, maxit=max(100, mass.n))
    if not rep.converged:
        raise SolverFailure(f"L2 projection: CG stalled at residual {rep.final_residual_norm:.3e}", rep)
    return x


def discrete_laplacian(u, mass: SparseMatrix, stiffness: SparseMatrix, tol: float = 1e-10) -> np.ndarray:
    """``Delta_h u``: the P1 function ``w`` with ``M w = -K u``."""
    rhs = -(stiffness @ u)
    if not np.any(rhs):
        return np.zeros_like(rhs)
    x, rep = cg_solve(mass, rhs, tol=tol, maxit=max(100, mass.n))
    if not rep.converged:
        raise SolverFailure(f"discrete Laplacian: CG stalled at residual {rep.final_residual_norm:.3e}", rep)
    return x


def norm_l2(u, mass: SparseMatrix) -> float:
    return float(np.sqrt(max(mass.quad_form(u), 0.0)))


def seminorm_h1(u, stiffness: SparseMatrix) -> float:
    return float(np.sqrt(max(stiffness.quad_form(u), 0.0)))


def _lp_rule(p: float) -> QuadratureRule:
    if p <= 4:
        return strang_fix_7()
    return rule_for_degree(int(np.ceil(p)) + 1)


def lp_integral(mesh: Mesh, u, p: float, rule: QuadratureRule | None = None) -> float:
    """``int |u_h|^p`` by per-triangle quadrature."""
    if p < 1:
        raise ValueError(f"L^p exponent must be >= 1, got {p}")
    rule = _lp_rule(p) if rule is None else rule
    uq = np.asarray(u)[mesh.triangles] @ rule.points.T
    area = mesh.triangle_areas()
    return float(area @ (np.abs(uq) ** p @ rule.weights))


def norm_lp(mesh: Mesh, u, p: float, rule: QuadratureRule | None = None) -> float:
    return lp_integral(mesh, u, p, rule) ** (1.0 / p)


def norm_linf_nodal(u) -> float:
    """Max norm; exact for P1 since extrema sit at nodes."""
    return float(np.max(np.abs(u)))


def prolongate(u_coarse, pmap: ProlongationMap) -> np.ndarray:
    return pmap.apply(u_coarse)


def l2_error(mesh: Mesh, u, exact: Callable, rule: QuadratureRule | None = None) -> float:
    """``|| exact - u_h ||_{L2}`` by quadrature."""
    rule = strang_fix_7() if rule is None else rule
    pts = map_points(mesh.nodes, mesh.triangles, rule)
    uq = np.asarray(u)[mesh.triangles] @ rule.points.T
    d = np.asarray(exact(pts[..., 0], pts[..., 1])) - uq
    return float(np.sqrt(mesh.triangle_areas() @ (d * d @ rule.weights)))


def h1_error(mesh: Mesh, u, grad_exact: Callable, rule: QuadratureRule | None = None) -> float:
    """``|| grad(exact) - grad(u_h) ||_{L2}``; ``grad_exact`` returns ``(gx, gy)``."""
    rule = strang_fix_7() if rule is None else rule
    area, grads = _geometry(mesh)
    gu = np.einsum("ti,tid->td", np.asarray(u)[mesh.triangles], grads)  # constant per triangle
    pts = map_points(mesh.nodes, mesh.triangles, rule)
    gx, gy = grad_exact(pts[..., 0], pts[..., 1])
    d2 = (np.asarray(gx) - gu[:, None, 0]) ** 2 + (np.asarray(gy) - gu[:, None, 1]) ** 2
    return float(np.sqrt(area @ (d2 @ rule.weights)))


class FESpace:
    """P1 space on one mesh with its assembled mass and stiffness matrices."""

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        area, grads = _geometry(mesh)
        pattern = _pattern(mesh)
        self.mass = _assemble(mesh, _local_mass_all(area), pattern)
        self.stiffness = _assemble(mesh, _local_stiffness_all(area, grads), pattern)
        # one shared pattern so value arrays can be combined entrywise
        self.stiffness = self.mass.with_values(self.stiffness.values)

    @property
    def n(self) -> int:
        return self.mesh.n_nodes

    @property
    def area(self) -> float:
        return self.mesh.area

    def interpolate(self, values) -> np.ndarray:
        return interpolate_nodal(self.mesh, values)

    def project(self, f: Callable, tol: float = 1e-10) -> np.ndarray:
        return l2_project(self.mesh, f, self.mass, tol=tol)

    def laplacian(self, u, tol: float = 1e-10) -> np.ndarray:
        return discrete_laplacian(u, self.mass, self.stiffness, tol)

    # clamped: roundoff can push the form of a near-constant field below zero
    def l2_sq(self, u) -> float:
        return max(self.mass.quad_form(u), 0.0)

    def h1_sq(self, u) -> float:
        return max(self.stiffness.quad_form(u), 0.0)

    def norm_l2(self, u) -> float:
        return norm_l2(u, self.mass)

    def seminorm_h1(self, u) -> float:
        return seminorm_h1(u, self.stiffness)

    def norm_lp(self, u, p: float) -> float:
        return norm_lp(self.mesh, u, p)

    def lp_integral(self, u, p: float) -> float:
        return lp_integral(self.mesh, u, p)
