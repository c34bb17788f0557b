"""Conforming triangulations of a rectangle.

Meshes are built from a structured grid (every cell cut along its
lower-left to upper-right diagonal) and refined by red refinement.
Refinement also produces the nodal prolongation map that lets a coarse
P1 function be written exactly on the finer mesh.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

__all__ = [
    "Mesh",
    "ProlongationMap",
    "MeshHierarchy",
    "MeshAssumptionReport",
    "DegenerateMeshError",
    "build_uniform_mesh",
    "mesh_from_arrays",
    "refine_uniform",
    "mesh_size",
    "check_mesh_assumption",
    "write_mesh",
    "read_mesh",
]

DEFAULT_RECT = (-1.0, 1.0, -1.0, 1.0)
TOL_GEOM = 1e-12


class DegenerateMeshError(ValueError):
    """A triangle has (numerically) zero area."""


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Immutable triangle mesh.

    ``edge_triangles[e]`` holds the one or two triangles adjacent to edge
    ``e``; the second slot is -1 on the boundary.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    edges: np.ndarray
    edge_triangles: np.ndarray
    boundary_node_flags: np.ndarray
    rect: tuple[float, float, float, float]
    level: int = 0

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def n_edges(self) -> int:
        return self.edges.shape[0]

    @property
    def area(self) -> float:
        x0, x1, y0, y1 = self.rect
        return (x1 - x0) * (y1 - y0)

    @property
    def boundary_edge_flags(self) -> np.ndarray:
        return self.edge_triangles[:, 1] < 0

    def triangle_areas(self) -> np.ndarray:
        return 0.5 * _signed_double_areas(self.nodes, self.triangles)

    def h(self) -> float:
        return mesh_size(self)


@dataclass(frozen=True, eq=False)
class ProlongationMap:
    """Coarse-to-fine nodal interpolation between nested P1 spaces.

    Row ``i`` says fine node ``i`` takes ``weights[i, 0] * u[parents[i, 0]]
    + weights[i, 1] * u[parents[i, 1]]``.  Nodes that coincide with a
    coarse node repeat the parent index with weights (1, 0).
    """

    coarse_level: int
    fine_level: int
    parents: np.ndarray
    weights: np.ndarray
    n_coarse: int
    _matrix: sp.csr_matrix | None = field(default=None, repr=False)

    @property
    def n_fine(self) -> int:
        return self.parents.shape[0]

    @property
    def matrix(self) -> sp.csr_matrix:
        if self._matrix is None:
            rows = np.repeat(np.arange(self.n_fine), 2)
            mat = sp.csr_matrix(
                (self.weights.ravel(), (rows, self.parents.ravel())),
                shape=(self.n_fine, self.n_coarse),
            )
            mat.eliminate_zeros()
            object.__setattr__(self, "_matrix", mat)
        return self._matrix

    def apply(self, u_coarse: np.ndarray) -> np.ndarray:
        u_coarse = np.asarray(u_coarse, dtype=float)
        if u_coarse.shape[0] != self.n_coarse:
            raise ValueError(
                f"prolongation expects {self.n_coarse} coarse values, got {u_coarse.shape[0]}"
            )
        w = self.weights
        p = self.parents
        if u_coarse.ndim == 1:
            return w[:, 0] * u_coarse[p[:, 0]] + w[:, 1] * u_coarse[p[:, 1]]
        return w[:, :1] * u_coarse[p[:, 0]] + w[:, 1:] * u_coarse[p[:, 1]]


def _signed_double_areas(nodes: np.ndarray, tris: np.ndarray) -> np.ndarray:
    p0 = nodes[tris[:, 0]]
    p1 = nodes[tris[:, 1]]
    p2 = nodes[tris[:, 2]]
    d1 = p1 - p0
    d2 = p2 - p0
    return d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]


def _build_edges(tris: np.ndarray, n_nodes: int):
    """Unique edges, their adjacent triangles, and each triangle's edge ids.

    Local edge ``k`` of a triangle is the one opposite local vertex ``k``.
    """
    local = np.array([[1, 2], [2, 0], [0, 1]])
    pairs = tris[:, local]  # (T, 3, 2)
    flat = np.sort(pairs.reshape(-1, 2), axis=1)
    keys = flat[:, 0].astype(np.int64) * n_nodes + flat[:, 1]
    uniq, first, inverse = np.unique(keys, return_index=True, return_inverse=True)
    edges = flat[first]
    counts = np.bincount(inverse, minlength=uniq.size)
    if counts.max(initial=0) > 2:
        raise ValueError("non-manifold mesh: an edge is shared by more than two triangles")
    tri_of = np.repeat(np.arange(tris.shape[0]), 3)
    order = np.argsort(inverse, kind="stable")
    edge_tris = np.full((uniq.size, 2), -1, dtype=np.int64)
    sorted_inv = inverse[order]
    starts = np.searchsorted(sorted_inv, np.arange(uniq.size))
    edge_tris[:, 0] = tri_of[order[starts]]
    two = counts == 2
    edge_tris[two, 1] = tri_of[order[starts[two] + 1]]
    tri_edges = inverse.reshape(-1, 3)
    return edges.astype(np.int64), edge_tris, tri_edges


def mesh_from_arrays(nodes, triangles, rect=None, level: int = 0) -> Mesh:
    """Assemble a :class:`Mesh` from raw arrays.

    Clockwise triangles are reoriented; zero-area triangles raise
    :class:`DegenerateMeshError`.
    """
    nodes = np.asarray(nodes, dtype=float).reshape(-1, 2)
    tris = np.array(triangles, dtype=np.int64).reshape(-1, 3)
    if tris.size and (tris.min() < 0 or tris.max() >= nodes.shape[0]):
        raise ValueError("triangle references a node index out of range")
    dbl = _signed_double_areas(nodes, tris)
    scale = max(np.ptp(nodes[:, 0]), np.ptp(nodes[:, 1]), 1e-300) ** 2
    bad = np.abs(dbl) <= TOL_GEOM * scale
    if np.any(bad):
        raise DegenerateMeshError(f"degenerate triangles: {np.flatnonzero(bad).tolist()}")
    flip = dbl < 0
    tris[flip] = tris[flip][:, [0, 2, 1]]
    if rect is None:
        rect = (nodes[:, 0].min(), nodes[:, 0].max(), nodes[:, 1].min(), nodes[:, 1].max())
    rect = tuple(float(v) for v in rect)
    x0, x1, y0, y1 = rect
    slack = 1e-12 * max(x1 - x0, y1 - y0)
    inside = (
        (nodes[:, 0] >= x0 - slack)
        & (nodes[:, 0] <= x1 + slack)
        & (nodes[:, 1] >= y0 - slack)
        & (nodes[:, 1] <= y1 + slack)
    )
    if not np.all(inside):
        raise ValueError("mesh nodes lie outside the domain rectangle")
    edges, edge_tris, _ = _build_edges(tris, nodes.shape[0])
    bflags = np.zeros(nodes.shape[0], dtype=bool)
    bflags[edges[edge_tris[:, 1] < 0].ravel()] = True
    return Mesh(
        nodes=_readonly(nodes),
        triangles=_readonly(tris),
        edges=_readonly(edges),
        edge_triangles=_readonly(edge_tris),
        boundary_node_flags=_readonly(bflags),
        rect=rect,
        level=level,
    )


def build_uniform_mesh(nx: int, ny: int, rect=DEFAULT_RECT) -> Mesh:
    """Structured (nx+1) x (ny+1) grid, each cell split along its rising diagonal."""
    if int(nx) != nx or int(ny) != ny or nx < 1 or ny < 1:
        raise ValueError(f"cell counts must be positive integers, got nx={nx}, ny={ny}")
    nx, ny = int(nx), int(ny)
    x0, x1, y0, y1 = (float(v) for v in rect)
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate rectangle {rect}")
    xs = np.linspace(x0, x1, nx + 1)
    ys = np.linspace(y0, y1, ny + 1)
    X, Y = np.meshgrid(xs, ys)
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    j, i = np.meshgrid(np.arange(ny), np.arange(nx), indexing="ij")
    a = (j * (nx + 1) + i).ravel()
    b = a + 1
    c = a + nx + 2
    d = a + nx + 1
    tris = np.empty((2 * a.size, 3), dtype=np.int64)
    tris[0::2] = np.column_stack([a, b, c])
    tris[1::2] = np.column_stack([a, c, d])
    return mesh_from_arrays(nodes, tris, rect=(x0, x1, y0, y1), level=0)


def refine_uniform(mesh: Mesh) -> tuple[Mesh, ProlongationMap]:
    """Split every triangle into four through its edge midpoints.

    Coarse nodes keep their indices; the midpoint of edge ``e`` becomes
    node ``n_nodes + e``.
    """
    n = mesh.n_nodes
    _, _, tri_edges = _build_edges(mesh.triangles, n)
    mids = 0.5 * (mesh.nodes[mesh.edges[:, 0]] + mesh.nodes[mesh.edges[:, 1]])
    nodes = np.vstack([mesh.nodes, mids])

    v0, v1, v2 = mesh.triangles.T
    # tri_edges[:, k] is opposite vertex k
    m12 = n + tri_edges[:, 0]
    m20 = n + tri_edges[:, 1]
    m01 = n + tri_edges[:, 2]
    children = np.stack(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([v1, m12, m01]),
            np.column_stack([v2, m20, m12]),
            np.column_stack([m01, m12, m20]),
        ],
        axis=1,
    ).reshape(-1, 3)
    fine = mesh_from_arrays(nodes, children, rect=mesh.rect, level=mesh.level + 1)

    parents = np.empty((fine.n_nodes, 2), dtype=np.int64)
    weights = np.empty((fine.n_nodes, 2))
    parents[:n, 0] = parents[:n, 1] = np.arange(n)
    weights[:n] = (1.0, 0.0)
    parents[n:] = mesh.edges
    weights[n:] = 0.5
    pmap = ProlongationMap(
        coarse_level=mesh.level,
        fine_level=fine.level,
        parents=_readonly(parents),
        weights=_readonly(weights),
        n_coarse=n,
    )
    return fine, pmap


def mesh_size(mesh: Mesh) -> float:
    """Largest edge length."""
    d = mesh.nodes[mesh.edges[:, 1]] - mesh.nodes[mesh.edges[:, 0]]
    return float(np.sqrt((d * d).sum(axis=1)).max())


@dataclass(frozen=True)
class MeshAssumptionReport:
    passed: bool
    per_edge_values: np.ndarray
    violating_edges: list[tuple[int, int]]
    worst_value: float


def check_mesh_assumption(mesh: Mesh, tol: float = TOL_GEOM) -> MeshAssumptionReport:
    """Per-edge sum of cotangents of the angles facing the edge.

    In two dimensions this is the Delaunay criterion that makes the P1
    stiffness matrix have nonpositive off-diagonal entries.  An edge fails
    when its sum is below ``-tol``.
    """
    nodes, tris = mesh.nodes, mesh.triangles
    dbl = _signed_double_areas(nodes, tris)
    if np.any(dbl <= 0):
        raise DegenerateMeshError(
            f"triangles with nonpositive area: {np.flatnonzero(dbl <= 0).tolist()}"
        )
    # cotangent of the angle at local vertex k, which faces local edge k
    cot = np.empty((tris.shape[0], 3))
    for k in range(3):
        p = nodes[tris[:, k]]
        e1 = nodes[tris[:, (k + 1) % 3]] - p
        e2 = nodes[tris[:, (k + 2) % 3]] - p
        cot[:, k] = (e1 * e2).sum(axis=1) / dbl

    _, _, tri_edges = _build_edges(tris, mesh.n_nodes)
    values = np.zeros(mesh.n_edges)
    np.add.at(values, tri_edges.ravel(), cot.ravel())
    bad = np.flatnonzero(values < -tol)
    return MeshAssumptionReport(
        passed=bad.size == 0,
        per_edge_values=values,
        violating_edges=[tuple(int(v) for v in mesh.edges[e]) for e in bad],
        worst_value=float(values.min(initial=np.inf)),
    )


class MeshHierarchy:
    """A base mesh and its successive uniform refinements."""

    def __init__(self, base: Mesh, n_refinements: int = 0):
        self.meshes = [base]
        self.maps: list[ProlongationMap] = []
        for _ in range(n_refinements):
            fine, pmap = refine_uniform(self.meshes[-1])
            self.meshes.append(fine)
            self.maps.append(pmap)
        self._composed: dict[tuple[int, int], sp.csr_matrix] = {}

    @classmethod
    def uniform(cls, nx: int, ny: int, n_refinements: int, rect=DEFAULT_RECT) -> "MeshHierarchy":
        return cls(build_uniform_mesh(nx, ny, rect), n_refinements)

    def __len__(self) -> int:
        return len(self.meshes)

    def __getitem__(self, i: int) -> Mesh:
        return self.meshes[i]

    def prolongation_matrix(self, coarse: int, fine: int) -> sp.csr_matrix:
        """Sparse matrix taking level ``coarse`` nodal values to level ``fine``."""
        nlev = len(self.meshes)
        coarse = coarse % nlev
        fine = fine % nlev
        if coarse > fine:
            raise ValueError(f"cannot prolongate from level {coarse} down to level {fine}")
        key = (coarse, fine)
        if key not in self._composed:
            mat = sp.identity(self.meshes[coarse].n_nodes, format="csr")
            for m in self.maps[coarse:fine]:
                mat = (m.matrix @ mat).tocsr()
            self._composed[key] = mat
        return self._composed[key]


def write_mesh(mesh: Mesh, path) -> None:
    """Plain-text export: header ``<nodes> <triangles>``, coordinates, 0-based triangles."""
    lines = [f"{mesh.n_nodes} {mesh.n_triangles}"]
    lines += [f"{x:.17g} {y:.17g}" for x, y in mesh.nodes]
    lines += [f"{a} {b} {c}" for a, b, c in mesh.triangles]
    try:
        with open(path, "w", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write mesh file {path}: {exc}") from exc


def read_mesh(path, rect=None) -> Mesh:
    try:
        with open(path) as fh:
            rows = [ln.split() for ln in fh if ln.strip()]
    except OSError as exc:
        raise OSError(f"cannot read mesh file {path}: {exc}") from exc
    if not rows or len(rows[0]) != 2:
        raise ValueError(f"{path}: header must be '<nodes> <triangles>'")
    nn, nt = int(rows[0][0]), int(rows[0][1])
    if len(rows) != 1 + nn + nt:
        raise ValueError(f"{path}: expected {nn} node and {nt} triangle lines")
    nodes = np.array([[float(v) for v in r] for r in rows[1 : 1 + nn]]).reshape(-1, 2)
    tris = np.array([[int(v) for v in r] for r in rows[1 + nn :]], dtype=np.int64).reshape(-1, 3)
    return mesh_from_arrays(nodes, tris, rect=rect)
