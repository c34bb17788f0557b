import numpy as np
import pytest

from stochfem.mesh import MeshHierarchy, mesh_from_arrays

# Filled by test_acceptance.py: criterion number -> (passed, detail).
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def hierarchy():
    """Uniform meshes of [-1, 1]^2 with 4x4 cells, refined four times."""
    return MeshHierarchy.uniform(4, 4, 4)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def non_delaunay_mesh():
    # two flat triangles sharing (0,0)-(1,0); both opposite angles are obtuse
    nodes = [(0.0, 0.0), (1.0, 0.0), (0.5, 0.05), (0.5, -0.05)]
    return mesh_from_arrays(nodes, [(0, 1, 2), (0, 3, 1)])


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
