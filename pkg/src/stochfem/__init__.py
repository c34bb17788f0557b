"""P1 finite elements for semilinear SPDEs with multiplicative noise.

Solves ``du = [Lap u + f(u)] dt + g(u) dW`` on a rectangle with natural
boundary conditions, using an implicit Euler-Maruyama step whose drift
is discretised by nodal interpolation, and estimates moments and strong
errors by Monte Carlo.
"""
from .fem import FESpace
from .mesh import MeshHierarchy, build_uniform_mesh, check_mesh_assumption, mesh_size, refine_uniform
from .model import DiffusionSpec, DriftSpec, ModelSpec
from .montecarlo import EnsembleConfig, convergence_rates, run_ensemble, strong_error_study
from .paths import coarsen_path, sample_path, sample_seed
from .postproc import zero_level_set
from .solver import SchemeConfig, solve_path, step

__version__ = "0.1.0"

__all__ = [
    "FESpace",
    "MeshHierarchy",
    "build_uniform_mesh",
    "check_mesh_assumption",
    "mesh_size",
    "refine_uniform",
    "DiffusionSpec",
    "DriftSpec",
    "ModelSpec",
    "EnsembleConfig",
    "convergence_rates",
    "run_ensemble",
    "strong_error_study",
    "coarsen_path",
    "sample_path",
    "sample_seed",
    "zero_level_set",
    "SchemeConfig",
    "solve_path",
    "step",
]
