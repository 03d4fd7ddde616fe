"""Hybridizable discontinuous Galerkin tools for reaction-diffusion on tetrahedra."""
from .basis import BasisFamily, BasisTables, build_tables
from .mesh import ExpandedMesh, MeshError, RawMesh, box_mesh, dirichlet_planes, expand, l_domain_mesh, read_mesh, write_mesh
from .problems import ProblemSpec, get_problem
from .quadrature import tet_rule, tri_rule
from .study import StudyConfig, evaluate_errors, run_study, solve_problem

__all__ = [
    "BasisFamily",
    "BasisTables",
    "build_tables",
    "ExpandedMesh",
    "RawMesh",
    "MeshError",
    "box_mesh",
    "dirichlet_planes",
    "expand",
    "l_domain_mesh",
    "read_mesh",
    "write_mesh",
    "ProblemSpec",
    "get_problem",
    "tet_rule",
    "tri_rule",
    "StudyConfig",
    "evaluate_errors",
    "run_study",
    "solve_problem",
]

__version__ = "0.1.0"
