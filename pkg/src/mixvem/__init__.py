"""Mixed virtual element method for general second-order elliptic problems on polygons."""

from .assembly import MixedSystem, assemble, local_flux_matrix, local_stabilization
from .mesh import (
    PolygonalMesh,
    build_mesh,
    generate_concave_mesh,
    generate_family,
    generate_square_mesh,
    generate_voronoi_lloyd_mesh,
    load_mesh,
    quality_report,
    save_mesh,
)
from .problems import ManufacturedProblem, paper_benchmark, patch_problem
from .solve import DiscreteSolution, ErrorBundle, compute_eoc, compute_errors, solve
from .space import ElementOps, GlobalDofMap, build_all_ops, build_element_ops, dofs_of_field
from .study import ConvergenceReport, StudyConfig, emit, run_study

__version__ = "0.1.0"

__all__ = [
    "ConvergenceReport", "DiscreteSolution", "ElementOps", "ErrorBundle",
    "GlobalDofMap", "ManufacturedProblem", "MixedSystem", "PolygonalMesh",
    "StudyConfig", "assemble", "build_all_ops", "build_element_ops", "build_mesh",
    "compute_eoc", "compute_errors", "dofs_of_field", "emit", "generate_concave_mesh",
    "generate_family", "generate_square_mesh", "generate_voronoi_lloyd_mesh",
    "load_mesh", "local_flux_matrix", "local_stabilization", "paper_benchmark",
    "patch_problem", "quality_report", "run_study", "save_mesh", "solve",
]
