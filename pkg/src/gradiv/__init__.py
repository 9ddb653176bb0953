"""Grad-div conforming finite element complexes on tetrahedral and cuboid meshes."""
from .analysis import RateTable, discrete_norms, error_norms, exact_error_norms, rates
from .assembly import assemble, local_matrix_quaddiv, load_vector, manufactured_problem
from .derham import AnalyticField, commuting_check, complex_report, interpolate, interpolation_convergence
from .fespace import GlobalSpace, boundary_mask_W0, build_complex, build_space, differential_matrix
from .mesh import StructuredMesh, affine_map, build_hex_mesh, build_mesh, build_tet_mesh
from .refelem import build_nodal_basis, dof_set, element, element_report, shape_span_W, sigma_plus_span
from .solver import SolveReport, solve_spd
from .study import run_study, solve_case

__version__ = "0.1.0"

__all__ = [
    "AnalyticField", "GlobalSpace", "RateTable", "SolveReport", "StructuredMesh", "affine_map", "assemble",
    "boundary_mask_W0", "build_complex", "build_hex_mesh", "build_mesh", "build_nodal_basis", "build_space",
    "build_tet_mesh", "commuting_check", "complex_report", "differential_matrix", "discrete_norms", "dof_set",
    "element", "element_report", "error_norms", "exact_error_norms", "interpolate", "interpolation_convergence", "load_vector",
    "local_matrix_quaddiv", "manufactured_problem", "rates", "run_study", "shape_span_W", "sigma_plus_span",
    "solve_case", "solve_spd",
]
