"""Discrete Dirichlet energy of Q-valued functions on planar meshes."""

from .decompose import NotDecomposable, alpha_q, decompose_minimizer
from .examples import analytic_example, harmonic_boundary, root_boundary, sqrt_boundary
from .mesh import Mesh, build_annulus_mesh, build_disk_mesh, cot_laplacian, from_triangles
from .qfunction import (QFunction, SolverError, edge_costs, energy, eta_values, match_edges, relax_values,
                        triangle_energies, triangle_gradients)
from .solver import SolveOptions, SolveReport, minimize

__all__ = [
    "Mesh", "QFunction", "SolveOptions", "SolveReport", "SolverError", "NotDecomposable",
    "alpha_q", "analytic_example", "build_annulus_mesh", "build_disk_mesh", "cot_laplacian",
    "decompose_minimizer", "edge_costs", "energy", "eta_values", "from_triangles", "harmonic_boundary",
    "match_edges", "minimize", "relax_values", "root_boundary", "sqrt_boundary", "triangle_energies",
    "triangle_gradients",
]
