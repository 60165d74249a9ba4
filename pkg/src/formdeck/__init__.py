"""Discrete differential forms on polytopal meshes.

Polynomial forms and trimmed spaces on cells, validated polytopal meshes
with a simplicial submesh, chains and cochains, Whitney forms, the
polytopal-to-simplicial cochain lift, the discrete de Rham complex and
constructive Poincare inequalities.
"""

from .ddr import DDRComplex, DiscreteKForm
from .errors import (
    FeasibilityError,
    FormdeckError,
    IllConditionedBasisError,
    InvalidDegreeError,
    MeshInvariantError,
    MeshParseError,
    NotABoundaryError,
    NotACoboundaryError,
    SolveResidualError,
)
from .exterior import Alternator, hodge_star_basis, wedge_sign
from .generators import family_mesh, shape_mesh
from .lift import LiftContext, cochain_poincare, lift, project_back
from .mesh import PolytopalMesh, build_mesh, load_mesh, mesh_from_dict
from .poincare import construct_lifting, spectral_constant, sweep
from .polyform import (
    PolyForm,
    build_trimmed_basis,
    exterior_derivative,
    hodge_star,
    koszul,
    trace,
    trimmed_project,
    wedge,
)
from .whitney import WhitneyComplex, de_rham_integrals, whitney_form

__version__ = "0.1.0"

__all__ = [
    "Alternator", "DDRComplex", "DiscreteKForm", "FeasibilityError", "FormdeckError",
    "IllConditionedBasisError", "InvalidDegreeError", "LiftContext", "MeshInvariantError",
    "MeshParseError", "NotABoundaryError", "NotACoboundaryError", "PolyForm", "PolytopalMesh",
    "SolveResidualError", "WhitneyComplex", "build_mesh", "build_trimmed_basis",
    "cochain_poincare", "construct_lifting", "de_rham_integrals", "exterior_derivative",
    "family_mesh", "hodge_star", "hodge_star_basis", "koszul", "lift", "load_mesh",
    "mesh_from_dict", "project_back", "shape_mesh", "spectral_constant", "sweep", "trace",
    "trimmed_project", "wedge", "wedge_sign", "whitney_form",
]
