"""Meshing, finite-element spaces, quadrature and form assembly."""
from .mesh import TriMesh, build_unit_square_mesh
from .quadrature import QuadratureRule, collapsed_gauss, dunavant6, rule
from .spaces import (FESpace, Geometry, control_space, pair_space, pressure_space,
                     scalar_space, velocity_space)
from .forms import (apply_lifting, assemble_a, assemble_ay, assemble_b, assemble_buoyancy,
                    assemble_c_skew, assemble_cy_skew, control_matrix, mass, stiffness)

__all__ = [
    "TriMesh", "build_unit_square_mesh", "QuadratureRule", "collapsed_gauss", "dunavant6",
    "rule", "FESpace", "Geometry", "control_space", "pair_space", "pressure_space",
    "scalar_space", "velocity_space", "apply_lifting", "assemble_a", "assemble_ay",
    "assemble_b", "assemble_buoyancy", "assemble_c_skew", "assemble_cy_skew",
    "control_matrix", "mass", "stiffness",
]
