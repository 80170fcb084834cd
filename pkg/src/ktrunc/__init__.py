"""Mixed nonlocal degenerate elliptic operators: evaluation, verification, Dirichlet solver."""

__version__ = "0.1.0"

from .kernels import barrier_constant, normalizing_constant, sphere_measure
from .frames import BlockFrame, Partition, make_partition
from .quadrature import QuadratureSpec, directional_integral, subspace_integral
from .operators import OperatorSpec, eval_K, eval_P_k, representation_K_minus_radial
from .dirichlet import DirichletProblem, solve_dirichlet

__all__ = [
    "BlockFrame",
    "DirichletProblem",
    "OperatorSpec",
    "Partition",
    "QuadratureSpec",
    "barrier_constant",
    "directional_integral",
    "eval_K",
    "eval_P_k",
    "make_partition",
    "normalizing_constant",
    "representation_K_minus_radial",
    "solve_dirichlet",
    "sphere_measure",
    "subspace_integral",
]
