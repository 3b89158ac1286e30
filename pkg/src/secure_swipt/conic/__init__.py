"""Small dense cone-programming toolkit: problem container, builder and IPM."""

from .cones import (
    NONNEG,
    PSD,
    SOC,
    Cone,
    StructureError,
    embed_hermitian,
    extract_hermitian,
    hermitian_basis,
    hermitian_from_params,
    hermitian_to_params,
    is_hermitian,
    project_embedding,
    smat,
    svec,
)
from .problem import Block, ConicProblem, ProblemBuilder, dump_problem, load_problem
from .solver import (
    INFEASIBLE,
    MAX_ITERATIONS,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    ConicSolution,
    ConicSolver,
    InteriorPointSolver,
)

__all__ = [
    "NONNEG", "PSD", "SOC", "Cone", "StructureError", "embed_hermitian", "extract_hermitian",
    "hermitian_basis", "hermitian_from_params", "hermitian_to_params", "is_hermitian",
    "project_embedding", "smat", "svec", "Block", "ConicProblem", "ProblemBuilder",
    "dump_problem", "load_problem", "INFEASIBLE", "MAX_ITERATIONS", "NUMERICAL_FAILURE",
    "OPTIMAL", "UNBOUNDED", "ConicSolution", "ConicSolver", "InteriorPointSolver",
]
