"""Small Hermitian SDP modeling layer and interior-point solver."""

from .embedding import ValidationError, embed_hermitian, hermitianize, psd_min_eig, unembed
from .ipm import (
    INFEASIBLE,
    NUMERICAL_FAILURE,
    OPTIMAL,
    UNBOUNDED,
    SdpSolution,
    SolverSettings,
    solve,
)
from .problem import Affine, HermAffine, SdpProblem, congruence, quad, scalar_matrix, trace

__all__ = [
    "Affine", "HermAffine", "SdpProblem", "SdpSolution", "SolverSettings", "ValidationError",
    "INFEASIBLE", "NUMERICAL_FAILURE", "OPTIMAL", "UNBOUNDED",
    "congruence", "embed_hermitian", "hermitianize", "psd_min_eig", "quad", "scalar_matrix",
    "solve", "trace", "unembed",
]
