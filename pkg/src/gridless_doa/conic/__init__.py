"""Standard-form Hermitian SDP modelling and an ADMM solver."""
from .admm import ConicSolution, solve
from .linalg import hermitian_eig, jacobi_eigh, project_psd, real_embed, real_extract
from .problem import ConicProblem, HermitianVectorizer, ProblemBuilder

__all__ = [
    'ConicProblem', 'ConicSolution', 'HermitianVectorizer', 'ProblemBuilder',
    'hermitian_eig', 'jacobi_eigh', 'project_psd', 'real_embed', 'real_extract', 'solve',
]
