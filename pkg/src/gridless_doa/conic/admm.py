"""Operator-splitting (ADMM / Douglas-Rachford) solver for ConicProblem.

Iteration, with ``P_aff`` the Euclidean projection onto ``{x : Ax = b}`` and
``P_K`` the projection onto the cone::

    x   = P_aff(z - u - c / rho)
    xh  = alpha x + (1 - alpha) z
    z   = P_K(xh + u)
    u   = u + xh - z

``P_aff`` uses a sparse LU factorization of ``A A^T`` computed once; since
it does not depend on ``rho``, the penalty is adapted freely by residual
balancing. At termination ``X = z`` is exactly in the cone, the slack is
``S = -rho u`` and the equality multipliers are the least-squares solution
of ``A^T y = c - S``.

Stopping: all three of
    primal residual  ||A X - b|| / max(1, ||b||)
    dual residual    ||(c - A^T y) - P_K*(c - A^T y)|| / max(1, ||c||)
    gap              |c.X - b.y| / max(1, |c.X|, |b.y|)
are at most ``tol``.
"""
from dataclasses import dataclass
import time

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from ..errors import ProblemConstructionError
from .linalg import project_psd


@dataclass
class ConicSolution:
    blocks: list
    free: np.ndarray
    x: np.ndarray
    y: np.ndarray
    objective: float
    dual_objective: float
    primal_residual: float
    dual_residual: float
    gap: float
    iterations: int
    status: str
    solve_time: float

    @property
    def optimal(self):
        return self.status == 'optimal'


class _AffineProjector:

    def __init__(self, A, b, rank_tol=1e-10):
        self.A = sp.csr_matrix(A)
        self.AT = self.A.T.tocsr()
        self.b = b
        if self.A.shape[0] == 0:
            self.lu = None
            return
        M = (self.A @ self.AT).tocsc()
        try:
            self.lu = spla.splu(M, permc_spec='MMD_AT_PLUS_A',
                                options=dict(SymmetricMode=True))
        except RuntimeError as e:
            raise ProblemConstructionError('rank-deficient constraints: %s' % e) from None
        piv = np.abs(self.lu.U.diagonal())
        if piv.min() <= rank_tol * piv.max():
            raise ProblemConstructionError(
                'rank-deficient constraints (pivot ratio %.2e)' % (piv.min() / piv.max()))

    def solve_normal(self, r):
        return self.lu.solve(r) if self.lu is not None else r[:0]

    def __call__(self, v):
        if self.lu is None:
            return v
        return v - self.AT @ self.lu.solve(self.A @ v - self.b)


class _Cone:

    def __init__(self, vec, psd_method='complex'):
        self.vec = vec
        self.method = psd_method

    def project(self, v, dual=False):
        out = np.empty_like(v)
        for k in range(len(self.vec.sizes)):
            sl = self.vec.block_slice(k)
            H = self.vec.unpack_block(v[sl], k)
            out[sl] = self.vec.pack_block(project_psd(H, self.method), k)
        f0 = self.vec.free_offset
        # free cone is self-dual only in the primal sense: dual cone is {0}
        out[f0:] = 0.0 if dual else v[f0:]
        return out


def solve(problem, tol=1e-7, max_iter=50000, over_relaxation=1.6, rho=1.0,
          adapt_every=50, check_every=10, psd_method='complex', callback=None):
    """Solve a :class:`ConicProblem`.

    Returns a :class:`ConicSolution` with ``status`` ``'optimal'``,
    ``'max_iter'`` (last iterate) or ``'infeasible-suspected'`` (residuals
    diverging).
    """
    t0 = time.perf_counter()
    A, b, c = problem.A, problem.b, problem.c
    proj_aff = _AffineProjector(A, b)
    cone = _Cone(problem.vec, psd_method)
    n = problem.vec.dim
    alpha = float(over_relaxation)
    nb = max(1.0, np.linalg.norm(b))
    nc = max(1.0, np.linalg.norm(c))

    z = np.zeros(n)
    u = np.zeros(n)
    status = 'max_iter'
    kkt = None
    it = 0
    for it in range(1, max_iter + 1):
        x = proj_aff(z - u - c / rho)
        xh = alpha * x + (1 - alpha) * z
        z_old = z
        z = cone.project(xh + u)
        u = u + xh - z

        if it % check_every == 0 or it == max_iter:
            kkt = _kkt(problem, proj_aff, cone, z, u, rho, nb, nc)
            if callback is not None:
                callback(it, kkt)
            if max(kkt[0], kkt[1], kkt[2]) <= tol:
                status = 'optimal'
                break
            if not np.all(np.isfinite(kkt[:3])) or kkt[0] > 1e12:
                status = 'infeasible-suspected'
                break
        if adapt_every and it % adapt_every == 0 and kkt is not None:
            # balance the normalized KKT residuals; rho does not enter P_aff
            ratio = max(kkt[0], 1e-300) / max(kkt[1], kkt[2] * 1e-3, 1e-300)
            if ratio > 5.0 or ratio < 0.2:
                step = float(np.clip(np.sqrt(ratio), 0.1, 10.0))
                new_rho = float(np.clip(rho * step, 1e-6, 1e6))
                u *= rho / new_rho
                rho = new_rho
    if kkt is None:
        kkt = _kkt(problem, proj_aff, cone, z, u, rho, nb, nc)
    pres, dres, gap, y, pobj, dobj = kkt
    blocks, free = problem.vec.unpack(z)
    return ConicSolution(blocks, free, z, y, pobj, dobj, pres, dres, gap, it, status,
                         time.perf_counter() - t0)


def _kkt(problem, proj_aff, cone, z, u, rho, nb, nc):
    A, b, c = problem.A, problem.b, problem.c
    pres = np.linalg.norm(A @ z - b) / nb
    S = -rho * u
    y = proj_aff.solve_normal(A @ (c - S))
    Shat = c - proj_aff.AT @ y if y.size else c.copy()
    dres = np.linalg.norm(Shat - cone.project(Shat, dual=True)) / nc
    pobj = float(c @ z)
    dobj = float(b @ y)
    gap = abs(pobj - dobj) / max(1.0, abs(pobj), abs(dobj))
    return pres, dres, gap, y, pobj, dobj
