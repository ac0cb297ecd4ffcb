"""Lifting maps between per-frequency data and the space-frequency axis.

Row ``m`` of a frequency-``f`` slice carries the exponent ``f*m``. The map
``R`` places it at row ``f*m`` of an ``N``-row matrix; ``R1`` places it at
the position of ``f*m`` inside the sorted product set ``U`` and so omits the
products that never occur. Both are zero-padding embeddings whose adjoints
are row selections.
"""
from dataclasses import dataclass

import numpy as np
from scipy.linalg import toeplitz

from .errors import DimensionError


class LiftingPlan:
    """Row tables for ``R``/``R1`` and the irregular-Toeplitz index pattern.

    Immutable after construction; safe to share between threads.
    """

    def __init__(self, geometry):
        self.geometry = geometry
        self.N = geometry.N
        self.U = geometry.U
        self.U.setflags(write=False)
        self.n_u = len(self.U)
        pos = {int(u): r for r, u in enumerate(self.U)}
        m = np.asarray(geometry.sensor_indices)
        self.rows_R = {f: f * m for f in geometry.freq_indices}
        self.rows_R1 = {f: np.array([pos[int(f * mm)] for mm in m])
                        for f in geometry.freq_indices}
        diffs = self.U[None, :] - self.U[:, None]
        self.offsets = diffs
        mask = np.zeros(self.N, dtype=bool)
        mask[diffs[diffs >= 0]] = True
        self.mask = mask
        for t in (self.rows_R, self.rows_R1):
            for rows in t.values():
                rows.setflags(write=False)
        self.offsets.setflags(write=False)
        self.mask.setflags(write=False)

    @property
    def free_offsets(self):
        """Offsets of ``u`` that never appear in ``T(u)``."""
        return np.flatnonzero(~self.mask)

    def _check(self, Q, rows, f):
        self.geometry.freq_position(f)
        Q = np.asarray(Q)
        if Q.ndim != 2 or Q.shape[0] != rows:
            raise DimensionError('expected %d rows, got shape %s' % (rows, Q.shape))
        return Q

    def lift_R(self, Q, f):
        Q = self._check(Q, self.geometry.n_m, f)
        out = np.zeros((self.N, Q.shape[1]), dtype=np.result_type(Q, complex))
        out[self.rows_R[f]] = Q
        return out

    def adjoint_R(self, Yt, f):
        Yt = self._check(Yt, self.N, f)
        return Yt[self.rows_R[f]].copy()

    def lift_R1(self, Q, f):
        Q = self._check(Q, self.geometry.n_m, f)
        out = np.zeros((self.n_u, Q.shape[1]), dtype=np.result_type(Q, complex))
        out[self.rows_R1[f]] = Q
        return out

    def adjoint_R1(self, Yt, f):
        Yt = self._check(Yt, self.n_u, f)
        return Yt[self.rows_R1[f]].copy()

    def lift_all(self, tensor, full=False):
        """Lift an ``(N_m, N_l, N_f)`` tensor to ``[R1(Q_1) ... R1(Q_Nf)]``.

        With ``full=True`` the map ``R`` is used instead. Frequencies are
        concatenated column-block-wise in ascending order.
        """
        tensor = np.asarray(tensor)
        lift = self.lift_R if full else self.lift_R1
        return np.hstack([lift(tensor[:, :, i], f)
                          for i, f in enumerate(self.geometry.freq_indices)])


def lift_R(Q, f, plan):
    return plan.lift_R(Q, f)


def adjoint_R(Yt, f, plan):
    return plan.adjoint_R(Yt, f)


def lift_R1(Q, f, plan):
    return plan.lift_R1(Q, f)


def adjoint_R1(Yt, f, plan):
    return plan.adjoint_R1(Yt, f)


@dataclass
class ToeplitzVector:
    """Generator ``u`` of ``Toep(u)`` / ``T(u)`` and its used-offset mask."""

    u: np.ndarray
    mask: np.ndarray = None

    def __post_init__(self):
        self.u = np.asarray(self.u, dtype=complex).copy()
        self.u[0] = self.u[0].real
        if self.mask is None:
            self.mask = np.ones(self.u.size, dtype=bool)
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != self.u.shape:
            raise DimensionError('mask and u differ in length')

    @property
    def free(self):
        return np.flatnonzero(~self.mask)


def _as_vector(u):
    return u.u if isinstance(u, ToeplitzVector) else np.asarray(u, dtype=complex)


def toep(u):
    """Hermitian Toeplitz matrix with first row ``u``."""
    u = _as_vector(u).copy()
    u[0] = u[0].real
    return toeplitz(np.conj(u), u)


def irregular_toep(u, plan):
    """``T(u)`` with entry ``(i, j) = u[U_j - U_i]`` (conjugated below the diagonal)."""
    u = _as_vector(u)
    if u.size != plan.N:
        raise DimensionError('u has length %d, plan expects %d' % (u.size, plan.N))
    d = plan.offsets
    vals = u[np.abs(d)]
    vals = np.where(d >= 0, vals, np.conj(vals))
    np.fill_diagonal(vals, u[0].real)
    return vals


def select_PU(M, plan):
    """Restrict an ``N x N`` matrix to rows and columns indexed by ``U``."""
    M = np.asarray(M)
    if M.shape != (plan.N, plan.N):
        raise DimensionError('expected %dx%d matrix' % (plan.N, plan.N))
    return M[np.ix_(plan.U, plan.U)]


def toeplitz_from_offsets(gamma, nodes, powers):
    """Forward IVD ``W(gamma, z) diag(d) W(gamma, z)^H``."""
    W = np.power.outer(np.asarray(nodes, dtype=complex), np.asarray(gamma)).T
    return (W * np.asarray(powers)) @ W.conj().T


def generator_from_nodes(N, nodes, powers):
    """``u_i = sum_k d_k z_k^{-i}`` for ``i = 0..N-1``."""
    i = np.arange(N)
    return (np.power.outer(np.asarray(nodes, dtype=complex), -i).T
            @ np.asarray(powers, dtype=float))
