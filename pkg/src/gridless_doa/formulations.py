"""SDP builders for multi-frequency atomic norm minimization.

Primal problems (trace minimization, no regularization parameter)::

    min Tr(T(u)) + Tr(W)  s.t.  [[T(u), Yt], [Yt^H, W]] >= 0,
                                Y_f = R1^*(Yt_f) for every active f

with ``T(u)`` the irregular Toeplitz matrix on ``U`` (fast form) or the full
``N x N`` Toeplitz matrix with ``R`` in place of ``R1`` (full form, uniform
geometry only). Dual problems::

    max <Q, Y>_R  s.t.  [[P, R1(Q)], [R1(Q)^H, I]] >= 0,
                        sum over U_j - U_i = k of P(i, j) = delta_k

Each is encoded as a single PSD block. ``u`` is not a variable of its own:
equal-offset entries of the upper-left block are tied by equality
constraints and ``u`` is read back by averaging them.

The primal objective equals ``2 sqrt(n_T)`` times the dual optimum, where
``n_T`` is the order of ``T(u)``: rescaling ``(u, W) -> (t u, W / t)``
preserves feasibility, and the Lagrange dual of the dual problem weights
``u_0`` once rather than ``n_T`` times. :func:`verify_duality_gap` compares
the two on that common scale.
"""
from dataclasses import dataclass

import numpy as np

from .conic import ProblemBuilder, solve
from .errors import ConfigurationError, UnsupportedConfigurationError
from .lifting import LiftingPlan, ToeplitzVector, irregular_toep, toep
from .model import MeasurementTensor, SourceSet, clean_signal, draw_amplitudes

RANK_ABS_TOL = 1e-6
RANK_REL_TOL = 1e-8


def numerical_rank(M):
    """Count eigenvalues above ``max(1e-6, 1e-8 * lambda_max)``."""
    lam = np.linalg.eigvalsh((M + M.conj().T) / 2)
    thr = max(RANK_ABS_TOL, RANK_REL_TOL * max(lam[-1], 0.0))
    return int(np.sum(lam > thr))


def _tensor(Y, plan):
    data = Y.data if isinstance(Y, MeasurementTensor) else np.asarray(Y, dtype=complex)
    g = plan.geometry
    if data.ndim != 3 or data.shape[0] != g.n_m or data.shape[2] != g.n_f:
        raise ConfigurationError('measurement shape %s does not match the plan geometry'
                                 % (data.shape,))
    return data


def _require_uniform(plan):
    if not plan.geometry.is_uniform:
        raise UnsupportedConfigurationError(
            'the full-dimension formulation needs a ULA with frequencies 1..N_F')


def _offset_groups(gamma):
    """Upper-triangle index pairs grouped by ``gamma_j - gamma_i``."""
    groups = {}
    n = len(gamma)
    for i in range(n):
        for j in range(i, n):
            groups.setdefault(int(gamma[j] - gamma[i]), []).append((i, j))
    return groups


def _primal(data, plan, full):
    g = plan.geometry
    n_l = data.shape[1]
    if full:
        _require_uniform(plan)
        gamma, rows = np.arange(plan.N), plan.rows_R
    else:
        gamma, rows = plan.U, plan.rows_R1
    n_t = len(gamma)
    size = n_t + n_l * g.n_f
    pb = ProblemBuilder([size])
    pb.add_objective_block(0, np.eye(size))
    for k, pairs in sorted(_offset_groups(gamma).items()):
        ri, rj = pairs[0]
        for i, j in pairs[1:]:
            pb.add_complex([(0, i, j, 1.0), (0, ri, rj, -1.0)], 0.0, 'toeplitz[%d]' % k)
    for fi, f in enumerate(g.freq_indices):
        for m, r in enumerate(rows[f]):
            for l in range(n_l):
                col = n_t + fi * n_l + l
                pb.add_complex([(0, int(r), col, 1.0)], data[m, l, fi], 'data[%d,%d,%d]' % (m, l, f))
    return pb.build(kind='full_primal' if full else 'fast_primal', n_t=n_t, n_l=n_l)


def build_fast_primal(Y, plan):
    """Fast primal SDP on the product set ``U`` (any sensor/frequency subsets)."""
    return _primal(_tensor(Y, plan), plan, full=False)


def build_full_primal(Y, plan):
    """Full-dimension primal SDP with an ``N x N`` Toeplitz block (uniform only)."""
    return _primal(_tensor(Y, plan), plan, full=True)


def _dual(data, plan, full):
    g = plan.geometry
    n_l = data.shape[1]
    if full:
        _require_uniform(plan)
        gamma, rows = np.arange(plan.N), plan.rows_R
    else:
        gamma, rows = plan.U, plan.rows_R1
    n_t = len(gamma)
    n_c = n_l * g.n_f
    size = n_t + n_c
    pb = ProblemBuilder([size])
    for i in range(n_c):
        for j in range(i, n_c):
            pb.add_complex([(0, n_t + i, n_t + j, 1.0)], float(i == j), 'identity')
    for fi, f in enumerate(g.freq_indices):
        lifted = {int(r): m for m, r in enumerate(rows[f])}
        for r in range(n_t):
            for l in range(n_l):
                col = n_t + fi * n_l + l
                if r in lifted:
                    pb.add_objective_entry(0, r, col, -data[lifted[r], l, fi])
                else:
                    pb.add_complex([(0, r, col, 1.0)], 0.0, 'pad')
    for k, pairs in sorted(_offset_groups(gamma).items()):
        pb.add_complex([(0, i, j, 1.0) for i, j in pairs], float(k == 0), 'trace[%d]' % k)
    return pb.build(kind='full_dual' if full else 'fast_dual', n_t=n_t, n_l=n_l)


def build_dual_fast(Y, plan):
    """Dual (certificate) SDP on ``U``; maximization encoded as ``min -<Q, Y>``."""
    return _dual(_tensor(Y, plan), plan, full=False)


def build_dual_uniform(Y, plan):
    """Dual SDP with an ``N x N`` block for the uniform geometry."""
    return _dual(_tensor(Y, plan), plan, full=True)


# -- solving and read-out -----------------------------------------------------

@dataclass
class PrimalSdpResult:
    u: ToeplitzVector
    T: np.ndarray
    W: np.ndarray
    Y_tilde: np.ndarray
    objective: float
    solution: object
    full: bool

    @property
    def status(self):
        return self.solution.status


@dataclass
class DualCertificate:
    Q: np.ndarray
    P0: np.ndarray
    objective: float
    solution: object
    full: bool


def _average_offsets(T, gamma, N):
    u = np.zeros(N, dtype=complex)
    for k, pairs in _offset_groups(gamma).items():
        i, j = np.array(pairs).T
        u[k] = T[i, j].mean()
    u[0] = u[0].real
    return u


def _scaled(data, scale):
    s = np.linalg.norm(data)
    if scale and s > 0:
        return data / s, s
    return data, 1.0


def solve_primal(Y, plan, full=False, scale=True, **solver_opts):
    """Build and solve a primal SDP, returning ``u`` and the lifted blocks.

    The data are normalized to unit HS norm before solving (the problem is
    positively homogeneous), and the outputs are scaled back.
    """
    data, s = _scaled(_tensor(Y, plan), scale)
    prob = build_full_primal(data, plan) if full else build_fast_primal(data, plan)
    sol = solve(prob, **solver_opts)
    n_t = prob.meta['n_t']
    X = sol.blocks[0] * s
    T = X[:n_t, :n_t]
    gamma = np.arange(plan.N) if full else plan.U
    u = _average_offsets(T, gamma, plan.N)
    mask = np.ones(plan.N, dtype=bool) if full else plan.mask.copy()
    return PrimalSdpResult(ToeplitzVector(u, mask), T, X[n_t:, n_t:], X[:n_t, n_t:],
                           sol.objective * s, sol, full)


def solve_dual(Y, plan, full=False, scale=True, **solver_opts):
    """Build and solve a dual SDP; returns the certificate with value ``<Q, Y>``."""
    data, s = _scaled(_tensor(Y, plan), scale)
    prob = build_dual_uniform(data, plan) if full else build_dual_fast(data, plan)
    sol = solve(prob, **solver_opts)
    n_t = prob.meta['n_t']
    n_l = prob.meta['n_l']
    rows = plan.rows_R if full else plan.rows_R1
    X = sol.blocks[0]
    g = plan.geometry
    Q = np.empty((g.n_m, n_l, g.n_f), dtype=complex)
    for fi, f in enumerate(g.freq_indices):
        Q[:, :, fi] = X[rows[f], n_t + fi * n_l:n_t + (fi + 1) * n_l]
    return DualCertificate(Q, X[:n_t, :n_t], -sol.objective * s, sol, full)


def primal_feasibility(result, Y, plan):
    """Constraint-recovery error and smallest eigenvalue of the lifted block."""
    data = _tensor(Y, plan)
    n_l = data.shape[1]
    rows = plan.rows_R if result.full else plan.rows_R1
    err = 0.0
    for fi, f in enumerate(plan.geometry.freq_indices):
        Yt_f = result.Y_tilde[:, fi * n_l:(fi + 1) * n_l]
        err = max(err, np.max(np.abs(Yt_f[rows[f]] - data[:, :, fi])))
    M = np.block([[result.T, result.Y_tilde], [result.Y_tilde.conj().T, result.W]])
    return err, float(np.linalg.eigvalsh((M + M.conj().T) / 2)[0])


def primal_scale(plan, full=False):
    """Factor ``2 sqrt(n_T)`` relating the primal optimum to the dual optimum."""
    return 2.0 * np.sqrt(plan.N if full else plan.n_u)


def verify_duality_gap(Y, plan, full=False, tol=1e-8, **solver_opts):
    """Relative gap between matched primal and dual optima."""
    p = solve_primal(Y, plan, full=full, tol=tol, **solver_opts)
    d = solve_dual(Y, plan, full=full, tol=tol, **solver_opts)
    pv = p.objective / primal_scale(plan, full)
    return abs(pv - d.objective) / max(1.0, abs(pv))


# -- dual polynomial ----------------------------------------------------------

def dual_polynomial(Q, w, plan, method='direct'):
    """``Psi(Q, w)`` (``N_f x N_l``), its Frobenius norm and ``R(w) = 1 - ||Psi||^2``.

    ``method='direct'`` uses the per-frequency manifolds, ``'lifted'`` the
    lifted form ``[R(Q_f)^H z]`` with ``z = [z^0 ... z^(N-1)]``.
    """
    Q = np.asarray(Q, dtype=complex)
    g = plan.geometry
    zc = np.exp(-2j * np.pi * float(w))
    if method == 'direct':
        m = np.asarray(g.sensor_indices)
        rows = [Q[:, :, fi].conj().T @ zc ** (f * m) for fi, f in enumerate(g.freq_indices)]
    elif method == 'lifted':
        z = zc ** np.arange(plan.N)
        rows = [plan.lift_R(Q[:, :, fi], f).conj().T @ z for fi, f in enumerate(g.freq_indices)]
    else:
        raise ValueError('unknown method %r' % method)
    psi = np.array(rows)
    fro = float(np.linalg.norm(psi))
    return psi, fro, 1.0 - fro ** 2


# -- rank / atomic l0 ------------------------------------------------------------

def atom_data(sources, plan, amplitude='deterministic', rng=None):
    """Noise-free SMV measurement ``(N_m, 1, N_f)`` built directly from atoms."""
    if sources.amplitudes is None:
        amps = draw_amplitudes(sources.count, plan.geometry.n_f, 1, amplitude, rng)
        sources = SourceSet(sources.thetas_deg, sources.powers, amps)
    return clean_signal(plan.geometry, sources, 1)


def atomic_l0_ranktest(sources, plan, tol=1e-8, **solver_opts):
    """Solve the full primal on noise-free SMV data; return ``(rank(Toep(u)), K)``."""
    _require_uniform(plan)
    data = atom_data(sources, plan)
    if not np.any(data):
        return 0, 0
    res = solve_primal(data, plan, full=True, tol=tol, **solver_opts)
    return numerical_rank(toep(res.u)), sources.count


def irregular_block(result, plan):
    """``T(u)`` rebuilt from the averaged ``u`` of a primal result."""
    return toep(result.u) if result.full else irregular_toep(result.u, plan)


__all__ = [
    'LiftingPlan', 'PrimalSdpResult', 'DualCertificate', 'build_fast_primal',
    'build_full_primal', 'build_dual_fast', 'build_dual_uniform', 'solve_primal',
    'solve_dual', 'verify_duality_gap', 'dual_polynomial', 'atomic_l0_ranktest',
    'numerical_rank', 'primal_feasibility', 'primal_scale', 'irregular_block',
]
