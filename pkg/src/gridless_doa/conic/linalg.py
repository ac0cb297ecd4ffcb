"""Hermitian eigensolvers, real embedding and PSD-cone projection."""
import numpy as np

from ..errors import DomainError, NumericError


def _check_finite(M):
    if not np.all(np.isfinite(M)):
        raise NumericError('matrix has non-finite entries')


def hermitian_eig(M, method='lapack'):
    """Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.

    The input is symmetrized first; asymmetry above ``1e-10 * ||M||`` is
    rejected. ``method='jacobi'`` runs the cyclic Jacobi solver on the real
    embedding instead of LAPACK.
    """
    M = np.asarray(M)
    _check_finite(M)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise DomainError('expected a square matrix')
    scale = np.linalg.norm(M)
    if np.linalg.norm(M - M.conj().T) > 1e-10 * max(scale, 1e-300):
        raise DomainError('matrix is not Hermitian')
    H = (M + M.conj().T) / 2
    if method == 'lapack':
        return np.linalg.eigh(H)
    if method == 'jacobi':
        return _jacobi_hermitian(H)
    raise ValueError('unknown method %r' % method)


def jacobi_eigh(S, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi for a real symmetric matrix.

    Sweeps until the off-diagonal Frobenius norm drops below
    ``tol * ||S||_F``. Returns ascending eigenvalues and orthonormal
    eigenvectors.
    """
    A = np.array(S, dtype=float)
    n = A.shape[0]
    V = np.eye(n)
    target = tol * max(np.linalg.norm(A), 1e-300)
    for _ in range(max_sweeps):
        off = np.sqrt(2.0 * np.sum(np.triu(A, 1) ** 2))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    else:
        raise NumericError('Jacobi did not converge in %d sweeps' % max_sweeps)
    lam = np.diag(A).copy()
    order = np.argsort(lam, kind='stable')
    return lam[order], V[:, order]


def _jacobi_hermitian(H):
    # every eigenvalue of the embedding appears twice; keep one copy per pair
    n = H.shape[0]
    lam, V = jacobi_eigh(real_embed(H))
    vecs = V[:n] + 1j * V[n:]
    out_l, out_v = [], []
    for k in range(2 * n):
        v = vecs[:, k]
        for u in out_v:
            v = v - u * (u.conj() @ v)
        nv = np.linalg.norm(v)
        if nv > 1e-6:
            v = v / nv
            out_l.append(np.real(v.conj() @ H @ v))
            out_v.append(v)
        if len(out_v) == n:
            break
    return np.array(out_l), np.column_stack(out_v)


def real_embed(H):
    """``A + jB`` -> ``[[A, -B], [B, A]]``."""
    H = np.asarray(H, dtype=complex)
    A, B = H.real, H.imag
    return np.block([[A, -B], [B, A]])


def real_extract(S):
    """Inverse of :func:`real_embed`; averages the duplicated blocks."""
    S = np.asarray(S, dtype=float)
    if S.ndim != 2 or S.shape[0] != S.shape[1] or S.shape[0] % 2:
        raise DomainError('expected a square matrix of even order')
    n = S.shape[0] // 2
    A = (S[:n, :n] + S[n:, n:]) / 2
    B = (S[n:, :n] - S[:n, n:]) / 2
    return A + 1j * B


def project_psd(H, method='complex'):
    """Nearest PSD matrix in Frobenius norm (negative eigenvalues clipped)."""
    if method == 'real':
        S = real_embed(H)
        lam, V = np.linalg.eigh((S + S.T) / 2)
        keep = lam > 0
        P = (V[:, keep] * lam[keep]) @ V[:, keep].T
        return real_extract(P)
    H = (H + H.conj().T) / 2
    lam, V = np.linalg.eigh(H)
    keep = lam > 0
    Vp = V[:, keep]
    return (Vp * lam[keep]) @ Vp.conj().T
