"""DOA read-out from (irregular) Toeplitz matrices.

For ``T = W(gamma, z) D W(gamma, z)^H`` with unit-modulus nodes the noise
subspace ``U_N`` is orthogonal to every ``w(gamma, z_k) = [z_k^gamma_i]``,
so the null spectrum ``D(z) = ||U_N^H w(gamma, z)||^2`` vanishes at the
nodes. Minima are located on a dense grid over the circle (evaluated exactly
by one FFT of the lag sums of ``G = U_N U_N^H``) and polished by
golden-section search.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import nnls

from .errors import DegenerateSpectrumError, DomainError, SubspaceDimensionError
from .formulations import numerical_rank
from .lifting import ToeplitzVector, irregular_toep, toep

_INVPHI = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass
class EigenSplit:
    U_S: np.ndarray
    lam_S: np.ndarray
    U_N: np.ndarray
    lam_N: np.ndarray

    @property
    def G(self):
        return self.U_N @ self.U_N.conj().T


@dataclass
class DoaEstimate:
    """Recovered sources, sorted by angle.

    ``null_spectrum_minima`` holds ``D(z)`` at each node; smaller is more
    trustworthy.
    """

    z_hat: np.ndarray
    w_hat: np.ndarray
    thetas_deg: np.ndarray
    powers: np.ndarray
    null_spectrum_minima: np.ndarray

    @property
    def K(self):
        return len(self.thetas_deg)

    def strongest(self, k):
        """Keep the ``k`` nodes with the smallest null-spectrum values."""
        keep = np.sort(np.argsort(self.null_spectrum_minima, kind='stable')[:k])
        return DoaEstimate(self.z_hat[keep], self.w_hat[keep], self.thetas_deg[keep],
                           self.powers[keep], self.null_spectrum_minima[keep])


def eigen_split(T, K):
    """Split ``T`` into its ``K`` dominant eigenvectors and the rest."""
    T = np.asarray(T)
    n = T.shape[0]
    if not 1 <= K <= n - 1:
        raise SubspaceDimensionError(
            'need 1 <= K <= %d for a non-empty noise subspace, got K=%d' % (n - 1, K))
    lam, V = np.linalg.eigh((T + T.conj().T) / 2)
    lam, V = lam[::-1], V[:, ::-1]
    return EigenSplit(V[:, :K], lam[:K], V[:, K:], lam[K:])


def steering(gamma, z):
    """``w(gamma, z)`` for every ``z`` (columns)."""
    return np.power.outer(np.asarray(z, dtype=complex), np.asarray(gamma)).T


def null_spectrum(split, gamma, z):
    """``||U_N^H w(gamma, z)||^2`` with ``z`` projected onto the unit circle."""
    z = np.asarray(z, dtype=complex)
    z = np.exp(1j * np.angle(z))
    proj = split.U_N.conj().T @ steering(gamma, np.atleast_1d(z))
    out = np.sum(np.abs(proj) ** 2, axis=0)
    return out.reshape(z.shape) if z.ndim else out[0]


def _spectrum_on_grid(G, gamma, n_grid):
    # D(phi) = sum_d c_d e^{j phi d}, c_d = sum_{gamma_j - gamma_i = d} G_ij
    gamma = np.asarray(gamma)
    lags = (gamma[None, :] - gamma[:, None]).ravel()
    coef = np.zeros(n_grid, dtype=complex)
    # phi_g = -pi + 2 pi g / n_grid contributes (-1)^d
    np.add.at(coef, lags % n_grid, G.ravel() * np.where(lags % 2, -1.0, 1.0))
    D = np.real(np.fft.ifft(coef)) * n_grid
    return np.maximum(D, 0.0)


def _phi_spectrum(U_N, gamma):
    UNh = U_N.conj().T
    g = np.asarray(gamma, dtype=float)

    def f(phi):
        return float(np.sum(np.abs(UNh @ np.exp(1j * phi * g)) ** 2))
    return f


def _golden(f, a, b, iters):
    c = b - _INVPHI * (b - a)
    d = a + _INVPHI * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(iters):
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - _INVPHI * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + _INVPHI * (b - a)
            fd = f(d)
    return (c, fc) if fc <= fd else (d, fd)


def local_minima(T, gamma, K, grid_points=2 ** 16, refine_iters=30):
    """All refined local minima of the null spectrum as ``(phi, value)`` sorted by value."""
    split = eigen_split(T, K)
    D = _spectrum_on_grid(split.G, gamma, grid_points)
    step = 2 * np.pi / grid_points
    left, right = np.roll(D, 1), np.roll(D, -1)
    idx = np.flatnonzero((D <= left) & (D < right))
    f = _phi_spectrum(split.U_N, gamma)
    found = []
    for g in idx:
        phi0 = -np.pi + g * step
        phi, val = _golden(f, phi0 - step, phi0 + step, refine_iters)
        phi = (phi + np.pi) % (2 * np.pi) - np.pi
        found.append((phi, val))
    found.sort(key=lambda t: (t[1], t[0]))
    return found, split


def extract_doas(T, gamma, K, grid_points=2 ** 16, refine_iters=30):
    """Estimate ``K`` DOAs from the null spectrum of ``T``.

    Raises :class:`DegenerateSpectrumError` (with the minima found so far)
    when fewer than ``K`` local minima exist.
    """
    found, _ = local_minima(T, gamma, K, grid_points, refine_iters)
    if len(found) < K:
        raise DegenerateSpectrumError(
            'null spectrum has %d local minima, %d requested' % (len(found), K), found)
    phi = np.array([p for p, _ in found[:K]])
    vals = np.array([v for _, v in found[:K]])
    return _estimate(T, gamma, phi, vals)


def _estimate(T, gamma, phi, vals):
    z = np.exp(1j * phi)
    w = np.clip(-phi / (2 * np.pi), -0.5, 0.5)
    theta = np.rad2deg(np.arccos(np.clip(-phi / np.pi, -1.0, 1.0)))
    order = np.argsort(theta, kind='stable')
    z, w, theta, vals = z[order], w[order], theta[order], vals[order]
    offsets, u = _offset_means(T, gamma)
    powers = fit_powers(z, offsets, u)
    return DoaEstimate(z, w, theta, powers, vals)


def _offset_means(T, gamma):
    gamma = np.asarray(gamma)
    d = gamma[None, :] - gamma[:, None]
    iu = np.triu_indices(len(gamma))
    lags, vals = d[iu], T[iu]
    offsets = np.unique(lags)
    means = np.array([vals[lags == k].mean() for k in offsets])
    return offsets, means


def fit_powers(z, offsets, u):
    """Non-negative ``d`` minimizing ``||u_k - sum_i d_i z_i^-k||`` over ``offsets``."""
    z = np.asarray(z, dtype=complex)
    if z.size == 0:
        return np.zeros(0)
    W = np.exp(-1j * np.outer(np.asarray(offsets, dtype=float), np.angle(z)))
    A = np.vstack([W.real, W.imag])
    rhs = np.concatenate([np.real(u), np.imag(u)])
    d, _ = nnls(A, rhs)
    return d


def _check_toeplitz_psd(Tm):
    Tm = np.asarray(Tm, dtype=complex)
    n = Tm.shape[0]
    scale = max(np.linalg.norm(Tm), 1.0)
    if np.linalg.norm(Tm - Tm.conj().T) > 1e-10 * scale:
        raise DomainError('matrix is not Hermitian')
    if np.linalg.norm(Tm - toep(Tm[0])) > 1e-8 * scale:
        raise DomainError('matrix is not Toeplitz')
    if np.linalg.eigvalsh((Tm + Tm.conj().T) / 2)[0] < -1e-8 * scale:
        raise DomainError('matrix is not positive semidefinite')
    return Tm, n


def vandermonde_decompose(T_reg, grid_points=2 ** 16, refine_iters=30):
    """Vandermonde decomposition ``T = V(z) diag(d) V(z)^H`` of a PSD Toeplitz matrix.

    Returns ``(z, d, K)`` with ``K`` the numerical rank.
    """
    Tm, n = _check_toeplitz_psd(T_reg)
    K = numerical_rank(Tm)
    if K == 0:
        return np.zeros(0, dtype=complex), np.zeros(0), 0
    if K >= n:
        raise SubspaceDimensionError('full-rank Toeplitz matrix has no Vandermonde '
                                     'decomposition with fewer than %d nodes' % n)
    est = extract_doas(Tm, np.arange(n), K, grid_points, refine_iters)
    d = fit_powers(est.z_hat, np.arange(n), Tm[0])
    return est.z_hat, d, K


@dataclass
class IvdResult:
    W: np.ndarray
    D: np.ndarray
    residual: float
    estimate: DoaEstimate


def ivd_reconstruct(u, plan, K, grid_points=2 ** 16, refine_iters=30):
    """Irregular Vandermonde decomposition of ``T(u)`` on ``gamma = U``.

    ``residual`` is ``||T(u) - W D W^H||_F / ||T(u)||_F``; powers are fitted
    on the offsets that actually occur in ``T(u)``.
    """
    if not isinstance(u, ToeplitzVector):
        u = ToeplitzVector(u, plan.mask)
    Tu = irregular_toep(u, plan)
    if numerical_rank(Tu) >= plan.n_u:
        raise SubspaceDimensionError('T(u) has full rank; no IVD with K < N_u nodes')
    est = extract_doas(Tu, plan.U, K, grid_points, refine_iters)
    offsets = np.flatnonzero(plan.mask)
    d = fit_powers(est.z_hat, offsets, u.u[offsets])
    est.powers = d
    W = steering(plan.U, est.z_hat)
    R = (W * d) @ W.conj().T
    res = np.linalg.norm(Tu - R) / max(np.linalg.norm(Tu), 1e-300)
    return IvdResult(W, np.diag(d), float(res), est)
