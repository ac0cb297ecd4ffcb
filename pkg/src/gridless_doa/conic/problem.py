"""Standard-form conic problems over Hermitian PSD blocks.

A problem is ``minimize <C, X> s.t. <A_i, X> = b_i, X in K`` where ``K`` is
a product of Hermitian PSD blocks and an optional free (unconstrained) real
vector. Everything is stored in an isometric real vectorization: a Hermitian
block contributes its real diagonal followed by ``sqrt(2) Re`` and
``sqrt(2) Im`` of its strict upper triangle, so that
``<H1, H2>_R = Re tr(H1^H H2) = vec(H1) . vec(H2)``.

Text dump format (one record per line, ``#`` starts a comment)::

    blocks n_1 n_2 ...
    free n_free
    rows m
    c <col> <value>                 (repeated, sparse)
    a <row> <col> <value>           (repeated, sparse)
    b <row> <value>                 (repeated, sparse)
    label <row> <text>              (optional)

Column indices refer to the real vectorization described above, blocks in
order, free scalars last.
"""
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from ..errors import ProblemConstructionError

_SQ2 = np.sqrt(2.0)


class HermitianVectorizer:
    """Maps a list of Hermitian blocks (plus free scalars) to a real vector."""

    def __init__(self, sizes, n_free=0):
        self.sizes = tuple(int(s) for s in sizes)
        self.n_free = int(n_free)
        self.offsets = []
        self._triu = []
        pos = 0
        for n in self.sizes:
            self.offsets.append(pos)
            self._triu.append(np.triu_indices(n, 1))
            pos += n * n
        self.free_offset = pos
        self.dim = pos + self.n_free

    def block_slice(self, k):
        return slice(self.offsets[k], self.offsets[k] + self.sizes[k] ** 2)

    def entry(self, k, i, j):
        """Columns and complex weights: ``X_ij = sum(w * x[col])``."""
        n = self.sizes[k]
        if not (0 <= i < n and 0 <= j < n):
            raise ProblemConstructionError('entry (%d, %d) outside block %d' % (i, j, k))
        base = self.offsets[k]
        if i == j:
            return [(base + i, 1.0 + 0j)]
        p, q = (i, j) if i < j else (j, i)
        # position of (p, q) in row-major strict upper triangle
        t = p * n - p * (p + 1) // 2 + (q - p - 1)
        m = n * (n - 1) // 2
        sign = 1.0 if i < j else -1.0
        return [(base + n + t, 1 / _SQ2 + 0j), (base + n + m + t, sign * 1j / _SQ2)]

    def pack_block(self, H, k):
        iu = self._triu[k]
        up = H[iu]
        return np.concatenate([np.real(np.diag(H)), _SQ2 * up.real, _SQ2 * up.imag])

    def unpack_block(self, v, k):
        n = self.sizes[k]
        m = n * (n - 1) // 2
        iu = self._triu[k]
        H = np.zeros((n, n), dtype=complex)
        H[iu] = (v[n:n + m] + 1j * v[n + m:n + 2 * m]) / _SQ2
        H = H + H.conj().T
        H[np.diag_indices(n)] = v[:n]
        return H

    def pack(self, blocks, free=None):
        parts = [self.pack_block(np.asarray(H), k) for k, H in enumerate(blocks)]
        if self.n_free:
            parts.append(np.zeros(self.n_free) if free is None else np.asarray(free, float))
        return np.concatenate(parts) if parts else np.zeros(0)

    def unpack(self, x):
        blocks = [self.unpack_block(x[self.block_slice(k)], k) for k in range(len(self.sizes))]
        return blocks, np.array(x[self.free_offset:], dtype=float)


@dataclass
class ConicProblem:
    """Vectorized standard-form problem; see the module docstring."""

    sizes: tuple
    n_free: int
    c: np.ndarray
    A: sp.csr_matrix
    b: np.ndarray
    labels: list = field(default_factory=list)
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.sizes = tuple(int(s) for s in self.sizes)
        self.vec = HermitianVectorizer(self.sizes, self.n_free)
        self.c = np.asarray(self.c, dtype=float)
        self.A = sp.csr_matrix(self.A, dtype=float)
        self.b = np.asarray(self.b, dtype=float)
        if self.c.shape != (self.vec.dim,) or self.A.shape != (self.b.size, self.vec.dim):
            raise ProblemConstructionError('inconsistent problem dimensions')
        if not (np.all(np.isfinite(self.c)) and np.all(np.isfinite(self.b))
                and np.all(np.isfinite(self.A.data))):
            raise ProblemConstructionError('non-finite problem data')

    @property
    def n_constraints(self):
        return self.b.size

    def objective_blocks(self):
        return self.vec.unpack(self.c)

    def constraint_matrix(self, row):
        """Hermitian blocks ``A_i`` (and free coefficients) of constraint ``row``."""
        return self.vec.unpack(self.A.getrow(row).toarray().ravel())

    def count(self, prefix):
        """Number of real constraint rows whose label starts with ``prefix``."""
        return sum(1 for s in self.labels if s.startswith(prefix))

    def dump(self, path):
        with open(path, 'w') as fh:
            fh.write('# conic problem: min <c,x> s.t. Ax = b, x in K\n')
            fh.write('blocks %s\n' % ' '.join(str(s) for s in self.sizes))
            fh.write('free %d\nrows %d\n' % (self.n_free, self.n_constraints))
            for j in np.flatnonzero(self.c):
                fh.write('c %d %.17g\n' % (j, self.c[j]))
            A = self.A.tocoo()
            for i, j, v in zip(A.row, A.col, A.data):
                fh.write('a %d %d %.17g\n' % (i, j, v))
            for i in np.flatnonzero(self.b):
                fh.write('b %d %.17g\n' % (i, self.b[i]))
            for i, s in enumerate(self.labels):
                fh.write('label %d %s\n' % (i, s))

    @classmethod
    def load(cls, path):
        sizes, n_free, m = (), 0, None
        cs, rows, cols, vals, bs, labels = {}, [], [], [], {}, {}
        with open(path) as fh:
            for line in fh:
                line = line.strip()
                if not line or line.startswith('#'):
                    continue
                key, _, rest = line.partition(' ')
                if key == 'blocks':
                    sizes = tuple(int(t) for t in rest.split())
                elif key == 'free':
                    n_free = int(rest)
                elif key == 'rows':
                    m = int(rest)
                elif key == 'c':
                    j, v = rest.split()
                    cs[int(j)] = float(v)
                elif key == 'a':
                    i, j, v = rest.split()
                    rows.append(int(i))
                    cols.append(int(j))
                    vals.append(float(v))
                elif key == 'b':
                    i, v = rest.split()
                    bs[int(i)] = float(v)
                elif key == 'label':
                    i, _, text = rest.partition(' ')
                    labels[int(i)] = text
                else:
                    raise ProblemConstructionError('unknown record %r' % key)
        if m is None:
            raise ProblemConstructionError('missing "rows" record')
        vec = HermitianVectorizer(sizes, n_free)
        c = np.zeros(vec.dim)
        for j, v in cs.items():
            c[j] = v
        b = np.zeros(m)
        for i, v in bs.items():
            b[i] = v
        A = sp.csr_matrix((vals, (rows, cols)), shape=(m, vec.dim))
        return cls(sizes, n_free, c, A, b, [labels.get(i, '') for i in range(m)])


class ProblemBuilder:
    """Incrementally assemble a :class:`ConicProblem`.

    Constraints are written in terms of complex block entries; each complex
    equation yields a real and an imaginary row, and rows that vanish
    identically are dropped.
    """

    def __init__(self, sizes, n_free=0):
        self.vec = HermitianVectorizer(sizes, n_free)
        self.c = np.zeros(self.vec.dim)
        self._rows, self._cols, self._vals = [], [], []
        self._b = []
        self.labels = []

    def add_objective_block(self, k, C):
        sl = self.vec.block_slice(k)
        self.c[sl] += self.vec.pack_block(np.asarray(C, dtype=complex), k)

    def add_objective_entry(self, k, i, j, coef):
        """Add ``Re(conj(coef) X_ij)`` to the objective (``i != j``)."""
        for col, wgt in self.vec.entry(k, i, j):
            self.c[col] += np.real(np.conj(coef) * wgt)

    def _row(self, coeffs, rhs, label):
        nz = {j: v for j, v in coeffs.items() if abs(v) > 1e-15}
        if not nz:
            if abs(rhs) > 1e-15:
                raise ProblemConstructionError('infeasible empty constraint %s' % label)
            return
        r = len(self._b)
        for j, v in nz.items():
            self._rows.append(r)
            self._cols.append(j)
            self._vals.append(v)
        self._b.append(float(rhs))
        self.labels.append(label)

    def add_complex(self, terms, rhs, label):
        """Constrain ``sum(a * X_ij) == rhs`` for ``terms = [(k, i, j, a), ...]``.

        A term ``('free', idx, None, a)`` adds ``a * s_idx`` for a free scalar
        (real part only).
        """
        re, im = {}, {}
        for k, i, j, a in terms:
            if k == 'free':
                col = self.vec.free_offset + i
                re[col] = re.get(col, 0.0) + np.real(a)
                im[col] = im.get(col, 0.0) + np.imag(a)
                continue
            for col, wgt in self.vec.entry(k, i, j):
                z = a * wgt
                re[col] = re.get(col, 0.0) + z.real
                im[col] = im.get(col, 0.0) + z.imag
        self._row(re, np.real(rhs), label + '.re')
        self._row(im, np.imag(rhs), label + '.im')

    def add_real(self, coeffs, rhs, label):
        """Raw row on the vectorized variable: ``{col: coef}``."""
        self._row(dict(coeffs), rhs, label)

    def build(self, **meta):
        m = len(self._b)
        A = sp.csr_matrix((self._vals, (self._rows, self._cols)), shape=(m, self.vec.dim))
        A.sum_duplicates()
        return ConicProblem(self.vec.sizes, self.vec.n_free, self.c.copy(), A,
                            np.array(self._b), list(self.labels), dict(meta))
