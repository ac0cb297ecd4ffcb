import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from gridless_doa.conic import (ConicProblem, HermitianVectorizer, ProblemBuilder,
                                hermitian_eig, jacobi_eigh, project_psd, real_embed,
                                real_extract, solve)
from gridless_doa.errors import DomainError, NumericError, ProblemConstructionError


def random_hermitian(rng, n):
    A = rng.standard_normal((n, n)) + 1j * rng.standard_normal((n, n))
    return (A + A.conj().T) / 2


# -- linear algebra ------------------------------------------------------------

def test_eig_trivial_cases():
    lam, _ = hermitian_eig(np.eye(4))
    np.testing.assert_allclose(lam, 1.0)
    lam, _ = hermitian_eig(np.diag([3.0, 1.0, 2.0]))
    np.testing.assert_allclose(lam, [1, 2, 3])
    lam, _ = hermitian_eig(np.diag([3.0, 1.0, 2.0]), method='jacobi')
    np.testing.assert_allclose(lam, [1, 2, 3], atol=1e-12)


@pytest.mark.parametrize('method', ['lapack', 'jacobi'])
def test_eig_reconstruction(rng, method):
    H = random_hermitian(rng, 8)
    lam, V = hermitian_eig(H, method=method)
    assert np.all(np.diff(lam) >= -1e-12)
    assert np.linalg.norm(V @ np.diag(lam) @ V.conj().T - H) <= 1e-10 * np.linalg.norm(H)
    np.testing.assert_allclose(V.conj().T @ V, np.eye(8), atol=1e-10)


def test_jacobi_matches_lapack(rng):
    H = random_hermitian(rng, 6)
    np.testing.assert_allclose(hermitian_eig(H, 'jacobi')[0], np.linalg.eigvalsh(H), atol=1e-10)
    S = rng.standard_normal((7, 7))
    S = S + S.T
    lam, V = jacobi_eigh(S)
    np.testing.assert_allclose(lam, np.linalg.eigvalsh(S), atol=1e-10)


def test_eig_errors():
    with pytest.raises(NumericError):
        hermitian_eig(np.array([[np.nan, 0], [0, 1]]))
    with pytest.raises(DomainError):
        hermitian_eig(np.array([[0, 1], [0, 0]]))


def test_real_embedding_examples(rng):
    np.testing.assert_array_equal(real_embed(np.eye(3)), np.eye(6))
    J = 1j * np.array([[0, 1], [-1, 0]])
    np.testing.assert_array_equal(real_embed(J), [[0, 0, 0, -1], [0, 0, 1, 0],
                                                  [0, 1, 0, 0], [-1, 0, 0, 0]])
    H = random_hermitian(rng, 5)
    np.testing.assert_allclose(real_extract(real_embed(H)), H)
    # eigenvalues of the embedding are those of H, each twice
    np.testing.assert_allclose(np.linalg.eigvalsh(real_embed(H)),
                               np.repeat(np.linalg.eigvalsh(H), 2), atol=1e-12)


@pytest.mark.parametrize('method', ['complex', 'real'])
def test_psd_projection(rng, method):
    H = random_hermitian(rng, 6)
    P = project_psd(H, method)
    lam = np.linalg.eigvalsh(H)
    assert np.linalg.eigvalsh(P)[0] >= -1e-12
    # distance to the cone equals the norm of the negative eigenvalues
    assert np.linalg.norm(H - P) == pytest.approx(np.linalg.norm(lam[lam < 0]), rel=1e-10)


# -- vectorization and builder -----------------------------------------------------

@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(0, 10_000))
def test_vectorization_is_isometric(n, seed):
    rng = np.random.default_rng(seed)
    vec = HermitianVectorizer([n])
    A, B = random_hermitian(rng, n), random_hermitian(rng, n)
    a, b = vec.pack_block(A, 0), vec.pack_block(B, 0)
    assert a @ b == pytest.approx(np.real(np.trace(A.conj().T @ B)), abs=1e-9)
    np.testing.assert_allclose(vec.unpack_block(a, 0), A, atol=1e-12)


def test_entry_weights(rng):
    vec = HermitianVectorizer([4, 3])
    H = random_hermitian(rng, 3)
    x = vec.pack([np.zeros((4, 4)), H])
    for i in range(3):
        for j in range(3):
            val = sum(w * x[c] for c, w in vec.entry(1, i, j))
            assert val == pytest.approx(H[i, j], abs=1e-12)


def test_builder_drops_zero_rows_and_counts_labels():
    pb = ProblemBuilder([2])
    pb.add_complex([(0, 0, 0, 1.0)], 1.0, 'x11')
    pb.add_complex([(0, 0, 1, 1.0)], 0.5 + 0.25j, 'x12')
    prob = pb.build(kind='test')
    assert prob.labels == ['x11.re', 'x12.re', 'x12.im']
    assert prob.count('x12') == 2
    assert prob.meta == {'kind': 'test'}
    with pytest.raises(ProblemConstructionError):
        pb.add_complex([(0, 0, 0, 0.0)], 1.0, 'bad')


def test_dump_load_roundtrip(tmp_path, rng):
    pb = ProblemBuilder([3, 2], n_free=2)
    pb.add_objective_block(0, np.eye(3))
    pb.add_complex([(0, 0, 2, 1.0), (1, 0, 1, -2.0), ('free', 1, None, 1.0)], 1 + 1j, 'mix')
    pb.add_complex([(1, 1, 1, 1.0)], 2.0, 'diag')
    prob = pb.build()
    path = tmp_path / 'prob.txt'
    prob.dump(path)
    back = ConicProblem.load(path)
    assert back.sizes == prob.sizes and back.n_free == prob.n_free
    np.testing.assert_array_equal(back.c, prob.c)
    np.testing.assert_array_equal(back.b, prob.b)
    assert (back.A != prob.A).nnz == 0
    assert back.labels == prob.labels


def test_load_rejects_unknown_records(tmp_path):
    path = tmp_path / 'bad.txt'
    path.write_text('blocks 2\nrows 0\nq 1 2\n')
    with pytest.raises(ProblemConstructionError):
        ConicProblem.load(path)


# -- solver ----------------------------------------------------------------------

def test_trace_with_pinned_corner():
    pb = ProblemBuilder([2])
    pb.add_objective_block(0, np.eye(2))
    pb.add_complex([(0, 0, 0, 1.0)], 1.0, 'x11')
    sol = solve(pb.build(), tol=1e-9)
    assert sol.optimal
    assert sol.objective == pytest.approx(1.0, abs=1e-7)
    np.testing.assert_allclose(sol.blocks[0], np.diag([1.0, 0.0]), atol=1e-6)


@pytest.mark.parametrize('psd_method', ['complex', 'real'])
def test_min_eigenvalue_oracle(rng, psd_method):
    C = random_hermitian(rng, 5)
    pb = ProblemBuilder([5])
    pb.add_objective_block(0, C)
    pb.add_complex([(0, i, i, 1.0) for i in range(5)], 1.0, 'trace')
    sol = solve(pb.build(), tol=1e-9, psd_method=psd_method)
    lam, V = np.linalg.eigh(C)
    assert sol.optimal
    assert sol.objective == pytest.approx(lam[0], abs=1e-6)
    np.testing.assert_allclose(sol.blocks[0], np.outer(V[:, 0], V[:, 0].conj()), atol=1e-4)
    assert sol.dual_objective == pytest.approx(lam[0], abs=1e-6)


def test_free_variables():
    # X11 = s0 and X22 = 2 - s0 make the objective 2 + s0, minimized at s0 = X11 = 0
    pb = ProblemBuilder([2], n_free=1)
    pb.add_objective_block(0, np.eye(2))
    pb.c[pb.vec.free_offset] = 1.0
    pb.add_complex([(0, 0, 0, 1.0), ('free', 0, None, -1.0)], 0.0, 'tie')
    pb.add_complex([(0, 1, 1, 1.0), ('free', 0, None, 1.0)], 2.0, 'sum')
    sol = solve(pb.build(), tol=1e-9)
    assert sol.optimal
    assert sol.objective == pytest.approx(2.0, abs=1e-6)
    assert sol.free[0] == pytest.approx(0.0, abs=1e-6)


def test_rank_deficient_constraints_rejected():
    pb = ProblemBuilder([2])
    pb.add_complex([(0, 0, 0, 1.0)], 1.0, 'a')
    pb.add_complex([(0, 0, 0, 2.0)], 2.0, 'b')
    with pytest.raises(ProblemConstructionError):
        solve(pb.build())


def test_max_iter_reports_status():
    C = np.diag([1.0, 2.0, 3.0])
    pb = ProblemBuilder([3])
    pb.add_objective_block(0, C)
    pb.add_complex([(0, i, i, 1.0) for i in range(3)], 1.0, 'trace')
    sol = solve(pb.build(), tol=1e-14, max_iter=7)
    assert sol.status == 'max_iter' and sol.iterations == 7
    assert not sol.optimal


def test_problem_rejects_nonfinite():
    with pytest.raises(ProblemConstructionError):
        ConicProblem((1,), 0, [np.nan], sp.csr_matrix((0, 1)), [])
