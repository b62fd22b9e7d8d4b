import math
from concurrent.futures import ThreadPoolExecutor

import numpy as np
import pytest

from conftest import match_multisets
from speclab.anderson import EllipseEF, minkowski_sum_contains
from speclab.instability import instability_index, projection_norms_gram
from speclab.linalg_core import eigendecompose
from speclab.models import (
    DIRICHLET,
    PERIODIC,
    AndersonParams,
    EnsembleSpec,
    PotentialLaw,
    anderson_1d,
    anderson_2d,
    bs_eigenvalues,
    bs_instability_closed,
    bs_projection_norm_closed,
    build_Bs,
    k_operator,
    periodic_symbol,
    sample_tridiagonal,
    weighted_circulant_index,
    weighted_circulant,
)

LN2 = math.log(2)


def test_sample_determinism():
    spec = EnsembleSpec(6, 10, 12345)
    a = sample_tridiagonal(spec, 7)
    b = sample_tridiagonal(spec, 7)
    assert a.tobytes() == b.tobytes()
    assert sample_tridiagonal(spec.with_seed(12344), 7).tobytes() != a.tobytes()


def test_sample_tridiagonal_structure():
    A = sample_tridiagonal(EnsembleSpec(3, 1, 0), 0)
    assert A[0, 2] == 0 and A[2, 0] == 0
    spec = EnsembleSpec(40, 20, 3)
    for i in range(spec.M):
        A = sample_tridiagonal(spec, i)
        assert np.all(np.triu(A, 2) == 0) and np.all(np.tril(A, -2) == 0)
        assert np.all((0 <= np.diag(A, -1)) & (np.diag(A, -1) <= 1))
        assert np.all((0 <= np.diag(A)) & (np.diag(A) <= 2))
        assert np.all((0 <= np.diag(A, 1)) & (np.diag(A, 1) <= 3))


def test_order_independence():
    spec = EnsembleSpec(8, 64, 99)
    serial = [sample_tridiagonal(spec, i) for i in range(spec.M)]
    with ThreadPoolExecutor(4) as pool:
        parallel = list(pool.map(lambda i: sample_tridiagonal(spec, i), reversed(range(spec.M))))
    for a, b in zip(serial, reversed(parallel)):
        assert a.tobytes() == b.tobytes()


def test_subdiagonal_law_of_large_numbers():
    spec = EnsembleSpec(2, 100_000, 2024)
    x = np.array([sample_tridiagonal(spec, i)[1, 0] for i in range(spec.M)])
    assert abs(x.mean() - 0.5) < 0.01
    assert x.max() <= 1


def test_spec_validation():
    with pytest.raises(ValueError):
        EnsembleSpec(1, 10, 0)
    with pytest.raises(ValueError):
        EnsembleSpec(5, 0, 0)
    with pytest.raises(ValueError):
        EnsembleSpec(5, 10, -1)
    with pytest.raises(IndexError):
        sample_tridiagonal(EnsembleSpec(5, 2, 0), 2)


def test_weighted_circulant_examples():
    np.testing.assert_allclose(weighted_circulant(2, 2, f=lambda k: 1), [[1, 0.5], [2, 1]])
    assert not np.any(weighted_circulant(5, 2, f=[0] * 5))
    A = weighted_circulant(4, 2.0, f={-1: 1, 0: 1, 1: 1})
    # m - n = -3 and 3 wrap onto 1 and -1
    expected = np.array(
        [[1, 0.5, 0, 1 / 8], [2, 1, 0.5, 0], [0, 2, 1, 0.5], [8, 0, 2, 1]]
    )
    np.testing.assert_allclose(A, expected)


def test_periodic_symbol_mapping_sums_collisions():
    np.testing.assert_allclose(periodic_symbol(2, {-1: 1, 0: 1, 1: 2}), [1, 3])


def test_weighted_circulant_index_examples():
    assert weighted_circulant_index(2, 2) == pytest.approx(1.25)
    assert weighted_circulant_index(4, 2) == pytest.approx(2.65625)
    assert abs(weighted_circulant_index(4, 1.0001) - 1) < 1e-3
    with pytest.raises(ValueError):
        weighted_circulant_index(4, 1.0)


@pytest.mark.parametrize("a", [1.5, 2.0])
@pytest.mark.parametrize("N", [4, 8, 16])
def test_weighted_circulant_exactness(a, N):
    A = weighted_circulant(N, a)
    es = eigendecompose(A)
    norms = projection_norms_gram(es).norms
    c = weighted_circulant_index(N, a)
    np.testing.assert_allclose(norms, c, rtol=1e-8)
    assert instability_index(A, es=es) == pytest.approx(c, rel=1e-8)


def test_build_Bs():
    np.testing.assert_array_equal(build_Bs(2, 1, 2), [[0, 2], [1, 0]])
    B = build_Bs(5, 1, 1)
    np.testing.assert_array_equal(B, B.T)
    assert instability_index(B) == pytest.approx(1, abs=1e-10)
    w = np.linalg.eigvals(build_Bs(3, 1, 2))
    assert match_multisets(w, bs_eigenvalues(3, 1, 2)) < 1e-12
    np.testing.assert_allclose(sorted(bs_eigenvalues(3, 1, 2)), [-2, 0, 2], atol=1e-12)


def test_bs_closed_form():
    for k in (1, 2, 3):
        assert bs_projection_norm_closed(3, 1.5, 1.5, k) == pytest.approx(1)
    assert bs_projection_norm_closed(2, 1, 2, 1) == pytest.approx(math.sqrt(9 / 16 * 4.5) / 1.5)
    assert bs_instability_closed(20, 1, 2) == pytest.approx(instability_index(build_Bs(20, 1, 2)), rel=1e-6)


def test_bs_growth():
    values = [bs_instability_closed(s, 1, 2) for s in range(2, 31)]
    assert all(b > a for a, b in zip(values, values[1:]))


def test_anderson_1d_examples():
    p = AndersonParams(LN2, 1, PotentialLaw("uniform", B=0.0), DIRICHLET)
    np.testing.assert_allclose(anderson_1d(p), [[0, 2, 0], [0.5, 0, 2], [0, 0.5, 0]])
    p = AndersonParams(LN2, 1, PotentialLaw("uniform", B=0.0), PERIODIC)
    np.testing.assert_allclose(anderson_1d(p), [[0, 2, 0.5], [0.5, 0, 2], [2, 0.5, 0]])
    p = AndersonParams(0.3, 4, PotentialLaw("two_point", alpha=3, beta=-1, p_alpha=1.0))
    np.testing.assert_array_equal(np.diag(anderson_1d(p)), 3)


def test_anderson_potential_law_and_determinism():
    p = AndersonParams(0.5, 200, PotentialLaw("uniform", B=0.7), seed=11)
    V = np.diag(anderson_1d(p))
    assert V.min() >= -0.7 and V.max() <= 0.7
    assert anderson_1d(p).tobytes() == anderson_1d(p).tobytes()
    q = AndersonParams(0.5, 2000, PotentialLaw("two_point", alpha=1, beta=-2, p_alpha=0.25), seed=3)
    V = np.diag(anderson_1d(q))
    assert set(np.unique(V)) == {-2.0, 1.0}
    assert abs((V == 1).mean() - 0.25) < 0.03


def _kron_sum_by_loops(g, h, N):
    n = 2 * N + 1
    H = np.zeros((n * n, n * n))
    idx = lambda m, k: m * n + k  # noqa: E731
    for m in range(n):
        for k in range(n):
            if m > 0:
                H[idx(m, k), idx(m - 1, k)] = math.exp(-g)
            if m < n - 1:
                H[idx(m, k), idx(m + 1, k)] = math.exp(g)
            if k > 0:
                H[idx(m, k), idx(m, k - 1)] = math.exp(-h)
            if k < n - 1:
                H[idx(m, k), idx(m, k + 1)] = math.exp(h)
    return H


def test_anderson_2d_tensor_structure():
    p = AndersonParams(0.4, 1, PotentialLaw("uniform", B=0.0), h=0.9)
    np.testing.assert_allclose(anderson_2d(p), _kron_sum_by_loops(0.4, 0.9, 1), atol=1e-15)
    p = AndersonParams(0.4, 2, PotentialLaw("uniform", B=1.0), seed=5, h=0.9)
    H = anderson_2d(p)
    np.testing.assert_allclose(H - np.diag(np.diag(H)), _kron_sum_by_loops(0.4, 0.9, 2), atol=1e-15)


def test_anderson_2d_swap_symmetry():
    p = AndersonParams(0.6, 2, PotentialLaw("uniform", B=0.0), h=0.6)
    w = np.linalg.eigvals(anderson_2d(p))
    n = 5
    P = np.eye(n * n)[[k * n + m for m in range(n) for k in range(n)]]
    w_swapped = np.linalg.eigvals(P @ anderson_2d(p) @ P.T)
    assert match_multisets(w, w_swapped) < 1e-8


def test_anderson_2d_spectrum_in_ellipse_sum():
    p = AndersonParams(LN2, 6, PotentialLaw("uniform", B=0.0), h=LN2)
    H = anderson_2d(p)
    # real by similarity; the symmetrized spectrum avoids raw-solve instability
    w = np.linalg.eigvals(H)
    E = F = EllipseEF.hopping(LN2)
    assert all(minkowski_sum_contains(z, E, F, tol=1e-6) for z in w)


def test_anderson_2d_rejects_periodic_and_missing_h():
    with pytest.raises(ValueError):
        anderson_2d(AndersonParams(0.5, 1))
    with pytest.raises(ValueError):
        anderson_2d(AndersonParams(0.5, 1, bc=PERIODIC, h=0.5))


def test_k_operator():
    np.testing.assert_array_equal(np.diag(k_operator(LN2, 3, 0, 2)), [0, 0, 0, 3, 3])
    K = k_operator(0.5, 1.5, 1.5, 3)
    p = AndersonParams(0.5, 3, PotentialLaw("two_point", alpha=1.5, beta=1.5))
    np.testing.assert_allclose(K, anderson_1d(p))
    assert np.all(np.triu(K, 2) == 0) and np.all(np.tril(K, -2) == 0)


def test_dirichlet_similarity_realness():
    from speclab.anderson import dirichlet_realness, dirichlet_symmetrized

    p = AndersonParams(0.5, 10, PotentialLaw("uniform", B=1.0), seed=4)
    H = anderson_1d(p)
    S = dirichlet_symmetrized(H, p.g)
    T = np.diag(np.exp(-p.g * p.sites))
    np.testing.assert_allclose(np.linalg.inv(T) @ H @ T, S, atol=1e-12)
    diag = dirichlet_realness(H, p.g)
    assert diag.raw_real
    assert diag.max_deviation < 1e-8


def test_matrix_csv_round_trip(tmp_path):
    from speclab.io import read_matrix_csv, write_matrix_csv

    A = np.array([[1 / 3, 2 - 1j], [np.pi, -1e-300]])
    path = tmp_path / "m.csv"
    write_matrix_csv(path, A)
    assert read_matrix_csv(path).tobytes() == A.astype(complex).tobytes()
    assert b"\r\n" not in path.read_bytes()


@pytest.mark.parametrize("N", [4, 8, 16])
def test_symmetric_stencil_gives_paired_eigenvalues(N):
    # a symmetric stencil makes eigenvalues r and N - r coincide
    es = eigendecompose(weighted_circulant(N, 2.0, f={-1: 1, 0: 1, 1: 1}))
    assert es.degenerate
    from speclab.errors import DegenerateInput

    with pytest.raises(DegenerateInput):
        projection_norms_gram(es)
