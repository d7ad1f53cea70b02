import numpy as np
import pytest

from superext import _kernels
from superext.ffield import (
    FieldConfig, Mat, rank_kernel_image, solve_and_cokernel,
    kernel_basis, rref_ip, matmul_mod,
)


def naive_rref(a, p):
    """Reference single-column Gauss-Jordan, independent of the fast path."""
    a = [[int(x) % p for x in row] for row in np.asarray(a)]
    m = len(a)
    n = len(a[0]) if m else 0
    piv = []
    r = 0
    for c in range(n):
        if r == m:
            break
        prow = None
        for i in range(r, m):
            if a[i][c] % p:
                prow = i
                break
        if prow is None:
            continue
        a[r], a[prow] = a[prow], a[r]
        inv = pow(a[r][c], p - 2, p)
        a[r] = [(x * inv) % p for x in a[r]]
        for i in range(m):
            if i != r and a[i][c]:
                f = a[i][c]
                a[i] = [(x - f * y) % p for x, y in zip(a[i], a[r])]
        piv.append(c)
        r += 1
    return np.array(a, np.int64).reshape(m, n), piv


def test_field_config_validation():
    FieldConfig(3)
    FieldConfig(17)
    with pytest.raises(ValueError):
        FieldConfig(2)
    with pytest.raises(ValueError):
        FieldConfig(9)


def test_rank_examples_f3():
    p = 3
    rank, ker, _ = rank_kernel_image(Mat.dense(np.eye(2), p))
    assert rank == 2 and ker.shape == (2, 0)
    rank, ker, _ = rank_kernel_image(Mat.dense(np.zeros((2, 2)), p))
    assert rank == 0 and ker.shape == (2, 2)
    # det(1,2;2,1) = 1 - 4 = -3 = 0 mod 3
    rank, ker, img = rank_kernel_image(Mat.dense([[1, 2], [2, 1]], p))
    assert rank == 1 and ker.shape == (2, 1) and img.shape == (2, 1)


@pytest.mark.parametrize("backend", ["numpy", "numba"])
@pytest.mark.parametrize("p", [3, 5, 7])
def test_blocked_rref_matches_naive(backend, p):
    if backend == "numba" and _kernels.active_backend() != "numba":
        pytest.skip("numba unavailable")
    rng = np.random.default_rng(12345 + p)
    shapes = [(1, 1), (5, 3), (3, 5), (8, 8), (40, 17), (17, 40),
              (300, 70), (70, 300), (513, 90)]
    for m, n in shapes:
        a = rng.integers(0, p, size=(m, n))
        # include some rank deficiency
        a[m // 2] = a[0]
        work = np.ascontiguousarray(a.astype(np.int64))
        piv = rref_ip(work, p, backend=backend)
        ref, refpiv = naive_rref(a, p)
        assert list(piv) == refpiv
        assert np.array_equal(work, ref)


@pytest.mark.parametrize("p", [3, 5])
def test_rank_transpose_and_nullity(p):
    rng = np.random.default_rng(99)
    for _ in range(40):
        m, n = rng.integers(1, 30, size=2)
        a = rng.integers(0, p, size=(m, n))
        r1, ker, img = rank_kernel_image(Mat.dense(a, p))
        r2, _, _ = rank_kernel_image(Mat.dense(a.T, p))
        assert r1 == r2
        assert r1 + ker.shape[1] == n
        assert img.shape[1] == r1
        # kernel really is the kernel
        if ker.shape[1]:
            assert not (matmul_mod(a, ker.toarray(), p)).any()


def test_sparse_dense_agree_1000_random():
    rng = np.random.default_rng(2024)
    for trial in range(1000):
        p = 3 if trial % 2 == 0 else 5
        m = int(rng.integers(1, 51))
        n = int(rng.integers(1, 51))
        density = rng.uniform(0.03, 0.5)
        a = rng.integers(0, p, size=(m, n))
        a[rng.random(size=(m, n)) > density] = 0
        dense = Mat.dense(a, p)
        sparse = Mat.sparse(
            ((i, j, a[i, j]) for i, j in zip(*np.nonzero(a))), (m, n), p)
        rd, kd, imd = rank_kernel_image(dense)
        rs, ks, ims = rank_kernel_image(sparse)
        assert rd == rs
        assert kd == ks
        assert imd == ims
        Rd, pd = dense.rref()
        Rs, ps = sparse.rref()
        assert pd == ps
        assert Rd == Rs


def test_solve_and_cokernel_examples():
    p = 3
    res = solve_and_cokernel(Mat.identity(3, p), Mat.dense([[1], [2], [0]], p))
    assert res.ok and res.cokernel.shape[1] == 0
    assert np.array_equal(res.solutions.toarray().ravel(), [1, 2, 0])

    res = solve_and_cokernel(Mat.zeros((3, 3), p), Mat.zeros((3, 1), p))
    assert res.ok and res.cokernel.shape[1] == 3
    assert not res.solutions.toarray().any()

    # column span of [[1],[1]] misses (1,2): 2-element brute force
    res = solve_and_cokernel(Mat.dense([[1], [1]], p), Mat.dense([[1], [2]], p))
    assert not res.ok and res.inconsistent == [0]
    assert res.cokernel.shape[1] == 1
    y = res.witness
    assert (y @ np.array([1, 1]) % p) == 0
    assert (y @ np.array([1, 2]) % p) != 0


def test_solve_random_consistency():
    rng = np.random.default_rng(7)
    p = 5
    for _ in range(30):
        m, n, k = rng.integers(1, 15, size=3)
        a = rng.integers(0, p, size=(m, n))
        x = rng.integers(0, p, size=(n, k))
        t = matmul_mod(a, x, p)
        res = solve_and_cokernel(Mat.dense(a, p), Mat.dense(t, p))
        assert res.ok
        assert np.array_equal(matmul_mod(a, res.solutions.toarray(), p), t)


def test_dimension_mismatch_raises():
    from superext.ffield import DimensionMismatch
    with pytest.raises(DimensionMismatch):
        solve_and_cokernel(Mat.zeros((2, 2), 3), Mat.zeros((3, 1), 3))


def test_kernel_basis_raw_and_determinism():
    rng = np.random.default_rng(0)
    p = 3
    a = rng.integers(0, p, size=(60, 90))
    k1 = kernel_basis(a, p)
    k2 = kernel_basis(a, p)
    assert np.array_equal(k1, k2)
    assert not matmul_mod(a, k1, p).any()
    assert np.linalg.matrix_rank(k1.astype(float)) == k1.shape[1]


def test_mat_coo_roundtrip():
    p = 5
    a = np.array([[0, 2], [3, 0], [0, 0]])
    m = Mat.dense(a, p)
    coo = m.to_coo()
    assert coo == [(0, 1, 2), (1, 0, 3)]
    m2 = Mat.sparse(coo, m.shape, p)
    assert m2 == m
