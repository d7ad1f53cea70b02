import numpy as np
import pytest

from superext.superspace import (
    SuperSpace, SuperMap, GradedSuperSpace, ParitySeries,
    parity_change, series_product, series_twist, flip_permutation,
)


def test_superspace_basics():
    V = SuperSpace.kmn(1, 0)
    assert V.sdim == (1, 0)
    assert parity_change(V).sdim == (0, 1)
    W = SuperSpace.kmn(2, 3)
    assert parity_change(parity_change(W)) == W
    with pytest.raises(ValueError):
        SuperSpace(("a",), ("a",))


def test_parity_change_on_maps():
    p = 5
    V = SuperSpace.kmn(1, 1)
    # odd map on k^{1|1}: swaps the two parity lines
    f = SuperMap(V, V, [[0, 2], [3, 0]], p)
    assert f.parity == 1
    g = parity_change(f)
    # matrix is -f up to the basis reordering of the flip
    perm = flip_permutation(V)
    expect = (-f.matrix)[np.ix_(perm, perm)] % p
    assert np.array_equal(g.matrix, expect)
    # involution
    assert parity_change(g) == f

    # even maps are unchanged up to reordering
    h = SuperMap(V, V, [[2, 0], [0, 3]], p)
    assert h.parity == 0
    assert np.array_equal(parity_change(h).matrix,
                          h.matrix[np.ix_(perm, perm)])


def test_supermap_decomposition():
    p = 3
    V = SuperSpace.kmn(2, 1)
    rng = np.random.default_rng(3)
    m = rng.integers(0, p, size=(3, 3))
    f = SuperMap(V, V, m, p)
    total = (f.even_part().matrix + f.odd_part().matrix) % p
    assert np.array_equal(total, f.matrix)


def test_series_product_unit_and_examples():
    b = ParitySeries.delta(2, 1, 0) + ParitySeries.delta(5, 0, 2)
    assert series_product(ParitySeries.unit(), b) == b
    # odd times odd lands in even degree-wise
    o = ParitySeries.delta(0, 0, 1)
    assert series_product(o, o) == ParitySeries.delta(0, 1, 0)
    # (1@0 + 1@2) * (1@0 + 1@3) -> 1 at degrees 0,2,3,5 (hand convolution)
    a = ParitySeries.delta(0) + ParitySeries.delta(2)
    b = ParitySeries.delta(0) + ParitySeries.delta(3)
    prod = series_product(a, b)
    assert prod.to_json() == [[0, 1, 0], [2, 1, 0], [3, 1, 0], [5, 1, 0]]


def test_series_product_assoc_comm_random():
    rng = np.random.default_rng(11)
    for _ in range(25):
        t = 12
        mk = lambda: ParitySeries(t, rng.integers(0, 3, t + 1),
                                  rng.integers(0, 3, t + 1))
        a, b, c = mk(), mk(), mk()
        assert series_product(a, b) == series_product(b, a)
        assert series_product(series_product(a, b), c) == \
            series_product(a, series_product(b, c))


def test_series_twist():
    p = 3
    s = ParitySeries.delta(2, 1, 0)
    assert series_twist(s, 0, p) == s
    assert series_twist(s, 1, p) == ParitySeries.delta(6, 1, 0)
    s2 = ParitySeries.delta(0) + ParitySeries.delta(1)
    tw = series_twist(s2, 2, p)
    assert tw == ParitySeries.delta(0) + ParitySeries.delta(9)


def test_twist_multiplicative_over_product():
    p = 3
    rng = np.random.default_rng(4)
    for r in (1, 2):
        a = ParitySeries(24, rng.integers(0, 2, 25), rng.integers(0, 2, 25))
        b = ParitySeries(24, rng.integers(0, 2, 25), rng.integers(0, 2, 25))
        lhs = series_twist(series_product(a, b), r, p)
        rhs = series_product(series_twist(a, r, p), series_twist(b, r, p))
        assert lhs == rhs


def test_series_json_roundtrip():
    s = ParitySeries.delta(3, 2, 1) + ParitySeries.delta(7, 0, 4)
    assert ParitySeries.from_json(s.to_json()) == s


def test_truncation_mismatch():
    with pytest.raises(ValueError):
        series_product(ParitySeries(10), ParitySeries(12))


def test_graded_superspace():
    g = GradedSuperSpace({0: SuperSpace.kmn(1, 0), 2: SuperSpace.kmn(0, 3)})
    assert g.degrees() == [0, 2]
    assert g.sdim(2) == (0, 3)
    assert g.total_dim() == 4
    assert g.truncate(1).degrees() == [0]
    g.check_nonnegative()
    with pytest.raises(ValueError):
        GradedSuperSpace({-1: SuperSpace.kmn(1, 0)}).check_nonnegative()
