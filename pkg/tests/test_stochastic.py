from fractions import Fraction
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from ergochain.errors import (DimensionMismatch, EqualIndices, NegativeEntry, NonFiniteEntry, NonSquare,
                              RowSumViolation, TrivialCut)
from ergochain.stochastic import (apply, complement, cut_flow, is_doubly_stochastic, l1_matrix_distance,
                                  pair_flow, spread, validate_stochastic)
from ergochain.approximation import diagonal_approximation

from conftest import stochastic_matrices

W3 = [[.6, .2, .2], [.1, .8, .1], [0, .3, .7]]


def test_validate_accepts_exact_rows():
    M = validate_stochastic([[0.5, 0.5], [0.5, 0.5]])
    assert np.array_equal(M, [[0.5, 0.5], [0.5, 0.5]])


def test_validate_renormalises_within_tolerance():
    M = validate_stochastic([[1.0 + 1e-13, -1e-13], [0, 1]])
    assert np.array_equal(M, np.eye(2))
    assert np.all(M >= 0)


def test_validate_rejects_row_sum():
    with pytest.raises(RowSumViolation):
        validate_stochastic([[0.7, 0.7], [0, 1]])


@pytest.mark.parametrize("entries, err", [
    ([[0.5, 0.5]], NonSquare),
    ([[1.2, -0.2], [0, 1]], NegativeEntry),
    ([[np.nan, 1], [0, 1]], NonFiniteEntry),
])
def test_validate_errors(entries, err):
    with pytest.raises(err):
        validate_stochastic(entries)


def test_validated_matrix_is_read_only():
    M = validate_stochastic(np.eye(2))
    with pytest.raises(ValueError):
        M[0, 0] = 2.0


def test_cut_flow_examples():
    M = [[.5, .5, 0], [.5, .5, 0], [0, 0, 1]]
    assert cut_flow(M, [0, 2]) == pytest.approx(1.0)
    assert cut_flow(np.eye(4), [1, 3]) == 0
    # W_12 + W_13 + W_21 + W_31
    assert cut_flow(W3, [0]) == pytest.approx(float(Fraction(2, 10) * 2 + Fraction(1, 10)))


@pytest.mark.parametrize("S", [[], [0, 1, 2]])
def test_cut_flow_trivial(S):
    with pytest.raises(TrivialCut):
        cut_flow(W3, S)


def test_pair_flow_examples():
    assert pair_flow([[.5, .5], [.5, .5]], 0, 1) == 1.0
    assert pair_flow(np.eye(2), 0, 1) == 0
    assert pair_flow(W3, 1, 2) == pytest.approx(0.4)
    with pytest.raises(EqualIndices):
        pair_flow(W3, 1, 1)


def test_apply_examples():
    assert np.allclose(apply([[.5, .5], [.5, .5]], [1, 0]), [0.5, 0.5])
    assert np.array_equal(apply(np.eye(3), [3, 1, 2]), [3, 1, 2])
    assert np.allclose(apply([[1, 0, 0], [.5, .5, 0], [.5, 0, .5]], [1, 0, 0]), [1, 0.5, 0.5])
    with pytest.raises(DimensionMismatch):
        apply(np.eye(2), [1, 2, 3])


def test_l1_distance_examples():
    assert l1_matrix_distance(W3, W3) == 0
    assert l1_matrix_distance([[.5, .5], [.5, .5]], np.eye(2)) == 2.0
    Wt = diagonal_approximation(np.array(W3), [[0, 1], [2]])
    assert l1_matrix_distance(W3, Wt) == pytest.approx(1.2)
    with pytest.raises(DimensionMismatch):
        l1_matrix_distance(np.eye(2), np.eye(3))


@given(stochastic_matrices(), st.data())
def test_apply_never_expands_range(M, data):
    m = M.shape[0]
    x = data.draw(arrays(np.float64, m, elements=st.floats(-1e6, 1e6)))
    y = apply(M, x)
    assert y.max() <= x.max() + 1e-9 * (1 + abs(x.max()))
    assert y.min() >= x.min() - 1e-9 * (1 + abs(x.min()))


@given(stochastic_matrices(min_m=2), st.data())
def test_cut_flow_symmetric_and_matches_pairs(M, data):
    m = M.shape[0]
    S = data.draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m - 1, unique=True))
    Sbar = complement(S, m)
    brute = 0.0
    for i in S:
        for j in Sbar:
            brute += M[i, j] + M[j, i]
    assert cut_flow(M, S) == pytest.approx(cut_flow(M, Sbar), abs=1e-12)
    assert cut_flow(M, S) == pytest.approx(brute, abs=1e-12)
    # outflow is at most |S|, inflow at most |S-bar|
    assert 0 <= cut_flow(M, S) <= m + 1e-12


@given(st.integers(2, 6).flatmap(lambda m: st.tuples(st.just(m), st.permutations(range(m)),
                                                     st.lists(st.floats(0, 1), min_size=m, max_size=m))),
       st.data())
def test_cut_flow_doubly_stochastic_bound(args, data):
    m, perm, w = args
    # convex combination of the identity and a permutation matrix
    P = np.eye(m)[list(perm)]
    M = np.diag(w) @ np.eye(m) + np.diag(1 - np.array(w)) @ P
    S = data.draw(st.lists(st.integers(0, m - 1), min_size=1, max_size=m - 1, unique=True))
    if not is_doubly_stochastic(M, 1e-9):
        return
    assert cut_flow(M, S) <= 2 * min(len(S), m - len(S)) + 1e-12


@given(st.integers(1, 5).flatmap(lambda m: st.tuples(*[stochastic_matrices(m=m)] * 3)))
def test_l1_is_a_metric(triple):
    A, B, C = triple
    assert l1_matrix_distance(A, B) == pytest.approx(l1_matrix_distance(B, A))
    assert l1_matrix_distance(A, C) <= l1_matrix_distance(A, B) + l1_matrix_distance(B, C) + 1e-12
    assert l1_matrix_distance(A, B) <= 2 * A.shape[0] + 1e-12


def test_spread_and_doubly_stochastic():
    assert spread([3, 1, 2]) == 2
    assert is_doubly_stochastic([[.5, .5], [.5, .5]])
    assert not is_doubly_stochastic(W3)


def test_cut_flow_exhaustive_small():
    rng = np.random.default_rng(0)
    M = rng.random((4, 4))
    M /= M.sum(axis=1, keepdims=True)
    for r in range(1, 4):
        for S in combinations(range(4), r):
            assert cut_flow(M, S) == pytest.approx(cut_flow(M, complement(S, 4)))
