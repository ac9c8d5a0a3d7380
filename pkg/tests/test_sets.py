import numpy as np
import pytest

from setbo.sets import as_point_set, canonical_order, cost_matrix, interaction_set


def test_cost_matrix_unit_displacement():
    C = cost_matrix([(0.0, 0.0)], [(1.0, 0.0)])
    assert C.shape == (1, 1)
    assert C[0, 0] == 1.0


def test_cost_matrix_identity_diagonal():
    S = np.array([[0.1, 0.2], [0.5, -0.3], [2.0, 1.0]])
    C = cost_matrix(S, S)
    assert np.all(np.diag(C) == 0.0)


def test_cost_matrix_3_4_5():
    C = cost_matrix([(0.0, 0.0), (3.0, 4.0)], [(0.0, 0.0)])
    assert np.allclose(C, [[0.0], [5.0]])


def test_empty_set_rejected():
    with pytest.raises(ValueError):
        as_point_set(np.zeros((0, 2)))
    with pytest.raises(ValueError):
        cost_matrix(np.zeros((0, 2)), [(0.0, 0.0)])


def test_nonfinite_rejected():
    with pytest.raises(ValueError):
        as_point_set([(np.nan, 0.0)])


def test_canonical_order_permutation_stable():
    rng = np.random.default_rng(5)
    pts = rng.random((7, 2))
    perm = rng.permutation(7)
    assert np.array_equal(canonical_order(pts), canonical_order(pts[perm]))


def test_interaction_set_from_origin():
    R = interaction_set([(0.0, 0.0)], [(1.0, 0.0), (0.0, 2.0)])
    assert np.array_equal(R, [[1.0, 0.0], [0.0, 2.0]])


def test_interaction_set_coincident():
    R = interaction_set([(1.0, 1.0)], [(1.0, 1.0)])
    assert np.array_equal(R, [[0.0, 0.0]])


def test_interaction_set_cardinality_and_order():
    rng = np.random.default_rng(0)
    I = rng.random((4, 2))
    P = rng.random((6, 2))
    R = interaction_set(I, P)
    assert R.shape == (24, 2)
    # row-major: a outer, b inner
    assert np.array_equal(R[1 * 6 + 3], P[3] - I[1])
