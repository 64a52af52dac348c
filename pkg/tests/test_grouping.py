import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from cfgrouper.config import stage_rng
from cfgrouper.grouping import (Grouping, InstanceTooLarge, SdrSolution, brute_force_optimum,
                                build_weight_graph, from_spin, gaussian_round, greedy_grouping,
                                objective_binary, repair_feasibility, solve_sdr, spin_objective,
                                to_spin)


def sym(A):
    return np.triu(A, 1) + np.triu(A, 1).T


def triple_sum(x, W):
    """Literal sum_c sum_k sum_{j != k} w_kj (1 - x_kc) x_jc."""
    K, C = x.shape
    return math.fsum(W[k, j] * (1 - x[k, c]) * x[j, c]
                     for c in range(C) for k in range(K) for j in range(K) if j != k)


def enumerate_optimum(W, C, alpha, tau):
    """Plain loop over every 0/1 matrix; slow, independent of the library."""
    K = W.shape[0]
    best = -math.inf
    for bits in itertools.product((0, 1), repeat=K * C):
        x = np.array(bits).reshape(K, C)
        if np.all(x.sum(1) <= alpha) and np.all(x.sum(0) <= tau):
            best = max(best, triple_sum(x, W))
    return best


weights = st.integers(1, 7).flatmap(
    lambda K: arrays(float, (K, K), elements=st.floats(0, 100)).map(sym))


# --- weight graph ---------------------------------------------------------

def test_weight_graph_examples():
    np.testing.assert_array_equal(build_weight_graph(np.ones((3, 2))), [[0, 3], [3, 0]])
    disjoint = np.array([[1.0, 0.0], [0.0, 2.0]])
    np.testing.assert_array_equal(build_weight_graph(disjoint), np.zeros((2, 2)))


@given(arrays(float, st.tuples(st.integers(1, 8), st.integers(1, 8)), elements=st.floats(0, 1)))
def test_weight_graph_symmetric_zero_diagonal(beta):
    W = build_weight_graph(beta)
    np.testing.assert_array_equal(W, W.T)
    assert np.all(np.diag(W) == 0) and np.all(W >= 0)


# --- objective and spins --------------------------------------------------

def test_objective_hand_values():
    W = np.array([[0, 2.5], [2.5, 0]])
    assert objective_binary(np.zeros((2, 2)), W) == 0.0
    assert objective_binary(np.array([[1, 0], [1, 0]]), W) == 0.0
    assert objective_binary(np.array([[1, 0], [0, 1]]), W) == 5.0


@given(weights, st.integers(1, 4), st.data())
def test_objective_matches_triple_sum_and_spin_form(W, C, data):
    K = W.shape[0]
    x = data.draw(arrays(np.int8, (K, C), elements=st.integers(0, 1)))
    ref = triple_sum(x, W)
    assert objective_binary(x, W) == pytest.approx(ref, rel=1e-12, abs=1e-12)
    assert spin_objective(to_spin(x), W) == pytest.approx(ref, rel=1e-12, abs=1e-12)


@given(st.integers(1, 6), st.integers(1, 4), st.data())
def test_spin_round_trip_and_constraint_images(K, C, data):
    x = data.draw(arrays(np.int8, (K, C), elements=st.integers(0, 1)))
    y = to_spin(x)
    assert set(np.unique(y)) <= {-1, 1}
    np.testing.assert_array_equal(from_spin(y).x, x)
    for alpha in range(C + 1):
        assert np.all(x.sum(1) <= alpha) == np.all(y.sum(1) <= 2 * alpha - C)
    for tau in range(K + 1):
        assert np.all(x.sum(0) <= tau) == np.all(y.sum(0) <= 2 * tau - K)


def test_zero_grouping_maps_to_minus_ones():
    assert np.all(to_spin(np.zeros((3, 2))) == -1)
    with pytest.raises(ValueError):
        from_spin(np.array([[0, 1]]))


def test_grouping_accessors():
    g = Grouping(np.array([[1, 0, 1], [0, 0, 0], [1, 1, 0]]))
    assert [list(m) for m in g.groups()] == [[0, 2], [2], [0]]
    assert list(g.unscheduled()) == [1]
    assert g.pairs() == [(0, 0, 2)]
    assert g.is_feasible(2, 2) and not g.is_feasible(1, 2)


# --- brute force ----------------------------------------------------------

def test_brute_force_two_users_split():
    W = np.array([[0, 3.0], [3.0, 0]])
    g, v = brute_force_optimum(W, 2, 1, 1)
    assert v == 6.0
    assert g.memberships().tolist() == [1, 1] and g.sizes().tolist() == [1, 1]


def test_brute_force_single_user():
    assert brute_force_optimum(np.zeros((1, 1)), 3, 1, 1)[1] == 0.0


@pytest.mark.parametrize("seed", range(6))
def test_brute_force_matches_plain_enumeration(seed):
    rng = np.random.default_rng(seed)
    K, C = int(rng.integers(2, 5)), int(rng.integers(1, 4))
    alpha, tau = int(rng.integers(1, C + 1)), int(rng.integers(1, K + 1))
    W = sym(rng.integers(0, 10, (K, K)).astype(float))
    g, v = brute_force_optimum(W, C, alpha, tau)
    assert v == enumerate_optimum(W, C, alpha, tau)
    assert g.is_feasible(alpha, tau) and objective_binary(g, W) == v


def test_brute_force_limit():
    with pytest.raises(InstanceTooLarge):
        brute_force_optimum(np.zeros((15, 15)), 4, 1, 15)


def test_brute_force_permutation_and_scale():
    rng = np.random.default_rng(9)
    W = sym(rng.random((6, 6)))
    _, v = brute_force_optimum(W, 2, 1, 3)
    perm = rng.permutation(6)
    assert brute_force_optimum(W[np.ix_(perm, perm)], 2, 1, 3)[1] == pytest.approx(v, rel=1e-12)
    g2, v2 = brute_force_optimum(7.5 * W, 2, 1, 3)
    assert v2 == pytest.approx(7.5 * v, rel=1e-12)
    assert objective_binary(g2, W) == pytest.approx(v, rel=1e-12)


# --- relaxation -----------------------------------------------------------

def test_sdr_two_users_dominates_split():
    W = np.array([[0, 1.5], [1.5, 0]])
    assert solve_sdr(W, 2, 1, 1).objective_value >= 3.0 - 1e-7


@pytest.mark.parametrize("seed", range(5))
def test_sdr_dominates_enumeration(seed):
    rng = np.random.default_rng(100 + seed)
    K, C = 4, 2
    alpha, tau = int(rng.integers(1, 3)), int(rng.integers(1, 5))
    W = sym(rng.random((K, K)))
    assert solve_sdr(W, C, alpha, tau).objective_value >= enumerate_optimum(W, C, alpha, tau) - 1e-5


def test_single_group_is_well_defined():
    W = sym(np.random.default_rng(3).random((5, 5)))
    sol = solve_sdr(W, 1, 1, 2)
    assert sol.objective_value >= brute_force_optimum(W, 1, 1, 2)[1] - 1e-5


# --- rounding and repair --------------------------------------------------

def test_rank_one_solution_is_reproduced():
    # dividing by the entry sum cancels the Gaussian scale and sign; with
    # each column summing to 1 the normalized direction is y* itself
    ystar = np.array([[1, 1], [1, -1], [-1, 1]], dtype=float)
    sol = SdrSolution(Y=[np.outer(ystar[:, c], ystar[:, c]) for c in range(2)],
                      y=[ystar[:, c] for c in range(2)], objective_value=0.0)
    W = sym(np.random.default_rng(0).random((3, 3)))
    g = gaussian_round(sol, W, 2, 2, 2, 20, np.random.default_rng(1), norm="sum_normalized")
    np.testing.assert_array_equal(g.x, from_spin(ystar).x)


@pytest.mark.parametrize("seed", range(8))
def test_rounding_feasible_and_below_relaxation(seed):
    rng = np.random.default_rng(seed)
    K, C = int(rng.integers(2, 9)), int(rng.integers(1, 4))
    alpha, tau = int(rng.integers(1, C + 1)), int(rng.integers(1, K + 1))
    W = sym(rng.random((K, K)))
    sol = solve_sdr(W, C, alpha, tau)
    for norm in ("clamp_only", "sum_normalized"):
        g = gaussian_round(sol, W, C, alpha, tau, 50, stage_rng(seed, 0, "r"), norm=norm)
        assert g.is_feasible(alpha, tau)
        assert objective_binary(g, W) <= sol.objective_value + 1e-5


def test_rounding_is_deterministic_per_stream():
    W = sym(np.random.default_rng(4).random((6, 6)))
    sol = solve_sdr(W, 2, 1, 3)
    a = gaussian_round(sol, W, 2, 1, 3, 40, stage_rng(1, 2, "rounding"))
    b = gaussian_round(sol, W, 2, 1, 3, 40, stage_rng(1, 2, "rounding"))
    np.testing.assert_array_equal(a.x, b.x)


def test_repair_noop_on_feasible():
    x = np.array([[1, 0], [0, 1], [0, 0]])
    np.testing.assert_array_equal(repair_feasibility(x, np.ones((3, 3)), 1, 2).x, x)


def test_repair_capacity_forcing():
    W = sym(np.random.default_rng(2).random((5, 5)))
    g = repair_feasibility(np.ones((5, 1)), W, 1, 1)
    assert g.sizes().tolist() == [1]


def test_repair_accepts_spins_and_tie_breaks():
    W = np.zeros((3, 3))
    g = repair_feasibility(np.array([[1, 1], [-1, -1], [-1, -1]]), W, 1, 3)
    # zero weights: every removal ties, lowest group index is dropped first
    assert g.x.tolist() == [[0, 1], [0, 0], [0, 0]]
    g = repair_feasibility(np.ones((3, 1)), W, 1, 2)
    assert g.x[:, 0].tolist() == [0, 1, 1]


@given(weights, st.integers(1, 4), st.integers(0, 3), st.integers(0, 7), st.data())
def test_repair_always_feasible(W, C, alpha, tau, data):
    K = W.shape[0]
    x = data.draw(arrays(np.int8, (K, C), elements=st.integers(0, 1)))
    assert repair_feasibility(x, W, alpha, tau).is_feasible(alpha, tau)


# --- greedy ---------------------------------------------------------------

def test_greedy_splits_two_users():
    g = greedy_grouping(np.array([[0, 1.0], [1.0, 0]]), 2, 1, 2)
    assert g.sizes().tolist() == [1, 1]


@given(weights, st.integers(1, 3), st.integers(1, 3), st.integers(1, 7))
def test_greedy_feasible_and_below_optimum(W, C, alpha, tau):
    g = greedy_grouping(W, C, alpha, tau)
    assert g.is_feasible(alpha, tau)
    if W.shape[0] <= 5 and alpha == 1:
        assert objective_binary(g, W) <= brute_force_optimum(W, C, 1, tau)[1] + 1e-9
