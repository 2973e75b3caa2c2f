import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.testing import assert_allclose

from levytree.errors import NonUniqueTreeWarning, NumericalError, ValidationError
from levytree.estimate import chi_hat
from levytree.learn import (
    chi_weights,
    learn_tree,
    learned_from_estimate,
    maximum_spanning_tree,
    mst,
    recovery_study,
    subsample_stability,
    tree_from_chi,
)
from levytree.measures import MarginalSpec, chi_closed_form
from levytree.simulate import SimConfig, simulate_increments
from levytree.tree import HeterogeneousStableModel, TreeModel, TreeTopology, random_tree

from oracles import spanning_trees


def _sym(upper, d):
    w = np.zeros((d, d))
    w[np.triu_indices(d, 1)] = upper
    return w + w.T


def test_three_node_example():
    chi = np.array([[1.0, 0.5, 0.2], [0.5, 1.0, 0.4], [0.2, 0.4, 1.0]])
    assert tree_from_chi(chi).edges == ((0, 1), (1, 2))


def test_ties_break_lexicographically_and_warn():
    w = _sym([1.0, 1.0, 1.0], 3)
    with pytest.warns(NonUniqueTreeWarning):
        tree = mst(w)
    assert tree.edges == ((0, 1), (0, 2))


def test_unique_tree_is_silent():
    w = _sym([1.0, 2.0, 3.0], 3)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        mst(w)


def test_tie_off_the_tree_is_still_unique():
    # the tied weights all exceed every tree edge on their cycles
    w = _sym([1.0, 3.0, 3.0, 2.0, 3.0, 2.5], 4)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        tree = mst(w)
    assert tree.edges == ((0, 1), (1, 2), (2, 3))


def test_zero_chi_is_infinite_weight():
    w = chi_weights(np.array([[1.0, 0.0], [0.0, 1.0]]))
    assert w[0, 1] == np.inf and w[0, 0] == 0.0


def test_disconnected_graph_raises():
    chi = np.eye(4)
    chi[0, 1] = chi[1, 0] = 0.5
    chi[2, 3] = chi[3, 2] = 0.5
    with pytest.raises(NumericalError, match="components"):
        tree_from_chi(chi)


@pytest.mark.parametrize(
    "w",
    [np.ones((2, 3)), np.array([[0.0, np.nan], [np.nan, 0.0]]), np.array([[0.0, 1.0], [2.0, 0.0]]), np.zeros((1, 1))],
)
def test_weight_validation(w):
    with pytest.raises(ValidationError):
        mst(w)


def test_negative_chi_rejected():
    with pytest.raises(ValidationError):
        chi_weights(np.array([[1.0, -0.1], [-0.1, 1.0]]))


@given(st.integers(2, 7), st.integers(0, 10**6))
def test_mst_matches_brute_force(d, seed):
    rng = np.random.default_rng(seed)
    w = _sym(rng.uniform(0, 10, size=d * (d - 1) // 2), d)
    tree = mst(w, warn=False)
    best = min(sum(w[e] for e in t.edges) for t in spanning_trees(d))
    assert_allclose(sum(w[e] for e in tree.edges), best, rtol=1e-12)


@given(st.integers(3, 8), st.integers(0, 10**6))
def test_maximum_tree_equals_mst_of_neg_log(d, seed):
    rng = np.random.default_rng(seed)
    chi = _sym(rng.uniform(0.01, 0.99, size=d * (d - 1) // 2), d)
    np.fill_diagonal(chi, 1.0)
    assert maximum_spanning_tree(chi, warn=False) == tree_from_chi(chi, warn=False)


@given(st.integers(3, 8), st.integers(0, 10**6))
def test_permutation_equivariance(d, seed):
    rng = np.random.default_rng(seed)
    w = _sym(rng.uniform(0, 10, size=d * (d - 1) // 2), d)
    perm = rng.permutation(d)
    # node perm[i] of the permuted problem is node i of the original
    wp = np.empty_like(w)
    wp[np.ix_(perm, perm)] = w
    assert mst(wp, warn=False) == mst(w, warn=False).relabel(perm)


@given(st.integers(3, 12), st.integers(0, 10**6))
def test_population_chi_recovers_tree(d, seed):
    rng = np.random.default_rng(seed)
    tree = random_tree(d, rng)
    model = TreeModel.hr(tree, {e: rng.uniform(0.5, 6) for e in tree.edges})
    assert tree_from_chi(model.chi_matrix()) == tree


# --- learning from data --------------------------------------------------------


def _pair_increments(gamma=1.0, n=4000, seed=0):
    model = HeterogeneousStableModel(TreeModel.hr(TreeTopology(2, ((0, 1),)), {(0, 1): gamma}), MarginalSpec.standard(2))
    return simulate_increments(model, SimConfig(epsilon=0.01, n_steps=n, seed=seed))


def test_two_nodes_always_one_edge():
    learned = learn_tree(_pair_increments(), 400)
    assert learned.topology.edges == ((0, 1),)
    assert learned.k == 400
    assert_allclose(learned.edge_weights[(0, 1)], -np.log(learned.chi_hat[(0, 1)]))
    assert learned.gamma_hat[(0, 1)] > 0
    assert 0 <= learned.m_hat[(0, 1)] <= 1


def test_comonotone_columns_warn():
    x = np.random.default_rng(1).standard_cauchy(size=(200, 1))
    x = np.hstack([x, 2 * x, x + 5])
    with pytest.warns(NonUniqueTreeWarning):
        learned = learn_tree(x, 20)
    assert learned.topology.edges == ((0, 1), (0, 2))
    assert all(g == 0.0 for g in learned.gamma_hat.values())


def test_learned_from_estimate_matches_learn_tree():
    inc = _pair_increments(seed=2)
    a = learn_tree(inc, 300)
    b = learned_from_estimate(chi_hat(inc, 300))
    assert a == b


def test_chain_recovered_from_simulation():
    tree = TreeTopology.chain(4)
    model = HeterogeneousStableModel(
        TreeModel.hr(tree, {e: 1.0 for e in tree.edges}), MarginalSpec.standard(4)
    )
    inc = simulate_increments(model, SimConfig(epsilon=0.01, n_steps=5000, seed=3))
    learned = learn_tree(inc, 500)
    assert learned.topology == tree
    for e in tree.edges:
        assert abs(learned.chi_hat[e] - chi_closed_form("hr", 1.0)) < 0.08


# --- stability -------------------------------------------------------------------


def test_stability_two_nodes():
    assert subsample_stability(_pair_increments(n=400), 40, n_subsamples=10, rng=0) == {(0, 1): 1.0}


def test_stability_frequencies_sum_to_edge_count():
    x = np.random.default_rng(4).standard_cauchy(size=(300, 4))
    freq = subsample_stability(x, 120, n_subsamples=25, rng=5)
    assert sorted(freq) == list(itertools.combinations(range(4), 2))
    assert_allclose(sum(freq.values()), 3.0)
    assert all(0 <= f <= 1 for f in freq.values())


def test_stability_strong_edges_selected():
    tree = TreeTopology.star(4, center=0)
    model = HeterogeneousStableModel(TreeModel.hr(tree, {e: 0.3 for e in tree.edges}), MarginalSpec.standard(4))
    inc = simulate_increments(model, SimConfig(epsilon=0.01, n_steps=2000, seed=6))
    freq = subsample_stability(inc, 200, n_subsamples=50, rng=7)
    for e in tree.edges:
        assert freq[e] >= 0.9


def test_stability_is_seeded():
    x = np.random.default_rng(8).standard_cauchy(size=(100, 4))
    assert subsample_stability(x, 50, 20, rng=9) == subsample_stability(x, 50, 20, rng=9)


@pytest.mark.parametrize("kw", [{"n_subsamples": 0}])
def test_stability_validation(kw):
    with pytest.raises(ValidationError):
        subsample_stability(np.ones((10, 2)), 2, **kw)
    with pytest.raises(ValidationError):
        subsample_stability(np.ones((3, 2)), 2)


# --- recovery study ----------------------------------------------------------


def test_recovery_two_nodes_is_certain():
    cells = recovery_study(2, [200], [0.9], reps=3, rng=0)
    assert [(c.n, c.q, c.proportion, c.reps) for c in cells] == [(200, 0.9, 1.0, 3)]


def test_recovery_grid_shape_and_order():
    cells = recovery_study(3, [100, 200], [0.8, 0.9], reps=2, rng=1)
    assert [(c.n, c.q) for c in cells] == [(100, 0.8), (100, 0.9), (200, 0.8), (200, 0.9)]
    assert all(c.proportion in (0.0, 0.5, 1.0) for c in cells)


def test_recovery_seeded_and_thread_invariant():
    a = recovery_study(4, [300], [0.9], reps=4, rng=2, threads=1)
    b = recovery_study(4, [300], [0.9], reps=4, rng=2, threads=3)
    assert a == b


@pytest.mark.parametrize(
    "args", [(1, [100], [0.9], 2), (3, [], [0.9], 2), (3, [100], [1.0], 2), (3, [100], [0.9], 0)]
)
def test_recovery_validation(args):
    with pytest.raises(ValidationError):
        recovery_study(*args)
