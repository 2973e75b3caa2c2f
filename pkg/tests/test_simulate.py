import itertools

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal
from scipy import stats

from levytree.errors import ValidationError
from levytree.estimate import chi_hat
from levytree.measures import MarginalSpec, clayton_tail, hr_bivariate_tail, orthant_weight
from levytree.simulate import (
    IncrementMatrix,
    SimConfig,
    drift_correction,
    rank_couple,
    rank_couple_matrix,
    sample_truncated_points,
    simulate_increments,
    truncated_mass,
)
from levytree.tree import EdgeSpec, HeterogeneousStableModel, TreeModel, TreeTopology

PAIR = TreeTopology(2, ((0, 1),))


def pair_model(family="hr", param=2.0, m=0.5):
    return TreeModel(PAIR, {(0, 1): EdgeSpec(family, param, m)})


def hr_chain():
    return TreeModel.hr(TreeTopology.chain(3), {(0, 1): 1.0, (1, 2): 2.0})


def stable(dep, alpha=1.0, drift=None):
    return HeterogeneousStableModel(dep, MarginalSpec.standard(dep.d, alpha), drift)


# --- truncated sampler ---------------------------------------------------------


def test_points_exceed_threshold():
    pts, _ = sample_truncated_points(hr_chain(), 0.3, 20_000, rng=1)
    assert np.all(np.abs(pts).max(axis=1) >= 0.3)


def test_independence_points_are_one_dimensional_pareto():
    pts, stats_ = sample_truncated_points(pair_model("independence"), 1.0, 100_000, rng=2)
    nonzero = (pts != 0).sum(axis=1)
    assert np.all(nonzero == 1)
    mag = np.abs(pts).max(axis=1)
    assert abs((mag > 2).mean() - 0.5) < 0.01
    assert abs((pts.sum(axis=1) > 0).mean() - 0.5) < 0.01
    # no two coordinates ever exceed together: every proposal is kept
    assert stats_.rate_estimate == 4.0


@pytest.mark.parametrize(
    "dep, eps",
    [(pair_model("hr", 2.0), 0.5), (pair_model("clayton", 0.5, 0.8), 1.0), (hr_chain(), 0.5)],
)
def test_rate_identity(dep, eps):
    _, st = sample_truncated_points(dep, eps, 200_000, rng=3)
    assert abs(st.rate_estimate - truncated_mass(dep, eps)) <= 3 * st.rate_se


@pytest.mark.parametrize(
    "dep, tail",
    [
        (pair_model("hr", 2.0, 0.7), lambda x: hr_bivariate_tail(2.0, x[0], x[1])),
        (pair_model("clayton", 0.5, 0.3), lambda x: clayton_tail(0.5, np.asarray(x))),
    ],
)
def test_rectangle_masses_match_tails(dep, tail):
    eps, size = 0.5, 200_000
    pts, st = sample_truncated_points(dep, eps, size, rng=4)
    rate = truncated_mass(dep, eps)
    spec = dep.edges[(0, 1)]
    grid = [0.5, 1.0, 2.5, np.inf]
    for s1, s2 in itertools.product((1, -1), repeat=2):
        w = spec.m if s1 == s2 else 1 - spec.m
        a = pts * np.array([s1, s2])
        for (l1, u1), (l2, u2) in itertools.product(zip(grid[:-1], grid[1:]), repeat=2):
            def upper(x1, x2):
                return tail([x1, x2]) if np.isfinite(x1) and np.isfinite(x2) else 0.0

            exact = w * (upper(l1, l2) - upper(u1, l2) - upper(l1, u2) + upper(u1, u2))
            inside = (a[:, 0] > l1) & (a[:, 0] <= u1) & (a[:, 1] > l2) & (a[:, 1] <= u2)
            p = exact / rate
            se = np.sqrt(p * (1 - p) / size)
            assert abs(inside.mean() - p) <= 3 * se + 1e-12


def test_orthant_frequencies():
    dep = TreeModel.hr(TreeTopology.chain(3), {(0, 1): 1.0, (1, 2): 1.0}, m={(0, 1): 0.8, (1, 2): 0.3})
    pts, _ = sample_truncated_points(dep, 0.5, 50_000, rng=5)
    signs = [tuple(int(v) for v in s) for s in np.sign(pts)]
    orth = list(itertools.product((1, -1), repeat=3))
    observed = np.array([signs.count(s) for s in orth])
    expected = np.array([orthant_weight(dep.weights, dep.tree, s) / 2 for s in orth]) * len(signs)
    assert stats.chisquare(observed, expected).pvalue > 1e-3


def test_truncated_mass_closed_forms():
    assert truncated_mass(pair_model("independence"), 0.5) == 8.0
    assert_allclose(truncated_mass(pair_model("hr", 2.0), 1.0), 2 * (2 - hr_bivariate_tail(2.0, 1.0, 1.0)))
    with pytest.raises(ValidationError):
        truncated_mass(TreeModel(TreeTopology.chain(3), {e: EdgeSpec("clayton", 0.5) for e in [(0, 1), (1, 2)]}), 1.0)


# --- drift ---------------------------------------------------------------------


def test_symmetric_drift_vanishes():
    model = stable(hr_chain())
    est = drift_correction(model, 0.01, 50_000, rng=6)
    assert np.all(np.abs(est.value) <= 3 * est.se)


def test_independence_alpha_one_drift_vanishes():
    est = drift_correction(stable(pair_model("independence")), 0.05, 20_000, rng=7)
    assert np.all(np.abs(est.value) <= 3 * est.se)


def test_drift_se_scales_with_sample_size():
    model = HeterogeneousStableModel(hr_chain(), MarginalSpec([1.5, 1.0, 0.7], [1.0, 2.0, 1.0], [0.5, 1.0, 1.0]))
    a = drift_correction(model, 0.05, 40_000, rng=8)
    b = drift_correction(model, 0.05, 160_000, rng=9)
    assert_allclose(b.se / a.se, 0.5, rtol=0.15)


def test_asymmetric_drift_is_nonzero():
    model = HeterogeneousStableModel(pair_model("hr", 1.0), MarginalSpec([1.0, 1.0], [2.0, 1.0], [0.5, 1.0]))
    est = drift_correction(model, 0.01, 50_000, rng=10)
    # coordinate 0: int_{0.01}^{1} (2 - 0.5) z^{-1} dz = 1.5 log(100)
    assert_allclose(est.compensation[0], 1.5 * np.log(100), rtol=0.05)


@pytest.mark.parametrize("eps", [1.0, 2.0, 0.0])
def test_drift_rejects_large_epsilon(eps):
    with pytest.raises(ValidationError):
        drift_correction(stable(hr_chain()), eps, 2000)


# --- increments ------------------------------------------------------------------


def test_same_seed_bit_identical():
    model = stable(hr_chain())
    cfg = SimConfig(epsilon=0.05, n_steps=500, seed=11)
    a = simulate_increments(model, cfg)
    b = simulate_increments(model, cfg)
    assert_array_equal(a.data, b.data)
    assert a.model_hash == b.model_hash


def test_threads_do_not_change_output(monkeypatch):
    import levytree.simulate as sim

    # force several chunks
    monkeypatch.setattr(sim, "_CHUNK_PROPOSALS", 2_000)
    model = stable(hr_chain())
    cfg = SimConfig(epsilon=0.05, n_steps=400, seed=12)
    assert_array_equal(simulate_increments(model, cfg, threads=1).data, simulate_increments(model, cfg, threads=3).data)


def test_backends_agree():
    model = HeterogeneousStableModel(hr_chain(), MarginalSpec([1.5, 1.0, 0.7], [1.0, 2.0, 1.0], [0.5, 1.0, 1.0]))
    cfg = SimConfig(epsilon=0.05, n_steps=300, seed=13)
    a = simulate_increments(model, cfg, backend="numba")
    b = simulate_increments(model, cfg, backend="numpy")
    assert_allclose(a.data, b.data, rtol=1e-10, atol=1e-10)
    assert_array_equal(a.jump_counts, b.jump_counts)


def test_jump_counts_have_truncated_rate():
    dep = pair_model("hr", 2.0)
    cfg = SimConfig(epsilon=0.1, n_steps=100_000, seed=14)
    inc = simulate_increments(stable(dep), cfg)
    assert_allclose(inc.jump_counts.mean(), truncated_mass(dep, 0.1), rtol=0.01)


def test_high_frequency_keeps_jump_rate():
    dep = pair_model("hr", 2.0)
    unit = simulate_increments(stable(dep), SimConfig(epsilon=0.1, n_steps=20_000, seed=15))
    hf = simulate_increments(stable(dep), SimConfig(epsilon=0.1, n_steps=20_000, step_kind="hf", seed=15))
    assert_allclose(hf.jump_counts.mean(), unit.jump_counts.mean(), rtol=0.02)


def test_independent_margins_chi_is_chance_level():
    # for independent columns joint exceedances occur by chance at rate (k/n)^2,
    # so chi_hat concentrates at k/n and vanishes only as q -> 1
    inc = simulate_increments(stable(pair_model("independence")), SimConfig(epsilon=0.01, n_steps=40_000, seed=16))
    est = chi_hat(inc, 4000)
    assert abs(est.chi[0, 1] - 0.1) <= 3 * np.sqrt(0.1 * 0.9 / 4000) * 1.1
    assert chi_hat(inc, 400).chi[0, 1] <= 0.05


def test_clayton_chi_converges_to_tail_value():
    inc = simulate_increments(stable(pair_model("clayton", 0.5)), SimConfig(epsilon=0.01, n_steps=40_000, seed=17))
    assert abs(chi_hat(inc, 800).chi[0, 1] - 2 ** (-1 / 0.5)) <= 0.05


def test_simconfig_validation():
    for kw in ({"epsilon": 0.0}, {"n_steps": 0}, {"step_kind": "daily"}, {"drift_mc_samples": 10}):
        with pytest.raises(ValidationError):
            SimConfig(**kw)


def test_increment_matrix_paths():
    inc = IncrementMatrix(np.array([[1.0, 2.0], [3.0, -1.0]]))
    assert_allclose(inc.paths(), [[1, 2], [4, 1]])
    assert inc.labels == ["X1", "X2"]
    with pytest.raises(ValidationError):
        IncrementMatrix(np.array([[np.nan, 1.0]]))


# --- rank coupling ------------------------------------------------------------


def test_rank_couple_example():
    out = rank_couple([0.5, -2.0, 1.0], [0.01, -0.03, 0.02])
    assert_allclose(out, [0.01, -0.03, 0.02])


def test_rank_couple_sorted_unchanged():
    obs = np.array([-1.0, 0.0, 2.0, 5.0])
    assert_array_equal(rank_couple([1, 2, 3, 4], obs), obs)


def test_rank_couple_ties_by_time():
    assert_array_equal(rank_couple([1.0, 1.0, 0.0], [10.0, 30.0, 20.0]), [20.0, 30.0, 10.0])


def test_rank_couple_permutation_and_monotone():
    rng = np.random.default_rng(18)
    s, o = rng.standard_cauchy(200), rng.normal(size=200)
    out = rank_couple(s, o)
    assert_array_equal(np.sort(out), np.sort(o))
    assert_array_equal(np.argsort(out), np.argsort(s))


def test_rank_couple_errors():
    with pytest.raises(ValidationError):
        rank_couple([1.0, 2.0], [1.0])
    with pytest.raises(ValidationError):
        rank_couple([1.0, 2.0], [1.0, np.nan])
    with pytest.raises(ValidationError):
        rank_couple_matrix(np.ones((3, 2)), np.ones((3, 3)))
