import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpaml.balance_experiment import BalanceDesign, run_balance_experiment
from gpaml.conic import (
    GPAML, InfeasibleConeError, argmax_with_ties, build_transect, decide_from_means,
    ending_proportions, linear_weights, reference_locations, reference_transects, scale_range,
)
from gpaml.dataset import MetadataDataset
from gpaml.learner import LearnerSpec


def test_transect_rows():
    T = build_transect(50, 50, 20)
    assert T.shape == (21, 2)
    np.testing.assert_array_equal(T[0], [70, 50])
    np.testing.assert_array_equal(T[20], [50, 70])
    assert np.all(T.sum(axis=1) == 120)
    np.testing.assert_array_equal(build_transect(1, 1, 1), [[2, 1], [1, 2]])
    with pytest.raises(ValueError):
        build_transect(0, 5, 3)


def test_scale_range_for_toy_state():
    s_min, s_max = scale_range(50, 50, 20, (45, 45))
    assert s_max == pytest.approx(45 / 70)
    assert s_min == pytest.approx(max(2 / 50, 0.05 * 45 / 70))


def test_reference_example():
    # (20, 20) with bounds (20, 20) and n = 10: largest scale 20/30
    refs = reference_locations(20, 20, 10, (20, 20), q=5)
    T = build_transect(20, 20, 10)
    fan = reference_transects(refs, T)
    np.testing.assert_allclose(fan.transects[-1], (20 / 30) * T)
    refs = reference_locations(20, 20, 10, (12, 12), q=1)
    fan = reference_transects(refs, T)
    np.testing.assert_allclose(fan.transects[0], 0.4 * T)


def test_linear_weights():
    np.testing.assert_allclose(linear_weights(np.array([1.0, 2.0, 3.0])), [1 / 6, 2 / 6, 3 / 6])


def test_tie_break_on_flat_surface():
    n_a, n_b, n = 30, 10, 10
    props = ending_proportions(n_a, n_b, n)
    k = argmax_with_ties(np.zeros(n + 1), props, n_a / (n_a + n_b))
    # 0.75 is reached exactly by k = 2.5; rows 2 and 3 are equally close, take 2
    assert k == int(np.argmin(np.abs(props - 0.75)))
    assert argmax_with_ties(np.array([1.0, 2.0, 2.0]), np.array([0.9, 0.5, 0.1]), 0.2) == 2


def test_infeasible_cone():
    with pytest.raises(InfeasibleConeError, match="too small"):
        reference_locations(50, 50, 20, (1, 1))


@settings(max_examples=100, deadline=None)
@given(seed=st.integers(0, 2**32 - 1), n_a=st.integers(5, 200), n_b=st.integers(5, 200),
       n=st.integers(1, 60), frac=st.floats(0.3, 1.5), q=st.integers(1, 30))
def test_fan_geometry(seed, n_a, n_b, n, frac, q):
    bounds = (max(1, int(frac * (n_a + n))), max(1, int(frac * (n_b + n))))
    try:
        refs = reference_locations(n_a, n_b, n, bounds, q)
    except InfeasibleConeError:
        return
    T = build_transect(n_a, n_b, n)
    fan = reference_transects(refs, T)
    # every fan point stays inside the sampling bounds
    assert np.all(fan.points <= np.asarray(bounds) + 1e-9)
    assert np.all(fan.points > 0)
    # each scaled transect keeps the ending proportions
    props = ending_proportions(n_a, n_b, n)
    for tr in fan.transects:
        np.testing.assert_allclose(tr[:, 0] / tr.sum(axis=1), props, rtol=1e-12)
    # G is a convex combination of the columns
    rng = np.random.default_rng(seed)
    M = rng.uniform(0, 1, size=(n + 1, refs.q))
    k, G = decide_from_means(M, fan.weights, n_a, n_b, n)
    assert np.all(G >= M.min(axis=1) - 1e-12) and np.all(G <= M.max(axis=1) + 1e-12)
    # affine invariance of the decision
    k2, _ = decide_from_means(3.0 * M - 7.0, fan.weights, n_a, n_b, n)
    assert k == k2


def test_orientation_with_planted_surface():
    # a mean surface that rises with the B count pushes the decision to all-B
    n_a, n_b, n = 40, 40, 10
    M = np.tile(np.arange(n + 1, dtype=float)[:, None], (1, 4))
    k, _ = decide_from_means(M, np.full(4, 0.25), n_a, n_b, n)
    assert k == n


def test_gpaml_estimator_on_toy():
    data = run_balance_experiment(MetadataDataset.from_counts(50, 50), LearnerSpec(kind="oracle"),
                                  BalanceDesign(100, 10), seed=0)
    est = GPAML(q=50, bounds=data.bounds).fit(*data.training_data())
    d = est.decide(50, 50, 20)
    assert d.n_a + d.n_b == 20
    assert 10 <= d.n_a <= 20
    assert d.means.shape == (21, 50) and d.G.shape == (21,)
    assert d.G[d.index] == d.G.max()
    rows = list(d.decision_rows())
    assert sum(r["argmax"] for r in rows) == 1


def test_two_scales_are_the_endpoints():
    refs = reference_locations(50, 50, 20, (45, 45), q=2)
    np.testing.assert_allclose(refs.scales, scale_range(50, 50, 20, (45, 45)))
    assert reference_locations(50, 50, 20, (45, 45), q=1).scales[0] == pytest.approx(45 / 70)
