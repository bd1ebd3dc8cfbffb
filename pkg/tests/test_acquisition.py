import math

import numpy as np
import pytest

from gpaml.acquisition import (
    ALL_B, FIXED, Policy, PolicyState, PoolExhausted, RunConfig, apply_policy, carve_holdout,
    metadata_suitability_check, noiseless_best_move, run_campaign, subsample_robustness_study,
)
from gpaml.balance_experiment import BalanceDesign
from gpaml.dataset import MetadataDataset, synthetic_classification
from gpaml.learner import LearnerSpec

ORACLE = LearnerSpec(kind="oracle")


def toy(x1, x2):
    return 1 - math.exp(-x1 * x2 / (10 * x1 + 15 * x2))


def test_policy_parse():
    assert Policy.parse("fixed:0.1") == Policy(FIXED, 0.1)
    assert Policy.parse("All-B").kind == ALL_B
    assert Policy.parse("fixed:0.25").name == "fixed:0.25"
    for bad in ("fixed", "fixed:1.5", "greedy"):
        with pytest.raises(ValueError):
            Policy.parse(bad)


def test_simple_policies():
    state = PolicyState(50, 50, 20, 100, 100)
    assert apply_policy(Policy(FIXED, 0.1), state) == (2, 18)
    assert apply_policy(Policy(FIXED, 0.125), state) == (3, 17)  # 2.5 rounds up
    assert apply_policy(Policy.parse("all_a"), state) == (20, 0)
    assert apply_policy(Policy.parse("all_b"), state) == (0, 20)
    draws = [apply_policy(Policy.parse("random_action"), state, s).n_a for s in range(2000)]
    assert set(draws) == set(range(21))


def test_random_policy_tracks_pool():
    state = PolicyState(50, 50, 20, 800, 200)
    rng = np.random.default_rng(0)
    draws = np.array([apply_policy(Policy.parse("random"), state, rng).n_a for _ in range(4000)])
    assert draws.mean() / 20 == pytest.approx(0.8, abs=0.02)
    # hypergeometric variance n p (1-p) (M-n)/(M-1)
    assert draws.var() == pytest.approx(20 * 0.8 * 0.2 * 980 / 999, rel=0.1)


def test_exhaustion_and_clamping():
    state = PolicyState(50, 50, 20, 100, 5)
    with pytest.raises(PoolExhausted):
        apply_policy(Policy.parse("all_b"), state)
    c = apply_policy(Policy.parse("random_action"), PolicyState(5, 5, 10, 30, 2), 1, clamp=True)
    assert c.n_b <= 2 and c.n_a + c.n_b == 10
    with pytest.raises(PoolExhausted, match="need 20"):
        apply_policy(Policy.parse("random"), PolicyState(5, 5, 20, 10, 5))


def test_carve_holdout():
    ds = MetadataDataset.from_counts(300, 100)
    hold, rest = carve_holdout(ds, 40, 0)
    assert hold.counts == (30, 10)
    assert set(hold.ids).isdisjoint(rest.ids) and rest.n == 360


def test_campaign_rows_and_determinism():
    ds = MetadataDataset.from_counts(300, 300)
    cfg = RunConfig(n_start=40, n_stop=100, step=20, holdout=50)
    t1 = run_campaign(ds, ORACLE, Policy.parse("random_action"), cfg, seed=4)
    t2 = run_campaign(ds, ORACLE, Policy.parse("random_action"), cfg, seed=4)
    assert len(t1) == 4
    assert [r.N for r in t1.rows] == [40, 60, 80, 100]
    assert [(r.n_a_total, r.n_b_total) for r in t1.rows] == [(r.n_a_total, r.n_b_total) for r in t2.rows]
    for prev, row in zip(t1.rows, t1.rows[1:]):
        assert row.n_a_total == prev.n_a_total + row.chosen_n_a
        assert row.oos_score == pytest.approx(toy(row.n_a_total, row.n_b_total), abs=1e-15)


def test_all_b_stops_when_pool_runs_out():
    ds = MetadataDataset.from_counts(200, 60)
    cfg = RunConfig(n_start=20, n_stop=200, step=20, holdout=20)
    trace = run_campaign(ds, ORACLE, Policy.parse("all_b"), cfg, seed=0)
    assert trace.stop_reason is not None
    assert trace.final.n_b_total <= 60 - 5


def test_gpaml_campaign_acquires_disjoint_points():
    ds = synthetic_classification(150, 4.0, rng=3)
    cfg = RunConfig(n_start=40, n_stop=60, step=10, holdout=40, q=10,
                    design=BalanceDesign(b=6, z=2))
    trace = run_campaign(ds, LearnerSpec(tree_count=5), Policy.parse("gpaml"), cfg, seed=1)
    assert len(trace) == 3
    assert trace.final.N == 60
    assert all(0 <= r.oos_score <= 1 for r in trace.rows)


def test_start_balance_rules():
    ds = MetadataDataset.from_counts(400, 400)
    fixed = RunConfig(n_start=40, n_stop=60, step=20, holdout=10, start_n_a=7)
    assert run_campaign(ds, ORACLE, Policy(FIXED, 0.5), fixed).rows[0].n_a_total == 7
    ranged = RunConfig(n_start=40, n_stop=60, step=20, holdout=10, start_n_a_range=(10, 12))
    starts = {run_campaign(ds, ORACLE, Policy(FIXED, 0.5), ranged, s).rows[0].n_a_total for s in range(30)}
    assert starts == {10, 11, 12}


def test_suitability_noiseless_oracle(tmp_path):
    res = metadata_suitability_check(None, LearnerSpec(kind="oracle", noise_sd=0.0), reps=3)
    assert res.difference == pytest.approx(toy(90, 10) - toy(10, 90), abs=1e-12)
    res.to_csv(tmp_path / "s.csv")
    assert len((tmp_path / "s.csv").read_text().splitlines()) == 7


def test_suitability_sign_on_synthetic():
    # B's class signal is weak, so mostly-B training buys little and mostly-A wins
    ds = synthetic_classification(600, 4.0, rng=0, hard_ratio=0.3)
    res = metadata_suitability_check(ds, LearnerSpec(tree_count=20), reps=8, holdout=200, seed=1)
    assert res.difference > 2 * res.std_error > 0


def test_robustness_full_size_is_identical():
    ds = MetadataDataset.from_counts(50, 50)
    res = subsample_robustness_study(ds, ORACLE, (50, 50, 20), b_total=30, sizes=(15, 30), reps=3,
                                     z=5, q=20, good=lambda na, nb: 13 <= na <= 19, seed=2)
    assert len(set(res.chosen[30])) == 1
    assert 0 <= res.fraction_good(15) <= 1
    assert sum(res.distribution(15).values()) == 3
    with pytest.raises(ValueError):
        subsample_robustness_study(ds, ORACLE, (50, 50, 20), b_total=10, sizes=(20,))


def test_noiseless_best_move():
    assert noiseless_best_move(50, 50, 20) == 16
