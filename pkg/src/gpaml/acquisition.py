"""Multi-step acquisition campaigns and the metadata diagnostic studies.

A campaign starts from ``n_start`` points, and at each step a policy chooses
how to split the next ``n`` points between categories.  Those points are
drawn from a finite pool, the learner is retrained on everything acquired so
far, and it is scored on a holdout set fixed for the whole campaign.
"""

import csv
import time
from dataclasses import dataclass, field

import numpy as np

from . import learner as _learner
from ._random import as_generator, derive, derive_seed, master_seed
from ._validation import check_proportion, round_half_up
from .balance_experiment import BalanceDesign, run_balance_experiment
from .conic import DEFAULT_Q, build_transect, gpaml_step
from .dataset import A, B, DatasetError, sample_balance

GPAML_POLICY = "gpaml"
RANDOM = "random"
RANDOM_ACTION = "random_action"
FIXED = "fixed"
ALL_A = "all_a"
ALL_B = "all_b"
POLICY_KINDS = (GPAML_POLICY, RANDOM, RANDOM_ACTION, FIXED, ALL_A, ALL_B)

TRACE_HEADER = ("step", "N", "n_a_total", "n_b_total", "prop_a", "chosen_n_a", "chosen_n_b",
                "policy", "oos_score", "clamped")
SUITABILITY_HEADER = ("category", "rep", "n_a", "n_b", "score")
ROBUSTNESS_HEADER = ("size", "rep", "chosen_n_a", "chosen_n_b", "good")


class PoolExhausted(RuntimeError):
    """The pool cannot supply the requested acquisition."""


@dataclass(frozen=True)
class Policy:
    """Acquisition rule.

    ``kind`` is one of ``gpaml``, ``random`` (draw ``n`` points from the pool
    regardless of category), ``random_action`` (uniform over the ``n + 1``
    splits), ``fixed`` (A-share ``proportion``), ``all_a`` or ``all_b``.
    """

    kind: str
    proportion: float = None

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise ValueError(f"unknown policy {self.kind!r}; expected one of {POLICY_KINDS}")
        if self.kind == FIXED:
            if self.proportion is None:
                raise ValueError("fixed policy needs a proportion")
            check_proportion(self.proportion, "proportion")

    @classmethod
    def parse(cls, text):
        """``"gpaml"``, ``"random"``, ``"fixed:0.1"``, ... ."""
        text = str(text).strip().lower().replace("-", "_")
        if text.startswith(FIXED):
            _, _, p = text.partition(":")
            try:
                return cls(FIXED, float(p))
            except ValueError:
                raise ValueError(f"fixed policy needs a proportion, e.g. 'fixed:0.1'; got {text!r}") from None
        return cls(text)

    @property
    def name(self):
        return f"{FIXED}:{self.proportion:g}" if self.kind == FIXED else self.kind

    @property
    def clamps(self):
        """Adaptive policies shift a shortfall onto the other category; fixed-split ones stop."""
        return self.kind in (GPAML_POLICY, RANDOM_ACTION, RANDOM)


@dataclass(frozen=True)
class PolicyState:
    n_a: int
    n_b: int
    n: int
    pool_a: int
    pool_b: int
    experiment: object = None
    q: int = DEFAULT_Q


class Choice(tuple):
    """``(n_a, n_b)`` plus whether it was clamped and the GPAML decision, if any."""

    def __new__(cls, n_a, n_b, clamped=False, decision=None):
        self = super().__new__(cls, (int(n_a), int(n_b)))
        self.clamped = clamped
        self.decision = decision
        return self

    n_a = property(lambda self: self[0])
    n_b = property(lambda self: self[1])


def _clamp(n_a, n_b, pool_a, pool_b):
    n = n_a + n_b
    if n_a > pool_a:
        n_a, n_b = pool_a, n - pool_a
    if n_b > pool_b:
        n_a, n_b = n - pool_b, pool_b
    return n_a, n_b


def apply_policy(policy, state, rng=None, clamp=None):
    """Split the next ``state.n`` points between categories.

    Raises
    ------
    PoolExhausted
        Fewer than ``n`` points remain, or a non-clamping policy asks for more
        points of one category than the pool holds.
    """
    rng = as_generator(rng)
    n = state.n
    if state.pool_a + state.pool_b < n:
        raise PoolExhausted(f"pool has {state.pool_a + state.pool_b} points, need {n}")
    decision = None
    if policy.kind == GPAML_POLICY:
        if state.experiment is None:
            raise ValueError("GPAML policy needs balance-experiment data")
        decision = gpaml_step(state.experiment, state.n_a, state.n_b, n, state.q)
        n_a = decision.n_a
    elif policy.kind == RANDOM:
        n_a = int(rng.hypergeometric(state.pool_a, state.pool_b, n))
    elif policy.kind == RANDOM_ACTION:
        n_a = int(rng.integers(0, n + 1))
    elif policy.kind == FIXED:
        n_a = round_half_up(policy.proportion * n)
    elif policy.kind == ALL_A:
        n_a = n
    else:
        n_a = 0
    n_b = n - n_a
    if n_a <= state.pool_a and n_b <= state.pool_b:
        return Choice(n_a, n_b, False, decision)
    if not (policy.clamps if clamp is None else clamp):
        raise PoolExhausted(
            f"policy {policy.name} wants ({n_a}, {n_b}) but pool holds ({state.pool_a}, {state.pool_b})"
        )
    return Choice(*_clamp(n_a, n_b, state.pool_a, state.pool_b), True, decision)


@dataclass(frozen=True)
class RunConfig:
    """Campaign settings.

    The starting balance is ``start_n_a`` if given, else uniform on
    ``start_n_a_range`` (inclusive), else ``n_start`` split by ``p0``.
    """

    n_start: int = 100
    n_stop: int = 500
    step: int = 20
    design: BalanceDesign = field(default_factory=BalanceDesign)
    q: int = DEFAULT_Q
    holdout: int = 1000
    start_n_a: int = None
    start_n_a_range: tuple = None
    n_jobs: int = 1

    def __post_init__(self):
        if not self.n_start < self.n_stop:
            raise ValueError("n_start must be smaller than n_stop")
        if self.step < 1 or (self.n_stop - self.n_start) % self.step:
            raise ValueError("n_stop - n_start must be a positive multiple of step")
        if self.holdout < 1:
            raise ValueError("holdout must be >= 1")

    @property
    def metric(self):
        return self.design.metric

    @property
    def n_steps(self):
        return (self.n_stop - self.n_start) // self.step


@dataclass(frozen=True)
class TraceRow:
    step: int
    N: int
    n_a_total: int
    n_b_total: int
    chosen_n_a: int
    chosen_n_b: int
    policy: str
    oos_score: float
    clamped: bool
    wall_time: float = 0.0

    @property
    def prop_a(self):
        return self.n_a_total / self.N


@dataclass
class AcquisitionTrace:
    rows: list = field(default_factory=list)
    policy: str = ""
    seed: int = 0
    stop_reason: str = None
    provenance: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.rows)

    @property
    def final(self):
        return self.rows[-1]

    def to_csv(self, path):
        """Write the trace; wall time is left out so reruns are byte-identical."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(TRACE_HEADER)
            for r in self.rows:
                w.writerow([
                    r.step, r.N, r.n_a_total, r.n_b_total, repr(r.prop_a),
                    "" if r.step == 0 else r.chosen_n_a, "" if r.step == 0 else r.chosen_n_b,
                    r.policy, repr(float(r.oos_score)), int(r.clamped),
                ])


def _oos_score(dataset, spec, holdout, metric, rng):
    if spec.is_oracle:
        return _learner.toy_accuracy(dataset.n_a, dataset.n_b)
    model = _learner.train(spec, dataset, rng)
    return _learner.evaluate(model, holdout, metric)


def carve_holdout(dataset, size, rng=None):
    """Holdout of ``size`` points at the population proportion, and the rest."""
    h_a = round_half_up(size * dataset.p0[0])
    h_b = size - h_a
    holdout = sample_balance(dataset, h_a, h_b, rng)
    return holdout, dataset.drop_ids(holdout.ids)


def run_campaign(dataset, learner_spec, policy, config=None, seed=0):
    """Grow a training set from ``n_start`` to ``n_stop`` under ``policy``.

    A fresh balance experiment is run at every GPAML step.  The campaign ends
    early (``trace.stop_reason`` set) if the pool cannot satisfy the policy.
    """
    config = config or RunConfig()
    seed = master_seed(seed)
    rng = derive(seed, 0)
    holdout, pool = carve_holdout(dataset, config.holdout, rng)

    if config.start_n_a is not None:
        start_a = int(config.start_n_a)
    elif config.start_n_a_range is not None:
        lo, hi = config.start_n_a_range
        start_a = int(rng.integers(lo, hi + 1))
    else:
        start_a = round_half_up(config.n_start * dataset.p0[0])
    current = sample_balance(pool, start_a, config.n_start - start_a, rng)
    pool = pool.drop_ids(current.ids)

    trace = AcquisitionTrace(policy=policy.name, seed=seed, provenance={
        "N": dataset.n, "p0": dataset.p0, "holdout": config.holdout,
        "n_start": config.n_start, "n_stop": config.n_stop, "step": config.step,
    })
    t0 = time.perf_counter()
    score0 = _oos_score(current, learner_spec, holdout, config.metric, derive(seed, 2, 0))
    trace.rows.append(TraceRow(0, current.n, current.n_a, current.n_b, 0, 0, policy.name,
                               score0, False, time.perf_counter() - t0))

    for step in range(1, config.n_steps + 1):
        t0 = time.perf_counter()
        experiment = None
        if policy.kind == GPAML_POLICY:
            experiment = run_balance_experiment(
                current, learner_spec, config.design, seed=derive_seed(seed, 1, step),
                n_jobs=config.n_jobs,
            )
        state = PolicyState(current.n_a, current.n_b, config.step, pool.n_a, pool.n_b,
                            experiment, config.q)
        step_rng = derive(seed, 3, step)
        try:
            choice = apply_policy(policy, state, step_rng)
        except PoolExhausted as exc:
            trace.stop_reason = f"step {step}: {exc}"
            break
        acquired = sample_balance(pool, choice.n_a, choice.n_b, step_rng)
        pool = pool.drop_ids(acquired.ids)
        current = current.concat(acquired)
        score_ = _oos_score(current, learner_spec, holdout, config.metric, derive(seed, 2, step))
        trace.rows.append(TraceRow(
            step, current.n, current.n_a, current.n_b, choice.n_a, choice.n_b, policy.name,
            score_, choice.clamped, time.perf_counter() - t0,
        ))
    return trace


# ---------------------------------------------------------------------------
# diagnostics


@dataclass
class SuitabilityResult:
    scores: dict
    counts: dict

    @property
    def difference(self):
        """Mean score when trained mostly on A minus mean when trained mostly on B."""
        return float(np.mean(self.scores[A]) - np.mean(self.scores[B]))

    @property
    def std_error(self):
        a, b = np.asarray(self.scores[A]), np.asarray(self.scores[B])
        if a.size < 2 or b.size < 2:
            return float("nan")
        return float(np.sqrt(a.var(ddof=1) / a.size + b.var(ddof=1) / b.size))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(SUITABILITY_HEADER)
            for tag in (A, B):
                na, nb = self.counts[tag]
                for m, s in enumerate(self.scores[tag]):
                    w.writerow([tag, m, na, nb, repr(float(s))])


def metadata_suitability_check(dataset, learner_spec, reps=100, split=(90, 10), holdout=500,
                               metric=_learner.CCR, seed=0):
    """Score learners trained mostly on one category, for each category.

    For category C each repetition trains on ``split[0]`` points of C and
    ``split[1]`` of the other category and scores on a fresh holdout drawn at
    the population proportion, disjoint from the training points.
    """
    seed = master_seed(seed)
    major, minor = split
    scores = {A: [], B: []}
    counts = {A: (major, minor), B: (minor, major)}
    for c, tag in enumerate((A, B)):
        na, nb = counts[tag]
        for m in range(reps):
            rng = derive(seed, c, m)
            if learner_spec.is_oracle:
                scores[tag].append(_learner.oracle_accuracy(na, nb, rng, learner_spec.noise_sd))
                continue
            test, rest = carve_holdout(dataset, holdout, rng)
            try:
                train_set = sample_balance(rest, na, nb, rng)
            except DatasetError as exc:
                raise DatasetError(f"suitability check: {exc}") from None
            model = _learner.train(learner_spec, train_set, rng)
            scores[tag].append(_learner.evaluate(model, test, metric))
    return SuitabilityResult({k: np.asarray(v) for k, v in scores.items()}, counts)


@dataclass
class RobustnessResult:
    sizes: tuple
    chosen: dict
    good: dict
    full: object = None

    def fraction_good(self, size):
        return float(np.mean(self.good[size]))

    def variance(self, size):
        return float(np.var(np.asarray(self.chosen[size])[:, 0]))

    def distribution(self, size):
        values, freq = np.unique(np.asarray(self.chosen[size])[:, 0], return_counts=True)
        return dict(zip(values.tolist(), freq.tolist()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(ROBUSTNESS_HEADER)
            for size in self.sizes:
                for rep, ((na, nb), ok) in enumerate(zip(self.chosen[size], self.good[size])):
                    w.writerow([size, rep, na, nb, int(ok)])


def subsample_robustness_study(dataset, learner_spec, state, b_total=250, sizes=(100, 150, 200),
                               reps=100, z=10, q=DEFAULT_Q, metric=_learner.CCR, good=None,
                               seed=0, experiment=None):
    """How much does the GPAML decision depend on which balances were sampled?

    Runs one balance experiment with ``b_total`` blocks, then for every size
    and repetition refits GPAML on a random subset of that many blocks (all
    replicates of each).  ``state`` is ``(n_a, n_b, n)``; ``good(n_a, n_b)``
    classifies decisions and defaults to always True.
    """
    seed = master_seed(seed)
    n_a, n_b, n = state
    if max(sizes) > b_total:
        raise ValueError(f"subset size {max(sizes)} exceeds b_total={b_total}")
    if experiment is None:
        experiment = run_balance_experiment(
            dataset, learner_spec, BalanceDesign(b_total, z, metric), seed=derive_seed(seed, 0),
        )
    blocks = np.unique(experiment.block)
    good = good or (lambda na, nb: True)
    chosen, flags = {}, {}
    for s, size in enumerate(sizes):
        chosen[size], flags[size] = [], []
        for rep in range(reps):
            pick = np.sort(derive(seed, 1, s, rep).choice(blocks, size=size, replace=False))
            d = gpaml_step(experiment.select_blocks(pick), n_a, n_b, n, q)
            chosen[size].append((d.n_a, d.n_b))
            flags[size].append(bool(good(d.n_a, d.n_b)))
    return RobustnessResult(tuple(sizes), chosen, flags, experiment)


def noiseless_best_move(n_a, n_b, n):
    """Brute-force best A-count for the toy oracle over the true transect."""
    T = build_transect(n_a, n_b, n)
    return int(n - np.argmax(_learner.toy_accuracy(T[:, 0], T[:, 1])))
