"""Blocked, replicated experiment over training-set metadata balance.

For each of ``b`` blocks a balance ``(n_a, n_b)`` is drawn, and for each of
``z`` replicates a fresh population-proportion test set is carved out of the
dataset, a training set with that balance is sampled from the remainder, the
learner is trained and its test score recorded.  The result is the design
``(X, Y)`` that the GP surrogate is fitted to.
"""

import csv
import logging
from dataclasses import dataclass, field

import numpy as np
from joblib import Parallel, delayed

from . import learner as _learner
from ._random import as_generator, derive, master_seed
from ._validation import check_positive_int, round_half_up
from .dataset import A, B, DatasetError, samp

logger = logging.getLogger(__name__)

TEST_FRACTION = 0.1
MAX_INVALID_FRACTION = 0.05
OBSERVATION_HEADER = ("block", "rep", "n_a", "n_b", "score")


class ExperimentError(RuntimeError):
    pass


@dataclass(frozen=True)
class BalanceDesign:
    """``b`` unique balances, each replicated ``z`` times.

    ``test_composition="random"`` draws the 10% test set without regard to
    category instead of at the population proportion.  It is experimental:
    the test proportion then tracks the current dataset, which can lock the
    acquisition onto the current balance.
    """

    b: int = 100
    z: int = 10
    metric: str = _learner.CCR
    test_composition: str = "population"

    def __post_init__(self):
        check_positive_int(self.b, "b")
        check_positive_int(self.z, "z")
        if self.metric not in _learner.METRICS:
            raise ValueError(f"unknown metric {self.metric!r}")
        if self.test_composition not in ("population", "random"):
            raise ValueError("test_composition must be 'population' or 'random'")

    @property
    def r(self):
        return self.b * self.z


def test_counts(n, p0):
    """Per-category test-set sizes: 10% of ``n`` split by ``p0``, at least 1 each."""
    t_a = max(1, round_half_up(TEST_FRACTION * n * p0[0]))
    t_b = max(1, round_half_up(TEST_FRACTION * n * p0[1]))
    return t_a, t_b


def sampling_bounds(dataset):
    """Largest training counts ``(B_A, B_B)`` that leave room for a test set."""
    t_a, t_b = test_counts(dataset.n, dataset.p0)
    return dataset.n_a - t_a, dataset.n_b - t_b


def compose_test_set(dataset, rng=None, composition="population"):
    """Split ``dataset`` into ``(test, pool)``.

    The test set holds ``test_counts(N, p0)`` points per category, sampled
    uniformly; ``pool`` is everything else.
    """
    t_a, t_b = test_counts(dataset.n, dataset.p0)
    if composition == "random":
        idx = as_generator(rng).choice(dataset.n, size=t_a + t_b, replace=False)
        test = dataset.take(np.sort(idx))
        return test, dataset.drop_ids(test.ids)
    if t_a > dataset.n_a or t_b > dataset.n_b:
        raise DatasetError(
            f"test set needs ({t_a}, {t_b}) points but dataset has ({dataset.n_a}, {dataset.n_b})"
        )
    test = samp(dataset, A, t_a, rng).concat(samp(dataset, B, t_b, rng))
    return test, dataset.drop_ids(test.ids)


@dataclass(eq=False)
class ExperimentData:
    """Balances ``X`` (r x 2) and observed scores ``Y`` grouped in blocks of ``z``.

    Rows whose learner failed have ``valid == False`` and ``Y == nan``.
    ``subsets`` (optional) holds ``(train_ids, test_ids)`` per row.
    """

    X: np.ndarray
    Y: np.ndarray
    block: np.ndarray
    rep: np.ndarray
    bounds: tuple
    valid: np.ndarray = None
    provenance: dict = field(default_factory=dict)
    subsets: list = None

    def __post_init__(self):
        self.X = np.asarray(self.X, dtype=np.int64).reshape(-1, 2)
        self.Y = np.asarray(self.Y, dtype=float).ravel()
        self.block = np.asarray(self.block, dtype=np.int64).ravel()
        self.rep = np.asarray(self.rep, dtype=np.int64).ravel()
        if self.valid is None:
            self.valid = np.isfinite(self.Y)
        self.valid = np.asarray(self.valid, dtype=bool)
        self.bounds = tuple(int(v) for v in self.bounds)
        if not (self.X.shape[0] == self.Y.shape[0] == self.block.shape[0] == self.rep.shape[0]):
            raise ValueError("ExperimentData columns have different lengths")

    def __len__(self):
        return self.Y.shape[0]

    @property
    def n_blocks(self):
        return np.unique(self.block).size

    def training_data(self):
        """Valid rows only, as float arrays ready for the GP."""
        return self.X[self.valid].astype(float), self.Y[self.valid]

    def select_blocks(self, blocks):
        keep = np.isin(self.block, np.asarray(blocks))
        return ExperimentData(
            self.X[keep], self.Y[keep], self.block[keep], self.rep[keep], self.bounds,
            self.valid[keep], dict(self.provenance),
            None if self.subsets is None else [s for s, k in zip(self.subsets, keep) if k],
        )

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(OBSERVATION_HEADER)
            for j, k, (na, nb), y in zip(self.block, self.rep, self.X, self.Y):
                w.writerow([int(j), int(k), int(na), int(nb), repr(float(y))])

    @classmethod
    def from_csv(cls, path, bounds=None):
        """Read ``observations.csv``; ``bounds`` default to the observed maxima."""
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        if not rows or tuple(s.strip() for s in rows[0]) != OBSERVATION_HEADER:
            raise ExperimentError(
                f"{path}: expected header {','.join(OBSERVATION_HEADER)}"
            )
        body = [r for r in rows[1:] if r]
        if not body:
            raise ExperimentError(f"{path}: no observations")
        cols = [[], [], [], [], []]
        for line, row in enumerate(body, start=2):
            if len(row) != 5:
                raise ExperimentError(f"{path}, line {line}: expected 5 fields, found {len(row)}")
            try:
                for c, conv, v in zip(cols, (int, int, int, int, float), row):
                    c.append(conv(v))
            except ValueError as exc:
                raise ExperimentError(f"{path}, line {line}: {exc}") from None
        X = np.column_stack([cols[2], cols[3]])
        if bounds is None:
            bounds = tuple(X.max(axis=0))
        return cls(X, cols[4], cols[0], cols[1], bounds)


def _draw_balances(b, bounds, rng):
    """``b`` distinct pairs uniform on ``{1..B_A} x {1..B_B}``."""
    ba, bb = bounds
    if ba < 1 or bb < 1:
        raise ExperimentError(f"sampling bounds {bounds} leave no room for training data")
    if b > ba * bb:
        raise ExperimentError(f"cannot draw {b} distinct balances from a {ba} x {bb} grid")
    cells = rng.choice(ba * bb, size=b, replace=False)
    return np.column_stack([1 + cells // bb, 1 + cells % bb])


def _run_replicate(dataset, spec, metric, composition, n_a, n_b, seed, j, k, keep):
    rng = derive(seed, 1, j, k)
    test, pool = compose_test_set(dataset, rng, composition)
    train_set = samp(pool, A, n_a, rng).concat(samp(pool, B, n_b, rng))
    ids = (train_set.ids, test.ids) if keep else None
    if spec.is_oracle:
        return _learner.oracle_accuracy(n_a, n_b, rng, spec.noise_sd), ids
    try:
        model = _learner.train(spec, train_set, rng)
        return _learner.evaluate(model, test, metric), ids
    except (_learner.LearnerError, ValueError) as exc:
        logger.warning("block %d rep %d failed: %s", j, k, exc)
        return float("nan"), ids


def run_balance_experiment(dataset, learner_spec, design=None, seed=0, n_jobs=1,
                           keep_subsets=False):
    """Run the blocked metadata-balance experiment on ``dataset``.

    Every (block, replicate) run draws from its own generator keyed on
    ``(seed, block, rep)``, so results do not depend on ``n_jobs``.

    Returns
    -------
    ExperimentData
    """
    design = design or BalanceDesign()
    seed = master_seed(seed)
    bounds = sampling_bounds(dataset)
    if bounds[0] < 1 or bounds[1] < 1:
        raise ExperimentError(
            f"dataset ({dataset.n_a}, {dataset.n_b}) too small: sampling bounds {bounds}"
        )
    balances = _draw_balances(design.b, bounds, derive(seed, 0))
    jobs = [
        (int(balances[j, 0]), int(balances[j, 1]), j, k)
        for j in range(design.b) for k in range(design.z)
    ]
    args = (dataset, learner_spec, design.metric, design.test_composition)
    if n_jobs == 1 or learner_spec.is_oracle:
        results = [_run_replicate(*args, na, nb, seed, j, k, keep_subsets) for na, nb, j, k in jobs]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_run_replicate)(*args, na, nb, seed, j, k, keep_subsets)
            for na, nb, j, k in jobs
        )
    Y = np.array([float(y) for y, _ in results])
    valid = np.isfinite(Y)
    n_bad = int(np.sum(~valid))
    if n_bad > MAX_INVALID_FRACTION * len(Y):
        raise ExperimentError(f"{n_bad} of {len(Y)} learner runs failed")
    X = np.array([(na, nb) for na, nb, _, _ in jobs], dtype=np.int64)
    return ExperimentData(
        X, Y,
        block=[j for _, _, j, _ in jobs], rep=[k for _, _, _, k in jobs],
        bounds=bounds, valid=valid,
        provenance={
            "N": dataset.n, "N_A": dataset.n_a, "N_B": dataset.n_b, "p0": dataset.p0,
            "b": design.b, "z": design.z, "metric": design.metric, "seed": seed,
        },
        subsets=[ids for _, ids in results] if keep_subsets else None,
    )
