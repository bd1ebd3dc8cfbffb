"""Learners consumed by the balance experiment, plus CCR / F1 scoring.

Two learners are built in:

* ``forest`` -- bagged Gini decision trees with per-split random feature
  subsets and majority-vote prediction (:class:`RandomForest`).
* ``oracle`` -- the closed-form toy accuracy surface
  ``f(x1, x2) = 1 - exp(-x1 x2 / (10 x1 + 15 x2))`` plus Gaussian noise.  It
  maps category counts straight to a score and never looks at data points.
"""

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.tree import DecisionTreeClassifier
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ._random import as_generator, master_seed

CCR = "ccr"
F1 = "f1"
METRICS = (CCR, F1)


class LearnerError(RuntimeError):
    """Training or evaluation could not be carried out."""


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class ConfusionCounts:
    tp: int
    fp: int
    tn: int
    fn: int

    @classmethod
    def from_labels(cls, y_true, y_pred, positive=1):
        y_true = np.asarray(y_true)
        y_pred = np.asarray(y_pred)
        t = y_true == positive
        p = y_pred == positive
        return cls(
            tp=int(np.sum(t & p)), fp=int(np.sum(~t & p)),
            tn=int(np.sum(~t & ~p)), fn=int(np.sum(t & ~p)),
        )

    @property
    def total(self):
        return self.tp + self.fp + self.tn + self.fn

    def ccr(self):
        if self.total == 0:
            raise ValueError("CCR of an empty evaluation set")
        return (self.tp + self.tn) / self.total

    def f1(self):
        # 0/0 (no positives predicted or present) scores 0, not 1
        denom = self.tp + 0.5 * (self.fp + self.fn)
        return self.tp / denom if denom > 0 else 0.0


def ccr_score(y_true, y_pred):
    """Correct classification rate (exact-match rate for any class count)."""
    y_true = np.asarray(y_true)
    if y_true.size == 0:
        raise ValueError("CCR of an empty evaluation set")
    return float(np.mean(y_true == np.asarray(y_pred)))


def f1_score(y_true, y_pred):
    """Binary F1 for labels in {0, 1} (positive = 1); macro one-vs-rest otherwise."""
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    labels = np.union1d(y_true, y_pred)
    if np.all(np.isin(labels, (0, 1))):
        return ConfusionCounts.from_labels(y_true, y_pred, 1).f1()
    return float(np.mean([ConfusionCounts.from_labels(y_true, y_pred, c).f1() for c in labels]))


def score(y_true, y_pred, metric=CCR):
    metric = str(metric).lower()
    if metric == CCR:
        return ccr_score(y_true, y_pred)
    if metric == F1:
        return f1_score(y_true, y_pred)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")


# ---------------------------------------------------------------------------
# toy accuracy oracle


def toy_accuracy(x1, x2):
    """Noiseless accuracy surface of the synthetic oracle (vectorised)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    if np.any(x1 < 0) or np.any(x2 < 0):
        raise ValueError("oracle counts must be nonnegative")
    denom = 10.0 * x1 + 15.0 * x2
    if np.any(denom == 0):
        raise ValueError("oracle accuracy undefined when both counts are zero")
    out = 1.0 - np.exp(-x1 * x2 / denom)
    return float(out) if out.ndim == 0 else out


def oracle_accuracy(x1, x2, rng=None, noise_sd=0.05):
    """One noisy draw ``f(x1, x2) + N(0, noise_sd**2)``; not clamped to [0, 1]."""
    mean = toy_accuracy(x1, x2)
    if noise_sd == 0:
        return mean
    return mean + noise_sd * as_generator(rng).standard_normal(np.shape(mean) or None)


# ---------------------------------------------------------------------------
# forest


class RandomForest(ClassifierMixin, BaseEstimator):
    """Bagged decision-tree classifier with majority voting.

    Each tree is grown on a bootstrap resample with Gini splits, drawing
    ``max_features`` candidate features uniformly at every split.  Ties in
    the vote go to the smallest class label.

    Parameters
    ----------
    n_estimators : int, default=100
    max_depth : int or None, default=None
        None grows trees until leaves are pure or hit ``min_samples_leaf``.
    min_samples_leaf : int, default=1
    max_features : int or None, default=None
        None means ``ceil(sqrt(n_features))``.
    random_state : int, Generator or None
    """

    def __init__(self, n_estimators=100, max_depth=None, min_samples_leaf=1,
                 max_features=None, random_state=None):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.max_features = max_features
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        if self.n_estimators < 1:
            raise ValueError("n_estimators must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        self.classes_, y_enc = np.unique(y, return_inverse=True)
        self.n_features_in_ = X.shape[1]
        self.single_class_ = self.classes_.size == 1
        rng = as_generator(master_seed(self.random_state))
        m = self.max_features or math.ceil(math.sqrt(X.shape[1]))
        m = min(int(m), X.shape[1])
        n = X.shape[0]
        self.estimators_ = []
        if self.single_class_:
            return self
        for _ in range(self.n_estimators):
            boot = rng.integers(0, n, size=n)
            tree = DecisionTreeClassifier(
                criterion="gini", max_depth=self.max_depth,
                min_samples_leaf=self.min_samples_leaf, max_features=m,
                random_state=int(rng.integers(0, 2**31 - 1)),
            )
            # trees are fitted on encoded labels, so predictions index classes_
            self.estimators_.append(tree.fit(X[boot], y_enc[boot]))
        return self

    def _votes(self, X):
        votes = np.zeros((X.shape[0], self.classes_.size), dtype=np.int64)
        rows = np.arange(X.shape[0])
        for tree in self.estimators_:
            np.add.at(votes, (rows, tree.predict(X).astype(np.int64)), 1)
        return votes

    def predict(self, X):
        check_is_fitted(self, "classes_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, forest was fitted with {self.n_features_in_}"
            )
        if self.single_class_:
            return np.full(X.shape[0], self.classes_[0])
        return self.classes_[np.argmax(self._votes(X), axis=1)]


# ---------------------------------------------------------------------------
# train / evaluate contract


@dataclass(frozen=True)
class LearnerSpec:
    """Configuration of a learner.

    ``feature_subset_size=None`` means ``ceil(sqrt(p))``; ``max_depth=None``
    means unlimited depth.
    """

    kind: str = "forest"
    tree_count: int = 100
    max_depth: int = None
    min_leaf: int = 1
    feature_subset_size: int = None
    noise_sd: float = 0.05

    def __post_init__(self):
        if self.kind not in ("forest", "oracle"):
            raise ValueError(f"learner kind must be 'forest' or 'oracle', got {self.kind!r}")
        if self.tree_count < 1:
            raise ValueError("tree_count must be >= 1")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be >= 1")
        if self.min_leaf < 1:
            raise ValueError("min_leaf must be >= 1")
        if self.noise_sd < 0:
            raise ValueError("noise_sd must be >= 0")

    @property
    def is_oracle(self):
        return self.kind == "oracle"

    def make_estimator(self, seed):
        return RandomForest(
            n_estimators=self.tree_count, max_depth=self.max_depth,
            min_samples_leaf=self.min_leaf, max_features=self.feature_subset_size,
            random_state=seed,
        )


@dataclass(frozen=True)
class TrainedModel:
    kind: str
    estimator: object
    size: int
    n_a: int
    n_b: int
    seed: int
    single_class: bool = False


def train(spec, train_set, rng=None):
    """Fit the learner described by ``spec`` on ``train_set``.

    Rows are ordered by point id before fitting, so the result depends only on
    the set of training points and the seed.
    """
    if train_set.n == 0:
        raise LearnerError("empty training set")
    seed = master_seed(rng)
    if spec.is_oracle:
        return TrainedModel("oracle", None, train_set.n, train_set.n_a, train_set.n_b, seed)
    if train_set.n_features == 0:
        raise LearnerError("forest needs at least one feature")
    order = np.argsort(train_set.ids, kind="stable")
    est = spec.make_estimator(seed).fit(train_set.X[order], train_set.y[order])
    return TrainedModel(
        "forest", est, train_set.n, train_set.n_a, train_set.n_b, seed,
        single_class=bool(est.single_class_),
    )


def evaluate(model, test_set, metric=CCR):
    """Score ``model`` on ``test_set``.

    The oracle ignores ``test_set`` and returns the noiseless surface at the
    model's training counts.
    """
    if model.kind == "oracle":
        return toy_accuracy(model.n_a, model.n_b)
    if test_set.n == 0:
        raise LearnerError("empty evaluation set")
    if test_set.n_features != model.estimator.n_features_in_:
        raise LearnerError(
            f"dimension mismatch: test set has {test_set.n_features} features, "
            f"model expects {model.estimator.n_features_in_}"
        )
    return score(test_set.y, model.estimator.predict(test_set.X), metric)
