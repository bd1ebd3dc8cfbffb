"""Conic extrapolation of an accuracy surface to pick the next acquisition.

Adding ``n`` points to a dataset with balance ``(N_A, N_B)`` can end at any
of ``n + 1`` balances, the *transect*.  Those balances lie outside the region
the surrogate was trained on, so the transect is shrunk toward the origin
along the current-proportion ray: every reference scale ``s`` gives a scaled
transect ``s * T`` whose rows keep the same ending proportions.  The
surrogate's mean over this fan is averaged across scales with weights
increasing in ``s``, and the row with the best average is the decision.

Row ``k`` (0-based) of a transect is ``(N_A + n - k, N_B + k)``: row 0 adds
only A-points, row ``n`` only B-points.
"""

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .gp import GaussianProcess

DEFAULT_Q = 100
MIN_POINTS_PER_CATEGORY = 2
MIN_SCALE_FRACTION = 0.05
DECISION_HEADER = ("k", "n_a", "n_b", "ending_prop_a", "G", "argmax")
CONE_HEADER = ("transect", "scale", "k", "n_a", "n_b", "mean", "var")


class InfeasibleConeError(ValueError):
    """No reference transect fits inside the surrogate's sampling bounds."""


def build_transect(n_a, n_b, n):
    """All ``n + 1`` balances reachable by adding ``n`` points, all-A first."""
    if n_a < 1 or n_b < 1 or n < 1:
        raise ValueError(f"need N_A >= 1, N_B >= 1, n >= 1; got ({n_a}, {n_b}, {n})")
    k = np.arange(n + 1)
    return np.column_stack([n_a + n - k, n_b + k]).astype(np.int64)


def ending_proportions(n_a, n_b, n):
    """Category-A share of each transect row."""
    return (n_a + n - np.arange(n + 1)) / (n_a + n_b + n)


@dataclass(frozen=True)
class ReferenceLine:
    """Scales ``s_1 < ... < s_q`` and reference balances ``s_i * (N_A, N_B)``."""

    scales: np.ndarray
    origin: tuple
    bounds: tuple

    @property
    def q(self):
        return self.scales.shape[0]

    @property
    def locations(self):
        return self.scales[:, None] * np.asarray(self.origin, dtype=float)[None, :]


def scale_range(n_a, n_b, n, bounds):
    """``(s_min, s_max)`` for the reference scales.

    ``s_max`` is the largest scale whose transect stays inside ``bounds``;
    ``s_min`` keeps at least two points per category at the reference
    location and is never below 5% of ``s_max``.
    """
    ba, bb = bounds
    s_max = min(ba / (n_a + n), bb / (n_b + n))
    s_min = max(MIN_POINTS_PER_CATEGORY / min(n_a, n_b), MIN_SCALE_FRACTION * s_max)
    return s_min, s_max


def reference_locations(n_a, n_b, n, bounds, q=DEFAULT_Q):
    """Equally spaced reference scales along the current-proportion ray."""
    if q < 1:
        raise ValueError("q must be >= 1")
    s_min, s_max = scale_range(n_a, n_b, n, bounds)
    if s_min > s_max:
        raise InfeasibleConeError(
            f"balance ({n_a}, {n_b}) with move {n} and bounds {tuple(bounds)}: "
            f"smallest usable scale {s_min:.4g} exceeds largest {s_max:.4g}; "
            "the dataset is too small or too unbalanced"
        )
    scales = np.array([s_max]) if q == 1 else np.linspace(s_min, s_max, q)
    return ReferenceLine(scales, (int(n_a), int(n_b)), tuple(bounds))


@dataclass(frozen=True)
class ConeFan:
    transect: np.ndarray
    transects: np.ndarray
    scales: np.ndarray
    weights: np.ndarray

    @property
    def points(self):
        """All fan coordinates stacked as a (q * (n + 1), 2) array."""
        return self.transects.reshape(-1, 2)


def reference_transects(refs, transect, n_total=None):
    """Scale ``transect`` by each reference location's equivalent move size.

    The multiplier is ``sum(R_i) / N``; with ``N = N_A + N_B`` it equals the
    reference scale.  Entries may be fractional.
    """
    transect = np.asarray(transect, dtype=float)
    n_total = sum(refs.origin) if n_total is None else n_total
    mult = refs.locations.sum(axis=1) / n_total
    return ConeFan(
        transect=transect,
        transects=mult[:, None, None] * transect[None, :, :],
        scales=refs.scales,
        weights=linear_weights(refs),
    )


def linear_weights(refs):
    """Weights proportional to the reference scale, summing to one."""
    s = np.asarray(getattr(refs, "scales", refs), dtype=float)
    return s / s.sum()


@dataclass(frozen=True)
class AcquisitionDecision:
    n_a: int
    n_b: int
    index: int
    G: np.ndarray
    means: np.ndarray
    variances: np.ndarray
    fan: ConeFan
    origin: tuple
    n: int
    surrogate: object = None

    @property
    def chosen(self):
        return self.n_a, self.n_b

    @property
    def ending_proportions(self):
        return ending_proportions(*self.origin, self.n)

    def decision_rows(self):
        props = self.ending_proportions
        for k in range(self.n + 1):
            yield {
                "k": k, "n_a": self.n - k, "n_b": k, "ending_prop_a": float(props[k]),
                "G": float(self.G[k]), "argmax": int(k == self.index),
            }

    def write_decision_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(DECISION_HEADER)
            for row in self.decision_rows():
                w.writerow([row["k"], row["n_a"], row["n_b"], repr(row["ending_prop_a"]),
                            repr(row["G"]), row["argmax"]])

    def write_cone_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(CONE_HEADER)
            for i, s in enumerate(self.fan.scales):
                for k in range(self.n + 1):
                    xa, xb = self.fan.transects[i, k]
                    w.writerow([i, repr(float(s)), k, repr(float(xa)), repr(float(xb)),
                                repr(float(self.means[k, i])), repr(float(self.variances[k, i]))])


def argmax_with_ties(G, props, current_prop, rtol=1e-12):
    """Index of the largest ``G``.

    Entries within ``rtol`` of the maximum tie; ties go to the ending
    proportion nearest ``current_prop``, then to the smaller index.
    """
    G = np.asarray(G, dtype=float)
    top = G.max()
    tied = np.flatnonzero(G >= top - rtol * max(abs(top), 1.0))
    if tied.size == 1:
        return int(tied[0])
    dist = np.abs(np.asarray(props)[tied] - current_prop)
    return int(tied[np.flatnonzero(dist <= dist.min() + 1e-15)[0]])


def decide_from_means(means, weights, n_a, n_b, n):
    """Collapse an (n+1) x q mean matrix with ``weights`` and pick a row."""
    G = np.asarray(means) @ np.asarray(weights)
    k = argmax_with_ties(G, ending_proportions(n_a, n_b, n), n_a / (n_a + n_b))
    return k, G


class GPAML(BaseEstimator):
    """Surrogate-plus-cone acquisition rule.

    ``fit`` trains the GP on (balance, score) pairs; ``decide`` evaluates the
    cone for a given state and returns an :class:`AcquisitionDecision`.

    Parameters
    ----------
    q : int, default=100
        Number of reference scales.
    bounds : (int, int) or None
        Sampling bounds of the experiment; used both to normalize GP inputs
        and to bound the cone.  None takes the observed maxima.
    gp_params : dict or None
        Extra keyword arguments for :class:`~gpaml.gp.GaussianProcess`.
    """

    def __init__(self, q=DEFAULT_Q, bounds=None, gp_params=None):
        self.q = q
        self.bounds = bounds
        self.gp_params = gp_params

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        bounds = self.bounds if self.bounds is not None else tuple(X.max(axis=0))
        self.bounds_ = tuple(bounds)
        self.gp_ = GaussianProcess(bounds=self.bounds_, **(self.gp_params or {})).fit(X, y)
        return self

    def decide(self, n_a, n_b, n):
        check_is_fitted(self, "gp_")
        T = build_transect(n_a, n_b, n)
        refs = reference_locations(n_a, n_b, n, self.bounds_, self.q)
        fan = reference_transects(refs, T, n_a + n_b)
        mean, var = self.gp_.predict_marginal(fan.points)
        # points are stacked transect-major: reshape to (q, n+1) then transpose
        means = mean.reshape(refs.q, n + 1).T
        variances = var.reshape(refs.q, n + 1).T
        k, G = decide_from_means(means, fan.weights, n_a, n_b, n)
        return AcquisitionDecision(
            n_a=int(n - k), n_b=int(k), index=k, G=G, means=means, variances=variances,
            fan=fan, origin=(int(n_a), int(n_b)), n=int(n), surrogate=self.gp_,
        )


def gpaml_step(data, n_a, n_b, n, q=DEFAULT_Q, gp_params=None):
    """Fit the surrogate to ``data`` and decide how to split the next ``n`` points."""
    X, Y = data.training_data()
    return GPAML(q=q, bounds=data.bounds, gp_params=gp_params).fit(X, Y).decide(n_a, n_b, n)
