"""Homoskedastic Gaussian-process regression for accuracy surfaces.

Covariance between normalized inputs ``x_i, x_j``::

    tau2 * (exp(-||x_i - x_j||**2 / theta) + g * [i == j])

The nugget ``g`` applies only to the diagonal of the training covariance.
``tau2`` is profiled out of the likelihood analytically and
``(log theta, log g)`` are found by multi-start bounded Nelder-Mead.

Blocked designs repeat each input ``z`` times.  Replicated rows are collapsed
onto their unique inputs, which gives the same likelihood and predictive
equations as the full ``r x r`` system at the cost of an ``n_unique``-sized
factorization.  ``collapse_replicates=False`` keeps the dense path.
"""

import csv
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from ._validation import check_balances, check_responses

THETA_BOUNDS = (1e-3, 10.0)
G_BOUNDS = (1e-8, 1.0)
JITTER = (0.0, 1e-10, 1e-8, 1e-6)

# Latin-square starts on the unit square, mapped onto the log-bound box.
DEFAULT_STARTS = np.array([[0.1, 0.3], [0.3, 0.7], [0.5, 0.1], [0.7, 0.9], [0.9, 0.5]])


class GPError(RuntimeError):
    """The GP could not be fitted or evaluated."""


class GPDegenerateError(GPError):
    """Responses carry no variation, so the profiled scale is zero."""


def sq_dist(X1, X2):
    d = X1[:, None, :] - X2[None, :, :]
    return np.einsum("ijk,ijk->ij", d, d)


def kernel(xi, xj, tau2, theta, g, same_index=False):
    """Covariance between two normalized inputs."""
    d2 = float(np.sum((np.asarray(xi, float) - np.asarray(xj, float)) ** 2))
    return tau2 * (np.exp(-d2 / theta) + (g if same_index else 0.0))


def correlation(X1, X2, theta):
    """Squared-exponential correlation matrix (no nugget)."""
    return np.exp(-sq_dist(X1, X2) / theta)


def _cholesky(K):
    """Lower Cholesky factor with escalating diagonal jitter."""
    eye = np.eye(K.shape[0])
    for jitter in JITTER:
        try:
            return cholesky(K + jitter * eye, lower=True), jitter
        except np.linalg.LinAlgError:
            continue
    raise GPError(f"covariance matrix singular even with jitter {JITTER[-1]:g}")


@dataclass(frozen=True)
class _Design:
    """Responses grouped by unique input.

    ``ybar`` are per-input means of the (already centered) responses,
    ``mult`` the replicate counts and ``ss_within`` the pooled
    within-replicate sum of squares.
    """

    X: np.ndarray
    ybar: np.ndarray
    mult: np.ndarray
    ss_within: float
    r: int

    @classmethod
    def collapse(cls, X, y):
        Xu, inverse, mult = np.unique(X, axis=0, return_inverse=True, return_counts=True)
        inverse = inverse.ravel()
        ybar = np.bincount(inverse, weights=y) / mult
        resid = y - ybar[inverse]
        return cls(Xu, ybar, mult.astype(float), float(resid @ resid), y.shape[0])

    @classmethod
    def dense(cls, X, y):
        return cls(X, y, np.ones(y.shape[0]), 0.0, y.shape[0])


def _concentrated(design, theta, g):
    """Return (loglik, tau2, chol, jitter) of the collapsed system.

    With unique-input correlation ``C`` and multiplicities ``a``, the full
    ``r x r`` matrix ``K = U C U' + g I`` satisfies

        y' K^-1 y = ybar' (C + g/a)^-1 ybar + ss_within / g
        log|K|    = log|C + g/a| + sum(log a) + (r - n) log g
    """
    n = design.X.shape[0]
    C = correlation(design.X, design.X, theta)
    L, jitter = _cholesky(C + np.diag(g / design.mult))
    v = solve_triangular(L, design.ybar, lower=True)
    quad = v @ v
    if design.r > n:
        quad += design.ss_within / g
    tau2 = quad / design.r
    if not tau2 > 0:
        raise GPDegenerateError("profiled scale tau2 is zero: responses are constant")
    logdet = 2.0 * np.sum(np.log(np.diag(L))) + np.sum(np.log(design.mult))
    logdet += (design.r - n) * np.log(g)
    loglik = -0.5 * design.r * np.log(tau2) - 0.5 * logdet
    return loglik, tau2, L, jitter


def log_likelihood(X, Y, theta, g, collapse_replicates=True):
    """Concentrated log-likelihood ``-(r/2) log tau2 - (1/2) log|K|`` and ``tau2``.

    ``X`` must already be normalized and ``Y`` centered.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float).ravel()
    if Y.shape[0] < 2:
        raise ValueError("log_likelihood needs at least 2 observations")
    design = (_Design.collapse if collapse_replicates else _Design.dense)(X, Y)
    loglik, tau2, _, _ = _concentrated(design, theta, g)
    return loglik, tau2


@dataclass(frozen=True)
class PredictiveDistribution:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def var(self):
        return np.diag(self.cov).copy()


class GaussianProcess(RegressorMixin, BaseEstimator):
    """Squared-exponential GP on 2-D balance inputs.

    Parameters
    ----------
    bounds : (float, float) or None
        Upper bounds used to scale each input column onto [0, 1].  None uses
        the per-column maxima of the training inputs.
    theta, g : float or None
        Fix the lengthscale / nugget instead of estimating them.
    theta_bounds, g_bounds : (float, float)
        Search box for the maximum-likelihood estimates.
    starts : array of shape (k, 2) or None
        Optimizer starts as fractions of the log-bound box; None uses a fixed
        5-point Latin square.
    center : bool, default=True
        Subtract the response mean before fitting.
    collapse_replicates : bool, default=True
        Factorize over unique inputs only (exact).

    Attributes
    ----------
    theta_, g_, tau2_ : float
        Fitted hyperparameters.
    log_likelihood_ : float
    restarts_ : list of dict
        One row per optimizer start: initial and final values.
    chol_, alpha_ : ndarray
        Factor of the (collapsed) training covariance and the solve against
        the responses, both in units of ``tau2``.
    """

    def __init__(self, bounds=None, theta=None, g=None, theta_bounds=THETA_BOUNDS,
                 g_bounds=G_BOUNDS, starts=None, center=True, collapse_replicates=True,
                 maxiter=400):
        self.bounds = bounds
        self.theta = theta
        self.g = g
        self.theta_bounds = theta_bounds
        self.g_bounds = g_bounds
        self.starts = starts
        self.center = center
        self.collapse_replicates = collapse_replicates
        self.maxiter = maxiter

    def _normalize(self, X):
        return X / self.scale_

    def fit(self, X, y):
        X = check_balances(X)
        y = check_responses(y, X.shape[0])
        if X.shape[0] < 3:
            raise ValueError(f"need at least 3 observations to fit, got {X.shape[0]}")
        scale = np.asarray(self.bounds if self.bounds is not None else X.max(axis=0), float)
        if scale.shape != (2,) or np.any(scale <= 0):
            raise ValueError(f"bounds must be two positive numbers, got {self.bounds!r}")
        self.scale_ = scale
        self.n_features_in_ = 2
        self.y_mean_ = float(np.mean(y)) if self.center else 0.0
        yc = y - self.y_mean_
        if (self.center and np.ptp(y) == 0) or not np.any(yc):
            raise GPDegenerateError("responses are constant; nothing to model")
        Xn = self._normalize(X)
        builder = _Design.collapse if self.collapse_replicates else _Design.dense
        self.design_ = builder(Xn, yc)

        self.restarts_ = []
        if self.theta is not None and self.g is not None:
            theta, g = float(self.theta), float(self.g)
        else:
            theta, g = self._optimize()
        loglik, tau2, L, jitter = _concentrated(self.design_, theta, g)
        self.theta_, self.g_, self.tau2_ = theta, g, float(tau2)
        self.log_likelihood_ = float(loglik)
        self.jitter_ = jitter
        self.chol_ = L
        self.alpha_ = cho_solve((L, True), self.design_.ybar)
        return self

    def _optimize(self):
        lo = np.log([self.theta_bounds[0], self.g_bounds[0]])
        hi = np.log([self.theta_bounds[1], self.g_bounds[1]])
        fixed = [self.theta, self.g]
        free = [k for k in range(2) if fixed[k] is None]
        starts = DEFAULT_STARTS if self.starts is None else np.atleast_2d(self.starts)

        def unpack(z):
            p = [np.log(f) if f is not None else 0.0 for f in fixed]
            for k, v in zip(free, z):
                p[k] = v
            return np.exp(p)

        def objective(z):
            theta, g = unpack(z)
            try:
                return -_concentrated(self.design_, theta, g)[0]
            except GPError:
                return np.inf

        best = None
        for frac in starts:
            z0 = (lo + frac * (hi - lo))[free]
            f0 = objective(z0)
            row = {"theta0": unpack(z0)[0], "g0": unpack(z0)[1], "loglik0": -f0}
            try:
                res = minimize(
                    objective, z0, method="Nelder-Mead",
                    bounds=list(zip(lo[free], hi[free])),
                    options={"xatol": 1e-5, "fatol": 1e-9, "maxiter": self.maxiter},
                )
                z, f = res.x, res.fun
                # Nelder-Mead never returns worse than its start, but guard anyway
                if not f <= f0:
                    z, f = z0, f0
            except (ValueError, FloatingPointError):
                z, f = z0, f0
            theta, g = unpack(z)
            row.update(theta=theta, g=g, loglik=-f)
            self.restarts_.append(row)
            if np.isfinite(f) and (best is None or f < best[0]):
                best = (f, theta, g)
        if best is None:
            raise GPError(
                "every optimizer start failed; last diagnostic: "
                f"theta0={row['theta0']:.3g}, g0={row['g0']:.3g}"
            )
        for row in self.restarts_:
            row["best"] = row["theta"] == best[1] and row["g"] == best[2]
        return float(best[1]), float(best[2])

    @property
    def noise_var_(self):
        """Noise variance ``tau2 * g`` in response units."""
        return self.tau2_ * self.g_

    def predict_dist(self, X):
        """Predictive mean and covariance of the latent surface at ``X``."""
        check_is_fitted(self, "alpha_")
        X = check_balances(X)
        Xn = self._normalize(X)
        kx = correlation(Xn, self.design_.X, self.theta_)
        mean = kx @ self.alpha_ + self.y_mean_
        v = solve_triangular(self.chol_, kx.T, lower=True)
        cov = self.tau2_ * (correlation(Xn, Xn, self.theta_) - v.T @ v)
        cov = 0.5 * (cov + cov.T)
        d = np.diag(cov).copy()
        if np.any(d < -1e-8 * max(self.tau2_, 1.0)):
            raise GPError(f"negative predictive variance {d.min():.3g}")
        np.fill_diagonal(cov, np.maximum(d, 0.0))
        return PredictiveDistribution(mean, cov)

    def predict_marginal(self, X):
        """Predictive means and variances without forming the full covariance."""
        check_is_fitted(self, "alpha_")
        Xn = self._normalize(check_balances(X))
        kx = correlation(Xn, self.design_.X, self.theta_)
        v = solve_triangular(self.chol_, kx.T, lower=True)
        var = self.tau2_ * (1.0 - np.einsum("ij,ij->j", v, v))
        return kx @ self.alpha_ + self.y_mean_, np.maximum(var, 0.0)

    def predict(self, X, return_std=False):
        mean, var = self.predict_marginal(X)
        if return_std:
            return mean, np.sqrt(var)
        return mean

    def report_rows(self):
        check_is_fitted(self, "alpha_")
        rows = []
        for k, row in enumerate(self.restarts_ or [{}]):
            rows.append({
                "start": k,
                "theta0": row.get("theta0", self.theta_),
                "g0": row.get("g0", self.g_),
                "loglik0": row.get("loglik0", self.log_likelihood_),
                "theta": row.get("theta", self.theta_),
                "g": row.get("g", self.g_),
                "loglik": row.get("loglik", self.log_likelihood_),
                "best": int(row.get("best", True)),
            })
        return rows

    def write_report(self, path):
        """CSV of the restart table plus the final hyperparameters."""
        rows = self.report_rows()
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["start", "theta0", "g0", "loglik0", "theta", "g", "loglik", "best",
                        "tau2", "noise_var", "y_mean"])
            for row in rows:
                w.writerow([row["start"], *(repr(float(row[k])) for k in
                            ("theta0", "g0", "loglik0", "theta", "g", "loglik")),
                            row["best"], repr(self.tau2_), repr(self.noise_var_),
                            repr(self.y_mean_)])


def fit_gp(X, Y, bounds=None, **opts):
    """Fit a :class:`GaussianProcess` by maximum likelihood and return it."""
    return GaussianProcess(bounds=bounds, **opts).fit(X, Y)


def predict(fit, Xnew):
    """Predictive distribution of a fitted GP at ``Xnew`` (counts)."""
    return fit.predict_dist(Xnew)
