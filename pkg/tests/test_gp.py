import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpaml.gp import GaussianProcess, GPDegenerateError, fit_gp, kernel, log_likelihood, predict


def dense_reference(Xn, y, theta, g, Xstar=None):
    """Independent dense solve: full r x r system, LU solves, slogdet."""
    r = len(y)
    D = ((Xn[:, None, :] - Xn[None, :, :]) ** 2).sum(-1)
    K = np.exp(-D / theta) + g * np.eye(r)
    alpha = np.linalg.solve(K, y)
    tau2 = y @ alpha / r
    loglik = -0.5 * r * math.log(tau2) - 0.5 * np.linalg.slogdet(K)[1]
    out = {"tau2": tau2, "loglik": loglik}
    if Xstar is not None:
        ks = np.exp(-((Xstar[:, None, :] - Xn[None, :, :]) ** 2).sum(-1) / theta)
        kss = np.exp(-((Xstar[:, None, :] - Xstar[None, :, :]) ** 2).sum(-1) / theta)
        out["mean"] = ks @ alpha
        out["cov"] = tau2 * (kss - ks @ np.linalg.solve(K, ks.T))
    return out


def test_kernel_values():
    assert kernel([0.0, 0.0], [0.0, 0.0], 2.0, 1.0, 0.1, same_index=True) == pytest.approx(2.2)
    assert kernel([0.0, 0.0], [0.0, 0.0], 2.0, 1.0, 0.1) == pytest.approx(2.0)
    assert kernel([0.0, 0.0], [1.0, 1.0], 1.0, 2.0, 0.0) == pytest.approx(math.exp(-1.0))


def test_loglik_three_points_hand_values():
    X = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    y = np.array([1.0, -1.0, 0.5])
    ll, tau2 = log_likelihood(X, y, 1.0, 0.1)
    ref = dense_reference(X, y, 1.0, 0.1)
    assert ll == pytest.approx(ref["loglik"], abs=1e-10)
    assert tau2 == pytest.approx(ref["tau2"], rel=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), theta=st.floats(0.01, 5.0), g=st.floats(1e-6, 0.5),
       n_unique=st.integers(2, 8), z=st.integers(1, 4))
def test_collapsed_likelihood_matches_dense(seed, theta, g, n_unique, z):
    rng = np.random.default_rng(seed)
    U = rng.uniform(0, 1, size=(n_unique, 2))
    X = np.repeat(U, z, axis=0)
    y = rng.normal(size=X.shape[0])
    if X.shape[0] < 2:
        return
    a = log_likelihood(X, y, theta, g, collapse_replicates=True)
    b = log_likelihood(X, y, theta, g, collapse_replicates=False)
    ref = dense_reference(X, y, theta, g)
    assert a[0] == pytest.approx(ref["loglik"], abs=1e-7, rel=1e-9)
    assert b[0] == pytest.approx(ref["loglik"], abs=1e-7, rel=1e-9)
    assert a[1] == pytest.approx(ref["tau2"], rel=1e-8)


def test_prediction_matches_dense_solve():
    rng = np.random.default_rng(4)
    X = np.repeat(rng.integers(1, 40, size=(15, 2)), 3, axis=0).astype(float)
    y = np.sin(X[:, 0] / 7) + 0.1 * rng.normal(size=len(X))
    gp = GaussianProcess(bounds=(40, 40)).fit(X, y)
    Xs = rng.uniform(0, 45, size=(9, 2))
    dist = gp.predict_dist(Xs)
    ref = dense_reference(X / 40, y - y.mean(), gp.theta_, gp.g_, Xs / 40)
    np.testing.assert_allclose(dist.mean, ref["mean"] + y.mean(), atol=1e-8)
    np.testing.assert_allclose(dist.cov, ref["cov"], atol=1e-8)
    m, v = gp.predict_marginal(Xs)
    np.testing.assert_allclose(m, dist.mean, atol=1e-12)
    np.testing.assert_allclose(v, dist.var, atol=1e-12)
    dense = GaussianProcess(bounds=(40, 40), theta=gp.theta_, g=gp.g_, collapse_replicates=False).fit(X, y)
    np.testing.assert_allclose(dense.predict(Xs), dist.mean, atol=1e-8)


def test_one_training_point_formula():
    # k(x1,x1) = tau2 (1 + g); mean at x1 = y1 / (1 + g) without centering
    X = np.array([[1.0, 1.0], [30.0, 30.0], [30.0, 1.0]])
    y = np.array([2.0, 0.0, 0.0])
    gp = GaussianProcess(bounds=(1.0, 1.0), theta=0.01, g=0.25, center=False).fit(X, y)
    assert gp.predict([[1.0, 1.0]])[0] == pytest.approx(2.0 / 1.25, abs=1e-12)


def test_reverts_to_prior_far_away():
    rng = np.random.default_rng(0)
    X = rng.integers(1, 20, size=(30, 2)).astype(float)
    y = rng.normal(size=30)
    gp = GaussianProcess(bounds=(20, 20), theta=0.05, g=0.01).fit(X, y)
    m, v = gp.predict_marginal([[5000.0, 5000.0]])
    assert m[0] == pytest.approx(gp.y_mean_, abs=1e-12)
    assert v[0] == pytest.approx(gp.tau2_, rel=1e-12)


def test_interpolates_with_tiny_nugget():
    x = np.arange(1, 8, dtype=float)
    X = np.column_stack([x, 8 - x])
    y = np.cos(x)
    gp = GaussianProcess(bounds=(8, 8), theta=0.5, g=1e-8).fit(X, y)
    assert np.max(np.abs(gp.predict(X) - y)) < 1e-4


def test_shift_equivariance():
    rng = np.random.default_rng(2)
    X = rng.integers(1, 30, size=(25, 2)).astype(float)
    y = rng.normal(size=25)
    a = GaussianProcess(bounds=(30, 30)).fit(X, y)
    b = GaussianProcess(bounds=(30, 30)).fit(X, y + 3.0)
    assert b.theta_ == pytest.approx(a.theta_, rel=1e-6)
    assert b.g_ == pytest.approx(a.g_, rel=1e-6)
    Xs = rng.uniform(1, 30, size=(5, 2))
    np.testing.assert_allclose(b.predict(Xs), a.predict(Xs) + 3.0, atol=1e-8)


def test_restarts_never_worse_than_start():
    rng = np.random.default_rng(5)
    X = rng.integers(1, 30, size=(40, 2)).astype(float)
    y = np.sin(X[:, 0] / 5) + 0.2 * rng.normal(size=40)
    gp = GaussianProcess(bounds=(30, 30)).fit(X, y)
    assert len(gp.restarts_) == 5
    for row in gp.restarts_:
        assert row["loglik"] >= row["loglik0"] - 1e-12
    assert gp.log_likelihood_ == pytest.approx(max(r["loglik"] for r in gp.restarts_))
    assert sum(r["best"] for r in gp.restarts_) >= 1


def test_constant_response_is_degenerate():
    with pytest.raises(GPDegenerateError):
        GaussianProcess().fit([[1, 1], [2, 2], [3, 3]], [0.5, 0.5, 0.5])


def test_noiseless_grid_gets_small_nugget():
    a, b = np.meshgrid(np.arange(1, 11), np.arange(1, 11))
    X = np.column_stack([a.ravel(), b.ravel()]).astype(float)
    y = np.sin(X[:, 0] / 4) + np.cos(X[:, 1] / 5)
    gp = GaussianProcess(bounds=(10, 10)).fit(X, y)
    assert gp.g_ <= 1e-3


def test_replicates_smooth_toward_mean():
    X = np.repeat([[5.0, 5.0], [10.0, 10.0], [15.0, 5.0]], 10, axis=0)
    rng = np.random.default_rng(1)
    y = np.repeat([0.3, 0.6, 0.4], 10) + 0.05 * rng.normal(size=30)
    gp = GaussianProcess(bounds=(20, 20)).fit(X, y)
    means = gp.predict([[5.0, 5.0], [10.0, 10.0], [15.0, 5.0]])
    ybar = y.reshape(3, 10).mean(axis=1)
    np.testing.assert_allclose(means, ybar, atol=0.02)


def test_functional_wrappers(tmp_path):
    X = np.array([[1, 2], [3, 1], [2, 2], [4, 4]], dtype=float)
    y = np.array([0.1, 0.3, 0.2, 0.5])
    gp = fit_gp(X, y, bounds=(4, 4))
    dist = predict(gp, X)
    assert dist.cov.shape == (4, 4)
    gp.write_report(tmp_path / "fit.csv")
    lines = (tmp_path / "fit.csv").read_text().splitlines()
    assert lines[0].startswith("start,theta0,g0") and len(lines) == 6
    assert gp.get_params()["bounds"] == (4, 4)


def test_input_validation():
    with pytest.raises(ValueError):
        GaussianProcess().fit([[1, 2], [2, 3]], [0.1, 0.2])
    with pytest.raises(ValueError):
        GaussianProcess().fit([[1, -2], [2, 3], [3, 3]], [0.1, 0.2, 0.3])
    with pytest.raises(ValueError):
        GaussianProcess().fit([[1, 2], [2, 3], [3, 3]], [0.1, np.nan, 0.3])
