import numpy as np
import pytest
from sklearn.base import clone

import poissonnet as pn
from conftest import random_instance
from poissonnet.estimator import NetworkPoissonRegression


def test_fit_sets_attributes():
    g, Z, _ = random_instance(200, n=10, p=2)
    est = NetworkPoissonRegression().fit(g.weights, Z.z)
    assert est.converged_ and est.exists_
    assert est.alpha_.shape == (10,) and est.gamma_.shape == (2,)
    assert est.mu_ == 0.0
    lam = est.predict()
    deg = pn.degrees(g)
    assert np.abs(lam.sum(axis=1) - deg.d).max() < 1e-6


def test_matches_functional_fit():
    g, Z, _ = random_instance(201, n=9, p=1)
    est = NetworkPoissonRegression(normalization=pn.ALPHA_N_BETA_N_ZERO).fit(g.weights, Z.z)
    res = pn.fit(g, Z, normalization=pn.ALPHA_N_BETA_N_ZERO)
    assert est.mu_ == res.state.mu
    assert np.array_equal(est.gamma_, res.state.gamma)


def test_get_set_params_and_clone():
    est = NetworkPoissonRegression(tol_theta=1e-10, ci_level=0.9)
    params = est.get_params()
    assert params["tol_theta"] == 1e-10 and params["ci_level"] == 0.9
    est2 = clone(est)
    assert est2.get_params() == params
    est2.set_params(max_outer=7)
    assert est2.max_outer == 7


def test_score_and_counterfactual_predict():
    g, Z, _ = random_instance(202, n=8, p=2)
    est = NetworkPoissonRegression().fit(g.weights, Z.z)
    ll = est.score(g.weights)
    assert ll == pn.log_likelihood(est.result_.state, g, Z)
    Z2 = pn.CovariateTensor(np.zeros((8, 8, 2)))
    lam2 = est.predict(Z2.z)
    assert lam2.shape == (8, 8)
    assert not np.allclose(lam2, est.predict())


def test_inference_report_through_estimator():
    g, Z, _ = random_instance(203, n=10, p=2)
    est = NetworkPoissonRegression(ci_level=0.9).fit(g.weights, Z.z)
    rep = est.inference(names=("a", "b"))
    assert rep.ci_level == 0.9
    assert rep.names == ("a", "b")


def test_unfitted_and_degenerate_errors():
    est = NetworkPoissonRegression()
    with pytest.raises(RuntimeError, match="not fitted"):
        est.predict()
    A = np.array([[0, 2, 1], [3, 0, 1], [0, 0, 0]])
    est.fit(A)
    assert not est.exists_
    assert est.flagged_nodes_ == (2,)
    with pytest.raises(RuntimeError, match="no finite maximizer"):
        est.predict()


def test_rejects_unknown_normalization():
    with pytest.raises(ValueError):
        NetworkPoissonRegression(normalization="whatever").fit(np.zeros((3, 3), dtype=int))
