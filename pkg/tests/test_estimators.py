import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from holocollapse.estimators import CCDiameter, CollapseVerifier, GromovHausdorffOracle, HolonomyEstimator
from holocollapse.metricspace import FiniteMetricSpace


def test_params_round_trip():
    est = CollapseVerifier(net_count=40, scaling="linear")
    params = est.get_params()
    assert params["net_count"] == 40 and params["scaling"] == "linear"
    assert clone(est).get_params() == params
    assert HolonomyEstimator().set_params(seed=3).seed == 3


def test_not_fitted():
    with pytest.raises(NotFittedError):
        HolonomyEstimator().predict(np.eye(1))
    with pytest.raises(NotFittedError):
        CollapseVerifier().score()


def test_holonomy_estimator():
    est = HolonomyEstimator(sample_count=30, loop_count=6).fit("HalfTorus")
    assert est.holonomy_.name == "FiniteCyclic(2)" and est.algebra_rank_ == 0
    g = np.array([[[1.0 + 0j]], [[-1.0 + 0j]], [[1j]]])
    assert est.predict(g).tolist() == [True, True, False]
    with pytest.raises(ValueError, match="unknown scenario"):
        HolonomyEstimator().fit("Moebius")
    with pytest.raises(ValueError):
        HolonomyEstimator(sample_count=0).fit("FlatSphere")


def test_cc_diameter_estimator():
    est = CCDiameter(net_count=100).fit("FlatSphere")
    assert est.kappa0_ == pytest.approx(np.pi, rel=0.05)
    assert CCDiameter(net_count=1, fiber_count=8).fit("FlatSphere").kappa0_ == 0.0


def test_collapse_verifier():
    est = CollapseVerifier(net_count=40, fiber_count=16).fit("FlatSphere")
    assert est.transform().shape == (4,)
    assert est.predict(0.25) == pytest.approx(est.kappa0_ / 2)
    assert np.isfinite(est.score())
    with pytest.raises(ValueError):
        CollapseVerifier(schedule=(1.0, 2.0)).fit("FlatSphere")
    with pytest.raises(ValueError):
        CollapseVerifier(scaling="cubic").fit("FlatSphere")


def test_gh_oracle_estimator():
    two = FiniteMetricSpace([[0, 2], [2, 0]])
    est = GromovHausdorffOracle().fit(two)
    out = est.transform([FiniteMetricSpace([[0, 1], [1, 0]]), np.zeros((1, 1))])
    assert out.tolist() == [0.5, 1.0]
