import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from convexify import ConvexificationInverter
from convexify.config import resolve
from convexify.exceptions import ConfigurationError, GridMismatchError
from convexify.pipeline import build_problem, separable_profile, simulate


@pytest.fixture(scope="module")
def table():
    cfg = resolve({"grid.n_x1": "21", "grid.n_t": "21"})
    problem = build_problem(cfg)
    return simulate(problem).to_table(), problem


def test_params_and_clone():
    est = ConvexificationInverter(f=separable_profile, lam=2.0, n_x1=21)
    p = est.get_params()
    assert p["lam"] == 2.0 and p["n_x1"] == 21
    twin = clone(est)
    assert twin.get_params()["lam"] == 2.0 and twin is not est


def test_not_fitted():
    with pytest.raises(NotFittedError):
        ConvexificationInverter(f=1.0).predict([[0.1]])


def test_fit_predict(table):
    X, problem = table
    est = ConvexificationInverter(f=separable_profile, n_x1=21, n_t=21).fit(X)
    pts = problem.grid.space_axes[0][:, None]
    inside = (pts[:, 0] <= problem.grid.spec.d - problem.grid.spec.epsilon)
    pred = est.predict(pts)
    assert np.max(np.abs(pred - problem.c_true)[inside]) < 1e-3
    assert est.n_features_in_ == 3 and est.result_.converged


def test_mismatch_and_errors(table):
    X, _ = table
    with pytest.raises(GridMismatchError):
        ConvexificationInverter(f=separable_profile, n_x1=21, n_t=41).fit(X)
    with pytest.raises(ConfigurationError):
        ConvexificationInverter().fit(X)
    with pytest.raises(ConfigurationError):
        ConvexificationInverter(f=separable_profile, n_space=2, n_x1=21, n_t=21).fit(X)
