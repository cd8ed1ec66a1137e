import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError
from sklearn.model_selection import cross_val_score
from sklearn.pipeline import make_pipeline
from sklearn.preprocessing import MinMaxScaler

from comptree import CompositionalTreeRegressor
from comptree.basis import standard_catalog
from comptree.tree import deserialize, evaluate


@pytest.fixture
def data():
    rng = np.random.default_rng(0)
    X = rng.uniform(size=(120, 4))
    y = 0.5 * np.sin(np.pi * X[:, 0]) * X[:, 1] + 0.2 * X[:, 3] + 0.02 * rng.normal(size=120)
    return X, y


def test_params_round_trip():
    est = CompositionalTreeRegressor(q=12, iters=3)
    params = est.get_params()
    assert params["q"] == 12 and params["iters"] == 3 and params["basis"] is None
    twin = clone(est)
    assert twin.get_params() == params
    est.set_params(iters=5)
    assert est.iters == 5


def test_fit_predict(data):
    X, y = data
    est = CompositionalTreeRegressor(q=10, iters=4).fit(X, y)
    assert est.n_features_in_ == 4
    assert est.model_.n_leaves <= 5
    pred = est.predict(X)
    assert pred.shape == (120,)
    assert float(((y - pred) ** 2).sum()) == pytest.approx(est.rss_, rel=1e-12)
    assert est.score(X, y) > 0.5
    assert len(est.trace_) == est.model_.n_leaves


def test_not_fitted():
    with pytest.raises(NotFittedError):
        CompositionalTreeRegressor().predict(np.zeros((2, 2)))


def test_feature_mismatch(data):
    X, y = data
    est = CompositionalTreeRegressor(q=4, iters=1).fit(X, y)
    with pytest.raises(ValueError):
        est.predict(X[:, :3])


def test_rescale_matches_manual_scaling(data):
    X, y = data
    Xr = 3.0 + 10.0 * X
    a = CompositionalTreeRegressor(q=6, iters=2, rescale=True).fit(Xr, y)
    manual = (Xr - Xr.min(axis=0)) / (Xr.max(axis=0) - Xr.min(axis=0))
    b = CompositionalTreeRegressor(q=6, iters=2).fit(manual, y)
    np.testing.assert_allclose(a.predict(Xr), b.predict(manual), rtol=1e-10, atol=1e-12)
    assert a.rss_ == pytest.approx(b.rss_, rel=1e-10)
    text = a.to_text()
    assert ":xmin" in text
    np.testing.assert_allclose(evaluate(deserialize(text), a.model_.transform_input(Xr)), a.predict(Xr),
                               rtol=1e-12)


def test_out_of_domain_without_rescale(data):
    X, y = data
    with pytest.raises(ValueError):
        CompositionalTreeRegressor(q=4).fit(X + 2.0, y)


def test_basis_variants(data):
    X, y = data
    est = CompositionalTreeRegressor(basis="poly:3,bspline:4", iters=1).fit(X, y)
    assert est.basis_.q == 7
    est = CompositionalTreeRegressor(basis=standard_catalog(20), q=5, iters=1).fit(X, y)
    assert est.basis_.q == 5
    est = CompositionalTreeRegressor(q=60, iters=0).fit(X, y)
    assert est.basis_.q == 60


def test_decomposition(data):
    X, y = data
    est = CompositionalTreeRegressor(q=8, iters=3).fit(X, y)
    fd = est.decomposition()
    np.testing.assert_allclose(fd.u(X, est.basis_) @ fd.v + est.model_.intercept, est.predict(X),
                               rtol=1e-10, atol=1e-12)


def test_sklearn_tools(data):
    X, y = data
    pipe = make_pipeline(MinMaxScaler(clip=True), CompositionalTreeRegressor(q=6, iters=2))
    scores = cross_val_score(pipe, X, y, cv=3)
    assert scores.shape == (3,)
