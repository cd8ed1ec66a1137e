"""scikit-learn estimator wrapper around the greedy tree search."""

from __future__ import annotations

from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .basis import DEFAULT_SPEC, BasisSet, catalog_spec, from_spec
from .solver import Dataset, FitConfig, fit, predict
from .tree import Model, flatten, serialize


class CompositionalTreeRegressor(RegressorMixin, BaseEstimator):
    """Sum-product tree regressor found by greedy leaf insertion.

    Parameters
    ----------
    basis : str or BasisSet, optional
        Catalog spec string such as ``"fourier:8,poly:3,knots:9,bspline:10"``
        (the default), or a ready-made basis set on [0, 1]. When omitted and
        ``q`` exceeds the default catalog, more Fourier frequencies are added.
    q : int, optional
        Keep only the first ``q`` functions of the catalog.
    iters : int, default=10
        Number of insertions after the one-leaf initialization.
    cd_passes_max : int, default=10
        Coordinate-descent passes per committed insertion.
    cd_rel_tol : float, default=1e-8
        Relative RSS improvement below which coordinate descent stops.
    early_stop : bool, default=True
        Stop when no candidate insertion lowers the training RSS.
    rescale : bool, default=False
        Min-max map every column of ``X`` onto [0, 1] using the training
        ranges. Without it, ``X`` must already lie in [0, 1].

    Attributes
    ----------
    model_ : Model
    basis_ : BasisSet
    rss_ : float
        Training residual sum of squares.
    trace_ : list of TraceRow
    n_features_in_ : int
    """

    def __init__(self, basis=None, q=None, iters=10, cd_passes_max=10, cd_rel_tol=1e-8,
                 early_stop=True, rescale=False):
        self.basis = basis
        self.q = q
        self.iters = iters
        self.cd_passes_max = cd_passes_max
        self.cd_rel_tol = cd_rel_tol
        self.early_stop = early_stop
        self.rescale = rescale

    def _make_basis(self) -> BasisSet:
        if isinstance(self.basis, BasisSet):
            if self.q is None:
                return self.basis
            return BasisSet(self.basis.functions[: self.q], domain=self.basis.domain)
        if self.basis is None:
            spec = DEFAULT_SPEC if self.q is None else catalog_spec(self.q)
            return from_spec(spec, q=self.q)
        return from_spec(self.basis, q=self.q)

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        self.n_features_in_ = X.shape[1]
        self.basis_ = self._make_basis()
        x_min = x_max = None
        if self.rescale:
            x_min, x_max = X.min(axis=0), X.max(axis=0)
            scaler = Model(0.0, x_min=x_min, x_max=x_max)
            X = scaler.transform_input(X)
        cfg = FitConfig(iters=self.iters, cd_passes_max=self.cd_passes_max, cd_rel_tol=self.cd_rel_tol,
                        early_stop=self.early_stop)
        self.trace_ = []
        model = fit(Dataset(X, y), self.basis_, cfg, trace=self.trace_)
        r = y - predict(model, X)
        self.rss_ = float(r @ r)
        model.x_min, model.x_max = x_min, x_max
        self.model_ = model
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(f"X has {X.shape[1]} features, expected {self.n_features_in_}")
        return predict(self.model_, X)

    def decomposition(self):
        """Flat sum-of-products form of the fitted tree."""
        check_is_fitted(self, "model_")
        return flatten(self.model_)

    def to_text(self) -> str:
        check_is_fitted(self, "model_")
        return serialize(self.model_)
