"""Scikit-learn style estimators wrapping the functional fitting routines.

Each regressor follows the fit/predict/get_params contract so models drop
into pipelines, grid search, and cross-validation from the wider ecosystem.
Hyperparameters are stored unmodified in ``__init__`` and resolved in
``fit`` (sklearn convention); fitted state lives in trailing-underscore
attributes.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .baselines import (KernelModel, LseConfig, fit_convex_lse,
                        fit_linear_absolute, fit_linear_squared,
                        kernel_predict_many, select_bandwidth)
from .fitting import FitConfig, fit_drcr
from .model import Dataset, predict_many

__all__ = [
    "RobustConvexRegressor",
    "ConvexLeastSquaresRegressor",
    "GaussianKernelRegressor",
    "LinearMedianRegressor",
]


def _dataset(X, y, tag):
    X, y = check_X_y(X, y, dtype=np.float64, y_numeric=True)
    return Dataset(xs=X, ys=y, tag=tag)


class RobustConvexRegressor(BaseEstimator, RegressorMixin):
    """Convex regression robust to covariate perturbations.

    Minimises ``delta * ||grad f||_sup + mean |y - f(x)|`` over max-affine
    functions with the gradient cap ``grad_cap`` (default log n).

    Parameters
    ----------
    delta : float or None
        Ambiguity radius; used when ``schedule="fixed"``.
    schedule : {"experimental", "theoretical", "fixed"}
        Radius schedule; "experimental" is n^(-2/d).
    gamma : float or None
        Tail exponent for the theoretical schedule.
    radius_const : float
        Multiplier on the scheduled radius.
    grad_cap : float or None
        Gradient bound; None means log n.
    row_generation : bool or "auto"
        Lazy pairwise-constraint generation ("auto": on above n=120).

    Attributes
    ----------
    model_ : MaxAffineModel
        The fitted max-affine function.
    """

    def __init__(self, delta=None, schedule="experimental", gamma=None,
                 radius_const=1.0, grad_cap=None, row_generation="auto",
                 violation_tol=1e-8):
        self.delta = delta
        self.schedule = schedule
        self.gamma = gamma
        self.radius_const = radius_const
        self.grad_cap = grad_cap
        self.row_generation = row_generation
        self.violation_tol = violation_tol

    def fit(self, X, y):
        data = _dataset(X, y, tag="sklearn:fit")
        cfg = FitConfig(delta=self.delta, schedule=self.schedule,
                        gamma=self.gamma, radius_const=self.radius_const,
                        grad_cap=self.grad_cap,
                        row_generation=self.row_generation,
                        violation_tol=self.violation_tol)
        self.model_ = fit_drcr(data, cfg)
        self.n_features_in_ = data.d
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return predict_many(self.model_, X)


class ConvexLeastSquaresRegressor(BaseEstimator, RegressorMixin):
    """Least-squares convex regression under a gradient cap ``c``."""

    def __init__(self, c=10.0, tolerance=1e-6, max_iterations=200_000):
        self.c = c
        self.tolerance = tolerance
        self.max_iterations = max_iterations

    def fit(self, X, y):
        data = _dataset(X, y, tag="sklearn:fit")
        cfg = LseConfig(c=self.c, tolerance=self.tolerance,
                        max_iterations=self.max_iterations)
        self.model_ = fit_convex_lse(data, cfg)
        self.n_features_in_ = data.d
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return predict_many(self.model_, X)


class GaussianKernelRegressor(BaseEstimator, RegressorMixin):
    """Nadaraya-Watson regression; bandwidth from leave-one-out selection.

    ``bandwidth=None`` picks h = C n^(-1/(d+4)) with C minimising the LOO
    squared error over the 0.01..1.00 grid.
    """

    def __init__(self, bandwidth=None):
        self.bandwidth = bandwidth

    def fit(self, X, y):
        data = _dataset(X, y, tag="sklearn:fit")
        if self.bandwidth is None:
            h, C = select_bandwidth(data)
            self.selected_C_ = C
        else:
            h = float(self.bandwidth)
        self.model_ = KernelModel(train=data, bandwidth=h)
        self.n_features_in_ = data.d
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return kernel_predict_many(self.model_, X)


class LinearMedianRegressor(BaseEstimator, RegressorMixin):
    """Linear fit under absolute loss (LP), or squared loss when asked."""

    def __init__(self, loss="absolute"):
        self.loss = loss

    def fit(self, X, y):
        data = _dataset(X, y, tag="sklearn:fit")
        if self.loss == "absolute":
            self.model_ = fit_linear_absolute(data)
        elif self.loss == "squared":
            self.model_ = fit_linear_squared(data)
        else:
            raise ValueError(f"loss must be 'absolute' or 'squared', got {self.loss!r}")
        self.n_features_in_ = data.d
        return self

    def predict(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X, dtype=np.float64)
        return predict_many(self.model_, X)
