"""scikit-learn style wrappers around the calibration and minimization pipelines.

Samples are points of the group in exponential coordinates, so ``X`` has one
row per point and ``dim = 2n + k`` columns.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .connection import calibrate_conformal_constant, curvature_at, solve_connection
from .fields import GVProfile, random_positive_fields
from .flat_model import calibrate_profile, yamabe_residual
from .yamabe import TorusGrid, minimize, random_positive_grid


def _check_points(X, group):
    X = check_array(X, dtype=np.float64, ensure_2d=True)
    if X.shape[1] != group.dim:
        raise ValueError(f"expected {group.dim} coordinates per point, got {X.shape[1]}")
    return X


class ProfileCalibrator(BaseEstimator):
    """Fit the profile constant so that ``-Delta U = U^{(Q+2)/(Q-2)}``.

    ``predict`` evaluates the calibrated profile; ``score`` is minus the worst
    relative PDE residual on ``X``.
    """

    def __init__(self, group=None, tol=1e-8):
        self.group = group
        self.tol = tol

    def fit(self, X, y=None):
        X = _check_points(X, self.group)
        record = calibrate_profile(self.group, X, tol=self.tol)
        self.constant_ = record.C_G
        self.ratio_ = record.stats["ratio"]
        self.spread_ = record.stats["spread"]
        self.record_ = record
        return self

    def predict(self, X):
        check_is_fitted(self, "constant_")
        X = _check_points(X, self.group)
        return GVProfile(self.group, self.constant_)(X)

    def residuals(self, X):
        check_is_fitted(self, "constant_")
        X = _check_points(X, self.group)
        return yamabe_residual(self.group, GVProfile(self.group, self.constant_), X)

    def score(self, X, y=None):
        return -float(np.max(self.residuals(X)))


class ScalarCurvatureTransformer(TransformerMixin, BaseEstimator):
    """Map points to the scalar curvature of ``(f g, f theta)`` with ``f = u^{4/(Q-2)}``."""

    def __init__(self, group=None, field=None, min_gap=1e6):
        self.group = group
        self.field = field
        self.min_gap = min_gap

    def fit(self, X=None, y=None):
        self.factor_ = self.field ** (4.0 / (self.group.Q - 2))
        return self

    def transform(self, X):
        check_is_fitted(self, "factor_")
        X = _check_points(X, self.group)
        return np.array([curvature_at(self.group, self.factor_, p) for p in X])

    def residuals(self, X):
        """Per point, the worst residual among the connection's defining equations."""
        check_is_fitted(self, "factor_")
        X = _check_points(X, self.group)
        return np.array([solve_connection(self.group, self.factor_, p, self.min_gap).max_residual()
                         for p in X])


class ConformalConstantCalibrator(BaseEstimator):
    """Fit ``C`` in ``K~ u^{(Q+2)/(Q-2)} = -C Delta u`` over random positive ``u``."""

    def __init__(self, group=None, n_fields=10, seed=0, rel_tol=1e-4):
        self.group = group
        self.n_fields = n_fields
        self.seed = seed
        self.rel_tol = rel_tol

    def fit(self, X, y=None):
        X = _check_points(X, self.group)
        fields = random_positive_fields(self.group.dim, self.n_fields, self.seed)
        record = calibrate_conformal_constant(self.group, fields, X, self.rel_tol)
        self.constant_ = record.C
        self.slopes_ = np.array(record.slopes)
        self.record_ = record
        return self

    def predict(self, X):
        """``-C Delta u`` given ``X[:, 0] = Delta u``: the curvature density the law predicts."""
        check_is_fitted(self, "constant_")
        X = check_array(X, dtype=np.float64)
        return -self.constant_ * X[:, 0]


class YamabeMinimizer(BaseEstimator):
    """Minimize the Yamabe quotient on a coordinate torus of the group."""

    def __init__(self, group=None, C=1.0, resolution=16, periods=1.0, stencil=2,
                 max_iters=500, tol=1e-6, seed=0):
        self.group = group
        self.C = C
        self.resolution = resolution
        self.periods = periods
        self.stencil = stencil
        self.max_iters = max_iters
        self.tol = tol
        self.seed = seed

    def fit(self, X=None, y=None):
        """``X`` is an optional positive starting field shaped like the grid."""
        grid = TorusGrid(self.group, self.resolution, self.periods, self.stencil)
        u0 = random_positive_grid(grid, self.seed) if X is None else np.asarray(X, dtype=float)
        if u0.shape != grid.resolution:
            raise ValueError(f"initial field must have shape {grid.resolution}")
        self.grid_ = grid
        self.result_ = minimize(grid, u0, self.C, max_iters=self.max_iters, tol=self.tol)
        self.quotient_ = self.result_.quotient
        self.u_ = self.result_.u
        return self
