"""scikit-learn style wrappers around the extension and the restricted harmonic solve.

>>> ext = GoodExtension("linear(2, 0, 0, 1)", nodes_per_axis=4).fit()
>>> round(float(ext.transform([[0.0, 0.0, 1.0]])[0, 2]), 6)
1.581139
"""
from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .boundary import BoundaryMap, parse_map
from .extension import GoodExtensionMap, QuadratureSpec
from .flow import solve_restricted


def _as_map(boundary) -> BoundaryMap:
    if isinstance(boundary, BoundaryMap):
        return boundary
    if isinstance(boundary, str):
        return parse_map(boundary)
    raise TypeError("boundary must be a BoundaryMap or its text form")


def _points(X, n_features=3):
    X = check_array(X, dtype=float)
    if X.shape[1] != n_features:
        raise ValueError(f"expected {n_features} coordinates per row, got {X.shape[1]}")
    return X


class GoodExtension(TransformerMixin, BaseEstimator):
    """Transformer sending half-space points ``(x, y, t)`` to their images under the extension of a boundary map.

    ``fit`` only parses the map and checks that it fixes infinity; the data
    passed to it is ignored.
    """

    def __init__(self, boundary="identity", nodes_per_axis: int = 32, jitter: float = 1e-9):
        self.boundary = boundary
        self.nodes_per_axis = nodes_per_axis
        self.jitter = jitter

    def fit(self, X=None, y=None):
        f = _as_map(self.boundary)
        if not f.fixes_infinity:
            raise ValueError("the extension needs a boundary map fixing infinity")
        self.map_ = f
        self.quadrature_ = QuadratureSpec(nodes_per_axis=self.nodes_per_axis, jitter=self.jitter)
        self.n_features_in_ = 3
        return self

    def transform(self, X):
        check_is_fitted(self, "map_")
        X = _points(X)
        if np.any(X[:, 2] <= 0):
            raise ValueError("half-space points need t > 0")
        return GoodExtensionMap(self.map_, self.quadrature_)(X)


class HarmonicExtension(BaseEstimator):
    """Numerical harmonic extension on the ball ``|x| <= radius`` (ball-chart coordinates).

    ``fit`` runs the heat flow from the extension of the boundary map;
    ``predict`` interpolates the converged field trilinearly.  The flow report
    is kept in ``report_`` and ``converged_`` records whether the tolerance
    was reached.
    """

    def __init__(self, boundary="identity", radius: float = 0.3, resolution: int = 17, tol: float = 1e-4,
                 max_iter: int = 200000, nodes_per_axis: int = 32, c: float = 0.2):
        self.boundary = boundary
        self.radius = radius
        self.resolution = resolution
        self.tol = tol
        self.max_iter = max_iter
        self.nodes_per_axis = nodes_per_axis
        self.c = c

    def fit(self, X=None, y=None):
        f = _as_map(self.boundary)
        quad = QuadratureSpec(nodes_per_axis=self.nodes_per_axis)
        self.field_, self.report_ = solve_restricted(f, self.radius, self.resolution, self.tol, self.max_iter,
                                                     quad, self.c)
        self.converged_ = self.report_.converged
        self.n_features_in_ = 3
        return self

    def predict(self, X):
        check_is_fitted(self, "field_")
        return self.field_.as_interior_map()(_points(X))


__all__ = ["GoodExtension", "HarmonicExtension"]
