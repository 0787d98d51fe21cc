import doctest

import numpy as np
import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from hyperharmonic.boundary import Linear
from hyperharmonic.estimators import GoodExtension, HarmonicExtension
from hyperharmonic.geometry import ball_distance, cayley_array


def test_good_extension_transform_matches_closed_form():
    ext = GoodExtension("linear(2, 0, 0, 1)", nodes_per_axis=4).fit()
    X = np.array([[0.0, 0.0, 1.0], [1.0, -1.0, 0.5]])
    out = ext.transform(X)
    np.testing.assert_allclose(out[:, :2], X[:, :2] * [2.0, 1.0], atol=1e-12)
    np.testing.assert_allclose(out[:, 2], np.sqrt(2.5) * X[:, 2], rtol=1e-12)
    np.testing.assert_allclose(ext.fit_transform(X), out)


def test_good_extension_validation():
    with pytest.raises(NotFittedError):
        GoodExtension().transform([[0, 0, 1.0]])
    ext = GoodExtension(Linear()).fit()
    with pytest.raises(ValueError):
        ext.transform([[0, 0, -1.0]])
    with pytest.raises(ValueError):
        ext.transform([[0, 1.0]])
    with pytest.raises(ValueError):
        GoodExtension("mobius(0, 1, 1, 0)").fit()
    with pytest.raises(TypeError):
        GoodExtension(3).fit()


def test_params_and_clone():
    est = HarmonicExtension("identity", radius=0.2, resolution=9)
    params = est.get_params()
    assert params["radius"] == 0.2 and params["resolution"] == 9
    twin = clone(est)
    assert twin.get_params() == params and twin is not est
    assert clone(GoodExtension(nodes_per_axis=8)).nodes_per_axis == 8


def test_harmonic_extension_predicts_linear_harmonic():
    est = HarmonicExtension("linear(2, 0, 0, 1)", radius=0.2, resolution=9, tol=1e-4, nodes_per_axis=4)
    with pytest.raises(NotFittedError):
        est.predict([[0.0, 0.0, 0.0]])
    est.fit()
    assert est.converged_ and est.n_features_in_ == 3
    X = np.array([[0.0, 0.0, 0.0], [0.05, -0.03, 0.02]])
    exact = GoodExtension("linear(2, 0, 0, 1)", nodes_per_axis=4).fit().transform(cayley_array(X))
    assert ball_distance(est.predict(X), cayley_array(exact)).max() < 1e-3


def test_module_examples():
    import hyperharmonic.estimators as mod

    assert doctest.testmod(mod).failed == 0
