import numpy as np
import pytest

from convexreg.estimators import (ConvexLeastSquaresRegressor,
                                  GaussianKernelRegressor,
                                  LinearMedianRegressor,
                                  RobustConvexRegressor)
from oracles import random_dataset


@pytest.fixture
def xy():
    rng = np.random.default_rng(0)
    data = random_dataset(rng, 30, 2, sigma=0.1)
    return data.xs, data.ys


class TestSklearnContract:
    @pytest.mark.parametrize("est", [
        RobustConvexRegressor(), ConvexLeastSquaresRegressor(c=2.0),
        GaussianKernelRegressor(), LinearMedianRegressor()])
    def test_fit_predict_shapes(self, est, xy):
        X, y = xy
        est.fit(X, y)
        preds = est.predict(X[:7])
        assert preds.shape == (7,)
        assert np.isfinite(preds).all()

    def test_get_set_params_round_trip(self):
        est = RobustConvexRegressor(delta=0.3, schedule="fixed")
        params = est.get_params()
        assert params["delta"] == 0.3
        cloned = RobustConvexRegressor(**params)
        assert cloned.get_params() == params

    def test_clone_compatible(self, xy):
        from sklearn.base import clone
        X, y = xy
        est = clone(RobustConvexRegressor(delta=0.2, schedule="fixed"))
        est.fit(X, y)
        assert hasattr(est, "model_")

    def test_unfitted_predict_raises(self):
        from sklearn.exceptions import NotFittedError
        with pytest.raises(NotFittedError):
            RobustConvexRegressor().predict([[0.0, 0.0]])

    def test_score_is_r2(self, xy):
        X, y = xy
        est = RobustConvexRegressor(delta=0.0, schedule="fixed").fit(X, y)
        assert est.score(X, y) > 0.9

    def test_pipeline_composition(self, xy):
        from sklearn.pipeline import make_pipeline
        from sklearn.preprocessing import StandardScaler
        X, y = xy
        pipe = make_pipeline(StandardScaler(),
                             RobustConvexRegressor(schedule="experimental"))
        pipe.fit(X, y)
        assert pipe.predict(X[:3]).shape == (3,)

    def test_kernel_bandwidth_attribute(self, xy):
        X, y = xy
        est = GaussianKernelRegressor().fit(X, y)
        assert est.model_.bandwidth > 0
        assert 0.01 <= est.selected_C_ <= 1.0

    def test_linear_loss_flag(self, xy):
        X, y = xy
        est = LinearMedianRegressor(loss="squared").fit(X, y)
        assert est.model_.fit_meta.extra["loss"] == "squared"
        with pytest.raises(ValueError):
            LinearMedianRegressor(loss="huber").fit(X, y)
