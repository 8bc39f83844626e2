import numpy as np
import pytest

from src.system.errors import ShapeMismatchError
from src.training.optimizer import AdamConfig, AdamState, adam_step

EPS = 1e-8


def _params():
    return {"item_embeddings": np.arange(6, dtype=np.float64).reshape(3, 2), "user_b1": np.zeros(2)}


class TestAdam:
    def test_zero_gradient_leaves_parameters(self):
        params = _params()
        before = {k: v.copy() for k, v in params.items()}
        adam_step(params, {k: np.zeros_like(v) for k, v in params.items()}, AdamState(), AdamConfig(lr=0.1))
        for name in params:
            np.testing.assert_array_equal(params[name], before[name])

    def test_first_step_moves_by_learning_rate(self):
        params = {"user_b1": np.zeros(2)}
        adam_step(params, {"user_b1": np.array([0.5, -2.0])}, AdamState(), AdamConfig(lr=0.1, eps=EPS))
        np.testing.assert_allclose(params["user_b1"], [-0.1 * 0.5 / (0.5 + EPS), 0.1 * 2.0 / (2.0 + EPS)],
                                   rtol=1e-14)

    def test_two_step_trace(self):
        params, state = {"user_b1": np.zeros(1)}, AdamState()
        cfg = AdamConfig(lr=0.1, beta1=0.9, beta2=0.999, eps=EPS)
        adam_step(params, {"user_b1": np.array([1.0])}, state, cfg)
        adam_step(params, {"user_b1": np.array([-1.0])}, state, cfg)
        # m = -0.01, m_hat = -0.01 / 0.19, v_hat = 1
        expected = -0.1 / (1.0 + EPS) + 0.1 * (0.01 / 0.19) / (1.0 + EPS)
        np.testing.assert_allclose(params["user_b1"], [expected], rtol=1e-10)
        assert state.step == 2

    def test_sparse_rows_only(self):
        params, state = _params(), AdamState()
        grads = {"item_embeddings": np.ones((3, 2)), "user_b1": np.ones(2)}
        adam_step(params, grads, state, AdamConfig(lr=0.1), touched_rows=np.array([1]))
        np.testing.assert_array_equal(params["item_embeddings"][[0, 2]], [[0.0, 1.0], [4.0, 5.0]])
        assert np.all(params["item_embeddings"][1] < [2.0, 3.0])
        assert np.all(state.m["item_embeddings"][[0, 2]] == 0.0)
        assert np.all(params["user_b1"] < 0)

    def test_zero_learning_rate_is_bitwise_identity(self, rng):
        params = _params()
        before = {k: v.copy() for k, v in params.items()}
        grads = {k: rng.normal(size=v.shape) for k, v in params.items()}
        adam_step(params, grads, AdamState(), AdamConfig(lr=0.0))
        for name in params:
            np.testing.assert_array_equal(params[name], before[name])

    def test_non_finite_gradient(self):
        params = _params()
        grads = {"item_embeddings": np.zeros((3, 2)), "user_b1": np.array([0.0, np.nan])}
        with pytest.raises(FloatingPointError):
            adam_step(params, grads, AdamState(), AdamConfig())
        np.testing.assert_array_equal(params["user_b1"], [0.0, 0.0])

    def test_shape_mismatch(self):
        with pytest.raises(ShapeMismatchError):
            adam_step(_params(), {"user_b1": np.zeros(3)}, AdamState(), AdamConfig())
        with pytest.raises(ShapeMismatchError):
            adam_step(_params(), {"user_w9": np.zeros(2)}, AdamState(), AdamConfig())
