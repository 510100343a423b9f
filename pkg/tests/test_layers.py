import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from missnet.data import MaskedMatrix
from missnet.errors import MissingNotAllowedError, ShapeError, StateError
from missnet.nn.layers import (
    Layer, activate, backward, dense_forward, export_neutralizers, forward, nan_dense_backward,
    nan_dense_forward, stabilize, substituted_preactivation,
)
from oracles import (central_difference, promissing_preactivation, relative_error,
                     substitution_preactivation)


def _layer(s, p, seed, mode="promissing", transfer="linear", kind="nan_dense"):
    rng = np.random.default_rng(seed)
    wc = rng.normal(size=s) if mode == "m_promissing" else None
    return Layer(rng.normal(size=(s, p)), rng.normal(size=s), transfer, kind,
                 mode if kind == "nan_dense" else None, wc if kind == "nan_dense" else None)


def _batch(n, p, seed, rate=0.4):
    rng = np.random.default_rng(seed)
    return MaskedMatrix(rng.normal(size=(n, p)), rng.random((n, p)) < rate)


class TestConstruction:
    def test_bias_shape(self):
        with pytest.raises(ShapeError):
            Layer(np.zeros((3, 2)), np.zeros(2))

    def test_mode_rules(self):
        with pytest.raises(ValueError):
            Layer(np.zeros((1, 1)), np.zeros(1), kind="nan_dense", mode="other")
        with pytest.raises(ValueError):
            Layer(np.zeros((1, 1)), np.zeros(1), mode="promissing")
        lay = Layer(np.zeros((2, 3)), np.zeros(2), kind="nan_dense", mode="m_promissing")
        assert lay.wc.tolist() == [0.0, 0.0]
        assert lay.n_params == 2 * 3 + 2 + 2

    def test_glorot_bounds(self):
        lay = Layer.glorot(30, 20, np.random.default_rng(0))
        assert lay.W.shape == (20, 30)
        assert np.abs(lay.W).max() <= np.sqrt(6 / 50)
        assert lay.b.tolist() == [0.0] * 20


class TestForward:
    @pytest.mark.parametrize("mode", ["promissing", "m_promissing"])
    def test_matches_loop_oracle(self, mode):
        lay = _layer(4, 6, 1, mode)
        X = _batch(15, 6, 2)
        want = promissing_preactivation(X.values.tolist(), X.mask.tolist(), lay.W.tolist(),
                                        lay.b.tolist(), None if lay.wc is None else lay.wc.tolist())
        _, cache = forward(lay, X)
        np.testing.assert_allclose(cache["z"], want, rtol=0, atol=1e-12)

    def test_all_missing_promissing_is_zero(self):
        lay = _layer(5, 4, 3)
        X = MaskedMatrix(np.random.default_rng(0).normal(size=(3, 4)), np.ones((3, 4), bool))
        _, cache = forward(lay, X)
        assert np.array_equal(cache["z"], np.zeros((3, 5)))

    def test_all_missing_m_promissing_is_wc(self):
        lay = _layer(5, 4, 3, "m_promissing")
        X = MaskedMatrix(np.zeros((2, 4)), np.ones((2, 4), bool))
        _, cache = forward(lay, X)
        assert np.array_equal(cache["z"], np.tile(lay.wc, (2, 1)))

    @given(arrays(np.float64, (4, 3), elements=st.floats(-100, 100)), st.integers(0, 1000),
           st.sampled_from(["promissing", "m_promissing"]))
    @settings(max_examples=60)
    def test_mask_free_equals_dense(self, x, seed, mode):
        lay = _layer(2, 3, seed, mode, "tanh")
        dense = Layer(lay.W, lay.b, "tanh")
        assert np.array_equal(nan_dense_forward(lay, MaskedMatrix.complete(x)), dense_forward(dense, x))

    def test_payload_under_mask_is_ignored(self):
        lay = _layer(3, 4, 0, "m_promissing")
        X = _batch(6, 4, 1)
        noisy = X.replace(values=np.where(X.mask, 1e9, X.values))
        assert np.array_equal(nan_dense_forward(lay, X), nan_dense_forward(lay, noisy))

    def test_nan_input_means_missing(self):
        lay = _layer(3, 2, 0)
        a = np.array([[1.0, np.nan]])
        np.testing.assert_array_equal(nan_dense_forward(lay, a),
                                      nan_dense_forward(lay, MaskedMatrix.from_nan(a)))

    def test_row_results_do_not_depend_on_batch(self):
        lay = _layer(3, 5, 4, "m_promissing", "relu")
        X = _batch(20, 5, 5)
        full = nan_dense_forward(lay, X)
        for i in (0, 7, 19):
            assert np.array_equal(nan_dense_forward(lay, X.take([i])), full[i:i + 1])

    def test_dense_refuses_missing(self):
        lay = _layer(2, 2, 0, kind="dense")
        with pytest.raises(MissingNotAllowedError):
            forward(lay, MaskedMatrix(np.zeros((1, 2)), [[True, False]]))
        with pytest.raises(MissingNotAllowedError):
            forward(lay, np.array([[np.nan, 1.0]]))

    def test_width_check(self):
        with pytest.raises(ShapeError):
            forward(_layer(2, 3, 0), np.zeros((1, 4)))

    @pytest.mark.parametrize("transfer", ["tanh", "sigmoid", "relu", "softmax", "linear"])
    def test_transfers(self, transfer):
        z = np.array([[-2.0, 0.5, 3.0]])
        out = activate(z, transfer)
        ref = {"tanh": np.tanh(z), "sigmoid": 1 / (1 + np.exp(-z)), "relu": np.maximum(z, 0),
               "softmax": np.exp(z) / np.exp(z).sum(), "linear": z}[transfer]
        np.testing.assert_allclose(out, ref, rtol=1e-14)


class TestNeutralizers:
    def test_formula(self):
        lay = Layer(np.array([[2.0, -4.0]]), np.array([3.0]), kind="nan_dense", mode="promissing")
        U = export_neutralizers(lay).U
        np.testing.assert_allclose(U, [[-3.0 / (2 * 2.0), -3.0 / (2 * -4.0)]])

    def test_substitution_reproduces_closed_form(self):
        for seed in range(20):
            lay = _layer(3, 5, seed)
            X = _batch(8, 5, seed + 50)
            U = export_neutralizers(lay).U
            _, cache = forward(lay, X)
            np.testing.assert_allclose(substituted_preactivation(lay, X, U), cache["z"],
                                       rtol=0, atol=1e-9)
            loop = substitution_preactivation(X.values.tolist(), X.mask.tolist(),
                                              lay.W.tolist(), lay.b.tolist())
            np.testing.assert_allclose(loop, cache["z"], rtol=0, atol=1e-9)

    def test_stabilize(self):
        W = np.array([0.0, 1e-12, -1e-12, 0.5])
        assert stabilize(W, 1e-8).tolist() == [1e-8, 1e-8, -1e-8, 0.5]
        U = export_neutralizers(Layer(np.zeros((1, 2)), np.ones(1), kind="nan_dense",
                                      mode="promissing")).U
        assert np.isfinite(U).all()

    def test_dense_has_none(self):
        with pytest.raises(ValueError):
            export_neutralizers(_layer(1, 1, 0, kind="dense"))

    def test_csv_rows(self):
        rows = list(export_neutralizers(_layer(2, 3, 0)).csv_rows())
        assert len(rows) == 6 and rows[0][:2] == (0, 0)


class TestBackward:
    def test_needs_cache(self):
        with pytest.raises(StateError):
            backward(_layer(1, 1, 0), None, np.ones((1, 1)))

    @pytest.mark.parametrize("mode", ["promissing", "m_promissing"])
    @pytest.mark.parametrize("transfer", ["tanh", "sigmoid", "relu", "softmax"])
    def test_finite_differences(self, mode, transfer):
        lay = _layer(3, 4, 7, mode, transfer)
        X = _batch(6, 4, 8)
        V = np.random.default_rng(9).normal(size=(6, 3))

        def loss():
            return float(np.sum(nan_dense_forward(lay, X) * V))

        out, cache = forward(lay, X)
        grads = nan_dense_backward(lay, cache, V)
        numeric = central_difference(loss, lay.params())
        for k in lay.params():
            assert relative_error(grads[k], numeric[k]) <= 1e-5

    def test_input_gradient_zero_where_missing(self):
        lay = _layer(2, 3, 0)
        X = _batch(5, 3, 1)
        _, cache = forward(lay, X)
        dx = backward(lay, cache, np.ones((5, 2)))["x"]
        assert (dx[X.mask] == 0).all()

    def test_no_gradient_through_missing_weights(self):
        lay = _layer(2, 3, 0)
        X = MaskedMatrix(np.ones((1, 3)), [[True, False, False]])
        _, cache = forward(lay, X)
        g = backward(lay, cache, np.ones((1, 2)))
        assert (g["W"][:, 0] == 0).all()
