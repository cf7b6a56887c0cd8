import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from attribspace.errors import EmptyInputError, ShapeError, ValidationError
from attribspace.nn import (
    Activation,
    AdamState,
    Layer,
    LayerGrads,
    Mlp,
    adam_step,
    bce_loss,
    init_mlp,
    l1_loss,
    mlp_backward,
    mlp_forward,
    sigmoid,
)
from attribspace.rng import Rng

from gradcheck import (
    classification_loss_case,
    deviation_loss_case,
    max_relative_error,
    sample_clean_case,
)


def single_layer(weight, bias, activation=Activation.IDENTITY) -> Mlp:
    return Mlp([Layer(np.array(weight, dtype=float), np.array(bias, dtype=float), activation)])


class TestForward:
    def test_identity_layer_passes_input_through(self):
        mlp = single_layer(np.eye(2), [0.0, 0.0])
        out = mlp_forward(mlp, np.array([[3.0, -1.0]]))
        assert np.array_equal(out, [[3.0, -1.0]])

    def test_relu_clips_negatives(self):
        mlp = single_layer(np.eye(2), [0.0, 0.0], Activation.RELU)
        out = mlp_forward(mlp, np.array([[3.0, -1.0]]))
        assert np.array_equal(out, [[3.0, 0.0]])

    def test_hand_computed_affine(self):
        # output = W x + b with W = [[1,1],[0,1]], b = [1, 0], x = [1, 2]
        mlp = single_layer([[1.0, 1.0], [0.0, 1.0]], [1.0, 0.0])
        out = mlp_forward(mlp, np.array([[1.0, 2.0]]))
        assert np.array_equal(out, [[4.0, 2.0]])

    def test_batch_dim_mismatch_names_layer(self):
        mlp = single_layer(np.eye(2), [0.0, 0.0])
        with pytest.raises(ShapeError, match="layer 0"):
            mlp_forward(mlp, np.zeros((1, 3)))

    def test_incompatible_stack_rejected(self):
        with pytest.raises(ShapeError, match="layer 1"):
            Mlp(
                [
                    Layer(np.zeros((3, 2)), np.zeros(3), Activation.RELU),
                    Layer(np.zeros((1, 4)), np.zeros(1), Activation.IDENTITY),
                ]
            )

    def test_bias_length_checked(self):
        with pytest.raises(ShapeError):
            Layer(np.zeros((2, 2)), np.zeros(3), Activation.IDENTITY)

    def test_nonfinite_output_rejected(self):
        mlp = single_layer([[1e308, 1e308]], [0.0])
        with np.errstate(over="ignore"), pytest.raises(ValidationError):
            mlp_forward(mlp, np.array([[1e308, 1e308]]))


class TestBackward:
    def test_zero_output_grad_gives_zero_grads(self):
        rng = Rng(1)
        mlp = init_mlp([3, 5, 2], rng)
        batch = Rng(2).normal_matrix(4, 3)
        grads, input_grad = mlp_backward(mlp, batch, np.zeros((4, 2)))
        assert np.array_equal(input_grad, np.zeros((4, 3)))
        for g in grads:
            assert np.array_equal(g.weight, np.zeros_like(g.weight))
            assert np.array_equal(g.bias, np.zeros_like(g.bias))

    def test_identity_layer_input_grad_is_g_times_w(self):
        w = np.array([[1.0, 2.0], [3.0, 4.0]])
        mlp = single_layer(w, [0.0, 0.0])
        g = np.array([[1.0, -1.0], [0.5, 2.0]])
        _, input_grad = mlp_backward(mlp, np.ones((2, 2)), g)
        assert np.allclose(input_grad, g @ w)

    def test_output_grad_shape_checked(self):
        mlp = single_layer(np.eye(2), [0.0, 0.0])
        with pytest.raises(ShapeError):
            mlp_backward(mlp, np.ones((2, 2)), np.ones((3, 2)))

    def test_three_layer_net_matches_finite_differences(self):
        rng = np.random.default_rng(2024)
        loss_fn, analytic, layers = sample_clean_case(deviation_loss_case, rng)
        assert max_relative_error(loss_fn, analytic, layers) < 1e-4

    def test_classifier_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(99)
        loss_fn, analytic, layers = sample_clean_case(classification_loss_case, rng)
        assert max_relative_error(loss_fn, analytic, layers) < 1e-4


class TestL1Loss:
    def test_zero_residuals(self):
        loss, grad = l1_loss(np.array([[0.0, 0.0]]))
        assert loss == 0.0
        assert np.array_equal(grad, [[0.0, 0.0]])

    def test_single_row_sums_absolutes(self):
        loss, _ = l1_loss(np.array([[0.5, 0.5]]))
        assert loss == 1.0

    def test_hand_computed_two_rows(self):
        loss, grad = l1_loss(np.array([[1.0, -1.0], [2.0, 0.0]]))
        assert loss == 2.0
        assert np.array_equal(grad, [[0.5, -0.5], [0.5, 0.0]])

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            l1_loss(np.zeros((0, 3)))

    @given(
        arrays(
            np.float64,
            st.tuples(st.integers(1, 5), st.integers(1, 5)),
            elements=st.floats(-100, 100),
        )
    )
    def test_nonnegative_and_zero_iff_zero(self, residuals):
        loss, _ = l1_loss(residuals)
        assert loss >= 0.0
        assert (loss == 0.0) == bool((residuals == 0.0).all())


class TestBceLoss:
    def test_even_odds(self):
        loss, _ = bce_loss(np.array([0.5]), np.array([1.0]))
        assert loss == pytest.approx(math.log(2.0), rel=1e-12)

    def test_confident_correct_is_near_zero(self):
        loss, _ = bce_loss(np.array([1.0 - 1e-7]), np.array([1.0]))
        assert loss == pytest.approx(0.0, abs=1e-6)

    def test_hand_computed_pair(self):
        loss, _ = bce_loss(np.array([0.9, 0.2]), np.array([1.0, 0.0]))
        assert loss == pytest.approx((-math.log(0.9) - math.log(0.8)) / 2.0, rel=1e-12)

    def test_length_mismatch(self):
        with pytest.raises(ShapeError):
            bce_loss(np.array([0.5, 0.5]), np.array([1.0]))

    def test_bad_labels_rejected(self):
        with pytest.raises(ValidationError):
            bce_loss(np.array([0.5]), np.array([2.0]))

    @given(
        st.lists(st.floats(0.0, 1.0), min_size=1, max_size=16),
        st.data(),
    )
    @settings(max_examples=50)
    def test_nonnegative_for_all_clamped_inputs(self, probs, data):
        labels = data.draw(
            st.lists(st.sampled_from([0, 1]), min_size=len(probs), max_size=len(probs))
        )
        loss, _ = bce_loss(np.array(probs), np.array(labels, dtype=float))
        assert loss >= 0.0


class TestAdam:
    def test_zero_gradient_leaves_params_step_increments(self):
        mlp = init_mlp([2, 2], Rng(5))
        before = mlp.digest()
        state = AdamState.for_layers(mlp.layers)
        zero = [LayerGrads(np.zeros((2, 2)), np.zeros(2))]
        adam_step(mlp.layers, zero, state)
        assert mlp.digest() == before
        assert state.step == 1

    def test_first_step_hand_value(self):
        mlp = single_layer([[1.0]], [0.0])
        state = AdamState.for_layers(mlp.layers, learning_rate=0.1)
        adam_step(mlp.layers, [LayerGrads(np.array([[1.0]]), np.array([0.0]))], state)
        expected = 1.0 - 0.1 * (1.0 / (1.0 + 1e-8))
        assert mlp.layers[0].weight[0, 0] == pytest.approx(expected, rel=1e-12)

    def test_shape_mismatch_rejected(self):
        mlp = single_layer([[1.0]], [0.0])
        state = AdamState.for_layers(mlp.layers)
        with pytest.raises(ShapeError):
            adam_step(mlp.layers, [LayerGrads(np.zeros((2, 2)), np.zeros(2))], state)

    def test_identical_runs_are_bitwise_identical(self):
        def run():
            mlp = init_mlp([4, 8, 2], Rng(21))
            state = AdamState.for_layers(mlp.layers)
            batch = Rng(22).normal_matrix(6, 4)
            for step in range(20):
                target = Rng(23 + step).normal_matrix(6, 2)
                out = mlp_forward(mlp, batch)
                _, grad = l1_loss(out - target)
                grads, _ = mlp_backward(mlp, batch, grad)
                adam_step(mlp.layers, grads, state)
            return mlp.digest()

        assert run() == run()


class TestInit:
    def test_glorot_bound_and_zero_bias(self):
        mlp = init_mlp([10, 20], Rng(3))
        bound = math.sqrt(6.0 / 30.0)
        assert np.abs(mlp.layers[0].weight).max() <= bound
        assert np.array_equal(mlp.layers[0].bias, np.zeros(20))

    def test_hidden_relu_output_identity(self):
        mlp = init_mlp([4, 8, 8, 2], Rng(4))
        acts = [l.activation for l in mlp.layers]
        assert acts == [Activation.RELU, Activation.RELU, Activation.IDENTITY]


def test_sigmoid_matches_reference_and_is_stable():
    x = np.array([-800.0, -10.0, 0.0, 10.0, 800.0])
    out = sigmoid(x)
    assert out[2] == 0.5
    assert 0.0 <= out[0] < 1e-300 or out[0] == 0.0
    assert out[4] == 1.0  # saturation in float64; predict() clamps downstream
    assert np.allclose(out[1], 1.0 / (1.0 + math.exp(10.0)))
