import numpy as np
import pytest

from app.core.errors import CheckpointFormatError, NumericError, ShapeError
from app.services.neural import (
    AdamOptimizer,
    DenseNetwork,
    SgdOptimizer,
    apply_gradients,
    backward,
    forward,
    from_bytes,
    load,
    make_optimizer,
    save,
    to_bytes,
)


def _net(dims=(3, 8, 8, 2), seed=0, output_activation="identity"):
    return DenseNetwork.initialize(dims, np.random.default_rng(seed), output_activation=output_activation)


def _numeric_gradient(net, inputs, upstream, param, eps=1e-6):
    grad = np.zeros_like(param)
    for index in np.ndindex(param.shape):
        original = param[index]
        param[index] = original + eps
        plus = float(np.sum(upstream * net.forward(inputs)))
        param[index] = original - eps
        minus = float(np.sum(upstream * net.forward(inputs)))
        param[index] = original
        grad[index] = (plus - minus) / (2 * eps)
    return grad


def test_initialization_is_glorot_uniform_with_zero_bias():
    net = _net((4, 64, 2))
    limit = np.sqrt(6.0 / 68)
    assert np.all(np.abs(net.weights[0]) <= limit)
    assert np.all(net.biases[0] == 0.0)
    assert net.layer_dims == [4, 64, 2]


def test_forward_handles_single_rows_and_batches():
    net = _net()
    batch = np.random.default_rng(1).normal(size=(5, 3))
    outputs = forward(net, batch)
    assert outputs.shape == (5, 2)
    np.testing.assert_allclose(forward(net, batch[2]), outputs[2])
    with pytest.raises(ShapeError):
        forward(net, np.ones(4))


def test_backward_matches_finite_differences():
    rng = np.random.default_rng(2)
    net = _net(seed=3)
    for b in net.biases:
        b[...] = rng.normal(scale=0.1, size=b.shape)
    inputs = rng.normal(size=(4, 3))
    upstream = rng.normal(size=(4, 2))

    grads, input_grad = backward(net, inputs, upstream)

    for param, grad in zip(net.parameters(), grads):
        np.testing.assert_allclose(grad, _numeric_gradient(net, inputs, upstream, param), rtol=1e-5, atol=1e-7)
    np.testing.assert_allclose(
        input_grad, _numeric_gradient(net, inputs, upstream, inputs), rtol=1e-5, atol=1e-7
    )


def test_backward_through_relu_output():
    rng = np.random.default_rng(4)
    net = _net((3, 6, 4), seed=5, output_activation="relu")
    net.biases[-1][...] = 0.3
    inputs = rng.normal(size=(3, 3))
    upstream = rng.normal(size=(3, 4))
    grads, _ = backward(net, inputs, upstream)
    for param, grad in zip(net.parameters(), grads):
        np.testing.assert_allclose(grad, _numeric_gradient(net, inputs, upstream, param), rtol=1e-5, atol=1e-7)


def test_zero_learning_rate_leaves_parameters_unchanged():
    net = _net()
    before = [p.copy() for p in net.parameters()]
    grads, _ = backward(net, np.ones((2, 3)), np.ones((2, 2)))
    apply_gradients(net, SgdOptimizer(0.0), grads)
    for old, new in zip(before, net.parameters()):
        np.testing.assert_array_equal(old, new)


def test_sgd_moves_against_the_gradient():
    net = _net()
    grads = [np.ones_like(p) for p in net.parameters()]
    before = [p.copy() for p in net.parameters()]
    apply_gradients(net, SgdOptimizer(0.1), grads)
    for old, new in zip(before, net.parameters()):
        np.testing.assert_allclose(new, old - 0.1)


def test_adam_first_step_has_learning_rate_magnitude():
    net = _net()
    grads = [np.full_like(p, 3.0) for p in net.parameters()]
    before = [p.copy() for p in net.parameters()]
    apply_gradients(net, AdamOptimizer(0.01), grads)
    for old, new in zip(before, net.parameters()):
        np.testing.assert_allclose(old - new, 0.01, rtol=1e-6)


def test_make_optimizer_rejects_unknown_kinds():
    assert isinstance(make_optimizer("adam", 1e-3), AdamOptimizer)
    with pytest.raises(ValueError):
        make_optimizer("rmsprop", 1e-3)
    with pytest.raises(ValueError):
        SgdOptimizer(-1.0)


def test_non_finite_gradients_are_refused():
    net = _net()
    grads = [np.zeros_like(p) for p in net.parameters()]
    grads[1][0] = np.nan
    before = [p.copy() for p in net.parameters()]
    with pytest.raises(NumericError):
        apply_gradients(net, SgdOptimizer(0.1), grads)
    for old, new in zip(before, net.parameters()):
        np.testing.assert_array_equal(old, new)


def test_overflowing_step_leaves_parameters_untouched():
    net = _net()
    grads = [np.full_like(p, 1e308) for p in net.parameters()]
    before = [p.copy() for p in net.parameters()]
    with np.errstate(over="ignore"), pytest.raises(NumericError):
        apply_gradients(net, SgdOptimizer(10.0), grads)
    for old, new in zip(before, net.parameters()):
        np.testing.assert_array_equal(old, new)


def _quadratic_fit(learning_rate, steps):
    # y = 1.5x^2 - 0.5x + 0.25 regressed on features (x, x^2); the loss is convex in the weights
    x = np.linspace(-1.0, 1.0, 64)
    features = np.column_stack([x, x**2])
    targets = (1.5 * x**2 - 0.5 * x + 0.25)[:, np.newaxis]
    net = _net((2, 1), seed=3)
    optimizer = SgdOptimizer(learning_rate)
    losses = []
    for _ in range(steps):
        residual = net.forward(features) - targets
        losses.append(0.5 * float(np.mean(residual**2)))
        grads, _ = backward(net, features, residual / len(x))
        apply_gradients(net, optimizer, grads)
    losses.append(0.5 * float(np.mean((net.forward(features) - targets) ** 2)))
    return losses


def test_sgd_solves_a_quadratic_regression():
    losses = _quadratic_fit(0.5, 200)
    assert losses[-1] <= losses[0] / 100


@pytest.mark.parametrize("learning_rate", [1e-3, 0.5])
def test_sgd_loss_never_rises_on_a_convex_fit(learning_rate):
    losses = _quadratic_fit(learning_rate, 200)
    assert all(later <= earlier + 1e-15 for earlier, later in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_gradient_shape_mismatch_is_rejected():
    net = _net()
    grads = [np.zeros((1, 1)) for _ in net.parameters()]
    with pytest.raises(ShapeError):
        apply_gradients(net, SgdOptimizer(0.1), grads)


def test_checkpoint_round_trip_is_bit_identical(tmp_path):
    net = _net((3, 64, 64, 1), seed=8)
    path = tmp_path / "value.dnaf"
    save(net, path)
    restored = load(path, expected_dims=[3, 64, 64, 1])

    for original, loaded in zip(net.parameters(), restored.parameters()):
        assert original.tobytes() == loaded.tobytes()
    inputs = np.random.default_rng(9).normal(size=(10, 3))
    assert forward(net, inputs).tobytes() == forward(restored, inputs).tobytes()
    assert to_bytes(restored) == path.read_bytes()


def test_checkpoint_header_layout():
    payload = to_bytes(_net((2, 3)))
    assert payload[:4] == b"DNAF"
    assert int.from_bytes(payload[4:8], "little") == 1
    assert int.from_bytes(payload[8:12], "little") == 2
    assert len(payload) == 12 + 2 * 4 + (2 * 3 + 3) * 8


def test_corrupt_checkpoints_are_rejected():
    payload = to_bytes(_net())
    with pytest.raises(CheckpointFormatError):
        from_bytes(b"XXXX" + payload[4:])
    with pytest.raises(CheckpointFormatError):
        from_bytes(payload[:-8])
    with pytest.raises(CheckpointFormatError):
        from_bytes(payload + b"\x00")
    with pytest.raises(CheckpointFormatError):
        from_bytes(payload[:6])
    with pytest.raises(ShapeError):
        from_bytes(payload, expected_dims=[3, 8, 2])
