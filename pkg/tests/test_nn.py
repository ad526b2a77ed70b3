import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gfnuq.errors import UsageError
from gfnuq.nn import (
    AdamState,
    DenseLayer,
    DenseNet,
    RecurrentEncoder,
    Tensor,
    adam_step,
    backward,
    check_gradients,
    encode_sequence,
    forward,
    log_softmax,
    parameter,
)


def single_layer(weight, bias, activation):
    return DenseNet([DenseLayer(parameter(weight), parameter(bias), activation)])


def test_forward_identity_layer():
    net = single_layer(np.eye(2), np.zeros(2), "identity")
    np.testing.assert_array_equal(forward(net, [1.0, 2.0]).data, [1.0, 2.0])


def test_forward_relu_layer():
    net = single_layer(np.eye(2), np.zeros(2), "relu")
    np.testing.assert_array_equal(forward(net, [-1.0, 3.0]).data, [0.0, 3.0])


def test_forward_matches_scalar_loops():
    rng = np.random.default_rng(0)
    net = DenseNet.create([3, 4, 2], rng, hidden_activation="tanh")
    net.layers[0].bias.data[:] = rng.normal(size=4)
    net.layers[1].bias.data[:] = rng.normal(size=2)
    x = rng.normal(size=3)
    w1, b1 = net.layers[0].weight.data, net.layers[0].bias.data
    w2, b2 = net.layers[1].weight.data, net.layers[1].bias.data
    hidden = []
    for j in range(4):
        s = b1[j]
        for i in range(3):
            s += x[i] * w1[i, j]
        hidden.append(math.tanh(s))
    expected = []
    for k in range(2):
        s = b2[k]
        for j in range(4):
            s += hidden[j] * w2[j, k]
        expected.append(s)
    np.testing.assert_allclose(forward(net, x).data, expected, rtol=1e-14, atol=1e-14)
    np.testing.assert_allclose(net.predict(x), expected, rtol=1e-14, atol=1e-14)


def test_forward_dimension_mismatch():
    net = single_layer(np.eye(2), np.zeros(2), "identity")
    with pytest.raises(UsageError):
        forward(net, [1.0, 2.0, 3.0])


def test_layers_must_chain():
    with pytest.raises(UsageError):
        DenseNet(
            [
                DenseLayer(parameter(np.ones((2, 3))), parameter(np.zeros(3))),
                DenseLayer(parameter(np.ones((4, 1))), parameter(np.zeros(1))),
            ]
        )


def test_backward_square():
    theta = parameter(3.0)
    (grad,) = backward(theta**2, [theta])
    assert grad == pytest.approx(6.0)


def test_expm1_value_and_gradient():
    theta = parameter(np.array([1e-10, -0.5, 2.0]))
    out = theta.expm1()
    np.testing.assert_array_equal(out.numpy(), np.expm1(theta.data))
    (grad,) = backward(out.sum(), [theta])
    np.testing.assert_allclose(grad, np.exp(theta.data), rtol=1e-15)


def test_backward_softmax_cross_entropy_uniform_logits():
    logits = parameter(np.zeros(4))
    target = 2
    loss = -log_softmax(logits)[target]
    (grad,) = backward(loss, [logits])
    onehot = np.eye(4)[target]
    np.testing.assert_allclose(grad, np.full(4, 0.25) - onehot, atol=1e-15)


def test_backward_requires_tape():
    with pytest.raises(UsageError):
        backward(Tensor(1.0), [parameter(1.0)])
    with pytest.raises(UsageError):
        backward(3.0, [parameter(1.0)])


def test_two_layer_gradient_matches_finite_differences():
    rng = np.random.default_rng(1)
    net = DenseNet.create([5, 8, 3], rng, hidden_activation="tanh")
    x = rng.normal(size=(6, 5))
    y = rng.normal(size=(6, 3))
    probes = check_gradients(
        lambda: ((forward(net, x) - y) ** 2).mean(), net.parameters(), rng, n_probes=30, h=1e-5
    )
    assert max(p[-1] for p in probes) <= 1e-4


def test_masked_log_softmax_gradient():
    rng = np.random.default_rng(2)
    logits = parameter(rng.normal(size=(3, 5)))
    mask = np.array([[1, 1, 0, 1, 0], [0, 1, 1, 1, 1], [1, 0, 0, 0, 0]], dtype=bool)
    weights = rng.normal(size=(3, 5))

    def loss():
        lp = log_softmax(logits, mask)
        return (lp[mask] * weights[mask]).sum()

    probes = check_gradients(loss, [logits], rng, n_probes=20)
    assert max(p[-1] for p in probes) <= 1e-6
    lp = log_softmax(logits, mask).data
    assert np.all(np.isneginf(lp[~mask]))
    np.testing.assert_allclose(np.exp(lp).sum(axis=1), 1.0, atol=1e-12)


def test_forward_and_gradient_deterministic():
    def run():
        rng = np.random.default_rng(7)
        net = DenseNet.create([4, 6, 2], rng)
        x = rng.normal(size=(5, 4))
        grads = backward((forward(net, x) ** 2).sum(), net.parameters())
        return forward(net, x).data, grads

    out1, g1 = run()
    out2, g2 = run()
    assert out1.tobytes() == out2.tobytes()
    assert all(a.tobytes() == b.tobytes() for a, b in zip(g1, g2))


def test_adam_zero_gradient_is_identity():
    rng = np.random.default_rng(3)
    params = [parameter(rng.normal(size=(3, 2))), parameter(rng.normal(size=2))]
    before = [p.data.copy() for p in params]
    state = AdamState(params)
    for _ in range(5):
        adam_step(state, params, [np.zeros_like(p.data) for p in params])
    for b, p in zip(before, params):
        np.testing.assert_array_equal(b, p.data)


def test_adam_first_step_by_hand():
    theta = parameter(0.5)
    state = AdamState([theta], lr=0.001)
    adam_step(state, [theta], [np.array(1.0)])
    # t = 1: m_hat = g, v_hat = g^2, so the step is lr * 1 / (1 + eps)
    assert theta.data == pytest.approx(0.5 - 0.001 / (1.0 + 1e-8), abs=1e-16)


def test_adam_constant_gradient_monotone():
    theta = parameter(1.0)
    state = AdamState([theta])
    values = [theta.item()]
    for _ in range(100):
        adam_step(state, [theta], [np.array(0.3)])
        values.append(theta.item())
    assert all(b < a for a, b in zip(values, values[1:]))


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(1, 4), min_size=1, max_size=3), st.integers(1, 10))
def test_adam_state_shapes(shape, steps):
    p = parameter(np.ones(shape))
    state = AdamState([p])
    for _ in range(steps):
        state.step([np.zeros(shape)])
    assert state.m[0].shape == p.data.shape and state.v[0].shape == p.data.shape
    np.testing.assert_array_equal(p.data, np.ones(shape))


def test_adam_shape_mismatch():
    p = parameter(np.ones(3))
    with pytest.raises(UsageError):
        AdamState([p]).step([np.ones(2)])


def test_encode_empty_sequence_is_zero_state():
    enc = RecurrentEncoder.create(10, np.random.default_rng(0), hidden_dim=16)
    np.testing.assert_array_equal(encode_sequence(enc, []), np.zeros(16))


def test_encode_single_token_by_hand():
    rng = np.random.default_rng(4)
    enc = RecurrentEncoder.create(6, rng, embed_dim=3, hidden_dim=2)
    for g in ("r", "z", "n"):
        enc.u[g].data[:] = 0.0
        enc.b[g].data[:] = 0.0
    row = enc.embedding.data[4]
    expected = []
    for k in range(2):
        z = sum(row[i] * enc.w["z"].data[i, k] for i in range(3))
        n = sum(row[i] * enc.w["n"].data[i, k] for i in range(3))
        # h0 = 0, so h1 = (1 - sigmoid(z)) * tanh(n)
        expected.append((1.0 - 1.0 / (1.0 + math.exp(-z))) * math.tanh(n))
    np.testing.assert_allclose(encode_sequence(enc, [4]), expected, rtol=1e-13)


def test_encode_is_order_sensitive_and_deterministic():
    enc = RecurrentEncoder.create(10, np.random.default_rng(0))
    a = encode_sequence(enc, [1, 5])
    b = encode_sequence(enc, [5, 1])
    assert not np.allclose(a, b)
    assert encode_sequence(enc, [1, 5]).tobytes() == a.tobytes()
    assert a.shape == encode_sequence(enc, [1, 2, 3, 4, 5, 6]).shape


def test_encode_rejects_unknown_tokens():
    enc = RecurrentEncoder.create(4, np.random.default_rng(0))
    with pytest.raises(UsageError):
        encode_sequence(enc, [0, 4])


def test_encode_batch_matches_single_sequences():
    enc = RecurrentEncoder.create(8, np.random.default_rng(5))
    seqs = [[1, 2, 3], [4], [5, 6]]
    tokens = np.zeros((3, 3), dtype=int)
    for i, s in enumerate(seqs):
        tokens[i, : len(s)] = s
    out = enc.encode_batch(tokens, [len(s) for s in seqs]).data
    for i, s in enumerate(seqs):
        np.testing.assert_allclose(out[i, -1], encode_sequence(enc, s), rtol=1e-12, atol=1e-15)
        np.testing.assert_allclose(out[i, 1], encode_sequence(enc, s[:1]), rtol=1e-12, atol=1e-15)


def test_recurrent_gradients_match_finite_differences():
    rng = np.random.default_rng(6)
    enc = RecurrentEncoder.create(7, rng, embed_dim=4, hidden_dim=5)
    tokens = np.array([[1, 2, 3, 0], [4, 5, 0, 0]])
    weights = rng.normal(size=5)
    probes = check_gradients(
        lambda: (enc.encode_batch(tokens, [3, 2])[:, -1] * weights).sum() ** 2,
        enc.parameters(),
        rng,
        n_probes=25,
    )
    assert max(p[-1] for p in probes) <= 1e-4


def test_checkpoint_round_trip_bit_exact():
    rng = np.random.default_rng(8)
    net = DenseNet.create([3, 7, 2], rng)
    net.layers[0].bias.data[:] = rng.normal(size=7) * 1e-300
    clone = DenseNet.from_json(net.to_json())
    for a, b in zip(net.parameters(), clone.parameters()):
        assert a.data.tobytes() == b.data.tobytes()
    assert [layer.activation for layer in clone.layers] == ["relu", "identity"]
    enc = RecurrentEncoder.create(5, rng)
    clone = RecurrentEncoder.from_dict(enc.to_dict())
    for a, b in zip(enc.parameters(), clone.parameters()):
        assert a.data.tobytes() == b.data.tobytes()
