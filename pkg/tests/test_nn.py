import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from nuitsim.nn import (
    Batch,
    DivergenceError,
    Mlp,
    ReplayBuffer,
    Transition,
    as_batch,
    bellman_targets,
    forward,
    load_weights,
    loss_and_gradients,
    save_weights,
    sgd_step,
)


def _straight_line(net, x):
    """Scalar-loop forward pass used as an independent oracle."""
    h = list(x)
    for layer, (w, b) in enumerate(zip(net.weights, net.biases)):
        out = []
        for j in range(w.shape[1]):
            acc = b[j]
            for i in range(w.shape[0]):
                acc += h[i] * w[i, j]
            out.append(acc if layer == len(net.weights) - 1 else max(acc, 0.0))
        h = out
    return np.array(h)


def _transitions(rng, n, width=4, n_actions=3):
    return [
        Transition(rng.normal(size=width), int(rng.integers(n_actions)), float(rng.normal()), rng.normal(size=width), bool(rng.random() < 0.3))
        for _ in range(n)
    ]


def test_zero_weights_give_zero():
    net = Mlp([np.zeros((5, 7)), np.zeros((7, 3))], [np.zeros(7), np.zeros(3)])
    assert np.array_equal(forward(net, np.arange(5.0)), np.zeros(3))


def test_identity_layer():
    net = Mlp([np.eye(4)], [np.zeros(4)])
    x = np.array([1.5, -2.0, 0.0, 3.0])
    assert np.array_equal(forward(net, x), x)


def test_forward_matches_straight_line():
    rng = np.random.default_rng(3)
    for _ in range(5):
        net = Mlp.init([6, 9, 5, 4], rng)
        for b in net.biases:
            b[:] = rng.normal(size=b.shape)
        x = rng.normal(size=6)
        assert np.max(np.abs(forward(net, x) - _straight_line(net, x))) <= 1e-12


def test_forward_batched_and_width_check():
    rng = np.random.default_rng(0)
    net = Mlp.init([3, 4, 2], rng)
    xs = rng.normal(size=(5, 3))
    assert np.allclose(forward(net, xs), np.stack([forward(net, x) for x in xs]))
    with pytest.raises(ValueError):
        forward(net, np.zeros(4))


def test_mismatched_layers_rejected():
    with pytest.raises(ValueError):
        Mlp([np.zeros((3, 4)), np.zeros((5, 2))], [np.zeros(4), np.zeros(2)])


def test_he_init_scale():
    net = Mlp.init([200, 300, 2], np.random.default_rng(1))
    assert net.weights[0].std() == pytest.approx(np.sqrt(2 / 200), rel=0.05)
    assert not any(b.any() for b in net.biases)


def test_lr_zero_leaves_parameters():
    rng = np.random.default_rng(2)
    net = Mlp.init([4, 8, 3], rng)
    before = [p.copy() for p in net.parameters()]
    batch = _transitions(rng, 6)
    sgd_step(net, batch, rng.normal(size=6), lr=0.0)
    assert all(np.array_equal(a, b) for a, b in zip(before, net.parameters()))


def finite_difference_error(net, x, actions, targets, h=1e-5):
    _, gw, gb = loss_and_gradients(net, x, actions, targets)
    worst = 0.0
    for params, grads in ((net.weights, gw), (net.biases, gb)):
        for p, g in zip(params, grads):
            it = np.nditer(p, flags=["multi_index"])
            for _ in it:
                idx = it.multi_index
                keep = p[idx]
                p[idx] = keep + h
                up = loss_and_gradients(net, x, actions, targets)[0]
                p[idx] = keep - h
                down = loss_and_gradients(net, x, actions, targets)[0]
                p[idx] = keep
                numeric = (up - down) / (2 * h)
                denom = max(abs(numeric), abs(g[idx]), 1e-8)
                worst = max(worst, abs(numeric - g[idx]) / denom)
    return worst


def test_gradients_match_finite_differences():
    rng = np.random.default_rng(11)
    net = Mlp.init([4, 8, 3], rng)
    x = rng.normal(size=(5, 4))
    assert finite_difference_error(net, x, rng.integers(3, size=5), rng.normal(size=5)) <= 1e-4


def test_loss_non_increasing_small_lr():
    rng = np.random.default_rng(4)
    net = Mlp.init([4, 8, 3], rng)
    batch = as_batch(_transitions(rng, 16))
    targets = rng.normal(size=16)
    losses = [sgd_step(net, batch, targets, lr=1e-3) for _ in range(200)]
    assert all(b <= a for a, b in zip(losses, losses[1:]))
    assert losses[-1] < losses[0]


def test_divergence_signalled():
    net = Mlp([np.eye(2)], [np.zeros(2)])
    batch = [Transition(np.array([1.0, 0.0]), 0, 0.0, np.zeros(2), True)]
    with pytest.raises(DivergenceError):
        sgd_step(net, batch, np.array([np.nan]), lr=0.1)
    with pytest.raises(DivergenceError):
        sgd_step(net, batch, np.array([1e4]), lr=0.1, loss_ceiling=1e6)


def test_bellman_done_and_gamma_zero():
    rng = np.random.default_rng(5)
    net = Mlp.init([4, 8, 3], rng)
    done = Transition(np.zeros(4), 0, 5.0, rng.normal(size=4) * 100, True)
    assert bellman_targets([done], net, 0.99)[0] == 5.0
    batch = _transitions(rng, 8)
    assert np.array_equal(bellman_targets(batch, net, 0.0), [t.r for t in batch])


def test_bellman_hand_computed():
    # single linear layer: Q(s') = s' @ W
    net = Mlp([np.array([[1.0, 2.0], [3.0, -1.0]])], [np.array([0.5, 0.0])])
    batch = [
        Transition(np.zeros(2), 0, 1.0, np.array([1.0, 1.0]), False),  # Q = [4.5, 1.0] -> max 4.5
        Transition(np.zeros(2), 1, -2.0, np.array([0.0, -1.0]), False),  # Q = [-2.5, 1.0] -> max 1.0
    ]
    assert bellman_targets(batch, net, 0.5).tolist() == [1.0 + 0.5 * 4.5, -2.0 + 0.5 * 1.0]


def _t(i):
    return Transition(np.array([float(i)]), i, float(i), np.array([float(i)]), False)


def test_buffer_evicts_oldest():
    buf = ReplayBuffer(2)
    for i in range(3):
        buf.push(_t(i))
    assert len(buf) == 2
    assert [t.a for t in buf.contents()] == [1, 2]


def test_buffer_sample_reproducible():
    buf = ReplayBuffer(50)
    for i in range(30):
        buf.push(_t(i))
    a = buf.sample(10, np.random.default_rng(9))
    b = buf.sample(10, np.random.default_rng(9))
    assert [t.a for t in a] == [t.a for t in b]
    assert isinstance(buf.sample_batch(4, np.random.default_rng(0)), Batch)


def test_buffer_sampling_uniform():
    buf = ReplayBuffer(10)
    for i in range(10):
        buf.push(_t(i))
    n = 10_000
    rng = np.random.default_rng(0)
    drawn = np.concatenate([buf.sample_batch(10, rng).a for _ in range(n // 10)])
    counts = np.bincount(drawn, minlength=10)
    sigma = np.sqrt(n * 0.1 * 0.9)
    assert np.all(np.abs(counts - n * 0.1) <= 5 * sigma)


def test_buffer_underfilled():
    buf = ReplayBuffer(10)
    buf.push(_t(0))
    with pytest.raises(ValueError):
        buf.sample(2, np.random.default_rng(0))
    with pytest.raises(ValueError):
        ReplayBuffer(0)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 8), st.integers(0, 30))
def test_buffer_keeps_newest(capacity, pushes):
    buf = ReplayBuffer(capacity)
    for i in range(pushes):
        buf.push(_t(i))
    assert [t.a for t in buf.contents()] == list(range(max(0, pushes - capacity), pushes))


def test_weights_round_trip(tmp_path):
    net = Mlp.init([23, 64, 64, 11], np.random.default_rng(0))
    save_weights(net, tmp_path / "w.json")
    again = load_weights(tmp_path / "w.json")
    assert again.sizes == [23, 64, 64, 11]
    assert all(np.array_equal(a, b) for a, b in zip(net.parameters(), again.parameters()))


def test_weights_bad_format(tmp_path):
    (tmp_path / "w.json").write_text('{"format": "other"}')
    with pytest.raises(ValueError):
        load_weights(tmp_path / "w.json")
