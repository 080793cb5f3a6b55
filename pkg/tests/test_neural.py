"""Dense-network engine: sizing rule, backprop, Adam, targets, checkpoints."""

import numpy as np
import pytest

from bibc.errors import ParameterError, StateError
from bibc.neural import (Adam, Head, Mlp, NetPair, hidden_for, load_params,
                         next_pow2, save_params, soft_update)
from bibc.numerics import SeededRng


def small_net(rng, heads=None, activation="tanh", side_dim=0, in_dim=3):
    heads = heads or [Head(2)]
    return Mlp(in_dim, (4, 4), heads, activation, rng, side_dim=side_dim)


class TestSizing:
    @pytest.mark.parametrize("x,want", [
        (1, 1), (2, 2), (3, 4), (142, 256), (152, 256),
        (990, 1024), (1016, 1024), (1024, 1024),
    ])
    def test_next_pow2(self, x, want):
        assert next_pow2(x) == want

    def test_next_pow2_domain(self):
        with pytest.raises(ParameterError):
            next_pow2(0)

    def test_hidden_for(self):
        assert hidden_for(990) == (1024, 1024)
        assert hidden_for(142) == (256, 256)


class TestInit:
    def test_hidden_weights_within_fan_in_bound(self):
        rng = SeededRng(0)
        net = Mlp(9, (16, 16), [Head(2)], "relu", rng)
        assert np.max(np.abs(net._w[0])) <= 1 / 3
        assert np.max(np.abs(net._w[1])) <= 1 / 4
        assert np.max(np.abs(net._hw[0])) <= 1 / 4

    def test_head_scale_override(self):
        rng = SeededRng(0)
        net = Mlp(9, (16, 16), [Head(2, "tanh", 1e-3)], "tanh", rng)
        assert np.max(np.abs(net._hw[0])) <= 1e-3
        assert np.max(np.abs(net._hb[0])) <= 1e-3
        assert np.max(np.abs(net._hw[0])) > 0

    def test_side_dim_widens_second_layer(self):
        rng = SeededRng(0)
        net = Mlp(9, (16, 16), [Head(1)], "relu", rng, side_dim=5)
        assert net._w[1].shape == (21, 16)

    def test_validation(self):
        rng = SeededRng(0)
        with pytest.raises(ParameterError):
            Mlp(3, (4,), [Head(1)], "selu", rng)
        with pytest.raises(ParameterError):
            Mlp(3, (), [Head(1)], "relu", rng)
        with pytest.raises(ParameterError):
            Mlp(3, (4,), [], "relu", rng)
        with pytest.raises(ParameterError):
            Head(1, kind="softmax")
        with pytest.raises(ParameterError):
            Head(0)


class TestForward:
    def test_single_matches_batch_row(self):
        net = small_net(SeededRng(1))
        x = np.linspace(-1, 1, 3)
        single = net.forward(x)[0]
        batch = net.forward(np.stack([x, x * 0.5]))[0]
        assert single.shape == (2,)
        assert batch.shape == (2, 2)
        np.testing.assert_allclose(batch[0], single)

    def test_forward_is_pure(self):
        net = small_net(SeededRng(1))
        x = np.linspace(-1, 1, 3)
        a = net.forward(x)[0]
        b = net.forward(x)[0]
        np.testing.assert_array_equal(a, b)

    def test_tanh_head_bounded(self):
        net = small_net(SeededRng(1), heads=[Head(4, "tanh")])
        out = net.forward(np.full(3, 100.0))[0]
        assert np.all(np.abs(out) <= 1.0)

    def test_multi_head_shapes(self):
        net = small_net(SeededRng(1), heads=[Head(1), Head(6)])
        outs = net.forward(np.zeros((5, 3)))
        assert outs[0].shape == (5, 1)
        assert outs[1].shape == (5, 6)

    def test_side_input_required_and_rejected(self):
        plain = small_net(SeededRng(1))
        sided = small_net(SeededRng(1), side_dim=2)
        x = np.zeros(3)
        with pytest.raises(ParameterError):
            sided.forward(x)
        with pytest.raises(ParameterError):
            plain.forward(x, side=np.zeros(2))
        out_a = sided.forward(x, side=np.zeros(2))[0]
        out_b = sided.forward(x, side=np.ones(2))[0]
        assert np.max(np.abs(out_a - out_b)) > 0

    def test_width_mismatch(self):
        net = small_net(SeededRng(1))
        with pytest.raises(ParameterError):
            net.forward(np.zeros(4))


def finite_diff(f, arr, eps=1e-6):
    g = np.zeros_like(arr)
    flat = arr.ravel()
    gf = g.ravel()
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + eps
        hi = f()
        flat[i] = keep - eps
        lo = f()
        flat[i] = keep
        gf[i] = (hi - lo) / (2 * eps)
    return g


class TestBackward:
    def test_gradients_match_finite_differences(self):
        rng = SeededRng(2)
        net = small_net(rng, heads=[Head(2, "tanh")], side_dim=2)
        x = rng.normal(size=(4, 3))
        side = rng.normal(size=(4, 2))
        coef = rng.normal(size=(4, 2))

        def loss():
            return float(np.sum(coef * net.forward(x, side=side)[0]))

        net.forward(x, side=side, remember=True)
        grads = net.backward([coef])
        for p, g in zip(net.params, grads.params):
            np.testing.assert_allclose(g, finite_diff(loss, p), atol=1e-7)
        np.testing.assert_allclose(grads.x_grad, finite_diff(loss, x),
                                   atol=1e-7)
        np.testing.assert_allclose(grads.side_grad, finite_diff(loss, side),
                                   atol=1e-7)

    def test_none_head_contributes_zero(self):
        rng = SeededRng(3)
        net = small_net(rng, heads=[Head(1), Head(3)])
        x = rng.normal(size=(2, 3))
        net.forward(x, remember=True)
        grads = net.backward([np.ones((2, 1)), None])
        head2_w = grads.params[-2]
        head2_b = grads.params[-1]
        assert np.all(head2_w == 0) and np.all(head2_b == 0)
        assert np.max(np.abs(grads.params[0])) > 0

    def test_backward_requires_remembered_forward(self):
        net = small_net(SeededRng(3))
        with pytest.raises(StateError):
            net.backward([np.ones((1, 2))])
        net.forward(np.zeros(3), remember=True)
        net.backward([np.ones((1, 2))])
        with pytest.raises(StateError):
            net.backward([np.ones((1, 2))])

    def test_single_sample_grad_shapes(self):
        net = small_net(SeededRng(3), side_dim=2)
        net.forward(np.zeros(3), side=np.zeros(2), remember=True)
        grads = net.backward([np.ones(2)])
        assert grads.x_grad.shape == (3,)
        assert grads.side_grad.shape == (2,)


class TestCloneAndParams:
    def test_clone_is_equal_but_independent(self):
        net = small_net(SeededRng(4))
        twin = net.clone()
        for a, b in zip(net.params, twin.params):
            np.testing.assert_array_equal(a, b)
            assert a is not b
        twin._w[0][0, 0] += 1.0
        assert net._w[0][0, 0] != twin._w[0][0, 0]

    def test_set_params_validates(self):
        net = small_net(SeededRng(4))
        good = [p.copy() for p in net.params]
        with pytest.raises(ParameterError):
            net.set_params(good[:-1])
        bad = [p.copy() for p in net.params]
        bad[0] = np.zeros((1, 1))
        with pytest.raises(ParameterError):
            net.set_params(bad)


def reference_adam(params, grad_seq, lr, decay):
    """Text-book Adam with bias correction, complement-style lr decay."""
    params = [p.copy() for p in params]
    m = [np.zeros_like(p) for p in params]
    v = [np.zeros_like(p) for p in params]
    for t, grads in enumerate(grad_seq, start=1):
        for i, g in enumerate(grads):
            m[i] = 0.9 * m[i] + 0.1 * g
            v[i] = 0.999 * v[i] + 0.001 * g * g
            m_hat = m[i] / (1 - 0.9 ** t)
            v_hat = v[i] / (1 - 0.999 ** t)
            params[i] = params[i] - lr * m_hat / (np.sqrt(v_hat) + 1e-8)
        lr = lr * (1 - decay)
    return params, lr


class TestAdam:
    def test_matches_reference_trajectory(self):
        rng = SeededRng(5)
        params = [rng.normal(size=(3, 2)), rng.normal(size=4)]
        grad_seq = [[rng.normal(size=(3, 2)), rng.normal(size=4)]
                    for _ in range(10)]
        want, want_lr = reference_adam(params, grad_seq, lr=1e-2, decay=1e-5)
        live = [p.copy() for p in params]
        opt = Adam(live, lr=1e-2, decay=1e-5)
        for grads in grad_seq:
            opt.step(grads)
        for a, b in zip(live, want):
            np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-15)
        assert opt.lr == pytest.approx(want_lr, rel=1e-15)

    def test_first_step_magnitude(self):
        p = [np.zeros(1)]
        opt = Adam(p, lr=0.1)
        opt.step([np.ones(1)])
        # constant gradient: bias correction gives m_hat = v_hat = 1 exactly
        assert p[0][0] == pytest.approx(-0.1 / (1 + 1e-8), rel=1e-15)

    def test_zero_gradient_leaves_params(self):
        p = [np.full(3, 7.0)]
        opt = Adam(p, lr=0.1)
        opt.step([np.zeros(3)])
        np.testing.assert_array_equal(p[0], np.full(3, 7.0))
        assert opt.lr < 0.1  # decay still applies

    def test_decay_modes(self):
        opt = Adam([np.zeros(1)], lr=1.0, decay=1e-5, decay_mode="complement")
        for _ in range(1000):
            opt.step([np.zeros(1)])
        assert opt.lr == pytest.approx((1 - 1e-5) ** 1000, rel=1e-12)
        # compounding for one nominal epoch of 1e5 steps lands near 1/e
        assert (1 - 1e-5) ** 100000 == pytest.approx(np.exp(-1), rel=1e-3)
        lit = Adam([np.zeros(1)], lr=1.0, decay=0.5, decay_mode="literal")
        lit.step([np.zeros(1)])
        lit.step([np.zeros(1)])
        assert lit.lr == pytest.approx(0.25, rel=1e-15)

    def test_validation(self):
        with pytest.raises(ParameterError):
            Adam([np.zeros(1)], lr=1e-3, decay_mode="fast")
        opt = Adam([np.zeros(2)], lr=1e-3)
        with pytest.raises(ParameterError):
            opt.step([np.zeros(3)])
        with pytest.raises(ParameterError):
            opt.step([])


class TestTargets:
    def test_soft_update_oracles(self):
        target = [np.zeros(4)]
        online = [np.full(4, 2.0)]
        soft_update(target, online, 0.5)
        np.testing.assert_allclose(target[0], 1.0)
        soft_update(target, online, 1.0)
        np.testing.assert_allclose(target[0], 2.0)

    def test_soft_update_geometric_approach(self):
        target = [np.array([10.0])]
        online = [np.array([0.0])]
        for _ in range(20):
            soft_update(target, online, 0.1)
        assert target[0][0] == pytest.approx(10.0 * 0.9 ** 20, rel=1e-12)

    def test_tau_domain(self):
        with pytest.raises(ParameterError):
            soft_update([np.zeros(1)], [np.zeros(1)], 0.0)
        with pytest.raises(ParameterError):
            soft_update([np.zeros(1)], [np.zeros(1)], 1.5)

    def test_netpair_lifecycle(self):
        pair = NetPair(small_net(SeededRng(6)))
        for a, b in zip(pair.online.params, pair.target.params):
            np.testing.assert_array_equal(a, b)
        pair.online._w[0][...] += 1.0
        pair.soft(0.25)
        diff = pair.online._w[0] - pair.target._w[0]
        np.testing.assert_allclose(np.unique(np.round(diff, 12)), 0.75)
        pair.hard_sync()
        np.testing.assert_array_equal(pair.online._w[0], pair.target._w[0])


class TestCheckpoint:
    def test_roundtrip(self, tmp_path):
        rng = SeededRng(7)
        arrays = [rng.normal(size=(3, 5)), rng.normal(size=7),
                  np.array([2.5])]
        path = tmp_path / "ck.bin"
        save_params(path, arrays)
        back = load_params(path)
        assert len(back) == 3
        for a, b in zip(arrays, back):
            np.testing.assert_array_equal(a, b)

    def test_byte_layout(self, tmp_path):
        path = tmp_path / "ck.bin"
        save_params(path, [np.array([[1.0, 2.0], [3.0, 4.0]]),
                           np.array([5.0])])
        raw = path.read_bytes()
        header = np.frombuffer(raw[:8 * 6], dtype="<u8")
        np.testing.assert_array_equal(header, [2, 2, 2, 2, 1, 1])
        data = np.frombuffer(raw[8 * 6:], dtype="<f8")
        np.testing.assert_array_equal(data, [1, 2, 3, 4, 5])

    def test_trailing_bytes_rejected(self, tmp_path):
        path = tmp_path / "ck.bin"
        save_params(path, [np.ones(2)])
        path.write_bytes(path.read_bytes() + b"\x00")
        with pytest.raises(ParameterError):
            load_params(path)

    def test_net_params_roundtrip(self, tmp_path):
        net = small_net(SeededRng(8))
        path = tmp_path / "net.bin"
        save_params(path, net.params)
        twin = small_net(SeededRng(9))
        twin.set_params(load_params(path))
        x = np.linspace(-1, 1, 3)
        np.testing.assert_array_equal(net.forward(x)[0], twin.forward(x)[0])
