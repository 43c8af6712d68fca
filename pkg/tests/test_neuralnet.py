import json

import numpy as np
import pytest

from colorlex.neuralnet import (DenseLayer, Mlp, OptimizerState, checkpoint_dumps,
                                clip_gradients, init_layer, load_checkpoint,
                                log_softmax, mlp_from_checkpoint, mlp_to_checkpoint,
                                save_checkpoint, softmax)


def small_mlp(rng, sizes=(4, 5, 3)):
    return Mlp.create(list(sizes), ["relu"] * (len(sizes) - 2) + ["identity"], rng)


class TestForward:
    def test_identity_layer(self):
        layer = DenseLayer(weights=np.eye(3), bias=np.zeros(3), activation="identity")
        mlp = Mlp([layer])
        x = np.array([1.0, -2.0, 3.0])
        assert np.allclose(mlp.forward(x), x)

    def test_zero_weights_return_bias(self):
        layer = DenseLayer(weights=np.zeros((2, 3)), bias=np.array([5.0, -1.0]),
                           activation="identity")
        mlp = Mlp([layer])
        assert np.allclose(mlp.forward(np.array([9.0, 9.0, 9.0])), [5.0, -1.0])

    def test_two_layer_matches_hand_rolled(self):
        w1 = np.array([[1.0, 2.0], [-1.0, 0.5]])
        b1 = np.array([0.1, -0.2])
        w2 = np.array([[3.0, -1.0]])
        b2 = np.array([0.5])
        mlp = Mlp([DenseLayer(w1, b1, "relu"), DenseLayer(w2, b2, "identity")])
        x = np.array([0.3, -0.7])
        hidden = np.maximum(w1 @ x + b1, 0.0)
        expected = w2 @ hidden + b2
        assert np.allclose(mlp.forward(x), expected)

    def test_shape_mismatch_raises(self):
        rng = np.random.default_rng(0)
        mlp = small_mlp(rng)
        with pytest.raises(ValueError):
            mlp.forward_batch(np.zeros((2, 7)))

    def test_bad_chain_raises(self):
        rng = np.random.default_rng(0)
        with pytest.raises(ValueError):
            Mlp([init_layer(4, 5, "relu", rng), init_layer(6, 2, "identity", rng)])


class TestSoftmax:
    def test_uniform(self):
        assert np.allclose(softmax(np.zeros(3)), np.ones(3) / 3)

    def test_overflow_stable(self):
        p = softmax(np.array([1000.0, 0.0]))
        assert np.isfinite(p).all()
        assert p[0] == pytest.approx(1.0)
        assert p[1] == pytest.approx(0.0, abs=1e-12)

    def test_shift_invariance(self):
        z = np.array([0.3, -1.2, 2.0])
        assert np.allclose(softmax(z), softmax(z + 17.0), atol=1e-12)

    def test_normalization(self):
        rng = np.random.default_rng(1)
        z = rng.normal(size=(50, 9)) * 10
        p = softmax(z)
        assert np.allclose(p.sum(axis=1), 1.0, atol=1e-9)
        assert (p > 0).all()

    def test_argmax_preserved(self):
        rng = np.random.default_rng(2)
        z = rng.normal(size=(40, 6))
        assert np.array_equal(softmax(z).argmax(axis=1), z.argmax(axis=1))

    def test_log_softmax_consistent(self):
        z = np.array([0.5, -2.0, 1.5])
        assert np.allclose(np.exp(log_softmax(z)), softmax(z), atol=1e-12)


class TestBackward:
    def finite_difference_grads(self, mlp, x, upstream, h=1e-4):
        """Central differences of sum(upstream * forward(x)) per parameter."""
        grads = []
        for p in mlp.parameters():
            g = np.zeros_like(p)
            it = np.nditer(p, flags=["multi_index"])
            while not it.finished:
                idx = it.multi_index
                orig = p[idx]
                p[idx] = orig + h
                hi = float((upstream * mlp.forward(x)).sum())
                p[idx] = orig - h
                lo = float((upstream * mlp.forward(x)).sum())
                p[idx] = orig
                g[idx] = (hi - lo) / (2 * h)
                it.iternext()
            grads.append(g)
        return grads

    @pytest.mark.parametrize("seed", range(4))
    def test_gradients_match_finite_differences(self, seed):
        rng = np.random.default_rng(seed)
        mlp = small_mlp(rng, sizes=(3, 4, 2))
        x = rng.normal(size=3)
        upstream = rng.normal(size=2)
        got, _ = mlp.backward(x, upstream)
        expected = self.finite_difference_grads(mlp, x, upstream)
        for g, e in zip(got, expected):
            scale = np.maximum(np.abs(e), 1e-6)
            assert (np.abs(g - e) / scale).max() < 1e-3

    def test_input_gradient_matches_finite_differences(self):
        rng = np.random.default_rng(11)
        mlp = small_mlp(rng, sizes=(3, 6, 2))
        x = rng.normal(size=3)
        upstream = rng.normal(size=2)
        _, gx = mlp.backward(x, upstream)
        h = 1e-5
        for i in range(3):
            xp, xm = x.copy(), x.copy()
            xp[i] += h
            xm[i] -= h
            fd = ((upstream * mlp.forward(xp)).sum() -
                  (upstream * mlp.forward(xm)).sum()) / (2 * h)
            assert gx[i] == pytest.approx(fd, rel=1e-3, abs=1e-6)

    def test_zero_upstream_gives_zero_grads(self):
        rng = np.random.default_rng(3)
        mlp = small_mlp(rng)
        grads, gx = mlp.backward(rng.normal(size=4), np.zeros(3))
        assert all(np.all(g == 0) for g in grads)
        assert np.all(gx == 0)

    def test_identity_layer_passes_gradient(self):
        mlp = Mlp([DenseLayer(np.eye(3), np.zeros(3), "identity")])
        g = np.array([0.5, -1.0, 2.0])
        _, gx = mlp.backward(np.array([1.0, 2.0, 3.0]), g)
        assert np.allclose(gx, g)

    def test_batch_grads_sum_over_samples(self):
        rng = np.random.default_rng(4)
        mlp = small_mlp(rng)
        xs = rng.normal(size=(5, 4))
        ups = rng.normal(size=(5, 3))
        _, cache = mlp.forward_batch_cached(xs)
        batch_grads, _ = mlp.backward_batch(cache, ups)
        singles = [mlp.backward(xs[i], ups[i])[0] for i in range(5)]
        for j, bg in enumerate(batch_grads):
            assert np.allclose(bg, sum(s[j] for s in singles), atol=1e-10)

    def test_determinism(self):
        rng = np.random.default_rng(6)
        mlp = small_mlp(rng)
        x = rng.normal(size=(8, 4))
        out1 = mlp.forward_batch(x)
        out2 = mlp.forward_batch(x)
        assert np.array_equal(out1, out2)


class TestOptimizer:
    def test_zero_gradients_keep_params(self):
        rng = np.random.default_rng(0)
        mlp = small_mlp(rng)
        params = mlp.parameters()
        before = [p.copy() for p in params]
        opt = OptimizerState(lr=1e-3)
        opt.step(params, [np.zeros_like(p) for p in params])
        for b, p in zip(before, params):
            assert np.array_equal(b, p)

    def test_first_step_is_lr_signed(self):
        # with constant gradient 1, bias-corrected Adam moves by ~lr
        param = np.array([0.0])
        opt = OptimizerState(lr=1e-3)
        opt.step([param], [np.array([1.0])])
        assert param[0] == pytest.approx(-1e-3, rel=1e-6)

    def test_non_finite_gradient_raises(self):
        opt = OptimizerState()
        with pytest.raises(FloatingPointError):
            opt.step([np.zeros(2)], [np.array([1.0, np.nan])])

    def test_quadratic_convergence(self):
        # f(x, y) = (x - 3)^2 + 10 (y + 1)^2
        param = np.array([10.0, 10.0])
        opt = OptimizerState(lr=1e-2)
        for _ in range(5000):
            grad = np.array([2 * (param[0] - 3), 20 * (param[1] + 1)])
            opt.step([param], [grad])
            loss = (param[0] - 3) ** 2 + 10 * (param[1] + 1) ** 2
            if loss < 1e-6:
                break
        assert loss < 1e-6

    def test_clip_gradients(self):
        grads = [np.array([3.0, 4.0]), np.zeros(1)]
        norm = clip_gradients(grads, 1.0)
        assert norm == pytest.approx(5.0)
        assert np.linalg.norm(grads[0]) == pytest.approx(1.0)


class TestCheckpoints:
    def test_round_trip_values(self):
        rng = np.random.default_rng(8)
        mlp = small_mlp(rng)
        doc = mlp_to_checkpoint(mlp, {"seed": 1, "epoch": 30})
        back = mlp_from_checkpoint(doc)
        for a, b in zip(mlp.parameters(), back.parameters()):
            assert np.array_equal(a, b)

    def test_load_save_byte_identical(self, tmp_path):
        rng = np.random.default_rng(9)
        mlp = small_mlp(rng)
        path = tmp_path / "ckpt.json"
        save_checkpoint(path, mlp_to_checkpoint(mlp, {"seed": 2, "epoch": 1,
                                                      "config_digest": "abc"}))
        first = path.read_bytes()
        save_checkpoint(path, load_checkpoint(path))
        assert path.read_bytes() == first

    def test_version_checked(self):
        with pytest.raises(ValueError):
            mlp_from_checkpoint({"format_version": 99, "layers": []})

    def test_dumps_stable(self):
        rng = np.random.default_rng(10)
        mlp = small_mlp(rng)
        doc = mlp_to_checkpoint(mlp, {"seed": 3})
        assert checkpoint_dumps(doc) == checkpoint_dumps(json.loads(checkpoint_dumps(doc)))
