"""Reverse-mode engine: primitives, gradients against finite differences,
optimizer steps.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import modadv.autodiff as ad
from modadv.autodiff import Tensor


def fd_grad(f, x, h=1e-5):
    """Central finite differences of a scalar function, elementwise."""
    g = np.zeros_like(x, dtype=np.float64)
    flat = x.reshape(-1)
    gf = g.reshape(-1)
    for i in range(flat.size):
        orig = flat[i]
        flat[i] = orig + h
        hi = f(x)
        flat[i] = orig - h
        lo = f(x)
        flat[i] = orig
        gf[i] = (hi - lo) / (2 * h)
    return g


def rel_err(a, b):
    denom = max(np.abs(a).max(), np.abs(b).max(), 1e-12)
    return np.abs(a - b).max() / denom


class TestForward:
    def test_dense_identity(self):
        x = Tensor(np.arange(6.0).reshape(2, 3))
        out = ad.dense(x, Tensor(np.eye(3)), Tensor(np.zeros(3)))
        assert np.array_equal(out.data, x.data)

    def test_softmax_uniform(self):
        logits = np.zeros((1, 4))
        lsm = ad.log_softmax(logits)
        probs = np.exp(lsm)
        assert np.allclose(probs, 0.25, atol=1e-12)
        assert abs(probs.sum() - 1.0) < 1e-6

    def test_softmax_stable_at_large_logits(self):
        logits = np.array([[1e4, -1e4, 0.0, 5.0]])
        probs = np.exp(ad.log_softmax(logits))
        assert np.all(probs >= 0) and np.all(probs <= 1)
        assert abs(probs.sum() - 1.0) < 1e-6

    def test_conv_impulse_reproduces_kernel(self):
        x = np.zeros((1, 1, 9))
        x[0, 0, 4] = 1.0
        k = np.array([[[1.0, 2.0, 3.0]]])
        out = ad.conv1d(Tensor(x), Tensor(k), Tensor(np.zeros(1)))
        assert np.allclose(out.data[0, 0, 3:6], [1.0, 2.0, 3.0])

    def test_avg_pool(self):
        x = Tensor(np.arange(8.0).reshape(1, 1, 8))
        out = ad.avg_pool1d(x, 4)
        assert np.allclose(out.data, [[[1.5, 5.5]]])

    def test_flatten_shape(self):
        out = ad.flatten(Tensor(np.zeros((3, 2, 5))))
        assert out.data.shape == (3, 10)


class TestBackward:
    def test_sum_gradient_all_ones(self):
        x = Tensor(np.random.default_rng(0).normal(size=(2, 5)))
        loss = ad.tsum(x)
        ad.backward(loss)
        assert np.array_equal(x.grad, np.ones((2, 5)))

    def test_relu_blocks_negative(self):
        x = Tensor(np.array([[-1.0, 2.0]]))
        loss = ad.tsum(ad.relu(x))
        ad.backward(loss)
        assert np.array_equal(x.grad, [[0.0, 1.0]])

    def test_dense_ce_finite_difference(self):
        rng = np.random.default_rng(1)
        x0 = rng.normal(size=(2, 6))
        w0 = rng.normal(size=(6, 3))
        b0 = rng.normal(size=3)
        labels = np.array([0, 2])

        def loss_of(xv):
            out = ad.dense(Tensor(xv), Tensor(w0), Tensor(b0))
            return float(ad.softmax_cross_entropy(out, labels).data)

        x = Tensor(x0.copy())
        w = Tensor(w0)
        b = Tensor(b0)
        loss = ad.softmax_cross_entropy(ad.dense(x, w, b), labels)
        ad.backward(loss)
        assert rel_err(x.grad, fd_grad(loss_of, x0.copy())) < 1e-4

    @pytest.mark.parametrize(
        "prim",
        ["conv1d", "dense", "relu", "avg_pool1d", "global_avg_pool", "flatten", "scale"],
    )
    def test_each_primitive_finite_difference(self, prim):
        rng = np.random.default_rng(hash(prim) % 2**32)
        x0 = rng.normal(size=(2, 3, 8))

        w = rng.normal(size=(4, 3, 3))
        b = rng.normal(size=4)
        dw = rng.normal(size=(24, 5))
        db = rng.normal(size=5)
        post = rng.normal(size=100)  # fixed projection to a scalar

        def run(xv):
            t = Tensor(xv)
            if prim == "conv1d":
                out = ad.conv1d(t, Tensor(w), Tensor(b))
            elif prim == "dense":
                out = ad.dense(ad.flatten(t), Tensor(dw), Tensor(db))
            elif prim == "relu":
                out = ad.relu(t)
            elif prim == "avg_pool1d":
                out = ad.avg_pool1d(t, 2)
            elif prim == "global_avg_pool":
                out = ad.global_avg_pool(t)
            elif prim == "flatten":
                out = ad.flatten(t)
            else:
                out = ad.scale(t, 2.5)
            flatout = out.data.reshape(-1)
            proj = post[: flatout.size]
            # scalarize with a fixed linear probe so gradients are dense
            s = ad.tsum(
                Tensor(
                    (flatout * proj).sum().reshape(1),
                    parents=(out,),
                    backward=lambda g, o=out, p=proj: o._accum(
                        (g[0] * p).reshape(out.data.shape)
                    ),
                )
            )
            return t, s

        t, s = run(x0.copy())
        ad.backward(s)
        got = t.grad.copy()

        def f(xv):
            _, sv = run(xv)
            return float(sv.data)

        assert rel_err(got, fd_grad(f, x0.copy())) < 1e-4

    def test_nan_raises(self):
        from modadv.errors import NumericalError

        x = Tensor(np.array([np.inf, 1.0]))
        with pytest.raises(NumericalError):
            loss = ad.tsum(ad.relu(x))
            ad.backward(loss)


class TestOptimizers:
    def test_sgd_definition(self):
        p = {"w": np.array([1.0], dtype=np.float32)}
        ad.sgd_step(p, {"w": np.array([2.0])}, lr=0.1)
        assert p["w"][0] == pytest.approx(0.8)

    def test_zero_gradient_no_change(self):
        p = {"w": np.ones(3, dtype=np.float32)}
        st8 = ad.AdamState(p)
        ad.adam_step(p, {"w": np.zeros(3)}, st8, lr=0.01)
        assert np.array_equal(p["w"], np.ones(3, dtype=np.float32))

    @given(st.floats(min_value=0.01, max_value=100.0), st.sampled_from([-1.0, 1.0]))
    @settings(max_examples=20, deadline=None)
    def test_adam_first_step_magnitude(self, gmag, sign):
        # Bias correction makes the first update ~ lr * sign(g).
        p = {"w": np.array([0.0], dtype=np.float32)}
        st8 = ad.AdamState(p)
        ad.adam_step(p, {"w": np.array([sign * gmag])}, st8, lr=0.01)
        assert p["w"][0] == pytest.approx(-sign * 0.01, rel=1e-3)

    def test_determinism(self):
        def run():
            rng = np.random.default_rng(5)
            p = {"w": rng.normal(size=(4, 2)).astype(np.float32)}
            st8 = ad.AdamState(p)
            for k in range(10):
                g = {"w": np.full((4, 2), 0.1 * (k + 1))}
                ad.adam_step(p, g, st8, lr=1e-3)
            return p["w"].copy()

        assert np.array_equal(run(), run())
