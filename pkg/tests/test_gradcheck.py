"""Analytic gradients vs central differences for the whole op catalog."""

import numpy as np
import pytest

from timbremap import autodiff as ad
from timbremap.autodiff import tensor as tensor_mod

from fd_catalog import catalog_cases


@pytest.mark.parametrize(
    "build_loss,params",
    [pytest.param(bl, p, id=cid) for _, cid, bl, p in catalog_cases()],
)
def test_catalog_op_matches_finite_differences(build_loss, params):
    report = ad.check_gradients(build_loss, params, eps=1e-5, tol=1e-4)
    assert report.passed, str(report)


def test_dense_relu_mse_composite():
    rng = np.random.default_rng(0)
    x = ad.constant(rng.normal(size=(4, 3)))
    t = ad.constant(rng.normal(size=(4, 2)))
    params = {
        "w": ad.parameter(rng.normal(size=(3, 2)), dtype=np.float64),
        "b": ad.parameter(rng.normal(size=(2,)), dtype=np.float64),
    }

    def build():
        return ad.mse(ad.relu(ad.dense(x, params["w"], params["b"])), t)

    report = ad.check_gradients(build, params, tol=1e-4, op="dense+relu+mse")
    assert report.passed, str(report)


def test_attention_block_seq3():
    rng = np.random.default_rng(1)
    params = {
        "q": ad.parameter(rng.normal(size=(1, 3, 4)), dtype=np.float64),
        "k": ad.parameter(rng.normal(size=(1, 3, 4)), dtype=np.float64),
        "v": ad.parameter(rng.normal(size=(1, 3, 4)), dtype=np.float64),
    }
    causal = np.where(np.arange(3)[None, :] > np.arange(3)[:, None], -np.inf, 0.0)
    proj = ad.constant(rng.normal(size=(1, 3, 4)))

    def build():
        out = ad.attention(params["q"], params["k"], params["v"], mask=causal)
        return ad.sum_all(ad.mul(out, proj))

    report = ad.check_gradients(build, params, tol=1e-4, op="attention")
    assert report.passed, str(report)


def test_corrupted_backward_is_reported_with_op_name(monkeypatch):
    # break tanh's backward rule, then expect the report to name the op
    real_tanh = tensor_mod.tanh

    def bad_tanh(a):
        data = np.tanh(a.data)

        def bwd(g):
            a._accumulate(g * (1.0 - data))  # wrong derivative

        return tensor_mod._make(data, (a,), "tanh", bwd)

    monkeypatch.setattr(tensor_mod, "tanh", bad_tanh)
    rng = np.random.default_rng(2)
    params = {"x": ad.parameter(rng.normal(size=(4,)) + 1.0, dtype=np.float64)}

    def build():
        return ad.sum_all(tensor_mod.tanh(params["x"]))

    report = ad.check_gradients(build, params, tol=1e-4, op="tanh")
    assert not report.passed
    assert all(f.op == "tanh" for f in report.failures)
    monkeypatch.setattr(tensor_mod, "tanh", real_tanh)


class TestAdam:
    def test_zero_grads_leave_parameters_unchanged(self):
        store = ad.ParameterStore()
        p = store.add("w", np.ones(3, dtype=np.float64))
        opt = ad.Adam(store, lr=0.1)
        p.grad = np.zeros(3)
        opt.step()
        np.testing.assert_allclose(p.data, np.ones(3))

    def test_moves_against_constant_gradient(self):
        store = ad.ParameterStore()
        p = store.add("w", np.zeros(3, dtype=np.float64))
        opt = ad.Adam(store, lr=0.05)
        for _ in range(10):
            p.grad = np.full(3, 2.0)
            opt.step()
        assert np.all(p.data < 0)

    def test_quadratic_bowl_decreases_monotonically(self):
        store = ad.ParameterStore()
        p = store.add("w", np.array([3.0, -2.0], dtype=np.float64))
        opt = ad.Adam(store, lr=0.02)
        losses = []
        for _ in range(200):
            opt.zero_grad()
            loss = ad.sum_all(ad.mul(p, p))
            ad.backward(loss)
            losses.append(loss.item())
            opt.step()
        warm = losses[10:]
        assert all(b <= a + 1e-12 for a, b in zip(warm, warm[1:]))
        assert losses[-1] < losses[0] / 10

    def test_nan_gradient_aborts_with_diagnostic(self):
        store = ad.ParameterStore()
        p = store.add("w", np.ones(2, dtype=np.float64))
        opt = ad.Adam(store)
        p.grad = np.array([1.0, np.nan])
        with pytest.raises(ad.GradientNaNError, match="w"):
            opt.step()
