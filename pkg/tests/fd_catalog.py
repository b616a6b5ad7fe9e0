"""Finite-difference cases for every op in the autodiff catalog.

Each case builds a scalar loss from float64 parameters; a fixed random
projection on the op output makes upstream gradients non-trivial. Kinked ops
(relu, max, clip) get inputs nudged away from their kinks so the central
difference is valid.
"""

import numpy as np

from timbremap import autodiff as ad


def _away_from(x, kinks, min_dist=0.05):
    for k in kinks:
        close = np.abs(x - k) < min_dist
        x = np.where(close, k + np.sign(x - k + 1e-12) * min_dist * 2, x)
    return x


def _project_loss(out, seed):
    r = ad.constant(np.random.default_rng(seed).normal(size=out.shape))
    return ad.sum_all(ad.mul(out, r))


def _case(build, shapes, seed):
    """build(params...) -> Tensor; returns (build_loss, params) closures."""
    rng = np.random.default_rng(seed)
    params = {}

    def make(name, shape, positive=False, kinks=()):
        v = rng.normal(size=shape)
        if positive:
            v = np.abs(v) + 0.5
        if kinks:
            v = _away_from(v, kinks)
        params[name] = ad.parameter(v, dtype=np.float64)
        return params[name]

    return make, params


def catalog_cases():
    """Yield (op_name, case_id, build_loss, params)."""
    cases = []

    def reg(op_name, case_id, build_loss, params):
        cases.append((op_name, f"{op_name}[{case_id}]", build_loss, params))

    # --- matmul: 2D x2, batched 3D
    for i, (sa, sb) in enumerate([((2, 3), (3, 4)), ((5, 2), (2, 2)), ((1, 7), (7, 3))]):
        make, params = _case(None, None, seed=100 + i)
        a = make("a", sa)
        b = make("b", sb)
        reg("matmul", f"2d{i}", lambda a=a, b=b, i=i: _project_loss(ad.matmul(a, b), i), params)
    make, params = _case(None, None, seed=104)
    a = make("a", (3, 2, 4))
    b = make("b", (3, 4, 5))
    reg("matmul", "batched", lambda a=a, b=b: _project_loss(ad.matmul(a, b), 9), params)

    # --- dense: 2D and 3D inputs
    for i, xs in enumerate([(4, 6), (1, 3), (2, 5, 3)]):
        make, params = _case(None, None, seed=110 + i)
        x = make("x", xs)
        w = make("w", (xs[-1], 4))
        bb = make("b", (4,))
        reg("dense", str(xs), lambda x=x, w=w, bb=bb, i=i: _project_loss(ad.dense(x, w, bb), 20 + i), params)

    # --- conv1d: lengths exercising each padding branch
    for i, (ci, co, ln) in enumerate([(3, 5, 16), (2, 4, 7), (1, 2, 3)]):
        make, params = _case(None, None, seed=120 + i)
        x = make("x", (2, ci, ln))
        w = make("w", (co, ci, 4))
        bb = make("b", (co,))
        reg("conv1d", f"L{ln}", lambda x=x, w=w, bb=bb, i=i: _project_loss(ad.conv1d(x, w, bb, stride=2), 30 + i), params)

    # --- conv1d_transpose: mirror lengths
    for i, (ci, co, m, lt) in enumerate([(5, 3, 8, 16), (4, 2, 4, 7), (2, 1, 2, 3)]):
        make, params = _case(None, None, seed=130 + i)
        x = make("x", (2, ci, m))
        w = make("w", (ci, co, 4))
        bb = make("b", (co,))
        reg("conv1d_transpose", f"L{lt}",
            lambda x=x, w=w, bb=bb, lt=lt, i=i: _project_loss(
                ad.conv1d_transpose(x, w, bb, stride=2, output_length=lt), 40 + i), params)

    # --- activations
    for i, shape in enumerate([(5,), (3, 4), (2, 3, 2)]):
        make, params = _case(None, None, seed=140 + i)
        x = make("x", shape, kinks=(0.0,))
        reg("relu", str(shape), lambda x=x, i=i: _project_loss(ad.relu(x), 50 + i), params)
        make, params = _case(None, None, seed=150 + i)
        x = make("x", shape)
        reg("gelu", str(shape), lambda x=x, i=i: _project_loss(ad.gelu(x), 60 + i), params)
        make, params = _case(None, None, seed=160 + i)
        x = make("x", shape)
        reg("tanh", str(shape), lambda x=x, i=i: _project_loss(ad.tanh(x), 70 + i), params)

    # --- softmax: plain, masked, fully-masked row
    for i, shape in enumerate([(4,), (3, 5), (2, 3, 4)]):
        make, params = _case(None, None, seed=170 + i)
        x = make("x", shape)
        reg("softmax", str(shape), lambda x=x, i=i: _project_loss(ad.softmax(x), 80 + i), params)
    make, params = _case(None, None, seed=173)
    x = make("x", (3, 4))
    cmask = np.triu(np.full((3, 4), -np.inf), k=2)
    reg("softmax", "masked", lambda x=x: _project_loss(ad.softmax(x, mask=cmask), 83), params)

    # --- layer_norm
    for i, shape in enumerate([(6,), (4, 5), (2, 3, 4)]):
        make, params = _case(None, None, seed=180 + i)
        x = make("x", shape)
        g = make("gain", (shape[-1],))
        bb = make("bias", (shape[-1],))
        reg("layer_norm", str(shape),
            lambda x=x, g=g, bb=bb, i=i: _project_loss(ad.layer_norm(x, g, bb), 90 + i), params)

    # --- concat / reshape / transpose / slice
    for i, axis in enumerate([0, 1, -1]):
        make, params = _case(None, None, seed=190 + i)
        a = make("a", (2, 3))
        b = make("b", (2, 3))
        reg("concat", f"axis{axis}",
            lambda a=a, b=b, axis=axis, i=i: _project_loss(ad.concat([a, b], axis=axis), 100 + i), params)
    for i, (shape, new) in enumerate([((6,), (2, 3)), ((2, 3), (6,)), ((2, 3, 2), (3, 4))]):
        make, params = _case(None, None, seed=200 + i)
        x = make("x", shape)
        reg("reshape", f"{shape}->{new}",
            lambda x=x, new=new, i=i: _project_loss(ad.reshape(x, new), 110 + i), params)
    for i, (shape, axes) in enumerate([((2, 3), (1, 0)), ((2, 3, 4), (0, 2, 1)), ((2, 3, 4), (2, 0, 1))]):
        make, params = _case(None, None, seed=210 + i)
        x = make("x", shape)
        reg("transpose", f"{axes}",
            lambda x=x, axes=axes, i=i: _project_loss(ad.transpose(x, axes), 120 + i), params)
    for i, (shape, ax, lo, hi) in enumerate([((5,), 0, 1, 4), ((3, 6), 1, 0, 2), ((2, 3, 4), 2, 1, 3)]):
        make, params = _case(None, None, seed=215 + i)
        x = make("x", shape)
        reg("slice_axis", f"{shape}",
            lambda x=x, ax=ax, lo=lo, hi=hi, i=i: _project_loss(ad.slice_axis(x, ax, lo, hi), 125 + i), params)

    # --- embedding
    for i, (v, d, n) in enumerate([(4, 3, 5), (7, 2, 7), (3, 6, 2)]):
        make, params = _case(None, None, seed=220 + i)
        t = make("table", (v, d))
        idx = np.random.default_rng(300 + i).integers(0, v, size=n)
        reg("embedding", f"v{v}d{d}",
            lambda t=t, idx=idx, i=i: _project_loss(ad.embedding(t, idx), 130 + i), params)

    # --- attention: unmasked and causal, three sizes
    for i, (n, t, dh) in enumerate([(1, 3, 4), (2, 4, 2), (3, 2, 5)]):
        make, params = _case(None, None, seed=230 + i)
        q = make("q", (n, t, dh))
        k = make("k", (n, t, dh))
        v = make("v", (n, t, dh))
        causal = np.where(np.arange(t)[None, :] > np.arange(t)[:, None], -np.inf, 0.0)
        reg("attention", f"causal{i}",
            lambda q=q, k=k, v=v, causal=causal, i=i: _project_loss(
                ad.attention(q, k, v, mask=causal), 140 + i), params)
    make, params = _case(None, None, seed=233)
    q = make("q", (2, 3, 4))
    k = make("k", (2, 5, 4))
    v = make("v", (2, 5, 4))
    reg("attention", "cross", lambda q=q, k=k, v=v: _project_loss(ad.attention(q, k, v), 143), params)

    # --- losses / reductions
    for i, shape in enumerate([(4,), (3, 5), (2, 3, 4)]):
        make, params = _case(None, None, seed=240 + i)
        a = make("a", shape)
        b = make("b", shape)
        reg("mse", str(shape), lambda a=a, b=b: ad.mse(a, b), params)
    for i, (n, k) in enumerate([(2, 3), (5, 4), (1, 7)]):
        make, params = _case(None, None, seed=250 + i)
        z = make("logits", (n, k))
        tgt = np.random.default_rng(400 + i).integers(0, k, size=n)
        reg("cross_entropy", f"{n}x{k}", lambda z=z, tgt=tgt: ad.cross_entropy(z, tgt), params)
    for i, shape in enumerate([(3, 2), (5, 4), (2, 3, 3)]):
        make, params = _case(None, None, seed=260 + i)
        x = make("x", shape)
        reg("l2_norm_last", str(shape), lambda x=x, i=i: _project_loss(ad.l2_norm_last(x), 150 + i), params)
    for i, (n, d) in enumerate([(2, 2), (5, 3), (4, 1)]):
        make, params = _case(None, None, seed=270 + i)
        x = make("x", (n, d))
        reg("pairwise_sqdist", f"{n}x{d}",
            lambda x=x, i=i: _project_loss(ad.pairwise_sqdist(x), 160 + i), params)
    for i, shape in enumerate([(5,), (2, 3), (2, 2, 2)]):
        make, params = _case(None, None, seed=280 + i)
        x = make("x", shape)
        reg("sum", str(shape), lambda x=x: ad.sum_all(x), params)
        make, params = _case(None, None, seed=285 + i)
        x = make("x", shape)
        reg("mean", str(shape), lambda x=x: ad.mean_all(x), params)

    # --- elementwise arithmetic (with broadcasting) and scalar kinks
    for i, (sa, sb) in enumerate([((3, 4), (3, 4)), ((3, 4), (4,)), ((2, 1, 3), (3,))]):
        make, params = _case(None, None, seed=290 + i)
        a = make("a", sa)
        b = make("b", sb)
        reg("add", f"{sa}+{sb}", lambda a=a, b=b, i=i: _project_loss(ad.add(a, b), 170 + i), params)
        make, params = _case(None, None, seed=295 + i)
        a = make("a", sa)
        b = make("b", sb)
        reg("sub", f"{sa}-{sb}", lambda a=a, b=b, i=i: _project_loss(ad.sub(a, b), 175 + i), params)
        make, params = _case(None, None, seed=300 + i)
        a = make("a", sa)
        b = make("b", sb)
        reg("mul", f"{sa}*{sb}", lambda a=a, b=b, i=i: _project_loss(ad.mul(a, b), 180 + i), params)
    for i, shape in enumerate([(4,), (2, 3), (2, 2, 2)]):
        make, params = _case(None, None, seed=310 + i)
        x = make("x", shape)
        reg("exp", str(shape), lambda x=x, i=i: _project_loss(ad.exp(x), 190 + i), params)
        make, params = _case(None, None, seed=315 + i)
        x = make("x", shape, positive=True)
        reg("log", str(shape), lambda x=x, i=i: _project_loss(ad.log(x), 195 + i), params)
        make, params = _case(None, None, seed=320 + i)
        x = make("x", shape, positive=True)
        reg("sqrt", str(shape), lambda x=x, i=i: _project_loss(ad.sqrt(x), 200 + i), params)
        make, params = _case(None, None, seed=325 + i)
        x = make("x", shape, kinks=(0.3,))
        reg("maximum_scalar", str(shape),
            lambda x=x, i=i: _project_loss(ad.maximum_scalar(x, 0.3), 205 + i), params)
        make, params = _case(None, None, seed=330 + i)
        x = make("x", shape, kinks=(-0.5, 0.5))
        reg("clip", str(shape), lambda x=x, i=i: _project_loss(ad.clip(x, -0.5, 0.5), 210 + i), params)

    return cases


def run_catalog(tol=1e-4, eps=1e-5):
    """Run every case; return (reports, failures)."""
    reports = []
    for op_name, case_id, build_loss, params in catalog_cases():
        reports.append(ad.check_gradients(build_loss, params, eps=eps, tol=tol, op=case_id))
    failures = [r for r in reports if not r.passed]
    return reports, failures
