"""Tensor graph and the fixed op catalog.

A :class:`Tensor` wraps an ndarray plus an optional gradient and remembers the
op that produced it. Graphs are built eagerly; `backward` walks them in
reverse topological order exactly once. Single-threaded per graph by design.
"""

from __future__ import annotations

import itertools
import math
import threading
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.special import erf

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)

_node_counter = itertools.count()

_state = threading.local()


def _grad_enabled() -> bool:
    return getattr(_state, "grad_enabled", True)


class no_grad:
    """Context manager that suspends graph construction (eval/generation)."""

    def __enter__(self):
        self._prev = _grad_enabled()
        _state.grad_enabled = False
        return self

    def __exit__(self, *exc):
        _state.grad_enabled = self._prev
        return False


class ShapeError(ValueError):
    """Raised when operand shapes violate an op's contract."""


def _shape_fail(op: str, *shapes) -> None:
    raise ShapeError(f"{op}: incompatible shapes {' vs '.join(str(tuple(s)) for s in shapes)}")


class Tensor:
    """One value in the computation graph.

    `data` is an ndarray (dtype float32 for training, float64 for gradient
    checks), `grad` is populated by `backward` and accumulates across calls
    until reset.
    """

    __slots__ = ("data", "grad", "op", "node_id", "requires_grad", "_parents", "_backward")

    def __init__(self, data, parents: tuple = (), op: str = "leaf", requires_grad: bool = False):
        self.data = np.asarray(data)
        self.grad: np.ndarray | None = None
        self.op = op
        self.node_id = next(_node_counter)
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = parents
        self._backward: Callable[[np.ndarray], None] | None = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def dtype(self):
        return self.data.dtype

    def detach(self) -> "Tensor":
        """A leaf view of this value; no gradient flows through it."""
        return Tensor(self.data, op="detach")

    def zero_grad(self) -> None:
        self.grad = None

    def item(self) -> float:
        return float(self.data)

    def _accumulate(self, g: np.ndarray) -> None:
        if self.grad is None:
            self.grad = np.array(g, dtype=self.data.dtype, copy=True)
        else:
            self.grad += g

    def __repr__(self) -> str:
        return f"Tensor(op={self.op!r}, shape={self.data.shape}, dtype={self.data.dtype})"

    # arithmetic sugar; scalars become constants of the same dtype
    def __add__(self, other):
        return add(self, _as_tensor(other, self.dtype))

    def __radd__(self, other):
        return add(_as_tensor(other, self.dtype), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other, self.dtype))

    def __rsub__(self, other):
        return sub(_as_tensor(other, self.dtype), self)

    def __mul__(self, other):
        return mul(self, _as_tensor(other, self.dtype))

    def __rmul__(self, other):
        return mul(_as_tensor(other, self.dtype), self)

    def __neg__(self):
        return neg(self)


def constant(data, dtype=None) -> Tensor:
    """A leaf that never receives gradient."""
    return Tensor(np.asarray(data, dtype=dtype), op="const")


def parameter(data, dtype=None) -> Tensor:
    """A trainable leaf; keeps the input dtype unless one is given."""
    return Tensor(np.asarray(data, dtype=dtype), op="param", requires_grad=True)


def _as_tensor(x, dtype) -> Tensor:
    if isinstance(x, Tensor):
        return x
    dt = np.dtype(dtype)
    if dt.kind != "f":
        # never truncate float scalars against integer tensors
        dt = np.result_type(np.asarray(x), dt)
    return Tensor(np.asarray(x, dtype=dt), op="const")


def _make(data: np.ndarray, parents: tuple[Tensor, ...], op: str,
          bwd: Callable[[np.ndarray], None] | None) -> Tensor:
    requires = _grad_enabled() and any(p.requires_grad for p in parents)
    if not requires:
        return Tensor(data, op=op)
    out = Tensor(data, parents=parents, op=op, requires_grad=True)
    out._backward = bwd
    return out


class ParameterStore:
    """Named trainable leaves of one network; the graph's parameter registry."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise ValueError(f"duplicate parameter name {name!r}")
        t = parameter(data, dtype=np.asarray(data).dtype)
        t.op = f"param:{name}"
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __iter__(self):
        return iter(self._params)

    def __len__(self) -> int:
        return len(self._params)

    def items(self):
        return self._params.items()

    def names(self) -> list[str]:
        return list(self._params)

    def tensors(self) -> list[Tensor]:
        return list(self._params.values())

    def zero_grad(self) -> None:
        for t in self._params.values():
            t.grad = None

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: v.data for k, v in self._params.items()}

    def load_state_arrays(self, arrays: dict[str, np.ndarray]) -> None:
        missing = set(self._params) - set(arrays)
        extra = set(arrays) - set(self._params)
        if missing or extra:
            raise KeyError(f"parameter name mismatch: missing={sorted(missing)} extra={sorted(extra)}")
        for k, v in self._params.items():
            a = np.asarray(arrays[k], dtype=v.data.dtype)
            if a.shape != v.data.shape:
                _shape_fail(f"load_state:{k}", a.shape, v.data.shape)
            v.data = a.copy()


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar loss; grads accumulate on leaves."""
    if loss.data.size != 1:
        raise ValueError(f"backward requires a scalar loss, got shape {loss.data.shape}")
    if not loss.requires_grad:
        return

    # iterative post-order topological sort
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            topo.append(node)
            continue
        if node.node_id in visited:
            continue
        visited.add(node.node_id)
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and p.node_id not in visited:
                stack.append((p, False))

    loss._accumulate(np.ones_like(loss.data))
    for node in reversed(topo):
        if node._backward is not None and node.grad is not None:
            node._backward(node.grad)
    # clear non-leaf grads so a later backward seeds fresh; leaves keep
    # accumulating until explicitly reset
    for node in topo:
        if node._parents:
            node.grad = None


# ---------------------------------------------------------------------------
# elementwise ops


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Sum a gradient down to `shape` (undo numpy broadcasting)."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def add(a: Tensor, b: Tensor) -> Tensor:
    data = a.data + b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.data.shape))

    return _make(data, (a, b), "add", bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    data = a.data - b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(-g, b.data.shape))

    return _make(data, (a, b), "sub", bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    data = a.data * b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.data.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.data.shape))

    return _make(data, (a, b), "mul", bwd)


def neg(a: Tensor) -> Tensor:
    def bwd(g):
        a._accumulate(-g)

    return _make(-a.data, (a,), "neg", bwd)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)

    def bwd(g):
        a._accumulate(g * data)

    return _make(data, (a,), "exp", bwd)


def log(a: Tensor) -> Tensor:
    data = np.log(a.data)

    def bwd(g):
        a._accumulate(g / a.data)

    return _make(data, (a,), "log", bwd)


def sqrt(a: Tensor) -> Tensor:
    """Elementwise sqrt; backward is guarded at 0 (subgradient 0)."""
    data = np.sqrt(a.data)

    def bwd(g):
        denom = 2.0 * np.maximum(data, np.finfo(data.dtype).tiny ** 0.5)
        a._accumulate(g / denom)

    return _make(data, (a,), "sqrt", bwd)


def maximum_scalar(a: Tensor, c: float) -> Tensor:
    data = np.maximum(a.data, a.data.dtype.type(c))

    def bwd(g):
        a._accumulate(g * (a.data > c))

    return _make(data, (a,), "maximum_scalar", bwd)


def clip(a: Tensor, lo: float, hi: float) -> Tensor:
    data = np.clip(a.data, lo, hi)

    def bwd(g):
        a._accumulate(g * ((a.data >= lo) & (a.data <= hi)))

    return _make(data, (a,), "clip", bwd)


def relu(a: Tensor) -> Tensor:
    return maximum_scalar(a, 0.0)


def gelu(a: Tensor) -> Tensor:
    """Exact (erf) gelu."""
    x = a.data
    e = erf(x * _INV_SQRT2)
    data = (0.5 * x * (1.0 + e)).astype(x.dtype)

    def bwd(g):
        d = 0.5 * (1.0 + e) + x * np.exp(-0.5 * x * x) * _INV_SQRT2PI
        a._accumulate(g * d.astype(x.dtype))

    return _make(data, (a,), "gelu", bwd)


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)

    def bwd(g):
        a._accumulate(g * (1.0 - data * data))

    return _make(data, (a,), "tanh", bwd)


_ACTIVATIONS = {"relu": relu, "gelu": gelu, "tanh": tanh}


def activation(a: Tensor, kind: str) -> Tensor:
    try:
        return _ACTIVATIONS[kind](a)
    except KeyError:
        raise ValueError(f"unknown activation {kind!r}; choose from {sorted(_ACTIVATIONS)}") from None


# ---------------------------------------------------------------------------
# shape ops


def reshape(a: Tensor, shape: Sequence[int]) -> Tensor:
    shape = tuple(shape)
    data = a.data.reshape(shape)

    def bwd(g):
        a._accumulate(g.reshape(a.data.shape))

    return _make(data, (a,), "reshape", bwd)


def transpose(a: Tensor, axes: Sequence[int]) -> Tensor:
    axes = tuple(axes)
    inv = tuple(np.argsort(axes))
    data = a.data.transpose(axes)

    def bwd(g):
        a._accumulate(g.transpose(inv))

    return _make(data, (a,), "transpose", bwd)


def concat(tensors: Sequence[Tensor], axis: int) -> Tensor:
    datas = [t.data for t in tensors]
    ref = datas[0].shape
    for d in datas[1:]:
        if len(d.shape) != len(ref):
            _shape_fail("concat", d.shape, ref)
        for ax, (s1, s2) in enumerate(zip(d.shape, ref)):
            if ax != (axis % len(ref)) and s1 != s2:
                _shape_fail("concat", d.shape, ref)
    data = np.concatenate(datas, axis=axis)
    sizes = [d.shape[axis] for d in datas]
    offsets = np.cumsum([0] + sizes)

    def bwd(g):
        for t, lo, hi in zip(tensors, offsets[:-1], offsets[1:]):
            if t.requires_grad:
                idx = [slice(None)] * g.ndim
                idx[axis] = slice(lo, hi)
                t._accumulate(g[tuple(idx)])

    return _make(data, tuple(tensors), "concat", bwd)


def slice_axis(a: Tensor, axis: int, start: int, stop: int) -> Tensor:
    idx = [slice(None)] * a.data.ndim
    idx[axis] = slice(start, stop)
    idx = tuple(idx)
    data = a.data[idx]

    def bwd(g):
        full = np.zeros_like(a.data)
        full[idx] = g
        a._accumulate(full)

    return _make(data, (a,), "slice_axis", bwd)


# ---------------------------------------------------------------------------
# reductions


def sum_all(a: Tensor) -> Tensor:
    data = a.data.sum()

    def bwd(g):
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return _make(np.asarray(data), (a,), "sum", bwd)


def sum_axis(a: Tensor, axis: int, keepdims: bool = False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def bwd(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        a._accumulate(np.broadcast_to(g, a.data.shape))

    return _make(data, (a,), "sum_axis", bwd)


def mean_all(a: Tensor) -> Tensor:
    n = a.data.size
    data = a.data.mean()

    def bwd(g):
        a._accumulate(np.broadcast_to(g / n, a.data.shape).astype(a.data.dtype))

    return _make(np.asarray(data), (a,), "mean", bwd)


# ---------------------------------------------------------------------------
# linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    """2D @ 2D or batched 3D @ 3D."""
    if a.data.ndim == 2 and b.data.ndim == 2:
        if a.data.shape[1] != b.data.shape[0]:
            _shape_fail("matmul", a.data.shape, b.data.shape)
    elif a.data.ndim == 3 and b.data.ndim == 3:
        if a.data.shape[0] != b.data.shape[0] or a.data.shape[2] != b.data.shape[1]:
            _shape_fail("matmul", a.data.shape, b.data.shape)
    else:
        _shape_fail("matmul", a.data.shape, b.data.shape)
    data = a.data @ b.data

    def bwd(g):
        if a.requires_grad:
            a._accumulate(g @ np.swapaxes(b.data, -1, -2))
        if b.requires_grad:
            b._accumulate(np.swapaxes(a.data, -1, -2) @ g)

    return _make(data, (a, b), "matmul", bwd)


def dense(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    """Affine layer: x (..., K) @ w (K, N) + b (N,)."""
    k_in, _ = w.data.shape
    if x.data.shape[-1] != k_in:
        _shape_fail("dense", x.data.shape, w.data.shape)
    lead = x.data.shape[:-1]
    flat = reshape(x, (-1, k_in)) if x.data.ndim != 2 else x
    y = matmul(flat, w)
    if b is not None:
        y = add(y, b)
    if x.data.ndim != 2:
        y = reshape(y, lead + (w.data.shape[1],))
    return y


# ---------------------------------------------------------------------------
# 1D convolution (ceil-mode "same-like" padding: stride-2 layers halve length)


def conv_output_length(length: int, stride: int) -> int:
    return -(-length // stride)


def _conv_pads(length: int, kernel: int, stride: int) -> tuple[int, int, int]:
    out = conv_output_length(length, stride)
    total = max(0, (out - 1) * stride + kernel - length)
    left = total // 2
    return out, left, total - left


def _patch_index(out_len: int, kernel: int, stride: int) -> np.ndarray:
    return np.arange(out_len)[:, None] * stride + np.arange(kernel)[None, :]


def _conv_fwd(x: np.ndarray, w: np.ndarray, stride: int) -> np.ndarray:
    _, _, length = x.shape
    _, _, kernel = w.shape
    out, pl, pr = _conv_pads(length, kernel, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pl, pr)))
    patches = xp[:, :, _patch_index(out, kernel, stride)]  # (B, Ci, M, k)
    return np.einsum("bcmk,ock->bom", patches, w, optimize=True)


def _conv_bwd_input(gy: np.ndarray, w: np.ndarray, stride: int, in_length: int) -> np.ndarray:
    batch, _, m = gy.shape
    _, ci, kernel = w.shape
    out, pl, pr = _conv_pads(in_length, kernel, stride)
    if out != m:
        _shape_fail("conv_bwd_input", (out,), (m,))
    t = np.einsum("bom,ock->bcmk", gy, w, optimize=True)  # (B, Ci, M, k)
    gxp = np.zeros((batch, ci, in_length + pl + pr), dtype=gy.dtype)
    for kk in range(kernel):
        gxp[:, :, kk : kk + (m - 1) * stride + 1 : stride] += t[:, :, :, kk]
    return gxp[:, :, pl : pl + in_length]


def _conv_bwd_weight(x: np.ndarray, gy: np.ndarray, stride: int, kernel: int) -> np.ndarray:
    _, _, length = x.shape
    out, pl, pr = _conv_pads(length, kernel, stride)
    xp = np.pad(x, ((0, 0), (0, 0), (pl, pr)))
    patches = xp[:, :, _patch_index(out, kernel, stride)]
    return np.einsum("bom,bcmk->ock", gy, patches, optimize=True)


def conv1d(x: Tensor, w: Tensor, b: Tensor | None, stride: int) -> Tensor:
    """x (B, Cin, L), w (Cout, Cin, k) -> (B, Cout, ceil(L/stride))."""
    if x.data.ndim != 3 or w.data.ndim != 3 or x.data.shape[1] != w.data.shape[1]:
        _shape_fail("conv1d", x.data.shape, w.data.shape)
    data = _conv_fwd(x.data, w.data, stride)
    if b is not None:
        data = data + b.data[None, :, None]
    kernel = w.data.shape[2]
    in_length = x.data.shape[2]
    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(_conv_bwd_input(g, w.data, stride, in_length))
        if w.requires_grad:
            w._accumulate(_conv_bwd_weight(x.data, g, stride, kernel))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2)))

    return _make(data, parents, "conv1d", bwd)


def conv1d_transpose(x: Tensor, w: Tensor, b: Tensor | None, stride: int, output_length: int) -> Tensor:
    """Adjoint of conv1d. x (B, Cin, M), w (Cin, Cout, k) -> (B, Cout, output_length).

    Requires ceil(output_length/stride) == M so encoder/decoder lengths mirror.
    """
    if x.data.ndim != 3 or w.data.ndim != 3 or x.data.shape[1] != w.data.shape[0]:
        _shape_fail("conv1d_transpose", x.data.shape, w.data.shape)
    m = x.data.shape[2]
    if conv_output_length(output_length, stride) != m:
        raise ShapeError(
            f"conv1d_transpose: output_length {output_length} with stride {stride} "
            f"does not contract to input length {m}"
        )
    data = _conv_bwd_input(x.data, w.data, stride, output_length)
    if b is not None:
        data = data + b.data[None, :, None]
    kernel = w.data.shape[2]
    parents = (x, w) if b is None else (x, w, b)

    def bwd(g):
        if x.requires_grad:
            x._accumulate(_conv_fwd(g, w.data, stride))
        if w.requires_grad:
            w._accumulate(_conv_bwd_weight(g, x.data, stride, kernel))
        if b is not None and b.requires_grad:
            b._accumulate(g.sum(axis=(0, 2)))

    return _make(data, parents, "conv1d_transpose", bwd)


# ---------------------------------------------------------------------------
# normalization / attention / classification heads


def softmax(a: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Softmax over the last axis with an optional additive mask.

    Mask entries are 0 or -inf; -inf positions get exactly zero weight, so
    masked inputs cannot leak into the output (bitwise causality). A row with
    every position masked yields uniform weights and passes no gradient.
    """
    scores = a.data if mask is None else a.data + mask
    finite = np.isfinite(scores)
    rowmax = np.max(np.where(finite, scores, -np.inf), axis=-1, keepdims=True)
    all_masked = ~np.isfinite(rowmax)
    shifted = np.where(finite, scores - np.where(all_masked, 0.0, rowmax), -np.inf)
    ex = np.exp(shifted, where=np.isfinite(shifted), out=np.zeros_like(shifted))
    denom = ex.sum(axis=-1, keepdims=True)
    k = a.data.shape[-1]
    uniform = np.asarray(1.0 / k, dtype=a.data.dtype)
    p = np.where(all_masked, uniform, ex / np.where(denom == 0, 1.0, denom))
    p = p.astype(a.data.dtype)

    def bwd(g):
        inner = (g * p).sum(axis=-1, keepdims=True)
        ds = p * (g - inner)
        if all_masked.any():
            ds = np.where(all_masked, 0.0, ds)
        a._accumulate(ds.astype(a.data.dtype))

    return _make(p, (a,), "softmax", bwd)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    if gain.data.shape != (x.data.shape[-1],) or bias.data.shape != gain.data.shape:
        _shape_fail("layer_norm", x.data.shape, gain.data.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    var = x.data.var(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = (x.data - mu) * inv
    data = (xhat * gain.data + bias.data).astype(x.data.dtype)
    n = x.data.shape[-1]

    def bwd(g):
        if gain.requires_grad:
            gain._accumulate((g * xhat).reshape(-1, n).sum(axis=0))
        if bias.requires_grad:
            bias._accumulate(g.reshape(-1, n).sum(axis=0))
        if x.requires_grad:
            dxhat = g * gain.data
            dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                        - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
            x._accumulate(dx.astype(x.data.dtype))

    return _make(data, (x, gain, bias), "layer_norm", bwd)


def attention(q: Tensor, k: Tensor, v: Tensor, mask: np.ndarray | None = None) -> Tensor:
    """Scaled dot-product attention over batched 3D inputs (N, T, Dh)."""
    if q.data.ndim != 3 or k.data.shape != v.data.shape or q.data.shape[-1] != k.data.shape[-1]:
        _shape_fail("attention", q.data.shape, k.data.shape)
    scale = 1.0 / math.sqrt(q.data.shape[-1])
    scores = mul(matmul(q, transpose(k, (0, 2, 1))), constant(scale, dtype=q.dtype))
    weights = softmax(scores, mask=mask)
    return matmul(weights, v)


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row lookup: table (V, D), integer indices of any shape -> (*idx, D)."""
    idx = np.asarray(indices)
    if idx.dtype.kind not in "iu" or idx.size and (idx.min() < 0 or idx.max() >= table.data.shape[0]):
        raise ShapeError(f"embedding: indices out of range for table {table.data.shape}")
    data = table.data[idx]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        table._accumulate(gt)

    return _make(data, (table,), "embedding", bwd)


def mse(pred: Tensor, target: Tensor) -> Tensor:
    """Mean squared error over every element."""
    if pred.data.shape != target.data.shape:
        _shape_fail("mse", pred.data.shape, target.data.shape)
    diff = pred.data - target.data
    data = np.asarray((diff * diff).mean())
    n = pred.data.size

    def bwd(g):
        scale = 2.0 * g / n
        if pred.requires_grad:
            pred._accumulate((scale * diff).astype(pred.data.dtype))
        if target.requires_grad:
            target._accumulate((-scale * diff).astype(target.data.dtype))

    return _make(data, (pred, target), "mse", bwd)


def cross_entropy(logits: Tensor, targets: np.ndarray) -> Tensor:
    """Mean negative log softmax probability of integer targets. logits (B, K)."""
    t = np.asarray(targets)
    if logits.data.ndim != 2 or t.shape != (logits.data.shape[0],):
        _shape_fail("cross_entropy", logits.data.shape, t.shape)
    if t.size and (t.min() < 0 or t.max() >= logits.data.shape[1]):
        raise ShapeError(f"cross_entropy: target index out of range for {logits.data.shape[1]} classes")
    z = logits.data
    zmax = z.max(axis=1, keepdims=True)
    ez = np.exp(z - zmax)
    lse = np.log(ez.sum(axis=1, keepdims=True)) + zmax
    batch = z.shape[0]
    rows = np.arange(batch)
    data = np.asarray((lse[:, 0] - z[rows, t]).mean())

    def bwd(g):
        p = ez / ez.sum(axis=1, keepdims=True)
        p[rows, t] -= 1.0
        logits._accumulate((g / batch * p).astype(z.dtype))

    return _make(data, (logits,), "cross_entropy", bwd)


def l2_norm_last(x: Tensor) -> Tensor:
    """Euclidean norm over the last axis; backward guarded at the origin."""
    data = np.sqrt((x.data * x.data).sum(axis=-1))

    def bwd(g):
        safe = np.maximum(data, np.finfo(data.dtype).tiny ** 0.5)
        x._accumulate((g / safe)[..., None] * x.data)

    return _make(data, (x,), "l2_norm_last", bwd)


def pairwise_sqdist(x: Tensor) -> Tensor:
    """All-pairs squared Euclidean distances of the rows of x (B, D) -> (B, B)."""
    if x.data.ndim != 2:
        _shape_fail("pairwise_sqdist", x.data.shape)
    diff = x.data[:, None, :] - x.data[None, :, :]
    data = (diff * diff).sum(axis=-1)

    def bwd(g):
        gg = g + g.T
        dx = 2.0 * (gg.sum(axis=1)[:, None] * x.data - gg @ x.data)
        x._accumulate(dx.astype(x.data.dtype))

    return _make(data, (x,), "pairwise_sqdist", bwd)
