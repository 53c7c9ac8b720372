"""Dense tensors with reverse-mode automatic differentiation.

Everything is numpy underneath: a Tensor wraps one ndarray plus an optional
gradient buffer and, while a computation is being recorded, a closure that
knows how to push gradients to its parents.  Convolutions are lowered to
im2col + GEMM, which keeps output rows independent (needed for the causal
decoder) and lets BLAS do the heavy lifting.

Precision is a process-wide switch: float64 by default (tests, gradient
checks), float32 opt-in for training speed.
"""

from __future__ import annotations

import contextlib

import numpy as np

_DTYPE = np.float64
_GRAD_ENABLED = True
_FINITE_CHECKS = True


def set_default_dtype(dtype) -> None:
    """Select the element type for all subsequently created tensors."""
    global _DTYPE
    dtype = np.dtype(dtype)
    if dtype not in (np.dtype(np.float32), np.dtype(np.float64)):
        raise ValueError(f"unsupported dtype {dtype}; use float32 or float64")
    _DTYPE = dtype.type


def default_dtype():
    return _DTYPE


@contextlib.contextmanager
def no_grad():
    """Disable graph recording inside the block (inference fast path)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


def _check_finite(arr: np.ndarray) -> None:
    # One fused pass; a float64 accumulator cannot overflow on finite f32 data.
    if not np.isfinite(np.sum(arr, dtype=np.float64)):
        raise FloatingPointError("operation produced non-finite values")


class Tensor:
    """Row-major dense array with an optional gradient buffer."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward_fn")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward_fn = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    def item(self) -> float:
        return float(self.data.reshape(()))

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self) -> None:
        backward(self)

    def sum(self) -> "Tensor":
        return tsum(self)

    def reshape(self, *shape) -> "Tensor":
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def __add__(self, other):
        return add(self, _as_tensor(other))

    def __radd__(self, other):
        return add(_as_tensor(other), self)

    def __sub__(self, other):
        return sub(self, _as_tensor(other))

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return mul(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return scale(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __repr__(self):
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data: np.ndarray, parents: tuple[Tensor, ...], backward_fn) -> Tensor:
    """Wrap an op result, recording the edge if gradients are live."""
    if _FINITE_CHECKS:
        _check_finite(data)
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out._parents = ()
    out._backward_fn = None
    out.requires_grad = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    if out.requires_grad:
        out._parents = parents
        out._backward_fn = backward_fn
    return out


def _accum(t: Tensor, g: np.ndarray, owned: bool = False) -> None:
    """Add g into t's gradient buffer.  owned=True promises g is a freshly
    allocated array (or an exclusive view of one) that the caller will not
    touch again, so it can be adopted without a defensive copy."""
    if not t.requires_grad:
        return
    if t.grad is None:
        t.grad = g if owned else np.array(g, dtype=t.data.dtype)
    else:
        t.grad += g


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a gradient back to the shape it was broadcast from."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def backward(loss: Tensor) -> None:
    """Reverse-mode sweep from a scalar; accumulates into leaf .grad buffers."""
    if loss.size != 1:
        raise ValueError(f"backward requires a scalar, got shape {loss.shape}")
    # Iterative post-order with cycle detection (a cycle would be an internal
    # bug: ops only ever point at already-built tensors).
    order: list[Tensor] = []
    state: dict[int, int] = {}  # 1 = on stack, 2 = done
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, processed = stack.pop()
        nid = id(node)
        if processed:
            state[nid] = 2
            order.append(node)
            continue
        st = state.get(nid, 0)
        if st == 2:
            continue
        if st == 1:
            raise RuntimeError("internal error: cycle in computation graph")
        state[nid] = 1
        stack.append((node, True))
        for p in node._parents:
            if p.requires_grad and state.get(id(p), 0) != 2:
                stack.append((p, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(order):
        if node._backward_fn is not None:
            node._backward_fn(node.grad)
            node.grad = None  # interior grads are transient; leaves keep theirs


# ---------------------------------------------------------------------------
# elementwise / structural ops


def add(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data + b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        # g is exclusively ours once a took its copy above
        _accum(b, _unbroadcast(g, b.shape), owned=True)

    return _make(out_data, (a, b), bwd)


def sub(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data - b.data

    def bwd(g):
        _accum(a, _unbroadcast(g, a.shape))
        _accum(b, _unbroadcast(-g, b.shape), owned=True)

    return _make(out_data, (a, b), bwd)


def mul(a: Tensor, b: Tensor) -> Tensor:
    out_data = a.data * b.data

    def bwd(g):
        _accum(a, _unbroadcast(g * b.data, a.shape), owned=True)
        _accum(b, _unbroadcast(g * a.data, b.shape), owned=True)

    return _make(out_data, (a, b), bwd)


def scale(a: Tensor, s: float) -> Tensor:
    out_data = a.data * s

    def bwd(g):
        _accum(a, g * s, owned=True)

    return _make(out_data, (a,), bwd)


def reshape(a: Tensor, shape: tuple[int, ...]) -> Tensor:
    out_data = a.data.reshape(shape)

    def bwd(g):
        _accum(a, g.reshape(a.shape), owned=True)

    return _make(out_data, (a,), bwd)


def tsum(a: Tensor) -> Tensor:
    out_data = np.asarray(a.data.sum(), dtype=a.data.dtype)

    def bwd(g):
        _accum(a, np.broadcast_to(g, a.shape))

    return _make(out_data, (a,), bwd)


def tmean(a: Tensor) -> Tensor:
    n = a.size
    out_data = np.asarray(a.data.sum() / n, dtype=a.data.dtype)

    def bwd(g):
        _accum(a, np.broadcast_to(g / n, a.shape))

    return _make(out_data, (a,), bwd)


def relu(a: Tensor) -> Tensor:
    out_data = np.maximum(a.data, 0)

    def bwd(g):
        _accum(a, g * (out_data > 0), owned=True)

    return _make(out_data, (a,), bwd)


def matmul(a: Tensor, b: Tensor, transpose_b: bool = False) -> Tensor:
    """Stacked matrix product; batch dims broadcast numpy-style."""
    b_data = b.data.swapaxes(-1, -2) if transpose_b else b.data
    out_data = a.data @ b_data

    def bwd(g):
        if a.requires_grad:
            _accum(a, _unbroadcast(g @ b_data.swapaxes(-1, -2), a.shape),
                   owned=True)
        if b.requires_grad:
            gb = a.data.swapaxes(-1, -2) @ g
            if transpose_b:
                gb = gb.swapaxes(-1, -2)
            _accum(b, _unbroadcast(gb, b.shape), owned=True)

    return _make(out_data, (a, b), bwd)


# ---------------------------------------------------------------------------
# neural-net ops


def linear(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """weight @ x + bias with weight laid out (d_out, d_in); x may carry any
    number of leading batch/time axes."""
    if x.shape[-1] != weight.shape[1]:
        raise ValueError(f"linear: input width {x.shape[-1]} != {weight.shape[1]}")
    if bias is not None and bias.shape != (weight.shape[0],):
        raise ValueError(f"linear: bias shape {bias.shape} != ({weight.shape[0]},)")
    out_data = x.data @ weight.data.T
    if bias is not None:
        out_data += bias.data

    def bwd(g):
        g2 = g.reshape(-1, g.shape[-1])
        if x.requires_grad:
            _accum(x, (g2 @ weight.data).reshape(x.shape), owned=True)
        if weight.requires_grad:
            _accum(weight, g2.T @ x.data.reshape(-1, x.shape[-1]), owned=True)
        if bias is not None:
            _accum(bias, g2.sum(axis=0), owned=True)

    parents = (x, weight) if bias is None else (x, weight, bias)
    return _make(out_data, parents, bwd)


def _conv1d_pads(k: int, t: int, pad: str) -> tuple[int, int]:
    if pad == "same":
        return ((k - 1) // 2, k // 2)
    if pad == "causal":
        return (k - 1, 0)
    if pad == "valid":
        if t - k + 1 < 1:
            raise ValueError(f"conv1d: valid output length {t - k + 1} < 1")
        return (0, 0)
    raise ValueError(f"conv1d: unknown padding {pad!r}")


def conv1d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           pad: str = "same") -> Tensor:
    """1-d cross-correlation over the time axis.

    x: (T, C_in) or (B, T, C_in); weight: (k, C_in, C_out).  `same` keeps T,
    `causal` left-pads k-1 so output t sees only inputs <= t, `valid` gives
    T-k+1 steps.
    """
    squeeze = x.ndim == 2
    x3 = x.data[None] if squeeze else x.data
    if x3.ndim != 3:
        raise ValueError(f"conv1d: expected 2 or 3 dims, got {x.ndim}")
    k, c_in, c_out = weight.shape
    if x3.shape[2] != c_in:
        raise ValueError(f"conv1d: {x3.shape[2]} input channels, kernel wants {c_in}")
    if bias is not None and bias.shape != (c_out,):
        raise ValueError("conv1d: bias shape mismatch")
    B, T, _ = x3.shape
    pl, pr = _conv1d_pads(k, T, pad)
    xp = np.pad(x3, ((0, 0), (pl, pr), (0, 0))) if (pl or pr) else x3
    t_out = xp.shape[1] - k + 1
    # (B, T', C, k) -> (B, T', k, C) -> (B*T', k*C)
    cols = np.lib.stride_tricks.sliding_window_view(xp, k, axis=1)
    cols = np.ascontiguousarray(cols.transpose(0, 1, 3, 2)).reshape(B * t_out, k * c_in)
    w2 = weight.data.reshape(k * c_in, c_out)
    out_data = cols @ w2
    if bias is not None:
        out_data += bias.data
    out_data = out_data.reshape(B, t_out, c_out)

    def bwd(g):
        g2 = g.reshape(B * t_out, c_out)
        if weight.requires_grad:
            _accum(weight, (cols.T @ g2).reshape(weight.shape), owned=True)
        if bias is not None:
            _accum(bias, g2.sum(axis=0), owned=True)
        if x.requires_grad:
            gcols = (g2 @ w2.T).reshape(B, t_out, k, c_in)
            gxp = np.zeros_like(xp)
            for i in range(k):
                gxp[:, i:i + t_out, :] += gcols[:, :, i, :]
            gx = gxp[:, pl:pl + T, :]
            _accum(x, gx[0] if squeeze else gx, owned=True)

    parents = (x, weight) if bias is None else (x, weight, bias)
    out = _make(out_data, parents, bwd)
    return reshape(out, out_data.shape[1:]) if squeeze else out


def conv2d(x: Tensor, weight: Tensor, bias: Tensor | None = None,
           pad: str = "same") -> Tensor:
    """2-d cross-correlation; x: (H, W, C_in) or (B, H, W, C_in),
    weight: (k_h, k_w, C_in, C_out), padding `same` or `valid`."""
    squeeze = x.ndim == 3
    x4 = x.data[None] if squeeze else x.data
    if x4.ndim != 4:
        raise ValueError(f"conv2d: expected 3 or 4 dims, got {x.ndim}")
    kh, kw, c_in, c_out = weight.shape
    if x4.shape[3] != c_in:
        raise ValueError(f"conv2d: {x4.shape[3]} input channels, kernel wants {c_in}")
    B, H, W, _ = x4.shape
    if pad == "same":
        ph = ((kh - 1) // 2, kh // 2)
        pw = ((kw - 1) // 2, kw // 2)
    elif pad == "valid":
        if H - kh + 1 < 1 or W - kw + 1 < 1:
            raise ValueError("conv2d: valid output extent < 1")
        ph = pw = (0, 0)
    else:
        raise ValueError(f"conv2d: unknown padding {pad!r}")
    xp = np.pad(x4, ((0, 0), ph, pw, (0, 0))) if any(ph + pw) else x4
    h_out = xp.shape[1] - kh + 1
    w_out = xp.shape[2] - kw + 1
    # (B, H', W', C, kh, kw) -> (B, H', W', kh, kw, C)
    cols = np.lib.stride_tricks.sliding_window_view(xp, (kh, kw), axis=(1, 2))
    cols = np.ascontiguousarray(cols.transpose(0, 1, 2, 4, 5, 3))
    cols = cols.reshape(B * h_out * w_out, kh * kw * c_in)
    w2 = weight.data.reshape(kh * kw * c_in, c_out)
    out_data = cols @ w2
    if bias is not None:
        out_data += bias.data
    out_data = out_data.reshape(B, h_out, w_out, c_out)

    def bwd(g):
        g2 = g.reshape(-1, c_out)
        if weight.requires_grad:
            _accum(weight, (cols.T @ g2).reshape(weight.shape), owned=True)
        if bias is not None:
            _accum(bias, g2.sum(axis=0), owned=True)
        if x.requires_grad:
            gcols = (g2 @ w2.T).reshape(B, h_out, w_out, kh, kw, c_in)
            gxp = np.zeros_like(xp)
            for i in range(kh):
                for j in range(kw):
                    gxp[:, i:i + h_out, j:j + w_out, :] += gcols[:, :, :, i, j, :]
            gx = gxp[:, ph[0]:ph[0] + H, pw[0]:pw[0] + W, :]
            _accum(x, gx[0] if squeeze else gx, owned=True)

    parents = (x, weight) if bias is None else (x, weight, bias)
    out = _make(out_data, parents, bwd)
    return reshape(out, out_data.shape[1:]) if squeeze else out


def maxpool2(x: Tensor) -> Tensor:
    """2x2 max pooling, stride 2; x: (..., H, W, C) with H, W even."""
    *_, H, W, C = x.shape
    if H % 2 or W % 2:
        raise ValueError(f"maxpool2: extents ({H}, {W}) must be even")
    quads = (x.data[..., 0::2, 0::2, :], x.data[..., 0::2, 1::2, :],
             x.data[..., 1::2, 0::2, :], x.data[..., 1::2, 1::2, :])
    out_data = np.maximum(np.maximum(quads[0], quads[1]),
                          np.maximum(quads[2], quads[3]))

    def bwd(g):
        # route each block's gradient to its first maximal entry
        gx = np.zeros_like(x.data)
        slots = (gx[..., 0::2, 0::2, :], gx[..., 0::2, 1::2, :],
                 gx[..., 1::2, 0::2, :], gx[..., 1::2, 1::2, :])
        taken = np.zeros(out_data.shape, dtype=bool)
        for q, slot in zip(quads, slots):
            hit = (q == out_data) & ~taken
            slot[...] = g * hit
            taken |= hit
        _accum(x, gx, owned=True)

    return _make(out_data, (x,), bwd)


def _sigmoid(z: np.ndarray) -> np.ndarray:
    # Split form never exponentiates a positive argument.
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def glu(x: Tensor) -> Tensor:
    """Gated linear unit on the last axis: first half gated by the second."""
    c2 = x.shape[-1]
    if c2 % 2:
        raise ValueError(f"glu: channel count {c2} is odd")
    c = c2 // 2
    a = x.data[..., :c]
    s = _sigmoid(x.data[..., c:])
    out_data = a * s

    def bwd(g):
        gx = np.empty_like(x.data)
        gx[..., :c] = g * s
        gx[..., c:] = g * a * s * (1.0 - s)
        _accum(x, gx, owned=True)

    return _make(out_data, (x,), bwd)


def softmax(x: Tensor) -> Tensor:
    """Softmax over the last axis, computed with max subtraction."""
    if x.size == 0 or x.shape[-1] == 0:
        raise ValueError("softmax: empty input")
    z = x.data - x.data.max(axis=-1, keepdims=True)
    e = np.exp(z)
    out_data = e / e.sum(axis=-1, keepdims=True)

    def bwd(g):
        dot = (g * out_data).sum(axis=-1, keepdims=True)
        _accum(x, (g - dot) * out_data, owned=True)

    return _make(out_data, (x,), bwd)


def log_softmax(x: Tensor) -> Tensor:
    if x.size == 0 or x.shape[-1] == 0:
        raise ValueError("log_softmax: empty input")
    z = x.data - x.data.max(axis=-1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=-1, keepdims=True))
    out_data = z - lse

    def bwd(g):
        _accum(x, g - np.exp(out_data) * g.sum(axis=-1, keepdims=True),
               owned=True)

    return _make(out_data, (x,), bwd)


def dropout(x: Tensor, p: float, training: bool,
            rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: zero with probability p, scale survivors by 1/(1-p).
    Identity when not training or p == 0."""
    if not 0.0 <= p < 1.0:
        raise ValueError(f"dropout: p={p} outside [0, 1)")
    if not training or p == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout: training mode requires a seeded generator")
    mask = (rng.random(x.shape, dtype=x.data.dtype) >= p).astype(x.data.dtype)
    mask /= (1.0 - p)
    out_data = x.data * mask

    def bwd(g):
        _accum(x, g * mask, owned=True)

    return _make(out_data, (x,), bwd)


def embedding(table: Tensor, indices: np.ndarray) -> Tensor:
    """Row gather: out[..., :] = table[indices[...], :]."""
    idx = np.asarray(indices)
    if idx.size and (idx.min() < 0 or idx.max() >= table.shape[0]):
        raise IndexError(f"embedding: index outside [0, {table.shape[0]})")
    out_data = table.data[idx]

    def bwd(g):
        gt = np.zeros_like(table.data)
        np.add.at(gt, idx, g)
        _accum(table, gt, owned=True)

    return _make(out_data, (table,), bwd)


def gather_last(x: Tensor, indices: np.ndarray) -> Tensor:
    """Pick one entry per row along the last axis: out[...] = x[..., idx[...]]."""
    idx = np.asarray(indices)
    if idx.shape != x.shape[:-1]:
        raise ValueError(f"gather_last: index shape {idx.shape} != {x.shape[:-1]}")
    if idx.size and (idx.min() < 0 or idx.max() >= x.shape[-1]):
        raise IndexError(f"gather_last: index outside [0, {x.shape[-1]})")
    out_data = np.take_along_axis(x.data, idx[..., None], axis=-1)[..., 0]

    def bwd(g):
        gx = np.zeros_like(x.data)
        np.put_along_axis(gx, idx[..., None], g[..., None], axis=-1)
        _accum(x, gx, owned=True)

    return _make(out_data, (x,), bwd)
