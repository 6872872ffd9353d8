"""Dense n-d arrays with reverse-mode differentiation.

All model math in this package runs on :class:`Tensor`, a thin wrapper
around a numpy array that records the operation which produced it.
Calling ``backward()`` on a scalar result replays the recorded adjoint
rules in reverse topological order, accumulating gradients into every
reachable tensor created with ``requires_grad=True``.

Design notes:

* float64 throughout unless the caller supplies float32 data; float32
  is supported for cheaper training runs.
* sliding-window ops (convolution, pooling) treat the second-to-last
  axis as time and the last axis as channels.
* every op is pure -- operands are never mutated -- so repeated forward
  passes with identical inputs are bit-identical.
* each adjoint rule lives next to its forward rule in a single closure,
  which keeps the rules individually testable with ``grad_check``.
"""
from __future__ import annotations

import contextlib
import math
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import ConfigError, ContractError, ShapeError

FLOAT_DTYPES = (np.float32, np.float64)

_grad_enabled = True


@contextlib.contextmanager
def no_grad():
    """Disable operation recording inside the block (pure inference)."""
    global _grad_enabled
    prev = _grad_enabled
    _grad_enabled = False
    try:
        yield
    finally:
        _grad_enabled = prev


def _as_array(data, dtype=None) -> np.ndarray:
    arr = np.asarray(data)
    if dtype is not None:
        return arr.astype(dtype, copy=False)
    if arr.dtype not in FLOAT_DTYPES:
        return arr.astype(np.float64)
    return arr


class Tensor:
    """A numpy array plus an optional gradient buffer and adjoint rule."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        self.data = _as_array(data, dtype)
        self.grad: np.ndarray | None = None
        self.requires_grad = bool(requires_grad)
        self._parents: tuple[Tensor, ...] = ()
        self._vjp: Callable[[np.ndarray], tuple] | None = None

    @classmethod
    def _from_op(cls, data: np.ndarray, parents: tuple["Tensor", ...], vjp) -> "Tensor":
        out = cls.__new__(cls)
        out.data = data
        out.grad = None
        if _grad_enabled and any(p.requires_grad for p in parents):
            out.requires_grad = True
            out._parents = parents
            out._vjp = vjp
        else:
            out.requires_grad = False
            out._parents = ()
            out._vjp = None
        return out

    # -- basic introspection -------------------------------------------------

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return self.data.size

    @property
    def dtype(self):
        return self.data.dtype

    def item(self) -> float:
        return float(self.data.item())

    def __repr__(self):
        return f"Tensor(shape={self.shape}, dtype={self.data.dtype}, requires_grad={self.requires_grad})"

    # -- autodiff -------------------------------------------------------------

    def backward(self) -> None:
        """Populate ``grad`` for every tensor this scalar depends on."""
        if self.data.size != 1:
            raise ContractError(f"backward() needs a scalar, got shape {self.shape}")
        topo: list[Tensor] = []
        visited = {id(self)}
        iters = {id(self): iter(self._parents)}
        path = [self]
        while path:
            node = path[-1]
            nxt = None
            for child in iters[id(node)]:
                if id(child) not in visited and child.requires_grad:
                    nxt = child
                    break
            if nxt is not None:
                visited.add(id(nxt))
                iters[id(nxt)] = iter(nxt._parents)
                path.append(nxt)
            else:
                topo.append(node)
                path.pop()
        self.grad = np.ones_like(self.data)
        for node in reversed(topo):
            if node._vjp is None or node.grad is None:
                continue
            grads = node._vjp(node.grad)
            for parent, g in zip(node._parents, grads):
                if g is None or not parent.requires_grad:
                    continue
                parent.grad = g if parent.grad is None else parent.grad + g

    def zero_grad(self) -> None:
        self.grad = None

    # -- operator sugar --------------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(as_tensor(other, like=self), self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __neg__(self):
        return neg(self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __pow__(self, p):
        return power(self, p)

    def __getitem__(self, key):
        return getitem(self, key)

    # small conveniences used all over the model code
    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis=axis, keepdims=keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis=axis, keepdims=keepdims)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, axes):
        return transpose(self, axes)

    def swapaxes(self, a, b):
        axes = list(range(self.ndim))
        axes[a], axes[b] = axes[b], axes[a]
        return transpose(self, tuple(axes))

    def astype(self, dtype):
        return cast(self, dtype)


def as_tensor(x, like: Tensor | None = None) -> Tensor:
    """Wrap plain data as a constant Tensor (dtype borrowed from ``like``)."""
    if isinstance(x, Tensor):
        return x
    dtype = like.data.dtype if like is not None else None
    return Tensor(x, dtype=dtype)


def parameter(data, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=True, dtype=dtype)


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    """Reduce a broadcast gradient back to the operand's shape."""
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


# -- elementwise arithmetic ----------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a, like=b if isinstance(b, Tensor) else None), as_tensor(b, like=a if isinstance(a, Tensor) else None)
    data = a.data + b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return Tensor._from_op(data, (a, b), vjp)


def sub(a, b) -> Tensor:
    a, b = as_tensor(a, like=b if isinstance(b, Tensor) else None), as_tensor(b, like=a if isinstance(a, Tensor) else None)
    data = a.data - b.data

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(-g, b.data.shape)

    return Tensor._from_op(data, (a, b), vjp)


def mul(a, b) -> Tensor:
    a, b = as_tensor(a, like=b if isinstance(b, Tensor) else None), as_tensor(b, like=a if isinstance(a, Tensor) else None)
    data = a.data * b.data

    def vjp(g):
        return _unbroadcast(g * b.data, a.data.shape), _unbroadcast(g * a.data, b.data.shape)

    return Tensor._from_op(data, (a, b), vjp)


def div(a, b) -> Tensor:
    a, b = as_tensor(a, like=b if isinstance(b, Tensor) else None), as_tensor(b, like=a if isinstance(a, Tensor) else None)
    data = a.data / b.data

    def vjp(g):
        ga = _unbroadcast(g / b.data, a.data.shape)
        gb = _unbroadcast(-g * a.data / (b.data * b.data), b.data.shape)
        return ga, gb

    return Tensor._from_op(data, (a, b), vjp)


def neg(a: Tensor) -> Tensor:
    return Tensor._from_op(-a.data, (a,), lambda g: (-g,))


def power(a: Tensor, p: float) -> Tensor:
    p = float(p)
    data = a.data**p

    def vjp(g):
        return (g * p * a.data ** (p - 1.0),)

    return Tensor._from_op(data, (a,), vjp)


def exp(a: Tensor) -> Tensor:
    data = np.exp(a.data)
    return Tensor._from_op(data, (a,), lambda g: (g * data,))


def log(a: Tensor) -> Tensor:
    return Tensor._from_op(np.log(a.data), (a,), lambda g: (g / a.data,))


def tanh(a: Tensor) -> Tensor:
    data = np.tanh(a.data)
    return Tensor._from_op(data, (a,), lambda g: (g * (1.0 - data * data),))


def sigmoid(a: Tensor) -> Tensor:
    data = 1.0 / (1.0 + np.exp(-np.clip(a.data, -60.0, 60.0)))
    return Tensor._from_op(data, (a,), lambda g: (g * data * (1.0 - data),))


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0
    return Tensor._from_op(np.where(mask, a.data, 0.0), (a,), lambda g: (g * mask,))


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(a: Tensor) -> Tensor:
    """tanh-approximation GELU (smooth, so finite differences stay clean)."""
    x = a.data
    inner = _GELU_C * (x + 0.044715 * x**3)
    t = np.tanh(inner)
    data = 0.5 * x * (1.0 + t)

    def vjp(g):
        dinner = _GELU_C * (1.0 + 3 * 0.044715 * x**2)
        return (g * (0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner),)

    return Tensor._from_op(data, (a,), vjp)


def cast(a: Tensor, dtype) -> Tensor:
    dtype = np.dtype(dtype)
    if a.data.dtype == dtype:
        return a
    data = a.data.astype(dtype)
    src = a.data.dtype
    return Tensor._from_op(data, (a,), lambda g: (g.astype(src),))


# -- reductions and shape ops ----------------------------------------------------


def tsum(a: Tensor, axis=None, keepdims=False) -> Tensor:
    data = a.data.sum(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, a.data.shape).copy(),)

    return Tensor._from_op(data, (a,), vjp)


def tmean(a: Tensor, axis=None, keepdims=False) -> Tensor:
    count = a.data.size if axis is None else a.data.shape[axis]
    if isinstance(axis, tuple):
        count = int(np.prod([a.data.shape[ax] for ax in axis]))
    data = a.data.mean(axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, a.data.shape).copy(),)
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g / count, a.data.shape).copy(),)

    return Tensor._from_op(data, (a,), vjp)


def reshape(a: Tensor, shape) -> Tensor:
    orig = a.data.shape
    return Tensor._from_op(a.data.reshape(shape), (a,), lambda g: (g.reshape(orig),))


def transpose(a: Tensor, axes: tuple[int, ...]) -> Tensor:
    inv = np.argsort(axes)
    return Tensor._from_op(
        np.ascontiguousarray(a.data.transpose(axes)), (a,), lambda g: (g.transpose(inv),)
    )


def broadcast_to(a: Tensor, shape) -> Tensor:
    shape = tuple(shape)
    data = np.broadcast_to(a.data, shape).copy()
    return Tensor._from_op(data, (a,), lambda g: (_unbroadcast(g, a.data.shape),))


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [t for t in tensors]
    data = np.concatenate([t.data for t in tensors], axis=axis)
    sizes = [t.data.shape[axis] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.ascontiguousarray(p) for p in np.split(g, offsets, axis=axis))

    return Tensor._from_op(data, tuple(tensors), vjp)


def getitem(a: Tensor, key) -> Tensor:
    """Basic (slice/int/ellipsis) indexing only; each element read at most once."""
    data = a.data[key]
    if data.base is not None:
        data = data.copy()

    def vjp(g):
        out = np.zeros_like(a.data)
        out[key] = g
        return (out,)

    return Tensor._from_op(data, (a,), vjp)


def take_rows(a: Tensor, idx: np.ndarray) -> Tensor:
    """Gather rows along axis 0 (indices may repeat)."""
    idx = np.asarray(idx)
    data = a.data[idx]

    def vjp(g):
        out = np.zeros_like(a.data)
        np.add.at(out, idx, g)
        return (out,)

    return Tensor._from_op(data, (a,), vjp)


def segment_mean(edges: Tensor, segment_ids: np.ndarray, num_segments: int) -> Tensor:
    """Mean of rows sharing a segment id; every segment must be non-empty."""
    segment_ids = np.asarray(segment_ids)
    counts = np.bincount(segment_ids, minlength=num_segments)
    if np.any(counts == 0):
        raise ContractError("segment_mean: every segment needs at least one member")
    out = np.zeros((num_segments,) + edges.data.shape[1:], dtype=edges.data.dtype)
    np.add.at(out, segment_ids, edges.data)
    denom = counts.reshape((num_segments,) + (1,) * (edges.data.ndim - 1)).astype(edges.data.dtype)
    out = out / denom

    def vjp(g):
        return ((g / denom)[segment_ids],)

    return Tensor._from_op(out, (edges,), vjp)


# -- fused stable primitives -------------------------------------------------------


def softmax(a: Tensor, axis: int = -1) -> Tensor:
    """Numerically stable softmax; rows of all -inf are a contract violation."""
    x = a.data
    m = np.max(x, axis=axis, keepdims=True)
    e = np.exp(x - np.where(np.isfinite(m), m, 0.0))
    s = e.sum(axis=axis, keepdims=True)
    data = e / s

    def vjp(g):
        dot = (g * data).sum(axis=axis, keepdims=True)
        return (data * (g - dot),)

    return Tensor._from_op(data, (a,), vjp)


def layer_norm(x: Tensor, gain: Tensor, bias: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize the last axis to zero mean / unit variance, then affine."""
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = xc * inv

    data = xhat * gain.data + bias.data
    reduce_axes = tuple(range(x.data.ndim - 1))

    def vjp(g):
        dgain = (g * xhat).sum(axis=reduce_axes)
        dbias = g.sum(axis=reduce_axes)
        dxhat = g * gain.data
        m1 = dxhat.mean(axis=-1, keepdims=True)
        m2 = (dxhat * xhat).mean(axis=-1, keepdims=True)
        dx = inv * (dxhat - m1 - xhat * m2)
        return dx, dgain, dbias

    return Tensor._from_op(data, (x, gain, bias), vjp)


def masked_fill(a: Tensor, mask: np.ndarray, value: float) -> Tensor:
    """Replace entries where ``mask`` is True with ``value`` (mask is constant)."""
    mask = np.asarray(mask, dtype=bool)
    data = np.where(mask, np.asarray(value, dtype=a.data.dtype), a.data)

    def vjp(g):
        return (np.where(mask, 0.0, g),)

    return Tensor._from_op(data, (a,), vjp)


def dropout(a: Tensor, p: float, rng: np.random.Generator | None) -> Tensor:
    """Inverted dropout; identity when ``rng`` is None (evaluation) or p == 0."""
    if rng is None or p <= 0.0:
        return a
    if p >= 1.0:
        raise ConfigError("dropout rate must be < 1")
    keep = (rng.random(a.data.shape) >= p).astype(a.data.dtype) / (1.0 - p)
    return Tensor._from_op(a.data * keep, (a,), lambda g: (g * keep,))


# -- linear algebra ---------------------------------------------------------------


def matmul(a, b) -> Tensor:
    """Matrix product.

    In no_grad (inference) mode a 2-d right operand is contracted through an
    unoptimized einsum whose per-row reduction order is fixed, so inference
    results are bit-identical under any permutation of the left operand's
    leading rows -- BLAS GEMM blocking does not guarantee that. Recorded
    (training) passes use the faster BLAS path, which is still deterministic
    for a fixed evaluation order. Stacked right operands always take the
    batched BLAS path, which is exact per slice.
    """
    a, b = as_tensor(a), as_tensor(b)
    if a.data.ndim < 2 or b.data.ndim < 2:
        raise ShapeError("matmul expects operands with at least 2 dimensions")
    if a.data.shape[-1] != b.data.shape[-2]:
        raise ShapeError(
            f"matmul inner dimensions disagree: {a.data.shape} @ {b.data.shape}"
        )
    if b.data.ndim == 2 and not _grad_enabled:
        data = np.einsum("...i,io->...o", a.data, b.data, optimize=False)
        return Tensor._from_op(data, (a, b), None)

    data = np.matmul(a.data, b.data)

    def vjp(g):
        ga = _unbroadcast(np.matmul(g, b.data.swapaxes(-1, -2)), a.data.shape)
        gb = _unbroadcast(np.matmul(a.data.swapaxes(-1, -2), g), b.data.shape)
        return ga, gb

    return Tensor._from_op(data, (a, b), vjp)


# -- sliding-window ops (time axis = -2, channels = -1) -----------------------------


def pad_time(x: Tensor, left: int, right: int, mode: str = "zero") -> Tensor:
    """Pad the time axis. Modes: 'zero', 'edge' (replicate), 'symmetric' (mirror)."""
    if left < 0 or right < 0:
        raise ConfigError("pad widths must be non-negative")
    if left == 0 and right == 0:
        return x
    T = x.data.shape[-2]
    if mode in ("edge", "symmetric") and max(left, right) > T:
        raise ConfigError(f"pad width {max(left, right)} exceeds series length {T}")
    width = [(0, 0)] * (x.data.ndim - 2) + [(left, right), (0, 0)]
    np_mode = {"zero": "constant", "edge": "edge", "symmetric": "symmetric"}[mode]
    data = np.pad(x.data, width, mode=np_mode)

    def vjp(g):
        core = np.ascontiguousarray(g[..., left : left + T, :])
        if mode == "edge":
            if left:
                core[..., 0, :] += g[..., :left, :].sum(axis=-2)
            if right:
                core[..., -1, :] += g[..., left + T :, :].sum(axis=-2)
        elif mode == "symmetric":
            # left pad rows are x[left-1], .., x[0]; right pad rows are x[T-1], .., x[T-right]
            if left:
                core[..., :left, :] += g[..., left - 1 :: -1, :]
            if right:
                core[..., T - right :, :] += g[..., : left + T - 1 : -1, :]
        return (core,)

    return Tensor._from_op(data, (x,), vjp)


def corr1d(x: Tensor, w: Tensor, stride: int = 1, bias: Tensor | None = None) -> Tensor:
    """Valid cross-correlation along time: out[t] = sum_k x[t*stride + k] . w[k].

    x: [..., T, C], w: [K, C, O] -> out [..., L, O] with L = (T - K)//stride + 1.
    """
    K, C, O = w.data.shape
    T = x.data.shape[-2]
    if x.data.shape[-1] != C:
        raise ShapeError(f"corr1d channel mismatch: x has {x.data.shape[-1]}, w has {C}")
    if T < K:
        raise ShapeError(f"corr1d needs series length >= kernel ({T} < {K})")
    wins = np.lib.stride_tricks.sliding_window_view(x.data, K, axis=-2)  # [..., L*, C, K]
    wins = wins[..., ::stride, :, :]
    # in inference mode keep the per-row reduction order fixed (bit-exact
    # under row permutations), matching the matmul policy
    data = np.einsum("...lck,kco->...lo", wins, w.data, optimize=_grad_enabled)
    if bias is not None:
        data = data + bias.data
    L = data.shape[-2]

    def vjp(g):
        gw = np.einsum("...lck,...lo->kco", wins, g, optimize=True)
        tmp = np.einsum("...lo,kco->...lkc", g, w.data, optimize=True)
        gx = np.zeros_like(x.data)
        for k in range(K):
            gx[..., k : k + stride * L : stride, :] += tmp[..., :, k, :]
        if bias is not None:
            gb = g.sum(axis=tuple(range(g.ndim - 1)))
            return gx, gw, gb
        return gx, gw

    parents = (x, w) if bias is None else (x, w, bias)
    return Tensor._from_op(data, parents, vjp)


def causal_conv1d(x: Tensor, w: Tensor, bias: Tensor | None = None) -> Tensor:
    """Length-preserving convolution where out[t] sees inputs at positions <= t."""
    K = w.data.shape[0]
    if K < 1:
        raise ConfigError("causal_conv1d kernel size must be >= 1")
    return corr1d(pad_time(x, K - 1, 0, mode="zero"), w, stride=1, bias=bias)


def _moving_sum_valid(arr: np.ndarray, k: int) -> np.ndarray:
    pad = [(0, 0)] * (arr.ndim - 2) + [(1, 0), (0, 0)]
    cs = np.cumsum(np.pad(arr, pad), axis=-2)
    return cs[..., k:, :] - cs[..., :-k, :]


def moving_mean_valid(x: Tensor, k: int) -> Tensor:
    """Windowed mean over every full window of length k along time."""
    if k < 1:
        raise ConfigError("window must be >= 1")
    if x.data.shape[-2] < k:
        raise ShapeError(f"series length {x.data.shape[-2]} shorter than window {k}")
    data = _moving_sum_valid(x.data, k) / k

    def vjp(g):
        pad = [(0, 0)] * (g.ndim - 2) + [(k - 1, k - 1), (0, 0)]
        return (_moving_sum_valid(np.pad(g, pad), k) / k,)

    return Tensor._from_op(data, (x,), vjp)


def avg_pool1d_same(x: Tensor, kernel: int) -> Tensor:
    """Same-length moving average; edges replicate boundary values. Kernel must be odd."""
    if kernel < 1 or kernel % 2 == 0:
        raise ConfigError(f"avg_pool1d_same kernel must be odd and >= 1, got {kernel}")
    if kernel == 1:
        return x
    half = kernel // 2
    return moving_mean_valid(pad_time(x, half, half, mode="edge"), kernel)


# -- shifts and gathers -------------------------------------------------------------


def roll_time(x: Tensor, shift: int) -> Tensor:
    """Circularly shift the time axis by a constant amount (x[t] <- x[t+shift])."""
    data = np.roll(x.data, -shift, axis=-2)
    return Tensor._from_op(data, (x,), lambda g: (np.roll(g, shift, axis=-2),))


def roll_time_per_row(x: Tensor, shifts: np.ndarray) -> Tensor:
    """Per-slice circular shift: out[..., t, :] = x[..., (t + shift) % T, :].

    ``shifts`` has the shape of x's leading axes (everything before time).
    """
    T = x.data.shape[-2]
    shifts = np.asarray(shifts)
    t = np.arange(T)
    idx = (t + shifts[..., None]) % T  # [..., T]
    data = np.take_along_axis(x.data, idx[..., None], axis=-2)

    def vjp(g):
        inv = (t - shifts[..., None]) % T
        return (np.take_along_axis(g, inv[..., None], axis=-2),)

    return Tensor._from_op(data, (x,), vjp)


def select_time_rows(x: Tensor, idx: np.ndarray) -> Tensor:
    """Gather rows along time by per-slice indices (unique within each slice).

    x: [..., T, D], idx: [..., u] -> [..., u, D]
    """
    idx = np.asarray(idx)
    data = np.take_along_axis(x.data, idx[..., None], axis=-2)

    def vjp(g):
        out = np.zeros_like(x.data)
        np.put_along_axis(out, np.broadcast_to(idx[..., None], g.shape), g, axis=-2)
        return (out,)

    return Tensor._from_op(data, (x,), vjp)


def scatter_time_rows(base: Tensor, rows: Tensor, idx: np.ndarray) -> Tensor:
    """Place ``rows`` into ``base`` along time at per-slice unique indices."""
    idx = np.asarray(idx)
    data = base.data.copy()
    idxe = np.broadcast_to(idx[..., None], rows.data.shape)
    np.put_along_axis(data, idxe, rows.data, axis=-2)

    def vjp(g):
        gbase = g.copy()
        np.put_along_axis(gbase, idxe, 0.0, axis=-2)
        grows = np.take_along_axis(g, idxe, axis=-2)
        return gbase, grows

    return Tensor._from_op(data, (base, rows), vjp)


def topk(x: Tensor, k: int, axis: int = -1) -> tuple[Tensor, np.ndarray]:
    """k largest values with original indices; ties keep the lowest index."""
    n = x.data.shape[axis]
    if not 1 <= k <= n:
        raise ConfigError(f"topk k={k} out of range for axis extent {n}")
    order = np.argsort(-x.data, axis=axis, kind="stable")
    idx = np.take(order, np.arange(k), axis=axis)
    data = np.take_along_axis(x.data, idx, axis=axis)

    def vjp(g):
        out = np.zeros_like(x.data)
        np.put_along_axis(out, idx, g, axis=axis)
        return (out,)

    return Tensor._from_op(data, (x,), vjp), idx


# -- real FFT pair ---------------------------------------------------------------


def rfft(x: Tensor, axis: int = -1) -> tuple[Tensor, Tensor]:
    """Real-input DFT returning (real, imag) tensors of floor(L/2)+1 bins."""
    L = x.data.shape[axis]
    if L < 2:
        raise ShapeError("rfft needs series length >= 2")
    spec = np.fft.rfft(x.data, axis=axis)
    dtype = x.data.dtype

    def adjoint(gc):
        nbins = gc.shape[axis]
        pad_shape = list(gc.shape)
        pad_shape[axis] = L - nbins
        padded = np.concatenate([gc, np.zeros(pad_shape, dtype=gc.dtype)], axis=axis)
        return (np.fft.ifft(padded, axis=axis) * L).real.astype(dtype)

    re = Tensor._from_op(
        np.ascontiguousarray(spec.real).astype(dtype), (x,),
        lambda g: (adjoint(g.astype(np.complex128)),),
    )
    im = Tensor._from_op(
        np.ascontiguousarray(spec.imag).astype(dtype), (x,),
        lambda g: (adjoint(1j * g.astype(np.complex128)),),
    )
    return re, im


def irfft(re: Tensor, im: Tensor, n: int, axis: int = -1) -> Tensor:
    """Inverse of :func:`rfft` back to a length-``n`` real series.

    The imaginary part of bin 0 (and of the Nyquist bin for even n) carries no
    information for a real signal and is ignored, so round-trips are exact.
    """
    nbins = n // 2 + 1
    if re.data.shape[axis] != nbins or im.data.shape[axis] != nbins:
        raise ShapeError(
            f"irfft expected {nbins} bins along axis {axis} for n={n}, "
            f"got {re.data.shape[axis]}/{im.data.shape[axis]}"
        )
    imz = im.data.copy()
    zero_idx = [0] + ([nbins - 1] if n % 2 == 0 else [])
    sl: list = [slice(None)] * imz.ndim
    for zi in zero_idx:
        sl[axis] = zi
        imz[tuple(sl)] = 0.0
    data = np.fft.irfft(re.data + 1j * imz, n=n, axis=axis).astype(re.data.dtype)

    # weight of each bin in the hermitian expansion: 1 at DC (and Nyquist for even n), else 2
    c = np.full(nbins, 2.0)
    c[0] = 1.0
    if n % 2 == 0:
        c[-1] = 1.0
    cshape = [1] * re.data.ndim
    cshape[axis] = nbins
    c = c.reshape(cshape)

    def vjp(g):
        spec = np.fft.rfft(g, axis=axis)
        gre = (c / n) * spec.real
        gim = (c / n) * spec.imag
        for zi in zero_idx:
            sl[axis] = zi
            gim[tuple(sl)] = 0.0
        return gre.astype(re.data.dtype), gim.astype(im.data.dtype)

    return Tensor._from_op(data, (re, im), vjp)


# -- verification helper ------------------------------------------------------------


def grad_check(
    f: Callable[[], Tensor],
    params: Iterable[Tensor],
    eps: float = 1e-5,
    rng: np.random.Generator | None = None,
    max_coords: int | None = None,
) -> float:
    """Compare backward() gradients of ``f()`` against central differences.

    Returns the max relative error over checked coordinates, where the error
    is |analytic - numeric| / max(|analytic|, |numeric|, 1e-2). When
    ``max_coords`` is given, that many coordinates per parameter are sampled
    with ``rng``; otherwise every coordinate is checked.
    """
    params = list(params)
    for p in params:
        p.grad = None
    loss = f()
    loss.backward()
    analytic = [None if p.grad is None else p.grad.copy() for p in params]

    worst = 0.0
    for p, ga in zip(params, analytic):
        if ga is None:
            ga = np.zeros_like(p.data)
        n = p.data.size
        if max_coords is not None and n > max_coords:
            if rng is None:
                rng = np.random.default_rng(0)
            coords = rng.choice(n, size=max_coords, replace=False)
        else:
            coords = range(n)
        flat = p.data.reshape(-1)
        ga_flat = ga.reshape(-1)
        for i in coords:
            orig = flat[i]
            flat[i] = orig + eps
            with no_grad():
                lp = f().item()
            flat[i] = orig - eps
            with no_grad():
                lm = f().item()
            flat[i] = orig
            gn = (lp - lm) / (2.0 * eps)
            err = abs(ga_flat[i] - gn) / max(abs(ga_flat[i]), abs(gn), 1e-2)
            worst = max(worst, err)
    return worst
