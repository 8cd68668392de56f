"""Dense tensors with reverse-mode automatic differentiation.

Values are 64-bit floats by default (configurable to 32-bit via
:func:`set_dtype`).  Ops record a tape through parent links; ``backward`` runs
one reverse sweep over the recorded graph.  Tensors created while recording
is disabled (:func:`no_grad`) carry no tape and are freely shareable; a
recorded graph is single-owner during forward/backward.

With :func:`set_debug` enabled, every op checks its output for NaN/Inf.
"""

from __future__ import annotations

from contextlib import contextmanager

import numpy as np

_DTYPE = np.float64
_GRAD_ENABLED = True
_DEBUG = False


def set_dtype(dtype) -> None:
    global _DTYPE
    if dtype not in (np.float32, np.float64):
        raise ValueError("dtype must be float32 or float64")
    _DTYPE = dtype


def get_dtype():
    return _DTYPE


def set_debug(enabled: bool) -> None:
    """Enable NaN/Inf checks after every op."""
    global _DEBUG
    _DEBUG = bool(enabled)


@contextmanager
def no_grad():
    global _GRAD_ENABLED
    previous = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = previous


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=_DTYPE)
        self.grad = None
        self.requires_grad = requires_grad
        self._parents = ()
        self._backward = None

    @property
    def shape(self):
        return self.data.shape

    @property
    def ndim(self):
        return self.data.ndim

    def __repr__(self):
        return f"Tensor(shape={self.data.shape}, requires_grad={self.requires_grad})"

    def _accumulate(self, g) -> None:
        if self.grad is None:
            self.grad = np.zeros_like(self.data)
        self.grad += g

    def zero_grad(self) -> None:
        self.grad = None

    def backward(self, grad=None) -> None:
        """Reverse-mode sweep seeding this tensor's gradient (ones if omitted)."""
        if grad is None:
            grad = np.ones_like(self.data)
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(_topo_order(self)):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)

    # operator sugar
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(self, other)

    def __sub__(self, other):
        return add(self, mul(other, -1.0))

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, key):
        return _index(self, key)


def _topo_order(root: Tensor) -> list[Tensor]:
    order: list[Tensor] = []
    seen: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(root, False)]
    while stack:
        node, processed = stack.pop()
        if processed:
            order.append(node)
            continue
        if id(node) in seen:
            continue
        seen.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            stack.append((parent, False))
    return order


def _as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _make(data, parents, backward_fn) -> Tensor:
    if _DEBUG and not np.isfinite(data).all():
        raise FloatingPointError("non-finite values produced by an op")
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.requires_grad for p in parents):
        out.requires_grad = True
        out._parents = tuple(parents)
        out._backward = backward_fn
    return out


def _unbroadcast(grad, shape):
    """Reduce a broadcast gradient back to ``shape``."""
    extra = grad.ndim - len(shape)
    if extra > 0:
        grad = grad.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, n in enumerate(shape) if n == 1 and grad.shape[i] != 1)
    if axes:
        grad = grad.sum(axis=axes, keepdims=True)
    return grad


# --- core ops -----------------------------------------------------------------


def add(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g, b.shape))

    return _make(a.data + b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _make(a.data * b.data, (a, b), backward)


def matmul(a, b) -> Tensor:
    a, b = _as_tensor(a), _as_tensor(b)

    def backward(g):
        if a.requires_grad:
            ga = np.matmul(g, np.swapaxes(b.data, -1, -2))
            a._accumulate(_unbroadcast(ga, a.shape))
        if b.requires_grad:
            gb = np.matmul(np.swapaxes(a.data, -1, -2), g)
            b._accumulate(_unbroadcast(gb, b.shape))

    return _make(np.matmul(a.data, b.data), (a, b), backward)


def relu(a) -> Tensor:
    a = _as_tensor(a)
    mask = a.data > 0

    def backward(g):
        if a.requires_grad:
            a._accumulate(g * mask)

    return _make(np.where(mask, a.data, 0.0), (a,), backward)


def softmax(a, axis: int = -1) -> Tensor:
    """Row-wise softmax with max subtraction."""
    a = _as_tensor(a)
    shifted = a.data - a.data.max(axis=axis, keepdims=True)
    e = np.exp(shifted)
    y = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        if a.requires_grad:
            dot = (g * y).sum(axis=axis, keepdims=True)
            a._accumulate(y * (g - dot))

    return _make(y, (a,), backward)


def layer_norm(x, scale, shift, eps: float = 1e-6) -> Tensor:
    """Per-row normalization over the last axis with learned scale and shift."""
    x, scale, shift = _as_tensor(x), _as_tensor(scale), _as_tensor(shift)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered ** 2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv

    def backward(g):
        if scale.requires_grad:
            scale._accumulate(_unbroadcast(g * xhat, scale.shape))
        if shift.requires_grad:
            shift._accumulate(_unbroadcast(g, shift.shape))
        if x.requires_grad:
            gx = g * scale.data
            n = x.data.shape[-1]
            term1 = gx
            term2 = gx.mean(axis=-1, keepdims=True)
            term3 = xhat * (gx * xhat).mean(axis=-1, keepdims=True)
            x._accumulate(inv * (term1 - term2 - term3))

    return _make(xhat * scale.data + shift.data, (x, scale, shift), backward)


def embedding(weight, ids) -> Tensor:
    """Gather rows of ``weight`` by an integer id array."""
    weight = _as_tensor(weight)
    ids = np.asarray(ids, dtype=np.int64)

    def backward(g):
        if weight.requires_grad:
            gw = np.zeros_like(weight.data)
            np.add.at(gw, ids.reshape(-1), g.reshape(-1, weight.data.shape[-1]))
            weight._accumulate(gw)

    return _make(weight.data[ids], (weight,), backward)


def concat(tensors, axis: int = 0) -> Tensor:
    tensors = [_as_tensor(t) for t in tensors]
    sizes = [t.data.shape[axis] for t in tensors]

    def backward(g):
        offset = 0
        for t, n in zip(tensors, sizes):
            if t.requires_grad:
                index = [slice(None)] * g.ndim
                index[axis] = slice(offset, offset + n)
                t._accumulate(g[tuple(index)])
            offset += n

    return _make(np.concatenate([t.data for t in tensors], axis=axis), tuple(tensors), backward)


def _index(a, key) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            ga = np.zeros_like(a.data)
            ga[key] += g
            a._accumulate(ga)

    return _make(a.data[key], (a,), backward)


def reshape(a, shape) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.reshape(a.data.shape))

    return _make(a.data.reshape(shape), (a,), backward)


def transpose(a, axes) -> Tensor:
    a = _as_tensor(a)
    inverse = np.argsort(axes)

    def backward(g):
        if a.requires_grad:
            a._accumulate(g.transpose(inverse))

    return _make(a.data.transpose(axes), (a,), backward)


def tensor_sum(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)

    def backward(g):
        if a.requires_grad:
            if axis is None:
                a._accumulate(np.broadcast_to(g, a.data.shape).copy())
            else:
                gg = g if keepdims else np.expand_dims(g, axis)
                a._accumulate(np.broadcast_to(gg, a.data.shape).copy())

    return _make(a.data.sum(axis=axis, keepdims=keepdims), (a,), backward)


def tensor_mean(a, axis=None, keepdims: bool = False) -> Tensor:
    a = _as_tensor(a)
    count = a.data.size if axis is None else a.data.shape[axis]
    return mul(tensor_sum(a, axis=axis, keepdims=keepdims), 1.0 / count)


def cross_entropy(logits, targets, ignore_index: int = -1) -> Tensor:
    """Mean token negative log-likelihood with an ignore index for padding."""
    logits = _as_tensor(logits)
    targets = np.asarray(targets, dtype=np.int64)
    vocab = logits.data.shape[-1]
    flat = logits.data.reshape(-1, vocab)
    tgt = targets.reshape(-1)
    keep = tgt != ignore_index
    count = int(keep.sum())
    if count == 0:
        raise ValueError("no unignored targets in cross_entropy")
    safe_tgt = np.where(keep, tgt, 0)

    shifted = flat - flat.max(axis=-1, keepdims=True)
    logz = np.log(np.exp(shifted).sum(axis=-1)) + flat.max(axis=-1)
    nll = logz - flat[np.arange(flat.shape[0]), safe_tgt]
    loss = float((nll * keep).sum() / count)

    def backward(g):
        if logits.requires_grad:
            probs = np.exp(shifted)
            probs /= probs.sum(axis=-1, keepdims=True)
            probs[np.arange(flat.shape[0]), safe_tgt] -= 1.0
            probs *= (keep / count)[:, None]
            logits._accumulate(float(g) * probs.reshape(logits.data.shape))

    return _make(np.asarray(loss), (logits,), backward)


def neighborhood_aggregate(h, src, tgt, coeff, num_out: int | None = None) -> Tensor:
    """Weighted sums of neighbor rows: ``out[t] += coeff * h[s]`` per edge.

    ``h`` is (N, d); ``src``/``tgt``/``coeff`` are parallel edge arrays.  This
    is the sparse equivalent of a dense coefficient-matrix product and is the
    primitive behind both graph convolutions.
    """
    h = _as_tensor(h)
    src = np.asarray(src, dtype=np.int64)
    tgt = np.asarray(tgt, dtype=np.int64)
    coeff = np.asarray(coeff, dtype=h.data.dtype)
    rows = h.data.shape[0] if num_out is None else num_out
    out = np.zeros((rows,) + h.data.shape[1:], dtype=h.data.dtype)
    if len(src):
        np.add.at(out, tgt, coeff[:, None] * h.data[src])

    def backward(g):
        if h.requires_grad:
            gh = np.zeros_like(h.data)
            if len(src):
                np.add.at(gh, src, coeff[:, None] * g[tgt])
            h._accumulate(gh)

    return _make(out, (h,), backward)


def dropout(a, p: float, rng: np.random.Generator, training: bool = True) -> Tensor:
    """Inverted dropout; identity when not training or when p == 0."""
    a = _as_tensor(a)
    if not training or p <= 0.0:
        return a
    mask = (rng.random(a.data.shape) >= p) / (1.0 - p)
    return mul(a, mask)


# --- optimizer -------------------------------------------------------------


def adam_step(value, grad, m, v, t: int, lr: float,
              beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
    """One Adam update; mutates and returns (value, m, v).  ``t`` is 1-based."""
    m *= beta1
    m += (1 - beta1) * grad
    v *= beta2
    v += (1 - beta2) * grad * grad
    m_hat = m / (1 - beta1 ** t)
    v_hat = v / (1 - beta2 ** t)
    value -= lr * m_hat / (np.sqrt(v_hat) + eps)
    return value, m, v


class Adam:
    """Adam over a name -> Tensor map; only listed parameters are updated."""

    def __init__(self, params: dict[str, Tensor], lr: float,
                 beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.params = dict(params)
        self.lr = lr
        self.beta1, self.beta2, self.eps = beta1, beta2, eps
        self.t = 0
        self.state = {name: (np.zeros_like(p.data), np.zeros_like(p.data))
                      for name, p in self.params.items()}

    def step(self, lr: float | None = None) -> None:
        self.t += 1
        rate = self.lr if lr is None else lr
        for name, p in self.params.items():
            grad = p.grad if p.grad is not None else np.zeros_like(p.data)
            m, v = self.state[name]
            adam_step(p.data, grad, m, v, self.t, rate, self.beta1, self.beta2, self.eps)

    def zero_grad(self) -> None:
        for p in self.params.values():
            p.zero_grad()
