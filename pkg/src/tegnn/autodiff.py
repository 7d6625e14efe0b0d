"""Reverse-mode automatic differentiation over dense float64 arrays.

Small define-by-run engine: every operation records its inputs and a
vector-Jacobian closure on the output tensor, and ``backward()`` on a scalar
replays the graph in reverse topological order.  The op set is exactly what
the forecasting model needs (elementwise arithmetic, matmul, valid 1D
cross-correlation, ReLU, concat, reshape, reductions, abs) plus the Adam
optimizer.  Broadcasting is limited to scalar-with-tensor; any other shape
mismatch raises :class:`ShapeError`.
"""

from __future__ import annotations

from typing import Iterable, Mapping, Sequence, Union

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

ArrayLike = Union["Tensor", np.ndarray, float, int, Sequence]


class ShapeError(ValueError):
    """Operand shapes do not conform for the requested operation."""


_grad_enabled = True


class no_grad:
    """Context manager that disables graph recording (cheap inference)."""

    def __enter__(self):
        global _grad_enabled
        self._prev = _grad_enabled
        _grad_enabled = False
        return self

    def __exit__(self, *exc):
        global _grad_enabled
        _grad_enabled = self._prev
        return False


class Tensor:
    """Dense float64 array participating in a dynamically built graph.

    ``grad`` is populated (same shape as ``data``) by ``backward()`` for every
    tensor with ``requires_grad=True`` reachable from the loss; repeated
    backward calls accumulate until ``zero_grad()``.
    """

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_vjp", "_op")

    def __init__(self, data, requires_grad=False, _parents=(), _vjp=None, _op=None):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad = None
        self.requires_grad = bool(requires_grad)
        self._parents = _parents
        self._vjp = _vjp
        self._op = _op

    @property
    def shape(self):
        return self.data.shape

    @property
    def size(self):
        return self.data.size

    def __repr__(self):
        flag = ", requires_grad=True" if self.requires_grad else ""
        return f"Tensor(shape={self.data.shape}{flag})"

    def item(self) -> float:
        return float(self.data)

    def zero_grad(self):
        self.grad = None

    # -- operator sugar ------------------------------------------------

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return subtract(self, other)

    def __rsub__(self, other):
        return subtract(other, self)

    def __mul__(self, other):
        return multiply(self, other)

    def __rmul__(self, other):
        return multiply(other, self)

    def __matmul__(self, other):
        return matmul(self, other)

    def __neg__(self):
        return multiply(self, -1.0)

    def relu(self):
        return relu(self)

    def abs(self):
        return absolute(self)

    def sum(self, axis=None):
        return tensor_sum(self, axis)

    def mean(self, axis=None):
        return tensor_mean(self, axis)

    def reshape(self, shape):
        return reshape(self, shape)

    # -- backward engine -----------------------------------------------

    def backward(self):
        """Populate ``grad`` on every ``requires_grad`` ancestor of this scalar."""
        if self.data.size != 1:
            raise ValueError(
                f"backward requires a scalar loss, got shape {self.data.shape}"
            )
        if not self.requires_grad:
            raise ValueError("backward on a tensor that does not require grad")

        # Iterative post-order DFS over the requires_grad subgraph.
        topo: list[Tensor] = []
        visited: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                topo.append(node)
                continue
            if id(node) in visited:
                continue
            visited.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in visited:
                    stack.append((p, False))

        # Per-call upstream gradients live in `flowing`; node.grad accumulates
        # across backward calls.
        flowing: dict[int, np.ndarray] = {id(self): np.ones_like(self.data)}
        for node in reversed(topo):
            g = flowing.pop(id(node), None)
            if g is None:
                continue
            node.grad = g if node.grad is None else node.grad + g
            if node._vjp is None:
                continue
            for parent, pg in zip(node._parents, node._vjp(g)):
                if pg is None or not parent.requires_grad:
                    continue
                acc = flowing.get(id(parent))
                flowing[id(parent)] = pg if acc is None else acc + pg


def _coerce(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


def _result(data, parents, vjp, op):
    if _grad_enabled and any(p.requires_grad for p in parents):
        return Tensor(data, requires_grad=True, _parents=tuple(parents), _vjp=vjp, _op=op)
    return Tensor(data)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    """Sum `g` down to `shape` (inverse of numpy broadcasting)."""
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _check_elementwise(op: str, a: Tensor, b: Tensor):
    # Equal shapes, or one operand is a scalar (single element).
    if a.data.shape == b.data.shape or a.data.size == 1 or b.data.size == 1:
        return
    raise ShapeError(f"{op}: shapes {a.data.shape} and {b.data.shape} do not match")


# -- elementwise ops -----------------------------------------------------


def add(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _check_elementwise("add", a, b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), _unbroadcast(g, b.data.shape)

    return _result(a.data + b.data, (a, b), vjp, "add")


def subtract(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _check_elementwise("subtract", a, b)

    def vjp(g):
        return _unbroadcast(g, a.data.shape), -_unbroadcast(g, b.data.shape)

    return _result(a.data - b.data, (a, b), vjp, "subtract")


def multiply(a: ArrayLike, b: ArrayLike) -> Tensor:
    a, b = _coerce(a), _coerce(b)
    _check_elementwise("multiply", a, b)
    ad, bd = a.data, b.data

    def vjp(g):
        return _unbroadcast(g * bd, ad.shape), _unbroadcast(g * ad, bd.shape)

    return _result(ad * bd, (a, b), vjp, "multiply")


# -- matmul ---------------------------------------------------------------


def matmul(a: ArrayLike, b: ArrayLike) -> Tensor:
    """Matrix product with numpy semantics (1D operands act as vectors)."""
    a, b = _coerce(a), _coerce(b)
    ad, bd = a.data, b.data
    if ad.ndim == 0 or bd.ndim == 0:
        raise ShapeError(f"matmul: operands must be at least 1D, got {ad.shape} and {bd.shape}")
    inner_a = ad.shape[-1]
    inner_b = bd.shape[0] if bd.ndim == 1 else bd.shape[-2]
    if inner_a != inner_b:
        raise ShapeError(f"matmul: inner extents differ for shapes {ad.shape} and {bd.shape}")
    try:
        out = np.matmul(ad, bd)
    except ValueError as exc:
        raise ShapeError(f"matmul: shapes {ad.shape} and {bd.shape}: {exc}") from None

    a_vec, b_vec = ad.ndim == 1, bd.ndim == 1
    # Matrix views used by the VJP (numpy promotes 1D operands).
    am = ad[None, :] if a_vec else ad
    bm = bd[:, None] if b_vec else bd

    def vjp(g):
        gm = g
        if a_vec:
            gm = np.expand_dims(gm, -2)
        if b_vec:
            gm = np.expand_dims(gm, -1)
        da = np.matmul(gm, np.swapaxes(bm, -1, -2))
        db = np.matmul(np.swapaxes(am, -1, -2), gm)
        da = _unbroadcast(da, am.shape)
        db = _unbroadcast(db, bm.shape)
        if a_vec:
            da = da[0]
        if b_vec:
            db = db[:, 0]
        return da, db

    return _result(out, (a, b), vjp, "matmul")


# -- 1D valid cross-correlation -------------------------------------------


def conv1d(signal: ArrayLike, kernel: ArrayLike, bias: ArrayLike | None = None) -> Tensor:
    """Valid 1D cross-correlation along the last axis (no kernel flip).

    ``kernel`` of shape (k,) maps (..., L) -> (..., L-k+1); shape (C, k) maps
    to (..., C, L-k+1) with an optional per-channel ``bias`` of shape (C,).
    """
    signal, kernel = _coerce(signal), _coerce(kernel)
    sd, kd = signal.data, kernel.data
    if kd.ndim not in (1, 2):
        raise ShapeError(f"conv1d: kernel must be 1D or 2D, got shape {kd.shape}")
    if sd.ndim < 1:
        raise ShapeError(f"conv1d: signal must be at least 1D, got shape {sd.shape}")
    k = kd.shape[-1]
    length = sd.shape[-1]
    if k > length:
        raise ShapeError(
            f"conv1d: kernel length {k} exceeds signal length {length} "
            f"(signal {sd.shape}, kernel {kd.shape})"
        )
    multi = kd.ndim == 2
    parents = [signal, kernel]

    bias_t = None
    if bias is not None:
        bias_t = _coerce(bias)
        if multi and bias_t.data.shape != (kd.shape[0],):
            raise ShapeError(
                f"conv1d: bias shape {bias_t.data.shape} does not match "
                f"{kd.shape[0]} output channels"
            )
        if not multi and bias_t.data.size != 1:
            raise ShapeError(
                f"conv1d: bias must be a scalar for a 1D kernel, got shape {bias_t.data.shape}"
            )
        parents.append(bias_t)

    wins = sliding_window_view(sd, k, axis=-1)  # (..., L', k)
    out_len = length - k + 1
    if multi:
        out = np.swapaxes(wins @ kd.T, -1, -2).copy()  # (..., C, L')
        if bias_t is not None:
            out += bias_t.data[:, None]
    else:
        out = wins @ kd  # (..., L')
        if bias_t is not None:
            out = out + bias_t.data.reshape(())

    def vjp(g):
        if multi:
            gt = np.swapaxes(g, -1, -2)  # (..., L', C)
            dk = gt.reshape(-1, kd.shape[0]).T @ wins.reshape(-1, k)
            contrib = gt @ kd  # (..., L', k)
            db = g.sum(axis=tuple(i for i in range(g.ndim) if i != g.ndim - 2))
        else:
            dk = g.reshape(-1) @ wins.reshape(-1, k)
            contrib = g[..., None] * kd  # (..., L', k)
            db = np.asarray(g.sum())
        ds = np.zeros_like(sd)
        for j in range(k):  # overlap-add of window contributions
            ds[..., j : j + out_len] += contrib[..., :, j]
        grads = [ds, dk]
        if bias_t is not None:
            grads.append(db.reshape(bias_t.data.shape))
        return tuple(grads)

    return _result(out, parents, vjp, "conv1d")


# -- unary / structural ops -------------------------------------------------


def relu(x: ArrayLike) -> Tensor:
    x = _coerce(x)
    mask = x.data > 0

    def vjp(g):
        return (g * mask,)

    return _result(np.where(mask, x.data, 0.0), (x,), vjp, "relu")


def absolute(x: ArrayLike) -> Tensor:
    x = _coerce(x)
    sign = np.sign(x.data)

    def vjp(g):
        return (g * sign,)

    return _result(np.abs(x.data), (x,), vjp, "abs")


def concat(tensors: Sequence[ArrayLike], axis: int) -> Tensor:
    tensors = [_coerce(t) for t in tensors]
    if not tensors:
        raise ShapeError("concat: need at least one tensor")
    ndim = tensors[0].data.ndim
    ax = axis if axis >= 0 else axis + ndim
    if not 0 <= ax < ndim:
        raise ShapeError(f"concat: axis {axis} out of range for {ndim}D tensors")
    ref = list(tensors[0].data.shape)
    for t in tensors[1:]:
        other = list(t.data.shape)
        if len(other) != ndim or any(
            r != o for i, (r, o) in enumerate(zip(ref, other)) if i != ax
        ):
            raise ShapeError(
                f"concat: shape {t.data.shape} incompatible with {tensors[0].data.shape} "
                f"along axis {axis}"
            )
    sizes = [t.data.shape[ax] for t in tensors]
    offsets = np.cumsum(sizes)[:-1]

    def vjp(g):
        return tuple(np.split(g, offsets, axis=ax))

    return _result(np.concatenate([t.data for t in tensors], axis=ax), tensors, vjp, "concat")


def reshape(x: ArrayLike, shape) -> Tensor:
    x = _coerce(x)
    orig = x.data.shape
    try:
        out = x.data.reshape(shape)
    except ValueError as exc:
        raise ShapeError(f"reshape: {orig} -> {shape}: {exc}") from None

    def vjp(g):
        return (g.reshape(orig),)

    return _result(out, (x,), vjp, "reshape")


def tensor_sum(x: ArrayLike, axis=None) -> Tensor:
    x = _coerce(x)
    shape = x.data.shape

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), shape).copy(),)

    return _result(np.sum(x.data, axis=axis), (x,), vjp, "sum")


def tensor_mean(x: ArrayLike, axis=None) -> Tensor:
    x = _coerce(x)
    shape = x.data.shape
    count = x.data.size if axis is None else shape[axis]

    def vjp(g):
        if axis is None:
            return (np.broadcast_to(g / count, shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis) / count, shape).copy(),)

    return _result(np.mean(x.data, axis=axis), (x,), vjp, "mean")


# -- Adam -------------------------------------------------------------------


class Adam:
    """Bias-corrected Adam over a named parameter collection.

    ``params`` may be a mapping name -> Tensor or a plain iterable (names are
    generated).  ``step()`` requires every parameter to carry a gradient and
    raises naming the offender otherwise.
    """

    def __init__(
        self,
        params: Union[Mapping[str, Tensor], Iterable[Tensor]],
        lr: float = 0.001,
        beta1: float = 0.9,
        beta2: float = 0.999,
        eps: float = 1e-8,
    ):
        if isinstance(params, Mapping):
            self.params = dict(params)
        else:
            self.params = {f"param{i}": p for i, p in enumerate(params)}
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.step_count = 0
        self._m = {n: np.zeros_like(p.data) for n, p in self.params.items()}
        self._v = {n: np.zeros_like(p.data) for n, p in self.params.items()}

    def step(self):
        for name, p in self.params.items():
            if p.grad is None:
                raise ValueError(f"adam step: parameter '{name}' has no gradient")
        self.step_count += 1
        t = self.step_count
        c1 = 1.0 - self.beta1**t
        c2 = 1.0 - self.beta2**t
        for name, p in self.params.items():
            g = p.grad
            m = self._m[name]
            v = self._v[name]
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * g * g
            p.data -= self.lr * (m / c1) / (np.sqrt(v / c2) + self.eps)

    def zero_grad(self):
        for p in self.params.values():
            p.grad = None
