"""Differentiable array ops.

Every op accepts ``Node`` objects, plain arrays, or a mix. When any input is a
``Node`` the result is recorded on that node's graph together with its
vector-Jacobian product; otherwise the op evaluates eagerly and returns a
float64 ndarray. The same model code therefore serves training (on a graph)
and inference or oracle checks (on arrays).
"""

from __future__ import annotations

import numpy as np

from ..errors import DimensionError, DomainError
from .graph import Graph, Node, as_tensor, check_finite

NORM_EPS = 1e-12


def value_of(x) -> np.ndarray:
    return x.value if isinstance(x, Node) else as_tensor(x)


def _graph_of(*xs) -> Graph | None:
    graph = None
    for x in xs:
        if isinstance(x, Node):
            if graph is None:
                graph = x.graph
            elif x.graph is not graph:
                raise DimensionError("operands belong to different graphs")
    return graph


def _emit(kind, value, inputs, vjp):
    value = check_finite(np.asarray(value, dtype=np.float64), kind)
    graph = _graph_of(*inputs)
    if graph is None:
        return value
    return graph.record(value, inputs, vjp, kind)


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


def _broadcast_shape(kind, a, b):
    try:
        return np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise DimensionError(f"{kind}: shapes {a.shape} and {b.shape} do not broadcast") from None


# -- elementwise ------------------------------------------------------------

def add(a, b):
    av, bv = value_of(a), value_of(b)
    _broadcast_shape("add", av, bv)
    return _emit("add", av + bv, (a, b),
                 lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = value_of(a), value_of(b)
    _broadcast_shape("sub", av, bv)
    return _emit("sub", av - bv, (a, b),
                 lambda g: (_unbroadcast(g, av.shape), _unbroadcast(-g, bv.shape)))


def mul(a, b):
    av, bv = value_of(a), value_of(b)
    _broadcast_shape("mul", av, bv)
    return _emit("mul", av * bv, (a, b),
                 lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)))


def scale(x, c: float):
    """Multiply by a non-differentiable Python scalar."""
    c = float(c)
    return _emit("scale", value_of(x) * c, (x,), lambda g: (g * c,))


def tanh(x):
    y = np.tanh(value_of(x))
    return _emit("tanh", y, (x,), lambda g: (g * (1.0 - y * y),))


def sigmoid(x):
    xv = value_of(x)
    # split by sign so exp never overflows
    e = np.exp(-np.abs(xv))
    y = np.where(xv >= 0, 1.0 / (1.0 + e), e / (1.0 + e))
    return _emit("sigmoid", y, (x,), lambda g: (g * y * (1.0 - y),))


def exp(x):
    # overflow surfaces as NumericalError from _emit, not as a numpy warning
    with np.errstate(over="ignore"):
        y = np.exp(value_of(x))
    return _emit("exp", y, (x,), lambda g: (g * y,))


def log(x):
    xv = value_of(x)
    if np.any(xv <= 0):
        raise DomainError("log of a non-positive value")
    return _emit("log", np.log(xv), (x,), lambda g: (g / xv,))


# -- linear algebra -----------------------------------------------------------

def matmul(a, b):
    """Matrix product with numpy semantics for 1-D and stacked operands."""
    av, bv = value_of(a), value_of(b)
    if av.ndim == 0 or bv.ndim == 0:
        raise DimensionError("matmul: scalar operand")
    a2 = av[None, :] if av.ndim == 1 else av
    b2 = bv[:, None] if bv.ndim == 1 else bv
    if a2.shape[-1] != b2.shape[-2]:
        raise DimensionError(f"matmul: shapes {av.shape} and {bv.shape} are not aligned")
    try:
        out2 = np.matmul(a2, b2)
    except ValueError:
        raise DimensionError(f"matmul: batch shapes {av.shape} and {bv.shape} do not broadcast") from None
    out = out2
    if bv.ndim == 1:
        out = out[..., 0]
    if av.ndim == 1:
        out = out[..., 0, :] if bv.ndim > 1 else out[..., 0]

    def vjp(g):
        g2 = g
        if av.ndim == 1 and bv.ndim == 1:
            g2 = np.reshape(g, (1, 1))
        elif av.ndim == 1:
            g2 = np.expand_dims(g, -2)
        elif bv.ndim == 1:
            g2 = np.expand_dims(g, -1)
        ga = np.matmul(g2, np.swapaxes(b2, -1, -2))
        gb = np.matmul(np.swapaxes(a2, -1, -2), g2)
        ga = _unbroadcast(ga, a2.shape).reshape(av.shape)
        gb = _unbroadcast(gb, b2.shape).reshape(bv.shape)
        return ga, gb

    return _emit("matmul", out, (a, b), vjp)


# -- shape ----------------------------------------------------------------

def concat(xs, axis: int = -1):
    vals = [value_of(x) for x in xs]
    try:
        out = np.concatenate(vals, axis=axis)
    except ValueError as exc:
        raise DimensionError(f"concat: {exc}") from None
    ax = axis % out.ndim
    bounds = np.cumsum([v.shape[ax] for v in vals])[:-1]

    def vjp(g):
        return tuple(np.split(g, bounds, axis=ax))

    return _emit("concat", out, tuple(xs), vjp)


def stack(xs, axis: int = 0):
    vals = [value_of(x) for x in xs]
    try:
        out = np.stack(vals, axis=axis)
    except ValueError as exc:
        raise DimensionError(f"stack: {exc}") from None
    ax = axis % out.ndim

    def vjp(g):
        return tuple(np.take(g, i, axis=ax) for i in range(len(vals)))

    return _emit("stack", out, tuple(xs), vjp)


def reshape(x, shape):
    xv = value_of(x)
    try:
        out = xv.reshape(shape)
    except ValueError as exc:
        raise DimensionError(f"reshape: {exc}") from None
    return _emit("reshape", out, (x,), lambda g: (g.reshape(xv.shape),))


def transpose(x, axes=None):
    xv = value_of(x)
    out = np.transpose(xv, axes)
    inv = None if axes is None else np.argsort(axes)
    return _emit("transpose", out, (x,), lambda g: (np.transpose(g, inv),))


def getitem(x, index):
    """Basic or advanced indexing; repeated indices accumulate gradient."""
    xv = value_of(x)
    try:
        out = xv[index]
    except IndexError as exc:
        raise DimensionError(f"getitem: {exc}") from None

    def vjp(g):
        gx = np.zeros_like(xv)
        np.add.at(gx, index, g)
        return (gx,)

    return _emit("getitem", np.array(out, dtype=np.float64), (x,), vjp)


# -- reductions --------------------------------------------------------------

def sum(x, axis=None, keepdims: bool = False):
    xv = value_of(x)
    out = np.sum(xv, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, xv.shape).copy(),)

    return _emit("sum", out, (x,), vjp)


def mean(x, axis=None, keepdims: bool = False):
    xv = value_of(x)
    count = xv.size if axis is None else np.prod([xv.shape[a] for a in np.atleast_1d(axis)])
    if count == 0:
        raise DomainError("mean over an empty axis")
    return scale(sum(x, axis=axis, keepdims=keepdims), 1.0 / count)


def max(x, axis: int = -1, mask=None):
    """Maximum along one axis; gradient goes to the first maximal entry.

    ``mask`` (boolean, broadcastable to ``x``) excludes entries where it is
    False; every reduced slice must keep at least one entry.
    """
    xv = value_of(x)
    if xv.shape[axis] == 0:
        raise DomainError("max over an empty axis")
    xm = xv
    if mask is not None:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), xv.shape)
        if not np.all(mask.any(axis=axis)):
            raise DomainError("max over a fully masked slice")
        xm = np.where(mask, xv, -np.inf)
    idx = np.expand_dims(np.argmax(xm, axis=axis), axis)
    out = np.take_along_axis(xv, idx, axis=axis).squeeze(axis)

    def vjp(g):
        gx = np.zeros_like(xv)
        np.put_along_axis(gx, idx, np.expand_dims(g, axis), axis=axis)
        return (gx,)

    return _emit("max", out, (x,), vjp)


def logsumexp(x, axis: int = -1, keepdims: bool = False, mask=None):
    """Stable log-sum-exp along ``axis``.

    Entries where ``mask`` is False are left out of the sum. Shifting by the
    slice maximum keeps inputs of magnitude 1e6 and beyond from overflowing.
    """
    xv = value_of(x)
    if xv.ndim == 0 or xv.shape[axis] == 0:
        raise DomainError("logsumexp of an empty vector")
    if mask is None:
        mask = np.ones(xv.shape, dtype=bool)
    else:
        mask = np.broadcast_to(np.asarray(mask, dtype=bool), xv.shape)
        if not np.all(mask.any(axis=axis)):
            raise DomainError("logsumexp over an empty (fully masked) slice")
    xm = np.where(mask, xv, -np.inf)
    shift = np.max(xm, axis=axis, keepdims=True)
    e = np.where(mask, np.exp(xm - shift), 0.0)
    total = np.sum(e, axis=axis, keepdims=True)
    out = shift + np.log(total)
    weights = e / total
    if not keepdims:
        out = np.squeeze(out, axis=axis)

    def vjp(g):
        if not keepdims:
            g = np.expand_dims(g, axis)
        return (g * weights,)

    return _emit("logsumexp", out, (x,), vjp)


def softmax(x, axis: int = -1, mask=None):
    xv = value_of(x)
    lse = value_of(logsumexp(xv, axis=axis, keepdims=True, mask=mask))
    y = np.exp(xv - lse)
    if mask is not None:
        y = np.where(np.broadcast_to(mask, xv.shape), y, 0.0)

    def vjp(g):
        return (y * (g - np.sum(g * y, axis=axis, keepdims=True)),)

    return _emit("softmax", y, (x,), vjp)


def l2_normalize(x, axis: int = -1):
    """x / ||x|| along ``axis``; slices with norm below 1e-12 map to zero."""
    xv = value_of(x)
    norm = np.sqrt(np.sum(xv * xv, axis=axis, keepdims=True))
    ok = norm >= NORM_EPS
    safe = np.where(ok, norm, 1.0)
    y = np.where(ok, xv / safe, 0.0)

    def vjp(g):
        proj = np.sum(g * y, axis=axis, keepdims=True)
        return (np.where(ok, (g - y * proj) / safe, 0.0),)

    return _emit("l2_normalize", y, (x,), vjp)


# -- composites ----------------------------------------------------------------

def cosine(u, v, axis: int = -1):
    """Cosine similarity along ``axis``; 0 when either norm is below 1e-12."""
    uv, vv = value_of(u), value_of(v)
    if uv.shape[axis] != vv.shape[axis]:
        raise DimensionError(f"cosine: lengths {uv.shape[axis]} and {vv.shape[axis]} differ")
    return sum(mul(l2_normalize(u, axis), l2_normalize(v, axis)), axis=axis)


def mean_max_pool(h, axis: int = -2, mask=None):
    """Mean plus max over the time axis of an (..., L, D) tensor.

    ``mask`` has the shape of ``h`` without its last dimension and marks the
    valid time steps of each sequence.
    """
    hv = value_of(h)
    if hv.ndim < 1 or hv.shape[axis] == 0:
        raise DomainError("mean_max_pool needs at least one row")
    if mask is None:
        return add(mean(h, axis=axis), max(h, axis=axis))
    m = np.asarray(mask, dtype=np.float64)[..., None]
    counts = m.sum(axis=axis)
    if np.any(counts == 0):
        raise DomainError("mean_max_pool over a sequence with no valid rows")
    masked_mean = mul(sum(mul(h, m), axis=axis), 1.0 / counts)
    return add(masked_mean, max(h, axis=axis, mask=m > 0))


PRIMITIVES = {
    "add": add,
    "sub": sub,
    "mul": mul,
    "matmul": matmul,
    "tanh": tanh,
    "sigmoid": sigmoid,
    "concat": lambda *xs: concat(xs),
    "scale": scale,
}


def primitive_forward(kind: str, *inputs):
    """Dispatch one of the primitive op kinds by name."""
    try:
        fn = PRIMITIVES[kind]
    except KeyError:
        raise DomainError(f"unknown primitive {kind!r}") from None
    return fn(*inputs)
