"""A small reverse-mode automatic differentiation tape over numpy arrays.

Values are ``numpy.ndarray`` objects; every primitive records its inputs and
a vector-Jacobian product closure on the tape that created it. The set of
primitives is exactly what the parameterization, the training loss and the
Lipschitz estimator need, including a dense linear solve.

Example:
    >>> from lbdn import autodiff as ad
    >>> tape = ad.Tape()
    >>> w = tape.var([[3.0]])
    >>> loss = 0.5 * ad.sum(ad.square(w @ np.array([[2.0]])))
    >>> tape.gradient(loss, [w])[0]
    array([[12.]])
"""

import numpy as np
import scipy.linalg

from .exceptions import GradientError


class Var:
    __slots__ = ("value", "tape", "index", "op", "parents", "vjp")
    __array_priority__ = 1000

    def __init__(self, value, tape, op="leaf", parents=(), vjp=None):
        self.value = value
        self.tape = tape
        self.op = op
        self.parents = parents
        self.vjp = vjp
        self.index = tape._record(self)

    @property
    def shape(self):
        return self.value.shape

    @property
    def ndim(self):
        return self.value.ndim

    @property
    def T(self):
        return transpose(self)

    def __add__(self, other):
        return add(self, other)

    __radd__ = __add__

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    __rmul__ = __mul__

    def __truediv__(self, other):
        return div(self, other)

    def __rtruediv__(self, other):
        return div(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __matmul__(self, other):
        return matmul(self, other)

    def __rmatmul__(self, other):
        return matmul(other, self)

    def __repr__(self):
        return f"Var(op={self.op!r}, shape={self.value.shape})"


class Tape:
    """Append-only record of primitive operations in topological order."""

    def __init__(self):
        self.nodes = []

    def _record(self, node):
        self.nodes.append(node)
        return len(self.nodes) - 1

    def var(self, value):
        return Var(np.array(value, dtype=float), self)

    def backward(self, out, seed=None):
        """Accumulate adjoints of ``out`` into every node; returns the adjoint list."""
        if out.tape is not self:
            raise ValueError("output was recorded on a different tape")
        adj = [None] * len(self.nodes)
        adj[out.index] = np.ones_like(out.value) if seed is None else np.asarray(seed, dtype=float)
        for i in range(out.index, -1, -1):
            g = adj[i]
            node = self.nodes[i]
            if g is None or not node.parents:
                continue
            for j, (parent, pg) in enumerate(zip(node.parents, node.vjp(g))):
                if parent is None or pg is None:
                    continue
                if not np.all(np.isfinite(pg)):
                    raise GradientError(
                        f"non-finite adjoint from node #{i} ({node.op}) into its input {j} (node #{parent.index})"
                    )
                k = parent.index
                adj[k] = pg if adj[k] is None else adj[k] + pg
        return adj

    def gradient(self, out, wrt):
        adj = self.backward(out)
        return [np.zeros_like(v.value) if adj[v.index] is None else adj[v.index] for v in wrt]


def _tape_of(*args):
    for a in args:
        if isinstance(a, Var):
            return a.tape
    return None


def _value(a):
    return a.value if isinstance(a, Var) else np.asarray(a, dtype=float)


def _unbroadcast(g, shape):
    if g.shape == shape:
        return g
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for ax, n in enumerate(shape):
        if n == 1 and g.shape[ax] != 1:
            g = g.sum(axis=ax, keepdims=True)
    return g


def _make(op, value, inputs, vjp):
    tape = _tape_of(*inputs)
    if tape is None:
        return value
    parents = tuple(a if isinstance(a, Var) else None for a in inputs)
    return Var(value, tape, op, parents, vjp)


def add(a, b):
    av, bv = _value(a), _value(b)
    return _make("add", av + bv, (a, b), lambda g: (_unbroadcast(g, av.shape), _unbroadcast(g, bv.shape)))


def sub(a, b):
    av, bv = _value(a), _value(b)
    return _make("sub", av - bv, (a, b), lambda g: (_unbroadcast(g, av.shape), -_unbroadcast(g, bv.shape)))


def mul(a, b):
    av, bv = _value(a), _value(b)
    return _make(
        "mul", av * bv, (a, b),
        lambda g: (_unbroadcast(g * bv, av.shape), _unbroadcast(g * av, bv.shape)),
    )


def div(a, b):
    av, bv = _value(a), _value(b)
    out = av / bv
    return _make(
        "div", out, (a, b),
        lambda g: (_unbroadcast(g / bv, av.shape), _unbroadcast(-g * out / bv, bv.shape)),
    )


def matmul(a, b):
    av, bv = _value(a), _value(b)
    return _make("matmul", av @ bv, (a, b), lambda g: (g @ bv.T, av.T @ g))


def transpose(a):
    return _make("transpose", _value(a).T, (a,), lambda g: (g.T,))


def exp(a):
    out = np.exp(_value(a))
    return _make("exp", out, (a,), lambda g: (g * out,))


def square(a):
    av = _value(a)
    return _make("square", av * av, (a,), lambda g: (2.0 * g * av,))


def sqrt(a):
    out = np.sqrt(_value(a))
    return _make("sqrt", out, (a,), lambda g: (g / (2.0 * out),))


def relu(a):
    av = _value(a)
    mask = av > 0  # subgradient 0 at the kink
    return _make("relu", np.where(mask, av, 0.0), (a,), lambda g: (g * mask,))


def tanh(a):
    out = np.tanh(_value(a))
    return _make("tanh", out, (a,), lambda g: (g * (1.0 - out * out),))


def identity(a):
    return a


def sum(a, axis=None, keepdims=False):  # noqa: A001 - mirrors numpy naming
    av = _value(a)
    out = np.sum(av, axis=axis, keepdims=keepdims)

    def vjp(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        return (np.broadcast_to(g, av.shape).copy(),)

    return _make("sum", out, (a,), vjp)


def mean(a):
    return sum(a) / _value(a).size


def frobenius(a):
    """``||a||_F``; zero adjoint at the origin."""
    av = _value(a)
    nrm = float(np.linalg.norm(av))
    return _make("frobenius", np.array(nrm), (a,), lambda g: (g * av / nrm if nrm > 0 else np.zeros_like(av),))


def row_norms(a, floor=0.0):
    """Euclidean norm of each row, with zero adjoint for zero rows."""
    av = _value(a)
    out = np.sqrt(np.sum(av * av, axis=-1))

    def vjp(g):
        safe = np.where(out > floor, out, np.inf)
        return (g[..., None] * av / safe[..., None],)

    return _make("row_norms", out, (a,), vjp)


def solve(A, B):
    """``C = A^{-1} B``; adjoints ``B_bar = A^{-T} C_bar`` and ``A_bar = -B_bar C^T``."""
    Av, Bv = _value(A), _value(B)
    lu = scipy.linalg.lu_factor(Av, check_finite=False)
    C = scipy.linalg.lu_solve(lu, Bv, check_finite=False)

    def vjp(g):
        gB = scipy.linalg.lu_solve(lu, g, trans=1, check_finite=False)
        gA = -(gB @ C.T) if C.ndim == 2 else -np.outer(gB, C)
        return gA, gB

    return _make("solve", C, (A, B), vjp)


ACTIVATIONS = {"relu": relu, "tanh": tanh, "identity": identity}


def activation(name):
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}") from None


def value(a):
    """Underlying array of a Var (or the array itself)."""
    return _value(a)
