"""Minimal dense float64 tensor engine with reverse-mode differentiation.

Micrograd-style tape: every op produces a node holding its forward value
and a closure that routes the incoming adjoint to its parents. backward()
topologically sorts the recorded graph and runs the closures once.

Shape discipline is deliberately strict: elementwise ops require equal
shapes, the only broadcasts are scalar scaling and last-axis bias/affine
terms. matmul is 2-D only. Fewer silent bugs beats convenience here.
"""

from __future__ import annotations

import math
from contextlib import contextmanager

import numpy as np

from .errors import InvalidArgumentError, NumericalError, ShapeError

LAYER_NORM_EPS = 1e-5

_GRAD_ENABLED = True


@contextmanager
def no_grad():
    """Disable graph recording inside the block (e.g. teacher forward)."""
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    """A float64 array plus an optional gradient slot and tape linkage."""

    __slots__ = ("data", "grad", "requires_grad", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False):
        self.data = np.asarray(data, dtype=np.float64)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def tracked(self) -> bool:
        """True if gradients must flow to or through this node."""
        return self.requires_grad or bool(self._parents)

    def item(self) -> float:
        if self.data.size != 1:
            raise InvalidArgumentError(f"item() on tensor of shape {self.shape}")
        return float(self.data.reshape(()))

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, tracked={self.tracked})"

    # Operator sugar for the common compositions.
    def __add__(self, other):
        return add(self, other)

    def __sub__(self, other):
        return sub(self, other)

    def __mul__(self, other):
        return mul(self, other)

    def __matmul__(self, other):
        return matmul(self, other)


def constant(data) -> Tensor:
    return Tensor(data, requires_grad=False)


def _node(data: np.ndarray, parents: tuple[Tensor, ...], backward) -> Tensor:
    out = Tensor(data)
    if _GRAD_ENABLED and any(p.tracked for p in parents):
        out._parents = tuple(p for p in parents if p.tracked)
        out._backward = backward
    return out


def _acc(t: Tensor, g: np.ndarray) -> None:
    if t.tracked:
        if t.grad is None:
            t.grad = np.zeros_like(t.data)
        t.grad += g


# ---------------------------------------------------------------------------
# Elementwise and broadcast ops


def add(a: Tensor, b: Tensor) -> Tensor:
    """a + b; shapes must match, or b is a 1-D bias on a's last axis."""
    if a.shape == b.shape:
        def bw(g):
            _acc(a, g)
            _acc(b, g)
        return _node(a.data + b.data, (a, b), bw)
    if b.data.ndim == 1 and a.data.ndim >= 1 and a.shape[-1] == b.shape[0]:
        def bw(g):
            _acc(a, g)
            _acc(b, g.reshape(-1, b.shape[0]).sum(axis=0))
        return _node(a.data + b.data, (a, b), bw)
    raise ShapeError("add", a.shape, b.shape)


def sub(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("sub", a.shape, b.shape)

    def bw(g):
        _acc(a, g)
        _acc(b, -g)

    return _node(a.data - b.data, (a, b), bw)


def mul(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("mul", a.shape, b.shape)

    def bw(g):
        _acc(a, g * b.data)
        _acc(b, g * a.data)

    return _node(a.data * b.data, (a, b), bw)


def div(a: Tensor, b: Tensor) -> Tensor:
    if a.shape != b.shape:
        raise ShapeError("div", a.shape, b.shape)

    def bw(g):
        _acc(a, g / b.data)
        _acc(b, -g * a.data / (b.data**2))

    return _node(a.data / b.data, (a, b), bw)


def scale(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g):
        _acc(a, g * c)

    return _node(a.data * c, (a,), bw)


def add_scalar(a: Tensor, c: float) -> Tensor:
    c = float(c)

    def bw(g):
        _acc(a, g)

    return _node(a.data + c, (a,), bw)


# ---------------------------------------------------------------------------
# Linear algebra


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.data.ndim != 2 or b.data.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError("matmul", a.shape, b.shape)

    def bw(g):
        _acc(a, g @ b.data.T)
        _acc(b, a.data.T @ g)

    return _node(a.data @ b.data, (a, b), bw)


def transpose(a: Tensor) -> Tensor:
    if a.data.ndim != 2:
        raise ShapeError("transpose", a.shape)

    def bw(g):
        _acc(a, g.T)

    return _node(a.data.T.copy(), (a,), bw)


# ---------------------------------------------------------------------------
# Nonlinearities


def relu(a: Tensor) -> Tensor:
    mask = a.data > 0

    def bw(g):
        _acc(a, g * mask)

    return _node(np.where(mask, a.data, 0.0), (a,), bw)


def sigmoid(a: Tensor) -> Tensor:
    s = 1.0 / (1.0 + np.exp(-a.data))

    def bw(g):
        _acc(a, g * s * (1.0 - s))

    return _node(s, (a,), bw)


def exp(a: Tensor) -> Tensor:
    e = np.exp(a.data)

    def bw(g):
        _acc(a, g * e)

    return _node(e, (a,), bw)


def ln(a: Tensor) -> Tensor:
    if np.any(a.data <= 0):
        raise NumericalError("ln: non-positive input")

    def bw(g):
        _acc(a, g / a.data)

    return _node(np.log(a.data), (a,), bw)


def softmax_last(a: Tensor) -> Tensor:
    """Softmax over the last axis. NaN input is a numerical failure."""
    if np.any(np.isnan(a.data)):
        raise NumericalError("softmax: NaN in input")
    shifted = a.data - a.data.max(axis=-1, keepdims=True)
    e = np.exp(shifted)
    s = e / e.sum(axis=-1, keepdims=True)

    def bw(g):
        dot = (g * s).sum(axis=-1, keepdims=True)
        _acc(a, s * (g - dot))

    return _node(s, (a,), bw)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = LAYER_NORM_EPS) -> Tensor:
    """Normalize over the last axis, then apply the (gamma, beta) affine."""
    d = x.shape[-1]
    if gamma.shape != (d,) or beta.shape != (d,):
        raise ShapeError("layer_norm", x.shape, gamma.shape, beta.shape)
    mu = x.data.mean(axis=-1, keepdims=True)
    centered = x.data - mu
    var = (centered**2).mean(axis=-1, keepdims=True)
    inv = 1.0 / np.sqrt(var + eps)
    xhat = centered * inv

    def bw(g):
        _acc(gamma, (g * xhat).reshape(-1, d).sum(axis=0))
        _acc(beta, g.reshape(-1, d).sum(axis=0))
        dxhat = g * gamma.data
        dx = inv * (
            dxhat
            - dxhat.mean(axis=-1, keepdims=True)
            - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True)
        )
        _acc(x, dx)

    return _node(gamma.data * xhat + beta.data, (x, gamma, beta), bw)


# ---------------------------------------------------------------------------
# Reductions and losses


def sum_all(a: Tensor) -> Tensor:
    def bw(g):
        _acc(a, np.full(a.shape, float(g)))

    return _node(np.asarray(a.data.sum()), (a,), bw)


def mean(a: Tensor) -> Tensor:
    n = a.data.size

    def bw(g):
        _acc(a, np.full(a.shape, float(g) / n))

    return _node(np.asarray(a.data.mean()), (a,), bw)


def mse(a: Tensor, b: Tensor) -> Tensor:
    """Mean over all elements of the squared difference."""
    if a.shape != b.shape:
        raise ShapeError("mse", a.shape, b.shape)
    diff = a.data - b.data
    n = diff.size

    def bw(g):
        d = (2.0 * float(g) / n) * diff
        _acc(a, d)
        _acc(b, -d)

    return _node(np.asarray((diff**2).mean()), (a, b), bw)


def cosine_rows(a: Tensor, b: Tensor, eps: float = 1e-12) -> Tensor:
    """Per-row cosine similarity of two 2-D tensors; output shape (n,)."""
    if a.data.ndim != 2 or a.shape != b.shape:
        raise ShapeError("cosine_rows", a.shape, b.shape)
    na = np.sqrt((a.data**2).sum(axis=1))
    nb = np.sqrt((b.data**2).sum(axis=1))
    dot = (a.data * b.data).sum(axis=1)
    denom = na * nb + eps
    c = dot / denom

    def bw(g):
        na_s = np.maximum(na, eps)
        nb_s = np.maximum(nb, eps)
        gcol = (g / denom)[:, None]
        _acc(a, gcol * (b.data - (c * nb / na_s)[:, None] * a.data))
        _acc(b, gcol * (a.data - (c * na / nb_s)[:, None] * b.data))

    return _node(c, (a, b), bw)


# ---------------------------------------------------------------------------
# Structure ops


def concat_last(parts: list[Tensor]) -> Tensor:
    if not parts:
        raise InvalidArgumentError("concat_last of zero tensors")
    lead = parts[0].shape[:-1]
    for p in parts:
        if p.shape[:-1] != lead:
            raise ShapeError("concat_last", *[p.shape for p in parts])
    widths = [p.shape[-1] for p in parts]
    offsets = np.cumsum([0] + widths)

    def bw(g):
        for p, lo, hi in zip(parts, offsets[:-1], offsets[1:]):
            _acc(p, g[..., lo:hi])

    return _node(np.concatenate([p.data for p in parts], axis=-1), tuple(parts), bw)


def gather_rows(x: Tensor, idx) -> Tensor:
    """Select rows of a 2-D tensor (masked-select over row indices)."""
    if x.data.ndim != 2:
        raise ShapeError("gather_rows", x.shape)
    idx = np.asarray(idx, dtype=np.intp)

    def bw(g):
        if x.tracked:
            gx = np.zeros_like(x.data)
            np.add.at(gx, idx, g)
            _acc(x, gx)

    return _node(x.data[idx], (x,), bw)


def reshape(x: Tensor, shape: tuple[int, ...]) -> Tensor:
    def bw(g):
        _acc(x, g.reshape(x.shape))

    return _node(x.data.reshape(shape), (x,), bw)


def slice_last(x: Tensor, start: int, stop: int) -> Tensor:
    if not (0 <= start < stop <= x.shape[-1]):
        raise ShapeError("slice_last", x.shape, (start, stop))

    def bw(g):
        gx = np.zeros_like(x.data)
        gx[..., start:stop] = g
        _acc(x, gx)

    return _node(x.data[..., start:stop].copy(), (x,), bw)


def tile_rows(v: Tensor, n: int) -> Tensor:
    """Repeat a 1-D tensor as n identical rows."""
    if v.data.ndim != 1:
        raise ShapeError("tile_rows", v.shape)

    def bw(g):
        _acc(v, g.sum(axis=0))

    return _node(np.tile(v.data, (n, 1)), (v,), bw)


# ---------------------------------------------------------------------------
# Backward pass


def backward(loss: Tensor) -> None:
    """Reverse-accumulate d(loss)/d(node) into .grad over the whole tape."""
    if loss.data.size != 1:
        raise InvalidArgumentError(f"backward needs a scalar loss, got shape {loss.shape}")
    if not np.isfinite(loss.data).all():
        raise NumericalError("loss is not finite")
    topo: list[Tensor] = []
    visited: set[int] = set()
    stack: list[tuple[Tensor, bool]] = [(loss, False)]
    while stack:
        node, expanded = stack.pop()
        if expanded:
            topo.append(node)
            continue
        if id(node) in visited:
            continue
        visited.add(id(node))
        stack.append((node, True))
        for parent in node._parents:
            if id(parent) not in visited:
                stack.append((parent, False))
    loss.grad = np.ones_like(loss.data)
    for node in reversed(topo):
        if node._backward is not None:
            node._backward(node.grad)


# ---------------------------------------------------------------------------
# Parameters and optimization


class ParameterSet:
    """Ordered name -> Tensor map with parallel gradient slots."""

    def __init__(self):
        self._params: dict[str, Tensor] = {}

    def add(self, name: str, data: np.ndarray) -> Tensor:
        if name in self._params:
            raise InvalidArgumentError(f"duplicate parameter {name!r}")
        t = Tensor(np.array(data, dtype=np.float64), requires_grad=True)
        self._params[name] = t
        return t

    def __getitem__(self, name: str) -> Tensor:
        return self._params[name]

    def __contains__(self, name: str) -> bool:
        return name in self._params

    def __len__(self) -> int:
        return len(self._params)

    def names(self) -> list[str]:
        return list(self._params)

    def items(self):
        return self._params.items()

    def n_scalars(self) -> int:
        return sum(t.data.size for t in self._params.values())

    def zero_grads(self) -> None:
        for t in self._params.values():
            t.grad = None

    def grads(self) -> dict[str, np.ndarray]:
        """Gradient per parameter; parameters the loss never reached get zeros."""
        return {
            name: (t.grad if t.grad is not None else np.zeros_like(t.data))
            for name, t in self._params.items()
        }

    def copy(self, prefixes: tuple[str, ...] | None = None) -> "ParameterSet":
        """Deep copy, optionally restricted to names matching any prefix."""
        out = ParameterSet()
        for name, t in self._params.items():
            if prefixes is None or name.startswith(prefixes):
                out.add(name, t.data.copy())
        return out

    def load_values(self, other: "ParameterSet") -> None:
        """Overwrite values for every name present in `other`."""
        for name, t in other.items():
            if name not in self._params:
                raise InvalidArgumentError(f"unknown parameter {name!r}")
            if self._params[name].shape != t.shape:
                raise ShapeError("load_values", self._params[name].shape, t.shape)
            self._params[name].data = t.data.copy()


def global_norm(grads: dict[str, np.ndarray]) -> float:
    total = 0.0
    for g in grads.values():
        total += float((g**2).sum())
    return math.sqrt(total)


def clip_global_norm(grads: dict[str, np.ndarray], max_norm: float) -> float:
    """Scale grads in place so their global norm is at most max_norm."""
    norm = global_norm(grads)
    if norm > max_norm and norm > 0:
        factor = max_norm / norm
        for g in grads.values():
            g *= factor
    return norm


class AdamState:
    """First/second moment accumulators plus the shared step counter."""

    def __init__(self):
        self.t = 0
        self.m: dict[str, np.ndarray] = {}
        self.v: dict[str, np.ndarray] = {}


def adam_step(
    params: ParameterSet,
    grads: dict[str, np.ndarray],
    state: AdamState,
    lr: float,
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
    names: list[str] | None = None,
) -> None:
    """One Adam update with bias correction, applied in place.

    `names` restricts the update to a parameter group (grads for other
    names are ignored); moments are keyed per parameter so groups can use
    different learning rates.
    """
    state.t += 1
    t = state.t
    for name in names if names is not None else params.names():
        g = grads[name]
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient for {name!r}")
        if name not in state.m:
            state.m[name] = np.zeros_like(g)
            state.v[name] = np.zeros_like(g)
        m, v = state.m[name], state.v[name]
        m *= beta1
        m += (1 - beta1) * g
        v *= beta2
        v += (1 - beta2) * g * g
        mhat = m / (1 - beta1**t)
        vhat = v / (1 - beta2**t)
        params[name].data -= lr * mhat / (np.sqrt(vhat) + eps)


# ---------------------------------------------------------------------------
# Finite-difference verification


def grad_check(
    f,
    params: ParameterSet,
    eps: float = 1e-5,
    n_coords: int = 200,
    seed: int = 0,
) -> float:
    """Max relative error between analytic and central-difference gradients.

    f is a zero-argument callable returning the scalar loss Tensor; it must
    read parameter values from `params` on every call. All coordinates are
    checked when the model is small, otherwise a seeded subsample of
    n_coords coordinates.
    """
    if eps <= 0:
        raise InvalidArgumentError("eps must be > 0")
    params.zero_grads()
    loss = f()
    backward(loss)
    analytic = params.grads()

    sizes = [(name, params[name].data.size) for name in params.names()]
    total = sum(s for _, s in sizes)
    if total > n_coords:
        picks = np.sort(np.random.default_rng(seed).choice(total, size=n_coords, replace=False))
    else:
        picks = np.arange(total)

    def eval_f() -> float:
        with no_grad():
            value = f().item()
        if not math.isfinite(value):
            raise NumericalError("non-finite loss during grad_check")
        return value

    max_rel = 0.0
    bounds = np.cumsum([0] + [s for _, s in sizes])
    for flat in picks:
        slot = int(np.searchsorted(bounds, flat, side="right") - 1)
        name = sizes[slot][0]
        i = int(flat - bounds[slot])
        data = params[name].data
        orig = data.flat[i]
        data.flat[i] = orig + eps
        f_plus = eval_f()
        data.flat[i] = orig - eps
        f_minus = eval_f()
        data.flat[i] = orig
        numeric = (f_plus - f_minus) / (2.0 * eps)
        a = float(analytic[name].flat[i])
        rel = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
        max_rel = max(max_rel, rel)
    return max_rel
