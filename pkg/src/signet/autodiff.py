"""Minimal reverse-mode automatic differentiation over float64 numpy arrays.

A :class:`Tensor` wraps a contiguous ``float64`` buffer. Kernels executed while a
:class:`GradientTape` is active (``with GradientTape() as tape:``) are recorded in
execution order; :meth:`GradientTape.gradient` replays them in reverse, which is a
valid reverse topological order because every record is appended after its inputs
exist. Without an active tape kernels are plain forward computations.

Every kernel checks its output for NaN/Inf and raises
:class:`~signet.errors.NumericHealthError` naming the kernel.
"""

from __future__ import annotations

import threading
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import NumericHealthError, ShapeError

_local = threading.local()


def _tape_stack() -> list[GradientTape]:
    stack = getattr(_local, "stack", None)
    if stack is None:
        stack = _local.stack = []
    return stack


def _active_tape() -> GradientTape | None:
    stack = _tape_stack()
    return stack[-1] if stack else None


class Tensor:
    """Dense float64 array that can participate in a gradient tape."""

    __slots__ = ("value", "requires_grad", "name")

    def __init__(self, value, requires_grad: bool = False, name: str | None = None):
        self.value = np.ascontiguousarray(np.asarray(value, dtype=np.float64))
        self.requires_grad = requires_grad
        self.name = name

    @property
    def shape(self) -> tuple[int, ...]:
        return self.value.shape

    @property
    def ndim(self) -> int:
        return self.value.ndim

    @property
    def size(self) -> int:
        return self.value.size

    def numpy(self) -> np.ndarray:
        return self.value

    def item(self) -> float:
        return float(self.value.reshape(-1)[0]) if self.value.size == 1 else float(self.value)

    def __len__(self) -> int:
        return self.value.shape[0]

    def __repr__(self) -> str:
        label = f" name={self.name!r}" if self.name else ""
        return f"Tensor(shape={self.shape}{label}, requires_grad={self.requires_grad})"

    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __neg__(self):
        return scale(self, -1.0)

    def __mul__(self, other):
        if isinstance(other, (int, float)):
            return scale(self, float(other))
        return hadamard(self, other)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __matmul__(self, other):
        return matmul(self, other)


def as_tensor(x) -> Tensor:
    return x if isinstance(x, Tensor) else Tensor(x)


class GradientTape:
    """Ordered record of executed kernels with their backward rules.

    ``parameters`` is an optional registry (name -> Tensor) for callers that
    want the tape to own the list of trainable leaves.
    """

    def __init__(self):
        self.records: list[tuple[Tensor, tuple[Tensor, ...], Callable]] = []
        self.parameters: dict[str, Tensor] = {}

    def __enter__(self) -> GradientTape:
        _tape_stack().append(self)
        return self

    def __exit__(self, *exc) -> None:
        stack = _tape_stack()
        if stack and stack[-1] is self:
            stack.pop()

    def watch(self, name: str, tensor: Tensor) -> Tensor:
        tensor.requires_grad = True
        self.parameters[name] = tensor
        return tensor

    def record(self, out: Tensor, parents: tuple[Tensor, ...], backward: Callable) -> None:
        self.records.append((out, parents, backward))

    def gradient(self, target: Tensor, sources=None):
        """Gradients of scalar ``target`` w.r.t. leaf ``sources``.

        ``sources`` may be a mapping (returns a dict with the same keys), a
        sequence (returns a list) or ``None`` (uses the parameter registry).
        Leaves that do not influence the target get zero gradients.
        """
        if target.size != 1:
            raise ShapeError(f"gradient target must be scalar, got shape {target.shape}")
        if sources is None:
            sources = self.parameters
        if isinstance(sources, Mapping):
            keys, leaves = list(sources.keys()), list(sources.values())
        else:
            keys, leaves = None, list(sources)
        keep = {id(t) for t in leaves}

        grads: dict[int, np.ndarray] = {id(target): np.ones_like(target.value)}
        for out, parents, backward in reversed(self.records):
            g = grads.get(id(out))
            if g is None:
                continue
            if id(out) not in keep:
                # release intermediate gradients as soon as they are consumed
                del grads[id(out)]
            for parent, pg in zip(parents, backward(g)):
                if pg is None or not parent.requires_grad:
                    continue
                key = id(parent)
                if key in grads:
                    grads[key] = grads[key] + pg
                else:
                    grads[key] = pg

        result = []
        for leaf in leaves:
            g = grads.get(id(leaf))
            result.append(np.zeros_like(leaf.value) if g is None else np.array(g, dtype=np.float64))
        for leaf, g in zip(leaves, result):
            if not np.all(np.isfinite(g)):
                raise NumericHealthError(f"non-finite gradient for {leaf.name or leaf!r}")
        if keys is None:
            return result
        return dict(zip(keys, result))


def _check(value: np.ndarray, op: str) -> np.ndarray:
    if not np.all(np.isfinite(value)):
        raise NumericHealthError(f"kernel {op!r} produced a non-finite value")
    return value


def _emit(value: np.ndarray, parents: tuple[Tensor, ...], backward: Callable, op: str) -> Tensor:
    out = Tensor(_check(value, op))
    tape = _active_tape()
    if tape is not None and any(p.requires_grad for p in parents):
        out.requires_grad = True
        tape.record(out, parents, backward)
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    while g.ndim > len(shape):
        g = g.sum(axis=0)
    for axis, size in enumerate(shape):
        if size == 1 and g.shape[axis] != 1:
            g = g.sum(axis=axis, keepdims=True)
    return g


# --- elementwise arithmetic -------------------------------------------------


def add(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.value + b.value
    except ValueError:
        raise ShapeError(f"add: cannot broadcast {a.shape} with {b.shape}") from None
    return _emit(
        value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), _unbroadcast(g, b.shape)),
        "add",
    )


def sub(a, b) -> Tensor:
    a, b = as_tensor(a), as_tensor(b)
    try:
        value = a.value - b.value
    except ValueError:
        raise ShapeError(f"sub: cannot broadcast {a.shape} with {b.shape}") from None
    return _emit(
        value,
        (a, b),
        lambda g: (_unbroadcast(g, a.shape), -_unbroadcast(g, b.shape)),
        "sub",
    )


def hadamard(a, b) -> Tensor:
    """Elementwise product.

    Shapes must be identical, or one operand must be a vector whose length
    equals the other's last dimension.
    """
    a, b = as_tensor(a), as_tensor(b)
    ok = (
        a.shape == b.shape
        or (b.ndim == 1 and a.ndim >= 1 and a.shape[-1] == b.shape[0])
        or (a.ndim == 1 and b.ndim >= 1 and b.shape[-1] == a.shape[0])
    )
    if not ok:
        raise ShapeError(f"hadamard: incompatible shapes {a.shape} and {b.shape}")
    return _emit(
        a.value * b.value,
        (a, b),
        lambda g: (_unbroadcast(g * b.value, a.shape), _unbroadcast(g * a.value, b.shape)),
        "hadamard",
    )


def scale(a: Tensor, c: float) -> Tensor:
    return _emit(a.value * c, (a,), lambda g: (g * c,), "scale")


def scale_rows(a: Tensor, coef: np.ndarray) -> Tensor:
    """Multiply row ``i`` of ``a`` by the constant ``coef[i]``."""
    coef = np.asarray(coef, dtype=np.float64)
    if coef.shape != (a.shape[0],):
        raise ShapeError(f"scale_rows: coefficient shape {coef.shape} for tensor {a.shape}")
    c = coef.reshape((-1,) + (1,) * (a.ndim - 1))
    return _emit(a.value * c, (a,), lambda g: (g * c,), "scale_rows")


# --- linear algebra ---------------------------------------------------------


def matmul(a: Tensor, b: Tensor) -> Tensor:
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ShapeError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return _emit(
        a.value @ b.value,
        (a, b),
        lambda g: (g @ b.value.T, a.value.T @ g),
        "matmul",
    )


def einsum(subscripts: str, a: Tensor, b: Tensor) -> Tensor:
    """Two-operand einsum; every index of an operand must appear in the output
    or in the other operand so the backward contraction is well defined."""
    lhs, out = subscripts.replace(" ", "").split("->")
    sa, sb = lhs.split(",")
    for mine, other in ((sa, sb), (sb, sa)):
        if any(ch not in out and ch not in other for ch in mine):
            raise ShapeError(f"einsum: unsupported subscripts {subscripts!r}")
    try:
        value = np.einsum(subscripts, a.value, b.value)
    except ValueError as exc:
        raise ShapeError(f"einsum {subscripts!r}: {exc} ({a.shape}, {b.shape})") from None

    def backward(g):
        ga = np.einsum(f"{out},{sb}->{sa}", g, b.value)
        gb = np.einsum(f"{out},{sa}->{sb}", g, a.value)
        return ga, gb

    return _emit(value, (a, b), backward, "einsum")


# --- indexing ---------------------------------------------------------------


def take(a: Tensor, index) -> Tensor:
    """Select rows ``a[index]`` along axis 0."""
    index = np.asarray(index, dtype=np.int64)

    def backward(g):
        full = np.zeros_like(a.value)
        np.add.at(full, index, g)
        return (full,)

    return _emit(a.value[index], (a,), backward, "take")


def scatter_add(a: Tensor, index, n: int) -> Tensor:
    """Sum rows of ``a`` into ``n`` output rows: ``out[index[e]] += a[e]``."""
    index = np.asarray(index, dtype=np.int64)
    if index.shape != (a.shape[0],):
        raise ShapeError(f"scatter_add: index shape {index.shape} for tensor {a.shape}")
    out = np.zeros((n,) + a.shape[1:])
    np.add.at(out, index, a.value)
    return _emit(out, (a,), lambda g: (g[index],), "scatter_add")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = tuple(tensors)
    if len(tensors) == 1:
        return tensors[0]
    try:
        value = np.concatenate([t.value for t in tensors], axis=axis)
    except ValueError:
        raise ShapeError(f"concat: incompatible shapes {[t.shape for t in tensors]}") from None
    sizes = np.cumsum([t.shape[axis] for t in tensors])[:-1]
    return _emit(value, tensors, lambda g: tuple(np.split(g, sizes, axis=axis)), "concat")


# --- reductions -------------------------------------------------------------


def reduce_sum(a: Tensor, axis: int | None = None) -> Tensor:
    value = a.value.sum(axis=axis)

    def backward(g):
        if axis is None:
            return (np.broadcast_to(g, a.shape).copy(),)
        return (np.broadcast_to(np.expand_dims(g, axis), a.shape).copy(),)

    return _emit(np.asarray(value), (a,), backward, "sum")


def reduce_mean(a: Tensor) -> Tensor:
    if a.size == 0:
        raise ShapeError("mean of an empty tensor")
    n = a.size
    return _emit(np.asarray(a.value.mean()), (a,), lambda g: (np.full(a.shape, g / n),), "mean")


def sum_squares(a: Tensor) -> Tensor:
    return _emit(np.asarray(np.sum(a.value * a.value)), (a,), lambda g: (2.0 * g * a.value,), "sum_squares")


def l2norm_rows(a: Tensor) -> Tensor:
    """Euclidean norm of each row; the subgradient at a zero row is zero."""
    norm = np.sqrt(np.sum(a.value * a.value, axis=1))

    def backward(g):
        safe = np.where(norm > 0, norm, 1.0)
        unit = np.where((norm > 0)[:, None], a.value / safe[:, None], 0.0)
        return (g[:, None] * unit,)

    return _emit(norm, (a,), backward, "l2norm_rows")


# --- activations ------------------------------------------------------------


def _stable_sigmoid(x: np.ndarray) -> np.ndarray:
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def sigmoid(a: Tensor) -> Tensor:
    s = _stable_sigmoid(a.value)
    return _emit(s, (a,), lambda g: (g * s * (1.0 - s),), "sigmoid")


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    return _emit(np.where(mask, a.value, 0.0), (a,), lambda g: (g * mask,), "relu")


def identity(a: Tensor) -> Tensor:
    return a


ACTIVATIONS: dict[str, Callable[[Tensor], Tensor]] = {
    "relu": relu,
    "sigmoid": sigmoid,
    "identity": identity,
    "linear": identity,
}


def activation(name: str) -> Callable[[Tensor], Tensor]:
    try:
        return ACTIVATIONS[name]
    except KeyError:
        raise ValueError(f"unknown activation {name!r}; choose from {sorted(ACTIVATIONS)}") from None


# --- losses -----------------------------------------------------------------

PROB_CLAMP = 1e-12


def _labels(labels, n: int) -> np.ndarray:
    y = np.asarray(labels, dtype=np.float64).reshape(-1)
    if y.shape[0] != n:
        raise ShapeError(f"labels length {y.shape[0]} does not match {n} scores")
    return y


def bce_loss(probs: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy of probabilities, clamped to [1e-12, 1-1e-12]."""
    if probs.size == 0:
        raise ValueError("bce_loss on an empty batch")
    p = np.clip(probs.value.reshape(-1), PROB_CLAMP, 1.0 - PROB_CLAMP)
    y = _labels(labels, p.shape[0])
    n = p.shape[0]
    value = -np.mean(y * np.log(p) + (1.0 - y) * np.log1p(-p))

    def backward(g):
        return ((g * (-y / p + (1.0 - y) / (1.0 - p)) / n).reshape(probs.shape),)

    return _emit(np.asarray(value), (probs,), backward, "bce_loss")


def bce_with_logits(logits: Tensor, labels) -> Tensor:
    """Mean binary cross-entropy on raw logits (the numerically stable path)."""
    if logits.size == 0:
        raise ValueError("bce_with_logits on an empty batch")
    x = logits.value.reshape(-1)
    y = _labels(labels, x.shape[0])
    n = x.shape[0]
    value = np.mean(np.maximum(x, 0.0) - x * y + np.log1p(np.exp(-np.abs(x))))

    def backward(g):
        return ((g * (_stable_sigmoid(x) - y) / n).reshape(logits.shape),)

    return _emit(np.asarray(value), (logits,), backward, "bce_with_logits")


# --- verification -----------------------------------------------------------


def grad_check(
    f: Callable[[dict[str, Tensor]], Tensor],
    params: Mapping[str, np.ndarray],
    h: float = 1e-5,
) -> float:
    """Max relative error between tape gradients and central differences.

    ``f`` maps a dict of parameter tensors to a scalar tensor. The relative
    error of one coordinate is ``|a - b| / max(|a|, |b|, 1e-8)``.
    """
    base = {k: np.array(v, dtype=np.float64) for k, v in params.items()}
    leaves = {k: Tensor(v.copy(), requires_grad=True, name=k) for k, v in base.items()}
    with GradientTape() as tape:
        loss = f(leaves)
    analytic = tape.gradient(loss, leaves)

    worst = 0.0
    for name, value in base.items():
        flat = value.reshape(-1)
        for i in range(flat.size):
            probe = {k: Tensor(v) for k, v in base.items()}
            plus = flat.copy()
            plus[i] += h
            probe[name] = Tensor(plus.reshape(value.shape))
            f_plus = f(probe).item()
            minus = flat.copy()
            minus[i] -= h
            probe[name] = Tensor(minus.reshape(value.shape))
            f_minus = f(probe).item()
            numeric = (f_plus - f_minus) / (2.0 * h)
            a = float(analytic[name].reshape(-1)[i])
            err = abs(a - numeric) / max(abs(a), abs(numeric), 1e-8)
            worst = max(worst, err)
    return worst
