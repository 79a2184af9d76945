"""Reverse-mode automatic differentiation over dense 64-bit arrays.

A ``Tape`` records the primitive operations of one forward pass; walking the
records in reverse propagates adjoints back to named leaf parameters. Only the
primitives the models in this package need are provided: affine maps,
elementwise activations, row norms and guarded unit vectors, segment sums for
message aggregation, gathers, concatenation, and scalar reductions.

Every primitive takes an optional ``tape`` argument. With ``tape=None`` the
primitive runs as a plain numpy function and returns an ``ndarray`` — this is
the inference fast path. With a tape it accepts/returns ``Value`` wrappers and
records the backward rule.

Usage::

    tape = Tape()
    w = tape.leaf("w", w_array)
    y = matmul(x_array, w, tape=tape)       # plain arrays are constants
    loss = mean_all(square(y, tape), tape)
    grads = backward(tape, np.ones((1, 1)))
    grads["w"]                              # dloss/dw
"""
from __future__ import annotations

import numpy as np

__all__ = [
    "Tape",
    "Value",
    "backward",
    "matmul",
    "add",
    "sub",
    "neg",
    "add_bias",
    "mul",
    "col_scale",
    "scalar_scale",
    "scale",
    "affine",
    "silu",
    "tanh_act",
    "relu",
    "rownorm",
    "unit_rows",
    "rowdot",
    "perp2d",
    "concat_cols",
    "concat_rows",
    "gather_rows",
    "segment_sum",
    "square",
    "sum_all",
    "mean_all",
]


class Value:
    """A tape-tracked array. ``data`` is always a float64 ndarray."""

    __slots__ = ("data", "slot")

    def __init__(self, data: np.ndarray, slot: int):
        self.data = data
        self.slot = slot

    @property
    def shape(self):
        return self.data.shape


class Tape:
    """Recorded primitive operations of one forward pass.

    Replaying the records backward yields a gradient for every registered
    leaf; leaves untouched by the pass get a zero gradient.
    """

    def __init__(self):
        self._records: list[tuple[int, object]] = []  # (out_slot, backward fn)
        self._n_slots = 0
        self._leaves: dict[str, tuple[int, tuple[int, ...]]] = {}
        self._last: Value | None = None
        self._consumed = False

    def new_value(self, data: np.ndarray) -> Value:
        v = Value(data, self._n_slots)
        self._n_slots += 1
        self._last = v
        return v

    def record(self, out: Value, bwd) -> None:
        self._records.append((out.slot, bwd))

    def leaf(self, name: str, array: np.ndarray) -> Value:
        """Register ``array`` as a differentiable leaf named ``name``."""
        if name in self._leaves:
            raise ValueError(f"leaf {name!r} registered twice")
        array = np.asarray(array, dtype=np.float64)
        v = self.new_value(array)
        self._leaves[name] = (v.slot, array.shape)
        return v

    def get_or_leaf(self, name: str, array: np.ndarray) -> Value:
        """Like leaf(), but returns the existing handle when ``name`` is
        already registered — lets one parameter feed many forward calls."""
        if name in self._leaves:
            slot, shape = self._leaves[name]
            if shape != np.asarray(array).shape:
                raise ValueError(f"leaf {name!r} re-bound with different shape")
            return Value(np.asarray(array, dtype=np.float64), slot)
        return self.leaf(name, array)

    @property
    def output(self) -> Value:
        if self._last is None:
            raise ValueError("empty tape has no output")
        return self._last


def backward(
    tape: Tape, output_grad: np.ndarray, output: Value | None = None
) -> dict[str, np.ndarray]:
    """Propagate ``output_grad`` through the tape; return grads per leaf name."""
    if tape._consumed:
        raise ValueError("tape already consumed by a previous backward pass")
    tape._consumed = True
    out = tape.output if output is None else output
    output_grad = np.asarray(output_grad, dtype=np.float64)
    if output_grad.shape != out.data.shape:
        raise ValueError(
            f"output_grad shape {output_grad.shape} != output shape {out.data.shape}"
        )
    grads: dict[int, np.ndarray] = {out.slot: output_grad}

    def accumulate(slot: int, g: np.ndarray) -> None:
        prev = grads.get(slot)
        grads[slot] = g if prev is None else prev + g

    for out_slot, bwd in reversed(tape._records):
        g = grads.pop(out_slot, None)
        if g is None:
            continue
        bwd(g, accumulate)
    return {
        name: grads.get(slot, np.zeros(shape))
        for name, (slot, shape) in tape._leaves.items()
    }


def _data(x) -> np.ndarray:
    if isinstance(x, Value):
        return x.data
    return np.asarray(x, dtype=np.float64)


def _slot(x):
    return x.slot if isinstance(x, Value) else None


def _emit(tape: Tape | None, out: np.ndarray, bwd, *inputs):
    if tape is None:
        if any(isinstance(x, Value) for x in inputs):
            raise ValueError("Value inputs require a tape")
        return out
    v = tape.new_value(out)
    tape.record(v, bwd)
    return v


def matmul(a, b, tape: Tape | None = None):
    A, B = _data(a), _data(b)
    out = A @ B
    sa, sb = _slot(a), _slot(b)

    def bwd(g, acc):
        if sa is not None:
            acc(sa, g @ B.T)
        if sb is not None:
            acc(sb, A.T @ g)

    return _emit(tape, out, bwd, a, b)


def add(a, b, tape: Tape | None = None):
    A, B = _data(a), _data(b)
    if A.shape != B.shape:
        raise ValueError(f"add shape mismatch {A.shape} vs {B.shape}")
    sa, sb = _slot(a), _slot(b)

    def bwd(g, acc):
        if sa is not None:
            acc(sa, g)
        if sb is not None:
            acc(sb, g)

    return _emit(tape, A + B, bwd, a, b)


def sub(a, b, tape: Tape | None = None):
    A, B = _data(a), _data(b)
    if A.shape != B.shape:
        raise ValueError(f"sub shape mismatch {A.shape} vs {B.shape}")
    sa, sb = _slot(a), _slot(b)

    def bwd(g, acc):
        if sa is not None:
            acc(sa, g)
        if sb is not None:
            acc(sb, -g)

    return _emit(tape, A - B, bwd, a, b)


def neg(x, tape: Tape | None = None):
    X = _data(x)
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, -g)

    return _emit(tape, -X, bwd, x)


def add_bias(x, b, tape: Tape | None = None):
    """(n, k) + (k,) with sum-over-rows backward for the bias."""
    X, B = _data(x), _data(b)
    if X.ndim != 2 or B.shape != (X.shape[1],):
        raise ValueError(f"add_bias shapes {X.shape} and {B.shape} incompatible")
    sx, sb = _slot(x), _slot(b)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g)
        if sb is not None:
            acc(sb, g.sum(axis=0))

    return _emit(tape, X + B, bwd, x, b)


def mul(a, b, tape: Tape | None = None):
    A, B = _data(a), _data(b)
    if A.shape != B.shape:
        raise ValueError(f"mul shape mismatch {A.shape} vs {B.shape}")
    sa, sb = _slot(a), _slot(b)

    def bwd(g, acc):
        if sa is not None:
            acc(sa, g * B)
        if sb is not None:
            acc(sb, g * A)

    return _emit(tape, A * B, bwd, a, b)


def col_scale(c, x, tape: Tape | None = None):
    """Broadcast an (n, 1) column over (n, k): out = c * x."""
    C, X = _data(c), _data(x)
    if C.ndim != 2 or C.shape != (X.shape[0], 1):
        raise ValueError(f"col_scale needs ({X.shape[0]}, 1) column, got {C.shape}")
    sc, sx = _slot(c), _slot(x)

    def bwd(g, acc):
        if sc is not None:
            acc(sc, (g * X).sum(axis=1, keepdims=True))
        if sx is not None:
            acc(sx, g * C)

    return _emit(tape, C * X, bwd, c, x)


def scalar_scale(s, x, tape: Tape | None = None):
    """Multiply by a (1, 1) scalar value: out = s * x."""
    S, X = _data(s), _data(x)
    if S.shape != (1, 1):
        raise ValueError(f"scalar_scale needs (1, 1) scalar, got {S.shape}")
    ss, sx = _slot(s), _slot(x)

    def bwd(g, acc):
        if ss is not None:
            acc(ss, np.array([[float((g * X).sum())]]))
        if sx is not None:
            acc(sx, g * S[0, 0])

    return _emit(tape, S[0, 0] * X, bwd, s, x)


def scale(x, factor: float, tape: Tape | None = None):
    X = _data(x)
    sx = _slot(x)
    factor = float(factor)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g * factor)

    return _emit(tape, X * factor, bwd, x)


def affine(x, a: float, b: float, tape: Tape | None = None):
    """Elementwise a*x + b with scalar coefficients."""
    X = _data(x)
    sx = _slot(x)
    a = float(a)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g * a)

    return _emit(tape, a * X + float(b), bwd, x)


def silu(x, tape: Tape | None = None):
    X = _data(x)
    sig = 1.0 / (1.0 + np.exp(-X))
    out = X * sig
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g * (sig * (1.0 + X * (1.0 - sig))))

    return _emit(tape, out, bwd, x)


def tanh_act(x, tape: Tape | None = None):
    X = _data(x)
    out = np.tanh(X)
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g * (1.0 - out * out))

    return _emit(tape, out, bwd, x)


def relu(x, tape: Tape | None = None):
    X = _data(x)
    out = np.maximum(X, 0.0)
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g * (X > 0.0))

    return _emit(tape, out, bwd, x)


def rownorm(x, tape: Tape | None = None):
    """Euclidean norm of each row: (n, k) -> (n, 1). Zero rows get zero grad."""
    X = _data(x)
    out = np.sqrt((X * X).sum(axis=1, keepdims=True))
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            safe = np.where(out > 0.0, out, 1.0)
            acc(sx, g * (X / safe) * (out > 0.0))

    return _emit(tape, out, bwd, x)


def unit_rows(x, tape: Tape | None = None, eps: float = 1e-9):
    """Rows scaled to unit norm; rows with norm < eps map to zero (and get
    zero gradient) instead of dividing by a vanishing norm."""
    X = _data(x)
    n = np.sqrt((X * X).sum(axis=1, keepdims=True))
    live = n >= eps
    safe = np.where(live, n, 1.0)
    out = np.where(live, X / safe, 0.0)
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            gu = (g - out * (out * g).sum(axis=1, keepdims=True)) / safe
            acc(sx, np.where(live, gu, 0.0))

    return _emit(tape, out, bwd, x)


def rowdot(a, b, tape: Tape | None = None):
    """Rowwise dot product: (n, k), (n, k) -> (n, 1)."""
    A, B = _data(a), _data(b)
    if A.shape != B.shape:
        raise ValueError(f"rowdot shape mismatch {A.shape} vs {B.shape}")
    out = (A * B).sum(axis=1, keepdims=True)
    sa, sb = _slot(a), _slot(b)

    def bwd(g, acc):
        if sa is not None:
            acc(sa, g * B)
        if sb is not None:
            acc(sb, g * A)

    return _emit(tape, out, bwd, a, b)


_PERP = np.array([[0.0, 1.0], [-1.0, 0.0]])  # row-vector form of +90° rotation


def perp2d(x, tape: Tape | None = None):
    """Rotate each 2D row by +90°: (x, y) -> (-y, x)."""
    X = _data(x)
    if X.shape[1] != 2:
        raise ValueError(f"perp2d needs (n, 2), got {X.shape}")
    out = X @ _PERP
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g @ _PERP.T)

    return _emit(tape, out, bwd, x)


def concat_cols(parts, tape: Tape | None = None):
    arrays = [_data(p) for p in parts]
    out = np.concatenate(arrays, axis=1)
    slots = [_slot(p) for p in parts]
    widths = [a.shape[1] for a in arrays]

    def bwd(g, acc):
        start = 0
        for s, w in zip(slots, widths):
            if s is not None:
                acc(s, g[:, start : start + w])
            start += w

    return _emit(tape, out, bwd, *parts)


def concat_rows(parts, tape: Tape | None = None):
    arrays = [_data(p) for p in parts]
    out = np.concatenate(arrays, axis=0)
    slots = [_slot(p) for p in parts]
    heights = [a.shape[0] for a in arrays]

    def bwd(g, acc):
        start = 0
        for s, h in zip(slots, heights):
            if s is not None:
                acc(s, g[start : start + h])
            start += h

    return _emit(tape, out, bwd, *parts)


def gather_rows(x, idx, tape: Tape | None = None):
    X = _data(x)
    idx = np.asarray(idx, dtype=np.intp)
    out = X[idx]
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            gx = np.zeros_like(X)
            np.add.at(gx, idx, g)
            acc(sx, gx)

    return _emit(tape, out, bwd, x)


def segment_sum(x, seg, n_seg: int, tape: Tape | None = None):
    """Sum rows of (n, k) into (n_seg, k) buckets given per-row segment ids."""
    X = _data(x)
    seg = np.asarray(seg, dtype=np.intp)
    out = np.empty((n_seg, X.shape[1]))
    for j in range(X.shape[1]):
        out[:, j] = np.bincount(seg, weights=X[:, j], minlength=n_seg)
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g[seg])

    return _emit(tape, out, bwd, x)


def square(x, tape: Tape | None = None):
    X = _data(x)
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, g * (2.0 * X))

    return _emit(tape, X * X, bwd, x)


def sum_all(x, tape: Tape | None = None):
    X = _data(x)
    out = np.array([[X.sum()]])
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, np.full_like(X, g[0, 0]))

    return _emit(tape, out, bwd, x)


def mean_all(x, tape: Tape | None = None):
    X = _data(x)
    n = X.size
    out = np.array([[X.sum() / n]])
    sx = _slot(x)

    def bwd(g, acc):
        if sx is not None:
            acc(sx, np.full_like(X, g[0, 0] / n))

    return _emit(tape, out, bwd, x)
