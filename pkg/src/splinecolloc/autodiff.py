"""Minimal reverse-mode automatic differentiation over numpy arrays.

A Tape records primitive operations in creation order, which is a valid
topological order; backward walks it once in reverse. The primitive set
is deliberately small: dense matrix multiply, elementwise add/multiply,
rectifier, gather/concat/reshape/transpose plumbing, summation, and two
linear-solve primitives whose backward rule is the adjoint (transpose)
solve. Solver system matrices and factorizations are constants; only
right-hand sides carry gradients.
"""

from __future__ import annotations

import numpy as np
from scipy.linalg import lu_factor, lu_solve

from . import abd


class AutodiffError(Exception):
    pass


class TapeConsumedError(AutodiffError):
    """backward was already run on this tape."""


class Tape:
    """Recorded operations plus the consumed flag for one forward pass."""

    def __init__(self):
        self.nodes: list[Tensor] = []
        self.consumed = False

    def tensor(self, value, name: str = "") -> "Tensor":
        return Tensor(self, np.asarray(value, dtype=np.float64), (), None, name)


class Tensor:
    """One tape node: forward value, parents and the local backward rule."""

    __slots__ = ("tape", "value", "grad", "parents", "_bwd", "name")

    def __init__(self, tape: Tape, value: np.ndarray, parents=(), bwd=None,
                 name: str = ""):
        self.tape = tape
        self.value = value
        self.grad = np.zeros_like(value)
        self.parents = parents
        self._bwd = bwd
        self.name = name
        tape.nodes.append(self)

    @property
    def shape(self):
        return self.value.shape


def _unbroadcast(g: np.ndarray, shape: tuple) -> np.ndarray:
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


def _wrap(tape: Tape, x) -> "Tensor":
    return x if isinstance(x, Tensor) else tape.tensor(x)


def add(a: Tensor, b) -> Tensor:
    b = _wrap(a.tape, b)
    out = Tensor(a.tape, a.value + b.value, (a, b))

    def bwd(g):
        a.grad += _unbroadcast(g, a.value.shape)
        b.grad += _unbroadcast(g, b.value.shape)
    out._bwd = bwd
    return out


def sub(a: Tensor, b) -> Tensor:
    b = _wrap(a.tape, b)
    out = Tensor(a.tape, a.value - b.value, (a, b))

    def bwd(g):
        a.grad += _unbroadcast(g, a.value.shape)
        b.grad -= _unbroadcast(g, b.value.shape)
    out._bwd = bwd
    return out


def mul(a: Tensor, b) -> Tensor:
    b = _wrap(a.tape, b)
    out = Tensor(a.tape, a.value * b.value, (a, b))

    def bwd(g):
        a.grad += _unbroadcast(g * b.value, a.value.shape)
        b.grad += _unbroadcast(g * a.value, b.value.shape)
    out._bwd = bwd
    return out


def scale(a: Tensor, s: float) -> Tensor:
    out = Tensor(a.tape, a.value * s, (a,))

    def bwd(g):
        a.grad += g * s
    out._bwd = bwd
    return out


def matmul(a, b) -> Tensor:
    tape = a.tape if isinstance(a, Tensor) else b.tape
    a = _wrap(tape, a)
    b = _wrap(tape, b)
    out = Tensor(tape, a.value @ b.value, (a, b))

    def bwd(g):
        a.grad += g @ b.value.T
        b.grad += a.value.T @ g
    out._bwd = bwd
    return out


def relu(a: Tensor) -> Tensor:
    mask = a.value > 0
    out = Tensor(a.tape, np.where(mask, a.value, 0.0), (a,), name="relu")

    def bwd(g):
        a.grad += np.where(mask, g, 0.0)
    out._bwd = bwd
    return out


def total(a: Tensor) -> Tensor:
    """Sum of all entries (scalar tensor)."""
    out = Tensor(a.tape, np.asarray(a.value.sum()), (a,))

    def bwd(g):
        a.grad += np.broadcast_to(g, a.value.shape)
    out._bwd = bwd
    return out


def sum_squares(a: Tensor) -> Tensor:
    """Sum of squared entries; the building block of both loss terms."""
    out = Tensor(a.tape, np.asarray((a.value ** 2).sum()), (a,))

    def bwd(g):
        a.grad += 2.0 * g * a.value
    out._bwd = bwd
    return out


def concat(tensors, axis: int = 0) -> Tensor:
    tape = tensors[0].tape
    out = Tensor(tape, np.concatenate([t.value for t in tensors], axis=axis),
                 tuple(tensors))
    splits = np.cumsum([t.value.shape[axis] for t in tensors])[:-1]

    def bwd(g):
        for t, piece in zip(tensors, np.split(g, splits, axis=axis)):
            t.grad += piece
    out._bwd = bwd
    return out


def gather_rows(a: Tensor, idx) -> Tensor:
    idx = np.asarray(idx, dtype=np.int64)
    out = Tensor(a.tape, a.value[idx], (a,))

    def bwd(g):
        np.add.at(a.grad, idx, g)
    out._bwd = bwd
    return out


def transpose(a: Tensor) -> Tensor:
    out = Tensor(a.tape, a.value.T, (a,))

    def bwd(g):
        a.grad += g.T
    out._bwd = bwd
    return out


def reshape(a: Tensor, shape) -> Tensor:
    out = Tensor(a.tape, a.value.reshape(shape), (a,))

    def bwd(g):
        a.grad += g.reshape(a.value.shape)
    out._bwd = bwd
    return out


def abd_solve(fac: abd.AbdFactorization, f: Tensor) -> Tensor:
    """a = A^-1 f on the tape; backward is f_bar = A^-T a_bar."""
    out = Tensor(f.tape, abd.solve(fac, f.value), (f,))

    def bwd(g):
        f.grad += abd.solve_transpose(fac, np.ascontiguousarray(g))
    out._bwd = bwd
    return out


class DenseSolveOperator:
    """LU-factorized dense square system usable as a tape primitive.

    Holds the factorization of a constant matrix E; ``solve`` maps a
    right-hand-side tensor to E^-1 rhs with the transpose-solve adjoint.
    """

    def __init__(self, matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=np.float64)
        if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
            raise AutodiffError("dense solve needs a square matrix")
        self.n = matrix.shape[0]
        self._lu = lu_factor(matrix)

    def solve(self, f: Tensor) -> Tensor:
        out = Tensor(f.tape, lu_solve(self._lu, f.value), (f,))

        def bwd(g):
            f.grad += lu_solve(self._lu, g, trans=1)
        out._bwd = bwd
        return out

    def solve_array(self, f: np.ndarray) -> np.ndarray:
        return lu_solve(self._lu, f)


def backward(tape: Tape, loss: Tensor) -> None:
    """Reverse sweep seeding d loss / d loss = 1; one shot per tape."""
    if tape.consumed:
        raise TapeConsumedError("backward already ran on this tape")
    if loss.tape is not tape:
        raise AutodiffError("loss was recorded on a different tape")
    if loss.value.ndim != 0:
        raise AutodiffError("loss must be a scalar tensor")
    tape.consumed = True
    loss.grad = np.ones_like(loss.value)
    for node in reversed(tape.nodes):
        if node._bwd is not None:
            node._bwd(node.grad)
