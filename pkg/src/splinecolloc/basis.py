"""Polynomial and Hermite basis evaluation, collocation node placement.

Collocation points live at Gauss-Legendre quadrature nodes mapped to the
unit reference cell; partition grids carry the per-dimension breakpoints
and the reference offsets. The cubic Hermite cardinal basis is evaluated
on the reference cell with an affine map per cell, which keeps the
conditioning independent of the cell width.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


class BasisError(Exception):
    pass


class OutOfDomainError(BasisError):
    pass


def gauss_legendre_offsets(k: int) -> np.ndarray:
    """Roots of the degree-k Legendre polynomial mapped from [-1,1] to [0,1]."""
    if not 1 <= int(k) <= 6:
        raise BasisError(f"unsupported collocation count {k} (need 1..6)")
    nodes, _ = np.polynomial.legendre.leggauss(int(k))
    offsets = 0.5 * (nodes + 1.0)
    # symmetrize: quadrature roots come in pairs about 1/2
    offsets = 0.5 * (offsets + (1.0 - offsets[::-1]))
    return np.sort(offsets)


@dataclass(frozen=True)
class PartitionGrid:
    """Breakpoints per dimension plus collocation offsets on the unit cell."""

    breakpoints: tuple[np.ndarray, ...]
    order: int
    colloc_offsets: np.ndarray

    def __post_init__(self):
        bps = tuple(np.asarray(b, dtype=np.float64) for b in self.breakpoints)
        object.__setattr__(self, "breakpoints", bps)
        object.__setattr__(self, "colloc_offsets",
                           np.asarray(self.colloc_offsets, dtype=np.float64))
        if self.dims not in (1, 2):
            raise BasisError("only 1- and 2-dimensional grids are supported")
        if self.order < 2:
            raise BasisError("polynomial order must be >= 2")
        for b in bps:
            if len(b) < 2 or np.any(np.diff(b) <= 0):
                raise BasisError("breakpoints must be strictly increasing, >= 2")
        off = self.colloc_offsets
        if np.any(off <= 0) or np.any(off >= 1) or np.any(np.diff(off) <= 0):
            raise BasisError("collocation offsets must be interior to (0,1) "
                             "and strictly increasing")

    @property
    def dims(self) -> int:
        return len(self.breakpoints)

    def cells(self, dim: int = 0) -> int:
        return len(self.breakpoints[dim]) - 1

    def collocation_points(self, dim: int = 0) -> np.ndarray:
        """All N*(r-1) collocation abscissae of one dimension, sorted."""
        b = self.breakpoints[dim]
        lo, hi = b[:-1], b[1:]
        pts = lo[:, None] + (hi - lo)[:, None] * self.colloc_offsets[None, :]
        return pts.ravel()


def uniform_grid(a: float, b: float, cells: int, order: int) -> PartitionGrid:
    """Uniform 1D partition with Gauss-Legendre collocation offsets."""
    bp = np.linspace(a, b, cells + 1)
    return PartitionGrid((bp,), order, gauss_legendre_offsets(order - 1))


def monomial_eval(coeffs, x: float, deriv_order: int = 0):
    """Evaluate sum_j coeffs[j] x^j or one of its first two derivatives."""
    if deriv_order not in (0, 1, 2):
        raise BasisError("deriv_order must be 0, 1 or 2")
    c = np.asarray(coeffs, dtype=np.float64)
    for _ in range(deriv_order):
        c = c[1:] * np.arange(1, len(c))
    if len(c) == 0:
        return np.zeros_like(np.asarray(x, dtype=np.float64)) + 0.0
    return np.polynomial.polynomial.polyval(x, c)


# cubic Hermite shape functions on the reference cell s in [0,1] and their
# first two derivatives with respect to s
def _h00(s, d):
    if d == 0:
        return 2 * s**3 - 3 * s**2 + 1
    if d == 1:
        return 6 * s**2 - 6 * s
    return 12 * s - 6


def _h01(s, d):
    if d == 0:
        return -2 * s**3 + 3 * s**2
    if d == 1:
        return -6 * s**2 + 6 * s
    return -12 * s + 6


def _h10(s, d):
    if d == 0:
        return s**3 - 2 * s**2 + s
    if d == 1:
        return 3 * s**2 - 4 * s + 1
    return 6 * s - 4


def _h11(s, d):
    if d == 0:
        return s**3 - s**2
    if d == 1:
        return 3 * s**2 - 2 * s
    return 6 * s - 2


@dataclass(frozen=True)
class HermiteBasis1D:
    """Cubic Hermite cardinal basis on a 1D partition.

    The value function at node j is 1 at breakpoint j with zero slope
    there; the slope function has zero value and unit slope. Support is
    the (at most two) cells adjacent to the node, and every function is
    C1 across breakpoints.
    """

    breakpoints: np.ndarray

    def __post_init__(self):
        b = np.asarray(self.breakpoints, dtype=np.float64)
        object.__setattr__(self, "breakpoints", b)
        if len(b) < 2 or np.any(np.diff(b) <= 0):
            raise BasisError("breakpoints must be strictly increasing, >= 2")

    @property
    def node_count(self) -> int:
        return len(self.breakpoints)

    def locate(self, x: float) -> int:
        """Cell index containing x; right-closed at the last breakpoint."""
        b = self.breakpoints
        if x < b[0] or x > b[-1]:
            raise OutOfDomainError(f"x={x} outside [{b[0]}, {b[-1]}]")
        return min(int(np.searchsorted(b, x, side="right")) - 1, len(b) - 2)

    def cell_eval(self, cell: int, x, deriv_order: int = 0) -> np.ndarray:
        """The four shape functions of one cell at x: (vL, sL, vR, sR)."""
        a = self.breakpoints[cell]
        h = self.breakpoints[cell + 1] - a
        s = (np.asarray(x, dtype=np.float64) - a) / h
        d = deriv_order
        scale = h**-d
        return np.stack([_h00(s, d) * scale, _h10(s, d) * h * scale,
                         _h01(s, d) * scale, _h11(s, d) * h * scale])


def hermite_eval(basis: HermiteBasis1D, node_index: int, kind: str,
                 x: float, deriv_order: int = 0) -> float:
    """One cardinal basis function (value or slope) at x."""
    if kind not in ("value", "slope"):
        raise BasisError(f"kind must be 'value' or 'slope', got {kind!r}")
    if deriv_order not in (0, 1):
        raise BasisError("deriv_order must be 0 or 1")
    if not 0 <= node_index < basis.node_count:
        raise BasisError(f"node index {node_index} out of range")
    cell = basis.locate(x)
    vals = basis.cell_eval(cell, x, deriv_order)
    if node_index == cell:
        return float(vals[0] if kind == "value" else vals[1])
    if node_index == cell + 1:
        return float(vals[2] if kind == "value" else vals[3])
    return 0.0
