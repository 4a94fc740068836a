"""1D orthogonal spline collocation on almost-block-diagonal systems.

Two modes share the same system layout:

* ODE mode: collocate a linear operator c2 u'' + c1 u' + c0 u = f at
  Gauss-Legendre points inside each cell, with Dirichlet boundary values.
* Interp mode: constrain the spline to pass through given samples; the
  sample abscissae act as the collocation points and the first/last
  samples supply the boundary values.

Each cell carries one degree-r polynomial in global monomials. Row order:
left boundary row, then per cell its collocation rows preceded (from the
second cell on) by the two C1 continuity rows at the cell's left
breakpoint, ending with the right boundary row. The resulting matrix has
one ABD block per cell whose footprint spans the cell and its left
neighbour.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from . import abd
from .basis import BasisError, OutOfDomainError, PartitionGrid, uniform_grid


class OscError(Exception):
    pass


class CountMismatchError(OscError):
    """Sample count incompatible with the partition layout."""


@dataclass(frozen=True)
class OdeMode:
    """Operator coefficients, right-hand side and Dirichlet boundary pair."""

    c0: float
    c1: float
    c2: float
    rhs: Callable[[np.ndarray], np.ndarray]
    bc: tuple[float, float]


@dataclass(frozen=True)
class InterpMode:
    """Samples the spline must pass through; endpoints become boundary rows."""

    times: np.ndarray
    values: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "values", v)
        if np.any(np.diff(t) <= 0):
            raise OscError("sample times must be strictly increasing")
        if v.shape[0] != t.shape[0]:
            raise OscError("times and values length mismatch")


@dataclass(frozen=True)
class Osc1dProblem:
    grid: PartitionGrid
    mode: OdeMode | InterpMode

    def __post_init__(self):
        if self.grid.dims != 1:
            raise OscError("Osc1dProblem needs a 1D grid")
        n_cells = self.grid.cells()
        r = self.grid.order
        if isinstance(self.mode, InterpMode):
            want = n_cells * (r - 1) + 2
            if len(self.mode.times) != want:
                raise CountMismatchError(
                    f"interp mode needs N(r-1)+2 = {want} samples for "
                    f"N={n_cells}, r={r}; got {len(self.mode.times)}")


@dataclass(frozen=True)
class SplineSolution1D:
    """C1 piecewise polynomial: per-cell global-monomial coefficients."""

    grid: PartitionGrid
    coeffs: np.ndarray  # shape (cells, order + 1), ascending powers

    @property
    def domain(self) -> tuple[float, float]:
        b = self.grid.breakpoints[0]
        return float(b[0]), float(b[-1])


def _mono_row(x: float, r: int, deriv: int = 0) -> np.ndarray:
    """Row of monomial (derivative) values 1, x, x^2, ... at one point."""
    row = np.zeros(r + 1)
    for j in range(deriv, r + 1):
        fac = 1.0
        for d in range(deriv):
            fac *= j - d
        row[j] = fac * x ** (j - deriv)
    return row


def interp_structure(n_cells: int, r: int) -> abd.BlockStructure:
    """ABD block layout for an N-cell, order-r system."""
    w = r + 1
    if n_cells == 1:
        return abd.BlockStructure((w,), (w,), (0,))
    rows = [r] + [r + 1] * (n_cells - 1)
    rows[-1] += 1
    cols = [w] + [2 * w] * (n_cells - 1)
    ov = [0, w] + [w] * (n_cells - 2)
    return abd.BlockStructure(tuple(rows), tuple(cols), tuple(ov))


def interp_row_map(n_cells: int, r: int) -> np.ndarray:
    """Global system row of each sample in Interp mode, in sample order."""
    n_samples = n_cells * (r - 1) + 2
    rows = np.empty(n_samples, dtype=np.int64)
    rows[0] = 0
    for j in range(1, n_samples - 1):
        cell = (j - 1) // (r - 1)
        pos = (j - 1) % (r - 1)
        if cell == 0:
            rows[j] = 1 + pos
        else:
            rows[j] = r + (cell - 1) * (r + 1) + 2 + pos
    rows[-1] = n_cells * (r + 1) - 1
    return rows


def interp_breakpoints(times: Sequence[float], r: int) -> np.ndarray:
    """Breakpoints placing exactly r-1 consecutive samples inside each cell."""
    times = np.asarray(times, dtype=np.float64)
    n_interior = len(times) - 2
    if n_interior < r - 1 or n_interior % (r - 1) != 0:
        valid = ", ".join(str(2 + k * (r - 1)) for k in range(1, 5))
        raise CountMismatchError(
            f"cannot partition {len(times)} samples with order r={r}: "
            f"need 2 + k*(r-1) samples (e.g. {valid}, ...)")
    n_cells = n_interior // (r - 1)
    bp = np.empty(n_cells + 1)
    bp[0] = times[0]
    bp[-1] = times[-1]
    for i in range(1, n_cells):
        left = times[i * (r - 1)]       # last sample of group i-1
        right = times[1 + i * (r - 1)]  # first sample of group i
        bp[i] = 0.5 * (left + right)
    return bp


def build_system(p: Osc1dProblem) -> tuple[abd.AbdMatrix, np.ndarray]:
    """Assemble the square ABD system and its right-hand side."""
    grid = p.grid
    r = grid.order
    n_cells = grid.cells()
    bp = grid.breakpoints[0]
    w = r + 1
    structure = interp_structure(n_cells, r)
    blocks = [np.zeros((structure.rows_per_block[i],
                        structure.cols_per_block[i]))
              for i in range(n_cells)]
    rhs = np.zeros(structure.n)

    ode = isinstance(p.mode, OdeMode)
    if ode:
        m = p.mode
        colloc = grid.collocation_points().reshape(n_cells, r - 1)

        def colloc_row(x):
            return (m.c0 * _mono_row(x, r, 0) + m.c1 * _mono_row(x, r, 1)
                    + m.c2 * _mono_row(x, r, 2))

        colloc_rhs = m.rhs
        left_val, right_val = m.bc
        x_left, x_right = bp[0], bp[-1]
    else:
        times = p.mode.times
        values = p.mode.values
        groups = times[1:-1].reshape(n_cells, r - 1)
        gvals = values[1:-1].reshape(n_cells, r - 1)
        colloc = groups

        def colloc_row(x):
            return _mono_row(x, r, 0)

        left_val, right_val = values[0], values[-1]
        x_left, x_right = times[0], times[-1]

    # block 0: left boundary row + cell-0 collocation rows
    blocks[0][0, :] = _mono_row(x_left, r, 0)
    rhs[0] = left_val
    for q in range(r - 1):
        x = colloc[0, q]
        blocks[0][1 + q, :] = colloc_row(x)
        rhs[1 + q] = colloc_rhs(x) if ode else gvals[0, q]

    row = r
    for i in range(1, n_cells):
        blk = blocks[i]
        xb = bp[i]
        # C1 continuity between cell i-1 (left half) and cell i (right half)
        blk[0, :w] = _mono_row(xb, r, 0)
        blk[0, w:] = -_mono_row(xb, r, 0)
        blk[1, :w] = _mono_row(xb, r, 1)
        blk[1, w:] = -_mono_row(xb, r, 1)
        for q in range(r - 1):
            x = colloc[i, q]
            blk[2 + q, w:] = colloc_row(x)
            rhs[row + 2 + q] = colloc_rhs(x) if ode else gvals[i, q]
        row += r + 1
    if n_cells == 1:
        blocks[0][r, :] = _mono_row(x_right, r, 0)
        rhs[r] = right_val
    else:
        blocks[-1][-1, w:] = _mono_row(x_right, r, 0)
        rhs[-1] = right_val
    return abd.assemble(structure, blocks), rhs


def _coeffs_from_vector(grid: PartitionGrid, a: np.ndarray) -> np.ndarray:
    return a.reshape(grid.cells(), grid.order + 1)


def solve_osc1d(p: Osc1dProblem) -> SplineSolution1D:
    """Assemble, factorize and solve; returns the piecewise polynomial."""
    matrix, rhs = build_system(p)
    try:
        fac = abd.factorize(matrix)
    except abd.SingularMatrixError as exc:
        raise abd.SingularMatrixError(
            f"singular collocation system ({exc}); offending cell index "
            "equals the reported block index") from exc
    a = abd.solve(fac, rhs)
    return SplineSolution1D(p.grid, _coeffs_from_vector(p.grid, a))


def _locate(bp: np.ndarray, t: float) -> int:
    if t < bp[0] or t > bp[-1]:
        raise OutOfDomainError(f"t={t} outside [{bp[0]}, {bp[-1]}]")
    return min(int(np.searchsorted(bp, t, side="right")) - 1, len(bp) - 2)


def evaluate(s: SplineSolution1D, t: float, deriv_order: int = 0) -> float:
    """Value or first derivative of the spline at t (no extrapolation)."""
    if deriv_order not in (0, 1):
        raise BasisError("deriv_order must be 0 or 1")
    bp = s.grid.breakpoints[0]
    cell = _locate(bp, t)
    c = s.coeffs[cell]
    if deriv_order == 1:
        c = c[1:] * np.arange(1, len(c))
    return float(np.polynomial.polynomial.polyval(t, c))


def evaluate_many(s: SplineSolution1D, ts, deriv_order: int = 0) -> np.ndarray:
    return np.array([evaluate(s, float(t), deriv_order) for t in np.asarray(ts)])


def coeff_eval_matrix(grid: PartitionGrid, ts, deriv_order: int = 0) -> np.ndarray:
    """Dense matrix E with (E @ a)[q] = spline(ts[q]) for coefficient vector a."""
    ts = np.asarray(ts, dtype=np.float64)
    r = grid.order
    w = r + 1
    bp = grid.breakpoints[0]
    E = np.zeros((len(ts), grid.cells() * w))
    for q, t in enumerate(ts):
        cell = _locate(bp, float(t))
        E[q, cell * w:(cell + 1) * w] = _mono_row(float(t), r, deriv_order)
    return E


def interp_problem(times, values, r: int) -> Osc1dProblem:
    """Interp-mode problem with breakpoints derived from the sample layout."""
    times = np.asarray(times, dtype=np.float64)
    bp = interp_breakpoints(times, r)
    grid = PartitionGrid((bp,), r, uniform_grid(0, 1, 1, r).colloc_offsets)
    return Osc1dProblem(grid, InterpMode(times, np.asarray(values)))


def fit_time_series(times, values, r: int) -> list[SplineSolution1D]:
    """Fit one Interp-mode spline per channel of a (time x channel) matrix.

    All channels share the same system matrix, which is factorized once.
    """
    times = np.asarray(times, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64)
    if values.ndim == 1:
        values = values[:, None]
    if values.shape[0] != len(times):
        raise OscError("values must have one row per time sample")
    bp = interp_breakpoints(times, r)
    grid = PartitionGrid((bp,), r, uniform_grid(0, 1, 1, r).colloc_offsets)
    n_cells = grid.cells()

    base = Osc1dProblem(grid, InterpMode(times, values[:, 0]))
    matrix, _ = build_system(base)
    fac = abd.factorize(matrix)
    rhs = np.zeros((matrix.n, values.shape[1]))
    rhs[interp_row_map(n_cells, r)] = values
    a = abd.solve(fac, rhs)
    return [SplineSolution1D(grid, _coeffs_from_vector(grid, a[:, c]))
            for c in range(values.shape[1])]


def condition_number(p: Osc1dProblem) -> float:
    """Dense 2-norm condition estimate of the collocation matrix (diagnostic)."""
    matrix, _ = build_system(p)
    return float(np.linalg.cond(abd.to_dense(matrix)))
