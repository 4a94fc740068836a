"""Space-oriented 2D collocation with cubic Hermite tensor products.

A surface is determined by (value, d/dx, d/dy, d2/dxdy) coefficients at
every breakpoint pair. Fitting is done dimension by dimension: 1D Hermite
fits along x for every row of collocation points, then 1D fits along y on
the resulting nodal coefficients. A dense single-system fit over the same
constraints is provided as an oracle and for scattered (adapted) point
sets.
"""

from __future__ import annotations

from dataclasses import dataclass, field as dc_field

import numpy as np

from . import abd
from .basis import HermiteBasis1D, OutOfDomainError
from .osc1d import CountMismatchError, interp_breakpoints

HERMITE_ORDER = 3  # the cubic Hermite path is order 3 only


@dataclass(frozen=True)
class CollocationField:
    """Values on a tensor grid of collocation points with boundary lines."""

    xs: np.ndarray
    ys: np.ndarray
    values: np.ndarray  # shape (len(ys), len(xs))

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=np.float64)
        ys = np.asarray(self.ys, dtype=np.float64)
        v = np.asarray(self.values, dtype=np.float64)
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)
        object.__setattr__(self, "values", v)
        if np.any(np.diff(xs) <= 0) or np.any(np.diff(ys) <= 0):
            raise CountMismatchError("grid coordinates must be strictly increasing")
        if v.shape != (len(ys), len(xs)):
            raise CountMismatchError(
                f"values shape {v.shape} != grid shape {(len(ys), len(xs))}")
        if not np.all(np.isfinite(v)):
            raise CountMismatchError("field values must be finite")

    def points(self) -> np.ndarray:
        """Flattened (y-major) point coordinates, shape (len(ys)*len(xs), 2)."""
        gx, gy = np.meshgrid(self.xs, self.ys)
        return np.column_stack([gx.ravel(), gy.ravel()])


def hermite_fit_structure(n_cells: int) -> abd.BlockStructure:
    """ABD layout of a cubic Hermite interpolation fit with N cells."""
    if n_cells == 1:
        return abd.BlockStructure((4,), (4,), (0,))
    rows = [3] + [2] * (n_cells - 2) + [3]
    cols = [4] * n_cells
    ov = [0] + [2] * (n_cells - 1)
    return abd.BlockStructure(tuple(rows), tuple(cols), tuple(ov))


def hermite_row_map(n_cells: int) -> np.ndarray:
    """System row of each sample (sample order: boundary, interior..., boundary)."""
    n_samples = 2 * n_cells + 2
    rows = np.empty(n_samples, dtype=np.int64)
    rows[0] = 0
    rows[1:-1] = 1 + np.arange(2 * n_cells)
    rows[-1] = 2 * n_cells + 1
    return rows


class HermiteFitOperator:
    """Factorized 1D cubic Hermite collocation fit for fixed sample abscissae.

    Samples must contain the two breakpoint endpoints plus exactly two
    interior points per cell. ``fit`` maps sample values (multi-channel)
    to interleaved nodal (value, slope) coefficients.
    """

    def __init__(self, coords, breakpoints=None):
        coords = np.asarray(coords, dtype=np.float64)
        if breakpoints is None:
            breakpoints = interp_breakpoints(coords, HERMITE_ORDER)
        self.basis = HermiteBasis1D(breakpoints)
        self.coords = coords
        n_cells = self.basis.node_count - 1
        if len(coords) != 2 * n_cells + 2:
            raise CountMismatchError(
                f"need {2 * n_cells + 2} sample points for {n_cells} cells, "
                f"got {len(coords)}")
        structure = hermite_fit_structure(n_cells)
        blocks = [np.zeros((structure.rows_per_block[i],
                            structure.cols_per_block[i]))
                  for i in range(n_cells)]
        # boundary value rows
        blocks[0][0] = [1.0, 0.0, 0.0, 0.0]
        blocks[-1][-1] = [0.0, 0.0, 1.0, 0.0]
        interior = coords[1:-1].reshape(n_cells, 2)
        for i in range(n_cells):
            base = 1 if i == 0 else 0
            for q in range(2):
                x = interior[i, q]
                blocks[i][base + q] = self.basis.cell_eval(i, x, 0)
        self.structure = structure
        self.matrix = abd.assemble(structure, blocks)
        self.fac = abd.factorize(self.matrix)
        self.row_map = hermite_row_map(n_cells)
        self.n = structure.n

    def rhs_from_values(self, values: np.ndarray) -> np.ndarray:
        values = np.asarray(values, dtype=np.float64)
        squeeze = values.ndim == 1
        if squeeze:
            values = values[:, None]
        rhs = np.zeros((self.n, values.shape[1]))
        rhs[self.row_map] = values
        return rhs[:, 0] if squeeze else rhs

    def fit(self, values: np.ndarray) -> np.ndarray:
        """Nodal coefficients, interleaved v0, s0, v1, s1, ... per channel."""
        return abd.solve(self.fac, self.rhs_from_values(values))


@dataclass(frozen=True)
class SplineSolution2D:
    """Bicubic Hermite surface with nodal (f, fx, fy, fxy) coefficients."""

    basis_x: HermiteBasis1D
    basis_y: HermiteBasis1D
    coeffs: np.ndarray = dc_field(repr=False)  # (ny_nodes, nx_nodes, 4)

    def __post_init__(self):
        want = (self.basis_y.node_count, self.basis_x.node_count, 4)
        if self.coeffs.shape != want:
            raise CountMismatchError(
                f"coefficient shape {self.coeffs.shape} != {want}")


def evaluate_surface(s: SplineSolution2D, x: float, y: float,
                     deriv: tuple[int, int] = (0, 0)) -> float:
    """Surface value or first partial derivative at one point."""
    dx, dy = deriv
    cx = s.basis_x.locate(float(x))
    cy = s.basis_y.locate(float(y))
    vx = s.basis_x.cell_eval(cx, float(x), dx)   # (H_j, G_j, H_j1, G_j1)
    vy = s.basis_y.cell_eval(cy, float(y), dy)
    acc = 0.0
    for a in range(2):          # x node offset
        for b in range(2):      # y node offset
            c = s.coeffs[cy + b, cx + a]
            for p in range(2):  # 0: value basis in x, 1: slope basis
                for q in range(2):
                    acc += c[p + 2 * q] * vx[2 * a + p] * vy[2 * b + q]
    return float(acc)


def evaluate_surface_many(s: SplineSolution2D, points,
                          deriv: tuple[int, int] = (0, 0)) -> np.ndarray:
    pts = np.asarray(points, dtype=np.float64)
    return np.array([evaluate_surface(s, p[0], p[1], deriv) for p in pts])


def _check_field_layout(field: CollocationField, r: int):
    if r != HERMITE_ORDER:
        raise CountMismatchError("2D Hermite fitting supports order 3 only")
    for coords in (field.xs, field.ys):
        if (len(coords) - 2) % (r - 1) != 0 or len(coords) < 4:
            raise CountMismatchError(
                f"axis with {len(coords)} points cannot hold boundary lines "
                f"plus a multiple of {r - 1} interior points")


def fit_surface(field: CollocationField, r: int = HERMITE_ORDER,
                breakpoints_x=None, breakpoints_y=None) -> SplineSolution2D:
    """Tensor-product fit: 1D Hermite fits along x, then along y."""
    _check_field_layout(field, r)
    opx = HermiteFitOperator(field.xs, breakpoints_x)
    opy = HermiteFitOperator(field.ys, breakpoints_y)
    # x pass: one fit per row of collocation points
    ax = opx.fit(field.values.T)        # (2*nx_nodes, len(ys))
    v_rows = ax[0::2]                   # values at x nodes, per y row
    sx_rows = ax[1::2]
    # y pass: fit the nodal values and x-slopes along y
    b_val = opy.fit(v_rows.T)           # (2*ny_nodes, nx_nodes)
    b_slp = opy.fit(sx_rows.T)
    ny_nodes = opy.basis.node_count
    nx_nodes = opx.basis.node_count
    coeffs = np.empty((ny_nodes, nx_nodes, 4))
    coeffs[:, :, 0] = b_val[0::2]       # f
    coeffs[:, :, 1] = b_slp[0::2]       # fx
    coeffs[:, :, 2] = b_val[1::2]       # fy
    coeffs[:, :, 3] = b_slp[1::2]       # fxy
    return SplineSolution2D(opx.basis, opy.basis, coeffs)


def surface_eval_matrix(basis_x: HermiteBasis1D, basis_y: HermiteBasis1D,
                        points, deriv: tuple[int, int] = (0, 0)) -> np.ndarray:
    """Dense E with (E @ c)[p] = surface(points[p]) for flattened coeffs c.

    Coefficient ordering matches SplineSolution2D.coeffs.ravel().
    """
    pts = np.asarray(points, dtype=np.float64)
    nx = basis_x.node_count
    ny = basis_y.node_count
    E = np.zeros((len(pts), ny * nx * 4))
    dx, dy = deriv
    for row, (x, y) in enumerate(pts):
        cx = basis_x.locate(float(x))
        cy = basis_y.locate(float(y))
        vx = basis_x.cell_eval(cx, float(x), dx)
        vy = basis_y.cell_eval(cy, float(y), dy)
        for a in range(2):
            for b in range(2):
                base = ((cy + b) * nx + (cx + a)) * 4
                for p in range(2):
                    for q in range(2):
                        E[row, base + p + 2 * q] = vx[2 * a + p] * vy[2 * b + q]
    return E


def fit_surface_dense(points, values, basis_x: HermiteBasis1D,
                      basis_y: HermiteBasis1D) -> SplineSolution2D:
    """One square dense system over all value constraints.

    Oracle for the tensor-product path; also handles scattered interior
    points (each strictly inside its cell) as produced by adaptive
    collocation, where the dimension-by-dimension route does not apply.
    """
    pts = np.asarray(points, dtype=np.float64)
    values = np.asarray(values, dtype=np.float64).ravel()
    n_unknowns = basis_x.node_count * basis_y.node_count * 4
    if len(pts) != n_unknowns or len(values) != n_unknowns:
        raise CountMismatchError(
            f"dense fit needs exactly {n_unknowns} points/values, "
            f"got {len(pts)}/{len(values)}")
    E = surface_eval_matrix(basis_x, basis_y, pts)
    coeffs = np.linalg.solve(E, values)
    return SplineSolution2D(
        basis_x, basis_y,
        coeffs.reshape(basis_y.node_count, basis_x.node_count, 4))
