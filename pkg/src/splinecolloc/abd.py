"""Almost-block-diagonal (ABD) linear systems.

An ABD matrix is square and sparse, with its nonzeros confined to dense
blocks laid out along the diagonal; consecutive blocks may share columns.
Collocation systems for piecewise polynomials produce exactly this shape:
one block per partition cell, coupled to its neighbour through the shared
continuity columns.

The factorization below eliminates block by block with partial row
pivoting restricted to the rows that are "live" at each block (the block's
own rows plus the rows carried over from the previous block). Fill never
leaves the block footprints, so the work is O(n * max_block_width**2):
O(n^2) when the width grows like sqrt(n) and O(n) for a fixed width.
A transpose solve is provided for adjoint gradients.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np
from numba import njit


class AbdError(Exception):
    """Base class for ABD solver errors."""


class DimensionMismatchError(AbdError):
    """Block shapes or right-hand-side length disagree with the structure."""


class SingularMatrixError(AbdError):
    """A pivot column was numerically zero during elimination."""


# Relative threshold below which a pivot counts as zero.
SINGULARITY_RTOL = 1e-13


@dataclass(frozen=True)
class BlockStructure:
    """Block layout of an ABD matrix.

    ``overlap_cols[i]`` is the number of columns block ``i`` shares with
    block ``i-1`` (``overlap_cols[0]`` is always 0). Column footprints are
    contiguous: block ``i`` starts ``cols_per_block[i-1] - overlap_cols[i]``
    columns after block ``i-1``.
    """

    rows_per_block: tuple[int, ...]
    cols_per_block: tuple[int, ...]
    overlap_cols: tuple[int, ...]

    def __post_init__(self):
        rows = tuple(int(r) for r in self.rows_per_block)
        cols = tuple(int(c) for c in self.cols_per_block)
        ov = tuple(int(o) for o in self.overlap_cols)
        object.__setattr__(self, "rows_per_block", rows)
        object.__setattr__(self, "cols_per_block", cols)
        object.__setattr__(self, "overlap_cols", ov)
        b = len(rows)
        if b == 0:
            raise DimensionMismatchError("empty block structure")
        if len(cols) != b or len(ov) != b:
            raise DimensionMismatchError(
                "rows_per_block, cols_per_block and overlap_cols must have "
                "the same length")
        if any(r <= 0 for r in rows) or any(c <= 0 for c in cols):
            raise DimensionMismatchError("block dimensions must be positive")
        if ov[0] != 0 or any(o < 0 for o in ov):
            raise DimensionMismatchError(
                "overlap_cols[0] must be 0 and overlaps non-negative")
        for i in range(1, b):
            if ov[i] > min(cols[i - 1], cols[i]):
                raise DimensionMismatchError(
                    f"overlap {ov[i]} exceeds adjacent block widths at {i}")
        n = sum(rows)
        if sum(c - o for c, o in zip(cols, ov)) != n:
            raise DimensionMismatchError(
                "column footprint does not give a square system")

    @property
    def block_count(self) -> int:
        return len(self.rows_per_block)

    @property
    def n(self) -> int:
        return sum(self.rows_per_block)

    @property
    def col_starts(self) -> np.ndarray:
        starts = np.zeros(self.block_count, dtype=np.int64)
        for i in range(1, self.block_count):
            starts[i] = (starts[i - 1] + self.cols_per_block[i - 1]
                         - self.overlap_cols[i])
        return starts

    @property
    def row_starts(self) -> np.ndarray:
        return np.concatenate(
            ([0], np.cumsum(self.rows_per_block)[:-1])).astype(np.int64)


@dataclass(frozen=True)
class AbdMatrix:
    """ABD matrix: a structure plus one dense panel per block row."""

    structure: BlockStructure
    blocks: tuple[np.ndarray, ...]

    @property
    def n(self) -> int:
        return self.structure.n


def assemble(structure: BlockStructure, blocks) -> AbdMatrix:
    """Bundle dense panels into an AbdMatrix, checking shapes."""
    panels = []
    for i, blk in enumerate(blocks):
        blk = np.asarray(blk, dtype=np.float64)
        want = (structure.rows_per_block[i], structure.cols_per_block[i])
        if blk.shape != want:
            raise DimensionMismatchError(
                f"block {i} has shape {blk.shape}, structure wants {want}")
        panels.append(blk.copy())
    if len(panels) != structure.block_count:
        raise DimensionMismatchError(
            f"got {len(panels)} blocks for {structure.block_count} block rows")
    return AbdMatrix(structure, tuple(panels))


def to_dense(m: AbdMatrix) -> np.ndarray:
    """Materialize the block footprints into a dense n x n matrix."""
    s = m.structure
    n = s.n
    dense = np.zeros((n, n))
    rs = s.row_starts
    cs = s.col_starts
    for i, blk in enumerate(m.blocks):
        r0, c0 = rs[i], cs[i]
        dense[r0:r0 + blk.shape[0], c0:c0 + blk.shape[1]] = blk
    return dense


@njit(cache=True)
def _factor_kernel(panels, offs, Ls, ws, ks, carrys, ovs, piv, poffs, tol):
    nblocks = Ls.size
    for s in range(nblocks):
        off = offs[s]
        L = Ls[s]
        w = ws[s]
        k = ks[s]
        if s > 0:
            po = offs[s - 1]
            pw = ws[s - 1]
            pk = ks[s - 1]
            for r in range(carrys[s]):
                for c in range(ovs[s]):
                    panels[off + r * w + c] = panels[po + (pk + r) * pw + pk + c]
        for j in range(k):
            p = j
            amax = abs(panels[off + j * w + j])
            for t in range(j + 1, L):
                a = abs(panels[off + t * w + j])
                if a > amax:
                    amax = a
                    p = t
            if amax < tol:
                return s, j
            piv[poffs[s] + j] = p
            if p != j:
                for c in range(w):
                    tmp = panels[off + j * w + c]
                    panels[off + j * w + c] = panels[off + p * w + c]
                    panels[off + p * w + c] = tmp
            pivval = panels[off + j * w + j]
            for t in range(j + 1, L):
                mult = panels[off + t * w + j] / pivval
                panels[off + t * w + j] = mult
                for c in range(j + 1, w):
                    panels[off + t * w + c] -= mult * panels[off + j * w + c]
    return -1, -1


@njit(cache=True)
def _solve_kernel(panels, offs, Ls, ws, ks, carrys, piv, poffs,
                  row_starts, col_starts, rhs, x):
    nblocks = Ls.size
    nrhs = rhs.shape[1]
    maxL = 0
    for s in range(nblocks):
        if Ls[s] > maxL:
            maxL = Ls[s]
    local = np.empty((maxL, nrhs))
    ys = np.empty((rhs.shape[0], nrhs))
    # forward pass: permute, apply multipliers, carry the tail onward
    for s in range(nblocks):
        off = offs[s]
        L = Ls[s]
        w = ws[s]
        k = ks[s]
        carry = carrys[s]
        r0 = row_starts[s]
        for r in range(L - carry):
            for q in range(nrhs):
                local[carry + r, q] = rhs[r0 + r, q]
        for j in range(k):
            p = piv[poffs[s] + j]
            if p != j:
                for q in range(nrhs):
                    tmp = local[j, q]
                    local[j, q] = local[p, q]
                    local[p, q] = tmp
        for j in range(k):
            for t in range(j + 1, L):
                mult = panels[off + t * w + j]
                for q in range(nrhs):
                    local[t, q] -= mult * local[j, q]
        for j in range(k):
            for q in range(nrhs):
                ys[poffs[s] + j, q] = local[j, q]
        for r in range(L - k):
            for q in range(nrhs):
                local[r, q] = local[k + r, q]
    # back substitution over the global upper factor
    for s in range(nblocks - 1, -1, -1):
        off = offs[s]
        w = ws[s]
        k = ks[s]
        c0 = col_starts[s]
        for j in range(k - 1, -1, -1):
            for q in range(nrhs):
                acc = ys[poffs[s] + j, q]
                for m in range(j + 1, w):
                    acc -= panels[off + j * w + m] * x[c0 + m, q]
                x[c0 + j, q] = acc / panels[off + j * w + j]


@njit(cache=True)
def _solve_transpose_kernel(panels, offs, Ls, ws, ks, carrys, piv, poffs,
                            row_starts, col_starts, rhs, x):
    nblocks = Ls.size
    nrhs = rhs.shape[1]
    n = rhs.shape[0]
    gw = rhs.copy()
    zs = np.empty((n, nrhs))
    # forward substitution on U^T, in global elimination (column) order
    for s in range(nblocks):
        off = offs[s]
        w = ws[s]
        k = ks[s]
        c0 = col_starts[s]
        for j in range(k):
            for q in range(nrhs):
                z = gw[c0 + j, q] / panels[off + j * w + j]
                zs[poffs[s] + j, q] = z
                for m in range(j + 1, w):
                    gw[c0 + m, q] -= z * panels[off + j * w + m]
    # apply the transposed elimination operators, blocks in reverse
    maxL = 0
    for s in range(nblocks):
        if Ls[s] > maxL:
            maxL = Ls[s]
    local = np.empty((maxL, nrhs))
    nxt = np.empty((maxL, nrhs))
    for s in range(nblocks - 1, -1, -1):
        off = offs[s]
        L = Ls[s]
        w = ws[s]
        k = ks[s]
        carry = carrys[s]
        r0 = row_starts[s]
        for j in range(k):
            for q in range(nrhs):
                local[j, q] = zs[poffs[s] + j, q]
        if s < nblocks - 1:
            for r in range(L - k):
                for q in range(nrhs):
                    local[k + r, q] = nxt[r, q]
        # multipliers are stored row-swapped (as in getrf), so the stage
        # transpose is: unit-lower transpose solve first, then all swaps
        for j in range(k - 1, -1, -1):
            for q in range(nrhs):
                acc = local[j, q]
                for t in range(j + 1, L):
                    acc -= panels[off + t * w + j] * local[t, q]
                local[j, q] = acc
        for j in range(k - 1, -1, -1):
            p = piv[poffs[s] + j]
            if p != j:
                for q in range(nrhs):
                    tmp = local[j, q]
                    local[j, q] = local[p, q]
                    local[p, q] = tmp
        for r in range(L - carry):
            for q in range(nrhs):
                x[r0 + r, q] = local[carry + r, q]
        for r in range(carry):
            for q in range(nrhs):
                nxt[r, q] = local[r, q]


@dataclass(frozen=True)
class AbdFactorization:
    """In-place triangular factors and pivot records of an ABD matrix."""

    structure: BlockStructure
    panels: np.ndarray = field(repr=False)
    offs: np.ndarray = field(repr=False)
    Ls: np.ndarray = field(repr=False)
    ws: np.ndarray = field(repr=False)
    ks: np.ndarray = field(repr=False)
    carrys: np.ndarray = field(repr=False)
    piv: np.ndarray = field(repr=False)
    poffs: np.ndarray = field(repr=False)
    row_starts: np.ndarray = field(repr=False)
    col_starts: np.ndarray = field(repr=False)

    @property
    def n(self) -> int:
        return self.structure.n


def _layout(s: BlockStructure):
    """Elimination layout arrays shared by factorize and the benchmark."""
    nblocks = s.block_count
    rows = np.asarray(s.rows_per_block, dtype=np.int64)
    ws = np.asarray(s.cols_per_block, dtype=np.int64)
    ovs = np.asarray(s.overlap_cols, dtype=np.int64)

    ks = np.empty(nblocks, dtype=np.int64)
    for i in range(nblocks - 1):
        ks[i] = ws[i] - ovs[i + 1]
    ks[nblocks - 1] = ws[nblocks - 1]
    if np.any(ks < 0):
        raise DimensionMismatchError("negative elimination width; bad overlaps")

    carrys = np.zeros(nblocks, dtype=np.int64)
    Ls = np.empty(nblocks, dtype=np.int64)
    for i in range(nblocks):
        Ls[i] = carrys[i] + rows[i]
        if Ls[i] < ks[i]:
            raise SingularMatrixError(
                f"block {i} has {Ls[i]} live rows for {ks[i]} columns; "
                "structurally singular")
        if i + 1 < nblocks:
            carrys[i + 1] = Ls[i] - ks[i]
    if Ls[nblocks - 1] != ks[nblocks - 1]:
        raise DimensionMismatchError("trailing block is not square")

    sizes = Ls * ws
    offs = np.concatenate(([0], np.cumsum(sizes)[:-1])).astype(np.int64)
    poffs = np.concatenate(([0], np.cumsum(ks)[:-1])).astype(np.int64)
    return offs, Ls, ws, ks, carrys, ovs, poffs, int(sizes.sum())


def _pack_panels(m: AbdMatrix, offs, ws, carrys, total: int) -> np.ndarray:
    panels = np.zeros(total)
    for i, blk in enumerate(m.blocks):
        base = int(offs[i]) + int(carrys[i]) * int(ws[i])
        panels[base:base + blk.size] = blk.ravel()
    return panels


def factorize(m: AbdMatrix, tol_rtol: float = SINGULARITY_RTOL) -> AbdFactorization:
    """Factorize an ABD matrix for repeated (transpose) solves.

    Raises SingularMatrixError when a pivot column is numerically zero
    (magnitude below ``tol_rtol`` times the largest block entry).
    """
    s = m.structure
    offs, Ls, ws, ks, carrys, ovs, poffs, total = _layout(s)
    panels = _pack_panels(m, offs, ws, carrys, total)

    scale = max(float(np.max(np.abs(blk))) if blk.size else 0.0
                for blk in m.blocks)
    tol = tol_rtol * scale if scale > 0 else tol_rtol

    piv = np.zeros(s.n, dtype=np.int64)
    bad_s, bad_j = _factor_kernel(panels, offs, Ls, ws, ks, carrys, ovs,
                                  piv, poffs, tol)
    if bad_s >= 0:
        raise SingularMatrixError(
            f"zero pivot in block {bad_s}, local column {bad_j}")
    return AbdFactorization(s, panels, offs, Ls, ws, ks, carrys, piv, poffs,
                            s.row_starts, s.col_starts)


def _check_rhs(fac: AbdFactorization, f) -> tuple[np.ndarray, bool]:
    f = np.asarray(f, dtype=np.float64)
    vector = f.ndim == 1
    if vector:
        f = f[:, None]
    if f.shape[0] != fac.n:
        raise DimensionMismatchError(
            f"rhs has {f.shape[0]} rows, system dimension is {fac.n}")
    return f, vector


def solve(fac: AbdFactorization, f) -> np.ndarray:
    """Solve A x = f. Accepts a vector or a matrix of stacked rhs columns."""
    f, vector = _check_rhs(fac, f)
    x = np.empty_like(f)
    _solve_kernel(fac.panels, fac.offs, fac.Ls, fac.ws, fac.ks, fac.carrys,
                  fac.piv, fac.poffs, fac.row_starts, fac.col_starts, f, x)
    return x[:, 0] if vector else x


def solve_transpose(fac: AbdFactorization, g) -> np.ndarray:
    """Solve A^T x = g with the factors of A (adjoint of ``solve``)."""
    g, vector = _check_rhs(fac, g)
    x = np.empty_like(g)
    _solve_transpose_kernel(fac.panels, fac.offs, fac.Ls, fac.ws, fac.ks,
                            fac.carrys, fac.piv, fac.poffs, fac.row_starts,
                            fac.col_starts, g, x)
    return x[:, 0] if vector else x


def uniform_chain_structure(n: int, width: int) -> BlockStructure:
    """Chain of equal blocks: ``n/width`` blocks, footprints two cells wide."""
    if n % width != 0 or n // width < 2:
        raise DimensionMismatchError("n must be a multiple of width with >= 2 blocks")
    b = n // width
    rows = (width,) * b
    cols = (2 * width,) * (b - 1) + (width,)
    ov = (0,) + (width,) * (b - 1)
    return BlockStructure(rows, cols, ov)


def random_abd(structure: BlockStructure, rng: np.random.Generator,
               dominance: float = 0.0) -> AbdMatrix:
    """Random ABD matrix; ``dominance > 0`` boosts in-footprint diagonal entries."""
    blocks = []
    rs = structure.row_starts
    cs = structure.col_starts
    for i in range(structure.block_count):
        blk = rng.standard_normal((structure.rows_per_block[i],
                                   structure.cols_per_block[i]))
        if dominance > 0:
            for r in range(blk.shape[0]):
                g = rs[i] + r
                c = g - cs[i]
                if 0 <= c < blk.shape[1]:
                    blk[r, c] += dominance * np.sign(blk[r, c] or 1.0)
        blocks.append(blk)
    return assemble(structure, blocks)


def benchmark_scaling(sizes, width_mode="sqrt", repeats: int = 3,
                      seed: int = 0):
    """Time factorize+solve for random chain systems of the given sizes.

    ``width_mode`` is "sqrt" (block width ~ sqrt(n)) or a fixed integer
    width. Returns a list of dicts with keys n, time_factorize_s,
    time_solve_s.
    """
    sizes = [int(n) for n in sizes]
    if any(b >= a for a, b in zip(sizes[1:], sizes[:-1])):
        raise ValueError("sizes must be strictly increasing")
    if any(n < 64 for n in sizes):
        raise ValueError("sizes must be >= 64")
    rng = np.random.default_rng(seed)
    table = []
    for n in sizes:
        if width_mode == "sqrt":
            width = max(2, int(round(np.sqrt(n))))
        else:
            width = int(width_mode)
        width = min(width, n // 2)
        n_eff = (n // width) * width
        structure = uniform_chain_structure(n_eff, width)
        mat = random_abd(structure, rng, dominance=3.0 * width)
        f = rng.standard_normal(n_eff)[:, None]
        factorize(mat)  # warm the jit before timing
        offs, Ls, ws, ks, carrys, ovs, poffs, total = _layout(structure)
        panels0 = _pack_panels(mat, offs, ws, carrys, total)
        scale = max(float(np.max(np.abs(blk))) for blk in mat.blocks)
        tol = SINGULARITY_RTOL * scale
        piv = np.zeros(n_eff, dtype=np.int64)
        x = np.empty_like(f)
        # time the numerical kernels on pre-packed panels so small sizes
        # are not swamped by one-time assembly bookkeeping
        t_fact = []
        t_solve = []
        for _ in range(repeats):
            panels = panels0.copy()
            t0 = time.perf_counter()
            _factor_kernel(panels, offs, Ls, ws, ks, carrys, ovs, piv,
                           poffs, tol)
            t1 = time.perf_counter()
            _solve_kernel(panels, offs, Ls, ws, ks, carrys, piv, poffs,
                          structure.row_starts, structure.col_starts, f, x)
            t2 = time.perf_counter()
            t_fact.append(t1 - t0)
            t_solve.append(t2 - t1)
        table.append({"n": n_eff,
                      "time_factorize_s": min(t_fact),
                      "time_solve_s": min(t_solve)})
    return table


def scaling_exponent(table) -> float:
    """Fitted log-log slope of total time vs n; nan for a single row."""
    if len(table) < 2:
        return float("nan")
    ns = np.array([row["n"] for row in table], dtype=float)
    ts = np.array([row["time_factorize_s"] + row["time_solve_s"]
                   for row in table])
    slope = np.polyfit(np.log(ns), np.log(ts), 1)[0]
    return float(slope)
