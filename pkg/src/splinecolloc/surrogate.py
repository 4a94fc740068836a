"""Desk-scale message-passing surrogate trained through collocation fits.

The model is an encoder / processor / decoder graph network stepping the
field state on a coarse collocation grid. Training minimizes L = L_s +
L_i: the sample-point error of the autoregressive rollout plus the
interpolation error of the space-time spline fitted through the rollout,
differentiated end to end with the tape in ``autodiff`` (linear solves
backpropagate through transpose solves). Three variants: post (L_s only,
splines applied after), e2e (full loss), e2e-adaptive (collocation
points migrate along the time-derivative gradient between two forward
passes; positions carry no gradient).
"""

from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field as dc_field

import numpy as np
from scipy.interpolate import RectBivariateSpline

from . import abd, adaptive, autodiff as ad, datagen, osc1d, osc2d, spacetime
from .basis import uniform_grid


class SurrogateError(Exception):
    pass


class TrainingDivergedError(SurrogateError):
    """Loss exceeded the divergence guard during training."""


DIVERGENCE_GUARD = 1e6
VARIANTS = ("post", "e2e", "e2e-adaptive")


# ---------------------------------------------------------------------------
# graph


@dataclass(frozen=True)
class GridGraph:
    """Collocation-point graph: node positions plus directed edges.

    Edge features are the displacement and distance of dst relative to
    src, computed in extent-normalized coordinates.
    """

    positions: np.ndarray        # (n, 2)
    src: np.ndarray              # (m,)
    dst: np.ndarray              # (m,)
    extent: tuple[float, float, float, float]

    def __post_init__(self):
        object.__setattr__(self, "positions",
                           np.asarray(self.positions, dtype=np.float64))
        object.__setattr__(self, "src", np.asarray(self.src, dtype=np.int64))
        object.__setattr__(self, "dst", np.asarray(self.dst, dtype=np.int64))
        degree = np.bincount(self.dst, minlength=len(self.positions))
        if np.any(degree < 2):
            raise SurrogateError("every node needs at least 2 neighbors")

    @property
    def n_nodes(self) -> int:
        return len(self.positions)

    @property
    def n_edges(self) -> int:
        return len(self.src)

    def normalized_positions(self) -> np.ndarray:
        x0, x1, y0, y1 = self.extent
        out = np.empty_like(self.positions)
        out[:, 0] = (self.positions[:, 0] - x0) / (x1 - x0)
        out[:, 1] = (self.positions[:, 1] - y0) / (y1 - y0)
        return out

    def edge_features(self) -> np.ndarray:
        p = self.normalized_positions()
        d = p[self.dst] - p[self.src]
        return np.column_stack([d, np.hypot(d[:, 0], d[:, 1])])

    def incidence(self) -> np.ndarray:
        """0/1 matrix aggregating edge messages at their dst node."""
        inc = np.zeros((self.n_nodes, self.n_edges))
        inc[self.dst, np.arange(self.n_edges)] = 1.0
        return inc

    @classmethod
    def grid(cls, xs, ys, extent=None) -> "GridGraph":
        """4-neighbor connectivity on the tensor grid, both directions."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        nx, ny = len(xs), len(ys)
        gx, gy = np.meshgrid(xs, ys)
        pos = np.column_stack([gx.ravel(), gy.ravel()])
        src, dst = [], []
        for iy in range(ny):
            for ix in range(nx):
                a = iy * nx + ix
                if ix + 1 < nx:
                    b = a + 1
                    src += [a, b]
                    dst += [b, a]
                if iy + 1 < ny:
                    b = a + nx
                    src += [a, b]
                    dst += [b, a]
        if extent is None:
            extent = (float(xs[0]), float(xs[-1]), float(ys[0]), float(ys[-1]))
        return cls(pos, np.array(src), np.array(dst), extent)

    def with_positions(self, positions) -> "GridGraph":
        """Same connectivity at new node coordinates (adapted points)."""
        return GridGraph(positions, self.src, self.dst, self.extent)


# ---------------------------------------------------------------------------
# parameters


_MLP_LAYERS = 3


@dataclass
class MpnnParams:
    """Weight arrays of the encoder, processors and decoder MLPs."""

    weights: dict
    state_channels: int
    hidden: int
    n_processors: int

    def __post_init__(self):
        for k, w in self.weights.items():
            if not np.all(np.isfinite(w)):
                raise SurrogateError(f"non-finite weights in {k}")

    def save(self, path):
        np.savez_compressed(
            path, __meta__=json.dumps({
                "state_channels": self.state_channels, "hidden": self.hidden,
                "n_processors": self.n_processors,
                "names": sorted(self.weights)}),
            **self.weights)

    @classmethod
    def load(cls, path) -> "MpnnParams":
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["__meta__"]))
            weights = {k: z[k] for k in meta["names"]}
        return cls(weights, meta["state_channels"], meta["hidden"],
                   meta["n_processors"])


def _mlp_shapes(sizes):
    return list(zip(sizes[:-1], sizes[1:]))


def init_params(state_channels: int, hidden: int = 64, n_processors: int = 3,
                seed: int = 0) -> MpnnParams:
    """Uniform +-sqrt(6/(fan_in+fan_out)) weights, zero biases."""
    rng = np.random.default_rng(seed)
    h = hidden
    specs = {
        "enc_node": [state_channels + 2] + [h] * _MLP_LAYERS,
        "enc_edge": [3] + [h] * _MLP_LAYERS,
        "dec": [h] * _MLP_LAYERS + [state_channels],
    }
    for i in range(n_processors):
        specs[f"proc{i}_edge"] = [3 * h] + [h] * _MLP_LAYERS
        specs[f"proc{i}_node"] = [2 * h] + [h] * _MLP_LAYERS
    weights = {}
    for name, sizes in specs.items():
        for li, (fi, fo) in enumerate(_mlp_shapes(sizes)):
            a = np.sqrt(6.0 / (fi + fo))
            weights[f"{name}_W{li}"] = rng.uniform(-a, a, (fi, fo))
            weights[f"{name}_b{li}"] = np.zeros(fo)
    return MpnnParams(weights, state_channels, hidden, n_processors)


# ---------------------------------------------------------------------------
# forward pass


def _param_tensors(tape: ad.Tape, params: MpnnParams) -> dict:
    return {k: tape.tensor(v, name=k) for k, v in params.weights.items()}


def _mlp(pt: dict, prefix: str, x: ad.Tensor) -> ad.Tensor:
    h = x
    for li in range(_MLP_LAYERS):
        h = ad.add(ad.matmul(h, pt[f"{prefix}_W{li}"]), pt[f"{prefix}_b{li}"])
        if li < _MLP_LAYERS - 1:
            h = ad.relu(h)
    return h


class _GraphConstants:
    """Per-tape constant tensors derived from a GridGraph."""

    def __init__(self, tape: ad.Tape, graph: GridGraph):
        self.coords = tape.tensor(graph.normalized_positions())
        self.edge_feat = tape.tensor(graph.edge_features())
        self.inc = tape.tensor(graph.incidence())
        self.src = graph.src
        self.dst = graph.dst


def _step(pt: dict, gc: _GraphConstants, state: ad.Tensor,
          n_processors: int) -> ad.Tensor:
    h = _mlp(pt, "enc_node", ad.concat([state, gc.coords], axis=1))
    e = _mlp(pt, "enc_edge", gc.edge_feat)
    for i in range(n_processors):
        msg_in = ad.concat([ad.gather_rows(h, gc.src),
                            ad.gather_rows(h, gc.dst), e], axis=1)
        e = ad.add(e, _mlp(pt, f"proc{i}_edge", msg_in))
        agg = ad.matmul(gc.inc, e)
        h = ad.add(h, _mlp(pt, f"proc{i}_node", ad.concat([h, agg], axis=1)))
    delta = _mlp(pt, "dec", h)
    return ad.add(state, delta)


def taped_rollout(tape: ad.Tape, pt: dict, params: MpnnParams,
                  graph: GridGraph, state0, steps: int) -> list[ad.Tensor]:
    """Autoregressive rollout on the tape; returns steps+1 state tensors."""
    gc = _GraphConstants(tape, graph)
    state = state0 if isinstance(state0, ad.Tensor) else tape.tensor(state0)
    states = [state]
    for _ in range(steps):
        state = _step(pt, gc, state, params.n_processors)
        states.append(state)
    return states


def mpnn_step(params: MpnnParams, graph: GridGraph, state) -> np.ndarray:
    """One forward step without gradient tracking."""
    state = np.asarray(state, dtype=np.float64)
    if state.shape != (graph.n_nodes, params.state_channels):
        raise SurrogateError(
            f"state shape {state.shape} != "
            f"{(graph.n_nodes, params.state_channels)}")
    tape = ad.Tape()
    out = taped_rollout(tape, _param_tensors(tape, params), params, graph,
                        state, 1)
    return out[1].value


def rollout(params: MpnnParams, graph: GridGraph, state0,
            steps: int) -> np.ndarray:
    """(steps+1, n_nodes, channels) rollout including the initial state."""
    if steps < 1:
        raise SurrogateError("rollout needs steps >= 1")
    state0 = np.asarray(state0, dtype=np.float64)
    if state0.shape != (graph.n_nodes, params.state_channels):
        raise SurrogateError(
            f"state shape {state0.shape} != "
            f"{(graph.n_nodes, params.state_channels)}")
    tape = ad.Tape()
    states = taped_rollout(tape, _param_tensors(tape, params), params, graph,
                           state0, steps)
    return np.stack([s.value for s in states])


def backward(tape: ad.Tape, loss: ad.Tensor, pt: dict) -> dict:
    """Reverse sweep; returns gradient arrays per parameter name."""
    ad.backward(tape, loss)
    return {k: t.grad for k, t in pt.items()}


# ---------------------------------------------------------------------------
# differentiable collocation pipeline


class OscPipeline:
    """Constant operators turning rollout states into fine-grid values.

    Per channel: a 1D fit across the sample times at every node, then an
    evaluation at the interpolation times, then a 2D fit of each
    resulting snapshot, evaluated at the fine interpolation points. All
    solves run on the tape; everything else is constant matrices.
    """

    def __init__(self, sample_times, query_times, xs, ys, fine_points,
                 r_time: int = 3):
        self.sample_times = np.asarray(sample_times, dtype=np.float64)
        self.query_times = np.asarray(query_times, dtype=np.float64)
        self.xs = np.asarray(xs, dtype=np.float64)
        self.ys = np.asarray(ys, dtype=np.float64)
        self.fine_points = np.asarray(fine_points, dtype=np.float64)
        self.nx = len(self.xs)
        self.ny = len(self.ys)
        self.n_nodes = self.nx * self.ny

        # time direction
        bp = osc1d.interp_breakpoints(self.sample_times, r_time)
        grid_t = uniform_grid(0, 1, 1, r_time)
        from .basis import PartitionGrid
        self.grid_t = PartitionGrid((bp,), r_time, grid_t.colloc_offsets)
        base = osc1d.Osc1dProblem(
            self.grid_t,
            osc1d.InterpMode(self.sample_times,
                             np.zeros_like(self.sample_times)))
        matrix, _ = osc1d.build_system(base)
        self.fac_t = abd.factorize(matrix)
        self.Rt = np.zeros((matrix.n, len(self.sample_times)))
        self.Rt[osc1d.interp_row_map(self.grid_t.cells(), r_time),
                np.arange(len(self.sample_times))] = 1.0
        self.Et = osc1d.coeff_eval_matrix(self.grid_t, self.query_times)

        # space direction
        self.opx = osc2d.HermiteFitOperator(self.xs)
        self.opy = osc2d.HermiteFitOperator(self.ys)
        self.Rx = np.zeros((self.opx.n, self.nx))
        self.Rx[self.opx.row_map, np.arange(self.nx)] = 1.0
        self.Ry = np.zeros((self.opy.n, self.ny))
        self.Ry[self.opy.row_map, np.arange(self.ny)] = 1.0
        self.idx_even_x = np.arange(0, self.opx.n, 2)
        self.idx_odd_x = np.arange(1, self.opx.n, 2)
        nx_nodes = self.opx.basis.node_count
        ny_nodes = self.opy.basis.node_count
        E = osc2d.surface_eval_matrix(self.opx.basis, self.opy.basis,
                                      self.fine_points)
        # re-index E's per-node coefficient columns to the two stacked
        # (2*ny_nodes, nx_nodes) coefficient matrices of the y pass
        self.Mval = np.zeros((len(self.fine_points), 2 * ny_nodes * nx_nodes))
        self.Mslp = np.zeros_like(self.Mval)
        for iy in range(ny_nodes):
            for ix in range(nx_nodes):
                for q in range(2):
                    col = (2 * iy + q) * nx_nodes + ix
                    self.Mval[:, col] = E[:, (iy * nx_nodes + ix) * 4 + 2 * q]
                    self.Mslp[:, col] = E[:, (iy * nx_nodes + ix) * 4 + 1 + 2 * q]
        self.E_fine = E

    def time_interp(self, states: list[ad.Tensor], channel: int) -> ad.Tensor:
        """(n_query_times, n_nodes) values of one channel between steps."""
        tape = states[0].tape
        pick = np.zeros((states[0].value.shape[1], 1))
        pick[channel, 0] = 1.0
        rows = [ad.transpose(ad.matmul(s, pick)) for s in states]
        series = ad.concat(rows, axis=0)                 # (K+1, n_nodes)
        coeffs = ad.abd_solve(self.fac_t, ad.matmul(tape.tensor(self.Rt),
                                                    series))
        return ad.matmul(tape.tensor(self.Et), coeffs)

    def space_fit_eval(self, row: ad.Tensor) -> ad.Tensor:
        """(n_fine, 1) surface values fitted through one (1, n_nodes) row."""
        tape = row.tape
        v = ad.reshape(row, (self.ny, self.nx))
        ax = ad.abd_solve(self.fac_x, ad.matmul(tape.tensor(self.Rx),
                                                ad.transpose(v)))
        v_rows = ad.gather_rows(ax, self.idx_even_x)     # (nx_nodes, ny)
        s_rows = ad.gather_rows(ax, self.idx_odd_x)
        b_val = ad.abd_solve(self.fac_y, ad.matmul(tape.tensor(self.Ry),
                                                   ad.transpose(v_rows)))
        b_slp = ad.abd_solve(self.fac_y, ad.matmul(tape.tensor(self.Ry),
                                                   ad.transpose(s_rows)))
        pred = ad.add(
            ad.matmul(tape.tensor(self.Mval), ad.reshape(b_val, (-1, 1))),
            ad.matmul(tape.tensor(self.Mslp), ad.reshape(b_slp, (-1, 1))))
        return pred

    @property
    def fac_x(self):
        return self.opx.fac

    @property
    def fac_y(self):
        return self.opy.fac

    def scattered_operator(self, positions,
                           ridge_rel: float = 1e-4) -> np.ndarray:
        """Linear map from values at adapted positions to fine-point values.

        Migrated points can pile up near cell edges: near-coincident
        points let the exact square fit trade huge opposing coefficients
        against tiny value differences, amplifying prediction noise.
        Near-duplicates are therefore merged (states averaged) and the
        coefficients come from a ridge-regularized least-squares fit.
        Positions are constants, so the whole map is one constant matrix.
        """
        positions = np.asarray(positions, dtype=np.float64)
        n = positions.shape[0]
        widths = [np.diff(b).min() for b in
                  (self.opx.basis.breakpoints, self.opy.basis.breakpoints)]
        tol = 1e-3 * min(widths)
        keys = np.round(positions / tol).astype(np.int64)
        _, group, counts = np.unique(keys, axis=0, return_inverse=True,
                                     return_counts=True)
        avg = np.zeros((len(counts), n))
        avg[group, np.arange(n)] = 1.0 / counts[group]
        merged = avg @ positions
        E = osc2d.surface_eval_matrix(self.opx.basis, self.opy.basis, merged)
        gram = E.T @ E
        lam = ridge_rel * np.trace(gram) / gram.shape[0]
        coeff_map = np.linalg.solve(gram + lam * np.eye(gram.shape[0]), E.T)
        return self.E_fine @ coeff_map @ avg

    def scattered_fit_eval(self, fit_map: np.ndarray,
                           row: ad.Tensor) -> ad.Tensor:
        return ad.matmul(row.tape.tensor(fit_map), ad.reshape(row, (-1, 1)))

    def interp_predictions(self, states: list[ad.Tensor],
                           dso: np.ndarray | None = None):
        """List over channels of (n_query, n_fine) prediction tensors."""
        ch = states[0].value.shape[1]
        out = []
        for c in range(ch):
            vals = self.time_interp(states, c)
            rows = []
            for q in range(len(self.query_times)):
                row = ad.gather_rows(vals, [q])
                if dso is None:
                    pred = self.space_fit_eval(row)
                else:
                    pred = self.scattered_fit_eval(dso, row)
                rows.append(ad.transpose(pred))
            out.append(ad.concat(rows, axis=0))
        return out


def composite_loss(pred_states, sample_truth, fine_truth,
                   pipeline: OscPipeline):
    """(L, L_s, L_i) of a rollout, computed without gradient tracking.

    ``pred_states``/``sample_truth``: (K+1, n_nodes, ch);
    ``fine_truth``: (n_query, n_fine, ch).
    """
    pred_states = np.asarray(pred_states, dtype=np.float64)
    sample_truth = np.asarray(sample_truth, dtype=np.float64)
    fine_truth = np.asarray(fine_truth, dtype=np.float64)
    if pred_states.shape != sample_truth.shape:
        raise SurrogateError("prediction/reference shape mismatch")
    tape = ad.Tape()
    states = [tape.tensor(f) for f in pred_states]
    l_s = float(((pred_states - sample_truth) ** 2).sum())
    preds = pipeline.interp_predictions(states)
    l_i = sum(float(((p.value - fine_truth[:, :, c]) ** 2).sum())
              for c, p in enumerate(preds))
    return l_s + l_i, l_s, l_i


# ---------------------------------------------------------------------------
# datasets


@dataclass
class Dataset:
    """Desk-scale training set: FD trajectories resampled onto the grid."""

    name: str
    state_channels: int
    xs: np.ndarray                   # collocation x coordinates (2N+2,)
    ys: np.ndarray
    sample_times: np.ndarray         # model step times (K+1,)
    query_times: np.ndarray          # skipped frame times for L_i
    fine_points: np.ndarray          # (n_fine, 2)
    extent: tuple
    sample_truth: list               # per traj (K+1, n_nodes, ch)
    fine_truth: list                 # per traj (n_query, n_fine, ch)
    raw_frames: list                 # per traj (K+1, ch, gy, gx) FD frames
    raw_axes: tuple = dc_field(default=())  # (xs_fine, ys_fine)

    @property
    def n_traj(self) -> int:
        return len(self.sample_truth)

    def graph(self) -> GridGraph:
        return GridGraph.grid(self.xs, self.ys, self.extent)

    def truth_at(self, traj: int, step: int, positions) -> np.ndarray:
        """Ground truth of sample frame ``step`` at arbitrary positions."""
        xs_f, ys_f = self.raw_axes
        pts = np.asarray(positions, dtype=np.float64)
        out = np.empty((len(pts), self.state_channels))
        for c in range(self.state_channels):
            spl = RectBivariateSpline(ys_f, xs_f,
                                      self.raw_frames[traj][step, c])
            out[:, c] = spl(pts[:, 1], pts[:, 0], grid=False)
        return out


def _resample_grid(frame: np.ndarray, xs_f, ys_f, xs, ys) -> np.ndarray:
    spl = RectBivariateSpline(ys_f, xs_f, frame)
    return spl(ys, xs, grid=True)


def make_dataset(name: str, n_traj: int = 8, seed: int = 0,
                 n_cells: int = 5, rollout_steps: int = 5,
                 fine_stride: int = 4, dt_out: float | None = None) -> Dataset:
    """Heat or damped-wave trajectories on a (2N+2)^2 collocation grid.

    The model steps at twice the exported frame spacing; the skipped
    frames provide the interpolation targets of L_i at a strided subset
    of the FD grid.
    """
    if name not in ("heat", "wave"):
        raise SurrogateError(f"unknown dataset {name!r} (heat or wave)")
    fd_grid = 64
    n_frames = 2 * rollout_steps  # FD steps; frames = n_frames + 1
    grid = uniform_grid(0.0, 1.0, n_cells, osc2d.HERMITE_ORDER)
    unit = np.concatenate(([0.0], grid.collocation_points(), [1.0]))

    sample_idx = np.arange(0, n_frames + 1, 2)
    query_idx = np.arange(1, n_frames, 2)
    fi = np.arange(0, fd_grid, fine_stride)

    sample_truth, fine_truth, raw_frames = [], [], []
    for k in range(n_traj):
        if name == "heat":
            traj = datagen.heat_solve(grid=fd_grid, steps=n_frames,
                                      dt_out=dt_out or 0.1,
                                      seed=seed * 1000 + k)
            frames = traj.frames[:, None]            # add channel axis
        else:
            traj = datagen.wave_solve(grid=fd_grid, steps=n_frames,
                                      dt_out=dt_out or 0.05,
                                      seed=seed * 1000 + k)
            frames = traj.frames
        x0, x1, y0, y1 = traj.extent
        xs_f = np.linspace(x0, x1, fd_grid)
        ys_f = np.linspace(y0, y1, fd_grid)
        xs = x0 + (x1 - x0) * unit
        ys = y0 + (y1 - y0) * unit
        ch = frames.shape[1]
        st = np.empty((len(sample_idx), len(ys) * len(xs), ch))
        for j, t_idx in enumerate(sample_idx):
            for c in range(ch):
                st[j, :, c] = _resample_grid(frames[t_idx, c], xs_f, ys_f,
                                             xs, ys).ravel()
        ft = np.empty((len(query_idx), len(fi) * len(fi), ch))
        for j, t_idx in enumerate(query_idx):
            for c in range(ch):
                ft[j, :, c] = frames[t_idx, c][np.ix_(fi, fi)].ravel()
        sample_truth.append(st)
        fine_truth.append(ft)
        raw_frames.append(frames[sample_idx])
        times = traj.times

    gxf, gyf = np.meshgrid(xs_f[fi], ys_f[fi])
    return Dataset(
        name=name, state_channels=ch, xs=xs, ys=ys,
        sample_times=times[sample_idx], query_times=times[query_idx],
        fine_points=np.column_stack([gxf.ravel(), gyf.ravel()]),
        extent=(x0, x1, y0, y1), sample_truth=sample_truth,
        fine_truth=fine_truth, raw_frames=raw_frames,
        raw_axes=(xs_f, ys_f))


# ---------------------------------------------------------------------------
# training


@dataclass
class TrainConfig:
    dataset: str = "heat"
    variant: str = "e2e"
    epochs: int = 100
    seed: int = 0
    lr: float = 1e-3
    lr_decay: float = 0.85
    lr_decay_every: int = 500
    batch: int = 8
    hidden: int = 64
    n_processors: int = 3
    adapt_every: int = 1
    adapt_warmup: int | None = None  # static epochs before migration starts
    checkpoint_path: str | None = None
    metrics_path: str | None = None

    def __post_init__(self):
        if self.variant not in VARIANTS:
            raise SurrogateError(
                f"unknown variant {self.variant!r}; choose from {VARIANTS}")
        if self.epochs > 200:
            raise SurrogateError("desk scale caps epochs at 200")


class _Adam:
    def __init__(self, params: MpnnParams, cfg: TrainConfig):
        self.cfg = cfg
        self.m = {k: np.zeros_like(v) for k, v in params.weights.items()}
        self.v = {k: np.zeros_like(v) for k, v in params.weights.items()}
        self.t = 0

    def step(self, params: MpnnParams, grads: dict, epoch: int):
        self.t += 1
        lr = self.cfg.lr * self.cfg.lr_decay ** (epoch // self.cfg.lr_decay_every)
        b1, b2, eps = 0.9, 0.999, 1e-8
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            mhat = self.m[k] / (1 - b1 ** self.t)
            vhat = self.v[k] / (1 - b2 ** self.t)
            params.weights[k] -= lr * mhat / (np.sqrt(vhat) + eps)


def _adapted_setup(params: MpnnParams, data: Dataset, graph: GridGraph,
                   pipeline: OscPipeline, traj: int):
    """Untaped first pass: static rollout, surrogate fit, point migration."""
    state0 = data.sample_truth[traj][0]
    pred = rollout(params, graph, state0, len(data.sample_times) - 1)
    frames = pred[:, :, 0].reshape(-1, pipeline.ny, pipeline.nx)
    st = spacetime.SpaceTimeSurrogate(data.sample_times, frames,
                                      data.xs, data.ys)
    t_mid = float(data.query_times[len(data.query_times) // 2])
    new_pos = adaptive.adapt_points(graph.positions, st, t_mid)
    return graph.with_positions(new_pos), new_pos


def _traj_losses(tape, pt, params: MpnnParams, data: Dataset,
                 graph: GridGraph, pipeline: OscPipeline, traj: int,
                 variant: str, need_li: bool, adapted=None):
    """Record one trajectory's losses on the tape; returns tensors."""
    dso = None
    if variant == "e2e-adaptive":
        if adapted is None:
            run_graph, positions = _adapted_setup(params, data, graph,
                                                  pipeline, traj)
            dso = pipeline.scattered_operator(positions)
        else:
            run_graph, positions, dso = adapted
        state0 = data.truth_at(traj, 0, positions)
        truth = np.stack([data.truth_at(traj, k, positions)
                          for k in range(len(data.sample_times))])
    else:
        run_graph = graph
        state0 = data.sample_truth[traj][0]
        truth = data.sample_truth[traj]
    states = taped_rollout(tape, pt, params, run_graph, state0,
                           len(data.sample_times) - 1)
    l_s = None
    for k in range(1, len(states)):
        term = ad.sum_squares(ad.sub(states[k], truth[k]))
        l_s = term if l_s is None else ad.add(l_s, term)
    l_i = None
    if need_li:
        preds = pipeline.interp_predictions(states, dso)
        for c, p in enumerate(preds):
            term = ad.sum_squares(ad.sub(p, data.fine_truth[traj][:, :, c]))
            l_i = term if l_i is None else ad.add(l_i, term)
    return l_s, l_i


def evaluate_l_i(params: MpnnParams, data: Dataset,
                 pipeline: OscPipeline | None = None,
                 variant: str = "e2e") -> float:
    """Mean per-trajectory interpolation loss of the current model."""
    if pipeline is None:
        pipeline = OscPipeline(data.sample_times, data.query_times, data.xs,
                               data.ys, data.fine_points)
    graph = data.graph()
    total = 0.0
    for traj in range(data.n_traj):
        tape = ad.Tape()
        pt = _param_tensors(tape, params)
        _, l_i = _traj_losses(tape, pt, params, data, graph, pipeline, traj,
                              variant, need_li=True)
        total += float(l_i.value)
    return total / data.n_traj


def train(config: TrainConfig, data: Dataset | None = None,
          params: MpnnParams | None = None):
    """Full-batch Adam training; returns (params, metrics list of dicts)."""
    if data is None:
        data = make_dataset(config.dataset, n_traj=config.batch,
                            seed=config.seed)
    if params is None:
        params = init_params(data.state_channels, config.hidden,
                             config.n_processors, config.seed)
    pipeline = OscPipeline(data.sample_times, data.query_times, data.xs,
                           data.ys, data.fine_points)
    graph = data.graph()
    opt = _Adam(params, config)
    use_li = config.variant != "post"
    warmup = config.adapt_warmup
    if warmup is None:
        warmup = config.epochs // 4
    adapted: dict[int, tuple] = {}
    metrics = []
    for epoch in range(config.epochs):
        variant = config.variant
        if variant == "e2e-adaptive":
            if epoch < warmup:
                variant = "e2e"  # let the model settle before migrating
            elif (epoch - warmup) % config.adapt_every == 0:
                adapted.clear()
        grads = {k: np.zeros_like(v) for k, v in params.weights.items()}
        tot_l = tot_s = tot_i = 0.0
        for traj in range(data.n_traj):
            setup = None
            if variant == "e2e-adaptive":
                if traj not in adapted:
                    rg, pos = _adapted_setup(params, data, graph, pipeline,
                                             traj)
                    adapted[traj] = (rg, pos,
                                     pipeline.scattered_operator(pos))
                setup = adapted[traj]
            tape = ad.Tape()
            pt = _param_tensors(tape, params)
            l_s, l_i = _traj_losses(tape, pt, params, data, graph, pipeline,
                                    traj, variant, need_li=True,
                                    adapted=setup)
            loss = ad.add(l_s, l_i) if use_li else l_s
            g = backward(tape, loss, pt)
            for k in grads:
                grads[k] += g[k] / data.n_traj
            tot_s += float(l_s.value)
            tot_i += float(l_i.value)
            tot_l += float(l_s.value) + float(l_i.value)
        if not np.isfinite(tot_l) or tot_l > DIVERGENCE_GUARD:
            raise TrainingDivergedError(
                f"loss {tot_l} exceeded the guard at epoch {epoch}")
        opt.step(params, grads, epoch)
        metrics.append({"epoch": epoch, "L": tot_l / data.n_traj,
                        "L_s": tot_s / data.n_traj,
                        "L_i": tot_i / data.n_traj})
    if config.metrics_path:
        write_metrics(config.metrics_path, metrics)
    if config.checkpoint_path:
        params.save(config.checkpoint_path)
    return params, metrics


def write_metrics(path, metrics) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=["epoch", "L", "L_s", "L_i"])
        w.writeheader()
        w.writerows(metrics)
