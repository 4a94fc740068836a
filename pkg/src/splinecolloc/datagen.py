"""Reference data generation.

Finite-difference solvers for the heat equation (explicit, Dirichlet
zero) and the damped wave equation (fourth-order 5x5 Laplacian stencil,
zero-Neumann), plus the four analytic fields used by the interpolation
comparison tables. All randomness is seeded.
"""

from __future__ import annotations

import numpy as np

from .trajectory import Trajectory


class DataGenError(Exception):
    pass


class InstabilityError(DataGenError):
    pass


def _gaussian_bumps(rng: np.random.Generator, grid: int, extent: float,
                    n_min: int = 1, n_max: int = 3) -> np.ndarray:
    xs = np.linspace(0.0, extent, grid)
    gx, gy = np.meshgrid(xs, xs)
    u = np.zeros((grid, grid))
    for _ in range(rng.integers(n_min, n_max + 1)):
        cx, cy = rng.uniform(0.25 * extent, 0.75 * extent, size=2)
        width = rng.uniform(0.05 * extent, 0.15 * extent)
        amp = rng.uniform(0.5, 1.0)
        u += amp * np.exp(-((gx - cx) ** 2 + (gy - cy) ** 2) / (2 * width**2))
    return u


def heat_solve(initial=None, grid: int = 64, steps: int = 50,
               dt_out: float = 0.1, seed: int = 0,
               internal_dt: float | None = None) -> Trajectory:
    """Explicit diffusion on the unit square with zero Dirichlet boundary.

    Returns ``steps + 1`` frames at spacing ``dt_out``. The internal step
    obeys dt <= h^2/4; output frames subsample the internal march.
    """
    h = 1.0 / (grid - 1)
    stable = 0.25 * h * h
    dt = stable * 0.9 if internal_dt is None else internal_dt
    if dt > stable:
        raise InstabilityError(f"dt={dt} violates the bound h^2/4={stable}")
    if initial is None:
        rng = np.random.default_rng(seed)
        u = _gaussian_bumps(rng, grid, 1.0)
    else:
        u = np.asarray(initial, dtype=np.float64).copy()
        if u.shape != (grid, grid):
            raise DataGenError(f"initial condition must be {(grid, grid)}")
    u[0, :] = u[-1, :] = u[:, 0] = u[:, -1] = 0.0

    sub = max(1, int(round(dt_out / dt)))
    dt = dt_out / sub
    peak0 = max(np.max(np.abs(u)), 1e-30)
    frames = np.empty((steps + 1, grid, grid))
    frames[0] = u
    for k in range(1, steps + 1):
        for _ in range(sub):
            lap = np.zeros_like(u)
            lap[1:-1, 1:-1] = (u[2:, 1:-1] + u[:-2, 1:-1] + u[1:-1, 2:]
                               + u[1:-1, :-2] - 4 * u[1:-1, 1:-1]) / (h * h)
            u = u + dt * lap
        if np.max(np.abs(u)) > 10 * peak0:
            raise InstabilityError("solution grew; scheme unstable")
        frames[k] = u
    times = dt_out * np.arange(steps + 1)
    return Trajectory(times, frames, extent=(0.0, 1.0, 0.0, 1.0),
                      meta={"equation": "heat", "h": h})


# fourth-order accurate 1D Laplacian stencil; tensorized it gives the
# 5x5 discrete Laplace operator
_LAP5 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0


def _laplacian5_neumann(u: np.ndarray, h: float) -> np.ndarray:
    """5-point fourth-order Laplacian with mirror (zero-Neumann) boundaries."""
    p = np.pad(u, 2, mode="reflect")
    out = np.zeros_like(u)
    for k, c in enumerate(_LAP5):
        out += c * p[k:k + u.shape[0], 2:2 + u.shape[1]]
        out += c * p[2:2 + u.shape[0], k:k + u.shape[1]]
    return out / (h * h)


def wave_solve(initial=None, grid: int = 64, c: float = 330.0, k: float = 50.0,
               steps: int = 10, dt_out: float = 1.0, seed: int = 0,
               extent: float = 64.0, cfl: float = 0.5) -> Trajectory:
    """Damped wave equation w_tt + k w_t = c^2 Lap w, zero-Neumann walls.

    State frames carry two channels (w, dw/dt). The internal step honours
    c*dt/h <= 1/sqrt(2); the damping term is treated implicitly.
    """
    h = extent / (grid - 1)
    dt_max = h / (c * np.sqrt(2.0))
    if cfl * dt_max <= 0:
        raise DataGenError("bad CFL configuration")
    sub = max(1, int(np.ceil(dt_out / (cfl * dt_max))))
    dt = dt_out / sub
    if c * dt / h > 1 / np.sqrt(2.0) + 1e-12:
        raise InstabilityError(
            f"dt={dt} violates the CFL bound {dt_max} for c={c}, h={h}")

    if initial is None:
        rng = np.random.default_rng(seed)
        w = _gaussian_bumps(rng, grid, extent)
        v = np.zeros_like(w)
    else:
        state = np.asarray(initial, dtype=np.float64)
        if state.shape != (2, grid, grid):
            raise DataGenError(f"initial state must be {(2, grid, grid)}")
        w, v = state[0].copy(), state[1].copy()

    frames = np.empty((steps + 1, 2, grid, grid))
    frames[0] = (w, v)
    for s in range(1, steps + 1):
        for _ in range(sub):
            # semi-implicit: damping solved exactly in the velocity update
            v = (v + dt * c * c * _laplacian5_neumann(w, h)) / (1.0 + dt * k)
            w = w + dt * v
        if not np.all(np.isfinite(w)):
            raise InstabilityError("wave solution diverged")
        frames[s] = (w, v)
    times = dt_out * np.arange(steps + 1)
    return Trajectory(times, frames, extent=(0.0, extent, 0.0, extent),
                      meta={"equation": "damped_wave", "c": c, "k": k, "h": h})


def wave_energy(frame: np.ndarray, h: float, c: float) -> float:
    """Discrete energy 0.5 * sum(v^2 + c^2 |grad w|^2) * h^2."""
    w, v = frame
    gx = np.diff(w, axis=1) / h
    gy = np.diff(w, axis=0) / h
    return 0.5 * float(np.sum(v**2) + c**2 * (np.sum(gx**2) + np.sum(gy**2))) * h * h


_ANALYTIC = {
    "1d-linear": {
        "dims": 1,
        "fn": lambda x: x**4 - 2 * x**3 + 1.16 * x**2 - 0.16 * x,
        "order": 4,
    },
    "1d-nonlinear": {
        "dims": 1,
        "fn": lambda x: np.sin(3 * np.pi * x),
        "order": 4,
    },
    "2d-linear": {
        "dims": 2,
        "fn": lambda x, y: x**2 * y**2 - x**2 * y - x * y**2 + x * y,
        "order": 3,
    },
    "2d-nonlinear": {
        "dims": 2,
        "fn": lambda x, y: np.sin(3 * np.pi * x) * np.sin(3 * np.pi * y),
        "order": 3,
    },
}

ANALYTIC_NAMES = tuple(_ANALYTIC)


def analytic_field(name: str, resolution: int):
    """Uniform samples of a named analytic test field plus its evaluator.

    1D: returns (xs, values, fn). 2D: returns ((xs, ys), values, fn) with
    values indexed [iy, ix]. ``fn`` is the exact closure.
    """
    try:
        spec = _ANALYTIC[name]
    except KeyError:
        raise DataGenError(
            f"unknown field {name!r}; choose from {sorted(_ANALYTIC)}") from None
    fn = spec["fn"]
    xs = np.linspace(0.0, 1.0, resolution)
    if spec["dims"] == 1:
        return xs, fn(xs), fn
    gx, gy = np.meshgrid(xs, xs)
    return (xs, xs), fn(gx, gy), fn


def analytic_recommended_order(name: str) -> int:
    """Collocation order giving exact or near-best recovery of the field."""
    return _ANALYTIC[name]["order"]
