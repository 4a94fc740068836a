"""Reference interpolators: nearest, (bi)linear and (bi)cubic.

Used to reproduce the accuracy comparison against collocation. The cubic
baseline is a natural cubic spline in 1D and a smooth bicubic spline in
2D (the usual grid-data choice; local Catmull-Rom style kernels would be
the other reading).
"""

from __future__ import annotations

import numpy as np
from scipy.interpolate import CubicSpline, RectBivariateSpline, \
    RegularGridInterpolator

from . import osc1d, osc2d
from .datagen import ANALYTIC_NAMES, DataGenError, analytic_field, \
    analytic_recommended_order


class OutOfHullError(Exception):
    pass


def _check_hull_1d(xs, q):
    q = np.asarray(q, dtype=np.float64)
    if np.any(q < xs[0]) or np.any(q > xs[-1]):
        raise OutOfHullError("query outside the sample hull")
    return q


def _is_2d(samples) -> bool:
    return isinstance(samples[0], tuple)


def _check_hull_2d(xs, ys, q):
    q = np.asarray(q, dtype=np.float64)
    if (np.any(q[:, 0] < xs[0]) or np.any(q[:, 0] > xs[-1])
            or np.any(q[:, 1] < ys[0]) or np.any(q[:, 1] > ys[-1])):
        raise OutOfHullError("query outside the sample hull")
    return q


def interp_nearest(samples, queries) -> np.ndarray:
    """Piecewise-constant interpolation; samples = (xs, v) or ((xs, ys), v)."""
    if _is_2d(samples):
        (xs, ys), v = samples
        q = _check_hull_2d(xs, ys, queries)
        itp = RegularGridInterpolator((ys, xs), v, method="nearest")
        return itp(q[:, ::-1])
    xs, v = samples
    q = _check_hull_1d(xs, queries)
    idx = np.clip(np.searchsorted(xs, q), 1, len(xs) - 1)
    left = q - xs[idx - 1] <= xs[idx] - q
    return np.where(left, v[idx - 1], v[idx])


def interp_linear(samples, queries) -> np.ndarray:
    """Piecewise-(bi)linear interpolation."""
    if _is_2d(samples):
        (xs, ys), v = samples
        q = _check_hull_2d(xs, ys, queries)
        itp = RegularGridInterpolator((ys, xs), v, method="linear")
        return itp(q[:, ::-1])
    xs, v = samples
    q = _check_hull_1d(xs, queries)
    return np.interp(q, xs, v)


def interp_cubic(samples, queries) -> np.ndarray:
    """Natural cubic spline (1D) or smooth bicubic spline (2D)."""
    if _is_2d(samples):
        (xs, ys), v = samples
        q = _check_hull_2d(xs, ys, queries)
        spl = RectBivariateSpline(ys, xs, v, kx=3, ky=3, s=0)
        return spl(q[:, 1], q[:, 0], grid=False)
    xs, v = samples
    q = _check_hull_1d(xs, queries)
    return CubicSpline(xs, v, bc_type="natural")(q)


def _osc_fit_1d(fn, resolution: int, order: int):
    """Collocation fit on the partition spanned by the uniform sample grid."""
    n_cells = max(1, resolution - 1)
    from .basis import uniform_grid
    grid = uniform_grid(0.0, 1.0, n_cells, order)
    times = np.concatenate(([0.0], grid.collocation_points(), [1.0]))
    problem = osc1d.Osc1dProblem(grid, osc1d.InterpMode(times, fn(times)))
    return osc1d.solve_osc1d(problem)


def _osc_fit_2d(fn, resolution: int):
    n_cells = max(1, resolution - 1)
    from .basis import uniform_grid
    grid = uniform_grid(0.0, 1.0, n_cells, osc2d.HERMITE_ORDER)
    coords = np.concatenate(([0.0], grid.collocation_points(), [1.0]))
    gx, gy = np.meshgrid(coords, coords)
    field = osc2d.CollocationField(coords, coords, fn(gx, gy))
    return osc2d.fit_surface(field, breakpoints_x=grid.breakpoints[0],
                             breakpoints_y=grid.breakpoints[0])


METHODS = ("nearest", "linear", "cubic", "osc")


def compare_methods(problem: str, resolution: int,
                    eval_points: int = 101) -> dict[str, float]:
    """Mean squared error of every method on one analytic test field.

    Baselines interpolate a uniform grid of ``resolution`` points per
    axis; collocation shares the same partition (one cell per sample
    interval) but constrains the spline at its own Gauss abscissae.
    """
    if problem not in ANALYTIC_NAMES:
        raise DataGenError(
            f"unknown problem {problem!r}; choose from {sorted(ANALYTIC_NAMES)}")
    samples_axes, values, fn = analytic_field(problem, resolution)
    errors: dict[str, float] = {}
    if isinstance(samples_axes, tuple):
        xs, ys = samples_axes
        qs = np.linspace(0.0, 1.0, eval_points)
        gx, gy = np.meshgrid(qs, qs)
        queries = np.column_stack([gx.ravel(), gy.ravel()])
        truth = fn(gx, gy).ravel()
        samples = ((xs, ys), values)
        for name, f in (("nearest", interp_nearest), ("linear", interp_linear),
                        ("cubic", interp_cubic)):
            errors[name] = float(np.mean((f(samples, queries) - truth) ** 2))
        surf = _osc_fit_2d(fn, resolution)
        pred = osc2d.evaluate_surface_many(surf, queries)
        errors["osc"] = float(np.mean((pred - truth) ** 2))
    else:
        xs = samples_axes
        queries = np.linspace(0.0, 1.0, max(eval_points, 1001))
        truth = fn(queries)
        samples = (xs, values)
        for name, f in (("nearest", interp_nearest), ("linear", interp_linear),
                        ("cubic", interp_cubic)):
            errors[name] = float(np.mean((f(samples, queries) - truth) ** 2))
        sol = _osc_fit_1d(fn, resolution, analytic_recommended_order(problem))
        pred = osc1d.evaluate_many(sol, queries)
        errors["osc"] = float(np.mean((pred - truth) ** 2))
    return errors


DEFAULT_SWEEP = (6, 8, 12, 16, 24, 32, 48, 64)


def sweep_resolutions(problem: str, resolutions=DEFAULT_SWEEP):
    """compare_methods across a resolution sweep; list of (res, errors)."""
    return [(res, compare_methods(problem, res)) for res in resolutions]
