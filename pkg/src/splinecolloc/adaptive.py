"""Adaptive collocation sampling.

Interior collocation points step a fixed distance beta along the steepest
ascent direction of the field's time derivative, which concentrates them
in the regions changing fastest. Points never leave their partition cell:
a step that would exit is clamped coordinate-wise back inside, and points
on the domain boundary stay fixed.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import osc2d
from .basis import OutOfDomainError
from .spacetime import SpaceTimeSurrogate

GRADIENT_FLOOR = 1e-12
CLAMP_MARGIN = 1e-6


@dataclass(frozen=True)
class AdaptiveConfig:
    beta: float

    def __post_init__(self):
        if not self.beta > 0:
            raise ValueError("beta must be positive")


def default_beta(breakpoints_x, breakpoints_y) -> float:
    """Half the minimum partition width across both axes."""
    wx = np.min(np.diff(np.asarray(breakpoints_x, dtype=np.float64)))
    wy = np.min(np.diff(np.asarray(breakpoints_y, dtype=np.float64)))
    return 0.5 * float(min(wx, wy))


def config_for(st: SpaceTimeSurrogate) -> AdaptiveConfig:
    surf = st.surface_at(st.times[0])
    return AdaptiveConfig(default_beta(surf.basis_x.breakpoints,
                                       surf.basis_y.breakpoints))


def time_derivative_field(st: SpaceTimeSurrogate, t: float) -> osc2d.CollocationField:
    """du/dt at every collocation point, from the analytic spline derivative."""
    t0, t1 = st.t_range
    if not t0 < t < t1:
        raise OutOfDomainError(
            f"t={t} must be strictly inside the fitted range ({t0}, {t1})")
    return osc2d.CollocationField(st.xs, st.ys, st.values_at(t, deriv_order=1))


def _cell_bounds(breakpoints: np.ndarray, coord: float) -> tuple[float, float]:
    idx = min(int(np.searchsorted(breakpoints, coord, side="right")) - 1,
              len(breakpoints) - 2)
    idx = max(idx, 0)
    return float(breakpoints[idx]), float(breakpoints[idx + 1])


def adapt_points(positions, st: SpaceTimeSurrogate, t: float,
                 cfg: AdaptiveConfig | None = None) -> np.ndarray:
    """Move interior points beta along the unit gradient of du/dt.

    ``positions`` is an (n, 2) array of current collocation coordinates.
    Points on the domain boundary are fixed; zero-gradient points stay
    put; each moved point is clamped into its original partition cell.
    """
    positions = np.asarray(positions, dtype=np.float64)
    dfield = time_derivative_field(st, t)
    dsurf = osc2d.fit_surface(dfield, st.r_space)
    bpx = dsurf.basis_x.breakpoints
    bpy = dsurf.basis_y.breakpoints
    if cfg is None:
        cfg = AdaptiveConfig(default_beta(bpx, bpy))
    x_lo, x_hi = st.xs[0], st.xs[-1]
    y_lo, y_hi = st.ys[0], st.ys[-1]

    out = positions.copy()
    for i, (x, y) in enumerate(positions):
        if x <= x_lo or x >= x_hi or y <= y_lo or y >= y_hi:
            continue  # boundary points are fixed
        gx = osc2d.evaluate_surface(dsurf, x, y, (1, 0))
        gy = osc2d.evaluate_surface(dsurf, x, y, (0, 1))
        norm = float(np.hypot(gx, gy))
        if norm < GRADIENT_FLOOR:
            continue
        nx = x + cfg.beta * gx / norm
        ny = y + cfg.beta * gy / norm
        cx_lo, cx_hi = _cell_bounds(bpx, x)
        cy_lo, cy_hi = _cell_bounds(bpy, y)
        mx = CLAMP_MARGIN * (cx_hi - cx_lo)
        my = CLAMP_MARGIN * (cy_hi - cy_lo)
        out[i, 0] = min(max(nx, cx_lo + mx), cx_hi - mx)
        out[i, 1] = min(max(ny, cy_lo + my), cy_hi - my)
    return out
