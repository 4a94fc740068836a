"""Space-time continuous surrogate from frames at collocation points.

Time-oriented 1D fits run once per collocation point (sharing one system
factorization); space-oriented 2D fits are built on demand for any
queried time and cached.
"""

from __future__ import annotations

import numpy as np

from . import abd, osc1d, osc2d
from .basis import OutOfDomainError


class SpaceTimeSurrogate:
    """Composite of per-point time splines and on-demand space surfaces."""

    def __init__(self, times, frames, xs, ys, r_time: int = 3,
                 r_space: int = osc2d.HERMITE_ORDER):
        times = np.asarray(times, dtype=np.float64)
        frames = np.asarray(frames, dtype=np.float64)
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        if frames.shape[1:] != (len(ys), len(xs)):
            raise osc1d.OscError(
                f"frame shape {frames.shape[1:]} != grid {(len(ys), len(xs))}")
        self.times = times
        self.xs = xs
        self.ys = ys
        self.r_space = r_space
        flat = frames.reshape(len(times), -1)

        bp = osc1d.interp_breakpoints(times, r_time)
        from .basis import PartitionGrid, gauss_legendre_offsets
        self.grid_t = PartitionGrid((bp,), r_time,
                                    gauss_legendre_offsets(r_time - 1))
        problem = osc1d.Osc1dProblem(
            self.grid_t, osc1d.InterpMode(times, flat[:, 0]))
        matrix, _ = osc1d.build_system(problem)
        self._fac_t = abd.factorize(matrix)
        rhs = np.zeros((matrix.n, flat.shape[1]))
        rhs[osc1d.interp_row_map(self.grid_t.cells(), r_time)] = flat
        self.time_coeffs = abd.solve(self._fac_t, rhs)  # (n_t, n_points)
        self._surface_cache: dict = {}

    @property
    def t_range(self) -> tuple[float, float]:
        return float(self.times[0]), float(self.times[-1])

    def values_at(self, t: float, deriv_order: int = 0) -> np.ndarray:
        """Field (or its time derivative) at every collocation point."""
        E = osc1d.coeff_eval_matrix(self.grid_t, [t], deriv_order)
        return (E @ self.time_coeffs).reshape(len(self.ys), len(self.xs))

    def surface_at(self, t: float) -> osc2d.SplineSolution2D:
        key = round(float(t), 12)
        surf = self._surface_cache.get(key)
        if surf is None:
            field = osc2d.CollocationField(self.xs, self.ys, self.values_at(t))
            surf = osc2d.fit_surface(field, self.r_space)
            self._surface_cache[key] = surf
        return surf

    def query(self, x: float, y: float, t: float,
              deriv: tuple[int, int] = (0, 0)) -> float:
        return osc2d.evaluate_surface(self.surface_at(t), x, y, deriv)


def fit_spacetime(traj, xs, ys, r_time: int = 3,
                  r_space: int = osc2d.HERMITE_ORDER) -> SpaceTimeSurrogate:
    """Surrogate from a Trajectory whose frames live on the (xs, ys) grid."""
    return SpaceTimeSurrogate(traj.times, traj.frames, xs, ys, r_time, r_space)
