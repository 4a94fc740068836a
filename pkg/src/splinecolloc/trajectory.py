"""Field values at sample points over discrete time frames."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class Trajectory:
    """Time stamps plus per-frame values.

    ``frames`` has shape (T, ...); the trailing shape is constant and may
    be a flat point list, a (ny, nx) grid or (channels, ny, nx).
    ``extent`` records the spatial bounding box (x0, x1, y0, y1) when the
    frames live on a grid.
    """

    times: np.ndarray
    frames: np.ndarray
    extent: tuple[float, float, float, float] | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        t = np.asarray(self.times, dtype=np.float64)
        f = np.asarray(self.frames, dtype=np.float64)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "frames", f)
        if np.any(np.diff(t) <= 0):
            raise ValueError("frame times must be strictly increasing")
        if f.shape[0] != t.shape[0]:
            raise ValueError("one frame per time stamp required")

    @property
    def n_frames(self) -> int:
        return len(self.times)

    def save(self, path):
        """Self-describing npz: times, frames, extent, json-able meta."""
        import json
        np.savez_compressed(
            path, times=self.times, frames=self.frames,
            extent=np.array(self.extent if self.extent else [np.nan] * 4),
            meta=json.dumps(self.meta))

    @classmethod
    def load(cls, path) -> "Trajectory":
        import json
        with np.load(path, allow_pickle=False) as z:
            extent = z["extent"]
            extent = None if np.any(np.isnan(extent)) else tuple(extent)
            meta = json.loads(str(z["meta"]))
            return cls(z["times"], z["frames"], extent, meta)

    def to_csv(self, path):
        """Flat CSV: one row per (time, flattened index, value)."""
        flat = self.frames.reshape(self.n_frames, -1)
        with open(path, "w") as fh:
            fh.write("time,index,value\n")
            for k, t in enumerate(self.times):
                for i, v in enumerate(flat[k]):
                    fh.write(f"{t},{i},{v}\n")
