"""2-D occupancy rasters for planning, from ground truth or from a sensed image."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ..scene import Scene, footprint_mask


@dataclass(frozen=True)
class OccupancyMap:
    """Boolean footprint raster ``mask[ix, iy]``; cell (0, 0) spans [x0, x0 + cell) x [y0, y0 + cell).

    Heights are unknown, so an occupied cell blocks every altitude. Points outside the
    raster count as occupied when ``outside_blocked`` is set.
    """

    mask: np.ndarray
    x0: float = 0.0
    y0: float = 0.0
    cell: float = 1.0
    outside_blocked: bool = True

    @classmethod
    def from_scene(cls, scene: Scene, cell: float = 1.0) -> OccupancyMap:
        nx = int(math.ceil(scene.bounds[0] / cell))
        ny = int(math.ceil(scene.bounds[1] / cell))
        # a cell is occupied if any part of it is; test its center against boxes grown by half a cell
        grown = Scene(
            bounds=scene.bounds,
            buildings=tuple(
                type(b)(b.center_xy, b.width + cell, b.depth + cell, b.height) for b in scene.buildings
            ),
        )
        xs = (np.arange(nx) + 0.5) * cell
        ys = (np.arange(ny) + 0.5) * cell
        return cls(footprint_mask(grown, xs, ys), 0.0, 0.0, cell)

    @classmethod
    def from_raster(cls, mask: np.ndarray, x_centers, y_centers) -> OccupancyMap:
        """Wrap a raster sampled at uniformly spaced cell centers (e.g. a SAR grid)."""
        x = np.asarray(x_centers, float)
        y = np.asarray(y_centers, float)
        cell = float(x[1] - x[0]) if len(x) > 1 else 1.0
        return cls(np.asarray(mask, bool), float(x[0] - cell / 2), float(y[0] - cell / 2), cell)

    @property
    def shape(self) -> tuple[int, int]:
        return self.mask.shape

    def inflated(self, margin: float) -> OccupancyMap:
        """Grown by ``margin`` meters (rounded up to whole cells)."""
        k = int(math.ceil(margin / self.cell - 1e-9))
        if k <= 0 or not self.mask.any():
            return self
        grown = ndimage.binary_dilation(self.mask, structure=np.ones((3, 3), bool), iterations=k)
        return OccupancyMap(grown, self.x0, self.y0, self.cell, self.outside_blocked)

    def cell_index(self, xy) -> tuple[np.ndarray, np.ndarray]:
        xy = np.asarray(xy, float)
        ix = np.floor((xy[..., 0] - self.x0) / self.cell).astype(int)
        iy = np.floor((xy[..., 1] - self.y0) / self.cell).astype(int)
        return ix, iy

    def occupied(self, xy) -> np.ndarray:
        ix, iy = self.cell_index(xy)
        nx, ny = self.mask.shape
        inside = (ix >= 0) & (iy >= 0) & (ix < nx) & (iy < ny)
        out = np.full(ix.shape, self.outside_blocked, dtype=bool)
        out[inside] = self.mask[ix[inside], iy[inside]]
        return out

    def segment_free(self, a, b, spacing: float | None = None) -> bool:
        a = np.asarray(a, float)
        b = np.asarray(b, float)
        step = spacing or self.cell / 2
        n = max(2, int(math.ceil(np.linalg.norm(b[:2] - a[:2]) / step)) + 1)
        t = np.linspace(0.0, 1.0, n)[:, None]
        return not bool(self.occupied(a[:2] + t * (b[:2] - a[:2])).any())
