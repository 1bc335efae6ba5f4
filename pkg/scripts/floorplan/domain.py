"""
World <-> grid mapping shared by point clouds, floorplans and heatmaps.

Grid coordinates name pixel centres: grid point (x, y) is the centre of
pixel column x, row y. Pixel (i, j) covers the half-open world square
[origin + j*scale, origin + (j+1)*scale) on X and likewise on Y for row i.
"""
from dataclasses import dataclass

import numpy as np

from config import config


@dataclass(frozen=True)
class FloorplanDomain:
    origin_x: float
    origin_y: float
    scale: float                    # meters per pixel, isotropic
    resolution: int = 256

    def __post_init__(self):
        if not (self.scale > 0 and np.isfinite(self.scale)):
            raise ValueError(f"domain scale must be positive, got {self.scale}")
        if self.resolution < 1:
            raise ValueError(f"domain resolution must be >= 1, got {self.resolution}")

    def world_to_grid(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64)
        origin = np.array([self.origin_x, self.origin_y])
        return (xy - origin) / self.scale - 0.5

    def grid_to_world(self, xy) -> np.ndarray:
        xy = np.asarray(xy, dtype=np.float64)
        origin = np.array([self.origin_x, self.origin_y])
        return origin + (xy + 0.5) * self.scale

    def bin_points(self, xy, resolution: int | None = None):
        """Cell indices (rows, cols) and in-domain mask for world XY points.

        A coarser ``resolution`` keeps the domain extent and enlarges cells.
        """
        res = resolution or self.resolution
        cell = self.scale * self.resolution / res
        xy = np.asarray(xy, dtype=np.float64).reshape(-1, 2)
        cols = np.floor((xy[:, 0] - self.origin_x) / cell).astype(np.int64)
        rows = np.floor((xy[:, 1] - self.origin_y) / cell).astype(np.int64)
        inside = (cols >= 0) & (cols < res) & (rows >= 0) & (rows < res)
        return rows, cols, inside

    def to_dict(self) -> dict:
        return {
            'origin_x': self.origin_x,
            'origin_y': self.origin_y,
            'scale': self.scale,
            'resolution': self.resolution,
        }

    @classmethod
    def from_dict(cls, d: dict) -> 'FloorplanDomain':
        return cls(
            origin_x=float(d['origin_x']),
            origin_y=float(d['origin_y']),
            scale=float(d['scale']),
            resolution=int(d.get('resolution', config.GRID_RESOLUTION)),
        )
