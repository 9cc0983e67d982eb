"""Polar occupancy grids: lidar-style clouds in, Cartesian point clouds out.

Point clouds are plain float arrays: (N, 3) columns x, y, z for 3-D input
clouds and (N, 2) columns x, y for the flat clouds a grid converts back to.
The sensor sits at the origin, boresight along +y, azimuth theta = atan2(x, y)
so positive angles are toward +x; x = d*sin(theta), y = d*cos(theta).

The training/evaluation target is a binary 64x48 grid: 64 range rows of
`range_res` meters starting at 0, 48 azimuth columns spanning -50 deg to
+50 deg uniformly in angle (100/48 ~ 2.083 deg per column).
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import RadarConfig, derive_params

Z_MIN = -0.20
Z_MAX = 0.10


def _default_range_res() -> float:
    return derive_params(RadarConfig()).d_res


@dataclass(frozen=True)
class GridSpec:
    """Geometry of the polar occupancy grid."""

    n_range: int = 64
    n_azimuth: int = 48
    range_res: float = 0.0  # 0 means: use the default radar configuration's d_res
    az_min_deg: float = -50.0
    az_max_deg: float = 50.0

    def __post_init__(self):
        if self.range_res == 0.0:
            object.__setattr__(self, "range_res", _default_range_res())
        if self.range_res <= 0 or self.n_range < 1 or self.n_azimuth < 1:
            raise ValueError("invalid grid geometry")
        if self.az_max_deg <= self.az_min_deg:
            raise ValueError("empty azimuth span")

    @property
    def az_res_deg(self) -> float:
        return (self.az_max_deg - self.az_min_deg) / self.n_azimuth

    @property
    def max_range(self) -> float:
        return self.n_range * self.range_res


def filter_points(points: np.ndarray, d_max: float,
                  spec: GridSpec = GridSpec()) -> np.ndarray:
    """Keep points inside the grid's field of view and height band.

    Retains points with Z_MIN <= z <= Z_MAX, azimuth within the grid span,
    and 0 < range < d_max. Accepts an (N, 3) array; returns the surviving
    rows.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return points.reshape(0, 3)
    if points.ndim != 2 or points.shape[1] != 3:
        raise ValueError(f"expected (N, 3) points, got {points.shape}")
    x, y, z = points[:, 0], points[:, 1], points[:, 2]
    rng = np.hypot(x, y)
    az_deg = np.degrees(np.arctan2(x, y))
    keep = ((z >= Z_MIN) & (z <= Z_MAX)
            & (az_deg >= spec.az_min_deg) & (az_deg <= spec.az_max_deg)
            & (rng > 0.0) & (rng < d_max))
    return points[keep]


def quantize_to_grid(points: np.ndarray, spec: GridSpec = GridSpec()) -> np.ndarray:
    """Binary occupancy grid from (already filtered) points.

    A cell is 1 iff at least one point lands in it. Accepts (N, 2) or (N, 3)
    arrays; z is ignored. Points outside the grid are dropped, and the
    inclusive far edges (range exactly n_range*res, azimuth exactly
    az_max_deg) fall into the last bin.
    """
    grid = np.zeros((spec.n_range, spec.n_azimuth), dtype=np.uint8)
    points = np.asarray(points, dtype=np.float64)
    if points.size == 0:
        return grid
    x, y = points[:, 0], points[:, 1]
    rng = np.hypot(x, y)
    az_deg = np.degrees(np.arctan2(x, y))
    r_bin = np.floor(rng / spec.range_res).astype(np.int64)
    a_bin = np.floor((az_deg - spec.az_min_deg) / spec.az_res_deg).astype(np.int64)
    # edge-inclusive: theta exactly at az_max lands in the last column
    a_bin[(a_bin == spec.n_azimuth) & (az_deg <= spec.az_max_deg)] = spec.n_azimuth - 1
    r_bin[(r_bin == spec.n_range) & (rng <= spec.max_range)] = spec.n_range - 1
    ok = ((r_bin >= 0) & (r_bin < spec.n_range)
          & (a_bin >= 0) & (a_bin < spec.n_azimuth))
    grid[r_bin[ok], a_bin[ok]] = 1
    return grid


def grid_to_cartesian(grid: np.ndarray, spec: GridSpec = GridSpec()) -> np.ndarray:
    """One (x, y) point per set cell, at the cell center; returns (M, 2).

    Cell centers minimize the worst-case round-trip displacement; see
    roundtrip_bound for the per-point guarantee.
    """
    if grid.shape != (spec.n_range, spec.n_azimuth):
        raise ValueError(f"grid shape {grid.shape} does not match spec "
                         f"({spec.n_range}, {spec.n_azimuth})")
    r_bin, a_bin = np.nonzero(grid)
    d = (r_bin + 0.5) * spec.range_res
    theta = np.radians(spec.az_min_deg + (a_bin + 0.5) * spec.az_res_deg)
    return np.column_stack([d * np.sin(theta), d * np.cos(theta)])


def roundtrip_bound(range_m: np.ndarray | float,
                    spec: GridSpec = GridSpec()) -> np.ndarray | float:
    """Upper bound on quantize -> cell-center displacement at a given range.

    Half a cell diagonal at that range: radial error at most range_res/2
    plus the curvature term d*(1 - cos(a/2)), tangential error at most
    (d + range_res/2)*sin(a/2) where a is the angular cell width.
    """
    half_az = np.radians(spec.az_res_deg) / 2.0
    radial = spec.range_res / 2.0 + np.asarray(range_m) * (1.0 - np.cos(half_az))
    tangential = (np.asarray(range_m) + spec.range_res / 2.0) * np.sin(half_az)
    return np.hypot(radial, tangential)


# ---------------------------------------------------------------------------
# File formats: CSV point clouds (header x,y[,z], meters) and a P1 ASCII
# bitmap for eyeballing grids (48 columns x 64 rows).

def write_points_csv(path: str | Path, points: np.ndarray) -> None:
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2 or points.shape[1] not in (2, 3):
        raise ValueError(f"expected (N, 2) or (N, 3) points, got {points.shape}")
    header = "x,y" if points.shape[1] == 2 else "x,y,z"
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in points:
            fh.write(",".join(f"{v:.6f}" for v in row) + "\n")


def read_points_csv(path: str | Path) -> np.ndarray:
    with open(path) as fh:
        header = fh.readline().strip().lower()
        if header not in ("x,y", "x,y,z"):
            raise ValueError(f"{path}: bad point cloud header {header!r}")
        width = len(header.split(","))
        rows = [line.strip() for line in fh if line.strip()]
    if not rows:
        return np.zeros((0, width))
    data = np.array([[float(v) for v in line.split(",")] for line in rows])
    if data.shape[1] != width:
        raise ValueError(f"{path}: inconsistent column count")
    return data


def write_pgm(path: str | Path, grid: np.ndarray) -> None:
    """Write a binary grid as an ASCII P1 bitmap, one row per range bin."""
    grid = np.asarray(grid)
    lines = ["P1", f"# occupancy grid {grid.shape[1]} x {grid.shape[0]}",
             f"{grid.shape[1]} {grid.shape[0]}"]
    for row in grid:
        lines.append(" ".join("1" if v else "0" for v in row))
    Path(path).write_text("\n".join(lines) + "\n")


def read_pgm(path: str | Path) -> np.ndarray:
    tokens: list[str] = []
    for line in Path(path).read_text().splitlines():
        line = line.split("#", 1)[0]
        tokens.extend(line.split())
    if not tokens or tokens[0] != "P1":
        raise ValueError(f"{path}: not a P1 bitmap")
    width, height = int(tokens[1]), int(tokens[2])
    bits = np.array([int(t) for t in tokens[3:3 + width * height]], dtype=np.uint8)
    if bits.size != width * height:
        raise ValueError(f"{path}: expected {width * height} cells, got {bits.size}")
    return bits.reshape(height, width)
