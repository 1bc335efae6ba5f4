"""
Point clouds: file IO, normalization, subsampling, augmentation, the
floorplan domain fitted to a scan, and the top-down point-density image.

Supported inputs (auto-detected by the first bytes):
  - PLY with a `vertex` element (x, y, z; optional red/green/blue),
    `format ascii 1.0` or `format binary_little_endian 1.0`
  - XYZ text: one point per line, `x y z` or `x y z r g b`, `#` comments
"""
import io
import math
from dataclasses import dataclass, replace
from fractions import Fraction
from pathlib import Path
from typing import Optional

import numpy as np

from config import config, log
from domain import FloorplanDomain
import model


class CloudParseError(ValueError):
    def __init__(self, path, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = str(path)
        self.line = line
        self.message = message


@dataclass(frozen=True, eq=False)
class PointCloud:
    positions: np.ndarray                   # (N, 3) meters
    colors: Optional[np.ndarray] = None     # (N, 3) uint8
    features: Optional[np.ndarray] = None   # (N, C)

    def __post_init__(self):
        pos = np.asarray(self.positions, dtype=np.float64).reshape(-1, 3)
        if not np.all(np.isfinite(pos)):
            raise ValueError("point positions must be finite")
        object.__setattr__(self, 'positions', pos)
        n = len(pos)
        if self.colors is not None:
            col = np.asarray(self.colors, dtype=np.uint8).reshape(-1, 3)
            if len(col) != n:
                raise ValueError(f"{len(col)} colors for {n} points")
            object.__setattr__(self, 'colors', col)
        if self.features is not None:
            feat = np.asarray(self.features, dtype=np.float64)
            if feat.ndim != 2 or len(feat) != n:
                raise ValueError(f"features must be an (N, C) array for {n} points, got {feat.shape}")
            object.__setattr__(self, 'features', feat)

    def __len__(self):
        return len(self.positions)

    @property
    def channels(self) -> int:
        return 0 if self.features is None else self.features.shape[1]

    def take(self, indices) -> 'PointCloud':
        return PointCloud(
            self.positions[indices],
            None if self.colors is None else self.colors[indices],
            None if self.features is None else self.features[indices],
        )


def empty_cloud(channels: int = 0) -> PointCloud:
    feats = np.zeros((0, channels)) if channels else None
    return PointCloud(np.zeros((0, 3)), features=feats)


# ── PREPROCESSING ──

def normalize(cloud: PointCloud) -> PointCloud:
    if len(cloud) == 0:
        raise ValueError("cannot normalize an empty cloud")
    centroid = cloud.positions.mean(axis=0)
    return replace(cloud, positions=cloud.positions - centroid)


def subsample(cloud: PointCloud, k: int, seed: int) -> PointCloud:
    if k < 1:
        raise ValueError(f"subsample size must be >= 1, got {k}")
    if len(cloud) <= k:
        return cloud
    rng = np.random.default_rng(seed)
    picked = np.sort(rng.choice(len(cloud), size=k, replace=False))
    log("pointcloud", f"subsample in={len(cloud)} out={k} seed={seed}")
    return cloud.take(picked)


def _rotate_grid_point(x: float, y: float, res: int, quarter_turns: int) -> tuple:
    """Quarter turns about the grid centre in pixel-centre coordinates, the
    frame the rotated cloud lands in. A point in the last half pixel of the
    [0, res) window would fall below 0, so it is clamped to the edge."""
    for _ in range(quarter_turns % 4):
        x, y = max(res - 1 - y, 0), x
    return x, y


def _rotate_plan(plan: 'model.Floorplan', k: int) -> 'model.Floorplan':
    res = plan.resolution
    rot = lambda x, y: _rotate_grid_point(x, y, res, k)

    corners = []
    for c in plan.corners:
        x, y = rot(c.x, c.y)
        corners.append(model.Corner(c.id, x, y, c.junction.rotated(k)))
    openings = []
    for o in plan.openings:
        x1, y1 = rot(o.x1, o.y1)
        x2, y2 = rot(o.x2, o.y2)
        openings.append(model.Opening(o.kind, x1, y1, x2, y2, o.wall))
    icons = []
    for ic in plan.icons:
        xa, ya = rot(ic.xmin, ic.ymin)
        xb, yb = rot(ic.xmax, ic.ymax)
        icons.append(model.Icon(ic.kind, min(xa, xb), min(ya, yb), max(xa, xb), max(ya, yb)))
    rooms = [model.Room(r.kind, model.canonical_polygon([rot(x, y) for x, y in r.polygon]))
             for r in plan.rooms]
    return replace(plan, corners=tuple(corners), openings=tuple(openings),
                   icons=tuple(icons), rooms=tuple(rooms))


def augment(cloud: PointCloud, plan: 'model.Floorplan', seed: int,
            scale_range: tuple | None = None, rotations: tuple = (0, 90, 180, 270)):
    """One similarity transform (uniform scale, quarter-turn about Z) applied
    to both the scan and its annotation."""
    if plan.domain is None:
        raise ValueError("augment needs a plan with a domain to share the cloud's world frame")
    lo, hi = scale_range or (config.AUGMENT_SCALE_MIN, config.AUGMENT_SCALE_MAX)
    rng = np.random.default_rng(seed)
    s = float(rng.uniform(lo, hi)) if hi > lo else float(lo)
    angle = int(rotations[int(rng.integers(len(rotations)))])
    if angle % 90:
        raise ValueError(f"rotation must be a multiple of 90 degrees, got {angle}")
    k = (angle // 90) % 4

    cos, sin = [(1, 0), (0, 1), (-1, 0), (0, -1)][k]
    rot = np.array([[cos, -sin, 0], [sin, cos, 0], [0, 0, 1]], dtype=np.float64)
    moved = replace(cloud, positions=(cloud.positions @ rot.T) * s)

    d = plan.domain
    span = d.scale * d.resolution
    square = np.array([[d.origin_x, d.origin_y], [d.origin_x + span, d.origin_y],
                       [d.origin_x, d.origin_y + span], [d.origin_x + span, d.origin_y + span]])
    square = (square @ rot[:2, :2].T) * s
    new_domain = FloorplanDomain(float(square[:, 0].min()), float(square[:, 1].min()),
                                 d.scale * s, d.resolution)
    new_plan = replace(_rotate_plan(plan, k), domain=new_domain)
    log("pointcloud", f"augment seed={seed} scale={s:.4f} rotation={angle}")
    return moved, new_plan


# ── DOMAIN & DENSITY ──

def _nearest_rank(sorted_vals: np.ndarray, percent: Fraction) -> float:
    n = len(sorted_vals)
    rank = math.ceil(percent * n / 100)
    return float(sorted_vals[max(rank - 1, 0)])


def compute_domain(cloud: PointCloud, outlier_percent: float | None = None,
                   margin: float | None = None, resolution: int | None = None) -> FloorplanDomain:
    p = Fraction(str(config.OUTLIER_PERCENT if outlier_percent is None else outlier_percent))
    margin = config.DOMAIN_MARGIN if margin is None else margin
    res = resolution or config.GRID_RESOLUTION
    if len(cloud) < 2:
        raise ValueError("compute_domain needs at least 2 points")
    xy = cloud.positions[:, :2]
    if np.all(xy == xy[0]):
        raise ValueError("degenerate cloud: all points coincide in XY")

    lows, highs = [], []
    for axis in range(2):
        vals = np.sort(xy[:, axis])
        lo = _nearest_rank(vals, p)
        hi = _nearest_rank(vals, 100 - p)
        length = hi - lo
        lows.append(lo - margin * length)
        highs.append(hi + margin * length)
    side = max(highs[0] - lows[0], highs[1] - lows[1])
    if side <= 0:
        raise ValueError("degenerate cloud: percentile extent is empty")
    scale = side / res
    origin_x = (lows[0] + highs[0]) / 2 - (res / 2) * scale
    origin_y = (lows[1] + highs[1]) / 2 - (res / 2) * scale
    log("pointcloud", f"domain points={len(cloud)} scale={scale:.5f} origin=({origin_x:.3f},{origin_y:.3f})")
    return FloorplanDomain(origin_x, origin_y, scale, res)


def density_image(cloud: PointCloud, domain: FloorplanDomain) -> np.ndarray:
    res = domain.resolution
    if len(cloud) == 0:
        return np.zeros((res, res), dtype=np.float64)
    rows, cols, inside = domain.bin_points(cloud.positions[:, :2])
    flat = rows[inside] * res + cols[inside]
    return np.bincount(flat, minlength=res * res).reshape(res, res).astype(np.float64)


# ── FILE IO ──

_PLY_TYPES = {
    'char': 'i1', 'int8': 'i1', 'uchar': 'u1', 'uint8': 'u1',
    'short': 'i2', 'int16': 'i2', 'ushort': 'u2', 'uint16': 'u2',
    'int': 'i4', 'int32': 'i4', 'uint': 'u4', 'uint32': 'u4',
    'float': 'f4', 'float32': 'f4', 'double': 'f8', 'float64': 'f8',
}


def _parse_ply_header(path, raw: bytes):
    """Returns (format, elements, body_offset, header_line_count)."""
    fmt = None
    elements = []       # [name, count, [(name, dtype)], has_list]
    offset = 0
    lineno = 0
    while True:
        end = raw.find(b'\n', offset)
        if end < 0:
            raise CloudParseError(path, lineno + 1, "missing end_header")
        line = raw[offset:end].decode('ascii', errors='replace').strip()
        offset = end + 1
        lineno += 1
        if lineno == 1:
            if line != 'ply':
                raise CloudParseError(path, 1, "not a PLY file")
            continue
        parts = line.split()
        if not parts or parts[0] in ('comment', 'obj_info'):
            continue
        if parts[0] == 'format':
            if len(parts) < 2 or parts[1] not in ('ascii', 'binary_little_endian'):
                raise CloudParseError(path, lineno, f"unsupported format: {line}")
            fmt = parts[1]
        elif parts[0] == 'element':
            try:
                elements.append([parts[1], int(parts[2]), [], False])
            except (IndexError, ValueError):
                raise CloudParseError(path, lineno, f"bad element line: {line}")
        elif parts[0] == 'property':
            if not elements:
                raise CloudParseError(path, lineno, "property before element")
            if len(parts) >= 2 and parts[1] == 'list':
                elements[-1][3] = True
                continue
            if len(parts) != 3 or parts[1] not in _PLY_TYPES:
                raise CloudParseError(path, lineno, f"bad property line: {line}")
            elements[-1][2].append((parts[2], _PLY_TYPES[parts[1]]))
        elif parts[0] == 'end_header':
            break
        else:
            raise CloudParseError(path, lineno, f"unexpected header line: {line}")
    if fmt is None:
        raise CloudParseError(path, lineno, "missing format line")
    return fmt, elements, offset, lineno


def _cloud_from_columns(path, names: list, data: np.ndarray, line: int) -> PointCloud:
    for axis in ('x', 'y', 'z'):
        if axis not in names:
            raise CloudParseError(path, line, f"vertex element has no '{axis}' property")
    pos = np.stack([data[:, names.index(a)] for a in ('x', 'y', 'z')], axis=1)
    colors = None
    if all(c in names for c in ('red', 'green', 'blue')):
        colors = np.stack([data[:, names.index(c)] for c in ('red', 'green', 'blue')], axis=1)
        colors = np.clip(colors, 0, 255).astype(np.uint8)
    if not np.all(np.isfinite(pos)):
        raise CloudParseError(path, line, "non-finite vertex coordinate")
    return PointCloud(pos, colors)


def _parse_rows(path, lines: list, first_line: int, width: int | None) -> np.ndarray:
    if not lines:
        return np.zeros((0, width or 3))
    try:
        data = np.loadtxt(io.StringIO("\n".join(lines)), dtype=np.float64, ndmin=2)
        if width is not None and data.shape[1] != width:
            raise ValueError("column count")
        return data
    except ValueError:
        pass
    # locate the first offending line for the error message
    expected = width
    for k, line in enumerate(lines):
        parts = line.split()
        try:
            [float(v) for v in parts]
        except ValueError:
            raise CloudParseError(path, first_line + k, f"non-numeric value in: {line.strip()!r}")
        if expected is None:
            expected = len(parts)
        if len(parts) != expected:
            raise CloudParseError(path, first_line + k,
                                  f"expected {expected} values, got {len(parts)}")
    raise CloudParseError(path, first_line, "unreadable point data")


def read_ply(path) -> PointCloud:
    path = Path(path)
    raw = path.read_bytes()
    fmt, elements, offset, header_lines = _parse_ply_header(path, raw)
    names = [e[0] for e in elements]
    if 'vertex' not in names:
        raise CloudParseError(path, header_lines, "no vertex element")
    vi = names.index('vertex')
    _, count, props, has_list = elements[vi]
    prop_names = [p[0] for p in props]

    if fmt == 'ascii':
        body = raw[offset:].decode('ascii', errors='replace').splitlines()
        skip = sum(e[1] for e in elements[:vi])
        lines = body[skip:skip + count]
        first = header_lines + skip + 1
        if len(lines) < count:
            raise CloudParseError(path, header_lines + len(body) + 1,
                                  f"unexpected end of file: {len(lines)} of {count} vertices")
        data = _parse_rows(path, lines, first, len(props))
        return _cloud_from_columns(path, prop_names, data, first)

    if has_list or any(e[3] for e in elements[:vi]):
        raise CloudParseError(path, header_lines, "binary list properties before vertex data are not supported")
    skip_bytes = sum(e[1] * np.dtype([(p, '<' + t) for p, t in e[2]]).itemsize for e in elements[:vi])
    dtype = np.dtype([(p, '<' + t) for p, t in props])
    need = offset + skip_bytes + count * dtype.itemsize
    if len(raw) < need:
        raise CloudParseError(path, header_lines, f"binary body truncated: {len(raw)} < {need} bytes")
    rec = np.frombuffer(raw, dtype=dtype, count=count, offset=offset + skip_bytes)
    data = np.stack([rec[p].astype(np.float64) for p in prop_names], axis=1) if count else np.zeros((0, len(props)))
    return _cloud_from_columns(path, prop_names, data, header_lines)


def read_xyz(path) -> PointCloud:
    path = Path(path)
    lines, numbers = [], []
    for k, line in enumerate(path.read_text(encoding='utf-8').splitlines(), start=1):
        text = line.split('#', 1)[0].strip()
        if text:
            lines.append(text)
            numbers.append(k)
    if not lines:
        return empty_cloud()
    try:
        data = _parse_rows(path, lines, 1, None)
    except CloudParseError as e:
        # map position in the filtered list back to the file line
        raise CloudParseError(path, numbers[e.line - 1], e.message) from None
    if data.shape[1] not in (3, 6):
        raise CloudParseError(path, numbers[0], f"expected 3 or 6 columns, got {data.shape[1]}")
    names = ['x', 'y', 'z'] + (['red', 'green', 'blue'] if data.shape[1] == 6 else [])
    return _cloud_from_columns(path, names, data, numbers[0])


def read_cloud(path) -> PointCloud:
    path = Path(path)
    with open(path, 'rb') as f:
        head = f.read(3)
    cloud = read_ply(path) if head == b'ply' else read_xyz(path)
    log("pointcloud", f"read path={path.name} points={len(cloud)}")
    return cloud


def write_ply(path, cloud: PointCloud):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    header = ["ply", "format ascii 1.0", f"element vertex {len(cloud)}",
              "property double x", "property double y", "property double z"]
    if cloud.colors is not None:
        header += ["property uchar red", "property uchar green", "property uchar blue"]
    header.append("end_header")
    out = io.StringIO()
    out.write("\n".join(header) + "\n")
    for i in range(len(cloud)):
        x, y, z = (float(v) for v in cloud.positions[i])
        row = f"{x!r} {y!r} {z!r}"
        if cloud.colors is not None:
            r, g, b = (int(v) for v in cloud.colors[i])
            row += f" {r} {g} {b}"
        out.write(row + "\n")
    path.write_text(out.getvalue(), encoding='ascii')
