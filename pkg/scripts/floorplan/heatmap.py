"""
The 256x256 multi-channel heatmap stack between scans and vector floorplans.

Channel layout (K = 41):
    [0..12]   room-corner junctions I_0..I_270, L_0..L_270, T_0..T_270, X
    [13..16]  opening end-points facing +X, +Y, -X, -Y
    [17..20]  icon corners TL, TR, BR, BL
    [21..30]  room semantics: background, wall, 8 room types
    [31..40]  icon semantics: background, 9 icon types

FHM1 file: b"FHM1", u32 resolution, u32 K, u32 layout version (=1),
u32 byte length + UTF-8 JSON array of channel names, then K row-major
little-endian float32 planes.
"""
import json
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
import shapely
from scipy.special import logsumexp

from config import config, log
import model
from model import Direction, IconType, RoomType

LAYOUT_VERSION = 1

JUNCTION_NAMES = [jt.value for jt in model.JUNCTION_TYPES]
OPENING_DIRECTIONS = [Direction.PX, Direction.PY, Direction.NX, Direction.NY]
OPENING_NAMES = ["opening_+X", "opening_+Y", "opening_-X", "opening_-Y"]
ICON_CORNER_NAMES = ["icon_TL", "icon_TR", "icon_BR", "icon_BL"]
ROOM_CLASSES = ["background", "wall"] + [rt.value for rt in RoomType]
ICON_CLASSES = ["background"] + [it.value for it in IconType]

OPENING_BASE = len(JUNCTION_NAMES)                      # 13
ICON_CORNER_BASE = OPENING_BASE + len(OPENING_NAMES)    # 17
NUM_GEOMETRY = ICON_CORNER_BASE + len(ICON_CORNER_NAMES)  # 21
ROOM_BASE = NUM_GEOMETRY                                # 21
WALL_CHANNEL = ROOM_BASE + 1                            # 22
ICON_BASE = ROOM_BASE + len(ROOM_CLASSES)               # 31

CHANNEL_NAMES = tuple(
    JUNCTION_NAMES + OPENING_NAMES + ICON_CORNER_NAMES
    + [f"room:{c}" for c in ROOM_CLASSES] + [f"icon:{c}" for c in ICON_CLASSES]
)
NUM_CHANNELS = len(CHANNEL_NAMES)                       # 41


class HeatmapFormatError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class HeatmapStack:
    data: np.ndarray            # (K, H, W) float32
    names: tuple = CHANNEL_NAMES

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float32)
        if arr.ndim != 3 or arr.shape[1] != arr.shape[2]:
            raise ValueError(f"heatmap stack must be (K, R, R), got {arr.shape}")
        names = tuple(self.names)
        if len(names) != arr.shape[0]:
            raise ValueError(f"{len(names)} channel names for {arr.shape[0]} channels")
        object.__setattr__(self, 'data', arr)
        object.__setattr__(self, 'names', names)

    @property
    def resolution(self) -> int:
        return self.data.shape[1]

    @property
    def is_floorplan_layout(self) -> bool:
        return self.names == CHANNEL_NAMES

    def channel(self, name: str) -> np.ndarray:
        return self.data[self.names.index(name)]

    def problems(self) -> list:
        out = []
        if not np.all(np.isfinite(self.data)):
            out.append("non-finite values")
        if not self.is_floorplan_layout:
            return out
        geo = self.data[:NUM_GEOMETRY]
        if geo.size and (geo.min() < 0 or geo.max() > 1):
            out.append("geometry channels outside [0, 1]")
        for label, lo, hi in (("room", ROOM_BASE, ICON_BASE), ("icon", ICON_BASE, NUM_CHANNELS)):
            sums = self.data[lo:hi].astype(np.float64).sum(axis=0)
            if np.abs(sums - 1.0).max() > 1e-5:
                out.append(f"{label} semantic group does not sum to 1")
        return out


def empty_stack(resolution: int | None = None) -> HeatmapStack:
    """Zero geometry, all-background semantics."""
    res = resolution or config.GRID_RESOLUTION
    data = np.zeros((NUM_CHANNELS, res, res), dtype=np.float32)
    data[ROOM_BASE] = 1.0
    data[ICON_BASE] = 1.0
    return HeatmapStack(data)


def single_channel(raster: np.ndarray, name: str = "density") -> HeatmapStack:
    return HeatmapStack(np.asarray(raster)[None], (name,))


# ── GROUND TRUTH ──

def _paint_disk(plane: np.ndarray, x: float, y: float, radius: float):
    res = plane.shape[0]
    r0, r1 = max(0, math.floor(y - radius)), min(res - 1, math.ceil(y + radius))
    c0, c1 = max(0, math.floor(x - radius)), min(res - 1, math.ceil(x + radius))
    if r0 > r1 or c0 > c1:
        return
    rows, cols = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    inside = (cols - x) ** 2 + (rows - y) ** 2 <= radius * radius
    window = plane[r0:r1 + 1, c0:c1 + 1]
    window[inside] = np.maximum(window[inside], 1.0)


def wall_strip(res: int, p, q, width: int):
    """Row/column slices of the axis-aligned strip of odd ``width`` along p-q,
    clipped to the image; None when the strip misses the image."""
    (x1, y1), (x2, y2) = p, q
    half = width // 2
    if abs(x2 - x1) >= abs(y2 - y1):
        mid = round((y1 + y2) / 2)
        r0, r1 = mid - half, mid + half
        c0, c1 = round(min(x1, x2)), round(max(x1, x2))
    else:
        mid = round((x1 + x2) / 2)
        c0, c1 = mid - half, mid + half
        r0, r1 = round(min(y1, y2)), round(max(y1, y2))
    r0, c0 = max(r0, 0), max(c0, 0)
    r1, c1 = min(r1, res - 1), min(c1, res - 1)
    if r0 > r1 or c0 > c1:
        return None
    return slice(r0, r1 + 1), slice(c0, c1 + 1)


def polygon_pixels(polygon, res: int, interior: bool = False) -> tuple:
    """(rows, cols) of pixel centres inside or on the polygon; strictly
    inside with ``interior``."""
    shape = shapely.Polygon(polygon)
    xmin, ymin, xmax, ymax = shape.bounds
    c0, c1 = max(0, math.ceil(xmin)), min(res - 1, math.floor(xmax))
    r0, r1 = max(0, math.ceil(ymin)), min(res - 1, math.floor(ymax))
    if r0 > r1 or c0 > c1:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    rows, cols = np.mgrid[r0:r1 + 1, c0:c1 + 1]
    rows, cols = rows.ravel(), cols.ravel()
    test = shapely.contains_xy if interior else shapely.intersects_xy
    hit = test(shape, cols.astype(np.float64), rows.astype(np.float64))
    return rows[hit], cols[hit]


def rect_pixels(xmin: float, ymin: float, xmax: float, ymax: float, res: int):
    r0, r1 = max(0, math.ceil(ymin)), min(res - 1, math.floor(ymax))
    c0, c1 = max(0, math.ceil(xmin)), min(res - 1, math.floor(xmax))
    if r0 > r1 or c0 > c1:
        return None
    return slice(r0, r1 + 1), slice(c0, c1 + 1)


def render_ground_truth(plan: 'model.Floorplan') -> HeatmapStack:
    problems = model.validate(plan)
    if problems:
        raise ValueError(f"cannot render an invalid floorplan: {problems[0]}")
    res = plan.resolution
    radius = config.DISK_RADIUS_PX
    data = np.zeros((NUM_CHANNELS, res, res), dtype=np.float32)

    for c in plan.corners:
        _paint_disk(data[JUNCTION_NAMES.index(c.junction.value)], c.x, c.y, radius)
    for o in plan.openings:
        forward = Direction.toward(o.x2 - o.x1, o.y2 - o.y1)
        backward = forward.rotated(2)
        _paint_disk(data[OPENING_BASE + OPENING_DIRECTIONS.index(forward)], o.x1, o.y1, radius)
        _paint_disk(data[OPENING_BASE + OPENING_DIRECTIONS.index(backward)], o.x2, o.y2, radius)
    for ic in plan.icons:
        for k, (x, y) in enumerate(((ic.xmin, ic.ymin), (ic.xmax, ic.ymin),
                                    (ic.xmax, ic.ymax), (ic.xmin, ic.ymax))):
            _paint_disk(data[ICON_CORNER_BASE + k], x, y, radius)

    room_labels = np.zeros((res, res), dtype=np.int64)
    for r in plan.rooms:
        rows, cols = polygon_pixels(r.polygon, res)
        room_labels[rows, cols] = ROOM_CLASSES.index(r.kind.value)
    for p, q in plan.wall_segments():
        strip = wall_strip(res, p, q, config.WALL_THICKNESS_PX)
        if strip is not None:
            room_labels[strip] = 1

    icon_labels = np.zeros((res, res), dtype=np.int64)
    for ic in plan.icons:
        box = rect_pixels(ic.xmin, ic.ymin, ic.xmax, ic.ymax, res)
        if box is not None:
            icon_labels[box] = ICON_CLASSES.index(ic.kind.value)

    data[ROOM_BASE:ICON_BASE] = np.arange(len(ROOM_CLASSES))[:, None, None] == room_labels[None]
    data[ICON_BASE:] = np.arange(len(ICON_CLASSES))[:, None, None] == icon_labels[None]
    log("heatmap", f"render corners={len(plan.corners)} openings={len(plan.openings)} "
                   f"icons={len(plan.icons)} rooms={len(plan.rooms)}")
    return HeatmapStack(data)


# ── LOSSES ──

def sigmoid_ce(pred: np.ndarray, gt: np.ndarray) -> float:
    x = np.asarray(pred, dtype=np.float64)
    y = np.asarray(gt, dtype=np.float64)
    if x.shape != y.shape:
        raise ValueError(f"shape mismatch: pred {x.shape} vs gt {y.shape}")
    if x.size == 0:
        return 0.0
    loss = np.maximum(x, 0) - x * y + np.log1p(np.exp(-np.abs(x)))
    return float(loss.mean())


def softmax_ce(pred: np.ndarray, labels: np.ndarray) -> float:
    """Logits are channel-first: pred (G, ...) against integer labels (...)."""
    x = np.asarray(pred, dtype=np.float64)
    lab = np.asarray(labels)
    if x.shape[1:] != lab.shape:
        raise ValueError(f"shape mismatch: logits {x.shape} vs labels {lab.shape}")
    groups = x.shape[0]
    if lab.size and (lab.min() < 0 or lab.max() >= groups):
        raise ValueError(f"label out of range [0, {groups})")
    if lab.size == 0:
        return 0.0
    lse = logsumexp(x, axis=0)
    picked = np.take_along_axis(x, lab[None].astype(np.int64), axis=0)[0]
    return float((lse - picked).mean())


# ── FHM1 ──

def to_bytes(stack: HeatmapStack) -> bytes:
    k, res = stack.data.shape[0], stack.resolution
    names = json.dumps(list(stack.names), ensure_ascii=False).encode('utf-8')
    header = b'FHM1' + struct.pack('<III', res, k, LAYOUT_VERSION) + struct.pack('<I', len(names))
    return header + names + stack.data.astype('<f4').tobytes()


def from_bytes(raw: bytes) -> HeatmapStack:
    if len(raw) < 20 or raw[:4] != b'FHM1':
        raise HeatmapFormatError("not an FHM1 heatmap file (bad magic)")
    res, k, version, name_len = struct.unpack('<IIII', raw[4:20])
    if version != LAYOUT_VERSION:
        raise HeatmapFormatError(f"unsupported layout version {version}")
    if res == 0 or k == 0:
        raise HeatmapFormatError(f"empty stack header: resolution={res} K={k}")
    end = 20 + name_len
    try:
        names = json.loads(raw[20:end].decode('utf-8'))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise HeatmapFormatError(f"bad channel-name table: {e}") from e
    if not isinstance(names, list) or len(names) != k:
        raise HeatmapFormatError(f"channel-name table has {len(names) if isinstance(names, list) else '?'} entries, header says {k}")
    expected = k * res * res * 4
    if len(raw) - end != expected:
        raise HeatmapFormatError(f"expected {expected} data bytes, found {len(raw) - end}")
    data = np.frombuffer(raw, dtype='<f4', count=k * res * res, offset=end).reshape(k, res, res)
    return HeatmapStack(data.copy(), tuple(names))


def write_stack(path, stack: HeatmapStack):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(to_bytes(stack))


def read_stack(path) -> HeatmapStack:
    return from_bytes(Path(path).read_bytes())
