"""
Synthetic floorplans, scans of them and degraded heatmaps.

gen_floorplan splits a rectangle (binary space partition, integer pixel
coordinates) into rooms, cuts the wall lines at every vertex, connects the
rooms by doors along a random spanning tree of the adjacency graph, adds
windows on exterior walls and places icons inside rooms. Distinct split
coordinates on one axis are DISK_GAP_PX apart or equal, so ground-truth
disks of one channel never touch.
"""
import math
from pathlib import Path

import networkx as nx
import numpy as np
import shapely
import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError
from scipy import ndimage

from config import config, log
from domain import FloorplanDomain
from heatmap import (HeatmapStack, ICON_BASE, NUM_GEOMETRY, ROOM_BASE)
from model import (Corner, Direction, Floorplan, Icon, IconType, JunctionType, Opening, OpeningKind, Room,
                   RoomType, Wall, canonical_polygon)
from pointcloud import PointCloud

DISK_GAP_PX = 25
MIN_ROOM_SIDE_M = 1.5
WALL_HEIGHT_M = 2.5
FLOOR_DENSITY_RATIO = 0.2
SCAN_NOISE_M = 0.01
MAX_ROOMS = 12
ICON_MARGIN_PX = 4
ICON_TRIES = 50
DOOR_WIDTH_M = 0.9
WINDOW_WIDTH_M = 1.2
WINDOW_MIN_WALL_PX = 40
OPENING_END_MARGIN_PX = 6


class SynthConfigError(ValueError):
    pass


class NoiseConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    heatmap_sigma: float = Field(0.0, ge=0)
    dropout_prob: float = Field(0.0, ge=0, le=1)
    jitter_px: float = Field(0.0, ge=0)

    @property
    def is_zero(self) -> bool:
        return self.heatmap_sigma == 0 and self.dropout_prob == 0 and self.jitter_px == 0


class SynthConfig(BaseModel):
    model_config = ConfigDict(extra='forbid')

    seed: int = 0
    room_count_mean: float = Field(5.2, gt=0)
    room_count_std: float = Field(1.8, gt=0)
    icon_count_mean: float = Field(9.1, gt=0)
    icon_count_std: float = Field(4.5, gt=0)
    opening_count_mean: float = Field(9.9, gt=0)
    opening_count_std: float = Field(2.9, gt=0)
    corner_count_mean: float = Field(18.1, gt=0)
    area_mean_m2: float = Field(63.8, gt=0)
    area_std_m2: float = Field(13.0, gt=0)
    scan_density_per_m2: float = Field(200.0, ge=0)
    noise: NoiseConfig = Field(default_factory=NoiseConfig)


def load_synth_config(path) -> SynthConfig:
    path = Path(path)
    with open(path, encoding='utf-8') as f:
        try:
            doc = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise SynthConfigError(f"{path}: not valid YAML: {e}") from e
    if not isinstance(doc, dict):
        raise SynthConfigError(f"{path}: expected a mapping at the top level")
    try:
        return SynthConfig.model_validate(doc)
    except ValidationError as e:
        err = e.errors()[0]
        key = ".".join(str(p) for p in err['loc']) or "<root>"
        raise SynthConfigError(f"{path}: {key}: {err['msg']}") from e


# ── PRIORS ──

ROOM_TYPE_WEIGHTS = {
    RoomType.BEDROOM: 0.30,
    RoomType.BATHROOM: 0.20,
    RoomType.KITCHEN: 0.15,
    RoomType.CLOSET: 0.10,
    RoomType.CORRIDOR: 0.10,
    RoomType.DINING_ROOM: 0.10,
    RoomType.BALCONY: 0.05,
}

ICON_PRIORS = {
    RoomType.LIVING_ROOM: {IconType.SOFA: 3, IconType.TABLE: 2, IconType.CABINET: 1},
    RoomType.KITCHEN: {IconType.COUNTER: 3, IconType.REFRIGERATOR: 2, IconType.SINK: 2, IconType.TABLE: 1},
    RoomType.BEDROOM: {IconType.BED: 3, IconType.CABINET: 2, IconType.TABLE: 1},
    RoomType.BATHROOM: {IconType.TOILET: 3, IconType.SINK: 2, IconType.BATHTUB: 2},
    RoomType.CLOSET: {IconType.CABINET: 1},
    RoomType.BALCONY: {IconType.TABLE: 1},
    RoomType.CORRIDOR: {IconType.CABINET: 1},
    RoomType.DINING_ROOM: {IconType.TABLE: 3, IconType.CABINET: 1},
}

# width, depth, height in meters
ICON_SIZES = {
    IconType.COUNTER: (1.8, 0.6, 0.9),
    IconType.BATHTUB: (1.7, 0.75, 0.55),
    IconType.TOILET: (0.7, 0.45, 0.8),
    IconType.SINK: (0.6, 0.45, 0.85),
    IconType.SOFA: (2.0, 0.9, 0.8),
    IconType.CABINET: (1.0, 0.5, 1.8),
    IconType.BED: (2.0, 1.6, 0.5),
    IconType.TABLE: (1.2, 0.8, 0.75),
    IconType.REFRIGERATOR: (0.7, 0.7, 1.8),
}


# ── LAYOUT ──

def _split_candidates(lo: int, hi: int, min_side: int, taken: list) -> list:
    out = []
    for c in range(lo + min_side, hi - min_side + 1):
        if c in taken or all(abs(c - t) >= DISK_GAP_PX for t in taken):
            out.append(c)
    return out


def _partition(rng, outer: tuple, rooms: int, min_side: int) -> list:
    rects = [outer]
    xs, ys = [outer[0], outer[2]], [outer[1], outer[3]]
    while len(rects) < rooms:
        options = []
        for k, (x0, y0, x1, y1) in enumerate(rects):
            vert = _split_candidates(x0, x1, min_side, xs)
            horz = _split_candidates(y0, y1, min_side, ys)
            if vert or horz:
                options.append((k, vert, horz))
        if not options:
            break
        areas = np.array([(rects[k][2] - rects[k][0]) * (rects[k][3] - rects[k][1])
                          for k, _, _ in options], dtype=np.float64)
        k, vert, horz = options[rng.choice(len(options), p=areas / areas.sum())]
        x0, y0, x1, y1 = rects[k]
        if vert and horz:
            use_vert = rng.random() < (0.7 if x1 - x0 >= y1 - y0 else 0.3)
        else:
            use_vert = bool(vert)
        if use_vert:
            c = int(vert[rng.integers(len(vert))])
            rects[k:k + 1] = [(x0, y0, c, y1), (c, y0, x1, y1)]
            if c not in xs:
                xs.append(c)
        else:
            c = int(horz[rng.integers(len(horz))])
            rects[k:k + 1] = [(x0, y0, x1, c), (x0, c, x1, y1)]
            if c not in ys:
                ys.append(c)
    return rects


def _merge_spans(spans: list) -> list:
    merged = []
    for a, b in sorted(spans):
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return merged


def _wall_segments(rects: list) -> list:
    """Room edges merged per line and cut at every room vertex; each
    segment is ((xa, ya), (xb, yb)) with xa <= xb, ya <= yb."""
    verts = {(x, y) for r in rects for x in (r[0], r[2]) for y in (r[1], r[3])}
    segs = set()
    for y in sorted({v[1] for v in verts}):
        spans = [(r[0], r[2]) for r in rects if y in (r[1], r[3])]
        for a, b in _merge_spans(spans):
            cuts = sorted({a, b} | {vx for vx, vy in verts if vy == y and a < vx < b})
            segs.update(((p, y), (q, y)) for p, q in zip(cuts, cuts[1:]))
    for x in sorted({v[0] for v in verts}):
        spans = [(r[1], r[3]) for r in rects if x in (r[0], r[2])]
        for a, b in _merge_spans(spans):
            cuts = sorted({a, b} | {vy for vx, vy in verts if vx == x and a < vy < b})
            segs.update(((x, p), (x, q)) for p, q in zip(cuts, cuts[1:]))
    return sorted(segs)


def _sides(seg: tuple, rects: list) -> list:
    (xa, ya), (xb, yb) = seg
    out = []
    for k, (x0, y0, x1, y1) in enumerate(rects):
        if ya == yb and ya in (y0, y1) and x0 <= xa and xb <= x1:
            out.append(k)
        elif xa == xb and xa in (x0, x1) and y0 <= ya and yb <= y1:
            out.append(k)
    return out


def _sample_count(rng, mean: float, std: float) -> int:
    return max(0, int(round(rng.normal(mean, std))))


class _OpeningPlacer:
    """One opening per wall; same-direction end-points stay DISK_GAP_PX apart."""

    def __init__(self, segs: list):
        self.segs = segs
        self.used = set()
        self.ends = {True: ([], []), False: ([], [])}    # horizontal -> (starts, stops)
        self.openings = []

    def _clear(self, horizontal: bool, start: tuple, stop: tuple) -> bool:
        starts, stops = self.ends[horizontal]
        far = lambda pts, p: all(math.dist(p, q) >= DISK_GAP_PX for q in pts)
        return far(starts, start) and far(stops, stop)

    def place(self, k: int, kind: OpeningKind, width_px: int) -> bool:
        if k in self.used:
            return False
        (xa, ya), (xb, yb) = self.segs[k]
        horizontal = ya == yb
        length = (xb - xa) if horizontal else (yb - ya)
        width = max(12, min(width_px, length - 2 * OPENING_END_MARGIN_PX))
        if width > length - 2 * OPENING_END_MARGIN_PX:
            return False
        lo, hi = OPENING_END_MARGIN_PX, length - OPENING_END_MARGIN_PX - width
        centre = (length - width) // 2
        for off in sorted(range(lo, hi + 1), key=lambda s: (abs(s - centre), s)):
            start = (xa + off, ya) if horizontal else (xa, ya + off)
            stop = (start[0] + width, ya) if horizontal else (xa, start[1] + width)
            if self._clear(horizontal, start, stop):
                self.used.add(k)
                self.ends[horizontal][0].append(start)
                self.ends[horizontal][1].append(stop)
                self.openings.append(Opening(kind, *map(float, start), *map(float, stop), k))
                return True
        return False


def _place_icons(rng, cfg: SynthConfig, rects: list, kinds: list, scale: float) -> list:
    count = _sample_count(rng, cfg.icon_count_mean, cfg.icon_count_std)
    areas = np.array([(r[2] - r[0]) * (r[3] - r[1]) for r in rects], dtype=np.float64)
    placed = []
    for _ in range(count):
        for _ in range(ICON_TRIES):
            k = int(rng.choice(len(rects), p=areas / areas.sum()))
            prior = ICON_PRIORS[kinds[k]]
            types = list(prior)
            weights = np.array([prior[t] for t in types], dtype=np.float64)
            kind = types[int(rng.choice(len(types), p=weights / weights.sum()))]
            w_m, d_m, _ = ICON_SIZES[kind]
            w, d = max(4, round(w_m / scale)), max(4, round(d_m / scale))
            if rng.random() < 0.5:
                w, d = d, w
            x0, y0, x1, y1 = rects[k]
            xmax_lo, ymax_lo = x1 - ICON_MARGIN_PX - w, y1 - ICON_MARGIN_PX - d
            if xmax_lo < x0 + ICON_MARGIN_PX or ymax_lo < y0 + ICON_MARGIN_PX:
                continue
            ix = int(rng.integers(x0 + ICON_MARGIN_PX, xmax_lo + 1))
            iy = int(rng.integers(y0 + ICON_MARGIN_PX, ymax_lo + 1))
            icon = Icon(kind, float(ix), float(iy), float(ix + w), float(iy + d))
            if any(not (icon.xmax < e.xmin or e.xmax < icon.xmin
                        or icon.ymax < e.ymin or e.ymax < icon.ymin) for e in placed):
                continue
            if any(math.dist(p, q) < DISK_GAP_PX
                   for e in placed for p, q in zip(_icon_corners(icon), _icon_corners(e))):
                continue
            placed.append(icon)
            break
    return placed


def _icon_corners(icon: Icon) -> tuple:
    return ((icon.xmin, icon.ymin), (icon.xmax, icon.ymin),
            (icon.xmax, icon.ymax), (icon.xmin, icon.ymax))


def gen_floorplan(cfg: SynthConfig, seed: int | None = None) -> Floorplan:
    seed = cfg.seed if seed is None else seed
    rng = np.random.default_rng(seed)
    res = config.GRID_RESOLUTION

    rooms_wanted = min(MAX_ROOMS, max(1, int(round(rng.normal(cfg.room_count_mean, cfg.room_count_std)))))
    area = float(np.clip(rng.normal(cfg.area_mean_m2, cfg.area_std_m2), 25.0, 120.0))
    aspect = rng.uniform(1.0, 1.8)
    long_m, short_m = math.sqrt(area * aspect), math.sqrt(area / aspect)
    scale = 1.12 * long_m / res
    long_px, short_px = round(long_m / scale), round(short_m / scale)
    w, h = (long_px, short_px) if rng.random() < 0.5 else (short_px, long_px)
    x0, y0 = (res - w) // 2, (res - h) // 2
    min_side = max(math.ceil(MIN_ROOM_SIDE_M / scale), DISK_GAP_PX)

    rects = _partition(rng, (x0, y0, x0 + w, y0 + h), rooms_wanted, min_side)
    segs = _wall_segments(rects)

    ids = {v: n for n, v in enumerate(sorted({p for s in segs for p in s}, key=lambda v: (v[1], v[0])))}
    dirs = {v: set() for v in ids}
    for a, b in segs:
        da = Direction.toward(b[0] - a[0], b[1] - a[1])
        dirs[a].add(da)
        dirs[b].add(da.rotated(2))
    corners = tuple(Corner(n, float(v[0]), float(v[1]), JunctionType.from_directions(dirs[v]))
                    for v, n in sorted(ids.items(), key=lambda kv: kv[1]))
    walls = tuple(Wall(ids[a], ids[b], config.WALL_THICKNESS_PX) for a, b in segs)

    sizes = [(r[2] - r[0]) * (r[3] - r[1]) for r in rects]
    largest = int(np.argmax(sizes))
    others = list(ROOM_TYPE_WEIGHTS)
    p = np.array([ROOM_TYPE_WEIGHTS[t] for t in others])
    kinds = [RoomType.LIVING_ROOM if k == largest else others[int(rng.choice(len(others), p=p))]
             for k in range(len(rects))]

    sides = [_sides(s, rects) for s in segs]
    g = nx.Graph()
    g.add_nodes_from(range(len(rects)))
    for k, rs in enumerate(sides):
        if len(rs) == 2:
            a, b = sorted(rs)
            if g.has_edge(a, b):
                g[a][b]['walls'].append(k)
            else:
                g.add_edge(a, b, walls=[k], weight=float(rng.random()))
    placer = _OpeningPlacer(segs)
    door_px = round(DOOR_WIDTH_M / scale)
    for a, b in sorted(nx.minimum_spanning_tree(g).edges()):
        shared = sorted(g[a][b]['walls'], key=lambda k: -_length(segs[k]))
        if not any(placer.place(k, OpeningKind.DOOR, door_px) for k in shared):
            log("synth", f"seed={seed}: no room for a door between rooms {a} and {b}")

    budget = _sample_count(rng, cfg.opening_count_mean, cfg.opening_count_std) - len(placer.openings)
    exterior = [k for k, rs in enumerate(sides) if len(rs) == 1 and _length(segs[k]) >= WINDOW_MIN_WALL_PX]
    window_px = round(WINDOW_WIDTH_M / scale)
    for k in rng.permutation(exterior):
        if budget <= 0:
            break
        budget -= placer.place(int(k), OpeningKind.WINDOW, window_px)
    interior = [k for k, rs in enumerate(sides) if len(rs) == 2]
    for k in rng.permutation(interior):
        if budget <= 0:
            break
        budget -= placer.place(int(k), OpeningKind.DOOR, door_px)

    icons = _place_icons(rng, cfg, rects, kinds, scale)
    rooms = tuple(Room(kinds[k], canonical_polygon(((r[0], r[1]), (r[2], r[1]), (r[2], r[3]), (r[0], r[3]))))
                  for k, r in enumerate(rects))
    openings = tuple(sorted(placer.openings, key=lambda o: o.wall))
    plan = Floorplan(corners, walls, openings, tuple(icons), rooms,
                     domain=FloorplanDomain(0.0, 0.0, scale, res), resolution=res)
    log("synth", f"seed={seed} rooms={len(rooms)} corners={len(corners)} "
                 f"openings={len(openings)} icons={len(icons)} area={area:.1f}m2")
    return plan


def _length(seg: tuple) -> float:
    (xa, ya), (xb, yb) = seg
    return abs(xb - xa) + abs(yb - ya)


# ── SCANS ──

def _sample_polygon(rng, polygon, count: int) -> np.ndarray:
    shape = shapely.Polygon(polygon)
    xmin, ymin, xmax, ymax = shape.bounds
    out = np.zeros((0, 2))
    while len(out) < count:
        batch = rng.uniform((xmin, ymin), (xmax, ymax), size=(2 * (count - len(out)) + 8, 2))
        batch = batch[shapely.contains_xy(shape, batch[:, 0], batch[:, 1])]
        out = np.concatenate([out, batch])
    return out[:count]


def _box_surface(rng, rect: tuple, height: float, count: int) -> np.ndarray:
    """Points on the top and the four sides of an axis-aligned box."""
    x0, y0, x1, y1 = rect
    w, d = x1 - x0, y1 - y0
    faces = np.array([w * d, w * height, w * height, d * height, d * height])
    face = rng.choice(5, size=count, p=faces / faces.sum())
    u, v = rng.random(count), rng.random(count)
    pts = np.empty((count, 3))
    pts[:, 0] = np.select([face == 3, face == 4], [x0, x1], x0 + u * w)
    pts[:, 1] = np.select([face == 1, face == 2], [y0, y1], y0 + u * d)
    pts[:, 1] = np.where(face == 0, y0 + v * d, pts[:, 1])
    pts[:, 2] = np.where(face == 0, height, v * height)
    return pts


def sample_scan(plan: Floorplan, density_per_m2: float, seed: int) -> PointCloud:
    if plan.domain is None:
        raise ValueError("scan sampling needs a plan with a physical domain")
    if not plan.walls:
        raise ValueError("scan sampling needs at least one wall")
    if density_per_m2 < 0:
        raise ValueError(f"density must be >= 0, got {density_per_m2}")
    rng = np.random.default_rng(seed)
    dom = plan.domain
    parts = [np.zeros((0, 3))]

    for p, q in plan.wall_segments():
        a, b = dom.grid_to_world(p), dom.grid_to_world(q)
        length = float(np.hypot(*(b - a)))
        n = int(rng.poisson(density_per_m2 * length * WALL_HEIGHT_M))
        t = rng.random((n, 1))
        z = rng.uniform(0.0, WALL_HEIGHT_M, n)
        parts.append(np.column_stack([a + t * (b - a), z]))

    for r in plan.rooms:
        world = dom.grid_to_world(np.asarray(r.polygon, dtype=np.float64))
        area = shapely.Polygon(world).area
        n = int(rng.poisson(density_per_m2 * FLOOR_DENSITY_RATIO * area))
        parts.append(np.column_stack([_sample_polygon(rng, world, n), np.zeros(n)]))

    for ic in plan.icons:
        (x0, y0), (x1, y1) = dom.grid_to_world([(ic.xmin, ic.ymin), (ic.xmax, ic.ymax)])
        height = ICON_SIZES[ic.kind][2]
        surface = (x1 - x0) * (y1 - y0) + 2 * ((x1 - x0) + (y1 - y0)) * height
        n = int(rng.poisson(density_per_m2 * surface))
        parts.append(_box_surface(rng, (x0, y0, x1, y1), height, n))

    pts = np.concatenate(parts)
    pts = pts + rng.normal(0.0, SCAN_NOISE_M, pts.shape)
    log("synth", f"scan points={len(pts)} density={density_per_m2}/m2")
    return PointCloud(pts)


# ── HEATMAP CORRUPTION ──

def _move_components(rng, plane: np.ndarray, noise: NoiseConfig) -> np.ndarray:
    labels, count = ndimage.label(plane >= config.PEAK_THRESHOLD)
    if count == 0:
        return plane
    res = plane.shape[0]
    out = np.where(labels > 0, 0.0, plane).astype(np.float32)
    for k in range(1, count + 1):
        drop = rng.random() < noise.dropout_prob
        dx = round(rng.uniform(-noise.jitter_px, noise.jitter_px))
        dy = round(rng.uniform(-noise.jitter_px, noise.jitter_px))
        if drop:
            continue
        rows, cols = np.nonzero(labels == k)
        r, c = rows + dy, cols + dx
        keep = (r >= 0) & (r < res) & (c >= 0) & (c < res)
        out[r[keep], c[keep]] = np.maximum(out[r[keep], c[keep]], plane[rows[keep], cols[keep]])
    return out


def corrupt_heatmaps(stack: HeatmapStack, noise: NoiseConfig, seed: int) -> HeatmapStack:
    if noise.is_zero:
        return HeatmapStack(stack.data.copy(), stack.names)
    if not stack.is_floorplan_layout:
        raise ValueError("corruption needs the floorplan channel layout")
    rng = np.random.default_rng(seed)
    data = stack.data.astype(np.float32, copy=True)
    for ch in range(NUM_GEOMETRY):
        data[ch] = _move_components(rng, data[ch], noise)
    if noise.heatmap_sigma > 0:
        geometry = data[:NUM_GEOMETRY]
        geometry += rng.normal(0.0, noise.heatmap_sigma, geometry.shape).astype(np.float32)
        np.clip(geometry, 0.0, 1.0, out=geometry)
    # semantic groups are only rescaled where they no longer sum to one
    for lo, hi in ((ROOM_BASE, ICON_BASE), (ICON_BASE, len(data))):
        group = data[lo:hi]
        total = group.sum(axis=0)
        off = np.abs(total - 1.0) > 1e-6
        if not off.any():
            continue
        empty = off & (total <= 0)
        group[0][empty] = 1.0
        total[empty] = 1.0
        group[:, off] /= total[off]
    log("synth", f"corrupt sigma={noise.heatmap_sigma} dropout={noise.dropout_prob} "
                 f"jitter={noise.jitter_px} seed={seed}")
    return HeatmapStack(data, stack.names)
