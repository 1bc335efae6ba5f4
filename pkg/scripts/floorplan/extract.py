"""
Primitive candidates from a heatmap stack.

Corners, opening end-points and icon corners are the peaks of thresholded
4-connected components. Walls join corner pairs whose components overlap
along X or Y and whose junctions point at each other; openings pair facing
end-points on a wall candidate; icons assemble TL/TR/BR/BL quadruples.
Walls and openings are scored by the mean wall-semantic value in a strip
along the segment; every candidate's weight is confidence - 0.5 (corners:
scaled by CORNER_WEIGHT_SCALE).
"""
from dataclasses import dataclass, field

import numpy as np
from scipy import ndimage

from config import config, log
import model
from model import Direction, IconType, JunctionType
from heatmap import (HeatmapStack, ICON_BASE, ICON_CLASSES, ICON_CORNER_BASE, JUNCTION_NAMES,
                     OPENING_BASE, OPENING_DIRECTIONS, rect_pixels, wall_strip)


@dataclass(frozen=True)
class Component:
    row_min: int
    row_max: int
    col_min: int
    col_max: int
    area: int

    def rows_overlap(self, other: 'Component') -> bool:
        return not (self.row_max < other.row_min or other.row_max < self.row_min)

    def cols_overlap(self, other: 'Component') -> bool:
        return not (self.col_max < other.col_min or other.col_max < self.col_min)


@dataclass(frozen=True)
class Peak:
    x: int
    y: int
    value: float
    component: Component


@dataclass(frozen=True)
class CornerCandidate:
    x: float
    y: float
    junction: JunctionType
    peak_value: float
    weight: float
    component: Component


@dataclass(frozen=True)
class WallCandidate:
    a: int                  # corner candidate indices
    b: int
    x1: float
    y1: float
    x2: float
    y2: float
    confidence: float
    weight: float

    @property
    def horizontal(self) -> bool:
        return abs(self.x2 - self.x1) >= abs(self.y2 - self.y1)

    @property
    def segment(self) -> tuple:
        return (self.x1, self.y1), (self.x2, self.y2)


@dataclass(frozen=True)
class OpeningCandidate:
    x1: float
    y1: float
    x2: float
    y2: float
    confidence: float
    weight: float
    hosts: tuple = ()       # wall candidate indices


@dataclass(frozen=True)
class IconCandidate:
    kind: IconType
    xmin: float
    ymin: float
    xmax: float
    ymax: float
    confidence: float
    weight: float


@dataclass(frozen=True)
class CandidateSet:
    corners: tuple = ()
    walls: tuple = ()
    openings: tuple = ()
    icons: tuple = ()


# ── PEAKS ──

def find_peaks(plane: np.ndarray, threshold: float | None = None,
               min_area: int | None = None) -> list:
    """Highest pixel of every thresholded 4-connected component larger than
    ``min_area``. A flat top resolves to the plateau pixel nearest the
    plateau centroid, then smallest (row, column)."""
    threshold = config.PEAK_THRESHOLD if threshold is None else threshold
    min_area = config.MIN_COMPONENT_AREA if min_area is None else min_area
    labels, count = ndimage.label(plane >= threshold)
    peaks = []
    for k, box in enumerate(ndimage.find_objects(labels), start=1):
        if box is None:
            continue
        member = labels[box] == k
        area = int(member.sum())
        if area <= min_area:
            continue
        values = np.where(member, plane[box], -np.inf)
        top = values.max()
        rows, cols = np.nonzero(values == top)
        if len(rows) > 1:
            # centroid before (row, col): a flat disk top would otherwise peak on its upper rim
            dist = (rows - rows.mean()) ** 2 + (cols - cols.mean()) ** 2
            best = np.lexsort((cols, rows, dist))[0]
        else:
            best = 0
        r0, c0 = box[0].start, box[1].start
        comp = Component(r0, box[0].stop - 1, c0, box[1].stop - 1, area)
        peaks.append(Peak(int(c0 + cols[best]), int(r0 + rows[best]), float(top), comp))
    return peaks


def extract_corners(stack: HeatmapStack) -> list:
    out = []
    for ch, name in enumerate(JUNCTION_NAMES):
        for p in find_peaks(stack.data[ch]):
            weight = config.CORNER_WEIGHT_SCALE * (p.value - 0.5)
            out.append(CornerCandidate(float(p.x), float(p.y), JunctionType(name),
                                       p.value, weight, p.component))
    out.sort(key=lambda c: (c.y, c.x, JUNCTION_NAMES.index(c.junction.value)))
    log("extract", f"corners={len(out)}")
    return out


# ── SCORING ──

def score_line(stack: HeatmapStack, segment, width: int) -> float:
    (x1, y1), (x2, y2) = segment
    if (x1, y1) == (x2, y2):
        raise ValueError("cannot score a zero-length segment")
    if width < 1 or width % 2 == 0:
        raise ValueError(f"strip width must be odd, got {width}")
    wall = stack.channel("room:wall")
    strip = wall_strip(stack.resolution, (x1, y1), (x2, y2), width)
    if strip is None:
        return 0.0
    return float(wall[strip].astype(np.float64).mean())


# ── WALLS ──

def gen_wall_candidates(corners: list, stack: HeatmapStack | None = None) -> list:
    """Axis-aligned wall candidates between overlapping, mutually admissible
    corners. Without a stack the candidates are left neutral (confidence 0.5)."""
    out = []
    for i in range(len(corners)):
        a = corners[i]
        for j in range(i + 1, len(corners)):
            b = corners[j]
            dx, dy = b.x - a.x, b.y - a.y
            rows = a.component.rows_overlap(b.component)
            cols = a.component.cols_overlap(b.component)
            if rows and (not cols or abs(dx) >= abs(dy)):
                if dx == 0:
                    continue
                first, second = (a, b) if dx > 0 else (b, a)
                ia, ib = (i, j) if dx > 0 else (j, i)
                if Direction.PX not in first.junction.directions or Direction.NX not in second.junction.directions:
                    continue
                y = (a.y + b.y) / 2
                seg = ((first.x, y), (second.x, y))
            elif cols:
                if dy == 0:
                    continue
                first, second = (a, b) if dy > 0 else (b, a)
                ia, ib = (i, j) if dy > 0 else (j, i)
                if Direction.PY not in first.junction.directions or Direction.NY not in second.junction.directions:
                    continue
                x = (a.x + b.x) / 2
                seg = ((x, first.y), (x, second.y))
            else:
                continue
            conf = score_line(stack, seg, config.WALL_SCORE_WIDTH) if stack is not None else 0.5
            (x1, y1), (x2, y2) = seg
            out.append(WallCandidate(ia, ib, x1, y1, x2, y2, conf, conf - 0.5))
    log("extract", f"wall candidates={len(out)} from corners={len(corners)}")
    return out


# ── OPENINGS ──

def _hosts(walls: list, p: Peak, q: Peak, horizontal: bool) -> tuple:
    tol = config.AXIS_TOLERANCE_PX
    found = []
    for k, w in enumerate(walls):
        if w.horizontal != horizontal:
            continue
        if horizontal:
            lo, hi = min(w.x1, w.x2), max(w.x1, w.x2)
            ok = (abs(p.y - w.y1) <= tol and abs(q.y - w.y1) <= tol
                  and min(p.x, q.x) >= lo - tol and max(p.x, q.x) <= hi + tol)
        else:
            lo, hi = min(w.y1, w.y2), max(w.y1, w.y2)
            ok = (abs(p.x - w.x1) <= tol and abs(q.x - w.x1) <= tol
                  and min(p.y, q.y) >= lo - tol and max(p.y, q.y) <= hi + tol)
        if ok:
            found.append(k)
    return tuple(found)


def gen_opening_candidates(stack: HeatmapStack, walls: list) -> list:
    tol = config.AXIS_TOLERANCE_PX
    peaks = {d: find_peaks(stack.data[OPENING_BASE + k]) for k, d in enumerate(OPENING_DIRECTIONS)}

    pairs = []
    for facing, opposite, horizontal in ((Direction.PX, Direction.NX, True),
                                         (Direction.PY, Direction.NY, False)):
        for i, p in enumerate(peaks[facing]):
            for j, q in enumerate(peaks[opposite]):
                along, across = (q.x - p.x, q.y - p.y) if horizontal else (q.y - p.y, q.x - p.x)
                if along <= 0 or abs(across) > tol:
                    continue
                hosts = _hosts(walls, p, q, horizontal)
                if not hosts:
                    continue
                dist = float(np.hypot(q.x - p.x, q.y - p.y))
                pairs.append((dist, facing.value, i, j, p, q, hosts))

    pairs.sort(key=lambda t: t[:4])
    used = set()
    out = []
    for dist, facing, i, j, p, q, hosts in pairs:
        if (facing, 'p', i) in used or (facing, 'q', j) in used:
            continue
        used.add((facing, 'p', i))
        used.add((facing, 'q', j))
        conf = score_line(stack, ((p.x, p.y), (q.x, q.y)), config.OPENING_SCORE_WIDTH)
        out.append(OpeningCandidate(float(p.x), float(p.y), float(q.x), float(q.y),
                                    conf, conf - 0.5, hosts))
    out.sort(key=lambda o: (o.y1, o.x1, o.y2, o.x2))
    log("extract", f"opening candidates={len(out)}")
    return out


# ── ICONS ──

def _nearest(peaks: list, x: float, y: float):
    tol = config.AXIS_TOLERANCE_PX
    best = None
    for p in peaks:
        if abs(p.x - x) <= tol and abs(p.y - y) <= tol:
            d = (p.x - x) ** 2 + (p.y - y) ** 2
            if best is None or d < best[0]:
                best = (d, p)
    return None if best is None else best[1]


def _spans_two_icons(rect: tuple, tl: list, tr: list, br: list, bl: list) -> bool:
    """A corner of the kind an edge ends in, sitting part-way along that edge,
    means the rectangle covers two icons stacked or side by side."""
    xmin, ymin, xmax, ymax = rect
    tol = config.AXIS_TOLERANCE_PX
    edges = ((tl + tr, ymin, xmin, xmax, True), (bl + br, ymax, xmin, xmax, True),
             (tl + bl, xmin, ymin, ymax, False), (tr + br, xmax, ymin, ymax, False))
    for peaks, at, lo, hi, horizontal in edges:
        for p in peaks:
            across, along = (p.y, p.x) if horizontal else (p.x, p.y)
            if abs(across - at) <= tol and lo + tol < along < hi - tol:
                return True
    return False


def gen_icon_candidates(stack: HeatmapStack) -> list:
    tl, tr, br, bl = (find_peaks(stack.data[ICON_CORNER_BASE + k]) for k in range(4))
    semantics = stack.data[ICON_BASE:].astype(np.float64)
    seen = set()
    out = []
    for a in tl:
        for c in br:
            if c.x <= a.x or c.y <= a.y:
                continue
            b = _nearest(tr, c.x, a.y)
            d = _nearest(bl, a.x, c.y)
            if b is None or d is None:
                continue
            rect = ((a.x + d.x) / 2, (a.y + b.y) / 2, (b.x + c.x) / 2, (d.y + c.y) / 2)
            if rect in seen or rect[2] <= rect[0] or rect[3] <= rect[1]:
                continue
            seen.add(rect)
            if _spans_two_icons(rect, tl, tr, br, bl):
                continue
            box = rect_pixels(*rect, stack.resolution)
            if box is None:
                continue
            means = semantics[:, box[0], box[1]].reshape(len(ICON_CLASSES), -1).mean(axis=1)
            if means[0] > 0.5:
                continue
            k = int(np.argmax(means[1:])) + 1
            conf = float(means[k])
            out.append(IconCandidate(IconType(ICON_CLASSES[k]), *rect, conf, conf - 0.5))
    out.sort(key=lambda i: (i.ymin, i.xmin, i.ymax, i.xmax))
    log("extract", f"icon candidates={len(out)}")
    return out


def extract_candidates(stack: HeatmapStack) -> CandidateSet:
    corners = extract_corners(stack)
    walls = gen_wall_candidates(corners, stack)
    openings = gen_opening_candidates(stack, walls)
    icons = gen_icon_candidates(stack)
    return CandidateSet(tuple(corners), tuple(walls), tuple(openings), tuple(icons))


# ── DEBUG DUMP ──

def to_dict(cands: CandidateSet) -> dict:
    return {
        'corners': [{'x': c.x, 'y': c.y, 'junction': c.junction.value, 'peak_value': c.peak_value,
                     'weight': c.weight,
                     'component': {'rows': [c.component.row_min, c.component.row_max],
                                   'cols': [c.component.col_min, c.component.col_max],
                                   'area': c.component.area}}
                    for c in cands.corners],
        'walls': [{'a': w.a, 'b': w.b, 'segment': [[w.x1, w.y1], [w.x2, w.y2]],
                   'confidence': w.confidence, 'weight': w.weight} for w in cands.walls],
        'openings': [{'endpoints': [[o.x1, o.y1], [o.x2, o.y2]], 'hosts': list(o.hosts),
                      'confidence': o.confidence, 'weight': o.weight} for o in cands.openings],
        'icons': [{'kind': i.kind.value, 'rect': [i.xmin, i.ymin, i.xmax, i.ymax],
                   'confidence': i.confidence, 'weight': i.weight} for i in cands.icons],
    }


def from_dict(doc: dict) -> CandidateSet:
    corners = []
    for c in doc.get('corners', []):
        comp = c['component']
        corners.append(CornerCandidate(
            float(c['x']), float(c['y']), JunctionType(c['junction']), float(c['peak_value']),
            float(c['weight']),
            Component(comp['rows'][0], comp['rows'][1], comp['cols'][0], comp['cols'][1], comp['area'])))
    walls = [WallCandidate(w['a'], w['b'], *w['segment'][0], *w['segment'][1],
                           float(w['confidence']), float(w['weight'])) for w in doc.get('walls', [])]
    openings = [OpeningCandidate(*o['endpoints'][0], *o['endpoints'][1], float(o['confidence']),
                                 float(o['weight']), tuple(o['hosts'])) for o in doc.get('openings', [])]
    icons = [IconCandidate(IconType(i['kind']), *i['rect'], float(i['confidence']), float(i['weight']))
             for i in doc.get('icons', [])]
    return CandidateSet(tuple(corners), tuple(walls), tuple(openings), tuple(icons))
