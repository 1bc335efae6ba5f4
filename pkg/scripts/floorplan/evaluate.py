"""
Reconstruction metrics on three levels plus the wall line distance.

    low:   room corners (also opening end-points and icon corners), 10 px rule
    mid:   openings by end-point distance, icons by rect IOU, rooms by IOU
    high:  rooms whose door connections, matches and types are all right

Matching everywhere is greedy and one-to-one: the best remaining pair is
taken first, so a match is always mutually nearest among what is left.
0/0 precision or recall counts as 1.
"""
from dataclasses import asdict, dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist
from shapely.geometry import LineString

from config import config
from model import Direction, Floorplan, OpeningKind


@dataclass(frozen=True)
class MetricReport:
    corner: tuple
    opening: tuple
    icon: tuple
    room: tuple
    relationship: float
    line_distance: float | None = None
    opening_endpoint: tuple = (1.0, 1.0)
    icon_corner: tuple = (1.0, 1.0)

    def to_dict(self) -> dict:
        out = asdict(self)
        for k, v in out.items():
            if isinstance(v, tuple):
                out[k] = {'precision': v[0], 'recall': v[1]}
        return out


def precision_recall(matches: int, n_pred: int, n_gt: int) -> tuple:
    p = matches / n_pred if n_pred else 1.0
    r = matches / n_gt if n_gt else 1.0
    return p, r


def _greedy(pairs: list) -> list:
    """pairs: (key, pred, gt), smaller key first."""
    used_p, used_g, out = set(), set(), []
    for _, i, j in sorted(pairs):
        if i in used_p or j in used_g:
            continue
        used_p.add(i)
        used_g.add(j)
        out.append((i, j))
    return out


def _match_points(pred: list, gt: list, pred_labels=None, gt_labels=None) -> list:
    if not pred or not gt:
        return []
    dist = cdist(np.asarray(pred, dtype=np.float64), np.asarray(gt, dtype=np.float64))
    limit = config.MATCH_DISTANCE_PX
    ii, jj = np.nonzero(dist < limit)
    pairs = [(float(dist[i, j]), int(i), int(j)) for i, j in zip(ii, jj)
             if pred_labels is None or pred_labels[i] == gt_labels[j]]
    return _greedy(pairs)


# ── LOW LEVEL ──

def eval_corners(pred, gt) -> tuple:
    p = [(c.x, c.y) for c in pred]
    g = [(c.x, c.y) for c in gt]
    return precision_recall(len(_match_points(p, g)), len(p), len(g))


def _opening_endpoints(plan: Floorplan) -> tuple:
    pts, labels = [], []
    for o in plan.openings:
        forward = Direction.toward(o.x2 - o.x1, o.y2 - o.y1)
        pts += [(o.x1, o.y1), (o.x2, o.y2)]
        labels += [forward, forward.rotated(2)]
    return pts, labels


def _icon_corners(plan: Floorplan) -> tuple:
    pts, labels = [], []
    for ic in plan.icons:
        pts += [(ic.xmin, ic.ymin), (ic.xmax, ic.ymin), (ic.xmax, ic.ymax), (ic.xmin, ic.ymax)]
        labels += ['TL', 'TR', 'BR', 'BL']
    return pts, labels


def eval_labelled_points(pred: tuple, gt: tuple) -> tuple:
    (pp, pl), (gp, gl) = pred, gt
    return precision_recall(len(_match_points(pp, gp, pl, gl)), len(pp), len(gp))


# ── MID LEVEL ──

def eval_openings(pred: list, gt: list) -> tuple:
    limit = config.MATCH_DISTANCE_PX
    pairs = []
    for i, a in enumerate(pred):
        for j, b in enumerate(gt):
            if a.kind != b.kind:
                continue
            d1 = np.hypot(a.x1 - b.x1, a.y1 - b.y1), np.hypot(a.x2 - b.x2, a.y2 - b.y2)
            d2 = np.hypot(a.x1 - b.x2, a.y1 - b.y2), np.hypot(a.x2 - b.x1, a.y2 - b.y1)
            d = float(min(max(d1), max(d2)))
            if d < limit:
                pairs.append((d, i, j))
    return precision_recall(len(_greedy(pairs)), len(pred), len(gt))


def icon_iou(a, b) -> float:
    ix = min(a.xmax, b.xmax) - max(a.xmin, b.xmin)
    iy = min(a.ymax, b.ymax) - max(a.ymin, b.ymin)
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    return inter / (a.area + b.area - inter)


def room_iou(a, b) -> float:
    pa, pb = a.shape(), b.shape()
    union = pa.union(pb).area
    return pa.intersection(pb).area / union if union > 0 else 0.0


def _match_rooms(pred: list, gt: list, threshold: float) -> list:
    pairs = []
    for i, a in enumerate(pred):
        for j, b in enumerate(gt):
            iou = room_iou(a, b)
            if iou > threshold:
                pairs.append((-iou, i, j))
    return _greedy(pairs)


def eval_icons(pred: list, gt: list) -> tuple:
    pairs = []
    for i, a in enumerate(pred):
        for j, b in enumerate(gt):
            if a.kind == b.kind:
                iou = icon_iou(a, b)
                if iou > config.ICON_MATCH_IOU:
                    pairs.append((-iou, i, j))
    return precision_recall(len(_greedy(pairs)), len(pred), len(gt))


def eval_rooms(pred: list, gt: list) -> tuple:
    matches = _match_rooms(pred, gt, config.ROOM_MATCH_IOU)
    return precision_recall(len(matches), len(pred), len(gt))


def eval_mid(pred: Floorplan, gt: Floorplan) -> dict:
    return {
        'opening': eval_openings(list(pred.openings), list(gt.openings)),
        'icon': eval_icons(list(pred.icons), list(gt.icons)),
        'room': eval_rooms(list(pred.rooms), list(gt.rooms)),
    }


# ── HIGH LEVEL ──

def door_adjacency(plan: Floorplan) -> set:
    """Room index pairs (i < j) joined by a door on a wall both rooms border."""
    rings = [r.shape().exterior.buffer(0.5) for r in plan.rooms]
    out = set()
    for o in plan.openings:
        if o.kind != OpeningKind.DOOR:
            continue
        host = LineString(plan.wall_segment(o.wall))
        touching = [k for k, ring in enumerate(rings) if host.intersection(ring).length >= 1.0]
        for a in range(len(touching)):
            for b in range(a + 1, len(touching)):
                out.add((touching[a], touching[b]))
    return out


def eval_relationships(pred: Floorplan, gt: Floorplan) -> float:
    if not gt.rooms:
        return 1.0
    matched = {j: i for i, j in _match_rooms(list(pred.rooms), list(gt.rooms), config.RELATION_MATCH_IOU)}
    gt_adj, pred_adj = door_adjacency(gt), door_adjacency(pred)
    neighbors = {j: set() for j in range(len(gt.rooms))}
    for a, b in gt_adj:
        neighbors[a].add(b)
        neighbors[b].add(a)

    def typed_match(j):
        return j in matched and pred.rooms[matched[j]].kind == gt.rooms[j].kind

    correct = 0
    for j in range(len(gt.rooms)):
        group = {j} | neighbors[j]
        if not all(typed_match(k) for k in group):
            continue
        mine = matched[j]
        linked = {b if a == mine else a for a, b in pred_adj if mine in (a, b)}
        if linked == {matched[k] for k in neighbors[j]}:
            correct += 1
    return correct / len(gt.rooms)


# ── LINE DISTANCE ──

def _sample_walls(plan: Floorplan) -> np.ndarray:
    t = np.linspace(0.0, 1.0, config.LINE_SAMPLES)[:, None]
    parts = [np.asarray(p, dtype=np.float64) + t * (np.asarray(q, dtype=np.float64) - np.asarray(p))
             for p, q in plan.wall_segments()]
    return np.concatenate(parts)


def wall_line_distance(pred: Floorplan, gt: Floorplan) -> float:
    if not pred.walls or not gt.walls:
        raise ValueError("line distance needs at least one wall in each plan")
    a, b = _sample_walls(pred), _sample_walls(gt)
    ab, _ = cKDTree(b).query(a)
    ba, _ = cKDTree(a).query(b)
    return float((ab.mean() + ba.mean()) / 2)


# ── REPORT ──

def evaluate(pred: Floorplan, gt: Floorplan) -> MetricReport:
    mid = eval_mid(pred, gt)
    line = wall_line_distance(pred, gt) if pred.walls and gt.walls else None
    return MetricReport(
        corner=eval_corners(pred.corners, gt.corners),
        opening=mid['opening'],
        icon=mid['icon'],
        room=mid['room'],
        relationship=eval_relationships(pred, gt),
        line_distance=line,
        opening_endpoint=eval_labelled_points(_opening_endpoints(pred), _opening_endpoints(gt)),
        icon_corner=eval_labelled_points(_icon_corners(pred), _icon_corners(gt)),
    )


def format_table(report: MetricReport) -> str:
    cols = [("wall", report.corner), ("door", report.opening), ("icon", report.icon),
            ("room", report.room)]
    head = f"{'':<10}" + "".join(f"{name:>8}" for name, _ in cols) + f"{'relationship':>14}"
    prec = f"{'precision':<10}" + "".join(f"{v[0] * 100:>8.1f}" for _, v in cols) \
        + f"{report.relationship * 100:>14.1f}"
    rec = f"{'recall':<10}" + "".join(f"{v[1] * 100:>8.1f}" for _, v in cols) + f"{'-':>14}"
    lines = [head, prec, rec]
    if report.line_distance is not None:
        lines.append(f"line distance: {report.line_distance:.3f} px")
    return "\n".join(lines)
