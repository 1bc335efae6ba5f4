"""
Heatmap stack -> vector floorplan.

    extract -> build_ip -> solve_ip -> snap corners -> assemble_rooms
            -> attach openings and icons -> validate

Rows of the integer program (all coefficients integer):
    wall_corner        x_wall <= x_corner, once per end-point
    junction_degree    sum of admissible incident walls == |J| * x_corner
    direction_at_most_one   per junction direction with >= 2 candidates
    dead_direction     x_corner <= 0 when a junction direction has no wall
    inadmissible_wall  x_wall <= 0 when an end-point cannot host it
    opening_host       x_opening <= sum of hosting walls
    corner_exclusion   corners closer than CORNER_EXCLUSION_PX, pairwise
    icon_exclusion     icon rects with IOU > ICON_EXCLUSION_IOU, pairwise
    wall_crossing      walls that cross or overlap away from a shared corner
"""
import math
from dataclasses import dataclass

import networkx as nx
import numpy as np
from shapely.geometry import LineString, Polygon
from shapely.ops import polygonize, unary_union

from config import config, log
import model
from model import (Corner, Direction, Floorplan, Icon, Opening, OpeningKind, Room, RoomType,
                   Wall, canonical_polygon)
from heatmap import HeatmapStack, ROOM_BASE, ROOM_CLASSES, polygon_pixels
from extract import CandidateSet, extract_candidates
from solver import IPModel, IPSolution, solve_ip


class ReconstructionError(RuntimeError):
    pass


@dataclass(frozen=True)
class Reconstruction:
    plan: Floorplan
    candidates: CandidateSet
    model: IPModel
    solution: IPSolution


# ── INTEGER PROGRAM ──

def rect_iou(a: tuple, b: tuple) -> float:
    ix = min(a[2], b[2]) - max(a[0], b[0])
    iy = min(a[3], b[3]) - max(a[1], b[1])
    if ix <= 0 or iy <= 0:
        return 0.0
    inter = ix * iy
    union = (a[2] - a[0]) * (a[3] - a[1]) + (b[2] - b[0]) * (b[3] - b[1]) - inter
    return inter / union


def _walls_conflict(cands: CandidateSet, k: int, l: int) -> bool:
    """True when two wall candidates touch anywhere except in a single
    point at a corner they share."""
    p, q = cands.walls[k], cands.walls[l]
    x0 = max(min(p.x1, p.x2), min(q.x1, q.x2))
    x1 = min(max(p.x1, p.x2), max(q.x1, q.x2))
    y0 = max(min(p.y1, p.y2), min(q.y1, q.y2))
    y1 = min(max(p.y1, p.y2), max(q.y1, q.y2))
    if x0 > x1 or y0 > y1:
        return False
    shared = {p.a, p.b} & {q.a, q.b}
    return not (shared and x0 == x1 and y0 == y1)


def build_ip(cands: CandidateSet) -> IPModel:
    m = IPModel()
    cv = [m.add_variable(f"corner_{i}", c.weight) for i, c in enumerate(cands.corners)]
    wv = [m.add_variable(f"wall_{i}", w.weight) for i, w in enumerate(cands.walls)]
    ov = [m.add_variable(f"opening_{i}", o.weight) for i, o in enumerate(cands.openings)]
    iv = [m.add_variable(f"icon_{i}", c.weight) for i, c in enumerate(cands.icons)]

    incident = {}
    for k, w in enumerate(cands.walls):
        a, b = cands.corners[w.a], cands.corners[w.b]
        m.add([(wv[k], 1), (cv[w.a], -1)], '<=', 0, 'wall_corner')
        m.add([(wv[k], 1), (cv[w.b], -1)], '<=', 0, 'wall_corner')
        da = Direction.toward(b.x - a.x, b.y - a.y)
        db = da.rotated(2)
        if da not in a.junction.directions or db not in b.junction.directions:
            m.add([(wv[k], 1)], '<=', 0, 'inadmissible_wall')
            continue
        incident.setdefault((w.a, da), []).append(k)
        incident.setdefault((w.b, db), []).append(k)

    for i, c in enumerate(cands.corners):
        dirs = sorted(c.junction.directions, key=lambda d: d.value)
        per_dir = [incident.get((i, d), []) for d in dirs]
        every = [k for ks in per_dir for k in ks]
        if every:
            m.add([(wv[k], 1) for k in every] + [(cv[i], -len(dirs))], '=', 0, 'junction_degree')
        for ks in per_dir:
            if len(ks) >= 2:
                m.add([(wv[k], 1) for k in ks], '<=', 1, 'direction_at_most_one')
            elif not ks:
                m.add([(cv[i], 1)], '<=', 0, 'dead_direction')
        m.add_group(cv[i], [[wv[k] for k in ks] for ks in per_dir])

    for k, o in enumerate(cands.openings):
        m.add([(ov[k], 1)] + [(wv[h], -1) for h in o.hosts], '<=', 0, 'opening_host')

    limit = config.CORNER_EXCLUSION_PX
    for i, a in enumerate(cands.corners):
        for j in range(i + 1, len(cands.corners)):
            b = cands.corners[j]
            if math.hypot(a.x - b.x, a.y - b.y) < limit:
                m.add([(cv[i], 1), (cv[j], 1)], '<=', 1, 'corner_exclusion')

    rects = [(c.xmin, c.ymin, c.xmax, c.ymax) for c in cands.icons]
    for i in range(len(rects)):
        for j in range(i + 1, len(rects)):
            if rect_iou(rects[i], rects[j]) > config.ICON_EXCLUSION_IOU:
                m.add([(iv[i], 1), (iv[j], 1)], '<=', 1, 'icon_exclusion')

    for k in range(len(cands.walls)):
        for l in range(k + 1, len(cands.walls)):
            if _walls_conflict(cands, k, l):
                m.add([(wv[k], 1), (wv[l], 1)], '<=', 1, 'wall_crossing')

    log("ip", f"vars={m.size} rows={len(m.constraints)}")
    return m


# ── ASSEMBLY ──

def _snap_corners(cands: CandidateSet, corners: list, walls: list) -> dict:
    """Selected corners joined by a horizontal wall share their mean y,
    by a vertical wall their mean x."""
    pos = {i: [cands.corners[i].x, cands.corners[i].y] for i in corners}
    for axis, horizontal in ((1, True), (0, False)):
        g = nx.Graph()
        g.add_nodes_from(corners)
        g.add_edges_from((cands.walls[k].a, cands.walls[k].b) for k in walls
                         if cands.walls[k].horizontal == horizontal)
        for comp in nx.connected_components(g):
            if len(comp) > 1:
                mean = sum(pos[i][axis] for i in comp) / len(comp)
                for i in comp:
                    pos[i][axis] = mean
    return pos


def _room_kind(stack: HeatmapStack, polygon) -> RoomType:
    res = stack.resolution
    rows, cols = polygon_pixels(polygon, res, interior=True)
    if len(rows) == 0:
        pt = Polygon(polygon).representative_point()
        rows = np.array([min(res - 1, max(0, int(pt.y)))])
        cols = np.array([min(res - 1, max(0, int(pt.x)))])
    types = stack.data[ROOM_BASE + 2:ROOM_BASE + len(ROOM_CLASSES)]
    means = types[:, rows, cols].astype(np.float64).mean(axis=1)
    return RoomType(ROOM_CLASSES[2 + int(np.argmax(means))])


def assemble_rooms(segments: list, stack: HeatmapStack) -> list:
    """Bounded faces of the planar subdivision drawn by ``segments``."""
    if not segments:
        return []
    lines = unary_union([LineString(s) for s in segments if s[0] != s[1]])
    rooms = []
    for face in polygonize(lines):
        if face.area <= 0:
            continue
        polygon = canonical_polygon(face.exterior.coords)
        rooms.append(Room(_room_kind(stack, polygon), polygon))
    rooms.sort(key=lambda r: (r.polygon[0][1], r.polygon[0][0]))
    log("rooms", f"faces={len(rooms)} walls={len(segments)}")
    return rooms


def _snap_onto(seg: tuple, x: float, y: float) -> tuple:
    (x1, y1), (x2, y2) = seg
    if y1 == y2:
        return min(max(x, min(x1, x2)), max(x1, x2)), y1
    return x1, min(max(y, min(y1, y2)), max(y1, y2))


def _opening_kind(seg: tuple, rooms: list) -> OpeningKind:
    host = LineString(seg)
    touching = sum(1 for r in rooms if host.intersection(r.shape().exterior).length > 0)
    return OpeningKind.DOOR if touching >= 2 else OpeningKind.WINDOW


def assemble_floorplan(cands: CandidateSet, solution: IPSolution, stack: HeatmapStack) -> Floorplan:
    x = solution.assignment
    nc, nw, no = len(cands.corners), len(cands.walls), len(cands.openings)
    corners = [i for i in range(nc) if x[i]]
    walls = [k for k in range(nw) if x[nc + k]]
    openings = [k for k in range(no) if x[nc + nw + k]]
    icons = [k for k in range(len(cands.icons)) if x[nc + nw + no + k]]

    pos = _snap_corners(cands, corners, walls)
    new_id = {i: n for n, i in enumerate(corners)}
    plan_corners = tuple(Corner(new_id[i], pos[i][0], pos[i][1], cands.corners[i].junction)
                         for i in corners)
    wall_index = {k: n for n, k in enumerate(walls)}
    plan_walls = tuple(Wall(new_id[cands.walls[k].a], new_id[cands.walls[k].b],
                            config.WALL_THICKNESS_PX) for k in walls)
    segments = [(tuple(pos[cands.walls[k].a]), tuple(pos[cands.walls[k].b])) for k in walls]
    rooms = assemble_rooms(segments, stack)

    plan_openings = []
    for k in openings:
        o = cands.openings[k]
        host = next((h for h in o.hosts if h in wall_index), None)
        if host is None:
            continue
        seg = segments[wall_index[host]]
        p, q = _snap_onto(seg, o.x1, o.y1), _snap_onto(seg, o.x2, o.y2)
        if p == q:
            continue
        plan_openings.append(Opening(_opening_kind(seg, rooms), *p, *q, wall_index[host]))

    plan_icons = tuple(Icon(cands.icons[k].kind, cands.icons[k].xmin, cands.icons[k].ymin,
                            cands.icons[k].xmax, cands.icons[k].ymax) for k in icons)
    return Floorplan(plan_corners, plan_walls, tuple(plan_openings), plan_icons, tuple(rooms),
                     resolution=stack.resolution)


def reconstruct(stack: HeatmapStack, node_limit: int | None = None) -> Reconstruction:
    if not stack.is_floorplan_layout:
        raise ValueError(f"stack has {len(stack.names)} channels, not the floorplan layout")
    cands = extract_candidates(stack)
    ip = build_ip(cands)
    solution = solve_ip(ip, node_limit)
    plan = assemble_floorplan(cands, solution, stack)
    problems = model.validate(plan)
    if problems:
        raise ReconstructionError(f"reconstructed plan is invalid: {problems[0]}"
                                  + (f" (+{len(problems) - 1} more)" if len(problems) > 1 else ""))
    log("reconstruct", f"corners={len(plan.corners)} walls={len(plan.walls)} "
                       f"openings={len(plan.openings)} icons={len(plan.icons)} rooms={len(plan.rooms)}")
    return Reconstruction(plan, cands, ip, solution)


def reconstruct_floorplan(stack: HeatmapStack) -> Floorplan:
    return reconstruct(stack).plan
