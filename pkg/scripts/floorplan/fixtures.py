"""Small hand-built floorplans used across the unit tests."""
from dataclasses import replace

from domain import FloorplanDomain
from model import (Corner, Floorplan, JunctionType, Opening, OpeningKind, Room, RoomType, Wall,
                   canonical_polygon)


def row_plan(kinds, step: int = 80, left: int = 40, top: int = 40, bottom: int = 160,
             doors: bool = True, domain: FloorplanDomain | None = None) -> Floorplan:
    """Rooms side by side along +X, ``step`` px wide, with a 20 px door
    centred on every shared wall."""
    n = len(kinds)
    xs = [left + step * k for k in range(n + 1)]
    corners = []
    for k, x in enumerate(xs):
        upper = JunctionType.L_0 if k == 0 else JunctionType.L_90 if k == n else JunctionType.T_0
        lower = JunctionType.L_270 if k == 0 else JunctionType.L_180 if k == n else JunctionType.T_180
        corners.append(Corner(2 * k, float(x), float(top), upper))
        corners.append(Corner(2 * k + 1, float(x), float(bottom), lower))

    walls = [Wall(2 * k, 2 * k + 1) for k in range(n + 1)]
    walls += [Wall(2 * k, 2 * k + 2) for k in range(n)]
    walls += [Wall(2 * k + 1, 2 * k + 3) for k in range(n)]

    mid = (top + bottom) / 2
    openings = []
    if doors:
        openings = [Opening(OpeningKind.DOOR, float(xs[k]), mid - 10, float(xs[k]), mid + 10, k)
                    for k in range(1, n)]
    rooms = [Room(RoomType(kind), canonical_polygon(
                 ((xs[k], top), (xs[k + 1], top), (xs[k + 1], bottom), (xs[k], bottom))))
             for k, kind in enumerate(kinds)]
    return Floorplan(tuple(corners), tuple(walls), tuple(openings), (), tuple(rooms), domain=domain)


def single_wall_plan(p: tuple, q: tuple, domain: FloorplanDomain | None = None) -> Floorplan:
    (x1, y1), (x2, y2) = sorted([p, q])
    if y1 == y2:
        ja, jb = JunctionType.I_0, JunctionType.I_180
    else:
        ja, jb = JunctionType.I_90, JunctionType.I_270
    corners = (Corner(0, float(x1), float(y1), ja), Corner(1, float(x2), float(y2), jb))
    return Floorplan(corners, (Wall(0, 1),), domain=domain)


def merge_plans(*plans: Floorplan) -> Floorplan:
    """Disjoint union; corner ids and wall indices are renumbered."""
    corners, walls, openings, icons, rooms = [], [], [], [], []
    for plan in plans:
        ids = {c.id: len(corners) + k for k, c in enumerate(plan.corners)}
        wall_base = len(walls)
        corners += [replace(c, id=ids[c.id]) for c in plan.corners]
        walls += [replace(w, a=ids[w.a], b=ids[w.b]) for w in plan.walls]
        openings += [replace(o, wall=o.wall + wall_base) for o in plan.openings]
        icons += plan.icons
        rooms += plan.rooms
    return Floorplan(tuple(corners), tuple(walls), tuple(openings), tuple(icons), tuple(rooms),
                     domain=plans[0].domain if plans else None)
