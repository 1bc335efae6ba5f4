"""
Vector floorplan data model: corners, walls, openings, icons, typed rooms.

Everything here is an immutable value object. ``validate`` reports broken
invariants as data, ``save``/``load`` move plans through the JSON document
format, and ``render_svg`` draws a plan the way a human reads one.

Document layout (UTF-8 JSON):
    {"version": 1, "resolution": 256, "domain": {...} | absent,
     "corners":  [{"id", "x", "y", "junction"}],
     "walls":    [{"a", "b", "thickness"}],
     "openings": [{"kind", "x1", "y1", "x2", "y2", "wall"}],
     "icons":    [{"kind", "xmin", "ymin", "xmax", "ymax"}],
     "rooms":    [{"kind", "polygon": [[x, y], ...]}]}
A wall's id is its index in "walls".
"""
import json
from dataclasses import dataclass, field
from enum import Enum
from typing import Literal, Optional

import svgwrite
from pydantic import BaseModel, ConfigDict, ValidationError
from shapely.geometry import LineString, Point, Polygon

from config import config
from domain import FloorplanDomain


# ── ENUMS ──

class Direction(Enum):
    PX = 0      # +X
    PY = 90     # +Y
    NX = 180    # -X
    NY = 270    # -Y

    @property
    def vector(self) -> tuple[int, int]:
        return {0: (1, 0), 90: (0, 1), 180: (-1, 0), 270: (0, -1)}[self.value]

    def rotated(self, quarter_turns: int) -> 'Direction':
        return Direction((self.value + 90 * quarter_turns) % 360)

    @classmethod
    def toward(cls, dx: float, dy: float) -> 'Direction':
        """Dominant axis direction of the vector (dx, dy)."""
        if abs(dx) >= abs(dy):
            return cls.PX if dx > 0 else cls.NX
        return cls.PY if dy > 0 else cls.NY


class JunctionType(str, Enum):
    I_0 = "I_0"
    I_90 = "I_90"
    I_180 = "I_180"
    I_270 = "I_270"
    L_0 = "L_0"
    L_90 = "L_90"
    L_180 = "L_180"
    L_270 = "L_270"
    T_0 = "T_0"
    T_90 = "T_90"
    T_180 = "T_180"
    T_270 = "T_270"
    X = "X"

    @property
    def directions(self) -> frozenset:
        if self is JunctionType.X:
            return frozenset(Direction)
        letter, angle = self.value.split('_')
        base = Direction(int(angle))
        span = {'I': 1, 'L': 2, 'T': 3}[letter]
        return frozenset(base.rotated(k) for k in range(span))

    def rotated(self, quarter_turns: int) -> 'JunctionType':
        return JunctionType.from_directions(d.rotated(quarter_turns) for d in self.directions)

    @classmethod
    def from_directions(cls, directions) -> Optional['JunctionType']:
        """Junction whose direction set is exactly ``directions``, else None
        (empty set or two opposite directions)."""
        wanted = frozenset(directions)
        for jt in cls:
            if jt.directions == wanted:
                return jt
        return None


JUNCTION_TYPES = list(JunctionType)


class OpeningKind(str, Enum):
    DOOR = "door"
    WINDOW = "window"


class IconType(str, Enum):
    COUNTER = "counter"
    BATHTUB = "bathtub"
    TOILET = "toilet"
    SINK = "sink"
    SOFA = "sofa"
    CABINET = "cabinet"
    BED = "bed"
    TABLE = "table"
    REFRIGERATOR = "refrigerator"


class RoomType(str, Enum):
    LIVING_ROOM = "living room"
    KITCHEN = "kitchen"
    BEDROOM = "bedroom"
    BATHROOM = "bathroom"
    CLOSET = "closet"
    BALCONY = "balcony"
    CORRIDOR = "corridor"
    DINING_ROOM = "dining room"


# ── VALUE TYPES ──

@dataclass(frozen=True)
class Corner:
    id: int
    x: float
    y: float
    junction: JunctionType


@dataclass(frozen=True)
class Wall:
    a: int
    b: int
    thickness: int = 3


@dataclass(frozen=True)
class Opening:
    kind: OpeningKind
    x1: float
    y1: float
    x2: float
    y2: float
    wall: int


@dataclass(frozen=True)
class Icon:
    kind: IconType
    xmin: float
    ymin: float
    xmax: float
    ymax: float

    @property
    def area(self) -> float:
        return max(0.0, self.xmax - self.xmin) * max(0.0, self.ymax - self.ymin)


@dataclass(frozen=True)
class Room:
    kind: RoomType
    polygon: tuple      # ((x, y), ...) counter-clockwise

    def shape(self) -> Polygon:
        return Polygon(self.polygon)


@dataclass(frozen=True)
class Floorplan:
    corners: tuple = ()
    walls: tuple = ()
    openings: tuple = ()
    icons: tuple = ()
    rooms: tuple = ()
    domain: Optional[FloorplanDomain] = None
    resolution: int = field(default_factory=lambda: config.GRID_RESOLUTION)

    def corner_index(self) -> dict:
        return {c.id: c for c in self.corners}

    def wall_segment(self, wall_id: int) -> tuple:
        idx = self.corner_index()
        w = self.walls[wall_id]
        a, b = idx[w.a], idx[w.b]
        return (a.x, a.y), (b.x, b.y)

    def wall_segments(self) -> list:
        idx = self.corner_index()
        out = []
        for w in self.walls:
            a, b = idx[w.a], idx[w.b]
            out.append(((a.x, a.y), (b.x, b.y)))
        return out


@dataclass(frozen=True)
class Violation:
    entity: str
    rule: str
    detail: str = ""

    def __str__(self):
        return f"{self.entity}: {self.rule}" + (f" ({self.detail})" if self.detail else "")


class FloorplanFormatError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


# ── GEOMETRY HELPERS ──

def signed_area(points) -> float:
    s = 0.0
    n = len(points)
    for i in range(n):
        x1, y1 = points[i]
        x2, y2 = points[(i + 1) % n]
        s += x1 * y2 - x2 * y1
    return s / 2.0


def canonical_polygon(points) -> tuple:
    """Counter-clockwise, no closing duplicate, no collinear vertices,
    starting at the lexicographically smallest vertex."""
    pts = [(float(x), float(y)) for x, y in points]
    if len(pts) > 1 and pts[0] == pts[-1]:
        pts = pts[:-1]
    dedup = []
    for p in pts:
        if not dedup or dedup[-1] != p:
            dedup.append(p)
    if len(dedup) > 1 and dedup[0] == dedup[-1]:
        dedup.pop()
    pts = dedup
    changed = True
    while changed and len(pts) > 3:
        changed = False
        for i in range(len(pts)):
            (ax, ay), (bx, by), (cx, cy) = pts[i - 1], pts[i], pts[(i + 1) % len(pts)]
            if (bx - ax) * (cy - by) - (by - ay) * (cx - bx) == 0:
                pts.pop(i)
                changed = True
                break
    if signed_area(pts) < 0:
        pts.reverse()
    start = pts.index(min(pts))
    return tuple(pts[start:] + pts[:start])


def wall_direction(a: Corner, b: Corner) -> Direction:
    return Direction.toward(b.x - a.x, b.y - a.y)


# ── VALIDATION ──

def validate(plan: Floorplan) -> list:
    tol = config.AXIS_TOLERANCE_PX
    res = plan.resolution
    out = []

    seen = set()
    for i, c in enumerate(plan.corners):
        name = f"corner[{i}]"
        if c.id in seen:
            out.append(Violation(name, "duplicate corner id", f"id={c.id}"))
        seen.add(c.id)
        if not (0 <= c.x < res and 0 <= c.y < res):
            out.append(Violation(name, "position outside grid", f"({c.x}, {c.y})"))
    idx = plan.corner_index()

    incident = {c.id: [] for c in plan.corners}
    for i, w in enumerate(plan.walls):
        name = f"wall[{i}]"
        if w.a not in idx or w.b not in idx:
            out.append(Violation(name, "dangling corner id", f"a={w.a} b={w.b}"))
            continue
        if w.a == w.b:
            out.append(Violation(name, "endpoints not distinct"))
            continue
        a, b = idx[w.a], idx[w.b]
        dx, dy = abs(a.x - b.x), abs(a.y - b.y)
        if min(dx, dy) > tol:
            out.append(Violation(name, "wall not axis-aligned", f"dx={dx} dy={dy}"))
            continue
        if max(dx, dy) == 0:
            out.append(Violation(name, "zero-length wall"))
            continue
        incident[w.a].append(wall_direction(a, b))
        incident[w.b].append(wall_direction(b, a))

    for i, c in enumerate(plan.corners):
        dirs = incident.get(c.id, [])
        if len(set(dirs)) != len(dirs) or frozenset(dirs) != c.junction.directions:
            got = ",".join(sorted(d.name for d in dirs)) or "none"
            out.append(Violation(f"corner[{i}]", "junction/incidence mismatch",
                                 f"junction={c.junction.value} incident={got}"))

    for i, o in enumerate(plan.openings):
        name = f"opening[{i}]"
        if not (0 <= o.wall < len(plan.walls)):
            out.append(Violation(name, "dangling host wall", f"wall={o.wall}"))
            continue
        w = plan.walls[o.wall]
        if w.a not in idx or w.b not in idx:
            continue
        if (o.x1, o.y1) == (o.x2, o.y2):
            out.append(Violation(name, "zero-length opening"))
            continue
        host = LineString(plan.wall_segment(o.wall))
        for px, py in ((o.x1, o.y1), (o.x2, o.y2)):
            if host.distance(Point(px, py)) > tol:
                out.append(Violation(name, "endpoint off host wall", f"({px}, {py})"))
                break

    for i, ic in enumerate(plan.icons):
        name = f"icon[{i}]"
        if not (ic.xmax > ic.xmin and ic.ymax > ic.ymin):
            out.append(Violation(name, "icon rect has no area"))
        elif not (0 <= ic.xmin and ic.xmax < res and 0 <= ic.ymin and ic.ymax < res):
            out.append(Violation(name, "icon rect outside grid"))

    for i, r in enumerate(plan.rooms):
        name = f"room[{i}]"
        if len(r.polygon) < 3:
            out.append(Violation(name, "polygon needs >= 3 vertices"))
            continue
        poly = r.shape()
        if not poly.is_valid or not poly.exterior.is_simple:
            out.append(Violation(name, "polygon not simple"))
            continue
        area = signed_area(r.polygon)
        if area == 0:
            out.append(Violation(name, "polygon has zero area"))
        elif area < 0:
            out.append(Violation(name, "polygon not counter-clockwise"))
    return out


# ── SERIALIZATION ──

class _Doc(BaseModel):
    model_config = ConfigDict(extra='forbid')


class _DomainDoc(_Doc):
    origin_x: float
    origin_y: float
    scale: float
    resolution: int = 256


class _CornerDoc(_Doc):
    id: int
    x: float
    y: float
    junction: JunctionType


class _WallDoc(_Doc):
    a: int
    b: int
    thickness: int = 3


class _OpeningDoc(_Doc):
    kind: OpeningKind
    x1: float
    y1: float
    x2: float
    y2: float
    wall: int


class _IconDoc(_Doc):
    kind: IconType
    xmin: float
    ymin: float
    xmax: float
    ymax: float


class _RoomDoc(_Doc):
    kind: RoomType
    polygon: list[tuple[float, float]]


class _PlanDoc(_Doc):
    version: Literal[1]
    resolution: int
    domain: Optional[_DomainDoc] = None
    corners: list[_CornerDoc]
    walls: list[_WallDoc]
    openings: list[_OpeningDoc]
    icons: list[_IconDoc]
    rooms: list[_RoomDoc]


def _json_path(loc) -> str:
    path = "$"
    for part in loc:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def to_dict(plan: Floorplan) -> dict:
    doc = {
        'version': 1,
        'resolution': plan.resolution,
    }
    if plan.domain is not None:
        doc['domain'] = plan.domain.to_dict()
    doc['corners'] = [{'id': c.id, 'x': c.x, 'y': c.y, 'junction': c.junction.value}
                      for c in plan.corners]
    doc['walls'] = [{'a': w.a, 'b': w.b, 'thickness': w.thickness} for w in plan.walls]
    doc['openings'] = [{'kind': o.kind.value, 'x1': o.x1, 'y1': o.y1, 'x2': o.x2, 'y2': o.y2,
                        'wall': o.wall} for o in plan.openings]
    doc['icons'] = [{'kind': i.kind.value, 'xmin': i.xmin, 'ymin': i.ymin,
                     'xmax': i.xmax, 'ymax': i.ymax} for i in plan.icons]
    doc['rooms'] = [{'kind': r.kind.value, 'polygon': [[x, y] for x, y in r.polygon]}
                    for r in plan.rooms]
    return doc


def save(plan: Floorplan) -> bytes:
    problems = validate(plan)
    if problems:
        raise ValueError(f"refusing to save invalid floorplan: {problems[0]}")
    return json.dumps(to_dict(plan), ensure_ascii=False, indent=2).encode('utf-8')


def load(data: bytes) -> Floorplan:
    try:
        raw = json.loads(data.decode('utf-8') if isinstance(data, (bytes, bytearray)) else data)
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FloorplanFormatError("$", f"malformed document: {e}") from e
    try:
        doc = _PlanDoc.model_validate(raw)
    except ValidationError as e:
        err = e.errors()[0]
        raise FloorplanFormatError(_json_path(err['loc']), err['msg']) from e

    ids = {c.id for c in doc.corners}
    for i, w in enumerate(doc.walls):
        for end in ('a', 'b'):
            if getattr(w, end) not in ids:
                raise FloorplanFormatError(f"$.walls[{i}].{end}",
                                           f"dangling corner id {getattr(w, end)}")
    for i, o in enumerate(doc.openings):
        if not (0 <= o.wall < len(doc.walls)):
            raise FloorplanFormatError(f"$.openings[{i}].wall", f"dangling wall id {o.wall}")

    domain = None
    if doc.domain is not None:
        domain = FloorplanDomain(doc.domain.origin_x, doc.domain.origin_y,
                                 doc.domain.scale, doc.domain.resolution)
    return Floorplan(
        corners=tuple(Corner(c.id, c.x, c.y, c.junction) for c in doc.corners),
        walls=tuple(Wall(w.a, w.b, w.thickness) for w in doc.walls),
        openings=tuple(Opening(o.kind, o.x1, o.y1, o.x2, o.y2, o.wall) for o in doc.openings),
        icons=tuple(Icon(i.kind, i.xmin, i.ymin, i.xmax, i.ymax) for i in doc.icons),
        rooms=tuple(Room(r.kind, tuple((float(x), float(y)) for x, y in r.polygon))
                    for r in doc.rooms),
        domain=domain,
        resolution=doc.resolution,
    )


# ── SVG ──

ROOM_COLORS = {
    RoomType.LIVING_ROOM: "#f4d58d",
    RoomType.KITCHEN: "#f2a65a",
    RoomType.BEDROOM: "#9cc5a1",
    RoomType.BATHROOM: "#8ecae6",
    RoomType.CLOSET: "#c9b6e4",
    RoomType.BALCONY: "#d9ed92",
    RoomType.CORRIDOR: "#dcdcdc",
    RoomType.DINING_ROOM: "#f6bd9b",
}
OPENING_COLORS = {OpeningKind.DOOR: "#8b5a2b", OpeningKind.WINDOW: "#1d70b8"}


def render_svg(plan: Floorplan) -> str:
    res = plan.resolution
    dwg = svgwrite.Drawing(size=(res, res), viewBox=f"0 0 {res} {res}")
    dwg.add(dwg.rect(insert=(0, 0), size=(res, res), fill="white"))

    for r in plan.rooms:
        dwg.add(dwg.polygon(points=[(x, y) for x, y in r.polygon],
                            fill=ROOM_COLORS[r.kind], stroke="none"))

    for w, (p, q) in zip(plan.walls, plan.wall_segments()):
        dwg.add(dwg.line(start=p, end=q, stroke="black",
                         stroke_width=w.thickness, stroke_linecap="square"))

    for o in plan.openings:
        color = OPENING_COLORS[o.kind]
        horizontal = abs(o.x2 - o.x1) >= abs(o.y2 - o.y1)
        dx, dy = (0, 1.5) if horizontal else (1.5, 0)
        dwg.add(dwg.line(start=(o.x1, o.y1), end=(o.x2, o.y2), stroke="white", stroke_width=3))
        for sign in (-1, 1):
            dwg.add(dwg.line(start=(o.x1 + sign * dx, o.y1 + sign * dy),
                             end=(o.x2 + sign * dx, o.y2 + sign * dy),
                             stroke=color, stroke_width=0.75))

    for ic in plan.icons:
        dwg.add(dwg.rect(insert=(ic.xmin, ic.ymin), size=(ic.xmax - ic.xmin, ic.ymax - ic.ymin),
                         fill="none", stroke="#444444", stroke_width=0.75))
        dwg.add(dwg.text(ic.kind.value, insert=((ic.xmin + ic.xmax) / 2, (ic.ymin + ic.ymax) / 2),
                         font_size=4, text_anchor="middle", fill="#444444"))
    return dwg.tostring()
