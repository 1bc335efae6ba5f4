#!/usr/bin/env python3
"""
Unit tests for model.py: validation rules, the JSON document format and the
SVG renderer.
"""

import json
import sys
import unittest
from dataclasses import replace
from pathlib import Path

sys.path.insert(0, str(Path(__file__).parent))

import model
from domain import FloorplanDomain
from fixtures import row_plan
from model import (Corner, Direction, Floorplan, Icon, IconType, JunctionType, Opening, OpeningKind,
                   Room, RoomType, Wall)


# ── Helpers ──────────────────────────────────────────────────

def _make_two_corner_plan(top=JunctionType.I_90, bottom=JunctionType.I_270) -> Floorplan:
    corners = (Corner(0, 10.0, 10.0, top), Corner(1, 10.0, 50.0, bottom))
    return Floorplan(corners, (Wall(0, 1),))


def _rules(plan: Floorplan) -> list:
    return [v.rule for v in model.validate(plan)]


# ── Junctions ────────────────────────────────────────────────

class TestJunctionType(unittest.TestCase):

    def test_thirteen_variants(self):
        self.assertEqual(len(model.JUNCTION_TYPES), 13)

    def test_direction_sets(self):
        self.assertEqual(JunctionType.I_90.directions, {Direction.PY})
        self.assertEqual(JunctionType.L_0.directions, {Direction.PX, Direction.PY})
        self.assertEqual(JunctionType.T_0.directions, {Direction.PX, Direction.PY, Direction.NX})
        self.assertEqual(JunctionType.X.directions, set(Direction))

    def test_rotation_and_lookup(self):
        self.assertEqual(JunctionType.L_0.rotated(1), JunctionType.L_90)
        self.assertEqual(JunctionType.T_270.rotated(1), JunctionType.T_0)
        self.assertEqual(JunctionType.X.rotated(3), JunctionType.X)
        self.assertIsNone(JunctionType.from_directions({Direction.PX, Direction.NX}))
        self.assertIsNone(JunctionType.from_directions(set()))


# ── Validation ───────────────────────────────────────────────

class TestValidate(unittest.TestCase):

    def test_empty_plan_is_valid(self):
        self.assertEqual(model.validate(Floorplan()), [])

    def test_two_corner_wall_is_valid(self):
        self.assertEqual(model.validate(_make_two_corner_plan()), [])

    def test_wrong_junction_letter_is_one_violation(self):
        problems = model.validate(_make_two_corner_plan(top=JunctionType.L_0))
        self.assertEqual(len(problems), 1)
        self.assertEqual(problems[0].rule, "junction/incidence mismatch")
        self.assertEqual(problems[0].entity, "corner[0]")

    def test_row_plans_are_valid(self):
        for kinds in (["bedroom"], ["bedroom", "kitchen"], ["bedroom", "kitchen", "closet", "bathroom"]):
            self.assertEqual(model.validate(row_plan(kinds, step=40)), [], kinds)

    def test_diagonal_wall(self):
        plan = Floorplan((Corner(0, 10, 10, JunctionType.I_0), Corner(1, 50, 50, JunctionType.I_180)),
                         (Wall(0, 1),))
        self.assertIn("wall not axis-aligned", _rules(plan))

    def test_small_skew_is_tolerated(self):
        plan = Floorplan((Corner(0, 10, 10, JunctionType.I_0), Corner(1, 50, 12, JunctionType.I_180)),
                         (Wall(0, 1),))
        self.assertEqual(model.validate(plan), [])

    def test_dangling_and_duplicate_ids(self):
        plan = Floorplan((Corner(0, 10, 10, JunctionType.I_0), Corner(0, 50, 10, JunctionType.I_180)),
                         (Wall(0, 7),))
        rules = _rules(plan)
        self.assertIn("duplicate corner id", rules)
        self.assertIn("dangling corner id", rules)

    def test_corner_outside_grid(self):
        plan = Floorplan((Corner(0, 300, 10, JunctionType.I_0),), ())
        self.assertIn("position outside grid", _rules(plan))

    def test_opening_off_host_wall(self):
        plan = replace(_make_two_corner_plan(),
                       openings=(Opening(OpeningKind.DOOR, 10, 20, 20, 30, 0),))
        self.assertIn("endpoint off host wall", _rules(plan))

    def test_opening_dangling_wall(self):
        plan = replace(_make_two_corner_plan(),
                       openings=(Opening(OpeningKind.WINDOW, 10, 20, 10, 30, 3),))
        self.assertIn("dangling host wall", _rules(plan))

    def test_icon_rect_rules(self):
        flat = Floorplan(icons=(Icon(IconType.BED, 10, 10, 10, 30),))
        outside = Floorplan(icons=(Icon(IconType.BED, 240, 10, 270, 30),))
        self.assertIn("icon rect has no area", _rules(flat))
        self.assertIn("icon rect outside grid", _rules(outside))

    def test_clockwise_room(self):
        plan = Floorplan(rooms=(Room(RoomType.KITCHEN, ((0, 0), (0, 10), (10, 10), (10, 0))),))
        self.assertEqual(_rules(plan), ["polygon not counter-clockwise"])

    def test_self_intersecting_room(self):
        plan = Floorplan(rooms=(Room(RoomType.KITCHEN, ((0, 0), (10, 10), (10, 0), (0, 10))),))
        self.assertEqual(_rules(plan), ["polygon not simple"])


# ── Serialization ────────────────────────────────────────────

class TestSaveLoad(unittest.TestCase):

    def test_two_corner_round_trip(self):
        plan = _make_two_corner_plan()
        self.assertEqual(model.load(model.save(plan)), plan)

    def test_full_round_trip_with_domain(self):
        plan = row_plan(["bedroom", "kitchen"], domain=FloorplanDomain(-1.5, 2.25, 0.04))
        plan = replace(plan, icons=(Icon(IconType.BED, 50, 50, 90, 80),))
        self.assertEqual(model.load(model.save(plan)), plan)

    def test_document_layout(self):
        doc = json.loads(model.save(_make_two_corner_plan()))
        self.assertEqual(doc['version'], 1)
        self.assertEqual(doc['resolution'], 256)
        self.assertEqual(doc['corners'][0]['junction'], "I_90")
        self.assertNotIn('domain', doc)

    def test_missing_corners_key(self):
        doc = model.to_dict(_make_two_corner_plan())
        del doc['corners']
        with self.assertRaises(model.FloorplanFormatError) as ctx:
            model.load(json.dumps(doc).encode('utf-8'))
        self.assertEqual(ctx.exception.path, "$.corners")

    def test_dangling_corner_id(self):
        doc = model.to_dict(_make_two_corner_plan())
        doc['walls'][0]['a'] = 99
        with self.assertRaises(model.FloorplanFormatError) as ctx:
            model.load(json.dumps(doc).encode('utf-8'))
        self.assertEqual(ctx.exception.path, "$.walls[0].a")
        self.assertIn("99", str(ctx.exception))

    def test_unknown_enum_value(self):
        doc = model.to_dict(_make_two_corner_plan())
        doc['corners'][1]['junction'] = "Y_45"
        with self.assertRaises(model.FloorplanFormatError) as ctx:
            model.load(json.dumps(doc).encode('utf-8'))
        self.assertEqual(ctx.exception.path, "$.corners[1].junction")

    def test_malformed_document(self):
        with self.assertRaises(model.FloorplanFormatError) as ctx:
            model.load(b"{not json")
        self.assertEqual(ctx.exception.path, "$")

    def test_save_refuses_invalid_plan(self):
        with self.assertRaises(ValueError):
            model.save(_make_two_corner_plan(top=JunctionType.X))


# ── SVG ──────────────────────────────────────────────────────

class TestRenderSvg(unittest.TestCase):

    def test_empty_plan_is_bare_canvas(self):
        svg = model.render_svg(Floorplan())
        self.assertIn("<svg", svg)
        self.assertEqual(svg.count("<rect"), 1)
        self.assertNotIn("<polygon", svg)
        self.assertNotIn("<line", svg)

    def test_one_room_one_polygon(self):
        svg = model.render_svg(row_plan(["bedroom"]))
        self.assertEqual(svg.count("<polygon"), 1)
        self.assertIn(model.ROOM_COLORS[RoomType.BEDROOM], svg)

    def test_bed_icon_is_labelled_rect(self):
        plan = Floorplan(icons=(Icon(IconType.BED, 50, 50, 90, 80),))
        svg = model.render_svg(plan)
        self.assertEqual(svg.count("<rect"), 2)
        self.assertIn(">bed</text>", svg)

    def test_output_is_deterministic(self):
        plan = row_plan(["bedroom", "kitchen", "closet"], step=50)
        self.assertEqual(model.render_svg(plan), model.render_svg(plan))


if __name__ == "__main__":
    unittest.main(verbosity=2)
