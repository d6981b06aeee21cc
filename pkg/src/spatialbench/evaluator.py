"""Program evaluation against scene graphs.

Evaluation walks a parsed program tree and returns the set of valid answers:
objects to manipulate for pick programs, slots or free spaces to fill for
place programs. Reference symbols resolve to frames or anchor objects:

    viewer               the viewer's own frame (forward = gaze)
    table-intrinsic      the workspace anchor's intrinsic frame
    shelf-intrinsic      ditto, shelf scenes
    alarm_clock          an object reference, by asset name (distance)
    alarm_clock-intrinsic / teddy_bear-relative
                         frames anchored at that object

Only objects whose world-view visible fraction reaches the floor (default
0.20) take part; the same restriction governs reference resolution, so a
fully occluded object can never influence an answer set.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .dsl import Call, Symbol, parse_program, print_program
from .geometry import (
    DegenerateBearing,
    GLOBAL_UP,
    IntrinsicFrameUnavailable,
    OrientedBox,
    Pose,
    boundary_distance,
    clock_position,
    frame_of,
    relation_holds,
    tilt_angle_deg,
)

DISTANCE_EQUAL_TOL = 0.03
MEASURE_REL_TOL = 0.10
ANGLE_TOL_DEG = 10.0
MIN_SPACE_WIDTH = 0.03
TIE_TOL = 1e-9


class EvalError(Exception):
    pass


class UniqueViolated(EvalError):
    def __init__(self, count):
        super().__init__(f"expected a unique item, found {count}")
        self.count = count


class FrameUnavailable(EvalError):
    pass


class TypeMismatch(EvalError):
    pass


class RankOutOfRange(EvalError):
    def __init__(self, rank, size):
        super().__init__(f"rank {rank} out of range for set of {size}")
        self.rank = rank
        self.size = size


@dataclass(frozen=True)
class Space:
    """A free sub-box inside a shelf slot."""

    slot_id: str
    box: OrientedBox

    def to_json(self):
        return {"slot_id": self.slot_id, "box": self.box.to_json()}

    @staticmethod
    def from_json(d):
        return Space(d["slot_id"], OrientedBox.from_json(d["box"]))


@dataclass
class AnswerSet:
    kind: str  # objects | slots | spaces
    members: tuple
    goal: dict | None = None  # placement pose constraint, place programs only
    program: str = ""
    scene_id: str = ""

    def ids(self):
        if self.kind == "spaces":
            return tuple(s.slot_id for s in self.members)
        return self.members

    def to_json(self):
        members = ([m.to_json() for m in self.members]
                   if self.kind == "spaces" else list(self.members))
        return {"kind": self.kind, "members": members, "goal": self.goal,
                "program": self.program, "scene_id": self.scene_id}

    @staticmethod
    def from_json(d):
        members = (tuple(Space.from_json(m) for m in d["members"])
                   if d["kind"] == "spaces" else tuple(d["members"]))
        return AnswerSet(d["kind"], members, d.get("goal"),
                         d.get("program", ""), d.get("scene_id", ""))


def free_spaces(scene, slot, min_width: float = MIN_SPACE_WIDTH):
    """Free lateral intervals of a slot materialized as boxes."""
    region = slot.region
    axis = slot.lateral_axis
    c_axis = float(region.center @ axis)
    out = []
    for lo, hi in scene.free_intervals(slot):
        if hi - lo < min_width:
            continue
        mid = 0.5 * (lo + hi)
        center = region.center + (mid - c_axis) * axis
        half = np.array([0.5 * (hi - lo), float(region.half_extents[1]),
                         float(region.half_extents[2])])
        out.append(Space(slot.id, OrientedBox(
            Pose(center, region.pose.quat), half)))
    return out


def _aabb_extents(solids):
    corners = np.vstack([s.corners() for s in solids])
    return corners.min(axis=0), corners.max(axis=0)


def entity_height(entity) -> float:
    lo, hi = _aabb_extents(_solids(entity))
    return float(hi[2] - lo[2])


def entity_width(entity) -> float:
    lo, hi = _aabb_extents(_solids(entity))
    return float(max(hi[0] - lo[0], hi[1] - lo[1]))


def _solids(entity):
    if isinstance(entity, Space):
        return [entity.box]
    if hasattr(entity, "region"):  # Slot
        return [entity.region]
    return entity.solids()


def _center(entity):
    if isinstance(entity, Space):
        return entity.box.center
    if hasattr(entity, "region"):
        return entity.region.center
    return entity.center


def _entity_id(entity):
    return entity.slot_id if isinstance(entity, Space) else entity.id


def entity_distance(entity, ref_solids) -> float:
    return min(boundary_distance(sa, sb)
               for sa in _solids(entity) for sb in ref_solids)


def _project_interval(solids, origin, axis):
    """Extent of an entity's solids along a unit axis, relative to origin."""
    los, his = [], []
    for box in solids:
        c = float((box.center - origin) @ axis)
        r = float(np.abs(axis @ box.pose.matrix) @ box.half_extents)
        los.append(c - r)
        his.append(c + r)
    return min(los), max(his)


_DIRECT_AXES = {
    "left": -1, "right": 1, "above": 1, "below": -1,
}


def direct_relation_holds(rel, frame, target, reference, blockers):
    """Directional relation with adjacency: aligned with the reference across
    the two perpendicular axes, and no blocker strictly between them along
    the relation axis."""
    if rel in ("left", "right"):
        axis = _DIRECT_AXES[rel] * frame.right
        perp = (frame.forward, np.asarray(GLOBAL_UP, dtype=float))
    else:
        axis = _DIRECT_AXES[rel] * np.asarray(GLOBAL_UP, dtype=float)
        perp = (frame.right, frame.forward)
    origin = _center(reference)
    t_solids = _solids(target)
    r_solids = _solids(reference)
    t_axis = float((_center(target) - origin) @ axis)
    if t_axis <= 0.0:
        return False
    for p in perp:
        t_lo, t_hi = _project_interval(t_solids, origin, p)
        r_lo, r_hi = _project_interval(r_solids, origin, p)
        if t_hi < r_lo or t_lo > r_hi:
            return False
    for other in blockers:
        if _entity_id(other) in (_entity_id(target), _entity_id(reference)):
            continue
        o_solids = _solids(other)
        c_axis = float((_center(other) - origin) @ axis)
        if not (0.0 < c_axis < t_axis):
            continue
        aligned = True
        for p in perp:
            o_lo, o_hi = _project_interval(o_solids, origin, p)
            r_lo, r_hi = _project_interval(r_solids, origin, p)
            if o_hi < r_lo or o_lo > r_hi:
                aligned = False
                break
        if aligned:
            return False
    return True


FACING_DIRECT_TOL_DEG = 15.0
_FACING_CENTER = {"front": 0.0, "right": 90.0, "behind": 180.0, "left": 270.0}


def facing_direction(obj):
    """Horizontal unit direction the book's cover points at, or None when
    the cover normal is close to vertical (flat-lying books face nowhere)."""
    n = np.array(obj.cover_normal, dtype=float)
    n[2] = 0.0
    norm = np.linalg.norm(n)
    if norm < 0.1:
        return None
    return n / norm


def facing_bearing_deg(frame, obj):
    d = facing_direction(obj)
    if d is None:
        return None
    f = float(d @ frame.forward)
    r = float(d @ frame.right)
    return math.degrees(math.atan2(r, f)) % 360.0


def facing_in_sector(frame, obj, rel) -> bool:
    """Quadrant test for where a book's cover points within a frame."""
    b = facing_bearing_deg(frame, obj)
    if b is None:
        return False
    delta = abs((b - _FACING_CENTER[rel] + 180.0) % 360.0 - 180.0)
    return delta < 45.0


def facing_direct(frame, obj, rel) -> bool:
    b = facing_bearing_deg(frame, obj)
    if b is None:
        return False
    delta = abs((b - _FACING_CENTER[rel] + 180.0) % 360.0 - 180.0)
    return delta <= FACING_DIRECT_TOL_DEG


def facing_clock_hour(frame, obj):
    b = facing_bearing_deg(frame, obj)
    if b is None:
        return None
    hour = math.ceil(b / 30.0 - 0.5) % 12
    return 12 if hour == 0 else hour


def book_pose_class(obj) -> str:
    """flat | vertical | tilted, from the cover normal's deviation from up."""
    c = tilt_angle_deg(obj.cover_normal)
    c = min(c, 180.0 - c)
    if c <= ANGLE_TOL_DEG:
        return "flat"
    if abs(c - 90.0) <= ANGLE_TOL_DEG:
        return "vertical"
    return "tilted"


def book_tilt_deg(obj) -> float:
    """Tilt of the book's long axis from upright (0 standing, 90 lying)."""
    return tilt_angle_deg(obj.up_axis)


class _Evaluator:
    def __init__(self, scene, min_visible=0.20):
        self.scene = scene
        self.min_visible = min_visible
        self.visible = set(scene.visible_object_ids(min_visible))
        self.goal = None

    # -- entity pools --------------------------------------------------------

    def source_objects(self):
        return [o for o in self.scene.objects
                if o.id in self.visible
                and o.id != self.scene.held_id
                and o.category != "support"]

    def lookup(self, asset_name):
        matches = [o for o in self.source_objects()
                   if o.asset.name == asset_name]
        if len(matches) != 1:
            raise UniqueViolated(len(matches))
        return matches[0]

    def resolve_frame(self, symbol):
        """Reference symbol -> (frame, reference entity or None)."""
        name = symbol.name
        if name == "viewer":
            frame = frame_of("relative", viewer=self.scene.viewer_pose)
            return frame, None
        if name in ("table-intrinsic", "shelf-intrinsic"):
            anchor = self.scene.anchor
            frame = frame_of("intrinsic", anchor_position=anchor.center,
                             anchor_front=anchor.front_axis,
                             anchor_id=anchor.id)
            return frame, anchor
        if name in ("table-relative", "shelf-relative"):
            anchor = self.scene.anchor
            frame = frame_of("relative", anchor_position=anchor.center,
                             viewer=self.scene.viewer_pose,
                             anchor_id=anchor.id)
            return frame, anchor
        if name.endswith("-intrinsic"):
            obj = self.lookup(name[:-len("-intrinsic")])
            if obj.front_axis is None:
                raise FrameUnavailable(f"{obj.id} has no intrinsic frame")
            try:
                frame = frame_of("intrinsic", anchor_position=obj.center,
                                 anchor_front=obj.front_axis,
                                 anchor_id=obj.id)
            except IntrinsicFrameUnavailable as exc:
                raise FrameUnavailable(str(exc)) from None
            return frame, obj
        if name.endswith("-relative"):
            obj = self.lookup(name[:-len("-relative")])
            frame = frame_of("relative", anchor_position=obj.center,
                             viewer=self.scene.viewer_pose, anchor_id=obj.id)
            return frame, obj
        raise TypeMismatch(f"not a frame reference: {name}")

    def resolve_distance_ref(self, symbol):
        """Reference symbol -> solids to measure boundary distance against."""
        if symbol.name == "viewer":
            p = self.scene.viewer_pose.position
            return [OrientedBox.axis_aligned(p, [1e-9, 1e-9, 1e-9])]
        return _solids(self.lookup(symbol.name))

    def blockers_for(self, kind):
        if kind == "objects":
            return [o for o in self.source_objects()
                    if o.id != self.scene.anchor_id]
        return list(self.scene.slots)

    # -- dispatch ------------------------------------------------------------

    def eval(self, node):
        if isinstance(node, Call):
            return getattr(self, "_f_" + node.name, self._unhandled)(node)
        raise TypeMismatch(f"cannot evaluate leaf {node!r} as a set")

    def _unhandled(self, node):
        raise TypeMismatch(f"not a set-valued function: {node.name}")

    def _set(self, node):
        value = self.eval(node)
        if not isinstance(value, tuple) or len(value) != 2:
            raise TypeMismatch("expected an entity set")
        return value

    def _objects(self, node):
        kind, items = self._set(node)
        if kind != "objects":
            raise TypeMismatch(f"expected objects, got {kind}")
        return items

    def _books(self, node):
        return [o for o in self._objects(node) if o.category == "book"]

    # -- sources and plumbing ------------------------------------------------

    def _source(self, node, expect):
        if not (isinstance(node, Symbol) and node.name == expect):
            raise TypeMismatch(f"expected the {expect} source")
        want = "tabletop" if expect == "TABLE" else "shelf"
        if self.scene.kind != want:
            raise TypeMismatch(f"{expect} source on a {self.scene.kind} scene")
        return "objects", self.source_objects()

    def _f_pick(self, node):
        kind, items = self._set(node.args[0])
        if kind != "objects":
            raise TypeMismatch("pick needs an object set")
        return kind, items

    def _f_place(self, node):
        kind, items = self._set(node.args[0])
        if kind == "objects":
            raise TypeMismatch("place needs slots or spaces")
        return kind, items

    def _f_unique(self, node):
        kind, items = self._set(node.args[0])
        if len(items) != 1:
            raise UniqueViolated(len(items))
        return kind, items

    def _f_filter(self, node):
        name, src = node.args
        if not isinstance(name, Symbol):
            raise TypeMismatch("filter needs an asset-name symbol")
        if isinstance(src, Symbol):
            kind, items = self._source(src, src.name)
        else:
            kind, items = self._set(src)
        if kind != "objects":
            raise TypeMismatch("filter operates on objects")
        return "objects", [o for o in items if o.asset.name == name.name]

    def _f_filterBook(self, node):
        arg = node.args[0]
        if not isinstance(arg, Symbol) or arg.name not in ("TABLE", "SHELF"):
            raise TypeMismatch("filterBook needs the TABLE or SHELF source")
        _, items = self._source(arg, arg.name)
        return "objects", [o for o in items if o.category == "book"]

    def _f_filterSlot(self, node):
        self._source(node.args[0], "SHELF")
        return "slots", list(self.scene.slots)

    def _f_filterSpace(self, node):
        self._source(node.args[0], "SHELF")
        spaces = []
        for slot in self.scene.slots:
            spaces.extend(free_spaces(self.scene, slot))
        return "spaces", spaces

    # -- attribute -----------------------------------------------------------

    def _slot_size_classes(self):
        slots = list(self.scene.slots)
        widths = sorted(sum(hi - lo
                            for lo, hi in self.scene.free_intervals(s))
                        for s in slots)
        n = len(widths)
        lo_cut = widths[max(0, n // 3 - 1)]
        hi_cut = widths[max(0, (2 * n) // 3 - 1)]
        out = {}
        for s in slots:
            w = sum(hi - lo for lo, hi in self.scene.free_intervals(s))
            if w <= lo_cut:
                out[s.id] = "small"
            elif w <= hi_cut:
                out[s.id] = "medium"
            else:
                out[s.id] = "large"
        return out

    def _size_filter(self, node, wanted):
        kind, items = self._set(node.args[0])
        if kind == "objects":
            from .catalog import default_catalog
            cat = default_catalog()
            return "objects", [
                o for o in items if o.category == "book"
                and cat.classify_book_volume(float(o.box.volume)) == wanted]
        if kind == "slots":
            classes = self._slot_size_classes()
            return "slots", [s for s in items if classes[s.id] == wanted]
        raise TypeMismatch("size classes apply to books or slots")

    def _f_filterAttrSmall(self, node):
        return self._size_filter(node, "small")

    def _f_filterAttrMedium(self, node):
        return self._size_filter(node, "medium")

    def _f_filterAttrLarge(self, node):
        return self._size_filter(node, "large")

    def _f_filterAttrEmpty(self, node):
        kind, items = self._set(node.args[0])
        if kind != "slots":
            raise TypeMismatch("emptiness applies to slots")
        return "slots", [s for s in items if not s.occupant_ids]

    def _f_filterAttrNonEmpty(self, node):
        kind, items = self._set(node.args[0])
        if kind != "slots":
            raise TypeMismatch("emptiness applies to slots")
        return "slots", [s for s in items if s.occupant_ids]

    def _f_filterAttrEmptiest(self, node):
        kind, items = self._set(node.args[0])
        if kind != "slots":
            raise TypeMismatch("emptiness applies to slots")
        if not items:
            return "slots", []
        best = max(self.scene.slot_emptiness(s.id) for s in items)
        return "slots", [s for s in items
                         if self.scene.slot_emptiness(s.id) >= best - TIE_TOL]

    def _measure_filter(self, node, measure):
        target, src = node.args
        kind, items = self._set(src)
        kept = [e for e in items
                if abs(measure(e) - target) <= MEASURE_REL_TOL * target]
        return kind, kept

    def _f_filterAttrHeight(self, node):
        return self._measure_filter(node, entity_height)

    def _f_filterAttrWidth(self, node):
        return self._measure_filter(node, entity_width)

    def _f_filterAttrIndex1D(self, node):
        row, src = node.args
        kind, items = self._set(src)
        if kind != "slots":
            raise TypeMismatch("indexing applies to slots")
        return "slots", [s for s in items if s.row == row]

    def _f_filterAttrIndex2D(self, node):
        row, col, src = node.args
        kind, items = self._set(src)
        if kind != "slots":
            raise TypeMismatch("indexing applies to slots")
        return "slots", [s for s in items if s.row == row and s.col == col]

    # -- distance ------------------------------------------------------------

    def _distances(self, node, src_idx, ref_idx):
        kind, items = self._set(node.args[src_idx])
        ref = self.resolve_distance_ref(node.args[ref_idx])
        return kind, items, [entity_distance(e, ref) for e in items]

    def _extreme(self, kind, items, values, pick_min):
        if not items:
            return kind, []
        best = min(values) if pick_min else max(values)
        return kind, [e for e, v in zip(items, values)
                      if abs(v - best) <= TIE_TOL]

    def _rank(self, kind, items, values, k, ascending):
        if not isinstance(k, int) or k < 1:
            raise TypeMismatch("rank must be a positive integer")
        if k > len(items):
            raise RankOutOfRange(k, len(items))
        order = sorted(values)
        if not ascending:
            order = order[::-1]
        target = order[k - 1]
        return kind, [e for e, v in zip(items, values)
                      if abs(v - target) <= TIE_TOL]

    def _f_filterDistClosest(self, node):
        return self._extreme(*self._distances(node, 0, 1), True)

    def _f_filterDistFarthest(self, node):
        return self._extreme(*self._distances(node, 0, 1), False)

    def _f_filterDistRankClosest(self, node):
        kind, items, values = self._distances(node, 1, 2)
        return self._rank(kind, items, values, node.args[0], True)

    def _f_filterDistRankFarthest(self, node):
        kind, items, values = self._distances(node, 1, 2)
        return self._rank(kind, items, values, node.args[0], False)

    def _f_filterDistLessThan(self, node):
        kind, items, values = self._distances(node, 1, 2)
        limit = float(node.args[0])
        return kind, [e for e, v in zip(items, values) if v < limit]

    def _f_filterDistMoreThan(self, node):
        kind, items, values = self._distances(node, 1, 2)
        limit = float(node.args[0])
        return kind, [e for e, v in zip(items, values) if v > limit]

    def _f_filterDistEqualTo(self, node):
        kind, items, values = self._distances(node, 1, 2)
        target = float(node.args[0])
        return kind, [e for e, v in zip(items, values)
                      if abs(v - target) <= DISTANCE_EQUAL_TOL]

    def _f_filterDistRange(self, node):
        kind, items = self._set(node.args[2])
        ref = self.resolve_distance_ref(node.args[3])
        lo, hi = float(node.args[0]), float(node.args[1])
        return kind, [e for e in items
                      if lo <= entity_distance(e, ref) <= hi]

    # -- relationship and directional orientation ----------------------------

    def _rel_filter(self, node, rel):
        kind, items = self._set(node.args[0])
        frame, ref = self.resolve_frame(node.args[1])
        ref_center = frame.origin if ref is None else ref.center
        ref_id = None if ref is None else ref.id
        kept = [e for e in items
                if (ref is None or _entity_id(e) != ref.id)
                and relation_holds(rel, frame, _center(e), ref_center,
                                   reference_id=ref_id)]
        return kind, kept

    def _lateral_values(self, node, src_idx, ref_idx):
        kind, items = self._set(node.args[src_idx])
        frame, ref = self.resolve_frame(node.args[ref_idx])
        if ref is not None:
            items = [e for e in items if _entity_id(e) != ref.id]
        values = [float((_center(e) - frame.origin) @ frame.right)
                  for e in items]
        return kind, items, values

    def _f_filterRelLeft(self, node):
        return self._rel_filter(node, "left")

    def _f_filterRelRight(self, node):
        return self._rel_filter(node, "right")

    def _f_filterRelFront(self, node):
        return self._rel_filter(node, "front")

    def _f_filterRelBehind(self, node):
        return self._rel_filter(node, "behind")

    def _f_filterRelUpper(self, node):
        return self._rel_filter(node, "upper")

    def _f_filterRelLower(self, node):
        return self._rel_filter(node, "lower")

    def _f_filterRelLeftMost(self, node):
        return self._extreme(*self._lateral_values(node, 0, 1), True)

    def _f_filterRelRightMost(self, node):
        return self._extreme(*self._lateral_values(node, 0, 1), False)

    def _f_filterRelRankLeftMost(self, node):
        kind, items, values = self._lateral_values(node, 1, 2)
        return self._rank(kind, items, values, node.args[0], True)

    def _f_filterRelRankRightMost(self, node):
        kind, items, values = self._lateral_values(node, 1, 2)
        return self._rank(kind, items, values, node.args[0], False)

    def _f_filterRelBetween(self, node):
        kind, items = self._set(node.args[0])
        refs = []
        for arg in node.args[1:]:
            _, ref_items = self._set(arg)
            if len(ref_items) != 1:
                raise UniqueViolated(len(ref_items))
            refs.append(ref_items[0])
        anchor = self.scene.anchor
        frame = frame_of("intrinsic", anchor_position=anchor.center,
                         anchor_front=anchor.front_axis, anchor_id=anchor.id)
        coords = [float((_center(r) - frame.origin) @ frame.right)
                  for r in refs]
        lo, hi = min(coords), max(coords)
        ref_ids = {_entity_id(r) for r in refs}
        kept = [e for e in items if _entity_id(e) not in ref_ids
                and lo < float((_center(e) - frame.origin) @ frame.right) < hi]
        return kind, kept

    # -- orientation ---------------------------------------------------------
    #
    # On books these filters read the facing direction of the cover; on slots
    # and spaces they read position relative to the reference, so shelf
    # placements like "a slot above the teddy bear" work through the same
    # functions.

    def _ori_filter(self, node, rel):
        kind, items = self._set(node.args[0])
        frame, ref = self.resolve_frame(node.args[1])
        if kind == "objects":
            if rel in ("above", "below"):
                raise TypeMismatch("books have no vertical facing direction")
            kept = [o for o in items
                    if (ref is None or o.id != ref.id)
                    and o.category == "book"
                    and facing_in_sector(frame, o, rel)]
            return kind, kept
        ref_center = frame.origin if ref is None else ref.center
        ref_id = None if ref is None else ref.id
        kept = [e for e in items
                if (ref is None or _entity_id(e) != ref.id)
                and relation_holds(rel, frame, _center(e), ref_center,
                                   reference_id=ref_id)]
        return kind, kept

    def _f_filterOriLeft(self, node):
        return self._ori_filter(node, "left")

    def _f_filterOriRight(self, node):
        return self._ori_filter(node, "right")

    def _f_filterOriFront(self, node):
        return self._ori_filter(node, "front")

    def _f_filterOriBehind(self, node):
        return self._ori_filter(node, "behind")

    def _f_filterOriAbove(self, node):
        return self._ori_filter(node, "above")

    def _f_filterOriBelow(self, node):
        return self._ori_filter(node, "below")

    def _direct_filter(self, node, rel):
        kind, items = self._set(node.args[0])
        frame, ref = self.resolve_frame(node.args[1])
        if kind == "objects":
            if rel in ("above", "below"):
                raise TypeMismatch("books have no vertical facing direction")
            kept = [o for o in items
                    if (ref is None or o.id != ref.id)
                    and o.category == "book"
                    and facing_direct(frame, o, rel)]
            return kind, kept
        if ref is None:
            raise FrameUnavailable("direct relations need an object reference")
        blockers = self.blockers_for(kind)
        kept = [e for e in items
                if _entity_id(e) != ref.id
                and direct_relation_holds(rel, frame, e, ref, blockers)]
        return kind, kept

    def _f_filterOriDirectLeft(self, node):
        return self._direct_filter(node, "left")

    def _f_filterOriDirectRight(self, node):
        return self._direct_filter(node, "right")

    def _f_filterOriDirectAbove(self, node):
        return self._direct_filter(node, "above")

    def _f_filterOriDirectBelow(self, node):
        return self._direct_filter(node, "below")

    def _ori_rank(self, node, ascending):
        k, src, ref_sym = node.args
        kind, items = self._set(src)
        frame, ref = self.resolve_frame(ref_sym)
        if kind == "objects":
            scored = [(o, facing_direction(o)) for o in items
                      if o.category == "book"
                      and (ref is None or o.id != ref.id)]
            scored = [(o, d) for o, d in scored if d is not None]
            items = [o for o, _ in scored]
            values = [float(d @ frame.right) for _, d in scored]
        else:
            if ref is not None:
                items = [e for e in items if _entity_id(e) != ref.id]
            values = [float((_center(e) - frame.origin) @ frame.right)
                      for e in items]
        return self._rank(kind, items, values, k, ascending)

    def _f_filterOriRankLeftMost(self, node):
        return self._ori_rank(node, True)

    def _f_filterOriRankRightMost(self, node):
        return self._ori_rank(node, False)

    def _f_filterOriClockPosition(self, node):
        hour, src, ref_sym = node.args
        kind, items = self._set(src)
        frame, ref = self.resolve_frame(ref_sym)
        kept = []
        for e in items:
            if ref is not None and _entity_id(e) == ref.id:
                continue
            if kind == "objects":
                if e.category != "book":
                    continue
                if facing_clock_hour(frame, e) == hour:
                    kept.append(e)
                continue
            try:
                if clock_position(frame, _center(e)) == hour:
                    kept.append(e)
            except DegenerateBearing:
                continue
        return kind, kept

    def _f_filterOriTiltDegree(self, node):
        target, src, _ref = node.args
        items = self._objects(src)
        kept = [o for o in items if o.category == "book"
                and abs(book_tilt_deg(o) - float(target)) <= ANGLE_TOL_DEG]
        return "objects", kept

    def _pose_filter(self, node, wanted):
        items = self._objects(node.args[0])
        return "objects", [o for o in items if o.category == "book"
                           and book_pose_class(o) == wanted]

    def _f_filterOriFlat(self, node):
        return self._pose_filter(node, "flat")

    def _f_filterOriVertical(self, node):
        return self._pose_filter(node, "vertical")

    def _f_filterOriTilted(self, node):
        return self._pose_filter(node, "tilted")

    # -- placement pose goals ------------------------------------------------

    def _place_goal(self, node, pose_class, tilt=None):
        kind, items = self._set(node.args[-1])
        if kind == "objects":
            raise TypeMismatch("placement goals need slots or spaces")
        self.goal = {"pose_class": pose_class}
        if tilt is not None:
            self.goal["tilt_deg"] = float(tilt)
        return kind, items

    def _f_placeOriFlat(self, node):
        return self._place_goal(node, "flat")

    def _f_placeOriVertical(self, node):
        return self._place_goal(node, "vertical")

    def _f_placeOriTilted(self, node):
        return self._place_goal(node, "tilted")

    def _f_placeOriTiltDegree(self, node):
        return self._place_goal(node, "tilted", tilt=node.args[0])


def evaluate(program, scene, min_visible: float = 0.20) -> AnswerSet:
    """Run a program against a scene and collect the answer set."""
    ast = parse_program(program) if isinstance(program, str) else program
    ev = _Evaluator(scene, min_visible)
    kind, items = ev.eval(ast)
    if kind == "spaces":
        members = tuple(items)
    else:
        members = tuple(_entity_id(e) for e in items)
    return AnswerSet(kind=kind, members=members, goal=ev.goal,
                     program=print_program(ast), scene_id=scene.scene_id)
