"""Scene graph: object instances, shelf slots, derived relation edges.

World layout conventions: the global up axis is +Z, the floor is at z=0, and
the viewer (robot base) stands on the -Y side of the anchor furniture facing
+Y. Scene files serialize poses in meters.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .catalog import AssetSpec, Catalog, default_catalog
from .geometry import (
    RELATIONS,
    CameraModel,
    OrientedBox,
    Pose,
    boundary_distance,
    frame_of,
    relation_holds,
)
from .render import raster_boxes

# constructive placement leaves this gap between a body and its support so
# that resting contact never reads as interpenetration
CONTACT_EPS = 1e-3

VISIBILITY_RES = (256, 256)


class Interpenetration(Exception):
    def __init__(self, id_a: str, id_b: str):
        super().__init__(f"objects {id_a} and {id_b} interpenetrate")
        self.ids = (id_a, id_b)


class UnknownObject(KeyError):
    pass


class UnknownSlot(KeyError):
    pass


@dataclass
class ObjectInstance:
    id: str
    asset: AssetSpec
    box: OrientedBox
    init_pose_class: str | None = None  # books: upright | flat | tilted
    front_axis: np.ndarray | None = None  # world space, oriented assets only
    components: list[OrientedBox] | None = None  # composite solids (shelves)
    label: str | None = None

    def __post_init__(self):
        if self.asset.oriented != (self.front_axis is not None):
            raise ValueError(f"{self.id}: front_axis required iff asset oriented")
        if self.label is None:
            self.label = self.asset.display

    @property
    def category(self) -> str:
        return self.asset.category

    @property
    def center(self) -> np.ndarray:
        return self.box.center

    def solids(self) -> list[OrientedBox]:
        return self.components if self.components else [self.box]

    # book geometry: local x = thickness (cover normal), y = short cover
    # edge, z = long cover edge (the upright axis of a standing book)
    @property
    def cover_normal(self) -> np.ndarray:
        return self.box.pose.matrix[:, 0]

    @property
    def up_axis(self) -> np.ndarray:
        return self.box.pose.matrix[:, 2]

    @property
    def length_m(self) -> float:
        return 2.0 * float(self.box.half_extents[2])

    @property
    def width_m(self) -> float:
        return 2.0 * float(self.box.half_extents[1])

    @property
    def thickness_m(self) -> float:
        return 2.0 * float(self.box.half_extents[0])

    def to_json(self) -> dict:
        d = {
            "id": self.id,
            "asset": self.asset.name,
            "box": self.box.to_json(),
            "label": self.label,
        }
        if self.init_pose_class:
            d["init_pose_class"] = self.init_pose_class
        if self.front_axis is not None:
            d["front_axis"] = [float(v) for v in self.front_axis]
        if self.components:
            d["components"] = [c.to_json() for c in self.components]
        return d

    @staticmethod
    def from_json(d: dict, catalog: Catalog) -> "ObjectInstance":
        return ObjectInstance(
            id=d["id"],
            asset=catalog[d["asset"]],
            box=OrientedBox.from_json(d["box"]),
            init_pose_class=d.get("init_pose_class"),
            front_axis=np.array(d["front_axis"]) if "front_axis" in d else None,
            components=[OrientedBox.from_json(c) for c in d["components"]]
            if "components" in d else None,
            label=d.get("label"),
        )


@dataclass
class Slot:
    id: str
    row: int  # 1-based from the top
    col: int  # 1-based from the left, facing the shelf
    region: OrientedBox
    occupant_ids: list[str] = field(default_factory=list)

    @property
    def lateral_axis(self) -> np.ndarray:
        return self.region.pose.matrix[:, 0]

    @property
    def width_m(self) -> float:
        return 2.0 * float(self.region.half_extents[0])

    def to_json(self) -> dict:
        return {"id": self.id, "row": self.row, "col": self.col,
                "region": self.region.to_json(),
                "occupant_ids": list(self.occupant_ids)}

    @staticmethod
    def from_json(d: dict) -> "Slot":
        return Slot(d["id"], d["row"], d["col"],
                    OrientedBox.from_json(d["region"]), list(d["occupant_ids"]))


def object_distance(a: ObjectInstance, b: ObjectInstance) -> float:
    """Boundary distance between (possibly composite) objects."""
    return min(boundary_distance(sa, sb)
               for sa in a.solids() for sb in b.solids())


class SceneGraph:
    """Immutable ground-truth world state; sim produces new versions."""

    def __init__(self, scene_id: str, seed: int, kind: str, difficulty: str,
                 objects: list[ObjectInstance], slots: list[Slot],
                 anchor_id: str, viewer_pose: Pose, world_camera: CameraModel,
                 ee_pose: Pose, ego_cam_offset: Pose, held_id: str | None,
                 ee_init_angles: dict | None = None, version: int = 0):
        if kind not in ("tabletop", "shelf"):
            raise ValueError(f"unknown scene kind {kind!r}")
        ids = [o.id for o in objects]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate object ids")
        self.scene_id = scene_id
        self.seed = seed
        self.kind = kind
        self.difficulty = difficulty
        self.objects = objects
        self.slots = slots
        self.anchor_id = anchor_id
        self.viewer_pose = viewer_pose
        self.world_camera = world_camera
        self.ee_pose = ee_pose
        self.ego_cam_offset = ego_cam_offset
        self.held_id = held_id
        self.ee_init_angles = ee_init_angles or {}
        self.version = version
        self._by_id = {o.id: o for o in objects}
        self._slot_by_id = {s.id: s for s in slots}
        self._raster_cache: dict = {}
        self._alone_cache: dict = {}
        self._visible_cache: dict = {}
        self._check_interpenetration()
        self.edges = self._derive_edges()

    # -- access -------------------------------------------------------------

    def object(self, object_id: str) -> ObjectInstance:
        try:
            return self._by_id[object_id]
        except KeyError:
            raise UnknownObject(object_id) from None

    def slot(self, slot_id: str) -> Slot:
        try:
            return self._slot_by_id[slot_id]
        except KeyError:
            raise UnknownSlot(slot_id) from None

    @property
    def anchor(self) -> ObjectInstance:
        return self.object(self.anchor_id)

    def books(self) -> list[ObjectInstance]:
        return [o for o in self.objects if o.category == "book"]

    def by_category(self, category: str) -> list[ObjectInstance]:
        return [o for o in self.objects if o.category == category]

    @property
    def ego_camera(self) -> CameraModel:
        return CameraModel(self.ee_pose.compose(self.ego_cam_offset),
                           self.world_camera.vertical_fov,
                           self.world_camera.resolution)

    # -- geometry / rendering support ----------------------------------------

    def solid_entries(self) -> list[tuple[str, OrientedBox]]:
        return [(o.id, s) for o in self.objects
                for s in o.solids()]

    def render_entries(self) -> list[tuple[str, OrientedBox, str]]:
        return [(o.id, s, o.category) for o in self.objects for s in o.solids()]

    def raster(self, cam: CameraModel, resolution=None):
        key = (json.dumps(cam.to_json(), sort_keys=True),
               tuple(resolution) if resolution else None, self.version)
        if key not in self._raster_cache:
            owner, depth, keys = raster_boxes(cam, self.solid_entries(),
                                              resolution)
            self._raster_cache[key] = (owner, depth, keys)
        return self._raster_cache[key]

    def visible_fraction(self, cam: CameraModel, target_id: str,
                         resolution=VISIBILITY_RES) -> float:
        target = self.object(target_id)
        owner, _, keys = self.raster(cam, resolution)
        idx = {i for i, k in enumerate(keys) if k == target_id}
        visible = int(np.isin(owner, list(idx)).sum())
        akey = (json.dumps(cam.to_json(), sort_keys=True), target_id,
                tuple(resolution), self.version)
        if akey not in self._alone_cache:
            alone, _, _ = raster_boxes(cam, [(target_id, s)
                                             for s in target.solids()],
                                       resolution)
            self._alone_cache[akey] = int((alone >= 0).sum())
        total = self._alone_cache[akey]
        if total == 0:
            return 0.0
        return min(1.0, visible / total)

    def visible_object_ids(self, min_fraction: float = 0.20) -> list[str]:
        """Objects meeting the world-view visibility floor (held book exempt:
        it is judged in the ego view by the sampler)."""
        ckey = (min_fraction, self.version)
        if ckey in self._visible_cache:
            return list(self._visible_cache[ckey])
        out = []
        for o in self.objects:
            if o.id == self.held_id:
                out.append(o.id)
                continue
            if self.visible_fraction(self.world_camera, o.id) >= min_fraction:
                out.append(o.id)
        self._visible_cache[ckey] = out
        return list(out)

    # -- slots ----------------------------------------------------------------

    def occupied_intervals(self, slot: Slot) -> list[tuple[float, float]]:
        """Occupant projections onto the slot's lateral axis, merged."""
        axis = slot.lateral_axis
        center = float(slot.region.center @ axis)
        half_w = float(slot.region.half_extents[0])
        raw = []
        for oid in slot.occupant_ids:
            box = self.object(oid).box
            c = float(box.center @ axis)
            r = float(np.abs(axis @ box.pose.matrix) @ box.half_extents)
            lo = max(c - r, center - half_w)
            hi = min(c + r, center + half_w)
            if hi > lo:
                raw.append((lo, hi))
        raw.sort()
        merged: list[tuple[float, float]] = []
        for lo, hi in raw:
            if merged and lo <= merged[-1][1]:
                merged[-1] = (merged[-1][0], max(merged[-1][1], hi))
            else:
                merged.append((lo, hi))
        return merged

    def free_intervals(self, slot: Slot) -> list[tuple[float, float]]:
        axis = slot.lateral_axis
        center = float(slot.region.center @ axis)
        half_w = float(slot.region.half_extents[0])
        cursor = center - half_w
        out = []
        for lo, hi in self.occupied_intervals(slot):
            if lo > cursor:
                out.append((cursor, lo))
            cursor = max(cursor, hi)
        if center + half_w > cursor:
            out.append((cursor, center + half_w))
        return out

    def slot_emptiness(self, slot_id: str) -> float:
        slot = self.slot(slot_id)
        occupied = sum(hi - lo for lo, hi in self.occupied_intervals(slot))
        return 1.0 - occupied / (2.0 * float(slot.region.half_extents[0]))

    # -- edges ----------------------------------------------------------------

    def _frames_for_edges(self, reference: ObjectInstance):
        frames = {"absolute": frame_of("absolute",
                                       anchor_position=reference.center)}
        frames["relative"] = frame_of("relative",
                                      anchor_position=reference.center,
                                      viewer=self.viewer_pose)
        anchor = self._by_id[self.anchor_id]
        if anchor.front_axis is not None:
            frames["intrinsic"] = frame_of("intrinsic",
                                           anchor_position=reference.center,
                                           anchor_front=anchor.front_axis,
                                           anchor_id=anchor.id)
        return frames

    def _derive_edges(self):
        edges = []
        for ref in self.objects:
            frames = self._frames_for_edges(ref)
            for target in self.objects:
                if target.id == ref.id:
                    continue
                for fkind, frame in frames.items():
                    for rel in RELATIONS:
                        if relation_holds(rel, frame, target.center, ref.center,
                                          reference_id=ref.id):
                            edges.append((target.id, rel, ref.id, fkind))
        return edges

    def _check_interpenetration(self):
        objs = self.objects
        for i in range(len(objs)):
            for j in range(i + 1, len(objs)):
                if self.held_id in (objs[i].id, objs[j].id):
                    continue  # the held book floats at the gripper
                if object_distance(objs[i], objs[j]) <= 0.0:
                    raise Interpenetration(objs[i].id, objs[j].id)

    # -- evolution -------------------------------------------------------------

    def with_updates(self, moved: dict[str, OrientedBox],
                     held_id: str | None = None,
                     slot_occupants: dict[str, list[str]] | None = None,
                     ee_pose: Pose | None = None) -> "SceneGraph":
        """New scene version with some object boxes replaced."""
        objects = []
        for o in self.objects:
            if o.id in moved:
                objects.append(ObjectInstance(o.id, o.asset, moved[o.id],
                                              o.init_pose_class, o.front_axis,
                                              o.components, o.label))
            else:
                objects.append(o)
        slots = [Slot(s.id, s.row, s.col, s.region,
                      list((slot_occupants or {}).get(s.id, s.occupant_ids)))
                 for s in self.slots]
        return SceneGraph(self.scene_id, self.seed, self.kind, self.difficulty,
                          objects, slots, self.anchor_id, self.viewer_pose,
                          self.world_camera,
                          ee_pose if ee_pose is not None else self.ee_pose,
                          self.ego_cam_offset, held_id,
                          self.ee_init_angles, self.version + 1)

    # -- serialization ---------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "scene_id": self.scene_id,
            "seed": self.seed,
            "kind": self.kind,
            "difficulty": self.difficulty,
            "units": "m",
            "objects": [o.to_json() for o in self.objects],
            "slots": [s.to_json() for s in self.slots],
            "anchor_id": self.anchor_id,
            "viewer_pose": self.viewer_pose.to_json(),
            "world_camera": self.world_camera.to_json(),
            "ee_pose": self.ee_pose.to_json(),
            "ego_cam_offset": self.ego_cam_offset.to_json(),
            "held_id": self.held_id,
            "ee_init_angles": self.ee_init_angles,
            "version": self.version,
        }

    def canonical_bytes(self) -> bytes:
        return json.dumps(self.to_json(), sort_keys=True).encode()

    @staticmethod
    def from_json(d: dict, catalog: Catalog | None = None) -> "SceneGraph":
        catalog = catalog or default_catalog()
        assert d.get("units", "m") == "m"
        return SceneGraph(
            scene_id=d["scene_id"], seed=d["seed"], kind=d["kind"],
            difficulty=d["difficulty"],
            objects=[ObjectInstance.from_json(o, catalog) for o in d["objects"]],
            slots=[Slot.from_json(s) for s in d["slots"]],
            anchor_id=d["anchor_id"],
            viewer_pose=Pose.from_json(d["viewer_pose"]),
            world_camera=CameraModel.from_json(d["world_camera"]),
            ee_pose=Pose.from_json(d["ee_pose"]),
            ego_cam_offset=Pose.from_json(d["ego_cam_offset"]),
            held_id=d.get("held_id"),
            ee_init_angles=d.get("ee_init_angles"),
            version=d.get("version", 0),
        )
