"""Procedural tabletop and shelf scene generation.

Layout conventions (meters, +Z up):

* tabletop: table centered at the origin, top surface near z=0.70, front
  edge at y=-0.30; the viewer stands at (0, -1, 0) facing +Y.
* shelf: shelf front face at y=0 facing -Y, base on the floor, lateral
  extent centered on x=0; the viewer stands at (0, -1.2, 0).

All placed objects rest CONTACT_EPS above their support so that resting
contact never counts as interpenetration.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .catalog import Catalog, default_catalog
from .geometry import (
    CameraModel,
    OrientedBox,
    Pose,
    body_pose_facing,
    euler_xyz_to_quat,
    look_at_pose,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_mul,
)
from .scene import CONTACT_EPS, Interpenetration, ObjectInstance, SceneGraph, Slot

FLOOR_TOP_Z = 0.0
TABLE_TOP_Z = 0.70 + 2 * CONTACT_EPS  # physical top + resting gap
TABLE_FRONT_Y = -0.30

BOOK_COUNT_BY_DIFFICULTY = {"easy": (1, 2), "medium": (3, 5), "hard": (6, 8)}
OCCUPANCY_BY_DIFFICULTY = {"easy": 1 / 3, "medium": 2 / 3, "hard": 1.0}

TILT_RANGE_DEG = (15.0, 75.0)
SHELF_TILT_RANGE_DEG = (12.0, 30.0)

BOARD_T = 0.02  # shelf board / panel thickness
SHELF_PLINTH = 0.10

EE_BELOW_CAMERA = (0.3, 0.5)
EE_PITCH_YAW_DEG = 22.5
TABLETOP_ROLL_DEG = 45.0
SHELF_ROLL_DEG = (60.0, 120.0)

# ego camera rigidly mounted just above/behind the gripper, looking along
# the gripper's forward (+Y body) axis
EGO_CAM_OFFSET = Pose(
    [0.0, -0.06, 0.08],
    quat_from_matrix(np.array([[1.0, 0.0, 0.0],
                               [0.0, 0.0, 1.0],
                               [0.0, -1.0, 0.0]])))


class SamplingExhausted(Exception):
    pass


@dataclass
class SamplerConfig:
    seed: int
    index: int = 0
    kind: str = "tabletop"
    difficulty: str = "easy"
    margin_min: float = 0.05
    visibility_min: float = 0.20
    held_visibility_min: float = 0.50
    budget: int = 10_000
    resolution: tuple[int, int] = (640, 480)

    def __post_init__(self):
        if self.kind not in ("tabletop", "shelf"):
            raise ValueError(f"unknown kind {self.kind!r}")
        if self.difficulty not in BOOK_COUNT_BY_DIFFICULTY:
            raise ValueError(f"unknown difficulty {self.difficulty!r}")
        if self.margin_min < 0:
            raise ValueError("margin_min must be non-negative")


# ---------------------------------------------------------------------------
# pose constructors
# ---------------------------------------------------------------------------

def upright_book_box(dims_m, center_xy, bottom_z, yaw_deg=0.0) -> OrientedBox:
    L, W, H = dims_m
    q = quat_from_axis_angle([0, 0, 1], math.radians(yaw_deg))
    return OrientedBox(Pose([center_xy[0], center_xy[1], bottom_z + L / 2], q),
                       [H / 2, W / 2, L / 2])


def flat_book_box(dims_m, center_xy, bottom_z, yaw_deg=0.0) -> OrientedBox:
    L, W, H = dims_m
    q = quat_mul(quat_from_axis_angle([0, 0, 1], math.radians(yaw_deg)),
                 quat_from_axis_angle([0, 1, 0], math.radians(90.0)))
    return OrientedBox(Pose([center_xy[0], center_xy[1], bottom_z + H / 2], q),
                       [H / 2, W / 2, L / 2])


def tilted_book_box(dims_m, center_xy, bottom_z, tilt_deg, yaw_deg=0.0) -> OrientedBox:
    """Book leaning by tilt_deg from vertical, lowest corner resting."""
    L, W, H = dims_m
    q = quat_mul(quat_from_axis_angle([0, 0, 1], math.radians(yaw_deg)),
                 quat_from_axis_angle([0, 1, 0], math.radians(tilt_deg)))
    box = OrientedBox(Pose([center_xy[0], center_xy[1], 0.0], q),
                      [H / 2, W / 2, L / 2])
    lift = bottom_z - float(box.corners()[:, 2].min())
    return OrientedBox(Pose([center_xy[0], center_xy[1], lift], q),
                       [H / 2, W / 2, L / 2])


def ref_box(dims_m, center_xy, bottom_z, yaw_deg=0.0) -> OrientedBox:
    """Reference object footprint W x L, height H, front facing -Y at yaw 0."""
    L, W, H = dims_m
    q = quat_from_axis_angle([0, 0, 1], math.radians(yaw_deg))
    return OrientedBox(Pose([center_xy[0], center_xy[1], bottom_z + H / 2], q),
                       [W / 2, L / 2, H / 2])


def footprint_radius(box: OrientedBox) -> float:
    corners = box.corners()
    d = corners[:, :2] - box.center[:2]
    return float(np.max(np.linalg.norm(d, axis=1)))


# ---------------------------------------------------------------------------
# shared pieces
# ---------------------------------------------------------------------------

def _floor_object(cat: Catalog) -> ObjectInstance:
    return ObjectInstance("floor", cat["floor"],
                          OrientedBox.axis_aligned([0, 0, -0.025],
                                                   [10.0, 10.0, 0.025]))


def _sample_ee(rng, cam_pos, roll_tabletop: bool):
    pitch = rng.uniform(-EE_PITCH_YAW_DEG, EE_PITCH_YAW_DEG)
    yaw = rng.uniform(-EE_PITCH_YAW_DEG, EE_PITCH_YAW_DEG)
    if roll_tabletop:
        roll = rng.uniform(-TABLETOP_ROLL_DEG, TABLETOP_ROLL_DEG)
    else:
        lo, hi = SHELF_ROLL_DEG
        roll = rng.uniform(lo, hi) * (1 if rng.random() < 0.5 else -1)
    drop = rng.uniform(*EE_BELOW_CAMERA)
    pos = np.array([cam_pos[0], cam_pos[1], cam_pos[2] - drop])
    base = body_pose_facing(pos, [0, 1, 0])
    # Body frame: +Y forward, +Z up.  Roll spins about the forward axis
    # (second argument), yaw swings about the up axis (third argument).
    q = quat_mul(base.quat, euler_xyz_to_quat(pitch, roll, yaw))
    angles = {"pitch": float(pitch), "yaw": float(yaw), "roll": float(roll),
              "drop": float(drop)}
    return Pose(pos, q), angles


def _margin_ok(box: OrientedBox, others: list[OrientedBox], margin: float) -> bool:
    from .geometry import clearance_at_least
    return all(clearance_at_least(box, o, margin) for o in others)


# ---------------------------------------------------------------------------
# tabletop
# ---------------------------------------------------------------------------

def sample_tabletop(cfg: SamplerConfig, catalog: Catalog | None = None) -> SceneGraph:
    cat = catalog or default_catalog()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cfg.index, 0]))
    counter = [0]
    while True:
        try:
            return _try_tabletop(cfg, cat, rng, counter)
        except _Restart:
            if counter[0] >= cfg.budget:
                raise SamplingExhausted(
                    f"tabletop sampling exhausted after {counter[0]} attempts")


class _Restart(Exception):
    pass


def _place_on_table(rng, make_box, placed, margin, attempts_box, budget):
    """Rejection-place one object on the table top; returns its box."""
    for _ in range(60):
        attempts_box[0] += 1
        if attempts_box[0] > budget:
            raise _Restart
        x = rng.uniform(-0.66, 0.66)
        y = rng.uniform(-0.26, 0.26)
        box = make_box((x, y))
        r = footprint_radius(box)
        if abs(x) + r > 0.70 or abs(y) + r > 0.30:
            continue
        if not _margin_ok(box, placed, margin):
            continue
        return box
    raise _Restart


def _try_tabletop(cfg, cat, rng, counter):
    lo, hi = BOOK_COUNT_BY_DIFFICULTY[cfg.difficulty]
    n_books = int(rng.integers(lo, hi + 1))

    objects = [_floor_object(cat)]
    table_box = OrientedBox(
        Pose([0, 0, CONTACT_EPS + 0.35], quat_from_axis_angle([0, 0, 1], 0.0)),
        [0.70, 0.30, 0.35])
    objects.append(ObjectInstance("table", cat["table"], table_box,
                                  front_axis=np.array([0.0, -1.0, 0.0])))

    placed: list[OrientedBox] = []

    # books
    for i in range(n_books):
        asset = cat[rng.choice(["book_small", "book_medium", "book_large"])]
        dims = asset.sample_dims_m(rng)
        u = rng.random()
        pose_class = "upright" if u < 0.5 else ("flat" if u < 0.8 else "tilted")
        yaw = float(rng.uniform(0, 360))
        if pose_class == "upright":
            def make(c, d=dims, yw=yaw):
                return upright_book_box(d, c, TABLE_TOP_Z, yw)
        elif pose_class == "flat":
            def make(c, d=dims, yw=yaw):
                return flat_book_box(d, c, TABLE_TOP_Z, yw)
        else:
            tilt = float(rng.uniform(*TILT_RANGE_DEG))
            def make(c, d=dims, yw=yaw, tl=tilt):
                return tilted_book_box(d, c, TABLE_TOP_Z, tl, yw)
        box = _place_on_table(rng, make, placed, cfg.margin_min, counter,
                              cfg.budget)
        placed.append(box)
        objects.append(ObjectInstance(f"book_{i}", asset, box,
                                      init_pose_class=pose_class, label="book"))

    # two distinct near references
    near_names = [a.name for a in cat.by_category("near_ref")]
    for j, name in enumerate(rng.choice(near_names, size=2, replace=False)):
        asset = cat[name]
        yaw = float(rng.uniform(-40, 40)) if asset.oriented \
            else float(rng.uniform(0, 360))
        def make(c, a=asset, yw=yaw):
            return ref_box(a.dims_m, c, TABLE_TOP_Z, yw)
        box = _place_on_table(rng, make, placed, cfg.margin_min, counter,
                              cfg.budget)
        placed.append(box)
        front = None
        if asset.oriented:
            front = box.pose.rotate([0.0, -1.0, 0.0])
        objects.append(ObjectInstance(f"near_{j}", asset, box, front_axis=front))

    # occasionally a support ornament on the table
    if rng.random() < 0.4:
        asset = cat["support_wedge"]
        def make(c, a=asset):
            return ref_box(a.dims_m, c, TABLE_TOP_Z, float(rng.uniform(0, 360)))
        try:
            box = _place_on_table(rng, make, placed, cfg.margin_min, counter,
                                  cfg.budget)
            placed.append(box)
            objects.append(ObjectInstance("support_0", asset, box))
        except _Restart:
            raise

    # one distant reference on the floor, beside/behind the table
    asset = cat[rng.choice([a.name for a in cat.by_category("distant_ref")])]
    side = 1 if rng.random() < 0.5 else -1
    dx = side * rng.uniform(0.80, 1.30)
    dy = rng.uniform(0.30, 1.20)
    yaw = float(rng.uniform(-30, 30)) if asset.oriented else float(rng.uniform(0, 360))
    dbox = ref_box(asset.dims_m, (dx, dy), FLOOR_TOP_Z + CONTACT_EPS, yaw)
    front = dbox.pose.rotate([0.0, -1.0, 0.0]) if asset.oriented else None
    objects.append(ObjectInstance("distant_0", asset, dbox, front_axis=front))

    # cameras and end effector
    aim = np.array([rng.uniform(-0.5, 0.5), TABLE_FRONT_Y, TABLE_TOP_Z])
    cam_pos = np.array([rng.uniform(-0.35, 0.35), rng.uniform(-1.45, -1.05),
                        TABLE_TOP_Z + rng.uniform(0.5, 1.0)])
    vfov = float(rng.uniform(50, 70))
    cam = CameraModel(look_at_pose(cam_pos, aim), vfov, cfg.resolution)
    ee_pose, angles = _sample_ee(rng, cam_pos, roll_tabletop=True)

    scene_id = f"tabletop-{cfg.difficulty}-{cfg.seed}-{cfg.index}"
    try:
        scene = SceneGraph(scene_id, cfg.seed, "tabletop", cfg.difficulty,
                           objects, [], "table",
                           body_pose_facing([0, -1.0, 0], [0, 1, 0]),
                           cam, ee_pose, EGO_CAM_OFFSET, None,
                           ee_init_angles=angles)
    except Interpenetration:
        counter[0] += 1
        raise _Restart

    for o in scene.objects:
        if o.id == "floor":
            continue
        if scene.visible_fraction(cam, o.id) < cfg.visibility_min:
            counter[0] += 5
            raise _Restart
    return scene


# ---------------------------------------------------------------------------
# shelf
# ---------------------------------------------------------------------------

def shelf_components(asset) -> tuple[list[OrientedBox], list[Slot]]:
    """Boards, panels, dividers, and the slot regions of one shelf layout."""
    D, W, H = asset.dims_m
    rows, cols = asset.grid
    z0 = CONTACT_EPS
    back_y = D - BOARD_T / 2
    comps = [
        # back panel
        OrientedBox.axis_aligned([0, back_y, z0 + H / 2], [W / 2, BOARD_T / 2, H / 2]),
        # side panels
        OrientedBox.axis_aligned([-(W - BOARD_T) / 2, D / 2, z0 + H / 2],
                                 [BOARD_T / 2, D / 2, H / 2]),
        OrientedBox.axis_aligned([(W - BOARD_T) / 2, D / 2, z0 + H / 2],
                                 [BOARD_T / 2, D / 2, H / 2]),
        # plinth
        OrientedBox.axis_aligned([0, D / 2, z0 + SHELF_PLINTH / 2],
                                 [W / 2, D / 2, SHELF_PLINTH / 2]),
    ]
    inner_w = W - 2 * BOARD_T
    inner_h = H - SHELF_PLINTH - BOARD_T  # below the top board
    slot_h = (inner_h - (rows - 1) * BOARD_T) / rows
    slot_w = (inner_w - (cols - 1) * BOARD_T) / cols
    # horizontal boards (top board + between rows)
    for r in range(rows):
        z_board = z0 + SHELF_PLINTH + (r + 1) * slot_h + r * BOARD_T + BOARD_T / 2
        comps.append(OrientedBox.axis_aligned(
            [0, D / 2, z_board], [W / 2, D / 2, BOARD_T / 2]))
    # vertical dividers between columns (full height above the plinth)
    for c in range(1, cols):
        x_div = -inner_w / 2 + c * slot_w + (c - 0.5) * BOARD_T
        comps.append(OrientedBox.axis_aligned(
            [x_div, D / 2, z0 + SHELF_PLINTH + inner_h / 2],
            [BOARD_T / 2, D / 2, inner_h / 2]))
    slots = []
    depth = D - BOARD_T  # free depth in front of the back panel
    for r in range(rows):
        # row 1 is the TOP row
        z_bot = z0 + SHELF_PLINTH + (rows - r - 1) * (slot_h + BOARD_T)
        for c in range(cols):
            x_c = -inner_w / 2 + c * (slot_w + BOARD_T) + slot_w / 2
            region = OrientedBox.axis_aligned(
                [x_c, depth / 2, z_bot + slot_h / 2],
                [slot_w / 2, depth / 2, slot_h / 2])
            slots.append(Slot(f"slot_{r + 1}_{c + 1}", r + 1, c + 1, region))
    return comps, slots


def sample_shelf(cfg: SamplerConfig, catalog: Catalog | None = None) -> SceneGraph:
    cat = catalog or default_catalog()
    rng = np.random.default_rng(np.random.SeedSequence([cfg.seed, cfg.index, 1]))
    counter = [0]
    while True:
        try:
            return _try_shelf(cfg, cat, rng, counter)
        except _Restart:
            if counter[0] >= cfg.budget:
                raise SamplingExhausted(
                    f"shelf sampling exhausted after {counter[0]} attempts")


def _place_in_slot(rng, slot, dims, placed, margin, counter, budget, tilt=None):
    slot_w = 2 * slot.region.half_extents[0]
    L, W, H = dims
    for _ in range(40):
        counter[0] += 1
        if counter[0] > budget:
            raise _Restart
        x = slot.region.center[0] + rng.uniform(-(slot_w - H) / 2 * 0.9,
                                                (slot_w - H) / 2 * 0.9)
        y = slot.region.center[1] - slot.region.half_extents[1] + W / 2 + 0.01
        z_bot = slot.region.center[2] - slot.region.half_extents[2] + CONTACT_EPS
        if tilt is None:
            box = upright_book_box(dims, (x, y), z_bot)
        else:
            box = tilted_book_box(dims, (x, y), z_bot, tilt)
        # stay inside the slot region
        if not all(slot.region.contains(c, tol=1e-6) for c in box.corners()):
            continue
        if not _margin_ok(box, placed, margin):
            continue
        return box
    raise _Restart


def _try_shelf(cfg, cat, rng, counter):
    shelf_asset = cat[rng.choice([a.name for a in cat.by_category("shelf")])]
    comps, slots = shelf_components(shelf_asset)
    D, W, H = shelf_asset.dims_m

    envelope = OrientedBox.axis_aligned([0, D / 2, CONTACT_EPS + H / 2],
                                        [W / 2, D / 2, H / 2])
    objects = [_floor_object(cat),
               ObjectInstance("shelf", shelf_asset, envelope,
                              front_axis=np.array([0.0, -1.0, 0.0]),
                              components=comps)]

    n_occupied = math.ceil(len(slots) * OCCUPANCY_BY_DIFFICULTY[cfg.difficulty])
    occupied = list(rng.choice([s.id for s in slots], size=n_occupied,
                               replace=False))
    slot_by_id = {s.id: s for s in slots}
    placed: list[OrientedBox] = []
    book_i = 0
    occupants: dict[str, list[str]] = {s.id: [] for s in slots}
    for sid in occupied:
        slot = slot_by_id[sid]
        for _ in range(int(rng.integers(1, 3))):
            asset = cat[rng.choice(["book_small", "book_medium", "book_large"])]
            dims = asset.sample_dims_m(rng)
            if dims[0] > 2 * slot.region.half_extents[2] - 0.01:
                continue  # book too tall for this slot
            tilt = None
            pose_class = "upright"
            if rng.random() < 0.25:
                tilt = float(rng.uniform(*SHELF_TILT_RANGE_DEG))
                pose_class = "tilted"
            try:
                box = _place_in_slot(rng, slot, dims, placed, cfg.margin_min,
                                     counter, cfg.budget, tilt)
            except _Restart:
                if counter[0] > cfg.budget:
                    raise
                continue
            placed.append(box)
            oid = f"book_{book_i}"
            book_i += 1
            objects.append(ObjectInstance(oid, asset, box,
                                          init_pose_class=pose_class,
                                          label="book"))
            occupants[sid].append(oid)
    if any(not occupants[sid] for sid in occupied):
        counter[0] += 1
        raise _Restart  # every designated slot must actually hold a book

    # two near references standing inside distinct slots
    near_names = list(rng.choice([a.name for a in cat.by_category("near_ref")],
                                 size=2, replace=False))
    ref_slots = list(rng.choice([s.id for s in slots], size=2, replace=False))
    for j, (name, sid) in enumerate(zip(near_names, ref_slots)):
        asset = cat[name]
        slot = slot_by_id[sid]
        L, Wd, Hd = asset.dims_m
        if (Hd > 2 * slot.region.half_extents[2] - 0.01
                or Wd > 2 * slot.region.half_extents[0] - 0.02):
            counter[0] += 1
            raise _Restart
        for _ in range(30):
            counter[0] += 1
            if counter[0] > cfg.budget:
                raise _Restart
            x = slot.region.center[0] + rng.uniform(
                -(2 * slot.region.half_extents[0] - Wd) / 2 * 0.8,
                (2 * slot.region.half_extents[0] - Wd) / 2 * 0.8)
            y = slot.region.center[1] - slot.region.half_extents[1] + L / 2 + 0.01
            z_bot = slot.region.center[2] - slot.region.half_extents[2] + CONTACT_EPS
            box = ref_box(asset.dims_m, (x, y), z_bot, 0.0)
            if not all(slot.region.contains(c, tol=1e-6) for c in box.corners()):
                continue
            if not _margin_ok(box, placed, cfg.margin_min):
                continue
            break
        else:
            raise _Restart
        placed.append(box)
        front = box.pose.rotate([0.0, -1.0, 0.0]) if asset.oriented else None
        objects.append(ObjectInstance(f"near_{j}", asset, box, front_axis=front))
        occupants[sid].append(f"near_{j}")

    # distant reference beside the shelf
    asset = cat[rng.choice([a.name for a in cat.by_category("distant_ref")])]
    side = 1 if rng.random() < 0.5 else -1
    dx = side * (W / 2 + rng.uniform(0.30, 0.80))
    dy = rng.uniform(0.0, 0.40)
    dbox = ref_box(asset.dims_m, (dx, dy), FLOOR_TOP_Z + CONTACT_EPS,
                   float(rng.uniform(-30, 30)) if asset.oriented
                   else float(rng.uniform(0, 360)))
    front = dbox.pose.rotate([0.0, -1.0, 0.0]) if asset.oriented else None
    objects.append(ObjectInstance("distant_0", asset, dbox, front_axis=front))

    # camera, end effector, held book
    cam_pos = np.array([rng.uniform(-0.30, 0.30), rng.uniform(-1.70, -1.30),
                        rng.uniform(1.2, 1.5)])
    aim = np.array([0.0, D / 2, CONTACT_EPS + H / 2])
    vfov = float(rng.uniform(70, 90))
    cam = CameraModel(look_at_pose(cam_pos, aim), vfov, cfg.resolution)
    ee_pose, angles = _sample_ee(rng, cam_pos, roll_tabletop=False)

    held_asset = cat[rng.choice(["book_small", "book_medium", "book_large"])]
    held_dims = held_asset.sample_dims_m(rng)
    L, Wd, Hd = held_dims
    held_offset = Pose([0.0, 0.16, -L / 2 + 0.02],
                       quat_from_axis_angle([0, 0, 1], 0.0))
    held_box = OrientedBox(ee_pose.compose(held_offset), [Hd / 2, Wd / 2, L / 2])
    objects.append(ObjectInstance("held_book", held_asset, held_box,
                                  init_pose_class="upright", label="book"))

    for s in slots:
        s.occupant_ids = occupants[s.id]

    scene_id = f"shelf-{cfg.difficulty}-{cfg.seed}-{cfg.index}"
    try:
        scene = SceneGraph(scene_id, cfg.seed, "shelf", cfg.difficulty,
                           objects, slots, "shelf",
                           body_pose_facing([0, -1.2, 0], [0, 1, 0]),
                           cam, ee_pose, EGO_CAM_OFFSET, "held_book",
                           ee_init_angles=angles)
    except Interpenetration:
        counter[0] += 1
        raise _Restart

    if scene.visible_fraction(scene.ego_camera, "held_book") < cfg.held_visibility_min:
        counter[0] += 5
        raise _Restart
    return scene


def sample_scene(cfg: SamplerConfig, catalog: Catalog | None = None) -> SceneGraph:
    if cfg.kind == "tabletop":
        return sample_tabletop(cfg, catalog)
    return sample_shelf(cfg, catalog)


def sample_scenes(kind: str, difficulty: str, count: int, seed: int,
                  catalog: Catalog | None = None, **kw) -> list[SceneGraph]:
    return [sample_scene(SamplerConfig(seed=seed, index=i, kind=kind,
                                       difficulty=difficulty, **kw), catalog)
            for i in range(count)]


# ---------------------------------------------------------------------------
# post-hoc validation
# ---------------------------------------------------------------------------

def validate_scene(scene: SceneGraph, cfg: SamplerConfig | None = None) -> list[str]:
    """Re-verify every sampler constraint from scene data alone."""
    from .scene import object_distance

    cfg = cfg or SamplerConfig(seed=0, kind=scene.kind,
                               difficulty=scene.difficulty)
    problems = []
    movable = [o for o in scene.objects
               if o.category in ("book", "near_ref", "support")
               and o.id != scene.held_id]
    for i in range(len(movable)):
        for j in range(i + 1, len(movable)):
            d = object_distance(movable[i], movable[j])
            if d < cfg.margin_min - 1e-9:
                problems.append(f"margin {movable[i].id}/{movable[j].id} = {d:.3f}")

    n_books = len([b for b in scene.books() if b.id != scene.held_id])
    lo, hi = BOOK_COUNT_BY_DIFFICULTY[scene.difficulty]
    if scene.kind == "tabletop":
        if not lo <= n_books <= hi:
            problems.append(f"book count {n_books} outside [{lo}, {hi}]")
        for o in scene.objects:
            if o.id == "floor":
                continue
            f = scene.visible_fraction(scene.world_camera, o.id)
            if f < cfg.visibility_min - 1e-9:
                problems.append(f"visibility {o.id} = {f:.2f}")
        elev = scene.world_camera.pose.position[2] - TABLE_TOP_Z
        if not 0.5 - 1e-9 <= elev <= 1.0 + 1e-9:
            problems.append(f"camera elevation {elev:.2f}")
        if abs(scene.ee_init_angles.get("roll", 0.0)) > TABLETOP_ROLL_DEG:
            problems.append("roll outside tabletop range")
    else:
        occupied = sum(1 for s in scene.slots
                       if any(o.startswith("book") for o in s.occupant_ids))
        want = math.ceil(len(scene.slots)
                         * OCCUPANCY_BY_DIFFICULTY[scene.difficulty])
        if occupied != want:
            problems.append(f"occupied slots {occupied} != {want}")
        elev = scene.world_camera.pose.position[2]
        if not 1.2 - 1e-9 <= elev <= 1.5 + 1e-9:
            problems.append(f"camera elevation {elev:.2f}")
        roll = abs(scene.ee_init_angles.get("roll", 90.0))
        if not SHELF_ROLL_DEG[0] <= roll <= SHELF_ROLL_DEG[1]:
            problems.append(f"roll {roll:.1f} outside shelf range")
        f = scene.visible_fraction(scene.ego_camera, scene.held_id)
        if f < cfg.held_visibility_min - 1e-9:
            problems.append(f"held book ego visibility {f:.2f}")
    for a in ("pitch", "yaw"):
        if abs(scene.ee_init_angles.get(a, 0.0)) > EE_PITCH_YAW_DEG:
            problems.append(f"{a} outside range")
    drop = scene.ee_init_angles.get("drop", 0.4)
    if not EE_BELOW_CAMERA[0] - 1e-9 <= drop <= EE_BELOW_CAMERA[1] + 1e-9:
        problems.append(f"ee drop {drop:.2f}")
    return problems
