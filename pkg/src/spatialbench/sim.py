"""Kinematic manipulation runtime: a free-flying gripper over scene graphs.

There is no physics here. Motion is teleport-style with collision gating,
grasps and placements are accepted or rejected by explicit geometric
criteria, and releasing a book settles it straight down onto the first
support contact. Every accepted placement produces a new scene graph
version; rejected attempts leave the scene untouched.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .dsl import Call, parse_program
from .evaluator import (
    _Evaluator,
    book_pose_class,
    book_tilt_deg,
    entity_distance,
)
from .geometry import (
    CameraModel,
    GLOBAL_UP,
    NonPositiveDepth,
    OrientedBox,
    Pose,
    boundary_distance,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_mul,
    quat_to_matrix,
    unproject_point,
)
from .scene import CONTACT_EPS, SceneGraph

GRASP_ALIGN_TOL_DEG = 15.0
GRASP_EDGE_MARGIN = 0.01
ON_TARGET_TOL = 0.005
WITHDRAW_DISTANCE = 0.25
SETTLE_MAX_DROP = 2.0

STATUS_DISTANCE_TOL = 0.03
STATUS_ANGLE_TOL_DEG = 10.0


class SimError(Exception):
    pass


class NoCertifiedPose(SimError):
    pass


@dataclass(frozen=True)
class GripperModel:
    """Free-flying parallel gripper proxy.

    In the end-effector body frame the tool center point sits 16 cm along
    +Y (matching where sampled scenes pin the held book), fingers close
    along X, and the approach direction is +Y: the gripper reaches forward
    onto a book edge and retreats backward. The body box approximates a
    slim wrist above the fingers.
    """

    finger_gap_max: float = 0.08
    finger_clearance: float = 0.005
    tcp_offset: tuple = (0.0, 0.16, 0.0)
    body_center: tuple = (0.0, 0.16, 0.10)
    body_half_extents: tuple = (0.02, 0.02, 0.05)

    def __post_init__(self):
        if not self.finger_gap_max > self.finger_clearance > 0:
            raise ValueError("need finger_gap_max > finger_clearance > 0")

    def tcp_point(self, ee_pose: Pose) -> np.ndarray:
        return ee_pose.transform_point(np.array(self.tcp_offset))

    def closing_axis(self, ee_pose: Pose) -> np.ndarray:
        return ee_pose.rotate([1.0, 0.0, 0.0])

    def approach_axis(self, ee_pose: Pose) -> np.ndarray:
        return ee_pose.rotate([0.0, 1.0, 0.0])

    def body_box(self, ee_pose: Pose) -> OrientedBox:
        center = ee_pose.transform_point(np.array(self.body_center))
        return OrientedBox(Pose(center, ee_pose.quat),
                           np.array(self.body_half_extents))

    def ee_from_tcp(self, tcp_pose: Pose) -> Pose:
        """End-effector pose whose tool center point sits at `tcp_pose`."""
        offset = quat_to_matrix(tcp_pose.quat) @ np.array(self.tcp_offset)
        return Pose(tcp_pose.position - offset, tcp_pose.quat)


@dataclass(frozen=True)
class Verdict:
    ok: bool
    reason: str | None = None
    detail: dict | None = None


@dataclass(frozen=True)
class Status:
    passed: bool
    reason: str | None = None
    delta: float | None = None


# ---------------------------------------------------------------------------
# rotation deltas in a target's local frame
# ---------------------------------------------------------------------------

_AXIS_COLUMN = {"pitch": 1, "yaw": 2, "roll": 0}


def apply_rotation_deltas(quat, deltas: dict, target_axes: np.ndarray):
    """Compose per-axis rotations about the target's local axes onto a
    rotation, in the fixed order pitch, yaw, roll."""
    q = np.array(quat, dtype=float)
    for name in ("pitch", "yaw", "roll"):
        deg = float(deltas.get(name, 0.0))
        if deg == 0.0:
            continue
        axis = target_axes[:, _AXIS_COLUMN[name]]
        q = quat_mul(quat_from_axis_angle(axis, math.radians(deg)), q)
    return q


def rotation_deltas(q_from, q_to, target_axes: np.ndarray) -> dict:
    """Per-axis degrees such that apply_rotation_deltas(q_from, ...) == q_to.

    The relative rotation expressed in the target basis factors as
    Rx(roll) Rz(yaw) Ry(pitch); both asin branches for yaw are tried and
    the better reconstruction wins.
    """
    r_rel = quat_to_matrix(quat_mul(q_to, _quat_conj(q_from)))
    a = target_axes
    m = a.T @ r_rel @ a
    sb = float(np.clip(-m[0, 1], -1.0, 1.0))
    best = None
    for beta in (math.asin(sb), math.pi - math.asin(sb)):
        cb = math.cos(beta)
        if abs(cb) > 1e-8:
            roll = math.atan2(m[2, 1] / cb, m[1, 1] / cb)
            pitch = math.atan2(m[0, 2] / cb, m[0, 0] / cb)
        else:
            pitch = math.atan2(-m[2, 0], m[2, 2])
            roll = 0.0
        deltas = {"pitch": math.degrees(pitch), "yaw": math.degrees(beta),
                  "roll": math.degrees(roll)}
        q_check = apply_rotation_deltas(q_from, deltas, a)
        err = min(np.linalg.norm(q_check - np.array(q_to)),
                  np.linalg.norm(q_check + np.array(q_to)))
        if best is None or err < best[0]:
            best = (err, deltas)
    if best[0] > 1e-6:
        raise SimError("rotation delta decomposition failed")
    return best[1]


def _quat_conj(q):
    q = np.array(q, dtype=float)
    return np.array([q[0], -q[1], -q[2], -q[3]])


def resolve_goal_pose(pixel, depth: float, rotations: dict,
                      camera: CameraModel, current_quat,
                      target_axes: np.ndarray) -> Pose:
    """Pixel + depth + per-axis rotation deltas -> a world goal pose.

    The position is the pointed contact point: a grasp point on a book, or
    the destination of the held book's center for a placement.
    """
    position = unproject_point(camera, pixel, depth)
    quat = apply_rotation_deltas(current_quat, rotations, target_axes)
    return Pose(position, quat)


def resolve_depth_toward(camera: CameraModel, pixel, target_center) -> float:
    """Ground-truth depth for a predicted pixel: the z-depth at which the
    pixel's ray passes closest to the intended target's center.

    Pointing at the center recovers the center exactly; a ray that misses
    the target resolves to a point off the target, so the dispatch between
    acting and repositioning stays geometric.
    """
    origin = camera.pose.position
    ray = unproject_point(camera, pixel, 1.0) - origin
    s = float(((np.asarray(target_center, dtype=float) - origin) @ ray)
              / (ray @ ray))
    if s <= 0:
        raise NonPositiveDepth("target closest approach behind the camera")
    return s


def point_on_target(box: OrientedBox, point, tol: float = ON_TARGET_TOL) -> bool:
    """Whether a resolved 3D point lies on (or within `tol` of) a target box."""
    return box.contains(point, tol=tol)


# ---------------------------------------------------------------------------
# episode state
# ---------------------------------------------------------------------------

@dataclass
class EpisodeState:
    scene: SceneGraph
    gripper: GripperModel
    ee_pose: Pose
    holding: str | None = None
    grip_local: Pose | None = None  # held book pose in the ee frame
    history: list = field(default_factory=list)

    @classmethod
    def from_scene(cls, scene: SceneGraph,
                   gripper: GripperModel | None = None) -> "EpisodeState":
        gripper = gripper or GripperModel()
        state = cls(scene=scene, gripper=gripper, ee_pose=scene.ee_pose)
        if scene.held_id is not None:
            book = scene.object(scene.held_id)
            state.holding = scene.held_id
            state.grip_local = scene.ee_pose.inverse().compose(book.box.pose)
        return state

    @property
    def ego_camera(self) -> CameraModel:
        return CameraModel(self.ee_pose.compose(self.scene.ego_cam_offset),
                           self.scene.world_camera.vertical_fov,
                           self.scene.world_camera.resolution)

    def held_box_at(self, ee_pose: Pose) -> OrientedBox | None:
        if self.holding is None:
            return None
        book = self.scene.object(self.holding)
        return OrientedBox(ee_pose.compose(self.grip_local),
                           book.box.half_extents)

    def _obstacles(self, exclude=()):
        out = []
        for obj in self.scene.objects:
            if obj.id in exclude or obj.id == self.holding:
                continue
            out.extend(obj.solids())
        return out

    def _log(self, op, verdict, goal: Pose):
        self.history.append({"op": op, "ok": verdict.ok,
                             "reason": verdict.reason,
                             "goal": goal.to_json()})

    # -- motion --------------------------------------------------------------

    def attempt_move(self, goal: Pose) -> Verdict:
        """Teleport the hand so its tool center point reaches `goal`."""
        ee = self.gripper.ee_from_tcp(goal)
        moving = [self.gripper.body_box(ee)]
        held = self.held_box_at(ee)
        if held is not None:
            moving.append(held)
        for solid in self._obstacles():
            for box in moving:
                if boundary_distance(box, solid) <= 0.0:
                    verdict = Verdict(False, "collision")
                    self._log("move", verdict, goal)
                    return verdict
        self.ee_pose = ee
        verdict = Verdict(True)
        self._log("move", verdict, goal)
        return verdict

    # -- grasping ------------------------------------------------------------

    def attempt_grasp(self, goal: Pose) -> Verdict:
        """Close the fingers at `goal`, whose position is the grasp point."""
        if self.holding is not None:
            raise SimError("already holding an object")
        verdict = self._grasp_verdict(goal)
        self._log("grasp", verdict, goal)
        if not verdict.ok:
            return verdict
        book_id = verdict.detail["object_id"]
        book = self.scene.object(book_id)
        ee = self.gripper.ee_from_tcp(goal)
        self.holding = book_id
        self.grip_local = ee.inverse().compose(book.box.pose)
        self.ee_pose = ee
        self.scene = self.scene.with_updates({}, held_id=book_id)
        return verdict

    def _grasp_verdict(self, goal: Pose) -> Verdict:
        g = self.gripper
        point = goal.position
        candidates = []
        for book in self.scene.books():
            if book.box.expand(g.finger_clearance).contains(point):
                candidates.append(book)
        if not candidates:
            return Verdict(False, "no_target")
        if len(candidates) > 1:
            return Verdict(False, "collision")
        book = candidates[0]
        closing = g.closing_axis(goal)
        axes = book.box.pose.matrix
        dots = np.abs(axes.T @ closing)
        best = int(np.argmax(dots))
        angle = math.degrees(math.acos(float(np.clip(dots[best], -1, 1))))
        if angle > GRASP_ALIGN_TOL_DEG:
            return Verdict(False, "bad_alignment")
        thickness = 2.0 * float(book.box.half_extents[best])
        if thickness + 2.0 * g.finger_clearance > g.finger_gap_max:
            return Verdict(False, "too_thick")
        local = axes.T @ (point - book.box.center)
        for i in range(3):
            if i == best:
                continue
            margin = float(book.box.half_extents[i]) - GRASP_EDGE_MARGIN
            if abs(float(local[i])) > margin:
                return Verdict(False, "edge")
        body = g.body_box(g.ee_from_tcp(goal))
        for obj in self.scene.objects:
            if obj.id == book.id:
                continue
            for solid in obj.solids():
                if boundary_distance(body, solid) <= 0.0:
                    return Verdict(False, "collision")
        return Verdict(True, detail={"object_id": book.id})

    # -- placing -------------------------------------------------------------

    def attempt_place(self, goal: Pose) -> Verdict:
        """Release the held book with its center posed at `goal`.

        The book drops to first support contact; acceptance needs the
        settled box inside one slot region, intersection-free, statically
        stable, and a clear gripper retreat along -approach.
        """
        if self.holding is None:
            raise SimError("nothing held to place")
        book = self.scene.object(self.holding)
        box = OrientedBox(Pose(goal.position,
                               quat_mul(goal.quat, self.grip_local.quat)),
                          book.box.half_extents)
        obstacles = self._obstacles()
        verdict = self._place_verdict(book, box, obstacles, goal)
        self._log("place", verdict, goal)
        if not verdict.ok:
            return verdict
        settled = verdict.detail["settled"]
        slot_id = verdict.detail["slot_id"]
        withdrawn = verdict.detail["withdrawn_ee"]
        occupants = {slot_id:
                     self.scene.slot(slot_id).occupant_ids + [book.id]}
        self.scene = self.scene.with_updates(
            {book.id: settled}, held_id=None, slot_occupants=occupants,
            ee_pose=withdrawn)
        self.holding = None
        self.grip_local = None
        self.ee_pose = withdrawn
        return verdict

    def _place_verdict(self, book, box, obstacles, goal: Pose) -> Verdict:
        for solid in obstacles:
            if boundary_distance(box, solid) <= 0.0:
                return Verdict(False, "overlap")
        settled, support = _settle(box, obstacles)
        if settled is None:
            return Verdict(False, "unstable")
        com = settled.center
        if not _com_supported(com, support):
            return Verdict(False, "unstable")
        slot_id = None
        for slot in self.scene.slots:
            if all(slot.region.contains(c, tol=0.002)
                   for c in settled.corners()):
                slot_id = slot.id
                break
        if slot_id is None:
            return Verdict(False, "outside_region")
        ee_at_place = box.pose.compose(self.grip_local.inverse())
        retreat = -self.gripper.approach_axis(ee_at_place)
        for t in np.linspace(0.0, WITHDRAW_DISTANCE, 11)[1:]:
            body = self.gripper.body_box(
                Pose(ee_at_place.position + t * retreat, ee_at_place.quat))
            for solid in obstacles:
                if boundary_distance(body, solid) <= 0.0:
                    return Verdict(False, "no_retreat")
        withdrawn = Pose(ee_at_place.position + WITHDRAW_DISTANCE * retreat,
                         ee_at_place.quat)
        return Verdict(True, detail={"settled": settled, "slot_id": slot_id,
                                     "withdrawn_ee": withdrawn})


def _translated(box: OrientedBox, offset) -> OrientedBox:
    return OrientedBox(Pose(box.center + offset, box.pose.quat),
                       box.half_extents)


def _settle(box: OrientedBox, obstacles):
    """Drop a box along -up to its first support contact.

    Returns (settled box with a CONTACT_EPS air gap, contact solids), or
    (None, None) when nothing below catches it within the drop budget.
    """
    up = np.asarray(GLOBAL_UP, dtype=float)

    def clearance(d):
        moved = _translated(box, -d * up)
        return min((boundary_distance(moved, s) for s in obstacles),
                   default=math.inf)

    if clearance(0.0) < CONTACT_EPS:
        # already in contact: lift minimally to a clean contact gap, so the
        # resulting scene keeps strictly positive separations
        lift = 0.0
        while lift < 0.05 and clearance(-lift) < CONTACT_EPS:
            lift += 0.005
        if clearance(-lift) < CONTACT_EPS:
            return None, None
        lo, hi = -lift, 0.0
    else:
        lo, hi = 0.0, None
        d = 0.0
        while d < SETTLE_MAX_DROP:
            d += 0.005
            if clearance(d) < CONTACT_EPS:
                hi = d
                break
            lo = d
        if hi is None:
            return None, None
    for _ in range(30):
        mid = 0.5 * (lo + hi)
        if clearance(mid) < CONTACT_EPS:
            hi = mid
        else:
            lo = mid
    settled = _translated(box, -lo * up)
    support = [s for s in obstacles
               if boundary_distance(settled, s) < 2.0 * CONTACT_EPS]
    return settled, support


def _com_supported(com, support) -> bool:
    """Static stability proxy: the center of mass projects into some
    contact solid's horizontal footprint."""
    for solid in support:
        corners = solid.corners()
        if (corners[:, 0].min() <= com[0] <= corners[:, 0].max()
                and corners[:, 1].min() <= com[1] <= corners[:, 1].max()):
            return True
    return False


# ---------------------------------------------------------------------------
# status checking
# ---------------------------------------------------------------------------

def _find_call(node, names):
    if isinstance(node, Call):
        if node.name in names:
            return node
        for arg in node.args:
            found = _find_call(arg, names)
            if found is not None:
                return found
    return None


def _answer_regions(scene, answer):
    regions = []
    if answer.kind == "slots":
        regions.extend(scene.slot(sid).region for sid in answer.members)
    elif answer.kind == "spaces":
        regions.extend(sp.box for sp in answer.members)
    return regions


def check_status(task, final_scene: SceneGraph, grasped_id: str | None = None,
                 placed_id: str | None = None) -> Status:
    """Grade a finished episode against the task's answer set.

    `task` needs .action, .program, .answer, and .alt_answer (a Binding or
    TaskInstance). Distance-precise programs are graded by re-measuring the
    placed distance within 3 cm; orientation goals within 10 degrees;
    everything else by the placed center lying in an answer region.
    """
    answers = [task.answer] + ([task.alt_answer] if task.alt_answer else [])
    if task.action == "pick":
        ids = {i for a in answers for i in a.ids()}
        if grasped_id in ids:
            return Status(True)
        return Status(False, "wrong_object")

    if placed_id is None:
        return Status(False, "wrong_object")
    book = final_scene.object(placed_id)
    goal = task.answer.goal or {}
    if "tilt_deg" in goal:
        delta = abs(book_tilt_deg(book) - float(goal["tilt_deg"]))
        if delta > STATUS_ANGLE_TOL_DEG + 1e-9:
            return Status(False, "tilt_off", delta)
    elif goal.get("pose_class"):
        if book_pose_class(book) != goal["pose_class"]:
            return Status(False, "tilt_off")

    ast = parse_program(task.program)
    precise = _find_call(ast, {"filterDistEqualTo", "filterDistRange"})
    if precise is not None:
        ev = _Evaluator(final_scene, min_visible=0.0)
        ref = ev.resolve_distance_ref(precise.args[-1])
        actual = entity_distance(book, ref)
        if precise.name == "filterDistEqualTo":
            expected = float(precise.args[0])
            delta = abs(actual - expected)
            if delta > STATUS_DISTANCE_TOL + 1e-9:
                return Status(False, "distance_off", delta)
        else:
            lo, hi = float(precise.args[0]), float(precise.args[1])
            if not (lo - STATUS_DISTANCE_TOL - 1e-9 <= actual
                    <= hi + STATUS_DISTANCE_TOL + 1e-9):
                delta = max(lo - actual, actual - hi)
                return Status(False, "distance_off", delta)
        return Status(True)

    regions = []
    for a in answers:
        regions.extend(_answer_regions(final_scene, a))
    for region in regions:
        if region.contains(book.box.center, tol=1e-6):
            return Status(True)
    return Status(False, "outside_area")


# ---------------------------------------------------------------------------
# feasibility certification
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Certificate:
    """A verified-executable goal: replaying it through resolve_goal_pose
    and the matching attempt call is accepted by construction."""

    kind: str  # grasp | place
    target_id: str  # object id (grasp) or slot id (place)
    pixel: tuple
    depth: float
    rotations: dict  # pitch/yaw/roll degrees
    pose: dict  # the certified goal pose, as json

    def to_json(self):
        return {"kind": self.kind, "target_id": self.target_id,
                "pixel": list(self.pixel), "depth": self.depth,
                "rotations": dict(self.rotations), "pose": self.pose}

    @staticmethod
    def from_json(d):
        return Certificate(d["kind"], d["target_id"], tuple(d["pixel"]),
                           d["depth"], dict(d["rotations"]), d["pose"])


def ground_truth_rotation(certificate: Certificate | None, axes) -> dict:
    if certificate is None:
        raise NoCertifiedPose("no certified pose for this target")
    return {a: certificate.rotations[a] for a in axes}


def _orthonormal_from_x(x, z_hint):
    x = np.asarray(x, dtype=float)
    x = x / np.linalg.norm(x)
    z = np.asarray(z_hint, dtype=float)
    z = z - (z @ x) * x
    n = np.linalg.norm(z)
    if n < 1e-6:
        return None
    z = z / n
    y = np.cross(z, x)
    return np.column_stack([x, y, z])


def _certified(state_factory, kind, target_id, target_box, goal_pose,
               target_axes, conform=None):
    """Validate a candidate goal end to end; returns a Certificate or None.

    The candidate is replayed exactly the way a model prediction is: project
    the pointed position into the world view (the first execution
    observation), resolve depth toward the marked target, unproject, apply
    the rotation deltas, dispatch on the target, and run the attempt.
    """
    state = state_factory()
    cam = state.scene.world_camera
    try:
        u, v, _ = cam.project(goal_pose.position)
    except Exception:
        return None
    w, h = cam.resolution
    if not (0 <= u <= w and 0 <= v <= h):
        return None
    try:
        depth = resolve_depth_toward(cam, (u, v), target_box.center)
        deltas = rotation_deltas(state.ee_pose.quat, goal_pose.quat,
                                 target_axes)
    except (NonPositiveDepth, SimError):
        return None
    resolved = resolve_goal_pose((u, v), depth, deltas, cam,
                                 state.ee_pose.quat, target_axes)
    if not point_on_target(target_box, resolved.position):
        return None
    if kind == "grasp":
        verdict = state.attempt_grasp(resolved)
        if not (verdict.ok and verdict.detail["object_id"] == target_id):
            return None
    else:
        verdict = state.attempt_place(resolved)
        if not (verdict.ok and verdict.detail["slot_id"] == target_id):
            return None
    if conform is not None and not conform(state):
        return None
    return Certificate(kind, target_id, (float(u), float(v)), float(depth),
                       deltas, resolved.to_json())


def certify_grasp(scene: SceneGraph, book_id: str,
                  gripper: GripperModel | None = None) -> Certificate | None:
    """Search for one acceptable grasp on a book; None when infeasible."""
    gripper = gripper or GripperModel()
    book = scene.object(book_id)
    axes = book.box.pose.matrix
    half = book.box.half_extents
    points = [book.box.center]
    for i in (2, 1):
        m = float(half[i]) - GRASP_EDGE_MARGIN - 0.002
        if m > 0:
            points.append(book.box.center + m * axes[:, i])
            points.append(book.box.center - m * axes[:, i])
    hints = [GLOBAL_UP, axes[:, 2], -axes[:, 2], axes[:, 1], -axes[:, 1]]
    for point in points:
        for sign in (1.0, -1.0):
            closing = sign * axes[:, 0]
            for hint in hints:
                frame = _orthonormal_from_x(closing, hint)
                if frame is None:
                    continue
                pose = Pose(point, quat_from_matrix(frame))
                cert = _certified(
                    lambda: EpisodeState.from_scene(scene, gripper),
                    "grasp", book_id, book.box, pose, axes)
                if cert is not None:
                    return cert
    return None


def _goal_book_quat(held_box, slot, goal: dict | None):
    """Book orientation for a placement: upright in the slot by default,
    or matching an explicit pose-class / tilt goal."""
    lateral = slot.lateral_axis
    depth_axis = slot.region.pose.matrix[:, 1]
    up = np.asarray(GLOBAL_UP, dtype=float)
    goal = goal or {}
    pose_class = goal.get("pose_class", "vertical")
    if pose_class == "flat":
        # cover normal up, spine along the slot; the width axis completes a
        # right-handed frame (lateral x up, not the slot depth axis)
        frame = np.column_stack([up, np.cross(lateral, up), lateral])
    elif pose_class == "tilted":
        tilt = math.radians(float(goal.get("tilt_deg", 30.0)))
        c, s = math.cos(tilt), math.sin(tilt)
        long_axis = c * up + s * lateral
        thick = np.cross(depth_axis, long_axis)
        frame = np.column_stack([thick, depth_axis, long_axis])
    else:
        frame = np.column_stack([lateral, depth_axis, up])
    return quat_from_matrix(frame)


def certify_place(scene: SceneGraph, slot_id: str,
                  goal: dict | None = None,
                  space_box: OrientedBox | None = None,
                  gripper: GripperModel | None = None,
                  conform=None) -> Certificate | None:
    """Search for one acceptable placement of the held book into a slot
    (optionally constrained to one free-space box within it)."""
    gripper = gripper or GripperModel()
    if scene.held_id is None:
        return None
    book = scene.object(scene.held_id)
    slot = scene.slot(slot_id)
    region = space_box if space_box is not None else slot.region
    quat = _goal_book_quat(book.box, slot, goal)
    m = quat_to_matrix(quat)
    half_book = book.box.half_extents
    up = np.asarray(GLOBAL_UP, dtype=float)
    rise = float(np.abs(up @ m) @ half_book)
    base = region.center - (float(region.half_extents[2]) - 1e-4) \
        * region.pose.matrix[:, 2]
    lateral = slot.lateral_axis
    offsets = [0.0]
    free = float(region.half_extents[0]) - float((np.abs(
        lateral @ m) @ half_book))
    if free > 0.01:
        offsets += [0.5 * free, -0.5 * free]
    target_axes = book.box.pose.matrix
    # attempt_place recomposes the grip rotation, so certify the matching
    # gripper orientation rather than the book orientation itself
    grip_quat = quat_mul(_quat_conj(scene.ee_pose.quat), book.box.pose.quat)
    goal_quat = quat_mul(quat, _quat_conj(grip_quat))
    centers = [np.asarray(region.center, dtype=float)]
    for off in offsets:
        centers.append(base + rise * up + 0.003 * up + off * lateral)
    for center in centers:
        pose = Pose(center, goal_quat)
        cert = _certified(
            lambda: EpisodeState.from_scene(scene, gripper),
            "place", slot_id, region, pose, target_axes, conform=conform)
        if cert is not None:
            return cert
    return None


@dataclass(frozen=True)
class _MemberTask:
    """Just enough of a task for check_status: one answer member."""

    action: str
    program: str
    answer: object
    alt_answer: object = None


def certify_answer(scene: SceneGraph, answer, member,
                   gripper: GripperModel | None = None) -> Certificate | None:
    """Certify one member of an answer set: a book id for pick answers, a
    slot id or Space for place answers. Place certificates must also pass
    the task's own grading (distance, tilt, pose class, region), so a
    certified goal is success-complete, not merely acceptable."""
    if answer.kind == "objects":
        return certify_grasp(scene, member, gripper)
    restricted = type(answer)(answer.kind, (member,), answer.goal,
                              answer.program, answer.scene_id)
    task = _MemberTask("place", answer.program, restricted)
    placed = scene.held_id

    def conform(state):
        return check_status(task, state.scene, placed_id=placed).passed

    if answer.kind == "slots":
        return certify_place(scene, member, goal=answer.goal,
                             gripper=gripper, conform=conform)
    return certify_place(scene, member.slot_id, goal=answer.goal,
                         space_box=member.box, gripper=gripper,
                         conform=conform)
