import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from spatialbench.catalog import default_catalog
from spatialbench.evaluator import AnswerSet, Space, free_spaces
from spatialbench.geometry import (
    CameraModel,
    OrientedBox,
    Pose,
    body_pose_facing,
    look_at_pose,
    quat_from_axis_angle,
    quat_from_matrix,
    quat_identity,
    quat_mul,
    quat_to_matrix,
    tilt_angle_deg,
)
from spatialbench.sampler import EGO_CAM_OFFSET, SamplerConfig, sample_shelf, sample_tabletop
from spatialbench.scene import ObjectInstance, SceneGraph, Slot
from spatialbench.sim import (
    Certificate,
    EpisodeState,
    GripperModel,
    NoCertifiedPose,
    apply_rotation_deltas,
    certify_grasp,
    certify_place,
    check_status,
    ground_truth_rotation,
    point_on_target,
    resolve_depth_toward,
    resolve_goal_pose,
    rotation_deltas,
)

CAT = default_catalog()
TABLE_TOP = 0.702


def _book(bid, asset_name, center, quat=None, dims=None, pose_class="upright"):
    asset = CAT[asset_name]
    if dims is None:
        r = asset.dims_cm_range
        dims = tuple((r[k][0] + r[k][1]) / 200.0 for k in ("L", "W", "H"))
    L, W, H = dims
    box = OrientedBox(Pose(center, quat if quat is not None else quat_identity()),
                      [H / 2, W / 2, L / 2])
    return ObjectInstance(bid, asset, box, init_pose_class=pose_class)


def _table():
    box = OrientedBox.axis_aligned([0.0, 0.0, 0.35], [0.70, 0.30, 0.35])
    return ObjectInstance("table", CAT["table"], box,
                          front_axis=np.array([0.0, -1.0, 0.0]))


def _upright_quat():
    # book local x (thickness) along world +y, z (length) up
    m = np.column_stack([[0.0, 1.0, 0.0], [-1.0, 0.0, 0.0], [0.0, 0.0, 1.0]])
    return quat_from_matrix(m)


def _tabletop_scene(books, slots=(), kind="tabletop", held_id=None,
                    extra=()):
    cam = CameraModel(look_at_pose([0.0, -1.6, 1.5], [0.0, 0.0, TABLE_TOP]),
                      60.0, (640, 480))
    ee = body_pose_facing([0.0, -1.1, 1.1], [0.0, 1.0, 0.0])
    return SceneGraph("fixture", 0, kind, "easy",
                      [_table()] + list(books) + list(extra), list(slots),
                      "table", body_pose_facing([0, -1.6, 0], [0, 1, 0]),
                      cam, ee, EGO_CAM_OFFSET, held_id)


def _upright_book(bid="book_0", x=0.0, y=0.0, asset="book_medium"):
    r = CAT[asset].dims_cm_range
    L = (r["L"][0] + r["L"][1]) / 200.0
    return _book(bid, asset, [x, y, TABLE_TOP + L / 2], _upright_quat())


def _grasp_goal(book, closing=None, z_axis=(0.0, 0.0, 1.0), point=None):
    x = np.asarray(closing if closing is not None else book.cover_normal,
                   dtype=float)
    z = np.asarray(z_axis, dtype=float)
    z = z - (z @ x) * x
    z = z / np.linalg.norm(z)
    y = np.cross(z, x)
    quat = quat_from_matrix(np.column_stack([x, y, z]))
    p = book.box.center if point is None else np.asarray(point, dtype=float)
    return Pose(p, quat)


# ---------------------------------------------------------------------------
# rotation deltas
# ---------------------------------------------------------------------------

def test_zero_deltas_keep_rotation():
    q = quat_from_axis_angle([0, 0, 1], 0.3)
    axes = np.eye(3)
    assert np.allclose(apply_rotation_deltas(q, {}, axes), q)


def test_apply_rotation_deltas_single_axis():
    axes = np.eye(3)
    q = apply_rotation_deltas(quat_identity(), {"yaw": 90.0}, axes)
    m = quat_to_matrix(q)
    assert np.allclose(m @ [1, 0, 0], [0, 1, 0], atol=1e-12)


_angles = st.floats(min_value=-179.0, max_value=179.0)


@settings(max_examples=150, deadline=None)
@given(_angles, _angles, _angles, _angles, st.floats(0.1, 3.0),
       st.floats(0.1, 3.0))
def test_rotation_deltas_round_trip(p, y, r, axis_deg, ax, ay):
    axis = np.array([ax, ay, 1.0])
    axis = axis / np.linalg.norm(axis)
    base = quat_from_axis_angle(axis, math.radians(axis_deg))
    frame = quat_to_matrix(quat_from_axis_angle([ay, 1.0, ax], 0.7))
    target = apply_rotation_deltas(base, {"pitch": p, "yaw": y, "roll": r},
                                   frame)
    deltas = rotation_deltas(base, target, frame)
    again = apply_rotation_deltas(base, deltas, frame)
    err = min(np.linalg.norm(again - target), np.linalg.norm(again + target))
    assert err < 1e-6


def test_resolve_goal_pose_unprojects_principal_point():
    cam = CameraModel(look_at_pose([0, -1, 1], [0, 0, 1]), 60.0, (640, 480))
    pose = resolve_goal_pose((320.0, 240.0), 0.8, {}, cam, quat_identity(),
                             np.eye(3))
    expected = cam.pose.transform_point([0, 0, 0.8])
    assert np.allclose(pose.position, expected, atol=1e-12)
    assert np.allclose(pose.quat, quat_identity())


def test_resolve_depth_toward_recovers_target_center():
    cam = CameraModel(look_at_pose([0.2, -1.4, 1.2], [0, 0, 0.8]),
                      55.0, (640, 480))
    center = np.array([0.11, 0.23, 0.87])
    u, v, _ = cam.project(center)
    depth = resolve_depth_toward(cam, (u, v), center)
    recovered = resolve_goal_pose((u, v), depth, {}, cam, quat_identity(),
                                  np.eye(3)).position
    assert np.linalg.norm(recovered - center) < 1e-9


def test_resolve_depth_toward_off_ray_is_closest_approach():
    cam = CameraModel(look_at_pose([0, -1.5, 1.2], [0, 0, 0.8]),
                      60.0, (640, 480))
    center = np.array([0.3, 0.1, 0.9])
    depth = resolve_depth_toward(cam, (100.0, 100.0), center)
    point = resolve_goal_pose((100.0, 100.0), depth, {}, cam,
                              quat_identity(), np.eye(3)).position
    for other in (0.9 * depth, 1.1 * depth):
        q = resolve_goal_pose((100.0, 100.0), other, {}, cam,
                              quat_identity(), np.eye(3)).position
        assert (np.linalg.norm(point - center)
                <= np.linalg.norm(q - center) + 1e-12)


def test_ground_truth_rotation():
    cert = Certificate("grasp", "book_0", (1.0, 2.0), 0.5,
                       {"pitch": 3.0, "yaw": -4.0, "roll": 5.0}, {})
    assert ground_truth_rotation(cert, ("pitch", "roll")) == {
        "pitch": 3.0, "roll": 5.0}
    assert ground_truth_rotation(cert, ()) == {}
    with pytest.raises(NoCertifiedPose):
        ground_truth_rotation(None, ("pitch",))


# ---------------------------------------------------------------------------
# moving
# ---------------------------------------------------------------------------

def test_move_in_open_space():
    scene = _tabletop_scene([_upright_book()])
    state = EpisodeState.from_scene(scene)
    v = state.attempt_move(Pose([0.4, -0.8, 1.2], quat_identity()))
    assert v.ok
    assert np.allclose(state.gripper.tcp_point(state.ee_pose),
                       [0.4, -0.8, 1.2])


def test_move_into_table_blocked():
    scene = _tabletop_scene([_upright_book()])
    state = EpisodeState.from_scene(scene)
    before = state.ee_pose
    v = state.attempt_move(Pose([0.0, 0.16, 0.35], quat_identity()))
    assert not v.ok and v.reason == "collision"
    assert state.ee_pose is before


def test_move_grazing_one_millimeter_penetration_blocked():
    book = _upright_book()
    scene = _tabletop_scene([book])
    state = EpisodeState.from_scene(scene)
    top = book.box.center[2] + book.box.half_extents[2]
    # wrist body spans tcp z + [0.05, 0.15]; sink it 1 mm into the book top
    goal_z = top - 0.051
    v = state.attempt_move(Pose([book.box.center[0], book.box.center[1],
                                 goal_z], quat_identity()))
    assert not v.ok and v.reason == "collision"
    v = state.attempt_move(Pose([book.box.center[0], book.box.center[1],
                                 top - 0.045], quat_identity()))
    assert v.ok


# ---------------------------------------------------------------------------
# grasping
# ---------------------------------------------------------------------------

def test_grasp_upright_medium_book_accepted():
    book = _upright_book()
    scene = _tabletop_scene([book])
    state = EpisodeState.from_scene(scene)
    v = state.attempt_grasp(_grasp_goal(book))
    assert v.ok and v.detail["object_id"] == "book_0"
    assert state.holding == "book_0"
    assert state.scene.held_id == "book_0"
    held = state.held_box_at(state.ee_pose)
    assert np.allclose(held.center, book.box.center, atol=1e-9)


def test_grasp_large_book_along_length_axis_too_thick():
    book = _upright_book(asset="book_large")
    scene = _tabletop_scene([book])
    state = EpisodeState.from_scene(scene)
    # close along the long cover edge: the 25.4-30.5 cm span between the
    # fingers far exceeds the 8 cm gap
    goal = _grasp_goal(book, closing=book.box.pose.matrix[:, 2],
                       z_axis=book.cover_normal)
    v = state.attempt_grasp(goal)
    assert not v.ok and v.reason == "too_thick"


def test_grasp_over_empty_table_no_target():
    scene = _tabletop_scene([_upright_book(x=0.4)])
    state = EpisodeState.from_scene(scene)
    v = state.attempt_grasp(Pose([-0.4, 0.0, TABLE_TOP + 0.1],
                                 quat_identity()))
    assert not v.ok and v.reason == "no_target"
    assert state.holding is None


def test_grasp_misaligned_closing_axis_rejected():
    book = _upright_book()
    scene = _tabletop_scene([book])
    state = EpisodeState.from_scene(scene)
    axes = book.box.pose.matrix
    closing = math.cos(math.radians(30)) * axes[:, 0] \
        + math.sin(math.radians(30)) * axes[:, 1]
    v = state.attempt_grasp(_grasp_goal(book, closing=closing))
    assert not v.ok and v.reason == "bad_alignment"


def test_grasp_alignment_tolerance_boundary():
    book = _upright_book()
    scene = _tabletop_scene([book])
    axes = book.box.pose.matrix
    for deg, ok in ((14.0, True), (16.0, False)):
        closing = math.cos(math.radians(deg)) * axes[:, 0] \
            + math.sin(math.radians(deg)) * axes[:, 1]
        state = EpisodeState.from_scene(scene)
        v = state.attempt_grasp(_grasp_goal(book, closing=closing))
        assert v.ok is ok, deg


def test_grasp_too_close_to_edge_rejected():
    book = _upright_book()
    scene = _tabletop_scene([book])
    state = EpisodeState.from_scene(scene)
    point = book.box.center \
        + (book.box.half_extents[1] - 0.005) * book.box.pose.matrix[:, 1]
    v = state.attempt_grasp(_grasp_goal(book, point=point))
    assert not v.ok and v.reason == "edge"


def test_grasp_between_two_books_ambiguous_collision():
    a = _upright_book("book_0", y=0.0)
    gap = 0.008
    offset = 2 * a.box.half_extents[0] + gap
    b = _upright_book("book_1", y=offset)
    scene = _tabletop_scene([a, b])
    state = EpisodeState.from_scene(scene)
    mid = a.box.center + (a.box.half_extents[0] + gap / 2) * np.array([0, 1, 0])
    v = state.attempt_grasp(_grasp_goal(a, point=mid))
    assert not v.ok and v.reason == "collision"


def test_grasp_acceptance_monotone_in_clearance():
    book = _upright_book()
    scene = _tabletop_scene([book])
    goal = _grasp_goal(book)
    accepted = {}
    for c in (0.005, 0.004, 0.002, 0.001):
        state = EpisodeState.from_scene(scene, GripperModel(finger_clearance=c))
        accepted[c] = state.attempt_grasp(goal).ok
    assert accepted[0.005]
    assert all(accepted.values())


def test_rejected_grasp_leaves_scene_untouched():
    book = _upright_book()
    scene = _tabletop_scene([book])
    state = EpisodeState.from_scene(scene)
    before = state.scene.canonical_bytes()
    version = state.scene.version
    state.attempt_grasp(Pose([-0.5, 0.0, TABLE_TOP + 0.1], quat_identity()))
    assert state.scene.canonical_bytes() == before
    assert state.scene.version == version


# ---------------------------------------------------------------------------
# placing and settling
# ---------------------------------------------------------------------------

def _shelf_fixture(occupants=(), wall_y=None, board_half_x=0.30):
    """A single board with one slot region above it plus a held book."""
    board = OrientedBox.axis_aligned([0.0, 0.0, 0.99], [board_half_x, 0.15, 0.01])
    post_l = OrientedBox.axis_aligned([-0.40, 0.0, 0.7], [0.02, 0.15, 0.7])
    post_r = OrientedBox.axis_aligned([0.40, 0.0, 0.7], [0.02, 0.15, 0.7])
    parts = [board, post_l, post_r]
    if wall_y is not None:
        parts.append(OrientedBox.axis_aligned([0.0, wall_y, 0.9],
                                              [0.4, 0.01, 0.6]))
    shelf = ObjectInstance("shelf", CAT["shelf_1"],
                           OrientedBox.axis_aligned([0.0, 0.0, 0.7],
                                                    [0.35, 0.16, 0.71]),
                           front_axis=np.array([0.0, -1.0, 0.0]),
                           components=parts)
    slot = Slot("slot_1_1", 1, 1,
                OrientedBox.axis_aligned([0.0, 0.0, 1.16], [0.30, 0.14, 0.16]),
                occupant_ids=[o.id for o in occupants])
    cam = CameraModel(look_at_pose([0.0, -1.6, 1.3], [0.0, 0.0, 1.1]),
                      60.0, (640, 480))
    ee = body_pose_facing([0.0, -1.2, 1.25], [0.0, 1.0, 0.0])
    r = CAT["book_medium"].dims_cm_range
    L = (r["L"][0] + r["L"][1]) / 200.0
    held_center = ee.transform_point([0.0, 0.16, -L / 2 + 0.02])
    held = _book("held_book", "book_medium", held_center,
                 quat_mul(ee.quat, _upright_quat()))
    viewer = body_pose_facing([0, -1.6, 0], [0, 1, 0])
    return SceneGraph("shelf-fixture", 0, "shelf", "easy",
                      [shelf, held] + list(occupants), [slot], "shelf",
                      viewer, cam, ee, EGO_CAM_OFFSET, "held_book")


def _place_goal_quat(state):
    """EE orientation that puts the held book upright, axes world aligned."""
    from spatialbench.sim import _quat_conj
    return quat_mul(_upright_quat(), _quat_conj(state.grip_local.quat))


def test_place_upright_in_empty_slot_settles_on_board():
    scene = _shelf_fixture()
    state = EpisodeState.from_scene(scene)
    half_l = scene.object("held_book").box.half_extents[2]
    drop_from = 1.0 + half_l + 0.02
    v = state.attempt_place(Pose([0.0, 0.0, drop_from],
                                 _place_goal_quat(state)))
    assert v.ok and v.detail["slot_id"] == "slot_1_1"
    settled = v.detail["settled"]
    # dropped the extra 2 cm to contact, within the resting gap
    assert settled.center[2] == pytest.approx(1.0 + half_l, abs=2e-3)
    assert state.holding is None
    assert state.scene.held_id is None
    assert "held_book" in state.scene.slot("slot_1_1").occupant_ids
    assert state.scene.version == scene.version + 1


def test_place_outside_region_rejected():
    scene = _shelf_fixture()
    state = EpisodeState.from_scene(scene)
    # lands on the board but straddles the slot region's lateral edge
    v = state.attempt_place(Pose([0.26, 0.0, 1.15], _place_goal_quat(state)))
    assert not v.ok and v.reason == "outside_region"


def test_place_onto_occupant_overlap():
    r = CAT["book_medium"].dims_cm_range
    half_l = (r["L"][0] + r["L"][1]) / 400.0
    occ = _book("occ", "book_medium", [0.0, 0.0, 1.0 + half_l + 0.002],
                _upright_quat())
    scene = _shelf_fixture(occupants=[occ])
    state = EpisodeState.from_scene(scene)
    v = state.attempt_place(Pose([0.0, 0.0, 1.12], _place_goal_quat(state)))
    assert not v.ok and v.reason == "overlap"


def test_place_com_overhang_unstable():
    scene = _shelf_fixture(board_half_x=0.04)
    state = EpisodeState.from_scene(scene)
    held = scene.object("held_book")
    half_l = held.box.half_extents[2]
    # flat pose overhanging the narrow board: COM beyond the support edge
    flat = np.column_stack([[0.0, 0.0, 1.0], [0.0, 1.0, 0.0],
                            [-1.0, 0.0, 0.0]])
    from spatialbench.sim import _quat_conj
    quat = quat_mul(quat_from_matrix(flat), _quat_conj(state.grip_local.quat))
    v = state.attempt_place(Pose([0.04 + half_l - 0.01, 0.0, 1.1], quat))
    assert not v.ok and v.reason == "unstable"


def test_place_nothing_below_unstable():
    scene = _shelf_fixture()
    state = EpisodeState.from_scene(scene)
    # beyond the posts: the drop budget finds no contact below
    v = state.attempt_place(Pose([0.5, 0.0, 1.2], _place_goal_quat(state)))
    assert not v.ok
    assert v.reason in ("unstable", "outside_region")


def test_place_blocked_retreat():
    scene = _shelf_fixture(wall_y=-0.25)
    state = EpisodeState.from_scene(scene)
    half_l = scene.object("held_book").box.half_extents[2]
    v = state.attempt_place(Pose([0.0, 0.0, 1.0 + half_l + 0.01],
                                 _place_goal_quat(state)))
    assert not v.ok and v.reason == "no_retreat"


def test_rejected_place_leaves_scene_untouched():
    scene = _shelf_fixture()
    state = EpisodeState.from_scene(scene)
    before = state.scene.canonical_bytes()
    state.attempt_place(Pose([0.45, 0.0, 1.25], _place_goal_quat(state)))
    assert state.scene.canonical_bytes() == before
    assert state.scene.version == scene.version


# ---------------------------------------------------------------------------
# status checking
# ---------------------------------------------------------------------------

class _Task:
    def __init__(self, action, program, answer, alt_answer=None):
        self.action = action
        self.program = program
        self.answer = answer
        self.alt_answer = alt_answer


def _objects_answer(ids, program):
    return AnswerSet("objects", list(ids), None, program, "fixture")


def test_check_status_pick_membership():
    scene = _tabletop_scene([_upright_book("book_0"), _upright_book("book_1",
                                                                    x=0.3)])
    prog = "pick(filterBook(TABLE))"
    task = _Task("pick", prog, _objects_answer(["book_0"], prog))
    assert check_status(task, scene, grasped_id="book_0").passed
    s = check_status(task, scene, grasped_id="book_1")
    assert not s.passed and s.reason == "wrong_object"


def test_check_status_pick_alt_answer_union():
    scene = _tabletop_scene([_upright_book("book_0"), _upright_book("book_1",
                                                                    x=0.3)])
    prog = "pick(filterBook(TABLE))"
    task = _Task("pick", prog, _objects_answer(["book_0"], prog),
                 _objects_answer(["book_1"], prog))
    assert check_status(task, scene, grasped_id="book_1").passed


def _placed_scene(book_center, quat=None):
    placed = _book("placed", "book_medium", book_center,
                   quat if quat is not None else _upright_quat())
    clock = ObjectInstance("near_0", CAT["alarm_clock"],
                           OrientedBox.axis_aligned([-0.5, 0.0, TABLE_TOP + 0.085],
                                                    [0.065, 0.035, 0.085]),
                           front_axis=np.array([0.0, -1.0, 0.0]))
    return _tabletop_scene([placed], extra=[clock])


def test_check_status_distance_tolerance_boundaries():
    from spatialbench.evaluator import entity_distance, _Evaluator
    from spatialbench.dsl import Symbol

    scene = _placed_scene([0.2, 0.0, TABLE_TOP + 0.12])
    ev = _Evaluator(scene, min_visible=0.0)
    actual = entity_distance(scene.object("placed"),
                             ev.resolve_distance_ref(Symbol("alarm_clock")))
    goal = AnswerSet("spaces", [], None, "", "fixture")
    for delta, ok in ((0.029, True), (0.031, False)):
        prog = (f"place(filterDistEqualTo({round(actual + delta, 4)}, "
                "filterSpace(SHELF), alarm_clock))")
        task = _Task("place", prog,
                     AnswerSet("spaces", [], None, prog, "fixture"))
        s = check_status(task, scene, placed_id="placed")
        assert s.passed is ok, delta
        if not ok:
            assert s.reason == "distance_off"


def test_check_status_tilt_tolerance_boundaries():
    for delta, ok in ((9.9, True), (10.1, False)):
        tilt = math.radians(30.0)
        c, s = math.cos(tilt), math.sin(tilt)
        frame = np.column_stack([[0.0, 1.0, 0.0],
                                 np.cross([c, 0, s], [0, 1, 0]) * -1,
                                 [s, 0.0, c]])
        frame[:, 1] = np.cross(frame[:, 2], frame[:, 0])
        quat = quat_from_matrix(frame)
        scene = _placed_scene([0.2, 0.0, TABLE_TOP + 0.2], quat=quat)
        assert tilt_angle_deg(scene.object("placed").up_axis) == pytest.approx(
            30.0, abs=1e-6)
        prog = "placeOriTiltDegree(30, filterSpace(SHELF))"
        region = OrientedBox.axis_aligned([0.2, 0.0, TABLE_TOP + 0.2],
                                          [0.2, 0.2, 0.2])
        answer = AnswerSet("spaces", [Space("slot", region)],
                           {"tilt_deg": 30.0 + delta}, prog, "fixture")
        status = check_status(_Task("place", prog, answer), scene,
                              placed_id="placed")
        assert status.passed is ok, delta
        if not ok:
            assert status.reason == "tilt_off"


def test_check_status_pose_class_and_area():
    scene = _placed_scene([0.2, 0.0, TABLE_TOP + 0.12])
    slot = Slot("slot_1_1", 1, 1,
                OrientedBox.axis_aligned([0.2, 0.0, TABLE_TOP + 0.15],
                                         [0.15, 0.14, 0.15]))
    scene = SceneGraph("fixture2", 0, "shelf", "easy", scene.objects, [slot],
                       "table", scene.viewer_pose, scene.world_camera,
                       scene.ee_pose, scene.ego_cam_offset, None)
    prog = "place(filterSlot(SHELF))"
    good = AnswerSet("slots", ["slot_1_1"], {"pose_class": "vertical"}, prog,
                     "fixture2")
    assert check_status(_Task("place", prog, good), scene,
                        placed_id="placed").passed
    flat_goal = AnswerSet("slots", ["slot_1_1"], {"pose_class": "flat"}, prog,
                          "fixture2")
    s = check_status(_Task("place", prog, flat_goal), scene,
                     placed_id="placed")
    assert not s.passed and s.reason == "tilt_off"
    far = Slot("slot_2_1", 2, 1,
               OrientedBox.axis_aligned([-0.4, 0.0, TABLE_TOP + 0.15],
                                        [0.1, 0.1, 0.15]))
    scene2 = SceneGraph("fixture3", 0, "shelf", "easy", scene.objects, [far],
                        "table", scene.viewer_pose, scene.world_camera,
                        scene.ee_pose, scene.ego_cam_offset, None)
    miss = AnswerSet("slots", ["slot_2_1"], None, prog, "fixture3")
    s = check_status(_Task("place", prog, miss), scene2, placed_id="placed")
    assert not s.passed and s.reason == "outside_area"


# ---------------------------------------------------------------------------
# certification closed loop
# ---------------------------------------------------------------------------

def _replay(scene, cert, target_box):
    state = EpisodeState.from_scene(scene)
    cam = scene.world_camera
    depth = resolve_depth_toward(cam, cert.pixel, target_box.center)
    assert depth == pytest.approx(cert.depth, abs=1e-9)
    axes = (scene.object(cert.target_id).box.pose.matrix
            if cert.kind == "grasp"
            else scene.object(scene.held_id).box.pose.matrix)
    goal = resolve_goal_pose(cert.pixel, depth, cert.rotations, cam,
                             state.ee_pose.quat, axes)
    assert point_on_target(target_box, goal.position)
    if cert.kind == "grasp":
        v = state.attempt_grasp(goal)
        assert v.ok and v.detail["object_id"] == cert.target_id
    else:
        v = state.attempt_place(goal)
        assert v.ok and v.detail["slot_id"] == cert.target_id


def test_certified_grasps_replay_accepted():
    scene = sample_tabletop(SamplerConfig(seed=41, kind="tabletop",
                                          difficulty="medium"))
    certified = 0
    for book in scene.books():
        cert = certify_grasp(scene, book.id)
        if cert is None:
            continue
        certified += 1
        _replay(scene, cert, book.box)
    assert certified >= 1


def test_certified_places_replay_accepted():
    scene = sample_shelf(SamplerConfig(seed=42, kind="shelf",
                                       difficulty="medium"))
    certified = 0
    for slot in scene.slots:
        cert = certify_place(scene, slot.id)
        if cert is None:
            continue
        certified += 1
        _replay(scene, cert, slot.region)
    assert certified >= len(scene.slots) // 2


def test_certify_space_placement():
    scene = sample_shelf(SamplerConfig(seed=43, kind="shelf",
                                       difficulty="easy"))
    done = 0
    for slot in scene.slots:
        for space in free_spaces(scene, slot, 0.03):
            cert = certify_place(scene, slot.id, space_box=space.box)
            if cert is not None:
                _replay(scene, cert, space.box)
                done += 1
                break
        if done:
            break
    assert done == 1


def test_certificate_json_round_trip():
    cert = Certificate("place", "slot_1_1", (12.5, 40.0), 1.25,
                       {"pitch": 1.0, "yaw": 2.0, "roll": 3.0},
                       {"pos": [0, 0, 1], "quat": [1, 0, 0, 0]})
    again = Certificate.from_json(cert.to_json())
    assert again == cert
