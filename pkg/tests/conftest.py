import math

import numpy as np
import pytest

from spatialbench.catalog import default_catalog
from spatialbench.geometry import (
    CameraModel,
    OrientedBox,
    Pose,
    body_pose_facing,
    look_at_pose,
    quat_from_axis_angle,
    quat_identity,
    quat_mul,
)
from spatialbench.scene import CONTACT_EPS, ObjectInstance, SceneGraph, Slot

TABLE_TOP_Z = 0.70 + 2 * CONTACT_EPS


def upright_book_box(dims_m, center_xy, bottom_z, yaw_deg=0.0) -> OrientedBox:
    """Standing book: long edge vertical, cover normal horizontal."""
    L, W, H = dims_m
    q = quat_from_axis_angle([0, 0, 1], math.radians(yaw_deg))
    return OrientedBox(Pose([center_xy[0], center_xy[1], bottom_z + L / 2], q),
                       [H / 2, W / 2, L / 2])


def flat_book_box(dims_m, center_xy, bottom_z, yaw_deg=0.0) -> OrientedBox:
    """Lying book: cover normal vertical (local x up after a -90 deg pitch)."""
    L, W, H = dims_m
    q = quat_mul(quat_from_axis_angle([0, 0, 1], math.radians(yaw_deg)),
                 quat_from_axis_angle([0, 1, 0], math.radians(90.0)))
    return OrientedBox(Pose([center_xy[0], center_xy[1], bottom_z + H / 2], q),
                       [H / 2, W / 2, L / 2])


def ref_box(dims_m, center_xy, bottom_z, yaw_deg=0.0) -> OrientedBox:
    """Reference object: depth L along -Y at yaw 0, width W along X, height H."""
    L, W, H = dims_m
    q = quat_from_axis_angle([0, 0, 1], math.radians(yaw_deg))
    return OrientedBox(Pose([center_xy[0], center_xy[1], bottom_z + H / 2], q),
                       [W / 2, L / 2, H / 2])


def make_tabletop_scene(book_boxes, extra_objects=(), scene_id="fixture",
                        difficulty="easy", camera=None) -> SceneGraph:
    """Hand-built tabletop scene: table at origin, viewer on the -Y side."""
    cat = default_catalog()
    objects = [
        ObjectInstance("floor", cat["floor"],
                       OrientedBox.axis_aligned([0, 0, -0.025],
                                                [10.0, 10.0, 0.025])),
        ObjectInstance("table", cat["table"],
                       OrientedBox(Pose([0, 0, CONTACT_EPS + 0.35],
                                        quat_identity()),
                                   [0.70, 0.30, 0.35]),
                       front_axis=np.array([0.0, -1.0, 0.0])),
    ]
    for i, box in enumerate(book_boxes):
        asset = cat["book_medium"]
        objects.append(ObjectInstance(f"book_{i}", asset, box,
                                      init_pose_class="upright",
                                      label="book"))
    objects.extend(extra_objects)
    cam = camera or CameraModel(look_at_pose([0, -1.6, TABLE_TOP_Z + 0.8],
                                             [0, 0, TABLE_TOP_Z]),
                                60.0, (640, 480))
    return SceneGraph(
        scene_id=scene_id, seed=0, kind="tabletop", difficulty=difficulty,
        objects=objects, slots=[], anchor_id="table",
        viewer_pose=body_pose_facing([0, -1.0, 0], [0, 1, 0]),
        world_camera=cam,
        ee_pose=body_pose_facing([0, -0.9, TABLE_TOP_Z + 0.4], [0, 1, 0]),
        ego_cam_offset=Pose([0, 0.05, 0.05],
                            look_at_pose([0, 0, 0], [0, 1, 0]).quat),
        held_id=None)


@pytest.fixture(scope="session")
def catalog():
    return default_catalog()
