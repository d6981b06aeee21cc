"""Frames, poses, oriented boxes, relations, and camera math.

Conventions used throughout the package:

* right-handed world coordinates, +Z is the global up axis, units are meters;
* quaternions are stored as (w, x, y, z) and kept unit-norm;
* cameras look along their local +Z axis, with +X toward increasing pixel u
  and +Y toward increasing pixel v (image rows grow downward);
* "right" of a reference frame is cross(forward, up), so "left of the viewer"
  is the viewer's own left.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

GLOBAL_UP = np.array([0.0, 0.0, 1.0])
GLOBAL_FORWARD = np.array([0.0, 1.0, 0.0])

_ORTHO_TOL = 1e-9


class GeometryError(Exception):
    pass


class IntrinsicFrameUnavailable(GeometryError):
    """Intrinsic frame requested for an object without a front face."""


class DegenerateBearing(GeometryError):
    """Clock position undefined: target is on the frame's vertical axis."""


class BehindCamera(GeometryError):
    """All box corners have non-positive camera-space depth."""


class OutOfImage(GeometryError):
    pass


class NonPositiveDepth(GeometryError):
    pass


def _vec(x) -> np.ndarray:
    v = np.asarray(x, dtype=float)
    if v.shape != (3,):
        raise ValueError(f"expected 3-vector, got shape {v.shape}")
    return v


def normalize(v) -> np.ndarray:
    v = _vec(v)
    n = np.linalg.norm(v)
    if n == 0.0:
        raise ValueError("cannot normalize zero vector")
    return v / n


# ---------------------------------------------------------------------------
# quaternions (w, x, y, z)
# ---------------------------------------------------------------------------

def quat_identity() -> np.ndarray:
    return np.array([1.0, 0.0, 0.0, 0.0])


def quat_normalize(q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("zero quaternion")
    q = q / n
    return q if q[0] >= 0 else -q


def quat_mul(a, b) -> np.ndarray:
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array([
        aw * bw - ax * bx - ay * by - az * bz,
        aw * bx + ax * bw + ay * bz - az * by,
        aw * by - ax * bz + ay * bw + az * bx,
        aw * bz + ax * by - ay * bx + az * bw,
    ])


def quat_conj(q) -> np.ndarray:
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_from_axis_angle(axis, angle_rad: float) -> np.ndarray:
    axis = normalize(axis)
    half = 0.5 * angle_rad
    return quat_normalize(np.concatenate([[math.cos(half)], math.sin(half) * axis]))


def quat_to_matrix(q) -> np.ndarray:
    w, x, y, z = quat_normalize(q)
    return np.array([
        [1 - 2 * (y * y + z * z), 2 * (x * y - z * w), 2 * (x * z + y * w)],
        [2 * (x * y + z * w), 1 - 2 * (x * x + z * z), 2 * (y * z - x * w)],
        [2 * (x * z - y * w), 2 * (y * z + x * w), 1 - 2 * (x * x + y * y)],
    ])


def quat_from_matrix(m) -> np.ndarray:
    m = np.asarray(m, dtype=float)
    t = np.trace(m)
    if t > 0:
        s = math.sqrt(t + 1.0) * 2
        q = np.array([0.25 * s,
                      (m[2, 1] - m[1, 2]) / s,
                      (m[0, 2] - m[2, 0]) / s,
                      (m[1, 0] - m[0, 1]) / s])
    else:
        i = int(np.argmax(np.diag(m)))
        j, k = (i + 1) % 3, (i + 2) % 3
        s = math.sqrt(max(1.0 + m[i, i] - m[j, j] - m[k, k], 0.0)) * 2
        q = np.empty(4)
        q[0] = (m[k, j] - m[j, k]) / s
        q[1 + i] = 0.25 * s
        q[1 + j] = (m[j, i] + m[i, j]) / s
        q[1 + k] = (m[k, i] + m[i, k]) / s
    return quat_normalize(q)


def quat_rotate(q, v) -> np.ndarray:
    return quat_to_matrix(q) @ _vec(v)


def euler_xyz_to_quat(pitch_deg: float, yaw_deg: float, roll_deg: float) -> np.ndarray:
    """Intrinsic rotation Rx(pitch) * Ry(yaw) * Rz(roll), angles in degrees."""
    qx = quat_from_axis_angle([1, 0, 0], math.radians(pitch_deg))
    qy = quat_from_axis_angle([0, 1, 0], math.radians(yaw_deg))
    qz = quat_from_axis_angle([0, 0, 1], math.radians(roll_deg))
    return quat_mul(quat_mul(qx, qy), qz)


# ---------------------------------------------------------------------------
# poses
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class Pose:
    """Rigid transform from a local frame to world."""

    position: np.ndarray
    quat: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "position", _vec(self.position))
        q = np.asarray(self.quat, dtype=float)
        if abs(np.linalg.norm(q) - 1.0) > 1e-9:
            raise ValueError("quaternion must be unit norm within 1e-9")
        object.__setattr__(self, "quat", quat_normalize(q))
        object.__setattr__(self, "_matrix", quat_to_matrix(self.quat))

    @staticmethod
    def identity() -> "Pose":
        return Pose(np.zeros(3), quat_identity())

    @property
    def matrix(self) -> np.ndarray:
        return self._matrix

    def transform_point(self, p) -> np.ndarray:
        return self.matrix @ _vec(p) + self.position

    def inverse_transform_point(self, p) -> np.ndarray:
        return self.matrix.T @ (_vec(p) - self.position)

    def rotate(self, v) -> np.ndarray:
        return self.matrix @ _vec(v)

    def compose(self, other: "Pose") -> "Pose":
        """self ∘ other: apply `other` in this pose's local frame."""
        return Pose(self.transform_point(other.position),
                    quat_mul(self.quat, other.quat))

    def inverse(self) -> "Pose":
        qi = quat_conj(self.quat)
        return Pose(-(quat_to_matrix(qi) @ self.position), quat_normalize(qi))

    def to_json(self) -> dict:
        return {"pos": [float(v) for v in self.position],
                "quat": [float(v) for v in self.quat]}

    @staticmethod
    def from_json(d: dict) -> "Pose":
        return Pose(np.array(d["pos"], dtype=float), np.array(d["quat"], dtype=float))


def body_pose_facing(position, forward) -> Pose:
    """Body pose (robot base / viewer): local +Y faces `forward`, +Z stays up."""
    f = _vec(forward).copy()
    f[2] = 0.0
    f = normalize(f)
    r = np.cross(f, GLOBAL_UP)
    m = np.column_stack([r, f, GLOBAL_UP])
    return Pose(position, quat_from_matrix(m))


def look_at_pose(position, target, up=GLOBAL_UP) -> Pose:
    """Camera pose at `position` with +Z toward `target` and +Y pointing down-image."""
    position = _vec(position)
    f = normalize(_vec(target) - position)
    r = np.cross(f, _vec(up))
    if np.linalg.norm(r) < 1e-9:
        r = np.cross(f, GLOBAL_FORWARD)
    r = normalize(r)
    d = np.cross(f, r)
    m = np.column_stack([r, d, f])
    return Pose(position, quat_from_matrix(m))


# ---------------------------------------------------------------------------
# reference frames
# ---------------------------------------------------------------------------

FRAME_KINDS = ("relative", "intrinsic", "absolute")


@dataclass(frozen=True)
class ReferenceFrame:
    kind: str
    origin: np.ndarray
    forward: np.ndarray
    up: np.ndarray
    right: np.ndarray
    anchor_object_id: str | None = None

    def __post_init__(self):
        if self.kind not in FRAME_KINDS:
            raise ValueError(f"unknown frame kind {self.kind!r}")
        object.__setattr__(self, "origin", _vec(self.origin))
        for name in ("forward", "up", "right"):
            object.__setattr__(self, name, _vec(getattr(self, name)))
        f, u, r = self.forward, self.up, self.right
        for a in (f, u, r):
            if abs(np.linalg.norm(a) - 1.0) > _ORTHO_TOL * 10:
                raise ValueError("frame axes must be unit length")
        if max(abs(f @ u), abs(f @ r), abs(u @ r)) > 1e-8:
            raise ValueError("frame axes must be orthonormal")
        if np.linalg.norm(np.cross(f, u) - r) > 1e-8:
            raise ValueError("frame must be right-handed with right = forward x up")


def frame_of(kind: str,
             anchor_position=None,
             anchor_front=None,
             anchor_id: str | None = None,
             viewer: Pose | None = None) -> ReferenceFrame:
    """Build a reference frame.

    relative   -- viewer-centered; forward is the horizontal projection of the
                  viewer-to-anchor direction, or the viewer gaze if no anchor.
    intrinsic  -- object-centered; forward is the anchor's annotated front axis
                  (horizontally projected).
    absolute   -- the global axes; origin defaults to the world origin.
    """
    up = GLOBAL_UP
    if kind == "absolute":
        origin = _vec(anchor_position) if anchor_position is not None else np.zeros(3)
        fwd = GLOBAL_FORWARD
        return ReferenceFrame("absolute", origin, fwd, up, np.cross(fwd, up), anchor_id)
    if kind == "intrinsic":
        if anchor_position is None or anchor_front is None:
            raise IntrinsicFrameUnavailable("intrinsic frame needs an oriented anchor")
        fwd = _vec(anchor_front).copy()
        fwd[2] = 0.0
        if np.linalg.norm(fwd) < 1e-9:
            raise IntrinsicFrameUnavailable("anchor front axis is vertical")
        fwd = normalize(fwd)
        return ReferenceFrame("intrinsic", _vec(anchor_position), fwd, up,
                              np.cross(fwd, up), anchor_id)
    if kind == "relative":
        if viewer is None:
            raise ValueError("relative frame requires a viewer pose")
        if anchor_position is not None:
            d = _vec(anchor_position) - viewer.position
        else:
            d = viewer.rotate(GLOBAL_FORWARD)
        d = d.copy()
        d[2] = 0.0
        if np.linalg.norm(d) < 1e-9:
            d = GLOBAL_FORWARD
        fwd = normalize(d)
        origin = _vec(anchor_position) if anchor_position is not None else viewer.position
        return ReferenceFrame("relative", origin, fwd, up, np.cross(fwd, up), anchor_id)
    raise ValueError(f"unknown frame kind {kind!r}")


RELATIONS = ("left", "right", "front", "behind", "above", "below", "upper", "lower")


def relation_holds(rel: str,
                   frame: ReferenceFrame,
                   target_center,
                   reference_center,
                   reference_id: str | None = None) -> bool:
    """Spatial relation predicate on object centers.

    `behind` flips sign depending on whether the frame is attached to the
    reference object: detached frames read "further along forward", attached
    frames read "further along the opposite of forward". above/below/upper/
    lower always use the global up axis.
    """
    d = _vec(target_center) - _vec(reference_center)
    anchored = (frame.kind == "intrinsic"
                and frame.anchor_object_id is not None
                and reference_id is not None
                and frame.anchor_object_id == reference_id)
    if rel == "left":
        return float(d @ frame.right) < 0.0
    if rel == "right":
        return float(d @ frame.right) > 0.0
    if rel == "behind":
        return float(d @ frame.forward) < 0.0 if anchored else float(d @ frame.forward) > 0.0
    if rel == "front":
        return float(d @ frame.forward) > 0.0 if anchored else float(d @ frame.forward) < 0.0
    if rel in ("above", "upper"):
        return float(d @ GLOBAL_UP) > 0.0
    if rel in ("below", "lower"):
        return float(d @ GLOBAL_UP) < 0.0
    raise ValueError(f"unknown relation {rel!r}")


def bearing_deg(frame: ReferenceFrame, target_center) -> float:
    """Clockwise bearing from the frame's forward axis, in [0, 360)."""
    d = _vec(target_center) - frame.origin
    f = float(d @ frame.forward)
    r = float(d @ frame.right)
    if math.hypot(f, r) < 1e-3:
        raise DegenerateBearing("target within 1 mm of the frame's vertical axis")
    return math.degrees(math.atan2(r, f)) % 360.0


def clock_position(frame: ReferenceFrame, target_center) -> int:
    """Discretize the bearing into clock hours, forward = 12 o'clock.

    Sector boundaries (15, 45, 75, ... degrees) round toward the lower hour.
    """
    theta = bearing_deg(frame, target_center)
    hour = math.ceil(theta / 30.0 - 0.5) % 12
    return 12 if hour == 0 else hour


def tilt_angle_deg(axis) -> float:
    """Deviation of a unit axis from the global up axis, in [0, 180] degrees."""
    axis = _vec(axis)
    n = np.linalg.norm(axis)
    if abs(n - 1.0) > 1e-6:
        raise ValueError("axis must be unit norm within 1e-6")
    return math.degrees(math.acos(float(np.clip(axis @ GLOBAL_UP / n, -1.0, 1.0))))


# ---------------------------------------------------------------------------
# oriented boxes
# ---------------------------------------------------------------------------

_CORNER_SIGNS = np.array([[sx, sy, sz]
                          for sx in (-1, 1) for sy in (-1, 1) for sz in (-1, 1)],
                         dtype=float)

_EDGES = [(0, 1), (0, 2), (0, 4), (1, 3), (1, 5), (2, 3), (2, 6),
          (3, 7), (4, 5), (4, 6), (5, 7), (6, 7)]


@dataclass(frozen=True)
class OrientedBox:
    pose: Pose
    half_extents: np.ndarray

    def __post_init__(self):
        h = _vec(self.half_extents)
        if np.any(h <= 0):
            raise ValueError("half extents must be strictly positive")
        object.__setattr__(self, "half_extents", h)

    @staticmethod
    def axis_aligned(center, half_extents) -> "OrientedBox":
        return OrientedBox(Pose(center, quat_identity()), half_extents)

    @property
    def center(self) -> np.ndarray:
        return self.pose.position

    @property
    def volume(self) -> float:
        return float(8.0 * np.prod(self.half_extents))

    def axes(self) -> np.ndarray:
        """World-space local axes as matrix columns."""
        return self.pose.matrix

    def corners(self) -> np.ndarray:
        return (self.pose.matrix @ (_CORNER_SIGNS * self.half_extents).T).T + self.center

    def closest_point(self, p) -> np.ndarray:
        local = self.pose.inverse_transform_point(p)
        clamped = np.clip(local, -self.half_extents, self.half_extents)
        return self.pose.transform_point(clamped)

    def contains(self, p, tol: float = 0.0) -> bool:
        local = self.pose.inverse_transform_point(p)
        return bool(np.all(np.abs(local) <= self.half_extents + tol))

    def expand(self, margin: float) -> "OrientedBox":
        return OrientedBox(self.pose, self.half_extents + margin)

    def to_json(self) -> dict:
        return {"pose": self.pose.to_json(),
                "half_extents": [float(v) for v in self.half_extents]}

    @staticmethod
    def from_json(d: dict) -> "OrientedBox":
        return OrientedBox(Pose.from_json(d["pose"]), np.array(d["half_extents"]))


def _obbs_separated(ma, ca, ha, mb, cb, hb) -> bool:
    """Exact separating-axis test between two oriented boxes.

    True iff the boxes are strictly disjoint. The alternating-projection
    distance iteration below converges slowly for intersecting boxes, so
    intersection is decided exactly first.
    """
    d = cb - ca
    axes = [ma[:, i] for i in range(3)] + [mb[:, i] for i in range(3)]
    for i in range(3):
        for j in range(3):
            cross = np.cross(ma[:, i], mb[:, j])
            n = np.linalg.norm(cross)
            if n > 1e-12:
                axes.append(cross / n)
    for axis in axes:
        ra = float(ha @ np.abs(ma.T @ axis))
        rb = float(hb @ np.abs(mb.T @ axis))
        if abs(float(d @ axis)) > ra + rb:
            return True
    return False


def boundary_distance(a: OrientedBox, b) -> float:
    """Minimum distance between box surfaces; 0 when intersecting.

    A bare point is treated as a zero-extent box. Uses alternating closest
    point projection between the two convex solids, which converges to a
    minimizing pair (Cheney-Goldstein).
    """
    if isinstance(b, OrientedBox):
        ma, ca, ha = a.pose.matrix, a.center, a.half_extents
        mb, cb, hb = b.pose.matrix, b.center, b.half_extents
        gap = np.linalg.norm(cb - ca) - np.linalg.norm(ha) - np.linalg.norm(hb)
        if gap <= 0 and not _obbs_separated(ma, ca, ha, mb, cb, hb):
            return 0.0
        y = cb
        x = ma @ np.clip(ma.T @ (y - ca), -ha, ha) + ca
        for _ in range(500):
            y_new = mb @ np.clip(mb.T @ (x - cb), -hb, hb) + cb
            x_new = ma @ np.clip(ma.T @ (y_new - ca), -ha, ha) + ca
            if (np.linalg.norm(x_new - x) < 1e-11
                    and np.linalg.norm(y_new - y) < 1e-11):
                x, y = x_new, y_new
                break
            x, y = x_new, y_new
        return float(np.linalg.norm(x - y))
    p = _vec(b)
    return float(np.linalg.norm(a.closest_point(p) - p))


def clearance_at_least(a: OrientedBox, b: OrientedBox, margin: float) -> bool:
    """True iff boundary_distance(a, b) >= margin; fast sphere pre-filter."""
    ra = float(np.linalg.norm(a.half_extents))
    rb = float(np.linalg.norm(b.half_extents))
    if np.linalg.norm(a.center - b.center) - ra - rb >= margin:
        return True
    return boundary_distance(a, b) >= margin


def boxes_intersect(a: OrientedBox, b: OrientedBox, tol: float = 0.0) -> bool:
    return boundary_distance(a, b) <= tol


# ---------------------------------------------------------------------------
# cameras
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CameraModel:
    pose: Pose
    vertical_fov: float
    resolution: tuple[int, int]  # (width, height) pixels

    def __post_init__(self):
        if not (10.0 <= self.vertical_fov <= 120.0):
            raise ValueError("vertical fov must be within [10, 120] degrees")
        w, h = self.resolution
        if w <= 0 or h <= 0:
            raise ValueError("resolution must be positive")
        object.__setattr__(self, "resolution", (int(w), int(h)))

    @property
    def focal_px(self) -> float:
        return (self.resolution[1] / 2.0) / math.tan(math.radians(self.vertical_fov) / 2.0)

    @property
    def principal_point(self) -> tuple[float, float]:
        return (self.resolution[0] / 2.0, self.resolution[1] / 2.0)

    def world_to_camera(self, p) -> np.ndarray:
        return self.pose.inverse_transform_point(p)

    def project(self, p) -> tuple[float, float, float]:
        """Project a world point; returns (u, v, z-depth)."""
        c = self.world_to_camera(p)
        z = float(c[2])
        if z <= 0:
            raise BehindCamera("point has non-positive camera-space depth")
        cx, cy = self.principal_point
        f = self.focal_px
        return (cx + f * c[0] / z, cy + f * c[1] / z, z)

    def to_json(self) -> dict:
        return {"pose": self.pose.to_json(),
                "vertical_fov": float(self.vertical_fov),
                "resolution": list(self.resolution)}

    @staticmethod
    def from_json(d: dict) -> "CameraModel":
        return CameraModel(Pose.from_json(d["pose"]), d["vertical_fov"],
                           tuple(d["resolution"]))


def _convex_hull_2d(points: np.ndarray) -> np.ndarray:
    """Andrew monotone chain; returns CCW hull vertices."""
    pts = sorted({(float(p[0]), float(p[1])) for p in points})
    if len(pts) <= 2:
        return np.array(pts)

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in reversed(pts):
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def project_box(cam: CameraModel, box: OrientedBox,
                near: float = 1e-4) -> tuple[np.ndarray, tuple[float, float]]:
    """Project a box into the image: (convex hull polygon in pixels, depth range).

    Corners behind the near plane are handled by clipping box edges at z=near.
    The hull is clipped to the image rectangle. Raises BehindCamera when the
    box is entirely behind the camera.
    """
    from shapely.geometry import Polygon, box as shp_box

    corners_cam = np.array([cam.world_to_camera(c) for c in box.corners()])
    z = corners_cam[:, 2]
    if np.all(z <= near):
        raise BehindCamera("box entirely behind the camera")
    pts = [c for c in corners_cam if c[2] > near]
    for i, j in _EDGES:
        zi, zj = z[i], z[j]
        if (zi > near) != (zj > near):
            t = (near - zi) / (zj - zi)
            pts.append(corners_cam[i] + t * (corners_cam[j] - corners_cam[i]))
    pts = np.array(pts)
    cx, cy = cam.principal_point
    f = cam.focal_px
    uv = np.column_stack([cx + f * pts[:, 0] / pts[:, 2],
                          cy + f * pts[:, 1] / pts[:, 2]])
    hull = _convex_hull_2d(uv)
    if len(hull) < 3:
        raise BehindCamera("degenerate projection")
    w, h = cam.resolution
    clipped = Polygon(hull).intersection(shp_box(0, 0, w, h))
    if clipped.is_empty or clipped.area == 0:
        return np.empty((0, 2)), (float(z.min()), float(z.max()))
    poly = np.array(clipped.exterior.coords[:-1])
    return poly, (float(max(z.min(), near)), float(z.max()))


def unproject_point(cam: CameraModel, pixel, depth: float) -> np.ndarray:
    """World point on the camera ray through `pixel` at camera-space z `depth`."""
    u, v = float(pixel[0]), float(pixel[1])
    w, h = cam.resolution
    if not (0 <= u <= w and 0 <= v <= h):
        raise OutOfImage(f"pixel ({u}, {v}) outside {w}x{h} image")
    if depth <= 0:
        raise NonPositiveDepth(f"depth {depth} must be positive")
    cx, cy = cam.principal_point
    f = cam.focal_px
    local = np.array([(u - cx) / f * depth, (v - cy) / f * depth, depth])
    return cam.pose.transform_point(local)
