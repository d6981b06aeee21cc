"""Schematic rendering: ray-cast owner/depth rasters, SVG/PNG views, masks.

All depth values are camera-space z-depth in meters. A depth of 0 marks
pixels whose ray hits nothing.
"""

from __future__ import annotations

import base64
import colorsys
import io
import math
import struct
from dataclasses import dataclass, field

import cv2
import numpy as np
from PIL import Image, ImageDraw

from .geometry import CameraModel, OrientedBox, OutOfImage

NO_HIT = -1

DEPTH_MAGIC_BYTES = 8  # header: width u32 + height u32, little-endian


class UnknownObject(KeyError):
    pass


# ---------------------------------------------------------------------------
# ray casting
# ---------------------------------------------------------------------------

def _ray_dirs_world(cam: CameraModel, resolution) -> np.ndarray:
    """Unnormalized world ray directions with camera-space z = 1.

    With z=1 directions, the slab-test parameter t equals the z-depth.
    """
    w, h = resolution
    f = (h / 2.0) / math.tan(math.radians(cam.vertical_fov) / 2.0)
    cx, cy = w / 2.0, h / 2.0
    u = (np.arange(w) + 0.5 - cx) / f
    v = (np.arange(h) + 0.5 - cy) / f
    uu, vv = np.meshgrid(u, v)
    local = np.stack([uu, vv, np.ones_like(uu)], axis=-1)
    return local @ cam.pose.matrix.T


def raster_boxes(cam: CameraModel,
                 entries: list[tuple[str, OrientedBox]],
                 resolution: tuple[int, int] | None = None,
                 near: float = 1e-4) -> tuple[np.ndarray, np.ndarray, list[str]]:
    """Depth-test all boxes against the pixel grid.

    Returns (owner, depth, keys): owner holds indices into keys (-1 for no
    hit) and depth the z-depth of the front-most surface.
    """
    resolution = resolution or cam.resolution
    w, h = resolution
    dirs = _ray_dirs_world(cam, resolution)
    origin = cam.pose.position
    depth = np.full((h, w), np.inf, dtype=np.float64)
    owner = np.full((h, w), NO_HIT, dtype=np.int32)
    keys = [k for k, _ in entries]
    for idx, (_, box) in enumerate(entries):
        m = box.pose.matrix
        o_local = m.T @ (origin - box.center)
        d_local = dirs @ m
        with np.errstate(divide="ignore", invalid="ignore"):
            inv = 1.0 / d_local
            t1 = (-box.half_extents - o_local) * inv
            t2 = (box.half_extents - o_local) * inv
        tmin = np.minimum(t1, t2)
        tmax = np.maximum(t1, t2)
        par = np.abs(d_local) < 1e-12
        inside = np.abs(o_local) <= box.half_extents
        tmin = np.where(par, np.where(inside, -np.inf, np.inf), tmin)
        tmax = np.where(par, np.where(inside, np.inf, -np.inf), tmax)
        enter = tmin.max(axis=-1)
        exit_ = tmax.min(axis=-1)
        hit = (enter <= exit_) & (exit_ > near) & (enter > near)
        t = enter
        closer = hit & (t < depth)
        depth[closer] = t[closer]
        owner[closer] = idx
    depth[~np.isfinite(depth)] = 0.0
    return owner, depth.astype(np.float32), keys


# ---------------------------------------------------------------------------
# depth file format
# ---------------------------------------------------------------------------

def encode_depth(depth: np.ndarray) -> bytes:
    h, w = depth.shape
    return struct.pack("<II", w, h) + depth.astype("<f4").tobytes()


def decode_depth(blob: bytes) -> np.ndarray:
    w, h = struct.unpack("<II", blob[:8])
    arr = np.frombuffer(blob[8:], dtype="<f4")
    if arr.size != w * h:
        raise ValueError("depth payload size mismatch")
    return arr.reshape(h, w).copy()


# ---------------------------------------------------------------------------
# rendered views
# ---------------------------------------------------------------------------

@dataclass
class RenderedView:
    camera: CameraModel
    svg: str
    png: bytes
    depth: np.ndarray
    owner: np.ndarray
    keys: list[str]
    masks: dict[str, list[list[tuple[float, float]]]]
    overlays: list[dict] = field(default_factory=list)

    @property
    def resolution(self) -> tuple[int, int]:
        return self.camera.resolution

    def png_b64(self) -> str:
        return base64.b64encode(self.png).decode("ascii")

    def depth_b64(self) -> str:
        return base64.b64encode(encode_depth(self.depth)).decode("ascii")

    def mask_pixels(self, key: str) -> int:
        idx = self.keys.index(key)
        return int((self.owner == idx).sum())


_CATEGORY_BASE_HUE = {
    "book": 0.58, "near_ref": 0.12, "distant_ref": 0.32,
    "table": 0.08, "shelf": 0.05, "support": 0.85, "structure": 0.0,
}


def _object_color(key: str, category: str, index: int) -> str:
    if category == "structure":
        g = 120 + (hash(key) % 40)
        return f"#{g:02x}{g:02x}{g:02x}"
    hue = (_CATEGORY_BASE_HUE.get(category, 0.0) + 0.618033 * index) % 1.0
    r, g, b = colorsys.hsv_to_rgb(hue, 0.55, 0.85)
    return f"#{int(r * 255):02x}{int(g * 255):02x}{int(b * 255):02x}"


_FACES = [(0, 1, 3, 2), (4, 6, 7, 5), (0, 4, 5, 1),
          (2, 3, 7, 6), (0, 2, 6, 4), (1, 5, 7, 3)]


def _clip_near(poly_cam: list[np.ndarray], near: float) -> list[np.ndarray]:
    out: list[np.ndarray] = []
    n = len(poly_cam)
    for i in range(n):
        a, b = poly_cam[i], poly_cam[(i + 1) % n]
        ain, bin_ = a[2] > near, b[2] > near
        if ain:
            out.append(a)
        if ain != bin_:
            t = (near - a[2]) / (b[2] - a[2])
            out.append(a + t * (b - a))
    return out


def _box_face_polys(cam: CameraModel, box: OrientedBox):
    """(pixel polygon, sort depth) per visible face."""
    corners_cam = np.array([cam.world_to_camera(c) for c in box.corners()])
    cx, cy = cam.principal_point
    f = cam.focal_px
    out = []
    for face in _FACES:
        poly = _clip_near([corners_cam[i] for i in face], 1e-4)
        if len(poly) < 3:
            continue
        pts = np.array(poly)
        uv = np.column_stack([cx + f * pts[:, 0] / pts[:, 2],
                              cy + f * pts[:, 1] / pts[:, 2]])
        out.append((uv, float(pts[:, 2].mean())))
    return out


def _shade(hex_color: str, factor: float) -> str:
    r, g, b = (int(hex_color[i:i + 2], 16) for i in (1, 3, 5))
    return "#{:02x}{:02x}{:02x}".format(*(min(255, int(c * factor))
                                          for c in (r, g, b)))


def render_view(entries: list[tuple[str, OrientedBox, str]],
                cam: CameraModel,
                overlays: list[dict] | None = None,
                raster: tuple[np.ndarray, np.ndarray, list[str]] | None = None,
                ) -> RenderedView:
    """Render a list of (key, box, category) entries from a camera.

    `raster` lets callers reuse a cached owner/depth raster for the same
    (entries, camera) pair. Overlays are drawn on the images only; masks and
    depth never depend on them.
    """
    overlays = overlays or []
    w, h = cam.resolution
    if raster is None:
        owner, depth, keys = raster_boxes(cam, [(k, b) for k, b, _ in entries])
    else:
        owner, depth, keys = raster

    # painter's order: farthest face first, across all boxes
    faces = []
    for index, (key, box, category) in enumerate(entries):
        color = _object_color(key, category, index)
        for fi, (uv, d) in enumerate(_box_face_polys(cam, box)):
            faces.append((d, uv, _shade(color, 0.75 + 0.08 * (fi % 4))))
    faces.sort(key=lambda t: -t[0])

    svg = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'viewBox="0 0 {w} {h}">',
           f'<rect width="{w}" height="{h}" fill="#e8e8ee"/>']
    img = Image.new("RGB", (w, h), (232, 232, 238))
    draw = ImageDraw.Draw(img)
    for _, uv, color in faces:
        pts = " ".join(f"{u:.2f},{v:.2f}" for u, v in uv)
        svg.append(f'<polygon points="{pts}" fill="{color}" '
                   f'stroke="#333333" stroke-width="0.6"/>')
        draw.polygon([(float(u), float(v)) for u, v in uv],
                     fill=color, outline="#333333")
    for ov in overlays:
        color = ov.get("color", "red")
        if ov["kind"] == "bbox":
            x0, y0, x1, y1 = ov["rect"]
            svg.append(f'<rect x="{x0:.1f}" y="{y0:.1f}" width="{x1 - x0:.1f}" '
                       f'height="{y1 - y0:.1f}" fill="none" stroke="{color}" '
                       f'stroke-width="3"/>')
            draw.rectangle([x0, y0, x1, y1], outline=color, width=3)
        elif ov["kind"] == "circle":
            cx0, cy0 = ov["center"]
            r = ov.get("radius", 12)
            svg.append(f'<circle cx="{cx0:.1f}" cy="{cy0:.1f}" r="{r}" '
                       f'fill="none" stroke="{color}" stroke-width="3"/>')
            draw.ellipse([cx0 - r, cy0 - r, cx0 + r, cy0 + r],
                         outline=color, width=3)
        elif ov["kind"] == "dot":
            cx0, cy0 = ov["center"]
            svg.append(f'<circle cx="{cx0:.1f}" cy="{cy0:.1f}" r="4" '
                       f'fill="{color}"/>')
            draw.ellipse([cx0 - 4, cy0 - 4, cx0 + 4, cy0 + 4], fill=color)
        else:
            raise ValueError(f"unknown overlay kind {ov['kind']!r}")
    svg.append("</svg>")

    buf = io.BytesIO()
    img.save(buf, format="PNG")
    masks = {key: _mask_polygons(owner, idx) for idx, key in enumerate(keys)}
    return RenderedView(cam, "\n".join(svg), buf.getvalue(), depth, owner,
                        keys, masks, overlays)


def _mask_polygons(owner: np.ndarray, idx: int):
    m = (owner == idx).astype(np.uint8)
    if not m.any():
        return []
    contours, _ = cv2.findContours(m, cv2.RETR_EXTERNAL, cv2.CHAIN_APPROX_SIMPLE)
    return [[(float(p[0][0]), float(p[0][1])) for p in c]
            for c in contours if len(c) >= 3]


def point_in_target_mask(view: RenderedView, pixel,
                         object_keys: list[str] | None = None,
                         space_polygons: list[np.ndarray] | None = None) -> bool:
    """Grade a predicted pixel against target object masks or space polygons.

    Object answers use the owner raster (exact); space answers use strict
    containment in the projected free-region polygons.
    """
    u, v = float(pixel[0]), float(pixel[1])
    w, h = view.resolution
    if not (0 <= u < w and 0 <= v < h):
        raise OutOfImage(f"pixel ({u}, {v}) outside {w}x{h} image")
    if object_keys:
        idx_set = {view.keys.index(k) for k in object_keys if k in view.keys}
        if int(view.owner[int(v), int(u)]) in idx_set:
            return True
    if space_polygons:
        from shapely.geometry import Point, Polygon
        p = Point(u, v)
        for poly in space_polygons:
            if len(poly) >= 3 and Polygon(poly).contains(p):
                return True
    return False


def mask_centroid(view: RenderedView, key: str) -> tuple[float, float]:
    """A pixel guaranteed inside the object's mask: the largest-blob interior
    point nearest the blob centroid."""
    idx = view.keys.index(key)
    ys, xs = np.nonzero(view.owner == idx)
    if len(xs) == 0:
        raise UnknownObject(f"{key} not visible")
    cx, cy = xs.mean(), ys.mean()
    if view.owner[int(cy), int(cx)] == idx:
        return float(int(cx) + 0.5), float(int(cy) + 0.5)
    d2 = (xs - cx) ** 2 + (ys - cy) ** 2
    j = int(np.argmin(d2))
    return float(xs[j] + 0.5), float(ys[j] + 0.5)
