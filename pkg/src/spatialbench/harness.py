"""Episode orchestration: localization and execution protocols, model
clients, and per-task evaluation.

A model client only ever sees rendered images, depth references, the
instruction text, overlays, and (when configured) ground-truth rotation
deltas. Localization grades a predicted pixel against the target masks on
the world view; execution resolves predicted pixels into gripper goals and
runs them through the kinematic attempt pipeline, re-rendering the ego view
after every repositioning move.
"""

from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from .geometry import CameraModel, OrientedBox, Pose
from .render import RenderedView, mask_centroid, point_in_target_mask, \
    render_view
from .scene import SceneGraph
from .sim import (
    Certificate,
    EpisodeState,
    check_status,
    point_on_target,
    resolve_depth_toward,
    resolve_goal_pose,
    rotation_deltas,
)

ROTATION_AXES = ("pitch", "yaw", "roll")


class HarnessError(Exception):
    pass


class ClientTransport(HarnessError):
    """The model endpoint failed to produce any response."""


class MalformedResponse(HarnessError):
    """The model responded, but not in the documented shape."""


class TranscriptExhausted(HarnessError):
    """A scripted client ran past the end of its transcript."""


@dataclass(frozen=True)
class RunConfig:
    max_localization_attempts: int = 3
    max_execution_attempts: int = 5
    reflection: bool = False
    gold_fallback: bool = True
    run_seed: int = 0

    def __post_init__(self):
        if self.max_localization_attempts < 1 or self.max_execution_attempts < 1:
            raise ValueError("attempt limits must be >= 1")


def load_prompt(name: str) -> str:
    """Reflection prompt text ships as an editable package data file."""
    return resources.files("spatialbench.prompts").joinpath(
        f"{name}.txt").read_text()


# ---------------------------------------------------------------------------
# request construction
# ---------------------------------------------------------------------------

def _image_payload(role: str, view: RenderedView) -> dict:
    return {"role": role, "svg": view.svg, "png_b64": view.png_b64()}


def build_request(task, phase: str, views: list[tuple[str, RenderedView]],
                  attempt: int, overlays=None, reflection_text=None,
                  rotation_axes=()) -> dict:
    """The full client-visible payload for one predict/reflect call.

    Nothing from the scene graph crosses this boundary: no object ids, no
    answer sets, no poses. Depth stays server-side behind an opaque
    reference because goal depths are resolved by the harness.
    """
    req = {
        "task_id": task.task_id,
        "phase": phase,
        "instruction": task.instruction,
        "images": [_image_payload(role, v) for role, v in views],
        "depth_ref": f"depth/{task.task_id}/{phase}",
        "overlays": list(overlays or []),
        "rotation_axes": list(rotation_axes),
    }
    if reflection_text is not None:
        req["reflection"] = reflection_text
    return req


def request_bytes(request: dict) -> bytes:
    return json.dumps(request, sort_keys=True).encode()


def _parse_point(response, resolution) -> tuple[float, float]:
    if not isinstance(response, dict) or "point_2d" not in response:
        raise MalformedResponse("missing point_2d")
    pt = response["point_2d"]
    if (not isinstance(pt, (list, tuple)) or len(pt) != 2
            or not all(isinstance(c, (int, float)) for c in pt)):
        raise MalformedResponse(f"bad point_2d {pt!r}")
    u, v = float(pt[0]), float(pt[1])
    w, h = resolution
    if not (0 <= u < w and 0 <= v < h):
        raise MalformedResponse(f"point ({u}, {v}) outside {w}x{h} image")
    return u, v


def _parse_rotation(response) -> dict:
    rot = response.get("rotation")
    if (not isinstance(rot, (list, tuple)) or len(rot) != 3
            or not all(isinstance(c, (int, float)) for c in rot)):
        raise MalformedResponse(f"bad rotation {rot!r}")
    return dict(zip(ROTATION_AXES, (float(c) for c in rot)))


def _parse_reflection(response) -> str:
    if not isinstance(response, dict) or "reflection" not in response \
            or not isinstance(response["reflection"], str):
        raise MalformedResponse("missing reflection text")
    return response["reflection"]


# ---------------------------------------------------------------------------
# target geometry on images
# ---------------------------------------------------------------------------

def _box_pixel_hull(cam: CameraModel, box: OrientedBox):
    """Convex hull, in pixels, of a box's visible corners."""
    import cv2
    pts = []
    for corner in box.corners():
        try:
            u, v, _ = cam.project(corner)
        except Exception:
            continue
        pts.append((u, v))
    if len(pts) < 3:
        return []
    hull = cv2.convexHull(np.asarray(pts, dtype=np.float32))
    return [(float(p[0][0]), float(p[0][1])) for p in hull]

def _bbox_overlay(cam: CameraModel, box: OrientedBox, color: str) -> dict:
    hull = _box_pixel_hull(cam, box)
    if not hull:
        return {"kind": "bbox", "rect": [0, 0, 0, 0], "color": color}
    us = [p[0] for p in hull]
    vs = [p[1] for p in hull]
    w, h = cam.resolution
    rect = [max(0.0, min(us)), max(0.0, min(vs)),
            min(float(w), max(us)), min(float(h), max(vs))]
    return {"kind": "bbox", "rect": rect, "color": color}



def render_scene(scene: SceneGraph, cam: CameraModel, overlays=None
                 ) -> RenderedView:
    """Render a scene through its cached ray raster; overlays only redraw
    the cheap vector layer."""
    return render_view(scene.render_entries(), cam, overlays=overlays,
                       raster=scene.raster(cam))


def localization_targets(task, scene: SceneGraph, view: RenderedView):
    """(object mask keys, projected space polygons) for grading a point."""
    answers = [task.answer] + ([task.alt_answer] if task.alt_answer else [])
    keys = []
    polygons = []
    for ans in answers:
        if ans.kind == "objects":
            keys.extend(m for m in ans.members if m not in keys)
        elif ans.kind == "slots":
            polygons.extend(
                _box_pixel_hull(view.camera, scene.slot(m).region)
                for m in ans.members)
        else:
            polygons.extend(_box_pixel_hull(view.camera, m.box)
                            for m in ans.members)
    return keys, [np.asarray(p) for p in polygons if p]


def _member_box(scene: SceneGraph, task, member) -> OrientedBox:
    if task.answer.kind == "objects":
        return scene.object(member).box
    if task.answer.kind == "slots":
        return scene.slot(member).region
    return member.box


def point_to_member(task, scene: SceneGraph, view: RenderedView, point):
    """Map a correctly localized pixel to the answer member it designates."""
    answers = [task.answer] + ([task.alt_answer] if task.alt_answer else [])
    u, v = point
    for ans in answers:
        for member in ans.members:
            if ans.kind == "objects":
                if point_in_target_mask(view, point, object_keys=[member]):
                    return member
            else:
                box = member.box if ans.kind == "spaces" \
                    else scene.slot(member).region
                poly = _box_pixel_hull(view.camera, box)
                if poly and point_in_target_mask(
                        view, point, space_polygons=[np.asarray(poly)]):
                    return member
    return task.answer.members[0]


# ---------------------------------------------------------------------------
# mock clients
# ---------------------------------------------------------------------------

class OracleClient:
    """Test double that answers from a ground-truth book keyed by task id.

    The book is a side channel; the request payload itself stays free of
    scene internals.
    """

    capabilities = frozenset({"point", "rotation", "reflect"})

    def __init__(self, book: dict):
        self.book = book

    def predict(self, request: dict) -> dict:
        entry = self.book[request["task_id"]]
        if request["phase"] == "localize":
            return {"point_2d": list(entry["localize_point"])}
        if request["phase"] == "execute":
            resp = {"point_2d": list(entry["execute_pixel"])}
            axes = request.get("rotation_axes") or []
            if axes:
                rot = entry.get("execute_rotation", {})
                resp["rotation"] = [rot.get(a, 0.0) for a in ROTATION_AXES]
            return resp
        return {"reflection": "the previous point missed the target"}


class RandomClient:
    capabilities = frozenset({"point", "rotation", "reflect"})

    def __init__(self, seed: int = 0):
        self.rng = np.random.default_rng(seed)

    def predict(self, request: dict) -> dict:
        if request["phase"] == "reflect":
            return {"reflection": "guessing again"}
        # resolution is not in the payload; decode it from the svg header
        svg = request["images"][0]["svg"]
        w = float(svg.split('width="')[1].split('"')[0])
        h = float(svg.split('height="')[1].split('"')[0])
        resp = {"point_2d": [float(self.rng.uniform(0, w)),
                             float(self.rng.uniform(0, h))]}
        if request.get("rotation_axes"):
            resp["rotation"] = [float(self.rng.uniform(-180, 180))
                                for _ in range(3)]
        return resp


class ScriptedClient:
    capabilities = frozenset({"point", "rotation", "reflect"})

    def __init__(self, transcript: list):
        self.transcript = list(transcript)
        self.cursor = 0
        self.requests: list[dict] = []

    def predict(self, request: dict) -> dict:
        self.requests.append(request)
        if self.cursor >= len(self.transcript):
            raise TranscriptExhausted(
                f"transcript ended after {self.cursor} responses")
        resp = self.transcript[self.cursor]
        self.cursor += 1
        return resp


class HttpClient:
    """POST /predict against a live model endpoint."""

    capabilities = frozenset({"point", "rotation", "reflect"})

    def __init__(self, endpoint: str, timeout: float = 60.0, retries: int = 1):
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout
        self.retries = retries

    def predict(self, request: dict) -> dict:
        import httpx
        last = None
        for _ in range(max(1, self.retries)):
            try:
                r = httpx.post(f"{self.endpoint}/predict", json=request,
                               timeout=self.timeout)
                r.raise_for_status()
                return r.json()
            except Exception as e:  # noqa: BLE001 - transport boundary
                last = e
        raise ClientTransport(str(last))


def oracle_entry(task, scene: SceneGraph) -> dict:
    """Ground-truth answers for one task: a pixel inside the first answer
    member's world-view mask, plus that member's certified execution goal."""
    view = render_scene(scene, scene.world_camera)
    member = task.answer.members[0]
    if task.answer.kind == "objects":
        point = mask_centroid(view, member)
    else:
        box = member.box if task.answer.kind == "spaces" \
            else scene.slot(member).region
        from shapely.geometry import Polygon
        hull = _box_pixel_hull(view.camera, box)
        p = Polygon(hull).representative_point()
        point = (float(p.x), float(p.y))
    entry = {"localize_point": point}
    cert = _member_certificate(task, 0)
    if cert is not None:
        entry["execute_pixel"] = list(cert.pixel)
        entry["execute_rotation"] = dict(cert.rotations)
    else:
        box = _member_box(scene, task, member)
        u, v, _ = scene.world_camera.project(box.center)
        entry["execute_pixel"] = [float(u), float(v)]
        entry["execute_rotation"] = {}
    return entry


def make_mock_client(kind: str, tasks=None, scenes=None, seed: int = 0,
                     transcript=None):
    if kind == "oracle":
        by_id = {s.scene_id: s for s in scenes}
        book = {t.task_id: oracle_entry(t, by_id[t.scene_id]) for t in tasks}
        return OracleClient(book)
    if kind == "random":
        return RandomClient(seed)
    if kind == "scripted":
        if transcript is None:
            raise ValueError("scripted client needs a transcript")
        return ScriptedClient(transcript)
    raise ValueError(f"unknown mock client kind {kind!r}")


# ---------------------------------------------------------------------------
# localization protocol
# ---------------------------------------------------------------------------

def run_localization(task, scene: SceneGraph, client, cfg: RunConfig) -> dict:
    """Up to N attempts at pointing out the answer on the world view."""
    view = render_scene(scene, scene.world_camera)
    keys, polygons = localization_targets(task, scene, view)
    logs = []
    reflection_text = None
    failed_point = None
    chosen = None
    success = False
    attempts = 0
    for attempt in range(1, cfg.max_localization_attempts + 1):
        overlays = []
        if cfg.reflection and failed_point is not None:
            overlays = [{"kind": "circle", "center": list(failed_point),
                         "color": "red"}]
            marked = render_scene(scene, scene.world_camera,
                                  overlays=overlays)
            reflect_req = build_request(
                task, "reflect", [("world", marked)], attempt,
                overlays=overlays,
                reflection_text=load_prompt("localization_reflection"))
            try:
                reflection_text = _parse_reflection(
                    client.predict(reflect_req))
            except (ClientTransport, MalformedResponse) as e:
                reflection_text = None
                logs.append({"attempt": attempt, "event": "reflect_failed",
                             "reason": str(e)})
        image = render_scene(scene, scene.world_camera,
                             overlays=overlays) if overlays else view
        req = build_request(task, "localize", [("world", image)], attempt,
                            overlays=overlays,
                            reflection_text=reflection_text)
        attempts = attempt
        try:
            point = _parse_point(client.predict(req), view.resolution)
        except (ClientTransport, MalformedResponse) as e:
            logs.append({"attempt": attempt, "event": "predict_failed",
                         "reason": str(e)})
            continue
        hit = point_in_target_mask(view, point, object_keys=keys,
                                   space_polygons=polygons)
        logs.append({"attempt": attempt, "point": list(point), "hit": hit})
        chosen = point
        if hit:
            success = True
            break
        failed_point = point
    return {"success": success, "attempts": attempts, "chosen_point": chosen,
            "logs": logs, "view": view}


# ---------------------------------------------------------------------------
# execution protocol
# ---------------------------------------------------------------------------

def _member_certificate(task, index: int) -> Certificate | None:
    if not task.certificates:
        return None
    from .suite import member_key
    blob = task.certificates.get(member_key(task.answer, index))
    return Certificate.from_json(blob) if blob else None


def _target_certificate(task, member) -> Certificate | None:
    for i, m in enumerate(task.answer.members):
        if m is member:
            return _member_certificate(task, i)
    for i, m in enumerate(task.answer.members):
        if task.answer.kind == "spaces":
            if m.slot_id == member.slot_id and \
                    np.allclose(m.box.center, member.box.center):
                return _member_certificate(task, i)
        elif m == member:
            return _member_certificate(task, i)
    return None


def _target_axes(state: EpisodeState, task, member) -> np.ndarray:
    if task.action == "pick":
        return state.scene.object(member).box.pose.matrix
    held = state.held_box_at(state.ee_pose)
    return held.pose.matrix


def _gt_rotations(state: EpisodeState, cert: Certificate | None,
                  axes: np.ndarray) -> dict:
    """Rotation deltas from the current hand orientation to the certified
    goal orientation; zero when no certificate exists for the target."""
    if cert is None:
        return {}
    goal_quat = Pose.from_json(cert.pose).quat
    try:
        return rotation_deltas(state.ee_pose.quat, goal_quat, axes)
    except Exception:
        return {}


def run_execution(task, scene: SceneGraph, member, client,
                  cfg: RunConfig) -> dict:
    """Up to N attempts at acting on one fixed target member.

    The first observation is the world view with the target marked; every
    later observation is the ego view rendered after the preceding move.
    """
    state = EpisodeState.from_scene(scene)
    cert = _target_certificate(task, member)
    marker_color = "red" if task.action == "pick" else "lime"

    def target_box():
        return _member_box(state.scene, task, member)

    world = render_scene(
        scene, scene.world_camera,
        overlays=[_bbox_overlay(scene.world_camera, target_box(),
                                marker_color)])
    cam = scene.world_camera
    views = [("world", world)]
    logs = []
    accepted = False
    attempts = 0
    moves = 0
    distances = []
    grasped_id = None
    placed_id = None
    reflection_text = None
    failed_point = None
    for attempt in range(1, cfg.max_execution_attempts + 1):
        if cfg.reflection and failed_point is not None:
            overlays = [{"kind": "circle", "center": list(failed_point),
                         "color": "red"}]
            ego_now = render_scene(state.scene, state.ego_camera)
            reflect_req = build_request(
                task, "reflect", [("world", world), ("ego", ego_now)],
                attempt, overlays=overlays,
                reflection_text=load_prompt("execution_reflection"))
            try:
                reflection_text = _parse_reflection(
                    client.predict(reflect_req))
            except (ClientTransport, MalformedResponse) as e:
                reflection_text = None
                logs.append({"attempt": attempt, "event": "reflect_failed",
                             "reason": str(e)})
        req = build_request(task, "execute", views, attempt,
                            overlays=views[-1][1].overlays,
                            reflection_text=reflection_text,
                            rotation_axes=task.rotation_mask)
        attempts = attempt
        try:
            response = client.predict(req)
            point = _parse_point(response, cam.resolution)
        except (ClientTransport, MalformedResponse) as e:
            logs.append({"attempt": attempt, "event": "predict_failed",
                         "reason": str(e)})
            continue
        axes = _target_axes(state, task, member)
        rotations = _gt_rotations(state, cert, axes)
        if task.rotation_mask:
            try:
                predicted = _parse_rotation(response)
            except MalformedResponse as e:
                logs.append({"attempt": attempt, "event": "predict_failed",
                             "reason": str(e)})
                continue
            for axis in task.rotation_mask:
                rotations[axis] = predicted[axis]
        try:
            depth = resolve_depth_toward(cam, point, target_box().center)
        except Exception as e:
            logs.append({"attempt": attempt, "event": "resolve_failed",
                         "reason": str(e)})
            continue
        goal = resolve_goal_pose(point, depth, rotations, cam,
                                 state.ee_pose.quat, axes)
        dist = float(np.linalg.norm(goal.position - target_box().center))
        distances.append(dist)
        on_target = point_on_target(target_box(), goal.position)
        if on_target:
            if task.action == "pick":
                verdict = state.attempt_grasp(goal)
                if verdict.ok:
                    grasped_id = verdict.detail["object_id"]
            else:
                placed = state.holding
                verdict = state.attempt_place(goal)
                if verdict.ok:
                    placed_id = placed
            logs.append({"attempt": attempt, "point": list(point),
                         "op": task.action, "ok": verdict.ok,
                         "reason": verdict.reason, "distance": dist})
            if verdict.ok:
                accepted = True
                break
        else:
            verdict = state.attempt_move(goal)
            moves += 1
            logs.append({"attempt": attempt, "point": list(point),
                         "op": "move", "ok": verdict.ok,
                         "reason": verdict.reason, "distance": dist})
            ego = render_scene(state.scene, state.ego_camera)
            views = [("ego", ego)]
            cam = state.ego_camera
        failed_point = point
    return {"accepted": accepted, "attempts": attempts, "moves": moves,
            "distances": distances, "grasped_id": grasped_id,
            "placed_id": placed_id, "logs": logs, "state": state}


# ---------------------------------------------------------------------------
# full episodes
# ---------------------------------------------------------------------------

def _gold_member(task, run_seed: int):
    rng = np.random.default_rng(np.random.SeedSequence(
        [run_seed, zlib.crc32(task.task_id.encode())]))
    return task.answer.members[int(rng.integers(len(task.answer.members)))]


def _member_json(task, member):
    if task.answer.kind == "spaces":
        return member.to_json()
    return member


def run_task(task, scene: SceneGraph, client, cfg: RunConfig) -> dict:
    """One full episode: localize, pick the execution target, execute,
    grade. Localization failures fall back to a random gold target so
    acceptance stays measurable independently of localization."""
    loc = run_localization(task, scene, client, cfg)
    if loc["success"]:
        member = point_to_member(task, scene, loc["view"],
                                 loc["chosen_point"])
        target_source = "model"
    elif cfg.gold_fallback:
        member = _gold_member(task, cfg.run_seed)
        target_source = "gold"
    else:
        member = None
        target_source = "none"
    episode = {
        "task_id": task.task_id,
        "family_id": task.family_id,
        "action": task.action,
        "scene_id": task.scene_id,
        "difficulty": task.difficulty,
        "ambiguous": task.ambiguous,
        "localization": {"success": loc["success"],
                         "attempts": loc["attempts"],
                         "chosen_point": loc["chosen_point"],
                         "logs": loc["logs"]},
    }
    if member is None:
        episode.update({"target": None, "execution": None,
                        "status": {"ok": False, "reason": "no_target"},
                        "acceptance": False, "success": False})
        return episode
    ex = run_execution(task, scene, member, client, cfg)
    status = check_status(task, ex["state"].scene,
                          grasped_id=ex["grasped_id"],
                          placed_id=ex["placed_id"])
    episode.update({
        "target": {"member": _member_json(task, member),
                   "source": target_source},
        "execution": {"accepted": ex["accepted"], "attempts": ex["attempts"],
                      "moves": ex["moves"], "distances": ex["distances"],
                      "grasped_id": ex["grasped_id"],
                      "placed_id": ex["placed_id"], "logs": ex["logs"]},
        "status": {"ok": status.passed, "reason": status.reason},
        "acceptance": ex["accepted"],
        "success": bool(loc["success"] and ex["accepted"] and status.passed),
    })
    return episode


def run_suite(tasks, scenes, client, cfg: RunConfig) -> list[dict]:
    by_id = {s.scene_id: s for s in scenes}
    return [run_task(t, by_id[t.scene_id], client, cfg) for t in tasks]


def write_episodes(path, episodes: list[dict]):
    with open(path, "w") as f:
        for ep in episodes:
            f.write(json.dumps(ep, sort_keys=True) + "\n")


def read_episodes(path) -> list[dict]:
    with open(path) as f:
        return [json.loads(line) for line in f if line.strip()]
