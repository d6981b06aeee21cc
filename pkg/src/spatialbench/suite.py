"""Balanced task-suite construction over scene pools.

A suite draws (family, scene) pairs with weights that favor under-sampled
families, under-sampled difficulty levels, and rarely attempted scenes,
retains only non-trivial instantiations, and optionally filters answers
through the kinematic feasibility oracle. Suites serialize as JSONL with a
manifest header line so reruns are byte-comparable.
"""

from __future__ import annotations

import hashlib
import json
import zlib
from dataclasses import dataclass, field

import numpy as np

from .evaluator import AnswerSet
from .families import NoViableBinding, all_families, instantiate_family
from .sim import certify_answer

DIFFICULTIES = ("easy", "medium", "hard")
RETENTIONS = ("gt1", "ge1")


@dataclass
class SamplerLedger:
    """Counters driving the balanced sampling weights."""

    n_t: int
    n_all: int | None = None
    C: dict = field(default_factory=dict)  # family -> difficulty -> count
    A: dict = field(default_factory=dict)  # scene -> attempts
    N: int = 0

    def family_total(self, family_id: str) -> int:
        return sum(self.C.get(family_id, {}).values())

    def family_weight(self, family_id: str) -> float:
        return 1.0 / (self.family_total(family_id) + 1)

    def difficulty_total(self, difficulty: str) -> int:
        return sum(c.get(difficulty, 0) for c in self.C.values())

    def scene_weight(self, scene_id: str, difficulty: str) -> float:
        return (1.0 / (self.difficulty_total(difficulty) + 1)
                / (self.A.get(scene_id, 0) + 1) ** 2)

    def record_attempt(self, scene_id: str):
        self.A[scene_id] = self.A.get(scene_id, 0) + 1

    def record_task(self, family_id: str, difficulty: str):
        fam = self.C.setdefault(family_id, {})
        fam[difficulty] = fam.get(difficulty, 0) + 1
        self.N += 1


@dataclass(frozen=True)
class TaskInstance:
    task_id: str
    family_id: str
    action: str  # pick | place
    scene_id: str
    difficulty: str
    program: str
    instruction: str
    answer: AnswerSet
    ambiguous: bool = False
    alt_program: str | None = None
    alt_answer: AnswerSet | None = None
    rotation_mask: tuple = ()
    certificates: dict | None = None  # member key -> certificate json

    @property
    def answer_set(self) -> AnswerSet:
        return self.answer

    def union_ids(self) -> tuple:
        ids = list(self.answer.ids())
        if self.alt_answer is not None:
            ids += [i for i in self.alt_answer.ids() if i not in ids]
        return tuple(ids)

    def to_json(self) -> dict:
        d = {
            "task_id": self.task_id,
            "family_id": self.family_id,
            "action": self.action,
            "scene_id": self.scene_id,
            "difficulty": self.difficulty,
            "program": self.program,
            "instruction": self.instruction,
            "answer_set": self.answer.to_json(),
            "ambiguous": self.ambiguous,
            "rotation_mask": list(self.rotation_mask),
        }
        if self.ambiguous:
            d["alt_program"] = self.alt_program
            d["alt_answer_set"] = self.alt_answer.to_json()
        if self.certificates is not None:
            d["certificates"] = self.certificates
        return d

    @staticmethod
    def from_json(d: dict) -> "TaskInstance":
        alt = d.get("alt_answer_set")
        return TaskInstance(
            task_id=d["task_id"],
            family_id=d["family_id"],
            action=d["action"],
            scene_id=d["scene_id"],
            difficulty=d["difficulty"],
            program=d["program"],
            instruction=d["instruction"],
            answer=AnswerSet.from_json(d["answer_set"]),
            ambiguous=d["ambiguous"],
            alt_program=d.get("alt_program"),
            alt_answer=AnswerSet.from_json(alt) if alt else None,
            rotation_mask=tuple(d.get("rotation_mask", ())),
            certificates=d.get("certificates"),
        )


def _key_for(kind: str, member, index: int) -> str:
    if kind == "spaces":
        return f"{member.slot_id}#{index}"
    return str(member)


def member_key(answer: AnswerSet, index: int) -> str:
    """Stable key for one answer member, used to attach certificates."""
    return _key_for(answer.kind, answer.members[index], index)


def retention_passes(answer: AnswerSet, retention: str) -> bool:
    if retention not in RETENTIONS:
        raise ValueError(f"unknown retention rule {retention!r}")
    n = len(answer.members)
    return n > 1 if retention == "gt1" else n >= 1


def _cert_cache_key(scene, answer: AnswerSet, member):
    if answer.kind == "objects":
        return (scene.scene_id, "objects", member, None)
    # place certification also enforces the task's grading, which reads the
    # program and the goal, so both belong in the key
    goal = json.dumps(answer.goal, sort_keys=True) if answer.goal else None
    if answer.kind == "slots":
        return (scene.scene_id, "slots", member, goal, answer.program)
    box = member.box
    return (scene.scene_id, "spaces", member.slot_id, goal, answer.program,
            tuple(np.round(box.center, 6)), tuple(np.round(box.half_extents, 6)))


def verify_feasible(answer: AnswerSet, scene, gripper=None, cache=None):
    """Filter an answer set to members with a certified grasp/placement.

    Returns (filtered answer set, {member key: certificate json}). A cache
    dict may be shared across calls; certification only depends on the
    static scene, the member, and the goal constraint.
    """
    kept = []
    certs = {}
    for member in answer.members:
        if cache is not None:
            key = _cert_cache_key(scene, answer, member)
            if key not in cache:
                cert = certify_answer(scene, answer, member, gripper)
                cache[key] = cert.to_json() if cert else None
            blob = cache[key]
        else:
            cert = certify_answer(scene, answer, member, gripper)
            blob = cert.to_json() if cert else None
        if blob is None:
            continue
        certs[_key_for(answer.kind, member, len(kept))] = blob
        kept.append(member)
    filtered = AnswerSet(answer.kind, tuple(kept), answer.goal,
                         answer.program, answer.scene_id)
    return filtered, certs


def _pair_rng(seed: int, family_id: str, scene_id: str, attempt: int):
    entropy = [int(seed), zlib.crc32(family_id.encode()),
               zlib.crc32(scene_id.encode()), int(attempt)]
    return np.random.default_rng(np.random.SeedSequence(entropy))


def _weighted_pick(rng, items, weights):
    w = np.asarray(weights, dtype=float)
    return items[int(rng.choice(len(items), p=w / w.sum()))]


def sample_balanced_suite(scenes, n_t: int, n_all: int | None = None,
                          seed: int = 0, retention: str = "gt1",
                          families=None, verify: bool = False,
                          gripper=None, rotation_mask=(),
                          max_trials: int | None = None):
    """Draw a balanced task suite from a scene pool.

    Returns (tasks, ledger, log). The log records one entry per trial with
    the weights in force at pick time, so a replay from counters alone must
    reproduce every decision.
    """
    families = list(families) if families is not None else all_families()
    scenes = list(scenes)
    if not scenes or not families or n_t < 1:
        raise ValueError("need scenes, families, and n_t >= 1")
    by_id = {s.scene_id: s for s in scenes}
    fam_by_id = {f.family_id: f for f in families}
    min_answer = 2 if retention == "gt1" else 1

    compat_cache: dict = {}

    def binding_for(fid, sid, attempt):
        key = (fid, sid, attempt)
        if key not in compat_cache:
            try:
                compat_cache[key] = instantiate_family(
                    fam_by_id[fid], by_id[sid],
                    _pair_rng(seed, fid, sid, attempt),
                    min_answer=min_answer)
            except NoViableBinding:
                compat_cache[key] = None
        return compat_cache[key]

    def compatible(fid):
        out = []
        for s in scenes:
            if s.kind != fam_by_id[fid].scene_kind:
                continue
            b = binding_for(fid, s.scene_id, 0)
            if b is not None and retention_passes(b.answer, retention):
                out.append(s)
        return out

    ledger = SamplerLedger(n_t=n_t, n_all=n_all)
    rng = np.random.default_rng(np.random.SeedSequence([seed, 1]))
    cert_cache: dict = {}
    pair_attempts: dict = {}
    tasks = []
    log = []
    if max_trials is None:
        max_trials = 40 * n_t * len(families)

    for _ in range(max_trials):
        if n_all is not None and ledger.N >= n_all:
            break
        eligible = [f.family_id for f in families
                    if ledger.family_total(f.family_id) < n_t
                    and compatible(f.family_id)]
        if not eligible:
            break
        if n_all is not None:
            # A fixed total ends the loop before quotas fill, so spread the
            # emissions evenly: only families at the current minimum count
            # may be drawn, keeping per-family counts within 1 of each other.
            low = min(ledger.family_total(f) for f in eligible)
            eligible = [f for f in eligible if ledger.family_total(f) == low]
        fw = [ledger.family_weight(f) for f in eligible]
        fid = _weighted_pick(rng, eligible, fw)
        pool = compatible(fid)
        sw = [ledger.scene_weight(s.scene_id, s.difficulty) for s in pool]
        scene = _weighted_pick(rng, pool, sw)
        k = pair_attempts.get((fid, scene.scene_id), 0)
        pair_attempts[(fid, scene.scene_id)] = k + 1
        binding = binding_for(fid, scene.scene_id, k)
        ledger.record_attempt(scene.scene_id)
        entry = {"family_id": fid, "scene_id": scene.scene_id,
                 "difficulty": scene.difficulty,
                 "family_weight": ledger.family_weight(fid),
                 "scene_weight": sw[pool.index(scene)],
                 "retained": False}
        retained = (binding is not None
                    and retention_passes(binding.answer, retention))
        certs = None
        answer = binding.answer if binding else None
        if retained and verify:
            answer, certs = verify_feasible(binding.answer, scene, gripper,
                                            cache=cert_cache)
            retained = retention_passes(answer, retention)
        if retained:
            task = TaskInstance(
                task_id=f"task_{ledger.N:05d}",
                family_id=fid,
                action=binding.action,
                scene_id=scene.scene_id,
                difficulty=scene.difficulty,
                program=binding.program,
                instruction=binding.instruction,
                answer=answer,
                ambiguous=binding.ambiguous,
                alt_program=binding.alt_program,
                alt_answer=binding.alt_answer,
                rotation_mask=tuple(rotation_mask),
                certificates=certs,
            )
            tasks.append(task)
            ledger.record_task(fid, scene.difficulty)
            entry["retained"] = True
            entry["task_id"] = task.task_id
        log.append(entry)
    return tasks, ledger, log


def replay_weights(log, n_t: int):
    """Re-derive the pick-time weights of every logged trial from counters.

    Returns the list of (family_weight, scene_weight) tuples; equality with
    the logged weights certifies the ledger bookkeeping.
    """
    ledger = SamplerLedger(n_t=n_t)
    out = []
    for entry in log:
        fw = ledger.family_weight(entry["family_id"])
        sw = ledger.scene_weight(entry["scene_id"], entry["difficulty"])
        out.append((fw, sw))
        ledger.record_attempt(entry["scene_id"])
        if entry["retained"]:
            ledger.record_task(entry["family_id"], entry["difficulty"])
    return out


# ---------------------------------------------------------------------------
# persistence
# ---------------------------------------------------------------------------

def catalog_hash() -> str:
    from .families import families_to_json
    return hashlib.sha256(families_to_json().encode()).hexdigest()


def scenes_hash(scenes) -> str:
    h = hashlib.sha256()
    for scene in sorted(scenes, key=lambda s: s.scene_id):
        h.update(scene.canonical_bytes())
    return h.hexdigest()


def suite_manifest(seed: int, retention: str, n_t: int, scenes,
                   n_all: int | None = None, extra: dict | None = None) -> dict:
    m = {"seed": int(seed), "retention": retention, "n_t": int(n_t),
         "n_all": n_all, "catalog_hash": catalog_hash(),
         "scene_dir_hash": scenes_hash(scenes)}
    if extra:
        m.update(extra)
    return m


def write_suite(path, tasks, manifest: dict):
    with open(path, "w") as f:
        f.write(json.dumps({"manifest": manifest}, sort_keys=True) + "\n")
        for task in tasks:
            f.write(json.dumps(task.to_json(), sort_keys=True) + "\n")


def read_suite(path):
    """Returns (manifest, tasks)."""
    with open(path) as f:
        lines = [line for line in f if line.strip()]
    manifest = json.loads(lines[0])["manifest"]
    tasks = [TaskInstance.from_json(json.loads(line)) for line in lines[1:]]
    return manifest, tasks
