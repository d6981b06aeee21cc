"""The instruction-family catalog and family instantiation.

Each family fixes an action (pick or place), a spatial aspect, a reference
frame, and a reference role, and carries program skeletons with [R], [I],
[I2], and [O] holes plus natural-language templates. Instantiating a family
on a scene samples a granularity R, a reference O, and parameters I, then
keeps only bindings whose program evaluates to a non-empty answer set on
that scene.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .dsl import Symbol, parse_program, print_program
from .evaluator import (
    AnswerSet,
    EvalError,
    _Evaluator,
    entity_height,
    entity_width,
    evaluate,
)
from .geometry import GeometryError


class NoViableBinding(Exception):
    pass


@dataclass(frozen=True)
class InstructionFamily:
    family_id: str
    action: str          # pick | place
    aspect: str          # attribute | distance | relationship | orientation
    frame: str           # intrinsic | relative | absolute | none
    reference_role: str  # viewer | near | distant | table | shelf | none
    scene_kind: str      # tabletop | shelf
    source: str          # the entity-source sub-program
    legal_R: tuple
    skeletons: dict      # R -> program text with [I], [I2], [O] holes
    phrases: dict        # R -> surface pattern with [I], [I2], [O] holes
    i_kind: dict         # R -> parameter kind tag or None
    templates: tuple     # strings with a [R] hole
    o_suffix: str = ""   # appended to the chosen reference symbol
    o_oriented: bool | None = None  # restrict reference assets

    def to_json(self):
        return {
            "family_id": self.family_id,
            "action": self.action,
            "aspect": self.aspect,
            "frame": self.frame,
            "reference_role": self.reference_role,
            "scene_kind": self.scene_kind,
            "source": self.source,
            "legal_R": list(self.legal_R),
            "skeletons": dict(self.skeletons),
            "phrases": dict(self.phrases),
            "i_kind": {k: v for k, v in self.i_kind.items()},
            "templates": list(self.templates),
            "o_suffix": self.o_suffix,
            "o_oriented": self.o_oriented,
        }


# ---------------------------------------------------------------------------
# catalog construction
# ---------------------------------------------------------------------------

_B = "filterBook(TABLE)"
_SLOT = "filterSlot(SHELF)"
_SPACE = "filterSpace(SHELF)"


def _fam(fid, action, aspect, frame, role, kind, source, legal, skel, phrases,
         ikind, templates, o_suffix="", o_oriented=None):
    return InstructionFamily(
        family_id=fid, action=action, aspect=aspect, frame=frame,
        reference_role=role, scene_kind=kind, source=source,
        legal_R=tuple(legal), skeletons=dict(skel), phrases=dict(phrases),
        i_kind=dict(ikind), templates=tuple(templates),
        o_suffix=o_suffix, o_oriented=o_oriented)


def _distance_families(action, kind, slot_src, space_src):
    """Twelve distance families: four granularities x three references."""
    fams = []
    if action == "pick":
        mk = lambda r: f"take a book {r}"  # noqa: E731
        alt = lambda r: f"pick up a book {r}"  # noqa: E731
        alt2 = lambda r: f"grab a book that is {r}"  # noqa: E731
    else:
        mk = lambda r: f"place the book in a spot {r}"  # noqa: E731
        alt = lambda r: f"put the book somewhere {r}"  # noqa: E731
        alt2 = lambda r: f"slide the book into a spot {r}"  # noqa: E731
    for role in ("viewer", "near", "distant"):
        coarse_src = slot_src
        fine_src = space_src
        fams.append(_fam(
            f"{action}-dist-extreme-{role}", action, "distance", "none", role,
            kind, coarse_src,
            ("Closest", "Farthest"),
            {r: f"filterDist{r}({coarse_src}, [O])"
             for r in ("Closest", "Farthest")},
            {"Closest": "closest to [O]", "Farthest": "farthest from [O]"},
            {"Closest": None, "Farthest": None},
            (mk("[R]"), alt("[R]"), alt2("[R]"))))
        fams.append(_fam(
            f"{action}-dist-rank-{role}", action, "distance", "none", role,
            kind, coarse_src,
            ("RankClosest", "RankFarthest"),
            {r: f"filterDist{r}([I], {coarse_src}, [O])"
             for r in ("RankClosest", "RankFarthest")},
            {"RankClosest": "[I] closest to [O]",
             "RankFarthest": "[I] farthest from [O]"},
            {"RankClosest": "rank", "RankFarthest": "rank"},
            (mk("[R]"), alt("[R]"), alt2("[R]"))))
        fams.append(_fam(
            f"{action}-dist-threshold-{role}", action, "distance", "none",
            role, kind, fine_src,
            ("LessThan", "MoreThan"),
            {r: f"filterDist{r}([I], {fine_src}, [O])"
             for r in ("LessThan", "MoreThan")},
            {"LessThan": "within [I] of [O]",
             "MoreThan": "more than [I] away from [O]"},
            {"LessThan": "dist_cut", "MoreThan": "dist_cut"},
            (mk("[R]"), alt("[R]"), alt2("[R]"))))
        fams.append(_fam(
            f"{action}-dist-precise-{role}", action, "distance", "none", role,
            kind, fine_src,
            ("EqualTo", "Range"),
            {"EqualTo": f"filterDistEqualTo([I], {fine_src}, [O])",
             "Range": f"filterDistRange([I], [I2], {fine_src}, [O])"},
            {"EqualTo": "about [I] away from [O]",
             "Range": "[I] to [I2] away from [O]"},
            {"EqualTo": "dist_eq", "Range": "dist_range"},
            (mk("[R]"), alt("[R]"), alt2("[R]"))))
    return fams


def _pick_families():
    fams = []
    fams.append(_fam(
        "pick-attr-size", "pick", "attribute", "none", "none", "tabletop", _B,
        ("Small", "Medium", "Large"),
        {r: f"filterAttr{r}({_B})" for r in ("Small", "Medium", "Large")},
        {"Small": "small", "Medium": "medium-sized", "Large": "large"},
        {"Small": None, "Medium": None, "Large": None},
        ("take a [R] book from the table", "pick up a [R] book",
         "grab a [R] book")))
    fams.append(_fam(
        "pick-attr-measure", "pick", "attribute", "none", "none", "tabletop",
        _B,
        ("Height", "Width"),
        {r: f"filterAttr{r}([I], {_B})" for r in ("Height", "Width")},
        {"Height": "around [I] high", "Width": "around [I] wide"},
        {"Height": "height", "Width": "width"},
        ("take a book [R]", "pick up the book that is [R]",
         "grab a book [R] from the table")))

    fams.extend(_distance_families("pick", "tabletop", _B, _B))

    fams.append(_fam(
        "pick-rel-table-side", "pick", "relationship", "intrinsic", "table",
        "tabletop", _B,
        ("Left", "Right", "Front", "Behind"),
        {r: f"filterRel{r}({_B}, [O])"
         for r in ("Left", "Right", "Front", "Behind")},
        {"Left": "on the left side of the table",
         "Right": "on the right side of the table",
         "Front": "at the front of the table",
         "Behind": "at the back of the table"},
        {r: None for r in ("Left", "Right", "Front", "Behind")},
        ("take a book [R]", "pick up a book [R]", "grab a book sitting [R]")))
    fams.append(_fam(
        "pick-rel-table-extreme", "pick", "relationship", "intrinsic",
        "table", "tabletop", _B,
        ("LeftMost", "RightMost"),
        {r: f"filterRel{r}({_B}, [O])" for r in ("LeftMost", "RightMost")},
        {"LeftMost": "leftmost", "RightMost": "rightmost"},
        {"LeftMost": None, "RightMost": None},
        ("take the [R] book on the table", "pick up the [R] book",
         "grab the [R] book")))
    fams.append(_fam(
        "pick-rel-table-rank", "pick", "relationship", "intrinsic", "table",
        "tabletop", _B,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterRel{r}([I], {_B}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "[I] leftmost", "RankRightMost": "[I] rightmost"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("take the [R] book on the table", "pick up the [R] book",
         "grab the [R] book")))
    fams.append(_fam(
        "pick-rel-between", "pick", "relationship", "intrinsic", "near",
        "tabletop", _B,
        ("Between",),
        {"Between":
         f"filterRelBetween({_B}, filter([I], TABLE), filter([I2], TABLE))"},
        {"Between": "between [I] and [I2]"},
        {"Between": "pair"},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]")))
    fams.append(_fam(
        "pick-rel-viewer-side", "pick", "relationship", "relative", "viewer",
        "tabletop", _B,
        ("Left", "Right"),
        {r: f"filterRel{r}({_B}, [O])" for r in ("Left", "Right")},
        {"Left": "to your left", "Right": "to your right"},
        {"Left": None, "Right": None},
        ("take a book [R]", "pick up a book [R]", "grab a book [R]")))
    fams.append(_fam(
        "pick-rel-viewer-extreme", "pick", "relationship", "relative",
        "viewer", "tabletop", _B,
        ("LeftMost", "RightMost"),
        {r: f"filterRel{r}({_B}, [O])" for r in ("LeftMost", "RightMost")},
        {"LeftMost": "leftmost", "RightMost": "rightmost"},
        {"LeftMost": None, "RightMost": None},
        ("take the [R] book from your point of view",
         "pick up the book that looks [R] to you",
         "grab the [R] book as you see it")))
    fams.append(_fam(
        "pick-rel-viewer-rank", "pick", "relationship", "relative", "viewer",
        "tabletop", _B,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterRel{r}([I], {_B}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "[I] leftmost", "RankRightMost": "[I] rightmost"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("take the [R] book from your point of view",
         "pick up the book that looks [R] to you",
         "grab the [R] book as you see it")))
    fams.append(_fam(
        "pick-rel-near-side", "pick", "relationship", "intrinsic", "near",
        "tabletop", _B,
        ("Left", "Right", "Front", "Behind"),
        {r: f"filterRel{r}({_B}, [O])"
         for r in ("Left", "Right", "Front", "Behind")},
        {"Left": "to the left of [O]", "Right": "to the right of [O]",
         "Front": "in front of [O]", "Behind": "behind [O]"},
        {r: None for r in ("Left", "Right", "Front", "Behind")},
        ("take a book [R]", "pick up a book [R]", "grab the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))

    # orientation: which way book covers point, plus resting pose
    facing_int = {"Left": "with its cover facing [O]'s left",
                  "Right": "with its cover facing [O]'s right",
                  "Front": "facing the same way as [O]",
                  "Behind": "facing opposite to [O]"}
    facing_rel = {"Left": "with its cover facing your left",
                  "Right": "with its cover facing your right",
                  "Front": "facing away from you",
                  "Behind": "facing you"}
    fams.append(_fam(
        "pick-ori-dir-int", "pick", "orientation", "intrinsic", "near",
        "tabletop", _B,
        ("Left", "Right", "Front", "Behind"),
        {r: f"filterOri{r}({_B}, [O])"
         for r in ("Left", "Right", "Front", "Behind")},
        facing_int, {r: None for r in facing_int},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))
    fams.append(_fam(
        "pick-ori-direct-int", "pick", "orientation", "intrinsic", "near",
        "tabletop", _B,
        ("DirectLeft", "DirectRight"),
        {r: f"filterOri{r}({_B}, [O])" for r in ("DirectLeft", "DirectRight")},
        {"DirectLeft": "with its cover pointing straight at [O]'s left",
         "DirectRight": "with its cover pointing straight at [O]'s right"},
        {"DirectLeft": None, "DirectRight": None},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))
    fams.append(_fam(
        "pick-ori-rank-int", "pick", "orientation", "intrinsic", "near",
        "tabletop", _B,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterOri{r}([I], {_B}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "[I] most turned toward [O]'s left",
         "RankRightMost": "[I] most turned toward [O]'s right"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))
    fams.append(_fam(
        "pick-ori-fine-int", "pick", "orientation", "intrinsic", "near",
        "tabletop", _B,
        ("ClockPosition", "TiltDegree"),
        {"ClockPosition": f"filterOriClockPosition([I], {_B}, [O])",
         "TiltDegree": f"filterOriTiltDegree([I], {_B}, [O])"},
        {"ClockPosition": "with its cover facing [O]'s [I]",
         "TiltDegree": "tilted at about [I]"},
        {"ClockPosition": "clock", "TiltDegree": "tilt"},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))
    fams.append(_fam(
        "pick-ori-dir-rel", "pick", "orientation", "relative", "viewer",
        "tabletop", _B,
        ("Left", "Right", "Front", "Behind"),
        {r: f"filterOri{r}({_B}, [O])"
         for r in ("Left", "Right", "Front", "Behind")},
        facing_rel, {r: None for r in facing_rel},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]")))
    fams.append(_fam(
        "pick-ori-direct-rel", "pick", "orientation", "relative", "viewer",
        "tabletop", _B,
        ("DirectLeft", "DirectRight"),
        {r: f"filterOri{r}({_B}, [O])" for r in ("DirectLeft", "DirectRight")},
        {"DirectLeft": "with its cover pointing straight to your left",
         "DirectRight": "with its cover pointing straight to your right"},
        {"DirectLeft": None, "DirectRight": None},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]")))
    fams.append(_fam(
        "pick-ori-rank-rel", "pick", "orientation", "relative", "viewer",
        "tabletop", _B,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterOri{r}([I], {_B}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "[I] most turned toward your left",
         "RankRightMost": "[I] most turned toward your right"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]")))
    fams.append(_fam(
        "pick-ori-fine-rel", "pick", "orientation", "relative", "viewer",
        "tabletop", _B,
        ("ClockPosition", "TiltDegree"),
        {"ClockPosition": f"filterOriClockPosition([I], {_B}, [O])",
         "TiltDegree": f"filterOriTiltDegree([I], {_B}, [O])"},
        {"ClockPosition": "with its cover facing your [I]",
         "TiltDegree": "tilted at about [I]"},
        {"ClockPosition": "clock", "TiltDegree": "tilt"},
        ("take the book [R]", "pick up the book [R]", "grab the book [R]")))
    fams.append(_fam(
        "pick-ori-pose", "pick", "orientation", "absolute", "none",
        "tabletop", _B,
        ("Flat", "Vertical", "Tilted"),
        {r: f"filterOri{r}({_B})" for r in ("Flat", "Vertical", "Tilted")},
        {"Flat": "lying flat", "Vertical": "standing upright",
         "Tilted": "leaning at a tilt"},
        {"Flat": None, "Vertical": None, "Tilted": None},
        ("take a book [R] on the table", "pick up a book [R]",
         "grab a book that is [R]")))
    return fams


def _place_families():
    fams = []
    fams.append(_fam(
        "place-attr-size", "place", "attribute", "none", "none", "shelf",
        _SLOT,
        ("Small", "Medium", "Large"),
        {r: f"filterAttr{r}({_SLOT})" for r in ("Small", "Medium", "Large")},
        {"Small": "a small slot", "Medium": "a medium-sized slot",
         "Large": "a large slot"},
        {"Small": None, "Medium": None, "Large": None},
        ("place the book in [R]", "put the book into [R]",
         "shelve the book in [R]")))
    fams.append(_fam(
        "place-attr-occupancy", "place", "attribute", "none", "none", "shelf",
        _SLOT,
        ("Empty", "NonEmpty", "Emptiest"),
        {r: f"filterAttr{r}({_SLOT})" for r in ("Empty", "NonEmpty",
                                                "Emptiest")},
        {"Empty": "an empty slot", "NonEmpty": "a partly occupied slot",
         "Emptiest": "the emptiest slot"},
        {"Empty": None, "NonEmpty": None, "Emptiest": None},
        ("place the book in [R]", "put the book into [R]",
         "shelve the book in [R]")))
    fams.append(_fam(
        "place-attr-height", "place", "attribute", "none", "none", "shelf",
        _SLOT,
        ("Height",),
        {"Height": f"filterAttrHeight([I], {_SLOT})"},
        {"Height": "a slot around [I] tall"},
        {"Height": "height"},
        ("place the book in [R]", "put the book into [R]",
         "shelve the book in [R]")))
    fams.append(_fam(
        "place-attr-width", "place", "attribute", "none", "none", "shelf",
        _SLOT,
        ("Width",),
        {"Width": f"filterAttrWidth([I], {_SLOT})"},
        {"Width": "a slot around [I] wide"},
        {"Width": "width"},
        ("place the book in [R]", "put the book into [R]",
         "shelve the book in [R]")))
    fams.append(_fam(
        "place-attr-index1d", "place", "attribute", "none", "none", "shelf",
        _SLOT,
        ("Index1D",),
        {"Index1D": f"filterAttrIndex1D([I], {_SLOT})"},
        {"Index1D": "at row [I] of the shelf"},
        {"Index1D": "row"},
        ("place the book [R]", "put the book [R]", "shelve the book [R]")))
    fams.append(_fam(
        "place-attr-index2d", "place", "attribute", "none", "none", "shelf",
        _SLOT,
        ("Index2D",),
        {"Index2D": f"filterAttrIndex2D([I], [I2], {_SLOT})"},
        {"Index2D": "at row [I], column [I2] of the shelf"},
        {"Index2D": "rowcol"},
        ("place the book [R]", "put the book [R]", "shelve the book [R]")))

    fams.extend(_distance_families("place", "shelf", _SLOT, _SPACE))

    fams.append(_fam(
        "place-rel-shelf-side", "place", "relationship", "intrinsic", "shelf",
        "shelf", _SLOT,
        ("Left", "Right", "Upper", "Lower"),
        {r: f"filterRel{r}({_SLOT}, [O])"
         for r in ("Left", "Right", "Upper", "Lower")},
        {"Left": "on the left side of the shelf",
         "Right": "on the right side of the shelf",
         "Upper": "in the upper part of the shelf",
         "Lower": "in the lower part of the shelf"},
        {r: None for r in ("Left", "Right", "Upper", "Lower")},
        ("place the book in a slot [R]", "put the book [R]",
         "shelve the book [R]")))
    fams.append(_fam(
        "place-rel-shelf-extreme", "place", "relationship", "intrinsic",
        "shelf", "shelf", _SLOT,
        ("LeftMost", "RightMost"),
        {r: f"filterRel{r}({_SLOT}, [O])" for r in ("LeftMost", "RightMost")},
        {"LeftMost": "a leftmost slot", "RightMost": "a rightmost slot"},
        {"LeftMost": None, "RightMost": None},
        ("place the book in [R] on the shelf", "put the book into [R]",
         "shelve the book in [R]")))
    fams.append(_fam(
        "place-rel-shelf-rank", "place", "relationship", "intrinsic", "shelf",
        "shelf", _SLOT,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterRel{r}([I], {_SLOT}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "a [I] leftmost slot",
         "RankRightMost": "a [I] rightmost slot"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("place the book in [R] on the shelf", "put the book into [R]",
         "shelve the book in [R]")))
    fams.append(_fam(
        "place-rel-between", "place", "relationship", "intrinsic", "near",
        "shelf", _SPACE,
        ("Between",),
        {"Between": f"filterRelBetween({_SPACE}, filter([I], SHELF), "
                    f"filter([I2], SHELF))"},
        {"Between": "between [I] and [I2]"},
        {"Between": "pair"},
        ("place the book [R]", "put the book [R]", "shelve the book [R]")))
    fams.append(_fam(
        "place-rel-viewer-side", "place", "relationship", "relative",
        "viewer", "shelf", _SLOT,
        ("Left", "Right"),
        {r: f"filterRel{r}({_SLOT}, [O])" for r in ("Left", "Right")},
        {"Left": "to your left", "Right": "to your right"},
        {"Left": None, "Right": None},
        ("place the book in a slot [R]", "put the book in a slot [R]",
         "shelve the book somewhere [R]")))
    fams.append(_fam(
        "place-rel-viewer-extreme", "place", "relationship", "relative",
        "viewer", "shelf", _SLOT,
        ("LeftMost", "RightMost"),
        {r: f"filterRel{r}({_SLOT}, [O])" for r in ("LeftMost", "RightMost")},
        {"LeftMost": "the slot leftmost from your point of view",
         "RightMost": "the slot rightmost from your point of view"},
        {"LeftMost": None, "RightMost": None},
        ("place the book in [R]", "put the book into [R]",
         "shelve the book in [R]")))
    fams.append(_fam(
        "place-rel-viewer-rank", "place", "relationship", "relative",
        "viewer", "shelf", _SLOT,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterRel{r}([I], {_SLOT}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "the [I] leftmost slot from your point of view",
         "RankRightMost": "the [I] rightmost slot from your point of view"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("place the book in [R]", "put the book into [R]",
         "shelve the book in [R]")))

    dir_R = ("Left", "Right", "Above", "Below",
             "DirectLeft", "DirectRight", "DirectAbove", "DirectBelow")
    dir_phrases = {"Left": "to the left of [O]", "Right": "to the right of [O]",
                   "Above": "above [O]", "Below": "below [O]",
                   "DirectLeft": "immediately to the left of [O]",
                   "DirectRight": "immediately to the right of [O]",
                   "DirectAbove": "directly above [O]",
                   "DirectBelow": "directly below [O]"}
    fams.append(_fam(
        "place-ori-dir-int", "place", "orientation", "intrinsic", "near",
        "shelf", _SLOT,
        dir_R,
        {r: f"filterOri{r}({_SLOT}, [O])" for r in dir_R},
        dir_phrases, {r: None for r in dir_R},
        ("place the book in a slot [R]", "put the book in a slot [R]",
         "shelve the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))
    fams.append(_fam(
        "place-ori-rank-int", "place", "orientation", "intrinsic", "near",
        "shelf", _SLOT,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterOri{r}([I], {_SLOT}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "in the [I] slot to [O]'s left",
         "RankRightMost": "in the [I] slot to [O]'s right"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("place the book [R]", "put the book [R]", "shelve the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))
    fams.append(_fam(
        "place-ori-clock-int", "place", "orientation", "intrinsic", "near",
        "shelf", _SPACE,
        ("ClockPosition",),
        {"ClockPosition": f"filterOriClockPosition([I], {_SPACE}, [O])"},
        {"ClockPosition": "at [O]'s [I]"},
        {"ClockPosition": "clock"},
        ("place the book [R]", "put the book [R]", "shelve the book [R]"),
        o_suffix="-intrinsic", o_oriented=True))
    fams.append(_fam(
        "place-ori-dir-rel", "place", "orientation", "relative", "near",
        "shelf", _SLOT,
        dir_R,
        {r: f"filterOri{r}({_SLOT}, [O])" for r in dir_R},
        dir_phrases, {r: None for r in dir_R},
        ("place the book in a slot [R]", "put the book in a slot [R]",
         "shelve the book [R]"),
        o_suffix="-relative", o_oriented=False))
    fams.append(_fam(
        "place-ori-rank-rel", "place", "orientation", "relative", "near",
        "shelf", _SLOT,
        ("RankLeftMost", "RankRightMost"),
        {r: f"filterOri{r}([I], {_SLOT}, [O])"
         for r in ("RankLeftMost", "RankRightMost")},
        {"RankLeftMost": "in the [I] slot left of [O] as you see it",
         "RankRightMost": "in the [I] slot right of [O] as you see it"},
        {"RankLeftMost": "rank", "RankRightMost": "rank"},
        ("place the book [R]", "put the book [R]", "shelve the book [R]"),
        o_suffix="-relative", o_oriented=False))
    fams.append(_fam(
        "place-ori-clock-rel", "place", "orientation", "relative", "viewer",
        "shelf", _SPACE,
        ("ClockPosition",),
        {"ClockPosition": f"filterOriClockPosition([I], {_SPACE}, [O])"},
        {"ClockPosition": "at your [I]"},
        {"ClockPosition": "clock"},
        ("place the book in a spot [R]", "put the book [R]",
         "shelve the book [R]")))
    fams.append(_fam(
        "place-ori-vert-abs", "place", "orientation", "absolute", "distant",
        "shelf", _SLOT,
        ("Above", "Below"),
        {r: f"filterOri{r}({_SLOT}, [O])" for r in ("Above", "Below")},
        {"Above": "in a slot higher than [O]",
         "Below": "in a slot lower than [O]"},
        {"Above": None, "Below": None},
        ("place the book [R]", "put the book [R]", "shelve the book [R]"),
        o_suffix="-relative", o_oriented=None))
    fams.append(_fam(
        "place-ori-pose", "place", "orientation", "absolute", "none",
        "shelf", _SPACE,
        ("Flat", "Vertical", "Tilted"),
        {r: f"placeOri{r}({_SPACE})" for r in ("Flat", "Vertical", "Tilted")},
        {"Flat": "lying flat", "Vertical": "standing upright",
         "Tilted": "at a tilt"},
        {"Flat": None, "Vertical": None, "Tilted": None},
        ("place the book [R] on the shelf", "put the book on the shelf [R]",
         "shelve the book [R]")))
    fams.append(_fam(
        "place-ori-tilt", "place", "orientation", "absolute", "none",
        "shelf", _SPACE,
        ("TiltDegree",),
        {"TiltDegree": f"placeOriTiltDegree([I], {_SPACE})"},
        {"TiltDegree": "at a tilt angle of about [I]"},
        {"TiltDegree": "goal_tilt"},
        ("place the book [R]", "put the book on the shelf [R]",
         "shelve the book [R]")))
    return fams


_FAMILIES: list[InstructionFamily] | None = None


def all_families() -> list[InstructionFamily]:
    global _FAMILIES
    if _FAMILIES is None:
        _FAMILIES = _pick_families() + _place_families()
    return list(_FAMILIES)


def family_by_id(family_id: str) -> InstructionFamily:
    for fam in all_families():
        if fam.family_id == family_id:
            return fam
    raise KeyError(family_id)


def catalog_counts() -> dict:
    fams = all_families()
    return {
        "families": len(fams),
        "pick": sum(1 for f in fams if f.action == "pick"),
        "place": sum(1 for f in fams if f.action == "place"),
        "types": sum(len(f.legal_R) for f in fams),
    }


def families_to_json() -> str:
    return json.dumps([f.to_json() for f in all_families()], indent=2)


# ---------------------------------------------------------------------------
# instantiation
# ---------------------------------------------------------------------------

def format_distance(meters: float) -> str:
    cm = round(meters * 100)
    if cm % 50 == 0:
        m = cm / 100
        text = f"{m:g}"
        return f"{text} meter" if m == 1 else f"{text} meters"
    return f"{cm} centimeters"


_ORDINALS = {1: "first", 2: "second", 3: "third", 4: "fourth", 5: "fifth"}


def _format_i(kind, value) -> str:
    if kind == "rank":
        return _ORDINALS[value]
    if kind in ("dist_cut", "dist_eq", "dist_range"):
        return format_distance(value)
    if kind in ("height", "width"):
        return f"{round(value * 100)} centimeters"
    if kind == "clock":
        return f"{value} o'clock"
    if kind in ("tilt", "goal_tilt"):
        return f"{round(value)} degrees"
    if kind in ("row", "rowcol"):
        return str(value)
    raise ValueError(f"unformattable parameter kind {kind!r}")


def _literal(value):
    if isinstance(value, Symbol):
        return value.name
    if isinstance(value, float):
        return repr(round(value, 6))
    return str(value)


@dataclass
class Binding:
    family_id: str
    action: str
    aspect: str
    R: str
    program: str
    instruction: str
    answer: AnswerSet
    alt_program: str | None = None
    alt_answer: AnswerSet | None = None
    ambiguous: bool = False
    o_symbol: str | None = None
    i_values: tuple = ()

    def union_ids(self):
        ids = list(self.answer.ids())
        if self.alt_answer is not None:
            ids += [i for i in self.alt_answer.ids() if i not in ids]
        return ids


def _reference_symbols(family, scene, ev):
    role = family.reference_role
    if role == "viewer":
        return ["viewer"]
    if role == "table":
        return ["table-intrinsic"]
    if role == "shelf":
        return ["shelf-intrinsic"]
    if role in ("near", "distant"):
        cat = "near_ref" if role == "near" else "distant_ref"
        names = []
        for obj in ev.source_objects():
            if obj.category != cat:
                continue
            if family.o_oriented is True and obj.front_axis is None:
                continue
            if family.o_oriented is False and obj.front_axis is not None:
                continue
            names.append(obj.asset.name + family.o_suffix)
        return names
    return [None]


def _source_entities(family, scene, ev):
    return ev.eval(parse_program(family.source))


def _candidate_values(family, R, scene, ev, o_sym, rng):
    """Parameter candidates for one R, derived from the scene so that the
    value-filtered program has a chance to be non-vacuous."""
    kind = family.i_kind[R]
    if kind is None:
        return [()]
    if kind == "rank":
        _, items = _source_entities(family, scene, ev)
        top = min(4, len(items))
        return [(k,) for k in range(2, top + 1)]
    if kind in ("dist_cut", "dist_eq", "dist_range"):
        from .evaluator import entity_distance
        _, items = _source_entities(family, scene, ev)
        ref = ev.resolve_distance_ref(Symbol(o_sym))
        dists = sorted(entity_distance(e, ref) for e in items)
        if kind == "dist_eq":
            vals = {round(round(d / 0.05) * 0.05, 2) for d in dists}
            return [(v,) for v in sorted(vals) if v >= 0.05]
        if kind == "dist_range":
            out = []
            for d in dists:
                lo = round((d // 0.25) * 0.25, 2)
                out.append((lo, round(lo + 0.25, 2)))
                out.append((lo, round(lo + 0.5, 2)))
            return out
        cuts = {round(d + 0.05, 1) for d in dists}
        cuts |= {round(d - 0.05, 1) for d in dists}
        return [(c,) for c in sorted(cuts) if c > 0]
    if kind in ("height", "width"):
        measure = entity_height if kind == "height" else entity_width
        _, items = _source_entities(family, scene, ev)
        vals = sorted({round(measure(e), 2) for e in items})
        return [(v,) for v in vals if v > 0]
    if kind == "clock":
        return [(h,) for h in range(1, 13)]
    if kind == "tilt":
        return [(t,) for t in range(15, 80, 5)]
    if kind == "goal_tilt":
        return [(t,) for t in range(20, 75, 10)]
    if kind == "row":
        rows = sorted({s.row for s in scene.slots})
        return [(r,) for r in rows]
    if kind == "rowcol":
        return [(s.row, s.col) for s in scene.slots]
    if kind == "pair":
        cat = "near_ref"
        names = [o.asset.name for o in ev.source_objects()
                 if o.category == cat]
        return [(Symbol(a), Symbol(b))
                for i, a in enumerate(names) for b in names[i + 1:]]
    raise ValueError(f"unknown parameter kind {kind!r}")


_ALT_SWAPS = (("-intrinsic", "-relative"), ("-relative", "-intrinsic"))


def _alternate_symbol(o_sym):
    if o_sym is None or o_sym == "viewer":
        return None
    for old, new in _ALT_SWAPS:
        if o_sym.endswith(old):
            return o_sym[:-len(old)] + new
    return None


def _display_of(scene, o_sym):
    if o_sym == "viewer":
        return "you"
    base = o_sym
    for suffix, _ in _ALT_SWAPS:
        if base.endswith(suffix):
            base = base[:-len(suffix)]
    if base in ("table-intrinsic", "table"):
        return "the table"
    if base in ("shelf-intrinsic", "shelf"):
        return "the shelf"
    for obj in scene.objects:
        if obj.asset.name == base:
            return f"the {obj.label}"
    return base


def instantiate_family(family, scene, rng, min_answer: int = 1,
                       max_tries: int = 60) -> Binding:
    """Bind R, O, and I on a scene; every returned binding is non-vacuous."""
    if scene.kind != family.scene_kind:
        raise NoViableBinding(
            f"{family.family_id} needs a {family.scene_kind} scene")
    ev = _Evaluator(scene)
    r_order = list(family.legal_R)
    rng.shuffle(r_order)
    tries = 0
    for R in r_order:
        o_syms = _reference_symbols(family, scene, ev)
        rng.shuffle(o_syms)
        for o_sym in o_syms:
            try:
                cands = _candidate_values(family, R, scene, ev, o_sym, rng)
            except (EvalError, GeometryError):
                continue
            rng.shuffle(cands)
            preferred = None
            for ivals in cands:
                tries += 1
                if tries > max_tries and preferred is not None:
                    break
                if tries > 3 * max_tries:
                    break
                text = family.skeletons[R]
                if o_sym is not None:
                    text = text.replace("[O]", o_sym)
                holes = ("[I]", "[I2]")
                for hole, val in zip(holes, ivals):
                    text = text.replace(hole, _literal(val))
                try:
                    answer = evaluate(text, scene)
                except (EvalError, GeometryError):
                    continue
                if len(answer.members) < min_answer:
                    continue
                _, base_items = _source_entities(family, scene, ev)
                proper = len(answer.members) < len(base_items)
                binding = _finish_binding(family, scene, rng, R, text,
                                          o_sym, ivals, answer)
                if proper:
                    return binding
                if preferred is None:
                    preferred = binding
            if preferred is not None:
                return preferred
    raise NoViableBinding(family.family_id)


def _finish_binding(family, scene, rng, R, text, o_sym, ivals, answer):
    alt_text = None
    alt_answer = None
    alt_sym = _alternate_symbol(o_sym)
    if o_sym == "table-intrinsic":
        alt_sym = "table-relative"
    elif o_sym == "shelf-intrinsic":
        alt_sym = "shelf-relative"
    if alt_sym is not None and family.frame in ("intrinsic", "relative"):
        candidate = text.replace(o_sym, alt_sym)
        try:
            alt_answer = evaluate(candidate, scene)
            alt_text = candidate
        except (EvalError, GeometryError):
            alt_answer = None
            alt_text = None
    ambiguous = (alt_answer is not None
                 and set(alt_answer.ids()) != set(answer.ids()))
    if not ambiguous:
        alt_text, alt_answer = None, None

    template = str(rng.choice(list(family.templates)))
    phrase = family.phrases[R]
    sentence = template.replace("[R]", phrase)
    kind = family.i_kind[R]
    if kind == "pair":
        sentence = sentence.replace("[I2]", _display_of(scene, ivals[1].name))
        sentence = sentence.replace("[I]", _display_of(scene, ivals[0].name))
    elif kind == "rowcol":
        sentence = sentence.replace("[I2]", str(ivals[1]))
        sentence = sentence.replace("[I]", str(ivals[0]))
    elif kind is not None:
        if len(ivals) > 1:
            sentence = sentence.replace("[I2]", _format_i(kind, ivals[1]))
        sentence = sentence.replace("[I]", _format_i(kind, ivals[0]))
    if o_sym is not None:
        sentence = sentence.replace("[O]", _display_of(scene, o_sym))
    return Binding(
        family_id=family.family_id, action=family.action,
        aspect=family.aspect, R=R, program=text, instruction=sentence,
        answer=answer, alt_program=alt_text, alt_answer=alt_answer,
        ambiguous=ambiguous, o_symbol=o_sym,
        i_values=tuple(v.name if isinstance(v, Symbol) else v
                       for v in ivals))
