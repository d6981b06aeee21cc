"""Asset catalog: names, categories, bounding dimensions, orientation flags.

Catalog dimensions are stored in centimeters as (L, W, H); everything else in
the package works in meters. For reference objects and furniture L is the
depth (front-to-back), W the lateral width, and H the vertical height. For
books L is the long cover edge, W the short cover edge, and H the thickness.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources

CATEGORIES = ("book", "near_ref", "distant_ref", "table", "shelf", "support")
SIZE_CLASSES = ("small", "medium", "large")


@dataclass(frozen=True)
class AssetSpec:
    name: str
    display: str
    category: str
    oriented: bool
    dims_cm: tuple[float, float, float] | None = None
    dims_cm_range: dict | None = None  # books: {"L": [lo,hi], ...}
    size_class: str | None = None
    grid: tuple[int, int] | None = None  # shelves: (rows, cols)

    def __post_init__(self):
        if self.category not in CATEGORIES:
            raise ValueError(f"unknown category {self.category!r}")
        if (self.dims_cm is None) == (self.dims_cm_range is None):
            raise ValueError("exactly one of dims_cm / dims_cm_range required")
        if self.dims_cm is not None and any(d <= 0 for d in self.dims_cm):
            raise ValueError("dims must be strictly positive")
        if self.dims_cm_range is not None:
            for k in ("L", "W", "H"):
                lo, hi = self.dims_cm_range[k]
                if not (0 < lo <= hi):
                    raise ValueError(f"bad range for {k}")

    @property
    def dims_m(self) -> tuple[float, float, float]:
        if self.dims_cm is None:
            raise ValueError(f"{self.name} has ranged dims; sample instead")
        return tuple(d / 100.0 for d in self.dims_cm)

    def sample_dims_m(self, rng) -> tuple[float, float, float]:
        """Draw concrete (L, W, H) in meters; fixed assets return their dims."""
        if self.dims_cm is not None:
            return self.dims_m
        r = self.dims_cm_range
        return tuple(rng.uniform(r[k][0], r[k][1]) / 100.0 for k in ("L", "W", "H"))


class Catalog:
    def __init__(self, assets: list[AssetSpec]):
        self.assets = list(assets)
        self._by_name = {a.name: a for a in self.assets}
        if len(self._by_name) != len(self.assets):
            raise ValueError("duplicate asset names")

    def __getitem__(self, name: str) -> AssetSpec:
        return self._by_name[name]

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def by_category(self, category: str) -> list[AssetSpec]:
        return [a for a in self.assets if a.category == category]

    def book_volume_bounds_m3(self) -> dict[str, tuple[float, float]]:
        """Min/max achievable book volume per size class, in cubic meters."""
        out = {}
        for a in self.by_category("book"):
            r = a.dims_cm_range
            lo = r["L"][0] * r["W"][0] * r["H"][0] * 1e-6
            hi = r["L"][1] * r["W"][1] * r["H"][1] * 1e-6
            out[a.size_class] = (lo, hi)
        return out

    def book_size_thresholds_m3(self) -> tuple[float, float]:
        """Volume tercile boundaries separating small/medium and medium/large.

        The three catalog volume ranges are disjoint, so the midpoint between
        consecutive ranges splits any sampled book into its generating class.
        """
        b = self.book_volume_bounds_m3()
        return (0.5 * (b["small"][1] + b["medium"][0]),
                0.5 * (b["medium"][1] + b["large"][0]))

    def classify_book_volume(self, volume_m3: float) -> str:
        t1, t2 = self.book_size_thresholds_m3()
        if volume_m3 < t1:
            return "small"
        return "medium" if volume_m3 < t2 else "large"


def load_catalog() -> Catalog:
    raw = json.loads(resources.files("spatialbench.data")
                     .joinpath("assets.json").read_text())
    assert raw["units"] == "cm"
    assets = []
    for d in raw["assets"]:
        assets.append(AssetSpec(
            name=d["name"],
            display=d["display"],
            category=d["category"],
            oriented=d["oriented"],
            dims_cm=tuple(d["dims_cm"]) if "dims_cm" in d else None,
            dims_cm_range=d.get("dims_cm_range"),
            size_class=d.get("size_class"),
            grid=tuple(d["grid"]) if "grid" in d else None,
        ))
    return Catalog(assets)


_DEFAULT: Catalog | None = None


def default_catalog() -> Catalog:
    global _DEFAULT
    if _DEFAULT is None:
        _DEFAULT = load_catalog()
    return _DEFAULT
