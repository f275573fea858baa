"""Bit-stream feature catalog.

Each feature row carries a label, a display ID range, a depth multiplicity
and its membership in the simple (SM) and elaborate (EM) model variants.
Rows are expanded into a dense slot layout, one slot per (row, depth).

The ID ranges are display metadata only; ID 85 is printed for both
``TrIntraY`` and ``TrIntraC`` and ``mergeAMP`` covers only IDs 38..39, so
it gets two depth slots instead of four.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass
from functools import cached_property, lru_cache

import numpy as np

CATALOG_VERSION = "hevc-enc-features/1"

E0_LABEL = "E0"


class FeatureCategory(str, enum.Enum):
    GENERAL = "General"
    INTRA = "Intra"
    INTER = "Inter"
    RESIDUAL = "Residual"
    INLOOP = "InLoop"


class Variant(str, enum.Enum):
    SM = "SM"
    EM = "EM"

    @classmethod
    def parse(cls, value: "str | Variant") -> "Variant":
        if isinstance(value, Variant):
            return value
        return cls(str(value).upper())


@dataclass(frozen=True)
class FeatureDef:
    label: str
    table_id_lo: int
    table_id_hi: int
    depth_count: int
    category: FeatureCategory
    in_sm: bool
    in_em: bool

    @property
    def has_depth(self) -> bool:
        return self.depth_count > 1

    def slot_name(self, depth: int) -> str:
        if not 0 <= depth < self.depth_count:
            raise IndexError(f"{self.label} has no depth {depth}")
        return f"{self.label}_d{depth}" if self.has_depth else self.label


_G, _I, _P, _R, _L = (
    FeatureCategory.GENERAL,
    FeatureCategory.INTRA,
    FeatureCategory.INTER,
    FeatureCategory.RESIDUAL,
    FeatureCategory.INLOOP,
)

# label, id_lo, id_hi, depth_count, category, SM tick, EM tick
_ROWS: tuple[tuple[str, int, int, int, FeatureCategory, bool, bool], ...] = (
    ("E0", 1, 1, 1, _G, True, True),
    ("Islice", 2, 2, 1, _G, True, True),
    ("PBslice", 3, 3, 1, _G, True, True),
    ("intraCU", 4, 4, 1, _I, True, True),
    ("pla", 5, 8, 4, _I, False, True),
    ("dc", 9, 12, 4, _I, False, True),
    ("hvd", 13, 16, 4, _I, False, True),
    ("ang", 17, 20, 4, _I, False, True),
    ("all", 21, 24, 4, _I, True, False),
    ("noMPM", 25, 25, 1, _I, True, True),
    ("skip", 26, 29, 4, _P, True, True),
    ("merge", 30, 33, 4, _P, True, True),
    ("mergeSMP", 34, 37, 4, _P, True, True),
    ("mergeAMP", 38, 39, 2, _P, True, True),
    ("inter", 40, 43, 4, _P, True, True),
    ("interSMP", 44, 47, 4, _P, False, True),
    ("interAMP", 48, 51, 4, _P, False, True),
    ("interCU", 52, 55, 4, _P, True, False),
    ("fracpelHor", 56, 59, 4, _P, False, True),
    ("fracpelVer", 60, 63, 4, _P, False, True),
    ("fracpelAvg", 64, 64, 1, _P, True, False),
    ("chrHalfpel", 65, 68, 4, _P, True, True),
    ("bi", 69, 69, 1, _P, True, True),
    ("MVD", 70, 70, 1, _P, True, True),
    ("uni", 71, 71, 1, _P, True, True),
    ("fracopsHor", 72, 72, 1, _P, False, True),
    ("fracopsVer", 73, 73, 1, _P, False, True),
    ("fracopsBoth", 74, 77, 4, _P, True, False),
    ("coeff", 78, 78, 1, _R, True, True),
    ("coeffg1", 79, 79, 1, _R, False, True),
    ("CSBF", 80, 80, 1, _R, False, True),
    ("val", 81, 81, 1, _R, True, True),
    ("TrIntraY", 82, 85, 4, _R, False, True),
    ("TrIntraC", 85, 88, 4, _R, False, True),
    ("TrInterY", 89, 92, 4, _R, False, True),
    ("TrInterC", 93, 96, 4, _R, False, True),
    ("Tr", 97, 100, 4, _R, True, False),
    ("TSF", 101, 101, 1, _R, False, True),
    ("zeroCoeff", 102, 102, 1, _R, False, True),
    ("Bs0", 103, 103, 1, _L, False, True),
    ("Bs1", 104, 104, 1, _L, False, True),
    ("Bs2", 105, 105, 1, _L, False, True),
    ("Bs", 106, 106, 1, _L, True, False),
    ("SAO_Y_BO", 107, 107, 1, _L, False, True),
    ("SAO_Y_EO", 108, 108, 1, _L, False, True),
    ("SAO_Y", 109, 109, 1, _L, True, False),
    ("SAO_C_BO", 110, 110, 1, _L, False, True),
    ("SAO_C_EO", 111, 111, 1, _L, False, True),
    ("SAO_C", 112, 112, 1, _L, True, False),
    ("SAO_allComps", 113, 113, 1, _L, False, True),
)


@dataclass(frozen=True)
class FeatureCatalog:
    defs: tuple[FeatureDef, ...]
    slots: tuple[tuple[int, int], ...]
    version: str = CATALOG_VERSION

    @property
    def n_slots(self) -> int:
        return len(self.slots)

    @cached_property
    def slot_names(self) -> tuple[str, ...]:
        return tuple(self.defs[r].slot_name(d) for r, d in self.slots)

    @cached_property
    def _index(self) -> dict[str, int]:
        return {name: i for i, name in enumerate(self.slot_names)}

    def slot_index(self, label: str, depth: int | None = None) -> int:
        """Slot index for a row label and optional depth (``None`` for depth-less rows)."""
        for r, fdef in enumerate(self.defs):
            if fdef.label == label:
                if fdef.has_depth:
                    if depth is None:
                        raise KeyError(f"{label} needs a depth index")
                    name = fdef.slot_name(depth)
                elif depth not in (None, 0):
                    raise KeyError(f"{label} has no depth {depth}")
                else:
                    name = fdef.label
                return self._index[name]
        raise KeyError(label)

    def index_of(self, slot_name: str) -> int:
        try:
            return self._index[slot_name]
        except KeyError:
            raise KeyError(f"unknown feature column {slot_name!r}") from None

    def row(self, label: str) -> FeatureDef:
        for fdef in self.defs:
            if fdef.label == label:
                return fdef
        raise KeyError(label)

    @property
    def e0_index(self) -> int:
        return self._index[E0_LABEL]

    def to_json(self) -> str:
        slots = []
        for i, (r, d) in enumerate(self.slots):
            fdef = self.defs[r]
            slots.append(
                {
                    "slot": i,
                    "name": self.slot_names[i],
                    "label": fdef.label,
                    "depth": d if fdef.has_depth else None,
                    "category": fdef.category.value,
                    "sm": fdef.in_sm,
                    "em": fdef.in_em,
                    "table_id": fdef.table_id_lo + d,
                }
            )
        return json.dumps({"catalog_version": self.version, "slots": slots}, indent=2)


@lru_cache(maxsize=None)
def build_catalog() -> FeatureCatalog:
    defs = tuple(FeatureDef(*row) for row in _ROWS)
    slots = tuple((r, d) for r, fdef in enumerate(defs) for d in range(fdef.depth_count))
    return FeatureCatalog(defs=defs, slots=slots)


def selection_mask(catalog: FeatureCatalog, variant: Variant | str) -> np.ndarray:
    """Boolean mask over catalog slots selecting the rows ticked for ``variant``."""
    variant = Variant.parse(variant)
    attr = "in_sm" if variant is Variant.SM else "in_em"
    return np.array([getattr(catalog.defs[r], attr) for r, _ in catalog.slots], dtype=bool)


def selected_names(catalog: FeatureCatalog, variant: Variant | str) -> list[str]:
    mask = selection_mask(catalog, variant)
    return [name for name, keep in zip(catalog.slot_names, mask) if keep]


def validate_vector(catalog: FeatureCatalog, v) -> list[str]:
    """Return the list of problems with a feature vector; empty means valid."""
    v = list(v)
    if len(v) != catalog.n_slots:
        return [f"expected {catalog.n_slots} counts, got {len(v)}"]
    problems = []
    for name, n in zip(catalog.slot_names, v):
        if isinstance(n, bool) or not isinstance(n, (int, np.integer)):
            problems.append(f"{name}: count {n!r} is not an integer")
        elif n < 0:
            problems.append(f"{name}: negative count {n}")
    e0 = v[catalog.e0_index]
    if e0 != 1:
        problems.append(f"{E0_LABEL} must be 1, got {e0}")
    return problems
