import csv
import json

import numpy as np
import pytest

from encenergy.catalog import (
    CATALOG_VERSION,
    FeatureCategory,
    Variant,
    build_catalog,
    selected_names,
    selection_mask,
    validate_vector,
)

from conftest import FIXTURES


def fixture_rows():
    with open(FIXTURES / "feature_table.csv", newline="") as fh:
        return list(csv.DictReader(fh))


def minimal_vector(catalog):
    v = [0] * catalog.n_slots
    v[catalog.e0_index] = 1
    return v


def test_spot_rows(catalog):
    intra = catalog.row("intraCU")
    assert (intra.depth_count, intra.in_sm, intra.in_em) == (1, True, True)
    pla = catalog.row("pla")
    assert (pla.depth_count, pla.in_sm, pla.in_em) == (4, False, True)
    assert (pla.table_id_lo, pla.table_id_hi) == (5, 8)
    frac = catalog.row("fracpelAvg")
    assert (frac.in_sm, frac.in_em) == (True, False)


def test_rows_match_fixture(catalog):
    rows = fixture_rows()
    assert len(rows) == len(catalog.defs) == 50
    for fdef, row in zip(catalog.defs, rows):
        assert fdef.label == row["label"]
        ids = row["ids"].split("..")
        assert (fdef.table_id_lo, fdef.table_id_hi) == (int(ids[0]), int(ids[-1]))
        assert fdef.in_sm == (row["sm"] == "1")
        assert fdef.in_em == (row["em"] == "1")
        assert fdef.has_depth == (row["depth"] == "4")


def test_depth_count_matches_id_range(catalog):
    for fdef in catalog.defs:
        assert fdef.depth_count in (1, 2, 4)
        assert fdef.table_id_hi - fdef.table_id_lo + 1 == fdef.depth_count
    assert catalog.row("mergeAMP").depth_count == 2


def test_every_row_in_some_variant(catalog):
    assert all(f.in_sm or f.in_em for f in catalog.defs)


def test_five_categories(catalog):
    assert len(FeatureCategory) == 5
    assert {f.category for f in catalog.defs} == set(FeatureCategory)
    general = [f.label for f in catalog.defs if f.category is FeatureCategory.GENERAL]
    assert general == ["E0", "Islice", "PBslice"]


def test_slots_contiguous_and_row_major(catalog):
    assert catalog.n_slots == 114
    expected = [(r, d) for r, f in enumerate(catalog.defs) for d in range(f.depth_count)]
    assert list(catalog.slots) == expected
    assert len(set(catalog.slot_names)) == catalog.n_slots


def test_duplicate_display_id_does_not_collide(catalog):
    a = catalog.slot_index("TrIntraY", 3)
    b = catalog.slot_index("TrIntraC", 0)
    assert b == a + 1
    exported = json.loads(catalog.to_json())["slots"]
    assert exported[a]["table_id"] == exported[b]["table_id"] == 85


def test_lookup_round_trip(catalog):
    for i, (r, d) in enumerate(catalog.slots):
        fdef = catalog.defs[r]
        assert catalog.slot_index(fdef.label, d if fdef.has_depth else None) == i
        assert catalog.index_of(catalog.slot_names[i]) == i


def test_lookup_errors(catalog):
    with pytest.raises(KeyError):
        catalog.slot_index("skip")
    with pytest.raises(KeyError):
        catalog.slot_index("nope")
    with pytest.raises(KeyError):
        catalog.index_of("skip_d4")


def test_mask_popcounts(catalog):
    recon = json.loads((FIXTURES / "catalog_reconciliation.json").read_text())
    assert selection_mask(catalog, Variant.SM).sum() == recon["sm_slots"] == 52
    assert selection_mask(catalog, "em").sum() == recon["em_slots"] == 94
    assert len(selection_mask(catalog, "SM")) == catalog.n_slots


def test_bs_rows_in_sm(catalog):
    sm = dict(zip(catalog.slot_names, selection_mask(catalog, "SM")))
    assert sm["Bs"]
    assert not any(sm[name] for name in ("Bs0", "Bs1", "Bs2"))


def test_general_slots_in_both(catalog):
    for variant in Variant:
        mask = selection_mask(catalog, variant)
        assert all(mask[catalog.index_of(n)] for n in ("E0", "Islice", "PBslice"))


def test_sm_not_subset_of_em(catalog):
    sm, em = selection_mask(catalog, "SM"), selection_mask(catalog, "EM")
    assert np.any(sm & ~em)
    assert np.all(sm | em)
    assert sm[catalog.slot_index("all", 0)] and not em[catalog.slot_index("all", 0)]


def test_selected_names_order(catalog):
    names = selected_names(catalog, "SM")
    assert names[:4] == ["E0", "Islice", "PBslice", "intraCU"]
    assert names[4:8] == ["all_d0", "all_d1", "all_d2", "all_d3"]


def test_validate_minimal_vector(catalog):
    assert validate_vector(catalog, minimal_vector(catalog)) == []


def test_validate_negative(catalog):
    v = minimal_vector(catalog)
    v[catalog.slot_index("skip", 1)] = -3
    problems = validate_vector(catalog, v)
    assert len(problems) == 1 and "skip_d1" in problems[0]


def test_validate_e0(catalog):
    v = minimal_vector(catalog)
    v[catalog.e0_index] = 2
    assert validate_vector(catalog, v) == ["E0 must be 1, got 2"]


def test_validate_length_and_type(catalog):
    assert validate_vector(catalog, [1]) != []
    v = minimal_vector(catalog)
    v[5] = 1.5
    assert len(validate_vector(catalog, v)) == 1


def test_catalog_export(catalog):
    doc = json.loads(catalog.to_json())
    assert doc["catalog_version"] == CATALOG_VERSION
    assert [s["name"] for s in doc["slots"]] == list(catalog.slot_names)
    assert doc["slots"][catalog.slot_index("merge", 2)]["table_id"] == 32


def test_catalog_is_cached_and_immutable():
    c = build_catalog()
    assert c is build_catalog()
    with pytest.raises(AttributeError):
        c.version = "x"
