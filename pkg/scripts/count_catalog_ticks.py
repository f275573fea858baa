#!/usr/bin/env python3
"""Count SM/EM slots from the transcribed feature table and compare with the catalog masks."""
import argparse
import csv
from pathlib import Path

from encenergy.catalog import build_catalog, selection_mask

DEFAULT_TABLE = Path(__file__).resolve().parents[1] / "tests" / "fixtures" / "feature_table.csv"


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("table", nargs="?", type=Path, default=DEFAULT_TABLE)
    args = ap.parse_args()

    with args.table.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    totals = {"SM": 0, "EM": 0}
    slots = 0
    for row in rows:
        lo, *rest = row["ids"].split("..")
        width = int(rest[0] if rest else lo) - int(lo) + 1
        slots += width
        totals["SM"] += width * (row["sm"] == "1")
        totals["EM"] += width * (row["em"] == "1")
    cat = build_catalog()
    print(f"rows {len(rows)}, slots {slots} (catalog {cat.n_slots})")
    for v, n in totals.items():
        print(f"{v}: {n} ticked slots, mask popcount {int(selection_mask(cat, v).sum())}")


if __name__ == "__main__":
    main()
