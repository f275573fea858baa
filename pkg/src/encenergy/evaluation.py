"""Relative-error metrics, k-fold cross-validation and report rendering."""
from __future__ import annotations

import csv
import io
import json
import math
import zlib
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .catalog import FeatureCatalog, build_catalog
from .dataset import PRESETS, Dataset, StreamKey, StreamRecord, format_key, parse_key
from .errors import DataError, EncEnergyError
from .fitting import fit_records
from .models import KIND_ORDER, ModelKind, TrainingInfo

PER_PRESET = "per-preset"
ALL_PRESETS = "all-presets"
GROUPINGS = (PER_PRESET, ALL_PRESETS)
REPORT_FORMATS = ("text", "delimited", "plot-data")


def relative_error(estimated: float, measured: float) -> float:
    if not measured > 0:
        raise ValueError(f"measured energy must be positive, got {measured}")
    return (estimated - measured) / measured


@dataclass(frozen=True)
class ResidualRow:
    key: StreamKey
    measured: float
    estimated: float
    eps: float
    grouping: str = PER_PRESET
    fold: int = -1

    @classmethod
    def make(cls, key: StreamKey, measured: float, estimated: float, grouping: str = PER_PRESET, fold: int = -1):
        return cls(key, measured, estimated, relative_error(estimated, measured), grouping, fold)


def mean_abs_error(rows: Iterable[ResidualRow | float]) -> float:
    """Arithmetic mean of |eps| over residual rows (or raw eps values)."""
    eps = [r.eps if isinstance(r, ResidualRow) else float(r) for r in rows]
    if not eps:
        raise ValueError("mean_abs_error of an empty set")
    return float(np.mean(np.abs(eps)))


def kfold_split(records: Sequence | int, k: int = 10, seed: int = 0) -> np.ndarray:
    """Fold index per record: a seeded random partition into ``k`` near-equal folds."""
    n = records if isinstance(records, int) else len(records)
    if k < 2:
        raise ValueError("need at least 2 folds")
    if n < k:
        raise DataError(f"{n} records cannot be split into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.empty(n, dtype=int)
    folds[perm] = np.arange(n) % k
    return folds


def scope_seed(seed: int, scope: str) -> list[int]:
    return [seed, zlib.crc32(scope.encode())]


@dataclass(frozen=True)
class FoldRecord:
    scope: str
    fold: int
    train_keys: frozenset
    valid_keys: frozenset


@dataclass(frozen=True)
class EvaluationReport:
    kind: ModelKind
    per_preset: dict[str, float] = field(default_factory=dict)
    average_over_presets: float | None = None
    all_presets_pooled: float | None = None
    residuals: tuple[ResidualRow, ...] = ()
    folds: tuple[FoldRecord, ...] = ()
    seed: int = 0
    k: int = 10
    bounded: bool = True


def _cv_scope(
    records: Sequence[StreamRecord],
    kind: ModelKind,
    scope: str,
    grouping: str,
    k: int,
    seed: int,
    bounded: bool,
    catalog: FeatureCatalog,
) -> tuple[list[ResidualRow], list[FoldRecord]]:
    records = sorted(records, key=lambda r: r.key)
    folds = kfold_split(records, k, scope_seed(seed, scope))
    residuals, provenance = [], []
    for f in range(k):
        train = [r for r, g in zip(records, folds) if g != f]
        valid = [r for r, g in zip(records, folds) if g == f]
        info = TrainingInfo("", scope, seed, f, len(train))
        try:
            model, _ = fit_records(train, kind, catalog, bounded, info)
            for rec in valid:
                residuals.append(ResidualRow.make(rec.key, rec.energy_j, model.predict(rec, catalog), grouping, f))
        except (EncEnergyError, ValueError) as exc:
            raise type(exc)(f"{kind.value} fit failed (scope {scope}, fold {f}): {exc}") from exc
        provenance.append(
            FoldRecord(scope, f, frozenset(r.key for r in train), frozenset(r.key for r in valid))
        )
    return residuals, provenance


def cross_validate(
    dataset: Dataset,
    kind: ModelKind | str,
    grouping: str = PER_PRESET,
    k: int = 10,
    seed: int = 0,
    bounded: bool = True,
    catalog: FeatureCatalog | None = None,
) -> EvaluationReport:
    """k-fold cross-validation of one model family.

    ``per-preset`` trains and validates separately within each preset;
    ``all-presets`` pools every stream. Each scope draws its folds from its
    own seeded generator derived from ``seed`` and the scope name.
    """
    kind = ModelKind.parse(kind)
    catalog = catalog or build_catalog()
    if grouping not in GROUPINGS:
        raise ValueError(f"grouping must be one of {GROUPINGS}, got {grouping!r}")
    if grouping == PER_PRESET:
        residuals: list[ResidualRow] = []
        folds: list[FoldRecord] = []
        per_preset = {}
        for preset in PRESETS:
            subset = dataset.filter(preset).records
            if not subset:
                continue
            rows, prov = _cv_scope(subset, kind, preset, grouping, k, seed, bounded, catalog)
            residuals += rows
            folds += prov
            per_preset[preset] = mean_abs_error(rows)
        if not per_preset:
            raise DataError("dataset is empty")
        return EvaluationReport(
            kind,
            per_preset,
            float(np.mean(list(per_preset.values()))),
            None,
            tuple(residuals),
            tuple(folds),
            seed,
            k,
            bounded,
        )
    rows, prov = _cv_scope(dataset.records, kind, "all", grouping, k, seed, bounded, catalog)
    return EvaluationReport(kind, {}, None, mean_abs_error(rows), tuple(rows), tuple(prov), seed, k, bounded)


def evaluate(
    dataset: Dataset,
    kind: ModelKind | str,
    k: int = 10,
    seed: int = 0,
    bounded: bool = True,
    catalog: FeatureCatalog | None = None,
) -> EvaluationReport:
    """Both groupings for one model family, merged into one report."""
    per = cross_validate(dataset, kind, PER_PRESET, k, seed, bounded, catalog)
    pooled = cross_validate(dataset, kind, ALL_PRESETS, k, seed, bounded, catalog)
    return EvaluationReport(
        per.kind,
        per.per_preset,
        per.average_over_presets,
        pooled.all_presets_pooled,
        per.residuals + pooled.residuals,
        per.folds + pooled.folds,
        seed,
        k,
        bounded,
    )


# --- report files ----------------------------------------------------------------

def report_to_dict(report: EvaluationReport) -> dict:
    folds: dict[str, dict[str, int]] = {}
    for fr in report.folds:
        scope = folds.setdefault(fr.scope, {})
        for key in sorted(fr.valid_keys):
            scope[format_key(key)] = fr.fold
    return {
        "kind": report.kind.value,
        "seed": report.seed,
        "k": report.k,
        "bounded": report.bounded,
        "per_preset": report.per_preset,
        "average_over_presets": report.average_over_presets,
        "all_presets_pooled": report.all_presets_pooled,
        "residuals": [
            {
                "key": format_key(r.key),
                "grouping": r.grouping,
                "fold": r.fold,
                "measured": r.measured,
                "estimated": r.estimated,
                "eps": r.eps,
            }
            for r in report.residuals
        ],
        "folds": folds,
    }


def report_from_dict(doc: Mapping) -> EvaluationReport:
    try:
        folds = []
        for scope, assignment in doc.get("folds", {}).items():
            by_fold: dict[int, set] = {}
            for key, f in assignment.items():
                by_fold.setdefault(int(f), set()).add(parse_key(key))
            everything = set().union(*by_fold.values()) if by_fold else set()
            for f in sorted(by_fold):
                folds.append(FoldRecord(scope, f, frozenset(everything - by_fold[f]), frozenset(by_fold[f])))
        residuals = tuple(
            ResidualRow(parse_key(r["key"]), float(r["measured"]), float(r["estimated"]), float(r["eps"]), r["grouping"], int(r["fold"]))
            for r in doc.get("residuals", [])
        )
        return EvaluationReport(
            ModelKind.parse(doc["kind"]),
            {p: float(v) for p, v in doc.get("per_preset", {}).items()},
            doc.get("average_over_presets"),
            doc.get("all_presets_pooled"),
            residuals,
            tuple(folds),
            int(doc.get("seed", 0)),
            int(doc.get("k", 10)),
            bool(doc.get("bounded", True)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed report document: {exc}") from None


def save_report(report: EvaluationReport) -> str:
    return json.dumps(report_to_dict(report), indent=1) + "\n"


def load_report(text: str) -> EvaluationReport:
    try:
        return report_from_dict(json.loads(text))
    except ValueError as exc:
        if isinstance(exc, DataError):
            raise
        raise DataError(f"report file is not JSON: {exc}") from None


# --- rendering -----------------------------------------------------------------------

AVERAGE_ROW = "average"
ALL_ROW = "all presets"
TABLE_ROWS = (*PRESETS, AVERAGE_ROW, ALL_ROW)


def comparison_table(reports: Sequence[EvaluationReport]) -> tuple[list[ModelKind], dict[str, dict[ModelKind, float | None]]]:
    by_kind = {r.kind: r for r in reports}
    if len(by_kind) != len(reports):
        raise DataError("more than one report for the same model kind")
    kinds = [k for k in KIND_ORDER if k in by_kind]
    table = {}
    for row in TABLE_ROWS:
        table[row] = {}
        for kind in kinds:
            rep = by_kind[kind]
            if row == AVERAGE_ROW:
                value = rep.average_over_presets
            elif row == ALL_ROW:
                value = rep.all_presets_pooled
            else:
                value = rep.per_preset.get(row)
            table[row][kind] = value
    return kinds, table


def _row_minima(values: Mapping[ModelKind, float | None]) -> set[ModelKind]:
    present = {k: v for k, v in values.items() if v is not None}
    if not present:
        return set()
    low = min(present.values())
    return {k for k, v in present.items() if v == low}


def _render_text(reports: Sequence[EvaluationReport]) -> str:
    kinds, table = comparison_table(reports)
    width = 12
    lines = ["preset".ljust(width) + "".join(k.value.rjust(10) for k in kinds)]
    for row, values in table.items():
        if row == AVERAGE_ROW:
            lines.append("-" * len(lines[0]))
        best = _row_minima(values)
        cells = []
        for kind in kinds:
            v = values[kind]
            cell = "-" if v is None else f"{100 * v:.2f}%" + ("*" if kind in best else " ")
            cells.append(cell.rjust(10))
        lines.append(row.ljust(width) + "".join(cells))
    lines.append("* lowest mean relative error in the row")
    return "\n".join(lines) + "\n"


def _render_delimited(reports: Sequence[EvaluationReport]) -> str:
    kinds, table = comparison_table(reports)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["row", *(k.value for k in kinds)])
    for row, values in table.items():
        w.writerow([row, *("" if values[k] is None else repr(float(values[k])) for k in kinds)])
    return buf.getvalue()


def parse_delimited(text: str) -> dict[str, dict[str, float | None]]:
    rows = list(csv.reader(io.StringIO(text)))
    header = rows[0][1:]
    return {r[0]: {k: (float(v) if v else None) for k, v in zip(header, r[1:])} for r in rows[1:] if r}


def _render_plot_data(reports: Sequence[EvaluationReport], sequence: str, crf: int | None, kind: ModelKind | None) -> str:
    by_kind = {r.kind: r for r in reports}
    if kind is None:
        kind = ModelKind.SM if ModelKind.SM in by_kind else next(k for k in KIND_ORDER if k in by_kind)
    rep = by_kind.get(kind)
    if rep is None:
        raise DataError(f"no report for model kind {kind.value}")
    rows = [
        r for r in rep.residuals
        if r.grouping == PER_PRESET and r.key[0] == sequence and (crf is None or r.key[2] == crf)
    ]
    if not rows:
        raise DataError(f"no per-preset residuals for sequence {sequence!r}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["preset_index", "preset", "measured_kJ", "estimated_kJ"])
    for i, preset in enumerate(PRESETS):
        sel = [r for r in rows if r.key[1] == preset]
        if not sel:
            continue
        measured = math.fsum(r.measured for r in sel) / 1000.0
        estimated = math.fsum(r.estimated for r in sel) / 1000.0
        w.writerow([i, preset, repr(measured), repr(estimated)])
    return buf.getvalue()


def render_report(
    reports: EvaluationReport | Sequence[EvaluationReport],
    fmt: str = "text",
    sequence: str = "Cactus",
    crf: int | None = None,
    kind: ModelKind | str | None = None,
) -> str:
    """Render one or more model reports.

    ``text`` and ``delimited`` produce the preset-by-model comparison table
    (nine presets, ``average``, ``all presets``). ``plot-data`` lists measured
    and estimated energy in kJ per preset for one sequence, summed over CRFs
    unless ``crf`` is given.
    """
    if isinstance(reports, EvaluationReport):
        reports = [reports]
    reports = list(reports)
    if fmt not in REPORT_FORMATS:
        raise ValueError(f"unknown report format {fmt!r}; choose from {REPORT_FORMATS}")
    if not reports or any(not r.residuals for r in reports):
        raise DataError("report has no residuals")
    if fmt == "text":
        return _render_text(reports)
    if fmt == "delimited":
        return _render_delimited(reports)
    return _render_plot_data(reports, sequence, crf, None if kind is None else ModelKind.parse(kind))
