"""Stream records, the evaluation corpus, and the on-disk formats.

Feature tables and measurement tables are comma-separated UTF-8 files whose
first three columns are ``sequence_name,preset,crf``. A stream is keyed by
that triple, serialized as ``name/preset/crf``. Feature columns are the
catalog slot names (``skip_d2``, ``coeff``...). Canonical datasets are a
single JSON document ``{"catalog_version": ..., "records": [...]}``.

Real analyzer dumps would need a small converter into the feature table
layout; no analyzer-native format is read here.
"""
from __future__ import annotations

import csv
import hashlib
import io
import json
import warnings
from dataclasses import asdict, dataclass, field
from typing import Iterable, Sequence

from .catalog import FeatureCatalog, build_catalog, validate_vector
from .errors import CatalogVersionError, DataError, MissingColumnWarning

PRESETS: tuple[str, ...] = (
    "ultrafast",
    "superfast",
    "veryfast",
    "faster",
    "fast",
    "medium",
    "slow",
    "slower",
    "veryslow",
)
CRFS: tuple[int, ...] = (18, 23, 28, 33)
CLASSES = ("A", "B", "C", "D", "E", "F")
FRAME_COUNT = 64

StreamKey = tuple[str, str, int]

# name, class, width, height, frame rate. The two RaceHorses sequences follow
# the common test-condition naming so that every name is unique.
SEQUENCES: tuple[tuple[str, str, int, int, float], ...] = (
    ("PeopleOnStreet", "A", 2560, 1600, 30),
    ("Traffic", "A", 2560, 1600, 30),
    ("BasketballDrive", "B", 1920, 1080, 50),
    ("BQTerrace", "B", 1920, 1080, 60),
    ("Cactus", "B", 1920, 1080, 50),
    ("Kimono1", "B", 1920, 1080, 24),
    ("ParkScene", "B", 1920, 1080, 24),
    ("BasketballDrill", "C", 832, 480, 50),
    ("BQMall", "C", 832, 480, 60),
    ("PartyScene", "C", 832, 480, 50),
    ("RaceHorsesC", "C", 832, 480, 30),
    ("BasketballPass", "D", 416, 240, 50),
    ("BlowingBubbles", "D", 416, 240, 50),
    ("BQSquare", "D", 416, 240, 60),
    ("RaceHorses", "D", 416, 240, 30),
    ("FourPeople", "E", 1280, 720, 60),
    ("Johnny", "E", 1280, 720, 60),
    ("KristenAndSara", "E", 1280, 720, 60),
    ("BasketballDrillText", "F", 832, 480, 50),
    ("ChinaSpeed", "F", 1024, 768, 30),
    ("SlideEditing", "F", 1280, 720, 30),
    ("Slideshow", "F", 1280, 720, 20),
)


def format_key(key: StreamKey) -> str:
    return f"{key[0]}/{key[1]}/{key[2]}"


def parse_key(text: str) -> StreamKey:
    name, preset, crf = text.rsplit("/", 2)
    return name, preset, int(crf)


@dataclass(frozen=True)
class SequenceInfo:
    sequence_name: str
    clazz: str
    width: int
    height: int
    frame_rate: float
    frame_count: int = FRAME_COUNT


def default_sequences() -> dict[str, SequenceInfo]:
    return {name: SequenceInfo(name, c, w, h, float(fr)) for name, c, w, h, fr in SEQUENCES}


@dataclass(frozen=True)
class StreamMeta:
    sequence_name: str
    clazz: str
    width: int
    height: int
    frame_rate: float
    frame_count: int
    preset: str
    crf: int

    def __post_init__(self):
        if self.preset not in PRESETS:
            raise DataError(f"unknown preset {self.preset!r}")
        if self.clazz not in CLASSES:
            raise DataError(f"unknown sequence class {self.clazz!r}")
        if self.width <= 0 or self.height <= 0 or self.frame_count <= 0 or self.frame_rate <= 0:
            raise DataError(f"{self.sequence_name}: non-positive geometry or frame data")

    @property
    def key(self) -> StreamKey:
        return (self.sequence_name, self.preset, self.crf)

    @property
    def nonstandard_crf(self) -> bool:
        return self.crf not in CRFS

    @classmethod
    def from_sequence(cls, info: SequenceInfo, preset: str, crf: int) -> "StreamMeta":
        return cls(info.sequence_name, info.clazz, info.width, info.height, info.frame_rate, info.frame_count, preset, crf)


@dataclass(frozen=True)
class StreamRecord:
    meta: StreamMeta
    features: tuple[int, ...]
    energy_j: float
    enc_time_s: float | None = None
    uf_time_s: float | None = None
    qp_equiv: int | None = None

    @property
    def key(self) -> StreamKey:
        return self.meta.key


@dataclass(frozen=True)
class Dataset:
    records: tuple[StreamRecord, ...]
    catalog_version: str = field(default_factory=lambda: build_catalog().version)

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        seen = set()
        for rec in self.records:
            if rec.key in seen:
                raise DataError(f"duplicate stream key {format_key(rec.key)}")
            seen.add(rec.key)

    def __len__(self) -> int:
        return len(self.records)

    def filter(self, preset: str | None = None) -> "Dataset":
        if preset is None:
            return self
        return Dataset(tuple(r for r in self.records if r.meta.preset == preset), self.catalog_version)

    def sorted(self) -> "Dataset":
        return Dataset(tuple(sorted(self.records, key=lambda r: _sort_key(r.key))), self.catalog_version)

    def validate(self, catalog: FeatureCatalog | None = None) -> None:
        catalog = catalog or build_catalog()
        if self.catalog_version != catalog.version:
            raise CatalogVersionError(f"dataset uses catalog {self.catalog_version!r}, expected {catalog.version!r}")
        for rec in self.records:
            problems = validate_vector(catalog, rec.features)
            if problems:
                raise DataError(f"{format_key(rec.key)}: {'; '.join(problems)}")
            if not rec.energy_j >= 0:
                raise DataError(f"{format_key(rec.key)}: energy must be non-negative")


def _sort_key(key: StreamKey):
    name, preset, crf = key
    return (name, PRESETS.index(preset) if preset in PRESETS else len(PRESETS), preset, crf)


# --- delimited tables -------------------------------------------------------

def _rows(text: str) -> list[list[str]]:
    return [row for row in csv.reader(io.StringIO(text)) if row and any(c.strip() for c in row)]


def _parse_key_fields(fields: Sequence[str], where: str) -> StreamKey:
    name, preset = fields[0].strip(), fields[1].strip()
    if not name:
        raise DataError(f"{where}: empty sequence_name")
    try:
        crf = int(fields[2])
    except ValueError:
        raise DataError(f"{where}: crf {fields[2]!r} is not an integer") from None
    return name, preset, crf


def parse_feature_table(text: str, catalog: FeatureCatalog | None = None) -> list[tuple[StreamKey, tuple[int, ...]]]:
    """Parse a feature-count table into ``(key, vector)`` pairs in file order.

    Columns missing from the header default to 0 (``E0`` to 1) with a
    warning per column; unknown columns are an error.
    """
    catalog = catalog or build_catalog()
    rows = _rows(text)
    if not rows:
        raise DataError("feature table is empty")
    header = [h.strip() for h in rows[0]]
    if header[:3] != ["sequence_name", "preset", "crf"]:
        raise DataError("feature table must start with columns sequence_name,preset,crf")
    columns = header[3:]
    positions = []
    for col in columns:
        try:
            positions.append(catalog.index_of(col))
        except KeyError:
            raise DataError(f"feature table: unknown column {col!r}") from None
    if len(set(positions)) != len(positions):
        raise DataError("feature table: repeated column")
    defaults = [0] * catalog.n_slots
    defaults[catalog.e0_index] = 1
    for missing in sorted(set(range(catalog.n_slots)) - set(positions)):
        name = catalog.slot_names[missing]
        warnings.warn(f"feature table lacks column {name!r}; defaulting to {defaults[missing]}", MissingColumnWarning, stacklevel=2)

    out = []
    seen: set[StreamKey] = set()
    for lineno, row in enumerate(rows[1:], 2):
        if len(row) != len(header):
            raise DataError(f"feature table line {lineno}: expected {len(header)} fields, got {len(row)}")
        key = _parse_key_fields(row, f"feature table line {lineno}")
        if key in seen:
            raise DataError(f"feature table line {lineno}: duplicate stream key {format_key(key)}")
        seen.add(key)
        vec = list(defaults)
        for col, pos, cell in zip(columns, positions, row[3:]):
            try:
                n = int(cell)
            except ValueError:
                raise DataError(f"feature table line {lineno}, column {col}: {cell!r} is not an integer") from None
            if n < 0:
                raise DataError(f"feature table line {lineno}, column {col}: negative count {n}")
            vec[pos] = n
        out.append((key, tuple(vec)))
    return out


def format_feature_table(items: Iterable[tuple[StreamKey, Sequence[int]]], catalog: FeatureCatalog | None = None) -> str:
    catalog = catalog or build_catalog()
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sequence_name", "preset", "crf", *catalog.slot_names])
    for key, vec in items:
        w.writerow([*key, *vec])
    return buf.getvalue()


@dataclass(frozen=True)
class Measurement:
    key: StreamKey
    energy_j: float
    enc_time_s: float | None = None
    uf_time_s: float | None = None
    qp_equiv: int | None = None


MEASUREMENT_COLUMNS = ("sequence_name", "preset", "crf", "energy_j", "enc_time_s", "uf_time_s", "qp_equiv")


def _opt_float(cell: str, what: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        value = float(cell)
    except ValueError:
        raise DataError(f"{what}: {cell!r} is not a number") from None
    if not value >= 0:
        raise DataError(f"{what}: must be non-negative, got {cell}")
    return value


def parse_measurement_table(text: str) -> list[Measurement]:
    """Parse ``sequence_name,preset,crf,energy_j[,enc_time_s,uf_time_s,qp_equiv]`` rows.

    The header row is optional. Trailing optional fields may be empty or omitted.
    """
    rows = _rows(text)
    if rows and rows[0][0].strip() == "sequence_name":
        rows = rows[1:]
    out = []
    seen: set[StreamKey] = set()
    for lineno, row in enumerate(rows, 1):
        where = f"measurement row {lineno}"
        if not 4 <= len(row) <= len(MEASUREMENT_COLUMNS):
            raise DataError(f"{where}: expected 4 to {len(MEASUREMENT_COLUMNS)} fields, got {len(row)}")
        row = list(row) + [""] * (len(MEASUREMENT_COLUMNS) - len(row))
        key = _parse_key_fields(row, where)
        if key in seen:
            raise DataError(f"{where}: duplicate stream key {format_key(key)}")
        seen.add(key)
        energy = _opt_float(row[3], f"{where}, energy_j")
        if energy is None:
            raise DataError(f"{where}: energy_j is required")
        qp = row[6].strip()
        try:
            qp_equiv = int(qp) if qp else None
        except ValueError:
            raise DataError(f"{where}, qp_equiv: {qp!r} is not an integer") from None
        out.append(
            Measurement(
                key,
                energy,
                _opt_float(row[4], f"{where}, enc_time_s"),
                _opt_float(row[5], f"{where}, uf_time_s"),
                qp_equiv,
            )
        )
    return out


def _cell(v) -> str:
    return "" if v is None else repr(v) if isinstance(v, float) else str(v)


def format_measurement_table(items: Iterable[Measurement]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(MEASUREMENT_COLUMNS)
    for m in items:
        w.writerow([*m.key, _cell(m.energy_j), _cell(m.enc_time_s), _cell(m.uf_time_s), _cell(m.qp_equiv)])
    return buf.getvalue()


def parse_sequence_table(text: str) -> dict[str, SequenceInfo]:
    """Parse ``sequence_name,class,width,height,frame_rate[,frame_count]`` rows (header required)."""
    reader = csv.DictReader(io.StringIO(text))
    out = {}
    for lineno, row in enumerate(reader, 2):
        try:
            info = SequenceInfo(
                row["sequence_name"].strip(),
                row["class"].strip(),
                int(row["width"]),
                int(row["height"]),
                float(row["frame_rate"]),
                int(row.get("frame_count") or FRAME_COUNT),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"sequence table line {lineno}: {exc}") from None
        out[info.sequence_name] = info
    return out


@dataclass(frozen=True)
class JoinReport:
    dataset: Dataset
    orphan_features: tuple[StreamKey, ...]
    orphan_measurements: tuple[StreamKey, ...]


def join(
    features: Sequence[tuple[StreamKey, Sequence[int]]],
    measurements: Sequence[Measurement],
    sequences: dict[str, SequenceInfo] | None = None,
    catalog: FeatureCatalog | None = None,
) -> JoinReport:
    """Inner-join feature vectors and measurements on the stream key.

    Records come out in canonical order (sequence, preset rank, crf), so the
    result does not depend on input row order.
    """
    catalog = catalog or build_catalog()
    sequences = default_sequences() if sequences is None else sequences
    feat = dict((k, tuple(int(n) for n in v)) for k, v in features)
    meas = {m.key: m for m in measurements}
    shared = set(feat) & set(meas)
    if not shared:
        raise DataError("feature and measurement tables share no stream keys")
    records = []
    for key in sorted(shared, key=_sort_key):
        name, preset, crf = key
        if name not in sequences:
            raise DataError(f"no sequence metadata for {name!r}")
        m = meas[key]
        records.append(
            StreamRecord(
                StreamMeta.from_sequence(sequences[name], preset, crf),
                feat[key],
                m.energy_j,
                m.enc_time_s,
                m.uf_time_s,
                m.qp_equiv,
            )
        )
    ds = Dataset(tuple(records), catalog.version)
    ds.validate(catalog)
    return JoinReport(
        ds,
        tuple(sorted(set(feat) - shared, key=_sort_key)),
        tuple(sorted(set(meas) - shared, key=_sort_key)),
    )


# --- canonical JSON -----------------------------------------------------------

def _record_to_dict(rec: StreamRecord) -> dict:
    return {
        "meta": asdict(rec.meta),
        "features": list(rec.features),
        "energy_j": rec.energy_j,
        "enc_time_s": rec.enc_time_s,
        "uf_time_s": rec.uf_time_s,
        "qp_equiv": rec.qp_equiv,
    }


def _record_from_dict(d: dict) -> StreamRecord:
    meta = dict(d["meta"])
    meta["frame_rate"] = float(meta["frame_rate"])
    return StreamRecord(
        StreamMeta(**meta),
        tuple(int(n) for n in d["features"]),
        float(d["energy_j"]),
        None if d.get("enc_time_s") is None else float(d["enc_time_s"]),
        None if d.get("uf_time_s") is None else float(d["uf_time_s"]),
        None if d.get("qp_equiv") is None else int(d["qp_equiv"]),
    )


def save_dataset(ds: Dataset) -> bytes:
    doc = {"catalog_version": ds.catalog_version, "records": [_record_to_dict(r) for r in ds.records]}
    return (json.dumps(doc, separators=(",", ":")) + "\n").encode("utf-8")


def load_dataset(data: bytes | str, catalog: FeatureCatalog | None = None) -> Dataset:
    catalog = catalog or build_catalog()
    try:
        doc = json.loads(data)
        version = doc["catalog_version"]
        raw = doc["records"]
    except (ValueError, KeyError, TypeError) as exc:
        raise DataError(f"not a dataset document: {exc}") from None
    if version != catalog.version:
        raise CatalogVersionError(f"dataset catalog version {version!r} does not match {catalog.version!r}")
    try:
        records = tuple(_record_from_dict(r) for r in raw)
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed dataset record: {exc}") from None
    return Dataset(records, version)


def dataset_hash(ds: Dataset) -> str:
    return hashlib.sha256(save_dataset(ds)).hexdigest()[:16]


__all__ = [
    "CRFS",
    "Dataset",
    "JoinReport",
    "Measurement",
    "PRESETS",
    "SEQUENCES",
    "SequenceInfo",
    "StreamMeta",
    "StreamRecord",
    "dataset_hash",
    "default_sequences",
    "format_feature_table",
    "format_key",
    "format_measurement_table",
    "join",
    "load_dataset",
    "parse_feature_table",
    "parse_key",
    "parse_measurement_table",
    "parse_sequence_table",
    "save_dataset",
]
