"""Energy estimators and their prediction functions.

Four families are supported:

* ``QP``  cubic encoding-time polynomial in QP times a mean power,
* ``T``   affine in the stream's own encoding time,
* ``UF``  affine in the encoding time of the ultrafast preset,
* ``EM``/``SM`` per-feature energies summed over bit-stream feature counts.
"""
from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence, Union

import numpy as np

from .catalog import FeatureCatalog, Variant, build_catalog, selected_names, selection_mask
from .dataset import StreamRecord, format_key
from .errors import CatalogVersionError, DataError


class ModelKind(str, enum.Enum):
    QP = "QP"
    T = "T"
    UF = "UF"
    EM = "EM"
    SM = "SM"

    @classmethod
    def parse(cls, value: "str | ModelKind") -> "ModelKind":
        if isinstance(value, ModelKind):
            return value
        return cls(str(value).upper())

    @property
    def is_feature(self) -> bool:
        return self in (ModelKind.EM, ModelKind.SM)

    @property
    def variant(self) -> Variant | None:
        return Variant(self.value) if self.is_feature else None


# display order of the comparison table
KIND_ORDER: tuple[ModelKind, ...] = tuple(ModelKind)


@dataclass(frozen=True)
class FeatureModel:
    variant: Variant
    coeffs: dict[str, float]
    unidentifiable: tuple[str, ...] = ()
    catalog_version: str = field(default_factory=lambda: build_catalog().version)

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        catalog = build_catalog()
        if self.catalog_version == catalog.version:
            expected = selected_names(catalog, self.variant)
            if list(self.coeffs) != expected:
                raise DataError(
                    f"{self.variant.value} model needs one coefficient per selected slot "
                    f"({len(expected)}), in slot order"
                )

    def coeff_vector(self) -> np.ndarray:
        return np.array(list(self.coeffs.values()), dtype=float)


@dataclass(frozen=True)
class QpModel:
    kappa: float
    lam: float
    mu: float
    t0: float
    p_avg: float


@dataclass(frozen=True)
class TimeModel:
    e0: float
    p: float


@dataclass(frozen=True)
class UfTimeModel:
    e0: float
    p: float


AnyModel = Union[FeatureModel, QpModel, TimeModel, UfTimeModel]


def predict_feature(model: FeatureModel, v: Sequence[int], catalog: FeatureCatalog | None = None) -> float:
    """Sum of count times per-occurrence energy over the variant's slots."""
    catalog = catalog or build_catalog()
    if model.catalog_version != catalog.version:
        raise CatalogVersionError(f"model built for catalog {model.catalog_version!r}, not {catalog.version!r}")
    v = np.asarray(v, dtype=float)
    if v.shape != (catalog.n_slots,):
        raise DataError(f"feature vector has {v.size} entries, catalog has {catalog.n_slots}")
    mask = selection_mask(catalog, model.variant)
    return float(v[mask] @ model.coeff_vector())


def qp_time(model: QpModel, qp: float) -> float:
    # sign convention: kappa*QP^3 - lambda*QP^2 - mu*QP + T0
    return model.kappa * qp**3 - model.lam * qp**2 - model.mu * qp + model.t0


def predict_qp(model: QpModel, qp: int) -> float:
    if not 0 <= qp <= 51:
        raise ValueError(f"QP must lie in 0..51, got {qp}")
    return model.p_avg * qp_time(model, qp)


def predict_time(model: TimeModel | UfTimeModel, t_enc: float) -> float:
    if t_enc is None or not t_enc >= 0:
        raise ValueError(f"encoding time must be non-negative, got {t_enc}")
    return model.e0 + model.p * t_enc


def predict_uf(model: UfTimeModel | TimeModel, t_uf: float | None) -> float:
    if t_uf is None:
        raise DataError("uf_time required")
    return predict_time(model, t_uf)


@dataclass(frozen=True)
class TrainingInfo:
    dataset_hash: str
    preset_scope: str
    fold_seed: int | None = None
    fold: int | None = None
    n_records: int = 0


@dataclass(frozen=True)
class FittedModel:
    kind: ModelKind
    model: AnyModel
    training: TrainingInfo

    def predict(self, record: StreamRecord, catalog: FeatureCatalog | None = None) -> float:
        return predict_record(self, record, catalog)


def predict_record(fitted: FittedModel, record: StreamRecord, catalog: FeatureCatalog | None = None) -> float:
    kind, m = fitted.kind, fitted.model
    try:
        if kind.is_feature:
            return predict_feature(m, record.features, catalog)
        if kind is ModelKind.QP:
            if record.qp_equiv is None:
                raise DataError("qp_equiv required")
            return predict_qp(m, record.qp_equiv)
        if kind is ModelKind.T:
            if record.enc_time_s is None:
                raise DataError("enc_time required")
            return predict_time(m, record.enc_time_s)
        return predict_uf(m, record.uf_time_s)
    except DataError as exc:
        raise DataError(f"{format_key(record.key)}: {exc}") from None


# --- model files --------------------------------------------------------------

def _finite(x: float) -> float:
    if not math.isfinite(x):
        raise DataError(f"non-finite model parameter {x}")
    return x


def model_to_dict(fitted: FittedModel) -> dict:
    m = fitted.model
    doc: dict = {"kind": fitted.kind.value}
    if isinstance(m, FeatureModel):
        doc["variant"] = m.variant.value
        doc["catalog_version"] = m.catalog_version
        doc["coeffs"] = {k: (None if k in m.unidentifiable else v) for k, v in m.coeffs.items()}
    elif isinstance(m, QpModel):
        doc["coeffs"] = {"kappa": m.kappa, "lambda": m.lam, "mu": m.mu, "t0": m.t0, "p_avg": m.p_avg}
    else:
        doc["coeffs"] = {"e0": m.e0, "p": m.p}
    t = fitted.training
    doc["training"] = {
        "dataset_hash": t.dataset_hash,
        "preset_scope": t.preset_scope,
        "fold_seed": t.fold_seed,
        "fold": t.fold,
        "n_records": t.n_records,
    }
    return doc


def model_from_dict(doc: Mapping) -> FittedModel:
    try:
        kind = ModelKind.parse(doc["kind"])
        coeffs = doc["coeffs"]
        if kind.is_feature:
            variant = Variant.parse(doc.get("variant", kind.value))
            if variant.value != kind.value:
                raise DataError(f"model kind {kind.value} does not match variant {variant.value}")
            unident = tuple(k for k, v in coeffs.items() if v is None)
            values = {k: (0.0 if v is None else _finite(float(v))) for k, v in coeffs.items()}
            model: AnyModel = FeatureModel(variant, values, unident, doc.get("catalog_version", build_catalog().version))
        elif kind is ModelKind.QP:
            model = QpModel(*(_finite(float(coeffs[k])) for k in ("kappa", "lambda", "mu", "t0", "p_avg")))
        elif kind is ModelKind.T:
            model = TimeModel(_finite(float(coeffs["e0"])), _finite(float(coeffs["p"])))
        else:
            model = UfTimeModel(_finite(float(coeffs["e0"])), _finite(float(coeffs["p"])))
        tr = doc.get("training", {})
        training = TrainingInfo(
            tr.get("dataset_hash", ""),
            tr.get("preset_scope", "all"),
            tr.get("fold_seed"),
            tr.get("fold"),
            int(tr.get("n_records", 0)),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise DataError(f"malformed model document: {exc}") from None
    return FittedModel(kind, model, training)


def save_model(fitted: FittedModel) -> str:
    return json.dumps(model_to_dict(fitted), indent=2) + "\n"


def load_model(text: str) -> FittedModel:
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise DataError(f"model file is not JSON: {exc}") from None
    return model_from_dict(doc)
