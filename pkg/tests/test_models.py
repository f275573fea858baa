import json

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from encenergy.catalog import build_catalog, selected_names
from encenergy.dataset import StreamMeta, StreamRecord, default_sequences
from encenergy.errors import CatalogVersionError, DataError
from encenergy.models import (
    FeatureModel,
    FittedModel,
    ModelKind,
    QpModel,
    TimeModel,
    TrainingInfo,
    UfTimeModel,
    load_model,
    predict_feature,
    predict_qp,
    predict_time,
    predict_uf,
    save_model,
)

CAT = build_catalog()
SM_NAMES = selected_names(CAT, "SM")
EM_NAMES = selected_names(CAT, "EM")


def sm_model(**nonzero):
    return FeatureModel("SM", {n: float(nonzero.get(n, 0.0)) for n in SM_NAMES})


def minimal():
    v = np.zeros(CAT.n_slots, dtype=int)
    v[CAT.e0_index] = 1
    return v


def test_single_offset():
    assert predict_feature(sm_model(E0=7.5), minimal(), CAT) == 7.5


def test_zero_coeffs():
    v = np.arange(CAT.n_slots)
    assert predict_feature(sm_model(), v, CAT) == 0.0


def test_hand_dot_product():
    v = minimal()
    v[CAT.index_of("Islice")] = 2
    v[CAT.index_of("PBslice")] = 62
    assert predict_feature(sm_model(E0=1, Islice=2, PBslice=0.5), v, CAT) == pytest.approx(36.0)


def test_unselected_slots_ignored():
    v = minimal()
    v[CAT.index_of("pla_d0")] = 10**6  # EM-only slot
    assert predict_feature(sm_model(E0=3), v, CAT) == 3.0


def test_coefficients_must_match_variant():
    with pytest.raises(DataError):
        FeatureModel("SM", {n: 0.0 for n in EM_NAMES})
    with pytest.raises(DataError):
        FeatureModel("EM", {"E0": 1.0})


def test_version_and_length_checks():
    m = FeatureModel("SM", {n: 0.0 for n in SM_NAMES}, catalog_version="other/2")
    with pytest.raises(CatalogVersionError):
        predict_feature(m, minimal(), CAT)
    with pytest.raises(DataError):
        predict_feature(sm_model(), [1, 2, 3], CAT)


counts = st.lists(st.integers(0, 10**6), min_size=CAT.n_slots, max_size=CAT.n_slots)
coeffs = st.lists(st.floats(0, 10, allow_nan=False), min_size=len(SM_NAMES), max_size=len(SM_NAMES))


@given(counts, counts, coeffs)
def test_linearity(v1, v2, c):
    m = FeatureModel("SM", dict(zip(SM_NAMES, c)))
    total = predict_feature(m, np.add(v1, v2), CAT)
    assert total == pytest.approx(predict_feature(m, v1, CAT) + predict_feature(m, v2, CAT), rel=1e-9, abs=1e-6)


@given(counts, coeffs, st.integers(0, CAT.n_slots - 1), st.integers(1, 1000))
def test_monotone_in_counts(v, c, slot, bump):
    m = FeatureModel("SM", dict(zip(SM_NAMES, c)))
    w = list(v)
    w[slot] += bump
    assert predict_feature(m, w, CAT) >= predict_feature(m, v, CAT)


def test_qp_offset_only():
    m = QpModel(0.3, 0.2, 0.1, 4.0, 12.0)
    assert predict_qp(m, 0) == 48.0


def test_qp_constant():
    m = QpModel(0, 0, 0, 10.0, 20.0)
    assert {predict_qp(m, qp) for qp in (0, 17, 51)} == {200.0}


def test_qp_cubic():
    assert predict_qp(QpModel(1e-3, 0, 0, 0, 1), 10) == pytest.approx(1.0)


def test_qp_sign_convention():
    # kappa*qp^3 - lambda*qp^2 - mu*qp + t0 at qp=2: 8 - 4*1 - 2*1 + 1 = 3
    assert predict_qp(QpModel(1, 1, 1, 1, 1), 2) == 3


def test_qp_range():
    with pytest.raises(ValueError):
        predict_qp(QpModel(0, 0, 0, 1, 1), 52)
    with pytest.raises(ValueError):
        predict_qp(QpModel(0, 0, 0, 1, 1), -1)


def test_time_model():
    assert predict_time(TimeModel(4.0, 9.0), 0) == 4.0
    assert predict_time(TimeModel(0.0, 35.0), 100) == 3500.0
    assert predict_time(TimeModel(5.0, 2.0), 1.5) == 8.0
    with pytest.raises(ValueError):
        predict_time(TimeModel(0, 1), -1)


def test_uf_model():
    assert predict_uf(UfTimeModel(3.0, 7.0), 0) == 3.0
    assert predict_uf(UfTimeModel(5.0, 2.0), 1.5) == predict_time(TimeModel(5.0, 2.0), 1.5)
    with pytest.raises(DataError, match="uf_time required"):
        predict_uf(UfTimeModel(5.0, 2.0), None)


def record(**kw):
    meta = StreamMeta.from_sequence(default_sequences()["Cactus"], "slow", 23)
    return StreamRecord(meta, tuple(minimal()), 100.0, **kw)


def test_record_dispatch():
    info = TrainingInfo("abc", "all")
    assert FittedModel(ModelKind.T, TimeModel(1, 2), info).predict(record(enc_time_s=3.0)) == 7.0
    assert FittedModel(ModelKind.UF, UfTimeModel(1, 2), info).predict(record(uf_time_s=1.0)) == 3.0
    assert FittedModel(ModelKind.QP, QpModel(0, 0, 0, 2, 3), info).predict(record(qp_equiv=30)) == 6.0
    assert FittedModel(ModelKind.SM, sm_model(E0=2), info).predict(record()) == 2.0
    with pytest.raises(DataError, match="Cactus/slow/23: uf_time required"):
        FittedModel(ModelKind.UF, UfTimeModel(1, 2), info).predict(record())


@pytest.mark.parametrize(
    "fitted",
    [
        FittedModel(ModelKind.SM, FeatureModel("SM", {n: i * 0.5 for i, n in enumerate(SM_NAMES)}, ("coeff",)), TrainingInfo("h", "medium", 3, 1, 80)),
        FittedModel(ModelKind.QP, QpModel(1e-3, 0.02, -0.5, 7.0, 31.5), TrainingInfo("h", "all")),
        FittedModel(ModelKind.T, TimeModel(-2.0, 35.0), TrainingInfo("h", "all")),
        FittedModel(ModelKind.UF, UfTimeModel(2.0, 350.0), TrainingInfo("h", "fast")),
    ],
)
def test_model_file_round_trip(fitted):
    text = save_model(fitted)
    back = load_model(text)
    assert back.kind == fitted.kind and back.training == fitted.training
    if fitted.kind is ModelKind.SM:
        assert back.model.unidentifiable == ("coeff",)
        assert json.loads(text)["coeffs"]["coeff"] is None
        assert back.model.coeffs["coeff"] == 0.0
        assert {k: v for k, v in back.model.coeffs.items() if k != "coeff"} == {
            k: v for k, v in fitted.model.coeffs.items() if k != "coeff"
        }
    else:
        assert back.model == fitted.model


def test_model_file_errors():
    with pytest.raises(DataError):
        load_model("{")
    with pytest.raises(DataError):
        load_model(json.dumps({"kind": "T", "coeffs": {"e0": 1}}))
    with pytest.raises(DataError):
        load_model(json.dumps({"kind": "SM", "variant": "EM", "coeffs": {}}))
