import json

import pytest

from encenergy.cli import build_parser, main
from encenergy.dataset import Measurement, format_feature_table, format_measurement_table, load_dataset


def run(argv, capsys):
    code = main([str(a) for a in argv])
    out, err = capsys.readouterr()
    return code, out, err


@pytest.fixture(scope="module")
def synth_tables(tmp_path_factory, sm_noisy):
    _, ds = sm_noisy
    d = tmp_path_factory.mktemp("tables")
    feats = format_feature_table((r.key, r.features) for r in ds.records)
    meas = format_measurement_table(
        Measurement(r.key, r.energy_j, r.enc_time_s, r.uf_time_s, r.qp_equiv) for r in ds.records
    )
    (d / "features.csv").write_text(feats)
    (d / "measurements.csv").write_text(meas)
    return d, ds


def test_ingest_792(synth_tables, tmp_path, capsys):
    d, ds = synth_tables
    out = tmp_path / "ds.json"
    code, _, err = run(["ingest", "--features", d / "features.csv", "--measurements", d / "measurements.csv", "--out", out], capsys)
    assert code == 0
    assert "792 records" in err
    assert load_dataset(out.read_bytes()) == ds


def test_ingest_orphans(synth_tables, tmp_path, capsys):
    d, _ = synth_tables
    lines = (d / "measurements.csv").read_text().splitlines()
    partial = tmp_path / "m.csv"
    partial.write_text("\n".join(lines[:-2]) + "\n")
    report = tmp_path / "orphans.json"
    code, _, err = run(
        ["ingest", "--features", d / "features.csv", "--measurements", partial, "--out", tmp_path / "ds.json", "--orphans", report],
        capsys,
    )
    assert code == 0 and "790 records" in err
    doc = json.loads(report.read_text())
    assert len(doc["orphan_features"]) == 2 and doc["orphan_measurements"] == []


def test_ingest_empty_intersection(synth_tables, tmp_path, capsys):
    d, _ = synth_tables
    m = tmp_path / "m.csv"
    m.write_text("sequence_name,preset,crf,energy_j,enc_time_s\nCactus,medium,99,1.0,1.0\n")
    code, _, err = run(["ingest", "--features", d / "features.csv", "--measurements", m, "--out", tmp_path / "x.json"], capsys)
    assert code == 2
    assert json.loads(err)["error"] == "data"


def test_usage_errors(capsys):
    assert run([], capsys)[0] == 1
    assert run(["fit"], capsys)[0] == 1
    code, _, err = run(["crossval", "--dataset", "x", "--k", "1"], capsys)
    assert code == 1 and json.loads(err)["exit_code"] == 1
    assert run(["synth", "--variant", "xm"], capsys)[0] == 1


def test_missing_file_is_data_error(tmp_path, capsys):
    assert run(["fit", "--dataset", tmp_path / "nope.json"], capsys)[0] == 2


def test_help_shows_defaults(capsys):
    with pytest.raises(SystemExit):
        build_parser().parse_args(["crossval", "--help"])
    out = capsys.readouterr().out
    assert "(default: 10)" in out and "(default: both)" in out


@pytest.fixture(scope="module")
def noiseless_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("synth") / "ds.json"
    assert main(["synth", "--noise", "0", "--seed", "4", "--out", str(path)]) == 0
    return path


def test_crossval_noiseless(noiseless_file, tmp_path, capsys):
    out = tmp_path / "rep.json"
    code, _, _ = run(["crossval", "--dataset", noiseless_file, "--kind", "sm", "--grouping", "per-preset", "--out", out], capsys)
    assert code == 0
    rep = json.loads(out.read_text())
    assert len(rep["per_preset"]) == 9
    assert max(rep["per_preset"].values()) < 1e-6


def test_fit_and_predict(noiseless_file, tmp_path, capsys):
    model = tmp_path / "m.json"
    assert run(["fit", "--dataset", noiseless_file, "--kind", "t", "--scope", "medium", "--out", model], capsys)[0] == 0
    doc = json.loads(model.read_text())
    assert doc["kind"] == "T" and doc["training"]["n_records"] == 88
    code, out, _ = run(["predict", "--dataset", noiseless_file, "--model", model], capsys)
    assert code == 0 and len(out.splitlines()) == 793


def test_predict_zero_model(noiseless_file, tmp_path, capsys):
    from encenergy.catalog import build_catalog, selected_names
    from encenergy.models import FeatureModel, FittedModel, ModelKind, TrainingInfo, save_model

    zero = FeatureModel("EM", {n: 0.0 for n in selected_names(build_catalog(), "EM")})
    path = tmp_path / "zero.json"
    path.write_text(save_model(FittedModel(ModelKind.EM, zero, TrainingInfo("", "all"))))
    code, out, _ = run(["predict", "--dataset", noiseless_file, "--model", path], capsys)
    assert code == 0
    rows = out.splitlines()[1:]
    assert len(rows) == 792 and all(float(r.split(",")[2]) == 0.0 for r in rows)


def test_config_file(noiseless_file, tmp_path, capsys):
    cfg = tmp_path / "cfg.json"
    out = tmp_path / "rep.json"
    cfg.write_text(json.dumps({"dataset": str(noiseless_file), "crossval": {"kind": "uf", "grouping": "all-presets", "k": 5}}))
    assert run(["--config", cfg, "crossval", "--out", out], capsys)[0] == 0
    rep = json.loads(out.read_text())
    assert rep["kind"] == "UF" and rep["k"] == 5
    # flags win over the config file
    assert run(["--config", cfg, "crossval", "--k", "4", "--out", out], capsys)[0] == 0
    assert json.loads(out.read_text())["k"] == 4
    bad = tmp_path / "bad.json"
    bad.write_text("[1]")
    assert run(["--config", bad, "catalog"], capsys)[0] == 1


def test_report_text(noiseless_file, tmp_path, capsys):
    paths = []
    for kind in ("qp", "t", "uf", "em", "sm"):
        p = tmp_path / f"{kind}.json"
        assert run(["crossval", "--dataset", noiseless_file, "--kind", kind, "--k", "5", "--out", p], capsys)[0] == 0
        paths.append(p)
    code, out, _ = run(["report", *paths], capsys)
    assert code == 0
    assert out.splitlines()[0].split() == ["preset", "QP", "T", "UF", "EM", "SM"]
    code, out, _ = run(["report", *paths, "--format", "plot-data", "--sequence", "Cactus"], capsys)
    assert code == 0 and len(out.splitlines()) == 10


def test_catalog_export(capsys):
    code, out, _ = run(["catalog"], capsys)
    assert code == 0
    assert len(json.loads(out)["slots"]) == 114


def test_measure_reduce(tmp_path, capsys):
    (tmp_path / "idle.csv").write_text("t,p\n0,20\n10,20\n")
    rows = ["sequence_name,preset,crf,total_trace,idle_trace"]
    for i, watts in enumerate((50, 50.01, 49.99)):
        (tmp_path / f"run{i}.csv").write_text(f"0,{watts}\n10,{watts}\n")
        rows.append(f"Cactus,medium,23,run{i}.csv,idle.csv")
    (tmp_path / "manifest.csv").write_text("\n".join(rows) + "\n")
    out, verdicts = tmp_path / "m.csv", tmp_path / "v.jsonl"
    code, _, _ = run(["measure-reduce", "--manifest", tmp_path / "manifest.csv", "--out", out, "--verdicts", verdicts], capsys)
    assert code == 0
    from encenergy.dataset import parse_measurement_table

    (m,) = parse_measurement_table(out.read_text())
    assert m.energy_j == pytest.approx(300.0) and m.enc_time_s == 10.0
    v = json.loads(verdicts.read_text())
    assert v["repeats"] == 3 and v["satisfied"] is True
