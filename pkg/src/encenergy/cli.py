"""Command-line entry point: ``encenergy <subcommand> ...``.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
Errors are reported on stderr as one JSON object.
"""
from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path
from typing import Sequence

from . import benchgen, dataset as dsio, evaluation, fitting, measurement, models
from .catalog import Variant, build_catalog
from .errors import DataError, NumericalError

DEFAULT_SEED = 0
EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERIC = 0, 1, 2, 3
KIND_CHOICES = [k.value.lower() for k in models.ModelKind]


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _write(path: str | None, text: str | bytes) -> None:
    if path in (None, "-"):
        sys.stdout.write(text.decode() if isinstance(text, bytes) else text)
        return
    mode = "wb" if isinstance(text, bytes) else "w"
    with open(path, mode, **({} if mode == "wb" else {"encoding": "utf-8", "newline": ""})) as fh:
        fh.write(text)


def _read(path: str) -> str:
    try:
        return Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read {path}: {exc.strerror}") from None


def _load_dataset(path: str) -> dsio.Dataset:
    return dsio.load_dataset(_read(path))


# --- subcommands ---------------------------------------------------------------------

def cmd_ingest(args) -> int:
    features = dsio.parse_feature_table(_read(args.features))
    meas = dsio.parse_measurement_table(_read(args.measurements))
    sequences = dsio.parse_sequence_table(_read(args.sequences)) if args.sequences else None
    report = dsio.join(features, meas, sequences)
    _write(args.out, dsio.save_dataset(report.dataset))
    summary = {
        "records": len(report.dataset),
        "orphan_features": [dsio.format_key(k) for k in report.orphan_features],
        "orphan_measurements": [dsio.format_key(k) for k in report.orphan_measurements],
    }
    print(f"{len(report.dataset)} records", file=sys.stderr)
    if args.orphans:
        _write(args.orphans, json.dumps(summary, indent=2) + "\n")
    elif summary["orphan_features"] or summary["orphan_measurements"]:
        print(json.dumps(summary), file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    coeffs = benchgen.default_true_coeffs(args.variant, args.coeff_seed)
    spec = benchgen.SynthSpec(Variant.parse(args.variant), coeffs, noise_rel=args.noise, seed=args.seed)
    ds = benchgen.generate(spec)
    _write(args.out, dsio.save_dataset(ds))
    if args.truth:
        _write(args.truth, benchgen.truth_document(spec))
    print(f"{len(ds)} records", file=sys.stderr)
    return EXIT_OK


def cmd_fit(args) -> int:
    ds = _load_dataset(args.dataset)
    fitted = fitting.fit(ds, args.kind, args.scope, bounded=not args.unbounded)
    _write(args.out, models.save_model(fitted))
    return EXIT_OK


def cmd_crossval(args) -> int:
    ds = _load_dataset(args.dataset)
    bounded = not args.unbounded
    if args.grouping == "both":
        report = evaluation.evaluate(ds, args.kind, args.k, args.seed, bounded)
    else:
        report = evaluation.cross_validate(ds, args.kind, args.grouping, args.k, args.seed, bounded)
    _write(args.out, evaluation.save_report(report))
    return EXIT_OK


def cmd_predict(args) -> int:
    ds = _load_dataset(args.dataset)
    fitted = models.load_model(_read(args.model))
    lines = ["key,measured_j,estimated_j"]
    for rec in ds.records:
        lines.append(f"{dsio.format_key(rec.key)},{rec.energy_j!r},{fitted.predict(rec)!r}")
    _write(args.out, "\n".join(lines) + "\n")
    return EXIT_OK


def cmd_report(args) -> int:
    reports = [evaluation.load_report(_read(p)) for p in args.reports]
    text = evaluation.render_report(reports, args.format, sequence=args.sequence, crf=args.crf, kind=args.plot_kind)
    _write(args.out, text)
    return EXIT_OK


def cmd_measure_reduce(args) -> int:
    reduced = measurement.reduce_manifest(args.manifest, args.alpha, args.beta)
    rows = [dsio.Measurement(r.key, r.energy_j, r.enc_time_s) for r in reduced]
    _write(args.out, dsio.format_measurement_table(rows))
    verdicts = []
    for r in reduced:
        verdicts.append(
            json.dumps(
                {
                    "key": dsio.format_key(r.key),
                    "repeats": r.repeats,
                    "satisfied": None if r.check is None else r.check.satisfied,
                    "lhs": None if r.check is None else r.check.lhs,
                    "rhs": None if r.check is None else r.check.rhs,
                }
            )
        )
    _write(args.verdicts, "\n".join(verdicts) + "\n")
    return EXIT_OK


def cmd_catalog(args) -> int:
    _write(args.out, build_catalog().to_json() + "\n")
    return EXIT_OK


# --- parser ------------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    fmt = argparse.ArgumentDefaultsHelpFormatter
    p = _Parser(prog="encenergy", description="Bit-stream feature based encoding-energy estimation.", formatter_class=fmt)
    p.add_argument("--config", help="JSON file with option defaults; command-line flags take precedence")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, func, help_):
        sp = sub.add_parser(name, help=help_, description=help_, formatter_class=fmt)
        sp.set_defaults(func=func)
        return sp

    sp = add("ingest", cmd_ingest, "join a feature table and a measurement table into a dataset")
    sp.add_argument("--features", required=True, help="feature-count CSV")
    sp.add_argument("--measurements", required=True, help="measurement CSV")
    sp.add_argument("--sequences", default=None, help="sequence metadata CSV (default: built-in 22-sequence corpus)")
    sp.add_argument("--out", default="-", help="dataset JSON output")
    sp.add_argument("--orphans", default=None, help="write the unmatched-key report here")

    sp = add("synth", cmd_synth, "generate a synthetic dataset with known feature energies")
    sp.add_argument("--variant", default="sm", choices=["sm", "em"], help="variant whose features drive the energy")
    sp.add_argument("--noise", type=float, default=0.02, help="multiplicative noise bound on energies")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="corpus RNG seed")
    sp.add_argument("--coeff-seed", type=int, default=DEFAULT_SEED, help="seed for the default true coefficients")
    sp.add_argument("--out", default="-", help="dataset JSON output")
    sp.add_argument("--truth", default=None, help="ground-truth coefficient JSON output")

    def model_opts(sp):
        sp.add_argument("--dataset", required=True, help="dataset JSON")
        sp.add_argument("--kind", default="sm", choices=KIND_CHOICES, help="model family")
        sp.add_argument("--unbounded", action="store_true", help="drop the non-negativity bound on feature energies")

    sp = add("fit", cmd_fit, "train one model")
    model_opts(sp)
    sp.add_argument("--scope", default="all", help="preset to train on, or 'all'")
    sp.add_argument("--out", default="-", help="model JSON output")

    sp = add("crossval", cmd_crossval, "k-fold cross-validation of one model family")
    model_opts(sp)
    sp.add_argument("--grouping", default="both", choices=[*evaluation.GROUPINGS, "both"], help="CV grouping")
    sp.add_argument("--k", type=int, default=10, help="number of folds")
    sp.add_argument("--seed", type=int, default=DEFAULT_SEED, help="fold RNG seed")
    sp.add_argument("--out", default="-", help="report JSON output")

    sp = add("predict", cmd_predict, "estimate the energy of every stream in a dataset")
    sp.add_argument("--dataset", required=True, help="dataset JSON")
    sp.add_argument("--model", required=True, help="model JSON")
    sp.add_argument("--out", default="-", help="CSV output")

    sp = add("report", cmd_report, "render cross-validation reports")
    sp.add_argument("reports", nargs="+", help="report JSON files, one per model kind")
    sp.add_argument("--format", default="text", choices=evaluation.REPORT_FORMATS, help="output format")
    sp.add_argument("--sequence", default="Cactus", help="sequence for plot-data")
    sp.add_argument("--crf", type=int, default=None, help="CRF for plot-data (default: sum over CRFs)")
    sp.add_argument("--plot-kind", default=None, choices=KIND_CHOICES, help="model for plot-data (default: sm)")
    sp.add_argument("--out", default="-", help="output file")

    sp = add("measure-reduce", cmd_measure_reduce, "reduce power traces to encoding energies")
    sp.add_argument("--manifest", required=True, help="CSV: sequence_name,preset,crf,total_trace,idle_trace")
    sp.add_argument("--alpha", type=float, default=measurement.DEFAULT_ALPHA, help="confidence level")
    sp.add_argument("--beta", type=float, default=measurement.DEFAULT_BETA, help="relative deviation bound")
    sp.add_argument("--out", default="-", help="measurement CSV output")
    sp.add_argument("--verdicts", default="-", help="stopping-rule verdicts (JSON lines)")

    sp = add("catalog", cmd_catalog, "export the feature catalog as JSON")
    sp.add_argument("--out", default="-", help="output file")
    return p


def _apply_config(parser: argparse.ArgumentParser, argv: Sequence[str]) -> argparse.Namespace:
    pre = argparse.ArgumentParser(add_help=False)
    pre.add_argument("--config")
    known, _ = pre.parse_known_args(argv)
    if known.config:
        try:
            cfg = json.loads(_read(known.config))
        except ValueError as exc:
            raise UsageError(f"config file {known.config} is not JSON: {exc}") from None
        if not isinstance(cfg, dict):
            raise UsageError("config file must hold a JSON object")
        subparsers = next(a for a in parser._actions if isinstance(a, argparse._SubParsersAction))
        for name, sp in subparsers.choices.items():
            dests = {a.dest for a in sp._actions}
            flat = {k.replace("-", "_"): v for k, v in cfg.items() if not isinstance(v, dict)}
            nested = {k.replace("-", "_"): v for k, v in cfg.get(name, {}).items()}
            values = {k: v for k, v in {**flat, **nested}.items() if k in dests}
            for action in sp._actions:
                if action.dest in values and action.required:
                    action.required = False
            sp.set_defaults(**values)
    return parser.parse_args(argv)


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = _apply_config(parser, argv)
        if args.command == "crossval" and args.k < 2:
            raise UsageError("--k must be at least 2")
        return args.func(args)
    except UsageError as exc:
        return _fail(EXIT_USAGE, "usage", str(exc))
    except NumericalError as exc:
        return _fail(EXIT_NUMERIC, "numerical", str(exc))
    except (DataError, ValueError, KeyError, OSError) as exc:
        return _fail(EXIT_DATA, "data", str(exc))


def _fail(code: int, category: str, message: str) -> int:
    print(json.dumps({"error": category, "exit_code": code, "message": message}), file=sys.stderr)
    return code


if __name__ == "__main__":
    sys.exit(main())
