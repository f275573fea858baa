"""Reduction of power traces to encoding energies, plus the repeat-until-confident stopping rule."""
from __future__ import annotations

import csv
import io
import math
import warnings
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError, NegativeEnergyWarning
from .studentt import t_critical

DEFAULT_ALPHA = 0.99
DEFAULT_BETA = 0.02
DURATION_TOLERANCE = 0.01


@dataclass(frozen=True)
class PowerTrace:
    t: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float)
        p = np.asarray(self.p, dtype=float)
        if t.ndim != 1 or t.shape != p.shape:
            raise DataError("trace times and powers must be 1-D arrays of equal length")
        if np.any(np.diff(t) <= 0):
            raise DataError("trace times must be strictly increasing")
        if np.any(p < 0):
            raise DataError("trace powers must be non-negative")
        object.__setattr__(self, "t", t)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_samples(cls, samples: Sequence[tuple[float, float]]) -> "PowerTrace":
        arr = np.asarray(samples, dtype=float).reshape(-1, 2)
        return cls(arr[:, 0], arr[:, 1])

    @property
    def duration(self) -> float:
        return float(self.t[-1] - self.t[0]) if len(self.t) else 0.0


def integrate_power(trace: PowerTrace) -> float:
    """Trapezoidal integral of power over time, in joules."""
    if len(trace.t) < 2:
        raise DataError("need at least 2 samples to integrate a power trace")
    return float(np.trapezoid(trace.p, trace.t))


def encoding_energy(total: PowerTrace, idle: PowerTrace, tolerance: float = DURATION_TOLERANCE) -> float:
    """Energy attributable to encoding: integral of the total trace minus the idle trace.

    Both traces must cover the same duration within ``tolerance`` (relative).
    A negative difference is returned as-is and flagged with
    :class:`NegativeEnergyWarning`.
    """
    t_tot, t_idle = total.duration, idle.duration
    if abs(t_tot - t_idle) > tolerance * max(t_tot, t_idle):
        raise DataError(f"trace durations differ: total {t_tot:g} s vs idle {t_idle:g} s")
    energy = integrate_power(total) - integrate_power(idle)
    if energy < 0:
        warnings.warn(f"idle energy exceeds total energy (E_enc = {energy:g} J)", NegativeEnergyWarning, stacklevel=2)
    return energy


@dataclass(frozen=True)
class MeasurementSet:
    values: tuple[float, ...]
    alpha: float = DEFAULT_ALPHA
    beta: float = DEFAULT_BETA

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        if not 0.0 < self.alpha < 1.0:
            raise ValueError(f"alpha must be in (0, 1), got {self.alpha}")
        if self.beta < 0:
            raise ValueError(f"beta must be non-negative, got {self.beta}")


@dataclass(frozen=True)
class ConfidenceResult:
    satisfied: bool
    lhs: float
    rhs: float


def confidence_check(m: MeasurementSet) -> ConfidenceResult:
    """Stopping rule for repeated measurements.

    ``lhs = 2 * sigma / sqrt(n) * t_alpha(n - 1)`` with the sample standard
    deviation, ``rhs = beta * mean(values)``; repeat measuring until
    ``lhs < rhs``.
    """
    n = len(m.values)
    if n < 2:
        raise ValueError("the confidence test needs at least 2 measurements")
    vals = np.asarray(m.values)
    sigma = float(np.std(vals, ddof=1))
    lhs = 2.0 * sigma / math.sqrt(n) * t_critical(m.alpha, n - 1)
    rhs = m.beta * float(np.mean(vals))
    return ConfidenceResult(satisfied=lhs < rhs, lhs=lhs, rhs=rhs)


def parse_trace(text: str) -> PowerTrace:
    """Parse a two-column ``t_seconds,watts`` file; a non-numeric first row is taken as a header."""
    rows = [r for r in csv.reader(io.StringIO(text)) if r and any(c.strip() for c in r)]
    if rows:
        try:
            float(rows[0][0])
        except ValueError:
            rows = rows[1:]
    samples = []
    for lineno, row in enumerate(rows, 1):
        if len(row) != 2:
            raise DataError(f"trace row {lineno}: expected 2 fields, got {len(row)}")
        try:
            samples.append((float(row[0]), float(row[1])))
        except ValueError:
            raise DataError(f"trace row {lineno}: non-numeric value in {row!r}") from None
    return PowerTrace.from_samples(samples)


def read_trace(path: str | Path) -> PowerTrace:
    return parse_trace(Path(path).read_text(encoding="utf-8"))


@dataclass(frozen=True)
class ReducedMeasurement:
    key: tuple[str, str, int]
    energy_j: float
    enc_time_s: float
    repeats: int
    check: ConfidenceResult | None


def reduce_manifest(path: str | Path, alpha: float = DEFAULT_ALPHA, beta: float = DEFAULT_BETA) -> list[ReducedMeasurement]:
    """Reduce every repeat listed in a manifest and apply the stopping rule per stream.

    Manifest columns: ``sequence_name,preset,crf,total_trace,idle_trace``;
    trace paths are relative to the manifest. The reported energy is the
    mean over repeats and the time is the mean total-trace duration.
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        need = {"sequence_name", "preset", "crf", "total_trace", "idle_trace"}
        if reader.fieldnames is None or not need <= set(reader.fieldnames):
            raise DataError(f"manifest must have columns {sorted(need)}")
        groups: dict[tuple[str, str, int], list[tuple[float, float]]] = {}
        for row in reader:
            try:
                key = (row["sequence_name"], row["preset"], int(row["crf"]))
            except ValueError:
                raise DataError(f"manifest: bad crf {row['crf']!r}") from None
            total = read_trace(path.parent / row["total_trace"])
            idle = read_trace(path.parent / row["idle_trace"])
            groups.setdefault(key, []).append((encoding_energy(total, idle), total.duration))
    out = []
    for key, runs in groups.items():
        energies = [e for e, _ in runs]
        check = confidence_check(MeasurementSet(tuple(energies), alpha, beta)) if len(runs) >= 2 else None
        out.append(
            ReducedMeasurement(
                key=key,
                energy_j=float(np.mean(energies)),
                enc_time_s=float(np.mean([t for _, t in runs])),
                repeats=len(runs),
                check=check,
            )
        )
    return out
