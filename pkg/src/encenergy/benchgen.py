"""Synthetic corpora with known per-feature energies, and a reference WLS solver.

Count model
-----------
Every slot has a base rate per pixel-frame, drawn once from a fixed RNG
(``RATE_SEED``) log-uniformly in ``[1e-5, 1e-1]``; this is a structural
property of the synthetic codec and does not change with ``SynthSpec.seed``.
For a stream the expected count of a slot is::

    rate * width * height * frames * preset_mult * content_mult * crf_factor * jitter

with ``preset_mult`` log-uniform in [0.5, 2] per (slot, preset),
``content_mult`` log-uniform in [0.25, 4] per (slot, sequence),
``crf_factor = exp(-g * (crf - 18) / 15)`` with ``g`` uniform in [0, 1.5] per slot
and ``jitter`` log-normal with sigma 0.3 per (slot, stream). Counts are
Poisson draws around that expectation.

Some slots are then overwritten with aggregates of finer slots, the way a
real analyzer derives them: ``all(d)`` is the sum of the four intra modes,
``interCU(d)`` of ``inter``/``interSMP``/``interAMP``, ``Tr(d)`` of the four
transform slots, ``Bs = Bs1 + Bs2``, ``SAO_Y`` and ``SAO_C`` of their BO/EO
parts, ``fracpelAvg`` is half the horizontal plus vertical fractional-pel
total. No variant contains both an aggregate and all of its parts.

``E0`` is always 1, ``Islice`` is 1 plus a Poisson number of scene-cut
intra frames and ``PBslice`` the remaining frames. With a fixed frame count
these three columns are collinear, so their individual energies are not
identifiable (only ``E0 * frames - Islice - PBslice`` combinations are).

Times: ``enc_time = (E_model - TIME_OFFSET_J) / P(preset)`` with
``P(preset) = 30 W + 2 W * preset rank``; ``uf_time`` is the ultrafast
``enc_time`` of the same sequence and CRF; ``qp_equiv`` equals the CRF.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from .catalog import FeatureCatalog, Variant, build_catalog, selected_names, selection_mask
from .dataset import CRFS, PRESETS, Dataset, StreamMeta, StreamRecord, default_sequences
from .errors import DataError, NumericalError

RATE_SEED = 20220901
TIME_OFFSET_J = 2.0
REFERENCE_PIXEL_FRAMES = 1920 * 1080 * 64


def preset_power(preset: str) -> float:
    return 30.0 + 2.0 * PRESETS.index(preset)


def default_corpus() -> list[StreamMeta]:
    """Every sequence x preset x CRF cell (22 x 9 x 4 = 792 streams)."""
    return [
        StreamMeta.from_sequence(info, preset, crf)
        for info in default_sequences().values()
        for preset in PRESETS
        for crf in CRFS
    ]


def _base_rates(catalog: FeatureCatalog) -> np.ndarray:
    rng = np.random.default_rng(RATE_SEED)
    return 10.0 ** rng.uniform(-5.0, -1.0, catalog.n_slots)


def default_true_coeffs(variant: Variant | str, seed: int = 0, catalog: FeatureCatalog | None = None) -> dict[str, float]:
    """Per-occurrence energies giving every selected slot a comparable energy share.

    A 1080p, 64-frame stream spends roughly 200 J per slot on average.
    """
    catalog = catalog or build_catalog()
    variant = Variant.parse(variant)
    rng = np.random.default_rng([seed, 1])
    rates = _base_rates(catalog)
    _aggregate(catalog, rates)
    share = 10.0 ** rng.uniform(-0.7, 0.7, catalog.n_slots)
    coeffs = 200.0 * share / (rates * REFERENCE_PIXEL_FRAMES)
    general = {"E0": 5.0, "Islice": 0.5, "PBslice": 0.2}
    out = {}
    for i, name in enumerate(catalog.slot_names):
        out[name] = general.get(name, float(coeffs[i]))
    return {name: out[name] for name in selected_names(catalog, variant)}


@dataclass(frozen=True)
class SynthSpec:
    variant: Variant
    true_coeffs: Mapping[str, float]
    corpus: Sequence[StreamMeta] | None = None
    noise_rel: float = 0.02
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", Variant.parse(self.variant))
        if self.noise_rel < 0:
            raise DataError("noise_rel must be non-negative")
        expected = selected_names(build_catalog(), self.variant)
        if set(self.true_coeffs) != set(expected):
            raise DataError(f"true_coeffs must cover exactly the {len(expected)} {self.variant.value} slots")
        if any(v < 0 for v in self.true_coeffs.values()):
            raise DataError("true coefficients must be non-negative")


def _aggregate(catalog: FeatureCatalog, counts: np.ndarray) -> None:
    """Overwrite aggregate slots (last axis) with the sums of their parts, in place."""
    idx = catalog.slot_index

    def depth_sum(target: str, parts: Sequence[str]) -> None:
        for d in range(catalog.row(target).depth_count):
            counts[..., idx(target, d)] = sum(counts[..., idx(p, d)] for p in parts)

    depth_sum("all", ("pla", "dc", "hvd", "ang"))
    depth_sum("interCU", ("inter", "interSMP", "interAMP"))
    depth_sum("Tr", ("TrIntraY", "TrIntraC", "TrInterY", "TrInterC"))
    counts[..., idx("Bs")] = counts[..., idx("Bs1")] + counts[..., idx("Bs2")]
    counts[..., idx("SAO_Y")] = counts[..., idx("SAO_Y_BO")] + counts[..., idx("SAO_Y_EO")]
    counts[..., idx("SAO_C")] = counts[..., idx("SAO_C_BO")] + counts[..., idx("SAO_C_EO")]
    frac = sum(counts[..., idx("fracpelHor", d)] + counts[..., idx("fracpelVer", d)] for d in range(4))
    counts[..., idx("fracpelAvg")] = frac // 2 if counts.dtype.kind in "iu" else frac / 2


def generate(spec: SynthSpec, catalog: FeatureCatalog | None = None) -> Dataset:
    catalog = catalog or build_catalog()
    corpus = list(spec.corpus) if spec.corpus is not None else default_corpus()
    n = catalog.n_slots
    rng = np.random.default_rng(spec.seed)
    rates = _base_rates(catalog)
    preset_mult = {p: 2.0 ** rng.uniform(-1.0, 1.0, n) for p in PRESETS}
    names = sorted({m.sequence_name for m in corpus})
    content_mult = {s: 4.0 ** rng.uniform(-1.0, 1.0, n) for s in names}
    scene_cuts = {s: rng.uniform(0.0, 2.0) for s in names}
    gamma = rng.uniform(0.0, 1.5, n)

    general = [catalog.e0_index, catalog.slot_index("Islice"), catalog.slot_index("PBslice")]
    counts = np.zeros((len(corpus), n), dtype=np.int64)
    for r, meta in enumerate(corpus):
        px = meta.width * meta.height * meta.frame_count
        lam = (
            rates * px * preset_mult[meta.preset] * content_mult[meta.sequence_name]
            * np.exp(-gamma * (meta.crf - 18) / 15.0) * rng.lognormal(0.0, 0.3, n)
        )
        counts[r] = rng.poisson(lam)
        islice = min(1 + int(rng.poisson(scene_cuts[meta.sequence_name])), meta.frame_count)
        counts[r, general] = (1, islice, meta.frame_count - islice)
    _aggregate(catalog, counts)

    mask = selection_mask(catalog, spec.variant)
    coeff = np.array([spec.true_coeffs[name] for name in selected_names(catalog, spec.variant)])
    model_energy = counts[:, mask].astype(float) @ coeff
    noise = rng.uniform(-spec.noise_rel, spec.noise_rel, len(corpus)) if spec.noise_rel > 0 else np.zeros(len(corpus))
    energy = model_energy * (1.0 + noise)

    enc_time = [
        float(max(model_energy[r] - TIME_OFFSET_J, 0.0) / preset_power(meta.preset)) for r, meta in enumerate(corpus)
    ]
    uf = {
        (meta.sequence_name, meta.crf): enc_time[r] for r, meta in enumerate(corpus) if meta.preset == "ultrafast"
    }
    records = tuple(
        StreamRecord(
            meta,
            tuple(int(c) for c in counts[r]),
            float(energy[r]),
            float(enc_time[r]),
            uf.get((meta.sequence_name, meta.crf)),
            meta.crf,
        )
        for r, meta in enumerate(corpus)
    )
    return Dataset(records, catalog.version).sorted()


def truth_document(spec: SynthSpec) -> str:
    doc = {
        "variant": spec.variant.value,
        "seed": spec.seed,
        "noise_rel": spec.noise_rel,
        "coeffs": {k: float(v) for k, v in spec.true_coeffs.items()},
    }
    return json.dumps(doc, indent=2) + "\n"


def oracle_wls(X, y, w) -> np.ndarray:
    """Weighted least squares through the normal equations ``X^T W X c = X^T W y``.

    Assembles the Gram matrix explicitly and solves it with a Cholesky
    factorization. Raises :class:`NumericalError` for rank-deficient ``X``.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    y = np.asarray(y, dtype=float)
    w = np.asarray(w, dtype=float)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise NumericalError("oracle_wls needs a full-column-rank design")
    # equilibrate so the Gram matrix has unit diagonal
    d = np.sqrt(np.einsum("i,ij,ij->j", w, X, X))
    Xs = X / d
    gram = Xs.T @ (w[:, None] * Xs)
    rhs = Xs.T @ (w * y)
    try:
        factor = cho_factor(gram)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Gram matrix is not positive definite: {exc}") from None
    return cho_solve(factor, rhs) / d


__all__ = [
    "SynthSpec",
    "default_corpus",
    "default_true_coeffs",
    "generate",
    "oracle_wls",
    "preset_power",
    "truth_document",
]
