"""Training by bounded weighted least squares.

Rows are weighted by ``1 / E**2`` so that the weighted sum of squared
residuals equals the sum of squared *relative* errors. Feature energies are
bounded below by zero; baseline models are fitted unbounded.

The bounded solver is an active-set method in the style of Lawson and Hanson,
extended to general lower bounds and free (unbounded) columns.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .catalog import FeatureCatalog, build_catalog, selected_names, selection_mask
from .dataset import Dataset, StreamKey, StreamRecord, dataset_hash, format_key
from .errors import DataError, NumericalError, RankDeficientWarning
from .models import FeatureModel, FittedModel, ModelKind, QpModel, TimeModel, TrainingInfo, UfTimeModel, qp_time

RCOND = 1e-10


@dataclass(frozen=True)
class DesignMatrix:
    X: np.ndarray
    y: np.ndarray
    w: np.ndarray
    columns: tuple[str, ...] = ()
    keys: tuple[StreamKey, ...] = ()

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.X, dtype=float))
        y = np.asarray(self.y, dtype=float).ravel()
        w = np.asarray(self.w, dtype=float).ravel()
        if X.shape[0] != y.size or y.size != w.size:
            raise DataError(f"design has {X.shape[0]} rows, {y.size} targets and {w.size} weights")
        if np.any(~(w > 0)):
            raise DataError("design weights must be positive")
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "w", w)
        if not self.columns:
            object.__setattr__(self, "columns", tuple(f"c{j}" for j in range(X.shape[1])))

    @property
    def shape(self) -> tuple[int, int]:
        return self.X.shape


@dataclass(frozen=True)
class FitResult:
    coeffs: np.ndarray
    objective_value: float
    iterations: int
    active_bounds: tuple[int, ...]
    excluded: tuple[int, ...] = ()
    rank: int = 0


def weighted_sse(design: DesignMatrix, coeffs: np.ndarray) -> float:
    r = design.X @ coeffs - design.y
    return float(np.sum(design.w * r * r))


def _lstsq(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    return np.linalg.lstsq(A, b, rcond=RCOND)[0]


def _active_set(A: np.ndarray, b: np.ndarray, bounded: np.ndarray, maxiter: int) -> tuple[np.ndarray, int]:
    """min ||A x - b|| subject to x[bounded] >= 0, other entries free."""
    m, n = A.shape
    x = np.zeros(n)
    passive = ~bounded
    if passive.any():
        x[passive] = _lstsq(A[:, passive], b)
    tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, float(np.linalg.norm(b)))
    iterations = 0
    blocked = np.zeros(n, dtype=bool)
    while True:
        grad = A.T @ (b - A @ x)
        cand = bounded & ~passive & ~blocked & (grad > tol)
        if not cand.any():
            return x, iterations
        j = int(np.argmax(np.where(cand, grad, -np.inf)))
        passive[j] = True
        first = True
        while True:
            iterations += 1
            if iterations > maxiter:
                raise NumericalError(f"active-set solver exceeded {maxiter} iterations")
            z = np.zeros(n)
            z[passive] = _lstsq(A[:, passive], b)
            if first and z[j] <= 0:
                # column j cannot improve the fit in floating point; skip it this round
                passive[j] = False
                blocked[j] = True
                break
            first = False
            infeasible = passive & bounded & (z <= 0)
            if not infeasible.any():
                x = z
                blocked[:] = False
                break
            idx = np.flatnonzero(infeasible)
            steps = x[idx] / (x[idx] - z[idx])
            k = int(np.argmin(steps))
            x = x + steps[k] * (z - x)
            leaving = passive & bounded & (x <= 1e-14 * max(1.0, float(np.max(np.abs(x)))))
            leaving[idx[k]] = True
            passive &= ~leaving
            x[bounded & ~passive] = 0.0


def solve_bounded_ls(design: DesignMatrix, lower_bounds: Sequence[float] | np.ndarray | None = None) -> FitResult:
    """Minimize ``sum(w * (X @ c - y)**2)`` subject to ``c >= lower_bounds``.

    ``lower_bounds`` entries of ``-inf`` leave a column free; ``None`` means
    no bounds at all. Columns that are identically zero are excluded and
    their coefficient is set to the bound (or zero when unbounded).
    Rank-deficient systems get the minimum-norm solution, with singular
    values below ``1e-10 * s_max`` truncated, and a :class:`RankDeficientWarning`.
    """
    m, n = design.shape
    if m == 0 or n == 0:
        raise DataError("empty least-squares system")
    lower = np.full(n, -np.inf) if lower_bounds is None else np.asarray(lower_bounds, dtype=float).ravel()
    if lower.size != n:
        raise DataError(f"{lower.size} bounds for {n} columns")
    if not np.all(np.isfinite(design.X)) or not np.all(np.isfinite(design.y)):
        raise DataError("design contains non-finite values")

    sw = np.sqrt(design.w)
    A_full = design.X * sw[:, None]
    b = design.y * sw
    norms = np.linalg.norm(A_full, axis=0)
    keep = norms > 0
    excluded = tuple(int(j) for j in np.flatnonzero(~keep))

    coeffs = np.where(np.isfinite(lower), lower, 0.0)
    A = A_full[:, keep] / norms[keep]
    lo = lower[keep] * norms[keep]
    bounded = np.isfinite(lo)

    s = np.linalg.svd(A, compute_uv=False)
    rank = int(np.sum(s > RCOND * s[0])) if s.size else 0
    if rank < A.shape[1]:
        warnings.warn(
            f"least-squares system is rank deficient (rank {rank} of {A.shape[1]} columns)",
            RankDeficientWarning,
            stacklevel=2,
        )

    if not bounded.any():
        if rank < A.shape[1]:
            # minimum norm in the caller's coordinates, not the scaled ones
            z = _lstsq(A_full[:, keep], b)
        else:
            z = _lstsq(A, b) / norms[keep]
        iterations = 1
    else:
        shift = np.where(bounded, lo, 0.0)
        u, iterations = _active_set(A, b - A @ shift, bounded, maxiter=max(100, 5 * A.shape[1]))
        z = (u + shift) / norms[keep]
        # the bound holds exactly for columns the active set pinned
        z[bounded] = np.maximum(z[bounded], lower[keep][bounded])
    coeffs[keep] = z

    active = tuple(int(j) for j in np.flatnonzero(np.isfinite(lower) & keep) if coeffs[j] <= lower[j])
    return FitResult(
        coeffs=coeffs,
        objective_value=weighted_sse(design, coeffs),
        iterations=int(iterations),
        active_bounds=active,
        excluded=excluded,
        rank=rank,
    )


def identifiable_columns(design: DesignMatrix, tol: float = 1e-8) -> np.ndarray:
    """Mask of columns whose coefficient is uniquely determined by the data.

    Coefficient ``j`` is identifiable iff the unit vector ``e_j`` lies in the
    row space of the weighted design.
    """
    A = design.X * np.sqrt(design.w)[:, None]
    norms = np.linalg.norm(A, axis=0)
    out = np.zeros(A.shape[1], dtype=bool)
    keep = norms > 0
    if not keep.any():
        return out
    _, s, vt = np.linalg.svd(A[:, keep] / norms[keep], full_matrices=False)
    vr = vt[s > RCOND * s[0]]
    out[keep] = 1.0 - np.sum(vr * vr, axis=0) < tol
    return out


# --- design construction -------------------------------------------------------

def _require(records: Sequence[StreamRecord], attr: str, label: str) -> np.ndarray:
    values = []
    for rec in records:
        v = getattr(rec, attr)
        if v is None:
            raise DataError(f"{format_key(rec.key)}: {label} required")
        values.append(v)
    return np.asarray(values, dtype=float)


def _relative_weights(targets: np.ndarray, records: Sequence[StreamRecord], what: str) -> np.ndarray:
    bad = np.flatnonzero(~(targets > 0))
    if bad.size:
        raise DataError(f"{format_key(records[bad[0]].key)}: {what} must be positive for relative weighting")
    return 1.0 / targets**2


def build_design(records: Sequence[StreamRecord], kind: ModelKind | str, catalog: FeatureCatalog | None = None) -> DesignMatrix:
    """Design matrix for one model family.

    For ``QP`` the design is the encoding-time polynomial
    ``[qp^3, -qp^2, -qp, 1]`` against measured encoding time; the mean power
    is fitted in a second stage (see :func:`fit_records`).
    """
    kind = ModelKind.parse(kind)
    catalog = catalog or build_catalog()
    records = list(records)
    if not records:
        raise DataError("no records to build a design from")
    keys = tuple(r.key for r in records)
    energy = np.array([r.energy_j for r in records], dtype=float)
    if kind.is_feature:
        mask = selection_mask(catalog, kind.variant)
        counts = np.array([r.features for r in records], dtype=float)
        if counts.shape[1] != catalog.n_slots:
            raise DataError("feature vectors do not match the catalog layout")
        return DesignMatrix(
            counts[:, mask], energy, _relative_weights(energy, records, "energy"),
            tuple(selected_names(catalog, kind.variant)), keys,
        )
    if kind is ModelKind.QP:
        qp = _require(records, "qp_equiv", "qp_equiv")
        t = _require(records, "enc_time_s", "enc_time")
        X = np.column_stack([qp**3, -(qp**2), -qp, np.ones_like(qp)])
        return DesignMatrix(X, t, _relative_weights(t, records, "enc_time"), ("kappa", "lambda", "mu", "t0"), keys)
    attr, label = ("enc_time_s", "enc_time") if kind is ModelKind.T else ("uf_time_s", "uf_time")
    t = _require(records, attr, label)
    X = np.column_stack([np.ones_like(t), t])
    return DesignMatrix(X, energy, _relative_weights(energy, records, "energy"), ("e0", "p"), keys)


def fit_records(
    records: Sequence[StreamRecord],
    kind: ModelKind | str,
    catalog: FeatureCatalog | None = None,
    bounded: bool = True,
    training: TrainingInfo | None = None,
) -> tuple[FittedModel, FitResult]:
    kind = ModelKind.parse(kind)
    catalog = catalog or build_catalog()
    design = build_design(records, kind, catalog)
    training = training or TrainingInfo("", "all", n_records=len(records))
    if kind.is_feature:
        lower = np.zeros(design.shape[1]) if bounded else None
        res = solve_bounded_ls(design, lower)
        unident = tuple(design.columns[j] for j in res.excluded)
        model = FeatureModel(kind.variant, dict(zip(design.columns, map(float, res.coeffs))), unident, catalog.version)
    elif kind is ModelKind.QP:
        res = solve_bounded_ls(design)
        kappa, lam, mu, t0 = map(float, res.coeffs)
        t_hat = np.array([qp_time(QpModel(kappa, lam, mu, t0, 1.0), r.qp_equiv) for r in records])
        energy = np.array([r.energy_j for r in records], dtype=float)
        ratio = t_hat / energy
        denom = float(ratio @ ratio)
        if denom == 0:
            raise NumericalError("QP time polynomial predicts zero time for every record")
        model = QpModel(kappa, lam, mu, t0, float(np.sum(ratio)) / denom)
    else:
        res = solve_bounded_ls(design)
        e0, p = map(float, res.coeffs)
        model = TimeModel(e0, p) if kind is ModelKind.T else UfTimeModel(e0, p)
    return FittedModel(kind, model, training), res


def fit(
    dataset: Dataset,
    kind: ModelKind | str,
    scope: str | None = None,
    bounded: bool = True,
    catalog: FeatureCatalog | None = None,
) -> FittedModel:
    """Train one model family on the dataset, optionally restricted to one preset."""
    scope = None if scope in (None, "all", "ALL") else scope
    subset = dataset.filter(scope)
    if not len(subset):
        raise DataError(f"no records for preset scope {scope!r}")
    info = TrainingInfo(dataset_hash(dataset), scope or "all", None, None, len(subset))
    fitted, _ = fit_records(subset.records, kind, catalog, bounded, info)
    return fitted
