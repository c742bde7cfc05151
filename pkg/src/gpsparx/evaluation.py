"""Sweep evaluation, polar error maps and summary metrics."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .errors import InputError, MetricError
from .geometry import TWO_PI
from .simulator import FarmDataset
from .switching import SectorTable, circular_distance, predict_switched_batch

RECORD_COLUMNS = ["t", "phi", "s", "pred_mean", "pred_var", "measured", "sq_err", "model_index"]

# predictor(u_inf, phi, measured) -> (mean, var, model_index), arrays of shape (n, S), (n, S), (n,)
Predictor = Callable[[np.ndarray, np.ndarray, np.ndarray], tuple]


class ErrorRecord(NamedTuple):
    t: int
    phi: float
    s: int
    pred_mean: float
    pred_var: float
    measured: float
    sq_err: float
    model_index: int


@dataclass(frozen=True)
class ErrorRecords:
    """Column store of :class:`ErrorRecord` rows, ordered by ``(t, s)``."""

    t: np.ndarray
    phi: np.ndarray
    s: np.ndarray
    pred_mean: np.ndarray
    pred_var: np.ndarray
    measured: np.ndarray
    sq_err: np.ndarray
    model_index: np.ndarray

    def __len__(self) -> int:
        return int(self.t.size)

    def __iter__(self) -> Iterator[ErrorRecord]:
        for k in range(len(self)):
            yield self[k]

    def __getitem__(self, k) -> ErrorRecord:
        return ErrorRecord(int(self.t[k]), float(self.phi[k]), int(self.s[k]), float(self.pred_mean[k]),
                           float(self.pred_var[k]), float(self.measured[k]), float(self.sq_err[k]),
                           int(self.model_index[k]))

    def select(self, mask) -> "ErrorRecords":
        return ErrorRecords(*(getattr(self, c)[mask] for c in RECORD_COLUMNS))

    @property
    def turbine_ids(self) -> np.ndarray:
        return np.unique(self.s)

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(RECORD_COLUMNS)
        for r in self:
            writer.writerow([r.t, _fmt(r.phi), r.s, _fmt(r.pred_mean), _fmt(r.pred_var),
                             _fmt(r.measured), _fmt(r.sq_err), r.model_index])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str) -> "ErrorRecords":
        reader = csv.reader(io.StringIO(text))
        header = next(reader, None)
        if header != RECORD_COLUMNS:
            raise InputError(f"unexpected record header {header}")
        rows = list(reader)
        cols = list(zip(*rows)) if rows else [()] * len(RECORD_COLUMNS)
        ints = {"t", "s", "model_index"}
        return cls(*(np.array(c, dtype=np.int64 if name in ints else float)
                     for name, c in zip(RECORD_COLUMNS, cols)))


def _fmt(v: float) -> str:
    return format(float(v), ".17g")


def evaluate_sweep(models, table: SectorTable, dataset: FarmDataset, mode: str = "osa",
                   predictor: Predictor | None = None) -> ErrorRecords:
    """Predict every turbine at every step of ``dataset`` and record the errors.

    ``predictor`` replaces the switched GP-SPARX prediction (used for stubs
    and baselines); it receives the whole sweep at once.
    """
    n = len(dataset)
    if n == 0:
        raise InputError("test dataset is empty")
    measured = np.asarray(dataset.u, dtype=float)
    if predictor is None:
        mean, var, idx = predict_switched_batch(models, table, dataset.u_inf, dataset.phi, mode,
                                                measured if mode == "osa" else None)
    else:
        mean, var, idx = predictor(np.asarray(dataset.u_inf), np.asarray(dataset.phi), measured)
    mean = np.asarray(mean, dtype=float).reshape(n, -1)
    var = np.asarray(var, dtype=float).reshape(n, -1)
    S = dataset.n_turbines
    if mean.shape[1] != S:
        raise InputError(f"predictor returned {mean.shape[1]} turbines, dataset has {S}")
    err = mean - measured
    return ErrorRecords(
        t=np.repeat(np.asarray(dataset.t, dtype=np.int64), S),
        phi=np.repeat(np.asarray(dataset.phi, dtype=float), S),
        s=np.tile(np.arange(1, S + 1, dtype=np.int64), n),
        pred_mean=mean.ravel(),
        pred_var=var.ravel(),
        measured=measured.ravel(),
        sq_err=(err * err).ravel(),
        model_index=np.repeat(np.asarray(idx, dtype=np.int64).reshape(-1), S),
    )


@dataclass(frozen=True)
class PolarErrorMap:
    """Squared errors aggregated into equal angular bins.

    Empty bins carry ``nan`` MSE and are listed by :attr:`empty`.
    ``turbine_mse[b, j]`` is the MSE of turbine ``turbine_ids[j]`` in bin ``b``.
    """

    edges: np.ndarray
    count: np.ndarray
    mse: np.ndarray
    turbine_ids: np.ndarray
    turbine_count: np.ndarray
    turbine_mse: np.ndarray

    @property
    def n_bins(self) -> int:
        return int(self.count.size)

    @property
    def empty(self) -> np.ndarray:
        return self.count == 0

    @property
    def centers(self) -> np.ndarray:
        return 0.5 * (self.edges[:-1] + self.edges[1:])

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["bin_lower_rad", "bin_upper_rad", "count", "mse"])
        for b in range(self.n_bins):
            mse = "" if self.count[b] == 0 else _fmt(self.mse[b])
            writer.writerow([_fmt(self.edges[b]), _fmt(self.edges[b + 1]), int(self.count[b]), mse])
        return buf.getvalue()


def bin_index(phi, n_bins: int) -> np.ndarray:
    width = TWO_PI / n_bins
    b = np.floor(np.asarray(phi, dtype=float) / width).astype(np.int64)
    return np.clip(b, 0, n_bins - 1)


def _grouped_mean(keys, values, n):
    count = np.bincount(keys, minlength=n)
    total = np.bincount(keys, weights=values, minlength=n)
    with np.errstate(invalid="ignore", divide="ignore"):
        mean = np.where(count > 0, total / np.maximum(count, 1), np.nan)
    return count, mean


def bin_polar(records: ErrorRecords, n_bins: int = 360) -> PolarErrorMap:
    if n_bins < 4:
        raise InputError(f"n_bins must be >= 4, got {n_bins}")
    b = bin_index(records.phi, n_bins)
    count, mse = _grouped_mean(b, records.sq_err, n_bins)
    ids = records.turbine_ids
    col = np.searchsorted(ids, records.s)
    tcount, tmse = _grouped_mean(b * ids.size + col, records.sq_err, n_bins * ids.size)
    edges = np.arange(n_bins + 1) * (TWO_PI / n_bins)
    edges[-1] = TWO_PI
    return PolarErrorMap(edges, count, mse, ids, tcount.reshape(n_bins, ids.size),
                         tmse.reshape(n_bins, ids.size))


def nmse_value(y, yhat) -> float:
    """``100 / (N var(y)) * sum((y - yhat)**2)``; 0 is perfect, 100 predicts the mean."""
    y = np.asarray(y, dtype=float)
    yhat = np.asarray(yhat, dtype=float)
    if y.size == 0:
        raise MetricError("NMSE of an empty record set")
    v = float(np.var(y))
    if v == 0.0:
        raise MetricError("NMSE undefined: targets have zero variance")
    return 100.0 * float(np.sum((y - yhat) ** 2)) / (y.size * v)


def nmse(records: ErrorRecords) -> tuple[float, dict[int, float]]:
    """Global NMSE and a per-turbine breakdown keyed by turbine id."""
    total = nmse_value(records.measured, records.pred_mean)
    per = {}
    for s in records.turbine_ids:
        sel = records.s == s
        per[int(s)] = nmse_value(records.measured[sel], records.pred_mean[sel])
    return total, per


def band_mse(records: ErrorRecords, table: SectorTable, half_width: float = math.radians(10.0)) -> dict:
    """MSE near training angles versus near sector boundaries."""
    angles = np.array(table.training_angles)
    near_train = np.min(circular_distance(records.phi[:, None], angles[None, :]), axis=1) <= half_width
    if len(table) > 1:
        bounds = table.boundaries
        near_bound = np.min(circular_distance(records.phi[:, None], bounds[None, :]), axis=1) <= half_width
    else:
        near_bound = np.zeros(len(records), dtype=bool)
    train = float(np.mean(records.sq_err[near_train])) if near_train.any() else None
    bound = float(np.mean(records.sq_err[near_bound])) if near_bound.any() else None
    ratio = None
    if train is not None and bound is not None:
        ratio = bound / train if train > 0 else math.inf
    return {"half_width_rad": half_width, "training_band_mse": train, "training_band_count": int(near_train.sum()),
            "boundary_band_mse": bound, "boundary_band_count": int(near_bound.sum()), "ratio": ratio}


def _nmse_or_none(y, yhat):
    try:
        return nmse_value(y, yhat)
    except MetricError:
        return None


def summarize(records: ErrorRecords, table: SectorTable, mode: str,
              half_width: float = math.radians(10.0)) -> dict:
    """JSON-ready summary of an evaluated sweep."""
    total, per_turbine = nmse(records)
    sectors = []
    for e in sorted(table.entries, key=lambda e: e.model_index):
        sel = records.model_index == e.model_index
        sectors.append({
            "model_index": e.model_index,
            "training_angle": e.angle,
            "lower": e.lower,
            "upper": e.upper,
            "n_records": int(sel.sum()),
            "mse": float(np.mean(records.sq_err[sel])) if sel.any() else None,
            "nmse": _nmse_or_none(records.measured[sel], records.pred_mean[sel]) if sel.any() else None,
        })
    return {
        "mode": mode,
        "n_records": len(records),
        "mse": float(np.mean(records.sq_err)),
        "nmse": total,
        "per_turbine_nmse": {str(k): v for k, v in per_turbine.items()},
        "sectors": sectors,
        "band_comparison": band_mse(records, table, half_width),
    }
