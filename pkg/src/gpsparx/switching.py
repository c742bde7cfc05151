"""Hard switching between pattern models by wind-direction sector.

Sector boundaries sit at the circular midpoints between consecutive
training angles; sectors are half-open ``[lower, upper)`` arcs and may
wrap through zero (then ``lower > upper``).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .errors import InputError
from .geometry import TWO_PI, check_angle, normalize_angle
from .simulator import WindSample
from . import sparx


class Sector(NamedTuple):
    model_index: int
    lower: float
    upper: float
    angle: float


@dataclass(frozen=True)
class SectorTable:
    """Sectors sorted by lower bound; ``model_index`` refers to the input order."""

    entries: tuple[Sector, ...]

    def __len__(self) -> int:
        return len(self.entries)

    @property
    def boundaries(self) -> np.ndarray:
        return np.array([e.lower for e in self.entries])

    @property
    def training_angles(self) -> list[float]:
        return [e.angle for e in sorted(self.entries, key=lambda e: e.model_index)]

    def to_dict(self) -> dict:
        return {"sectors": [
            {"model_index": e.model_index, "training_angle": _r17(e.angle),
             "lower": _r17(e.lower), "upper": _r17(e.upper)}
            for e in self.entries
        ]}

    @classmethod
    def from_dict(cls, data: dict) -> "SectorTable":
        angles = sorted(data["sectors"], key=lambda e: int(e["model_index"]))
        return build_sectors([float(e["training_angle"]) for e in angles])


def _r17(v: float) -> float:
    return float(format(v, ".17g"))


def circular_distance(a, b):
    d = np.abs(np.mod(np.asarray(a, dtype=float) - b, TWO_PI))
    return np.minimum(d, TWO_PI - d)


def build_sectors(training_angles: Sequence[float]) -> SectorTable:
    """Partition the circle at midpoints between circularly consecutive angles."""
    angles = [check_angle(a, "training angle") for a in training_angles]
    if not angles:
        raise InputError("at least one training angle is required")
    if len(set(angles)) != len(angles):
        raise InputError(f"duplicate training angles: {angles}")
    if len(angles) == 1:
        return SectorTable((Sector(0, 0.0, TWO_PI, angles[0]),))

    order = sorted(range(len(angles)), key=lambda i: angles[i])
    srt = [angles[i] for i in order]
    n = len(srt)
    # mids[k] lies between srt[k] and srt[k+1] (wrapping for the last one)
    mids = []
    for k in range(n):
        a = srt[k]
        b = srt[k + 1] if k + 1 < n else srt[0] + TWO_PI
        mids.append(normalize_angle((a + b) / 2.0))
    entries = [Sector(order[k], mids[k - 1], mids[k], srt[k]) for k in range(n)]
    entries.sort(key=lambda e: e.lower)
    return SectorTable(tuple(entries))


def select_models(table: SectorTable, phi) -> np.ndarray:
    """Vectorised :func:`select_model` over an array of directions."""
    phi = np.asarray(phi, dtype=float)
    if len(table) == 1:
        return np.zeros(phi.shape, dtype=int)
    lowers = table.boundaries
    k = np.searchsorted(lowers, phi, side="right") - 1
    # k == -1: before the first lower bound, i.e. inside the wrapping sector
    k = np.where(k < 0, len(lowers) - 1, k)
    idx = np.array([e.model_index for e in table.entries])
    return idx[k]


def select_model(table: SectorTable, phi: float) -> int:
    phi = check_angle(phi)
    return int(select_models(table, phi))


def predict_switched(models, table: SectorTable, sample: WindSample, mode: str = "osa",
                     measured=None):
    """Predict with the model whose sector contains ``sample.phi``.

    Returns ``(mean, variance, model_index)``.
    """
    if len(models) != len(table):
        raise InputError(f"{len(models)} models for {len(table)} sectors")
    k = select_model(table, sample.phi)
    if mode == "osa":
        if measured is None:
            raise InputError("one-step prediction needs measured speeds")
        mean, var = sparx.predict_osa(models[k], sample, measured)
    elif mode == "cascade":
        mean, var = sparx.predict_cascade(models[k], sample)
    else:
        raise InputError(f"unknown prediction mode {mode!r}")
    return mean, var, k


def predict_switched_batch(models, table: SectorTable, u_inf, phi, mode: str = "osa",
                           measured=None):
    """Switched predictions for many samples, grouped by serving model."""
    if len(models) != len(table):
        raise InputError(f"{len(models)} models for {len(table)} sectors")
    u_inf = np.asarray(u_inf, dtype=float).reshape(-1)
    S = models[0].n_turbines
    idx = select_models(table, phi)
    mean = np.empty((u_inf.size, S))
    var = np.empty((u_inf.size, S))
    for k in np.unique(idx):
        sel = idx == k
        if mode == "osa":
            if measured is None:
                raise InputError("one-step prediction needs measured speeds")
            m, v = sparx.predict_osa_batch(models[k], u_inf[sel], np.asarray(measured)[sel])
        elif mode == "cascade":
            m, v = sparx.predict_cascade_batch(models[k], u_inf[sel])
        else:
            raise InputError(f"unknown prediction mode {mode!r}")
        mean[sel], var[sel] = m, v
    return mean, var, idx

