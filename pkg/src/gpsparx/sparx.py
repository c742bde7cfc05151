"""GP-SPARX: one GP per wind-direction pattern over wake-masked neighbour speeds.

Each turbine ``s`` contributes an input row
``[u_inf, w(1,s) u_1, ..., w(S,s) u_S]`` with ``w`` the wake adjacency of
the pattern direction; inactive neighbours are exactly zero.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import gp as gpcore
from .errors import FitError, InputError
from .geometry import FarmLayout, WakeGeometryParams, WakeGraph, build_wake_graph, topological_order
from .simulator import FarmDataset, WindSample

FORMAT_VERSION = 1

# hyperparameter search runs on a random subset of this many design rows
DEFAULT_FIT_OPTIONS = gpcore.FitOptions(max_opt_points=300)


@dataclass(frozen=True)
class GpSparxModel:
    pattern_phi: float
    wake_graph: WakeGraph
    gp: gpcore.TrainedGp

    def __post_init__(self):
        if self.gp.n_dims != self.wake_graph.n_turbines + 1:
            raise InputError(f"GP input dimension {self.gp.n_dims} != S+1 = {self.wake_graph.n_turbines + 1}")
        if self.wake_graph.phi != self.pattern_phi:
            raise InputError("wake graph direction differs from the pattern direction")

    @property
    def n_turbines(self) -> int:
        return self.wake_graph.n_turbines

    def to_dict(self) -> dict:
        return {
            "format_version": FORMAT_VERSION,
            "pattern_phi": self.pattern_phi,
            "n_turbines": self.n_turbines,
            "edges": [list(e) for e in sorted(self.wake_graph.edges)],
            "gp": self.gp.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "GpSparxModel":
        if data.get("format_version") != FORMAT_VERSION:
            raise InputError(f"unsupported GP-SPARX format version {data.get('format_version')!r}")
        phi = float(data["pattern_phi"])
        graph = WakeGraph.from_edges(phi, int(data["n_turbines"]), [tuple(e) for e in data["edges"]])
        return cls(phi, graph, gpcore.TrainedGp.from_dict(data["gp"]))

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict()) + "\n")

    @classmethod
    def load(cls, path) -> "GpSparxModel":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"model file not found: {path}")
        return cls.from_dict(json.loads(path.read_text()))


def feature_rows(u_inf, speeds, graph: WakeGraph) -> np.ndarray:
    """Input rows for every turbine at every step.

    ``u_inf`` has shape ``(n,)`` and ``speeds`` ``(n, S)``; the result has
    shape ``(n, S, S+1)`` where ``[k, s]`` is the row for turbine ``s+1``.
    """
    u_inf = np.asarray(u_inf, dtype=float).reshape(-1)
    speeds = np.asarray(speeds, dtype=float).reshape(u_inf.size, -1)
    S = graph.n_turbines
    if speeds.shape[1] != S:
        raise InputError(f"speed vectors have {speeds.shape[1]} entries, wake graph has {S} turbines")
    mask = graph.weights.T.astype(bool)  # mask[s, i] = w(i, s)
    neigh = np.where(mask[None, :, :], speeds[:, None, :], 0.0)
    rows = np.empty((u_inf.size, S, S + 1))
    rows[:, :, 0] = u_inf[:, None]
    rows[:, :, 1:] = neigh
    return rows


def build_design(dataset: FarmDataset, graph: WakeGraph) -> tuple[np.ndarray, np.ndarray]:
    """Design matrix with one row per (t, s), ordered by time then turbine."""
    if dataset.n_turbines != graph.n_turbines:
        raise InputError(f"dataset has {dataset.n_turbines} turbines, wake graph has {graph.n_turbines}")
    rows = feature_rows(dataset.u_inf, dataset.u, graph)
    S = graph.n_turbines
    return rows.reshape(-1, S + 1), np.asarray(dataset.u, dtype=float).reshape(-1)


def train_pattern(dataset: FarmDataset, layout: FarmLayout, geom: WakeGeometryParams,
                  pattern_phi: float, opts: gpcore.FitOptions | None = None,
                  init: gpcore.GpHyperparams | None = None) -> GpSparxModel:
    """Fit the pattern GP on data recorded at (or near) ``pattern_phi``."""
    if len(dataset) < 2:
        raise FitError(f"training a pattern needs at least 2 time steps, got {len(dataset)}")
    graph = build_wake_graph(layout, pattern_phi, geom)
    X, y = build_design(dataset, graph)
    gp = gpcore.fit(X, y, init=init, opts=opts or DEFAULT_FIT_OPTIONS)
    return GpSparxModel(graph.phi, graph, gp)


def _observation_variance(model: GpSparxModel, latent_var: np.ndarray) -> np.ndarray:
    noise = (model.gp.hyperparams.noise_sd * model.gp.standardization.y_sd) ** 2
    return latent_var + noise


def predict_osa_batch(model: GpSparxModel, u_inf, measured) -> tuple[np.ndarray, np.ndarray]:
    """One-step predictions from measured neighbour speeds, for many samples.

    Returns ``(mean, variance)`` of shape ``(n, S)``. The variance is that
    of a new measurement (latent variance plus noise).
    """
    u_inf = np.asarray(u_inf, dtype=float).reshape(-1)
    measured = np.asarray(measured, dtype=float)
    if measured.ndim != 2 or measured.shape != (u_inf.size, model.n_turbines):
        raise InputError(f"measured speeds must have shape ({u_inf.size}, {model.n_turbines})")
    S = model.n_turbines
    rows = feature_rows(u_inf, measured, model.wake_graph).reshape(-1, S + 1)
    mean, var = gpcore.predict(model.gp, rows)
    return mean.reshape(-1, S), _observation_variance(model, var).reshape(-1, S)


def predict_osa(model: GpSparxModel, sample: WindSample, measured) -> tuple[np.ndarray, np.ndarray]:
    mean, var = predict_osa_batch(model, [sample.u_inf], np.asarray(measured, dtype=float).reshape(1, -1))
    return mean[0], var[0]


def predict_cascade_batch(model: GpSparxModel, u_inf) -> tuple[np.ndarray, np.ndarray]:
    """Farm-wide predictions from the free-stream speed alone.

    Turbines are visited upstream first; each one's neighbour inputs are
    the predicted means of its upstream turbines. Input uncertainty is not
    propagated, so the variance is the per-turbine GP variance only.
    """
    u_inf = np.asarray(u_inf, dtype=float).reshape(-1)
    S = model.n_turbines
    w = model.wake_graph.weights
    # wake depth: turbines at equal depth depend only on shallower ones
    depth = np.zeros(S, dtype=int)
    for sid in topological_order(model.wake_graph):
        up = np.nonzero(w[:, sid - 1])[0]
        if up.size:
            depth[sid - 1] = depth[up].max() + 1
    mean = np.zeros((u_inf.size, S))
    var = np.zeros((u_inf.size, S))
    for level in range(depth.max() + 1):
        # full S-row blocks keep the arithmetic identical to one-step prediction
        rows = feature_rows(u_inf, mean, model.wake_graph).reshape(-1, S + 1)
        m, v = gpcore.predict(model.gp, rows)
        at = depth == level
        mean[:, at] = m.reshape(-1, S)[:, at]
        var[:, at] = v.reshape(-1, S)[:, at]
    return mean, _observation_variance(model, var)


def predict_cascade(model: GpSparxModel, sample: WindSample) -> tuple[np.ndarray, np.ndarray]:
    mean, var = predict_cascade_batch(model, [sample.u_inf])
    return mean[0], var[0]


def with_fit_seed(opts: gpcore.FitOptions | None, seed: int) -> gpcore.FitOptions:
    return replace(opts or DEFAULT_FIT_OPTIONS, seed=int(seed))
