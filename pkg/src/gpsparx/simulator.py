"""Synthetic wake-affected farm data.

Ground truth is a top-hat Jensen deficit per upstream neighbour, combined
by root-sum-square and capped at 0.8, plus i.i.d. Gaussian noise on every
turbine speed.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Iterator, NamedTuple

import numpy as np

from .errors import InputError
from .geometry import (
    TWO_PI,
    FarmLayout,
    WakeGeometryParams,
    along_cross,
    build_wake_graph,
    normalize_angle,
)

MAX_COMBINED_DEFICIT = 0.8

DIRECTION_KINDS = ("constant", "sweep", "sinusoidal", "random_walk")


def jensen_deficit(d, ct, k, rotor_radius):
    """Fractional speed deficit at downstream distance ``d`` inside a wake.

    ``(1 - sqrt(1 - ct)) / (1 + k*d/r0)**2``, clamped to ``[0, 1)``.
    Works elementwise on arrays of ``d``.
    """
    if not 0.0 < ct < 1.0:
        raise InputError(f"thrust coefficient must lie in (0, 1), got {ct!r}")
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise InputError("downstream distance must be > 0")
    delta = (1.0 - math.sqrt(1.0 - ct)) / (1.0 + k * d / rotor_radius) ** 2
    delta = np.clip(delta, 0.0, np.nextafter(1.0, 0.0))
    return float(delta) if delta.ndim == 0 else delta


def combine_deficits(deficits) -> float:
    """Root-sum-square superposition, capped at 0.8."""
    deficits = np.asarray(deficits, dtype=float)
    if deficits.size == 0:
        return 0.0
    return float(min(math.sqrt(float(np.sum(deficits * deficits))), MAX_COMBINED_DEFICIT))


@dataclass(frozen=True)
class FreeStreamProcess:
    """Free-stream speed and direction generator.

    Speed follows a mean-reverting AR(1) process with stationary standard
    deviation ``speed_sd`` (``speed_sd=0`` gives a constant speed), floored
    at zero. Direction behaviour is selected by ``kind``:

    ``constant``     fixed at ``phi0``
    ``sweep``        linear sweep ``phi0 + 2*pi*cycles*t/n_steps``
    ``sinusoidal``   ``phi0 + amplitude*sin(2*pi*t/period)``
    ``random_walk``  Gaussian increments with sd ``step_sd``
    """

    kind: str = "constant"
    phi0: float = 0.0
    mean_speed: float = 10.0
    speed_sd: float = 2.0
    speed_corr: float = 0.9
    cycles: float = 1.0
    amplitude: float = 0.5
    period: float = 100.0
    step_sd: float = 0.05

    def __post_init__(self):
        if self.kind not in DIRECTION_KINDS:
            raise InputError(f"unknown free-stream kind {self.kind!r}; expected one of {DIRECTION_KINDS}")
        if self.mean_speed < 0 or self.speed_sd < 0:
            raise InputError("mean_speed and speed_sd must be >= 0")
        if not -1.0 < self.speed_corr < 1.0:
            raise InputError("speed_corr must lie in (-1, 1)")
        if self.period <= 0:
            raise InputError("period must be > 0")

    def draw(self, n_steps: int, rng: np.random.Generator) -> tuple[np.ndarray, np.ndarray]:
        """Return ``(u_inf, phi)`` series of length ``n_steps``."""
        rho = self.speed_corr
        innov = rng.standard_normal(n_steps) * self.speed_sd * math.sqrt(1.0 - rho * rho)
        dev = np.empty(n_steps)
        dev[0] = rng.standard_normal() * self.speed_sd
        for t in range(1, n_steps):
            dev[t] = rho * dev[t - 1] + innov[t]
        u_inf = np.maximum(self.mean_speed + dev, 0.0)

        t = np.arange(n_steps, dtype=float)
        if self.kind == "constant":
            phi = np.full(n_steps, self.phi0)
        elif self.kind == "sweep":
            phi = self.phi0 + TWO_PI * self.cycles * t / n_steps
        elif self.kind == "sinusoidal":
            phi = self.phi0 + self.amplitude * np.sin(TWO_PI * t / self.period)
        else:
            steps = rng.standard_normal(n_steps) * self.step_sd
            steps[0] = 0.0
            phi = self.phi0 + np.cumsum(steps)
        return u_inf, normalize_angle(phi)


@dataclass(frozen=True)
class SimulationConfig:
    thrust_coefficient: float = 0.8
    turbulence_noise_sd: float = 0.1
    free_stream: FreeStreamProcess = field(default_factory=FreeStreamProcess)
    rng_seed: int = 0
    n_steps: int = 500

    def __post_init__(self):
        if not 0.0 < self.thrust_coefficient < 1.0:
            raise InputError("thrust_coefficient must lie in (0, 1)")
        if not self.turbulence_noise_sd >= 0:
            raise InputError("turbulence_noise_sd must be >= 0")
        if int(self.n_steps) <= 0:
            raise InputError("n_steps must be > 0")
        if isinstance(self.free_stream, dict):
            object.__setattr__(self, "free_stream", FreeStreamProcess(**self.free_stream))

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "SimulationConfig":
        data = dict(data)
        fs = data.pop("free_stream", {})
        return cls(free_stream=FreeStreamProcess(**fs), **data)


class WindSample(NamedTuple):
    t: int
    u_inf: float
    phi: float


@dataclass(frozen=True)
class FarmDataset:
    """Time-ordered free-stream conditions and per-turbine speeds.

    ``u`` has shape ``(n_steps, S)``; column ``j`` is turbine ``j+1``.
    """

    layout: FarmLayout
    t: np.ndarray
    phi: np.ndarray
    u_inf: np.ndarray
    u: np.ndarray
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        t = np.array(self.t, dtype=np.int64).reshape(-1)
        phi = np.array(self.phi, dtype=float).reshape(-1)
        u_inf = np.array(self.u_inf, dtype=float).reshape(-1)
        u = np.array(self.u, dtype=float)
        n = t.size
        if u.ndim != 2 or u.shape != (n, self.layout.n_turbines):
            raise InputError(f"speed matrix must have shape ({n}, {self.layout.n_turbines}), got {u.shape}")
        if phi.size != n or u_inf.size != n:
            raise InputError("t, phi and u_inf must have equal length")
        if n > 1 and np.any(np.diff(t) <= 0):
            raise InputError("time indices must be strictly increasing")
        if np.any(u < 0) or np.any(u_inf < 0):
            raise InputError("wind speeds must be >= 0")
        if np.any((phi < 0) | (phi >= TWO_PI)):
            raise InputError("wind directions must lie in [0, 2*pi)")
        for a in (t, phi, u_inf, u):
            a.flags.writeable = False
        for name, a in zip(("t", "phi", "u_inf", "u"), (t, phi, u_inf, u)):
            object.__setattr__(self, name, a)

    def __len__(self) -> int:
        return int(self.t.size)

    @property
    def n_turbines(self) -> int:
        return self.layout.n_turbines

    def samples(self) -> Iterator[tuple[WindSample, np.ndarray]]:
        for k in range(len(self)):
            yield WindSample(int(self.t[k]), float(self.u_inf[k]), float(self.phi[k])), self.u[k]

    def subset(self, index) -> "FarmDataset":
        return FarmDataset(self.layout, self.t[index], self.phi[index], self.u_inf[index],
                           self.u[index], dict(self.meta))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["t", "phi", "u_inf"] + [f"u_{j}" for j in self.layout.ids])
        for k in range(len(self)):
            writer.writerow([str(int(self.t[k])), _fmt(self.phi[k]), _fmt(self.u_inf[k])]
                            + [_fmt(v) for v in self.u[k]])
        return buf.getvalue()

    def save(self, csv_path, sidecar: dict | None = None) -> None:
        """Write the CSV and a JSON sidecar next to it (``<stem>.json``)."""
        csv_path = Path(csv_path)
        csv_path.write_text(self.to_csv())
        side = {"layout": self.layout.to_dict(), **(sidecar if sidecar is not None else self.meta)}
        csv_path.with_suffix(".json").write_text(json.dumps(side, indent=2, sort_keys=True) + "\n")

    @classmethod
    def load(cls, csv_path, layout: FarmLayout | None = None) -> "FarmDataset":
        csv_path = Path(csv_path)
        if not csv_path.is_file():
            raise InputError(f"dataset file not found: {csv_path}")
        side_path = csv_path.with_suffix(".json")
        meta = json.loads(side_path.read_text()) if side_path.is_file() else {}
        if layout is None:
            if "layout" not in meta:
                raise InputError(f"no layout given and sidecar {side_path} lacks one")
            layout = FarmLayout.from_dict(meta["layout"])
        with csv_path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            expected = ["t", "phi", "u_inf"] + [f"u_{j}" for j in layout.ids]
            if header != expected:
                raise InputError(f"unexpected dataset header in {csv_path}: {header}")
            rows = [[float(v) for v in row] for row in reader]
        arr = np.array(rows, dtype=float).reshape(-1, len(expected))
        meta = {k: v for k, v in meta.items() if k != "layout"}
        return cls(layout, arr[:, 0].astype(np.int64), arr[:, 1], arr[:, 2], arr[:, 3:], meta)


def _fmt(v) -> str:
    return format(float(v), ".17g")


def turbine_deficits(layout: FarmLayout, phi: float, geom: WakeGeometryParams,
                     ct: float, graph=None) -> np.ndarray:
    """Combined deficit at every turbine for wind toward ``phi``."""
    if graph is None:
        graph = build_wake_graph(layout, phi, geom)
    along, _ = along_cross(layout.x, layout.y, graph.phi)
    out = np.zeros(layout.n_turbines)
    for s in range(layout.n_turbines):
        upstream = np.nonzero(graph.weights[:, s])[0]
        if upstream.size:
            d = along[s] - along[upstream]
            out[s] = combine_deficits(
                jensen_deficit(d, ct, geom.expansion_coefficient, layout.rotor_radius))
    return out


def simulate(layout: FarmLayout, geom: WakeGeometryParams, config: SimulationConfig) -> FarmDataset:
    """Generate a farm dataset; bit-identical for identical arguments."""
    n = int(config.n_steps)
    rng = np.random.default_rng(config.rng_seed)
    u_inf, phi = config.free_stream.draw(n, rng)
    noise = rng.standard_normal((n, layout.n_turbines)) * config.turbulence_noise_sd

    cache: dict[float, np.ndarray] = {}
    u = np.empty((n, layout.n_turbines))
    for k in range(n):
        key = float(phi[k])
        deficit = cache.get(key)
        if deficit is None:
            deficit = cache[key] = turbine_deficits(layout, key, geom, config.thrust_coefficient)
        u[k] = np.maximum(u_inf[k] * (1.0 - deficit) + noise[k], 0.0)

    meta = {"geometry": geom.to_dict(), "simulation": config.to_dict()}
    return FarmDataset(layout, np.arange(n), phi, u_inf, u, meta)
