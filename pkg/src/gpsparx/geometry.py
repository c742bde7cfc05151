"""Farm layout and direction-dependent wake adjacency.

Wind direction convention used throughout the package: ``phi`` is the
direction the wind blows *toward*, measured counterclockwise from the
+x axis, in radians, normalised to ``[0, 2*pi)``.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import InputError, InvariantError

TWO_PI = 2.0 * math.pi

__all__ = [
    "FarmLayout",
    "WakeGeometryParams",
    "WakeGraph",
    "build_wake_graph",
    "topological_order",
    "grid_layout",
    "normalize_angle",
    "check_angle",
    "along_cross",
]


def normalize_angle(phi):
    """Wrap an angle (or array of angles) into ``[0, 2*pi)``."""
    out = np.mod(phi, TWO_PI)
    # np.mod can return exactly 2*pi for tiny negative inputs
    out = np.where(out >= TWO_PI, 0.0, out)
    if np.ndim(out) == 0:
        return float(out)
    return out


def check_angle(phi, name="phi"):
    """Raise :class:`InputError` unless ``phi`` is a finite value in [0, 2*pi)."""
    try:
        phi = float(phi)
    except (TypeError, ValueError) as exc:
        raise InputError(f"{name} must be a real number, got {phi!r}") from exc
    if not math.isfinite(phi) or phi < 0.0 or phi >= TWO_PI:
        raise InputError(f"{name}={phi!r} is outside [0, 2*pi)")
    return phi


def along_cross(x, y, phi):
    """Coordinates in the frame where the wind blows along +x.

    Returns ``(along, cross)``; ``along`` grows downstream.
    """
    c, s = math.cos(phi), math.sin(phi)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return x * c + y * s, -x * s + y * c


@dataclass(frozen=True)
class FarmLayout:
    """Turbine positions (metres) with a uniform rotor diameter.

    Turbine ids are ``1..S`` in the order given by ``x`` and ``y``.
    """

    x: np.ndarray
    y: np.ndarray
    rotor_diameter: float
    hub_height: float = 0.0

    def __post_init__(self):
        x = np.array(self.x, dtype=float).reshape(-1)
        y = np.array(self.y, dtype=float).reshape(-1)
        if x.shape != y.shape or x.size == 0:
            raise InputError("layout needs matching, non-empty x and y coordinates")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise InputError("turbine coordinates must be finite")
        d = float(self.rotor_diameter)
        if not math.isfinite(d) or d <= 0:
            raise InputError(f"rotor_diameter must be > 0, got {self.rotor_diameter!r}")
        if x.size > 1:
            sep = np.hypot(x[:, None] - x[None, :], y[:, None] - y[None, :])
            np.fill_diagonal(sep, np.inf)
            if sep.min() <= d:
                raise InputError(
                    f"turbines closer than one rotor diameter (min separation {sep.min():.3f} m)"
                )
        x.flags.writeable = False
        y.flags.writeable = False
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "rotor_diameter", d)
        object.__setattr__(self, "hub_height", float(self.hub_height))

    @property
    def n_turbines(self) -> int:
        return int(self.x.size)

    @property
    def ids(self) -> list[int]:
        return list(range(1, self.n_turbines + 1))

    @property
    def rotor_radius(self) -> float:
        return 0.5 * self.rotor_diameter

    def rotated(self, delta: float, origin=(0.0, 0.0)) -> "FarmLayout":
        """Copy of the layout rotated counterclockwise by ``delta`` about ``origin``."""
        c, s = math.cos(delta), math.sin(delta)
        dx, dy = self.x - origin[0], self.y - origin[1]
        return FarmLayout(
            origin[0] + c * dx - s * dy,
            origin[1] + s * dx + c * dy,
            self.rotor_diameter,
            self.hub_height,
        )

    def to_dict(self) -> dict:
        return {
            "rotor_diameter": self.rotor_diameter,
            "hub_height": self.hub_height,
            "turbines": [
                {"id": i + 1, "x": float(xi), "y": float(yi)}
                for i, (xi, yi) in enumerate(zip(self.x, self.y))
            ],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "FarmLayout":
        try:
            turbines = sorted(data["turbines"], key=lambda t: int(t["id"]))
            ids = [int(t["id"]) for t in turbines]
            if ids != list(range(1, len(ids) + 1)):
                raise InputError(f"turbine ids must be consecutive from 1, got {ids}")
            return cls(
                [float(t["x"]) for t in turbines],
                [float(t["y"]) for t in turbines],
                float(data["rotor_diameter"]),
                float(data.get("hub_height", 0.0)),
            )
        except (KeyError, TypeError) as exc:
            raise InputError(f"malformed layout: missing or invalid field {exc}") from exc

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path) -> "FarmLayout":
        path = Path(path)
        if not path.is_file():
            raise InputError(f"layout file not found: {path}")
        try:
            data = json.loads(path.read_text())
        except json.JSONDecodeError as exc:
            raise InputError(f"layout file {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)


def grid_layout(n_rows=3, n_cols=3, spacing_diameters=5.0, rotor_diameter=100.0,
                hub_height=90.0) -> FarmLayout:
    """Regular rectangular farm; ids run along x first, then y."""
    sp = spacing_diameters * rotor_diameter
    xs, ys = np.meshgrid(np.arange(n_cols) * sp, np.arange(n_rows) * sp)
    return FarmLayout(xs.ravel(), ys.ravel(), rotor_diameter, hub_height)


@dataclass(frozen=True)
class WakeGeometryParams:
    """Linear (top-hat) wake cone: radius ``r0 + k*d`` for ``near < d <= max``."""

    expansion_coefficient: float = 0.075
    max_wake_length: float = 2000.0
    near_wake_offset: float = 0.0

    def __post_init__(self):
        if not self.expansion_coefficient > 0:
            raise InputError("expansion_coefficient must be > 0")
        if not self.max_wake_length > 0:
            raise InputError("max_wake_length must be > 0")
        if not self.near_wake_offset >= 0:
            raise InputError("near_wake_offset must be >= 0")

    def to_dict(self) -> dict:
        return {
            "expansion_coefficient": self.expansion_coefficient,
            "max_wake_length": self.max_wake_length,
            "near_wake_offset": self.near_wake_offset,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "WakeGeometryParams":
        return cls(**{k: float(v) for k, v in data.items()})


@dataclass(frozen=True)
class WakeGraph:
    """Directed wake adjacency for one wind direction.

    ``weights[i, s] == 1`` (0-based indices) means turbine ``s+1`` sits in
    the wake of turbine ``i+1``.
    """

    phi: float
    weights: np.ndarray = field(repr=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=np.int8)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise InputError("wake weights must be a square matrix")
        if not np.all((w == 0) | (w == 1)):
            raise InputError("wake weights must be binary")
        if np.any(np.diag(w)):
            raise InputError("wake weights must have a zero diagonal")
        w.flags.writeable = False
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "phi", float(self.phi))

    @property
    def n_turbines(self) -> int:
        return self.weights.shape[0]

    @property
    def edges(self) -> set[tuple[int, int]]:
        src, dst = np.nonzero(self.weights)
        return {(int(i) + 1, int(s) + 1) for i, s in zip(src, dst)}

    def upstream(self, s: int) -> list[int]:
        """Ids of turbines whose wake covers turbine ``s``."""
        return [int(i) + 1 for i in np.nonzero(self.weights[:, s - 1])[0]]

    def edge_list_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["from", "to"])
        writer.writerows(sorted(self.edges))
        return buf.getvalue()

    @classmethod
    def from_edges(cls, phi: float, n_turbines: int, edges) -> "WakeGraph":
        w = np.zeros((n_turbines, n_turbines), dtype=np.int8)
        for i, s in edges:
            if not (1 <= i <= n_turbines and 1 <= s <= n_turbines):
                raise InputError(f"edge ({i}, {s}) references an unknown turbine")
            w[i - 1, s - 1] = 1
        return cls(phi, w)


def build_wake_graph(layout: FarmLayout, phi: float, params: WakeGeometryParams) -> WakeGraph:
    """Wake adjacency of ``layout`` for wind blowing toward ``phi``.

    Turbine ``s`` is in the wake of ``i`` when, in the wind-aligned frame,
    ``near_wake_offset < d <= max_wake_length`` with ``d`` the downstream
    distance, and the crosswind offset is at most ``r0 + k*d``. Points on
    the cone edge count as inside.
    """
    phi = check_angle(phi)
    along, cross = along_cross(layout.x, layout.y, phi)
    d = along[None, :] - along[:, None]
    lateral = np.abs(cross[None, :] - cross[:, None])
    radius = layout.rotor_radius + params.expansion_coefficient * d
    inside = (d > params.near_wake_offset) & (d <= params.max_wake_length) & (lateral <= radius)
    np.fill_diagonal(inside, False)
    return WakeGraph(phi, inside.astype(np.int8))


def topological_order(graph: WakeGraph) -> list[int]:
    """Upstream-first ordering of turbine ids, ties broken by ascending id.

    Raises
    ------
    InvariantError
        If the graph contains a cycle.
    """
    w = graph.weights
    n = w.shape[0]
    indegree = w.sum(axis=0).astype(int).tolist()
    heap = [s for s in range(n) if indegree[s] == 0]
    heapq.heapify(heap)
    order = []
    while heap:
        i = heapq.heappop(heap)
        order.append(i + 1)
        for s in np.nonzero(w[i])[0]:
            indegree[s] -= 1
            if indegree[s] == 0:
                heapq.heappush(heap, int(s))
    if len(order) != n:
        raise InvariantError("wake graph contains a cycle; no topological order exists")
    return order
