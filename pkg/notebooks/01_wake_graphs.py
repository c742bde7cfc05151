"""
Wake graphs of a 3 x 3 farm
===========================

Which turbines sit in which wakes depends on the wind direction. Here we
build the wake graph of a square farm for a few directions, print the edge
lists and draw them.
"""

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gpsparx import WakeGeometryParams, build_wake_graph, grid_layout, topological_order

FIG_DIR = Path(__file__).with_name("figures")
FIG_DIR.mkdir(exist_ok=True)

layout = grid_layout()
geom = WakeGeometryParams()
print(f"{layout.n_turbines} turbines, rotor diameter {layout.rotor_diameter} m")
print(f"wake cone: k = {geom.expansion_coefficient}, max length {geom.max_wake_length} m")

###############################################################################
# Edge lists for the four axis directions and one diagonal. Wind blowing
# toward +x (phi = 0) wakes each row from left to right.

directions = [0.0, math.pi / 4, math.pi / 2, math.pi, 3 * math.pi / 2]
graphs = {phi: build_wake_graph(layout, phi, geom) for phi in directions}
for phi, g in graphs.items():
    print(f"phi = {math.degrees(phi):5.1f} deg: {len(g.edges):2d} edges, "
          f"upstream-first order {topological_order(g)}")

###############################################################################
# Draw the graphs. Arrows point from the waking turbine to the waked one.

fig, axes = plt.subplots(1, len(directions), figsize=(3.2 * len(directions), 3.4))
for ax, (phi, g) in zip(axes, graphs.items()):
    ax.scatter(layout.x, layout.y, s=60, color="k", zorder=3)
    for tid, x, y in zip(layout.ids, layout.x, layout.y):
        ax.annotate(str(tid), (x, y), xytext=(5, 5), textcoords="offset points", fontsize=8)
    for i, s in sorted(g.edges):
        ax.annotate("", xy=(layout.x[s - 1], layout.y[s - 1]), xytext=(layout.x[i - 1], layout.y[i - 1]),
                    arrowprops=dict(arrowstyle="->", color="tab:blue", lw=1.0, shrinkA=6, shrinkB=6))
    cx, cy = np.mean(layout.x), np.mean(layout.y)
    ax.arrow(cx, cy, 300 * math.cos(phi), 300 * math.sin(phi), color="tab:red", width=15, alpha=0.4)
    ax.set_title(f"phi = {math.degrees(phi):.0f} deg")
    ax.set_aspect("equal")
    ax.set_xticks([])
    ax.set_yticks([])
fig.tight_layout()
fig.savefig(FIG_DIR / "wake_graphs.png", dpi=120)

###############################################################################
# Number of wake edges as the wind turns through a full circle. Edges appear
# in bursts around the directions aligned with rows and diagonals.

phis = np.linspace(0, 2 * math.pi, 721)[:-1]
counts = [len(build_wake_graph(layout, p, geom).edges) for p in phis]
fig, ax = plt.subplots(figsize=(7, 3))
ax.plot(np.degrees(phis), counts, drawstyle="steps-post")
ax.set_xlabel("wind direction [deg]")
ax.set_ylabel("wake edges")
fig.tight_layout()
fig.savefig(FIG_DIR / "edge_count.png", dpi=120)
