"""
Simulated farm data
===================

The simulator superimposes Jensen top-hat wakes on a free-stream process
and adds turbulence noise. This script generates a slow direction sweep
and shows how the downstream turbines lose speed whenever they are waked.
"""

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gpsparx import FreeStreamProcess, SimulationConfig, WakeGeometryParams, grid_layout, simulate
from gpsparx.simulator import jensen_deficit

FIG_DIR = Path(__file__).with_name("figures")
FIG_DIR.mkdir(exist_ok=True)

layout, geom = grid_layout(), WakeGeometryParams()

###############################################################################
# Single-wake deficit against downstream distance for a few thrust coefficients.

d = np.linspace(100, 2000, 200)
fig, ax = plt.subplots(figsize=(6, 3.5))
for ct in (0.4, 0.6, 0.8):
    ax.plot(d / layout.rotor_diameter, jensen_deficit(d, ct, geom.expansion_coefficient, layout.rotor_radius),
            label=f"Ct = {ct}")
ax.set_xlabel("downstream distance [D]")
ax.set_ylabel("fractional deficit")
ax.legend()
fig.tight_layout()
fig.savefig(FIG_DIR / "jensen_deficit.png", dpi=120)

###############################################################################
# One full sweep of the wind direction over 1440 steps.

cfg = SimulationConfig(n_steps=1440, rng_seed=1, free_stream=FreeStreamProcess(kind="sweep", cycles=1.0))
ds = simulate(layout, geom, cfg)
ratio = ds.u / ds.u_inf[:, None]
print(f"free-stream speed: mean {ds.u_inf.mean():.2f} m/s, sd {ds.u_inf.std():.2f} m/s")
print(f"turbine / free-stream speed ratio ranges from {ratio.min():.3f} to {ratio.max():.3f}")

fig, ax = plt.subplots(figsize=(8, 4))
for s in (0, 4, 8):
    ax.plot(np.degrees(ds.phi), ratio[:, s], lw=0.7, label=f"turbine {s + 1}")
ax.set_xlabel("wind direction [deg]")
ax.set_ylabel("u / u_inf")
ax.legend()
fig.tight_layout()
fig.savefig(FIG_DIR / "sweep_ratio.png", dpi=120)

###############################################################################
# The dataset writes to CSV with a JSON sidecar that records the layout.

out = Path(__file__).with_name("output")
out.mkdir(exist_ok=True)
ds.save(out / "sweep.csv", {"simulation": cfg.to_dict()})
print(f"wrote {out / 'sweep.csv'}")
