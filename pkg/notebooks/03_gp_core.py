"""
Exact GP regression in one dimension
====================================

The GP core fits ARD squared-exponential hyperparameters by maximising the
log marginal likelihood from several starting points. Here we fit a noisy
sine, check the analytic gradient against finite differences and plot the
posterior.
"""

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from gpsparx import FitOptions, GpHyperparams, fit, predict
from gpsparx.gp import log_marginal_likelihood

FIG_DIR = Path(__file__).with_name("figures")
FIG_DIR.mkdir(exist_ok=True)

rng = np.random.default_rng(0)
X = np.sort(rng.uniform(0, 10, 40))[:, None]
y = 2.0 * np.sin(X[:, 0]) + rng.normal(scale=0.3, size=40)

###############################################################################
# Gradient check at the default starting point.

hp = GpHyperparams.default(1)
value, grad = log_marginal_likelihood(X, y, hp)
theta, h = hp.to_log(), 1e-5
fd = []
for j in range(theta.size):
    e = np.zeros_like(theta)
    e[j] = h
    up = log_marginal_likelihood(X, y, GpHyperparams.from_log(theta + e), gradient=False)[0]
    dn = log_marginal_likelihood(X, y, GpHyperparams.from_log(theta - e), gradient=False)[0]
    fd.append((up - dn) / (2 * h))
print(f"log marginal likelihood {value:.4f}")
print("analytic gradient ", np.round(grad, 6))
print("finite differences", np.round(fd, 6))

###############################################################################
# Fit with five starting points. Hyperparameters are stored in standardised
# units; ``original_units`` converts them back.

gp = fit(X, y, opts=FitOptions(seed=0))
print(f"best restart {gp.best_restart}, iterations per restart {gp.n_iter}")
print("fitted (original units):", gp.original_units())

Xs = np.linspace(-2, 12, 400)[:, None]
mean, var = predict(gp, Xs)
sd = np.sqrt(var)
fig, ax = plt.subplots(figsize=(7, 3.5))
ax.fill_between(Xs[:, 0], mean - 2 * sd, mean + 2 * sd, alpha=0.3, label="latent +/- 2 sd")
ax.plot(Xs[:, 0], mean, label="posterior mean")
ax.plot(X[:, 0], y, "k.", label="data")
ax.plot(Xs[:, 0], 2.0 * np.sin(Xs[:, 0]), "k--", lw=0.8, label="truth")
ax.legend(fontsize=8)
fig.tight_layout()
fig.savefig(FIG_DIR / "gp_posterior.png", dpi=120)
