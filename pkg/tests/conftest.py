import math

import numpy as np
import pytest

from gpsparx.geometry import FarmLayout, WakeGeometryParams, grid_layout


def random_layout(rng, n=None, diameter=100.0, extent=2500.0):
    """Rejection-sample a layout whose turbines are more than 1.2 D apart."""
    n = n if n is not None else int(rng.integers(1, 10))
    pts = []
    while len(pts) < n:
        p = rng.uniform(0.0, extent, size=2)
        if all(math.hypot(p[0] - q[0], p[1] - q[1]) > 1.2 * diameter for q in pts):
            pts.append(p)
    pts = np.array(pts)
    return FarmLayout(pts[:, 0], pts[:, 1], diameter)


@pytest.fixture
def grid():
    return grid_layout()


@pytest.fixture
def geom():
    return WakeGeometryParams()


@pytest.fixture(scope="session")
def zero_noise_pattern():
    """Zero-noise 3x3 farm data at phi = 0 and a GP-SPARX model trained on it."""
    from gpsparx import sparx
    from gpsparx.gp import FitOptions
    from gpsparx.simulator import FreeStreamProcess, SimulationConfig, simulate

    layout, params = grid_layout(), WakeGeometryParams()
    cfg = SimulationConfig(turbulence_noise_sd=0.0, n_steps=120, rng_seed=21,
                           free_stream=FreeStreamProcess(kind="constant", phi0=0.0))
    ds = simulate(layout, params, cfg)
    model = sparx.train_pattern(ds, layout, params, 0.0,
                                opts=FitOptions(seed=0, n_restarts=2, max_opt_points=200))
    return layout, params, ds, model


@pytest.fixture(scope="session")
def noisy_pattern():
    from gpsparx import sparx
    from gpsparx.gp import FitOptions
    from gpsparx.simulator import FreeStreamProcess, SimulationConfig, simulate

    layout, params = grid_layout(), WakeGeometryParams()
    cfg = SimulationConfig(turbulence_noise_sd=0.1, n_steps=80, rng_seed=22,
                           free_stream=FreeStreamProcess(kind="constant", phi0=math.pi / 2))
    ds = simulate(layout, params, cfg)
    model = sparx.train_pattern(ds, layout, params, math.pi / 2,
                                opts=FitOptions(seed=0, n_restarts=2, max_opt_points=200))
    return layout, params, ds, model


# acceptance criteria append (number, title, passed, detail) here
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num, title, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {num}. {title}: {detail}")
