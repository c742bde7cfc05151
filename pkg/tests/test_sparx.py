import json
import math

import numpy as np
import pytest

from gpsparx import sparx
from gpsparx.errors import FitError, InputError
from gpsparx.geometry import FarmLayout, WakeGraph, build_wake_graph, grid_layout
from gpsparx.gp import FitOptions
from gpsparx.simulator import FarmDataset, FreeStreamProcess, SimulationConfig, WindSample, simulate


def rmse(a, b):
    return float(np.sqrt(np.mean((np.asarray(a) - np.asarray(b)) ** 2)))


class TestBuildDesign:
    def test_two_turbine_example(self):
        layout = FarmLayout([0.0, 500.0], [0.0, 0.0], 100.0)
        ds = FarmDataset(layout, [0], [0.0], [10.0], [[10.0, 6.0]])
        X, y = sparx.build_design(ds, WakeGraph.from_edges(0.0, 2, [(1, 2)]))
        np.testing.assert_array_equal(X, [[10, 0, 0], [10, 10, 0]])
        np.testing.assert_array_equal(y, [10, 6])

    def test_empty_graph(self, grid):
        rng = np.random.default_rng(0)
        u = rng.uniform(5, 10, (4, 9))
        ds = FarmDataset(grid, range(4), np.zeros(4), u.max(axis=1), u)
        X, y = sparx.build_design(ds, WakeGraph(0.0, np.zeros((9, 9))))
        assert np.all(X[:, 1:] == 0)
        np.testing.assert_array_equal(y, u.ravel())

    def test_row_count(self, grid, geom):
        ds = simulate(grid, geom, SimulationConfig(n_steps=500))
        X, y = sparx.build_design(ds, build_wake_graph(grid, 0.0, geom))
        assert X.shape == (4500, 10) and y.shape == (4500,)

    def test_mask_rule(self, grid, geom):
        ds = simulate(grid, geom, SimulationConfig(n_steps=5))
        g = build_wake_graph(grid, 0.0, geom)
        X, _ = sparx.build_design(ds, g)
        rows = X.reshape(5, 9, 10)
        for s in range(9):
            for i in range(9):
                if g.weights[i, s]:
                    np.testing.assert_array_equal(rows[:, s, 1 + i], ds.u[:, i])
                else:
                    assert np.all(rows[:, s, 1 + i] == 0)

    def test_turbine_count_mismatch(self, grid):
        ds = FarmDataset(grid, [0], [0.0], [10.0], np.ones((1, 9)))
        with pytest.raises(InputError):
            sparx.build_design(ds, WakeGraph(0.0, np.zeros((2, 2))))


class TestTrainPattern:
    def test_in_sample_accuracy_zero_noise(self, zero_noise_pattern):
        _, _, ds, model = zero_noise_pattern
        mean, _ = sparx.predict_osa_batch(model, ds.u_inf, ds.u)
        assert rmse(mean, ds.u) < 0.01 * ds.u.mean()

    def test_model_binding(self, zero_noise_pattern):
        _, _, _, model = zero_noise_pattern
        assert model.gp.n_dims == 10
        assert model.wake_graph.phi == model.pattern_phi == 0.0

    def test_single_step_rejected(self, grid, geom):
        ds = simulate(grid, geom, SimulationConfig(n_steps=1))
        with pytest.raises(FitError):
            sparx.train_pattern(ds, grid, geom, 0.0)

    def test_deterministic(self, grid, geom):
        ds = simulate(grid, geom, SimulationConfig(n_steps=20, rng_seed=3))
        opts = FitOptions(seed=5, n_restarts=2, max_iter=40)
        a = sparx.train_pattern(ds, grid, geom, 0.0, opts=opts)
        b = sparx.train_pattern(ds, grid, geom, 0.0, opts=opts)
        assert json.dumps(a.to_dict()) == json.dumps(b.to_dict())

    def test_json_round_trip(self, noisy_pattern, tmp_path):
        _, _, ds, model = noisy_pattern
        path = tmp_path / "m.json"
        model.save(path)
        back = sparx.GpSparxModel.load(path)
        assert back.wake_graph.edges == model.wake_graph.edges
        assert back.pattern_phi == model.pattern_phi
        a = sparx.predict_osa_batch(model, ds.u_inf, ds.u)
        b = sparx.predict_osa_batch(back, ds.u_inf, ds.u)
        np.testing.assert_array_equal(a[0], b[0])
        np.testing.assert_array_equal(a[1], b[1])


class TestPredictOsa:
    def test_first_row_ignores_other_turbines(self, noisy_pattern):
        _, _, ds, model = noisy_pattern
        sample = WindSample(0, float(ds.u_inf[0]), float(ds.phi[0]))
        first_row = np.nonzero(model.wake_graph.weights.sum(axis=0) == 0)[0]
        base, _ = sparx.predict_osa(model, sample, ds.u[0])
        other = np.array(ds.u[0]) * 0.5 + 3.0
        moved, _ = sparx.predict_osa(model, sample, other)
        np.testing.assert_array_equal(base[first_row], moved[first_row])

    def test_reproduces_training_sample(self, zero_noise_pattern):
        _, _, ds, model = zero_noise_pattern
        for k in (0, 37, 119):
            sample = WindSample(int(ds.t[k]), float(ds.u_inf[k]), float(ds.phi[k]))
            mean, _ = sparx.predict_osa(model, sample, ds.u[k])
            assert np.max(np.abs(mean - ds.u[k])) < 1e-2

    def test_variance_positive(self, noisy_pattern):
        _, _, ds, model = noisy_pattern
        _, var = sparx.predict_osa_batch(model, ds.u_inf, ds.u)
        assert np.all(var > 0)

    def test_masking_soundness(self, noisy_pattern):
        _, _, ds, model = noisy_pattern
        rng = np.random.default_rng(9)
        w = model.wake_graph.weights
        base, base_var = sparx.predict_osa_batch(model, ds.u_inf[:10], ds.u[:10])
        for _ in range(20):
            j = int(rng.integers(9))
            pert = np.array(ds.u[:10])
            pert[:, j] += rng.normal(scale=2.0, size=10)
            mean, var = sparx.predict_osa_batch(model, ds.u_inf[:10], pert)
            unaffected = [s for s in range(9) if w[j, s] == 0 and s != j]
            np.testing.assert_array_equal(mean[:, unaffected], base[:, unaffected])
            np.testing.assert_array_equal(var[:, unaffected], base_var[:, unaffected])

    def test_shape_mismatch(self, noisy_pattern):
        _, _, _, model = noisy_pattern
        with pytest.raises(InputError):
            sparx.predict_osa(model, WindSample(0, 10.0, 0.0), np.ones(4))


class TestPredictCascade:
    def test_no_edges_equals_osa(self, grid, geom):
        # wind toward +x with turbines offset sideways: no wakes at all
        layout = FarmLayout([0.0, 0.0, 0.0], [0.0, 500.0, 1000.0], 100.0)
        ds = simulate(layout, geom, SimulationConfig(n_steps=30))
        model = sparx.train_pattern(ds, layout, geom, 0.0, opts=FitOptions(n_restarts=1, max_iter=30))
        assert model.wake_graph.edges == set()
        for k in range(5):
            sample = WindSample(k, float(ds.u_inf[k]), 0.0)
            m1, v1 = sparx.predict_osa(model, sample, ds.u[k])
            m2, v2 = sparx.predict_cascade(model, sample)
            np.testing.assert_array_equal(m1, m2)
            np.testing.assert_array_equal(v1, v2)

    def test_chain_uses_predicted_upstream(self, geom):
        layout = FarmLayout([0.0, 500.0], [0.0, 0.0], 100.0)
        ds = simulate(layout, geom, SimulationConfig(n_steps=30, rng_seed=4))
        model = sparx.train_pattern(ds, layout, geom, 0.0, opts=FitOptions(n_restarts=1, max_iter=30))
        sample = WindSample(0, 9.0, 0.0)
        mean, _ = sparx.predict_cascade(model, sample)
        # feeding turbine 1's predicted mean as a "measurement" must give the same turbine-2 value
        osa, _ = sparx.predict_osa(model, sample, [mean[0], 123.0])
        assert osa[1] == mean[1]
        other, _ = sparx.predict_osa(model, sample, [mean[0] + 1.0, 123.0])
        assert other[1] != mean[1]

    def test_zero_noise_accuracy(self, zero_noise_pattern):
        layout, geom, _, model = zero_noise_pattern
        test = simulate(layout, geom, SimulationConfig(turbulence_noise_sd=0.0, n_steps=100, rng_seed=77,
                                                       free_stream=FreeStreamProcess(phi0=0.0)))
        mean, var = sparx.predict_cascade_batch(model, test.u_inf)
        assert rmse(mean, test.u) < 0.05 * test.u.mean()
        assert np.all(var > 0)

    def test_cascade_consistent_with_osa(self, zero_noise_pattern):
        layout, geom, _, model = zero_noise_pattern
        test = simulate(layout, geom, SimulationConfig(turbulence_noise_sd=0.0, n_steps=100, rng_seed=78,
                                                       free_stream=FreeStreamProcess(phi0=0.0)))
        osa, _ = sparx.predict_osa_batch(model, test.u_inf, test.u)
        cas, _ = sparx.predict_cascade_batch(model, test.u_inf)
        assert rmse(cas, osa) <= 10 * rmse(osa, test.u)

    def test_deterministic(self, noisy_pattern):
        _, _, ds, model = noisy_pattern
        a = sparx.predict_cascade_batch(model, ds.u_inf)
        b = sparx.predict_cascade_batch(model, ds.u_inf)
        np.testing.assert_array_equal(a[0], b[0])
