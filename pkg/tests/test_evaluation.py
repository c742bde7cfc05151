import math
from collections import defaultdict

import numpy as np
import pytest

from gpsparx import evaluation
from gpsparx.errors import InputError, MetricError
from gpsparx.evaluation import ErrorRecords, bin_polar, evaluate_sweep, nmse, nmse_value, summarize
from gpsparx.simulator import FreeStreamProcess, SimulationConfig, simulate
from gpsparx.switching import build_sectors

TWO_PI = 2 * math.pi
FOUR = [0.0, math.pi / 2, math.pi, 3 * math.pi / 2]


def perfect(u_inf, phi, measured):
    return measured.copy(), np.zeros_like(measured), np.zeros(len(u_inf), dtype=int)


def zero(u_inf, phi, measured):
    return np.zeros_like(measured), np.ones_like(measured), np.zeros(len(u_inf), dtype=int)


@pytest.fixture
def sweep(grid, geom):
    return simulate(grid, geom, SimulationConfig(n_steps=144, free_stream=FreeStreamProcess(kind="sweep")))


def make_records(phi, sq_err, s=None):
    n = len(phi)
    s = np.ones(n, dtype=np.int64) if s is None else np.asarray(s)
    err = np.sqrt(sq_err)
    return ErrorRecords(np.arange(n), np.asarray(phi, dtype=float), s, err, np.zeros(n), np.zeros(n),
                        np.asarray(sq_err, dtype=float), np.zeros(n, dtype=np.int64))


class TestEvaluateSweep:
    def test_perfect_predictor(self, sweep):
        rec = evaluate_sweep(None, build_sectors([0.0]), sweep, predictor=perfect)
        assert np.all(rec.sq_err == 0)

    def test_zero_predictor(self, sweep):
        rec = evaluate_sweep(None, build_sectors([0.0]), sweep, predictor=zero)
        for r in rec:
            assert r.sq_err == r.measured * r.measured

    def test_record_count_and_order(self, sweep):
        rec = evaluate_sweep(None, build_sectors([0.0]), sweep, predictor=perfect)
        assert len(rec) == 9 * 144
        keys = list(zip(rec.t.tolist(), rec.s.tolist()))
        assert keys == sorted(keys)
        assert rec[10].t == 1 and rec[10].s == 2

    def test_empty_dataset(self, sweep):
        with pytest.raises(InputError):
            evaluate_sweep(None, build_sectors([0.0]), sweep.subset(slice(0, 0)), predictor=perfect)

    def test_with_models(self, sweep, noisy_pattern):
        model = noisy_pattern[3]
        rec = evaluate_sweep([model], build_sectors([model.pattern_phi]), sweep, "osa")
        assert len(rec) == 9 * 144
        assert np.all(rec.pred_var > 0)
        np.testing.assert_array_equal(rec.sq_err, (rec.pred_mean - rec.measured) ** 2)

    def test_csv_round_trip(self, sweep):
        rec = evaluate_sweep(None, build_sectors([0.0]), sweep, predictor=zero)
        text = rec.to_csv()
        assert text.splitlines()[0] == "t,phi,s,pred_mean,pred_var,measured,sq_err,model_index"
        back = ErrorRecords.from_csv(text)
        np.testing.assert_array_equal(back.sq_err, rec.sq_err)
        np.testing.assert_array_equal(back.phi, rec.phi)


class TestBinPolar:
    def test_single_bin(self):
        pm = bin_polar(make_records(np.zeros(10), np.arange(10.0)), 8)
        assert pm.count.tolist() == [10] + [0] * 7
        assert pm.mse[0] == pytest.approx(4.5)
        assert np.all(np.isnan(pm.mse[1:]))
        assert pm.empty.sum() == 7

    def test_uniform_sweep_counts(self):
        for n in (100, 101, 359, 1440):
            phi = np.arange(n) * TWO_PI / n
            pm = bin_polar(make_records(phi, np.ones(n)), 4)
            assert pm.count.max() - pm.count.min() <= 1
            assert pm.count.sum() == n

    def test_edges_partition_circle(self):
        pm = bin_polar(make_records([0.1], [1.0]), 360)
        assert pm.edges[0] == 0.0 and pm.edges[-1] == TWO_PI
        assert np.all(np.diff(pm.edges) > 0)
        assert pm.n_bins == 360

    def test_independent_regrouping(self):
        rng = np.random.default_rng(0)
        n = 5000
        phi = rng.uniform(0, TWO_PI, n)
        sq = rng.exponential(size=n)
        s = rng.integers(1, 4, n)
        pm = bin_polar(make_records(phi, sq, s), 36)
        groups = defaultdict(list)
        tgroups = defaultdict(list)
        for p, e, tid in zip(phi, sq, s):
            b = int(p // (TWO_PI / 36))
            groups[b].append(e)
            tgroups[(b, tid)].append(e)
        for b in range(36):
            if b in groups:
                assert pm.mse[b] == pytest.approx(sum(groups[b]) / len(groups[b]), abs=1e-12)
                assert pm.count[b] == len(groups[b])
            else:
                assert pm.count[b] == 0
        for (b, tid), vals in tgroups.items():
            j = list(pm.turbine_ids).index(tid)
            assert pm.turbine_mse[b, j] == pytest.approx(sum(vals) / len(vals), abs=1e-12)

    def test_too_few_bins(self):
        with pytest.raises(InputError):
            bin_polar(make_records([0.0], [1.0]), 3)

    def test_csv_marks_empty_bins(self):
        text = bin_polar(make_records([0.0], [2.0]), 4).to_csv()
        lines = text.strip().splitlines()
        assert lines[0] == "bin_lower_rad,bin_upper_rad,count,mse"
        assert lines[1].endswith(",1,2")
        assert lines[2].endswith(",0,")
        assert len(lines) == 5


class TestNmse:
    def test_perfect(self):
        y = np.array([1.0, 2.0, 4.0])
        assert nmse_value(y, y) == 0.0

    def test_mean_predictor(self):
        y = np.array([1.0, 2.0, 4.0, 7.0])
        assert nmse_value(y, np.full(4, y.mean())) == pytest.approx(100.0)

    def test_direct_formula(self):
        rng = np.random.default_rng(1)
        y, yh = rng.normal(size=7), rng.normal(size=7)
        mean = sum(y) / 7
        var = sum((v - mean) ** 2 for v in y) / 7
        direct = 100.0 / (7 * var) * sum((a - b) ** 2 for a, b in zip(y, yh))
        assert nmse_value(y, yh) == pytest.approx(direct, rel=1e-12)

    def test_zero_variance(self):
        with pytest.raises(MetricError):
            nmse_value(np.ones(3), np.zeros(3))

    def test_per_turbine(self, sweep):
        rec = evaluate_sweep(None, build_sectors([0.0]), sweep, predictor=zero)
        total, per = nmse(rec)
        assert set(per) == set(range(1, 10))
        for s, v in per.items():
            y = np.asarray(sweep.u)[:, s - 1]
            assert v == pytest.approx(100 * np.sum(y ** 2) / (y.size * y.var()), rel=1e-12)


class TestSummary:
    def test_band_comparison(self):
        table = build_sectors(FOUR)
        phi = np.arange(1440) * TWO_PI / 1440
        # error grows with distance to the nearest training angle
        d = np.min(np.abs((phi[:, None] - np.array(FOUR)[None, :] + math.pi) % TWO_PI - math.pi), axis=1)
        rec = make_records(phi, d ** 2)
        bc = evaluation.band_mse(rec, table)
        assert bc["training_band_mse"] < bc["boundary_band_mse"]
        # 81 grid points per band, give or take the ones sitting exactly on +/-10 deg
        for key in ("training_band_count", "boundary_band_count"):
            assert abs(bc[key] - 4 * 81) <= 8
        assert bc["ratio"] == pytest.approx(bc["boundary_band_mse"] / bc["training_band_mse"])

    def test_single_sector_has_no_boundary_band(self):
        rec = make_records([0.0, 1.0], [1.0, 2.0])
        bc = evaluation.band_mse(rec, build_sectors([0.0]))
        assert bc["boundary_band_mse"] is None and bc["ratio"] is None

    def test_summary_fields(self, sweep):
        table = build_sectors(FOUR)
        rec = evaluate_sweep(None, table, sweep, predictor=perfect)
        summary = summarize(rec, table, "osa")
        assert summary["nmse"] == 0.0
        assert len(summary["sectors"]) == 4
        assert summary["n_records"] == len(rec)
