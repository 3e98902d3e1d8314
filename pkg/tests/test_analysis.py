"""Error series, Pareto ranking, and the a-priori error bound."""

import itertools

import numpy as np
import pytest

from nirom.analysis import (
    ParetoPoint,
    bound_value,
    error_series,
    evaluate_bound,
    pareto_csv,
    pareto_frontier,
    relative_series,
    runtime_ratios,
    sample_lipschitz,
    time_average,
)
from nirom.integration import IntegratorSpec, TrajectoryResult, integrate
from nirom.io import read_csv, read_keyvalues
from nirom.reduction import GalerkinROM, ReducedBasis, galerkin_solve
from nirom.core import TimeGrid

from conftest import DiagonalDecay


def traj(times, states, scheme="rk4"):
    return TrajectoryResult(np.asarray(times, float), np.asarray(states, float),
                            wall_time=0.0, scheme=scheme)


class TestRelativeSeries:
    def test_columnwise_hand_values(self):
        ref = np.array([[3.0, 0.0], [4.0, 2.0]])
        test = np.array([[3.0, 0.0], [9.0, 3.0]])
        out = relative_series(test, ref)
        assert out[0] == pytest.approx(1.0, abs=1e-15)  # ||(0,5)|| / ||(3,4)||
        assert out[1] == pytest.approx(0.5, abs=1e-15)  # ||(0,1)|| / ||(0,2)||

    def test_zero_reference_column_is_nan(self):
        ref = np.array([[0.0, 1.0], [0.0, 0.0]])
        test = np.ones((2, 2))
        out = relative_series(test, ref)
        assert np.isnan(out[0]) and np.isfinite(out[1])


class TestTimeAverage:
    def test_trapezoid_hand_value(self):
        times = np.array([0.0, 1.0, 3.0])
        series = np.array([0.0, 2.0, 2.0])
        # integral = 1 + 4 = 5 over span 3
        assert time_average(times, series) == pytest.approx(5.0 / 3.0, abs=1e-15)

    def test_nan_entries_shrink_the_averaged_span(self):
        times = np.array([0.0, 1.0, 2.0, 3.0])
        series = np.array([np.nan, 2.0, 2.0, np.nan])
        assert time_average(times, series) == pytest.approx(2.0, abs=1e-15)

    def test_degenerate_spans_are_nan(self):
        assert np.isnan(time_average(np.array([0.0, 1.0]), np.array([1.0, np.nan])))
        assert np.isnan(time_average(np.array([1.0, 1.0]), np.array([1.0, 2.0])))


class TestErrorSeries:
    def test_hand_built_series(self):
        basis = ReducedBasis(np.array([[1.0], [0.0]]), np.zeros(2), np.ones(1))
        times = [0.0, 0.5, 1.0]
        surrogate = traj(times, [[1.0, 2.0, 3.0]])
        fom = traj(times, [[1.0, 2.0, 2.0], [0.0, 0.0, 1.0]])
        galerkin = traj(times, [[1.0, 1.0, 3.0]])
        series = error_series(surrogate, fom, galerkin, basis)
        assert np.allclose(series.e_fom, [0.0, 0.0, np.sqrt(2.0 / 5.0)], atol=1e-15)
        assert np.allclose(series.e_rom, [0.0, 1.0, 0.0], atol=1e-15)
        assert series.avg_e_rom == pytest.approx(
            time_average(np.asarray(times), series.e_rom), abs=1e-15
        )

    def test_mismatched_grids_are_rejected(self):
        basis = ReducedBasis(np.array([[1.0], [0.0]]), np.zeros(2), np.ones(1))
        a = traj([0.0, 1.0], [[1.0, 1.0]])
        b = traj([0.0, 2.0], [[1.0, 1.0], [0.0, 0.0]])
        with pytest.raises(ValueError, match="time grid"):
            error_series(a, b, a, basis)

    def test_csv_schema(self, tmp_path):
        basis = ReducedBasis(np.array([[1.0], [0.0]]), np.zeros(2), np.ones(1))
        times = [0.0, 1.0]
        series = error_series(
            traj(times, [[1.0, 1.0]]),
            traj(times, [[1.0, 1.0], [0.0, 0.0]]),
            traj(times, [[1.0, 1.0]]),
            basis,
        )
        path = tmp_path / "err.csv"
        series.to_csv(path)
        header, rows = read_csv(path)
        assert header == ["t", "e_fom", "e_rom"]
        assert len(rows) == 2


class TestPareto:
    @staticmethod
    def brute_force(points):
        keep = []
        for p in points:
            dominated = any(
                (q.time <= p.time and q.error <= p.error)
                and (q.time < p.time or q.error < p.error)
                for q in points
            )
            if not dominated:
                keep.append(p)
        return keep

    def test_matches_brute_force_on_random_clouds(self):
        rng = np.random.default_rng(0)
        for trial in range(20):
            m = int(rng.integers(1, 50))
            points = [
                ParetoPoint(f"p{i}", float(t), float(e))
                for i, (t, e) in enumerate(rng.uniform(0.0, 1.0, size=(m, 2)))
            ]
            fast = pareto_frontier(points)
            slow = sorted(self.brute_force(points), key=lambda p: (p.time, p.error))
            assert fast == slow

    def test_large_cloud_against_brute_force(self):
        rng = np.random.default_rng(1)
        points = [
            ParetoPoint(f"p{i}", float(t), float(e))
            for i, (t, e) in enumerate(rng.uniform(0.0, 1.0, size=(1000, 2)))
        ]
        fast = pareto_frontier(points)
        slow = sorted(self.brute_force(points), key=lambda p: (p.time, p.error))
        assert fast == slow
        errors = [p.error for p in fast]
        assert all(b < a for a, b in itertools.pairwise(errors))

    def test_duplicates_keep_the_first_label_in_sort_order(self):
        pts = [ParetoPoint("b", 1.0, 1.0), ParetoPoint("a", 1.0, 1.0)]
        assert pareto_frontier(pts) == [ParetoPoint("a", 1.0, 1.0)]

    def test_empty_input_rejected(self):
        with pytest.raises(ValueError, match="point"):
            pareto_frontier([])

    def test_csv_flags_frontier_membership(self, tmp_path):
        points = [
            ParetoPoint("cheap", 0.1, 0.9),
            ParetoPoint("slowbad", 0.9, 0.95),
            ParetoPoint("good", 0.5, 0.1),
        ]
        frontier = pareto_frontier(points)
        path = tmp_path / "pareto.csv"
        pareto_csv(path, points, frontier)
        header, rows = read_csv(path)
        assert header == ["label", "relative_time", "relative_error", "frontier"]
        flags = {r[0]: r[3] for r in rows}
        assert flags == {"cheap": "1", "slowbad": "0", "good": "1"}

    def test_runtime_ratios(self):
        tau_fom, tau_rom = runtime_ratios(2.0, 8.0, 4.0)
        assert tau_fom == 0.25 and tau_rom == 0.5


class TestLipschitzSampling:
    def test_linear_system_quotient_is_bracketed_by_the_spectrum(self):
        sys = DiagonalDecay(rates=(1.0, 2.0))
        mu = np.array([1.3])
        pool = np.random.default_rng(0).uniform(-1.0, 1.0, size=(2, 40))
        K = sample_lipschitz(sys, mu, pool, n_pairs=1000, seed=0)
        # the true Lipschitz constant is mu * max(rate) = 2.6; sampled
        # difference quotients can only approach it from below
        assert K <= 2.6 + 1e-12
        assert K >= 2.59


class TestBoundValue:
    def test_zero_growth_limit(self):
        assert bound_value(0.0, 2.0, 0.5, 0.25, 0.1) == pytest.approx(0.95, abs=1e-15)

    def test_small_k_approaches_the_limit_continuously(self):
        # (exp(KT) - 1)/K cancels catastrophically near zero, which is why
        # K == 0 gets the analytic branch; nearby values are close, not exact
        lim = bound_value(0.0, 2.0, 0.5, 0.25, 0.1)
        near = bound_value(1e-10, 2.0, 0.5, 0.25, 0.1)
        assert near == pytest.approx(lim, abs=1e-6)

    def test_hand_value_at_unit_growth(self):
        e = np.exp(1.5)
        expect = e * (0.2 + 0.1) + 2.0 * (e - 1.0)
        assert bound_value(1.0, 1.5, 0.2, 0.1, 2.0) == pytest.approx(expect, rel=1e-14)


class TestEvaluateBound:
    def setup_method(self):
        self.sys = DiagonalDecay(rates=(1.0, 2.0))
        self.mu = np.array([1.0])
        self.grid = TimeGrid(0.0, 1.0, 100)
        self.fom = integrate(self.sys, self.grid, self.mu, IntegratorSpec("rk4"))

    def test_bound_holds_for_the_projected_model(self):
        basis = ReducedBasis(np.array([[1.0], [0.0]]), np.zeros(2), np.ones(1))
        rom = GalerkinROM(self.sys, basis)
        surrogate = galerkin_solve(rom, self.grid, self.mu, IntegratorSpec("rk4"))
        report = evaluate_bound(self.sys, self.mu, self.fom, surrogate, basis, None)
        assert report.regression_sup == 0.0
        # dropping the second coordinate leaves its full value as defect
        assert report.e_o_inf == pytest.approx(1.0, abs=1e-12)
        assert report.e_i0 == pytest.approx(0.0, abs=1e-12)
        assert report.holds
        assert report.measured <= report.bound

    def test_regression_constant_is_the_worst_validation_row(self):
        basis = ReducedBasis(np.eye(2), np.zeros(2), np.ones(2))
        rom = GalerkinROM(self.sys, basis)
        surrogate = galerkin_solve(rom, self.grid, self.mu, IntegratorSpec("rk4"))

        class Offset:
            def predict_many(self, Z):
                return np.zeros((Z.shape[0], 2))

        inputs = np.zeros((3, 4))
        targets = np.array([[0.0, 0.0], [0.3, 0.4], [0.1, 0.0]])
        report = evaluate_bound(
            self.sys, self.mu, self.fom, surrogate, basis, Offset(),
            validation_inputs=inputs, validation_targets=targets,
        )
        assert report.regression_sup == pytest.approx(0.5, abs=1e-15)
        assert report.holds

    def test_mismatched_grids_are_rejected(self):
        basis = ReducedBasis(np.eye(2), np.zeros(2), np.ones(2))
        other = integrate(self.sys, TimeGrid(0.0, 1.0, 50), self.mu,
                          IntegratorSpec("rk4"))
        with pytest.raises(ValueError, match="time grid"):
            evaluate_bound(self.sys, self.mu, self.fom, other, basis, None)

    def test_report_keyvalues_schema(self, tmp_path):
        basis = ReducedBasis(np.eye(2), np.zeros(2), np.ones(2))
        rom = GalerkinROM(self.sys, basis)
        surrogate = galerkin_solve(rom, self.grid, self.mu, IntegratorSpec("rk4"))
        report = evaluate_bound(self.sys, self.mu, self.fom, surrogate, basis, None)
        path = tmp_path / "bound.txt"
        report.to_keyvalues(path)
        back = read_keyvalues(path)
        assert set(back) == {
            "lipschitz_K", "regression_sup_C", "orthogonal_error_sup",
            "initial_reduced_error", "bound", "measured_sup_error", "holds",
        }
        assert back["holds"] == "1"
