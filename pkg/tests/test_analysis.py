"""Equilibria, quadratic forms, detection, and the experiment drivers."""

import numpy as np
import pytest

from kuradyn import analysis, dynamics, graphs, integrate
from kuradyn.analysis import Theta0Sampler
from kuradyn.dynamics import ModelParams
from kuradyn.graphs import EnumerationBudgetError
from kuradyn.jumps import RngSeed


@pytest.fixture
def p3_loops():
    return graphs.path_graph(3, self_loops=True)


@pytest.fixture
def weighted_triangle():
    w = np.ones((3, 3))
    np.fill_diagonal(w, 0.5)
    return graphs.SkeletonGraph(w)


class TestCandidates:
    def test_counts(self):
        assert analysis.enumerate_candidate_equilibria(1).shape == (1, 1)
        two = analysis.enumerate_candidate_equilibria(2)
        assert two.shape == (2, 2)
        assert {tuple(v) for v in two} == {(0.0, 0.0), (0.0, np.pi)}
        assert analysis.enumerate_candidate_equilibria(3).shape == (4, 3)

    def test_first_entry_pinned(self):
        cands = analysis.enumerate_candidate_equilibria(5)
        assert np.all(cands[:, 0] == 0.0)
        assert set(np.unique(cands)) == {0.0, np.pi}

    def test_size_guard(self):
        with pytest.raises(ValueError):
            analysis.enumerate_candidate_equilibria(21)

    def test_antipodal_predicate(self):
        assert analysis.is_antipodal_vector([0.0, np.pi, 2 * np.pi])
        assert not analysis.is_antipodal_vector([0.0, 1.0])


class TestVerifyKrw:
    def test_in_phase_always_fixed(self, p3_loops, weighted_triangle):
        for g in (p3_loops, weighted_triangle):
            rep = analysis.verify_fixed_point_krw(np.zeros(3), g, 3)
            assert rep.is_fixed_point and rep.max_residual < 1e-12
            assert rep.n_states_checked == g.n**3

    def test_probe_rejected_with_witness(self, p3_loops):
        theta = np.array([0.0, np.pi / 2])
        rep = analysis.verify_fixed_point_krw(theta, p3_loops, 2)
        assert not rep.is_fixed_point
        assert rep.violating_state is not None
        assert rep.violating_residual > 1e-12
        # the isolating configuration from the structure argument violates too
        x, i = analysis.proof_witness_configuration(p3_loops, theta, 2)
        params = ModelParams.homogeneous(2)
        assert abs(dynamics.krw_rhs(theta, x, p3_loops, params)[i]) > 1e-12

    def test_candidate_set_equals_verified_set_small(self, p3_loops):
        sweep = analysis.check_equilibria_krw(p3_loops, 2, RngSeed(1), n_probes=25)
        assert sweep.all_candidates_fixed
        assert sweep.probes_rejected == sweep.probes_total
        assert sweep.witness_confirmed
        assert sweep.agreement

    def test_budget_error(self, p3_loops):
        with pytest.raises(EnumerationBudgetError):
            analysis.verify_fixed_point_krw(np.zeros(3), p3_loops, 3, max_configs=10)


class TestVerifyDrc:
    def test_in_phase_always_fixed(self):
        g = graphs.wsg_graph(6, 1)
        for exhaustive in (False, True):
            rep = analysis.verify_fixed_point_drc(np.zeros(6), g, exhaustive=exhaustive)
            assert rep.is_fixed_point

    def test_twisted_state_rejected_with_single_edge_witness(self):
        g = graphs.wsg_graph(10, 1)
        rep = analysis.verify_fixed_point_drc(analysis.twisted_state(10), g)
        assert not rep.is_fixed_point
        assert rep.mode == "single-edge"
        assert rep.violating_state.sum() == 1  # one active edge
        assert rep.violating_residual == pytest.approx(
            (1.0 / 10) * np.sin(2 * np.pi / 10), abs=1e-12
        )

    def test_single_edge_agrees_with_exhaustive(self):
        rng = np.random.default_rng(2)
        skeletons = [
            graphs.path_graph(3),
            graphs.path_graph(4, self_loops=True),
            graphs.cycle_graph(5),
            graphs.wsg_graph(6, 2),  # 12 edges
            graphs.complete_graph(4),
        ]
        for g in skeletons:
            assert len(g.edge_set()) <= 12
            vectors = list(analysis.enumerate_candidate_equilibria(g.n))
            vectors += [rng.uniform(0, 2 * np.pi, g.n) for _ in range(10)]
            for theta in vectors:
                fast = analysis.verify_fixed_point_drc(theta, g)
                full = analysis.verify_fixed_point_drc(theta, g, exhaustive=True)
                assert fast.is_fixed_point == full.is_fixed_point

    def test_full_sweep(self):
        sweep = analysis.check_equilibria_drc(graphs.path_graph(3), RngSeed(3), n_probes=20)
        assert sweep.agreement


class TestInstability:
    def test_direction_examples(self):
        assert np.array_equal(analysis.instability_direction([0.0, 0.0]), [1.0, 1.0])
        assert np.array_equal(analysis.instability_direction([0.0, np.pi]), [1.0, -1.0])
        assert np.array_equal(
            analysis.instability_direction([0.0, np.pi, 0.0]), [1.0, -1.0, 1.0]
        )

    def test_rejects_non_antipodal(self):
        with pytest.raises(ValueError):
            analysis.instability_direction([0.0, 1.0])

    def test_quadratic_form_in_phase_nonnegative(self, p3_loops):
        value = analysis.quadratic_form(np.zeros(3), [0, 1, 2], p3_loops)
        assert value == pytest.approx(0.0, abs=1e-12)  # ones vector is in the kernel

    def test_quadratic_form_adjacent_antipodal_pair(self):
        g = graphs.SkeletonGraph(np.array([[0.0, 1.0], [1.0, 0.0]]))
        value = analysis.quadratic_form([0.0, np.pi], [0, 1], g)
        assert value == pytest.approx(-4.0, abs=1e-12)

    def test_quadratic_form_no_cross_edge(self):
        g = graphs.path_graph(3)  # vertices 0 and 2 not adjacent, no loops
        value = analysis.quadratic_form([0.0, np.pi], [0, 2], g)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_quadratic_form_consistency_and_negativity(self):
        rng = np.random.default_rng(4)
        negatives = 0
        for _ in range(500):
            n_v = int(rng.integers(2, 5))
            while True:
                upper = np.triu(rng.random((n_v, n_v)) < 0.7, k=1)
                w = (upper | upper.T) * (1.0 + rng.random((n_v, n_v)))
                w = np.triu(w) + np.triu(w, 1).T
                np.fill_diagonal(w, rng.random(n_v))
                if np.all(w.sum(1) > 0) and graphs.is_connected(w):
                    break
            g = graphs.SkeletonGraph(w)
            n = int(rng.integers(2, 5))
            theta_star = np.pi * rng.integers(0, 2, n).astype(float)
            x = rng.integers(0, g.n, n)
            value = analysis.quadratic_form(theta_star, x, g)  # cross-check inside
            unequal = dynamics.geodesic_distance(
                theta_star[:, None], theta_star[None, :]
            ) > np.pi / 2
            if np.sum(g.weights[np.ix_(x, x)] * unequal) > 0:
                assert value < 0
                negatives += 1
            else:
                assert value == pytest.approx(0.0, abs=1e-12)
        assert negatives > 50  # the negativity branch was actually exercised

    def test_arbitrary_direction_skips_closed_form(self):
        g = graphs.SkeletonGraph(np.array([[0.0, 1.0], [1.0, 0.0]]))
        v = np.array([1.0, 2.0])
        h = dynamics.energy_hessian([0.0, np.pi], [0, 1], g)
        assert analysis.quadratic_form([0.0, np.pi], [0, 1], g, v=v) == pytest.approx(
            float(v @ h @ v)
        )


class TestDetection:
    def constant_path(self, value, n, horizon):
        params = ModelParams.homogeneous(n)
        return integrate.integrate_averaged(
            1.0, np.full(n, value), params, horizon=horizon
        )

    def test_constant_at_sync_detects_at_zero(self):
        path = self.constant_path(0.0, 3, 20.0)
        assert analysis.detect_synchronization(path, 1e-3, dwell=10.0) == 0.0

    def test_antipodal_never_detects(self):
        params = ModelParams.homogeneous(2)
        path = integrate.integrate_averaged(
            1.0, np.array([0.0, np.pi]), params, horizon=20.0
        )
        assert analysis.detect_synchronization(path, 1e-3, dwell=5.0) is None

    def test_dwell_window_must_fit(self):
        path = self.constant_path(0.0, 2, 5.0)
        assert analysis.detect_synchronization(path, 1e-3, dwell=10.0) is None

    def test_detection_matches_scalar_crossing_time(self):
        # gap phi solves phi' = -K a_bar sin(phi); dist_sync = phi / 2
        coupling, a_bar, tol = 1.0, 1.0, 1e-3
        params = ModelParams.homogeneous(2, coupling=coupling)
        phi0 = np.pi / 2
        cfg = integrate.IntegratorConfig(max_step=1e-3, sample_interval=0.01)
        path = integrate.integrate_averaged(
            a_bar, np.array([-phi0 / 2, phi0 / 2]), params, cfg, horizon=30.0
        )
        detected = analysis.detect_synchronization(path, tol, dwell=5.0)
        crossing = np.log(np.tan(phi0 / 2) / np.tan(tol)) / (coupling * a_bar)
        assert detected == pytest.approx(crossing, rel=0.1)


class TestSamplers:
    def test_uniform_range(self):
        s = Theta0Sampler("uniform", 5)
        theta = s.sample(RngSeed(1).generator())
        assert theta.shape == (5,) and theta.min() >= 0 and theta.max() < 2 * np.pi

    def test_cohesive_spread(self):
        s = Theta0Sampler("cohesive", 3, gamma=np.pi / 3)
        rng = RngSeed(2).generator()
        for _ in range(20):
            assert dynamics.phase_spread(s.sample(rng)) <= np.pi / 3

    def test_fixed_and_noise(self):
        values = (0.1, 0.2, 0.3)
        assert np.array_equal(
            Theta0Sampler("fixed", 3, values=values).sample(RngSeed(3).generator()),
            values,
        )
        noisy = Theta0Sampler("fixed_noise", 3, values=values, radius=0.05)
        theta = noisy.sample(RngSeed(4).generator())
        assert np.abs(theta - np.array(values)).max() <= 0.05

    def test_validation(self):
        with pytest.raises(ValueError):
            Theta0Sampler("bogus", 3)
        with pytest.raises(ValueError):
            Theta0Sampler("cohesive", 3)
        with pytest.raises(ValueError):
            Theta0Sampler("fixed", 3, values=(0.1,))
        with pytest.raises(ValueError):
            Theta0Sampler("fixed_noise", 2, values=(0.0, 0.1), radius=0.0)


class TestAveragingExperiment:
    def test_zero_horizon_zero_deviation(self, weighted_triangle):
        rows = analysis.averaging_experiment(
            weighted_triangle, 3, [1.0], 1, 0.0,
            Theta0Sampler("uniform", 3), RngSeed(5),
        )
        assert rows[0].mean_deviation == 0.0
        assert rows[0].std_error == 0.0

    def test_constant_initial_condition_zero_deviation(self, weighted_triangle):
        sampler = Theta0Sampler("fixed", 3, values=(0.7, 0.7, 0.7))
        rows = analysis.averaging_experiment(
            weighted_triangle, 3, [1.0, 0.5], 3, 5.0, sampler, RngSeed(6)
        )
        for row in rows:
            assert row.mean_deviation < 1e-12

    def test_requires_decreasing_epsilons(self, weighted_triangle):
        with pytest.raises(ValueError, match="decreasing"):
            analysis.averaging_experiment(
                weighted_triangle, 3, [0.1, 1.0], 1, 1.0,
                Theta0Sampler("uniform", 3), RngSeed(7),
            )

    def test_monotone_helper(self):
        rows = [
            analysis.AveragingRow(1.0, 10, 0.5, 0.01),
            analysis.AveragingRow(0.1, 10, 0.3, 0.01),
        ]
        assert analysis.averaging_monotone(rows)
        rows_bad = [
            analysis.AveragingRow(1.0, 10, 0.3, 0.01),
            analysis.AveragingRow(0.1, 10, 0.5, 0.01),
        ]
        assert not analysis.averaging_monotone(rows_bad)


class TestSyncExperiment:
    def test_cohesive_start_always_synchronizes(self, weighted_triangle):
        result = analysis.sync_probability_experiment(
            weighted_triangle, 3, 1.0, 5, 80.0,
            Theta0Sampler("cohesive", 3, gamma=np.pi / 3), RngSeed(8),
        )
        assert result.fraction == 1.0

    def test_exact_antipodal_never_synchronizes(self, weighted_triangle):
        sampler = Theta0Sampler("fixed", 3, values=(0.0, np.pi, np.pi))
        result = analysis.sync_probability_experiment(
            weighted_triangle, 3, 1.0, 3, 50.0, sampler, RngSeed(9),
        )
        assert result.fraction == 0.0


class TestTwistedEscape:
    def test_small_run(self):
        result = analysis.twisted_escape_experiment(
            n=10, k=1, trials=5, horizon=100.0, seed=RngSeed(10)
        )
        assert result.static_residual_norm < 1e-12
        assert not result.fixed_point_report.is_fixed_point
        assert result.fixed_point_report.violating_state.sum() == 1
        assert result.escape_fraction >= 0.8
        assert "t0=0" in result.probe_note


class TestStreams:
    def test_trial_streams_disjoint(self):
        seen = set()
        for row in range(3):
            for trial in range(4):
                for comp in range(3):
                    s = analysis.trial_stream(trial, comp, row=row, trials_per_row=4)
                    assert s not in seen
                    seen.add(s)
