"""Exact chain simulation: statistics oracles and reproducibility."""

import numpy as np
import pytest
from scipy import stats

from kuradyn import graphs, jumps
from kuradyn.jumps import RngSeed


@pytest.fixture
def triangle():
    return graphs.triangle_graph()


@pytest.fixture
def p3_loops():
    return graphs.path_graph(3, self_loops=True)


class TestRngSeed:
    def test_validation(self):
        with pytest.raises(ValueError):
            RngSeed(-1)
        with pytest.raises(ValueError):
            RngSeed(2**64)
        with pytest.raises(ValueError):
            RngSeed(1, -2)

    def test_streams_distinct(self):
        a = RngSeed(7, 0).generator().random(4)
        b = RngSeed(7, 1).generator().random(4)
        assert not np.array_equal(a, b)

    def test_same_key_same_stream(self):
        a = RngSeed(7, 3).generator().random(4)
        b = RngSeed(7, 3).generator().random(4)
        assert np.array_equal(a, b)


class TestWalkers:
    def test_zero_horizon(self, triangle):
        traj = jumps.simulate_walkers(triangle, 2, 1.0, [0, 1], 0.0, RngSeed(1))
        assert traj.n_events == 0
        assert np.array_equal(traj.state_at(0.0), [0, 1])

    def test_requires_self_loops_by_default(self):
        g = graphs.path_graph(3)
        with pytest.raises(ValueError, match="self-loop"):
            jumps.simulate_walkers(g, 1, 1.0, [0], 1.0, RngSeed(1))
        jumps.simulate_walkers(g, 1, 1.0, [0], 1.0, RngSeed(1), require_self_loops=False)

    def test_rejects_nonpositive_epsilon(self, triangle):
        with pytest.raises(ValueError, match="epsilon"):
            jumps.simulate_walkers(triangle, 1, 0.0, [0], 1.0, RngSeed(1))

    def test_positions_stay_in_range(self, triangle):
        traj = jumps.simulate_walkers(triangle, 3, 0.3, [0, 1, 2], 50.0, RngSeed(2))
        assert traj.states.min() >= 0 and traj.states.max() < 3

    def test_deterministic_given_seed(self, triangle):
        a = jumps.simulate_walkers(triangle, 3, 0.5, [0, 1, 2], 30.0, RngSeed(9, 4))
        b = jumps.simulate_walkers(triangle, 3, 0.5, [0, 1, 2], 30.0, RngSeed(9, 4))
        assert np.array_equal(a.times, b.times)
        assert np.array_equal(a.states, b.states)
        c = jumps.simulate_walkers(triangle, 3, 0.5, [0, 1, 2], 30.0, RngSeed(9, 5))
        assert not np.array_equal(a.times, c.times)

    def test_expected_jump_count(self, triangle):
        # Poisson oracle: N jumps at rate 1/eps each: mean = var = N T / eps
        n, eps, horizon, runs = 3, 0.5, 10.0, 1000
        mean_expected = n * horizon / eps
        counts = np.empty(runs)
        for r in range(runs):
            traj = jumps.simulate_walkers(
                triangle, n, eps, [0, 1, 2], horizon, RngSeed(10, r), compact=False
            )
            counts[r] = traj.n_events
        se = np.sqrt(mean_expected / runs)
        assert abs(counts.mean() - mean_expected) < 3 * se

    def test_single_change_invariant(self, triangle):
        for stream in range(5):
            traj = jumps.simulate_walkers(triangle, 3, 0.2, [0, 0, 0], 20.0, RngSeed(3, stream))
            assert jumps.single_change_violations(traj) == 0

    def test_occupation_matches_stationary_measure_loopfree(self):
        # the walk itself is well defined without loops; mu = (1/4, 1/2, 1/4)
        g = graphs.path_graph(3)
        traj = jumps.simulate_walkers(
            g, 1, 1.0, [0], 10_000.0, RngSeed(4), require_self_loops=False
        )
        frac_mid = traj.occupation_time(lambda s: s[0] == 1) / traj.horizon
        assert abs(frac_mid - 0.5) < 0.02

    def test_occupation_matches_stationary_measure_with_loops(self, p3_loops):
        mu = p3_loops.stationary_measure()
        traj = jumps.simulate_walkers(p3_loops, 1, 1.0, [0], 10_000.0, RngSeed(5, 1))
        occ = np.array(
            [traj.occupation_time(lambda s, u=u: s[0] == u) for u in range(3)]
        ) / traj.horizon
        assert 0.5 * np.abs(occ - mu).sum() < 0.02

    def test_interjump_times_exponential(self, triangle):
        eps = 0.5
        traj = jumps.simulate_walkers(
            triangle, 1, eps, [0], 4000.0, RngSeed(6), compact=False
        )
        gaps = np.diff(np.concatenate([[0.0], traj.times]))
        assert stats.kstest(gaps, "expon", args=(0, eps)).pvalue > 0.01

    def test_compaction_drops_self_loops_only(self, triangle):
        raw = jumps.simulate_walkers(triangle, 2, 0.5, [0, 1], 50.0, RngSeed(7), compact=False)
        compacted = jumps.simulate_walkers(triangle, 2, 0.5, [0, 1], 50.0, RngSeed(7))
        assert compacted.n_events < raw.n_events
        # occupation statistics unaffected by compaction
        for u in range(3):
            a = raw.occupation_time(lambda s, u=u: s[0] == u)
            b = compacted.occupation_time(lambda s, u=u: s[0] == u)
            assert a == pytest.approx(b, abs=1e-12)


class TestEdges:
    def test_zero_horizon(self):
        g = graphs.path_graph(3)
        traj = jumps.simulate_edges(g, 1.0, 1.0, None, 0.0, RngSeed(1))
        assert traj.n_events == 0
        assert np.array_equal(traj.initial_state, [1, 1])

    def test_rejects_nonpositive_rates(self):
        g = graphs.path_graph(3)
        with pytest.raises(ValueError):
            jumps.simulate_edges(g, 0.0, 1.0, None, 1.0, RngSeed(1))
        with pytest.raises(ValueError):
            jumps.simulate_edges(g, 1.0, -1.0, None, 1.0, RngSeed(1))

    def test_stationary_on_fraction(self):
        # two-state chain: on-fraction = kappa / (kappa + 1/eps) = 1/2
        g = graphs.path_graph(3)
        traj = jumps.simulate_edges(g, 1.0, 1.0, None, 10_000.0, RngSeed(2))
        for e in range(2):
            frac = traj.occupation_time(lambda s, e=e: s[e] == 1) / traj.horizon
            assert abs(frac - 0.5) < 0.02

    def test_fast_on_rate_limit(self):
        g = graphs.path_graph(3)
        traj = jumps.simulate_edges(g, 1.0, 1000.0, None, 200.0, RngSeed(3))
        frac = traj.occupation_time(lambda s: s[0] == 1) / traj.horizon
        assert frac > 0.99

    def test_edges_independent(self):
        # indicators of distinct edges at a fixed time, 1000 runs
        g = graphs.path_graph(3)
        probe_time = 10.0
        samples = np.empty((1000, 2))
        for r in range(1000):
            traj = jumps.simulate_edges(g, 1.0, 1.0, None, probe_time, RngSeed(11, r))
            samples[r] = traj.state_at(probe_time)
        corr = np.corrcoef(samples.T)[0, 1]
        assert abs(corr) < 0.05

    def test_deterministic(self):
        g = graphs.wsg_graph(6, 1)
        a = jumps.simulate_edges(g, 0.7, 1.3, None, 40.0, RngSeed(12, 2))
        b = jumps.simulate_edges(g, 0.7, 1.3, None, 40.0, RngSeed(12, 2))
        assert np.array_equal(a.times, b.times) and np.array_equal(a.states, b.states)

    def test_single_change(self):
        g = graphs.wsg_graph(6, 1)
        traj = jumps.simulate_edges(g, 1.0, 1.0, None, 30.0, RngSeed(13))
        assert jumps.single_change_violations(traj) == 0


class TestTrajectoryQueries:
    def make(self):
        times = np.array([1.0, 2.5, 4.0])
        states = np.array([[1], [0], [2]])
        return jumps.JumpTrajectory("walkers", np.array([0]), times, states, 5.0)

    def test_state_at_zero(self):
        assert self.make().state_at(0.0)[0] == 0

    def test_state_just_below_first_event(self):
        assert self.make().state_at(np.nextafter(1.0, 0.0))[0] == 0

    def test_state_at_event_is_right_continuous(self):
        traj = self.make()
        assert traj.state_at(1.0)[0] == 1
        assert traj.state_at(2.5)[0] == 0

    def test_state_outside_range(self):
        with pytest.raises(ValueError):
            self.make().state_at(5.1)
        with pytest.raises(ValueError):
            self.make().state_at(-0.1)

    def test_occupation_trivial_predicates(self):
        traj = self.make()
        assert traj.occupation_time(lambda s: True) == pytest.approx(5.0)
        assert traj.occupation_time(lambda s: False) == 0.0

    def test_occupation_interval_scan_oracle(self):
        # independent oracle: accumulate intervals directly from the event list
        traj = self.make()
        pred = lambda s: s[0] in (0, 2)
        bounds = [0.0, *traj.times, traj.horizon]
        states = [traj.initial_state, *traj.states]
        expected = sum(
            b - a for a, b, s in zip(bounds, bounds[1:], states) if pred(s)
        )
        assert traj.occupation_time(pred) == pytest.approx(expected, abs=1e-15)

    def test_occupation_up_to(self):
        traj = self.make()
        assert traj.occupation_time(lambda s: s[0] == 0, up_to=2.0) == pytest.approx(1.0)
        with pytest.raises(ValueError):
            traj.occupation_time(lambda s: True, up_to=6.0)

    def test_interaction_occupation_cross_check(self):
        # walkers on a two-vertex skeleton: interaction time via the
        # package predicate equals a hand scan over holding intervals
        from kuradyn.analysis import interaction_connected

        g = graphs.SkeletonGraph(np.array([[1.0, 1.0], [1.0, 0.0]]) + np.diag([0.0, 1.0]))
        traj = jumps.simulate_walkers(g, 2, 0.5, [0, 1], 50.0, RngSeed(14))
        via_package = traj.occupation_time(
            lambda s: interaction_connected(s, g, "walkers")
        )
        bounds = [0.0, *traj.times, traj.horizon]
        states = [traj.initial_state, *traj.states]
        by_hand = sum(
            b - a
            for a, b, s in zip(bounds, bounds[1:], states)
            if g.weights[s[0], s[1]] > 0
        )
        assert via_package == pytest.approx(by_hand, abs=1e-12)

    def test_validation(self):
        with pytest.raises(ValueError, match="strictly increasing"):
            jumps.JumpTrajectory(
                "walkers", np.array([0]), np.array([1.0, 1.0]),
                np.array([[1], [0]]), 5.0,
            )
        with pytest.raises(ValueError, match="kind"):
            jumps.JumpTrajectory("wrong", np.array([0]), np.empty(0), np.empty((0, 1)), 1.0)


class TestDump:
    def test_walker_round_trip(self, triangle):
        traj = jumps.simulate_walkers(triangle, 3, 0.5, [0, 1, 2], 20.0, RngSeed(15, 3))
        text = jumps.dumps_trajectory(traj)
        back = jumps.loads_trajectory(text)
        assert np.array_equal(back.times, traj.times)
        assert np.array_equal(back.states, traj.states)
        assert back.horizon == traj.horizon
        assert back.meta == traj.meta
        assert jumps.dumps_trajectory(back) == text

    def test_edge_round_trip(self, tmp_path):
        g = graphs.wsg_graph(5, 1)
        traj = jumps.simulate_edges(g, 1.0, 2.0, None, 15.0, RngSeed(16))
        path = tmp_path / "traj.txt"
        jumps.dump_trajectory(traj, str(path))
        back = jumps.load_trajectory(str(path))
        assert np.array_equal(back.times, traj.times)
        assert np.array_equal(back.states, traj.states)
        assert back.kind == "edges"
