"""In-package invariant suite behind the ``selftest`` subcommand.

Each check is a small, fast verification of one structural invariant:
graph identities, the gradient-flow structure, jump-process statistics,
integrator conservation laws, and the equilibrium characterization.  The
pytest suite covers the same ground with larger samples and frozen oracle
values; this module is the runtime smoke test.
"""

from __future__ import annotations

import time

import numpy as np
from scipy import stats

from . import analysis, dynamics, graphs, integrate, jumps
from ._kernels import HAVE_NUMBA
from .config import ExperimentConfig


def _rng(stream: int) -> np.random.Generator:
    return jumps.RngSeed(20260810, stream).generator()


def _random_graph(rng, n, self_loops=True):
    upper = np.triu(rng.random((n, n)) < 0.6, k=1)
    w = (upper | upper.T) * (1.0 + rng.random((n, n)))
    w = np.triu(w) + np.triu(w, 1).T
    if self_loops:
        np.fill_diagonal(w, 1.0 + rng.random(n))
    if not (np.all(w.sum(axis=1) > 0) and graphs.is_connected(w)):
        return None
    return graphs.SkeletonGraph(w)


def check_graph_identities():
    for g in (graphs.path_graph(3), graphs.triangle_graph(), graphs.wsg_graph(8, 2)):
        mu = g.stationary_measure()
        assert abs(mu.sum() - 1.0) < 1e-12
        assert np.array_equal(g.weights, g.weights.T)
        p = g.transition_matrix()
        assert np.abs(mu[:, None] * p - mu[None, :] * p.T).max() < 1e-12
        assert 0 < g.averaged_coupling() <= g.degree_bound() + 1e-12
        lap = graphs.laplacian(g.weights)
        assert np.abs(lap.sum(axis=1)).max() < 1e-12
        assert np.abs(lap @ np.ones(g.n)).max() < 1e-10


def check_gap_iff_connected():
    rng = _rng(1)
    for _ in range(30):
        n = int(rng.integers(2, 11))
        upper = np.triu(rng.random((n, n)) < 0.3, k=1)
        w = (upper | upper.T).astype(float)
        if np.any(w.sum(axis=1) == 0):
            continue
        gap = graphs.laplacian_spectral_gap(w)
        assert (gap > 0) == graphs.is_connected(w)


def check_gradient_flow_identity():
    rng = _rng(2)
    for _ in range(300):
        g = _random_graph(rng, int(rng.integers(2, 6)))
        if g is None:
            continue
        n = int(rng.integers(2, 5))
        x = rng.integers(0, g.n, n)
        theta = rng.uniform(0, 2 * np.pi, n)
        params = dynamics.ModelParams.homogeneous(n, coupling=1.0 + rng.random())
        lhs = dynamics.krw_rhs(theta, x, g, params)
        rhs = -(params.coupling / n) * dynamics.energy_gradient(theta, x, g)
        assert np.abs(lhs - rhs).max() < 1e-12


def check_finite_differences():
    rng = _rng(3)
    for _ in range(20):
        g = _random_graph(rng, 4)
        if g is None:
            continue
        n = 3
        x = rng.integers(0, g.n, n)
        theta = rng.uniform(0, 2 * np.pi, n)
        grad = dynamics.energy_gradient(theta, x, g)
        h = 1e-6
        for i in range(n):
            e = np.zeros(n)
            e[i] = h
            fd = (dynamics.energy(theta + e, x, g) - dynamics.energy(theta - e, x, g)) / (2 * h)
            assert abs(grad[i] - fd) < 1e-6
        hess = dynamics.energy_hessian(theta, x, g)
        h2 = 1e-4
        for i in range(n):
            ei = np.zeros(n)
            ei[i] = h2
            for j in range(n):
                ej = np.zeros(n)
                ej[j] = h2
                fd = (
                    dynamics.energy(theta + ei + ej, x, g)
                    - dynamics.energy(theta + ei - ej, x, g)
                    - dynamics.energy(theta - ei + ej, x, g)
                    + dynamics.energy(theta - ei - ej, x, g)
                ) / (4 * h2 * h2)
                assert abs(hess[i, j] - fd) < 1e-5


def check_drift_and_lipschitz_bounds():
    rng = _rng(4)
    for _ in range(200):
        g = _random_graph(rng, 4)
        if g is None:
            continue
        n = 3
        a_bound = g.degree_bound()
        params = dynamics.ModelParams(
            coupling=1.0 + rng.random(), omega=rng.normal(size=n), n=n
        )
        x = rng.integers(0, g.n, n)
        t1 = rng.uniform(0, 2 * np.pi, n)
        t2 = rng.uniform(0, 2 * np.pi, n)
        b1 = dynamics.krw_rhs(t1, x, g, params)
        b2 = dynamics.krw_rhs(t2, x, g, params)
        bound = params.coupling * a_bound + np.abs(params.omega).max()
        assert np.abs(b1).max() <= bound + 1e-12
        lip = params.coupling * a_bound * np.sqrt(n + 1.0)
        assert np.linalg.norm(b1 - b2) <= lip * np.linalg.norm(t1 - t2) + 1e-12


def check_hessian_psd_on_cohesive_set():
    rng = _rng(5)
    for _ in range(50):
        g = _random_graph(rng, 4)
        if g is None:
            continue
        n = 4
        x = rng.integers(0, g.n, n)
        theta = rng.uniform(-np.pi / 6, np.pi / 6, n)  # spread <= pi/3
        evals = np.linalg.eigvalsh(dynamics.energy_hessian(theta, x, g))
        assert evals[0] >= -1e-10


def check_trajectory_determinism():
    g = graphs.triangle_graph()
    seed = jumps.RngSeed(77, 5)
    t1 = jumps.simulate_walkers(g, 3, 0.5, np.zeros(3, int), 50.0, seed)
    t2 = jumps.simulate_walkers(g, 3, 0.5, np.zeros(3, int), 50.0, seed)
    assert np.array_equal(t1.times, t2.times) and np.array_equal(t1.states, t2.states)
    assert jumps.dumps_trajectory(t1) == jumps.dumps_trajectory(t2)
    back = jumps.loads_trajectory(jumps.dumps_trajectory(t1))
    assert np.array_equal(back.times, t1.times) and np.array_equal(back.states, t1.states)
    p3 = graphs.path_graph(3)
    e1 = jumps.simulate_edges(p3, 1.0, 1.0, None, 50.0, seed)
    e2 = jumps.simulate_edges(p3, 1.0, 1.0, None, 50.0, seed)
    assert np.array_equal(e1.times, e2.times) and np.array_equal(e1.states, e2.states)
    assert jumps.single_change_violations(t1) == 0
    assert jumps.single_change_violations(e1) == 0


def check_walker_occupation():
    g = graphs.path_graph(3, self_loops=True)
    traj = jumps.simulate_walkers(g, 1, 1.0, np.array([0]), 3000.0, jumps.RngSeed(3, 0))
    mu = g.stationary_measure()
    occ = np.array(
        [traj.occupation_time(lambda s, u=u: s[0] == u) for u in range(3)]
    ) / traj.horizon
    assert 0.5 * np.abs(occ - mu).sum() < 5e-2


def check_edge_on_fraction():
    g = graphs.path_graph(3)
    traj = jumps.simulate_edges(g, 1.0, 1.0, None, 3000.0, jumps.RngSeed(4, 0))
    for e in range(len(g.edge_set())):
        frac = traj.occupation_time(lambda s, e=e: s[e] == 1) / traj.horizon
        assert abs(frac - 0.5) < 5e-2


def check_interjump_times_exponential():
    g = graphs.triangle_graph()
    eps = 0.5
    traj = jumps.simulate_walkers(
        g, 1, eps, np.array([0]), 2000.0, jumps.RngSeed(5, 0), compact=False
    )
    gaps = np.diff(np.concatenate([[0.0], traj.times]))
    assert stats.kstest(gaps, "expon", args=(0, eps)).pvalue > 0.01


def check_conservation_and_monotone_spread():
    g = graphs.triangle_graph()
    params = dynamics.ModelParams.homogeneous(3)
    seed = jumps.RngSeed(6, 0)
    traj = jumps.simulate_walkers(g, 3, 1.0, np.array([0, 1, 2]), 50.0, seed)
    theta0 = np.array([0.1, 0.5, 0.9])
    path = integrate.integrate_krw(g, traj, theta0, params)
    drift = np.abs(path.phase_sum - path.phase_sum[0])
    assert drift.max() < 1e-9 * max(1.0, path.horizon)
    assert np.all(np.diff(path.spread) <= 1e-8)


def check_energy_decay_within_segments():
    g = graphs.triangle_graph()
    params = dynamics.ModelParams.homogeneous(3)
    traj = jumps.simulate_walkers(g, 3, 1.0, np.array([0, 1, 2]), 20.0, jumps.RngSeed(7, 0))
    theta0 = np.array([0.0, 0.7, 1.0])
    path = integrate.integrate_krw(g, traj, theta0, params)
    inside = ~np.isin(path.times[1:], traj.times)  # exclude switch samples
    diffs = np.diff(path.energy)
    assert np.all(diffs[inside] <= 1e-8)


def check_exponential_decay_bound():
    g = graphs.SkeletonGraph(np.ones((2, 2)))
    params = dynamics.ModelParams.homogeneous(2)
    gamma = np.pi / 3
    c_tilde = graphs.uniform_spectral_gap(g, 2, gamma)
    seed = jumps.RngSeed(8, 0)
    traj = jumps.simulate_walkers(g, 2, 1.0, np.array([0, 1]), 20.0, seed)
    theta0 = dynamics.center_phases(np.array([0.0, 1.0]))  # spread 1.0, inside pi/3-cohesion
    path = integrate.integrate_krw(g, traj, theta0, params)
    centered = dynamics.center_phases_batch(path.states)
    sq = (centered**2).sum(axis=1)
    # every walker configuration on this skeleton interacts, so L(t) = t
    bound = sq[0] * np.exp(-(2 * c_tilde * params.coupling / 2) * path.times) + 1e-6
    assert np.all(sq <= bound)


def check_time_change_identity():
    g = graphs.triangle_graph()
    params = dynamics.ModelParams.homogeneous(2)
    dev = integrate.time_change_check(
        g, 2, params, 0.1, np.array([0.3, 1.2]), 5.0, jumps.RngSeed(9, 0)
    )
    assert dev < 1e-6


def check_two_oscillator_closed_form():
    # phase difference of the averaged pair solves phi' = -K a_bar sin(phi)
    params = dynamics.ModelParams.homogeneous(2, coupling=2.0)
    a_bar = 1.0
    phi0 = np.pi / 2
    cfg = integrate.IntegratorConfig(max_step=1e-3, sample_interval=0.01)
    path = integrate.integrate_averaged(
        a_bar, np.array([-phi0 / 2, phi0 / 2]), params, cfg, horizon=3.0
    )
    rate = params.coupling * a_bar
    exact = 2.0 * np.arctan(np.tan(phi0 / 2) * np.exp(-rate * path.times))
    phi = path.states[:, 1] - path.states[:, 0]
    assert np.abs(phi - exact).max() < 1e-6


def check_equilibria_characterization():
    g = graphs.path_graph(3, self_loops=True)
    sweep = analysis.check_equilibria_krw(g, 2, jumps.RngSeed(10, 0), n_probes=10)
    assert sweep.agreement and sweep.witness_confirmed
    sweep_drc = analysis.check_equilibria_drc(graphs.path_graph(3), jumps.RngSeed(11, 0), n_probes=10)
    assert sweep_drc.agreement


def check_quadratic_form_consistency():
    rng = _rng(12)
    for _ in range(300):
        g = _random_graph(rng, 4)
        if g is None:
            continue
        n = int(rng.integers(2, 5))
        theta_star = np.pi * rng.integers(0, 2, n).astype(float)
        x = rng.integers(0, g.n, n)
        value = analysis.quadratic_form(theta_star, x, g)  # raises on mismatch
        unequal = dynamics.geodesic_distance(theta_star[:, None], theta_star[None, :]) > 1
        interacting = g.weights[np.ix_(x, x)] * unequal
        if interacting.sum() > 0:
            assert value < 0


def check_kernel_matches_reference():
    if not HAVE_NUMBA:
        return
    g = graphs.triangle_graph()
    params = dynamics.ModelParams.homogeneous(3)
    traj = jumps.simulate_walkers(g, 3, 0.5, np.array([0, 1, 2]), 10.0, jumps.RngSeed(13, 0))
    theta0 = np.array([0.2, 0.9, 1.4])
    fast = integrate.integrate_krw(g, traj, theta0, params, use_kernel=True)
    slow = integrate.integrate_krw(g, traj, theta0, params, use_kernel=False)
    assert np.abs(fast.states - slow.states).max() < 1e-12


def check_self_convergence():
    g = graphs.triangle_graph()
    params = dynamics.ModelParams.homogeneous(3)
    traj = jumps.simulate_walkers(g, 3, 1.0, np.array([0, 1, 2]), 20.0, jumps.RngSeed(14, 0))
    theta0 = np.array([0.1, 0.6, 1.1])
    cfg1 = integrate.IntegratorConfig(max_step=1e-2, sample_interval=0.1)
    cfg2 = integrate.IntegratorConfig(max_step=5e-3, sample_interval=0.1)
    p1 = integrate.integrate_krw(g, traj, theta0, params, cfg1)
    p2 = integrate.integrate_krw(g, traj, theta0, params, cfg2)
    assert np.abs(p1.final_state - p2.final_state).max() < 1e-6


def check_config_roundtrip():
    cfg = ExperimentConfig(model="drc", epsilon=0.5, kappa=2.0, trials=3, seed=9)
    text = cfg.to_text()
    again = ExperimentConfig.from_text(text)
    assert again == cfg
    assert again.to_text() == text


CHECKS = [
    ("graph identities (symmetry, measure, reversibility)", check_graph_identities),
    ("spectral gap positive iff connected", check_gap_iff_connected),
    ("gradient-flow identity", check_gradient_flow_identity),
    ("gradient/Hessian match finite differences", check_finite_differences),
    ("drift and Lipschitz bounds", check_drift_and_lipschitz_bounds),
    ("Hessian PSD on the cohesive set", check_hessian_psd_on_cohesive_set),
    ("trajectory determinism and text round-trip", check_trajectory_determinism),
    ("walker occupation matches stationary measure", check_walker_occupation),
    ("edge on-fraction matches two-state stationary law", check_edge_on_fraction),
    ("inter-jump times are Exp(1/epsilon)", check_interjump_times_exponential),
    ("phase-sum conservation and monotone spread", check_conservation_and_monotone_spread),
    ("energy decay within frozen segments", check_energy_decay_within_segments),
    ("exponential decay bound with certified gap", check_exponential_decay_bound),
    ("time-change identity", check_time_change_identity),
    ("two-oscillator closed form", check_two_oscillator_closed_form),
    ("equilibria characterization (walkers and edges)", check_equilibria_characterization),
    ("quadratic-form consistency and negativity", check_quadratic_form_consistency),
    ("compiled kernel matches reference driver", check_kernel_matches_reference),
    ("step-halving self-convergence", check_self_convergence),
    ("config round-trip", check_config_roundtrip),
]


def run_selftest(out=print) -> bool:
    """Run every invariant check; returns True iff all pass."""
    all_ok = True
    for name, fn in CHECKS:
        start = time.perf_counter()
        try:
            fn()
            status = "PASS"
        except Exception as exc:  # noqa: BLE001 - report and continue
            status = f"FAIL ({type(exc).__name__}: {exc})"
            all_ok = False
        elapsed = time.perf_counter() - start
        out(f"[{status.split()[0]:4s}] {name:55s} {elapsed:7.2f}s"
            + ("" if status.startswith("PASS") else f"  {status[5:]}"))
    return all_ok
