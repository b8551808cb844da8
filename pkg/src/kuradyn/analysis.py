"""Equilibrium verification, instability forms, and the experiment suite.

With equal natural frequencies the only configuration-independent fixed
points are the antipodal vectors (all pairwise geodesic gaps 0 or pi).
This module enumerates those candidates, verifies fixed-point status by
brute force over graph states (all walker configurations, or all edge
subsets with a certified single-edge reduction), evaluates the quadratic
form of the energy Hessian along the canonical unstable direction, and
runs the averaging, synchronization-probability, and twisted-state escape
experiments.
"""

from __future__ import annotations

import concurrent.futures
from dataclasses import dataclass

import numpy as np

from .dynamics import (
    ModelParams,
    drc_rhs,
    energy_hessian,
    gauge_distances_batch,
    geodesic_distance,
    krw_rhs,
    phase_spread,
    wrap_phases,
)
from .graphs import EnumerationBudgetError, SkeletonGraph, is_connected, wsg_graph
from .integrate import (
    IntegratorConfig,
    SampledPath,
    default_max_step,
    integrate_averaged,
    integrate_drc,
    integrate_krw,
    sup_deviation,
)
from .jumps import RngSeed, simulate_edges, simulate_walkers

# Stream-id layout: every trial owns a block of 8 stream ids so that all
# random draws in an experiment are attributable to (trial, component).
STREAM_BLOCK = 8
STREAM_JUMPS = 0
STREAM_THETA0 = 1
STREAM_X0 = 2

FIXED_POINT_TOL = 1e-12


class InternalConsistencyError(RuntimeError):
    """Two independent computations of the same quantity disagreed."""


def trial_stream(trial: int, component: int, row: int = 0, trials_per_row: int = 0) -> int:
    """Stream id for one random draw of one trial (optionally row-indexed)."""
    return ((row * trials_per_row + trial) * STREAM_BLOCK) + component


# ---------------------------------------------------------------------------
# equilibria


def enumerate_candidate_equilibria(n: int) -> np.ndarray:
    """All antipodal phase vectors up to global translation.

    Returns the 2**(n-1) vectors with entries in {0, pi} and first entry
    pinned to 0 (rows of the returned array).
    """
    if not 1 <= n <= 20:
        raise ValueError(f"enumeration supports 1 <= n <= 20, got {n}")
    count = 2 ** (n - 1)
    codes = np.arange(count)[:, None] >> np.arange(n - 1)[None, :]
    out = np.zeros((count, n))
    out[:, 1:] = np.pi * (codes & 1)
    return out


def is_antipodal_vector(theta, tol: float = 1e-9) -> bool:
    """True iff every pairwise geodesic gap is within tol of {0, pi}."""
    th = np.asarray(theta, dtype=float)
    gaps = geodesic_distance(th[:, None], th[None, :])
    return bool(np.all((gaps <= tol) | (np.abs(gaps - np.pi) <= tol)))


@dataclass
class EquilibriumReport:
    candidate: np.ndarray
    is_fixed_point: bool
    max_residual: float
    mode: str  # "exhaustive" | "single-edge"
    n_states_checked: int
    tolerance: float
    violating_state: np.ndarray | None = None
    violating_component: int | None = None
    violating_residual: float | None = None


def verify_fixed_point_krw(
    theta_star,
    g: SkeletonGraph,
    n_walkers: int,
    coupling: float = 1.0,
    tol: float = FIXED_POINT_TOL,
    max_configs: int = 10**6,
) -> EquilibriumReport:
    """Check the homogeneous drift vanishes for every walker configuration.

    Enumerates all |V|**N configurations (chunked); the verdict is
    is_fixed_point iff the maximal residual stays below tol.  The first
    violating (configuration, component) is reported as a witness.
    """
    th = np.asarray(theta_star, dtype=float)
    if th.shape != (n_walkers,):
        raise ValueError(f"theta_star must have shape ({n_walkers},), got {th.shape}")
    total = g.n**n_walkers
    if total > max_configs:
        raise EnumerationBudgetError(f"{total} configurations exceed cap {max_configs}")
    sin_mat = np.sin(th[None, :] - th[:, None])
    k_over_n = coupling / n_walkers
    w = g.weights

    worst = 0.0
    witness = None
    chunk = max(1, 2**16 // max(1, n_walkers * n_walkers))
    shape = (g.n,) * n_walkers
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        configs = np.stack(
            np.unravel_index(np.arange(lo, hi), shape), axis=1
        )  # itertools.product order
        a = w[configs[:, :, None], configs[:, None, :]]
        residuals = np.abs(k_over_n * (a * sin_mat[None, :, :]).sum(axis=2))
        block_max = float(residuals.max()) if residuals.size else 0.0
        if witness is None and block_max >= tol:
            c, i = np.argwhere(residuals >= tol)[0]
            witness = (configs[c].copy(), int(i), float(residuals[c, i]))
        worst = max(worst, block_max)

    report = EquilibriumReport(
        candidate=th,
        is_fixed_point=bool(worst < tol),
        max_residual=float(worst),
        mode="exhaustive",
        n_states_checked=total,
        tolerance=tol,
    )
    if witness is not None:
        report.violating_state, report.violating_component, report.violating_residual = witness
    return report


def proof_witness_configuration(g: SkeletonGraph, theta, n_walkers: int, margin: float = 1e-9):
    """Walker configuration isolating one out-of-line pair on a self-loop.

    For a non-complete skeleton, pick vertices u*, v* with pi(u*, v*) = 0
    and a phase pair with gap strictly inside (0, pi); placing that pair on
    u* and everyone else on v* makes the drift at the pair nonzero.
    Returns (x, i) or None when no such pair exists.
    """
    th = np.asarray(theta, dtype=float)
    off = g.weights.copy()
    np.fill_diagonal(off, 1.0)
    zeros = np.argwhere(off == 0)
    if zeros.size == 0:
        return None  # complete skeleton
    u_star, v_star = int(zeros[0, 0]), int(zeros[0, 1])
    gaps = geodesic_distance(th[:, None], th[None, :])
    bad = np.argwhere((gaps > margin) & (gaps < np.pi - margin))
    if bad.size == 0:
        return None
    i, j = int(bad[0, 0]), int(bad[0, 1])
    x = np.full(n_walkers, v_star, dtype=np.int64)
    x[i] = u_star
    x[j] = u_star
    return x, i


def verify_fixed_point_drc(
    theta_star,
    g: SkeletonGraph,
    coupling: float = 1.0,
    tol: float = FIXED_POINT_TOL,
    exhaustive: bool = False,
    max_configs: int = 2**22,
) -> EquilibriumReport:
    """Check the homogeneous drift vanishes for every edge subset.

    By default uses the certified single-edge reduction: the drift vanishes
    for all subsets iff it vanishes on every one-edge subgraph (adjacent
    gaps in {0, pi} propagate along the connected skeleton).  Exhaustive
    mode enumerates all 2**|E| subsets, capped at ``max_configs``.
    """
    th = np.asarray(theta_star, dtype=float)
    if th.shape != (g.n,):
        raise ValueError(f"theta_star must have shape ({g.n},), got {th.shape}")
    edge_set = g.edge_set()
    us, vs, wts = edge_set.endpoint_arrays()
    n_edges = len(edge_set)
    k_over_n = coupling / g.n

    if not exhaustive:
        worst = 0.0
        witness = None
        for e in range(n_edges):
            u, v = int(us[e]), int(vs[e])
            if u == v:
                continue  # self-loop subgraph has zero drift identically
            r = abs(k_over_n * wts[e] * np.sin(th[v] - th[u]))
            if witness is None and r >= tol:
                state = np.zeros(n_edges, dtype=np.int64)
                state[e] = 1
                witness = (state, u, float(r))
            worst = max(worst, r)
        report = EquilibriumReport(
            candidate=th,
            is_fixed_point=bool(worst < tol),
            max_residual=float(worst),
            mode="single-edge",
            n_states_checked=n_edges,
            tolerance=tol,
        )
        if witness is not None:
            (report.violating_state, report.violating_component,
             report.violating_residual) = witness
        return report

    total = 2**n_edges
    if total > max_configs:
        raise EnumerationBudgetError(f"{total} edge subsets exceed cap {max_configs}")
    # per-edge drift contribution is linear in the subset indicator
    contrib = np.zeros((n_edges, g.n))
    for e in range(n_edges):
        u, v = int(us[e]), int(vs[e])
        if u == v:
            continue
        contrib[e, u] = wts[e] * np.sin(th[v] - th[u])
        contrib[e, v] = wts[e] * np.sin(th[u] - th[v])

    worst = 0.0
    witness = None
    chunk = max(1, 2**18 // max(1, g.n))
    for lo in range(0, total, chunk):
        hi = min(lo + chunk, total)
        bits = (np.arange(lo, hi)[:, None] >> np.arange(n_edges)[None, :]) & 1
        residuals = np.abs(k_over_n * (bits @ contrib))
        block_max = float(residuals.max()) if residuals.size else 0.0
        if witness is None and block_max >= tol:
            c, u = np.argwhere(residuals >= tol)[0]
            witness = (bits[c].astype(np.int64), int(u), float(residuals[c, u]))
        worst = max(worst, block_max)

    report = EquilibriumReport(
        candidate=th,
        is_fixed_point=bool(worst < tol),
        max_residual=float(worst),
        mode="exhaustive",
        n_states_checked=total,
        tolerance=tol,
    )
    if witness is not None:
        report.violating_state, report.violating_component, report.violating_residual = witness
    return report


def instability_direction(theta_star, tol: float = 1e-9) -> np.ndarray:
    """Canonical unstable direction: +1 on the 0-cluster, -1 on the pi-cluster."""
    th = np.asarray(theta_star, dtype=float)
    to_zero = geodesic_distance(th, 0.0)
    to_pi = geodesic_distance(th, np.pi)
    if not np.all((to_zero <= tol) | (to_pi <= tol)):
        raise ValueError("theta_star is not an antipodal vector (entries must be 0 or pi)")
    return np.where(to_zero <= tol, 1.0, -1.0)


def quadratic_form(theta_star, x, g: SkeletonGraph, v=None, tol: float = 1e-10) -> float:
    """v^T Hess(U) v at an antipodal candidate, cross-checked in closed form.

    Along the canonical direction the value equals
    ``-2 sum_{i,j} pi(x_i, x_j) 1{theta*_i != theta*_j}``; disagreement
    beyond tol raises InternalConsistencyError.
    """
    th = np.asarray(theta_star, dtype=float)
    direction = instability_direction(th)
    v = direction if v is None else np.asarray(v, dtype=float)
    h = energy_hessian(th, x, g)
    value = float(v @ h @ v)

    if np.array_equal(v, direction) or np.array_equal(v, -direction):
        xs = np.asarray(x, dtype=np.int64)
        unequal = geodesic_distance(th[:, None], th[None, :]) > np.pi / 2
        closed = -2.0 * float(np.sum(g.weights[np.ix_(xs, xs)] * unequal))
        if abs(value - closed) > tol:
            raise InternalConsistencyError(
                f"Hessian route {value!r} vs closed form {closed!r} differ beyond {tol}"
            )
    return value


def interaction_connected(state, g: SkeletonGraph, kind: str) -> bool:
    """Connectivity of the interaction graph induced by one chain state.

    Walkers: the N-vertex graph with weights pi(x_i, x_j).  Edges: the
    skeleton restricted to active edges (all of V must be reachable).
    """
    if kind == "walkers":
        x = np.asarray(state, dtype=np.int64)
        return is_connected(g.weights[np.ix_(x, x)])
    return is_connected(g.edge_set().active_weights(state))


def connected_occupation_profile(traj, g: SkeletonGraph, at_times) -> np.ndarray:
    """L(t): Lebesgue measure of {s <= t : interaction graph connected}.

    Exact from the piecewise-constant structure (L is piecewise linear
    with slopes 0/1); connectivity is cached per distinct chain state.
    """
    at = np.asarray(at_times, dtype=float)
    cache: dict[bytes, bool] = {}
    starts, totals, flags = [], [], []
    total = 0.0
    for t0, t1, state in traj.segments():
        key = state.tobytes()
        flag = cache.get(key)
        if flag is None:
            flag = interaction_connected(state, g, traj.kind)
            cache[key] = flag
        starts.append(t0)
        totals.append(total)
        flags.append(1.0 if flag else 0.0)
        total += (t1 - t0) * flags[-1]
    starts_arr = np.asarray(starts)
    totals_arr = np.asarray(totals)
    flags_arr = np.asarray(flags)
    idx = np.clip(np.searchsorted(starts_arr, at, side="right") - 1, 0, len(starts) - 1)
    return totals_arr[idx] + flags_arr[idx] * (at - starts_arr[idx])


# ---------------------------------------------------------------------------
# synchronization detection


def detect_synchronization(path: SampledPath, tol: float, dwell: float = 10.0):
    """First sample time after which dist_sync stays below tol for >= dwell.

    Requires the full dwell window to fit inside the horizon; returns None
    when the path never locks in.
    """
    if tol <= 0:
        raise ValueError(f"tol must be positive, got {tol}")
    times = path.times
    below = path.dist_sync < tol
    above_idx = np.nonzero(~below)[0]
    pos = np.searchsorted(above_idx, np.arange(times.size))
    next_above = np.full(times.size, np.inf)
    has = pos < above_idx.size
    next_above[has] = times[above_idx[pos[has]]]
    ok = below & (next_above > times + dwell) & (times + dwell <= path.horizon)
    hits = np.nonzero(ok)[0]
    return float(times[hits[0]]) if hits.size else None


# ---------------------------------------------------------------------------
# initial-condition samplers


@dataclass(frozen=True)
class Theta0Sampler:
    """Initial-phase distribution for experiments.

    kinds: "uniform" (i.i.d. on the torus), "cohesive" (uniform conditioned
    on spread <= gamma, by rejection), "fixed", "fixed_noise" (fixed vector
    plus i.i.d. uniform noise of the given radius).
    """

    kind: str
    n: int
    gamma: float | None = None
    values: tuple | None = None
    radius: float = 0.0

    def __post_init__(self):
        if self.kind not in ("uniform", "cohesive", "fixed", "fixed_noise"):
            raise ValueError(f"unknown theta0 sampler kind {self.kind!r}")
        if self.kind == "cohesive" and not (self.gamma and 0 < self.gamma <= np.pi):
            raise ValueError("cohesive sampler needs gamma in (0, pi]")
        if self.kind in ("fixed", "fixed_noise"):
            if self.values is None or len(self.values) != self.n:
                raise ValueError(f"{self.kind} sampler needs {self.n} phase values")
        if self.kind == "fixed_noise" and self.radius <= 0:
            raise ValueError("fixed_noise sampler needs a positive radius")

    def sample(self, rng: np.random.Generator) -> np.ndarray:
        if self.kind == "uniform":
            return rng.uniform(0.0, 2.0 * np.pi, self.n)
        if self.kind == "cohesive":
            for _ in range(100_000):
                theta = rng.uniform(0.0, 2.0 * np.pi, self.n)
                if phase_spread(theta) <= self.gamma:
                    return theta
            raise RuntimeError(
                f"rejection sampling of spread <= {self.gamma} did not succeed in 1e5 draws"
            )
        base = np.asarray(self.values, dtype=float)
        if self.kind == "fixed":
            return base.copy()
        return wrap_phases(base + rng.uniform(-self.radius, self.radius, self.n))


# ---------------------------------------------------------------------------
# experiments


def _map_trials(worker, arglist, jobs: int):
    if jobs <= 1:
        return [worker(args) for args in arglist]
    with concurrent.futures.ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(worker, arglist))


@dataclass
class AveragingRow:
    epsilon: float
    trials: int
    mean_deviation: float
    std_error: float


def _averaging_trial(args):
    (g, n_walkers, epsilon, coupling, horizon, a_bar, cfg, seed, base_stream,
     sampler) = args
    params = ModelParams.homogeneous(n_walkers, coupling=coupling)
    theta0 = sampler.sample(seed.with_stream(base_stream + STREAM_THETA0).generator())
    x0_rng = seed.with_stream(base_stream + STREAM_X0).generator()
    x0 = x0_rng.choice(g.n, size=n_walkers, p=g.stationary_measure())
    traj = simulate_walkers(
        g, n_walkers, epsilon, x0, horizon, seed.with_stream(base_stream + STREAM_JUMPS)
    )
    path_krw = integrate_krw(g, traj, theta0, params, cfg)
    path_avg = integrate_averaged(
        a_bar, theta0, params, cfg, horizon, sample_times=path_krw.times
    )
    return sup_deviation(path_krw, path_avg)


def averaging_experiment(
    g: SkeletonGraph,
    n_walkers: int,
    epsilons,
    trials: int,
    horizon: float,
    theta0_sampler: Theta0Sampler,
    seed: RngSeed,
    coupling: float = 1.0,
    cfg: IntegratorConfig | None = None,
    jobs: int = 1,
) -> list[AveragingRow]:
    """Mean sup-deviation between paired walker and averaged paths per epsilon.

    Rows must be requested at strictly decreasing epsilon; each trial pairs
    one walker path against the averaged path from the same initial
    condition on the identical sample grid.
    """
    eps = [float(e) for e in epsilons]
    if len(eps) < 1 or any(b >= a for a, b in zip(eps, eps[1:])):
        raise ValueError("epsilons must be nonempty and strictly decreasing")
    if trials < 1:
        raise ValueError("trials must be >= 1")
    a_bar = g.averaged_coupling()
    rows = []
    for r, epsilon in enumerate(eps):
        row_cfg = cfg if cfg is not None else IntegratorConfig(
            max_step=default_max_step(epsilon)
        )
        args = [
            (g, n_walkers, epsilon, coupling, horizon, a_bar, row_cfg, seed,
             trial_stream(t, 0, row=r, trials_per_row=trials), theta0_sampler)
            for t in range(trials)
        ]
        devs = np.asarray(_map_trials(_averaging_trial, args, jobs))
        se = float(devs.std(ddof=1) / np.sqrt(trials)) if trials > 1 else 0.0
        rows.append(AveragingRow(epsilon, trials, float(devs.mean()), se))
    return rows


def averaging_monotone(rows: list[AveragingRow]) -> bool:
    """Non-increasing means within one standard error of each difference."""
    for a, b in zip(rows, rows[1:]):
        allowance = float(np.hypot(a.std_error, b.std_error))
        if b.mean_deviation > a.mean_deviation + allowance:
            return False
    return True


@dataclass
class SyncProbabilityResult:
    fraction: float
    trials: int
    detection_times: list  # per trial: time or None
    final_dist_sync: list
    threshold_note: str = (
        "the pass fraction threshold is an experiment default, echoed in the "
        "run config, not a model constant"
    )


def _sync_trial(args):
    (g, n_walkers, epsilon, coupling, horizon, cfg, seed, base_stream, sampler,
     tol, dwell) = args
    params = ModelParams.homogeneous(n_walkers, coupling=coupling)
    theta0 = sampler.sample(seed.with_stream(base_stream + STREAM_THETA0).generator())
    x0_rng = seed.with_stream(base_stream + STREAM_X0).generator()
    x0 = x0_rng.choice(g.n, size=n_walkers, p=g.stationary_measure())
    traj = simulate_walkers(
        g, n_walkers, epsilon, x0, horizon, seed.with_stream(base_stream + STREAM_JUMPS)
    )
    path = integrate_krw(g, traj, theta0, params, cfg)
    detected = detect_synchronization(path, tol, dwell)
    return detected, float(path.dist_sync[-1])


def sync_probability_experiment(
    g: SkeletonGraph,
    n_walkers: int,
    epsilon: float,
    trials: int,
    horizon: float,
    theta0_sampler: Theta0Sampler,
    seed: RngSeed,
    tol: float = 1e-3,
    dwell: float = 10.0,
    coupling: float = 1.0,
    cfg: IntegratorConfig | None = None,
    jobs: int = 1,
) -> SyncProbabilityResult:
    """Fraction of walker trials that phase-synchronize within the horizon."""
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if cfg is None:
        cfg = IntegratorConfig(max_step=default_max_step(epsilon))
    args = [
        (g, n_walkers, epsilon, coupling, horizon, cfg, seed,
         trial_stream(t, 0), theta0_sampler, tol, dwell)
        for t in range(trials)
    ]
    results = _map_trials(_sync_trial, args, jobs)
    detections = [r[0] for r in results]
    finals = [r[1] for r in results]
    fraction = sum(1 for d in detections if d is not None) / trials
    return SyncProbabilityResult(fraction, trials, detections, finals)


@dataclass
class TwistedEscapeResult:
    escape_fraction: float
    trials: int
    escape_times: list  # per trial: time or None
    static_residual_norm: float
    fixed_point_report: EquilibriumReport
    probe_note: str = (
        "escape probe starts exactly at the twisted state at t0=0; this is a "
        "strictly weaker probe than instability with adversarial start times"
    )


def _escape_trial(args):
    g, theta_star, epsilon, kappa, coupling, horizon, radius, cfg, seed, base_stream = args
    params = ModelParams.homogeneous(g.n, coupling=coupling)
    traj = simulate_edges(
        g, epsilon, kappa, None, horizon, seed.with_stream(base_stream + STREAM_JUMPS)
    )
    path = integrate_drc(g, traj, theta_star, params, cfg)
    dists = gauge_distances_batch(path.states, theta_star)
    hits = np.nonzero(dists > radius)[0]
    return float(path.times[hits[0]]) if hits.size else None


def twisted_state(n: int) -> np.ndarray:
    """The ring equilibrium theta_u = 2 pi u / n."""
    return 2.0 * np.pi * np.arange(n) / n


def twisted_escape_experiment(
    n: int = 10,
    k: int = 1,
    epsilon: float = 1.0,
    kappa: float = 1.0,
    trials: int = 50,
    horizon: float = 100.0,
    radius: float = 0.1,
    seed: RngSeed = RngSeed(0),
    coupling: float = 1.0,
    cfg: IntegratorConfig | None = None,
    jobs: int = 1,
) -> TwistedEscapeResult:
    """Escape statistics of the ring twisted state under edge flicker.

    The twisted state is a fixed point of the frozen ring but fails the
    edge-model fixed-point test with a single-edge witness; the experiment
    measures how often flickering edges push the path out of the given
    gauge-invariant ball within the horizon.
    """
    g = wsg_graph(n, k)
    theta_star = twisted_state(n)
    params = ModelParams.homogeneous(n, coupling=coupling)
    static_residual = float(
        np.abs(drc_rhs(theta_star, g.edge_set().all_on(), g, params)).max()
    )
    fp_report = verify_fixed_point_drc(theta_star, g, coupling=coupling)
    if cfg is None:
        cfg = IntegratorConfig(max_step=default_max_step(epsilon))
    args = [
        (g, theta_star, epsilon, kappa, coupling, horizon, radius, cfg, seed,
         trial_stream(t, 0))
        for t in range(trials)
    ]
    escape_times = _map_trials(_escape_trial, args, jobs)
    fraction = sum(1 for t in escape_times if t is not None) / trials
    return TwistedEscapeResult(fraction, trials, escape_times, static_residual, fp_report)


# ---------------------------------------------------------------------------
# candidate-set sweeps (the S1 = S and S2 = S cross-checks)


@dataclass
class EquilibriaSweep:
    candidates: np.ndarray
    candidate_reports: list
    all_candidates_fixed: bool
    probes_rejected: int
    probes_total: int
    witness_confirmed: bool | None
    agreement: bool


def check_equilibria_krw(
    g: SkeletonGraph,
    n_walkers: int,
    seed: RngSeed = RngSeed(0),
    n_probes: int = 50,
    coupling: float = 1.0,
    margin: float = 0.1,
    max_configs: int = 10**6,
) -> EquilibriaSweep:
    """Verify the candidate set is exactly the verified fixed-point set.

    Every antipodal candidate must pass brute-force verification; random
    probes with some gap bounded away from {0, pi} must all fail, and the
    isolating witness configuration must expose a nonzero drift directly.
    Meaningful for non-complete skeletons.
    """
    candidates = enumerate_candidate_equilibria(n_walkers)
    reports = [
        verify_fixed_point_krw(c, g, n_walkers, coupling=coupling, max_configs=max_configs)
        for c in candidates
    ]
    all_fixed = all(r.is_fixed_point for r in reports)

    rng = seed.generator()
    rejected = 0
    witness_ok: bool | None = None
    params = ModelParams.homogeneous(n_walkers, coupling=coupling)
    for _ in range(n_probes):
        theta = _probe_vector(rng, n_walkers, margin)
        rep = verify_fixed_point_krw(
            theta, g, n_walkers, coupling=coupling, max_configs=max_configs
        )
        if not rep.is_fixed_point:
            rejected += 1
        witness = proof_witness_configuration(g, theta, n_walkers, margin=margin / 2)
        if witness is not None:
            x, i = witness
            residual = abs(krw_rhs(theta, x, g, params)[i])
            ok = residual > FIXED_POINT_TOL
            witness_ok = ok if witness_ok is None else (witness_ok and ok)

    agreement = all_fixed and rejected == n_probes
    return EquilibriaSweep(
        candidates, reports, all_fixed, rejected, n_probes, witness_ok, agreement
    )


def check_equilibria_drc(
    g: SkeletonGraph,
    seed: RngSeed = RngSeed(0),
    n_probes: int = 50,
    coupling: float = 1.0,
    margin: float = 0.1,
    max_configs: int = 2**22,
) -> EquilibriaSweep:
    """Single-edge reduction against exhaustive subset enumeration."""
    candidates = enumerate_candidate_equilibria(g.n)
    reports = []
    agreement = True
    for c in candidates:
        fast = verify_fixed_point_drc(c, g, coupling=coupling)
        full = verify_fixed_point_drc(
            c, g, coupling=coupling, exhaustive=True, max_configs=max_configs
        )
        agreement &= fast.is_fixed_point == full.is_fixed_point
        reports.append((fast, full))
    all_fixed = all(fast.is_fixed_point for fast, _ in reports)

    rng = seed.generator()
    rejected = 0
    for _ in range(n_probes):
        theta = _probe_vector(rng, g.n, margin)
        fast = verify_fixed_point_drc(theta, g, coupling=coupling)
        full = verify_fixed_point_drc(
            theta, g, coupling=coupling, exhaustive=True, max_configs=max_configs
        )
        agreement &= fast.is_fixed_point == full.is_fixed_point
        if not fast.is_fixed_point:
            rejected += 1

    agreement = agreement and all_fixed and rejected == n_probes
    return EquilibriaSweep(candidates, reports, all_fixed, rejected, n_probes, None, agreement)


def _probe_vector(rng: np.random.Generator, n: int, margin: float) -> np.ndarray:
    """Random phases with at least one gap bounded away from {0, pi}."""
    for _ in range(10_000):
        theta = rng.uniform(0.0, 2.0 * np.pi, n)
        gaps = geodesic_distance(theta[:, None], theta[None, :])
        if np.any((gaps > margin) & (gaps < np.pi - margin)):
            return theta
    raise RuntimeError("could not draw a probe vector away from the antipodal set")
