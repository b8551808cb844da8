"""Deterministic phase integration along a frozen jump trajectory.

Between jump events the coefficients are constant, so the phase ODE is
advanced as a sequence of autonomous problems whose steps never cross an
event time: the sample grid is the union of a regular grid, every event
time, and both endpoints, and each inter-sample interval is subdivided by
``max_step``.  Phases are advanced as lifted reals (never wrapped), which
keeps the conserved phase sum visible to diagnostics.

The default method is fixed-step classical RK4 (predictable cost, exactly
reproducible); an embedded Fehlberg 4(5) pair with absolute tolerance is
available via ``method="rkf45"``.  When numba is importable the RK4 path
runs in a compiled kernel; the pure Python driver is the reference
implementation and the two agree to rounding.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import _kernels
from .dynamics import (
    ModelParams,
    center_phases_batch,
    coupled_sine_sum,
    geodesic_distance,
    interaction_energy,
)
from .graphs import SkeletonGraph
from .jumps import JumpTrajectory, RngSeed, simulate_walkers

_DIAG_CHUNK = 4_000_000  # floats per diagnostics chunk


class StepSizeUnderflowError(RuntimeError):
    """Adaptive step control shrank below representable resolution."""

    def __init__(self, time: float):
        super().__init__(f"adaptive step size underflow at t={time!r}")
        self.time = time


def default_max_step(epsilon: float) -> float:
    """Default RK4 step: 1e-2 capped by epsilon/10 when switching is fast."""
    return min(1e-2, epsilon / 10.0)


@dataclass(frozen=True)
class IntegratorConfig:
    max_step: float = 1e-2
    sample_interval: float = 0.1
    method: str = "rk4"  # "rk4" | "rkf45"
    tolerance: float = 1e-9  # absolute, rkf45 only

    def __post_init__(self):
        if self.max_step <= 0:
            raise ValueError(f"max_step must be positive, got {self.max_step}")
        if self.sample_interval < self.max_step:
            raise ValueError(
                f"sample_interval {self.sample_interval} must be >= max_step {self.max_step}"
            )
        if self.method not in ("rk4", "rkf45"):
            raise ValueError(f"unknown method {self.method!r}")
        if self.tolerance <= 0:
            raise ValueError(f"tolerance must be positive, got {self.tolerance}")


@dataclass
class SampledPath:
    """Time-stamped phase trajectory with per-sample diagnostics.

    ``states`` carries lifted (unwrapped) phases; sample times always
    include 0, the horizon, and every jump-event time, so occupation-
    weighted quantities are exact on the grid.
    """

    times: np.ndarray
    states: np.ndarray
    spread: np.ndarray
    energy: np.ndarray
    phase_sum: np.ndarray
    dist_sync: np.ndarray
    meta: dict = field(default_factory=dict)

    @property
    def horizon(self) -> float:
        return float(self.times[-1])

    @property
    def n_oscillators(self) -> int:
        return self.states.shape[1]

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _sample_grid(horizon: float, interval: float, event_times: np.ndarray) -> np.ndarray:
    base = np.arange(0.0, horizon, interval)
    grid = np.union1d(np.union1d(base, event_times), np.array([0.0, horizon]))
    return grid


def _validate_grid(grid: np.ndarray, horizon: float, event_times: np.ndarray) -> np.ndarray:
    grid = np.asarray(grid, dtype=float)
    if grid.ndim != 1 or grid.size < 1:
        raise ValueError("sample grid must be a nonempty 1-D array")
    if grid[0] != 0.0 or grid[-1] != horizon:
        raise ValueError("sample grid must start at 0 and end at the horizon")
    if np.any(np.diff(grid) <= 0):
        raise ValueError("sample grid must be strictly increasing")
    if event_times.size:
        pos = np.searchsorted(grid, event_times)
        if np.any(pos >= grid.size) or np.any(grid[pos] != event_times):
            raise ValueError("sample grid must contain every event time")
    return grid


def _coeff_matrix(mode, row, skeleton, edge_us, edge_vs, a_bar, n) -> np.ndarray:
    if mode == _kernels.MODE_KRW:
        return skeleton[np.ix_(row, row)]
    if mode == _kernels.MODE_DRC:
        w = np.zeros((n, n))
        on = row.astype(bool)
        w[edge_us[on], edge_vs[on]] = skeleton[edge_us[on], edge_vs[on]]
        w[edge_vs[on], edge_us[on]] = skeleton[edge_vs[on], edge_us[on]]
        return w
    return np.full((n, n), a_bar)


_RKF45_A = (
    (),
    (1 / 4,),
    (3 / 32, 9 / 32),
    (1932 / 2197, -7200 / 2197, 7296 / 2197),
    (439 / 216, -8.0, 3680 / 513, -845 / 4104),
    (-8 / 27, 2.0, -3544 / 2565, 1859 / 4104, -11 / 40),
)
_RKF45_B5 = (16 / 135, 0.0, 6656 / 12825, 28561 / 56430, -9 / 50, 2 / 55)
_RKF45_B4 = (25 / 216, 0.0, 1408 / 2565, 2197 / 4104, -1 / 5, 0.0)


def _advance_rk4(rhs, theta, span, max_step):
    n_steps = max(1, int(np.ceil(span / max_step - 1e-9)))
    h = span / n_steps
    for _ in range(n_steps):
        k1 = rhs(theta)
        k2 = rhs(theta + 0.5 * h * k1)
        k3 = rhs(theta + 0.5 * h * k2)
        k4 = rhs(theta + h * k3)
        theta = theta + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return theta


def _advance_rkf45(rhs, theta, t0, t1, max_step, tol):
    t = t0
    h = min(max_step, t1 - t0)
    while True:
        span = t1 - t
        if span <= 1e-14 * max(1.0, abs(t1)):
            break
        step = min(h, span)
        hits_boundary = step >= span * (1.0 - 1e-12)
        if step < 1e-13 * max(1.0, abs(t)):
            raise StepSizeUnderflowError(float(t))
        ks = []
        for stage in range(6):
            y = theta
            for coeff, k in zip(_RKF45_A[stage], ks):
                y = y + step * coeff * k
            ks.append(rhs(y))
        y5 = theta + step * sum(b * k for b, k in zip(_RKF45_B5, ks))
        y4 = theta + step * sum(b * k for b, k in zip(_RKF45_B4, ks))
        err = float(np.abs(y5 - y4).max())
        if err <= tol:
            theta = y5
            t = t1 if hits_boundary else t + step
        factor = 0.9 * (tol / max(err, 1e-300)) ** 0.2
        h = min(max_step, step * min(5.0, max(0.2, factor)))
    return theta


def _drive_python(mode, skeleton, edge_us, edge_vs, a_bar, init_state, ev_times, ev_states,
                  grid, theta0, k_over_n, omega, cfg):
    n = theta0.size
    n_samples = grid.size
    states = np.empty((n_samples, n))
    energy = np.empty(n_samples)
    theta = theta0.copy()
    A = _coeff_matrix(mode, init_state, skeleton, edge_us, edge_vs, a_bar, n)

    def rhs(th):
        return omega + k_over_n * coupled_sine_sum(th, A)

    states[0] = theta
    energy[0] = interaction_energy(theta, A)
    ev_ptr = 0
    for s in range(n_samples - 1):
        a, b = grid[s], grid[s + 1]
        if cfg.method == "rk4":
            theta = _advance_rk4(rhs, theta, b - a, cfg.max_step)
        else:
            theta = _advance_rkf45(rhs, theta, a, b, cfg.max_step, cfg.tolerance)
        switched = False
        while ev_ptr < ev_times.size and ev_times[ev_ptr] <= b:
            switched = True
            ev_ptr += 1
        if switched:
            A = _coeff_matrix(
                mode, ev_states[ev_ptr - 1], skeleton, edge_us, edge_vs, a_bar, n
            )
        states[s + 1] = theta
        energy[s + 1] = interaction_energy(theta, A)
    return states, energy


def _run_engine(mode, skeleton, edge_us, edge_vs, a_bar, init_state, ev_times, ev_states,
                grid, theta0, k_over_n, omega, cfg, use_kernel=True):
    if cfg.method == "rk4" and _kernels.HAVE_NUMBA and use_kernel:
        return _kernels.integrate_piecewise_rk4(
            mode,
            np.ascontiguousarray(skeleton, dtype=float),
            np.ascontiguousarray(edge_us, dtype=np.int64),
            np.ascontiguousarray(edge_vs, dtype=np.int64),
            float(a_bar),
            np.ascontiguousarray(init_state, dtype=np.int64),
            np.ascontiguousarray(ev_times, dtype=float),
            np.ascontiguousarray(ev_states, dtype=np.int64),
            np.ascontiguousarray(grid, dtype=float),
            np.ascontiguousarray(theta0, dtype=float),
            float(k_over_n),
            np.ascontiguousarray(omega, dtype=float),
            float(cfg.max_step),
        )
    return _drive_python(mode, skeleton, edge_us, edge_vs, a_bar, init_state, ev_times,
                         ev_states, grid, theta0, k_over_n, omega, cfg)


def _diagnostics(times, states, energy, meta) -> SampledPath:
    n_samples, n = states.shape
    spread = np.empty(n_samples)
    dist_sync = np.empty(n_samples)
    chunk = max(1, _DIAG_CHUNK // max(1, n * n))
    for lo in range(0, n_samples, chunk):
        hi = min(lo + chunk, n_samples)
        block = states[lo:hi]
        gd = geodesic_distance(block[:, :, None], block[:, None, :])
        spread[lo:hi] = gd.max(axis=(1, 2))
        dist_sync[lo:hi] = np.abs(center_phases_batch(block)).max(axis=1)
    phase_sum = states.sum(axis=1)
    return SampledPath(times, states, spread, energy, phase_sum, dist_sync, meta)


def _prepare(theta0, params, cfg, epsilon_hint):
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (params.n,):
        raise ValueError(f"theta0 must have shape ({params.n},), got {theta0.shape}")
    if cfg is None:
        cfg = IntegratorConfig(max_step=default_max_step(epsilon_hint))
    return theta0, cfg


def integrate_krw(
    g: SkeletonGraph,
    traj: JumpTrajectory,
    theta0,
    params: ModelParams,
    cfg: IntegratorConfig | None = None,
    extra_sample_times=None,
    sample_times=None,
    use_kernel: bool = True,
) -> SampledPath:
    """Integrate the walker model along a frozen walker trajectory."""
    if traj.kind != "walkers":
        raise ValueError(f"expected a walker trajectory, got kind={traj.kind!r}")
    if traj.n_components != params.n:
        raise ValueError(f"trajectory has {traj.n_components} walkers, params.n={params.n}")
    theta0, cfg = _prepare(theta0, params, cfg, traj.meta.get("epsilon", 1.0))
    grid = _build_grid(traj, cfg, extra_sample_times, sample_times)
    states, energy = _run_engine(
        _kernels.MODE_KRW, g.weights, np.empty(0, np.int64), np.empty(0, np.int64), 0.0,
        traj.initial_state, traj.times, traj.states, grid, theta0,
        params.coupling / params.n, params.omega, cfg, use_kernel,
    )
    meta = {"model": "krw", "coupling": params.coupling, "cfg": cfg, **traj.meta}
    return _diagnostics(grid, states, energy, meta)


def integrate_drc(
    g: SkeletonGraph,
    traj: JumpTrajectory,
    theta0,
    params: ModelParams,
    cfg: IntegratorConfig | None = None,
    extra_sample_times=None,
    sample_times=None,
    use_kernel: bool = True,
) -> SampledPath:
    """Integrate the edge model along a frozen edge trajectory."""
    if traj.kind != "edges":
        raise ValueError(f"expected an edge trajectory, got kind={traj.kind!r}")
    if params.n != g.n:
        raise ValueError(f"params.n={params.n} must equal |V|={g.n}")
    edge_set = g.edge_set()
    if traj.n_components != len(edge_set):
        raise ValueError(
            f"trajectory has {traj.n_components} edges, skeleton has {len(edge_set)}"
        )
    theta0, cfg = _prepare(theta0, params, cfg, traj.meta.get("epsilon", 1.0))
    grid = _build_grid(traj, cfg, extra_sample_times, sample_times)
    us, vs, _ = edge_set.endpoint_arrays()
    states, energy = _run_engine(
        _kernels.MODE_DRC, g.weights, us, vs, 0.0,
        traj.initial_state, traj.times, traj.states, grid, theta0,
        params.coupling / g.n, params.omega, cfg, use_kernel,
    )
    meta = {"model": "drc", "coupling": params.coupling, "cfg": cfg, **traj.meta}
    return _diagnostics(grid, states, energy, meta)


def integrate_averaged(
    a_bar: float,
    theta0,
    params: ModelParams,
    cfg: IntegratorConfig | None = None,
    horizon: float = 0.0,
    extra_sample_times=None,
    sample_times=None,
    use_kernel: bool = True,
) -> SampledPath:
    """Integrate the averaged all-to-all system on [0, horizon]."""
    if a_bar <= 0:
        raise ValueError(f"a_bar must be positive, got {a_bar}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    theta0 = np.asarray(theta0, dtype=float)
    if theta0.shape != (params.n,):
        raise ValueError(f"theta0 must have shape ({params.n},), got {theta0.shape}")
    if cfg is None:
        cfg = IntegratorConfig()
    no_events = np.empty(0)
    if sample_times is not None:
        grid = _validate_grid(sample_times, horizon, no_events)
    else:
        grid = _sample_grid(horizon, cfg.sample_interval, no_events)
        if extra_sample_times is not None:
            grid = np.union1d(grid, np.asarray(extra_sample_times, dtype=float))
            grid = _validate_grid(grid, horizon, no_events)
    states, energy = _run_engine(
        _kernels.MODE_AVERAGED, np.zeros((1, 1)), np.empty(0, np.int64),
        np.empty(0, np.int64), a_bar, np.empty(0, np.int64), no_events,
        np.empty((0, 0), np.int64), grid, theta0,
        params.coupling / params.n, params.omega, cfg, use_kernel,
    )
    meta = {"model": "averaged", "a_bar": a_bar, "coupling": params.coupling, "cfg": cfg}
    return _diagnostics(grid, states, energy, meta)


def _build_grid(traj, cfg, extra_sample_times, sample_times):
    if sample_times is not None:
        return _validate_grid(sample_times, traj.horizon, traj.times)
    grid = _sample_grid(traj.horizon, cfg.sample_interval, traj.times)
    if extra_sample_times is not None:
        grid = np.union1d(grid, np.asarray(extra_sample_times, dtype=float))
        grid = _validate_grid(grid, traj.horizon, traj.times)
    return grid


def sup_deviation(path_a: SampledPath, path_b: SampledPath) -> float:
    """Sup over samples of the gauge-fixed per-coordinate geodesic distance.

    Both paths are centered before comparison, so globally rotated copies
    of the same trajectory are at distance zero.  Requires identical
    sample grids.
    """
    if not np.array_equal(path_a.times, path_b.times):
        raise ValueError("sample grids differ; integrate with a shared grid")
    ca = center_phases_batch(path_a.states)
    cb = center_phases_batch(path_b.states)
    return float(geodesic_distance(ca, cb).max())


def time_change_check(
    g: SkeletonGraph,
    n_walkers: int,
    params: ModelParams,
    epsilon: float,
    theta0,
    horizon: float,
    seed: RngSeed,
    cfg: IntegratorConfig | None = None,
    x0=None,
) -> float:
    """Residual of the exact time-change identity between speed parameters.

    One rate-1 walker path is integrated twice: once compressed in time by
    epsilon under the original coupling, once at rate 1 with coupling and
    frequencies scaled by epsilon.  The two solutions coincide up to
    integrator rounding; the sup geodesic distance over aligned samples is
    returned.
    """
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if x0 is None:
        rng = seed.with_stream(seed.stream + 1).generator()
        x0 = rng.choice(g.n, size=n_walkers, p=g.stationary_measure())
    base = simulate_walkers(g, n_walkers, 1.0, x0, horizon, seed)
    if cfg is None:
        cfg = IntegratorConfig()

    scaled_params = ModelParams(
        coupling=epsilon * params.coupling, omega=epsilon * params.omega, n=params.n
    )
    path_slow = integrate_krw(g, base, theta0, scaled_params, cfg)

    compressed_times = epsilon * base.times
    for k in range(1, compressed_times.size):  # ulp ties after scaling, if any
        if compressed_times[k] <= compressed_times[k - 1]:
            compressed_times[k] = np.nextafter(compressed_times[k - 1], np.inf)
    compressed = JumpTrajectory(
        "walkers", base.initial_state, compressed_times, base.states,
        epsilon * horizon, {**base.meta, "epsilon": epsilon},
    )
    cfg_fast = replace(
        cfg,
        max_step=epsilon * cfg.max_step,
        sample_interval=epsilon * cfg.sample_interval,
    )
    path_fast = integrate_krw(
        g, compressed, theta0, params, cfg_fast, sample_times=epsilon * path_slow.times
    )
    return float(geodesic_distance(path_fast.states, path_slow.states).max())


def path_to_csv(path: SampledPath, fh) -> None:
    """CSV dump: t, theta_0..theta_{n-1}, spread, energy, sum, dist_sync."""
    own = isinstance(fh, (str, bytes))
    out = open(fh, "w", encoding="utf-8") if own else fh
    try:
        n = path.n_oscillators
        cols = ["t"] + [f"theta_{i}" for i in range(n)] + [
            "spread", "energy", "sum", "dist_sync"]
        out.write(",".join(cols) + "\n")
        table = np.column_stack(
            [path.times, path.states, path.spread, path.energy, path.phase_sum,
             path.dist_sync]
        )
        np.savetxt(out, table, delimiter=",", fmt="%.17g")
    finally:
        if own:
            out.close()
