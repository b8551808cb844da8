"""Exact simulation of the two graph-valued Markov chains.

Walkers: N independent continuous-time random walks, each holding for an
Exp(1/epsilon) time and then jumping from u to v with probability
``pi(u, v) / pi(u)`` (self-loops included as destinations).  Edges: every
skeleton edge carries an independent two-state chain, switching on -> off
at rate 1/epsilon and off -> on at rate kappa.

Sample paths are piecewise constant and stored columnar (event times plus
full state rows).  All randomness comes from Philox counter-based
generators keyed by (seed, stream); identical keys reproduce bit-identical
trajectories.  Kernel-level loops are delegated to :mod:`kuradyn._kernels`.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .graphs import SkeletonGraph

_TIES_NUDGED = "times nudged by one ulp to restore strict increase"


@dataclass(frozen=True)
class RngSeed:
    """Reproducible generator key: 64-bit seed plus a stream id.

    Streams partition one experiment's randomness (walkers, edges, initial
    data, trials); the generator is Philox 4x64 keyed through a seed
    sequence spawned at the stream id.
    """

    seed: int
    stream: int = 0

    def __post_init__(self):
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError(f"seed must be a 64-bit unsigned integer, got {self.seed}")
        if int(self.stream) < 0:
            raise ValueError(f"stream must be nonnegative, got {self.stream}")

    def generator(self) -> np.random.Generator:
        seq = np.random.SeedSequence(int(self.seed), spawn_key=(int(self.stream),))
        return np.random.Generator(np.random.Philox(seq))

    def with_stream(self, stream: int) -> "RngSeed":
        return RngSeed(self.seed, stream)


@dataclass
class JumpTrajectory:
    """Piecewise-constant sample path of a graph-valued chain.

    ``states[k]`` is the state right-continuously in force from
    ``times[k]`` until the next event; ``initial_state`` covers
    ``[0, times[0])``.  Event times are strictly increasing in
    ``(0, horizon]``.
    """

    kind: str  # "walkers" | "edges"
    initial_state: np.ndarray
    times: np.ndarray
    states: np.ndarray
    horizon: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.initial_state = np.asarray(self.initial_state, dtype=np.int64)
        self.times = np.asarray(self.times, dtype=float)
        self.states = np.asarray(self.states, dtype=np.int64)
        if self.kind not in ("walkers", "edges"):
            raise ValueError(f"unknown trajectory kind {self.kind!r}")
        if self.horizon < 0:
            raise ValueError("horizon must be nonnegative")
        if self.times.ndim != 1 or self.states.shape != (self.times.size, self.initial_state.size):
            raise ValueError("times and states have inconsistent shapes")
        if self.times.size:
            if self.times[0] <= 0 or self.times[-1] > self.horizon:
                raise ValueError("event times must lie in (0, horizon]")
            if np.any(np.diff(self.times) <= 0):
                raise ValueError("event times must be strictly increasing")

    @property
    def n_events(self) -> int:
        return self.times.size

    @property
    def n_components(self) -> int:
        return self.initial_state.size

    def state_at(self, t: float) -> np.ndarray:
        """State in force at time t (right-continuous at events)."""
        if not 0 <= t <= self.horizon:
            raise ValueError(f"t={t} outside [0, {self.horizon}]")
        k = int(np.searchsorted(self.times, t, side="right"))
        return self.initial_state if k == 0 else self.states[k - 1]

    def segments(self):
        """Yield (t_start, t_end, state) triples covering [0, horizon]."""
        t_prev = 0.0
        state = self.initial_state
        for k in range(self.times.size):
            t = self.times[k]
            if t > t_prev:
                yield t_prev, t, state
            state = self.states[k]
            t_prev = t
        if self.horizon > t_prev or self.times.size == 0:
            yield t_prev, self.horizon, state

    def occupation_time(self, predicate, up_to: float | None = None) -> float:
        """Lebesgue measure of {t <= up_to : predicate(state_at(t))}.

        Computed exactly from the piecewise-constant structure; predicate
        results are cached per distinct state, so long paths over small
        state spaces stay cheap.
        """
        limit = self.horizon if up_to is None else float(up_to)
        if not 0 <= limit <= self.horizon:
            raise ValueError(f"up_to={up_to} outside [0, {self.horizon}]")
        cache: dict[bytes, bool] = {}
        total = 0.0
        for t0, t1, state in self.segments():
            if t0 >= limit:
                break
            key = state.tobytes()
            hit = cache.get(key)
            if hit is None:
                hit = bool(predicate(state))
                cache[key] = hit
            if hit:
                total += min(t1, limit) - t0
        return total


def single_change_violations(traj: JumpTrajectory) -> int:
    """Count consecutive state pairs differing in != 1 component."""
    if traj.n_events == 0:
        return 0
    prev = np.vstack([traj.initial_state, traj.states[:-1]])
    changed = np.count_nonzero(prev != traj.states, axis=1)
    return int(np.count_nonzero(changed != 1))


def _exponential_arrivals(rng: np.random.Generator, rate: float, horizon: float) -> np.ndarray:
    """Arrival times of a rate-`rate` Poisson process on (0, horizon]."""
    if horizon == 0:
        return np.empty(0)
    mean = rate * horizon
    block = max(16, int(mean + 6.0 * np.sqrt(mean) + 16))
    gaps = rng.exponential(1.0 / rate, size=block)
    times = np.cumsum(gaps)
    while times[-1] <= horizon:
        gaps = rng.exponential(1.0 / rate, size=block)
        times = np.concatenate([times, times[-1] + np.cumsum(gaps)])
    return times[times <= horizon]


def simulate_walkers(
    g: SkeletonGraph,
    n_walkers: int,
    epsilon: float,
    x0,
    horizon: float,
    seed: RngSeed,
    compact: bool = True,
    require_self_loops: bool = True,
) -> JumpTrajectory:
    """Simulate N independent rate-1/epsilon walkers on the skeleton.

    Each walker jumps to v with probability pi(u, v)/pi(u).  Oscillator
    skeletons must carry self-loops on every vertex so co-located walkers
    interact (the default check); pass ``require_self_loops=False`` to
    sample a plain walk on a loop-free graph.  With ``compact=True``
    (default) self-loop jumps are dropped from the event list; occupation
    statistics are unaffected.  ``compact=False`` keeps them, exposing the
    raw Exp(1/epsilon) jump clock.
    """
    if require_self_loops and not g.has_all_self_loops:
        raise ValueError("walker skeleton must have a self-loop on every vertex")
    if epsilon <= 0:
        raise ValueError(f"epsilon must be positive, got {epsilon}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    x0 = np.asarray(x0, dtype=np.int64)
    if x0.shape != (n_walkers,):
        raise ValueError(f"x0 must have shape ({n_walkers},), got {x0.shape}")
    if x0.size and (x0.min() < 0 or x0.max() >= g.n):
        raise IndexError("initial walker position out of range")

    meta = {
        "model": "krw",
        "epsilon": epsilon,
        "n_walkers": n_walkers,
        "seed": seed.seed,
        "stream": seed.stream,
        "compact": compact,
    }
    rng = seed.generator()
    cum = np.cumsum(g.transition_matrix(), axis=1)
    cum[:, -1] = 1.0  # guard against rounding in the last column

    all_times = []
    all_dests = []
    all_ids = []
    for i in range(n_walkers):
        jt = _exponential_arrivals(rng, 1.0 / epsilon, horizon)
        dests = _kernels.walk_chain(int(x0[i]), cum, rng.random(jt.size))
        if compact and jt.size:
            prev = np.concatenate([[x0[i]], dests[:-1]])
            keep = dests != prev
            jt, dests = jt[keep], dests[keep]
        all_times.append(jt)
        all_dests.append(dests)
        all_ids.append(np.full(jt.size, i, dtype=np.int64))

    times = np.concatenate(all_times)
    dests = np.concatenate(all_dests)
    ids = np.concatenate(all_ids)
    order = np.argsort(times, kind="stable")
    times, dests, ids = times[order], dests[order], ids[order]

    # distinct walkers can collide in float time; nudge ties up by one ulp
    ties = np.nonzero(np.diff(times) <= 0)[0]
    if ties.size:
        for k in range(times.size - 1):
            if times[k + 1] <= times[k]:
                times[k + 1] = np.nextafter(times[k], np.inf)
        keep = times <= horizon
        times, dests, ids = times[keep], dests[keep], ids[keep]
        meta["note"] = _TIES_NUDGED

    m = times.size
    states = np.empty((m, n_walkers), dtype=np.int64)
    row_idx = np.arange(m)
    for i in range(n_walkers):
        mask = ids == i
        last = np.where(mask, row_idx, -1)
        np.maximum.accumulate(last, out=last)
        states[:, i] = np.where(last >= 0, dests[np.maximum(last, 0)], x0[i])

    traj = JumpTrajectory("walkers", x0, times, states, float(horizon), meta)
    if compact:
        assert single_change_violations(traj) == 0
    return traj


def simulate_edges(
    g: SkeletonGraph,
    epsilon: float,
    kappa: float,
    e0,
    horizon: float,
    seed: RngSeed,
) -> JumpTrajectory:
    """Simulate the independent on/off chains of every skeleton edge.

    Each edge flips 1 -> 0 at rate 1/epsilon and 0 -> 1 at rate kappa;
    ``e0=None`` starts from the full skeleton (all edges on).
    """
    if epsilon <= 0 or kappa <= 0:
        raise ValueError(f"epsilon and kappa must be positive, got {epsilon}, {kappa}")
    if horizon < 0:
        raise ValueError("horizon must be nonnegative")
    edge_set = g.edge_set()
    n_edges = len(edge_set)
    if e0 is None:
        config = edge_set.all_on().astype(np.int64)
    else:
        config = np.asarray(e0, dtype=np.int64)
        if config.shape != (n_edges,):
            raise ValueError(f"e0 must have shape ({n_edges},), got {config.shape}")
        if np.any((config != 0) & (config != 1)):
            raise ValueError("e0 entries must be 0 or 1")

    meta = {
        "model": "drc",
        "epsilon": epsilon,
        "kappa": kappa,
        "seed": seed.seed,
        "stream": seed.stream,
    }
    rng = seed.generator()
    off_rate = 1.0 / epsilon
    initial = config.copy()

    times = []
    flipped = []
    t = 0.0
    state = config.copy()
    while True:
        rates = np.where(state == 1, off_rate, kappa)
        total = rates.sum()
        t += rng.exponential(1.0 / total)
        if t > horizon:
            break
        u = rng.random() * total
        e = int(np.searchsorted(np.cumsum(rates), u, side="right"))
        e = min(e, n_edges - 1)
        state[e] ^= 1
        times.append(t)
        flipped.append(state.copy())

    times_arr = np.asarray(times, dtype=float)
    states_arr = (
        np.asarray(flipped, dtype=np.int64)
        if flipped
        else np.empty((0, n_edges), dtype=np.int64)
    )
    return JumpTrajectory("edges", initial, times_arr, states_arr, float(horizon), meta)


# ---------------------------------------------------------------------------
# text dump: header lines, then one `time index new_value` line per event


def dump_trajectory(traj: JumpTrajectory, fh) -> None:
    """Write a trajectory as text; floats use repr so round-trips are exact."""
    own = isinstance(fh, (str, bytes))
    out = open(fh, "w", encoding="utf-8") if own else fh
    try:
        out.write("format kuradyn-trajectory-1\n")
        out.write(f"kind {traj.kind}\n")
        out.write(f"horizon {float(traj.horizon)!r}\n")
        out.write(f"components {traj.n_components}\n")
        out.write("initial " + " ".join(str(v) for v in traj.initial_state) + "\n")
        for key in sorted(traj.meta):
            out.write(f"meta {key} {traj.meta[key]!r}\n")
        out.write(f"events {traj.n_events}\n")
        prev = traj.initial_state
        for k in range(traj.n_events):
            row = traj.states[k]
            changed = np.nonzero(row != prev)[0]
            if changed.size != 1:
                raise ValueError(
                    f"event {k} changes {changed.size} components; dump needs single-change paths"
                )
            idx = int(changed[0])
            out.write(f"{float(traj.times[k])!r} {idx} {int(row[idx])}\n")
            prev = row
    finally:
        if own:
            out.close()


def dumps_trajectory(traj: JumpTrajectory) -> str:
    buf = io.StringIO()
    dump_trajectory(traj, buf)
    return buf.getvalue()


def load_trajectory(fh) -> JumpTrajectory:
    own = isinstance(fh, (str, bytes))
    inp = open(fh, "r", encoding="utf-8") if own else fh
    try:
        text = inp.read()
    finally:
        if own:
            inp.close()
    return loads_trajectory(text)


def loads_trajectory(text: str) -> JumpTrajectory:
    import ast

    lines = iter(text.splitlines())
    header: dict[str, str] = {}
    meta: dict = {}
    n_events = None
    for line in lines:
        if not line.strip():
            continue
        key, _, rest = line.partition(" ")
        if key == "meta":
            mkey, _, mval = rest.partition(" ")
            meta[mkey] = ast.literal_eval(mval)
        elif key == "events":
            n_events = int(rest)
            break
        else:
            header[key] = rest
    if header.get("format") != "kuradyn-trajectory-1":
        raise ValueError("not a kuradyn trajectory dump")
    if n_events is None:
        raise ValueError("missing 'events' line")
    kind = header["kind"]
    horizon = float(header["horizon"])
    n_comp = int(header["components"])
    initial = np.array([int(v) for v in header["initial"].split()], dtype=np.int64)
    if initial.size != n_comp:
        raise ValueError("initial state length does not match component count")

    times = np.empty(n_events)
    states = np.empty((n_events, n_comp), dtype=np.int64)
    current = initial.copy()
    k = 0
    for line in lines:
        if not line.strip():
            continue
        t_str, idx_str, val_str = line.split()
        current[int(idx_str)] = int(val_str)
        times[k] = float(t_str)
        states[k] = current
        k += 1
    if k != n_events:
        raise ValueError(f"expected {n_events} events, found {k}")
    return JumpTrajectory(kind, initial, times, states, horizon, meta)
