"""Torus arithmetic and the right-hand sides of the three phase systems.

Phases live on the N-torus with canonical representatives in [0, 2pi);
sines and cosines are 2pi-periodic, so only spread measurement and gauge
centering need explicit lifts.  With equal natural frequencies the walker
system is the gradient flow of the interaction energy

    U(theta, x) = 1/2 * sum_{i,j} pi(x_i, x_j) (1 - cos(theta_j - theta_i)),

whose Hessian is the Laplacian of the fictitious interaction graph.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .graphs import SkeletonGraph, fictitious_weights, laplacian

TWO_PI = 2.0 * np.pi


def wrap_phases(theta) -> np.ndarray:
    """Canonical representatives in [0, 2pi)."""
    return np.mod(np.asarray(theta, dtype=float), TWO_PI)


def geodesic_distance(a, b):
    """Distance on the circle, elementwise, always in [0, pi]."""
    d = np.mod(np.abs(np.asarray(a, dtype=float) - np.asarray(b, dtype=float)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def phase_spread(theta) -> float:
    """Maximal pairwise geodesic distance; theta is gamma-cohesive iff <= gamma."""
    th = np.asarray(theta, dtype=float)
    if th.size < 2:
        return 0.0
    return float(geodesic_distance(th[:, None], th[None, :]).max())


def center_phases_batch(states) -> np.ndarray:
    """Gauge-center each row: the lift closest (l2) to a constant, mean removed.

    For every row the circle is cut at each of the N sorted positions; the
    cut of minimal variance wins, ties broken by the smaller lift mean.
    The result sums to zero per row and is a plain real vector (not
    wrapped), suitable for comparing against the all-in-phase state.
    """
    th = wrap_phases(np.atleast_2d(states))
    n_rows, n = th.shape
    if n == 1:
        return np.zeros_like(th)
    order = np.argsort(th, axis=1, kind="stable")
    srt = np.take_along_axis(th, order, axis=1)
    prefix = np.cumsum(srt, axis=1)
    total = prefix[:, -1]
    total_sq = np.sum(srt * srt, axis=1)

    best_var = np.full(n_rows, np.inf)
    best_mean = np.full(n_rows, np.inf)
    best_cut = np.zeros(n_rows, dtype=np.int64)
    for cut in range(n):
        # lifting the first `cut` sorted entries by 2pi
        shifted = prefix[:, cut - 1] if cut > 0 else np.zeros(n_rows)
        mean = (total + TWO_PI * cut) / n
        sum_sq = total_sq + cut * TWO_PI**2 + 2.0 * TWO_PI * shifted
        var = sum_sq - n * mean * mean
        better = (var < best_var) | ((var == best_var) & (mean < best_mean))
        best_var = np.where(better, var, best_var)
        best_mean = np.where(better, mean, best_mean)
        best_cut = np.where(better, cut, best_cut)

    ranks = np.argsort(order, axis=1, kind="stable")
    lift = th + TWO_PI * (ranks < best_cut[:, None])
    return lift - lift.mean(axis=1, keepdims=True)


def center_phases(theta) -> np.ndarray:
    """Single-vector convenience wrapper around :func:`center_phases_batch`."""
    return center_phases_batch(np.asarray(theta, dtype=float)[None, :])[0]


def distance_to_sync(theta) -> float:
    """l-infinity distance of the gauge-centered phases to the origin."""
    return float(np.abs(center_phases(theta)).max())


def gauge_distance(theta, phi) -> float:
    """l-infinity distance between two phase vectors modulo global rotation.

    Equals half the minimal arc enclosing the pointwise differences on the
    circle (the optimal global shift is the arc midpoint).
    """
    th = np.asarray(theta, dtype=float)
    ph = np.asarray(phi, dtype=float)
    if th.shape != ph.shape:
        raise ValueError(f"shape mismatch: {th.shape} vs {ph.shape}")
    d = np.sort(np.mod(th - ph, TWO_PI))
    gaps = np.diff(d, append=d[0] + TWO_PI)
    arc = TWO_PI - gaps.max()
    return max(arc / 2.0, 0.0)


def gauge_distances_batch(states, ref) -> np.ndarray:
    """:func:`gauge_distance` of every row of ``states`` against ``ref``."""
    st = np.atleast_2d(np.asarray(states, dtype=float))
    d = np.sort(np.mod(st - np.asarray(ref, dtype=float)[None, :], TWO_PI), axis=1)
    gaps = np.diff(d, axis=1, append=d[:, :1] + TWO_PI)
    arc = TWO_PI - gaps.max(axis=1)
    return np.maximum(arc / 2.0, 0.0)


@dataclass(frozen=True, eq=False)
class ModelParams:
    """Coupling strength, natural frequencies and population size.

    ``n`` is the number of oscillators: walkers for the walker model, |V|
    for the edge model.  ``omega`` broadcasts a scalar to all oscillators.
    """

    coupling: float
    omega: np.ndarray
    n: int

    def __post_init__(self):
        if self.coupling <= 0:
            raise ValueError(f"coupling must be positive, got {self.coupling}")
        if self.n < 1:
            raise ValueError(f"population size must be positive, got {self.n}")
        om = np.broadcast_to(np.asarray(self.omega, dtype=float), (self.n,)).copy()
        om.setflags(write=False)
        object.__setattr__(self, "omega", om)

    @classmethod
    def homogeneous(cls, n: int, coupling: float = 1.0, omega: float = 0.0) -> "ModelParams":
        return cls(coupling=coupling, omega=np.full(n, float(omega)), n=n)


def coupled_sine_sum(theta, weights) -> np.ndarray:
    """Component i of sum_j w_ij sin(theta_j - theta_i)."""
    th = np.asarray(theta, dtype=float)
    return (np.asarray(weights) * np.sin(th[None, :] - th[:, None])).sum(axis=1)


def _check_dims(theta, expected: int, what: str):
    th = np.asarray(theta, dtype=float)
    if th.shape != (expected,):
        raise ValueError(f"{what} must have shape ({expected},), got {th.shape}")
    return th


def krw_rhs(theta, x, g: SkeletonGraph, params: ModelParams) -> np.ndarray:
    """Drift of the walker model: omega_i + K/N sum_j pi(x_i,x_j) sin(theta_j - theta_i)."""
    th = _check_dims(theta, params.n, "theta")
    x = np.asarray(x, dtype=np.int64)
    if x.shape != (params.n,):
        raise ValueError(f"walker positions must have shape ({params.n},), got {x.shape}")
    sub = g.weights[np.ix_(x, x)]
    return params.omega + (params.coupling / params.n) * coupled_sine_sum(th, sub)


def drc_rhs(theta, config, g: SkeletonGraph, params: ModelParams) -> np.ndarray:
    """Drift of the edge model: omega_u + K/|V| sum over active edges."""
    if params.n != g.n:
        raise ValueError(f"params.n={params.n} must equal |V|={g.n} for the edge model")
    th = _check_dims(theta, g.n, "theta")
    active = g.edge_set().active_weights(config)
    return params.omega + (params.coupling / g.n) * coupled_sine_sum(th, active)


def averaged_rhs(theta, a_bar: float, params: ModelParams) -> np.ndarray:
    """Drift of the averaged system: all-to-all coupling at strength a_bar."""
    th = _check_dims(theta, params.n, "theta")
    return params.omega + (params.coupling / params.n) * a_bar * np.sin(
        th[None, :] - th[:, None]
    ).sum(axis=1)


def interaction_energy(theta, weights) -> float:
    """U = 1/2 sum_{i,j} w_ij (1 - cos(theta_j - theta_i)); zero iff all
    interacting pairs are in phase."""
    th = np.asarray(theta, dtype=float)
    return float(
        0.5 * np.sum(np.asarray(weights) * (1.0 - np.cos(th[None, :] - th[:, None])))
    )


def energy(theta, x, g: SkeletonGraph) -> float:
    """Interaction energy of a walker configuration."""
    x = np.asarray(x, dtype=np.int64)
    th = np.asarray(theta, dtype=float)
    if x.shape != th.shape:
        raise ValueError(f"positions {x.shape} and phases {th.shape} mismatch")
    return interaction_energy(th, g.weights[np.ix_(x, x)])


def energy_gradient(theta, x, g: SkeletonGraph) -> np.ndarray:
    """dU/dtheta_i = sum_j pi(x_i,x_j) sin(theta_i - theta_j).

    The homogeneous drift satisfies rhs = -(K/N) * gradient componentwise.
    """
    x = np.asarray(x, dtype=np.int64)
    th = np.asarray(theta, dtype=float)
    if x.shape != th.shape:
        raise ValueError(f"positions {x.shape} and phases {th.shape} mismatch")
    sub = g.weights[np.ix_(x, x)]
    return -coupled_sine_sum(th, sub)


def energy_hessian(theta, x, g: SkeletonGraph) -> np.ndarray:
    """Hessian of the energy: the Laplacian of the fictitious graph.

    Off-diagonal (i, j): -pi(x_i,x_j) cos(theta_j - theta_i); diagonal
    rows sum to zero, so the all-ones vector is always in the kernel.
    """
    return laplacian(fictitious_weights(g, x, theta))
