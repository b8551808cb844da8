"""Hot loops behind the simulator and the fixed-step integrator.

Everything here consumes pre-drawn random numbers and plain float64/int64
arrays; no randomness is generated inside kernels, so results are
bit-reproducible for a given input.  If numba is unavailable the pure
Python definitions below are used as-is (slow but identical semantics up
to float summation order).
"""

from __future__ import annotations

import numpy as np

try:
    from numba import njit

    HAVE_NUMBA = True
except ImportError:  # pragma: no cover - exercised only without numba
    HAVE_NUMBA = False

    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(fn):
            return fn

        return wrap


MODE_KRW = 0
MODE_DRC = 1
MODE_AVERAGED = 2


@njit(cache=True)
def walk_chain(start, cum_rows, uniforms):
    """Embedded-chain positions for pre-drawn uniforms.

    cum_rows[u] is the cumulative transition row of vertex u with the last
    entry pinned to 1.0.
    """
    n = uniforms.shape[0]
    out = np.empty(n, dtype=np.int64)
    pos = start
    for k in range(n):
        row = cum_rows[pos]
        u = uniforms[k]
        j = 0
        while row[j] < u:
            j += 1
        pos = j
        out[k] = pos
    return out


@njit(cache=True)
def _rebuild_coefficients(A, mode, row, skeleton, edge_us, edge_vs, a_bar):
    n = A.shape[0]
    if mode == MODE_KRW:
        for i in range(n):
            for j in range(n):
                A[i, j] = skeleton[row[i], row[j]]
    elif mode == MODE_DRC:
        for i in range(n):
            for j in range(n):
                A[i, j] = 0.0
        for e in range(edge_us.shape[0]):
            u = edge_us[e]
            v = edge_vs[e]
            if row[e] == 1:
                A[u, v] = skeleton[u, v]
                A[v, u] = skeleton[v, u]
    else:
        for i in range(n):
            for j in range(n):
                A[i, j] = a_bar


@njit(cache=True)
def integrate_piecewise_rk4(
    mode,
    skeleton,
    edge_us,
    edge_vs,
    a_bar,
    init_state,
    ev_times,
    ev_states,
    grid,
    theta0,
    k_over_n,
    omega,
    max_step,
):
    """Fixed-step RK4 along a piecewise-constant coefficient path.

    The grid must contain every event time; coefficients switch exactly at
    grid points, so no step ever straddles a switch.  Returns the phase at
    every grid point (lifted, never wrapped) and the interaction energy
    with respect to the coefficients in force right-continuously.
    """
    n = theta0.shape[0]
    n_samples = grid.shape[0]
    n_events = ev_times.shape[0]

    states = np.empty((n_samples, n))
    energy = np.empty(n_samples)
    theta = theta0.copy()
    A = np.empty((n, n))
    k1 = np.empty(n)
    k2 = np.empty(n)
    k3 = np.empty(n)
    k4 = np.empty(n)
    tmp = np.empty(n)

    _rebuild_coefficients(A, mode, init_state, skeleton, edge_us, edge_vs, a_bar)

    for i in range(n):
        states[0, i] = theta[i]
    acc = 0.0
    for i in range(n):
        for j in range(n):
            acc += A[i, j] * (1.0 - np.cos(theta[j] - theta[i]))
    energy[0] = 0.5 * acc

    ev_ptr = 0
    for s in range(n_samples - 1):
        a = grid[s]
        b = grid[s + 1]
        span = b - a
        nst = int(np.ceil(span / max_step - 1e-9))
        if nst < 1:
            nst = 1
        h = span / nst
        for _ in range(nst):
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * np.sin(theta[j] - theta[i])
                k1[i] = omega[i] + k_over_n * acc
            for i in range(n):
                tmp[i] = theta[i] + 0.5 * h * k1[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * np.sin(tmp[j] - tmp[i])
                k2[i] = omega[i] + k_over_n * acc
            for i in range(n):
                tmp[i] = theta[i] + 0.5 * h * k2[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * np.sin(tmp[j] - tmp[i])
                k3[i] = omega[i] + k_over_n * acc
            for i in range(n):
                tmp[i] = theta[i] + h * k3[i]
            for i in range(n):
                acc = 0.0
                for j in range(n):
                    acc += A[i, j] * np.sin(tmp[j] - tmp[i])
                k4[i] = omega[i] + k_over_n * acc
            for i in range(n):
                theta[i] = theta[i] + (h / 6.0) * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i])

        switched = False
        while ev_ptr < n_events and ev_times[ev_ptr] <= b:
            switched = True
            ev_ptr += 1
        if switched:
            _rebuild_coefficients(
                A, mode, ev_states[ev_ptr - 1], skeleton, edge_us, edge_vs, a_bar
            )

        for i in range(n):
            states[s + 1, i] = theta[i]
        acc = 0.0
        for i in range(n):
            for j in range(n):
                acc += A[i, j] * (1.0 - np.cos(theta[j] - theta[i]))
        energy[s + 1] = 0.5 * acc

    return states, energy
