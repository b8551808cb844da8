"""Weighted skeleton graphs and their spectral machinery.

A skeleton graph is a finite connected weighted graph: exactly symmetric
nonnegative weights ``pi(u, v)``, every vertex with positive degree
``pi(u) = sum_v pi(u, v)``.  Walkers jump with kernel ``pi(u, v) / pi(u)``,
whose unique reversible measure is ``mu(u) = pi(u) / sum_v pi(v)``; the
averaged coupling is ``a_bar = sum_{u,v} pi(u, v) mu(u) mu(v)``.

The module also builds the fictitious interaction graph of a walker
configuration (weights ``pi(x_i, x_j) cos(theta_j - theta_i)``), computes
graph Laplacians and their spectral gaps, and certifies the uniform gap
``c_tilde`` over connected walker configurations that controls the
exponential contraction of phase-cohesive trajectories.
"""

from __future__ import annotations

import itertools
from collections import deque

import numpy as np

# Eigenvalues below this are treated as zero when deciding connectivity.
SPECTRAL_NOISE_FLOOR = 1e-10


class EnumerationBudgetError(RuntimeError):
    """An exhaustive enumeration would exceed its configured cap."""


def is_connected(weights) -> bool:
    """True iff the graph with positive off-diagonal weights is connected.

    Diagonal entries (self-loops) are ignored; a graph with at most one
    vertex counts as connected.
    """
    w = np.asarray(weights)
    n = w.shape[0]
    if n <= 1:
        return True
    seen = np.zeros(n, dtype=bool)
    seen[0] = True
    queue = deque([0])
    while queue:
        u = queue.popleft()
        for v in np.nonzero(w[u] > 0)[0]:
            if v != u and not seen[v]:
                seen[v] = True
                queue.append(v)
    return bool(seen.all())


def laplacian(weights) -> np.ndarray:
    """Graph Laplacian L = D - W with D = diag(row sums).

    Self-loop weights cancel between D and W, so they never affect L.
    """
    w = np.asarray(weights, dtype=float)
    return np.diag(w.sum(axis=1)) - w


def laplacian_spectral_gap(weights) -> float:
    """Second-smallest eigenvalue of the graph Laplacian of ``weights``.

    Positive iff the positive-weight graph is connected.  Values below the
    noise floor are clamped to 0 so that near-singular spectra do not get
    mistaken for connectivity.
    """
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ValueError(f"weights must be square, got shape {w.shape}")
    if not np.array_equal(w, w.T):
        raise ValueError("weights must be symmetric")
    if w.shape[0] < 2:
        raise ValueError("spectral gap needs at least two vertices")
    evals = np.linalg.eigvalsh(laplacian(w))
    gap = float(evals[1])
    return 0.0 if gap < SPECTRAL_NOISE_FLOOR else gap


class SkeletonGraph:
    """Finite connected weighted graph, immutable after construction.

    ``weights[u, v]`` is the symmetric coupling weight between vertices
    ``u`` and ``v``; positive diagonal entries are self-loops.  Construction
    validates exact symmetry, nonnegativity, positive vertex degrees and
    connectivity.  With ``require_self_loops=True`` (walker skeletons) every
    vertex must additionally carry a self-loop.
    """

    def __init__(self, weights, require_self_loops: bool = False):
        w = np.array(weights, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise ValueError(f"weights must be a square matrix, got shape {w.shape}")
        if w.shape[0] < 1:
            raise ValueError("graph needs at least one vertex")
        if not np.all(np.isfinite(w)):
            raise ValueError("weights must be finite")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        if not np.array_equal(w, w.T):
            raise ValueError("weights must be exactly symmetric")
        degrees = w.sum(axis=1)
        if np.any(degrees <= 0):
            u = int(np.argmin(degrees))
            raise ValueError(f"vertex {u} has zero degree; every vertex needs positive weight")
        if not is_connected(w):
            raise ValueError("positive-weight graph is not connected")
        if require_self_loops and not np.all(np.diag(w) > 0):
            u = int(np.argmin(np.diag(w)))
            raise ValueError(
                f"walker skeleton requires a self-loop on every vertex; vertex {u} has none"
            )
        w.setflags(write=False)
        degrees.setflags(write=False)
        self._weights = w
        self._degrees = degrees
        self._edge_set: EdgeSet | None = None

    @property
    def n(self) -> int:
        return self._weights.shape[0]

    # alias used in a few call sites for readability
    vertex_count = n

    @property
    def weights(self) -> np.ndarray:
        return self._weights

    @property
    def has_all_self_loops(self) -> bool:
        return bool(np.all(np.diag(self._weights) > 0))

    def vertex_degree(self, u: int) -> float:
        """Weighted degree pi(u) = sum_v pi(u, v)."""
        if not 0 <= u < self.n:
            raise IndexError(f"vertex {u} out of range [0, {self.n})")
        return float(self._degrees[u])

    def degrees(self) -> np.ndarray:
        return self._degrees

    def degree_bound(self) -> float:
        """Maximal vertex degree (the uniform coefficient bound)."""
        return float(self._degrees.max())

    def stationary_measure(self) -> np.ndarray:
        """Reversible probability measure mu(u) = pi(u) / sum_v pi(v)."""
        return self._degrees / self._degrees.sum()

    def averaged_coupling(self) -> float:
        """a_bar = sum_{u,v} pi(u, v) mu(u) mu(v); lies in (0, degree_bound]."""
        mu = self.stationary_measure()
        return float(mu @ self._weights @ mu)

    def transition_matrix(self) -> np.ndarray:
        """Walker jump kernel p(u, v) = pi(u, v) / pi(u), self-loops included."""
        return self._weights / self._degrees[:, None]

    def edge_set(self) -> "EdgeSet":
        if self._edge_set is None:
            self._edge_set = EdgeSet(self)
        return self._edge_set

    def __repr__(self) -> str:
        loops = int(np.count_nonzero(np.diag(self._weights)))
        return f"SkeletonGraph(n={self.n}, edges={len(self.edge_set())}, self_loops={loops})"


class EdgeSet:
    """Deterministically ordered list of undirected positive-weight edges.

    Edges are the pairs (u, v) with u <= v and pi(u, v) > 0, sorted
    lexicographically; self-loops are included when present.  An edge
    configuration is a 0/1 vector over this ordering.
    """

    def __init__(self, graph: SkeletonGraph):
        w = graph.weights
        n = graph.n
        edges = [(u, v) for u in range(n) for v in range(u, n) if w[u, v] > 0]
        self.edges: tuple[tuple[int, int], ...] = tuple(edges)
        self._index = {e: k for k, e in enumerate(edges)}
        self._n_vertices = n
        self._us = np.array([e[0] for e in edges], dtype=np.int64)
        self._vs = np.array([e[1] for e in edges], dtype=np.int64)
        self._wts = np.array([w[e] for e in edges], dtype=float)

    def __len__(self) -> int:
        return len(self.edges)

    def __iter__(self):
        return iter(self.edges)

    def index(self, u: int, v: int) -> int:
        key = (u, v) if u <= v else (v, u)
        if key not in self._index:
            raise KeyError(f"({u}, {v}) is not an edge of the skeleton")
        return self._index[key]

    def endpoint_arrays(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """(us, vs, weights) arrays aligned with the edge ordering."""
        return self._us, self._vs, self._wts

    def all_on(self) -> np.ndarray:
        return np.ones(len(self.edges), dtype=np.uint8)

    def all_off(self) -> np.ndarray:
        return np.zeros(len(self.edges), dtype=np.uint8)

    def active_weights(self, config) -> np.ndarray:
        """Skeleton weights masked by an edge configuration (0/1 vector)."""
        cfg = np.asarray(config)
        if cfg.shape != (len(self.edges),):
            raise ValueError(f"configuration length {cfg.shape} != {len(self.edges)} edges")
        w = np.zeros((self._n_vertices, self._n_vertices))
        on = cfg.astype(bool)
        w[self._us[on], self._vs[on]] = self._wts[on]
        w[self._vs[on], self._us[on]] = self._wts[on]
        return w


def fictitious_weights(g: SkeletonGraph, x, theta) -> np.ndarray:
    """Interaction graph of a walker configuration at given phases.

    Entry (i, j) is ``pi(x_i, x_j) * cos(theta_j - theta_i)``; the matrix is
    exactly symmetric and nonnegative whenever the phase spread is below
    pi/2.  Its Laplacian equals the Hessian of the interaction energy.
    """
    x = np.asarray(x, dtype=np.int64)
    th = np.asarray(theta, dtype=float)
    if x.shape != th.shape or x.ndim != 1:
        raise ValueError(f"positions {x.shape} and phases {th.shape} must be equal-length vectors")
    if x.size and (x.min() < 0 or x.max() >= g.n):
        raise IndexError("walker position out of range")
    sub = g.weights[np.ix_(x, x)]
    w = sub * np.cos(th[None, :] - th[:, None])
    upper = np.triu(w)
    return upper + np.triu(w, 1).T


def uniform_spectral_gap(
    g: SkeletonGraph,
    n_walkers: int,
    gamma: float,
    max_configs: int = 10**6,
) -> float:
    """Certified uniform Hessian gap over the cohesive set of spread gamma.

    Enumerates every walker configuration whose fictitious graph at equal
    phases is connected, takes the minimal Laplacian gap over these, and
    multiplies by cos(gamma) (cosine factors inside the cohesive set are at
    least cos(gamma)).  Enumeration beyond ``max_configs`` raises rather
    than silently subsampling, since the value certifies a decay bound.
    """
    if not 0 < gamma < np.pi / 2:
        raise ValueError(f"gamma must lie in (0, pi/2), got {gamma}")
    if n_walkers < 2:
        raise ValueError("need at least two walkers")
    total = g.n**n_walkers
    if total > max_configs:
        raise EnumerationBudgetError(
            f"{total} walker configurations exceed the cap {max_configs}"
        )
    w = g.weights
    best = np.inf
    for x in itertools.product(range(g.n), repeat=n_walkers):
        sub = w[np.ix_(x, x)]
        if not is_connected(sub):
            continue
        gap = np.linalg.eigvalsh(laplacian(sub))[1]
        if gap < best:
            best = gap
    if not np.isfinite(best):
        raise ValueError("no connected walker configuration exists")
    return float(np.cos(gamma) * best)


# ---------------------------------------------------------------------------
# generators


def complete_graph(n: int, self_loops: bool = False) -> SkeletonGraph:
    if n < 1 or (n < 2 and not self_loops):
        raise ValueError(f"complete graph needs n >= 2 (or n >= 1 with self-loops), got {n}")
    w = np.ones((n, n))
    if not self_loops:
        np.fill_diagonal(w, 0.0)
    return SkeletonGraph(w)


def path_graph(n: int, self_loops: bool = False) -> SkeletonGraph:
    if n < 2:
        raise ValueError(f"path graph needs n >= 2, got {n}")
    w = np.zeros((n, n))
    idx = np.arange(n - 1)
    w[idx, idx + 1] = 1.0
    w[idx + 1, idx] = 1.0
    if self_loops:
        np.fill_diagonal(w, 1.0)
    return SkeletonGraph(w)


def cycle_graph(n: int, self_loops: bool = False) -> SkeletonGraph:
    if n < 3:
        raise ValueError(f"cycle graph needs n >= 3, got {n}")
    w = np.zeros((n, n))
    idx = np.arange(n)
    w[idx, (idx + 1) % n] = 1.0
    w[(idx + 1) % n, idx] = 1.0
    if self_loops:
        np.fill_diagonal(w, 1.0)
    return SkeletonGraph(w)


def wsg_graph(n: int, k: int) -> SkeletonGraph:
    """Ring of n vertices, each joined to its k nearest neighbours per side."""
    if n < 3:
        raise ValueError(f"ring needs n >= 3, got {n}")
    if not 1 <= k < n / 2:
        raise ValueError(f"need 1 <= k < n/2, got k={k}, n={n}")
    w = np.zeros((n, n))
    idx = np.arange(n)
    for d in range(1, k + 1):
        w[idx, (idx + d) % n] = 1.0
        w[(idx + d) % n, idx] = 1.0
    return SkeletonGraph(w)


def erdos_renyi_graph(
    n: int,
    p: float,
    seed: int,
    self_loops: bool = False,
    max_attempts: int = 200,
) -> SkeletonGraph:
    """Connected G(n, p) sample; resamples until connected with positive degrees."""
    if n < 2:
        raise ValueError(f"need n >= 2, got {n}")
    if not 0 < p <= 1:
        raise ValueError(f"need p in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    for _ in range(max_attempts):
        upper = np.triu(rng.random((n, n)) < p, k=1)
        w = (upper | upper.T).astype(float)
        if self_loops:
            np.fill_diagonal(w, 1.0)
        if np.all(w.sum(axis=1) > 0) and is_connected(w):
            return SkeletonGraph(w)
    raise ValueError(
        f"no connected sample of G({n}, {p}) within {max_attempts} attempts; increase p"
    )


def triangle_graph(self_loops: bool = True) -> SkeletonGraph:
    """Complete graph on three vertices; self-loops on by default."""
    return complete_graph(3, self_loops=self_loops)


GENERATORS = {
    "complete": complete_graph,
    "path": path_graph,
    "cycle": cycle_graph,
    "wsg": wsg_graph,
    "erdos_renyi": erdos_renyi_graph,
    "triangle": triangle_graph,
}


def build_graph(generator: str, **params) -> SkeletonGraph:
    if generator not in GENERATORS:
        known = ", ".join(sorted(GENERATORS))
        raise ValueError(f"unknown graph generator '{generator}' (known: {known})")
    return GENERATORS[generator](**params)


# ---------------------------------------------------------------------------
# graph description files: `vertices = n` plus `u v weight` edge lines


def graph_to_text(g: SkeletonGraph) -> str:
    lines = ["# kuradyn graph", f"vertices = {g.n}"]
    for u, v in g.edge_set():
        lines.append(f"{u} {v} {float(g.weights[u, v])!r}")
    return "\n".join(lines) + "\n"


def parse_graph_text(text: str) -> SkeletonGraph:
    n = None
    entries = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" in line:
            key, _, value = line.partition("=")
            if key.strip() != "vertices":
                raise ValueError(f"line {lineno}: unknown key {key.strip()!r}")
            n = int(value.strip())
            continue
        parts = line.split()
        if len(parts) != 3:
            raise ValueError(f"line {lineno}: expected 'u v weight', got {raw!r}")
        entries.append((int(parts[0]), int(parts[1]), float(parts[2])))
    if n is None:
        raise ValueError("missing 'vertices = <n>' line")
    w = np.zeros((n, n))
    for u, v, wt in entries:
        if not (0 <= u < n and 0 <= v < n):
            raise ValueError(f"edge ({u}, {v}) out of range for {n} vertices")
        w[u, v] = wt
        w[v, u] = wt
    return SkeletonGraph(w)


def write_graph_file(g: SkeletonGraph, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(graph_to_text(g))


def read_graph_file(path) -> SkeletonGraph:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_graph_text(fh.read())
