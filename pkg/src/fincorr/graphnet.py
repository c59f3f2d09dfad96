"""Threshold correlation networks, their topology metrics, and the MST."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InputError
from .spectra import CorrMatrix

MAX_CLIQUE_N = 64


@dataclass(eq=False)
class ThresholdGraph:
    labels: tuple
    theta: float
    adjacency: np.ndarray  # symmetric bool, False diagonal

    @property
    def n(self) -> int:
        return len(self.labels)

    @classmethod
    def from_adjacency(cls, adjacency, labels=None, theta=float("nan")) -> "ThresholdGraph":
        a = np.array(adjacency, dtype=bool)
        if a.ndim != 2 or a.shape[0] != a.shape[1] or not np.array_equal(a, a.T):
            raise InputError("adjacency must be a symmetric square matrix")
        np.fill_diagonal(a, False)
        labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(a.shape[0]))
        return cls(labels, theta, a)

    def edges(self):
        i, j = np.nonzero(np.triu(self.adjacency, 1))
        return list(zip(i.tolist(), j.tolist()))

    def neighbors(self) -> list[set]:
        return [set(np.flatnonzero(row).tolist()) for row in self.adjacency]


def build_graph(C: CorrMatrix, theta: float) -> ThresholdGraph:
    """Link ``i != j`` whenever ``C_ij >= theta``.

    Any finite ``theta`` is accepted: ``theta <= -1`` yields the complete
    graph and ``theta > 1`` the empty one.
    """
    if not math.isfinite(theta):
        raise InputError("theta must be finite")
    a = np.asarray(C.C) >= theta
    np.fill_diagonal(a, False)
    return ThresholdGraph(C.labels, float(theta), a)


def degrees(g: ThresholdGraph) -> np.ndarray:
    return g.adjacency.sum(axis=1)


def mean_degree(g: ThresholdGraph) -> float:
    return float(degrees(g).mean()) if g.n else 0.0


def triangles_and_triples(g: ThresholdGraph) -> tuple[int, int]:
    a = g.adjacency.astype(np.int64)
    tri = int(np.trace(a @ a @ a)) // 6
    k = a.sum(axis=1)
    return tri, int(np.sum(k * (k - 1) // 2))


def global_clustering(g: ThresholdGraph) -> float:
    """Transitivity: 3 x triangles / connected triples (0 when there are no triples)."""
    tri, trip = triangles_and_triples(g)
    return 3.0 * tri / trip if trip else 0.0


def average_clustering(g: ThresholdGraph) -> float:
    """Mean of per-vertex clustering coefficients; degree < 2 vertices count as 0."""
    a = g.adjacency.astype(np.int64)
    k = a.sum(axis=1)
    links = np.diag(a @ a @ a) / 2
    with np.errstate(divide="ignore", invalid="ignore"):
        c = np.where(k > 1, links / (k * (k - 1) / 2), 0.0)
    return float(c.mean()) if g.n else 0.0


def components(g: ThresholdGraph):
    """Connected components by breadth-first search.

    Returns ``(partition, count, max_size)``; the partition is a list of label
    lists, each ordered by vertex position, components ordered by their first
    vertex.
    """
    nbrs = g.neighbors()
    seen = np.zeros(g.n, dtype=bool)
    parts = []
    for start in range(g.n):
        if seen[start]:
            continue
        seen[start] = True
        queue, comp = [start], []
        while queue:
            v = queue.pop()
            comp.append(v)
            for w in nbrs[v]:
                if not seen[w]:
                    seen[w] = True
                    queue.append(w)
        parts.append(sorted(comp))
    labelled = [[g.labels[v] for v in comp] for comp in parts]
    return labelled, len(parts), max((len(c) for c in parts), default=0)


def max_clique(g: ThresholdGraph):
    """Exact maximum clique by Bron-Kerbosch with pivoting and a size bound.

    Ties between maximum cliques are resolved toward the lexicographically
    smallest vertex-position tuple.  Returns ``(size, labels)``.
    """
    if g.n > MAX_CLIQUE_N:
        raise InputError(f"exact clique search is limited to {MAX_CLIQUE_N} vertices")
    if g.n == 0:
        return 0, []
    nbrs = g.neighbors()
    best: list[tuple] = [()]

    def consider(clique):
        c = tuple(sorted(clique))
        b = best[0]
        if len(c) > len(b) or (len(c) == len(b) and c < b):
            best[0] = c

    def expand(R, P, X):
        if not P and not X:
            consider(R)
            return
        # bound: cannot reach (or tie) the incumbent
        if len(R) + len(P) < len(best[0]):
            return
        pivot = max(P | X, key=lambda u: len(P & nbrs[u]))
        for v in sorted(P - nbrs[pivot]):
            expand(R | {v}, P & nbrs[v], X & nbrs[v])
            P = P - {v}
            X = X | {v}

    expand(set(), set(range(g.n)), set())
    clique = best[0]
    return len(clique), [g.labels[v] for v in clique]


@dataclass
class GraphMetrics:
    theta: float
    mean_degree: float
    global_clustering: float
    average_clustering: float
    component_count: int
    max_component_size: int
    max_clique_size: int
    components: list
    max_clique: list
    n_edges: int


def graph_metrics(g: ThresholdGraph) -> GraphMetrics:
    parts, count, biggest = components(g)
    size, clique = max_clique(g)
    return GraphMetrics(
        g.theta,
        mean_degree(g),
        global_clustering(g),
        average_clustering(g),
        count,
        biggest,
        size,
        parts,
        clique,
        len(g.edges()),
    )


def distance_matrix(C) -> np.ndarray:
    """Correlation distance ``sqrt(2 (1 - C_ij))`` with an exact zero diagonal."""
    c = np.asarray(C.C if isinstance(C, CorrMatrix) else C, dtype=float)
    d = np.sqrt(np.clip(2.0 * (1.0 - c), 0.0, 4.0))
    np.fill_diagonal(d, 0.0)
    return d


@dataclass
class Mst:
    labels: tuple
    edges: list  # (i, j, weight) with i < j, in insertion order
    total_weight: float

    def label_edges(self):
        return [(self.labels[i], self.labels[j], w) for i, j, w in self.edges]


def mst_prim(D, labels=None) -> Mst:
    """Prim's minimum spanning tree on a complete distance matrix.

    Among equal-weight candidate edges the one with the smaller
    ``(min index, max index)`` pair is taken, which makes the tree unique.
    """
    d = np.asarray(D, dtype=float)
    n = d.shape[0]
    if d.ndim != 2 or d.shape[1] != n:
        raise InputError("distance matrix must be square")
    if not np.all(np.isfinite(d)):
        raise InputError("distance matrix has non-finite weights")
    labels = tuple(labels) if labels is not None else tuple(str(i) for i in range(n))
    if n == 0:
        raise InputError("empty distance matrix")
    in_tree = np.zeros(n, dtype=bool)
    in_tree[0] = True
    best_w = d[0].copy()
    best_from = np.zeros(n, dtype=int)
    edges = []
    for _ in range(n - 1):
        cand = np.flatnonzero(~in_tree)
        w = best_w[cand]
        wmin = w.min()
        ties = cand[w == wmin]
        pairs = [(min(v, best_from[v]), max(v, best_from[v])) for v in ties]
        k = min(range(len(ties)), key=lambda t: pairs[t])
        v = int(ties[k])
        i, j = pairs[k]
        edges.append((int(i), int(j), float(wmin)))
        in_tree[v] = True
        closer = (d[v] < best_w) | ((d[v] == best_w) & (v < best_from))
        upd = closer & ~in_tree
        best_w[upd] = d[v, upd]
        best_from[upd] = v
    total = math.fsum(w for _, _, w in edges)
    return Mst(labels, edges, total)


def theta_sweep(periods: dict, thetas) -> list[dict]:
    """Graph metrics for every ``(period, theta)``; ``periods`` maps names to CorrMatrix."""
    mats = list(periods.values())
    if mats and any(m.labels != mats[0].labels for m in mats):
        raise InputError("all correlation matrices must share one label set")
    rows = []
    for name, C in periods.items():
        for th in thetas:
            m = graph_metrics(build_graph(C, th))
            rows.append({"period": name, "theta": float(th), "metrics": m})
    return rows
