"""Weighted graphs, generators, and the exact shortest-path oracle.

Every other module treats the values computed here as ground truth.
Distances are stored as float64 arrays holding exact integers (all path
weights stay below 2**53), with ``INF`` as the unreachable sentinel.
"""

from __future__ import annotations

import json
import math
import zlib
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

INF = math.inf
_EXACT_LIMIT = 2**53


class GraphError(ValueError):
    pass


class ConnectivityFailure(GraphError):
    pass


def rng_for(seed: int, *keys) -> np.random.Generator:
    """Independent, reproducible generator for ``seed`` and a tuple of keys."""
    words = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, (int, np.integer)):
            words.append(int(key) & 0xFFFFFFFF)
        else:
            words.append(zlib.crc32(str(key).encode()))
    return np.random.default_rng(words)


class WeightedGraph:
    """Undirected, connected graph with positive integer weights.

    Vertices are ``0..n-1``.  The neighbours of ``u`` are kept sorted by id and
    port ``p`` at ``u`` is the ``p``-th entry of that list.
    """

    def __init__(self, n: int, edges: Iterable[tuple[int, int, int]], weight_exponent: int = 4):
        if n < 1:
            raise GraphError("graph needs at least one vertex")
        self.n = int(n)
        self.weight_exponent = weight_exponent
        max_w = self.n**weight_exponent
        seen: dict[tuple[int, int], int] = {}
        for u, v, w in edges:
            u, v = int(u), int(v)
            if int(w) != w:
                raise GraphError(f"non-integer weight {w!r} on ({u}, {v})")
            w = int(w)
            if not (0 <= u < n and 0 <= v < n):
                raise GraphError(f"edge ({u}, {v}) out of range for n={n}")
            if u == v:
                raise GraphError(f"self-loop at {u}")
            if not 1 <= w <= max(max_w, 1):
                raise GraphError(f"weight {w} outside [1, n^{weight_exponent}]")
            key = (min(u, v), max(u, v))
            if key in seen:
                raise GraphError(f"parallel edge {key}")
            seen[key] = w
        self.edges: tuple[tuple[int, int, int], ...] = tuple(
            (u, v, w) for (u, v), w in sorted(seen.items())
        )
        if self.edges and (self.n - 1) * max(w for _, _, w in self.edges) >= _EXACT_LIMIT:
            raise GraphError("weights too large for exact float64 path sums")

        nbrs: list[list[tuple[int, int]]] = [[] for _ in range(self.n)]
        for u, v, w in self.edges:
            nbrs[u].append((v, w))
            nbrs[v].append((u, w))
        self.adjacency: tuple[tuple[tuple[int, int], ...], ...] = tuple(
            tuple(sorted(row)) for row in nbrs
        )
        self._port = [{v: p for p, (v, _) in enumerate(row)} for row in self.adjacency]
        self._weight = [dict(row) for row in self.adjacency]

        if self.n > 1:
            ncomp, _ = csgraph.connected_components(self.csr, directed=False)
            if ncomp != 1:
                raise ConnectivityFailure(f"graph has {ncomp} components")

    def __repr__(self) -> str:
        return f"WeightedGraph(n={self.n}, m={self.m})"

    def __eq__(self, other) -> bool:
        return isinstance(other, WeightedGraph) and self.n == other.n and self.edges == other.edges

    def __hash__(self) -> int:
        return hash((self.n, self.edges))

    @property
    def m(self) -> int:
        return len(self.edges)

    def neighbors(self, u: int) -> tuple[tuple[int, int], ...]:
        return self.adjacency[u]

    def weight(self, u: int, v: int) -> int:
        try:
            return self._weight[u][v]
        except KeyError:
            raise GraphError(f"({u}, {v}) is not an edge") from None

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._weight[u]

    def port(self, u: int, v: int) -> int:
        try:
            return self._port[u][v]
        except KeyError:
            raise GraphError(f"({u}, {v}) is not an edge") from None

    def neighbor(self, u: int, port: int) -> int:
        return self.adjacency[u][port][0]

    @cached_property
    def arcs(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Both orientations of every edge, sorted by (head, tail)."""
        if not self.edges:
            empty = np.zeros(0, dtype=np.int64)
            return empty, empty, np.zeros(0)
        e = np.asarray(self.edges, dtype=np.int64)
        tail = np.concatenate([e[:, 0], e[:, 1]])
        head = np.concatenate([e[:, 1], e[:, 0]])
        w = np.concatenate([e[:, 2], e[:, 2]]).astype(np.float64)
        order = np.lexsort((tail, head))
        return tail[order], head[order], w[order]

    @cached_property
    def csr(self) -> sparse.csr_matrix:
        tail, head, w = self.arcs
        return sparse.csr_matrix((w, (tail, head)), shape=(self.n, self.n))

    @cached_property
    def hop_diameter(self) -> int:
        if self.n == 1:
            return 0
        hops = csgraph.shortest_path(self.csr, directed=False, unweighted=True)
        return int(hops.max())

    # -- text format ---------------------------------------------------------

    def to_edge_list(self) -> str:
        lines = [f"{self.n} {self.m}"]
        lines += [f"{u} {v} {w}" for u, v, w in self.edges]
        return "\n".join(lines) + "\n"

    @classmethod
    def from_edge_list(cls, text: str, weight_exponent: int = 4) -> "WeightedGraph":
        rows = [line.split() for line in text.splitlines() if line.strip() and not line.startswith("#")]
        if not rows or len(rows[0]) != 2:
            raise GraphError("edge list must start with 'n m'")
        n, m = int(rows[0][0]), int(rows[0][1])
        body = rows[1:]
        if len(body) != m:
            raise GraphError(f"header declares {m} edges, found {len(body)}")
        edges = []
        for row in body:
            if len(row) != 3:
                raise GraphError(f"malformed edge line {' '.join(row)!r}")
            edges.append((int(row[0]), int(row[1]), int(row[2])))
        return cls(n, edges, weight_exponent=weight_exponent)

    def save(self, path) -> None:
        Path(path).write_text(self.to_edge_list())

    @classmethod
    def load(cls, path, weight_exponent: int = 4) -> "WeightedGraph":
        return cls.from_edge_list(Path(path).read_text(), weight_exponent=weight_exponent)


# -- generators ---------------------------------------------------------------


def _erdos_renyi(n, params, rng):
    p = float(params.get("p", min(1.0, 2 * math.log(max(n, 2)) / max(n, 1))))
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(iu.size) < p
    return n, list(zip(iu[keep].tolist(), ju[keep].tolist()))


def _random_geometric(n, params, rng):
    from scipy.spatial import cKDTree

    radius = float(params.get("radius", math.sqrt(2 * math.log(max(n, 2)) / max(n, 2))))
    pts = rng.random((n, 2))
    pairs = sorted(cKDTree(pts).query_pairs(radius))
    return n, pairs


def _grid(n, params, rng):
    rows = int(params.get("rows", 0) or 0)
    cols = int(params.get("cols", 0) or 0)
    if not rows or not cols:
        side = math.isqrt(n)
        if side * side != n:
            raise GraphError(f"grid needs rows/cols or a square n, got n={n}")
        rows = cols = side
    if n and rows * cols != n:
        raise GraphError(f"rows*cols={rows * cols} does not match n={n}")
    pairs = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                pairs.append((v, v + 1))
            if r + 1 < rows:
                pairs.append((v, v + cols))
    return rows * cols, pairs


_MODELS = {
    "erdos-renyi": _erdos_renyi,
    "random-geometric": _random_geometric,
    "grid-with-random-weights": _grid,
    "grid": _grid,
}


def generate_graph(
    model: str,
    n: int,
    params: dict | None = None,
    seed: int = 0,
    max_tries: int = 20,
) -> WeightedGraph:
    """Draw a connected random graph; weights uniform in ``[1, params['W']]``.

    Raises ``ConnectivityFailure`` if ``max_tries`` draws are all disconnected.
    """
    params = dict(params or {})
    try:
        build = _MODELS[model]
    except KeyError:
        raise GraphError(f"unknown model {model!r}; choose from {sorted(_MODELS)}") from None
    W = int(params.get("W", 100))
    exponent = int(params.get("C", 4))
    for attempt in range(max_tries):
        rng = rng_for(seed, model, attempt)
        size, pairs = build(n, params, rng)
        weights = rng.integers(1, W, size=len(pairs), endpoint=True)
        edges = [(u, v, int(w)) for (u, v), w in zip(pairs, weights)]
        try:
            return WeightedGraph(size, edges, weight_exponent=exponent)
        except ConnectivityFailure:
            continue
    raise ConnectivityFailure(f"{model} n={n} params={params} seed={seed}: disconnected after {max_tries} tries")


def random_spanning_tree(graph: WeightedGraph, seed: int, root: int | None = None) -> dict[int, int | None]:
    """Parent map of a random spanning tree of ``graph`` (MST under random keys)."""
    rng = rng_for(seed, "spanning-tree")
    tail, head, _ = graph.arcs
    keys = rng.random(graph.m)
    e = np.asarray(graph.edges, dtype=np.int64).reshape(-1, 3)
    mat = sparse.csr_matrix((keys + 1.0, (e[:, 0], e[:, 1])), shape=(graph.n, graph.n))
    mst = csgraph.minimum_spanning_tree(mat)
    if root is None:
        root = int(rng.integers(graph.n))
    _, pred = csgraph.breadth_first_order(mst, root, directed=False, return_predecessors=True)
    return {v: (None if v == root else int(pred[v])) for v in range(graph.n)}


# -- exact oracle -------------------------------------------------------------


@dataclass(frozen=True)
class OracleTables:
    """Exact all-pairs distances, tie-broken hop counts, and predecessors.

    ``parent[s, v]`` is the predecessor of ``v`` on the shortest ``s``-``v``
    path whose predecessors are lexicographically smallest; ``hops[s, v]`` is
    that path's edge count.
    """

    dist: np.ndarray
    hops: np.ndarray
    parent: np.ndarray

    def path(self, s: int, v: int) -> list[int]:
        out = [v]
        while out[-1] != s:
            out.append(int(self.parent[s, out[-1]]))
        return out[::-1]

    def to_json(self) -> str:
        def enc(a):
            return [[None if not math.isfinite(x) else int(x) for x in row] for row in a.tolist()]

        return json.dumps(
            {"dist": enc(self.dist), "hops": self.hops.tolist(), "parent": self.parent.tolist()}
        )


def distances_from(graph: WeightedGraph, sources: Sequence[int]) -> np.ndarray:
    """Exact single-source distances for each source, one row each."""
    if graph.n == 1:
        return np.zeros((len(sources), 1))
    return csgraph.dijkstra(graph.csr, directed=False, indices=list(sources))


def distance_to_set(graph: WeightedGraph, targets: Iterable[int]) -> np.ndarray:
    """``d_G(v, targets)`` for every v; INF everywhere if ``targets`` is empty."""
    targets = sorted(set(targets))
    if not targets:
        return np.full(graph.n, INF)
    if graph.n == 1:
        return np.zeros(1)
    return csgraph.dijkstra(graph.csr, directed=False, indices=targets, min_only=True)


def hops_from_parents(parent: np.ndarray, roots: Sequence[int]) -> np.ndarray:
    rows, n = parent.shape
    hops = np.full((rows, n), -1, dtype=np.int64)
    r = np.arange(rows)
    hops[r, np.asarray(roots)] = 0
    for _ in range(n):
        has = parent >= 0
        par_hops = np.where(has, hops[r[:, None], np.maximum(parent, 0)], -1)
        new = np.where(has & (par_hops >= 0), par_hops + 1, hops)
        if np.array_equal(new, hops):
            break
        hops = new
    return hops


def oracle(graph: WeightedGraph, sources: Sequence[int] | None = None) -> OracleTables:
    """Exact distances with smallest-predecessor tie-breaking (rows = ``sources``)."""
    if sources is None:
        sources = range(graph.n)
    sources = list(sources)
    dist = distances_from(graph, sources)
    parent = _weighted_parent(dist, *graph.arcs, graph.n, sources)
    hops = hops_from_parents(parent, sources)
    return OracleTables(dist=dist, hops=hops, parent=parent)


# -- hop-bounded distances ----------------------------------------------------


@dataclass(frozen=True)
class HopBoundedResult:
    """``dist[i, v] = d^{(B)}(sources[i], v)`` and a neighbour parent per entry."""

    sources: tuple[int, ...]
    B: int
    dist: np.ndarray
    parent: np.ndarray
    rounds: int

    def __getitem__(self, key: tuple[int, int]) -> tuple[float, int]:
        s, v = key
        i = self.sources.index(s)
        d = self.dist[i, v]
        return (int(d) if math.isfinite(d) else INF), int(self.parent[i, v])


def hop_bounded_dist(
    graph: WeightedGraph,
    sources: Sequence[int],
    B: int,
    weights: np.ndarray | None = None,
) -> HopBoundedResult:
    """Exact ``B``-hop-bounded distances by synchronous Bellman-Ford.

    ``weights`` optionally overrides the arc weights (aligned with ``graph.arcs``).
    The parent of ``v`` is the smallest-id neighbour minimising ``d(p) + w(p, v)``
    over the final values, so ``d(v) >= w(v, p) + d(p)`` always holds.
    """
    if B < 0:
        raise ValueError("hop budget must be non-negative")
    sources = tuple(int(s) for s in sources)
    tail, head, w = graph.arcs
    if weights is not None:
        w = np.asarray(weights, dtype=np.float64)
    dist = np.full((len(sources), graph.n), INF)
    dist[np.arange(len(sources)), list(sources)] = 0.0
    rounds = 0
    if tail.size and sources:
        starts = np.flatnonzero(np.r_[True, head[1:] != head[:-1]])
        groups = head[starts]
        for _ in range(B):
            best = np.minimum.reduceat(dist[:, tail] + w, starts, axis=1)
            new = dist.copy()
            new[:, groups] = np.minimum(dist[:, groups], best)
            if np.array_equal(new, dist):
                break
            dist = new
            rounds += 1
    parent = _weighted_parent(dist, tail, head, w, graph.n, sources)
    return HopBoundedResult(sources=sources, B=B, dist=dist, parent=parent, rounds=rounds)


def _weighted_parent(dist, tail, head, w, n, roots) -> np.ndarray:
    """Smallest-id neighbour ``p`` minimising ``dist[p] + w(p, v)``; -1 at roots and INF."""
    rows = dist.shape[0]
    parent = np.full((rows, n), -1, dtype=np.int64)
    if tail.size == 0 or rows == 0:
        return parent
    starts = np.flatnonzero(np.r_[True, head[1:] != head[:-1]])
    groups = head[starts]
    cand = dist[:, tail] + w
    best = np.minimum.reduceat(cand, starts, axis=1)
    group_of_arc = np.repeat(np.arange(starts.size), np.diff(np.r_[starts, tail.size]))
    hit = cand == best[:, group_of_arc]
    arc_idx = np.where(hit, np.arange(tail.size), tail.size)
    first = np.minimum.reduceat(arc_idx, starts, axis=1)
    chosen = tail[np.minimum(first, tail.size - 1)]
    parent[:, groups] = np.where(np.isfinite(best), chosen, -1)
    parent[np.arange(rows), list(roots)] = -1
    parent[~np.isfinite(dist)] = -1
    return parent
