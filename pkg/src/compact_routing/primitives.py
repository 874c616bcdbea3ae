"""Distributed subroutines consumed as contracts by the cluster construction.

* multi-source hop-bounded distances with parent pointers (source detection),
* virtual graphs on a vertex subset and path-reporting hopsets on them,
* (1+eps)-approximate shortest-path trees rooted at a set.

The reference implementations are exact, which satisfies every (1+eps)
contract with slack.  Callers may plug in other implementations; the
``check_*`` helpers compare any implementation against exact values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Protocol, Sequence

import numpy as np

from .graph import INF, WeightedGraph, _weighted_parent, hop_bounded_dist, rng_for
from .ledger import RoundLedger


class RootSetTooLarge(ValueError):
    pass


class ContractViolation(AssertionError):
    pass


def _as_int(x) -> float | int:
    return int(x) if math.isfinite(x) else INF


# -- source detection ---------------------------------------------------------


@dataclass(frozen=True)
class SourceDetectionResult:
    """``d[j, u]`` approximates ``d^{(B)}(u, sources[j])``; ``parent[j, u]`` is ``p_{sources[j]}(u)``."""

    sources: tuple[int, ...]
    d: np.ndarray
    parent: np.ndarray
    B: int
    eps: Fraction
    _index: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        self._index.update({s: j for j, s in enumerate(self.sources)})

    def index(self, source: int) -> int:
        return self._index[source]

    def dist(self, u: int, source: int):
        return _as_int(self.d[self._index[source], u])

    def parent_of(self, u: int, source: int) -> int:
        return int(self.parent[self._index[source], u])


class SourceDetector(Protocol):
    def __call__(self, graph: WeightedGraph, sources: Sequence[int], B: int, eps: Fraction) -> SourceDetectionResult: ...


def exact_source_detection(graph: WeightedGraph, sources: Sequence[int], B: int, eps: Fraction) -> SourceDetectionResult:
    res = hop_bounded_dist(graph, sources, B)
    return SourceDetectionResult(tuple(res.sources), res.dist, res.parent, B, Fraction(eps))


class NoisySourceDetection:
    """Contract-abiding but inexact detector.

    Runs exact hop-bounded search on a copy of the graph whose edge weights are
    inflated by a seeded factor in ``[1, 1 + noise)`` (rounded down to
    integers), so values stay within ``(1 + noise)`` of the true ``B``-hop
    distances, are symmetric, and keep the parent inequality.
    """

    def __init__(self, noise: Fraction, seed: int = 0):
        self.noise = Fraction(noise)
        self.seed = seed
        self.calls = 0

    def perturbed_arc_weights(self, graph: WeightedGraph, noise: Fraction) -> np.ndarray:
        rng = rng_for(self.seed, "noisy-sd", self.calls)
        draws = rng.integers(0, 1000, size=graph.m)
        bumped = {}
        for (u, v, w), r in zip(graph.edges, draws):
            bumped[(u, v)] = w + math.floor(w * noise * Fraction(int(r), 1000))
        tail, head, _ = graph.arcs
        return np.array(
            [bumped[(min(a, b), max(a, b))] for a, b in zip(tail.tolist(), head.tolist())],
            dtype=np.float64,
        )

    def __call__(self, graph, sources, B, eps):
        noise = min(self.noise, Fraction(eps))
        weights = self.perturbed_arc_weights(graph, noise)
        self.calls += 1
        res = hop_bounded_dist(graph, sources, B, weights=weights)
        return SourceDetectionResult(tuple(res.sources), res.dist, res.parent, B, Fraction(eps))


def source_detection(
    graph: WeightedGraph,
    sources: Iterable[int],
    B: int,
    eps: Fraction,
    ledger: RoundLedger | None = None,
    detector: SourceDetector | None = None,
    stage: str = "source-detection",
) -> SourceDetectionResult:
    sources = sorted(set(int(s) for s in sources))
    if not sources:
        raise ValueError("source detection needs at least one source")
    if B < 1:
        raise ValueError("hop budget B must be >= 1")
    eps = Fraction(eps)
    result = (detector or exact_source_detection)(graph, sources, B, eps)
    if ledger is not None:
        D = graph.hop_diameter
        rounds = math.ceil((len(sources) + B + D) / eps)
        ledger.charge(stage, f"(|S| + B + D) / eps = ({len(sources)} + {B} + {D}) / {eps}", rounds)
    return result


def check_source_detection(graph: WeightedGraph, result: SourceDetectionResult) -> list[str]:
    """Contract violations of ``result`` against exact hop-bounded distances."""
    problems = []
    exact = hop_bounded_dist(graph, result.sources, result.B).dist
    got = result.d
    eps = result.eps
    for j, s in enumerate(result.sources):
        for u in range(graph.n):
            e, g = exact[j, u], got[j, u]
            if math.isfinite(e) != math.isfinite(g):
                problems.append(f"finiteness mismatch d({u},{s})")
                continue
            if not math.isfinite(e):
                continue
            if g < e or g * eps.denominator > e * (eps.denominator + eps.numerator):
                problems.append(f"d({u},{s})={g} outside [{e}, (1+eps){e}]")
            p = int(result.parent[j, u])
            if u != s:
                if p < 0 or not graph.has_edge(u, p):
                    problems.append(f"parent of {u} toward {s} is not a neighbour")
                elif g < graph.weight(u, p) + got[j, p]:
                    problems.append(f"parent inequality fails at ({u},{s})")
    for a in result.sources:
        for b in result.sources:
            if result.d[result.index(b), a] != result.d[result.index(a), b]:
                problems.append(f"asymmetric d({a},{b})")
    return problems


# -- virtual graphs and hopsets ------------------------------------------------


@dataclass(frozen=True)
class VirtualGraph:
    """Complete-or-partial graph on ``vertices`` with ``weight[i, j] = d_{v_i v_j}``."""

    vertices: tuple[int, ...]
    weight: np.ndarray
    detection: SourceDetectionResult
    host_n: int
    host_D: int

    def index(self, v: int) -> int:
        return self.detection.index(v)

    @property
    def size(self) -> int:
        return len(self.vertices)

    def edges(self) -> list[tuple[int, int, int]]:
        out = []
        for i in range(self.size):
            for j in range(i + 1, self.size):
                if math.isfinite(self.weight[i, j]):
                    out.append((self.vertices[i], self.vertices[j], int(self.weight[i, j])))
        return out


def build_virtual_graph(
    graph: WeightedGraph,
    vertices: Iterable[int],
    B: int,
    eps: Fraction,
    ledger: RoundLedger | None = None,
    detector: SourceDetector | None = None,
    stage: str = "preprocess.source-detection",
) -> VirtualGraph:
    """Run source detection from ``vertices`` with ``eps/2`` and keep the pairwise values."""
    vertices = sorted(set(int(v) for v in vertices))
    sd = source_detection(graph, vertices, B, Fraction(eps) / 2, ledger, detector, stage=stage)
    idx = [sd.index(v) for v in vertices]
    weight = sd.d[np.ix_(idx, vertices)].copy()
    np.fill_diagonal(weight, INF)
    return VirtualGraph(tuple(vertices), weight, sd, graph.n, graph.hop_diameter)


def _dense_arcs(weight: np.ndarray):
    rows, cols = np.nonzero(np.isfinite(weight))
    order = np.lexsort((rows, cols))
    return rows[order], cols[order], weight[rows, cols][order]


def dense_all_pairs(weight: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Exact all-pairs distances and smallest-id predecessors of a dense weight matrix."""
    from scipy import sparse
    from scipy.sparse import csgraph

    m = weight.shape[0]
    tail, head, w = _dense_arcs(weight)
    if m == 0:
        return np.zeros((0, 0)), np.zeros((0, 0), dtype=np.int64)
    mat = sparse.csr_matrix((w, (tail, head)), shape=(m, m))
    dist = csgraph.dijkstra(mat, directed=True)
    parent = _weighted_parent(dist, tail, head, w, m, list(range(m)))
    return dist, parent


def dense_bellman_ford(weight: np.ndarray, init: np.ndarray, iterations: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Synchronous Bellman-Ford on a dense matrix from per-source initial values.

    ``init`` has shape (sources, m).  Returns final values, the index of the
    neighbour that delivered each final value (-1 if never updated), and the
    number of iterations that changed something.
    """
    vals = init.astype(np.float64).copy()
    via = np.full(vals.shape, -1, dtype=np.int64)
    used = 0
    for _ in range(iterations):
        cand = vals[:, :, None] + weight[None, :, :]
        best = cand.min(axis=1)
        arg = cand.argmin(axis=1)
        better = best < vals
        if not better.any():
            break
        vals = np.where(better, best, vals)
        via = np.where(better, arg, via)
        used += 1
    return vals, via, used


@dataclass(frozen=True)
class HopsetEdge:
    """Hopset edge ``(x, y)`` of weight ``b`` realised by a path in the virtual graph."""

    x: int
    y: int
    b: int
    path: tuple[int, ...]
    prefix: tuple[int, ...]

    def dist_from_x(self, v: int) -> int:
        return self.prefix[self.path.index(v)]

    def dist_from_y(self, v: int) -> int:
        return self.b - self.dist_from_x(v)

    def oriented(self, start: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
        """Path and prefix distances read from endpoint ``start``."""
        if start == self.x:
            return self.path, self.prefix
        if start == self.y:
            return self.path[::-1], tuple(self.b - p for p in self.prefix[::-1])
        raise KeyError(start)


@dataclass(frozen=True)
class PathReportingHopset:
    edges: tuple[HopsetEdge, ...]
    beta: int
    eps: Fraction
    beta_theory: float = 0.0
    _lookup: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        for e in self.edges:
            self._lookup[(e.x, e.y)] = e
            self._lookup[(e.y, e.x)] = e

    def get(self, a: int, b: int) -> HopsetEdge | None:
        return self._lookup.get((a, b))

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "eps": str(self.eps),
            "edges": [
                {"x": e.x, "y": e.y, "b": e.b, "path": list(e.path), "prefix": list(e.prefix)}
                for e in self.edges
            ],
        }


def declared_beta(n: int, k: int, eps: Fraction, constant: float = 1.0) -> tuple[float, float]:
    """Theory hop bound ``min{(log n)^{ck}, 2^{c sqrt(log n) log log n}}`` and rho."""
    logn = max(math.log2(max(n, 2)), 1.0)
    loglog = max(math.log2(logn), 1.0)
    rho = max(1.0 / max(k, 1), loglog / math.sqrt(logn))
    poly = logn ** (constant * k)
    sub = 2.0 ** (constant * math.sqrt(logn) * loglog)
    return min(poly, sub), rho


def _path_edge(vertices, dist, parent, i, j) -> HopsetEdge:
    chain = [j]
    while chain[-1] != i:
        chain.append(int(parent[i, chain[-1]]))
    chain.reverse()
    prefix = tuple(int(dist[i, c]) for c in chain)
    return HopsetEdge(vertices[i], vertices[j], int(dist[i, j]), tuple(vertices[c] for c in chain), prefix)


def _exact_hop_bound(weight: np.ndarray, target: np.ndarray) -> int:
    """Smallest t such that t-hop distances in ``weight`` equal ``target``."""
    m = weight.shape[0]
    if m <= 1:
        return 1
    vals = np.full((m, m), INF)
    np.fill_diagonal(vals, 0.0)
    for t in range(1, m + 1):
        vals = np.minimum(vals, (vals[:, :, None] + weight[None, :, :]).min(axis=1))
        if np.array_equal(vals, target):
            return t
    return m


def build_hopset(
    vg: VirtualGraph,
    eps: Fraction,
    impl: str | Callable = "reference-complete",
    ledger: RoundLedger | None = None,
    k: int = 2,
    seed: int = 0,
    fraction: float = 0.3,
    beta_constant: float = 1.0,
    stage: str = "preprocess.hopset",
) -> PathReportingHopset:
    """Path-reporting hopset for ``vg``.

    ``reference-complete`` adds every finite pair with its exact weight
    (beta=1).  ``sampled`` keeps a seeded ``fraction`` of those pairs and
    ``empty`` none; both declare the smallest beta that reproduces exact
    virtual distances.  A callable is treated as a plugin ``impl(vg, eps)``.
    """
    eps = Fraction(eps)
    beta_theory, rho = declared_beta(vg.host_n, k, eps, beta_constant)
    if callable(impl):
        hopset = impl(vg, eps)
    else:
        dist, parent = dense_all_pairs(vg.weight)
        m = vg.size
        pairs = [(i, j) for i in range(m) for j in range(i + 1, m) if math.isfinite(dist[i, j])]
        if impl == "reference-complete":
            keep = pairs
        elif impl == "sampled":
            rng = rng_for(seed, "hopset-sample")
            mask = rng.random(len(pairs)) < fraction
            keep = [p for p, k_ in zip(pairs, mask) if k_]
        elif impl == "empty":
            keep = []
        else:
            raise ValueError(f"unknown hopset implementation {impl!r}")
        edges = tuple(_path_edge(vg.vertices, dist, parent, i, j) for i, j in keep)
        if impl == "reference-complete":
            beta = 1
        else:
            tmp = PathReportingHopset(edges, 1, Fraction(0))
            beta = _exact_hop_bound(augment(vg, tmp).weight, np.where(np.eye(m, dtype=bool), 0.0, dist))
        hopset = PathReportingHopset(edges, beta, Fraction(0), beta_theory)
    if ledger is not None:
        D = vg.host_D
        rounds = math.ceil((vg.size ** (1 + rho) + D) * beta_theory**2)
        ledger.charge(
            stage,
            f"(m^(1+rho) + D) * beta^2 = ({vg.size}^(1+{rho:.4f}) + {D}) * {beta_theory:.4g}^2",
            rounds,
            messages=len(hopset.edges),
        )
    return hopset


@dataclass(frozen=True)
class AugmentedGraph:
    """Virtual graph plus hopset edges (hopset weight wins on conflicts)."""

    vertices: tuple[int, ...]
    weight: np.ndarray
    is_hopset: np.ndarray
    hopset: PathReportingHopset
    base: VirtualGraph

    def index(self, v: int) -> int:
        return self.base.index(v)


def augment(vg: VirtualGraph, hopset: PathReportingHopset) -> AugmentedGraph:
    weight = vg.weight.copy()
    flag = np.zeros(weight.shape, dtype=bool)
    pos = {v: i for i, v in enumerate(vg.vertices)}
    for e in hopset.edges:
        i, j = pos[e.x], pos[e.y]
        weight[i, j] = weight[j, i] = e.b
        flag[i, j] = flag[j, i] = True
    return AugmentedGraph(vg.vertices, weight, flag, hopset, vg)


def check_hopset(vg: VirtualGraph, hopset: PathReportingHopset) -> list[str]:
    """Path-reporting and (beta, eps) validity of ``hopset`` on ``vg``."""
    problems = []
    pos = {v: i for i, v in enumerate(vg.vertices)}
    for e in hopset.edges:
        if e.path[0] != e.x or e.path[-1] != e.y:
            problems.append(f"path endpoints of ({e.x},{e.y})")
        total = 0
        for a, b in zip(e.path, e.path[1:]):
            w = vg.weight[pos[a], pos[b]]
            if not math.isfinite(w):
                problems.append(f"path of ({e.x},{e.y}) uses non-edge ({a},{b})")
                break
            total += int(w)
        if total != e.b or e.prefix[-1] != e.b or e.prefix[0] != 0:
            problems.append(f"path weight of ({e.x},{e.y}) is {total}, expected {e.b}")
    exact, _ = dense_all_pairs(vg.weight)
    g2 = augment(vg, hopset).weight
    m = vg.size
    init = np.full((m, m), INF)
    np.fill_diagonal(init, 0.0)
    bounded, _, _ = dense_bellman_ford(g2, init, hopset.beta)
    eps = hopset.eps
    for i in range(m):
        for j in range(m):
            if i == j or not math.isfinite(exact[i, j]):
                continue
            b = bounded[i, j]
            if b < exact[i, j] or b * eps.denominator > exact[i, j] * (eps.denominator + eps.numerator):
                problems.append(f"beta-hop distance {b} vs {exact[i, j]} for ({vg.vertices[i]},{vg.vertices[j]})")
    return problems


# -- approximate shortest-path trees -------------------------------------------


@dataclass(frozen=True)
class ApproxSPTResult:
    dhat: np.ndarray
    zhat: np.ndarray
    sample: tuple[int, ...] = ()


def preprocessing_budget(n: int, k: int) -> int:
    """Hop budget ``4 n / E|V'| ln n`` for ``V' = A_{ceil(k/2)}``."""
    ln = math.log(max(n, 2))
    if k % 2 == 0:
        return math.ceil(4 * math.sqrt(n) * ln)
    return math.ceil(4 * n ** (0.5 + 1 / (2 * k)) * ln)


def approx_spt(
    graph: WeightedGraph,
    A: Iterable[int],
    eps: Fraction,
    k: int,
    ledger: RoundLedger | None = None,
    seed: int = 0,
    detector: SourceDetector | None = None,
    hopset_impl: str | Callable = "reference-complete",
    stage: str = "approx-spt",
) -> ApproxSPTResult:
    """(1+eps)-approximate SPT rooted at ``A`` via a sampled virtual graph and hopset."""
    A = sorted(set(int(a) for a in A))
    n = graph.n
    ln = math.log(max(n, 2))
    if len(A) > 2 * math.sqrt(n) * ln:
        raise RootSetTooLarge(f"|A|={len(A)} exceeds 2 sqrt(n) ln n = {2 * math.sqrt(n) * ln:.1f}")
    if not A:
        return ApproxSPTResult(np.full(n, INF), np.full(n, -1, dtype=np.int64))
    eps = Fraction(eps)
    rng = rng_for(seed, "spt-sample")
    X = np.flatnonzero(rng.random(n) < 1 / math.sqrt(n)).tolist()
    Vp = sorted(set(A) | set(X))
    B = math.ceil(4 * math.sqrt(n) * ln)
    vg = build_virtual_graph(graph, Vp, B, eps, ledger, detector, stage=f"{stage}.source-detection")
    hs = build_hopset(vg, eps / 3, hopset_impl, ledger, k=k, seed=seed, stage=f"{stage}.hopset")
    g2 = augment(vg, hs)

    m = len(Vp)
    pos = {v: i for i, v in enumerate(Vp)}
    val = np.full(m, INF)
    piv = np.full(m, -1, dtype=np.int64)
    for a in A:
        val[pos[a]] = 0.0
        piv[pos[a]] = a
    for _ in range(hs.beta):
        cand = val[:, None] + g2.weight
        new_val, new_piv = val.copy(), piv.copy()
        for i in range(m):
            col = cand[:, i]
            best = col.min()
            if best < val[i]:
                hits = np.flatnonzero(col == best)
                new_val[i] = best
                new_piv[i] = min(int(piv[h]) for h in hits)
        if np.array_equal(new_val, val):
            break
        val, piv = new_val, new_piv
    if ledger is not None:
        D = graph.hop_diameter
        ledger.charge_broadcast(m * hs.beta, D, name=f"{stage}.bellman-ford")

    sd = vg.detection
    rows = [sd.index(v) for v in Vp]
    total = sd.d[rows, :] + val[:, None]
    arg = total.argmin(axis=0)
    dhat = total[arg, np.arange(n)]
    zhat = np.where(np.isfinite(dhat), piv[arg], -1)
    if ledger is not None:
        ledger.charge_broadcast(m, graph.hop_diameter, name=f"{stage}.extend")
    return ApproxSPTResult(dhat, zhat.astype(np.int64), tuple(X))
