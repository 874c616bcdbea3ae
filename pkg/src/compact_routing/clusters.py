"""Level hierarchy, pivots and approximate cluster trees.

A cluster of ``u`` at level ``i`` is ``C(u) = {v : d(u, v) < d(v, A_{i+1})}``.
Levels below ``k // 2`` are built exactly by gated Bellman-Ford, the middle
level of an odd ``k`` by one source-detection call, and the upper levels in
two phases over a sampled virtual graph with a hopset.
"""

from __future__ import annotations

import json
import math
import warnings
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable

import numpy as np

from .graph import INF, WeightedGraph, rng_for
from .ledger import RoundLedger
from .primitives import (
    AugmentedGraph,
    SourceDetector,
    approx_spt,
    augment,
    build_hopset,
    build_virtual_graph,
    preprocessing_budget,
    source_detection,
)


class EmptyLevel(UserWarning):
    pass


class WrongParity(ValueError):
    pass


class IterationBudgetExceeded(AssertionError):
    pass


def default_eps(k: int) -> Fraction:
    return Fraction(1, 48 * k**4)


def ln_budget(n: int, exponent: float) -> int:
    """``ceil(4 n^exponent ln n)``."""
    return math.ceil(4 * n**exponent * math.log(max(n, 2)))


def below(values: np.ndarray, bounds: np.ndarray, factor: Fraction) -> np.ndarray:
    """Exact elementwise test ``values * factor < bounds`` for integer-valued floats.

    Infinite values never pass; infinite bounds pass every finite value.
    """
    values = np.asarray(values, dtype=np.float64)
    bounds = np.broadcast_to(np.asarray(bounds, dtype=np.float64), values.shape)
    fin_v = np.isfinite(values)
    fin_b = np.isfinite(bounds)
    out = fin_v & ~fin_b
    both = fin_v & fin_b
    if not both.any():
        return out
    num, den = factor.numerator, factor.denominator
    vmax = float(values[both].max()) if both.any() else 0.0
    bmax = float(bounds[both].max()) if both.any() else 0.0
    if vmax * num < 2**62 and bmax * den < 2**62:
        v = values[both].astype(np.int64)
        b = bounds[both].astype(np.int64)
        out[both] = v * num < b * den
    else:
        idx = np.flatnonzero(both.ravel())
        flat_v, flat_b = values.ravel(), bounds.ravel()
        res = out.ravel().copy()
        for j in idx:
            res[j] = int(flat_v[j]) * num < int(flat_b[j]) * den
        out = res.reshape(values.shape)
    return out


# -- hierarchy ---------------------------------------------------------------


@dataclass(frozen=True)
class LevelHierarchy:
    n: int
    k: int
    A: tuple[frozenset, ...]
    level: tuple[int, ...]
    seed: int = 0

    def members(self, i: int) -> list[int]:
        return sorted(self.A[i])

    def roots(self, i: int) -> list[int]:
        """``A_i minus A_{i+1}``: the vertices whose level is exactly ``i``."""
        return sorted(self.A[i] - self.A[i + 1])

    def size_report(self) -> list[dict]:
        rows = []
        for i in range(self.k + 1):
            bound = 4 * self.n ** (1 - i / self.k) * math.log(max(self.n, 2))
            rows.append({"level": i, "size": len(self.A[i]), "bound": bound, "ok": len(self.A[i]) <= bound})
        return rows


def sample_hierarchy(n: int, k: int, seed: int = 0) -> LevelHierarchy:
    if k < 1:
        raise ValueError("k must be >= 1")
    rng = rng_for(seed, "hierarchy")
    p = n ** (-1.0 / k)
    draws = rng.random((k, n))
    sets = [frozenset(range(n))]
    for i in range(1, k):
        sets.append(frozenset(v for v in sets[-1] if draws[i, v] < p))
    sets.append(frozenset())
    level = [0] * n
    for i in range(1, k):
        for v in sets[i]:
            level[v] = i
    h = LevelHierarchy(n, k, tuple(sets), tuple(level), seed)
    bad = [r for r in h.size_report() if not r["ok"]]
    if bad:
        warnings.warn(f"level sizes above 4 n^(1-i/k) ln n: {bad}", stacklevel=2)
    return h


# -- pivots ------------------------------------------------------------------


@dataclass(frozen=True)
class PivotTable:
    """Rows ``0..k``; row ``k`` is all INF.  ``zhat`` is -1 where undefined."""

    dhat: np.ndarray
    zhat: np.ndarray
    exact_levels: int
    empty_levels: tuple[int, ...] = ()

    @property
    def k(self) -> int:
        return self.dhat.shape[0] - 1

    def row(self, v: int) -> list[tuple[int, float | int]]:
        out = []
        for i in range(self.k):
            d = self.dhat[i, v]
            out.append((int(self.zhat[i, v]), int(d) if math.isfinite(d) else INF))
        return out


def exact_pivot_level(graph: WeightedGraph, A: list[int], iterations: int) -> tuple[np.ndarray, np.ndarray]:
    """``iterations`` rounds of Bellman-Ford from ``A`` on lexicographic ``(distance, pivot)`` pairs."""
    n = graph.n
    tail, head, w = graph.arcs
    dist = np.full(n, INF)
    piv = np.full(n, n, dtype=np.int64)
    dist[A] = 0.0
    piv[A] = A
    if tail.size == 0:
        return dist, np.where(piv == n, -1, piv)
    starts = np.flatnonzero(np.r_[True, head[1:] != head[:-1]])
    groups = head[starts]
    for _ in range(iterations):
        cand = dist[tail] + w
        best = np.minimum.reduceat(cand, starts)
        tie = np.where(cand == np.repeat(best, np.diff(np.r_[starts, tail.size])), piv[tail], n)
        best_piv = np.minimum.reduceat(tie, starts)
        cur_d, cur_p = dist[groups], piv[groups]
        better = (best < cur_d) | ((best == cur_d) & (best_piv < cur_p) & np.isfinite(best))
        if not better.any():
            break
        dist[groups] = np.where(better, best, cur_d)
        piv[groups] = np.where(better, best_piv, cur_p)
    return dist, np.where(piv == n, -1, piv)


def compute_pivots(
    graph: WeightedGraph,
    hierarchy: LevelHierarchy,
    eps: Fraction,
    ledger: RoundLedger | None = None,
    seed: int = 0,
    detector: SourceDetector | None = None,
    hopset_impl: str | Callable = "reference-complete",
) -> PivotTable:
    n, k = graph.n, hierarchy.k
    exact_up_to = math.ceil(k / 2)
    dhat = np.full((k + 1, n), INF)
    zhat = np.full((k + 1, n), -1, dtype=np.int64)
    dhat[0] = 0.0
    zhat[0] = np.arange(n)
    empty = []
    for i in range(1, k):
        A = hierarchy.members(i)
        if not A:
            empty.append(i)
            continue
        if i <= exact_up_to:
            iters = ln_budget(n, i / k)
            dhat[i], zhat[i] = exact_pivot_level(graph, A, iters)
            if ledger is not None:
                ledger.charge_bellman_ford(iters, 1, name=f"pivots.exact[{i}]")
        else:
            res = approx_spt(
                graph, A, eps, k, ledger, seed=seed * 1000 + i, detector=detector,
                hopset_impl=hopset_impl, stage=f"pivots.approx[{i}]",
            )
            dhat[i], zhat[i] = res.dhat, res.zhat
    if empty:
        warnings.warn(f"empty levels {empty}: pivots there are INF", EmptyLevel, stacklevel=2)
    return PivotTable(dhat, zhat, exact_up_to, tuple(empty))


# -- cluster trees -----------------------------------------------------------


@dataclass
class ClusterTree:
    """``members[v] = (b_v(u), parent, port)``; the root has parent and port ``None``."""

    root: int
    level: int
    members: dict = field(default_factory=dict)

    def __contains__(self, v: int) -> bool:
        return v in self.members

    def __len__(self) -> int:
        return len(self.members)

    def b(self, v: int) -> int:
        return self.members[v][0]

    def parent(self, v: int) -> int | None:
        return self.members[v][1]

    def parent_map(self) -> dict[int, int | None]:
        return {v: rec[1] for v, rec in self.members.items()}

    def tree_distance(self, v: int, graph: WeightedGraph) -> int:
        total, steps = 0, 0
        while v != self.root:
            p = self.members[v][1]
            total += graph.weight(v, p)
            v = p
            steps += 1
            if steps > len(self.members):
                raise ValueError(f"parent cycle in tree of {self.root}")
        return total

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "level": self.level,
            "members": [
                {"v": v, "b": b, "parent": p, "port": port}
                for v, (b, p, port) in sorted(self.members.items())
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _tree_from_arrays(graph, root, level, vertices, b, parent) -> ClusterTree:
    t = ClusterTree(root, level)
    for v in vertices:
        v = int(v)
        if v == root:
            t.members[v] = (0, None, None)
        else:
            p = int(parent[v])
            t.members[v] = (int(b[v]), p, graph.port(v, p))
    return t


def level_ranges(k: int) -> tuple[range, int | None, range]:
    """Small levels, the middle level (odd ``k`` only) and large levels."""
    middle = k // 2 if k % 2 == 1 else None
    return range(k // 2), middle, range(math.ceil(k / 2), k)


def _gated_bellman_ford(graph: WeightedGraph, root: int, thresh: np.ndarray, budget: int) -> tuple[dict, int]:
    """Synchronous Bellman-Ford from ``root`` in which only vertices with value below ``thresh`` take part."""
    vals = {root: 0}
    frontier = [root]
    rounds = 0
    adjacency = graph.adjacency
    while frontier:
        cand: dict[int, int] = {}
        for x in frontier:
            dx = vals[x]
            for y, wy in adjacency[x]:
                c = dx + wy
                if c < thresh[y] and c < vals.get(y, INF) and c < cand.get(y, INF):
                    cand[y] = c
        if not cand:
            break
        rounds += 1
        if rounds > budget:
            raise IterationBudgetExceeded(f"members of the tree of {root} still joining after {budget} iterations")
        vals.update(cand)
        frontier = sorted(cand)
    return vals, rounds


def build_small_trees(
    graph: WeightedGraph,
    hierarchy: LevelHierarchy,
    pivots: PivotTable,
    ledger: RoundLedger | None = None,
    levels: Iterable[int] | None = None,
) -> list[ClusterTree]:
    """Exact clusters by Bellman-Ford in which only members forward.

    The parent of a member is its smallest-id neighbour ``p`` with
    ``b(p) + w(p, v) = b(v)``, i.e. a neighbour that delivered the final value.
    """
    n, k = graph.n, hierarchy.k
    trees: list[ClusterTree] = []
    for i in levels if levels is not None else level_ranges(k)[0]:
        budget = ln_budget(n, (i + 1) / k)
        thresh = pivots.dhat[i + 1].tolist()
        counts = np.zeros(n, dtype=np.int64)
        for u in hierarchy.roots(i):
            vals, _ = _gated_bellman_ford(graph, u, thresh, budget)
            t = ClusterTree(u, i)
            for v in sorted(vals):
                if v == u:
                    t.members[v] = (0, None, None)
                    continue
                b = vals[v]
                p = next(p for p, wp in graph.adjacency[v] if vals.get(p, INF) + wp == b)
                t.members[v] = (b, p, graph.port(v, p))
                counts[v] += 1
            counts[u] += 1
            trees.append(t)
        if ledger is not None:
            ledger.charge_bellman_ford(budget, int(counts.max()) if n else 0, name=f"small_trees[{i}]")
    return trees


def build_middle_tree(
    graph: WeightedGraph,
    hierarchy: LevelHierarchy,
    pivots: PivotTable,
    eps: Fraction,
    ledger: RoundLedger | None = None,
    detector: SourceDetector | None = None,
) -> list[ClusterTree]:
    k = hierarchy.k
    if k % 2 == 0:
        raise WrongParity(f"the middle level exists only for odd k, got k={k}")
    i = (k - 1) // 2
    roots = hierarchy.roots(i)
    if not roots:
        return []
    B = ln_budget(graph.n, (i + 1) / k)
    sd = source_detection(graph, roots, B, eps, ledger, detector, stage="middle")
    thresh = pivots.dhat[i + 1]
    trees = []
    for u in roots:
        j = sd.index(u)
        row = sd.d[j]
        members = np.flatnonzero(below(row, thresh, Fraction(1)))
        trees.append(_tree_from_arrays(graph, u, i, members, row, sd.parent[j]))
    return trees


@dataclass
class LargeTreeDiagnostics:
    phase1_iterations: dict = field(default_factory=dict)
    phase15_updates: dict = field(default_factory=dict)
    phase2_joins: dict = field(default_factory=dict)


def build_large_trees(
    graph: WeightedGraph,
    hierarchy: LevelHierarchy,
    pivots: PivotTable,
    g2: AugmentedGraph,
    eps: Fraction,
    ledger: RoundLedger | None = None,
    phase1_iterations: int | None = None,
    diagnostics: LargeTreeDiagnostics | None = None,
) -> list[ClusterTree]:
    """Virtual trees on ``V'`` (phases 1 and 1.5) extended to all of ``V`` (phase 2)."""
    n, k = graph.n, hierarchy.k
    eps = Fraction(eps)
    one = 1 + eps
    sd = g2.base.detection
    Vp = np.asarray(g2.vertices, dtype=np.int64)
    m = len(Vp)
    pos = {int(v): j for j, v in enumerate(Vp)}
    beta = phase1_iterations if phase1_iterations is not None else g2.hopset.beta
    D = graph.hop_diameter
    W = g2.weight
    trees: list[ClusterTree] = []
    for i in level_ranges(k)[2]:
        roots = hierarchy.roots(i)
        if not roots:
            continue
        thresh_full = pivots.dhat[i + 1]
        thresh_v = thresh_full[Vp]
        R = len(roots)
        b = np.full((R, m), INF)
        vpar = np.full((R, m), -1, dtype=np.int64)
        for r, u in enumerate(roots):
            b[r, pos[u]] = 0.0

        # phase 1: only members forward; a vertex accepts a strictly better value that passes the threshold
        senders = np.isfinite(b)
        for t in range(beta):
            src = np.where(senders, b, INF)
            cand = src[:, :, None] + W[None, :, :]
            best = cand.min(axis=1)
            arg = cand.argmin(axis=1)
            ok = (best < b) & below(best, np.broadcast_to(thresh_v, best.shape), one**3)
            if ledger is not None:
                ledger.charge_broadcast(int(senders.sum()), D, name=f"large[{i}].phase1.iter{t}")
            if not ok.any():
                break
            b = np.where(ok, best, b)
            vpar = np.where(ok, arg, vpar)
            senders = ok
        if diagnostics is not None:
            diagnostics.phase1_iterations[i] = beta

        # phase 1.5: expand hopset edges that serve as virtual-parent links
        hop = g2.is_hopset
        end1 = b.copy()
        cand_val = np.full((R, m), INF)
        cand_par = np.full((R, m), -1, dtype=np.int64)
        processed = 0
        for r in range(R):
            for y in np.flatnonzero(vpar[r] >= 0):
                x = int(vpar[r, y])
                if not hop[x, y]:
                    continue
                processed += 1
                edge = g2.hopset.get(int(Vp[x]), int(Vp[y]))
                path, prefix = edge.oriented(int(Vp[x]))
                for idx in range(1, len(path)):
                    v = pos[path[idx]]
                    c = end1[r, x] + prefix[idx]
                    prev = pos[path[idx - 1]]
                    if c < cand_val[r, v] or (c == cand_val[r, v] and prev < cand_par[r, v]):
                        cand_val[r, v] = c
                        cand_par[r, v] = prev
        upd = np.isfinite(cand_val) & (b >= cand_val)
        b = np.where(upd, cand_val, b)
        vpar = np.where(upd, cand_par, vpar)
        if diagnostics is not None:
            diagnostics.phase15_updates[i] = int(upd.sum())
        if ledger is not None:
            ledger.charge_broadcast(processed, D, name=f"large[{i}].phase1.5")

        # real parents and phase 2
        members_total = 0
        joins = 0
        for r, u in enumerate(roots):
            in_v = np.flatnonzero(np.isfinite(b[r]))
            members_total += in_v.size
            vals = np.full(n, INF)
            par = np.full(n, -1, dtype=np.int64)
            for j in in_v:
                v = int(Vp[j])
                vals[v] = b[r, j]
                if v != u:
                    par[v] = sd.parent_of(v, int(Vp[vpar[r, j]]))
            rows = np.array([sd.index(int(Vp[j])) for j in in_v], dtype=np.int64)
            total = sd.d[rows, :] + b[r, in_v][:, None]
            total[np.arange(in_v.size), Vp[in_v]] = INF
            arg = total.argmin(axis=0)
            best = total[arg, np.arange(n)]
            via = Vp[in_v][arg]
            passes = below(best, thresh_full, one)
            take = passes & (best < vals)
            for y in np.flatnonzero(take):
                if not math.isfinite(vals[y]):
                    joins += 1
                vals[y] = best[y]
                par[y] = sd.parent_of(int(y), int(via[y]))
            members = np.flatnonzero(np.isfinite(vals))
            trees.append(_tree_from_arrays(graph, u, i, members, vals, par))
        if diagnostics is not None:
            diagnostics.phase2_joins[i] = joins
        if ledger is not None:
            ledger.charge_broadcast(members_total, D, name=f"large[{i}].phase2")
    return trees


def preprocess_large(
    graph: WeightedGraph,
    hierarchy: LevelHierarchy,
    eps: Fraction,
    ledger: RoundLedger | None = None,
    detector: SourceDetector | None = None,
    hopset_impl: str | Callable = "reference-complete",
    seed: int = 0,
) -> AugmentedGraph | None:
    k = hierarchy.k
    Vp = hierarchy.members(math.ceil(k / 2)) if math.ceil(k / 2) < k else []
    if not Vp:
        return None
    B = preprocessing_budget(graph.n, k)
    vg = build_virtual_graph(graph, Vp, B, eps, ledger, detector, stage="preprocess.source-detection")
    hs = build_hopset(vg, Fraction(eps) / 3, hopset_impl, ledger, k=k, seed=seed, stage="preprocess.hopset")
    return augment(vg, hs)


@dataclass(frozen=True)
class OverlapCensus:
    max: int
    histogram: dict
    per_vertex: tuple[int, ...]

    def bound(self, n: int, k: int, base: float = math.e) -> float:
        return 4 * n ** (1 / k) * math.log(max(n, 2), base)


def overlap_census(trees: Iterable[ClusterTree], n: int | None = None) -> OverlapCensus:
    counts: Counter = Counter()
    for t in trees:
        counts.update(t.members.keys())
    size = n if n is not None else (max(counts) + 1 if counts else 0)
    per = tuple(counts.get(v, 0) for v in range(size))
    hist = dict(sorted(Counter(per).items()))
    return OverlapCensus(max(per) if per else 0, hist, per)


@dataclass
class ClusterBuild:
    hierarchy: LevelHierarchy
    pivots: PivotTable
    trees: list[ClusterTree]
    g2: AugmentedGraph | None
    diagnostics: LargeTreeDiagnostics

    def by_root(self) -> dict[int, ClusterTree]:
        return {t.root: t for t in self.trees}


def build_clusters(
    graph: WeightedGraph,
    k: int,
    seed: int = 0,
    eps: Fraction | None = None,
    ledger: RoundLedger | None = None,
    detector: SourceDetector | None = None,
    hopset_impl: str | Callable = "reference-complete",
    hierarchy: LevelHierarchy | None = None,
) -> ClusterBuild:
    """Hierarchy, pivots and every cluster tree, sorted by root."""
    eps = Fraction(eps) if eps is not None else default_eps(k)
    h = hierarchy or sample_hierarchy(graph.n, k, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", EmptyLevel)
        piv = compute_pivots(graph, h, eps, ledger, seed, detector, hopset_impl)
    trees = build_small_trees(graph, h, piv, ledger)
    if k % 2 == 1:
        trees += build_middle_tree(graph, h, piv, eps, ledger, detector)
    g2 = preprocess_large(graph, h, eps, ledger, detector, hopset_impl, seed)
    diag = LargeTreeDiagnostics()
    if g2 is not None:
        trees += build_large_trees(graph, h, piv, g2, eps, ledger, diagnostics=diag)
    trees.sort(key=lambda t: t.root)
    return ClusterBuild(h, piv, trees, g2, diag)
