"""Invariant checks of a constructed scheme against exact shortest paths."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from .clusters import ClusterBuild, ClusterTree, default_eps, overlap_census
from .graph import WeightedGraph, distance_to_set, distances_from, rng_for
from .routing import Assembly, route, sketch_bound, sketch_dist, stretch_bound
from .tree_routing import ARRIVED, TreeRoutingBundle, tree_route_step

LEVELS = ("none", "sampled", "exhaustive")


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def _le_frac(value, bound, factor: Fraction) -> bool:
    """``value <= factor * bound`` exactly for integer-valued numbers."""
    return int(value) * factor.denominator <= int(bound) * factor.numerator


def cluster_membership_bounds(eps: Fraction, dist_uv: float, dist_to_next: float) -> tuple[bool, bool]:
    """(v in C(u), v in C_{6eps}(u)) from exact distances."""
    if not math.isfinite(dist_to_next):
        return True, True
    in_c = dist_uv < dist_to_next
    f = 1 + 6 * eps
    in_c6 = int(dist_uv) * f.numerator < int(dist_to_next) * f.denominator
    return in_c, in_c6


def check_tree(
    graph: WeightedGraph,
    tree: ClusterTree,
    dist_from_root: np.ndarray,
    dist_to_next: np.ndarray,
    eps: Fraction,
) -> dict[str, list[str]]:
    """Sandwich, estimate bounds, parent closure and tree-distance bound for one tree."""
    out: dict[str, list[str]] = {"sandwich": [], "estimates": [], "parents": [], "tree_distance": []}
    u = tree.root
    f4 = (1 + eps) ** 4
    if tree.members.get(u, (None, 1, 1))[:2] != (0, None):
        out["parents"].append(f"root {u} not a zero-estimate member")
    for v in range(graph.n):
        in_c, in_c6 = cluster_membership_bounds(eps, dist_from_root[v], dist_to_next[v])
        member = v in tree.members
        if member and not in_c:
            out["sandwich"].append(f"{v} in tree of {u} but outside C")
        if in_c6 and not member:
            out["sandwich"].append(f"{v} in C_6eps of {u} but missing")
    for v, (b, p, port) in tree.members.items():
        d = dist_from_root[v]
        if b < d or not _le_frac(b, d, f4):
            out["estimates"].append(f"b_{v}({u})={b} vs d={int(d)}")
        if v == u:
            continue
        if p not in tree.members or not graph.has_edge(v, p):
            out["parents"].append(f"parent {p} of {v} invalid")
            continue
        if port != graph.port(v, p):
            out["parents"].append(f"port of {v} does not lead to {p}")
        if b < graph.weight(v, p) + tree.members[p][0]:
            out["parents"].append(f"closure fails at {v}")
    # chains: terminate at the root within |members| steps; tree distance within (1+eps)^4
    for v in tree.members:
        x, total, steps = v, 0, 0
        while x != u and steps <= len(tree.members):
            p = tree.members[x][1]
            if p is None or p not in tree.members:
                break
            total += graph.weight(x, p)
            x = p
            steps += 1
        if x != u:
            out["parents"].append(f"chain from {v} does not reach {u}")
            continue
        d = dist_from_root[v]
        if total < d or not _le_frac(total, d, f4):
            out["tree_distance"].append(f"tree distance {total} vs d={int(d)} at {v}")
    return out


def tree_next_hop_oracle(parent: Mapping[int, int | None]):
    """``expected(x, dests)`` giving the next tree vertex (or -1 when ``dest == x``)."""
    root = next(v for v, p in parent.items() if p is None)
    kids: dict[int, list[int]] = {v: [] for v in parent}
    for v, p in parent.items():
        if p is not None:
            kids[p].append(v)
    tin, tout = {}, {}
    clock = 0
    stack = [(root, False)]
    while stack:
        v, done = stack.pop()
        if done:
            tout[v] = clock - 1
            continue
        tin[v] = clock
        clock += 1
        stack.append((v, True))
        for c in sorted(kids[v], reverse=True):
            stack.append((c, False))
    for v in kids:
        kids[v].sort(key=lambda c: tin[c])

    def expected(x: int, dests: Sequence[int]) -> list[int]:
        ch = kids[x]
        starts = [tin[c] for c in ch]
        out = []
        for d in dests:
            if d == x:
                out.append(-1)
            elif tin[x] < tin[d] <= tout[x]:
                j = int(np.searchsorted(starts, tin[d], side="right")) - 1
                out.append(ch[j])
            else:
                out.append(parent[x])
        return out

    return expected


def check_tree_routing(
    graph: WeightedGraph, bundle: TreeRoutingBundle, parent: Mapping[int, int | None], dests: Sequence[int] | None = None
) -> list[str]:
    """Every vertex's next hop toward every destination follows the unique tree path."""
    expected = tree_next_hop_oracle(parent)
    vertices = sorted(parent)
    dests = vertices if dests is None else [d for d in dests if d in parent]
    problems = []
    labels = [bundle.labels[d] for d in dests]
    for x in vertices:
        table = bundle.tables[x]
        want = expected(x, dests)
        for d, lab, w in zip(dests, labels, want):
            try:
                port = tree_route_step(table, lab)
            except Exception as exc:  # noqa: BLE001 - reported as a failure
                problems.append(f"step {x}->{d} raised {exc!r}")
                continue
            got = -1 if port is ARRIVED else graph.neighbor(x, port)
            if got != w:
                problems.append(f"step {x}->{d}: went to {got}, tree path goes to {w}")
                if len(problems) > 20:
                    return problems
    return problems


@dataclass
class VerificationResult:
    checks: list[Check] = field(default_factory=list)
    advisories: list[Check] = field(default_factory=list)
    stats: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, problems: list[str], checked: int | None = None) -> None:
        detail = "; ".join(problems[:3]) if problems else (f"{checked} checked" if checked is not None else "")
        if problems:
            detail = f"{len(problems)} violations: {detail}"
        self.checks.append(Check(name, not problems, detail))


def _histogram(ratios: np.ndarray) -> dict:
    edges = [1.0, 1.0 + 1e-12, 1.25, 1.5, 2.0, 3.0, 4.0, 6.0, 8.0, math.inf]
    counts, _ = np.histogram(ratios, bins=edges)
    names = ["1", "(1,1.25)", "[1.25,1.5)", "[1.5,2)", "[2,3)", "[3,4)", "[4,6)", "[6,8)", ">=8"]
    return {k: int(c) for k, c in zip(names, counts)}


def _ratio_stats(ratios: list[float]) -> dict:
    if not ratios:
        return {"max": None, "mean": None, "histogram": {}}
    arr = np.asarray(ratios)
    return {"max": float(arr.max()), "mean": float(arr.mean()), "histogram": _histogram(arr)}


def verify(
    graph: WeightedGraph,
    build: ClusterBuild,
    bundles: Mapping[int, TreeRoutingBundle],
    assembly: Assembly,
    level: str = "sampled",
    seed: int = 0,
    eps: Fraction | None = None,
    exhaustive_cap: int = 1000,
    trick: bool = False,
) -> VerificationResult:
    if level not in LEVELS:
        raise ValueError(f"verification level must be one of {LEVELS}")
    n, k = graph.n, build.hierarchy.k
    eps = default_eps(k) if eps is None else Fraction(eps)
    res = VerificationResult()
    if level == "none":
        return res
    if level == "exhaustive" and n > exhaustive_cap:
        raise ValueError(f"exhaustive verification capped at n <= {exhaustive_cap}")

    rng = rng_for(seed, "verify")
    trees = build.trees
    if level == "exhaustive":
        sources = list(range(n))
        roots = [t.root for t in trees]
    else:
        size = max(3, math.ceil(n / 100))
        sources = sorted(rng.choice(n, size=min(size, n), replace=False).tolist())
        root_pool = [t.root for t in trees]
        roots = sorted(rng.choice(root_pool, size=min(max(3, math.ceil(len(root_pool) / 100)), len(root_pool)), replace=False).tolist())
    need = sorted(set(sources) | set(roots))
    dist_rows = distances_from(graph, need)
    row_of = {s: j for j, s in enumerate(need)}
    to_set = [distance_to_set(graph, build.hierarchy.members(i)) for i in range(k + 1)]

    # pivots
    problems = []
    piv = build.pivots
    for i in range(k):
        for v in range(n):
            d_true = to_set[i][v]
            dh, z = piv.dhat[i, v], int(piv.zhat[i, v])
            if not math.isfinite(d_true):
                if math.isfinite(dh):
                    problems.append(f"level {i}: finite estimate for empty level at {v}")
                continue
            if i <= piv.exact_levels:
                if dh != d_true:
                    problems.append(f"level {i}: dhat({v})={dh} != {d_true}")
            elif dh < d_true or not _le_frac(dh, d_true, 1 + eps):
                problems.append(f"level {i}: dhat({v})={dh} vs {d_true}")
            if z < 0 or z not in build.hierarchy.A[i]:
                problems.append(f"level {i}: pivot of {v} not in A_{i}")
    for s in sources:
        for i in range(k):
            z = int(piv.zhat[i, s])
            if z >= 0 and dist_rows[row_of[s], z] > piv.dhat[i, s]:
                problems.append(f"level {i}: d({s}, zhat) > dhat({s})")
    res.add("pivots", problems, n * k)

    # clusters
    agg: dict[str, list[str]] = {"sandwich": [], "estimates": [], "parents": [], "tree_distance": []}
    by_root = build.by_root()
    for u in roots:
        t = by_root[u]
        out = check_tree(graph, t, dist_rows[row_of[u]], to_set[t.level + 1], eps)
        for key, lst in out.items():
            agg[key].extend(lst)
    res.add("cluster sandwich", agg["sandwich"], len(roots))
    res.add("estimate bounds", agg["estimates"], len(roots))
    res.add("parent closure", agg["parents"], len(roots))
    res.add("tree distance bound", agg["tree_distance"], len(roots))

    census = overlap_census(trees, n)
    bound = census.bound(n, k)
    res.advisories.append(Check("overlap <= 4 n^(1/k) ln n", census.max <= bound, f"max {census.max}, bound {bound:.1f}"))
    res.advisories.append(
        Check("overlap <= 4 n^(1/k) log2 n", census.max <= census.bound(n, k, 2), f"bound {census.bound(n, k, 2):.1f}")
    )
    for row in build.hierarchy.size_report():
        if not row["ok"]:
            res.advisories.append(Check(f"|A_{row['level']}| <= 4 n^(1-i/k) ln n", False, f"{row['size']} > {row['bound']:.1f}"))

    # tree routing
    problems = []
    depth_problems = []
    for u in roots:
        t = by_root[u]
        dests = None if level == "exhaustive" else [s for s in sources if s in t.members] + [u]
        problems.extend(check_tree_routing(graph, bundles[u], t.parent_map(), dests))
        if not bundles[u].depth_ok:
            depth_problems.append(f"piece depth {bundles[u].max_piece_depth} > {bundles[u].depth_bound} in tree {u}")
    res.add("tree routing exactness", problems, len(roots))
    res.add("piece depth", depth_problems, len(roots))

    # routing and sketches
    bound_route = stretch_bound(k, eps) if k >= 2 else Fraction(1)
    bound_sketch = sketch_bound(k, eps)
    route_problems, sketch_problems = [], []
    ratios, trick_ratios, sketch_ratios = [], [], []
    max_iters = 0
    for s in sources:
        drow = dist_rows[row_of[s]]
        for v in range(n):
            if v == s:
                continue
            d = int(drow[v])
            r = route(graph, assembly, s, v, trick=False)
            if r.path[-1] != v or any(not graph.has_edge(a, b) for a, b in zip(r.path, r.path[1:])):
                route_problems.append(f"route {s}->{v} is not a walk to {v}")
            if r.cost < d or r.cost * bound_route.denominator > d * bound_route.numerator:
                route_problems.append(f"route {s}->{v} cost {r.cost} vs d={d}")
            ratios.append(r.cost / d)
            if trick:
                rt = route(graph, assembly, s, v, trick=True)
                if rt.cost < d or rt.cost * bound_route.denominator > d * bound_route.numerator:
                    route_problems.append(f"trick route {s}->{v} cost {rt.cost} vs d={d}")
                trick_ratios.append(rt.cost / d)
            est, iters = sketch_dist(assembly.sketches[s], assembly.sketches[v], k)
            max_iters = max(max_iters, iters)
            if est < d or int(est) * bound_sketch.denominator > d * bound_sketch.numerator:
                sketch_problems.append(f"sketch {s},{v}: {est} vs d={d}")
            if iters > k:
                sketch_problems.append(f"sketch {s},{v} used {iters} iterations")
            sketch_ratios.append(est / d)
    res.add("routing stretch", route_problems, len(ratios))
    res.add("sketch stretch", sketch_problems, len(sketch_ratios))
    res.stats["routing_stretch"] = _ratio_stats(ratios)
    res.stats["routing_stretch_trick"] = _ratio_stats(trick_ratios)
    res.stats["sketch_stretch"] = _ratio_stats(sketch_ratios)
    res.stats["sketch_max_iterations"] = max_iters
    res.stats["stretch_bound"] = str(bound_route)
    res.stats["sketch_bound"] = str(bound_sketch)
    res.stats["pairs_checked"] = len(ratios)

    # sizes
    sizes = assembly.size_stats()
    log2sq = math.log2(max(n, 2)) ** 2
    table_cap = 8 * n ** (1 / k) * log2sq
    label_cap = 8 * k * log2sq
    res.checks.append(Check("table words <= 8 n^(1/k) log2^2 n", sizes["table_words_max"] <= table_cap, f"{sizes['table_words_max']} <= {table_cap:.1f}"))
    res.checks.append(Check("label words <= 8 k log2^2 n", sizes["label_words_max"] <= label_cap, f"{sizes['label_words_max']} <= {label_cap:.1f}"))
    return res
