"""Acceptance suite: one PASS/FAIL line per criterion.

Every check here recomputes its reference values from scipy's Dijkstra, not
from the library's verification module.  Run alone with ``pytest -m acceptance -s``.
"""

import math
from fractions import Fraction
from functools import lru_cache

import numpy as np
import pytest
from scipy.sparse import csgraph

from compact_routing.clusters import build_clusters, default_eps
from compact_routing.graph import generate_graph, random_spanning_tree, rng_for
from compact_routing.ledger import RoundLedger
from compact_routing.primitives import NoisySourceDetection, approx_spt
from compact_routing.routing import assemble, route, sketch_bound, sketch_dist, sketch_envelope_replay, stretch_bound
from compact_routing.tree_routing import build_all_trees_parallel, build_tree_routing, route_in_tree
from compact_routing.verify import check_tree_routing

from helpers import tree_path

pytestmark = pytest.mark.acceptance

RESULTS: list[str] = []

SIZES = (100, 300, 500)
KS = (2, 3, 4, 5)
SEEDS = range(5)
ROUTE_SIZES = (100, 200)
ROUTE_KS = (2, 3, 4)


def record(criterion: int, title: str, ok: bool, detail: str) -> None:
    line = f"{'PASS' if ok else 'FAIL'} criterion {criterion:2d} {title}: {detail}"
    RESULTS.append(line)
    print(line)


def all_pairs(g):
    return csgraph.dijkstra(g.csr, directed=False)


def to_set(D, A):
    return D[:, sorted(A)].min(axis=1) if A else np.full(D.shape[0], np.inf)


def le(value, bound, factor: Fraction) -> bool:
    return int(value) * factor.denominator <= int(bound) * factor.numerator


def lt(value, bound, factor: Fraction) -> bool:
    return int(value) * factor.numerator < int(bound) * factor.denominator


def instance_graph(n, seed, noisy):
    params = {"W": 10**6} if noisy else {}
    return generate_graph("erdos-renyi", n, params, seed)


@lru_cache(maxsize=None)
def instance(n, k, seed, noisy=False):
    g = instance_graph(n, seed, noisy)
    eps = default_eps(k)
    detector = NoisySourceDetection(eps / 2, seed) if noisy else None
    cb = build_clusters(g, k, seed=seed, eps=eps, detector=detector)
    return g, cb, eps


def tree_audit(g, cb, eps, D):
    """Violation counts for sandwich, estimates, parents, tree distance and pivots."""
    k = cb.hierarchy.k
    A = cb.hierarchy.A
    dA = [to_set(D, A[i]) for i in range(k + 1)]
    f4 = (1 + eps) ** 4
    f6 = 1 + 6 * eps
    bad = {"sandwich": 0, "estimates": 0, "parents": 0, "tree_distance": 0, "pivots": 0}
    for t in cb.trees:
        u = t.root
        nxt = dA[t.level + 1]
        finite = np.isfinite(nxt)
        in_c = ~finite | (D[u] < nxt)
        in_c6 = ~finite.copy()
        for v in np.flatnonzero(finite):
            in_c6[v] = lt(D[u, v], nxt[v], f6)
        member = np.zeros(g.n, dtype=bool)
        member[list(t.members)] = True
        bad["sandwich"] += int(np.sum(member & ~in_c) + np.sum(in_c6 & ~member))
        if t.members.get(u, (None, 1))[:2] != (0, None):
            bad["parents"] += 1
        for v, (b, p, _) in t.members.items():
            if b < D[u, v] or not le(b, D[u, v], f4):
                bad["estimates"] += 1
            if v == u:
                continue
            if p not in t.members or not g.has_edge(v, p) or b < g.weight(v, p) + t.members[p][0]:
                bad["parents"] += 1
            x, total, steps = v, 0, 0
            while x != u and steps <= len(t.members):
                px = t.members.get(x, (None, None))[1]
                if px is None:
                    break
                total += g.weight(x, px)
                x, steps = px, steps + 1
            if x != u:
                bad["parents"] += 1
            elif total < D[u, v] or not le(total, D[u, v], f4):
                bad["tree_distance"] += 1
    piv = cb.pivots
    for i in range(k):
        for v in range(g.n):
            true, dh, z = dA[i][v], piv.dhat[i, v], int(piv.zhat[i, v])
            if not math.isfinite(true):
                bad["pivots"] += int(math.isfinite(dh))
                continue
            if z not in A[i] or D[v, z] > dh:
                bad["pivots"] += 1
            if i <= math.ceil(k / 2):
                bad["pivots"] += int(dh != true)
            elif dh < true or not le(dh, true, 1 + eps):
                bad["pivots"] += 1
    return bad


@lru_cache(maxsize=None)
def grid_audit(noisy=False):
    total = {"sandwich": 0, "estimates": 0, "parents": 0, "tree_distance": 0, "pivots": 0}
    runs = 0
    for n in SIZES:
        for seed in SEEDS:
            g = instance_graph(n, seed, noisy)
            D = all_pairs(g)
            for k in KS:
                _, cb, eps = instance(n, k, seed, noisy)
                for key, val in tree_audit(g, cb, eps, D).items():
                    total[key] += val
                runs += 1
    return total, runs


@lru_cache(maxsize=None)
def route_audit(noisy=False):
    out = {"route": 0, "trick": 0, "sketch": 0, "iters": 0, "pairs": 0, "max_ratio": {}, "max_trick": {}, "max_sketch": {}}
    for n in ROUTE_SIZES:
        for seed in SEEDS:
            g = instance_graph(n, seed, noisy)
            D = all_pairs(g)
            for k in ROUTE_KS:
                _, cb, eps = instance(n, k, seed, noisy)
                bundles, _ = build_all_trees_parallel(g, cb.trees, seed=seed)
                asm = assemble(g, cb.trees, cb.pivots, bundles, cb.hierarchy.level, trick=True)
                rb, sb = stretch_bound(k, eps), sketch_bound(k, eps)
                worst = worst_t = worst_s = 0.0
                for u in range(n):
                    for v in range(n):
                        if u == v:
                            continue
                        d = int(D[u, v])
                        r = route(g, asm, u, v, trick=False)
                        valid = r.path[0] == u and r.path[-1] == v and all(g.has_edge(a, b) for a, b in zip(r.path, r.path[1:]))
                        cost = sum(g.weight(a, b) for a, b in zip(r.path, r.path[1:]))
                        if not valid or cost != r.cost or cost < d or not le(cost, d, rb):
                            out["route"] += 1
                        rt = route(g, asm, u, v, trick=True)
                        if rt.path[-1] != v or rt.cost < d or not le(rt.cost, d, rb):
                            out["trick"] += 1
                        est, iters = sketch_dist(asm.sketches[u], asm.sketches[v], k)
                        if est < d or not le(est, d, sb):
                            out["sketch"] += 1
                        if iters > k:
                            out["iters"] += 1
                        worst = max(worst, cost / d)
                        worst_t = max(worst_t, rt.cost / d)
                        worst_s = max(worst_s, est / d)
                        out["pairs"] += 1
                for key, val in (("max_ratio", worst), ("max_trick", worst_t), ("max_sketch", worst_s)):
                    out[key][k] = max(out[key].get(k, 0.0), val)
    return out


def fmt_max(d):
    return ", ".join(f"k={k}: {v:.4f}" for k, v in sorted(d.items()))


# -- 1 ------------------------------------------------------------------------


def test_tree_routing_exactness():
    bad, checked = 0, 0
    for n in (100, 500, 2000):
        for j in range(10):
            g = generate_graph("erdos-renyi", n, {}, seed=1000 + j)
            T = random_spanning_tree(g, seed=j)
            bundle = build_tree_routing(g, T, seed=j)
            bad += len(check_tree_routing(g, bundle, T))
            if n <= 500:
                for s in range(n):
                    for t in range(n):
                        if route_in_tree(bundle, g, s, t) != tree_path(T, s, t):
                            bad += 1
            checked += n * n
    record(1, "tree routing stretch 1", bad == 0, f"{bad} deviations over {checked} ordered pairs, 30 trees")
    assert bad == 0


# -- 2-4, 7 -------------------------------------------------------------------


def test_cluster_sandwich():
    total, runs = grid_audit()
    record(2, "cluster sandwich", total["sandwich"] == 0, f"{total['sandwich']} violations over {runs} instances")
    assert total["sandwich"] == 0


def test_estimate_and_tree_distance_bounds():
    total, runs = grid_audit()
    bad = total["estimates"] + total["tree_distance"]
    record(3, "estimate and tree-distance bounds", bad == 0,
           f"{total['estimates']} estimate, {total['tree_distance']} tree-distance violations over {runs} instances")
    assert bad == 0


def test_parent_closure():
    total, runs = grid_audit()
    record(4, "parent closure and chains", total["parents"] == 0, f"{total['parents']} violations over {runs} instances")
    assert total["parents"] == 0


def test_pivot_contracts():
    total, runs = grid_audit()
    record(7, "pivot contracts", total["pivots"] == 0, f"{total['pivots']} violations over {runs} instances")
    assert total["pivots"] == 0


# -- 5, 6 ---------------------------------------------------------------------


def test_routing_stretch():
    out = route_audit()
    bad = out["route"] + out["trick"]
    bounds = ", ".join(f"k={k}: {stretch_bound(k)} ~ {float(stretch_bound(k)):.4f}" for k in ROUTE_KS)
    record(5, "routing stretch", bad == 0,
           f"{out['route']} + {out['trick']} (trick) violations over {out['pairs']} pairs; max {fmt_max(out['max_ratio'])}; "
           f"trick max {fmt_max(out['max_trick'])}; bounds {bounds}")
    assert bad == 0


def test_sketch_stretch():
    for k in range(1, 17):
        assert sketch_envelope_replay(k) <= sketch_bound(k)
    out = route_audit()
    bad = out["sketch"] + out["iters"]
    record(6, "sketch stretch", bad == 0,
           f"{out['sketch']} bound and {out['iters']} iteration violations over {out['pairs']} pairs; max {fmt_max(out['max_sketch'])}")
    assert bad == 0


# -- 8 ------------------------------------------------------------------------


def test_overlap():
    n = 300
    failed_seeds = []
    worst = {}
    for seed in range(20):
        violated = False
        for k in KS:
            _, cb, _ = instance(n, k, seed)
            load = np.zeros(n, dtype=int)
            for t in cb.trees:
                load[list(t.members)] += 1
            bound = 4 * n ** (1 / k) * math.log(n)
            worst[k] = max(worst.get(k, 0), int(load.max()))
            violated |= bool(load.max() > bound)
        if violated:
            failed_seeds.append(seed)
    ok = len(failed_seeds) <= 1
    detail = ", ".join(f"k={k}: max {m} <= {4 * n ** (1 / k) * math.log(n):.1f}" for k, m in sorted(worst.items()))
    record(8, "overlap (natural log)", ok, f"n={n}, violated on {len(failed_seeds)}/20 seeds; {detail}")
    assert ok


# -- 9 ------------------------------------------------------------------------


def sizes_for(n, k, seed):
    g, cb, _ = instance(n, k, seed)
    bundles, _ = build_all_trees_parallel(g, cb.trees, seed=seed)
    asm = assemble(g, cb.trees, cb.pivots, bundles, cb.hierarchy.level)
    return asm.size_stats()


def test_size_bounds():
    bad = []
    for n in SIZES:
        log2sq = math.log2(n) ** 2
        for k in KS:
            for seed in SEEDS:
                s = sizes_for(n, k, seed)
                if s["table_words_max"] > 8 * n ** (1 / k) * log2sq or s["label_words_max"] > 8 * k * log2sq:
                    bad.append((n, k, seed))
    growth = {}
    for k in KS:
        ratios = []
        for n in (125, 250, 500):
            m = np.mean([sizes_for(n, k, seed)["table_words_max"] for seed in SEEDS])
            ratios.append(m / (n ** (1 / k) * math.log2(n) ** 2))
        growth[k] = max(b / a for a, b in zip(ratios, ratios[1:]))
    ok = not bad and all(r <= 1.25 for r in growth.values())
    record(9, "table and label sizes", ok,
           f"{len(bad)} cap violations; doubling growth of normalized table words "
           + ", ".join(f"k={k}: {r:.3f}" for k, r in sorted(growth.items())))
    assert ok


# -- 10 -----------------------------------------------------------------------


def cluster_like_trees(g, count, size, seed, max_load=8):
    """BFS-grown subtrees of random spanning trees; no vertex lies in more than ``max_load``."""
    trees = []
    load = np.zeros(g.n, dtype=int)
    for j in range(count):
        T = random_spanning_tree(g, seed * 100 + j, root=(j * 37 + seed) % g.n)
        root = next(v for v, p in T.items() if p is None)
        kids = {}
        for v, p in T.items():
            if p is not None:
                kids.setdefault(p, []).append(v)
        keep, frontier = {root: None}, [root]
        while frontier and len(keep) < size:
            x = frontier.pop(0)
            for c in sorted(kids.get(x, [])):
                if len(keep) < size and load[c] < max_load:
                    keep[c] = x
                    frontier.append(c)
        load[list(keep)] += 1
        trees.append(keep)
    return trees


def test_ledger_consistency():
    L = RoundLedger()
    L.charge_broadcast(17, 5, "b")
    L.charge_bellman_ford(12, 3, "bf")
    L.charge_broadcast(0, 9, "empty")
    units_ok = [s.rounds for s in L.stages] == [22, 36, 9] and L.total_rounds == 67

    clean, s_max = 0, 0
    for seed in range(20):
        g = generate_graph("erdos-renyi", 300, {"p": 0.03}, seed=seed)
        trees = cluster_like_trees(g, 30, 30, seed)
        ledger = RoundLedger(strict_mode=True)
        _, rep = build_all_trees_parallel(g, trees, seed=seed, ledger=ledger, strict=True)
        s_max = max(s_max, rep.s)
        pieces = ledger.stage("trees.pieces").rounds
        B = math.ceil(4 * 300 / rep.gamma * math.log(300))
        interval = math.ceil(4 * math.log(300) * math.sqrt(300 * rep.s))
        formula_ok = pieces == 20 * (interval + B) and rep.interval == interval
        if formula_ok and rep.violations == 0 and rep.simulated_completion <= rep.charged_broadcast:
            clean += 1
    ok = units_ok and clean >= 18 and s_max <= 8
    record(10, "ledger formulas and strict broadcast", ok,
           f"unit formulas {'match' if units_ok else 'differ'}; {clean}/20 seeds with zero congestion violations (s <= {s_max})")
    assert ok


# -- 11 -----------------------------------------------------------------------


def test_approx_spt():
    bad, runs = 0, 0
    for n in (100, 300):
        for seed in SEEDS:
            g = generate_graph("erdos-renyi", n, {}, seed=seed)
            D = all_pairs(g)
            rng = rng_for(seed, "acceptance-spt")
            size = int(2 * math.sqrt(n) * math.log(n))
            A = sorted(rng.choice(n, size=size, replace=False).tolist())
            eps = default_eps(3)
            res = approx_spt(g, A, eps, 3, seed=seed)
            true = to_set(D, A)
            for v in range(n):
                if res.dhat[v] < true[v] or not le(res.dhat[v], true[v], 1 + eps):
                    bad += 1
                z = int(res.zhat[v])
                if z not in A or D[v, z] > res.dhat[v]:
                    bad += 1
            runs += 1
    record(11, "approximate shortest-path tree", bad == 0, f"{bad} violations over {runs} instances, |A| = floor(2 sqrt(n) ln n)")
    assert bad == 0


# -- 12 -----------------------------------------------------------------------


def test_noisy_source_detection_substitution():
    total, runs = grid_audit(noisy=True)
    out = route_audit(noisy=True)
    tree_bad = total["sandwich"] + total["estimates"] + total["tree_distance"] + total["parents"]
    route_bad = out["route"] + out["trick"] + out["sketch"] + out["iters"]
    ok = tree_bad == 0 and route_bad == 0
    record(12, "noisy source detection (eps' = eps/2, W = 1e6)", ok,
           f"{tree_bad} tree violations over {runs} instances; {route_bad} routing/sketch violations over {out['pairs']} pairs; "
           f"routing max {fmt_max(out['max_ratio'])}")
    assert ok
