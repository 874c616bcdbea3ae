import json
import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st

from compact_routing.graph import INF, WeightedGraph, distance_to_set, generate_graph, hop_bounded_dist, oracle
from compact_routing.ledger import RoundLedger
from compact_routing.primitives import (
    NoisySourceDetection,
    PathReportingHopset,
    RootSetTooLarge,
    approx_spt,
    augment,
    build_hopset,
    build_virtual_graph,
    check_hopset,
    check_source_detection,
    dense_all_pairs,
    dense_bellman_ford,
    preprocessing_budget,
    source_detection,
)

from helpers import connected_graphs


def test_path_detection_exact_and_symmetric():
    g = WeightedGraph(3, [(0, 1, 1), (1, 2, 1)])
    sd = source_detection(g, [0, 2], 2, Fraction(1, 10))
    assert sd.dist(1, 0) == 1 and sd.dist(2, 0) == 2 and sd.dist(0, 2) == 2


def test_detection_matches_hop_bounded_search():
    g = generate_graph("erdos-renyi", 60, {"p": 0.1}, seed=5)
    sources = [3, 9, 14, 22, 31, 40, 47, 58]
    sd = source_detection(g, sources, 5, Fraction(1, 4))
    assert np.array_equal(sd.d, hop_bounded_dist(g, sources, 5).dist)
    assert check_source_detection(g, sd) == []


def test_detection_preconditions_and_charge():
    g = WeightedGraph(3, [(0, 1, 1), (1, 2, 1)])
    with pytest.raises(ValueError):
        source_detection(g, [], 2, Fraction(1, 2))
    with pytest.raises(ValueError):
        source_detection(g, [0], 0, Fraction(1, 2))
    L = RoundLedger()
    source_detection(g, [0, 2], 2, Fraction(1, 4), L)
    assert L.total_rounds == (2 + 2 + g.hop_diameter) * 4


@given(connected_graphs(min_n=3, max_n=10, max_w=10**4), st.integers(0, 50), st.integers(1, 6))
def test_noisy_detector_keeps_contract(g, seed, B):
    eps = Fraction(1, 20)
    sources = list(range(0, g.n, 2))
    sd = source_detection(g, sources, B, eps, detector=NoisySourceDetection(eps, seed))
    assert check_source_detection(g, sd) == []


def test_noisy_detector_actually_perturbs():
    g = generate_graph("erdos-renyi", 40, {"p": 0.2, "W": 10**6}, seed=1)
    eps = Fraction(1, 10)
    sd = source_detection(g, [0, 5], g.n, eps, detector=NoisySourceDetection(eps, 3))
    assert (sd.d > oracle(g).dist[[0, 5]]).any()
    assert check_source_detection(g, sd) == []


def test_checker_flags_a_bad_detection():
    g = WeightedGraph(3, [(0, 1, 1), (1, 2, 1)])
    sd = source_detection(g, [0], 2, Fraction(1, 10))
    sd.d[0, 2] = 1
    assert check_source_detection(g, sd)


def test_full_budget_virtual_graph_is_distance_graph():
    g = generate_graph("random-geometric", 25, {}, seed=2)
    vg = build_virtual_graph(g, range(g.n), g.n - 1, Fraction(1, 8))
    D = oracle(g).dist
    off = ~np.eye(g.n, dtype=bool)
    assert np.array_equal(vg.weight[off], D[off])


def test_budget_excludes_far_pair():
    g = WeightedGraph(4, [(0, 1, 1), (1, 2, 1), (2, 3, 1)])
    vg = build_virtual_graph(g, [0, 3], 2, Fraction(1, 8))
    assert vg.edges() == []
    dist, _ = dense_all_pairs(vg.weight)
    assert dist[0, 1] == INF


def test_sampled_virtual_graph_dominates_distances():
    g = generate_graph("erdos-renyi", 100, {"p": 0.05}, seed=8)
    Vp = list(range(0, 100, 7))
    vg = build_virtual_graph(g, Vp, 4, Fraction(1, 8))
    dist, _ = dense_all_pairs(vg.weight)
    D = oracle(g).dist
    for i, u in enumerate(Vp):
        for j, v in enumerate(Vp):
            assert dist[i, j] >= D[u, v]


def _cycle_virtual_graph():
    g = WeightedGraph(6, [(i, (i + 1) % 6, w) for i, w in enumerate([3, 1, 4, 1, 5, 9])])
    return build_virtual_graph(g, range(6), 1, Fraction(1, 4))


def test_single_edge_hopset():
    g = WeightedGraph(2, [(0, 1, 3)])
    hs = build_hopset(build_virtual_graph(g, [0, 1], 1, Fraction(1, 4)), Fraction(1, 12))
    assert [(e.x, e.y, e.b, e.path) for e in hs.edges] == [(0, 1, 3, (0, 1))]


def test_cycle_hopset_gives_one_hop_distances():
    vg = _cycle_virtual_graph()
    hs = build_hopset(vg, Fraction(1, 12))
    assert hs.beta == 1
    g2 = augment(vg, hs)
    exact, _ = dense_all_pairs(vg.weight)
    off = ~np.eye(6, dtype=bool)
    assert np.array_equal(g2.weight[off], exact[off])
    for e in hs.edges:
        assert e.prefix[-1] == e.b and e.prefix[0] == 0
    assert check_hopset(vg, hs) == []


@pytest.mark.parametrize("impl", ["sampled", "empty"])
def test_partial_hopsets_declare_enough_hops(impl):
    g = generate_graph("random-geometric", 80, {}, seed=6)
    vg = build_virtual_graph(g, range(0, 80, 3), 6, Fraction(1, 8))
    hs = build_hopset(vg, Fraction(1, 24), impl, seed=1)
    assert check_hopset(vg, hs) == []
    if impl == "empty":
        assert augment(vg, hs).weight.tolist() == vg.weight.tolist()


def test_hopset_plugin_and_json():
    vg = _cycle_virtual_graph()
    hs = build_hopset(vg, Fraction(1, 12), impl=lambda vg, eps: PathReportingHopset((), 6, Fraction(0)))
    assert hs.edges == () and hs.beta == 6
    full = build_hopset(vg, Fraction(1, 12))
    data = json.loads(json.dumps(full.to_dict()))
    assert len(data["edges"]) == 15


def test_hopset_path_expands_to_graph_walk():
    g = generate_graph("erdos-renyi", 60, {"p": 0.08}, seed=12)
    Vp = list(range(0, 60, 5))
    vg = build_virtual_graph(g, Vp, 6, Fraction(1, 8))
    hs = build_hopset(vg, Fraction(1, 24))
    sd = vg.detection
    for e in hs.edges:
        total = 0
        for a, b in zip(e.path, e.path[1:]):
            x = a
            while x != b:
                p = sd.parent_of(x, b)
                total += g.weight(x, p)
                x = p
        assert total <= e.b


def test_hopset_charge_is_recorded():
    L = RoundLedger()
    build_hopset(_cycle_virtual_graph(), Fraction(1, 12), ledger=L, k=2)
    assert L.stages[-1].name == "preprocess.hopset" and L.total_rounds > 0


def test_dense_bellman_ford_counts_iterations():
    W = np.full((3, 3), INF)
    W[0, 1] = W[1, 0] = 2
    W[1, 2] = W[2, 1] = 2
    vals, via, used = dense_bellman_ford(W, np.array([[0.0, INF, INF]]), 5)
    assert vals.tolist() == [[0, 2, 4]] and used == 2 and via[0, 2] == 1


def test_spt_single_root():
    g = generate_graph("erdos-renyi", 100, {"p": 0.05}, seed=3)
    res = approx_spt(g, [17], Fraction(1, 48), 2, seed=3)
    d = oracle(g).dist[17]
    assert res.dhat[17] == 0 and res.zhat[17] == 17
    assert (res.dhat >= d).all() and (res.dhat * 49 <= d * 48 + d).all()


@pytest.mark.parametrize("seed", range(3))
def test_spt_eq3_on_twelve_roots(seed):
    g = generate_graph("random-geometric", 100, {}, seed=seed)
    A = list(range(0, 96, 8))
    eps = Fraction(1, 48)
    res = approx_spt(g, A, eps, 2, seed=seed)
    dA = distance_to_set(g, A)
    D = oracle(g).dist
    for v in range(g.n):
        assert dA[v] <= res.dhat[v]
        assert res.dhat[v] * eps.denominator <= dA[v] * (eps.denominator + eps.numerator)
        assert D[v, res.zhat[v]] <= res.dhat[v]
    for a in A:
        assert res.dhat[a] == 0 and res.zhat[a] == a


def test_spt_rejects_large_root_set():
    g = generate_graph("erdos-renyi", 100, {"p": 0.05}, seed=3)
    with pytest.raises(RootSetTooLarge):
        approx_spt(g, range(95), Fraction(1, 48), 2)  # limit 2*10*ln(100) ~ 92.1


def test_preprocessing_budget_by_parity():
    n = 400
    assert preprocessing_budget(n, 2) == math.ceil(4 * math.sqrt(n) * math.log(n))
    assert preprocessing_budget(n, 3) == math.ceil(4 * n ** (0.5 + 1 / 6) * math.log(n))
