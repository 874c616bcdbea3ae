"""Small independent oracles shared by the tests."""

import math

from hypothesis import strategies as st

from compact_routing.graph import WeightedGraph


def brute_simple_paths(n, edges):
    """All-pairs distances by enumerating simple paths (tiny graphs only)."""
    w = {}
    for u, v, c in edges:
        w[(u, v)] = w[(v, u)] = c
    dist = [[math.inf] * n for _ in range(n)]
    for s in range(n):
        dist[s][s] = 0
        stack = [(s, 0, {s})]
        while stack:
            x, d, seen = stack.pop()
            for y in range(n):
                if (x, y) in w and y not in seen:
                    nd = d + w[(x, y)]
                    dist[s][y] = min(dist[s][y], nd)
                    stack.append((y, nd, seen | {y}))
    return dist


def brute_walks(n, edges, source, B):
    """Minimum weight over all walks from ``source`` with at most ``B`` edges."""
    adj = {v: [] for v in range(n)}
    for u, v, c in edges:
        adj[u].append((v, c))
        adj[v].append((u, c))
    best = {source: 0}
    frontier = {source: 0}
    for _ in range(B):
        nxt = {}
        for x, d in frontier.items():
            for y, c in adj[x]:
                if d + c < nxt.get(y, math.inf):
                    nxt[y] = d + c
        for y, d in nxt.items():
            best[y] = min(best.get(y, math.inf), d)
        frontier = nxt
    return [best.get(v, math.inf) for v in range(n)]


def union_find_components(n, edges):
    parent = list(range(n))

    def find(x):
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    for u, v, *_ in edges:
        parent[find(u)] = find(v)
    return len({find(v) for v in range(n)})


def tree_path(parent, u, v):
    up = [u]
    while parent[up[-1]] is not None:
        up.append(parent[up[-1]])
    vp = [v]
    while parent[vp[-1]] is not None:
        vp.append(parent[vp[-1]])
    on_v = set(vp)
    i = next(i for i, x in enumerate(up) if x in on_v)
    j = vp.index(up[i])
    return up[: i + 1] + vp[:j][::-1]


@st.composite
def connected_graphs(draw, min_n=2, max_n=12, max_w=20):
    """Random connected graph: a random tree plus extra edges."""
    n = draw(st.integers(min_n, max_n))
    max_w = min(max_w, n**4)
    edges = {}
    for v in range(1, n):
        u = draw(st.integers(0, v - 1))
        edges[(u, v)] = draw(st.integers(1, max_w))
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    for a, b in extra:
        if a != b:
            key = (min(a, b), max(a, b))
            if key not in edges:
                edges[key] = draw(st.integers(1, max_w))
    return WeightedGraph(n, [(u, v, w) for (u, v), w in edges.items()])
