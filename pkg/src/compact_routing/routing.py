"""Routing tables, labels and distance sketches assembled from cluster trees."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Sequence

from .clusters import ClusterTree, PivotTable, default_eps
from .graph import WeightedGraph
from .tree_routing import ARRIVED, TreeLabel, TreeRoutingBundle, TreeTable, tree_route_step


class NoCommonTree(LookupError):
    pass


class NoTerminationByK(RuntimeError):
    pass


@dataclass
class NodeRoutingTable:
    vertex: int
    level: int
    tree_tables: dict[int, TreeTable]
    pivots: tuple[tuple[int, float | int], ...]
    trick_labels: dict[int, TreeLabel] | None = None

    @property
    def base_words(self) -> int:
        return sum(t.words for t in self.tree_tables.values()) + 2 * len(self.pivots)

    @property
    def words(self) -> int:
        extra = 0
        if self.trick_labels:
            extra = sum(1 + l.words for l in self.trick_labels.values())
        return self.base_words + extra


@dataclass(frozen=True)
class NodeLabel:
    """Entry ``i`` is ``(zhat_i(v), tree label of v in that tree)``; the label is ``None`` when missing."""

    vertex: int
    entries: tuple[tuple[int, TreeLabel | None], ...]

    @property
    def words(self) -> int:
        return 1 + sum(1 + (l.words if l is not None else 0) for _, l in self.entries)


@dataclass(frozen=True)
class Sketch:
    vertex: int
    tree_b: Mapping[int, int]
    pivots: tuple[tuple[int, float | int], ...]

    @property
    def words(self) -> int:
        return 2 * len(self.tree_b) + 2 * len(self.pivots)


@dataclass(frozen=True)
class PacketHeader:
    """Destination tree label plus the tree root, fixed once by the source."""

    dest: int
    root: int
    tree_label: TreeLabel

    @property
    def words(self) -> int:
        return 2 + self.tree_label.words


@dataclass
class Assembly:
    tables: dict[int, NodeRoutingTable]
    labels: dict[int, NodeLabel]
    sketches: dict[int, Sketch]
    k: int
    trick: bool

    def size_stats(self) -> dict:
        tw = [t.base_words for t in self.tables.values()]
        tt = [t.words for t in self.tables.values()]
        lw = [l.words for l in self.labels.values()]
        sw = [s.words for s in self.sketches.values()]
        return {
            "table_words_max": max(tw),
            "table_words_mean": sum(tw) / len(tw),
            "table_words_with_trick_max": max(tt),
            "label_words_max": max(lw),
            "label_words_mean": sum(lw) / len(lw),
            "sketch_words_max": max(sw),
            "header_words_max": max(lw) + 1,
        }


def assemble(
    graph: WeightedGraph,
    trees: Sequence[ClusterTree],
    pivots: PivotTable,
    bundles: Mapping[int, TreeRoutingBundle],
    levels: Sequence[int],
    trick: bool = False,
) -> Assembly:
    n, k = graph.n, pivots.k
    by_root = {t.root: t for t in trees}
    tree_tables: dict[int, dict[int, TreeTable]] = {v: {} for v in range(n)}
    tree_b: dict[int, dict[int, int]] = {v: {} for v in range(n)}
    for t in sorted(trees, key=lambda t: t.root):
        bundle = bundles[t.root]
        for v, (b, _, _) in t.members.items():
            tree_tables[v][t.root] = bundle.tables[v]
            tree_b[v][t.root] = b
    tables, labels, sketches = {}, {}, {}
    for v in range(n):
        prow = tuple(pivots.row(v))
        entries = []
        for z, _ in prow:
            lab = bundles[z].labels.get(v) if z >= 0 and z in bundles else None
            entries.append((z, lab))
        labels[v] = NodeLabel(v, tuple(entries))
        sketches[v] = Sketch(v, tree_b[v], prow)
        tables[v] = NodeRoutingTable(v, levels[v], tree_tables[v], prow)
    if trick:
        for v in range(n):
            if levels[v] == 0:
                members = by_root[v].members
                tables[v].trick_labels = {y: bundles[v].labels[y] for y in sorted(members)}
    return Assembly(tables, labels, sketches, k, trick)


def find_tree(table_u: NodeRoutingTable, label_v: NodeLabel) -> tuple[int, int]:
    """First level ``i`` whose tree ``C(zhat_i(v))`` holds both endpoints."""
    for i, (z, lab) in enumerate(label_v.entries):
        if z < 0 or lab is None:
            continue
        if z in table_u.tree_tables:
            return z, i
    raise NoCommonTree(f"no common tree for {table_u.vertex} and {label_v.vertex}")


@dataclass(frozen=True)
class RouteResult:
    path: tuple[int, ...]
    cost: int
    root: int | None
    level: int | None
    trick: bool = False


def make_header(table_u: NodeRoutingTable, label_v: NodeLabel, trick: bool = True) -> tuple[PacketHeader, int | None, bool]:
    if trick and table_u.trick_labels is not None and label_v.vertex in table_u.trick_labels:
        return PacketHeader(label_v.vertex, table_u.vertex, table_u.trick_labels[label_v.vertex]), None, True
    w, i = find_tree(table_u, label_v)
    return PacketHeader(label_v.vertex, w, label_v.entries[i][1]), i, False


def route(graph: WeightedGraph, assembly: Assembly, u: int, v: int, trick: bool | None = None) -> RouteResult:
    if u == v:
        return RouteResult((u,), 0, None, None)
    trick = assembly.trick if trick is None else trick
    header, level, used_trick = make_header(assembly.tables[u], assembly.labels[v], trick)
    path = [u]
    cost = 0
    x = u
    limit = 2 * graph.n + 2
    for _ in range(limit):
        port = tree_route_step(assembly.tables[x].tree_tables[header.root], header.tree_label)
        if port is ARRIVED:
            if x != v:
                raise RuntimeError(f"packet for {v} delivered at {x}")
            return RouteResult(tuple(path), cost, header.root, level, used_trick)
        y = graph.neighbor(x, port)
        cost += graph.weight(x, y)
        path.append(y)
        x = y
    raise RuntimeError(f"routing loop from {u} to {v}")


def stretch_bound(k: int, eps: Fraction | None = None) -> Fraction:
    """``(1+5eps)[1 + (4+26eps)(k - 1 + 1/(4k^2))]`` with ``eps = 1/(48k^4)`` by default."""
    if k < 2:
        raise ValueError("the closed-form routing bound needs k >= 2")
    eps = default_eps(k) if eps is None else Fraction(eps)
    return (1 + 5 * eps) * (1 + (4 + 26 * eps) * (k - 1 + Fraction(1, 4 * k * k)))


def sketch_bound(k: int, eps: Fraction | None = None) -> Fraction:
    """Envelope ``(2k-1)(1+10eps)^(k+2)`` for sketch estimates."""
    eps = default_eps(k) if eps is None else Fraction(eps)
    return (2 * k - 1) * (1 + 10 * eps) ** (k + 2)


def sketch_envelope_replay(k: int, eps: Fraction | None = None) -> Fraction:
    """Worst ratio allowed by the per-iteration recurrence of the sketch query.

    With ``r_i`` bounding the pivot distance of the current endpoint (in units
    of ``d(u, v)``): ``r_0 = 0``, a failed membership test gives
    ``r_{i+1} = (1+eps)(1+6eps)(1 + r_i)``, and stopping at ``i`` returns at
    most ``r_i + (1+eps)^4 (1 + r_i)``.
    """
    eps = default_eps(k) if eps is None else Fraction(eps)
    grow = (1 + eps) * (1 + 6 * eps)
    r = Fraction(0)
    worst = Fraction(0)
    for _ in range(k):
        worst = max(worst, r + (1 + eps) ** 4 * (1 + r))
        r = grow * (1 + r)
    return worst


def sketch_dist(sk_u: Sketch, sk_v: Sketch, k: int | None = None) -> tuple[float | int, int]:
    """Distance estimate and number of membership tests used."""
    k = len(sk_u.pivots) if k is None else k
    a, b = sk_u, sk_v
    i, w = 0, a.vertex
    while w not in b.tree_b:
        i += 1
        if i >= k:
            raise NoTerminationByK(f"no common tree for {sk_u.vertex}, {sk_v.vertex}")
        a, b = b, a
        w = a.pivots[i][0]
    return a.pivots[i][1] + b.tree_b[w], i + 1
