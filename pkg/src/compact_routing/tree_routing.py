"""Exact routing on a tree subgraph with small tables and labels.

The tree is cut at a random set of portal vertices into pieces of small
depth.  Each piece carries interval (DFS) routing with heavy-child
defaults, and a second interval scheme runs on the virtual tree whose nodes
are the piece roots.  A packet is routed inside its current piece until it
reaches the portal leading to the next piece.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from .graph import WeightedGraph, rng_for
from .ledger import RoundLedger, simulate_staggered_broadcast


class NotASubgraph(ValueError):
    pass


class NotATree(ValueError):
    pass


class MalformedLabel(ValueError):
    pass


class _Arrived:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "ARRIVED"


ARRIVED = _Arrived()


@dataclass(frozen=True, slots=True)
class LocalLabel:
    """DFS entry time inside the piece plus the light edges from the piece root."""

    a: int
    light: tuple[tuple[int, int], ...] = ()

    @property
    def words(self) -> int:
        return 1 + 2 * len(self.light)

    def to_list(self) -> list:
        return [self.a, [list(e) for e in self.light]]


@dataclass(frozen=True, slots=True)
class GlobalRow:
    """Virtual-tree row shared by every vertex of a piece."""

    heavy: int | None
    portal_label: LocalLabel | None
    portal_port: int | None
    a: int
    b: int

    @property
    def words(self) -> int:
        return 4 + (self.portal_label.words if self.portal_label else 1)


@dataclass(frozen=True, slots=True)
class TreeTable:
    vertex: int
    parent: int | None
    parent_port: int | None
    heavy: int | None
    heavy_port: int | None
    a: int
    b: int
    owner: int
    glob: GlobalRow

    @property
    def words(self) -> int:
        return 7 + self.glob.words

    def to_list(self) -> list:
        g = self.glob
        return [
            self.parent, self.parent_port, self.heavy, self.heavy_port, self.a, self.b, self.owner,
            g.heavy, g.portal_label.to_list() if g.portal_label else None, g.portal_port, g.a, g.b,
        ]


@dataclass(frozen=True, slots=True)
class GlobalEntry:
    """Light virtual-tree edge ``v -> w`` entered through ``x`` (in piece ``v``) via ``port``."""

    v: int
    w: int
    label: LocalLabel
    port: int

    @property
    def words(self) -> int:
        return 3 + self.label.words


@dataclass(frozen=True, slots=True)
class TreeLabel:
    local: LocalLabel
    a_global: int
    entries: tuple[GlobalEntry, ...] = ()

    @property
    def words(self) -> int:
        return self.local.words + 1 + sum(e.words for e in self.entries)

    def to_list(self) -> list:
        return [self.local.to_list(), self.a_global, [[e.v, e.w, e.label.to_list(), e.port] for e in self.entries]]


@dataclass
class TreeRoutingBundle:
    root: int
    tables: dict[int, TreeTable]
    labels: dict[int, TreeLabel]
    portals: tuple[int, ...]
    gamma: float
    depth_bound: int
    max_piece_depth: int
    seed: int = 0

    @property
    def depth_ok(self) -> bool:
        return self.max_piece_depth <= self.depth_bound

    def max_table_words(self) -> int:
        return max(t.words for t in self.tables.values())

    def max_label_words(self) -> int:
        return max(l.words for l in self.labels.values())

    def to_dict(self) -> dict:
        return {
            "root": self.root,
            "portals": list(self.portals),
            "tables": {str(v): t.to_list() for v, t in sorted(self.tables.items())},
            "labels": {str(v): l.to_list() for v, l in sorted(self.labels.items())},
        }


def _local_step(table: TreeTable, target: LocalLabel):
    if target.a == table.a:
        return ARRIVED
    if table.a < target.a <= table.b:
        for vertex, port in target.light:
            if vertex == table.vertex:
                return port
        if table.heavy_port is None:
            raise MalformedLabel(f"vertex {table.vertex} has no child toward entry {target.a}")
        return table.heavy_port
    if table.owner == table.vertex:
        raise MalformedLabel(f"entry {target.a} lies outside the piece of {table.owner}")
    return table.parent_port


def tree_route_step(table: TreeTable, label: TreeLabel):
    """Port toward the destination with ``label``, or ``ARRIVED``."""
    g = table.glob
    if label.a_global == g.a:
        return _local_step(table, label.local)
    if not (g.a < label.a_global <= g.b):
        if table.parent_port is None:
            raise MalformedLabel(f"global entry {label.a_global} outside the tree")
        return table.parent_port
    for e in label.entries:
        if e.v == table.owner:
            portal, port = e.label, e.port
            break
    else:
        if g.heavy is None:
            raise MalformedLabel(f"piece {table.owner} has no heavy child for entry {label.a_global}")
        portal, port = g.portal_label, g.portal_port
    if portal.a == table.a:
        return port
    return _local_step(table, portal)


def route_in_tree(bundle: TreeRoutingBundle, graph: WeightedGraph, source: int, dest: int) -> list[int]:
    """Vertex sequence produced by repeated ``tree_route_step`` calls."""
    label = bundle.labels[dest]
    path = [source]
    x = source
    for _ in range(2 * len(bundle.tables) + 2):
        port = tree_route_step(bundle.tables[x], label)
        if port is ARRIVED:
            return path
        x = graph.neighbor(x, port)
        path.append(x)
    raise RuntimeError(f"routing loop from {source} to {dest}")


def _validate(graph: WeightedGraph, tree: Mapping[int, int | None]) -> tuple[int, dict[int, list[int]], list[int]]:
    roots = [v for v, p in tree.items() if p is None]
    if len(roots) != 1:
        raise NotATree(f"expected one root, found {len(roots)}")
    children: dict[int, list[int]] = {v: [] for v in tree}
    for v, p in tree.items():
        if p is None:
            continue
        if p not in tree:
            raise NotATree(f"parent {p} of {v} is not a tree vertex")
        if not graph.has_edge(v, p):
            raise NotASubgraph(f"tree edge ({v},{p}) is not a graph edge")
        children[p].append(v)
    for lst in children.values():
        lst.sort()
    order = [roots[0]]
    for v in order:
        order.extend(children[v])
    if len(order) != len(tree):
        raise NotATree("parent pointers contain a cycle")
    return roots[0], children, order


def _heavy(kids: Sequence[int], size: Mapping[int, int]) -> int | None:
    if not kids:
        return None
    return min(kids, key=lambda c: (-size[c], c))


def _dfs_intervals(root: int, kids: Mapping[int, list[int]], heavy: Mapping[int, int | None]) -> dict[int, tuple[int, int]]:
    """Preorder entry and last-descendant entry, heavy child first."""
    out: dict[int, tuple[int, int]] = {}
    counter = 0
    stack: list[tuple[int, bool]] = [(root, False)]
    first: dict[int, int] = {}
    while stack:
        v, done = stack.pop()
        if done:
            out[v] = (first[v], counter - 1)
            continue
        first[v] = counter
        counter += 1
        stack.append((v, True))
        h = heavy.get(v)
        rest = [c for c in kids.get(v, ()) if c != h]
        for c in reversed(rest):
            stack.append((c, False))
        if h is not None:
            stack.append((h, False))
    return out


def default_gamma(n: int, s: int = 1) -> float:
    return math.sqrt(n / max(s, 1))


def build_tree_routing(
    graph: WeightedGraph,
    tree: Mapping[int, int | None],
    gamma: float | None = None,
    seed: int = 0,
    ledger: RoundLedger | None = None,
    name: str | None = None,
) -> TreeRoutingBundle:
    z, children, order = _validate(graph, tree)
    n = graph.n
    gamma = default_gamma(n) if gamma is None else float(gamma)
    draws = rng_for(seed, "tree-portals", z).random(n)
    U = {v for v in order if draws[v] < gamma / n} | {z}

    owner: dict[int, int] = {}
    depth: dict[int, int] = {}
    for v in order:
        if v in U:
            owner[v], depth[v] = v, 0
        else:
            p = tree[v]
            owner[v], depth[v] = owner[p], depth[p] + 1
    pkids = {v: [c for c in children[v] if c not in U] for v in order}
    size: dict[int, int] = {}
    for v in reversed(order):
        size[v] = 1 + sum(size[c] for c in pkids[v])
    heavy = {v: _heavy(pkids[v], size) for v in order}
    intervals: dict[int, tuple[int, int]] = {}
    for w in sorted(U):
        intervals.update(_dfs_intervals(w, pkids, heavy))
    light: dict[int, tuple[tuple[int, int], ...]] = {}
    for v in order:
        if v in U:
            light[v] = ()
        else:
            p = tree[v]
            light[v] = light[p] if heavy[p] == v else light[p] + ((p, graph.port(p, v)),)
    local = {v: LocalLabel(intervals[v][0], light[v]) for v in order}

    # virtual tree on the piece roots
    tparent = {w: (owner[tree[w]] if tree[w] is not None else None) for w in U}
    tkids: dict[int, list[int]] = {w: [] for w in U}
    for w, p in tparent.items():
        if p is not None:
            tkids[p].append(w)
    for lst in tkids.values():
        lst.sort()
    torder = [z]
    for w in torder:
        torder.extend(tkids[w])
    tsize: dict[int, int] = {}
    for w in reversed(torder):
        tsize[w] = 1 + sum(tsize[c] for c in tkids[w])
    theavy = {w: _heavy(tkids[w], tsize) for w in torder}
    tint = _dfs_intervals(z, tkids, theavy)
    rows: dict[int, GlobalRow] = {}
    for w in torder:
        h = theavy[w]
        if h is None:
            rows[w] = GlobalRow(None, None, None, *tint[w])
        else:
            y = tree[h]
            rows[w] = GlobalRow(h, local[y], graph.port(y, h), *tint[w])
    entries: dict[int, tuple[GlobalEntry, ...]] = {z: ()}
    for w in torder[1:]:
        p = tparent[w]
        if theavy[p] == w:
            entries[w] = entries[p]
        else:
            x = tree[w]
            entries[w] = entries[p] + (GlobalEntry(p, w, local[x], graph.port(x, w)),)

    tables: dict[int, TreeTable] = {}
    labels: dict[int, TreeLabel] = {}
    for v in order:
        p = tree[v]
        h = heavy[v]
        tables[v] = TreeTable(
            v, p, graph.port(v, p) if p is not None else None,
            h, graph.port(v, h) if h is not None else None,
            intervals[v][0], intervals[v][1], owner[v], rows[owner[v]],
        )
        labels[v] = TreeLabel(local[v], tint[owner[v]][0], entries[owner[v]])

    B = math.ceil(4 * n / gamma * math.log(max(n, 2)))
    bundle = TreeRoutingBundle(z, tables, labels, tuple(sorted(U)), gamma, B, max(depth.values()), seed)
    if ledger is not None:
        charge_single_tree(ledger, n, gamma, graph.hop_diameter, name or f"tree[{z}]")
    return bundle


def charge_single_tree(ledger: RoundLedger, n: int, gamma: float, D: int, name: str) -> None:
    L = math.ceil(math.log2(max(n, 2)))
    B = math.ceil(4 * n / gamma * math.log(max(n, 2)))
    ledger.charge(f"{name}.pieces", f"B * log n = {B} * {L}", B * L)
    g = math.ceil(gamma)
    ledger.charge(f"{name}.virtual", f"gamma * log^2 n + D = {g} * {L}^2 + {D}", g * L * L + D)


@dataclass
class ParallelReport:
    s: int
    gamma: float
    interval: int
    start_times: dict[int, int] = field(default_factory=dict)
    charged_broadcast: int = 0
    simulated_completion: int | None = None
    violations: int | None = None


def _as_parent_map(tree) -> Mapping[int, int | None]:
    return tree.parent_map() if hasattr(tree, "parent_map") else tree


def build_all_trees_parallel(
    graph: WeightedGraph,
    trees: Iterable,
    gamma: float | None = None,
    alpha: int = 20,
    seed: int = 0,
    ledger: RoundLedger | None = None,
    strict: bool = False,
    start_constant: float = 4.0,
) -> tuple[dict[int, TreeRoutingBundle], ParallelReport]:
    """Tree routing for many trees at once, with the staggered-start accounting.

    Every tree gets the bundle ``build_tree_routing`` would produce with the
    same ``gamma`` and ``seed``.
    """
    maps = [_as_parent_map(t) for t in trees]
    n = graph.n
    load: Counter = Counter()
    for m in maps:
        load.update(m.keys())
    s = max(load.values()) if load else 1
    gamma = default_gamma(n, s) if gamma is None else float(gamma)
    bundles: dict[int, TreeRoutingBundle] = {}
    for m in maps:
        b = build_tree_routing(graph, m, gamma, seed)
        bundles[b.root] = b

    ln = math.log(max(n, 2))
    interval = max(1, math.ceil(start_constant * ln * math.sqrt(n * s)))
    report = ParallelReport(s, gamma, interval)
    rng = rng_for(seed, "start-times")
    roots = sorted(bundles)
    starts = rng.integers(1, interval + 1, size=len(roots))
    report.start_times = {r: int(t) for r, t in zip(roots, starts)}
    B = math.ceil(4 * n / gamma * ln)
    D = graph.hop_diameter
    L = math.ceil(math.log2(max(n, 2)))
    report.charged_broadcast = alpha * (interval + B)
    if ledger is not None:
        if len(maps) == 1:
            charge_single_tree(ledger, n, gamma, D, f"tree[{roots[0]}]")
        else:
            g = math.ceil(gamma)
            ledger.charge("trees.pieces", f"alpha * (c ln n sqrt(n s) + B) = {alpha} * ({interval} + {B})", alpha * (interval + B))
            ledger.charge("trees.convergecast", f"gamma * s + D = {g} * {s} + {D}", g * s + D)
            ledger.charge("trees.tables", f"gamma * s * log n + D = {g} * {s} * {L} + {D}", g * s * L + D)
            ledger.charge(
                "trees.distribute",
                f"B log n + c ln n sqrt(n s) log^2 n = {B} * {L} + {interval} * {L}^2",
                B * L + interval * L * L,
            )
            ledger.charge("trees.labels", f"gamma * s * log^2 n + D = {g} * {s} * {L}^2 + {D}", g * s * L * L + D)
    if strict:
        pieces, piece_starts = [], []
        for r in roots:
            b = bundles[r]
            for w in b.portals:
                piece = {v: (t.parent if v != w else None) for v, t in b.tables.items() if t.owner == w}
                pieces.append(piece)
                piece_starts.append(report.start_times[r])
        completion, violations = simulate_staggered_broadcast(pieces, piece_starts, alpha)
        report.simulated_completion, report.violations = completion, violations
        if ledger is not None:
            ledger.record_simulation("trees.pieces", completion, violations)
    return bundles, report
