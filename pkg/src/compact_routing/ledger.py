"""CONGEST round accounting.

Every O(.) cost is recorded with constant factor 1: the ledger stores the
formula's value, not a claim about any concrete CONGEST implementation.
"""

from __future__ import annotations

import csv
import heapq
import io
import json
from collections import defaultdict
from dataclasses import asdict, dataclass, field
from typing import Mapping, Sequence


@dataclass(frozen=True)
class Stage:
    name: str
    formula: str
    rounds: int
    messages: int = 0


@dataclass(frozen=True)
class Simulation:
    """Outcome of a strict-mode simulation of the stage with the same name."""

    stage: str
    rounds: int
    violations: int


@dataclass
class RoundLedger:
    strict_mode: bool = False
    alpha: int = 20
    start_constant: float = 4.0
    stages: list[Stage] = field(default_factory=list)
    simulations: list[Simulation] = field(default_factory=list)

    def charge(self, name: str, formula: str, rounds: int, messages: int = 0) -> "RoundLedger":
        if rounds < 0 or messages < 0:
            raise ValueError(f"negative charge for stage {name!r}")
        self.stages.append(Stage(name, formula, int(rounds), int(messages)))
        return self

    def charge_broadcast(self, M: int, D: int, name: str = "broadcast") -> "RoundLedger":
        """Pipelined broadcast of ``M`` O(1)-word messages: ``M + D`` rounds."""
        if M < 0:
            raise ValueError("message count must be non-negative")
        return self.charge(name, f"M + D = {M} + {D}", M + D, messages=M)

    def charge_bellman_ford(self, iterations: int, per_iteration_congestion: int, name: str = "bellman-ford") -> "RoundLedger":
        if iterations < 0 or per_iteration_congestion < 0:
            raise ValueError("iterations and congestion must be non-negative")
        return self.charge(
            name,
            f"iterations * congestion = {iterations} * {per_iteration_congestion}",
            iterations * per_iteration_congestion,
        )

    def record_simulation(self, stage: str, rounds: int, violations: int) -> None:
        self.simulations.append(Simulation(stage, int(rounds), int(violations)))

    @property
    def total_rounds(self) -> int:
        return sum(s.rounds for s in self.stages)

    @property
    def total_messages(self) -> int:
        return sum(s.messages for s in self.stages)

    def rounds_for(self, prefix: str) -> int:
        return sum(s.rounds for s in self.stages if s.name.startswith(prefix))

    def stage(self, name: str) -> Stage:
        for s in self.stages:
            if s.name == name:
                return s
        raise KeyError(name)

    def to_dict(self) -> dict:
        return {
            "strict_mode": self.strict_mode,
            "alpha": self.alpha,
            "start_constant": self.start_constant,
            "total_rounds": self.total_rounds,
            "total_messages": self.total_messages,
            "stages": [asdict(s) for s in self.stages],
            "simulations": [asdict(s) for s in self.simulations],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def csv_row(self, **extra) -> str:
        row = dict(extra)
        row["total_rounds"] = self.total_rounds
        row["total_messages"] = self.total_messages
        row["stages"] = len(self.stages)
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row))
        writer.writeheader()
        writer.writerow(row)
        return buf.getvalue()


def simulate_staggered_broadcast(
    trees: Sequence[Mapping[int, int | None]],
    start_times: Sequence[int],
    alpha: int = 20,
) -> tuple[int, int]:
    """Stage-by-stage delivery of one root-to-leaves broadcast per tree.

    Tree ``j`` is a parent map whose root (parent ``None``) starts sending at
    stage ``start_times[j]``.  A vertex holding the message tries to push it to
    each child during the next stage of ``alpha`` rounds; each directed edge
    carries at most ``alpha`` messages per stage.  Overflow is a violation and
    the surplus (largest tree indices first) waits for the following stage.

    Returns ``(completion_round, violations)`` where the completion round is
    ``alpha * (last delivery stage + 1)``.
    """
    if len(trees) != len(start_times):
        raise ValueError("one start time per tree required")
    children: list[dict[int, list[int]]] = []
    heap: list[tuple[int, int, int, int]] = []
    completion = 0
    for j, (tree, st) in enumerate(zip(trees, start_times)):
        kids: dict[int, list[int]] = defaultdict(list)
        roots = [v for v, p in tree.items() if p is None]
        if len(roots) != 1:
            raise ValueError(f"tree {j} has {len(roots)} roots")
        for v, p in tree.items():
            if p is not None:
                kids[p].append(v)
        for lst in kids.values():
            lst.sort()
        children.append(kids)
        completion = max(completion, alpha * int(st))
        for c in kids.get(roots[0], ()):
            heapq.heappush(heap, (int(st), j, roots[0], c))

    violations = 0
    while heap:
        stage = heap[0][0]
        batch: dict[tuple[int, int], list[tuple[int, int]]] = defaultdict(list)
        while heap and heap[0][0] == stage:
            _, j, x, c = heapq.heappop(heap)
            batch[(x, c)].append((j, c))
        for edge, demands in batch.items():
            demands.sort()
            if len(demands) > alpha:
                violations += 1
                for j, c in demands[alpha:]:
                    heapq.heappush(heap, (stage + 1, j, edge[0], c))
                demands = demands[:alpha]
            for j, c in demands:
                completion = max(completion, alpha * (stage + 1))
                for cc in children[j].get(c, ()):
                    heapq.heappush(heap, (stage + 1, j, c, cc))
    return completion, violations
