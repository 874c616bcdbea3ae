"""End-to-end construction runs with reports."""

from __future__ import annotations

import csv
import io
import json
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .clusters import ClusterBuild, build_clusters, default_eps, overlap_census
from .graph import WeightedGraph, generate_graph
from .ledger import RoundLedger
from .primitives import NoisySourceDetection
from .routing import Assembly, assemble, route
from .tree_routing import ParallelReport, TreeRoutingBundle, build_all_trees_parallel
from .verify import LEVELS, VerificationResult, verify


@dataclass
class RunConfig:
    graph_path: str | None = None
    gen: str = "erdos-renyi"
    n: int = 100
    params: dict = field(default_factory=dict)
    k: int = 2
    seed: int = 0
    eps: Fraction | None = None
    trick: bool = True
    strict: bool = False
    verify: str = "sampled"
    exhaustive_cap: int = 1000
    hopset: str = "reference-complete"
    noise: Fraction | None = None
    out: str | None = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if self.verify not in LEVELS:
            raise ValueError(f"verify must be one of {LEVELS}")
        if self.eps is not None:
            self.eps = Fraction(self.eps)
        if self.noise is not None:
            self.noise = Fraction(self.noise)

    @property
    def effective_eps(self) -> Fraction:
        return self.eps if self.eps is not None else default_eps(self.k)

    def echo(self) -> dict:
        d = asdict(self)
        d["eps"] = str(self.effective_eps)
        d["noise"] = str(self.noise) if self.noise is not None else None
        d.pop("out")
        return d


@dataclass
class Artifacts:
    graph: WeightedGraph
    build: ClusterBuild
    bundles: dict[int, TreeRoutingBundle]
    parallel: ParallelReport
    assembly: Assembly
    ledger: RoundLedger


@dataclass
class RunReport:
    config: dict
    graph: dict
    ledger: dict
    hierarchy: list
    overlap: dict
    sizes: dict
    stretch: dict
    checks: list
    advisories: list
    strict: dict

    @property
    def passed(self) -> bool:
        return all(c["passed"] for c in self.checks)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def summary(self) -> str:
        c = self.config
        lines = [
            f"graph: {self.graph['source']} n={self.graph['n']} m={self.graph['m']} D={self.graph['D']}",
            f"k={c['k']} seed={c['seed']} eps={c['eps']} trick={c['trick']} strict={c['strict']} verify={c['verify']}",
            f"rounds charged: {self.ledger['total_rounds']} over {len(self.ledger['stages'])} stages",
            f"overlap max: {self.overlap['max']}",
            f"table words max: {self.sizes['table_words_max']}  label words max: {self.sizes['label_words_max']}",
        ]
        rs = self.stretch.get("routing_stretch", {})
        if rs.get("max") is not None:
            lines.append(f"routing stretch max {rs['max']:.4f} mean {rs['mean']:.4f} (bound {self.stretch['stretch_bound']})")
            ts = self.stretch.get("routing_stretch_trick", {})
            if ts.get("max") is not None:
                lines.append(f"trick routing stretch max {ts['max']:.4f} mean {ts['mean']:.4f}")
            ss = self.stretch["sketch_stretch"]
            lines.append(f"sketch stretch max {ss['max']:.4f} mean {ss['mean']:.4f}")
        for ch in self.checks:
            lines.append(f"{'PASS' if ch['passed'] else 'FAIL'} {ch['name']}: {ch['detail']}")
        for ch in self.advisories:
            lines.append(f"{'ok' if ch['passed'] else 'note'} {ch['name']}: {ch['detail']}")
        lines.append("ALL CHECKS PASS" if self.passed else "SOME CHECKS FAILED")
        return "\n".join(lines) + "\n"

    def csv_row(self) -> str:
        c = self.config
        rs = self.stretch.get("routing_stretch", {})
        ss = self.stretch.get("sketch_stretch", {})
        row = {
            "n": self.graph["n"], "m": self.graph["m"], "k": c["k"], "seed": c["seed"], "gen": c["gen"],
            "total_rounds": self.ledger["total_rounds"], "overlap_max": self.overlap["max"],
            "table_words_max": self.sizes["table_words_max"], "label_words_max": self.sizes["label_words_max"],
            "routing_stretch_max": rs.get("max"), "sketch_stretch_max": ss.get("max"), "passed": self.passed,
        }
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=list(row))
        w.writeheader()
        w.writerow(row)
        return buf.getvalue()


def load_graph(config: RunConfig) -> tuple[WeightedGraph, str]:
    if config.graph_path:
        return WeightedGraph.load(config.graph_path), config.graph_path
    return generate_graph(config.gen, config.n, config.params, config.seed), config.gen


def construct(graph: WeightedGraph, config: RunConfig) -> Artifacts:
    eps = config.effective_eps
    ledger = RoundLedger(strict_mode=config.strict)
    detector = NoisySourceDetection(config.noise, config.seed) if config.noise is not None else None
    try:
        build = build_clusters(graph, config.k, config.seed, eps, ledger, detector, config.hopset)
    except Exception as exc:
        raise RuntimeError(f"cluster construction failed: {exc}") from exc
    try:
        bundles, par = build_all_trees_parallel(
            graph, build.trees, seed=config.seed, ledger=ledger, strict=config.strict,
            alpha=ledger.alpha, start_constant=ledger.start_constant,
        )
    except Exception as exc:
        raise RuntimeError(f"tree routing failed: {exc}") from exc
    asm = assemble(graph, build.trees, build.pivots, bundles, build.hierarchy.level, trick=config.trick)
    return Artifacts(graph, build, bundles, par, asm, ledger)


def report_for(config: RunConfig, source: str, art: Artifacts, ver: VerificationResult) -> RunReport:
    g = art.graph
    census = overlap_census(art.build.trees, g.n)
    checks = [asdict(c) for c in ver.checks]
    strict = {}
    if config.strict:
        p = art.parallel
        ok = p.violations == 0 and p.simulated_completion <= p.charged_broadcast
        checks.append({
            "name": "strict staggered broadcast", "passed": bool(ok),
            "detail": f"violations {p.violations}, simulated {p.simulated_completion} <= charged {p.charged_broadcast}",
        })
        strict = {"s": p.s, "gamma": p.gamma, "interval": p.interval, "violations": p.violations,
                  "simulated": p.simulated_completion, "charged": p.charged_broadcast}
    return RunReport(
        config=config.echo(),
        graph={"source": source, "n": g.n, "m": g.m, "D": g.hop_diameter},
        ledger=art.ledger.to_dict(),
        hierarchy=art.build.hierarchy.size_report(),
        overlap={"max": census.max, "histogram": {str(a): b for a, b in census.histogram.items()},
                 "bound_ln": census.bound(g.n, config.k), "bound_log2": census.bound(g.n, config.k, 2)},
        sizes=art.assembly.size_stats(),
        stretch=ver.stats,
        checks=checks,
        advisories=[asdict(c) for c in ver.advisories],
        strict=strict,
    )


def run(config: RunConfig) -> tuple[RunReport, Artifacts]:
    graph, source = load_graph(config)
    art = construct(graph, config)
    ver = verify(
        graph, art.build, art.bundles, art.assembly, config.verify, config.seed,
        config.effective_eps, config.exhaustive_cap, trick=config.trick,
    )
    report = report_for(config, source, art, ver)
    if config.out:
        write_outputs(report, art, config.out)
    return report, art


def write_outputs(report: RunReport, art: Artifacts, out: str) -> None:
    path = Path(out)
    path.mkdir(parents=True, exist_ok=True)
    (path / "report.json").write_text(report.to_json())
    (path / "ledger.json").write_text(art.ledger.to_json())
    (path / "summary.txt").write_text(report.summary())
    (path / "run.csv").write_text(report.csv_row())
    (path / "trees.json").write_text(json.dumps([t.to_dict() for t in art.build.trees], sort_keys=True))


def route_pair(art: Artifacts, u: int, v: int, trick: bool | None = None) -> dict:
    r = route(art.graph, art.assembly, u, v, trick)
    return {"source": u, "target": v, "path": list(r.path), "cost": r.cost, "tree": r.root, "level": r.level, "trick": r.trick}
