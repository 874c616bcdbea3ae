"""Run the construction over a grid of (n, k, seed) and append one CSV row per run.

    python3 scripts/run_grid.py --n 100 300 --k 2 3 4 --seeds 5 --out grid.csv
"""

from __future__ import annotations

import argparse
import csv
import sys
import time
from dataclasses import dataclass, field
from itertools import product

from compact_routing.pipeline import RunConfig, run


@dataclass
class GridConfig:
    sizes: list[int] = field(default_factory=lambda: [100, 300])
    ks: list[int] = field(default_factory=lambda: [2, 3, 4])
    seeds: int = 3
    gen: str = "erdos-renyi"
    verify: str = "sampled"
    hopset: str = "reference-complete"
    noise: str | None = None
    out: str = "grid.csv"


FIELDS = [
    "gen", "n", "m", "D", "k", "seed", "seconds", "total_rounds", "overlap_max", "overlap_bound",
    "table_words_max", "label_words_max", "sketch_words_max",
    "routing_stretch_max", "routing_stretch_mean", "trick_stretch_max", "sketch_stretch_max",
    "stretch_bound", "passed",
]


def one_row(cfg: GridConfig, n: int, k: int, seed: int) -> dict:
    t0 = time.perf_counter()
    report, _ = run(RunConfig(gen=cfg.gen, n=n, k=k, seed=seed, verify=cfg.verify, hopset=cfg.hopset, noise=cfg.noise))
    secs = time.perf_counter() - t0
    st = report.stretch
    rs, ts, ss = st.get("routing_stretch", {}), st.get("routing_stretch_trick", {}), st.get("sketch_stretch", {})
    return {
        "gen": cfg.gen, "n": n, "m": report.graph["m"], "D": report.graph["D"], "k": k, "seed": seed,
        "seconds": round(secs, 3), "total_rounds": report.ledger["total_rounds"],
        "overlap_max": report.overlap["max"], "overlap_bound": round(report.overlap["bound_ln"], 1),
        "table_words_max": report.sizes["table_words_max"], "label_words_max": report.sizes["label_words_max"],
        "sketch_words_max": report.sizes["sketch_words_max"],
        "routing_stretch_max": rs.get("max"), "routing_stretch_mean": rs.get("mean"),
        "trick_stretch_max": ts.get("max"), "sketch_stretch_max": ss.get("max"),
        "stretch_bound": st.get("stretch_bound"), "passed": report.passed,
    }


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--n", type=int, nargs="+", default=[100, 300])
    p.add_argument("--k", type=int, nargs="+", default=[2, 3, 4])
    p.add_argument("--seeds", type=int, default=3)
    p.add_argument("--gen", default="erdos-renyi")
    p.add_argument("--verify", default="sampled", choices=["none", "sampled", "exhaustive"])
    p.add_argument("--hopset", default="reference-complete", choices=["reference-complete", "sampled", "empty"])
    p.add_argument("--noise", default=None)
    p.add_argument("--out", default="grid.csv")
    a = p.parse_args(argv)
    cfg = GridConfig(a.n, a.k, a.seeds, a.gen, a.verify, a.hopset, a.noise, a.out)

    failures = 0
    with open(cfg.out, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=FIELDS)
        w.writeheader()
        for n, k, seed in product(cfg.sizes, cfg.ks, range(cfg.seeds)):
            row = one_row(cfg, n, k, seed)
            w.writerow(row)
            fh.flush()
            failures += not row["passed"]
            print(f"n={n} k={k} seed={seed} {row['seconds']}s stretch={row['routing_stretch_max']} passed={row['passed']}")
    print(f"wrote {cfg.out}; {failures} failing runs")
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
