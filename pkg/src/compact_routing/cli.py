"""Command-line entry point.

Flags fall back to environment variables named ``COMPACT_ROUTING_<FLAG>``
(for example ``COMPACT_ROUTING_K=3``) and then to built-in defaults.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from fractions import Fraction

from .pipeline import RunConfig, route_pair, run
from .verify import LEVELS

ENV_PREFIX = "COMPACT_ROUTING_"


def _env(name: str, default=None):
    return os.environ.get(ENV_PREFIX + name.upper(), default)


def _env_flag(name: str) -> bool:
    return str(_env(name, "")).lower() in {"1", "true", "yes", "on"}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="compact-routing", description="Build and verify a compact routing scheme.")
    src = p.add_mutually_exclusive_group()
    src.add_argument("--graph", default=_env("graph"), help="edge-list file ('n m' header, then 'u v w' lines)")
    src.add_argument("--gen", default=_env("gen", "erdos-renyi"),
                     choices=["erdos-renyi", "random-geometric", "grid-with-random-weights", "grid"])
    p.add_argument("--n", type=int, default=int(_env("n", 100)))
    p.add_argument("--p", type=float, default=_env("p"), help="edge probability (erdos-renyi)")
    p.add_argument("--radius", type=float, default=_env("radius"), help="connection radius (random-geometric)")
    p.add_argument("--rows", type=int, default=_env("rows"))
    p.add_argument("--cols", type=int, default=_env("cols"))
    p.add_argument("--W", type=int, default=_env("w"), help="maximum edge weight")
    p.add_argument("--k", type=int, default=int(_env("k", 2)))
    p.add_argument("--seed", type=int, default=int(_env("seed", 0)))
    p.add_argument("--eps", type=Fraction, default=_env("eps"), help="override eps = 1/(48 k^4)")
    p.add_argument("--trick", action=argparse.BooleanOptionalAction, default=_env_flag("trick") or _env("trick") is None,
                   help="level-0 vertices store labels of their cluster (default on)")
    p.add_argument("--strict", action="store_true", default=_env_flag("strict"))
    p.add_argument("--verify", choices=LEVELS, default=_env("verify", "sampled"))
    p.add_argument("--exhaustive-cap", type=int, default=int(_env("exhaustive_cap", 1000)))
    p.add_argument("--hopset", choices=["reference-complete", "sampled", "empty"], default=_env("hopset", "reference-complete"))
    p.add_argument("--noise", type=Fraction, default=_env("noise"), help="use a noisy source-detection plugin")
    p.add_argument("--out", default=_env("out"), help="directory for report.json, ledger.json, summary.txt, run.csv")
    p.add_argument("--route", nargs=2, type=int, metavar=("U", "V"), help="print the route from U to V")
    return p


def config_from_args(args: argparse.Namespace) -> RunConfig:
    params = {}
    for key in ("p", "radius", "rows", "cols", "W"):
        val = getattr(args, key)
        if val is not None:
            params[key] = val
    return RunConfig(
        graph_path=args.graph, gen=args.gen, n=args.n, params=params, k=args.k, seed=args.seed,
        eps=args.eps, trick=args.trick, strict=args.strict, verify=args.verify,
        exhaustive_cap=args.exhaustive_cap, hopset=args.hopset, noise=args.noise, out=args.out,
    )


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        config = config_from_args(args)
        report, art = run(config)
    except Exception as exc:  # noqa: BLE001
        print(f"error: {exc}", file=sys.stderr)
        return 2
    sys.stdout.write(report.summary())
    if args.route:
        print(json.dumps(route_pair(art, *args.route)))
    return 0 if report.passed else 1


if __name__ == "__main__":
    sys.exit(main())
