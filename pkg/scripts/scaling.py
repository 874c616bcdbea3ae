"""Table/label words and charged rounds as n doubles at fixed k.

    python3 scripts/scaling.py --k 3 --n 125 250 500 1000 --seeds 3
"""

from __future__ import annotations

import argparse
import math
import sys

import numpy as np

from compact_routing.pipeline import RunConfig, run


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--n", type=int, nargs="+", default=[125, 250, 500, 1000])
    p.add_argument("--seeds", type=int, default=3)
    a = p.parse_args(argv)

    print("n,table_max,table_norm,label_max,label_norm,rounds")
    prev = None
    for n in a.n:
        rows = [run(RunConfig(n=n, k=a.k, seed=s, verify="none"))[0] for s in range(a.seeds)]
        table = np.mean([r.sizes["table_words_max"] for r in rows])
        label = np.mean([r.sizes["label_words_max"] for r in rows])
        rounds = np.mean([r.ledger["total_rounds"] for r in rows])
        l2 = math.log2(n) ** 2
        tn, ln_ = table / (n ** (1 / a.k) * l2), label / (a.k * l2)
        growth = f"  (x{tn / prev:.3f})" if prev else ""
        print(f"{n},{table:.1f},{tn:.4f},{label:.1f},{ln_:.4f},{rounds:.0f}{growth}")
        prev = tn
    return 0


if __name__ == "__main__":
    sys.exit(main())
