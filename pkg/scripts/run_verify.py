"""Run the verification matrix and print a per-cell summary.

    python3 scripts/run_verify.py [--config scripts/configs/verify_default.json] [--out runs/verify]
"""

import argparse
import collections
import sys
import time
from pathlib import Path

from parabolic import cli
from parabolic import config as cfgmod

HERE = Path(__file__).resolve().parent


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--config", type=Path, default=HERE / "configs" / "verify_default.json")
    parser.add_argument("--out", type=Path, default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args(argv)

    cfg = cfgmod.load(args.config)
    start = time.perf_counter()
    doc = cli.run(cfg, args.out, cli.resolve_threads(args.threads))
    elapsed = time.perf_counter() - start

    cells = collections.defaultdict(lambda: [0, 0, 0.0])
    for check in doc["checks"]:
        cell = check["name"].rsplit("/", 1)[0]
        stats = cells[cell]
        stats[0] += 1
        stats[1] += not check["pass"]
        if check["tolerance"] > 0:
            stats[2] = max(stats[2], check["residual"] / check["tolerance"])
    print(f"{'cell':40s} {'checks':>6s} {'failed':>6s} {'worst residual/tol':>19s}")
    for cell, (n, bad, worst) in sorted(cells.items()):
        print(f"{cell:40s} {n:6d} {bad:6d} {worst:19.3g}")
    print(f"{len(doc['checks'])} checks, {sum(c[1] for c in cells.values())} failed, {elapsed:.1f} s")
    return 0 if doc["all_pass"] else 1


if __name__ == "__main__":
    sys.exit(main())
