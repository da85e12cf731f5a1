#!/usr/bin/env python3
"""Run the corpus and print a per-entry timing table.

    python3 scripts/run_corpus.py [DIR] [--jobs N]
"""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dlagrange.cli import run_corpus  # noqa: E402


def main() -> int:
    ap = argparse.ArgumentParser()
    ap.add_argument("directory", nargs="?", default=str(Path(__file__).resolve().parents[1] / "corpus"))
    ap.add_argument("--jobs", type=int, default=1)
    args = ap.parse_args()

    t0 = time.perf_counter()
    rows = run_corpus(args.directory, jobs=args.jobs)
    wall = time.perf_counter() - t0
    width = max((len(r[0]) for r in rows), default=4)
    for name, ok, detail, secs in sorted(rows, key=lambda r: -r[3]):
        print(f"{'PASS' if ok else 'FAIL'}  {name:<{width}}  {secs:7.2f}s  {detail}")
    failed = sum(not r[1] for r in rows)
    print(f"total: {len(rows)}  failed: {failed}  wall: {wall:.1f}s  cpu: {sum(r[3] for r in rows):.1f}s")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
