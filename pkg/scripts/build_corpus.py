#!/usr/bin/env python3
"""Write the shipped corpus (problem files plus .expect sidecars).

    python3 scripts/build_corpus.py [OUTDIR]

Entries are generated rather than hand-typed so that the (p, q) families
and the synthetic round trips stay consistent with each other.
"""

from __future__ import annotations

import random
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "src"))

from dlagrange.corpus_data import family_entries, fixed_entries, synthetic_entries  # noqa: E402


def main(argv):
    out = Path(argv[1]) if len(argv) > 1 else Path(__file__).resolve().parents[1] / "corpus"
    out.mkdir(parents=True, exist_ok=True)
    entries = fixed_entries() + family_entries() + synthetic_entries(random.Random(2024), 3)
    for name, problem, expect in entries:
        (out / f"{name}.problem").write_text(problem)
        (out / f"{name}.expect").write_text(expect)
    print(f"wrote {len(entries)} entries to {out}")


if __name__ == "__main__":
    main(sys.argv)
