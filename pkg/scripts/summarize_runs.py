#!/usr/bin/env python3
"""Print one line per run report found under a runs directory."""

import argparse
import json
from pathlib import Path


def main() -> int:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument(
        "root", nargs="?", default=Path("runs"), type=Path, help="directory to scan"
    )
    args = parser.parse_args()
    reports = sorted(args.root.glob("**/*-report.json"))
    if not reports:
        print(f"no run reports under {args.root}")
        return 1
    for path in reports:
        rep = json.loads(path.read_text())
        status = "pass" if rep["passed"] else "FAIL"
        value = rep["headline_value"]
        shown = f"{value:.6g}" if isinstance(value, float) else str(value)
        print(
            f"{rep['tag']:12s} {rep['headline']} = {shown:<12s} {status}"
            f"  ({rep['wall_clock_seconds']:.2f}s)  {path}"
        )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
