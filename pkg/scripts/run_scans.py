#!/usr/bin/env python3
"""Run every CLI scan and matrix demonstration into one results directory.

Usage: python scripts/run_scans.py [--outdir results] [--Z 1]
"""
import argparse
import json
import sys
from pathlib import Path

from dirac_minmax.cli import main as cli

SCANS = {
    "shower.csv": ["scan", "shower"],
    "fig5.csv": ["scan", "fig5"],
    "dft_fallacy.csv": ["scan", "dft-fallacy"],
    "maxmin.csv": ["scan", "maxmin"],
    "solve_sto.json": ["solve"],
    "solve_exact_power.json": ["solve", "--trial", "exact-power"],
    "nepp.json": ["matrix", "nepp"],
    "collapse.json": ["matrix", "collapse"],
    "conjugation.json": ["matrix", "conjugation"],
}


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--outdir", default="results")
    ap.add_argument("--Z", default="1")
    args = ap.parse_args()
    out = Path(args.outdir)
    failed = []
    for name, argv in SCANS.items():
        code = cli(argv + ["--Z", args.Z, "--out", str(out / name)])
        print(f"{'ok ' if code == 0 else 'ERR'} {' '.join(argv):<28} -> {out / name}")
        if code:
            failed.append(name)
    for name in ("solve_sto.json", "solve_exact_power.json"):
        path = out / name
        if path.exists():
            doc = json.loads(path.read_text())
            print(f"{name}: eps-mc2 = {doc['eps_minus_mc2']:.12f}, gap = {doc['gap_to_exact']:.2e}")
    return 1 if failed else 0


if __name__ == "__main__":
    sys.exit(main())
