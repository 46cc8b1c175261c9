#!/usr/bin/env python3
"""Table of min-max ground energies per charge and coupling family.

Usage: python scripts/minmax_table.py --Z 1,20,50,90 [--csv table.csv]
"""
import argparse
import time

from dirac_minmax import PotentialSpec
from dirac_minmax.cli import csv_text, parse_grid
from dirac_minmax.driver import COUPLINGS, TrialFamily, outer_minimize, virial_check

TRIALS = [(TrialFamily(), fam) for fam in COUPLINGS] + [
    (TrialFamily("sto", 2), "same-radial"),
    (TrialFamily("exact-power"), "same-radial"),
]


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--Z", default="1,20,50,90")
    ap.add_argument("--csv", default=None, help="also write the table as CSV")
    args = ap.parse_args()

    rows = []
    header = ["Z", "trial", "n", "coupling", "zeta_star", "eps_minus_mc2", "gap_to_exact", "virial", "seconds"]
    print(f"{'Z':>5} {'trial':>12} {'n':>2} {'coupling':>12} {'zeta*':>12} {'eps-mc2':>18} "
          f"{'gap':>10} {'virial':>10}")
    for Z in parse_grid(args.Z):
        pot = PotentialSpec(float(Z))
        for trial, fam in TRIALS:
            t0 = time.perf_counter()
            res = outer_minimize(trial, fam, pot)
            vir = virial_check(res, pot)
            dt = time.perf_counter() - t0
            gap = res.eps_shift - pot.exact_1s_shifted()
            rows.append([Z, trial.kind, trial.n, fam, res.zeta_star, res.eps_shift, gap, vir, dt])
            print(f"{Z:5g} {trial.kind:>12} {trial.n:2d} {fam:>12} {res.zeta_star:12.8f} "
                  f"{res.eps_shift:18.12f} {gap:10.2e} {vir:10.2e}")
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(csv_text(header, rows))


if __name__ == "__main__":
    main()
