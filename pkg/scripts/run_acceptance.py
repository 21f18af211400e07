"""Run the acceptance suite and print one line per criterion.

Usage: python3 scripts/run_acceptance.py [--suite acceptance|quick] [--out report.tsv]
"""

import argparse
import sys

from listingdedup.bench import format_report, run_acceptance

if __name__ == "__main__":
    p = argparse.ArgumentParser()
    p.add_argument("--suite", default="acceptance")
    p.add_argument("--out")
    args = p.parse_args()
    results = run_acceptance(args.suite)
    for r in results:
        print(r.line(), flush=True)
    if args.out:
        with open(args.out, "w") as fh:
            fh.write(format_report(results) + "\n")
    sys.exit(0 if all(r.passed for r in results) else 1)
