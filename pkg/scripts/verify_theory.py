"""Run the verifier batteries and write a JSON report."""

import argparse
import json
import sys

from scoreconf.verify import SUITES, run_suites


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--suite", action="append", choices=SUITES)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="verify.json")
    args = p.parse_args()
    report = run_suites(args.suite or SUITES, args.seed)
    with open(args.out, "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
    for c in report["checks"]:
        if not c["passed"]:
            print("FAILED", c["suite"], c["name"])
    print(f"{report['n_checks'] - report['n_failed']}/{report['n_checks']} passed -> {args.out}")
    return 0 if report["passed"] else 1


if __name__ == "__main__":
    sys.exit(main())
