"""Exact-score annealed sampling over CIFAR-10 test images; needs $CIFAR10_DIR."""

import argparse
import json
import logging
import sys

from scoreconf.config import resolve
from scoreconf.data import distance_stats, load_cifar10
from scoreconf.experiments import cifar_dir, mixture_distance_experiment


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--data", default=None, help="CIFAR-10 binary directory (default: $CIFAR10_DIR)")
    p.add_argument("--chains", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default="mixture_distances.json")
    args = p.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(message)s")
    d = cifar_dir(args.data)
    if d is None:
        print("no CIFAR-10 directory: pass --data or set CIFAR10_DIR", file=sys.stderr)
        return 3
    train = load_cifar10(d, "train")
    print("train distance stats", distance_stats(train, 10_000, args.seed))
    test = load_cifar10(d, "test").x[:10_000]
    res = mixture_distance_experiment(test, resolve({}).fig2.runs, args.chains, args.seed, log=logging.info)
    for r in res["rows"]:
        print(f"{r['name']:>10}: mean pairwise distance {r['mean_pairwise']:.3f}")
    with open(args.out, "w") as fh:
        json.dump(res, fh, indent=2)
    return 0


if __name__ == "__main__":
    sys.exit(main())
