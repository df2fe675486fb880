"""Train 2-D score nets and report score accuracy and mode recovery."""

import argparse

import numpy as np

from scoreconf.experiments import gaussian_score_experiment, mixture_mode_experiment
from scoreconf.io import write_csv


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--iterations", type=int, default=20_000)
    p.add_argument("--hidden", type=int, default=128)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--samples-csv", default=None, help="write the mixture samples here")
    args = p.parse_args()

    g = gaussian_score_experiment(args.iterations, args.hidden, args.seed)
    print("sigma    rel.err(raw)  rel.err(ema)")
    for s, a, b in zip(g.probe_sigmas, g.errors_raw, g.errors_ema):
        print(f"{s:6.3f}   {a:11.4f}  {b:12.4f}")

    m = mixture_mode_experiment(args.iterations, args.hidden, args.seed)
    print(f"mode occupancy {np.round(m.occupancy, 3).tolist()} (eps={m.config.epsilon:.3e}, T={m.config.T})")
    if args.samples_csv:
        write_csv(args.samples_csv, m.samples)


if __name__ == "__main__":
    main()
