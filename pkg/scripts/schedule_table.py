"""Print solved noise schedules and step sizes for image-scale settings."""

import argparse

from scoreconf.schedule import build_schedule, geometric_schedule, solve_epsilon

SETTINGS = [
    # name, sigma1, sigmaL, D
    ("cifar10-32", 50.0, 0.01, 3 * 32 * 32),
    ("celeba-64", 90.0, 0.01, 3 * 64 * 64),
]


def main():
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--target-c", type=float, default=0.5)
    p.add_argument("--T", type=int, default=5)
    args = p.parse_args()
    print(f"{'setting':<12} {'D':>6} {'gamma':>10} {'L':>5} {'epsilon':>10}")
    for name, s1, sL, D in SETTINGS:
        s = build_schedule(s1, sL, D, args.target_c)
        eps = solve_epsilon(s, args.T).epsilon
        print(f"{name:<12} {D:>6} {s.gamma:>10.6f} {s.L:>5} {eps:>10.3e}")
    # step size when the number of scales is fixed externally
    s = geometric_schedule(90.0, 0.01, 500, 3 * 64 * 64)
    print(f"{'celeba L=500':<12} {s.D:>6} {s.gamma:>10.6f} {s.L:>5} {solve_epsilon(s, args.T).epsilon:>10.3e}")


if __name__ == "__main__":
    main()
