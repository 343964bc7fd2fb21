"""SR with 0-3 post-mapping obstacles on the route, with and without the
local planner."""

import argparse

from hiernav.experiments import obstacle_cases, obstacle_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=50)
    ap.add_argument("--seed0", type=int, default=7000)
    args = ap.parse_args()
    cases = obstacle_cases(args.n, 3, seed0=args.seed0)
    sweep = obstacle_sweep(cases)
    print(f"scenarios={len(cases)}")
    print("obstacles  full_SR full_SPL  nolocal_SR nolocal_SPL")
    for k in sorted(sweep["full"]):
        f, nl = sweep["full"][k], sweep["no_local"][k]
        print(f"{k:>9}   {f.sr:.3f}   {f.spl:.3f}      {nl.sr:.3f}      {nl.spl:.3f}")


if __name__ == "__main__":
    main()
