"""Full system on clean generated scenarios: SR, SPL and per-episode wall time."""

import argparse

import numpy as np

from hiernav.experiments import generated_corpus, spread_tasks
from hiernav.metrics import BenchConfig, run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=100)
    ap.add_argument("--seed0", type=int, default=0)
    ap.add_argument("--out", default="clean_report.json")
    args = ap.parse_args()
    scen = generated_corpus(args.n, (5, 10), args.seed0)
    wall: list[float] = []
    rep = run_bench(scen, BenchConfig(), spread_tasks(scen), timings=wall)
    rep.write(args.out)
    print(f"episodes={len(rep.rows)} SR={rep.sr:.3f} SPL={rep.spl:.3f} "
          f"wall_mean={np.mean(wall):.3f}s wall_max={np.max(wall):.3f}s")


if __name__ == "__main__":
    main()
