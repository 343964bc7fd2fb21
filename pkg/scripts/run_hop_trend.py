"""SPL per start-goal hop bucket for the full system and the no-global ablation."""

import argparse

from hiernav.experiments import generated_corpus, hop_bucket_jobs
from hiernav.metrics import BenchConfig, run_bench


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--n", type=int, default=60)
    ap.add_argument("--seed0", type=int, default=5000)
    args = ap.parse_args()
    scen = generated_corpus(args.n, (6, 9), args.seed0)
    jobs = hop_bucket_jobs(scen)
    full = run_bench(scen, BenchConfig(), jobs).by_hops()
    ng = run_bench(scen, BenchConfig(no_global=True), jobs).by_hops()
    print("hops  n   full_SR full_SPL  noglobal_SR noglobal_SPL")
    for h in sorted(full):
        fs, fp, n = full[h]
        gs, gp, _ = ng[h]
        print(f"{h:>4} {n:>3}   {fs:.3f}   {fp:.3f}     {gs:.3f}       {gp:.3f}")


if __name__ == "__main__":
    main()
