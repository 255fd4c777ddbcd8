"""Sweep the sample budget and watch the 1/sqrt(N) excess-risk decay.

Runs the sparsified multi-machine protocol against the single-machine
mirror descent oracle on the same data, printing the mean excess risk,
the fitted log-log slope, and the exact bit totals from the ledger.

    python3 demos/slow_rate_sweep.py --trials 8 --out slow_rate.csv
"""

import argparse
import math

import numpy as np

from sparsemd import datagen, harness, protocols
from sparsemd import rng as rngmod


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=8)
    ap.add_argument("--seed", type=int, default=12)
    ap.add_argument("--out", default=None)
    args = ap.parse_args()

    d, m = 10_000, 8
    inst = datagen.gen_l1lq(d, 2.0, 1.0, 1.0, seed=args.seed,
                            link_kind="absolute", active_dim=32,
                            noise_level=0.0, holdout_size=8000)
    ns = [2 ** k for k in range(10, 14)]
    print(f"l1-constrained absolute-loss instance, d={d}, {m} machines")
    print(f"{'N':>6} {'excess':>10} {'oracle':>10} {'ratio':>6} "
          f"{'total bits':>11} {'naive bits':>11}")
    rows, means = [], []
    for n_total in ns:
        cfg = protocols.default_params_lipschitz(
            d=d, b1=1.0, r_q=1.0, q=2.0, n_total=n_total, m=m,
            linear_model=True)
        exc, exc_c, bits = [], [], 0
        for trial in range(args.trials):
            rng = rngmod.stream(args.seed, 7, trial)
            w_hat, ledger, _ = protocols.run_smd(
                inst.sampler(stream_id=trial), cfg, inst.link, rng)
            exc.append(inst.excess_risk(w_hat))
            bits = ledger.total_bits
            w_c = protocols.run_centralized_md(
                inst.sampler(stream_id=trial), cfg, inst.link,
                rng=rngmod.stream(args.seed, 8, trial))
            exc_c.append(inst.excess_risk(w_c))
        mu, mu_c = float(np.mean(exc)), float(np.mean(exc_c))
        means.append(mu)
        naive = 64 * d * m
        print(f"{n_total:>6} {mu:>10.5f} {mu_c:>10.5f} {mu / mu_c:>6.2f} "
              f"{bits:>11} {naive:>11}")
        rows.append((n_total, mu, mu_c, bits))
    slope = harness.fit_loglog_slope(ns, means)
    print(f"\nfitted log-log slope: {slope:.3f}  "
          f"(the 1/sqrt(N) regime sits at -0.5)")
    print(f"reference 3/sqrt(N) envelope: "
          + ", ".join(f"{3 / math.sqrt(n):.4f}" for n in ns))
    if args.out:
        with open(args.out, "w") as fh:
            fh.write("n_total,excess,oracle_excess,total_bits\n")
            fh.writelines(f"{n},{a:.17g},{b:.17g},{c}\n"
                          for n, a, b, c in rows)
        print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
