"""Command-line front-end: run, sweep, verify, hide-and-seek."""

import argparse
import sys

from . import harness
from .errors import InvalidConfigError, InvalidParameterError


def _add_common(sub):
    sub.add_argument("--seed", type=int, default=None,
                     help="override the scenario seed")
    sub.add_argument("--trials", type=int, default=None,
                     help="override the trial count")
    sub.add_argument("--out", type=str, default=None,
                     help="override the output CSV path")


def build_parser():
    parser = argparse.ArgumentParser(
        prog="sparsemd",
        description="Simulated distributed learning with sparsified "
                    "mirror descent under exact bit accounting.")
    subs = parser.add_subparsers(dest="command", required=True)

    p_run = subs.add_parser("run", help="execute one scenario config")
    p_run.add_argument("config")
    _add_common(p_run)

    p_sweep = subs.add_parser("sweep", help="execute a config over a [grid]")
    p_sweep.add_argument("config")
    _add_common(p_sweep)

    p_verify = subs.add_parser("verify", help="run an invariant suite")
    p_verify.add_argument("suite")

    p_hs = subs.add_parser("hide-and-seek",
                           help="detection rate vs communication budget")
    p_hs.add_argument("config")
    _add_common(p_hs)
    return parser


def _summarize(records):
    for r in records:
        print(f"trial {r.trial}: N={r.n_total} m={r.m} "
              f"excess_risk={r.excess_risk:.6g} bits={r.total_bits}")


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = harness.parse_config(args.config)
            sc = harness.scenario_from_config(cfg, seed=args.seed,
                                              trials=args.trials,
                                              out=args.out)
            records = harness.run_scenario(sc)
            _summarize(records)
            if sc.out:
                print(f"wrote {sc.out}")
            return 0
        if args.command == "sweep":
            cfg = harness.parse_config(args.config)
            sc = harness.scenario_from_config(cfg, seed=args.seed,
                                              trials=args.trials,
                                              out=args.out)
            grid = harness.grid_from_config(cfg)
            records = harness.sweep(sc, grid)
            _summarize(records)
            if sc.out:
                print(f"wrote {sc.out}")
            return 0
        if args.command == "verify":
            passed, report = harness.verify(args.suite)
            print("\n".join(report))
            return 0 if passed else 1
        # hide-and-seek
        cfg = harness.parse_config(args.config)
        hs = cfg.get("hide_and_seek")
        if hs is None:
            raise InvalidConfigError("config needs a [hide_and_seek] section")
        budgets = [int(b) for b in str(hs.get("budgets", "")).split(",")
                   if str(b).strip()]
        if not budgets:
            raise InvalidConfigError("[hide_and_seek] needs 'budgets' "
                                     "(comma-separated bit counts)")
        rows, text = harness.hide_and_seek_scenario(
            d=int(hs.get("d", 32)), rho=float(hs.get("rho", 0.4)),
            budgets=budgets,
            trials=args.trials or int(hs.get("trials", 100)),
            seed=args.seed if args.seed is not None else int(hs.get("seed", 0)),
            n_total=int(hs.get("n_total", 4096)), m=int(hs.get("m", 4)),
            out=args.out or hs.get("out"))
        print(text, end="")
        return 0
    except (InvalidConfigError, InvalidParameterError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
