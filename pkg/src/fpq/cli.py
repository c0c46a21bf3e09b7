"""Command-line harness (``fpq-bench``): rate-distortion sweeps, entropy
measurement, MSE-decay curves, cell censuses, pure permutation-code curves,
and the invariant verification suite.  Experiment subcommands emit CSV.
"""

from __future__ import annotations

import argparse
import json
import sys

from . import bench
from .verify import verify_suite


def _add_common(p, trials_default):
    p.add_argument("--n", type=int, required=True, help="source dimension N")
    p.add_argument("--frame", choices=["htf", "mhtf", "identity", "sphere"], default="mhtf")
    p.add_argument("--gamma", choices=["+1", "-1", "1"], default="-1",
                   help="modulation sign for mhtf frames")
    p.add_argument("--variant", type=int, choices=[1, 2], default=1)
    p.add_argument("--source", choices=["uniform", "gaussian", "sphere"], default="uniform")
    p.add_argument("--trials", type=int, default=trials_default)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None, help="output CSV path (default: stdout)")


def _parse_composition(text):
    if text is None or text == "all":
        return None
    return tuple(int(p) for p in text.replace("-", ",").split(",") if p)


def build_parser():
    parser = argparse.ArgumentParser(
        prog="fpq-bench",
        description="Monte Carlo experiments for frame permutation quantization",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("sweep", help="rate-distortion sweep over compositions")
    _add_common(p, trials_default=10**5)
    p.add_argument("--m", type=int, required=True, help="number of frame vectors M")
    p.add_argument("--composition", default=None, help='e.g. "2,2" (default: all)')

    p = sub.add_parser("entropy", help="empirical entropy rate per composition")
    _add_common(p, trials_default=10**5)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--composition", default=None)

    p = sub.add_parser("decay", help="recursive-decoder MSE decay in M")
    _add_common(p, trials_default=10**3)
    p.add_argument("--m-max", type=int, default=4096)
    p.add_argument(
        "--strategy", choices=["singleton", "sqrt", "exhaustive"], default="singleton"
    )

    p = sub.add_parser("cells", help="zero-volume cell census")
    _add_common(p, trials_default=1)
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--composition", default=None)

    p = sub.add_parser("psc-rd", help="pure permutation-code rate-distortion")
    _add_common(p, trials_default=10**5)

    p = sub.add_parser("verify", help="run the invariant verification suite")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--scale", type=float, default=1.0,
                   help="trial-count multiplier for the stochastic checks")
    p.add_argument("--out", default=None, help="also write a JSON report here")
    return parser


def _config_from_args(args, kind):
    return bench.ExperimentConfig(
        kind=kind,
        n=args.n,
        m=getattr(args, "m", None),
        m_max=getattr(args, "m_max", None),
        frame=args.frame,
        gamma=int(args.gamma),
        source="sphere" if kind == "decay" else args.source,
        variant=args.variant,
        composition=_parse_composition(getattr(args, "composition", None)),
        trials=args.trials,
        seed=args.seed,
        strategy=getattr(args, "strategy", None),
        out=args.out,
    )


def _emit(text, out):
    if out is None:
        sys.stdout.write(text)
    else:
        with open(out, "w", encoding="ascii", newline="") as fh:
            fh.write(text)


def main(argv=None):
    args = build_parser().parse_args(argv)

    if args.command == "verify":
        results = verify_suite(seed=args.seed, scale=args.scale)
        failed = [r for r in results if not r.passed]
        for r in results:
            tag = "PASS" if r.passed else "FAIL"
            print(f"{tag} {r.name} margin={r.margin:.6g} {r.detail}")
        print(f"{len(results) - len(failed)}/{len(results)} checks passed")
        if args.out:
            report = [
                {"name": r.name, "passed": r.passed, "margin": r.margin, "detail": r.detail}
                for r in results
            ]
            with open(args.out, "w", encoding="ascii") as fh:
                json.dump(report, fh, indent=2)
        return 1 if failed else 0

    cfg = _config_from_args(args, args.command)
    if args.command == "sweep":
        text = bench.sweep_csv(bench.sweep_rate_distortion(cfg))
    elif args.command == "entropy":
        text = bench.sweep_csv(bench.variable_rate_experiment(cfg))
    elif args.command == "decay":
        text = bench.decay_csv(bench.mse_decay_experiment(cfg))
    elif args.command == "cells":
        text = bench.cells_csv(bench.zero_volume_census(cfg))
    elif args.command == "psc-rd":
        text = bench.sweep_csv(bench.psc_rate_distortion(cfg))
    else:  # pragma: no cover
        raise AssertionError(args.command)
    _emit(text, cfg.out)
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
