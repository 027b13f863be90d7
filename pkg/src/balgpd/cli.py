"""Command-line entry point: ``balgpd run | validate-theory | estimate-gradients``."""

import argparse
import dataclasses
import sys

from .exceptions import BalgpdError, ConfigError
from .harness import load_config, run_replications, validate_theory, write_outputs
from .oracles import load_elevation_csv, write_gradient_csv

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_RUNTIME = 2


def _u64(text):
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("must be an unsigned 64-bit integer")
    return value


def _positive(text):
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser():
    parser = argparse.ArgumentParser(
        prog="balgpd", description="Batch active learning for GP regression with derivative observations."
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run an experiment and write per-run and aggregate CSVs")
    run.add_argument("--config", required=True, help="key = value experiment file")
    run.add_argument("--out", default=".", help="output directory (default: current directory)")
    run.add_argument("--seed", type=_u64, help="override the config seed")
    run.add_argument("--replications", type=_positive, help="override the replication count")
    run.add_argument(
        "--timing", action="store_true", help="fill the wall_ms column (output is then not reproducible)"
    )

    theory = sub.add_parser("validate-theory", help="run the numerical theory checks")
    theory.add_argument("--trials", type=_positive, default=100)
    theory.add_argument("--seed", type=_u64, default=0)

    grad = sub.add_parser("estimate-gradients", help="scattered-data gradients of an x1,x2,y file")
    grad.add_argument("--in", dest="inp", required=True)
    grad.add_argument("--out", required=True)
    return parser


def _cmd_run(args):
    try:
        cfg = load_config(args.config)
        changes = {}
        if args.seed is not None:
            changes["seed"] = args.seed
        if args.replications is not None:
            changes["replications"] = args.replications
        cfg = dataclasses.replace(cfg, **changes).resolved()
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    agg = run_replications(cfg)
    write_outputs(agg, args.out, include_timing=args.timing)
    total = len(agg.runs)
    print(f"{total - agg.failures}/{total} runs completed; results in {args.out}")
    for i, run in enumerate(agg.runs):
        if run.failed:
            print(f"run {i}: {run.failure}", file=sys.stderr)
    return EXIT_RUNTIME if agg.failures == total else EXIT_OK


def _cmd_theory(args):
    counts = validate_theory(args.trials, args.seed)
    ok = True
    for name, (passed, total) in counts.items():
        status = "PASS" if passed == total else "FAIL"
        ok &= passed == total
        print(f"{name}: {passed}/{total} {status}")
    return EXIT_OK if ok else EXIT_RUNTIME


def _cmd_gradients(args):
    try:
        ds = load_elevation_csv(args.inp)
    except OSError as exc:
        print(f"cannot read {args.inp}: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except BalgpdError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    write_gradient_csv(ds.with_gradients(), args.out)
    print(f"wrote gradients for {ds.m} points to {args.out}")
    return EXIT_OK


def main(argv=None):
    args = build_parser().parse_args(argv)
    handler = {"run": _cmd_run, "validate-theory": _cmd_theory, "estimate-gradients": _cmd_gradients}
    try:
        return handler[args.command](args)
    except BalgpdError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
