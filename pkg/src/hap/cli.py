"""Command line front end: train, eval, compare, plot, serve."""

from __future__ import annotations

import argparse
import os
import sys
from pathlib import Path


def _train(args) -> int:
    from .harness import evaluate_run, load_spec, run_all

    spec = load_spec(args.spec)
    if args.seed:
        from dataclasses import replace

        spec = replace(spec, seeds=tuple(args.seed))
    dirs = run_all(spec, args.out)
    for d in dirs:
        rates = {t: sr for t, (sr, _) in evaluate_run(d).items()}
        line = " ".join(f"{t}={v:.2f}" for t, v in rates.items())
        print(f"{d}: {line}")
    return 0


def _eval(args) -> int:
    from .harness import evaluate_run

    for task, (rate, mean_ret) in evaluate_run(args.run, args.episodes).items():
        print(f"{task}: success {rate:.3f} mean_return {mean_ret:.4f}")
    return 0


def _compare(args) -> int:
    from .harness import compare

    report = compare(args.runs, args.against, threshold=args.threshold)
    print(report.render(), end="")
    return 0


def _plot(args) -> int:
    from .harness import emit_plots

    print(emit_plots(args.run))
    return 0


def _serve(args) -> int:
    from .service import serve

    serve(bind=args.bind, port=args.port, static_dir=args.static_dir)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hap", description="Adversarial curriculum laboratory.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="run every seed of a resolved spec")
    p.add_argument("--spec", required=True, help="path to a spec file")
    p.add_argument("--out", default="runs", help="output root directory")
    p.add_argument("--seed", type=int, action="append",
                   help="override the spec's seed list (repeatable)")
    p.set_defaults(fn=_train)

    p = sub.add_parser("eval", help="held-out sweep of a finished run")
    p.add_argument("--run", required=True, help="run directory")
    p.add_argument("--episodes", type=int, default=None)
    p.set_defaults(fn=_eval)

    p = sub.add_parser("compare", help="summarize runs and paired deltas")
    p.add_argument("--runs", nargs="+", required=True, help="run directories")
    p.add_argument("--against", nargs="*", default=[],
                   help="baseline run directories for paired deltas")
    p.add_argument("--threshold", type=float, default=0.9)
    p.set_defaults(fn=_compare)

    p = sub.add_parser("plot", help="emit SVG plots for a run")
    p.add_argument("--run", required=True, help="run directory")
    p.set_defaults(fn=_plot)

    p = sub.add_parser("serve", help="start the live study service")
    p.add_argument("--bind", default=os.environ.get("HAP_BIND", "127.0.0.1"))
    p.add_argument("--port", type=int,
                   default=int(os.environ.get("HAP_PORT", "8008")))
    p.add_argument("--static-dir",
                   default=os.environ.get("HAP_STATIC_DIR") or None,
                   help="directory of web UI files to serve at /")
    p.set_defaults(fn=_serve)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
