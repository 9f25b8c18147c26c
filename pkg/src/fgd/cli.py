"""``fgd <experiment> [--config PATH] [--seed N] [--out DIR] [--plot] [--mode exact|neumann]``

Exit codes: 0 success, 1 acceptance failure, 2 configuration error,
3 numerical abort. The default output directory is ``$FGD_OUTPUT_DIR``
(falling back to ``fgd_runs``), with one sub-directory per experiment.
"""
import argparse
import os
import sys

from .errors import ConfigError, FgdError
from .harness.config import EXPERIMENTS, build_config, config_to_text, load_config

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_ABORT = 0, 1, 2, 3
OUTPUT_ENV = "FGD_OUTPUT_DIR"


def _parser():
    ap = argparse.ArgumentParser(prog="fgd", description="Feedback gradient descent experiments")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="key = value configuration file")
    ap.add_argument("--seed", type=int)
    ap.add_argument("--out", help="output directory")
    ap.add_argument("--plot", action="store_true", help="also write SVG charts")
    ap.add_argument("--mode", choices=("exact", "neumann"), help="Gram inverse mode")
    ap.add_argument("--corrupt-feedback-sign", action="store_true",
                    help="debug: flip the feedback sign inside the verify battery")
    return ap


def resolve(args):
    file_values = load_config(args.config) if args.config else {}
    overrides = {"seed": args.seed, "inverse_mode": args.mode}
    if args.plot:
        overrides["plot"] = True
    if args.corrupt_feedback_sign:
        overrides["corrupt_feedback_sign"] = True
    cfg = build_config(args.experiment, file_values, **overrides)
    out_dir = args.out or cfg.output_dir or os.path.join(
        os.environ.get(OUTPUT_ENV, "fgd_runs"), args.experiment)
    return cfg, out_dir


def run(cfg, out_dir):
    from .harness.experiments import RUNNERS
    from .harness.verify import run_verify
    runners = dict(RUNNERS, verify=run_verify)
    os.makedirs(out_dir, exist_ok=True)
    with open(os.path.join(out_dir, "config.resolved.txt"), "w") as fh:
        fh.write(config_to_text(cfg))
    outcome = runners[cfg.experiment](cfg, out_dir)
    with open(os.path.join(out_dir, "report.txt"), "w") as fh:
        fh.write("\n".join(outcome.lines) + "\n")
    return outcome


def main(argv=None):
    args = _parser().parse_args(argv)
    try:
        cfg, out_dir = resolve(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        outcome = run(cfg, out_dir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FgdError as exc:
        print(f"numerical abort: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ABORT
    for line in outcome.lines:
        print(line)
    print(f"outputs in {out_dir}")
    return EXIT_OK if outcome.passed else EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
