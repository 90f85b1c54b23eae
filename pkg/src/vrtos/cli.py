"""Command line entry point.

Exit codes: 0 success, 2 configuration or usage error, 3 numerical failure
(divergence, prox check above tolerance), 4 I/O error.
"""
from __future__ import annotations

import argparse
import logging
import sys

from .bench import BenchConfig, ConfigError, run_benchmark
from .data import ParseError, generate_synthetic, save_libsvm
from .oracles import PENALTY_KINDS, prox_deviation
from .structure import StructureError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4
PROX_TOLERANCE = 1e-5

log = logging.getLogger("vrtos")


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="vrtos", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p_run = sub.add_parser("run", help="run a benchmark described by a YAML config")
    p_run.add_argument("--config", required=True)
    p_run.add_argument("--seed", type=int, help="overrides the config seed")
    p_run.add_argument("--out", help="output directory (overrides the config)")

    p_chk = sub.add_parser("check-prox", help="compare a closed-form prox with brute force")
    p_chk.add_argument("--penalty", required=True, help=f"one of {', '.join(PENALTY_KINDS)}")
    p_chk.add_argument("--trials", type=int, default=1000)
    p_chk.add_argument("--seed", type=int, default=0)

    p_gen = sub.add_parser("gen-data", help="write a synthetic dataset in LIBSVM format")
    p_gen.add_argument("--n", type=int, required=True)
    p_gen.add_argument("--p", type=int, required=True)
    p_gen.add_argument("--density", type=float, default=0.1)
    p_gen.add_argument("--task", choices=("logistic", "squared"), default="logistic")
    p_gen.add_argument("--seed", type=int, default=0)
    p_gen.add_argument("--out", required=True)
    return parser


def cmd_run(args) -> int:
    try:
        with open(args.config, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        log.error("cannot read config: %s", exc)
        return EXIT_IO
    try:
        cfg = BenchConfig.from_yaml(text)
        if args.seed is not None:
            cfg.seed = args.seed
        if args.out is not None:
            cfg.out = args.out
        outcome = run_benchmark(cfg, cfg.out)
    except (ConfigError, StructureError, ParseError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except OSError as exc:
        log.error("I/O error: %s", exc)
        return EXIT_IO
    if outcome.failed is not None:
        log.error("solver %s diverged; partial trace written", outcome.failed)
        return EXIT_NUMERIC
    for name, rec in outcome.summary["solvers"].items():
        print(f"{name}: {rec['status']} after {rec['epochs']} epochs, "
              f"suboptimality {rec['suboptimality']:.3e}")
    return EXIT_OK


def cmd_check_prox(args) -> int:
    if args.penalty not in PENALTY_KINDS:
        log.error("unknown penalty %r; choose from %s", args.penalty, ", ".join(PENALTY_KINDS))
        return EXIT_CONFIG
    if args.trials < 1:
        log.error("--trials must be positive")
        return EXIT_CONFIG
    dev = prox_deviation(args.penalty, args.trials, args.seed)
    ok = dev <= PROX_TOLERANCE
    print(f"{args.penalty}: max deviation {dev:.3e} over {args.trials} trials "
          f"({'ok' if ok else 'FAILED'}, tolerance {PROX_TOLERANCE:g})")
    return EXIT_OK if ok else EXIT_NUMERIC


def cmd_gen_data(args) -> int:
    try:
        dataset = generate_synthetic(args.n, args.p, args.density, args.task, args.seed)
    except ValueError as exc:
        log.error("%s", exc)
        return EXIT_CONFIG
    try:
        save_libsvm(dataset, args.out)
    except OSError as exc:
        log.error("cannot write %s: %s", args.out, exc)
        return EXIT_IO
    return EXIT_OK


COMMANDS = {"run": cmd_run, "check-prox": cmd_check_prox, "gen-data": cmd_gen_data}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.INFO if args.verbose else logging.WARNING,
        format="%(levelname)s: %(message)s",
    )
    return COMMANDS[args.command](args)


if __name__ == "__main__":
    sys.exit(main())
