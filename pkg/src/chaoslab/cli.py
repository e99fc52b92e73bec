"""``chaoslab <verify|normal|gamma|spectral> --config PATH [--out PATH] [--seed U64] [--threads N]``.

Exit codes: 0 success, 1 verification failure, 2 usage or configuration error.
"""

from __future__ import annotations

import argparse
import sys
from dataclasses import replace

from .experiments import (
    GAMMA_COLUMNS,
    NORMAL_COLUMNS,
    SPECTRAL_COLUMNS,
    ConfigError,
    load_config,
    reports_csv,
    resolve_seed,
    run_gamma_convergence,
    run_normal_convergence,
    run_spectral_check,
    run_verify,
    table_csv,
)

COMMANDS = {
    "verify": "verify",
    "normal": "normal-convergence",
    "gamma": "gamma-convergence",
    "spectral": "spectral-check",
}


def _u64(text: str) -> int:
    value = int(text)
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return value


def _positive(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("thread count must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chaoslab", description="Gamma-calculus verification and Stein experiments")
    parser.add_argument("command", choices=sorted(COMMANDS))
    parser.add_argument("--config", required=True, help="flat key=value experiment file")
    parser.add_argument("--out", help="CSV destination (default: config 'out', else stdout)")
    parser.add_argument("--seed", type=_u64, help="base seed; overrides CHAOSLAB_SEED")
    parser.add_argument("--threads", type=_positive, help="worker count")
    return parser


def _emit(text: str, path: str | None):
    if path:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    kind = COMMANDS[args.command]
    try:
        cfg = load_config(args.config, kind)
        seed = resolve_seed(args.seed, cfg.seed)
    except ConfigError as exc:
        print(f"chaoslab: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"chaoslab: {exc}", file=sys.stderr)
        return 2
    cfg = replace(cfg, seed=seed, threads=args.threads or cfg.threads)
    out = args.out or cfg.out
    code = 0
    try:
        if kind == "verify":
            code, reports = run_verify(cfg)
            text = reports_csv(reports)
            failed = [r for r in reports if r.failed]
            if failed:
                print(f"chaoslab: {len(failed)} failing rows", file=sys.stderr)
        elif kind == "normal-convergence":
            text = table_csv(NORMAL_COLUMNS, run_normal_convergence(cfg))
        elif kind == "gamma-convergence":
            text = table_csv(GAMMA_COLUMNS, run_gamma_convergence(cfg))
        else:
            code, rows = run_spectral_check(cfg)
            text = table_csv(SPECTRAL_COLUMNS, rows)
    except ConfigError as exc:
        print(f"chaoslab: config error: {exc}", file=sys.stderr)
        return 2
    _emit(text, out)
    return code


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
