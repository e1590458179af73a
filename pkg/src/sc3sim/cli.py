"""Command-line entry point: ``sc3sim <experiment> [--config F] [--seed N] [--out DIR] [--threads N]``.

On failure the last stderr line is a JSON object ``{"error": ..., "type": ...}`` and the
exit code is nonzero (2 for configuration problems, 1 otherwise).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

EXPERIMENTS = ("ber", "latency", "sar", "mission", "closed-loop")
_THREAD_VARS = ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sc3sim", description="Sensing-communication-computation-control loop simulator")
    ap.add_argument("experiment", choices=EXPERIMENTS)
    ap.add_argument("--config", help="JSON configuration (defaults: reference settings)")
    ap.add_argument("--seed", type=int, help="override the top-level seed and restrict multi-seed runs to it")
    ap.add_argument("--out", default="out", help="output directory (default: ./out/<experiment>)")
    ap.add_argument("--threads", type=int, default=1, help="BLAS/OpenMP threads (default 1)")
    return ap


def _fail(exc: BaseException, code: int) -> int:
    print(json.dumps({"error": str(exc), "type": type(exc).__name__}), file=sys.stderr)
    return code


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        return _fail(ValueError("--threads must be >= 1"), 2)
    # thread pools are sized when numpy first loads, so set this before importing it
    for var in _THREAD_VARS:
        os.environ[var] = str(args.threads)

    from dataclasses import replace

    from .config import ConfigError, SimConfig
    from .loop import EXPERIMENTS as RUNNERS

    try:
        cfg = SimConfig.load(args.config) if args.config else SimConfig()
        if args.seed is not None:
            cfg = replace(
                cfg,
                seed=args.seed,
                mission=replace(cfg.mission, seeds=(args.seed,)),
                loop=replace(cfg.loop, seeds=(args.seed,)),
            )
    except (ConfigError, OSError) as exc:
        return _fail(exc, 2)

    out = os.path.join(args.out, args.experiment)
    try:
        report = RUNNERS[args.experiment](cfg, out)
    except ConfigError as exc:
        return _fail(exc, 2)
    except Exception as exc:  # noqa: BLE001 - the contract is one machine-readable line
        return _fail(exc, 1)
    print(json.dumps({"experiment": report.experiment, "config_hash": report.config_hash, "seed": report.seed,
                      "out": out, "summary": report.summary}, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
