"""Command-line front end: ``hmimo-leo {validate,run,sweep}``.

Exit status 0 on success, 2 for an invalid configuration or arguments and
3 for I/O failures. Log verbosity follows ``HMIMO_LEO_LOG`` (e.g. ``DEBUG``).
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
from datetime import datetime, timezone
from pathlib import Path

from . import __version__
from .evaluation import aggregate, run_sweep, run_trials
from .report import manifest, sweep_csv, sweep_svg, trials_csv
from .scenario import (CHANNEL_CASES, ScenarioConfig, ScenarioError, config_from_mapping,
                       load_scenario, parse_override)

log = logging.getLogger("hmimo_leo")

EXIT_OK, EXIT_CONFIG, EXIT_IO = 0, 2, 3
DEFAULT_ELEMENTS = (64, 144, 256, 400)


def _int_list(text: str) -> list[int]:
    try:
        values = [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a comma-separated list of integers: {text!r}")
    if not values:
        raise argparse.ArgumentTypeError("list must not be empty")
    return values


def _case_list(text: str) -> list[str]:
    cases = [c.strip().upper() for c in text.split(",") if c.strip()]
    bad = [c for c in cases if c not in CHANNEL_CASES]
    if bad or not cases:
        raise argparse.ArgumentTypeError(
            f"cases must be drawn from {','.join(CHANNEL_CASES)}, got {text!r}")
    return cases


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="hmimo-leo",
        description="Holographic-MIMO LEO downlink simulator with surface-assisted base stations.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", type=Path, help="YAML scenario file (defaults if omitted)")
    common.add_argument("--set", dest="overrides", action="append", default=[],
                        metavar="KEY=VALUE", help="override one configuration key")
    common.add_argument("--seed", type=int, help="master seed")

    runner = argparse.ArgumentParser(add_help=False)
    runner.add_argument("--out", type=Path, required=True, help="output directory")
    runner.add_argument("--trials", type=int, help="Monte Carlo trials per cell")
    runner.add_argument("--jobs", type=int, default=1, help="worker processes")

    sub.add_parser("validate", parents=[common], help="check a configuration and exit")
    sub.add_parser("run", parents=[common, runner], help="run one scenario")
    sweep = sub.add_parser("sweep", parents=[common, runner],
                           help="sweep N = K over the channel cases")
    sweep.add_argument("--elements", type=_int_list, default=list(DEFAULT_ELEMENTS),
                       help="comma-separated element counts (N = K)")
    sweep.add_argument("--cases", type=_case_list, default=list(CHANNEL_CASES),
                       help="comma-separated channel cases")
    return parser


def resolve_config(args) -> ScenarioConfig:
    if args.config is not None:
        try:
            text = args.config.read_text()
        except OSError as exc:
            raise ScenarioError(f"cannot read config {args.config}: {exc.strerror}") from None
        cfg = load_scenario(text)
    else:
        cfg = ScenarioConfig()
    overrides = dict(parse_override(o) for o in args.overrides)
    if args.seed is not None:
        overrides["master_seed"] = args.seed
    if getattr(args, "trials", None) is not None:
        overrides["trials"] = args.trials
    return config_from_mapping(overrides, cfg) if overrides else cfg


def _write_outputs(out_dir: Path, files: dict[str, str]) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, text in files.items():
        (out_dir / name).write_text(text, newline="")


def cmd_validate(args, cfg: ScenarioConfig) -> int:
    print(f"configuration valid: case {cfg.channel_case}, N={cfg.rhs_elements}, "
          f"K={cfg.tris_elements}, trials={cfg.trials}")
    return EXIT_OK


def cmd_run(args, cfg: ScenarioConfig) -> int:
    started = datetime.now(timezone.utc)
    results = run_trials(cfg, cfg.trials, args.jobs)
    cell = aggregate(cfg.channel_case, cfg.rhs_elements, cfg.tris_elements, results)
    files = {"trials.csv": trials_csv(results), "summary.csv": sweep_csv([cell])}
    files["manifest.json"] = manifest(cfg.to_dict(), "run", files, __version__, started)
    _write_outputs(args.out, files)
    log.info("case %s N=%d: mean sum-rate %.4f bit/s/Hz over %d trials",
             cell.case, cell.N, cell.mean_sum_rate_se, cell.trials)
    return EXIT_OK


def cmd_sweep(args, cfg: ScenarioConfig) -> int:
    started = datetime.now(timezone.utc)
    result = run_sweep(cfg, args.elements, args.cases, cfg.trials, args.jobs)
    files = {"sweep.csv": sweep_csv(result.cells),
             "trials.csv": trials_csv(result.trials),
             "sweep.svg": sweep_svg(result.cells)}
    files["manifest.json"] = manifest(
        cfg.to_dict(), "sweep", files, __version__, started,
        {"elements": list(args.elements), "cases": list(args.cases)})
    _write_outputs(args.out, files)
    for c in result.cells:
        log.info("case %-3s N=%4d  %.4f +/- %.4f bit/s/Hz", c.case, c.N,
                 c.mean_sum_rate_se, c.std_sum_rate_se)
    return EXIT_OK


COMMANDS = {"validate": cmd_validate, "run": cmd_run, "sweep": cmd_sweep}


def main(argv=None) -> int:
    logging.basicConfig(level=os.environ.get("HMIMO_LEO_LOG", "WARNING").upper(),
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_CONFIG
    try:
        cfg = resolve_config(args)
        if getattr(args, "jobs", 1) < 1:
            raise ScenarioError("--jobs must be >= 1", "jobs")
        return COMMANDS[args.command](args, cfg)
    except ScenarioError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
