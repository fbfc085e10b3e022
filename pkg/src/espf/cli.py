"""Command-line entry point: ``espf <verb> [options]``.

Exit codes: 0 ok, 1 configuration or I/O error, 2 filter failure during a
run, 3 an acceptance check failed.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from .config import BUILTIN, ConfigError, parse_config
from .harness import run_scenario
from .io import OutputError, emit_outputs
from .validation import run_checks, run_claims

EXIT_OK, EXIT_CONFIG, EXIT_FILTER, EXIT_ACCEPTANCE = 0, 1, 2, 3

log = logging.getLogger("espf")


def _config(args):
    base = BUILTIN[args.scenario]
    cfg = base
    if args.config:
        try:
            text = Path(args.config).read_text()
        except OSError as exc:
            raise ConfigError(args.config, f"cannot read config: {exc.strerror}") from None
        cfg = parse_config(text, base)
    if args.seed is not None:
        s = args.seed
        cfg = cfg.replace(seed_truth=s, seed_measurement=s + 1, seed_init=s + 2, seed_comparator=s + 3)
    if args.steps is not None:
        cfg = cfg.replace(max_steps=args.steps)
    return cfg


def _finish(run, args) -> int:
    out_dir = args.out or run.config.out_dir
    paths = emit_outputs(run, out_dir, plots=args.plots or run.config.plots)
    print(json.dumps({k: v for k, v in run.summary().items()}, default=str))
    print(f"wrote {paths.ewm}, {paths.claims}, {paths.summary}")
    if run.failure:
        print(f"filter failure: {run.failure}", file=sys.stderr)
        return EXIT_FILTER
    return EXIT_OK


def cmd_run(args) -> int:
    cfg = _config(args)
    return _finish(run_scenario(cfg, debug=args.debug_asserts), args)


def cmd_claims(args) -> int:
    cfg = _config(args)
    run = run_claims(cfg, debug=args.debug_asserts, measured=args.measured)
    return _finish(run, args)


def cmd_validate(args) -> int:
    only = [s.strip() for s in args.only.split(",")] if args.only else None
    results = run_checks(only, debug=args.debug_asserts, stream=sys.stdout)
    failed = [r.key for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed" + (f"; failed: {', '.join(failed)}" if failed else ""))
    return EXIT_ACCEPTANCE if failed else EXIT_OK


def cmd_gaussian_limit(args) -> int:
    keys = ["C5a", "C5b"] + ([] if args.skip_linear else ["C5c"])
    results = run_checks(keys, debug=args.debug_asserts, stream=sys.stdout)
    return EXIT_OK if all(r.passed for r in results) else EXIT_ACCEPTANCE


def cmd_plot(args) -> int:
    from .plotting import plot_ewm

    src = Path(args.csv)
    if not src.is_file():
        print(f"{src}: no such file", file=sys.stderr)
        return EXIT_CONFIG
    out = Path(args.out) if args.out else src.with_name(src.stem.removesuffix("_ewm") + "_plots")
    for p in plot_ewm(src, out, per_panel=args.per_panel):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="espf", description="Possibilistic support-point filter and width monitor.")
    ap.add_argument("-v", "--verbose", action="count", default=0, help="-v info, -vv debug logging")
    sub = ap.add_subparsers(dest="verb", required=True)

    def common(p):
        p.add_argument("--config", metavar="PATH", help="key = value config file, applied over the scenario")
        p.add_argument("--scenario", choices=sorted(BUILTIN), default="nominal", help="built-in base scenario")
        p.add_argument("--seed", type=int, metavar="N", help="seeds truth=N, measurement=N+1, init=N+2, comparator=N+3")
        p.add_argument("--out", metavar="DIR", help="output directory (default: output.dir from the config)")
        p.add_argument("--steps", type=int, metavar="K", help="stop after K epochs")
        p.add_argument("--plots", action="store_true", help="also render EWM images")
        p.add_argument("--debug-asserts", action="store_true", help="audit every step (slow)")

    p = sub.add_parser("run", help="run a scenario and write CSV, summary and config")
    common(p)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("claims", help="claims diagnostic: comparators on every measured step")
    common(p)
    p.add_argument("--measured", type=int, default=52, metavar="K", help="number of measured steps (default 52)")
    p.set_defaults(fn=cmd_claims, scenario="stress")

    p = sub.add_parser("validate", help="run the acceptance checks")
    p.add_argument("--only", metavar="KEYS", help="comma list such as C1,C5b,C7")
    p.add_argument("--debug-asserts", action="store_true")
    p.set_defaults(fn=cmd_validate)

    p = sub.add_parser("gaussian-limit", help="Gaussian-limit checks only")
    p.add_argument("--skip-linear", action="store_true", help="skip the 200-step linear tracking run")
    p.add_argument("--debug-asserts", action="store_true")
    p.set_defaults(fn=cmd_gaussian_limit)

    p = sub.add_parser("plot", help="render images from an EWM CSV")
    p.add_argument("csv")
    p.add_argument("--out", metavar="DIR")
    p.add_argument("--per-panel", action="store_true", help="one image per trace as well")
    p.set_defaults(fn=cmd_plot)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    level = [logging.WARNING, logging.INFO, logging.DEBUG][min(args.verbose, 2)]
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.fn(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OutputError as exc:
        print(f"output error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
