"""Command line interface.

Exit codes: 0 success, 1 runtime or data failure (including failed
conformance checks), 2 usage or configuration errors. Errors print a single
JSON object to stderr so callers can parse failures."""

from __future__ import annotations

import argparse
import datetime as dt
import json
import os
import sys
import tempfile
from pathlib import Path

import numpy as np

from . import __version__
from ._kernels import BACKEND
from .config import apply_overrides, build_market, load_config
from .errors import EngineError, InvalidArgumentError, ParseError
from .feed import (
    HistoricalFeed,
    SyntheticFeedParams,
    generate_synthetic,
    load_history,
    write_day_files,
)
from .harness import (
    CHECK_NAMES,
    conformance_check,
    evaluate_policy,
    make_windows,
    parse_policy,
    run_episode,
)

USAGE_ERROR = 2
RUNTIME_ERROR = 1


def main(argv: list[str] | None = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (InvalidArgumentError, ParseError) as exc:
        _print_error(exc)
        return USAGE_ERROR
    except (EngineError, OSError) as exc:
        _print_error(exc)
        return RUNTIME_ERROR


def _print_error(exc: Exception) -> None:
    payload = {"error": type(exc).__name__, "message": str(exc)}
    print(json.dumps(payload), file=sys.stderr)


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lobexec",
        description="Historical order book replay and execution simulation",
    )
    parser.add_argument(
        "--version", action="version", version=f"%(prog)s {__version__} ({BACKEND})"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("validate-data", help="check day files against the data contract")
    p.add_argument("--data-dir", required=True, type=Path)
    _market_args(p)
    p.add_argument("--out", type=Path, help="write the summary JSON here")
    p.set_defaults(func=_cmd_validate_data)

    p = sub.add_parser("gen-synthetic", help="generate synthetic day files")
    p.add_argument("--out-dir", required=True, type=Path)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--days", type=int, default=1)
    p.add_argument("--snapshots-per-day", type=int, default=864_000)
    p.add_argument("--start-date", default="2026-06-01")
    p.add_argument("--start-mid", default="100.0")
    p.add_argument("--tick-volatility", type=int, default=1)
    p.add_argument("--spread-ticks", type=int, default=1)
    p.add_argument("--qty-range", default="0.5:5.0", help="min:max level quantity")
    p.add_argument("--overwrite", action="store_true")
    _market_args(p)
    p.set_defaults(func=_cmd_gen_synthetic)

    p = sub.add_parser("run-episode", help="run one episode under a policy")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--policy", default="constant:1")
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--out", type=Path)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_run_episode)

    p = sub.add_parser("evaluate", help="evaluate a policy over sampled episodes")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--policy", default="constant:1")
    p.add_argument("--episodes", required=True, type=int)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--days", help="comma-separated ISO days to sample from")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", type=Path)
    p.add_argument("--csv", type=Path, help="also write per-episode rows as CSV")
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_evaluate)

    p = sub.add_parser("conformance", help="run the execution integrity checks")
    p.add_argument("--config", required=True, type=Path)
    p.add_argument("--seed", required=True, type=int)
    p.add_argument("--episodes", type=int, default=5)
    p.add_argument("--suite", default=",".join(CHECK_NAMES))
    p.add_argument("--out", type=Path)
    p.add_argument("--override", action="append", default=[], metavar="KEY=VALUE")
    p.set_defaults(func=_cmd_conformance)

    p = sub.add_parser("make-windows", help="build walk-forward day windows")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--dates", help="comma-separated ISO days")
    group.add_argument("--data-dir", type=Path, help="derive days from day files")
    p.add_argument("--train", required=True, type=int)
    p.add_argument("--eval", dest="eval_len", required=True, type=int)
    p.add_argument("--out", type=Path)
    p.set_defaults(func=_cmd_make_windows)

    return parser


def _market_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--tick", default="0.1", help="price tick size")
    parser.add_argument("--lot", default="0.001", help="quantity lot size")
    parser.add_argument("--levels", type=int, default=10)
    parser.add_argument("--interval", type=int, default=100, help="snapshot ms")


def _market_from_args(args: argparse.Namespace):
    return build_market(
        {
            "market": {
                "tick_size": args.tick,
                "lot_size": args.lot,
                "levels_per_side": args.levels,
                "snapshot_interval_ms": args.interval,
            }
        }
    )


def _emit(payload: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(payload)
        return
    out.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=out.parent, suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(payload)
        os.replace(tmp, out)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _cmd_validate_data(args: argparse.Namespace) -> int:
    spec = _market_from_args(args)
    paths = sorted(Path(args.data_dir).glob("*.csv"))
    if not paths:
        raise InvalidArgumentError(f"no .csv files under {args.data_dir}")
    feed = load_history(paths, spec)
    summary = {
        "files": [p.name for p in paths],
        "rows": len(feed),
        "days": feed.days,
        "start_timestamp": feed.start_timestamp,
        "end_timestamp": feed.end_timestamp,
        "valid": True,
    }
    _emit(json.dumps(summary, indent=2) + "\n", args.out)
    return 0


def _cmd_gen_synthetic(args: argparse.Namespace) -> int:
    spec = _market_from_args(args)
    if args.days < 1 or args.snapshots_per_day < 1:
        raise InvalidArgumentError("days and snapshots-per-day must be >= 1")
    try:
        start_day = dt.date.fromisoformat(args.start_date)
    except ValueError as exc:
        raise InvalidArgumentError(f"bad --start-date: {exc}") from exc
    lo, _, hi = args.qty_range.partition(":")
    if not hi:
        raise InvalidArgumentError("--qty-range must be min:max")
    start_ms = (start_day - dt.date(1970, 1, 1)).days * 86_400_000
    span = args.snapshots_per_day * spec.snapshot_interval_ms
    if span > 86_400_000:
        raise InvalidArgumentError(
            f"{args.snapshots_per_day} snapshots at {spec.snapshot_interval_ms}ms "
            "do not fit in a day"
        )
    params = SyntheticFeedParams(
        seed=args.seed,
        n_snapshots=args.days * args.snapshots_per_day,
        start_mid=args.start_mid,
        tick_volatility=args.tick_volatility,
        level_qty_range=(lo, hi),
        spread_ticks=args.spread_ticks,
        start_time_ms=start_ms,
    )
    # keep each day's rows inside its calendar day even when the cadence
    # does not tile the day exactly
    feed = generate_synthetic(params, spec)
    if args.snapshots_per_day * spec.snapshot_interval_ms < 86_400_000:
        offsets = np.arange(len(feed), dtype=np.int64)
        day_no, in_day = np.divmod(offsets, args.snapshots_per_day)
        timestamps = start_ms + day_no * 86_400_000 + in_day * spec.snapshot_interval_ms
        feed = HistoricalFeed(timestamps, feed.book, spec, validate=False)
    paths = write_day_files(feed, args.out_dir, overwrite=args.overwrite)
    print(json.dumps({"written": [str(p) for p in paths], "rows": len(feed)}))
    return 0


def _cmd_run_episode(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args.override)
    policy = parse_policy(args.policy)
    record = run_episode(
        config, policy, args.seed, base_dir=Path(args.config).parent
    )
    _emit(json.dumps(record.to_dict(), indent=2) + "\n", args.out)
    return 0


def _cmd_evaluate(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args.override)
    policy = parse_policy(args.policy)
    days = args.days.split(",") if args.days else None
    report = evaluate_policy(
        config,
        policy,
        args.episodes,
        args.seed,
        days=days,
        workers=args.workers,
        base_dir=Path(args.config).parent,
    )
    _emit(report.to_json(), args.out)
    if args.csv is not None:
        _emit(report.episodes_csv(), args.csv)
    return 0


def _cmd_conformance(args: argparse.Namespace) -> int:
    config = apply_overrides(load_config(args.config), args.override)
    suite = tuple(s for s in args.suite.split(",") if s)
    report = conformance_check(
        config,
        args.seed,
        n_episodes=args.episodes,
        suite=suite,
        base_dir=Path(args.config).parent,
    )
    _emit(report.to_json(), args.out)
    return 0 if report.passed else RUNTIME_ERROR


def _cmd_make_windows(args: argparse.Namespace) -> int:
    if args.dates:
        days = [d for d in args.dates.split(",") if d]
    else:
        days = sorted(p.stem for p in Path(args.data_dir).glob("*.csv"))
        if not days:
            raise InvalidArgumentError(f"no .csv files under {args.data_dir}")
    windows = make_windows(days, args.train, args.eval_len)
    payload = [
        {"train_days": list(w.train_days), "eval_days": list(w.eval_days)}
        for w in windows
    ]
    _emit(json.dumps(payload, indent=2) + "\n", args.out)
    return 0


if __name__ == "__main__":
    sys.exit(main())
