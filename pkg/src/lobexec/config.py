"""JSON configuration: market/feed/episode settings and factories.

Top-level schema (decimal-valued fields are strings, keeping exactness):

    {
      "market":  {"tick_size": "0.1", "lot_size": "0.001",
                  "levels_per_side": 10, "snapshot_interval_ms": 100},
      "feed":    {"kind": "synthetic", "seed": 7, "n_snapshots": 30000,
                  "start_mid": "100.0", "tick_volatility": 1,
                  "level_qty_range": ["0.5", "5.0"], "spread_ticks": 1,
                  "start_time_ms": 0}
               | {"kind": "historical", "data_dir": "data/"}
               | {"kind": "historical", "paths": ["2026-06-01.csv", ...]},
      "episode": {"direction": "buy" | "sell" | "sample",
                  "total_volume": "100" | {"choices": ["50", "100"]},
                  "exec_time_ms": 300000 | {"choices": [...]},
                  "n_buckets": 10 | {"choices": [...]},
                  "no_of_slices": 9 | {"choices": [...]},
                  "rand_bucket_bounds_width": 0,
                  "bucket_func": null | ["1", "2", ...],
                  "delete_vol": false,
                  "start_time": 1750000000000 | "sample"},
      "action_factors": ["0.8", "1.0", "1.2"],
      "reward_mode": "per_unit" | "notional",
      "audit": false
    }

Unknown keys anywhere are an error: typos must not silently change runs.
"""

from __future__ import annotations

import json
from pathlib import Path
from typing import Optional, Sequence, Union

import numpy as np

from .env import DEFAULT_ACTION_FACTORS, EpisodeParams, ExecutionEnv
from .errors import InvalidArgumentError, ParseError
from .feed import HistoricalFeed, SyntheticFeedParams, generate_synthetic, load_history
from .market import MarketSpec, Side
from .schedule import ScheduleParams

# spawn-key constants so the sampler's stream never collides with other
# consumers of the same master seed
_STREAM_EPISODE = 17


def load_config(path: Union[str, Path]) -> dict:
    try:
        with open(path, "r") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(f"{path}: invalid JSON: {exc}") from exc
    if not isinstance(data, dict):
        raise ParseError(f"{path}: config must be a JSON object")
    return data


def _check_keys(section: dict, allowed: set[str], where: str) -> None:
    unknown = set(section) - allowed
    if unknown:
        raise InvalidArgumentError(
            f"unknown {where} config key(s): {', '.join(sorted(unknown))}"
        )


def build_market(config: dict) -> MarketSpec:
    section = config.get("market", {})
    _check_keys(
        section,
        {"tick_size", "lot_size", "levels_per_side", "snapshot_interval_ms"},
        "market",
    )
    return MarketSpec.from_dict(section)


def build_feed(
    config: dict, spec: MarketSpec, *, base_dir: Union[str, Path, None] = None
) -> HistoricalFeed:
    section = config.get("feed")
    if not isinstance(section, dict) or "kind" not in section:
        raise InvalidArgumentError('config needs a "feed" section with a "kind"')
    kind = section["kind"]
    audit = bool(config.get("audit", False))
    if kind == "synthetic":
        _check_keys(
            section,
            {
                "kind",
                "seed",
                "n_snapshots",
                "start_mid",
                "tick_volatility",
                "level_qty_range",
                "spread_ticks",
                "start_time_ms",
            },
            "feed",
        )
        params = SyntheticFeedParams(
            seed=int(section.get("seed", 0)),
            n_snapshots=int(section.get("n_snapshots", 10000)),
            start_mid=str(section.get("start_mid", "100.0")),
            tick_volatility=int(section.get("tick_volatility", 1)),
            level_qty_range=tuple(
                str(v) for v in section.get("level_qty_range", ["0.5", "5.0"])
            ),
            spread_ticks=int(section.get("spread_ticks", 1)),
            start_time_ms=int(section.get("start_time_ms", 0)),
        )
        return generate_synthetic(params, spec, audit=audit)
    if kind == "historical":
        _check_keys(section, {"kind", "data_dir", "paths"}, "feed")
        base = Path(base_dir) if base_dir is not None else Path.cwd()
        if "paths" in section:
            paths = [base / p for p in section["paths"]]
        elif "data_dir" in section:
            data_dir = base / section["data_dir"]
            paths = sorted(data_dir.glob("*.csv"))
            if not paths:
                raise InvalidArgumentError(f"no .csv files under {data_dir}")
        else:
            raise InvalidArgumentError('historical feed needs "data_dir" or "paths"')
        return load_history(paths, spec, audit=audit)
    raise InvalidArgumentError(f"unknown feed kind {kind!r}")


_EPISODE_KEYS = {
    "direction",
    "total_volume",
    "exec_time_ms",
    "n_buckets",
    "no_of_slices",
    "rand_bucket_bounds_width",
    "bucket_func",
    "delete_vol",
    "start_time",
}


class EpisodeSampler:
    """Deterministically maps an episode seed to EpisodeParams.

    Scalar settings pass through; {"choices": [...]} settings are drawn
    uniformly; direction "sample" is a fair coin; start_time "sample" is
    uniform over the feasible span (optionally restricted to given days,
    keeping each episode inside one day). Identical (settings, days, seed)
    always draw identical params.
    """

    def __init__(
        self,
        settings: dict,
        feed: HistoricalFeed,
        *,
        days: Optional[Sequence[str]] = None,
    ) -> None:
        _check_keys(settings, _EPISODE_KEYS, "episode")
        if "total_volume" not in settings:
            raise InvalidArgumentError('episode config needs "total_volume"')
        self.settings = settings
        self.feed = feed
        if days is not None:
            unknown = set(days) - set(feed.days)
            if unknown:
                raise InvalidArgumentError(
                    f"day(s) not in the history: {', '.join(sorted(unknown))}"
                )
            self.days: Optional[list[str]] = list(days)
        else:
            self.days = None

    def draw(self, seed: int) -> EpisodeParams:
        rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((int(seed), _STREAM_EPISODE)))
        )
        s = self.settings

        direction = s.get("direction", "sample")
        if direction == "sample":
            side = Side.BUY if int(rng.integers(0, 2)) == 0 else Side.SELL
        elif direction in ("buy", "sell"):
            side = Side(direction)
        else:
            raise InvalidArgumentError(f"bad direction {direction!r}")

        volume = str(self._draw(rng, s["total_volume"]))
        exec_time = int(self._draw(rng, s.get("exec_time_ms", 300_000)))
        n_buckets = int(self._draw(rng, s.get("n_buckets", 10)))
        no_of_slices = int(self._draw(rng, s.get("no_of_slices", 9)))

        start_setting = s.get("start_time", "sample")
        margin = self.feed.spec.snapshot_interval_ms
        if start_setting == "sample":
            start = self._sample_start(rng, exec_time, margin)
        else:
            start = int(start_setting)

        schedule = ScheduleParams(
            start_time=start,
            exec_time_ms=exec_time,
            n_buckets=n_buckets,
            no_of_slices=no_of_slices,
            rand_bucket_bounds_width=int(s.get("rand_bucket_bounds_width", 0)),
            bucket_func=(
                tuple(str(w) for w in s["bucket_func"])
                if s.get("bucket_func")
                else None
            ),
            delete_vol=bool(s.get("delete_vol", False)),
        )
        schedule_seed = int(rng.integers(0, 2**63 - 1))
        return EpisodeParams(
            side=side, total_volume=volume, schedule=schedule, seed=schedule_seed
        )

    @staticmethod
    def _draw(rng: np.random.Generator, setting):
        if isinstance(setting, dict):
            if set(setting) != {"choices"} or not setting["choices"]:
                raise InvalidArgumentError(
                    f'expected {{"choices": [...]}} setting, got {setting!r}'
                )
            options = setting["choices"]
            return options[int(rng.integers(0, len(options)))]
        return setting

    def _sample_start(
        self, rng: np.random.Generator, exec_time: int, margin: int
    ) -> int:
        horizon = exec_time + margin
        if self.days is None:
            lo = self.feed.start_timestamp
            hi = self.feed.end_timestamp - horizon
            if hi < lo:
                raise InvalidArgumentError(
                    f"history too short for a {exec_time}ms episode"
                )
            return int(rng.integers(lo, hi + 1))
        index = self.feed.day_index
        timestamps = self.feed.timestamps
        feasible: list[tuple[int, int]] = []
        for day in self.days:
            start_row, stop_row = index[day]
            lo = int(timestamps[start_row])
            hi = int(timestamps[stop_row - 1]) - horizon
            if hi >= lo:
                feasible.append((lo, hi))
        if not feasible:
            raise InvalidArgumentError(
                f"no selected day can hold a {exec_time}ms episode"
            )
        lo, hi = feasible[int(rng.integers(0, len(feasible)))]
        return int(rng.integers(lo, hi + 1))


def build_env(
    config: dict, *, base_dir: Union[str, Path, None] = None,
    days: Optional[Sequence[str]] = None,
) -> ExecutionEnv:
    """Build a fully wired environment from a config dict."""
    _check_keys(
        config,
        {"market", "feed", "episode", "action_factors", "reward_mode", "audit"},
        "top-level",
    )
    spec = build_market(config)
    feed = build_feed(config, spec, base_dir=base_dir)
    episode = config.get("episode", {})
    sampler = EpisodeSampler(episode, feed, days=days)
    return ExecutionEnv(
        feed,
        action_factors=tuple(
            str(f) for f in config.get("action_factors", DEFAULT_ACTION_FACTORS)
        ),
        reward_mode=str(config.get("reward_mode", "per_unit")),
        sampler=sampler,
        audit=bool(config.get("audit", False)),
    )


def apply_overrides(config: dict, overrides: Sequence[str]) -> dict:
    """Apply CLI key=value overrides with dotted paths into the config dict.

    Values parse as JSON when possible (numbers, booleans, arrays), else as
    strings. The dotted path must address an existing section; the leaf key
    may be new only where the schema allows it (checked downstream)."""
    out = json.loads(json.dumps(config))
    for item in overrides:
        key, sep, raw = item.partition("=")
        if not sep or not key:
            raise InvalidArgumentError(f"override must be key=value: {item!r}")
        try:
            value = json.loads(raw)
        except json.JSONDecodeError:
            value = raw
        node = out
        parts = key.split(".")
        for part in parts[:-1]:
            if part not in node or not isinstance(node[part], dict):
                node[part] = {}
            node = node[part]
        node[parts[-1]] = value
    return out
