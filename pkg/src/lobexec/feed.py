"""Historical snapshot feed: storage, replay cursors, CSV day files, and
deterministic synthetic history generation.

A feed owns two immutable arrays (timestamps (n,), book (n, 4L) in units; see
lobexec._kernels for the row layout) plus a replay cursor. Views share the
arrays but carry independent cursors, so several execution algos can replay
the same history in parallel without interference; an optional audit mode
counts how often each snapshot was consumed, which the conformance checks use
to prove no snapshot is consumed twice by one algo in one episode.
"""

from __future__ import annotations

import datetime as dt
import os
import re
import tempfile
from dataclasses import dataclass
from decimal import Decimal
from pathlib import Path
from typing import Iterable, Sequence, Union

import numpy as np

from .book import LobSnapshot, parse_row_units, validate_book_arrays
from .errors import (
    DataIntegrityError,
    InvalidArgumentError,
    OutOfRangeError,
    ParseError,
)
from .market import DecimalLike, MarketSpec, _as_decimal, format_units, to_units

MS_PER_DAY = 86_400_000

_DAY_FILE_RE = re.compile(r"(\d{4})-(\d{2})-(\d{2})\.csv")


class _EndOfData:
    """Sentinel returned by next_snapshot() when the history is exhausted.
    Falsy, so `while (snap := feed.next_snapshot()):` loops read naturally."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "END_OF_DATA"

    def __bool__(self) -> bool:
        return False


END_OF_DATA = _EndOfData()


def expected_csv_header(spec: MarketSpec) -> str:
    levels = spec.levels_per_side
    cols = ["timestamp_ms"]
    for prefix in ("bid_price", "bid_qty", "ask_price", "ask_qty"):
        cols.extend(f"{prefix}_{i}" for i in range(1, levels + 1))
    return ",".join(cols)


class HistoricalFeed:
    """Replayable snapshot history with an independent cursor per instance."""

    def __init__(
        self,
        timestamps: np.ndarray,
        book: np.ndarray,
        spec: MarketSpec,
        *,
        day_index: dict[str, tuple[int, int]] | None = None,
        validate: bool = True,
        audit: bool = False,
    ) -> None:
        ts = np.ascontiguousarray(timestamps, dtype=np.int64)
        rows = np.ascontiguousarray(book, dtype=np.int64)
        if len(ts) == 0:
            raise InvalidArgumentError("a feed needs at least one snapshot")
        if validate:
            validate_book_arrays(ts, rows, spec, context="feed")
        # freeze shared storage; views alias these arrays
        if ts.flags.writeable:
            ts.setflags(write=False)
        if rows.flags.writeable:
            rows.setflags(write=False)
        self._timestamps = ts
        self._book = rows
        self.spec = spec
        self._day_index = day_index if day_index is not None else _build_day_index(ts)
        self._cursor = 0
        self._consumed = np.zeros(len(ts), dtype=np.int32) if audit else None

    # -- storage ---------------------------------------------------------

    def __len__(self) -> int:
        return len(self._timestamps)

    @property
    def timestamps(self) -> np.ndarray:
        return self._timestamps

    @property
    def book(self) -> np.ndarray:
        return self._book

    @property
    def days(self) -> list[str]:
        """ISO dates covered by the history, in order."""
        return list(self._day_index)

    @property
    def day_index(self) -> dict[str, tuple[int, int]]:
        """ISO date -> (start_row, stop_row) half-open ranges."""
        return dict(self._day_index)

    @property
    def start_timestamp(self) -> int:
        return int(self._timestamps[0])

    @property
    def end_timestamp(self) -> int:
        return int(self._timestamps[-1])

    def snapshot_at(self, index: int) -> LobSnapshot:
        if not 0 <= index < len(self):
            raise OutOfRangeError(f"snapshot index {index} out of range")
        return LobSnapshot(
            int(self._timestamps[index]), self._book[index], self.spec, validate=False
        )

    # -- replay cursor ---------------------------------------------------

    @property
    def cursor(self) -> int:
        return self._cursor

    def current(self) -> LobSnapshot:
        return self.snapshot_at(self._cursor)

    def reset_to(self, timestamp: int) -> LobSnapshot:
        """Position at the first snapshot stamped at or after `timestamp`."""
        idx = int(np.searchsorted(self._timestamps, timestamp, side="left"))
        if idx >= len(self):
            raise OutOfRangeError(
                f"no snapshot at or after {timestamp} "
                f"(history ends at {self.end_timestamp})"
            )
        self._cursor = idx
        if self._consumed is not None:
            self._consumed[idx] += 1
        return self.snapshot_at(idx)

    def next_snapshot(self) -> Union[LobSnapshot, _EndOfData]:
        """Advance one snapshot; returns END_OF_DATA past the last one."""
        if self._cursor + 1 >= len(self):
            return END_OF_DATA
        self._cursor += 1
        if self._consumed is not None:
            self._consumed[self._cursor] += 1
        return self.snapshot_at(self._cursor)

    def recent_window(self, k: int) -> list[LobSnapshot]:
        """The k snapshots up to and including the cursor, oldest first,
        left-padded by repeating the earliest snapshot near the history start."""
        return [self.snapshot_at(int(i)) for i in self.recent_indices(k)]

    def recent_indices(self, k: int) -> np.ndarray:
        if k < 1:
            raise InvalidArgumentError("window size must be >= 1")
        return np.maximum(np.arange(self._cursor - k + 1, self._cursor + 1), 0)

    def view(self, *, audit: bool = False) -> "HistoricalFeed":
        """A new feed over the same (shared, immutable) history with an
        independent cursor and its own consumption counters."""
        return HistoricalFeed(
            self._timestamps,
            self._book,
            self.spec,
            day_index=self._day_index,
            validate=False,
            audit=audit,
        )

    # -- low-level hooks for the execution broker -------------------------

    @property
    def last_index(self) -> int:
        return len(self) - 1

    @property
    def consumed(self) -> np.ndarray | None:
        return self._consumed

    def consume_until(self, timestamp: int) -> int:
        """Advance (never rewind) to the last snapshot stamped <= timestamp,
        counting every snapshot passed over as consumed. Returns the cursor."""
        idx = int(np.searchsorted(self._timestamps, timestamp, side="right")) - 1
        if idx > self._cursor:
            if self._consumed is not None:
                self._consumed[self._cursor + 1 : idx + 1] += 1
            self._cursor = idx
        return self._cursor

    def consume_through(self, new_cursor: int) -> None:
        """Acknowledge a window kernel's advance from the current cursor to
        new_cursor (inclusive)."""
        if new_cursor < self._cursor:
            raise InvalidArgumentError("cursor cannot move backwards")
        if new_cursor > self.last_index:
            raise OutOfRangeError("cursor past end of history")
        if self._consumed is not None and new_cursor > self._cursor:
            self._consumed[self._cursor + 1 : new_cursor + 1] += 1
        self._cursor = new_cursor

    def advance_index(self) -> int:
        """Advance one snapshot; returns the new index or -1 at end of data."""
        if self._cursor + 1 >= len(self):
            return -1
        self._cursor += 1
        if self._consumed is not None:
            self._consumed[self._cursor] += 1
        return self._cursor


def _build_day_index(timestamps: np.ndarray) -> dict[str, tuple[int, int]]:
    days = timestamps // MS_PER_DAY
    uniq, starts = np.unique(days, return_index=True)
    index: dict[str, tuple[int, int]] = {}
    bounds = list(starts) + [len(timestamps)]
    epoch = dt.date(1970, 1, 1)
    for day, start, stop in zip(uniq, bounds[:-1], bounds[1:]):
        index[(epoch + dt.timedelta(days=int(day))).isoformat()] = (
            int(start),
            int(stop),
        )
    return index


# -- CSV day files ---------------------------------------------------------


def load_history(
    paths: Sequence[Union[str, Path]], spec: MarketSpec, *, audit: bool = False
) -> HistoricalFeed:
    """Load one feed from per-day CSV files named YYYY-MM-DD.csv.

    Files may be given in any order; they are loaded in date order. Every
    file must carry the canonical header, contain at least one row, and hold
    only rows whose UTC day matches its name. All book invariants are
    checked; the first violation raises with file and row context.
    """
    if not paths:
        raise InvalidArgumentError("no data files given")
    dated: list[tuple[dt.date, Path]] = []
    for p in paths:
        path = Path(p)
        match = _DAY_FILE_RE.fullmatch(path.name)
        if not match:
            raise ParseError(f"day file must be named YYYY-MM-DD.csv: {path.name}")
        try:
            date = dt.date(*map(int, match.groups()))
        except ValueError as exc:
            raise ParseError(f"bad date in file name {path.name}: {exc}") from exc
        dated.append((date, path))
    dated.sort(key=lambda pair: pair[0])
    for (d1, p1), (d2, p2) in zip(dated, dated[1:]):
        if d1 == d2:
            raise ParseError(f"duplicate day {d1.isoformat()}: {p1.name}, {p2.name}")

    header = expected_csv_header(spec)
    levels = spec.levels_per_side
    ts_parts: list[np.ndarray] = []
    book_parts: list[np.ndarray] = []
    day_index: dict[str, tuple[int, int]] = {}
    total = 0
    for date, path in dated:
        with open(path, "r", newline="") as fh:
            first = fh.readline().rstrip("\r\n")
            if first != header:
                raise ParseError(f"{path.name}: header does not match the data contract")
            raw_ts: list[int] = []
            raw_rows: list[list[int]] = []
            for lineno, line in enumerate(fh, start=2):
                line = line.strip()
                if not line:
                    continue
                try:
                    ts, row = parse_row_units(line, spec)
                except (ParseError, ValueError) as exc:
                    raise ParseError(f"{path.name}:{lineno}: {exc}") from exc
                raw_ts.append(ts)
                raw_rows.append(row)
        if not raw_rows:
            raise ParseError(f"{path.name}: no data rows")
        ts_arr = np.array(raw_ts, dtype=np.int64)
        book_arr = np.array(raw_rows, dtype=np.int64).reshape(len(raw_rows), 4 * levels)
        validate_book_arrays(ts_arr, book_arr, spec, context=path.name)
        epoch_day = (date - dt.date(1970, 1, 1)).days
        if not np.all(ts_arr // MS_PER_DAY == epoch_day):
            raise DataIntegrityError(
                f"{path.name}: contains timestamps outside {date.isoformat()}"
            )
        if ts_parts and ts_arr[0] <= ts_parts[-1][-1]:
            raise DataIntegrityError(
                f"{path.name}: overlaps the previous day's timestamps"
            )
        day_index[date.isoformat()] = (total, total + len(ts_arr))
        total += len(ts_arr)
        ts_parts.append(ts_arr)
        book_parts.append(book_arr)

    return HistoricalFeed(
        np.concatenate(ts_parts),
        np.vstack(book_parts),
        spec,
        day_index=day_index,
        validate=False,
        audit=audit,
    )


def write_day_files(
    feed: HistoricalFeed, out_dir: Union[str, Path], *, overwrite: bool = False
) -> list[Path]:
    """Write the feed as canonical per-day CSV files; returns the paths."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = feed.spec
    levels = spec.levels_per_side
    header = expected_csv_header(spec)
    ps, qs = spec.price_scale, spec.qty_scale
    scales = [ps] * levels + [qs] * levels + [ps] * levels + [qs] * levels
    paths = []
    for day, (start, stop) in feed.day_index.items():
        path = out / f"{day}.csv"
        if path.exists() and not overwrite:
            raise InvalidArgumentError(f"refusing to overwrite {path}")
        fd, tmp = tempfile.mkstemp(dir=out, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                fh.write(header + "\n")
                for i in range(start, stop):
                    cells = feed.book[i].tolist()
                    fh.write(
                        f"{int(feed.timestamps[i])},"
                        + ",".join(
                            format_units(c, s) for c, s in zip(cells, scales)
                        )
                        + "\n"
                    )
            os.replace(tmp, path)
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise
        paths.append(path)
    return paths


# -- synthetic history -------------------------------------------------------


@dataclass(frozen=True)
class SyntheticFeedParams:
    """Parameters of the deterministic synthetic history generator.

    The best bid follows a floored random walk of at most tick_volatility
    ticks per step; asks sit spread_ticks above it; level quantities are
    uniform on the lot grid within level_qty_range. Identical params and seed
    always produce byte-identical feeds.
    """

    seed: int
    n_snapshots: int
    start_mid: DecimalLike = "100.0"
    tick_volatility: int = 1
    level_qty_range: tuple[DecimalLike, DecimalLike] = ("0.5", "5.0")
    spread_ticks: int = 1
    start_time_ms: int = 0

    def __post_init__(self) -> None:
        if self.n_snapshots < 1:
            raise InvalidArgumentError("n_snapshots must be >= 1")
        if self.tick_volatility < 0:
            raise InvalidArgumentError("tick_volatility must be >= 0")
        if self.spread_ticks < 1:
            raise InvalidArgumentError("spread_ticks must be >= 1")
        if self.start_time_ms < 0:
            raise InvalidArgumentError("start_time_ms must be >= 0")
        if _as_decimal(self.start_mid) <= 0:
            raise InvalidArgumentError("start_mid must be positive")
        lo, hi = self.level_qty_range
        if _as_decimal(lo) <= 0 or _as_decimal(hi) < _as_decimal(lo):
            raise InvalidArgumentError("level_qty_range must be 0 < lo <= hi")


def generate_synthetic(
    params: SyntheticFeedParams, spec: MarketSpec, *, audit: bool = False
) -> HistoricalFeed:
    """Generate a valid synthetic history (see SyntheticFeedParams)."""
    n = params.n_snapshots
    levels = spec.levels_per_side
    rng = np.random.Generator(np.random.PCG64(params.seed))

    mid = Decimal(_as_decimal(params.start_mid))
    half_spread_units = params.spread_ticks * spec.tick_units // 2
    bid0_units = to_units(mid, spec.price_scale) - half_spread_units
    bid0_ticks = bid0_units // spec.tick_units
    floor_ticks = levels + 1
    if bid0_ticks < floor_ticks:
        raise InvalidArgumentError(
            f"start_mid {params.start_mid} too low for {levels} levels"
        )

    # floored walk: b_t = max(b_{t-1} + step_t, floor), vectorized via the
    # identity b_t = S_t + max(b_0, floor - min_{j<=t} S_j) with S = cumsum
    steps = rng.integers(
        -params.tick_volatility, params.tick_volatility + 1, size=n, dtype=np.int64
    )
    steps[0] = 0
    walk = np.cumsum(steps)
    run_min = np.minimum.accumulate(walk)
    bid_ticks = walk + np.maximum(bid0_ticks, floor_ticks - run_min)

    lo_lots = spec.qty_to_units(params.level_qty_range[0]) // spec.lot_units
    hi_lots = spec.qty_to_units(params.level_qty_range[1]) // spec.lot_units
    qty_lots = rng.integers(lo_lots, hi_lots + 1, size=(n, 2 * levels), dtype=np.int64)

    depth = np.arange(levels, dtype=np.int64)
    book = np.empty((n, 4 * levels), dtype=np.int64)
    book[:, 0:levels] = (bid_ticks[:, None] - depth) * spec.tick_units
    book[:, levels : 2 * levels] = qty_lots[:, :levels] * spec.lot_units
    book[:, 2 * levels : 3 * levels] = (
        bid_ticks[:, None] + params.spread_ticks + depth
    ) * spec.tick_units
    book[:, 3 * levels : 4 * levels] = qty_lots[:, levels:] * spec.lot_units

    timestamps = params.start_time_ms + spec.snapshot_interval_ms * np.arange(
        n, dtype=np.int64
    )
    return HistoricalFeed(timestamps, book, spec, audit=audit)
