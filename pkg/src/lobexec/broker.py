"""Parallel scheduled execution against a shared replayed history.

The broker owns one independent feed view per registered algo, so every algo
replays the identical snapshot sequence without interfering with the others
(parallel fairness). It runs each algo's schedule event by event:

- limit events open a resting-order window (reprice one tick inside the own
  side's best quote each snapshot, match against the next snapshot's opposite
  side at the limit price) up to the next event's time;
- bucket bounds send the bucket's unexecuted remainder to market (walking
  levels, advancing one snapshot per pass) or drop it under delete_vol.

Every action appends to a per-algo trade log; logs serialize byte-identically
across reruns of the same inputs. Exact per-bucket (notional, volume)
accumulators are maintained for reward computation and are cross-checkable
against the logs alone via recompute_bucket_totals."""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Sequence, Union

from . import _kernels
from .errors import InvalidArgumentError, InvalidStateError
from .feed import HistoricalFeed
from .market import (
    DecimalLike,
    LogMessage,
    OrderKind,
    Quantity,
    Side,
    TradeLogEntry,
)
from .schedule import AlgoEvent, EventKind, ExecutionAlgo, carry_over_residual

# raw log entries are (timestamp, msg_code, price_units, qty_units, kind_code)
# tuples; materialization to TradeLogEntry is deferred until someone asks
_MSGS = (
    LogMessage.PLACEMENT,
    LogMessage.TRADE,
    LogMessage.CANCELLATION,
    LogMessage.BUCKET_MARKET_SUBMIT,
)
_PLACEMENT, _TRADE, _CANCEL, _SUBMIT = range(4)
_KINDS = (OrderKind.LIMIT, OrderKind.MARKET)
_LIMIT, _MARKET = range(2)


class Broker:
    """Executes registered algos' schedules against per-algo feed views."""

    def __init__(self, feed: HistoricalFeed, *, audit: bool = False) -> None:
        self.feed = feed
        self.spec = feed.spec
        self.audit = audit
        self._algos: dict[str, ExecutionAlgo] = {}
        self._views: dict[str, HistoricalFeed] = {}
        self._raw_logs: dict[str, list[tuple]] = {}
        self._bucket_acc: dict[str, list[list[int]]] = {}
        self.current_time: int | None = None
        self._truncated: set[str] = set()

    @property
    def truncated(self) -> bool:
        """True once any algo's execution ran out of history."""
        return bool(self._truncated)

    def algo_truncated(self, algo_id: str) -> bool:
        self.algo(algo_id)
        return algo_id in self._truncated

    def reset(self, start_time: int, algos: Sequence[ExecutionAlgo]) -> None:
        """Register algos and position every view at the first snapshot
        stamped at or after start_time. Clears logs and accumulators."""
        ids = [algo.algo_id for algo in algos]
        if len(set(ids)) != len(ids):
            raise InvalidArgumentError(f"duplicate algo ids: {ids}")
        if not algos:
            raise InvalidArgumentError("at least one algo required")
        for algo in algos:
            if algo.params.start_time < start_time:
                raise InvalidArgumentError(
                    f"{algo.algo_id}: schedule starts before the broker"
                )
        self._algos = {algo.algo_id: algo for algo in algos}
        self._views = {}
        self._raw_logs = {}
        self._bucket_acc = {}
        for algo in algos:
            view = self.feed.view(audit=self.audit)
            view.reset_to(start_time)
            self._views[algo.algo_id] = view
            self._raw_logs[algo.algo_id] = []
            self._bucket_acc[algo.algo_id] = [
                [0, 0] for _ in range(algo.params.n_buckets)
            ]
        self.current_time = start_time
        self._truncated = set()

    # -- queries -----------------------------------------------------------

    @property
    def algo_ids(self) -> list[str]:
        return list(self._algos)

    def algo(self, algo_id: str) -> ExecutionAlgo:
        try:
            return self._algos[algo_id]
        except KeyError:
            raise InvalidArgumentError(f"unknown algo {algo_id!r}") from None

    def view(self, algo_id: str) -> HistoricalFeed:
        self.algo(algo_id)
        return self._views[algo_id]

    def trade_log(self, algo_id: str) -> list[TradeLogEntry]:
        spec = self.spec
        return [
            TradeLogEntry(
                timestamp=ts,
                owner=algo_id,
                message=_MSGS[msg],
                price=spec.price(px),
                volume=spec.qty(qty),
                kind=_KINDS[kind],
            )
            for ts, msg, px, qty, kind in self._raw_log(algo_id)
        ]

    def serialize_log(self, algo_id: str, *, owner_label: str | None = None) -> str:
        """Canonical byte-stable text form of one algo's log. owner_label
        replaces the owner field on every line, which lets two algos' logs be
        compared for byte identity of their executions."""
        spec = self.spec
        owner = algo_id if owner_label is None else owner_label
        lines = [
            f"{ts},{owner},{_MSGS[msg].value},"
            f"{spec.price_str(px)},{spec.qty_str(qty)},{_KINDS[kind].value}"
            for ts, msg, px, qty, kind in self._raw_log(algo_id)
        ]
        return "\n".join(lines) + "\n" if lines else ""

    def bucket_totals(self, algo_id: str) -> list[tuple[int, int]]:
        """Per-bucket (notional_units, qty_units) executed so far."""
        self.algo(algo_id)
        return [tuple(acc) for acc in self._bucket_acc[algo_id]]

    def bucket_vwap(self, algo_id: str, bucket_index: int) -> Fraction | None:
        """Exact executed VWAP of one bucket, None if nothing executed."""
        acc = self._bucket_acc[self.algo(algo_id).algo_id][bucket_index]
        if acc[1] == 0:
            return None
        return Fraction(acc[0], acc[1] * 10**self.spec.price_scale)

    def _raw_log(self, algo_id: str) -> list[tuple]:
        self.algo(algo_id)
        return self._raw_logs[algo_id]

    # -- public simulation ops ----------------------------------------------

    def simulate_limit_order(
        self,
        algo_id: str,
        volume: Union[Quantity, DecimalLike],
        until: int,
    ) -> list[TradeLogEntry]:
        """Run one resting limit-order window for the algo from its view's
        current position up to `until`; the unfilled remainder carries to the
        algo's next slice (or waits for its bucket bound). Returns the new
        log entries."""
        algo = self.algo(algo_id)
        view = self._views[algo_id]
        vol_units = self._volume_units(volume)
        if vol_units > algo.remaining_units:
            raise InvalidArgumentError(
                f"volume exceeds the algo's remaining {algo.remaining_volume}"
            )
        if until <= int(view.timestamps[view.cursor]):
            raise InvalidArgumentError(
                "window must extend past the current snapshot"
            )
        mark = len(self._raw_logs[algo_id])
        residual = self._run_window(algo_id, algo, view, vol_units, until)
        if algo_id not in self._truncated:
            carry_over_residual(algo, residual)
        return self._materialize(algo_id, mark)

    def simulate_market_order(
        self, algo_id: str, volume: Union[Quantity, DecimalLike]
    ) -> list[TradeLogEntry]:
        """Submit a market order for the algo at its view's current position:
        advance one snapshot per pass and walk the opposite side's levels
        until filled or the history ends (truncation). Returns the new log
        entries, starting with the submission marker."""
        algo = self.algo(algo_id)
        view = self._views[algo_id]
        vol_units = self._volume_units(volume)
        if vol_units > algo.remaining_units:
            raise InvalidArgumentError(
                f"volume exceeds the algo's remaining {algo.remaining_volume}"
            )
        mark = len(self._raw_logs[algo_id])
        ts_now = int(view.timestamps[view.cursor])
        self._raw_logs[algo_id].append((ts_now, _SUBMIT, 0, vol_units, _MARKET))
        self._run_market(algo_id, algo, view, vol_units)
        return self._materialize(algo_id, mark)

    def simulate_until(self, until: int) -> None:
        """Fire every pending schedule event stamped before `until`, for all
        algos. Limit windows always run to their natural end (the next
        event's time); `until` only selects which events fire."""
        if self.current_time is None:
            raise InvalidStateError("broker not reset")
        for algo_id, algo in self._algos.items():
            while algo_id not in self._truncated:
                event = algo.peek_next_event()
                if event is None or event.time >= until:
                    break
                self._process_one_event(algo_id)
        self.current_time = max(self.current_time, until)

    def advance_past_next_limit(self, algo_id: str) -> list[int]:
        """Process the algo's pending limit event's window plus any bucket
        bounds that immediately follow it; returns the settled bucket
        indices (at most one for schedules with at least one slice per
        bucket). The event cursor then rests on the next limit event or the
        schedule end."""
        algo = self.algo(algo_id)
        event = algo.peek_next_event()
        if event is None:
            raise InvalidStateError(f"{algo_id}: schedule complete")
        if event.kind is not EventKind.LIMIT_ORDER:
            raise InvalidStateError(f"{algo_id}: expected a pending limit event")
        settled: list[int] = []
        self._process_one_event(algo_id)
        while algo_id not in self._truncated:
            nxt = algo.peek_next_event()
            if nxt is None or nxt.kind is not EventKind.BUCKET_BOUND:
                break
            settled.append(self._process_one_event(algo_id))
        return settled

    # -- event processing ----------------------------------------------------

    def _process_one_event(self, algo_id: str) -> int | None:
        """Fire the algo's next schedule event; returns the bucket index for
        bound events, None for limit events."""
        algo = self._algos[algo_id]
        view = self._views[algo_id]
        event = algo.pop_next_event()
        if event is None:
            raise InvalidStateError(f"{algo_id}: schedule complete")
        self.current_time = event.time
        view.consume_until(event.time)
        if event.kind is EventKind.LIMIT_ORDER:
            nxt = algo.peek_next_event()
            assert nxt is not None, "limit events are always followed by a bound"
            vol = min(algo.volume_for(event), algo.remaining_units)
            if vol > 0:
                residual = self._run_window(algo_id, algo, view, vol, nxt.time)
                if algo_id not in self._truncated:
                    carry_over_residual(algo, residual)
            return None
        self._settle_bound(algo_id, algo, view, event)
        return event.bucket_index

    def _run_window(
        self,
        algo_id: str,
        algo: ExecutionAlgo,
        view: HistoricalFeed,
        vol_units: int,
        until: int,
    ) -> int:
        spec = self.spec
        events, new_cursor, residual, truncated = _kernels.limit_window(
            view.timestamps,
            view.book,
            view.cursor,
            view.last_index,
            until,
            algo.side is Side.BUY,
            vol_units,
            spec.tick_units,
            spec.levels_per_side,
        )
        log = self._raw_logs[algo_id]
        acc = self._bucket_acc[algo_id][min(algo.bucket_cursor, len(self._bucket_acc[algo_id]) - 1)]
        ts_arr = view.timestamps
        last_price = 0
        for code, idx, px, qty in events:
            if code == 1:
                log.append((int(ts_arr[idx]), _TRADE, px, qty, _LIMIT))
                acc[0] += px * qty
                acc[1] += qty
            else:
                log.append((int(ts_arr[idx]), _PLACEMENT, px, 0, _LIMIT))
            last_price = px
        filled = vol_units - residual
        if filled > 0:
            algo.record_fill(filled)
        view.consume_through(new_cursor)
        if truncated:
            self._truncated.add(algo_id)
        if residual > 0 and events:
            # the unfilled remainder is pulled from the book before carrying
            log.append(
                (int(ts_arr[view.cursor]), _CANCEL, last_price, residual, _LIMIT)
            )
        return residual

    def _settle_bound(
        self,
        algo_id: str,
        algo: ExecutionAlgo,
        view: HistoricalFeed,
        event: AlgoEvent,
    ) -> None:
        log = self._raw_logs[algo_id]
        ts_now = int(view.timestamps[view.cursor])
        final = event.bucket_index == algo.params.n_buckets - 1
        if final:
            submit = algo.remaining_units
        else:
            submit = min(max(algo.bucket_remaining_units, 0), algo.remaining_units)
        if algo.params.delete_vol:
            if submit > 0:
                log.append((ts_now, _CANCEL, 0, submit, _MARKET))
                algo.record_drop(submit)
            log.append((ts_now, _SUBMIT, 0, 0, _MARKET))
        else:
            log.append((ts_now, _SUBMIT, 0, submit, _MARKET))
            if submit > 0:
                self._run_market(algo_id, algo, view, submit)
        algo.advance_bucket()

    def _run_market(
        self,
        algo_id: str,
        algo: ExecutionAlgo,
        view: HistoricalFeed,
        vol_units: int,
    ) -> None:
        log = self._raw_logs[algo_id]
        bucket = min(algo.bucket_cursor, len(self._bucket_acc[algo_id]) - 1)
        acc = self._bucket_acc[algo_id][bucket]
        is_buy = algo.side is Side.BUY
        levels = self.spec.levels_per_side
        vol = vol_units
        while vol > 0:
            idx = view.advance_index()
            if idx < 0:
                self._truncated.add(algo_id)
                break
            fills, vol_after = _kernels.market_walk(view.book[idx], is_buy, vol, levels)
            ts = int(view.timestamps[idx])
            for px, qty in fills:
                log.append((ts, _TRADE, px, qty, _MARKET))
                acc[0] += px * qty
                acc[1] += qty
            filled = vol - vol_after
            if filled > 0:
                algo.record_fill(filled)
            vol = vol_after

    # -- helpers -------------------------------------------------------------

    def _volume_units(self, volume: Union[Quantity, DecimalLike]) -> int:
        if isinstance(volume, Quantity):
            if volume.scale != self.spec.qty_scale:
                raise InvalidArgumentError("volume scale does not match the market")
            units = volume.units
            if units % self.spec.lot_units != 0:
                raise InvalidArgumentError(f"volume {volume} off the lot grid")
        else:
            units = self.spec.qty_to_units(volume)
        if units <= 0:
            raise InvalidArgumentError("volume must be positive")
        return units

    def _materialize(self, algo_id: str, mark: int) -> list[TradeLogEntry]:
        spec = self.spec
        return [
            TradeLogEntry(
                timestamp=ts,
                owner=algo_id,
                message=_MSGS[msg],
                price=spec.price(px),
                volume=spec.qty(qty),
                kind=_KINDS[kind],
            )
            for ts, msg, px, qty, kind in self._raw_logs[algo_id][mark:]
        ]


def assign_buckets(entries: Iterable[TradeLogEntry]) -> list[int]:
    """Bucket index of every log entry, derived from the log alone.

    bucket_market_submit markers close their bucket: an entry with k markers
    strictly before it belongs to bucket k, except market-kind trades (a
    bound's own fills, logged after their marker) which belong to k-1."""
    out = []
    markers = 0
    for entry in entries:
        if entry.message is LogMessage.BUCKET_MARKET_SUBMIT:
            out.append(markers)
            markers += 1
        elif entry.kind is OrderKind.MARKET and entry.message is LogMessage.TRADE:
            out.append(markers - 1)
        else:
            out.append(markers)
    return out


def recompute_bucket_totals(
    entries: Iterable[TradeLogEntry], n_buckets: int
) -> list[tuple[int, int]]:
    """Per-bucket (notional_units, qty_units) recomputed from a trade log
    alone; the independent cross-check for Broker.bucket_totals."""
    entries = list(entries)
    totals = [[0, 0] for _ in range(n_buckets)]
    for entry, bucket in zip(entries, assign_buckets(entries)):
        if entry.message is LogMessage.TRADE:
            if not 0 <= bucket < n_buckets:
                raise InvalidArgumentError(f"trade entry outside buckets: {entry}")
            totals[bucket][0] += entry.price.units * entry.volume.units
            totals[bucket][1] += entry.volume.units
    return [tuple(t) for t in totals]
