"""Bucketed child-order schedules and per-algo execution state.

A schedule splits a parent order over n_buckets time buckets; each bucket
submits no_of_slices equally sized limit orders at evenly spaced times and
closes with a bucket-bound event where any unexecuted bucket volume goes to
market (or is dropped when delete_vol is set). Bucket bounds other than the
final one can be jittered by up to rand_bucket_bounds_width ms; the final
bound always sits exactly at start_time + exec_time_ms.

All volumes are integer lot multiples. Quotas split the total proportionally
to bucket_func weights (uniform by default), rounding down with the remainder
going to the last bucket; slice volumes within a bucket round down with the
remainder going to the last slice.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Sequence, Union

import numpy as np

from .errors import InvalidArgumentError, InvalidStateError
from .market import (
    DecimalLike,
    MarketSpec,
    Quantity,
    Side,
    _as_decimal,
)


class EventKind(enum.Enum):
    LIMIT_ORDER = "limit_order"
    BUCKET_BOUND = "bucket_bound"


@dataclass(frozen=True)
class AlgoEvent:
    """One scheduled action: a limit-order submission or a bucket bound.

    Events are processed in list order; a bucket's bound shares its timestamp
    with the next bucket's first slice and is processed first.
    """

    time: int
    kind: EventKind
    bucket_index: int
    slice_index: int = -1


@dataclass(frozen=True)
class ScheduleParams:
    start_time: int
    exec_time_ms: int
    n_buckets: int
    no_of_slices: int
    rand_bucket_bounds_width: int = 0
    bucket_func: Optional[tuple] = None
    delete_vol: bool = False

    def __post_init__(self) -> None:
        if self.start_time < 0:
            raise InvalidArgumentError("start_time must be >= 0")
        if self.exec_time_ms <= 0:
            raise InvalidArgumentError("exec_time_ms must be positive")
        if self.n_buckets < 1:
            raise InvalidArgumentError("n_buckets must be >= 1")
        if self.no_of_slices < 1:
            raise InvalidArgumentError("no_of_slices must be >= 1")
        if self.rand_bucket_bounds_width < 0:
            raise InvalidArgumentError("rand_bucket_bounds_width must be >= 0")
        shortest = self.exec_time_ms // self.n_buckets - 2 * self.rand_bucket_bounds_width
        if shortest < self.no_of_slices:
            raise InvalidArgumentError(
                "buckets too short for the slice count and bound jitter: "
                f"worst case {shortest}ms for {self.no_of_slices} slice(s)"
            )
        if self.bucket_func is not None:
            weights = tuple(self.bucket_func)
            if len(weights) != self.n_buckets:
                raise InvalidArgumentError(
                    f"bucket_func needs {self.n_buckets} weights, got {len(weights)}"
                )
            for w in weights:
                if _as_decimal(w) <= 0:
                    raise InvalidArgumentError("bucket weights must be positive")
            object.__setattr__(self, "bucket_func", weights)

    @property
    def end_time(self) -> int:
        return self.start_time + self.exec_time_ms


def _round_lots_half_even(value: Fraction) -> int:
    floor = value.numerator // value.denominator
    remainder = value - floor
    half = Fraction(1, 2)
    if remainder > half or (remainder == half and floor % 2 != 0):
        return floor + 1
    return floor


class ExecutionAlgo:
    """Mutable execution state of one scheduled algo.

    Tracks the event cursor, per-slice volumes (which residual carry-over and
    action volume factors may rewrite before submission), the remaining
    unexecuted volume, the current bucket's remaining quota, and volume
    dropped at bounds under delete_vol.
    """

    def __init__(
        self,
        algo_id: str,
        side: Side,
        spec: MarketSpec,
        params: ScheduleParams,
        total_volume_units: int,
        seed: int,
        events: tuple[AlgoEvent, ...],
        volumes_units: list[int],
        bucket_quotas_units: tuple[int, ...],
        bounds: tuple[int, ...],
    ) -> None:
        self.algo_id = algo_id
        self.side = side
        self.spec = spec
        self.params = params
        self.seed = seed
        self.total_volume_units = total_volume_units
        self.events = events
        self.volumes_units = volumes_units
        self.bucket_quotas_units = bucket_quotas_units
        self.bounds = bounds
        self.event_cursor = 0
        self.bucket_cursor = 0
        self.remaining_units = total_volume_units
        self.bucket_remaining_units = bucket_quotas_units[0]
        self.dropped_units = 0

    # -- schedule access ---------------------------------------------------

    def peek_next_event(self) -> AlgoEvent | None:
        if self.event_cursor >= len(self.events):
            return None
        return self.events[self.event_cursor]

    def pop_next_event(self) -> AlgoEvent | None:
        event = self.peek_next_event()
        if event is not None:
            self.event_cursor += 1
        return event

    def volume_index(self, event: AlgoEvent) -> int:
        if event.kind is not EventKind.LIMIT_ORDER:
            raise InvalidArgumentError("bucket bounds carry no scheduled volume")
        return event.bucket_index * self.params.no_of_slices + event.slice_index

    def volume_for(self, event: AlgoEvent) -> int:
        return self.volumes_units[self.volume_index(event)]

    @property
    def schedule_complete(self) -> bool:
        return self.event_cursor >= len(self.events)

    @property
    def n_limit_events(self) -> int:
        return self.params.n_buckets * self.params.no_of_slices

    # -- execution accounting ----------------------------------------------

    def record_fill(self, units: int) -> None:
        if units < 0 or units > self.remaining_units:
            raise InvalidStateError(
                f"fill of {units} units vs {self.remaining_units} remaining"
            )
        self.remaining_units -= units
        self.bucket_remaining_units -= units

    def record_drop(self, units: int) -> None:
        self.dropped_units += units

    def advance_bucket(self) -> None:
        self.bucket_cursor += 1
        if self.bucket_cursor < self.params.n_buckets:
            self.bucket_remaining_units = self.bucket_quotas_units[self.bucket_cursor]
        else:
            self.bucket_remaining_units = 0

    @property
    def executed_units(self) -> int:
        return self.total_volume_units - self.remaining_units

    @property
    def total_volume(self) -> Quantity:
        return self.spec.qty(self.total_volume_units)

    @property
    def remaining_volume(self) -> Quantity:
        return self.spec.qty(self.remaining_units)

    @property
    def volumes_per_trade(self) -> tuple[Quantity, ...]:
        return tuple(self.spec.qty(v) for v in self.volumes_units)

    def schedule_rows(self) -> list[tuple[int, str, str]]:
        """(time, kind, volume) serialization; bounds have empty volume."""
        rows = []
        for event in self.events:
            if event.kind is EventKind.LIMIT_ORDER:
                rows.append(
                    (event.time, event.kind.value, self.spec.qty_str(self.volume_for(event)))
                )
            else:
                rows.append((event.time, event.kind.value, ""))
        return rows


def build_twap_schedule(
    params: ScheduleParams,
    total_volume: DecimalLike,
    side: Side,
    spec: MarketSpec,
    seed: int,
    *,
    algo_id: str = "twap",
) -> ExecutionAlgo:
    """Build a bucketed schedule and its fresh execution state.

    total_volume must be a positive lot multiple large enough to give every
    bucket at least one lot per slice. Bound jitter is drawn from the seed
    (uniform integer ms on [-width, width], final bound pinned), so identical
    inputs build identical schedules.
    """
    total_units = spec.qty_to_units(total_volume)
    if total_units <= 0:
        raise InvalidArgumentError("total volume must be positive")
    total_lots = total_units // spec.lot_units
    n, s = params.n_buckets, params.no_of_slices

    bounds = [
        params.start_time + (params.exec_time_ms * k) // n for k in range(n + 1)
    ]
    if params.rand_bucket_bounds_width > 0 and n > 1:
        rng = np.random.Generator(np.random.PCG64(seed))
        width = params.rand_bucket_bounds_width
        jitter = rng.integers(-width, width + 1, size=n - 1, dtype=np.int64)
        for k in range(1, n):
            bounds[k] += int(jitter[k - 1])
    assert all(b2 > b1 for b1, b2 in zip(bounds, bounds[1:]))

    if params.bucket_func is None:
        weights = [Fraction(1)] * n
    else:
        weights = [Fraction(_as_decimal(w)) for w in params.bucket_func]
    total_weight = sum(weights)
    quota_lots: list[int] = []
    for w in weights[:-1]:
        share = Fraction(total_lots) * w / total_weight
        quota_lots.append(share.numerator // share.denominator)
    quota_lots.append(total_lots - sum(quota_lots))

    volumes_lots: list[int] = []
    events: list[AlgoEvent] = []
    for b in range(n):
        if quota_lots[b] < s:
            raise InvalidArgumentError(
                f"bucket {b} quota of {quota_lots[b]} lot(s) cannot cover "
                f"{s} slice(s)"
            )
        base = quota_lots[b] // s
        gap = bounds[b + 1] - bounds[b]
        for j in range(s):
            lots = base if j < s - 1 else quota_lots[b] - base * (s - 1)
            volumes_lots.append(lots)
            events.append(
                AlgoEvent(
                    time=bounds[b] + (gap * j) // s,
                    kind=EventKind.LIMIT_ORDER,
                    bucket_index=b,
                    slice_index=j,
                )
            )
        events.append(
            AlgoEvent(time=bounds[b + 1], kind=EventKind.BUCKET_BOUND, bucket_index=b)
        )

    return ExecutionAlgo(
        algo_id=algo_id,
        side=side,
        spec=spec,
        params=params,
        total_volume_units=total_units,
        seed=seed,
        events=tuple(events),
        volumes_units=[lots * spec.lot_units for lots in volumes_lots],
        bucket_quotas_units=tuple(lots * spec.lot_units for lots in quota_lots),
        bounds=tuple(bounds),
    )


def apply_volume_factor(
    algo: ExecutionAlgo,
    event_index: int,
    factor: Union[DecimalLike, Fraction],
) -> int:
    """Scale a pending limit event's volume by a positive factor, rounding to
    the lot grid (ties to even). Returns the new volume in units; it may
    round to zero, in which case the slice is skipped at submission time."""
    if not 0 <= event_index < len(algo.events):
        raise InvalidArgumentError(f"no event at index {event_index}")
    event = algo.events[event_index]
    if event.kind is not EventKind.LIMIT_ORDER:
        raise InvalidArgumentError("volume factors apply to limit events only")
    if event_index < algo.event_cursor:
        raise InvalidStateError("event already executed")
    if isinstance(factor, Fraction):
        ratio = factor
    else:
        ratio = Fraction(_as_decimal(factor))
    if ratio <= 0:
        raise InvalidArgumentError(f"volume factor must be positive, got {factor}")
    idx = algo.volume_index(event)
    lots = algo.volumes_units[idx] // algo.spec.lot_units
    new_lots = _round_lots_half_even(lots * ratio)
    algo.volumes_units[idx] = new_lots * algo.spec.lot_units
    return algo.volumes_units[idx]


def carry_over_residual(algo: ExecutionAlgo, residual_units: int) -> None:
    """Roll a window's unexecuted volume into the next slice of the same
    bucket; ahead of a bucket bound it stays in the bucket remainder, where
    the bound either sends it to market or drops it under delete_vol."""
    if residual_units < 0:
        raise InvalidArgumentError("residual cannot be negative")
    if residual_units == 0:
        return
    nxt = algo.peek_next_event()
    if nxt is not None and nxt.kind is EventKind.LIMIT_ORDER:
        if nxt.bucket_index != algo.bucket_cursor:
            raise InvalidStateError("carry-over across a bucket bound")
        algo.volumes_units[algo.volume_index(nxt)] += residual_units


def algo_reset(algo: ExecutionAlgo) -> ExecutionAlgo:
    """Fresh execution state for the same schedule inputs (same algo_id,
    same seed, hence structurally identical events and volumes)."""
    return build_twap_schedule(
        algo.params,
        algo.spec.qty_str(algo.total_volume_units),
        algo.side,
        algo.spec,
        algo.seed,
        algo_id=algo.algo_id,
    )
