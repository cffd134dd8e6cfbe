"""Level-2 snapshot representation, validation, and single-snapshot execution.

A snapshot row is a flat int64 vector of 4*L cells for a book with L levels
per side: bid prices (best first), bid quantities, ask prices (best first),
ask quantities, in tick/lot units. Shallow books are allowed as a zero-padded
suffix on either side; at least the best level of each side must be present.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from . import _kernels
from .errors import DataIntegrityError, InvalidArgumentError, ParseError
from .market import (
    MAX_UNITS,
    MarketSpec,
    Order,
    OrderKind,
    Price,
    Quantity,
    Side,
    to_units,
)


def validate_book_arrays(
    timestamps: np.ndarray, book: np.ndarray, spec: MarketSpec, context: str = "book"
) -> None:
    """Vectorized invariant checks over a whole (n, 4L) book array.

    Raises DataIntegrityError naming the first offending row. Checks: strictly
    increasing timestamps, on-grid prices and quantities, strictly sorted
    non-empty level prefixes with zeroed padding after them, uncrossed best
    quotes, and the engine magnitude guard.
    """
    levels = spec.levels_per_side
    if book.ndim != 2 or book.shape[1] != 4 * levels:
        raise DataIntegrityError(
            f"{context}: expected {4 * levels} columns, got {book.shape}"
        )
    if len(timestamps) != len(book):
        raise DataIntegrityError(f"{context}: timestamp/row count mismatch")
    if len(book) == 0:
        return

    def fail(mask: np.ndarray, message: str) -> None:
        row = int(np.flatnonzero(mask)[0])
        raise DataIntegrityError(f"{context}: row {row}: {message}")

    if np.any(timestamps < 0):
        fail(timestamps < 0, "negative timestamp")
    if len(timestamps) > 1:
        bad = np.zeros(len(timestamps), dtype=bool)
        bad[1:] = np.diff(timestamps) <= 0
        if bad.any():
            fail(bad, "timestamps not strictly increasing")

    if np.any(np.abs(book) > MAX_UNITS):
        fail((np.abs(book) > MAX_UNITS).any(axis=1), "value exceeds magnitude guard")
    if np.any(book < 0):
        fail((book < 0).any(axis=1), "negative price or quantity")

    bid_px = book[:, 0:levels]
    bid_qty = book[:, levels : 2 * levels]
    ask_px = book[:, 2 * levels : 3 * levels]
    ask_qty = book[:, 3 * levels : 4 * levels]

    px_off_grid = (bid_px % spec.tick_units != 0) | (ask_px % spec.tick_units != 0)
    if px_off_grid.any():
        fail(px_off_grid.any(axis=1), "price off the tick grid")
    qty_off_grid = (bid_qty % spec.lot_units != 0) | (ask_qty % spec.lot_units != 0)
    if qty_off_grid.any():
        fail(qty_off_grid.any(axis=1), "quantity off the lot grid")

    for name, px, qty, descending in (
        ("bid", bid_px, bid_qty, True),
        ("ask", ask_px, ask_qty, False),
    ):
        live = (px > 0) & (qty > 0)
        half_dead = (px > 0) != (qty > 0)
        if half_dead.any():
            fail(half_dead.any(axis=1), f"{name} level with price xor quantity")
        if not live[:, 0].all():
            fail(~live[:, 0], f"empty best {name} level")
        if levels > 1:
            # live levels must form a prefix: no live level after a dead one
            gap = live[:, 1:] & ~live[:, :-1]
            if gap.any():
                fail(gap.any(axis=1), f"gap in {name} levels")
            pair = live[:, 1:]
            if descending:
                unsorted = pair & (px[:, 1:] >= px[:, :-1])
            else:
                unsorted = pair & (px[:, 1:] <= px[:, :-1])
            if unsorted.any():
                fail(unsorted.any(axis=1), f"{name} prices not strictly sorted")

    crossed = bid_px[:, 0] >= ask_px[:, 0]
    if crossed.any():
        fail(crossed, "crossed book (best bid >= best ask)")


class LobSnapshot:
    """One immutable Level-2 snapshot: a timestamp plus a row vector."""

    __slots__ = ("timestamp", "row", "spec")

    def __init__(
        self,
        timestamp: int,
        row: np.ndarray,
        spec: MarketSpec,
        *,
        validate: bool = True,
    ) -> None:
        self.timestamp = int(timestamp)
        arr = np.asarray(row, dtype=np.int64)
        if arr.flags.writeable:
            # snapshots are immutable; never alias a caller's mutable buffer
            arr = arr.copy()
            arr.setflags(write=False)
        self.row = arr
        self.spec = spec
        if validate:
            validate_book_arrays(
                np.asarray([self.timestamp], dtype=np.int64),
                arr.reshape(1, -1),
                spec,
                context="snapshot",
            )

    @classmethod
    def from_levels(
        cls,
        timestamp: int,
        bids: list[tuple],
        asks: list[tuple],
        spec: MarketSpec,
    ) -> "LobSnapshot":
        """Build a snapshot from [(price, qty), ...] per side, best first.

        Accepts str/Decimal values; short sides are zero-padded.
        """
        levels = spec.levels_per_side
        if not 1 <= len(bids) <= levels or not 1 <= len(asks) <= levels:
            raise InvalidArgumentError(
                f"each side needs 1..{levels} levels, got {len(bids)}/{len(asks)}"
            )
        row = np.zeros(4 * levels, dtype=np.int64)
        for i, (px, qty) in enumerate(bids):
            row[i] = spec.price_to_units(px)
            row[levels + i] = spec.qty_to_units(qty)
        for i, (px, qty) in enumerate(asks):
            row[2 * levels + i] = spec.price_to_units(px)
            row[3 * levels + i] = spec.qty_to_units(qty)
        return cls(timestamp, row, spec)

    @property
    def best_bid_units(self) -> int:
        return int(self.row[0])

    @property
    def best_ask_units(self) -> int:
        return int(self.row[2 * self.spec.levels_per_side])

    @property
    def best_bid(self) -> Price:
        return self.spec.price(self.best_bid_units)

    @property
    def best_ask(self) -> Price:
        return self.spec.price(self.best_ask_units)

    def mid_fraction(self) -> Fraction:
        return Fraction(
            self.best_bid_units + self.best_ask_units,
            2 * 10**self.spec.price_scale,
        )

    def levels(self, side: Side) -> list[tuple[Price, Quantity]]:
        """Live (price, quantity) pairs for one side, best first."""
        n = self.spec.levels_per_side
        px_off = 0 if side is Side.BUY else 2 * n
        qty_off = n if side is Side.BUY else 3 * n
        out = []
        for i in range(n):
            qty = int(self.row[qty_off + i])
            if qty <= 0:
                break
            out.append((self.spec.price(int(self.row[px_off + i])), self.spec.qty(qty)))
        return out


def parse_row_units(line: str, spec: MarketSpec) -> tuple[int, list[int]]:
    """Parse one CSV data row into (timestamp, unit cells) without building a
    snapshot object; the bulk loader validates whole arrays afterwards."""
    levels = spec.levels_per_side
    parts = line.rstrip("\n").split(",")
    if len(parts) != 1 + 4 * levels:
        raise ParseError(
            f"expected {1 + 4 * levels} fields, got {len(parts)}: {line[:80]!r}"
        )
    try:
        timestamp = int(parts[0])
        ps, qs = spec.price_scale, spec.qty_scale
        row = [0] * (4 * levels)
        for i in range(levels):
            row[i] = _str_units(parts[1 + i], ps)
            row[levels + i] = _str_units(parts[1 + levels + i], qs)
            row[2 * levels + i] = _str_units(parts[1 + 2 * levels + i], ps)
            row[3 * levels + i] = _str_units(parts[1 + 3 * levels + i], qs)
    except ValueError as exc:
        raise ParseError(f"bad snapshot row: {exc}: {line[:80]!r}") from exc
    return timestamp, row


def parse_snapshot_row(line: str, spec: MarketSpec) -> LobSnapshot:
    """Parse and validate one CSV data row: timestamp_ms plus 4*L cells."""
    timestamp, row = parse_row_units(line, spec)
    return LobSnapshot(timestamp, np.array(row, dtype=np.int64), spec)


def _str_units(text: str, scale: int) -> int:
    """Fast exact decimal-string-to-units conversion for feed parsing."""
    neg = text.startswith("-")
    if neg:
        text = text[1:]
    whole, _, frac = text.partition(".")
    if len(frac) > scale:
        extra = frac[scale:]
        if extra.strip("0"):
            raise ValueError(f"more than {scale} decimal place(s): {text!r}")
        frac = frac[:scale]
    units = int(whole or "0") * 10**scale + int(frac.ljust(scale, "0") or "0")
    return -units if neg else units


def best_quote(snapshot: LobSnapshot, side: Side) -> Price:
    """Reference quote for an order of the given side: its own side's best
    (buy orders reprice off the best bid, sells off the best ask)."""
    return snapshot.best_bid if side is Side.BUY else snapshot.best_ask


@dataclass(frozen=True)
class FillReport:
    """Outcome of executing one order against one snapshot."""

    trades: tuple[tuple[Price, Quantity], ...]
    residual_volume: Quantity
    exhausted_book: bool


def execute_market_against_snapshot(order: Order, snapshot: LobSnapshot) -> FillReport:
    """Walk the opposite side of the snapshot, best level first, until the
    order fills or the book runs out (exhausted_book)."""
    if order.kind is not OrderKind.MARKET:
        raise InvalidArgumentError("expected a market order")
    spec = snapshot.spec
    _check_volume(order, spec)
    fills, residual = _kernels.market_walk(
        snapshot.row,
        order.side is Side.BUY,
        order.volume.units,
        spec.levels_per_side,
    )
    trades = tuple((spec.price(px), spec.qty(qty)) for px, qty in fills)
    return FillReport(
        trades=trades,
        residual_volume=spec.qty(residual),
        exhausted_book=residual > 0,
    )


def execute_resting_limit_against_snapshot(
    order: Order, snapshot: LobSnapshot
) -> FillReport:
    """Match a resting limit order against the snapshot's opposite side.

    Fills book at the limit price (one aggregate trade); exhausted_book is
    True when the order consumed every crossable level and still has volume.
    """
    if order.kind is not OrderKind.LIMIT:
        raise InvalidArgumentError("expected a limit order")
    spec = snapshot.spec
    _check_volume(order, spec)
    assert order.price is not None
    if order.price.scale != spec.price_scale:
        raise InvalidArgumentError("order price scale does not match the market")
    if order.price.units % spec.tick_units != 0 or order.price.units <= 0:
        raise InvalidArgumentError(f"limit price {order.price} is off the tick grid")
    fill = _kernels.limit_cross(
        snapshot.row,
        order.side is Side.BUY,
        order.price.units,
        order.volume.units,
        spec.levels_per_side,
    )
    residual = order.volume.units - fill
    trades = ((order.price, spec.qty(fill)),) if fill > 0 else ()
    return FillReport(
        trades=trades,
        residual_volume=spec.qty(residual),
        exhausted_book=fill > 0 and residual > 0,
    )


def _check_volume(order: Order, spec: MarketSpec) -> None:
    if order.volume.scale != spec.qty_scale:
        raise InvalidArgumentError("order volume scale does not match the market")
    if order.volume.units % spec.lot_units != 0:
        raise InvalidArgumentError(f"volume {order.volume} is off the lot grid")
