"""Shared builders and brute-force oracles for the test suite.

The oracles here are deliberately naive (lot-by-lot loops, list scans) so
they cannot share a bug with the vectorized or compiled implementations
they check.
"""

from __future__ import annotations

import numpy as np

from lobexec import HistoricalFeed, LobSnapshot, MarketSpec


def spec_default() -> MarketSpec:
    return MarketSpec(tick_size="0.1", lot_size="0.001")


def snap(spec: MarketSpec, ts: int, bids, asks) -> LobSnapshot:
    return LobSnapshot.from_levels(ts, bids, asks, spec)


def feed_from_snapshots(spec: MarketSpec, snapshots) -> HistoricalFeed:
    ts = np.array([s.timestamp for s in snapshots], dtype=np.int64)
    book = np.stack([s.row for s in snapshots])
    return HistoricalFeed(ts, book, spec)


def fixture_snapshots(spec: MarketSpec) -> list[LobSnapshot]:
    """Seven snapshots, 100ms apart, small enough to execute by hand.

    The expected trade logs asserted in test_broker were computed manually
    from these books; change them and those tests stop meaning anything.
    """
    return [
        snap(spec, 1000, [("100.0", "2.0")], [("100.2", "1.5")]),
        snap(spec, 1100, [("100.1", "1.0")], [("100.2", "0.5"), ("100.3", "2.0")]),
        snap(spec, 1200, [("100.0", "1.0")], [("100.1", "0.8"), ("100.2", "1.0")]),
        snap(spec, 1300, [("99.9", "1.0")], [("100.0", "3.0")]),
        snap(spec, 1400, [("99.8", "1.0")], [("100.1", "2.0")]),
        snap(spec, 1500, [("99.9", "2.0")], [("100.2", "2.0")]),
        snap(spec, 1600, [("99.9", "2.0")], [("100.2", "0.5"), ("100.4", "1.0")]),
    ]


def fixture_feed(spec: MarketSpec) -> HistoricalFeed:
    return feed_from_snapshots(spec, fixture_snapshots(spec))


def random_book_row(rng: np.random.Generator, spec: MarketSpec) -> np.ndarray:
    """One valid random snapshot row: random depth per side, random tick gaps
    between levels, quantities in 1..50 units."""
    levels = spec.levels_per_side
    row = np.zeros(4 * levels, dtype=np.int64)
    bid_ticks = int(rng.integers(levels * 3 + 2, 500))
    spread = int(rng.integers(1, 4))
    n_bids = int(rng.integers(1, levels + 1))
    n_asks = int(rng.integers(1, levels + 1))
    px = bid_ticks
    for i in range(n_bids):
        row[i] = px * spec.tick_units
        row[levels + i] = int(rng.integers(1, 51)) * spec.lot_units
        px -= int(rng.integers(1, 4))
    px = bid_ticks + spread
    for i in range(n_asks):
        row[2 * levels + i] = px * spec.tick_units
        row[3 * levels + i] = int(rng.integers(1, 51)) * spec.lot_units
        px += int(rng.integers(1, 4))
    return row


def market_walk_oracle(row, is_buy: bool, volume: int, levels: int, lot_units: int):
    """Reference market-order walk, consuming one lot at a time."""
    cells = list(row)
    px_off = 2 * levels if is_buy else 0
    qty_off = 3 * levels if is_buy else levels
    remaining = int(volume)
    raw: list[list[int]] = []
    for i in range(levels):
        qty = cells[qty_off + i]
        px = cells[px_off + i]
        if qty <= 0:
            continue
        while qty > 0 and remaining > 0:
            take = min(lot_units, qty, remaining)
            if raw and raw[-1][0] == px:
                raw[-1][1] += take
            else:
                raw.append([px, take])
            qty -= take
            remaining -= take
        if remaining == 0:
            break
    return [(px, q) for px, q in raw], remaining


def limit_cross_oracle(row, is_buy: bool, price: int, volume: int, levels: int) -> int:
    """Reference crossable-volume scan for a resting limit order."""
    cells = list(row)
    total = 0
    for i in range(levels):
        if is_buy:
            px, qty = cells[2 * levels + i], cells[3 * levels + i]
        else:
            px, qty = cells[i], cells[levels + i]
        if qty <= 0:
            break
        if (px > price) if is_buy else (px < price):
            break
        total += qty
    return min(total, int(volume))


def base_config(**overrides) -> dict:
    """A small synthetic-feed config dict; keyword args replace episode keys."""
    episode = {
        "direction": "buy",
        "total_volume": "20",
        "exec_time_ms": 60_000,
        "n_buckets": 5,
        "no_of_slices": 4,
        "start_time": "sample",
    }
    episode.update(overrides)
    return {
        "market": {"tick_size": "0.1", "lot_size": "0.001"},
        "feed": {"kind": "synthetic", "seed": 11, "n_snapshots": 4000},
        "episode": episode,
    }
