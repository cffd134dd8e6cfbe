"""Pure-Python kernel fallback.

Semantically identical to the compiled backend; the window kernel leans on
numpy to precompute per-snapshot candidate prices and crossable depths so the
only Python-level sequential work is capping fills at the remaining volume.

Event tuples are (code, snapshot_index, price_units, qty_units) where code 0
is a placement (index = snapshot the price was derived from, qty 0) and code
1 is a trade (index = snapshot it matched against, fills booked at the limit
price).
"""

from __future__ import annotations

import numpy as np


def market_walk(row, is_buy: bool, volume: int, levels: int):
    """Walk the opposite side of one row, best level first.

    Returns (fills, residual) with fills as [(price_units, qty_units), ...].
    """
    cells = row.tolist() if hasattr(row, "tolist") else list(row)
    px_off = 2 * levels if is_buy else 0
    qty_off = 3 * levels if is_buy else levels
    fills = []
    vol = int(volume)
    for i in range(levels):
        avail = cells[qty_off + i]
        if avail <= 0:
            continue
        take = avail if avail < vol else vol
        fills.append((cells[px_off + i], take))
        vol -= take
        if vol == 0:
            break
    return fills, vol


def limit_cross(row, is_buy: bool, price: int, volume: int, levels: int) -> int:
    """Crossable volume for a resting limit order against one row, capped at
    `volume`. Buy orders cross asks priced <= price, sells cross bids >= price."""
    cells = row.tolist() if hasattr(row, "tolist") else list(row)
    total = 0
    if is_buy:
        for i in range(levels):
            qty = cells[3 * levels + i]
            if qty <= 0:
                continue
            if cells[2 * levels + i] > price:
                break
            total += qty
            if total >= volume:
                return volume
    else:
        for i in range(levels):
            qty = cells[levels + i]
            if qty <= 0:
                continue
            if cells[i] < price:
                break
            total += qty
            if total >= volume:
                return volume
    return total


def limit_window(
    timestamps,
    book,
    cursor: int,
    last_index: int,
    until: int,
    is_buy: bool,
    volume: int,
    tick: int,
    levels: int,
):
    """Run one resting-limit-order window.

    Starting at `cursor`, each iteration prices the order one tick inside the
    best same-side quote of the current snapshot, advances one snapshot, and
    matches against the new snapshot's opposite side. A snapshot stamped at or
    past `until` is still matched, then the window ends. Returns
    (events, new_cursor, residual, truncated) where truncated means the data
    ran out before the window closed with volume left.
    """
    vol = int(volume)
    if vol <= 0:
        return [], int(cursor), vol, False
    if cursor >= last_index:
        return [], int(cursor), vol, True

    # Match targets are cursor+1 .. stop, where stop is the first snapshot
    # stamped at or past `until` (inclusive), clipped to the data end.
    hi = int(np.searchsorted(timestamps, until, side="left"))
    stop = min(max(hi, cursor + 1), last_index)
    place_idx = np.arange(cursor, stop, dtype=np.int64)
    match_idx = place_idx + 1

    if is_buy:
        prices = book[place_idx, 0] + tick
        opp_px = book[match_idx, 2 * levels : 3 * levels]
        opp_qty = book[match_idx, 3 * levels : 4 * levels]
        crossed = opp_px <= prices[:, None]
    else:
        prices = book[place_idx, 2 * levels] - tick
        opp_px = book[match_idx, 0:levels]
        opp_qty = book[match_idx, levels : 2 * levels]
        crossed = opp_px >= prices[:, None]
    depth = np.where(crossed & (opp_qty > 0), opp_qty, 0).sum(axis=1)

    # Cap fills at the remaining volume; the window stops early once filled.
    fills = np.zeros(len(depth), dtype=np.int64)
    n_iter = len(depth)
    residual = vol
    for k in np.flatnonzero(depth):
        take = min(residual, int(depth[k]))
        fills[k] = take
        residual -= take
        if residual == 0:
            n_iter = int(k) + 1
            break

    codes = fills[:n_iter] > 0
    indices = np.where(codes, match_idx[:n_iter], place_idx[:n_iter])
    events = list(
        zip(
            codes.astype(np.int64).tolist(),
            indices.tolist(),
            prices[:n_iter].tolist(),
            fills[:n_iter].tolist(),
        )
    )
    new_cursor = int(match_idx[n_iter - 1])
    truncated = residual > 0 and hi > last_index
    return events, new_cursor, residual, truncated
