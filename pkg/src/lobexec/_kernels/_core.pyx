# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernel backend. Mirrors _pure semantics exactly; see the package
docstring in lobexec._kernels for the row layout and event tuple contract."""

from libc.stdint cimport int64_t


def market_walk(const int64_t[:] row, bint is_buy, int64_t volume, Py_ssize_t levels):
    cdef Py_ssize_t px_off = 2 * levels if is_buy else 0
    cdef Py_ssize_t qty_off = 3 * levels if is_buy else levels
    cdef Py_ssize_t i
    cdef int64_t vol = volume
    cdef int64_t avail, take
    fills = []
    for i in range(levels):
        avail = row[qty_off + i]
        if avail <= 0:
            continue
        take = avail if avail < vol else vol
        fills.append((row[px_off + i], take))
        vol -= take
        if vol == 0:
            break
    return fills, vol


def limit_cross(const int64_t[:] row, bint is_buy, int64_t price, int64_t volume,
                Py_ssize_t levels):
    cdef Py_ssize_t i
    cdef int64_t total = 0
    cdef int64_t qty
    if is_buy:
        for i in range(levels):
            qty = row[3 * levels + i]
            if qty <= 0:
                continue
            if row[2 * levels + i] > price:
                break
            total += qty
            if total >= volume:
                return volume
    else:
        for i in range(levels):
            qty = row[levels + i]
            if qty <= 0:
                continue
            if row[i] < price:
                break
            total += qty
            if total >= volume:
                return volume
    return total


def limit_window(const int64_t[:] timestamps, const int64_t[:, :] book,
                 Py_ssize_t cursor, Py_ssize_t last_index, int64_t until,
                 bint is_buy, int64_t volume, int64_t tick, Py_ssize_t levels):
    cdef int64_t vol = volume
    cdef Py_ssize_t cur = cursor
    cdef Py_ssize_t place_idx, i
    cdef int64_t price, fill, total, qty
    cdef bint truncated = False
    events = []

    if vol <= 0:
        return events, cur, vol, False
    if cur >= last_index:
        return events, cur, vol, True

    while vol > 0:
        if is_buy:
            price = book[cur, 0] + tick
        else:
            price = book[cur, 2 * levels] - tick
        place_idx = cur
        if cur + 1 > last_index:
            truncated = True
            break
        cur += 1

        # crossable depth against the new snapshot, capped at vol
        total = 0
        if is_buy:
            for i in range(levels):
                qty = book[cur, 3 * levels + i]
                if qty <= 0:
                    continue
                if book[cur, 2 * levels + i] > price:
                    break
                total += qty
                if total >= vol:
                    total = vol
                    break
        else:
            for i in range(levels):
                qty = book[cur, levels + i]
                if qty <= 0:
                    continue
                if book[cur, i] < price:
                    break
                total += qty
                if total >= vol:
                    total = vol
                    break
        fill = total

        if fill > 0:
            events.append((1, cur, price, fill))
            vol -= fill
        else:
            events.append((0, place_idx, price, 0))
        if timestamps[cur] >= until:
            break

    return events, cur, vol, truncated
