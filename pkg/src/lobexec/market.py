"""Market vocabulary types and exact fixed-point arithmetic.

Prices and quantities are stored as scaled integers ("units"): a price of
100.1 on a 0.1 tick grid is 1001 units at scale 1. All money math inside the
engine happens on these integers or on fractions.Fraction, never on binary
floats, so results are exact and runs are byte-reproducible. Floats are
rejected at the conversion boundary; pass str or Decimal.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field
from decimal import Decimal, InvalidOperation
from fractions import Fraction
from typing import Iterable, Union

from .errors import EmptyTradesError, InvalidArgumentError

# Magnitude guard for scaled integer values. Anything below 2**52 is exactly
# representable as a float64, which the observation builder relies on, and
# keeps compiled int64 kernels far from overflow.
MAX_UNITS = 2**52

DecimalLike = Union[Decimal, str, int]


def _as_decimal(value: DecimalLike) -> Decimal:
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        raise InvalidArgumentError(
            f"float {value!r} is not exact; pass str, int, or Decimal"
        )
    if isinstance(value, (str, int)):
        try:
            return Decimal(value)
        except InvalidOperation as exc:
            raise InvalidArgumentError(f"not a decimal number: {value!r}") from exc
    raise InvalidArgumentError(f"cannot interpret {type(value).__name__} as decimal")


def _scale_of(value: Decimal) -> int:
    """Number of significant decimal places of a normalized decimal, >= 0."""
    exponent = value.normalize().as_tuple().exponent
    return max(0, -int(exponent))


def to_units(value: DecimalLike, scale: int) -> int:
    """Convert a decimal value to an integer count of 10**-scale units.

    Raises InvalidArgumentError if the value needs more precision than the
    scale allows or exceeds the engine's magnitude guard.
    """
    d = _as_decimal(value)
    scaled = d.scaleb(scale)
    units = int(scaled)
    if scaled != units:
        raise InvalidArgumentError(
            f"{value} has more than {scale} decimal place(s)"
        )
    if abs(units) > MAX_UNITS:
        raise InvalidArgumentError(f"{value} exceeds magnitude guard at scale {scale}")
    return units


def units_to_decimal(units: int, scale: int) -> Decimal:
    return Decimal(units).scaleb(-scale)


def format_units(units: int, scale: int, *, strip: bool = False) -> str:
    """Plain fixed-point decimal string for a scaled integer.

    By default the fractional part keeps exactly `scale` digits so equal
    values always serialize identically; strip=True drops trailing zeros
    (used for human-facing exact reward strings).
    """
    sign = "-" if units < 0 else ""
    mag = abs(units)
    if scale == 0:
        return f"{sign}{mag}"
    digits = str(mag).rjust(scale + 1, "0")
    whole, frac = digits[:-scale], digits[-scale:]
    if strip:
        frac = frac.rstrip("0")
        return f"{sign}{whole}.{frac}" if frac else f"{sign}{whole}"
    return f"{sign}{whole}.{frac}"


def exact_str(value: Fraction) -> str:
    """Lossless string form of an exact rational.

    Terminating decimals (denominator 2**a * 5**b) render as a minimal
    decimal string; everything else renders as "numerator/denominator".
    """
    if value == 0:
        return "0"
    n, d = value.numerator, value.denominator
    twos = fives = 0
    rem = d
    while rem % 2 == 0:
        rem //= 2
        twos += 1
    while rem % 5 == 0:
        rem //= 5
        fives += 1
    if rem != 1:
        return f"{n}/{d}"
    scale = max(twos, fives)
    units = n * 10**scale // d
    return format_units(units, scale, strip=True)


def parse_exact(text: str) -> Fraction:
    """Inverse of exact_str."""
    text = text.strip()
    if "/" in text:
        num, _, den = text.partition("/")
        return Fraction(int(num), int(den))
    return Fraction(Decimal(text))


def round_to_increment(
    value: DecimalLike, increment: DecimalLike, mode: str = "nearest"
) -> Decimal:
    """Round a decimal value onto a positive increment grid, exactly.

    Modes: "down" (floor), "up" (ceiling), "nearest" (ties to even multiple).
    """
    inc = _as_decimal(increment)
    if inc <= 0:
        raise InvalidArgumentError(f"increment must be positive, got {increment}")
    val = _as_decimal(value)
    q = Fraction(val) / Fraction(inc)
    k = q.numerator // q.denominator
    remainder = q - k
    if mode == "down":
        pass
    elif mode == "up":
        if remainder:
            k += 1
    elif mode == "nearest":
        half = Fraction(1, 2)
        if remainder > half or (remainder == half and k % 2 != 0):
            k += 1
    else:
        raise InvalidArgumentError(f"unknown rounding mode {mode!r}")
    scale = _scale_of(inc)
    return units_to_decimal(k * to_units(inc, scale), scale)


class Side(enum.Enum):
    BUY = "buy"
    SELL = "sell"

    def opposite(self) -> "Side":
        return Side.SELL if self is Side.BUY else Side.BUY


class OrderKind(enum.Enum):
    LIMIT = "limit"
    MARKET = "market"


class LogMessage(enum.Enum):
    PLACEMENT = "placement"
    TRADE = "trade"
    CANCELLATION = "cancellation"
    BUCKET_MARKET_SUBMIT = "bucket_market_submit"


@dataclass(frozen=True)
class Price:
    """A non-negative price as an integer count of 10**-scale units."""

    units: int
    scale: int

    def __post_init__(self) -> None:
        if self.units < 0:
            raise InvalidArgumentError(f"price cannot be negative: {self.units}")
        if self.units > MAX_UNITS:
            raise InvalidArgumentError("price exceeds magnitude guard")

    @classmethod
    def from_decimal(cls, value: DecimalLike, scale: int) -> "Price":
        return cls(to_units(value, scale), scale)

    def as_decimal(self) -> Decimal:
        return units_to_decimal(self.units, self.scale)

    def as_fraction(self) -> Fraction:
        return Fraction(self.units, 10**self.scale)

    def __str__(self) -> str:
        return format_units(self.units, self.scale)


@dataclass(frozen=True)
class Quantity:
    """A non-negative quantity as an integer count of 10**-scale units."""

    units: int
    scale: int

    def __post_init__(self) -> None:
        if self.units < 0:
            raise InvalidArgumentError(f"quantity cannot be negative: {self.units}")
        if self.units > MAX_UNITS:
            raise InvalidArgumentError("quantity exceeds magnitude guard")

    @classmethod
    def from_decimal(cls, value: DecimalLike, scale: int) -> "Quantity":
        return cls(to_units(value, scale), scale)

    def as_decimal(self) -> Decimal:
        return units_to_decimal(self.units, self.scale)

    def as_fraction(self) -> Fraction:
        return Fraction(self.units, 10**self.scale)

    def is_zero(self) -> bool:
        return self.units == 0

    def __str__(self) -> str:
        return format_units(self.units, self.scale)


@dataclass(frozen=True)
class MarketSpec:
    """Static description of one market's grids and feed cadence.

    tick_size and lot_size accept str or Decimal; scales and unit sizes are
    derived once and cached as init=False fields.
    """

    tick_size: Decimal = Decimal("0.1")
    lot_size: Decimal = Decimal("0.001")
    levels_per_side: int = 10
    snapshot_interval_ms: int = 100
    price_scale: int = field(init=False, repr=False)
    qty_scale: int = field(init=False, repr=False)
    tick_units: int = field(init=False, repr=False)
    lot_units: int = field(init=False, repr=False)

    def __post_init__(self) -> None:
        tick = _as_decimal(self.tick_size)
        lot = _as_decimal(self.lot_size)
        if tick <= 0:
            raise InvalidArgumentError(f"tick_size must be positive, got {tick}")
        if lot <= 0:
            raise InvalidArgumentError(f"lot_size must be positive, got {lot}")
        if self.levels_per_side < 1:
            raise InvalidArgumentError("levels_per_side must be >= 1")
        if self.snapshot_interval_ms < 1:
            raise InvalidArgumentError("snapshot_interval_ms must be >= 1")
        object.__setattr__(self, "tick_size", tick)
        object.__setattr__(self, "lot_size", lot)
        object.__setattr__(self, "price_scale", _scale_of(tick))
        object.__setattr__(self, "qty_scale", _scale_of(lot))
        object.__setattr__(self, "tick_units", to_units(tick, self.price_scale))
        object.__setattr__(self, "lot_units", to_units(lot, self.qty_scale))

    def price_to_units(self, value: DecimalLike) -> int:
        """Convert an on-grid price to units; off-grid values are an error."""
        units = to_units(value, self.price_scale)
        if units < 0:
            raise InvalidArgumentError(f"price cannot be negative: {value}")
        if units % self.tick_units != 0:
            raise InvalidArgumentError(
                f"price {value} is not on the {self.tick_size} tick grid"
            )
        return units

    def qty_to_units(self, value: DecimalLike) -> int:
        """Convert an on-grid quantity to units; off-grid values are an error."""
        units = to_units(value, self.qty_scale)
        if units < 0:
            raise InvalidArgumentError(f"quantity cannot be negative: {value}")
        if units % self.lot_units != 0:
            raise InvalidArgumentError(
                f"quantity {value} is not on the {self.lot_size} lot grid"
            )
        return units

    def price(self, units: int) -> Price:
        return Price(units, self.price_scale)

    def qty(self, units: int) -> Quantity:
        return Quantity(units, self.qty_scale)

    def price_str(self, units: int) -> str:
        return format_units(units, self.price_scale)

    def qty_str(self, units: int) -> str:
        return format_units(units, self.qty_scale)

    def to_dict(self) -> dict:
        return {
            "tick_size": str(self.tick_size),
            "lot_size": str(self.lot_size),
            "levels_per_side": self.levels_per_side,
            "snapshot_interval_ms": self.snapshot_interval_ms,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MarketSpec":
        return cls(
            tick_size=_as_decimal(data.get("tick_size", "0.1")),
            lot_size=_as_decimal(data.get("lot_size", "0.001")),
            levels_per_side=int(data.get("levels_per_side", 10)),
            snapshot_interval_ms=int(data.get("snapshot_interval_ms", 100)),
        )


@dataclass(frozen=True)
class Order:
    """A child order submitted against the replayed book."""

    side: Side
    kind: OrderKind
    volume: Quantity
    price: Price | None = None
    order_id: int = 0
    owner: str = "adhoc"
    placed_at: int = 0

    def __post_init__(self) -> None:
        if self.volume.units <= 0:
            raise InvalidArgumentError("order volume must be positive")
        if self.kind is OrderKind.LIMIT and self.price is None:
            raise InvalidArgumentError("limit order requires a price")
        if self.kind is OrderKind.MARKET and self.price is not None:
            raise InvalidArgumentError("market order cannot carry a price")


@dataclass(frozen=True)
class TradeLogEntry:
    """One line of an execution trade log.

    Lines serialize as "timestamp,owner,message,price,volume,kind" with
    fixed-scale decimal strings, so equal runs produce byte-identical logs.
    """

    timestamp: int
    owner: str
    message: LogMessage
    price: Price
    volume: Quantity
    kind: OrderKind

    def serialize_line(self) -> str:
        return (
            f"{self.timestamp},{self.owner},{self.message.value},"
            f"{self.price},{self.volume},{self.kind.value}"
        )

    @classmethod
    def parse_line(cls, line: str, spec: MarketSpec) -> "TradeLogEntry":
        parts = line.rstrip("\n").split(",")
        if len(parts) != 6:
            raise InvalidArgumentError(f"expected 6 fields, got {len(parts)}: {line!r}")
        ts, owner, message, price, volume, kind = parts
        return cls(
            timestamp=int(ts),
            owner=owner,
            message=LogMessage(message),
            price=Price(to_units(price, spec.price_scale), spec.price_scale),
            volume=Quantity(to_units(volume, spec.qty_scale), spec.qty_scale),
            kind=OrderKind(kind),
        )


def serialize_trade_log(entries: Iterable[TradeLogEntry]) -> str:
    """Newline-joined log serialization with a trailing newline when
    non-empty; the empty log is the empty string."""
    lines = [entry.serialize_line() for entry in entries]
    return "\n".join(lines) + "\n" if lines else ""


def parse_trade_log(text: str, spec: MarketSpec) -> list[TradeLogEntry]:
    return [
        TradeLogEntry.parse_line(line, spec) for line in text.splitlines() if line
    ]


def vwap_units(pairs: Iterable[tuple[int, int]], price_scale: int) -> Fraction:
    """Volume-weighted average over (price_units, qty_units) pairs, exact."""
    notional = 0
    volume = 0
    for price, qty in pairs:
        notional += price * qty
        volume += qty
    if volume <= 0:
        raise EmptyTradesError("vwap over zero executed volume")
    return Fraction(notional, volume * 10**price_scale)


def vwap(trades: Iterable[tuple[Price, Quantity]]) -> Fraction:
    """Volume-weighted average price of (price, quantity) pairs.

    Exact rational result; raises EmptyTradesError on an empty list or zero
    total volume, InvalidArgumentError on mixed scales.
    """
    pairs = []
    price_scale: int | None = None
    qty_scale: int | None = None
    for price, qty in trades:
        if price_scale is None:
            price_scale, qty_scale = price.scale, qty.scale
        elif price.scale != price_scale or qty.scale != qty_scale:
            raise InvalidArgumentError("mixed scales in vwap input")
        pairs.append((price.units, qty.units))
    if price_scale is None:
        raise EmptyTradesError("vwap over empty trade list")
    return vwap_units(pairs, price_scale)
