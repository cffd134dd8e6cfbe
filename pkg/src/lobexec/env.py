"""Episodic execution environment: a controllable algo vs its TWAP mirror.

Each episode runs two identically scheduled algos in parallel over the same
history: "twap" submits its scheduled volumes unchanged, "rl" scales each
pending slice volume by the factor selected by the step action. One step
covers exactly one limit-order window (plus the bucket bound right after it,
when the slice was the bucket's last); a schedule with n buckets of s slices
is an episode of n*s steps with a non-zero reward opportunity at the s-th,
2s-th, ... steps.

Rewards are exact rationals: at each settled bucket, the difference between
the two algos' executed bucket VWAPs, signed so that beating TWAP is positive
(buying below / selling above it), optionally scaled by the bucket's executed
volume ("notional" mode). Buckets where either algo executed nothing yield 0.

Observation vector (float64, length 102 for the default 5x5 layout):
    5 snapshots, oldest first, ending at the controllable algo's current
    snapshot (the earliest snapshot repeats when the episode starts near the
    history head). Per snapshot: 5 best bid levels then 5 best ask levels as
    (normalized price, volume in lots); normalized price = (p - m)/m where m
    is the NEWEST snapshot's mid, so the latest mid sits at exactly 0.0.
    Then two scheduling features: the current bucket's remaining-volume
    fraction (clamped to [0, 1]) and the number of limit orders still to
    submit in the current bucket (the pending one included).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Protocol, Sequence, Union

import numpy as np

from .broker import Broker, recompute_bucket_totals
from .errors import InvalidArgumentError, InvalidStateError
from .feed import HistoricalFeed
from .market import (
    DecimalLike,
    LogMessage,
    Side,
    TradeLogEntry,
    _as_decimal,
    exact_str,
)
from .schedule import (
    EventKind,
    ScheduleParams,
    apply_volume_factor,
    build_twap_schedule,
)

OBS_SNAPSHOTS = 5
OBS_LEVELS = 5
OBS_SIZE = OBS_SNAPSHOTS * OBS_LEVELS * 2 * 2 + 2

DEFAULT_ACTION_FACTORS = ("0.8", "1.0", "1.2")

RL_ID = "rl"
TWAP_ID = "twap"


@dataclass(frozen=True)
class EpisodeParams:
    """Everything that pins one episode: direction, parent volume, the
    bucket schedule (which carries the start time), and the seed driving
    bound jitter."""

    side: Side
    total_volume: DecimalLike
    schedule: ScheduleParams
    seed: int

    def __post_init__(self) -> None:
        if _as_decimal(self.total_volume) <= 0:
            raise InvalidArgumentError("total_volume must be positive")


class EpisodeSource(Protocol):
    """Draws episode parameters from a seed (see config.EpisodeSampler)."""

    def draw(self, seed: int) -> EpisodeParams: ...


@dataclass
class StepResult:
    observation: np.ndarray
    reward: Fraction
    done: bool
    info: dict


class ExecutionEnv:
    """Reset/step environment over a fixed feed. Same params, same seeds,
    same actions always reproduce the same episode byte for byte."""

    def __init__(
        self,
        feed: HistoricalFeed,
        *,
        action_factors: Sequence[Union[DecimalLike, Fraction]] = DEFAULT_ACTION_FACTORS,
        reward_mode: str = "per_unit",
        sampler: Optional[EpisodeSource] = None,
        audit: bool = False,
    ) -> None:
        if feed.spec.levels_per_side < OBS_LEVELS:
            raise InvalidArgumentError(
                f"observations need at least {OBS_LEVELS} book levels per side"
            )
        if reward_mode not in ("per_unit", "notional"):
            raise InvalidArgumentError(f"unknown reward_mode {reward_mode!r}")
        factors = tuple(
            f if isinstance(f, Fraction) else Fraction(_as_decimal(f))
            for f in action_factors
        )
        if not factors or any(f <= 0 for f in factors):
            raise InvalidArgumentError("action factors must be positive")
        self.feed = feed
        self.spec = feed.spec
        self.action_factors = factors
        self.reward_mode = reward_mode
        self.sampler = sampler
        self.broker = Broker(feed, audit=audit)
        self.params: EpisodeParams | None = None
        self._done = True
        self._steps = 0
        self._rewards: list[Fraction] = []

    # -- episode control -----------------------------------------------------

    @property
    def n_actions(self) -> int:
        return len(self.action_factors)

    @property
    def observation_size(self) -> int:
        return OBS_SIZE

    @property
    def done(self) -> bool:
        return self._done

    @property
    def episode_rewards(self) -> list[Fraction]:
        return list(self._rewards)

    def reset(
        self,
        params: EpisodeParams | None = None,
        *,
        seed: int | None = None,
    ) -> np.ndarray:
        """Start an episode, either from explicit params or by drawing them
        from the configured sampler with the given seed. Returns the initial
        observation."""
        if params is None:
            if self.sampler is None:
                raise InvalidArgumentError(
                    "no episode sampler configured; pass explicit params"
                )
            if seed is None:
                raise InvalidArgumentError("sampling a new episode requires a seed")
            params = self.sampler.draw(seed)
        schedule = params.schedule
        if schedule.start_time < self.feed.start_timestamp:
            raise InvalidArgumentError(
                f"episode starts at {schedule.start_time}, before the history"
            )
        # the final bound's market order needs at least one snapshot after it
        if schedule.end_time + self.spec.snapshot_interval_ms > self.feed.end_timestamp:
            raise InvalidArgumentError(
                f"episode ending at {schedule.end_time} sits too close to the "
                f"end of history ({self.feed.end_timestamp})"
            )
        rl = build_twap_schedule(
            schedule, params.total_volume, params.side, self.spec, params.seed,
            algo_id=RL_ID,
        )
        twap = build_twap_schedule(
            schedule, params.total_volume, params.side, self.spec, params.seed,
            algo_id=TWAP_ID,
        )
        self.broker.reset(schedule.start_time, [rl, twap])
        self.params = params
        self._done = False
        self._steps = 0
        self._rewards = []
        return self._observe()

    def step(self, action: Union[int, np.integer]) -> StepResult:
        """Apply the action's volume factor to the pending slice, run both
        algos through that slice's window and any bound that follows it."""
        if self._done:
            raise InvalidStateError("episode is done; call reset")
        if not isinstance(action, (int, np.integer)):
            raise InvalidArgumentError(f"action must be an integer, got {action!r}")
        action = int(action)
        if not 0 <= action < self.n_actions:
            raise InvalidArgumentError(
                f"action {action} outside 0..{self.n_actions - 1}"
            )
        rl = self.broker.algo(RL_ID)
        twap = self.broker.algo(TWAP_ID)
        apply_volume_factor(rl, rl.event_cursor, self.action_factors[action])
        settled_rl = self.broker.advance_past_next_limit(RL_ID)
        # the mirror always runs the same slice, even when the controllable
        # side just hit the end of history, so both logs cover the same span
        pending = twap.peek_next_event()
        if pending is not None and pending.kind is EventKind.LIMIT_ORDER:
            settled_twap = self.broker.advance_past_next_limit(TWAP_ID)
        else:
            settled_twap = []
        if self.broker.truncated:
            # data ran out for at least one side: the episode aborts unsettled
            settled = []
        else:
            settled = sorted(set(settled_rl) & set(settled_twap))

        reward = Fraction(0)
        bucket_info: dict = {}
        for bucket in settled:
            reward += self._bucket_reward(bucket)
            bucket_info = {
                "bucket_index": bucket,
                "rl_vwap": _vwap_info(self.broker.bucket_vwap(RL_ID, bucket)),
                "twap_vwap": _vwap_info(self.broker.bucket_vwap(TWAP_ID, bucket)),
            }
        self._rewards.append(reward)
        self._steps += 1
        self._done = self.broker.truncated or rl.schedule_complete
        info = {
            "step": self._steps,
            "settled_buckets": settled,
            "truncated": self.broker.truncated,
            "reward_exact": exact_str(reward),
            **bucket_info,
        }
        return StepResult(self._observe(), reward, self._done, info)

    # -- rewards ---------------------------------------------------------------

    def _bucket_reward(self, bucket: int) -> Fraction:
        rl_vwap = self.broker.bucket_vwap(RL_ID, bucket)
        twap_vwap = self.broker.bucket_vwap(TWAP_ID, bucket)
        assert self.params is not None
        return bucket_reward_from_totals(
            rl_vwap,
            twap_vwap,
            self.params.side,
            mode=self.reward_mode,
            rl_bucket_qty_units=self.broker.bucket_totals(RL_ID)[bucket][1],
            qty_scale=self.spec.qty_scale,
        )

    # -- observations ------------------------------------------------------------

    def _observe(self) -> np.ndarray:
        view = self.broker.view(RL_ID)
        spec = self.spec
        levels = spec.levels_per_side
        indices = view.recent_indices(OBS_SNAPSHOTS)
        rows = view.book[indices]
        newest = rows[-1]
        scale_sum = int(newest[0]) + int(newest[2 * levels])

        obs = np.empty(OBS_SIZE, dtype=np.float64)
        pos = 0
        lot = spec.lot_units
        for row in rows:
            cells = row.tolist()
            for i in range(OBS_LEVELS):
                obs[pos] = (2 * cells[i] - scale_sum) / scale_sum
                obs[pos + 1] = cells[levels + i] / lot
                pos += 2
            for i in range(OBS_LEVELS):
                obs[pos] = (2 * cells[2 * levels + i] - scale_sum) / scale_sum
                obs[pos + 1] = cells[3 * levels + i] / lot
                pos += 2

        rl = self.broker.algo(RL_ID)
        pending = rl.peek_next_event()
        if pending is None or self.broker.truncated:
            obs[pos] = 0.0
            obs[pos + 1] = 0.0
        else:
            quota = rl.bucket_quotas_units[rl.bucket_cursor]
            remaining = min(max(rl.bucket_remaining_units, 0), quota)
            obs[pos] = remaining / quota
            if pending.kind is EventKind.LIMIT_ORDER:
                obs[pos + 1] = float(rl.params.no_of_slices - pending.slice_index)
            else:
                obs[pos + 1] = 0.0
        return obs


def _vwap_info(value: Fraction | None) -> dict | None:
    if value is None:
        return None
    return {"exact": exact_str(value), "float": float(value)}


def bucket_reward_from_totals(
    rl_vwap: Fraction | None,
    twap_vwap: Fraction | None,
    side: Side,
    *,
    mode: str = "per_unit",
    rl_bucket_qty_units: int = 0,
    qty_scale: int = 0,
) -> Fraction:
    """Signed reward for one settled bucket: positive when the controllable
    algo beat its TWAP mirror (bought cheaper / sold richer). Buckets where
    either side executed nothing yield 0."""
    if rl_vwap is None or twap_vwap is None:
        return Fraction(0)
    diff = twap_vwap - rl_vwap if side is Side.BUY else rl_vwap - twap_vwap
    if mode == "per_unit":
        return diff
    if mode == "notional":
        return diff * Fraction(rl_bucket_qty_units, 10**qty_scale)
    raise InvalidArgumentError(f"unknown reward mode {mode!r}")


def bucket_reward(
    rl_log: Iterable[TradeLogEntry],
    twap_log: Iterable[TradeLogEntry],
    bucket_index: int,
    side: Side,
    *,
    mode: str = "per_unit",
) -> Fraction:
    """Recompute one bucket's reward from the two trade logs alone.

    The bucket partition is derived from bucket_market_submit markers (see
    broker.assign_buckets); the bucket must already be closed in both logs."""
    rl_entries = list(rl_log)
    twap_entries = list(twap_log)

    def totals(entries: list[TradeLogEntry]) -> tuple[int, int, int]:
        markers = sum(
            1 for e in entries if e.message is LogMessage.BUCKET_MARKET_SUBMIT
        )
        if bucket_index >= markers:
            raise InvalidArgumentError(
                f"bucket {bucket_index} not settled yet ({markers} closed)"
            )
        per_bucket = recompute_bucket_totals(entries, markers)
        notional, qty = per_bucket[bucket_index]
        scale = entries[0].price.scale if entries else 0
        return notional, qty, scale

    rl_notional, rl_qty, rl_scale = totals(rl_entries)
    tw_notional, tw_qty, tw_scale = totals(twap_entries)
    rl_vwap = (
        Fraction(rl_notional, rl_qty * 10**rl_scale) if rl_qty > 0 else None
    )
    tw_vwap = (
        Fraction(tw_notional, tw_qty * 10**tw_scale) if tw_qty > 0 else None
    )
    qty_scale = rl_entries[0].volume.scale if rl_entries else 0
    return bucket_reward_from_totals(
        rl_vwap,
        tw_vwap,
        side,
        mode=mode,
        rl_bucket_qty_units=rl_qty,
        qty_scale=qty_scale,
    )
