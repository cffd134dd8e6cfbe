"""Scheduled execution against the replayed history.

The hand-feed expectations below are worked out on paper from the seven
fixture snapshots; see tests/helpers.py for the book contents.
"""

from fractions import Fraction

import pytest

from helpers import fixture_feed, fixture_snapshots, feed_from_snapshots, spec_default

from lobexec import (
    Broker,
    InvalidArgumentError,
    InvalidStateError,
    ScheduleParams,
    Side,
    assign_buckets,
    build_twap_schedule,
    parse_trade_log,
    recompute_bucket_totals,
    serialize_trade_log,
)


def one_shot(side, volume, *, algo_id="a", delete_vol=False):
    params = ScheduleParams(
        start_time=1000, exec_time_ms=500, n_buckets=1, no_of_slices=1,
        delete_vol=delete_vol,
    )
    return build_twap_schedule(params, volume, side, spec_default(), 0, algo_id=algo_id)


def two_buckets(side, volume, *, algo_id="a", delete_vol=False):
    params = ScheduleParams(
        start_time=1000, exec_time_ms=600, n_buckets=2, no_of_slices=1,
        delete_vol=delete_vol,
    )
    return build_twap_schedule(params, volume, side, spec_default(), 0, algo_id=algo_id)


@pytest.fixture
def broker(hand_feed):
    return Broker(hand_feed)


class TestLimitWindowBuy:
    """One bucket, one slice: the whole volume rests from 1000 to the 1500 bound."""

    def test_filled_inside_window(self, broker):
        algo = one_shot(Side.BUY, "2")
        broker.reset(1000, [algo])
        settled = broker.advance_past_next_limit("a")
        assert settled == [0]
        assert broker.serialize_log("a").splitlines() == [
            "1000,a,placement,100.1,0.000,limit",
            "1200,a,trade,100.2,1.800,limit",
            "1300,a,trade,100.1,0.200,limit",
            "1500,a,bucket_market_submit,0.0,0.000,market",
        ]
        assert algo.executed_units == 2000
        assert algo.remaining_units == 0
        assert algo.schedule_complete
        assert not broker.truncated
        assert broker.bucket_totals("a") == [(2_003_800, 2000)]
        assert broker.bucket_vwap("a", 0) == Fraction(2_003_800, 20_000)
        assert broker.bucket_vwap("a", 0) == Fraction(10_019, 100)

    def test_residual_goes_to_market(self, broker):
        algo = one_shot(Side.BUY, "6")
        broker.reset(1000, [algo])
        settled = broker.advance_past_next_limit("a")
        assert settled == [0]
        assert broker.serialize_log("a").splitlines() == [
            "1000,a,placement,100.1,0.000,limit",
            "1200,a,trade,100.2,1.800,limit",
            "1300,a,trade,100.1,3.000,limit",
            "1300,a,placement,100.0,0.000,limit",
            "1400,a,placement,99.9,0.000,limit",
            "1500,a,cancellation,99.9,1.200,limit",
            "1500,a,bucket_market_submit,0.0,1.200,market",
            "1600,a,trade,100.2,0.500,market",
            "1600,a,trade,100.4,0.700,market",
        ]
        assert algo.executed_units == 6000
        assert broker.bucket_totals("a") == [(6_010_400, 6000)]
        assert not broker.truncated

    def test_market_truncated_at_end_of_data(self, spec):
        feed = feed_from_snapshots(spec, fixture_snapshots(spec)[:6])
        broker = Broker(feed)
        algo = one_shot(Side.BUY, "6")
        broker.reset(1000, [algo])
        broker.advance_past_next_limit("a")
        assert broker.truncated
        assert algo.executed_units == 4800
        log = broker.serialize_log("a").splitlines()
        assert len(log) == 7
        assert log[-1] == "1500,a,bucket_market_submit,0.0,1.200,market"


class TestDirectOrders:
    def test_limit_order_with_carry(self, broker):
        algo = one_shot(Side.SELL, "10", algo_id="s")
        broker.reset(1000, [algo])
        entries = broker.simulate_limit_order("s", "1.5", 1500)
        assert broker.serialize_log("s").splitlines() == [
            "1100,s,trade,100.1,1.000,limit",
            "1100,s,placement,100.1,0.000,limit",
            "1200,s,placement,100.0,0.000,limit",
            "1300,s,placement,99.9,0.000,limit",
            "1400,s,placement,100.0,0.000,limit",
            "1500,s,cancellation,100.0,0.500,limit",
        ]
        assert serialize_trade_log(entries) == broker.serialize_log("s")
        # the unfilled 0.5 was carried into the next pending slice
        assert algo.volumes_units[0] == 10_500
        assert algo.executed_units == 1000
        assert algo.remaining_units == 9000

    def test_limit_order_volume_quantity(self, broker, spec):
        algo = one_shot(Side.SELL, "10", algo_id="s")
        broker.reset(1000, [algo])
        broker.simulate_limit_order("s", spec.qty(1500), 1500)
        assert algo.executed_units == 1000

    def test_market_order(self, broker):
        algo = one_shot(Side.BUY, "5", algo_id="m")
        broker.reset(1000, [algo])
        broker.simulate_market_order("m", "2")
        assert broker.serialize_log("m").splitlines() == [
            "1000,m,bucket_market_submit,0.0,2.000,market",
            "1100,m,trade,100.2,0.500,market",
            "1100,m,trade,100.3,1.500,market",
        ]
        assert algo.executed_units == 2000

    def test_market_order_multi_pass(self, broker):
        algo = one_shot(Side.BUY, "5", algo_id="m")
        broker.reset(1000, [algo])
        broker.simulate_market_order("m", "3")
        assert broker.serialize_log("m").splitlines() == [
            "1000,m,bucket_market_submit,0.0,3.000,market",
            "1100,m,trade,100.2,0.500,market",
            "1100,m,trade,100.3,2.000,market",
            "1200,m,trade,100.1,0.500,market",
        ]

    def test_market_order_truncation(self, broker):
        params = ScheduleParams(
            start_time=1500, exec_time_ms=100, n_buckets=1, no_of_slices=1
        )
        algo = build_twap_schedule(params, "5", Side.BUY, spec_default(), 0, algo_id="m")
        broker.reset(1500, [algo])
        broker.simulate_market_order("m", "5")
        assert broker.serialize_log("m").splitlines() == [
            "1500,m,bucket_market_submit,0.0,5.000,market",
            "1600,m,trade,100.2,0.500,market",
            "1600,m,trade,100.4,1.000,market",
        ]
        assert broker.truncated
        assert algo.executed_units == 1500


class TestTwoBuckets:
    def test_full_run(self, broker):
        algo = two_buckets(Side.BUY, "4")
        broker.reset(1000, [algo])
        first = broker.advance_past_next_limit("a")
        second = broker.advance_past_next_limit("a")
        assert (first, second) == ([0], [1])
        assert broker.serialize_log("a").splitlines() == [
            "1000,a,placement,100.1,0.000,limit",
            "1200,a,trade,100.2,1.800,limit",
            "1300,a,trade,100.1,0.200,limit",
            "1300,a,bucket_market_submit,0.0,0.000,market",
            "1300,a,placement,100.0,0.000,limit",
            "1400,a,placement,99.9,0.000,limit",
            "1500,a,placement,100.0,0.000,limit",
            "1600,a,cancellation,100.0,2.000,limit",
            "1600,a,bucket_market_submit,0.0,2.000,market",
        ]
        # bucket 1's final market order met the end of the history
        assert broker.truncated
        assert algo.executed_units == 2000
        assert broker.bucket_totals("a") == [(2_003_800, 2000), (0, 0)]
        assert broker.bucket_vwap("a", 1) is None

    def test_partition_matches_accumulators(self, broker):
        algo = two_buckets(Side.BUY, "4")
        broker.reset(1000, [algo])
        broker.simulate_until(10_000)
        entries = broker.trade_log("a")
        assert assign_buckets(entries) == [0, 0, 0, 0, 1, 1, 1, 1, 1]
        assert recompute_bucket_totals(entries, 2) == broker.bucket_totals("a")

    def test_delete_vol_drops_instead_of_market(self, broker):
        algo = two_buckets(Side.BUY, "4", delete_vol=True)
        broker.reset(1000, [algo])
        broker.simulate_until(10_000)
        assert broker.serialize_log("a").splitlines()[-2:] == [
            "1600,a,cancellation,0.0,2.000,market",
            "1600,a,bucket_market_submit,0.0,0.000,market",
        ]
        assert not broker.truncated
        assert algo.dropped_units == 2000
        assert algo.executed_units + algo.dropped_units == algo.total_volume_units

    def test_zero_volume_slice_is_skipped(self, broker):
        from lobexec import apply_volume_factor

        params = ScheduleParams(
            start_time=1000, exec_time_ms=500, n_buckets=1, no_of_slices=2
        )
        algo = build_twap_schedule(params, "2", Side.BUY, spec_default(), 0)
        assert apply_volume_factor(algo, 0, "0.0004") == 0
        broker.reset(1000, [algo])
        assert broker.advance_past_next_limit(algo.algo_id) == []
        assert broker.serialize_log(algo.algo_id) == ""
        assert algo.event_cursor == 1


class TestSimulateUntil:
    def test_fires_only_events_before_until(self, broker):
        algo = two_buckets(Side.BUY, "4")
        broker.reset(1000, [algo])
        broker.simulate_until(1300)
        # the 1300 bound has not fired yet
        assert broker.serialize_log("a").splitlines()[-1] == (
            "1300,a,trade,100.1,0.200,limit"
        )
        assert algo.bucket_cursor == 0
        # 1301 admits both the bound and the second slice stamped 1300
        broker.simulate_until(1301)
        lines = broker.serialize_log("a").splitlines()
        assert lines[3] == "1300,a,bucket_market_submit,0.0,0.000,market"
        assert lines[-1] == "1600,a,cancellation,100.0,2.000,limit"
        assert algo.peek_next_event().time == 1600
        assert broker.current_time == 1301

    def test_requires_reset(self, hand_feed):
        with pytest.raises(InvalidStateError, match="not reset"):
            Broker(hand_feed).simulate_until(2000)

    def test_runs_all_algos(self, broker):
        a = one_shot(Side.BUY, "1", algo_id="a")
        b = one_shot(Side.SELL, "1", algo_id="b")
        broker.reset(1000, [a, b])
        broker.simulate_until(99_999)
        assert a.schedule_complete and b.schedule_complete
        assert broker.algo_ids == ["a", "b"]


class TestParallelIsolation:
    def test_identical_twins_identical_logs(self, broker):
        a = one_shot(Side.BUY, "6", algo_id="a")
        b = one_shot(Side.BUY, "6", algo_id="b")
        broker.reset(1000, [a, b])
        broker.simulate_until(99_999)
        alog = broker.serialize_log("a", owner_label="x")
        blog = broker.serialize_log("b", owner_label="x")
        assert alog == blog
        assert broker.serialize_log("a") != broker.serialize_log("b")

    def test_views_do_not_interfere(self, broker):
        a = one_shot(Side.BUY, "6", algo_id="a")
        b = one_shot(Side.SELL, "1", algo_id="b")
        broker.reset(1000, [a, b])
        broker.advance_past_next_limit("a")
        assert broker.view("a").cursor == 6
        assert broker.view("b").cursor == 0

    def test_audit_counts_each_snapshot_once(self, spec):
        broker = Broker(fixture_feed(spec), audit=True)
        algo = one_shot(Side.BUY, "6")
        broker.reset(1000, [algo])
        broker.simulate_until(99_999)
        assert broker.view("a").consumed.tolist() == [1, 1, 1, 1, 1, 1, 1]


class TestLogRoundTrip:
    def test_parse_serialize_identity(self, broker, spec):
        algo = one_shot(Side.BUY, "6")
        broker.reset(1000, [algo])
        broker.simulate_until(99_999)
        text = broker.serialize_log("a")
        entries = parse_trade_log(text, spec)
        assert serialize_trade_log(entries) == text
        assert entries == broker.trade_log("a")


class TestValidation:
    def test_duplicate_ids(self, broker):
        with pytest.raises(InvalidArgumentError, match="duplicate algo ids"):
            broker.reset(1000, [one_shot(Side.BUY, "1"), one_shot(Side.SELL, "1")])

    def test_no_algos(self, broker):
        with pytest.raises(InvalidArgumentError, match="at least one algo"):
            broker.reset(1000, [])

    def test_schedule_before_broker_start(self, broker):
        with pytest.raises(InvalidArgumentError, match="before the broker"):
            broker.reset(1100, [one_shot(Side.BUY, "1")])

    def test_unknown_algo(self, broker):
        broker.reset(1000, [one_shot(Side.BUY, "1")])
        with pytest.raises(InvalidArgumentError, match="unknown algo 'zz'"):
            broker.serialize_log("zz")

    def test_volume_exceeds_remaining(self, broker):
        broker.reset(1000, [one_shot(Side.BUY, "1")])
        with pytest.raises(InvalidArgumentError, match="exceeds the algo's remaining"):
            broker.simulate_limit_order("a", "1.001", 1500)
        with pytest.raises(InvalidArgumentError, match="exceeds the algo's remaining"):
            broker.simulate_market_order("a", "1.001")

    def test_window_must_extend(self, broker):
        broker.reset(1000, [one_shot(Side.BUY, "1")])
        with pytest.raises(InvalidArgumentError, match="extend past"):
            broker.simulate_limit_order("a", "1", 1000)

    def test_volume_must_be_positive(self, broker):
        broker.reset(1000, [one_shot(Side.BUY, "1")])
        with pytest.raises(InvalidArgumentError, match="positive"):
            broker.simulate_market_order("a", "0")

    def test_quantity_scale_and_grid(self, spec):
        coarse = type(spec)(tick_size="0.1", lot_size="0.005")
        feed = feed_from_snapshots(coarse, fixture_snapshots(coarse))
        broker = Broker(feed)
        params = ScheduleParams(
            start_time=1000, exec_time_ms=500, n_buckets=1, no_of_slices=1
        )
        algo = build_twap_schedule(params, "1", Side.BUY, coarse, 0, algo_id="a")
        broker.reset(1000, [algo])
        with pytest.raises(InvalidArgumentError, match="off the lot grid"):
            broker.simulate_market_order("a", coarse.qty(7))
        two_dp = type(spec)(tick_size="0.1", lot_size="0.01")
        with pytest.raises(InvalidArgumentError, match="scale does not match"):
            broker.simulate_market_order("a", two_dp.qty(5))

    def test_advance_errors(self, broker):
        algo = two_buckets(Side.BUY, "4")
        broker.reset(1000, [algo])
        broker.simulate_until(1150)  # slice fired, bound still pending
        with pytest.raises(InvalidStateError, match="expected a pending limit"):
            broker.advance_past_next_limit("a")
        broker.simulate_until(99_999)
        with pytest.raises(InvalidStateError, match="schedule complete"):
            broker.advance_past_next_limit("a")


class TestReplayDeterminism:
    def test_rerun_is_byte_identical(self, spec, synth_feed):
        params = ScheduleParams(
            start_time=0, exec_time_ms=120_000, n_buckets=4, no_of_slices=3,
            rand_bucket_bounds_width=500,
        )
        logs = []
        for _ in range(2):
            broker = Broker(synth_feed)
            algo = build_twap_schedule(params, "25", Side.SELL, spec, seed=31)
            broker.reset(0, [algo])
            broker.simulate_until(params.end_time + 1)
            logs.append(broker.serialize_log("twap"))
        assert logs[0] == logs[1]
        assert logs[0].count("\n") > 10
