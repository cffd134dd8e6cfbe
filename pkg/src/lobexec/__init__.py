"""lobexec: historical limit order book replay and execution simulation.

Replays Level-2 snapshot history, simulates scheduled limit/market child
orders against it with exact fixed-point arithmetic, runs a controllable
execution algo in parallel with its TWAP mirror, and exposes an episodic
reset/step environment plus an evaluation harness on top.
"""

__version__ = "0.1.0"

from ._kernels import BACKEND
from .book import (
    FillReport,
    LobSnapshot,
    best_quote,
    execute_market_against_snapshot,
    execute_resting_limit_against_snapshot,
    parse_snapshot_row,
)
from .broker import Broker, assign_buckets, recompute_bucket_totals
from .config import (
    EpisodeSampler,
    apply_overrides,
    build_env,
    build_feed,
    build_market,
    load_config,
)
from .env import (
    DEFAULT_ACTION_FACTORS,
    OBS_SIZE,
    EpisodeParams,
    ExecutionEnv,
    StepResult,
    bucket_reward,
    bucket_reward_from_totals,
)
from .errors import (
    DataIntegrityError,
    EmptyTradesError,
    EngineError,
    InvalidArgumentError,
    InvalidStateError,
    OutOfRangeError,
    ParseError,
)
from .feed import (
    END_OF_DATA,
    HistoricalFeed,
    SyntheticFeedParams,
    generate_synthetic,
    load_history,
    write_day_files,
)
from .harness import (
    ConformanceReport,
    ConstantPolicy,
    EvalReport,
    EvalWindow,
    GreedySpreadPolicy,
    Policy,
    RandomPolicy,
    conformance_check,
    evaluate_policy,
    make_windows,
    recompute_stats,
    run_episode,
)
from .market import (
    LogMessage,
    MarketSpec,
    Order,
    OrderKind,
    Price,
    Quantity,
    Side,
    TradeLogEntry,
    exact_str,
    parse_exact,
    parse_trade_log,
    round_to_increment,
    serialize_trade_log,
    vwap,
    vwap_units,
)
from .schedule import (
    AlgoEvent,
    EventKind,
    ExecutionAlgo,
    ScheduleParams,
    algo_reset,
    apply_volume_factor,
    build_twap_schedule,
    carry_over_residual,
)

__all__ = [
    "BACKEND",
    "Broker",
    "ConformanceReport",
    "ConstantPolicy",
    "DEFAULT_ACTION_FACTORS",
    "DataIntegrityError",
    "EmptyTradesError",
    "END_OF_DATA",
    "EngineError",
    "EpisodeParams",
    "EpisodeSampler",
    "EvalReport",
    "EvalWindow",
    "EventKind",
    "ExecutionAlgo",
    "ExecutionEnv",
    "FillReport",
    "GreedySpreadPolicy",
    "HistoricalFeed",
    "InvalidArgumentError",
    "InvalidStateError",
    "LobSnapshot",
    "LogMessage",
    "MarketSpec",
    "OBS_SIZE",
    "Order",
    "OrderKind",
    "OutOfRangeError",
    "ParseError",
    "Policy",
    "Price",
    "Quantity",
    "RandomPolicy",
    "ScheduleParams",
    "Side",
    "StepResult",
    "SyntheticFeedParams",
    "TradeLogEntry",
    "AlgoEvent",
    "algo_reset",
    "apply_volume_factor",
    "assign_buckets",
    "best_quote",
    "bucket_reward",
    "bucket_reward_from_totals",
    "apply_overrides",
    "build_env",
    "build_feed",
    "build_market",
    "build_twap_schedule",
    "carry_over_residual",
    "conformance_check",
    "evaluate_policy",
    "exact_str",
    "execute_market_against_snapshot",
    "execute_resting_limit_against_snapshot",
    "generate_synthetic",
    "load_config",
    "load_history",
    "make_windows",
    "parse_exact",
    "parse_snapshot_row",
    "parse_trade_log",
    "recompute_bucket_totals",
    "recompute_stats",
    "round_to_increment",
    "run_episode",
    "serialize_trade_log",
    "vwap",
    "vwap_units",
    "write_day_files",
]
