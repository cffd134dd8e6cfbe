"""Evaluation harness: policies, the episode runner, walk-forward windows,
aggregate reports, and the conformance suite.

Aggregation is exact-first: per-episode rewards stay exact rational strings
in every report, and the published mean/std are single float roundings of
exact computations, so anyone can recompute them from the report alone and
get bit-identical numbers (see recompute_stats)."""

from __future__ import annotations

import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .config import build_env
from .env import RL_ID, TWAP_ID, EpisodeParams, ExecutionEnv
from .errors import InvalidArgumentError
from .market import exact_str, parse_exact

_STREAM_POLICY = 23


# -- policies ----------------------------------------------------------------


class Policy:
    """Maps observations to action indices. reset(seed) is called once per
    episode so stochastic policies replay deterministically."""

    name = "policy"

    def reset(self, seed: int) -> None:  # noqa: B027 - optional hook
        pass

    def observe(self, observation: np.ndarray) -> int:
        raise NotImplementedError


class ConstantPolicy(Policy):
    """Always plays one action; action 1 is the neutral TWAP mirror under
    the default factor set."""

    def __init__(self, action: int = 1) -> None:
        self.action = int(action)
        self.name = f"constant:{self.action}"

    def observe(self, observation: np.ndarray) -> int:
        return self.action


class RandomPolicy(Policy):
    """Uniform random actions, deterministic given (policy seed, episode
    seed)."""

    def __init__(self, seed: int = 0, n_actions: int = 3) -> None:
        self.seed = int(seed)
        self.n_actions = int(n_actions)
        self.name = f"random:{self.seed}"
        self._rng = np.random.Generator(np.random.PCG64(self.seed))

    def reset(self, seed: int) -> None:
        self._rng = np.random.Generator(
            np.random.PCG64(np.random.SeedSequence((self.seed, seed, _STREAM_POLICY)))
        )

    def observe(self, observation: np.ndarray) -> int:
        return int(self._rng.integers(0, self.n_actions))


class GreedySpreadPolicy(Policy):
    """Deterministic heuristic on the newest snapshot in the observation:
    when the relative spread exceeds the threshold, shrink the slice (passive
    fills are likely); otherwise grow it."""

    def __init__(self, threshold: float = 1e-4) -> None:
        self.threshold = float(threshold)
        self.name = f"greedy:{self.threshold:g}"

    def observe(self, observation: np.ndarray) -> int:
        from .env import OBS_LEVELS, OBS_SNAPSHOTS

        newest = (OBS_SNAPSHOTS - 1) * OBS_LEVELS * 4
        spread = observation[newest + OBS_LEVELS * 2] - observation[newest]
        return 0 if spread > self.threshold else 2


def parse_policy(text: str) -> Policy:
    """Parse CLI policy specs: "constant:1", "random:42", "greedy",
    "greedy:0.0002"."""
    kind, _, arg = text.partition(":")
    if kind == "constant":
        return ConstantPolicy(int(arg) if arg else 1)
    if kind == "random":
        return RandomPolicy(int(arg) if arg else 0)
    if kind == "greedy":
        return GreedySpreadPolicy(float(arg) if arg else 1e-4)
    raise InvalidArgumentError(f"unknown policy spec {text!r}")


# -- episode runner ------------------------------------------------------------


@dataclass
class EpisodeRecord:
    """Full trace of one episode."""

    side: str
    total_volume: str
    start_time: int
    seed: int
    actions: list[int]
    rewards_exact: list[str]
    total_reward_exact: str
    total_reward: float
    n_steps: int
    truncated: bool
    rl_log: str = ""
    twap_log: str = ""

    def to_dict(self) -> dict:
        return dict(self.__dict__)


def run_episode(
    env_or_config: Union[ExecutionEnv, dict],
    policy: Policy,
    seed: Optional[int] = None,
    *,
    params: Optional[EpisodeParams] = None,
    include_logs: bool = True,
    base_dir: Union[str, Path, None] = None,
) -> EpisodeRecord:
    """Run one full episode under the policy and return its trace.

    Pass either a seed (the environment's sampler draws the episode) or
    explicit EpisodeParams. Deterministic: identical inputs produce identical
    records, including byte-identical trade logs."""
    env = _as_env(env_or_config, base_dir)
    if params is None and seed is None:
        raise InvalidArgumentError("need a seed or explicit episode params")
    observation = env.reset(params=params, seed=seed)
    episode_seed = seed if seed is not None else params.seed
    policy.reset(int(episode_seed))

    actions: list[int] = []
    rewards: list[Fraction] = []
    total = Fraction(0)
    truncated = False
    while not env.done:
        action = policy.observe(observation)
        result = env.step(action)
        observation = result.observation
        actions.append(int(action))
        rewards.append(result.reward)
        total += result.reward
        truncated = bool(result.info["truncated"])

    assert env.params is not None
    return EpisodeRecord(
        side=env.params.side.value,
        total_volume=str(env.params.total_volume),
        start_time=env.params.schedule.start_time,
        seed=int(episode_seed),
        actions=actions,
        rewards_exact=[exact_str(r) for r in rewards],
        total_reward_exact=exact_str(total),
        total_reward=float(total),
        n_steps=len(actions),
        truncated=truncated,
        rl_log=env.broker.serialize_log(RL_ID) if include_logs else "",
        twap_log=env.broker.serialize_log(TWAP_ID) if include_logs else "",
    )


def _as_env(
    env_or_config: Union[ExecutionEnv, dict],
    base_dir: Union[str, Path, None] = None,
    days: Optional[Sequence[str]] = None,
) -> ExecutionEnv:
    if isinstance(env_or_config, ExecutionEnv):
        return env_or_config
    return build_env(env_or_config, base_dir=base_dir, days=days)


# -- evaluation ----------------------------------------------------------------


@dataclass
class EvalReport:
    """Aggregate of one evaluation run; episodes hold per-episode rows with
    exact reward strings so mean/std are recomputable bit for bit."""

    policy: str
    master_seed: int
    n_episodes: int
    mean_reward: float
    std_reward: float
    mean_reward_exact: str
    episodes: list[dict]
    window: Optional[dict] = None

    def to_json(self) -> str:
        payload = dict(self.__dict__)
        return json.dumps(payload, indent=2, sort_keys=True) + "\n"

    def episodes_csv(self) -> str:
        lines = ["index,seed,total_reward_exact,total_reward,n_steps,truncated"]
        for row in self.episodes:
            lines.append(
                f"{row['index']},{row['seed']},{row['total_reward_exact']},"
                f"{row['total_reward']!r},{row['n_steps']},{row['truncated']}"
            )
        return "\n".join(lines) + "\n"


def episode_seeds(master_seed: int, n_episodes: int) -> list[int]:
    """Per-episode seeds derived counter-style from the master seed, so the
    episode list is order-independent and parallelizable."""
    return [
        int(np.random.SeedSequence((int(master_seed), i)).generate_state(1)[0])
        for i in range(n_episodes)
    ]


def recompute_stats(episode_rows: Sequence[dict]) -> tuple[float, float, str]:
    """(mean, std, exact mean) from per-episode exact reward strings.

    Mean is the exact rational mean rounded once to float; std is the exact
    population variance rounded once, then one float sqrt."""
    totals = [parse_exact(row["total_reward_exact"]) for row in episode_rows]
    if not totals:
        raise InvalidArgumentError("no episodes to aggregate")
    n = len(totals)
    mean = sum(totals, Fraction(0)) / n
    variance = sum(((t - mean) ** 2 for t in totals), Fraction(0)) / n
    return float(mean), math.sqrt(float(variance)), exact_str(mean)


def evaluate_policy(
    env_or_config: Union[ExecutionEnv, dict],
    policy: Policy,
    n_episodes: int,
    master_seed: int,
    *,
    days: Optional[Sequence[str]] = None,
    window: Optional["EvalWindow"] = None,
    workers: int = 1,
    base_dir: Union[str, Path, None] = None,
) -> EvalReport:
    """Evaluate a policy over n_episodes sampled episodes.

    Episode i uses the derived seed episode_seeds(master_seed)[i]; results do
    not depend on execution order, so workers > 1 (config input required)
    produces byte-identical reports to a serial run."""
    if n_episodes < 1:
        raise InvalidArgumentError("n_episodes must be >= 1")
    if days is None and window is not None:
        days = list(window.eval_days)
    seeds = episode_seeds(master_seed, n_episodes)

    if workers > 1:
        if isinstance(env_or_config, ExecutionEnv):
            raise InvalidArgumentError(
                "parallel evaluation needs a config dict, not a built env"
            )
        chunks = _chunk(list(enumerate(seeds)), workers)
        rows: list[dict] = []
        norm_dir = _normalize_dir(base_dir)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            futures = [
                pool.submit(_evaluate_chunk, env_or_config, policy, chunk, days, norm_dir)
                for chunk in chunks
            ]
            for future in futures:
                rows.extend(future.result())
    else:
        env = _as_env(env_or_config, base_dir, days)
        rows = _evaluate_chunk_env(env, policy, list(enumerate(seeds)))

    mean, std, mean_exact = recompute_stats(rows)
    return EvalReport(
        policy=policy.name,
        master_seed=int(master_seed),
        n_episodes=n_episodes,
        mean_reward=mean,
        std_reward=std,
        mean_reward_exact=mean_exact,
        episodes=rows,
        window=(
            {"train_days": list(window.train_days), "eval_days": list(window.eval_days)}
            if window is not None
            else None
        ),
    )


def _normalize_dir(base_dir: Union[str, Path, None]) -> Optional[str]:
    return None if base_dir is None else str(Path(base_dir).resolve())


def _chunk(items: list, n: int) -> list[list]:
    size = math.ceil(len(items) / n)
    return [items[i : i + size] for i in range(0, len(items), size)]


def _evaluate_chunk(
    config: dict,
    policy: Policy,
    indexed_seeds: list[tuple[int, int]],
    days: Optional[Sequence[str]],
    base_dir: Optional[str],
) -> list[dict]:
    env = build_env(config, base_dir=base_dir, days=days)
    return _evaluate_chunk_env(env, policy, indexed_seeds)


def _evaluate_chunk_env(
    env: ExecutionEnv, policy: Policy, indexed_seeds: list[tuple[int, int]]
) -> list[dict]:
    rows = []
    for index, seed in indexed_seeds:
        record = run_episode(env, policy, seed, include_logs=False)
        rows.append(
            {
                "index": index,
                "seed": seed,
                "side": record.side,
                "start_time": record.start_time,
                "total_reward_exact": record.total_reward_exact,
                "total_reward": record.total_reward,
                "n_steps": record.n_steps,
                "truncated": record.truncated,
            }
        )
    return rows


# -- walk-forward windows -------------------------------------------------------


@dataclass(frozen=True)
class EvalWindow:
    train_days: tuple[str, ...]
    eval_days: tuple[str, ...]


def make_windows(
    days: Sequence[str], train_len: int, eval_len: int
) -> list[EvalWindow]:
    """Non-overlapping walk-forward windows over an ordered day list.

    The window stride equals eval_len, so each window's evaluation days are
    the next window's final training days: with 15 days and 5/5 this yields
    2 windows (days 0-4/5-9 and 5-9/10-14). Needs at least train_len +
    eval_len days."""
    if train_len < 1 or eval_len < 1:
        raise InvalidArgumentError("window lengths must be >= 1")
    day_list = [str(d) for d in days]
    if len(set(day_list)) != len(day_list):
        raise InvalidArgumentError("duplicate days")
    if sorted(day_list) != day_list:
        raise InvalidArgumentError("days must be in increasing order")
    if len(day_list) < train_len + eval_len:
        raise InvalidArgumentError(
            f"need at least {train_len + eval_len} days, got {len(day_list)}"
        )
    windows = []
    start = 0
    while start + train_len + eval_len <= len(day_list):
        windows.append(
            EvalWindow(
                train_days=tuple(day_list[start : start + train_len]),
                eval_days=tuple(day_list[start + train_len : start + train_len + eval_len]),
            )
        )
        start += eval_len
    return windows


# -- conformance ------------------------------------------------------------------


@dataclass
class ConformanceReport:
    checks: dict[str, dict] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(c.get("passed", False) for c in self.checks.values())

    def to_json(self) -> str:
        return (
            json.dumps(
                {"passed": self.passed, "checks": self.checks},
                indent=2,
                sort_keys=True,
            )
            + "\n"
        )


CHECK_NAMES = ("reproducibility", "duplicity", "rounding")

EnvFactory = Callable[[bool], ExecutionEnv]


def conformance_check(
    config: dict,
    master_seed: int,
    *,
    n_episodes: int = 5,
    suite: Sequence[str] = CHECK_NAMES,
    env_factory: Optional[EnvFactory] = None,
    base_dir: Union[str, Path, None] = None,
) -> ConformanceReport:
    """Run the execution-integrity checks and report per-check diagnostics.

    - reproducibility: two independent env builds replay the same seeds to
      byte-identical trade logs and rewards (first divergence reported).
    - duplicity: with consumption auditing on, no snapshot is consumed more
      than once per algo per episode.
    - rounding: executed volume equals the parent volume exactly in every
      untruncated episode; under delete_vol the shortfall must equal the
      volume dropped at bounds.

    env_factory(audit) lets tests inject rigged environments; the default
    builds from the config."""
    unknown = set(suite) - set(CHECK_NAMES)
    if unknown:
        raise InvalidArgumentError(f"unknown check(s): {', '.join(sorted(unknown))}")
    if env_factory is None:

        def env_factory(audit: bool) -> ExecutionEnv:
            merged = dict(config)
            merged["audit"] = audit
            return build_env(merged, base_dir=base_dir)

    report = ConformanceReport()
    seeds = episode_seeds(master_seed, n_episodes)
    if "reproducibility" in suite:
        report.checks["reproducibility"] = _check_reproducibility(
            env_factory, master_seed, seeds
        )
    if "duplicity" in suite:
        report.checks["duplicity"] = _check_duplicity(env_factory, master_seed, seeds)
    if "rounding" in suite:
        report.checks["rounding"] = _check_rounding(env_factory, master_seed, seeds)
    return report


def _check_reproducibility(
    env_factory: EnvFactory, master_seed: int, seeds: list[int]
) -> dict:
    result: dict = {"passed": True, "episodes": len(seeds)}
    env_a = env_factory(False)
    env_b = env_factory(False)
    policy_a = RandomPolicy(master_seed, n_actions=env_a.n_actions)
    policy_b = RandomPolicy(master_seed, n_actions=env_b.n_actions)
    for i, seed in enumerate(seeds):
        rec_a = run_episode(env_a, policy_a, seed)
        rec_b = run_episode(env_b, policy_b, seed)
        for name, a, b in (
            ("rl_log", rec_a.rl_log, rec_b.rl_log),
            ("twap_log", rec_a.twap_log, rec_b.twap_log),
            ("rewards", rec_a.rewards_exact, rec_b.rewards_exact),
        ):
            if a != b:
                result["passed"] = False
                result["first_divergence"] = {
                    "episode": i,
                    "field": name,
                    "line": _first_diff(a, b),
                }
                return result
    return result


def _first_diff(a, b) -> int:
    seq_a = a.splitlines() if isinstance(a, str) else list(a)
    seq_b = b.splitlines() if isinstance(b, str) else list(b)
    for i, (line_a, line_b) in enumerate(zip(seq_a, seq_b)):
        if line_a != line_b:
            return i
    return min(len(seq_a), len(seq_b))


def _check_duplicity(
    env_factory: EnvFactory, master_seed: int, seeds: list[int]
) -> dict:
    result: dict = {"passed": True, "episodes": len(seeds), "max_consumption": 0}
    env = env_factory(True)
    policy = RandomPolicy(master_seed, n_actions=env.n_actions)
    for i, seed in enumerate(seeds):
        run_episode(env, policy, seed, include_logs=False)
        for algo_id in (RL_ID, TWAP_ID):
            consumed = env.broker.view(algo_id).consumed
            if consumed is None:
                result["passed"] = False
                result["error"] = "environment did not enable consumption auditing"
                return result
            worst = int(consumed.max())
            result["max_consumption"] = max(result["max_consumption"], worst)
            if worst > 1:
                result["passed"] = False
                result["violation"] = {
                    "episode": i,
                    "algo": algo_id,
                    "snapshot_index": int(np.argmax(consumed)),
                    "count": worst,
                }
                return result
    return result


def _check_rounding(
    env_factory: EnvFactory, master_seed: int, seeds: list[int]
) -> dict:
    result: dict = {
        "passed": True,
        "episodes": len(seeds),
        "truncated_skipped": 0,
        "delete_vol_episodes": 0,
    }
    env = env_factory(False)
    for i, seed in enumerate(seeds):
        delete_vol_run = bool(
            env.sampler is not None
            and env.sampler.settings.get("delete_vol", False)
        )
        policy = (
            ConstantPolicy(_neutral_action(env))
            if delete_vol_run
            else RandomPolicy(master_seed, n_actions=env.n_actions)
        )
        record = run_episode(env, policy, seed, include_logs=False)
        if record.truncated:
            result["truncated_skipped"] += 1
            continue
        for algo_id in (RL_ID, TWAP_ID):
            algo = env.broker.algo(algo_id)
            executed = algo.executed_units
            if delete_vol_run:
                result["delete_vol_episodes"] += 1
                ok = executed + algo.dropped_units == algo.total_volume_units
                expected = "executed + dropped == total"
            else:
                ok = executed == algo.total_volume_units
                expected = "executed == total"
            if not ok:
                result["passed"] = False
                result["violation"] = {
                    "episode": i,
                    "algo": algo_id,
                    "executed_units": executed,
                    "dropped_units": algo.dropped_units,
                    "total_units": algo.total_volume_units,
                    "expected": expected,
                }
                return result
    return result


def _neutral_action(env: ExecutionEnv) -> int:
    for i, factor in enumerate(env.action_factors):
        if factor == 1:
            return i
    raise InvalidArgumentError(
        "delete_vol rounding check needs a 1.0 factor in action_factors"
    )
