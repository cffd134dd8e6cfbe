"""Episodic bindings for lobexec environments.

Adapts the engine's exact-arithmetic reset/step loop to the de-facto
standard RL environment shape: ``reset(seed) -> (obs, info)`` and
``step(action) -> (obs, reward, terminated, truncated, info)``. Rewards
cross the boundary as floats; the exact decimal string stays available
under ``info["reward_exact"]`` so nothing is lost for callers that care.

Every engine failure is re-raised as :class:`EnvBindingError` with the
original exception chained, giving training code a single except target.
Invalid actions are rejected here, before the engine is touched.

Observation arrays are freshly allocated per call and never reused, so
holding a reference across resets is safe (if rarely useful).

One :class:`BoundEnv` per thread or process; vectorized training means
constructing N independent instances via :func:`make`.
"""

from __future__ import annotations

from pathlib import Path
from typing import Any, Mapping, Optional, Union

import numpy as np

import lobexec
from lobexec import (
    EngineError,
    EpisodeParams,
    EpisodeSampler,
    ExecutionEnv,
    build_env,
    load_config,
)

__version__ = lobexec.__version__

__all__ = ["BoundEnv", "EnvBindingError", "make", "__version__"]


class EnvBindingError(Exception):
    """Raised for any failure crossing the binding boundary.

    When the engine itself failed, its exception is chained as
    ``__cause__`` and its message is preserved verbatim.
    """


def make(config: Union[str, Path, Mapping[str, Any]]) -> "BoundEnv":
    """Build a :class:`BoundEnv` from a config file path.

    ``config`` may also be an already-loaded config mapping, in which
    case relative data paths resolve against the working directory.
    """
    try:
        if isinstance(config, (str, Path)):
            base_dir = Path(config).parent
            config = load_config(config)
        else:
            base_dir = None
            config = dict(config)
        env = build_env(config, base_dir=base_dir)
    except (EngineError, OSError) as exc:
        raise EnvBindingError(str(exc)) from exc
    return BoundEnv(env)


class BoundEnv:
    """Wraps one engine environment behind the episodic API.

    ``observation_size`` and ``action_count`` are fixed at construction
    and never change for the lifetime of the instance.
    """

    def __init__(self, env: ExecutionEnv) -> None:
        if env.sampler is None:
            raise EnvBindingError("environment has no episode sampler configured")
        self._env = env
        self._last_seed: Optional[int] = None
        self._last_params: Optional[EpisodeParams] = None
        self.observation_size: int = int(env.observation_size)
        self.action_count: int = int(env.n_actions)

    # -- episodic API ----------------------------------------------------

    def reset(
        self,
        seed: Optional[int] = None,
        options: Optional[Mapping[str, Any]] = None,
    ) -> tuple[np.ndarray, dict]:
        """Start an episode; returns (observation, info).

        The first reset needs a seed. A later ``reset()`` without one
        replays the previous episode exactly. ``options`` overrides
        episode settings (``start_time``, ``total_volume``, ...) for
        this draw only; seeded resets afterwards use the base config.
        """
        if seed is not None:
            seed = int(seed)
        try:
            if options is not None:
                if seed is None:
                    seed = self._last_seed
                if seed is None:
                    raise EnvBindingError("reset with options needs a seed")
                sampler = self._env.sampler
                merged = dict(sampler.settings)
                merged.update(options)
                one_off = EpisodeSampler(merged, sampler.feed, days=sampler.days)
                params = one_off.draw(seed)
                obs = self._env.reset(params=params)
            elif seed is not None:
                obs = self._env.reset(seed=seed)
                params = self._env.params
            elif self._last_params is not None:
                params = self._last_params
                seed = self._last_seed
                obs = self._env.reset(params=params)
            else:
                raise EnvBindingError("first reset needs a seed")
        except EngineError as exc:
            raise EnvBindingError(str(exc)) from exc
        self._last_seed = seed
        self._last_params = params
        info = {
            "seed": seed,
            "side": params.side.value,
            "total_volume": str(params.total_volume),
            "start_time": params.schedule.start_time,
        }
        return np.ascontiguousarray(obs, dtype=np.float64), info

    def step(self, action: Union[int, np.integer]) -> tuple[np.ndarray, float, bool, bool, dict]:
        """Advance one slice; returns (obs, reward, terminated, truncated, info).

        ``terminated`` is the engine's done flag; ``truncated`` is set
        when the history ran out under the episode. The reward is the
        float image of the exact bucket reward, which info carries
        verbatim as ``reward_exact``; settled buckets also contribute
        their VWAP entries to info.
        """
        # reject bad actions before the engine sees them
        if not isinstance(action, (int, np.integer)):
            raise EnvBindingError(f"action must be an integer, got {action!r}")
        action = int(action)
        if not 0 <= action < self.action_count:
            raise EnvBindingError(
                f"action {action} outside 0..{self.action_count - 1}"
            )
        try:
            result = self._env.step(action)
        except EngineError as exc:
            raise EnvBindingError(str(exc)) from exc
        info = dict(result.info)
        truncated = bool(info["truncated"])
        terminated = bool(result.done)
        obs = np.ascontiguousarray(result.observation, dtype=np.float64)
        return obs, float(result.reward), terminated, truncated, info

    def close(self) -> None:
        """No-op; the engine holds no external resources."""

    # -- introspection -----------------------------------------------------

    @property
    def unwrapped(self) -> ExecutionEnv:
        """The underlying engine environment."""
        return self._env

    def __repr__(self) -> str:
        return (
            f"BoundEnv(observation_size={self.observation_size}, "
            f"action_count={self.action_count})"
        )
