"""Boundary tests for the episodic bindings.

Everything here drives the bindings package against a primary
environment built from the same config, checking that nothing is lost
or distorted at the adapter boundary. Skips cleanly when the bindings
are not installed.
"""

import json
from pathlib import Path

import numpy as np
import pytest

bindings = pytest.importorskip("lobexec_bindings")

import lobexec
from lobexec import InvalidArgumentError, InvalidStateError, build_env
from lobexec_bindings import BoundEnv, EnvBindingError, make


def _config(**episode_overrides):
    episode = {
        "direction": "buy",
        "total_volume": "20",
        "exec_time_ms": 60_000,
        "n_buckets": 5,
        "no_of_slices": 4,
        "start_time": "sample",
    }
    episode.update(episode_overrides)
    return {
        "market": {"tick_size": "0.1", "lot_size": "0.001"},
        "feed": {
            "kind": "synthetic",
            "seed": 11,
            "n_snapshots": 4000,
        },
        "episode": episode,
    }


def _run_bound(env, seed, actions):
    """Full episode through the bindings; returns the per-step tuples."""
    obs, info = env.reset(seed=seed)
    trace = [(obs, info)]
    done = False
    i = 0
    while not done:
        obs, reward, terminated, truncated, step_info = env.step(actions[i % len(actions)])
        trace.append((obs, reward, terminated, truncated, step_info))
        done = terminated or truncated
        i += 1
    return trace


# -- construction ------------------------------------------------------------


def test_make_from_dict():
    env = make(_config())
    assert isinstance(env, BoundEnv)
    assert env.observation_size == 102
    assert env.action_count == 3


def test_make_from_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(_config()))
    for spec in (str(path), Path(path)):
        env = make(spec)
        obs, _ = env.reset(seed=3)
        assert obs.shape == (102,)


def test_make_missing_file(tmp_path):
    with pytest.raises(EnvBindingError) as err:
        make(tmp_path / "nope.json")
    assert isinstance(err.value.__cause__, OSError)


def test_make_bad_config_key():
    cfg = _config()
    cfg["flux"] = 1
    with pytest.raises(EnvBindingError) as err:
        make(cfg)
    assert "flux" in str(err.value)
    assert isinstance(err.value.__cause__, InvalidArgumentError)


def test_make_invalid_json(tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{nope")
    with pytest.raises(EnvBindingError):
        make(path)


def test_version_pinned_to_engine():
    assert bindings.__version__ == lobexec.__version__


# -- reset -------------------------------------------------------------------


def test_reset_shape_and_info():
    env = make(_config())
    obs, info = env.reset(seed=7)
    assert obs.shape == (102,)
    assert obs.dtype == np.float64
    assert obs.flags["C_CONTIGUOUS"]
    assert info["seed"] == 7
    assert info["side"] == "buy"
    assert info["total_volume"] == "20"
    assert isinstance(info["start_time"], int)


def test_reset_same_seed_identical():
    env = make(_config())
    obs_a, info_a = env.reset(seed=7)
    obs_b, info_b = env.reset(seed=7)
    assert np.array_equal(obs_a, obs_b)
    assert info_a == info_b


def test_reset_requires_seed_first():
    env = make(_config())
    with pytest.raises(EnvBindingError, match="needs a seed"):
        env.reset()


def test_reset_without_seed_replays():
    env = make(_config())
    first = _run_bound(env, 21, [0, 2, 1])
    obs, info = env.reset()
    assert np.array_equal(obs, first[0][0])
    assert info == first[0][1]
    done = False
    i = 0
    actions = [0, 2, 1]
    while not done:
        obs, reward, terminated, truncated, step_info = env.step(actions[i % 3])
        ref_obs, ref_reward, ref_term, ref_trunc, ref_info = first[1 + i]
        assert np.array_equal(obs, ref_obs)
        assert reward == ref_reward
        assert (terminated, truncated) == (ref_term, ref_trunc)
        assert step_info == ref_info
        done = terminated or truncated
        i += 1
    assert 1 + i == len(first)


def test_options_override_start_time():
    env = make(_config())
    _, base_info = env.reset(seed=4)
    start = base_info["start_time"] + 5_000
    obs, info = env.reset(seed=4, options={"start_time": start})
    assert info["start_time"] == start
    assert obs.shape == (102,)
    # a plain seeded reset goes back to the base settings
    _, again = env.reset(seed=4)
    assert again == base_info


def test_options_infeasible_start_time():
    env = make(_config())
    env.reset(seed=4)
    with pytest.raises(EnvBindingError) as err:
        env.reset(seed=4, options={"start_time": 10 ** 12})
    assert "too close to the end" in str(err.value)
    assert isinstance(err.value.__cause__, InvalidArgumentError)


def test_options_unknown_key():
    env = make(_config())
    with pytest.raises(EnvBindingError) as err:
        env.reset(seed=4, options={"flux": 1})
    assert isinstance(err.value.__cause__, InvalidArgumentError)


def test_options_need_some_seed():
    env = make(_config())
    with pytest.raises(EnvBindingError, match="needs a seed"):
        env.reset(options={"start_time": 0})


def test_buffers_fresh_across_resets():
    env = make(_config())
    obs_a, _ = env.reset(seed=9)
    pristine = obs_a.copy()
    obs_a[:] = -999.0
    obs_b, _ = env.reset(seed=9)
    assert obs_b is not obs_a
    assert np.array_equal(obs_b, pristine)
    stepped, *_ = env.step(1)
    assert stepped is not obs_b


# -- step --------------------------------------------------------------------


def test_step_reward_zero_off_bound():
    # 4 slices per bucket: the first step settles nothing
    env = make(_config())
    env.reset(seed=5)
    obs, reward, terminated, truncated, info = env.step(1)
    assert reward == 0.0
    assert info["reward_exact"] == "0"
    assert info["settled_buckets"] == []
    assert not terminated and not truncated


def test_step_action_out_of_range():
    env = make(_config())
    env.reset(seed=5)
    for bad in (5, -1, 3):
        with pytest.raises(EnvBindingError, match="outside"):
            env.step(bad)
    # the rejected actions never reached the engine
    obs, reward, terminated, truncated, info = env.step(1)
    assert info["step"] == 1


def test_step_action_not_integer():
    env = make(_config())
    env.reset(seed=5)
    for bad in (1.5, "1", None):
        with pytest.raises(EnvBindingError, match="integer"):
            env.step(bad)


def test_step_accepts_numpy_integer():
    env = make(_config())
    env.reset(seed=5)
    obs, reward, terminated, truncated, info = env.step(np.int64(1))
    assert info["step"] == 1


def test_step_after_done_raises():
    env = make(_config())
    trace = _run_bound(env, 6, [1])
    assert trace[-1][2] or trace[-1][3]
    with pytest.raises(EnvBindingError) as err:
        env.step(1)
    assert isinstance(err.value.__cause__, InvalidStateError)
    assert "reset" in str(err.value)


def test_instances_independent():
    env_a = make(_config())
    env_b = make(_config())
    obs_a, _ = env_a.reset(seed=13)
    obs_b, _ = env_b.reset(seed=13)
    assert np.array_equal(obs_a, obs_b)
    done = False
    while not done:
        step_a = env_a.step(2)
        step_b = env_b.step(2)
        assert np.array_equal(step_a[0], step_b[0])
        assert step_a[1:] == step_b[1:]
        done = step_a[2] or step_a[3]


# -- boundary fidelity -------------------------------------------------------


def test_trace_matches_primary_engine():
    """Seeded episodes through the bindings match the primary trace
    value for value: observations, float rewards, exact reward strings,
    and both done flags, over 20 episodes of mixed actions."""
    cfg = _config(direction="sample", start_time="sample")
    bound = make(cfg)
    primary = build_env(_config(direction="sample", start_time="sample"))
    nonzero_rewards = 0
    total_steps = 0
    for episode in range(20):
        seed = 1000 + episode
        rng = np.random.Generator(np.random.PCG64(seed))
        obs_b, _ = bound.reset(seed=seed)
        obs_p = primary.reset(seed=seed)
        assert np.array_equal(obs_b, obs_p)
        done = False
        while not done:
            action = int(rng.integers(0, 3))
            obs_b, reward, terminated, truncated, info = bound.step(action)
            result = primary.step(action)
            assert np.array_equal(obs_b, result.observation)
            assert reward == float(result.reward)
            assert info["reward_exact"] == result.info["reward_exact"]
            assert terminated == result.done
            assert truncated == result.info["truncated"]
            assert info == result.info
            if info["reward_exact"] != "0":
                nonzero_rewards += 1
            total_steps += 1
            done = terminated or truncated
    assert total_steps >= 20 * 5
    assert nonzero_rewards > 0


def test_constant_action_cumulative_zero():
    """Factor-1.0 actions mirror the benchmark, so the cumulative float
    reward through the boundary is exactly 0.0."""
    env = make(_config(direction="sample"))
    for seed in (1, 2, 3, 4, 5):
        trace = _run_bound(env, seed, [1])
        rewards = [step[1] for step in trace[1:]]
        exacts = [step[4]["reward_exact"] for step in trace[1:]]
        assert sum(rewards) == 0.0
        assert all(r == 0.0 for r in rewards)
        assert all(e == "0" for e in exacts)
        assert trace[-1][2] and not trace[-1][3]


def test_bucket_vwaps_in_info():
    env = make(_config())
    trace = _run_bound(env, 8, [1])
    settle_steps = [s for s in trace[1:] if s[4]["settled_buckets"]]
    assert len(settle_steps) == 5
    for step in settle_steps:
        info = step[4]
        assert info["bucket_index"] == info["settled_buckets"][0]
        assert set(info["rl_vwap"]) == {"exact", "float"}
        assert set(info["twap_vwap"]) == {"exact", "float"}
    assert [s[4]["bucket_index"] for s in settle_steps] == [0, 1, 2, 3, 4]
