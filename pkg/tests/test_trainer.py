"""Actor-critic trainer: rollout collection, update math, protocols."""

import numpy as np
import pytest

from graphexplore.agents import CategoricalHead, ValueHead
from graphexplore.agents.policy import PolicyModel
from graphexplore.envs.maze import Maze, MazeEnv, generate_maze
from graphexplore.episode import (
    EpisodeHistory,
    EpisodeTrajectory,
    HistoryEncoder,
    HistoryEncoderConfig,
    StepRecord,
    TrajectoryBatch,
    run_episode,
)
from graphexplore.graphnet import GraphNet, GraphNetConfig, GraphObservation
from graphexplore.tensor import ParamSet
from graphexplore.trainer import (
    METRICS_HEADER,
    TrainConfig,
    UpdateStats,
    a2c_update,
    batch_loss,
    collect_rollouts,
    episode_returns,
    evaluate,
    fine_tune,
    train,
    zero_shot_coverage,
    _episode_seeds,
)


def tiny_model(seed=0, width=12, n_actions=4, zero_value=False):
    params = ParamSet(seed=seed)
    gnet = GraphNet(params, "gnn", GraphNetConfig(d=6, rounds=1, feature_width=1))
    enc = HistoryEncoder(
        params,
        "hist",
        HistoryEncoderConfig(
            recurrent_width=width, action_width=4, action_vocab=n_actions,
            temporal_mode="autoregressive", conditioning="graph",
        ),
        gnet,
    )
    head = CategoricalHead(params, "pi", width, n_actions)
    vhead = ValueHead(params, "v", width, hidden=8)
    if zero_value:
        for name, p in params.named().items():
            if name.startswith("v/"):
                p.data[...] = 0.0
    return PolicyModel(params, enc, head, vhead)


def maze_sampler(rng):
    maze = generate_maze(4, 4, 0.18, int(rng.integers(2**62)))
    return MazeEnv(maze, budget=8)


def small_config(**kw):
    defaults = dict(seed=5, env_sampler=maze_sampler, workers=2,
                    episodes_per_worker=1, total_updates=2, eval_every=0)
    defaults.update(kw)
    return TrainConfig(**defaults)


# ------------------------------------------------------------------ config


def test_config_validation():
    with pytest.raises(ValueError, match="workers"):
        TrainConfig(seed=0, workers=0)
    with pytest.raises(ValueError, match="entropy_coef"):
        TrainConfig(seed=0, entropy_coef=-0.1)
    with pytest.raises(ValueError, match="value_coef"):
        TrainConfig(seed=0, value_coef=-1)


def test_update_stats_rejects_non_finite():
    with pytest.raises(ValueError, match="value_loss"):
        UpdateStats(0.0, 0.0, float("nan"), 0.0, 0.0).validate()


# ------------------------------------------------------------------ returns


def test_returns_suffix_recursion():
    history = EpisodeHistory(records=[StepRecord(None, None, 0.0)], budget=3, normalizer=1.0)
    for r in (0.5, 0.5, 0.25):
        history.records.append(StepRecord(0, None, r))
    ep = EpisodeTrajectory(history=history)
    returns = episode_returns(ep)
    assert returns == [1.25, 0.75, 0.25]
    rewards = ep.rewards()
    for t in range(len(rewards)):
        nxt = returns[t + 1] if t + 1 < len(returns) else 0.0
        assert returns[t] == pytest.approx(rewards[t] + nxt)


def test_hand_example_returns_and_advantages():
    # Walk a 3-cell corridor east twice (T-normalized rewards, T=2): rewards
    # (1.0, 0.5), returns (1.5, 0.5); with a zero value head the squared-error
    # sum is 1.5^2 + 0.5^2.
    model = tiny_model(zero_value=True)
    cfg = small_config(workers=1)
    maze = Maze(width=3, height=1,
                passages=np.array([[2, 2 | 8, 8]], dtype=np.uint8), start=(0, 0))
    env = MazeEnv(maze, budget=2)
    scripted = lambda history, env_, rng: 1  # east
    history, traj = run_episode(env, scripted, budget=2, seed=0)
    assert traj.rewards() == [pytest.approx(1.0), pytest.approx(0.5)]
    returns = episode_returns(traj)
    assert returns == [pytest.approx(1.5), pytest.approx(0.5)]
    from graphexplore.tensor import Tape

    with Tape():
        _, parts = batch_loss(model, TrajectoryBatch(episodes=[traj]), cfg)
    assert parts["value_loss"] == pytest.approx(1.5**2 + 0.5**2)


def test_zero_advantage_kills_policy_term():
    # All-zero rewards + zero value head: advantages vanish so the policy
    # component contributes nothing.
    model = tiny_model(zero_value=True)
    cfg = small_config()
    maze = generate_maze(2, 2, 1.0, seed=0)
    env = MazeEnv(maze, budget=3)
    history, traj = run_episode(env, model.policy("sample"), budget=3, seed=1)
    for rec in history.records:
        rec.reward = 0.0
    from graphexplore.tensor import Tape

    with Tape():
        _, parts = batch_loss(model, TrajectoryBatch(episodes=[traj]), cfg)
    assert parts["policy_loss"] == 0.0
    assert parts["value_loss"] == 0.0


# ------------------------------------------------------------------ collection


def test_single_worker_single_episode_matches_direct_run():
    model = tiny_model()
    cfg = small_config(workers=1, episodes_per_worker=1)
    batch = collect_rollouts(model, maze_sampler, cfg, round_index=0)
    assert len(batch) == 1

    env_seed, ep_seed = _episode_seeds(cfg, 0, 0, 0)
    env = maze_sampler(np.random.default_rng(env_seed))
    _, direct = run_episode(env, model.policy("sample"), budget=env.budget, seed=ep_seed)

    got, want = batch.episodes[0], direct
    assert [r.action for r in got.history.records] == [r.action for r in want.history.records]
    assert got.rewards() == want.rewards()
    assert got.logprobs == want.logprobs
    assert got.values == want.values


def test_collection_is_deterministic():
    model = tiny_model()
    cfg = small_config(workers=3, episodes_per_worker=2)
    b1 = collect_rollouts(model, maze_sampler, cfg, round_index=7)
    b2 = collect_rollouts(model, maze_sampler, cfg, round_index=7)
    assert len(b1) == 6
    for e1, e2 in zip(b1.episodes, b2.episodes):
        assert [r.action for r in e1.history.records] == [r.action for r in e2.history.records]
        assert e1.rewards() == e2.rewards()


def test_collection_episode_count_scales_with_workers():
    model = tiny_model()
    cfg = small_config(workers=4, episodes_per_worker=2)
    batch = collect_rollouts(model, maze_sampler, cfg)
    assert len(batch) == 8


def test_worker_failure_aborts_collection():
    model = tiny_model()
    cfg = small_config(workers=3, episodes_per_worker=1)
    calls = []

    def flaky_sampler(rng):
        calls.append(1)
        if len(calls) == 2:
            raise RuntimeError("worker exploded")
        return maze_sampler(rng)

    with pytest.raises(RuntimeError, match="worker exploded"):
        collect_rollouts(model, flaky_sampler, cfg)


# ------------------------------------------------------------------ update


def test_update_changes_params_and_reports_finite_stats():
    model = tiny_model()
    cfg = small_config(workers=2, episodes_per_worker=2)
    before = model.params.snapshot()
    batch = collect_rollouts(model, maze_sampler, cfg)
    model, stats = a2c_update(model, batch, cfg)
    stats.validate()
    assert not stats.skipped
    assert stats.grad_norm > 0
    after = model.params.snapshot()
    changed = any(not np.array_equal(before[k], after[k]) for k in before)
    assert changed


def test_update_skips_on_non_finite_rewards():
    model = tiny_model()
    cfg = small_config(workers=1)
    batch = collect_rollouts(model, maze_sampler, cfg)
    batch.episodes[0].history.records[1].reward = float("nan")
    before = model.params.snapshot()
    model, stats = a2c_update(model, batch, cfg)
    assert stats.skipped
    after = model.params.snapshot()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_training_is_deterministic_end_to_end():
    covs = []
    for _ in range(2):
        model = tiny_model(seed=3)
        cfg = small_config(workers=2, episodes_per_worker=1, total_updates=3)
        for u in range(cfg.total_updates):
            batch = collect_rollouts(model, maze_sampler, cfg, round_index=u)
            model, _ = a2c_update(model, batch, cfg)
        covs.append(model.params.snapshot())
    for k in covs[0]:
        assert np.array_equal(covs[0][k], covs[1][k])


# ------------------------------------------------------------------ bandit


class BanditEnv:
    """Constant 2-node graph with a growing mask: action 0 covers both nodes
    (reward 1), action 1 covers nothing (reward 0)."""

    budget = 1
    reward_normalizer = 2.0

    def _obs(self):
        return GraphObservation(
            node_count=2,
            node_features=np.zeros((2, 1)),
            edges=[(0, 1, 1), (1, 0, 1)],
            coverage=np.array([1.0, 1.0]) if self.done else np.zeros(2),
            num_edge_types=1,
        )

    def reset(self, rng):
        self.done = False
        return self._obs()

    def step(self, action):
        if action == 0:
            self.done = True
        return self._obs()

    def fully_explored(self):
        return self.done

    def action_mask(self):
        return np.array([True, True])

    def coverage_fraction(self):
        return 1.0 if self.done else 0.0


def test_bandit_learns_rewarding_arm_and_entropy_trends_down():
    model = tiny_model(n_actions=2)
    cfg = TrainConfig(seed=9, env_sampler=lambda rng: BanditEnv(), workers=4,
                      episodes_per_worker=1, learning_rate=0.02, total_updates=150,
                      eval_every=0)
    entropies = []
    for u in range(cfg.total_updates):
        batch = collect_rollouts(model, cfg.env_sampler, cfg, round_index=u)
        model, stats = a2c_update(model, batch, cfg)
        entropies.append(stats.entropy)
        if u >= 30 and stats.entropy < 0.05:
            break
    env = BanditEnv()
    run_episode(env, model.policy("greedy"), budget=1, seed=0)
    assert env.done, "greedy policy failed to pick the rewarding action"
    # 10-update moving average decreases in trend: late window below early.
    kernel = np.ones(10) / 10
    smooth = np.convolve(entropies, kernel, mode="valid")
    assert smooth[-1] < smooth[0] * 0.8


# ------------------------------------------------------------------ protocols


def heldout_envs(n=4):
    return [MazeEnv(generate_maze(4, 4, 0.18, 7001 + i), budget=8) for i in range(n)]


def test_zero_shot_leaves_params_unchanged():
    model = tiny_model()
    cfg = small_config()
    before = model.params.snapshot()
    cov = evaluate(model, heldout_envs(), "zero_shot", cfg)
    assert 0.0 <= cov <= 1.0
    after = model.params.snapshot()
    assert all(np.array_equal(before[k], after[k]) for k in before)


def test_fine_tune_zero_budget_equals_zero_shot():
    model = tiny_model()
    cfg = small_config()
    z = evaluate(model, heldout_envs(), "zero_shot", cfg)
    f = evaluate(model, heldout_envs(), "fine_tune", cfg, fine_tune_updates=0)
    assert f == pytest.approx(z)


def test_fine_tune_never_mutates_caller_model():
    model = tiny_model()
    cfg = small_config(workers=1, episodes_per_worker=2)
    before = model.params.snapshot()
    env = heldout_envs(1)[0]
    tuned, _ = fine_tune(model, env, cfg, updates=2)
    after = model.params.snapshot()
    assert all(np.array_equal(before[k], after[k]) for k in before)
    diff = any(
        not np.array_equal(tuned.params.snapshot()[k], before[k]) for k in before
    )
    assert diff


def test_evaluate_validates_inputs():
    model = tiny_model()
    cfg = small_config()
    with pytest.raises(ValueError, match="empty"):
        evaluate(model, [], "zero_shot", cfg)
    with pytest.raises(ValueError, match="protocol"):
        evaluate(model, heldout_envs(1), "both", cfg)


def test_train_writes_metrics_csv(tmp_path):
    model = tiny_model()
    cfg = small_config(workers=1, episodes_per_worker=1, total_updates=3, eval_every=2)
    path = tmp_path / "metrics.csv"
    model, history = train(model, cfg, eval_envs=heldout_envs(2), metrics_path=str(path))
    lines = path.read_text().strip().splitlines()
    assert lines[0] == METRICS_HEADER
    assert len(lines) == 4
    # update 2 evaluated, updates 1 and 3 leave the eval column blank
    assert lines[1].endswith(",") and lines[3].endswith(",")
    assert not lines[2].endswith(",")
    assert len(history) == 3
