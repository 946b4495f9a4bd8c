"""Synchronized advantage actor-critic over a distribution of environments.

Workers collect full on-policy episodes from a read-only parameter snapshot,
a barrier aligns them, and a single learner step replays the batch on the
gradient tape. Returns are undiscounted suffix sums (finite-horizon coverage
objective), advantages are returns minus the value baseline, and the update
clips the global gradient norm.
"""

from __future__ import annotations

import copy
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .episode import TrajectoryBatch, run_episode
from .tensor import (
    GradientError,
    OptimizerState,
    Tape,
    clip_global_norm,
    no_grad,
    optimizer_step,
)


@dataclass
class TrainConfig:
    """Knobs for the training loop. env_sampler is a callable rng -> fresh
    environment instance; seed fully determines the run."""

    seed: int
    env_sampler: object = None
    workers: int = 32
    episodes_per_worker: int = 1
    learning_rate: float = 1e-3
    entropy_coef: float = 0.01
    value_coef: float = 0.5
    clip_norm: float = 1.0
    total_updates: int = 100
    eval_every: int = 10

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        for name in ("entropy_coef", "value_coef", "clip_norm"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be >= 0")


@dataclass
class UpdateStats:
    mean_return: float
    policy_loss: float
    value_loss: float
    entropy: float
    grad_norm: float
    skipped: bool = False  # non-finite loss or gradient; parameters untouched

    def validate(self):
        for name in ("mean_return", "policy_loss", "value_loss", "entropy", "grad_norm"):
            if not np.isfinite(getattr(self, name)):
                raise ValueError(f"non-finite stat {name}")
        return self


def _episode_seeds(config, round_index, worker, episode):
    """Per-(round, worker, episode) independent streams: (env seed, episode seed)."""
    ss = np.random.SeedSequence([config.seed, round_index, worker, episode])
    a, b = ss.generate_state(2)
    return int(a), int(b)


def collect_rollouts(model, env_sampler, config, round_index=0):
    """Each worker samples fresh environments and runs full episodes from a
    read-only snapshot of the model. The returned batch is ordered by
    (worker, episode) regardless of completion order, so aggregation is
    deterministic. A worker failure aborts the whole collection."""

    def worker_task(w):
        episodes = []
        for e in range(config.episodes_per_worker):
            env_seed, ep_seed = _episode_seeds(config, round_index, w, e)
            env = env_sampler(np.random.default_rng(env_seed))
            policy = model.policy(mode="sample")
            _, traj = run_episode(env, policy, budget=env.budget, seed=ep_seed)
            episodes.append(traj)
        return episodes

    if config.workers == 1:
        collected = [worker_task(0)]
    else:
        with ThreadPoolExecutor(max_workers=config.workers) as pool:
            collected = list(pool.map(worker_task, range(config.workers)))
    batch = TrajectoryBatch(episodes=[ep for group in collected for ep in group])
    return batch.validate()


def episode_returns(episode):
    """Undiscounted suffix sums: R_t = r_t + R_{t+1}, R after the end = 0."""
    rewards = episode.rewards()
    returns = [0.0] * len(rewards)
    acc = 0.0
    for t in range(len(rewards) - 1, -1, -1):
        acc += rewards[t]
        returns[t] = acc
    return returns


def batch_loss(model, batch, config):
    """Actor-critic loss over the batch (per-episode sums, averaged over
    episodes), built on the active tape. Returns (loss, components dict)."""
    if not batch.episodes:
        raise ValueError("empty batch")
    total = None
    pol_sum = val_sum = ent_sum = 0.0
    n_steps = 0
    for ep in batch.episodes:
        records = ep.history.records
        if len(records) < 2:
            continue
        returns = episode_returns(ep)
        masks = ep.masks if ep.masks else [None] * len(returns)
        state = model.encoder.init_state()
        ep_loss = None
        for t, rec in enumerate(records[1:]):
            F, state = model.encoder.fold(
                state, model.encoder.summary(records[t], ep.history.program)
            )
            logprob, entropy = model.head_for(t).score(F, rec.action, mask=masks[t])
            value = model.value_for(t)(F)
            advantage = returns[t] - float(value.data)
            err = value - returns[t]
            term = (
                logprob * (-advantage)
                + (err * err) * config.value_coef
                + entropy * (-config.entropy_coef)
            )
            ep_loss = term if ep_loss is None else ep_loss + term
            pol_sum += -advantage * float(logprob.data)
            val_sum += float(err.data) ** 2
            ent_sum += float(entropy.data)
            n_steps += 1
        if ep_loss is not None:
            total = ep_loss if total is None else total + ep_loss
    if total is None:
        raise ValueError("batch contains no decisions to learn from")
    n_ep = len(batch.episodes)
    loss = total * (1.0 / n_ep)
    components = {
        "policy_loss": pol_sum / n_ep,
        "value_loss": val_sum / n_ep,
        "entropy": ent_sum / max(n_steps, 1),
    }
    return loss, components


def a2c_update(model, batch, config, opt_state=None):
    """One synchronized gradient step from a collected batch. Returns
    (model, UpdateStats); a non-finite loss or gradient skips the step and
    leaves every parameter untouched."""
    if opt_state is None:
        # Bare calls without an explicit optimizer keep Adam moments on the
        # model so repeated updates still accelerate.
        opt_state = getattr(model, "_opt_state", None)
        if opt_state is None or opt_state.lr != config.learning_rate:
            opt_state = OptimizerState(lr=config.learning_rate)
        model._opt_state = opt_state
    mean_return = float(np.mean([sum(ep.rewards()) for ep in batch.episodes]))
    with Tape() as tape:
        loss, parts = batch_loss(model, batch, config)
        if not np.isfinite(loss.data):
            return model, UpdateStats(
                mean_return=mean_return, policy_loss=0.0, value_loss=0.0,
                entropy=0.0, grad_norm=0.0, skipped=True,
            )
        grads = model.params.gradients(tape, loss)
    grads, norm = clip_global_norm(grads, config.clip_norm)
    try:
        optimizer_step(model.params.named(), grads, opt_state)
    except GradientError:
        return model, UpdateStats(
            mean_return=mean_return, policy_loss=parts["policy_loss"],
            value_loss=parts["value_loss"], entropy=parts["entropy"],
            grad_norm=0.0, skipped=True,
        )
    stats = UpdateStats(
        mean_return=mean_return,
        policy_loss=parts["policy_loss"],
        value_loss=parts["value_loss"],
        entropy=parts["entropy"],
        grad_norm=norm,
    )
    return model, stats.validate()


METRICS_HEADER = "update,mean_return,policy_loss,value_loss,entropy,grad_norm,eval_coverage"


class MetricsWriter:
    """Line-per-update CSV stream; eval_coverage is blank off-cadence."""

    def __init__(self, path):
        self.f = open(path, "w")
        self.f.write(METRICS_HEADER + "\n")

    def write(self, update, stats, eval_coverage=None):
        ev = "" if eval_coverage is None else f"{eval_coverage:.10g}"
        self.f.write(
            f"{update},{stats.mean_return:.10g},{stats.policy_loss:.10g},"
            f"{stats.value_loss:.10g},{stats.entropy:.10g},{stats.grad_norm:.10g},{ev}\n"
        )
        self.f.flush()

    def close(self):
        self.f.close()


def zero_shot_coverage(model, env_set, config):
    """Greedy single episode per environment, no parameter change."""
    covs = []
    policy = model.policy(mode="greedy")
    with no_grad():
        for i, env in enumerate(env_set):
            seed = int(np.random.SeedSequence([config.seed, 900_000 + i]).generate_state(1)[0])
            history, _ = run_episode(env, policy, budget=env.budget, seed=seed)
            covs.append(
                env.coverage_fraction()
                if hasattr(env, "coverage_fraction")
                else history.covered_count() / history.normalizer
            )
    return float(np.mean(covs))


def fine_tune(model, env, config, updates, eval_envs=None, eval_every=None, target=None):
    """Continue RL on one environment from the given initialization (the model
    is deep-copied; the caller's parameters never move). Returns the tuned
    model and the list of per-eval coverages; stops early once `target`
    coverage is reached if one is given."""
    tuned = copy.deepcopy(model)
    sampler = lambda rng: env  # noqa: E731 - the fine-tune distribution is this one env
    opt_state = OptimizerState(lr=config.learning_rate)
    curve = []
    for u in range(updates):
        batch = collect_rollouts(tuned, sampler, config, round_index=u)
        tuned, _ = a2c_update(tuned, batch, config, opt_state=opt_state)
        if eval_every and (u + 1) % eval_every == 0:
            cov = zero_shot_coverage(tuned, eval_envs or [env], config)
            curve.append(cov)
            if target is not None and cov >= target:
                break
    return tuned, curve


def evaluate(model, env_set, protocol, config, fine_tune_updates=None):
    """Held-out evaluation. zero_shot: greedy episodes with frozen parameters.
    fine_tune: per-environment RL continuation (budget = fine_tune_updates,
    default config.total_updates), then a greedy episode; the incoming model
    is never mutated."""
    env_set = list(env_set)
    if not env_set:
        raise ValueError("empty environment set")
    if protocol == "zero_shot":
        return zero_shot_coverage(model, env_set, config)
    if protocol == "fine_tune":
        updates = config.total_updates if fine_tune_updates is None else fine_tune_updates
        covs = []
        for env in env_set:
            tuned, _ = fine_tune(model, env, config, updates)
            covs.append(zero_shot_coverage(tuned, [env], config))
        return float(np.mean(covs))
    raise ValueError(f"unknown protocol {protocol!r}")


def train(model, config, eval_envs=None, metrics_path=None, checkpoint_path=None):
    """Run the full loop: collect, update, periodically evaluate zero-shot on
    eval_envs, stream metrics, and checkpoint the best eval model."""
    if config.env_sampler is None:
        raise ValueError("config.env_sampler is required for training")
    writer = MetricsWriter(metrics_path) if metrics_path else None
    opt_state = OptimizerState(lr=config.learning_rate)
    history = []
    best = -1.0
    try:
        for u in range(config.total_updates):
            batch = collect_rollouts(model, config.env_sampler, config, round_index=u)
            model, stats = a2c_update(model, batch, config, opt_state=opt_state)
            ev = None
            if eval_envs and config.eval_every and (u + 1) % config.eval_every == 0:
                ev = zero_shot_coverage(model, eval_envs, config)
                if checkpoint_path and ev > best:
                    best = ev
                    model.save(checkpoint_path, meta={"update": str(u + 1), "eval": f"{ev:.6f}"})
            if writer:
                writer.write(u + 1, stats, ev)
            history.append(stats)
    finally:
        if writer:
            writer.close()
    return model, history
