"""Coverage-episode machinery: rewards, objectives, interaction histories, and
the configurable history encoder F(h_t) that turns a history into the policy's
input vector.

Episode layout: record 0 is always (null action, initial observation, reward
0). In environments that start with an empty belief graph, the first decision
is made on that empty graph via the encoder's learned empty-graph vector; the
start position's coverage is then counted in the first step's reward, which
keeps the reward sum exactly equal to the coverage objective.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .graphnet import GraphObservation
from .tensor import (
    Embedding,
    LSTMCell,
    Linear,
    Tensor,
    concat,
    embed_lookup,
    no_grad,
    reduce_mean,
    reshape,
    slice_,
)


def _row(t):
    """(1, d) -> (d,)."""
    return reshape(t, (t.data.shape[1],))


@dataclass
class StepRecord:
    """One history entry (x_t, G_t, c_t, r_t). action is the raw environment
    action (None for the initial record); action_encoding optionally caches
    the rollout-time g_x(x_t) vector for encoders that want it without a
    parameter pass."""

    action: object
    observation: GraphObservation
    reward: float
    action_encoding: np.ndarray | None = None


@dataclass
class EpisodeHistory:
    records: list  # of StepRecord; records[0].action is None
    budget: int
    normalizer: float
    program: object = None  # static program under test, for program-conditioned envs

    def __len__(self):
        return len(self.records)

    def last(self):
        return self.records[-1]

    def covered_count(self):
        return float(np.sum(self.records[-1].observation.coverage))


class CoverageRegressionError(ValueError):
    pass


def compute_reward(prev, nxt, normalizer):
    """Newly covered node count over the normalizer. Node ids are stable, so
    coverage may only switch 0 -> 1; anything else is an invariant breach."""
    n_prev = prev.node_count
    if nxt.node_count < n_prev:
        raise CoverageRegressionError(
            f"node set shrank: {n_prev} -> {nxt.node_count}"
        )
    for i in range(n_prev):
        if prev.coverage[i] > nxt.coverage[i]:
            raise CoverageRegressionError(f"coverage regressed at node {i}")
    gained = float(np.sum(nxt.coverage) - np.sum(prev.coverage))
    return gained / normalizer


def episode_objective(history):
    """Final covered fraction, Σ_v c_T(v) / normalizer. Telescopes to the sum
    of per-step rewards because record 0 has zero coverage."""
    covered = history.covered_count()
    if covered == 0:
        # Covers the bare-initial-history case, where a budget of 0 may leave
        # the fallback normalizer degenerate as well.
        return 0.0
    return covered / history.normalizer


def validate_history(history, constant_graph=False):
    """Checks the structural invariants of a completed history: rewards in
    [0,1], monotone coverage, and either monotone node sets (growing-graph
    setting) or a fixed node set (constant-graph setting)."""
    prev = None
    for rec in history.records:
        if not (0.0 <= rec.reward <= 1.0):
            raise ValueError(f"reward {rec.reward} outside [0, 1]")
        obs = rec.observation
        if prev is not None:
            if constant_graph:
                if obs.node_count != prev.node_count:
                    raise ValueError("node set changed in constant-graph setting")
            elif obs.node_count < prev.node_count:
                raise ValueError("node set shrank")
            for i in range(min(prev.node_count, obs.node_count)):
                if prev.coverage[i] > obs.coverage[i]:
                    raise ValueError(f"coverage regressed at node {i}")
        prev = obs
    if len(history.records) > history.budget + 1:
        raise ValueError(f"history length {len(history.records)} exceeds budget+1")
    return history


# --------------------------------------------------------- history encoding


TEMPORAL_MODES = ("last_step", "autoregressive")
CONDITIONING = ("node", "pool", "graph")
PROGRAM_CONDITIONING = ("uncond", "envcond", "bow", "bilstm", "gnn")


@dataclass
class HistoryEncoderConfig:
    temporal_mode: str = "autoregressive"
    conditioning: str = "graph"
    program_conditioning: str = "gnn"  # gnn = defer to `conditioning` on the coverage graph
    recurrent_width: int = 64
    action_width: int = 16
    action_vocab: int = 0  # > 0 enables the finite-action embedding table
    token_vocab: int = 0  # > 0 enables bow/bilstm program-token encoders

    def validate(self):
        if self.temporal_mode not in TEMPORAL_MODES:
            raise ValueError(f"temporal_mode {self.temporal_mode!r} not in {TEMPORAL_MODES}")
        if self.conditioning not in CONDITIONING:
            raise ValueError(f"conditioning {self.conditioning!r} not in {CONDITIONING}")
        if self.program_conditioning not in PROGRAM_CONDITIONING:
            raise ValueError(
                f"program_conditioning {self.program_conditioning!r} not in {PROGRAM_CONDITIONING}"
            )
        return self


class HistoryEncoder:
    """F(h_t): per-record summaries folded through time.

    Summary = [conditioning part, g_x(action)], where the conditioning part is
    one of: the current node's pre-message-passing features (node), the mean of
    covered nodes' pre-message-passing features (pool), or the full
    message-passing readout (graph). Program conditioning overrides the
    conditioning part for program environments: uncond/envcond zero it (envcond
    additionally appends the previous reward), bow/bilstm replace it with a
    static program-text embedding, gnn keeps the graph-based part.

    temporal_mode last_step returns the newest summary; autoregressive folds
    summaries through an LSTM whose hidden state is F(h_t).
    """

    def __init__(self, params, name, config, graph_net, action_encoder=None):
        config.validate()
        self.config = config
        self.net = graph_net
        self.d = graph_net.config.d
        if action_encoder is not None:
            self.encode_action = action_encoder
            self.null_action = params.get_or_init(
                f"{name}/null_action", (config.action_width,), init="normal"
            )
        elif config.action_vocab > 0:
            table = Embedding(params, f"{name}/actions", config.action_vocab + 1, config.action_width)
            self.encode_action = lambda a: _row(table([int(a)]))
            self.null_action = table.table  # row [vocab] is the null action
            self._null_row = config.action_vocab
        else:
            raise ValueError("need either an action_encoder or a positive action_vocab")
        self._external_encoder = action_encoder is not None
        if config.program_conditioning in ("bow", "bilstm"):
            if config.token_vocab <= 0:
                raise ValueError("bow/bilstm conditioning needs token_vocab > 0")
            self.token_embed = Embedding(params, f"{name}/tokens", config.token_vocab, self.d)
            if config.program_conditioning == "bilstm":
                self.fwd = LSTMCell(params, f"{name}/prog_fwd", self.d, self.d)
                self.bwd = LSTMCell(params, f"{name}/prog_bwd", self.d, self.d)
                self.prog_out = Linear(params, f"{name}/prog_out", 2 * self.d, self.d)
        width = self.summary_width()
        if config.temporal_mode == "autoregressive":
            self.cell = LSTMCell(params, f"{name}/fold", width, config.recurrent_width)

    def summary_width(self):
        w = self.d + self.config.action_width
        if self.config.program_conditioning == "envcond":
            w += 1
        return w

    def output_width(self):
        if self.config.temporal_mode == "autoregressive":
            return self.config.recurrent_width
        return self.summary_width()

    # -- pieces -------------------------------------------------------------

    def action_part(self, record):
        if record.action is None:
            if self._external_encoder:
                return self.null_action
            return _row(embed_lookup(self.null_action, [self._null_row]))
        return self.encode_action(record.action)

    def conditioning_part(self, obs, program):
        mode = self.config.program_conditioning
        if mode in ("uncond", "envcond"):
            return Tensor(np.zeros(self.d))
        if mode == "bow":
            return self._bow(program)
        if mode == "bilstm":
            return self._bilstm(program)
        # gnn: condition on the coverage graph per `conditioning`
        cond = self.config.conditioning
        if obs.is_empty():
            if cond == "graph":
                return self.net.empty_vec
            return Tensor(np.zeros(self.d))
        if cond == "graph":
            return self.net.encode(obs).graph_vector
        feats = self.net.project_features(obs)
        if cond == "node":
            if obs.current_node is None:
                raise ValueError("node conditioning needs a designated current node")
            return _row(embed_lookup(feats, [obs.current_node]))
        covered = np.flatnonzero(np.asarray(obs.coverage) > 0)
        if covered.size == 0:
            return Tensor(np.zeros(self.d))
        return reduce_mean(embed_lookup(feats, covered), axis=0)

    def _tokens(self, program):
        if program is None:
            return []
        return list(program["tokens"]) if isinstance(program, dict) else list(program)

    def _bow(self, program):
        tokens = self._tokens(program)
        if not tokens:
            return Tensor(np.zeros(self.d))
        return reduce_mean(self.token_embed(np.asarray(tokens, dtype=np.intp)), axis=0)

    def _bilstm(self, program):
        tokens = self._tokens(program)
        if not tokens:
            return Tensor(np.zeros(self.d))
        embs = self.token_embed(np.asarray(tokens, dtype=np.intp))
        rows = [_row(slice_(embs, i, i + 1, axis=0)) for i in range(len(tokens))]
        hf, cf = self.fwd.zero_state()
        for r in rows:
            hf, cf = self.fwd(r, (hf, cf))
        hb, cb = self.bwd.zero_state()
        for r in reversed(rows):
            hb, cb = self.bwd(r, (hb, cb))
        return self.prog_out(concat([hf, hb], axis=0))

    def summary(self, record, program=None):
        parts = [self.conditioning_part(record.observation, program), self.action_part(record)]
        if self.config.program_conditioning == "envcond":
            parts.append(Tensor(np.asarray([record.reward])))
        return concat(parts, axis=0)

    # -- temporal fold ------------------------------------------------------

    def init_state(self):
        if self.config.temporal_mode == "autoregressive":
            return self.cell.zero_state()
        return None

    def fold(self, state, summ):
        """Consume one summary; returns (F, new state)."""
        if self.config.temporal_mode == "autoregressive":
            h, c = self.cell(summ, state)
            return h, (h, c)
        return summ, summ

    def encode_prefixes(self, history):
        """[F(h_0), ..., F(h_t)]: the encoding after each record. The decision
        that produced record τ's action was made from F(h_{τ-1})."""
        outs = []
        state = self.init_state()
        for rec in history.records:
            f, state = self.fold(state, self.summary(rec, history.program))
            outs.append(f)
        return outs

    def encode(self, history):
        if not history.records:
            raise ValueError("cannot encode an empty history")
        if self.config.temporal_mode == "last_step":
            return self.summary(history.records[-1], history.program)
        return self.encode_prefixes(history)[-1]


def encode_history(history, config, params, graph_encoder, action_encoder=None):
    """One-shot F(h_t) with encoder blocks materialized from `params`."""
    enc = HistoryEncoder(params, "hist", config, graph_encoder, action_encoder)
    return enc.encode(history)


# ------------------------------------------------------------ rollout loop


@dataclass
class EpisodeTrajectory:
    """One episode's history plus the per-decision policy outputs, aligned
    with records[1:]."""

    history: EpisodeHistory
    logprobs: list = field(default_factory=list)
    values: list = field(default_factory=list)
    masks: list = field(default_factory=list)  # per-decision action masks (or None)
    terminated_early: bool = False  # full coverage before the budget ran out
    seed: int | None = None

    @property
    def final_coverage(self):
        return episode_objective(self.history)

    def rewards(self):
        return [rec.reward for rec in self.history.records[1:]]


@dataclass
class TrajectoryBatch:
    episodes: list = field(default_factory=list)

    def __len__(self):
        return len(self.episodes)

    def mean_coverage(self):
        return float(np.mean([ep.final_coverage for ep in self.episodes]))

    def validate(self):
        for ep in self.episodes:
            if abs(sum(ep.rewards()) - ep.final_coverage) > 1e-9:
                raise ValueError("reward sum does not telescope to final coverage")
            n = len(ep.history.records) - 1
            for seq in (ep.logprobs, ep.values, ep.masks):
                if len(seq) not in (0, n):
                    raise ValueError("policy outputs misaligned with records")
        return self


class EpisodeStepError(RuntimeError):
    def __init__(self, step, cause):
        super().__init__(f"environment failure at step {step}: {cause}")
        self.step = step


def run_episode(env, policy, budget, seed):
    """Roll one episode. `policy(history, env, rng)` returns an action or an
    (action, info) pair where info may carry 'logprob' and 'value' floats.
    Stops after the budget is spent or as soon as the environment reports full
    coverage following a step."""
    rng = np.random.default_rng(seed)
    obs0 = env.reset(rng)
    history = EpisodeHistory(
        records=[StepRecord(action=None, observation=obs0, reward=0.0)],
        budget=budget,
        normalizer=env.reward_normalizer,
        program=getattr(env, "program", None),
    )
    traj = EpisodeTrajectory(history=history, seed=seed)
    if env.fully_explored():
        # Nothing left to discover (e.g. a single-cell world whose start is
        # covered by arrival); no valid action need exist, so stop at t=0.
        traj.terminated_early = True
        return history, traj
    with no_grad():
        for t in range(1, budget + 1):
            out = policy(history, env, rng)
            action, info = out if isinstance(out, tuple) else (out, {})
            try:
                obs = env.step(action)
            except Exception as e:
                raise EpisodeStepError(t, e) from e
            reward = compute_reward(history.last().observation, obs, history.normalizer)
            history.records.append(StepRecord(action=action, observation=obs, reward=reward))
            if "logprob" in info:
                traj.logprobs.append(info["logprob"])
            if "value" in info:
                traj.values.append(info["value"])
            if "mask" in info:
                traj.masks.append(info["mask"])
            if env.fully_explored():
                traj.terminated_early = True
                break
    return history, traj


def dump_trajectories(path, batch):
    """Tab-separated episode dump: episode_id, t, action_repr, reward,
    cumulative_coverage."""
    with open(path, "w") as f:
        for ep_id, ep in enumerate(batch.episodes):
            cum = 0.0
            for t, rec in enumerate(ep.history.records):
                cum += rec.reward
                action_repr = "-" if rec.action is None else str(rec.action)
                f.write(f"{ep_id}\t{t}\t{action_repr}\t{rec.reward:.10g}\t{cum:.10g}\n")
