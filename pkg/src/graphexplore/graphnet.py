"""Graph encoder: gated message passing over typed directed edges, attention
readout to a fixed-width graph vector, plus an unsupervised link-prediction
pretrainer that turns bare graph structure into node features.

The encoder consumes a GraphObservation: the currently known subgraph together
with a per-node coverage bit. The coverage bit is appended to the raw node
features before any learned transformation, so the same encoder weights serve
both "what does the graph look like" and "what is left to visit".
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .tensor import (
    GRUCell,
    Linear,
    MLP,
    OptimizerState,
    ParamSet,
    Tape,
    Tensor,
    clip_global_norm,
    concat,
    embed_lookup,
    matmul,
    no_grad,
    optimizer_step,
    reduce_sum,
    segment_aggregate,
    softmax,
    transpose,
)

MAX_EDGE_TYPES = 8  # one-hot width of the message MLP's type input; environments declare K <= this


@dataclass
class GraphObservation:
    """A (sub)graph plus coverage mask.

    Edges are directed (u, v, k) with type k in 1..num_edge_types; undirected
    environments insert both directions. current_node marks the agent's
    position when the environment has one (None otherwise).
    """

    node_count: int
    node_features: np.ndarray  # (node_count, d_in)
    edges: list  # of (u, v, k)
    coverage: np.ndarray  # (node_count,) of 0/1
    num_edge_types: int
    current_node: int | None = None

    def validate(self):
        n = self.node_count
        if self.node_features.shape[0] != n:
            raise ValueError(f"node_features rows {self.node_features.shape[0]} != node_count {n}")
        if len(self.coverage) != n:
            raise ValueError(f"coverage length {len(self.coverage)} != node_count {n}")
        for u, v, k in self.edges:
            if not (0 <= u < n and 0 <= v < n):
                raise ValueError(f"edge ({u}, {v}) endpoint outside [0, {n})")
            if not (1 <= k <= self.num_edge_types):
                raise ValueError(f"edge type {k} outside 1..{self.num_edge_types}")
        return self

    def is_empty(self):
        return self.node_count == 0


def empty_observation(feature_width, num_edge_types):
    return GraphObservation(
        node_count=0,
        node_features=np.zeros((0, feature_width)),
        edges=[],
        coverage=np.zeros(0),
        num_edge_types=num_edge_types,
    )


def pad_coverage_bit(obs):
    """Node features with the coverage bit appended as one extra column."""
    col = np.asarray(obs.coverage, dtype=np.float64).reshape(-1, 1)
    return np.concatenate([obs.node_features, col], axis=1)


@dataclass
class GraphEmbedding:
    node_embeddings: Tensor  # (n, d)
    graph_vector: Tensor  # (d,)
    attention_weights: Tensor  # (n,)


@dataclass
class GraphNetConfig:
    d: int = 64
    rounds: int = 5
    aggregate: str = "sum"  # sum | mean | max
    message_hidden: tuple = ()  # hidden layer sizes of the message MLP
    feature_width: int = 1  # raw width, before the coverage bit


class GraphNet:
    """Message-passing encoder with shared weights across rounds.

    Per round, each edge (u, v, k) contributes MLP([mu_v, mu_u, onehot(k)]) to
    node v's incoming message; messages aggregate per node (sum/mean/max,
    empty neighborhoods give zero) and a GRU folds the message into the node
    state. Readout is an attention-weighted sum of final node states.
    """

    def __init__(self, params, name, config):
        if config.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {config.rounds}")
        if config.aggregate not in ("sum", "mean", "max"):
            raise ValueError(f"unknown aggregate {config.aggregate!r}")
        self.config = config
        self.name = name
        d = config.d
        in_width = config.feature_width + 1  # + coverage bit
        self.project = (
            Linear(params, f"{name}/project", in_width, d) if in_width != d else None
        )
        msg_sizes = [2 * d + MAX_EDGE_TYPES, *config.message_hidden, d]
        self.message_mlp = MLP(params, f"{name}/message", msg_sizes)
        self.gru = GRUCell(params, f"{name}/gru", d, d)
        self.w_att = params.get_or_init(f"{name}/readout/W_att", (d,), init="normal")
        self.empty_vec = params.get_or_init(f"{name}/empty_graph", (d,), init="normal")

    # -- stages ------------------------------------------------------------

    def project_features(self, obs):
        """Raw features + coverage bit, linearly mapped to width d. These are
        the pre-message-passing node states (round 0)."""
        x = Tensor(pad_coverage_bit(obs))
        if self.project is not None:
            return self.project(x)
        return x

    def propagate(self, h0, obs):
        """L message-passing rounds from initial node states h0 (n, d)."""
        n = obs.node_count
        m = len(obs.edges)
        h = h0
        if m == 0:
            zero_msg = Tensor(np.zeros((n, self.config.d)))
            for _ in range(self.config.rounds):
                h = self.gru(zero_msg, h)
            return h
        edges = np.asarray(obs.edges, dtype=np.intp)
        src, dst, etype = edges[:, 0], edges[:, 1], edges[:, 2]
        if etype.min() < 1 or etype.max() > obs.num_edge_types:
            raise ValueError(
                f"edge type outside 1..{obs.num_edge_types}: {int(etype.min())}..{int(etype.max())}"
            )
        onehot = np.zeros((m, MAX_EDGE_TYPES))
        onehot[np.arange(m), etype - 1] = 1.0
        onehot = Tensor(onehot)
        for _ in range(self.config.rounds):
            inputs = concat([embed_lookup(h, dst), embed_lookup(h, src), onehot], axis=1)
            per_edge = self.message_mlp(inputs)
            msg = segment_aggregate(per_edge, dst, n, reduce=self.config.aggregate)
            h = self.gru(msg, h)
        return h

    def readout(self, node_embeddings):
        """(graph_vector, attention_weights) from final node states."""
        if node_embeddings.data.shape[0] == 0:
            return self.empty_vec, Tensor(np.zeros(0))
        scores = matmul(node_embeddings, self.w_att)
        alpha = softmax(scores, axis=0)
        return matmul(alpha, node_embeddings), alpha

    def encode(self, obs):
        if obs.is_empty():
            return GraphEmbedding(
                node_embeddings=Tensor(np.zeros((0, self.config.d))),
                graph_vector=self.empty_vec,
                attention_weights=Tensor(np.zeros(0)),
            )
        h = self.propagate(self.project_features(obs), obs)
        g, alpha = self.readout(h)
        return GraphEmbedding(node_embeddings=h, graph_vector=g, attention_weights=alpha)


def message_pass(obs, net):
    return net.propagate(net.project_features(obs), obs)


def attention_readout(node_embeddings, net):
    return net.readout(node_embeddings)


def encode_graph(obs, net):
    return net.encode(obs)


# ------------------------------------------------------- text serialization


def obs_to_text(obs):
    lines = [f"nodes={obs.node_count} edge_types={obs.num_edge_types}"]
    for i in range(obs.node_count):
        feats = " ".join(repr(float(x)) for x in obs.node_features[i])
        lines.append(f"v {int(obs.coverage[i])} {feats}".rstrip())
    for u, v, k in obs.edges:
        lines.append(f"e {u} {v} {k}")
    return "\n".join(lines) + "\n"


def obs_from_text(text):
    lines = [ln for ln in text.splitlines() if ln.strip()]
    header = dict(part.split("=") for part in lines[0].split())
    n, num_types = int(header["nodes"]), int(header["edge_types"])
    coverage, features, edges = [], [], []
    for ln in lines[1:]:
        parts = ln.split()
        if parts[0] == "v":
            coverage.append(int(parts[1]))
            features.append([float(x) for x in parts[2:]])
        elif parts[0] == "e":
            edges.append((int(parts[1]), int(parts[2]), int(parts[3])))
        else:
            raise ValueError(f"unrecognized line {ln!r}")
    if len(coverage) != n:
        raise ValueError(f"expected {n} node lines, found {len(coverage)}")
    width = len(features[0]) if features else 0
    if any(len(f) != width for f in features):
        raise ValueError("inconsistent feature widths across node lines")
    return GraphObservation(
        node_count=n,
        node_features=np.asarray(features, dtype=np.float64).reshape(n, width),
        edges=edges,
        coverage=np.asarray(coverage, dtype=np.float64),
        num_edge_types=num_types,
    ).validate()


# ------------------------------------------------------------- pretraining


@dataclass
class PretrainConfig:
    d: int = 16
    rounds: int = 3
    aggregate: str = "sum"
    steps: int = 2000
    batch: int = 16
    lr: float = 1e-3
    seed: int = 0
    log_every: int = 100


@dataclass
class PretrainResult:
    params: ParamSet
    net: GraphNet
    w_dec: Tensor
    losses: list = field(default_factory=list)


def adjacency(obs):
    a = np.zeros((obs.node_count, obs.node_count))
    for u, v, _ in obs.edges:
        a[u, v] = 1.0
    return a


def reconstruction_loss(net, w_dec, obs):
    """Squared error between the adjacency matrix and the bilinear edge scores
    H W H^T of the encoded nodes."""
    h = net.propagate(net.project_features(obs), obs)
    scores = matmul(matmul(h, w_dec), transpose(h))
    diff = scores - Tensor(adjacency(obs))
    return reduce_sum(diff * diff)


def pretrain_structural(sampler, config):
    """Fit encoder + bilinear decoder so node embeddings reconstruct adjacency.

    sampler(rng) must yield featureless GraphObservations (zero node features,
    zero coverage). Returns PretrainResult; raises RuntimeError on a non-finite
    loss with the step number in the message.
    """
    rng = np.random.default_rng(config.seed)
    params = ParamSet(seed=config.seed)
    net_config = GraphNetConfig(
        d=config.d, rounds=config.rounds, aggregate=config.aggregate, feature_width=1
    )
    net = GraphNet(params, "pretrain", net_config)
    w_dec = params.get_or_init("pretrain/W_dec", (config.d, config.d), init="normal")
    state = OptimizerState(lr=config.lr)
    losses = []
    for step in range(config.steps):
        graphs = [sampler(rng) for _ in range(config.batch)]
        with Tape() as tape:
            total = reconstruction_loss(net, w_dec, graphs[0])
            for g in graphs[1:]:
                total = total + reconstruction_loss(net, w_dec, g)
            loss = total * (1.0 / config.batch)
        value = float(loss.data)
        if not np.isfinite(value):
            raise RuntimeError(f"pretraining diverged: non-finite loss at step {step}")
        losses.append(value)
        grads = params.gradients(tape, loss)
        grads, _ = clip_global_norm(grads, 1.0)
        optimizer_step(params.named(), grads, state)
    return PretrainResult(params=params, net=net, w_dec=w_dec, losses=losses)


def structural_embeddings(result, obs):
    """Node embeddings of a featureless graph under pretrained weights."""
    if obs.node_count == 0:
        return np.zeros((0, result.net.config.d))
    bare = GraphObservation(
        node_count=obs.node_count,
        node_features=np.zeros((obs.node_count, 1)),
        edges=obs.edges,
        coverage=np.zeros(obs.node_count),
        num_edge_types=obs.num_edge_types,
    )
    with no_grad():
        h = result.net.propagate(result.net.project_features(bare), bare)
    return h.data


def feature_provider(result):
    """Adapt a PretrainResult into an env feature provider: a frozen callable
    mapping any GraphObservation to an (n, d) array of structural embeddings
    of its bare topology (input features and coverage are ignored)."""

    def provide(obs):
        return structural_embeddings(result, obs)

    provide.width = result.net.config.d
    return provide


def edge_auc(result, graphs):
    """AUC of bilinear edge scores ranking true (unordered) edges above
    non-edges, pooled over the given featureless graphs."""
    pos, neg = [], []
    for obs in graphs:
        h = structural_embeddings(result, obs)
        scores = h @ result.w_dec.data @ h.T
        a = adjacency(obs)
        sym = np.maximum(a, a.T)
        for i in range(obs.node_count):
            for j in range(i + 1, obs.node_count):
                s = 0.5 * (scores[i, j] + scores[j, i])
                (pos if sym[i, j] > 0 else neg).append(s)
    if not pos or not neg:
        raise ValueError("AUC needs at least one edge and one non-edge")
    pos, neg = np.asarray(pos), np.asarray(neg)
    wins = 0.0
    for s in pos:
        wins += np.sum(s > neg) + 0.5 * np.sum(s == neg)
    return float(wins / (len(pos) * len(neg)))
