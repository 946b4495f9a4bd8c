"""Screen-transition exploration: synthetic apps sampled as random graphs and
an offline simulator rebuilt from interaction logs.

A TransitionGraph is a deterministic screen/action/target map. Episodes start
knowing nothing: the observed subgraph holds only visited screens and the
transitions actually taken, so the destination of an untried action is unknown
until the agent commits to it. Coverage is visited screens over all screens,
and the default interaction budget is 15 steps.

reverse_action models a tester's back button: immediately after a transition
the environment can name the action at the new screen that returns to the
previous one (or None when the graph has no such edge, as offline logs of
one-way flows may not).
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field

import numpy as np

from ..graphnet import GraphObservation, empty_observation, structural_embeddings

logger = logging.getLogger(__name__)

NUM_EDGE_TYPES = 2  # 1 = experienced transition, 2 = synthetic reverse orientation


@dataclass
class TransitionGraph:
    """Deterministic screen-transition map; immutable after construction.

    Screen ids and action keys are strings. At most one target per
    (screen, action); every screen is reachable from start (the loaders drop
    the rest).
    """

    screens: tuple
    transitions: dict  # (src, action) -> dst
    start: str

    def __post_init__(self):
        by_screen = {s: [] for s in self.screens}
        for (src, action), dst in self.transitions.items():
            by_screen[src].append((action, dst))
        self._outgoing = {s: tuple(sorted(pairs)) for s, pairs in by_screen.items()}

    def outgoing(self, screen):
        """Outgoing (action, target) pairs sorted by action key."""
        return self._outgoing[screen]

    def out_degree(self, screen):
        return len(self._outgoing[screen])

    def max_out_degree(self):
        return max((len(p) for p in self._outgoing.values()), default=0)

    def __eq__(self, other):
        if not isinstance(other, TransitionGraph):
            return NotImplemented
        return (
            self.screens == other.screens
            and self.transitions == other.transitions
            and self.start == other.start
        )


def _reachable(screens, transitions, start):
    seen = {start}
    queue = [start]
    while queue:
        u = queue.pop()
        for (src, _), dst in transitions.items():
            if src == u and dst not in seen:
                seen.add(dst)
                queue.append(dst)
    return seen


def generate_er_app(n, p=0.1, seed=0):
    """Synthetic app: undirected edges drawn independently with probability p
    over n screens, restricted to the connected component of a uniformly
    chosen start screen. Action k at a screen leads to its k-th smallest
    neighbor, and both directions of an edge are actions."""
    if n < 1:
        raise ValueError(f"need at least one screen, got n={n}")
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"edge probability must be in [0, 1], got {p}")
    rng = np.random.default_rng(seed)
    adj = {i: [] for i in range(n)}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < p:
                adj[i].append(j)
                adj[j].append(i)
    start = int(rng.integers(n))
    component = {start}
    queue = [start]
    while queue:
        u = queue.pop()
        for v in adj[u]:
            if v not in component:
                component.add(v)
                queue.append(v)
    transitions = {}
    for u in component:
        for k, v in enumerate(sorted(adj[u])):
            transitions[(str(u), str(k))] = str(v)
    screens = tuple(sorted(str(u) for u in component))
    return TransitionGraph(screens=screens, transitions=transitions, start=str(start))


def load_transition_log(path):
    """Rebuild a TransitionGraph from a UTF-8 file of JSON records, one per
    line: {"src": str, "dst": str, "action": str}, optionally preceded by a
    single {"start": str} record. Without one, the first record's src is the
    start screen.

    Exact duplicate records collapse silently; records that remap an already
    seen (src, action) to a different target are dropped (first one wins) and
    counted in a logged warning. Screens unreachable from start are dropped
    with a warning. Malformed lines raise with their line number."""
    start = None
    mapping = {}
    seen = set()
    order = []
    conflicts = 0
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if not line.strip():
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as e:
                raise ValueError(f"line {lineno}: not a valid record: {e.msg}") from None
            if not isinstance(rec, dict):
                raise ValueError(f"line {lineno}: expected an object record")
            if set(rec) == {"start"}:
                if mapping:
                    raise ValueError(f"line {lineno}: start record after transitions")
                if start is not None:
                    raise ValueError(f"line {lineno}: duplicate start record")
                if not isinstance(rec["start"], str):
                    raise ValueError(f"line {lineno}: start must be a string")
                start = rec["start"]
                continue
            if set(rec) != {"src", "dst", "action"}:
                raise ValueError(
                    f"line {lineno}: expected keys src/dst/action or start, got {sorted(rec)}"
                )
            for key in ("src", "dst", "action"):
                if not isinstance(rec[key], str):
                    raise ValueError(f"line {lineno}: {key} must be a string")
            triple = (rec["src"], rec["action"], rec["dst"])
            if triple in seen:
                continue
            seen.add(triple)
            key = (rec["src"], rec["action"])
            if key in mapping:
                conflicts += 1
                continue
            mapping[key] = rec["dst"]
            order.append(key)
            if start is None:
                start = rec["src"]
    if start is None:
        raise ValueError(f"empty transition log {path}: no start screen derivable")
    if conflicts:
        logger.warning(
            "transition log %s: dropped %d conflicting duplicate record(s), kept first targets",
            path,
            conflicts,
        )
    screens = {start}
    for (src, _), dst in mapping.items():
        screens.add(src)
        screens.add(dst)
    reachable = _reachable(screens, mapping, start)
    dropped = screens - reachable
    if dropped:
        logger.warning(
            "transition log %s: dropped %d screen(s) unreachable from %r",
            path,
            len(dropped),
            start,
        )
    kept = {k: v for k, v in mapping.items() if k[0] in reachable}
    return TransitionGraph(screens=tuple(sorted(reachable)), transitions=kept, start=start)


def dump_transition_log(graph, path):
    """Write a graph as a reloadable transition log (start record first,
    transitions sorted for determinism)."""
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"start": graph.start}) + "\n")
        for (src, action), dst in sorted(graph.transitions.items()):
            f.write(json.dumps({"src": src, "dst": dst, "action": action}) + "\n")


def synthesize_walk_log(graph, path, walks=20, steps=30, seed=0):
    """Proxy for recorded user sessions: uniform random walks over a graph,
    logged as transition records. The reloaded graph is the experienced
    subgraph of the original."""
    rng = np.random.default_rng(seed)
    with open(path, "w", encoding="utf-8") as f:
        f.write(json.dumps({"start": graph.start}) + "\n")
        for _ in range(walks):
            cur = graph.start
            for _ in range(steps):
                out = graph.outgoing(cur)
                if not out:
                    break
                action, dst = out[int(rng.integers(len(out)))]
                f.write(json.dumps({"src": cur, "dst": dst, "action": action}) + "\n")
                cur = dst


# ------------------------------------------------------------------ episodes


@dataclass
class AppState:
    current: str
    visited: set
    node_ids: dict  # screen -> observation node id, in visit order
    node_order: list
    experienced: list = field(default_factory=list)  # (src, action, dst), first-take order
    known: set = field(default_factory=set)  # (src, action) pairs already taken
    last_arrival: tuple = None  # (prev screen, landing screen) of the latest step
    steps: int = 0

    def admit(self, screen):
        if screen not in self.node_ids:
            self.node_ids[screen] = len(self.node_order)
            self.node_order.append(screen)


def initial_state(graph):
    return AppState(
        current=graph.start,
        visited={graph.start},
        node_ids={graph.start: 0},
        node_order=[graph.start],
    )


def step(graph, state, action_index):
    """Take the action_index-th outgoing action of the current screen. Returns
    1 if the target screen is newly visited, else 0."""
    out = graph.outgoing(state.current)
    if not 0 <= action_index < len(out):
        raise ValueError(
            f"invalid action {action_index} at screen {state.current!r} "
            f"({len(out)} available)"
        )
    action, dst = out[action_index]
    newly = 0 if dst in state.visited else 1
    if (state.current, action) not in state.known:
        state.known.add((state.current, action))
        state.experienced.append((state.current, action, dst))
    state.visited.add(dst)
    state.admit(dst)
    state.last_arrival = (state.current, dst)
    state.current = dst
    state.steps += 1
    return newly


def observe(state, feature_provider=None):
    """Belief graph: visited screens plus experienced transitions. Every node
    carries the coverage bit (visited implies covered here); a synthetic
    reverse edge (type 2) backs any one-way experienced transition so messages
    flow both directions."""
    n = len(state.node_order)
    forward = set()
    for src, _, dst in state.experienced:
        forward.add((state.node_ids[src], state.node_ids[dst]))
    edges = [(u, v, 1) for u, v in sorted(forward)]
    edges.extend(
        (v, u, 2) for u, v in sorted(forward) if (v, u) not in forward
    )
    coverage = np.ones(n)
    is_current = np.zeros((n, 1))
    is_current[state.node_ids[state.current], 0] = 1.0
    if feature_provider is not None:
        bare = GraphObservation(
            node_count=n,
            node_features=np.zeros((n, 1)),
            edges=edges,
            coverage=coverage,
            num_edge_types=NUM_EDGE_TYPES,
        )
        features = np.concatenate([feature_provider(bare), is_current], axis=1)
    else:
        features = is_current
    return GraphObservation(
        node_count=n,
        node_features=features,
        edges=edges,
        coverage=coverage,
        num_edge_types=NUM_EDGE_TYPES,
    )


def screen_features(observed, pretrain):
    """Structural embeddings of the observed subgraph, one row per screen,
    from the unsupervised pretrainer; input features are ignored so only the
    discovered topology matters."""
    return structural_embeddings(pretrain, observed)


class AppEnv:
    """Episode adapter. `source` is a fixed TransitionGraph or a
    callable(rng) -> TransitionGraph sampled fresh each reset. The initial
    observation is the empty graph; the start screen's coverage is earned by
    the first step's reward. Rewards normalize by the screen count.

    num_actions fixes the policy-facing action width: action i means the i-th
    entry of the current screen's sorted outgoing list, with the mask covering
    i >= out-degree. Sampled sources must state it up front; a fixed graph
    defaults to its own max out-degree."""

    num_edge_types = NUM_EDGE_TYPES
    constant_graph = False

    def __init__(self, source, budget=15, feature_provider=None, num_actions=None):
        self.source = source
        self.budget = budget
        self.feature_provider = feature_provider
        self.graph = None if callable(source) else source
        if num_actions is None:
            if self.graph is None:
                raise ValueError("num_actions is required for sampled graph sources")
            num_actions = self.graph.max_out_degree()
        self.num_actions = num_actions
        self.state = None
        if self.graph is not None:
            self._adopt(self.graph)

    def _adopt(self, graph):
        if graph.max_out_degree() > self.num_actions:
            raise ValueError(
                f"graph max out-degree {graph.max_out_degree()} exceeds "
                f"action width {self.num_actions}"
            )
        self.graph = graph
        self.reward_normalizer = float(len(graph.screens))

    def feature_width(self):
        extra = self.feature_provider.width if self.feature_provider is not None else 0
        return extra + 1  # + is-current column

    def reset(self, rng):
        if callable(self.source):
            self._adopt(self.source(rng))
        self.state = initial_state(self.graph)
        return empty_observation(self.feature_width(), NUM_EDGE_TYPES)

    def observe(self):
        return observe(self.state, self.feature_provider)

    def step(self, action_index):
        step(self.graph, self.state, action_index)
        return self.observe()

    def action_mask(self):
        mask = np.zeros(self.num_actions, dtype=bool)
        mask[: self.graph.out_degree(self.state.current)] = True
        return mask

    def fully_explored(self):
        # A dead-end screen (offline logs of one-way flows) also ends the
        # episode: no action can change anything further.
        return len(self.state.visited) == len(self.graph.screens) or (
            self.graph.out_degree(self.state.current) == 0
        )

    def coverage_fraction(self):
        return len(self.state.visited) / len(self.graph.screens)

    def covered_count(self):
        return len(self.state.visited)

    # Hooks for the non-learned policies.

    def valid_action_list(self):
        return list(range(self.graph.out_degree(self.state.current)))

    def current_node(self):
        return self.state.node_ids[self.state.current]

    def outgoing(self):
        pairs = []
        for i, (action, dst) in enumerate(self.graph.outgoing(self.state.current)):
            known = (self.state.current, action) in self.state.known
            pairs.append((i, self.state.node_ids[dst] if known else None))
        return pairs

    def reverse_action(self, action_index):
        """Index of the action at the current screen that returns to the
        screen the latest step came from; None when no edge leads back."""
        if self.state.last_arrival is None:
            return None
        prev, _ = self.state.last_arrival
        for i, (_, dst) in enumerate(self.graph.outgoing(self.state.current)):
            if dst == prev:
                return i
        return None

    def q_state(self):
        return self.state.current


def er_app_for_seed(seed):
    """One dataset draw: app size uniform in [15, 20], then an independent
    generator seed. Keyed by a single integer so evaluation sets are nameable
    by seed ranges."""
    rng = np.random.default_rng(seed)
    n = int(rng.integers(15, 21))
    return generate_er_app(n, 0.1, seed=int(rng.integers(2 ** 62)))


def heldout_er_apps(count=100, start_seed=16001, min_screens=15):
    """The fixed evaluation set: walk seeds upward from start_seed, keeping
    apps that actually have min_screens+ reachable screens (sparse draws whose
    start component is smaller are not representative apps). Returns (apps,
    seeds); the seeds key per-episode randomness."""
    apps, seeds, s = [], [], start_seed
    while len(apps) < count:
        g = er_app_for_seed(s)
        if len(g.screens) >= min_screens:
            apps.append(g)
            seeds.append(s)
        s += 1
    return apps, seeds
