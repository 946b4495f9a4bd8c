"""Non-learned reference policies: uniform random, randomized depth-first
search, and tabular Q-learning over ground-truth node ids.

Environments drive these through three hooks: current_node() -> stable node
id, outgoing() -> [(action, destination id or None when unknown)], and
reverse_action(a) -> the undoing action or None when the edge is one-way.
reverse_action is only queried right after the move it undoes (position-aware
environments answer for their latest transition); the walker stores the
answer as the frame's return ticket for when it backtracks later.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def random_act(valid_actions, rng):
    """Uniform choice among valid actions."""
    actions = list(valid_actions)
    if not actions:
        raise ValueError("no valid actions to choose from")
    return actions[int(rng.integers(len(actions)))]


class RandomPolicy:
    """run_episode adapter around random_act."""

    def __call__(self, history, env, rng):
        return random_act(env.valid_action_list(), rng)


# ------------------------------------------------------------------ RandDFS


@dataclass
class _Frame:
    node: int
    untried: list  # (action, dest-or-None), consumed in random order
    entry_action: object = None  # action that led here; None at the root
    return_action: object = None  # undoing action, resolved on arrival


@dataclass
class DfsStack:
    """Avoidance is by stack membership only: a node popped off the stack is
    fair game again, so the walker can wander back into finished territory and
    burn budget there. That blindness is the point of this baseline."""

    frames: list = field(default_factory=list)
    on_stack: set = field(default_factory=set)

    def top(self):
        return self.frames[-1] if self.frames else None

    def pop(self):
        frame = self.frames.pop()
        self.on_stack.discard(frame.node)
        return frame


def randdfs_act(stack, env, rng):
    """One depth-first move: follow a random untried edge out of the current
    node that does not lead back onto the stack; with none available,
    backtrack by undoing the entry action. Edges pointing into the stack stay
    untried (their targets may pop later). Returns None once the stack has
    emptied."""
    cur = env.current_node()
    top = stack.top()
    if top is None or top.node != cur:
        raise ValueError(f"stack top does not match current node {cur}")
    untried = top.untried
    candidates = [
        i for i, (_, dest) in enumerate(untried) if dest is None or dest not in stack.on_stack
    ]
    if candidates:
        action, _ = untried.pop(candidates[int(rng.integers(len(candidates)))])
        return action
    if top.entry_action is None:  # root exhausted
        stack.pop()
        return None
    if top.return_action is None:
        raise ValueError(f"cannot backtrack: action {top.entry_action!r} is irreversible")
    stack.pop()
    return top.return_action


class RandDfsPolicy:
    """Stateful DFS walker for run_episode. Tracks arrivals to keep the stack
    aligned with the agent's position; probing an unknown edge that lands on a
    node already on the stack is undone by an immediate reverse move. Arriving
    anywhere off the stack (fresh or previously popped) pushes a new frame."""

    def __init__(self):
        self.stack = DfsStack()
        self.last_action = None
        self.bouncing = False

    def __call__(self, history, env, rng):
        cur = env.current_node()
        top = self.stack.top()
        if top is None:
            # First call, or a restart after the stack ran dry.
            self._push(env, cur, self.last_action)
        elif self.bouncing:
            self.bouncing = False  # back on the stack top after an undo
        elif cur not in self.stack.on_stack:
            self._push(env, cur, self.last_action)
        elif top.node != cur:
            parent = self.stack.frames[-2].node if len(self.stack.frames) >= 2 else None
            if cur == parent and not top.untried:
                # The probe that emptied the frame happened to walk back to the
                # parent; undoing it just to backtrack again would waste two
                # steps, so accept the arrival as the backtrack.
                self.stack.pop()
            else:
                # Unknown edge landed somewhere on the stack: undo it.
                back = env.reverse_action(self.last_action)
                if back is None:
                    raise ValueError(
                        f"cannot return from node {cur}: action {self.last_action!r} is irreversible"
                    )
                self.bouncing = True
                self.last_action = back
                return back
        action = randdfs_act(self.stack, env, rng)
        if action is None:
            # Root exhausted. Take a random step; the next call restarts the
            # stack from wherever that lands.
            action = random_act(env.valid_action_list(), rng)
        self.last_action = action
        return action

    def _push(self, env, node, entry_action):
        ticket = env.reverse_action(entry_action) if entry_action is not None else None
        self.stack.on_stack.add(node)
        self.stack.frames.append(
            _Frame(
                node=node,
                untried=list(env.outgoing()),
                entry_action=entry_action,
                return_action=ticket,
            )
        )


# ----------------------------------------------------------------- tabular Q


@dataclass
class QTable:
    num_actions: int
    alpha: float = 0.1
    gamma: float = 0.95
    values: dict = field(default_factory=dict)

    def row(self, s):
        v = self.values.get(s)
        if v is None:
            v = np.zeros(self.num_actions)
            self.values[s] = v
        return v


def q_update(table, s, a, r, s_next):
    """One-step TD backup Q(s,a) += alpha * (r + gamma * max Q(s') - Q(s,a))."""
    row = table.row(s)
    target = r + table.gamma * float(np.max(table.row(s_next)))
    row[a] += table.alpha * (target - row[a])
    return row[a]


def q_act(table, s, valid_actions, rng=None, epsilon=0.0):
    """Epsilon-greedy over valid actions; greedy ties break to the lowest
    action id so the frozen policy is deterministic."""
    actions = list(valid_actions)
    if not actions:
        raise ValueError("no valid actions")
    if epsilon > 0.0 and rng is not None and rng.random() < epsilon:
        return actions[int(rng.integers(len(actions)))]
    row = table.row(s)
    best = actions[0]
    for a in actions:
        if row[a] > row[best]:
            best = a
    return best


@dataclass
class QConfig:
    episodes: int = 20000
    anneal_episodes: int = 5000
    eps_start: float = 1.0
    eps_end: float = 0.05
    alpha: float = 0.1
    gamma: float = 0.95
    eval_every: int = 500
    eval_episodes: int = 5


def q_train(env, budget, config, seed=0):
    """Train a Q-table on one fixed graph; keeps the best greedy-evaluation
    snapshot seen across training (best-checkpoint reporting)."""
    rng = np.random.default_rng(seed)
    table = QTable(num_actions=env.num_actions, alpha=config.alpha, gamma=config.gamma)
    best_coverage, best_values = -1.0, {}
    for ep in range(config.episodes):
        frac = min(1.0, ep / max(1, config.anneal_episodes))
        epsilon = config.eps_start + frac * (config.eps_end - config.eps_start)
        env.reset(rng)
        for _ in range(budget):
            s = env.q_state()
            a = q_act(table, s, env.valid_action_list(), rng, epsilon)
            before = env.covered_count()
            env.step(a)
            r = (env.covered_count() - before) / env.reward_normalizer
            q_update(table, s, a, r, env.q_state())
            if env.fully_explored():
                break
        if (ep + 1) % config.eval_every == 0:
            cov = q_evaluate(env, table, budget, config.eval_episodes, seed=10_000 + ep)
            if cov > best_coverage:
                best_coverage = cov
                best_values = {s: v.copy() for s, v in table.values.items()}
    table.values = best_values or table.values
    return table, best_coverage


def q_evaluate(env, table, budget, episodes, seed=0):
    rng = np.random.default_rng(seed)
    total = 0.0
    for _ in range(episodes):
        env.reset(rng)
        for _ in range(budget):
            a = q_act(table, env.q_state(), env.valid_action_list())
            env.step(a)
            if env.fully_explored():
                break
        total += env.coverage_fraction()
    return total / episodes
