"""Procedurally generated 2D grid mazes with partial observability.

The agent sees the subgraph it has traversed plus 1-hop vision from the
current cell: adjacent open cells appear as frontier nodes (coverage bit 0)
whose own walls stay unknown until visited. Observations carry no coordinates;
node identity is discovery order, and edges are typed by compass direction so
the agent can tell which action leads along which edge.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..graphnet import GraphObservation, empty_observation

N, E, S, W = 0, 1, 2, 3
DIRECTIONS = (N, E, S, W)
DIR_NAMES = "NESW"
DELTAS = ((-1, 0), (0, 1), (1, 0), (0, -1))
OPPOSITE = (S, W, N, E)
NUM_EDGE_TYPES = 4  # edge type = direction + 1


@dataclass
class Maze:
    width: int
    height: int
    passages: np.ndarray  # (height, width) uint8, bit d set = open toward DELTAS[d]
    start: tuple

    def is_open(self, r, c, d):
        return bool(self.passages[r, c] >> d & 1)

    def open_dirs(self, r, c):
        return [d for d in DIRECTIONS if self.is_open(r, c, d)]

    def cells(self):
        return self.width * self.height

    def passage_count(self):
        return int(np.sum(np.unpackbits(self.passages.reshape(-1, 1), axis=1))) // 2


def in_bounds(maze, r, c):
    return 0 <= r < maze.height and 0 <= c < maze.width


def generate_maze(width, height, loop_prob, seed):
    """Randomized-DFS spanning tree over the cell grid, then each remaining
    interior wall is removed independently with probability loop_prob."""
    if width < 1 or height < 1:
        raise ValueError(f"maze dimensions must be >= 1, got {width}x{height}")
    if not (0.0 <= loop_prob <= 1.0):
        raise ValueError(f"loop_prob {loop_prob} outside [0, 1]")
    rng = np.random.default_rng(seed)
    passages = np.zeros((height, width), dtype=np.uint8)
    start = (int(rng.integers(height)), int(rng.integers(width)))
    visited = np.zeros((height, width), dtype=bool)
    visited[start] = True
    stack = [start]
    while stack:
        r, c = stack[-1]
        options = []
        for d in DIRECTIONS:
            nr, nc = r + DELTAS[d][0], c + DELTAS[d][1]
            if 0 <= nr < height and 0 <= nc < width and not visited[nr, nc]:
                options.append((d, nr, nc))
        if not options:
            stack.pop()
            continue
        d, nr, nc = options[int(rng.integers(len(options)))]
        passages[r, c] |= 1 << d
        passages[nr, nc] |= 1 << OPPOSITE[d]
        visited[nr, nc] = True
        stack.append((nr, nc))
    if loop_prob > 0.0:
        for r in range(height):
            for c in range(width):
                for d in (E, S):  # each interior wall considered once
                    nr, nc = r + DELTAS[d][0], c + DELTAS[d][1]
                    if nr < height and nc < width and not passages[r, c] >> d & 1:
                        if rng.random() < loop_prob:
                            passages[r, c] |= 1 << d
                            passages[nr, nc] |= 1 << OPPOSITE[d]
    return Maze(width=width, height=height, passages=passages, start=start)


@dataclass
class MazeState:
    """Exploration state. node_ids gives every seen cell a stable id in
    discovery order (start=0, then sightings in N,E,S,W order)."""

    position: tuple
    visited: set
    frontier: set
    steps: int = 0
    node_ids: dict = field(default_factory=dict)
    node_order: list = field(default_factory=list)

    def admit(self, cell):
        if cell not in self.node_ids:
            self.node_ids[cell] = len(self.node_order)
            self.node_order.append(cell)


def initial_state(maze):
    state = MazeState(position=maze.start, visited={maze.start}, frontier=set())
    state.admit(maze.start)
    _look_around(maze, state)
    return state


def _look_around(maze, state):
    r, c = state.position
    for d in maze.open_dirs(r, c):
        cell = (r + DELTAS[d][0], c + DELTAS[d][1])
        state.admit(cell)
        if cell not in state.visited:
            state.frontier.add(cell)


def valid_actions(maze, state):
    r, c = state.position
    return maze.open_dirs(r, c)


def step(maze, state, direction):
    """Move one cell along an open passage (in place). Returns (state, delta)
    where delta is 1 when the destination was unvisited, else 0."""
    r, c = state.position
    if direction not in DIRECTIONS:
        raise ValueError(f"unknown direction {direction!r}")
    if not maze.is_open(r, c, direction):
        raise ValueError(f"blocked direction {DIR_NAMES[direction]} from {(r, c)}")
    dest = (r + DELTAS[direction][0], c + DELTAS[direction][1])
    delta = 0 if dest in state.visited else 1
    state.position = dest
    state.visited.add(dest)
    state.frontier.discard(dest)
    state.steps += 1
    _look_around(maze, state)
    return state, delta


def observe(maze, state, feature_provider=None):
    """Belief graph: visited + frontier nodes, direction-typed edges for every
    passage incident to a visited cell. Features are the provider's structural
    embedding (if any) plus an is-current column; the coverage bit rides in the
    observation's coverage mask."""
    n = len(state.node_order)
    coverage = np.zeros(n)
    edges = []
    for cell in state.node_order:
        if cell not in state.visited:
            continue
        u = state.node_ids[cell]
        coverage[u] = 1.0
        r, c = cell
        for d in maze.open_dirs(r, c):
            other = (r + DELTAS[d][0], c + DELTAS[d][1])
            v = state.node_ids.get(other)
            if v is None:
                continue
            edges.append((u, v, d + 1))
            if other not in state.visited:  # frontier won't emit its own side
                edges.append((v, u, OPPOSITE[d] + 1))
    current = state.node_ids[state.position]
    is_current = np.zeros((n, 1))
    is_current[current, 0] = 1.0
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
        current_node=current,
    )


def coverage_fraction(maze, state):
    return len(state.visited) / maze.cells()


# ----------------------------------------------------------------- rendering


def render_ascii(maze, state=None):
    """(2h+1) x (2w+1) character grid: '#' walls, '.' open, '@' agent,
    '*' visited cells."""
    h, w = maze.height, maze.width
    grid = [["#"] * (2 * w + 1) for _ in range(2 * h + 1)]
    for r in range(h):
        for c in range(w):
            ch = "."
            if state is not None:
                if (r, c) == state.position:
                    ch = "@"
                elif (r, c) in state.visited:
                    ch = "*"
            elif (r, c) == maze.start:
                ch = "@"
            grid[2 * r + 1][2 * c + 1] = ch
            if maze.is_open(r, c, E):
                grid[2 * r + 1][2 * c + 2] = "."
            if maze.is_open(r, c, S):
                grid[2 * r + 2][2 * c + 1] = "."
    return "\n".join("".join(row) for row in grid) + "\n"


def parse_ascii(text):
    """Inverse of render_ascii. Returns (Maze, visited set). The agent cell
    counts as visited; a render without state yields visited = {start}."""
    rows = [list(line) for line in text.splitlines() if line]
    if len(rows) < 3 or len(rows) % 2 == 0 or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("malformed maze rendering")
    h, w = len(rows) // 2, len(rows[0]) // 2
    passages = np.zeros((h, w), dtype=np.uint8)
    start = None
    visited = set()
    for r in range(h):
        for c in range(w):
            ch = rows[2 * r + 1][2 * c + 1]
            if ch == "@":
                start = (r, c)
                visited.add((r, c))
            elif ch == "*":
                visited.add((r, c))
            if c + 1 < w and rows[2 * r + 1][2 * c + 2] == ".":
                passages[r, c] |= 1 << E
                passages[r, c + 1] |= 1 << W
            if r + 1 < h and rows[2 * r + 2][2 * c + 1] == ".":
                passages[r, c] |= 1 << S
                passages[r + 1, c] |= 1 << N
    if start is None:
        raise ValueError("rendering has no agent cell")
    return Maze(width=w, height=h, passages=passages, start=start), visited


# ---------------------------------------------------------------- maze files


def save_maze(path, maze):
    with open(path, "w") as f:
        f.write(f"maze {maze.width} {maze.height} {maze.start[0]} {maze.start[1]}\n")
        for r in range(maze.height):
            f.write(" ".join(f"{maze.passages[r, c]:x}" for c in range(maze.width)) + "\n")


def load_maze(path):
    with open(path) as f:
        header = f.readline().split()
        if len(header) != 5 or header[0] != "maze":
            raise ValueError(f"bad maze header: {header}")
        w, h, sr, sc = map(int, header[1:])
        cells = f.read().split()
    if len(cells) != w * h:
        raise ValueError(f"expected {w * h} cell masks, found {len(cells)}")
    passages = np.array([int(x, 16) for x in cells], dtype=np.uint8).reshape(h, w)
    maze = Maze(width=w, height=h, passages=passages, start=(sr, sc))
    _check_symmetric(maze)
    return maze


def _check_symmetric(maze):
    for r in range(maze.height):
        for c in range(maze.width):
            for d in DIRECTIONS:
                nr, nc = r + DELTAS[d][0], c + DELTAS[d][1]
                if maze.is_open(r, c, d):
                    if not in_bounds(maze, nr, nc):
                        raise ValueError(f"cell {(r, c)} opens outward {DIR_NAMES[d]}")
                    if not maze.is_open(nr, nc, OPPOSITE[d]):
                        raise ValueError(f"asymmetric passage at {(r, c)} {DIR_NAMES[d]}")


# ------------------------------------------------------------ env interface


class MazeEnv:
    """Episode adapter. `source` is a fixed Maze or a callable(rng) -> Maze
    sampled fresh each reset. The initial observation is the empty graph; the
    start cell's coverage is earned by the first step's reward."""

    num_actions = 4
    num_edge_types = NUM_EDGE_TYPES
    constant_graph = False

    def __init__(self, source, budget, feature_provider=None, hide_destinations=False):
        self.source = source
        self.budget = budget
        self.feature_provider = feature_provider
        # hide_destinations withholds neighbor ids from outgoing(), so walker
        # baselines must probe doors to learn where they lead. The benchmark
        # protocol evaluates the depth-first walker this way.
        self.hide_destinations = hide_destinations
        self.reward_normalizer = float(budget)
        self.maze = None
        self.state = None

    def feature_width(self):
        extra = self.feature_provider.width if self.feature_provider is not None else 0
        return extra + 1  # + is-current column

    def reset(self, rng):
        self.maze = self.source(rng) if callable(self.source) else self.source
        self.state = initial_state(self.maze)
        return empty_observation(self.feature_width(), NUM_EDGE_TYPES)

    def observe(self):
        return observe(self.maze, self.state, self.feature_provider)

    def step(self, direction):
        step(self.maze, self.state, direction)
        return self.observe()

    def action_mask(self):
        mask = np.zeros(4, dtype=bool)
        for d in valid_actions(self.maze, self.state):
            mask[d] = True
        return mask

    def fully_explored(self):
        return len(self.state.visited) == self.maze.cells()

    def coverage_fraction(self):
        return coverage_fraction(self.maze, self.state)

    def covered_count(self):
        return len(self.state.visited)

    # Hooks for the non-learned policies.

    def valid_action_list(self):
        return valid_actions(self.maze, self.state)

    def current_node(self):
        return self.state.node_ids[self.state.position]

    def outgoing(self):
        r, c = self.state.position
        if self.hide_destinations:
            return [(d, None) for d in self.maze.open_dirs(r, c)]
        return [
            (d, self.state.node_ids[(r + DELTAS[d][0], c + DELTAS[d][1])])
            for d in self.maze.open_dirs(r, c)
        ]

    def reverse_action(self, direction):
        return OPPOSITE[direction]

    def q_state(self):
        r, c = self.state.position
        return r * self.maze.width + c


def heldout_mazes(count=100, width=6, height=6, loop_prob=0.18, start_seed=7001):
    """The fixed evaluation set: seeds start_seed..start_seed+count-1.

    loop_prob default matches the calibrated benchmark distribution."""
    return [generate_maze(width, height, loop_prob, seed) for seed in range(start_seed, start_seed + count)]
