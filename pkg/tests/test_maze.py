import numpy as np
import pytest

from graphexplore.envs.maze import (
    E,
    Maze,
    MazeEnv,
    N,
    S,
    W,
    generate_maze,
    heldout_mazes,
    initial_state,
    load_maze,
    observe,
    parse_ascii,
    render_ascii,
    save_maze,
    step,
    valid_actions,
)


def open_grid(w, h, start=(0, 0)):
    passages = np.zeros((h, w), dtype=np.uint8)
    for r in range(h):
        for c in range(w):
            if c + 1 < w:
                passages[r, c] |= 1 << E
                passages[r, c + 1] |= 1 << W
            if r + 1 < h:
                passages[r, c] |= 1 << S
                passages[r + 1, c] |= 1 << N
    return Maze(width=w, height=h, passages=passages, start=start)


def test_generate_1x1():
    maze = generate_maze(1, 1, 0.0, seed=0)
    assert maze.passage_count() == 0
    assert maze.start == (0, 0)


def test_generate_tree_edge_count():
    for seed in range(10):
        maze = generate_maze(6, 6, 0.0, seed=seed)
        assert maze.passage_count() == 35


def test_generate_full_open():
    maze = generate_maze(4, 3, 1.0, seed=1)
    # every interior wall open: edges of the full grid graph
    assert maze.passage_count() == 3 * 3 + 4 * 2


def test_generate_deterministic_and_symmetric():
    a = generate_maze(6, 6, 0.3, seed=42)
    b = generate_maze(6, 6, 0.3, seed=42)
    assert np.array_equal(a.passages, b.passages) and a.start == b.start
    for r in range(6):
        for c in range(6):
            if a.is_open(r, c, E):
                assert a.is_open(r, c + 1, W)
            if a.is_open(r, c, S):
                assert a.is_open(r + 1, c, N)


def test_generate_connected():
    for seed in range(5):
        maze = generate_maze(5, 5, 0.0, seed=seed)
        seen = {maze.start}
        stack = [maze.start]
        while stack:
            r, c = stack.pop()
            for d in maze.open_dirs(r, c):
                nxt = (r + ((-1, 0, 1, 0)[d]), c + ((0, 1, 0, -1)[d]))
                if nxt not in seen:
                    seen.add(nxt)
                    stack.append(nxt)
        assert len(seen) == 25


def test_observe_start_neighborhood():
    # Start cell with exactly two open sides: 3 nodes, both directions per passage.
    maze = open_grid(2, 2, start=(0, 0))
    state = initial_state(maze)
    obs = observe(maze, state)
    assert obs.node_count == 3
    assert sorted(obs.coverage) == [0.0, 0.0, 1.0]
    assert len(obs.edges) == 4  # 2 passages, both directions
    assert obs.current_node == 0


def test_observe_full_coverage():
    maze = open_grid(2, 2)
    state = initial_state(maze)
    for d in (E, S, W):
        step(maze, state, d)
    obs = observe(maze, state)
    assert obs.node_count == 4
    assert np.all(obs.coverage == 1.0)


def test_observe_features_have_no_coordinates():
    # Feature width is exactly the is-current column when no provider is set:
    # nothing in the schema can carry (row, col).
    maze = open_grid(3, 3, start=(1, 1))
    state = initial_state(maze)
    obs = observe(maze, state)
    assert obs.node_features.shape == (obs.node_count, 1)
    assert obs.node_features[obs.current_node, 0] == 1.0
    assert obs.node_features[:, 0].sum() == 1.0


def test_step_deltas_and_errors():
    maze = open_grid(2, 2, start=(0, 0))
    state = initial_state(maze)
    _, delta = step(maze, state, E)
    assert delta == 1
    _, delta = step(maze, state, W)
    assert delta == 0
    with pytest.raises(ValueError, match="blocked"):
        step(maze, state, N)


def test_corner_cell_action_bound():
    for seed in range(5):
        maze = generate_maze(4, 4, 1.0, seed=seed)
        state = initial_state(maze)
        state.position = (0, 0)
        assert len(valid_actions(maze, state)) <= 2


def test_render_1x1():
    maze = generate_maze(1, 1, 0.0, seed=3)
    text = render_ascii(maze)
    assert text == "###\n#@#\n###\n"


def test_render_open_2x2_all_visited():
    maze = open_grid(2, 2)
    state = initial_state(maze)
    for d in (E, S, W):
        step(maze, state, d)
    text = render_ascii(maze, state)
    marks = [ch for row in text.splitlines() for ch in row if ch in "@*"]
    assert sorted(marks) == ["*", "*", "*", "@"]


def test_render_parse_roundtrip():
    for seed in range(10):
        maze = generate_maze(5, 4, 0.2, seed=seed)
        parsed, visited = parse_ascii(render_ascii(maze))
        assert np.array_equal(parsed.passages, maze.passages)
        assert parsed.start == maze.start
        assert visited == {maze.start}


def test_maze_file_roundtrip(tmp_path):
    maze = generate_maze(6, 6, 0.1, seed=11)
    path = tmp_path / "m.maze"
    save_maze(path, maze)
    first_line = path.read_text().splitlines()[0]
    assert first_line == f"maze 6 6 {maze.start[0]} {maze.start[1]}"
    loaded = load_maze(path)
    assert np.array_equal(loaded.passages, maze.passages)
    assert loaded.start == maze.start


def test_maze_file_rejects_asymmetry(tmp_path):
    path = tmp_path / "bad.maze"
    path.write_text("maze 2 1 0 0\n2 0\n")  # east open, west side closed
    with pytest.raises(ValueError, match="asymmetric"):
        load_maze(path)


def test_heldout_set_is_stable():
    a = heldout_mazes(3)
    b = heldout_mazes(3)
    for x, y in zip(a, b):
        assert np.array_equal(x.passages, y.passages) and x.start == y.start


def test_env_reset_returns_empty_graph():
    env = MazeEnv(generate_maze(4, 4, 0.1, seed=5), budget=16)
    rng = np.random.default_rng(0)
    obs = env.reset(rng)
    assert obs.node_count == 0
    assert env.reward_normalizer == 16.0


def test_env_mask_matches_valid_actions():
    env = MazeEnv(generate_maze(4, 4, 0.0, seed=6), budget=16)
    env.reset(np.random.default_rng(0))
    mask = env.action_mask()
    assert set(np.flatnonzero(mask)) == set(env.valid_action_list())
