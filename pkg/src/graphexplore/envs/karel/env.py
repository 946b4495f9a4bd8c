"""Program-coverage exploration environment.

Setting: the graph is the program's coverage graph and never grows; an action
is a whole input world. Each step executes the fixed program on the proposed
world and folds the resulting coverage bits into the accumulated mask, so the
per-step reward is the newly covered unit count over the total unit count and
the episode objective is joint coverage of the proposed input set.
"""

from __future__ import annotations

import numpy as np

from ...graphnet import GraphObservation
from .lang import parse, KarelProgram, _tokenize
from .machine import KarelWorld, execute, tokens_to_world, merge_reports
from .graph import NUM_EDGE_TYPES, FEATURE_WIDTH, program_to_graph, mask_from_report

# Source-text token vocabulary for bag-of-words / sequence program encoders.
# All integer literals collapse onto the single <int> id.
TEXT_TOKENS = (
    "def", "run", "(", ")", "{", "}",
    "move", "turnLeft", "turnRight", "putMarker", "pickMarker",
    "if", "ifElse", "while", "repeat", "not",
    "frontIsClear", "leftIsClear", "rightIsClear",
    "markersPresent", "noMarkersPresent",
    "<int>",
)
TEXT_VOCAB = len(TEXT_TOKENS)


def program_token_ids(source):
    ids = []
    for tok in _tokenize(source):
        if tok.kind == "eof":
            break
        ids.append(TEXT_TOKENS.index("<int>" if tok.kind == "int" else tok.text))
    return ids


class KarelEnv:
    """Constant-graph coverage environment over one program.

    Actions are input worlds: either a KarelWorld or any object with `size`
    and `tokens` fields (a grid decoder emission). Runtime faults during
    execution are part of the semantics, not step failures; coverage earned
    before the fault still counts.
    """

    constant_graph = True
    num_edge_types = NUM_EDGE_TYPES

    def __init__(self, source, budget=5, step_cap=1000):
        program = source if isinstance(source, KarelProgram) else parse(source)
        self.karel_program = program
        self.graph = program_to_graph(program)
        self.budget = int(budget)
        self.step_cap = int(step_cap)
        self.units = program.n_statements + 2 * program.n_branches
        # degenerate unit-free programs keep reward arithmetic finite
        self.reward_normalizer = float(max(self.units, 1))
        # token form feeds sequence-based program conditioning
        self.program = {"tokens": tuple(program_token_ids(program.source)), "source": program.source}
        self._mask = np.zeros(self.graph.node_count)
        self._reports = []

    def feature_width(self):
        return FEATURE_WIDTH

    def reset(self, rng=None):
        self._mask = np.zeros(self.graph.node_count)
        self._reports = []
        return self._observe()

    def _observe(self):
        return GraphObservation(
            node_count=self.graph.node_count,
            node_features=self.graph.features.copy(),
            edges=list(self.graph.edges),
            coverage=self._mask.copy(),
            num_edge_types=NUM_EDGE_TYPES,
            current_node=None,
        )

    def step(self, action):
        world = self._to_world(action)
        report = execute(self.karel_program, world, step_cap=self.step_cap)
        self._reports.append(report)
        self._mask = np.maximum(self._mask, mask_from_report(self.graph, report))
        return self._observe()

    def _to_world(self, action):
        if isinstance(action, KarelWorld):
            return action
        if hasattr(action, "size") and hasattr(action, "tokens"):
            return tokens_to_world(action.size, action.tokens)
        raise ValueError(f"action must be a world or a grid emission, got {type(action).__name__}")

    def fully_explored(self):
        return float(self._mask.sum()) >= self.units

    def action_mask(self):
        return None  # structured action space; masking lives in the decoder

    def joint_report(self):
        """Union coverage report over the worlds proposed so far."""
        if not self._reports:
            raise ValueError("no inputs proposed yet")
        return merge_reports(self._reports)


def random_world_policy(config):
    """Baseline: propose an iid world per step, program-blind."""

    def policy(history, env, rng):
        return sample_world_from(config, rng)

    return policy


def heuristic_world_policy(config, max_tries=20):
    """Baseline: propose worlds screened by the valid-execution heuristic."""
    from .worlds import valid_execution_heuristic

    def policy(history, env, rng):
        seed = int(rng.integers(2**62))
        return valid_execution_heuristic(env.karel_program, config, seed, max_tries)

    return policy


def sample_world_from(config, rng):
    from .worlds import sample_world

    return sample_world(config, int(rng.integers(2**62)))
