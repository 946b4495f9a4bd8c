"""Grid-robot program coverage: DSL, interpreter, coverage graphs, world
distributions, and the constant-graph exploration environment."""

from .lang import (
    ACTIONS,
    CONTROL,
    TESTS,
    Cond,
    KarelProgram,
    ParseError,
    Stmt,
    parse,
    render_program,
    sample_program,
)
from .machine import (
    CELL_TOKENS,
    HERO_TOKEN_IDS,
    CoverageReport,
    KarelWorld,
    coverage_score,
    execute,
    merge_reports,
    report_to_text,
    tokens_to_world,
    world_from_text,
    world_to_text,
    world_to_tokens,
)
from .graph import (
    FEATURE_WIDTH,
    NODE_KINDS,
    NUM_EDGE_TYPES,
    KarelGraph,
    mask_from_report,
    program_to_graph,
)
from .worlds import (
    ORACLE_MAX_SIDE,
    WorldConfig,
    enumerate_worlds,
    sample_oracle_world,
    sample_world,
    valid_execution_heuristic,
)
from .env import (
    TEXT_TOKENS,
    TEXT_VOCAB,
    KarelEnv,
    heuristic_world_policy,
    program_token_ids,
    random_world_policy,
)

__all__ = [
    "ACTIONS",
    "CONTROL",
    "TESTS",
    "Cond",
    "KarelProgram",
    "ParseError",
    "Stmt",
    "parse",
    "render_program",
    "sample_program",
    "CELL_TOKENS",
    "HERO_TOKEN_IDS",
    "CoverageReport",
    "KarelWorld",
    "coverage_score",
    "execute",
    "merge_reports",
    "report_to_text",
    "tokens_to_world",
    "world_from_text",
    "world_to_text",
    "world_to_tokens",
    "FEATURE_WIDTH",
    "NODE_KINDS",
    "NUM_EDGE_TYPES",
    "KarelGraph",
    "mask_from_report",
    "program_to_graph",
    "ORACLE_MAX_SIDE",
    "WorldConfig",
    "enumerate_worlds",
    "sample_oracle_world",
    "sample_world",
    "valid_execution_heuristic",
    "KarelEnv",
    "TEXT_TOKENS",
    "TEXT_VOCAB",
    "heuristic_world_policy",
    "program_token_ids",
    "random_world_policy",
]
