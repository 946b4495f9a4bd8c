"""Program AST to coverage graph.

Nodes: a run root, one node per statement, one node per condition token
(not() wrappers are their own nodes), and a true/false outcome anchor pair
per condition site. Coverage units live on statement nodes and anchors; the
root and condition nodes never carry coverage, so the sum of a coverage mask
over nodes equals the number of covered units.

Directed edge types:
  1 ast-child       parent -> child (root->stmt, stmt->cond, not->inner,
                    branch stmt->anchors, anchor->branch-body stmt,
                    repeat->body stmt)
  2 next-statement  consecutive statements in one block
  3 cond-to-true    condition root -> true anchor
  4 cond-to-false   condition root -> false anchor
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lang import ACTIONS

NUM_EDGE_TYPES = 4

NODE_KINDS = (
    "run",
    "move",
    "turnLeft",
    "turnRight",
    "putMarker",
    "pickMarker",
    "if",
    "ifElse",
    "while",
    "repeat",
    "frontIsClear",
    "leftIsClear",
    "rightIsClear",
    "markersPresent",
    "noMarkersPresent",
    "not",
    "true-anchor",
    "false-anchor",
)
_REPEAT_BUCKETS = 5  # counts 1,2,3,4,>=5
FEATURE_WIDTH = len(NODE_KINDS) + _REPEAT_BUCKETS


@dataclass
class KarelGraph:
    node_kinds: tuple  # kind name per node, index order frozen
    features: np.ndarray  # (n, FEATURE_WIDTH) float64 one-hot rows
    edges: tuple  # (src, dst, type) triples
    stmt_node: dict  # stmt_id -> node index
    anchor_node: dict  # branch_id -> (true node index, false node index)
    n_statements: int
    n_branches: int

    @property
    def node_count(self):
        return len(self.node_kinds)

    def unit_mask(self):
        """Boolean mask of nodes that carry a coverage unit."""
        mask = np.zeros(self.node_count, dtype=bool)
        for idx in self.stmt_node.values():
            mask[idx] = True
        for t, f in self.anchor_node.values():
            mask[t] = True
            mask[f] = True
        return mask


def _feature_row(kind, repeat_count=0):
    row = np.zeros(FEATURE_WIDTH)
    row[NODE_KINDS.index(kind)] = 1.0
    if kind == "repeat":
        row[len(NODE_KINDS) + min(repeat_count, _REPEAT_BUCKETS) - 1] = 1.0
    return row


def program_to_graph(program):
    kinds = []
    features = []
    edges = []
    stmt_node = {}
    anchor_node = {}

    def add_node(kind, repeat_count=0):
        kinds.append(kind)
        features.append(_feature_row(kind, repeat_count))
        return len(kinds) - 1

    def add_cond(cond, parent):
        idx = add_node(cond.name)
        edges.append((parent, idx, 1))
        if cond.name == "not":
            add_cond(cond.inner, idx)
        return idx

    def add_block(stmts, parent):
        prev = None
        for s in stmts:
            idx = add_node(s.kind, s.count)
            stmt_node[s.stmt_id] = idx
            edges.append((parent, idx, 1))
            if prev is not None:
                edges.append((prev, idx, 2))
            prev = idx
            if s.kind in ACTIONS:
                continue
            if s.kind == "repeat":
                add_block(s.body, idx)
                continue
            cond_idx = add_cond(s.cond, idx)
            t_idx = add_node("true-anchor")
            edges.append((idx, t_idx, 1))
            edges.append((cond_idx, t_idx, 3))
            add_block(s.body, t_idx)
            f_idx = add_node("false-anchor")
            edges.append((idx, f_idx, 1))
            edges.append((cond_idx, f_idx, 4))
            add_block(s.orelse, f_idx)
            anchor_node[s.branch_id] = (t_idx, f_idx)

    root = add_node("run")
    add_block(program.body, root)
    return KarelGraph(
        node_kinds=tuple(kinds),
        features=np.array(features) if features else np.zeros((0, FEATURE_WIDTH)),
        edges=tuple(edges),
        stmt_node=stmt_node,
        anchor_node=anchor_node,
        n_statements=program.n_statements,
        n_branches=program.n_branches,
    )


def mask_from_report(graph, report):
    """Per-node coverage bits for a report on the same program: statement
    nodes take their statement bit, anchors take their outcome bit, all
    other nodes stay zero. The mask sums to the report's covered-unit count."""
    if (
        len(report.stmt_hit) != graph.n_statements
        or report.branch_hit.shape[0] != graph.n_branches
    ):
        raise ValueError("report shape does not match graph")
    mask = np.zeros(graph.node_count)
    for stmt_id, idx in graph.stmt_node.items():
        mask[idx] = float(report.stmt_hit[stmt_id])
    for branch_id, (t, f) in graph.anchor_node.items():
        mask[t] = float(report.branch_hit[branch_id, 0])
        mask[f] = float(report.branch_hit[branch_id, 1])
    return mask
