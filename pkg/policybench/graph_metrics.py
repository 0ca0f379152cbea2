"""
Graph Metrics
=============

Programming-effort metrics over :class:`~policybench.Graph.DirectedGraph`:

- graph edit distance (GED), the minimum summed cost of node and edge
  insertions, deletions and substitutions that turn one graph into the
  other, computed exactly by best-first search over partial node
  assignments;
- a brute-force GED used as test oracle on small graphs;
- cyclomatic complexity ``CC = a + s - n + 1`` with ``a`` arcs, ``s`` sinks
  and ``n`` nodes.

.. rubric:: Search outline

1. Candidate node assignments are scored as upper bounds: identity on shared
   node ids, positional pairing in node order, greedy pairing of equal
   labels, and a bipartite assignment solved with
   :func:`scipy.optimize.linear_sum_assignment`.
2. If the best candidate reaches the structural lower bound
   ``|Δ|V|| + |Δ|E||`` (weighted by insert/delete costs), it is returned as
   exact.
3. Otherwise A* runs over the nodes of the first graph, pruned by the upper
   bound, until it proves optimality or exhausts the expansion budget.
"""

import heapq
import itertools
import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linear_sum_assignment

from .AppSettings import metrics_settings
from .Graph import DirectedGraph

logger = logging.getLogger(__name__)

EPS = 1e-9

NODE_SUBSTITUTE = 'substitute_node'
NODE_DELETE = 'delete_node'
NODE_INSERT = 'insert_node'
EDGE_SUBSTITUTE = 'substitute_edge'
EDGE_DELETE = 'delete_edge'
EDGE_INSERT = 'insert_edge'

# =========================================================================

class MetricsError(ValueError):
    """Base class of metric computation errors."""


class BudgetExceeded(MetricsError):
    """
    GED search hit its expansion budget.

    :param result: The non-exact result holding the best upper bound
    """

    def __init__(self, result: 'GedResult'):
        self.result = result
        super().__init__(f"expansion budget exhausted after "
                         f"{result.expansions} expansions, upper bound "
                         f"{result.distance:g}")


class TooLarge(MetricsError):
    """Graph too large for the brute-force oracle."""


class EmptyGraph(MetricsError):
    """Metric undefined on a graph without nodes."""

# =========================================================================

Match = Callable[[str, str], bool]


def labels_equal(a: str, b: str) -> bool:
    return a == b


@dataclass(frozen=True)
class EditCostModel:
    """
    Costs of the six elementary graph edits.

    Match predicates compare labels; ``None`` means label-blind (every
    pair matches, substitution is free).
    """
    node_insert: float = 1.0
    node_delete: float = 1.0
    node_substitute: float = 1.0
    edge_insert: float = 1.0
    edge_delete: float = 1.0
    edge_substitute: float = 1.0
    node_match: Optional[Match] = None
    edge_match: Optional[Match] = None

    def __post_init__(self):
        for name in ('node_insert', 'node_delete', 'node_substitute',
                     'edge_insert', 'edge_delete', 'edge_substitute'):
            if getattr(self, name) < 0:
                raise ValueError(f"cost {name} must be non-negative")

    @classmethod
    def label_sensitive(cls, **costs) -> 'EditCostModel':
        return cls(node_match=labels_equal, edge_match=labels_equal,
                   **costs)

    def node_sub_cost(self, a: str, b: str) -> float:
        if self.node_match is None or self.node_match(a, b):
            return 0.0
        return self.node_substitute

    def edge_sub_cost(self, a: str, b: str) -> float:
        if self.edge_match is None or self.edge_match(a, b):
            return 0.0
        return self.edge_substitute

    def edge_pair_cost(self, a: str, b: str) -> float:
        """Cost of matching two edges, replaced by delete+insert if cheaper."""
        return min(self.edge_sub_cost(a, b),
                   self.edge_delete + self.edge_insert)


UNIT_COSTS = EditCostModel()


@dataclass(frozen=True)
class EditOp:
    """
    One elementary edit.

    ``source`` is a node id or ``(u, v)`` pair of the first graph,
    ``target`` one of the second graph; either is ``None`` for insertions
    and deletions.
    """
    kind: str
    source: Optional[object]
    target: Optional[object]
    label: str = ''
    cost: float = 0.0

    def __str__(self):
        return f"{self.kind} {self.source} -> {self.target} ({self.cost:g})"


@dataclass
class GedResult:
    """
    Outcome of a GED computation.

    :param distance: Summed cost of ``edit_path``
    :param edit_path: Edits turning the first graph into the second
    :param exact: True if ``distance`` is proven minimal
    :param lower_bound: Structural lower bound of the pair
    :param expansions: Search states expanded
    :param method: Which stage produced the result
    """
    distance: float
    edit_path: List[EditOp] = field(default_factory=list)
    exact: bool = True
    lower_bound: float = 0.0
    expansions: int = 0
    method: str = ''

    @property
    def operations(self) -> int:
        """Number of edits with non-zero cost."""
        return sum(1 for op in self.edit_path if op.cost > 0)

    def to_record(self) -> Dict:
        distance = self.distance
        if float(distance).is_integer():
            distance = int(distance)
        return {
            'distance': distance,
            'exact': self.exact,
            'lower_bound': self.lower_bound,
            'operations': self.operations,
            'expansions': self.expansions,
            'method': self.method,
        }

# =========================================================================

class _Problem:
    """Index-based view of a graph pair used by the searches."""

    def __init__(self, g1: DirectedGraph, g2: DirectedGraph,
                 costs: EditCostModel):
        self.g1 = g1
        self.g2 = g2
        self.costs = costs
        self.ids1 = list(g1.nodes)
        self.ids2 = list(g2.nodes)
        self.n1 = len(self.ids1)
        self.n2 = len(self.ids2)
        self.labels1 = [g1.nodes[n] for n in self.ids1]
        self.labels2 = [g2.nodes[n] for n in self.ids2]
        idx1 = {n: i for i, n in enumerate(self.ids1)}
        idx2 = {n: i for i, n in enumerate(self.ids2)}
        self.idx2 = idx2
        self.adj1 = np.zeros((self.n1, self.n1), dtype=bool)
        self.adj2 = np.zeros((self.n2, self.n2), dtype=bool)
        self.elab1: Dict[Tuple[int, int], str] = {}
        self.elab2: Dict[Tuple[int, int], str] = {}
        for (u, v), label in g1.edges.items():
            self.adj1[idx1[u], idx1[v]] = True
            self.elab1[(idx1[u], idx1[v])] = label
        for (u, v), label in g2.edges.items():
            self.adj2[idx2[u], idx2[v]] = True
            self.elab2[(idx2[u], idx2[v])] = label
        self.m1 = len(self.elab1)
        self.m2 = len(self.elab2)

    # ---------------------------------------------------------------------

    def bound(self, r1: int, r2: int, e1: int, e2: int) -> float:
        """Lower bound for remaining node and edge counts."""
        c = self.costs
        node = (r1 - r2) * c.node_delete if r1 > r2 \
            else (r2 - r1) * c.node_insert
        edge = (e1 - e2) * c.edge_delete if e1 > e2 \
            else (e2 - e1) * c.edge_insert
        return node + edge

    def structural_bound(self) -> float:
        return self.bound(self.n1, self.n2, self.m1, self.m2)

    def mapping_cost(self, mapping: Sequence[int]) -> float:
        """Total cost of a complete assignment (``-1`` = deleted)."""
        c = self.costs
        total = 0.0
        used = set()
        for i, j in enumerate(mapping):
            if j < 0:
                total += c.node_delete
            else:
                total += c.node_sub_cost(self.labels1[i], self.labels2[j])
                used.add(j)
        total += (self.n2 - len(used)) * c.node_insert
        covered = 0
        for (i, k), label in self.elab1.items():
            a, b = mapping[i], mapping[k]
            if a >= 0 and b >= 0 and self.adj2[a, b]:
                total += c.edge_pair_cost(label, self.elab2[(a, b)])
                covered += 1
            else:
                total += c.edge_delete
        total += (self.m2 - covered) * c.edge_insert
        return total

    def edit_path(self, mapping: Sequence[int]) -> List[EditOp]:
        c = self.costs
        ops = []
        used = set()
        for i, j in enumerate(mapping):
            if j < 0:
                ops.append(EditOp(NODE_DELETE, self.ids1[i], None, '',
                                  c.node_delete))
            else:
                used.add(j)
                ops.append(EditOp(NODE_SUBSTITUTE, self.ids1[i],
                                  self.ids2[j], self.labels2[j],
                                  c.node_sub_cost(self.labels1[i],
                                                  self.labels2[j])))
        for j in range(self.n2):
            if j not in used:
                ops.append(EditOp(NODE_INSERT, None, self.ids2[j],
                                  self.labels2[j], c.node_insert))
        covered = set()
        for (i, k), label in self.elab1.items():
            source = (self.ids1[i], self.ids1[k])
            a, b = mapping[i], mapping[k]
            if a >= 0 and b >= 0 and self.adj2[a, b]:
                target = (self.ids2[a], self.ids2[b])
                other = self.elab2[(a, b)]
                sub = c.edge_sub_cost(label, other)
                if sub <= c.edge_delete + c.edge_insert:
                    ops.append(EditOp(EDGE_SUBSTITUTE, source, target,
                                      other, sub))
                    covered.add((a, b))
                    continue
            ops.append(EditOp(EDGE_DELETE, source, None, '', c.edge_delete))
        for (a, b), label in self.elab2.items():
            if (a, b) not in covered:
                ops.append(EditOp(EDGE_INSERT, None,
                                  (self.ids2[a], self.ids2[b]), label,
                                  c.edge_insert))
        return ops

    # ---------------------------------------------------------------------

    def candidate_mappings(self) -> List[Tuple[str, List[int]]]:
        """Cheap complete assignments used as upper bounds."""
        candidates = []
        identity = [self.idx2.get(n, -1) for n in self.ids1]
        candidates.append(('identity', identity))
        positional = [i if i < self.n2 else -1 for i in range(self.n1)]
        candidates.append(('positional', positional))
        by_label = []
        taken = set()
        for label in self.labels1:
            match = next((j for j in range(self.n2) if j not in taken and
                          self.labels2[j] == label), -1)
            if match >= 0:
                taken.add(match)
            by_label.append(match)
        candidates.append(('labels', by_label))
        if self.n1 and self.n2:
            candidates.append(('assignment', self.assignment_mapping()))
        return candidates

    def assignment_mapping(self) -> List[int]:
        """Bipartite node assignment with degree-based edge estimates."""
        c = self.costs
        n1, n2 = self.n1, self.n2
        big = 1e9
        out1, in1 = self.adj1.sum(axis=1), self.adj1.sum(axis=0)
        out2, in2 = self.adj2.sum(axis=1), self.adj2.sum(axis=0)
        edge_unit = 0.5 * (c.edge_insert + c.edge_delete)
        matrix = np.zeros((n1 + n2, n2 + n1))
        sub = (np.abs(out1[:, None] - out2[None, :]) +
               np.abs(in1[:, None] - in2[None, :])) * 0.5 * edge_unit
        for i in range(n1):
            for j in range(n2):
                sub[i, j] += c.node_sub_cost(self.labels1[i], self.labels2[j])
        matrix[:n1, :n2] = sub
        delete = np.full((n1, n1), big)
        np.fill_diagonal(delete, c.node_delete +
                         0.5 * c.edge_delete * (out1 + in1))
        matrix[:n1, n2:] = delete
        insert = np.full((n2, n2), big)
        np.fill_diagonal(insert, c.node_insert +
                         0.5 * c.edge_insert * (out2 + in2))
        matrix[n1:, :n2] = insert
        rows, cols = linear_sum_assignment(matrix)
        mapping = [-1] * n1
        for r, col in zip(rows, cols):
            if r < n1 and col < n2:
                mapping[r] = int(col)
        return mapping

    # ---------------------------------------------------------------------

    def search(self, upper: float, budget: int
               ) -> Tuple[Optional[List[int]], float, int, bool]:
        """
        A* over assignments of the first graph's nodes.

        :return: (mapping or None if the upper bound is optimal, cost,
            expansions, completed)
        """
        c = self.costs
        order = sorted(range(self.n1),
                       key=lambda i: -(self.adj1[i, :].sum() +
                                       self.adj1[:, i].sum()))
        best = upper
        best_mapping = None
        counter = itertools.count()
        h0 = self.bound(self.n1, self.n2, self.m1, self.m2)
        # (f, -depth, tie, g, mapping, used mask, decided1, decided2)
        heap = [(h0, 0, next(counter), 0.0, (), 0, 0, 0)]
        expansions = 0
        while heap:
            f, _, _, g, mapping, used, dec1, dec2 = heapq.heappop(heap)
            if f >= best - EPS:
                continue
            depth = len(mapping)
            if depth == self.n1:
                best, best_mapping = g, mapping
                break
            expansions += 1
            if expansions > budget:
                return None, best, expansions, False
            u = order[depth]
            assigned = order[:depth]
            images = {order[k]: mapping[k] for k in range(depth)}
            used_list = [j for j in range(self.n2) if used >> j & 1]
            new_dec1 = dec1 + int(self.adj1[u, u]) + \
                sum(int(self.adj1[u, w]) + int(self.adj1[w, u])
                    for w in assigned)
            for j in list(range(self.n2)) + [-1]:
                if j >= 0 and used >> j & 1:
                    continue
                inc = c.node_delete if j < 0 else \
                    c.node_sub_cost(self.labels1[u], self.labels2[j])
                images[u] = j
                for w in assigned + [u]:
                    pairs = [(u, w)] if w == u else [(u, w), (w, u)]
                    for a, b in pairs:
                        ia, ib = images[a], images[b]
                        mapped = ia >= 0 and ib >= 0 and \
                            bool(self.adj2[ia, ib])
                        if self.adj1[a, b]:
                            inc += c.edge_pair_cost(
                                self.elab1[(a, b)], self.elab2[(ia, ib)]) \
                                if mapped else c.edge_delete
                        elif mapped:
                            inc += c.edge_insert
                new_used = used | (1 << j) if j >= 0 else used
                new_dec2 = dec2
                if j >= 0:
                    new_dec2 += int(self.adj2[j, j]) + sum(
                        int(self.adj2[j, v]) + int(self.adj2[v, j])
                        for v in used_list)
                g_new = g + inc
                if depth + 1 == self.n1:
                    free = self.n2 - bin(new_used).count('1')
                    g_new += free * c.node_insert + \
                        (self.m2 - new_dec2) * c.edge_insert
                    h = 0.0
                else:
                    h = self.bound(self.n1 - depth - 1,
                                   self.n2 - bin(new_used).count('1'),
                                   self.m1 - new_dec1, self.m2 - new_dec2)
                if g_new + h < best - EPS:
                    heapq.heappush(heap, (g_new + h, -(depth + 1),
                                          next(counter), g_new,
                                          mapping + (j,), new_used,
                                          new_dec1, new_dec2))
            del images[u]
        if best_mapping is None:
            return None, best, expansions, True
        full = [-1] * self.n1
        for k, j in enumerate(best_mapping):
            full[order[k]] = j
        return full, best, expansions, True

# =========================================================================

def ged(g1: DirectedGraph, g2: DirectedGraph,
        costs: Optional[EditCostModel] = None,
        budget: Optional[int] = None, strict: bool = False) -> GedResult:
    """
    Graph edit distance between two graphs.

    :param g1: Source graph
    :param g2: Target graph
    :param costs: Edit costs, unit label-blind costs if omitted
    :param budget: Search expansion limit, defaults to the
        ``GED_EXPANSION_BUDGET`` setting
    :param strict: Raise :class:`BudgetExceeded` instead of returning a
        non-exact result
    :return: The distance with its edit path
    """
    costs = costs or UNIT_COSTS
    if budget is None:
        budget = metrics_settings.get('GED_EXPANSION_BUDGET')
    problem = _Problem(g1, g2, costs)
    lower = problem.structural_bound()

    if problem.n1 == 0:
        mapping = []
        return GedResult(problem.mapping_cost(mapping),
                         problem.edit_path(mapping), True, lower, 0, 'empty')

    best_name, best_mapping, best_cost = '', None, float('inf')
    for name, mapping in problem.candidate_mappings():
        cost = problem.mapping_cost(mapping)
        logger.debug('GED candidate %s: %g', name, cost)
        if cost < best_cost - EPS:
            best_name, best_mapping, best_cost = name, mapping, cost

    if best_cost <= lower + EPS:
        logger.debug('GED %s embedding meets lower bound %g',
                     best_name, lower)
        return GedResult(best_cost, problem.edit_path(best_mapping), True,
                         lower, 0, best_name)

    mapping, cost, expansions, completed = problem.search(best_cost, budget)
    if mapping is not None:
        best_name, best_mapping, best_cost = 'search', mapping, cost
    result = GedResult(best_cost, problem.edit_path(best_mapping), completed,
                       lower, expansions, best_name)
    if not completed:
        logger.warning('GED search stopped after %d expansions; '
                       'returning upper bound %g (lower bound %g)',
                       expansions, best_cost, lower)
        if strict:
            raise BudgetExceeded(result)
    else:
        logger.debug('GED search finished after %d expansions: %g',
                     expansions, best_cost)
    return result

# -------------------------------------------------------------------------

def _injective_mappings(n1: int, n2: int):
    """All injective partial maps of n1 nodes into n2 nodes."""
    def extend(prefix, used):
        if len(prefix) == n1:
            yield prefix
            return
        for j in range(n2):
            if j not in used:
                yield from extend(prefix + (j,), used | {j})
        yield from extend(prefix + (-1,), used)
    yield from extend((), frozenset())


def ged_bruteforce(g1: DirectedGraph, g2: DirectedGraph,
                   costs: Optional[EditCostModel] = None) -> float:
    """
    Graph edit distance by exhaustive enumeration of node mappings.

    :raises TooLarge: if a graph exceeds ``BRUTEFORCE_MAX_NODES`` nodes
    """
    limit = metrics_settings.get('BRUTEFORCE_MAX_NODES')
    if max(g1.node_count, g2.node_count) > limit:
        raise TooLarge(f"brute force is limited to {limit} nodes, got "
                       f"{g1.node_count} and {g2.node_count}")
    problem = _Problem(g1, g2, costs or UNIT_COSTS)
    return min(problem.mapping_cost(m)
               for m in _injective_mappings(problem.n1, problem.n2))

# -------------------------------------------------------------------------

def apply_edit_path(g1: DirectedGraph, path: List[EditOp]) -> DirectedGraph:
    """
    Apply an edit path to ``g1``.

    Every node and edge of ``g1`` must be consumed exactly once by a
    substitution or deletion; substituted edges must follow the node
    substitutions.

    :raises MetricsError: if the path is inconsistent with ``g1``
    """
    result = DirectedGraph(g1.name)
    node_map: Dict[str, Optional[str]] = {}
    consumed_edges = set()
    for op in path:
        if op.kind in (NODE_SUBSTITUTE, NODE_DELETE):
            if op.source not in g1.nodes or op.source in node_map:
                raise MetricsError(f"{op}: source node unknown or reused")
            node_map[op.source] = op.target
        if op.kind in (NODE_SUBSTITUTE, NODE_INSERT):
            if op.target in result.nodes:
                raise MetricsError(f"{op}: target node created twice")
            result.add_node(op.target, op.label)
        if op.kind in (EDGE_SUBSTITUTE, EDGE_DELETE):
            if op.source not in g1.edges or op.source in consumed_edges:
                raise MetricsError(f"{op}: source edge unknown or reused")
            consumed_edges.add(op.source)
        if op.kind == EDGE_SUBSTITUTE:
            expected = tuple(node_map.get(n) for n in op.source)
            if expected != tuple(op.target):
                raise MetricsError(f"{op}: edge does not follow the node "
                                   f"mapping {expected}")
        if op.kind in (EDGE_SUBSTITUTE, EDGE_INSERT):
            source, target = op.target
            if result.has_edge(source, target):
                raise MetricsError(f"{op}: target edge created twice")
            try:
                result.add_edge(source, target, op.label)
            except KeyError as e:
                raise MetricsError(f"{op}: {e}") from None
    missing = [n for n in g1.nodes if n not in node_map]
    missing += [e for e in g1.edges if e not in consumed_edges]
    if missing:
        raise MetricsError(f"edit path leaves {missing} untouched")
    return result

# =========================================================================

def cyclomatic_complexity(g: DirectedGraph) -> int:
    """
    Cyclomatic complexity ``a + s - n + 1``.

    Sinks are nodes without outgoing edges; a self-loop counts as an
    outgoing edge.

    :raises EmptyGraph: if ``g`` has no nodes
    """
    if not g.node_count:
        raise EmptyGraph(f"graph {g.name!r} has no nodes")
    return g.edge_count + len(g.sinks()) - g.node_count + 1


def graph_summary(g: DirectedGraph) -> Dict:
    """Counts reported for a single graph."""
    return {
        'name': g.name,
        'nodes': g.node_count,
        'edges': g.edge_count,
        'sinks': len(g.sinks()),
        'cc': cyclomatic_complexity(g) if g.node_count else None,
    }
