import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from policybench.AppSettings import metrics_settings
from policybench.editing import edit
from policybench.Graph import DirectedGraph, edge_color
from policybench.graph_metrics import (BudgetExceeded, EditCostModel,
                                       EmptyGraph, MetricsError, TooLarge,
                                       apply_edit_path, cyclomatic_complexity,
                                       ged, ged_bruteforce, graph_summary)
from policybench.synthesis import assemble_fault_tolerant_fsm, backchain
from policybench.utils import ParseError


def make_graph(name, nodes, edges) -> DirectedGraph:
    g = DirectedGraph(name)
    for node in nodes:
        g.add_node(node, node.upper())
    for source, target in edges:
        g.add_edge(source, target)
    return g


@st.composite
def graphs(draw, max_nodes=4, self_loops=True, labels=('a', 'b')):
    n = draw(st.integers(min_value=1, max_value=max_nodes))
    g = DirectedGraph('g')
    for i in range(n):
        g.add_node(f"n{i}", draw(st.sampled_from(labels)))
    pairs = [(f"n{i}", f"n{j}") for i in range(n) for j in range(n)
             if self_loops or i != j]
    pair_strategy = st.sampled_from(pairs) if pairs else st.nothing()
    for source, target in draw(st.lists(pair_strategy,
                                        unique=True, max_size=len(pairs))):
        g.add_edge(source, target, draw(st.sampled_from(('x', 'y'))))
    return g


def nx_distance(g1, g2, label_sensitive=False):
    same = (lambda a, b: a['label'] == b['label']) if label_sensitive \
        else None
    return nx.graph_edit_distance(g1.to_networkx(), g2.to_networkx(),
                                  node_match=same, edge_match=same)

# =========================================================================

class TestDirectedGraph:

    def test_parallel_edges_merge_labels(self):
        g = make_graph('g', ['a', 'b'], [])
        g.add_edge('a', 'b', 'success')
        g.add_edge('a', 'b', 'failure')
        g.add_edge('a', 'b', 'success')
        assert g.edge_count == 1
        assert g.edges[('a', 'b')] == 'success|failure'

    def test_unknown_endpoint(self):
        g = make_graph('g', ['a'], [])
        with pytest.raises(KeyError):
            g.add_edge('a', 'missing')

    def test_self_loop_is_not_a_sink(self):
        g = make_graph('g', ['a', 'b'], [('a', 'a')])
        assert g.sinks() == ['b']
        assert g.out_degree('a') == 1

    def test_remove_node_drops_edges(self):
        g = make_graph('g', ['a', 'b', 'c'], [('a', 'b'), ('b', 'c')])
        g.remove_node('b')
        assert g.edge_count == 0

    def test_edge_color(self):
        assert edge_color('success') == 'green'
        assert edge_color('failure|running') == 'red'
        assert edge_color('to_pick_cube') == 'blue'

    def test_dot_round_trip(self, fetch_doc, library):
        sm = assemble_fault_tolerant_fsm(fetch_doc.goals, library, 'fetch')
        graph = sm.to_graph('fetch "ft"')
        parsed = DirectedGraph.from_dot(graph.to_dot())
        assert parsed.name == 'fetch "ft"'
        assert parsed.nodes == graph.nodes
        assert parsed.edges == graph.edges
        assert list(parsed.edges) == list(graph.edges)

    def test_dot_subset(self):
        text = ('digraph G {\n'
                '    node [shape=box];\n'
                '    // comment\n'
                '    a -> b [label=success];\n'
                '}\n')
        g = DirectedGraph.from_dot(text)
        assert g.nodes == {'a': '', 'b': ''}
        assert g.edges == {('a', 'b'): 'success'}

    @pytest.mark.parametrize('text, line, column', [
        ('graph G {\n}\n', 1, 1),
        ('digraph G {\n    a -> \n}\n', 2, 5),
        ('digraph G {\n    a;\n', 2, 1),
        ('digraph G {\n}\nb;\n', 3, 1),
        ('digraph G {\n    a [label]\n}\n', 2, 5),
    ])
    def test_dot_errors(self, text, line, column):
        with pytest.raises(ParseError) as info:
            DirectedGraph.from_dot(text)
        assert (info.value.line, info.value.column) == (line, column)

    def test_networkx_round_trip(self):
        g = make_graph('g', ['a', 'b'], [('a', 'b'), ('b', 'b')])
        back = DirectedGraph.from_networkx(g.to_networkx())
        assert back.nodes == g.nodes
        assert back.edges == g.edges

# =========================================================================

class TestCyclomaticComplexity:

    def test_fault_tolerant_fsm(self, fetch_doc, library):
        graph = assemble_fault_tolerant_fsm(fetch_doc.goals, library) \
            .to_graph()
        assert cyclomatic_complexity(graph) == 14
        assert graph_summary(graph)['sinks'] == 1

    def test_tree_counts_leaves(self, fetch_doc, library):
        graph = backchain(fetch_doc.goals, library).to_graph('bt')
        summary = graph_summary(graph)
        assert summary['sinks'] == 8
        assert summary['cc'] == 8

    def test_empty_graph(self):
        with pytest.raises(EmptyGraph):
            cyclomatic_complexity(DirectedGraph())
        assert graph_summary(DirectedGraph())['cc'] is None

# =========================================================================

class TestGed:

    def test_path_versus_star(self):
        path = make_graph('p', ['a', 'b', 'c'], [('a', 'b'), ('b', 'c')])
        star = make_graph('s', ['a', 'b', 'c'], [('a', 'b'), ('a', 'c')])
        result = ged(path, star)
        assert result.distance == 2
        assert result.exact
        assert result.lower_bound == 0
        assert result.operations == 2

    def test_budget(self):
        path = make_graph('p', ['a', 'b', 'c'], [('a', 'b'), ('b', 'c')])
        star = make_graph('s', ['a', 'b', 'c'], [('a', 'b'), ('a', 'c')])
        result = ged(path, star, budget=0)
        assert not result.exact
        assert result.distance == 2
        with pytest.raises(BudgetExceeded) as info:
            ged(path, star, budget=0, strict=True)
        assert info.value.result.distance == 2

    def test_budget_from_settings(self):
        path = make_graph('p', ['a', 'b', 'c'], [('a', 'b'), ('b', 'c')])
        star = make_graph('s', ['a', 'b', 'c'], [('a', 'b'), ('a', 'c')])
        metrics_settings.set('GED_EXPANSION_BUDGET', 0)
        assert not ged(path, star).exact

    def test_empty_source(self):
        g = make_graph('g', ['a', 'b'], [('a', 'b')])
        result = ged(DirectedGraph(), g)
        assert result.distance == 3
        assert result.method == 'empty'

    def test_label_sensitive_costs(self):
        g1 = make_graph('g1', ['a'], [])
        g2 = make_graph('g2', ['b'], [])
        assert ged(g1, g2).distance == 0
        sensitive = EditCostModel.label_sensitive()
        assert ged(g1, g2, sensitive).distance == 1
        cheap = EditCostModel.label_sensitive(node_substitute=5)
        assert ged(g1, g2, cheap).distance == 2

    def test_negative_cost(self):
        with pytest.raises(ValueError):
            EditCostModel(edge_insert=-1)

    def test_bruteforce_limit(self):
        metrics_settings.set('BRUTEFORCE_MAX_NODES', 2)
        g = make_graph('g', ['a', 'b', 'c'], [])
        with pytest.raises(TooLarge):
            ged_bruteforce(g, g)

    def test_inconsistent_edit_path(self):
        g1 = make_graph('g1', ['a', 'b'], [('a', 'b')])
        g2 = make_graph('g2', ['a'], [])
        path = ged(g1, g2).edit_path
        with pytest.raises(MetricsError):
            apply_edit_path(g1, path[:1])

    # ---------------------------------------------------------------------

    @settings(max_examples=150, deadline=None)
    @given(graphs(), graphs())
    def test_matches_bruteforce(self, g1, g2):
        result = ged(g1, g2)
        assert result.exact
        assert result.distance == pytest.approx(ged_bruteforce(g1, g2))
        assert result.lower_bound <= result.distance
        assert sum(op.cost for op in result.edit_path) == \
            pytest.approx(result.distance)

    @settings(max_examples=100, deadline=None)
    @given(graphs(), graphs())
    def test_edit_path_reaches_target(self, g1, g2):
        result = ged(g1, g2)
        assert apply_edit_path(g1, result.edit_path).same_structure(g2)

    @settings(max_examples=100, deadline=None)
    @given(graphs())
    def test_identity(self, g):
        assert ged(g, g.copy('other')).distance == 0

    @settings(max_examples=100, deadline=None)
    @given(graphs(), graphs())
    def test_symmetry(self, g1, g2):
        assert ged(g1, g2).distance == pytest.approx(ged(g2, g1).distance)

    @settings(max_examples=100, deadline=None)
    @given(graphs(max_nodes=3), graphs(max_nodes=3), graphs(max_nodes=3))
    def test_triangle_inequality(self, g1, g2, g3):
        assert ged(g1, g3).distance <= \
            ged(g1, g2).distance + ged(g2, g3).distance + 1e-9

    @settings(max_examples=40, deadline=None)
    @given(graphs(max_nodes=3, self_loops=False),
           graphs(max_nodes=3, self_loops=False), st.booleans())
    def test_matches_networkx(self, g1, g2, label_sensitive):
        costs = EditCostModel.label_sensitive() if label_sensitive else None
        assert ged(g1, g2, costs).distance == \
            pytest.approx(nx_distance(g1, g2, label_sensitive))

    def test_policy_graphs_meet_lower_bound(self, fetch_doc, library):
        base = assemble_fault_tolerant_fsm(fetch_doc.goals, library)
        edited = edit(base, 'add-recharge', library).policy
        result = ged(base.to_graph(), edited.to_graph())
        assert result.exact
        assert result.distance == result.lower_bound == 8
