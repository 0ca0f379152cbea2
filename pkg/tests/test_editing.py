import pytest

from policybench.BehaviorTree import NodeKind
from policybench.editing import (EditScriptError, add_dock, add_recharge,
                                 edit, parse_script)
from policybench.graph_metrics import cyclomatic_complexity, ged
from policybench.runner import build_policy
from policybench.synthesis import DONE


@pytest.fixture
def tree(fetch_doc):
    return build_policy(fetch_doc, 'bt', 'fetch')


@pytest.fixture
def machine(fetch_doc):
    return build_policy(fetch_doc, 'fsm', 'fetch')


def counts(policy):
    graph = policy.to_graph()
    return graph.node_count, graph.edge_count

# =========================================================================

class TestScript:

    def test_commands(self):
        commands = parse_script('add-recharge  # battery first\n'
                                '\n'
                                'remove(#14); unwrap\n'
                                'insert(#0, 2) (fallback a()? b()!)\n')
        assert [(c.kind, c.line) for c in commands] == [
            ('add-recharge', 1), ('remove', 3), ('unwrap', 3),
            ('insert', 4)]
        assert commands[1].args == ('#14',)
        handle, index, subtree = commands[3].args
        assert (handle, index, subtree.node_count) == (0, 2, 3)

    def test_state_machine_commands(self):
        connect, sequence = parse_script(
            'connect recharge: recharge() when not battery_ok()\n'
            'sequence dock: dock() after place_cube_delivery '
            'before succeeded')
        sid, ref, guard = connect.args
        assert (sid, str(ref), str(guard)) == \
            ('recharge', 'recharge()', 'not battery_ok()')
        assert sequence.args[2:] == ('place_cube_delivery', 'succeeded')

    @pytest.mark.parametrize('script, expected', [
        ('add-recharge\nfly away', "line 2: unknown edit command"),
        ('remove()', 'line 1: remove needs a target'),
        ('insert(#0, 1) (sequence)', 'line 1'),
        ('connect x: y( when', 'line 1'),
    ])
    def test_unreadable(self, script, expected):
        with pytest.raises(EditScriptError, match=expected):
            parse_script(script)

# =========================================================================

class TestTreeEdits:

    def test_add_recharge(self, tree, library):
        result = edit(tree, 'add-recharge', library)
        edited = result.policy
        assert result.receipt.elementary_ops == 8
        assert [r.operation for r in result.receipts] == ['add-recharge']
        assert counts(edited) == (18, 17)
        root = edited.nodes[edited.root]
        assert root.kind is NodeKind.SEQUENCE
        first = edited.nodes[root.children[0]]
        assert [edited.nodes[c].label for c in first.children] == [
            'battery_ok()?', 'recharge()!']
        assert counts(tree) == (14, 13)
        assert ged(tree.to_graph(), edited.to_graph()).distance == 8

    def test_add_dock_after_recharge(self, tree, library):
        recharged = edit(tree, 'add-recharge', library).policy
        result = edit(recharged, 'add-dock', library)
        docked = result.policy
        assert result.receipt.elementary_ops == 6
        assert counts(docked) == (21, 20)
        root = docked.nodes[docked.root]
        last = docked.nodes[root.children[-1]]
        assert docked.nodes[last.children[1]].label == 'dock()!'
        assert ged(recharged.to_graph(), docked.to_graph()).distance == 6

    def test_add_dock_wraps_fallback_root(self, tree, library):
        result = edit(tree, 'add-dock', library)
        assert result.receipt.elementary_ops == 8
        assert counts(result.policy) == (18, 17)

    def test_remove_restores_baseline(self, tree, library):
        recharged = edit(tree, 'add-recharge', library).policy
        restored = edit(recharged, 'remove(recharge()!); unwrap').policy
        assert restored == tree

    def test_remove_by_handle(self, tree):
        edited = edit(tree, 'remove(#13)').policy
        assert edited.node_count == 13

    def test_insert(self, tree, library):
        wrapped = edit(tree, 'add-dock', library).policy
        result = edit(wrapped, 'insert(#0, 0) '
                               '(fallback battery_ok()? recharge()!)',
                      library)
        assert result.policy.node_count == 21
        assert result.receipt.created == 3

    def test_insert_unknown_skill(self, tree, library):
        with pytest.raises(EditScriptError, match="unknown skill"):
            edit(tree, 'insert(#0, 0) (fallback a()? fly()!)', library)

    @pytest.mark.parametrize('script, expected', [
        ('remove(#0)', 'line 1'),
        ('remove(#99)', 'line 1'),
        ('remove(#x)', 'not a node handle'),
        ('remove(grab(cube)!)', "no node labelled"),
        ('add-recharge\nunwrap', 'line 2'),
        ('connect r: recharge()', 'state machines only'),
        ('sequence d: dock() after a before b', 'state machines only'),
    ])
    def test_rejected(self, tree, library, script, expected):
        with pytest.raises(EditScriptError, match=expected):
            edit(tree, script, library)

    def test_needs_library(self, tree):
        with pytest.raises(EditScriptError, match='skill library'):
            edit(tree, 'add-recharge')

    def test_original_untouched(self, tree, library):
        before = tree.signature()
        edit(tree, 'add-recharge; add-dock', library)
        assert tree.signature() == before

# =========================================================================

class TestMachineEdits:

    def test_add_recharge(self, machine, library):
        result = edit(machine, 'add-recharge', library)
        receipt = result.receipt
        assert (receipt.created, receipt.attached, receipt.detached) == \
            (1, 7, 0)
        assert counts(result.policy) == (7, 25)
        assert cyclomatic_complexity(result.policy.to_graph()) == 20
        assert ged(machine.to_graph(),
                   result.policy.to_graph()).distance == 8

    def test_connect_matches_add_recharge(self, machine, library):
        connected = edit(machine, 'connect recharge: recharge() '
                                  'when not battery_ok()', library).policy
        assert connected == edit(machine, 'add-recharge', library).policy

    def test_add_dock(self, machine, library):
        recharged = edit(machine, 'add-recharge', library).policy
        result = edit(recharged, 'add-dock', library)
        receipt = result.receipt
        assert (receipt.created, receipt.attached, receipt.detached) == \
            (1, 6, 1)
        docked = result.policy
        assert counts(docked) == (8, 30)
        assert cyclomatic_complexity(docked.to_graph()) == 24
        assert docked.transitions[('place_cube_delivery', 'success')] == \
            'dock'
        assert docked.transitions[('dock', 'recharge_needed')] == 'recharge'
        assert str(docked.guards[DONE]) == \
            'object_at(cube, delivery), robot_at(inspection_table)'
        assert str(docked.guards['to_dock']) == \
            'object_at(cube, delivery), not robot_at(inspection_table)'

    def test_sequence_command(self, machine):
        result = edit(machine, 'sequence dock: dock() after '
                               'place_cube_delivery before succeeded')
        assert result.receipt.created == 1
        assert result.policy.transitions[('dock', 'success')] == 'succeeded'

    def test_remove_connected_state(self, machine, library):
        recharged = edit(machine, 'add-recharge', library).policy
        restored = edit(recharged, 'remove(recharge())').policy
        assert restored.structure() == machine.structure()
        assert counts(restored) == (6, 18)

    def test_remove_by_state_id(self, machine):
        result = edit(machine, 'remove(pick_cube)')
        assert 'pick_cube' not in result.policy.states
        assert result.policy.transitions[('move_to_cube', 'success')] == \
            'move_to_delivery'

    @pytest.mark.parametrize('script, expected', [
        ('unwrap', 'behavior trees only'),
        ('insert(#0, 0) a()!', 'behavior trees only'),
        ('remove(IDLE)', 'line 1'),
        ('remove(nowhere)', 'line 1'),
        ('sequence d: dock() after IDLE before succeeded', 'line 1'),
        ('add-recharge\nadd-recharge', 'line 2'),
    ])
    def test_rejected(self, machine, library, script, expected):
        with pytest.raises(EditScriptError, match=expected):
            edit(machine, script, library)

    def test_sequential_machine_has_no_idle(self, fetch_doc, library):
        sm = build_policy(fetch_doc, 'fsm-seq')
        with pytest.raises(EditScriptError, match='fault-tolerant'):
            add_recharge(sm, library)
        receipt = add_dock(sm, library)
        assert receipt.created == 1
        assert sm.transitions[('dock', 'failure')] == 'failed'

    def test_record(self, machine, library):
        record = edit(machine, 'add-recharge; add-dock', library).to_record()
        assert record['operation'] == 'script'
        assert record['elementary_ops'] == 16
        assert [c['operation'] for c in record['commands']] == [
            'add-recharge', 'add-dock']
