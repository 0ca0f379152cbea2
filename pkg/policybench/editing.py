"""
Policy Edits
============

Edit scripts change an existing policy through the engine operations and
report the cost of the change as an
:class:`~policybench.skills.EditReceipt`.

One command per line (or separated by ``;``)::

    add-recharge
    add-dock
    remove(recharge()!)
    remove(#14)
    unwrap
    insert(#0, 2) (fallback battery_ok()? recharge()!)
    connect recharge: recharge() when not battery_ok()
    sequence dock: dock() after place_cube_delivery before succeeded

``add-recharge`` guards the task with the battery: a behavior tree gets a
``Fallback(battery_ok?, recharge!)`` as the first child of a Sequence root
(wrapping the root if needed); a fault-tolerant state machine gets a
connected ``recharge`` state. ``add-dock`` appends the docking step: a
``Fallback(robot_at(inspection_table)?, dock!)`` at the end of the root
Sequence, or a ``dock`` state between the last task state and
``succeeded``.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

from .BehaviorTree import NodeKind, PolicyTree, TreeError
from .StateMachine import (SUCCEEDED, SUCCESS, MachineError, State,
                           StateMachine)
from .policydsl import Parser, Policy, parse_tree
from .skills import CallRef, EditReceipt, Guard, Literal, SkillLibrary
from .synthesis import DONE, SynthesisError, expand, state_id
from .utils import ParseError

logger = logging.getLogger(__name__)

BATTERY_CONDITION = CallRef('battery_ok')
DOCK_CONDITION = CallRef('robot_at', ('inspection_table',))

_REMOVE_RE = re.compile(r'^remove\s*\((.*)\)$')
_INSERT_RE = re.compile(r'^insert\s*\(\s*#(\d+)\s*,\s*(\d+)\s*\)\s*(.+)$')
# a "#" followed by a digit is a node handle
_COMMENT_RE = re.compile(r"(?:^|\s)#(?!\d).*$")

# =========================================================================

class EditScriptError(ValueError):
    """An edit command cannot be read or applied."""

# =========================================================================

@dataclass(frozen=True)
class EditCommand:
    """
    One parsed edit command.

    :param kind: Command name
    :param args: Command arguments
    :param line: Script line (1-based)
    """
    kind: str
    args: Tuple = ()
    line: int = 0

    def __str__(self):
        return self.kind if not self.args else \
            f"{self.kind} {' '.join(str(a) for a in self.args)}"


@dataclass
class EditResult:
    """Edited policy with the total and per-command receipts."""
    policy: Policy
    receipt: EditReceipt
    receipts: List[EditReceipt] = field(default_factory=list)

    def to_record(self):
        record = self.receipt.to_record()
        record['commands'] = [r.to_record() for r in self.receipts]
        return record

# =========================================================================

def _statements(text: str):
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = _COMMENT_RE.sub('', raw)
        for part in line.split(';'):
            part = part.strip()
            if part:
                yield lineno, part


def _parse_connect(text: str, lineno: int) -> EditCommand:
    parser = Parser(text)
    parser.expect('connect')
    sid = parser.expect_name('a state id').text
    parser.expect(':')
    ref, _ = parser.ref()
    literals = []
    if parser.accept('when'):
        literals = parser.comma_list(parser.literal)
    parser.end_statement()
    return EditCommand('connect', (sid, ref, Guard(tuple(literals))), lineno)


def _parse_sequence(text: str, lineno: int) -> EditCommand:
    parser = Parser(text)
    parser.expect('sequence')
    sid = parser.expect_name('a state id').text
    parser.expect(':')
    ref, _ = parser.ref()
    parser.expect('after')
    preceding = parser.expect_name('a state id').text
    parser.expect('before')
    following = parser.expect_name('a state id or outcome').text
    parser.end_statement()
    return EditCommand('sequence', (sid, ref, preceding, following), lineno)


def parse_script(text: str) -> List[EditCommand]:
    """
    Read an edit script.

    :raises EditScriptError: naming the line of an unreadable command
    """
    commands = []
    for lineno, part in _statements(text):
        try:
            if part in ('add-recharge', 'add-dock', 'unwrap'):
                commands.append(EditCommand(part, (), lineno))
            elif _REMOVE_RE.match(part):
                target = _REMOVE_RE.match(part).group(1).strip()
                if not target:
                    raise EditScriptError(f"line {lineno}: remove needs a "
                                          f"target")
                commands.append(EditCommand('remove', (target,), lineno))
            elif _INSERT_RE.match(part):
                handle, index, sexpr = _INSERT_RE.match(part).groups()
                commands.append(EditCommand(
                    'insert', (int(handle), int(index), parse_tree(sexpr)),
                    lineno))
            elif part.startswith('connect'):
                commands.append(_parse_connect(part, lineno))
            elif part.startswith('sequence'):
                commands.append(_parse_sequence(part, lineno))
            else:
                raise EditScriptError(f"line {lineno}: unknown edit "
                                      f"command '{part}'")
        except ParseError as e:
            raise EditScriptError(f"line {lineno}: {e.describe()}") from None
    return commands

# =========================================================================

def _require_library(library: Optional[SkillLibrary], what: str):
    if library is None:
        raise EditScriptError(f"{what} needs the skill library")


def _fault_tolerant(policy: Policy, what: str) -> StateMachine:
    if policy.idle is None:
        raise EditScriptError(f"{what} needs a fault-tolerant state machine")
    return policy


def _sequence_root(tree: PolicyTree) -> List[EditReceipt]:
    if tree.nodes[tree.root].kind is NodeKind.SEQUENCE:
        return []
    return [tree.wrap_root(NodeKind.SEQUENCE)]


def add_recharge(policy: Policy,
                 library: Optional[SkillLibrary]) -> EditReceipt:
    """Guard the task by the battery level (see module description)."""
    _require_library(library, 'add-recharge')
    branch = expand(BATTERY_CONDITION, library)
    if isinstance(policy, PolicyTree):
        receipts = _sequence_root(policy)
        receipts.append(policy.insert_subtree(policy.root, 0,
                                              branch.to_tree()))
        return EditReceipt.combine('add-recharge', receipts)
    sm = _fault_tolerant(policy, 'add-recharge')
    sid = state_id(branch.skill, set(sm.states) | set(sm.terminals))
    receipt = sm.add_connected_state(
        State(sid, branch.skill), condition=f"{branch.skill.name}_needed",
        idle_condition=f"resume_{sid}",
        guard=Guard((Literal(BATTERY_CONDITION, False),)))
    receipt.operation = 'add-recharge'
    return receipt


def _last_task_state(sm: StateMachine) -> str:
    last = [s.id for s in sm.action_states
            if sm.transitions.get((s.id, SUCCESS)) == SUCCEEDED]
    if len(last) != 1:
        raise EditScriptError(f"expected one state leading to "
                              f"'{SUCCEEDED}', found {len(last)}")
    return last[0]


def add_dock(policy: Policy, library: Optional[SkillLibrary]) -> EditReceipt:
    """Append the docking step (see module description)."""
    _require_library(library, 'add-dock')
    branch = expand(DOCK_CONDITION, library)
    if isinstance(policy, PolicyTree):
        receipts = _sequence_root(policy)
        root = policy.nodes[policy.root]
        receipts.append(policy.insert_subtree(policy.root,
                                              len(root.children),
                                              branch.to_tree()))
        return EditReceipt.combine('add-dock', receipts)
    sm = policy
    preceding = _last_task_state(sm)
    sid = state_id(branch.skill, set(sm.states) | set(sm.terminals))
    resume = None
    done = sm.guards.get(DONE)
    if sm.idle is not None and done is not None:
        resume = done.extended(Literal(DOCK_CONDITION, False))
    receipt = sm.add_sequential_state(State(sid, branch.skill), preceding,
                                      SUCCEEDED, resume_guard=resume)
    if done is not None:
        # the task is only done once docked
        sm.guards[DONE] = done.extended(Literal(DOCK_CONDITION))
    receipt.operation = 'add-dock'
    return receipt


def remove(policy: Policy, target: str) -> EditReceipt:
    """
    Remove a node or state.

    For trees ``target`` is ``#<handle>`` or a node label; naming an action
    that is guarded by a condition (``Fallback(c?, a!)``) removes the whole
    branch. For state machines it is a state id or a skill reference.
    """
    if isinstance(policy, PolicyTree):
        if target.startswith("#"):
            try:
                handle = int(target[1:])
            except ValueError:
                raise EditScriptError(f"not a node handle: '{target}'") \
                    from None
        else:
            handle = policy.find(target)
            if handle is None:
                raise EditScriptError(f"no node labelled '{target}'")
            node = policy.nodes[handle]
            parent = policy.nodes.get(node.parent) \
                if node.parent is not None else None
            if node.kind is NodeKind.ACTION and parent is not None and \
                    parent.kind is NodeKind.FALLBACK and \
                    policy.nodes[parent.children[0]].kind is \
                    NodeKind.CONDITION and node.parent != policy.root:
                handle = node.parent
        policy.remove_subtree(handle)
        receipt = policy.last_receipt
    else:
        sid = target
        if sid not in policy.states:
            sid = next((s.id for s in policy.action_states
                        if str(s.binding) == target), target)
        receipt = policy.remove_state(sid)
    receipt.operation = f"remove({target})"
    return receipt


def apply_command(policy: Policy, command: EditCommand,
                  library: Optional[SkillLibrary] = None) -> EditReceipt:
    """Apply one command in place."""
    is_tree = isinstance(policy, PolicyTree)
    kind = command.kind
    if kind == 'add-recharge':
        return add_recharge(policy, library)
    if kind == 'add-dock':
        return add_dock(policy, library)
    if kind == 'remove':
        return remove(policy, command.args[0])
    if kind in ('unwrap', 'insert') and not is_tree:
        raise EditScriptError(f"'{kind}' applies to behavior trees only")
    if kind in ('connect', 'sequence') and is_tree:
        raise EditScriptError(f"'{kind}' applies to state machines only")
    if kind == 'unwrap':
        return policy.unwrap_root()
    if kind == 'insert':
        handle, index, subtree = command.args
        if library is not None:
            for leaf in subtree.leaves():
                if leaf.binding.name not in library:
                    raise EditScriptError(f"unknown skill or condition "
                                          f"'{leaf.binding.name}'")
        return policy.insert_subtree(handle, index, subtree)
    if kind == 'connect':
        sid, ref, guard = command.args
        sm = _fault_tolerant(policy, 'connect')
        return sm.add_connected_state(State(sid, ref), f"{ref.name}_needed",
                                      f"resume_{sid}", guard)
    if kind == 'sequence':
        sid, ref, preceding, following = command.args
        return policy.add_sequential_state(State(sid, ref), preceding,
                                           following)
    raise EditScriptError(f"unknown edit command '{kind}'")


def apply_script(policy: Policy, commands: List[EditCommand],
                 library: Optional[SkillLibrary] = None) -> EditResult:
    """
    Apply commands to a copy of ``policy``.

    :raises EditScriptError: on an unreadable command or a failing engine
        operation, naming the script line
    """
    edited = policy.copy()
    receipts = []
    for command in commands:
        try:
            receipt = apply_command(edited, command, library)
        except (TreeError, MachineError, SynthesisError, KeyError) as e:
            raise EditScriptError(f"line {command.line}: {command}: "
                                  f"{e}") from None
        logger.info('%s: %d elementary operations, %d touched',
                    receipt.operation, receipt.elementary_ops,
                    receipt.touched)
        receipts.append(receipt)
    total = EditReceipt.combine('script', receipts)
    return EditResult(edited, total, receipts)


def edit(policy: Policy, script: str,
         library: Optional[SkillLibrary] = None) -> EditResult:
    """Parse and apply an edit script."""
    return apply_script(policy, parse_script(script), library)
