"""
Behavior Tree
=============

Ordered-tree policy with two memoryless control node kinds (Sequence,
Fallback) and two leaf kinds (Action, Condition).

Nodes are addressed by integer handles that stay valid across edits, so an
edit reaches its parent in constant time. Inserted subtrees are copied and
re-handled from the receiving tree's counter.

.. rubric:: Tick semantics

A tick starts at the root and runs depth-first, left to right:

- Sequence returns the first child status that is not Success, or Success;
- Fallback returns the first child status that is not Failure, or Failure;
- Condition returns Success or Failure immediately;
- Action sends its skill goal (unless an execution is still live) and
  reports the monitored status.

Actions that hold a live execution but were not reached in the current tick
are cancelled afterwards.
"""

import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Tuple

from .Graph import DirectedGraph
from .skills import CallRef, EditReceipt, Status, WorldView

logger = logging.getLogger(__name__)

# =========================================================================

class TreeError(ValueError):
    """Base class of behavior tree errors."""


class UnresolvedBinding(TreeError):
    """A leaf references a skill or condition the world does not know."""


class MalformedTree(TreeError):
    """The structure violates the tree arity rules."""


class NotAControlNode(TreeError):
    """Children can only be attached to Sequence or Fallback nodes."""


class IndexOutOfRange(TreeError, IndexError):
    """Child position outside the parent's child list."""


class RootRemoval(TreeError):
    """The root cannot be detached."""


class UnknownHandle(TreeError, KeyError):
    """No node with this handle."""

    def __str__(self):
        return str(self.args[0]) if self.args else ''

# =========================================================================

class NodeKind(Enum):
    SEQUENCE = "sequence"
    FALLBACK = "fallback"
    ACTION = "action"
    CONDITION = "condition"

    @property
    def is_control(self) -> bool:
        return self in (NodeKind.SEQUENCE, NodeKind.FALLBACK)

    def mirrored(self) -> 'NodeKind':
        if self is NodeKind.SEQUENCE:
            return NodeKind.FALLBACK
        if self is NodeKind.FALLBACK:
            return NodeKind.SEQUENCE
        return self


@dataclass
class BtNode:
    """
    One node of a :class:`PolicyTree`.

    :param kind: Node kind
    :param binding: Skill or condition reference (leaves only)
    :param children: Ordered child handles (control nodes only)
    :param parent: Parent handle, ``None`` at the root
    :param execution: Live skill execution of an Action leaf
    """
    kind: NodeKind
    binding: Optional[CallRef] = None
    children: List[int] = field(default_factory=list)
    parent: Optional[int] = None
    execution: object = None

    @property
    def label(self) -> str:
        if self.kind is NodeKind.CONDITION:
            return f"{self.binding}?"
        if self.kind is NodeKind.ACTION:
            return f"{self.binding}!"
        return self.kind.value

# =========================================================================

class PolicyTree:
    """
    Behavior tree with handle-addressed nodes.

    Build trees with the :meth:`condition`, :meth:`action`,
    :meth:`sequence` and :meth:`fallback` constructors::

        tree = PolicyTree.fallback(
            PolicyTree.condition(CallRef('battery_ok')),
            PolicyTree.action(CallRef('recharge')))

    :param name: Name written in the policy document
    """

    def __init__(self, name: str = ''):
        self.name = name
        self._nodes: Dict[int, BtNode] = {}
        # subtrees unlinked by remove_subtree, not yet moved out
        self._removed: List[Tuple[int, 'PolicyTree']] = []
        self._source: Optional['PolicyTree'] = None
        self.root: Optional[int] = None
        self.last_trace: List[Tuple[int, Status]] = []
        self.last_receipt: Optional[EditReceipt] = None
        self._next_handle = 0

    @property
    def nodes(self) -> Dict[int, BtNode]:
        """Node table by handle."""
        if self._source is not None:
            self._source._release()
        if self._removed:
            self._release()
        return self._nodes

    def _release(self):
        """Move the nodes of removed subtrees to the trees returned."""
        removed, self._removed = self._removed, []
        for handle, target in removed:
            stack = [handle]
            while stack:
                current = stack.pop()
                node = self._nodes.pop(current)
                target._nodes[current] = node
                stack.extend(node.children)
            target._source = None

    # ---------------------------------------------------------------------
    # construction

    @classmethod
    def leaf(cls, kind: NodeKind, ref: CallRef) -> 'PolicyTree':
        if kind.is_control:
            raise MalformedTree(f"{kind.value} is not a leaf kind")
        tree = cls()
        tree.root = tree._new_node(kind, ref)
        return tree

    @classmethod
    def control(cls, kind: NodeKind,
                children: List['PolicyTree']) -> 'PolicyTree':
        if not kind.is_control:
            raise MalformedTree(f"{kind.value} is not a control kind")
        if not children:
            raise MalformedTree(f"{kind.value} node needs at least one child")
        tree = cls()
        tree.root = tree._new_node(kind)
        for child in children:
            handle = tree._graft(child, child.root)
            tree.nodes[handle].parent = tree.root
            tree.nodes[tree.root].children.append(handle)
        return tree

    @classmethod
    def condition(cls, ref: CallRef) -> 'PolicyTree':
        return cls.leaf(NodeKind.CONDITION, ref)

    @classmethod
    def action(cls, ref: CallRef) -> 'PolicyTree':
        return cls.leaf(NodeKind.ACTION, ref)

    @classmethod
    def sequence(cls, *children: 'PolicyTree') -> 'PolicyTree':
        return cls.control(NodeKind.SEQUENCE, list(children))

    @classmethod
    def fallback(cls, *children: 'PolicyTree') -> 'PolicyTree':
        return cls.control(NodeKind.FALLBACK, list(children))

    def _new_node(self, kind: NodeKind,
                  binding: Optional[CallRef] = None) -> int:
        handle = self._next_handle
        self._next_handle += 1
        self.nodes[handle] = BtNode(kind, binding)
        return handle

    def _graft(self, other: 'PolicyTree', handle: int) -> int:
        """
        Copy the subtree of ``other`` at ``handle`` into this tree.

        New handles are allocated in pre-order of the copied subtree.
        """
        source_nodes = other.nodes
        nodes = self.nodes
        top = None
        stack = [(handle, None)]
        while stack:
            current, parent = stack.pop()
            source = source_nodes[current]
            new = self._new_node(source.kind, source.binding)
            if parent is None:
                top = new
            else:
                nodes[new].parent = parent
                nodes[parent].children.append(new)
            stack.extend((c, new) for c in reversed(source.children))
        return top

    def copy(self) -> 'PolicyTree':
        """Independent copy keeping all handles."""
        other = PolicyTree(self.name)
        other._next_handle = self._next_handle
        other.root = self.root
        for handle, node in self.nodes.items():
            other.nodes[handle] = BtNode(node.kind, node.binding,
                                         list(node.children), node.parent)
        return other

    # ---------------------------------------------------------------------
    # access

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return sum(len(n.children) for n in self.nodes.values())

    def node(self, handle: int) -> BtNode:
        try:
            return self.nodes[handle]
        except KeyError:
            raise UnknownHandle(f"no node with handle {handle}") from None

    def children(self, handle: int) -> List[int]:
        return list(self.node(handle).children)

    def parent(self, handle: int) -> Optional[int]:
        return self.node(handle).parent

    def preorder(self, handle: Optional[int] = None) -> Iterator[int]:
        """Handles of a subtree in pre-order (whole tree by default)."""
        start = self.root if handle is None else handle
        if start is None:
            return
        stack = [start]
        while stack:
            current = stack.pop()
            yield current
            stack.extend(reversed(self.nodes[current].children))

    def subtree_size(self, handle: int) -> int:
        return sum(1 for _ in self.preorder(handle))

    def depth(self) -> int:
        """Number of nodes on the longest root-to-leaf path."""
        if self.root is None:
            return 0
        best = 0
        stack = [(self.root, 1)]
        while stack:
            handle, level = stack.pop()
            best = max(best, level)
            stack.extend((c, level + 1) for c in self.nodes[handle].children)
        return best

    def find(self, label: str) -> Optional[int]:
        """First handle in pre-order whose node label equals ``label``."""
        return next((h for h in self.preorder()
                     if self.nodes[h].label == label), None)

    def leaves(self) -> Iterator[BtNode]:
        return (self.nodes[h] for h in self.preorder()
                if not self.nodes[h].kind.is_control)

    def validate(self, world: Optional[WorldView] = None):
        """
        Check the tree invariants, and leaf bindings against ``world``.

        :raises MalformedTree: on arity or link violations
        :raises UnresolvedBinding: if a leaf is unknown to ``world``
        """
        if self.root is None:
            raise MalformedTree("tree has no root")
        if self.nodes[self.root].parent is not None:
            raise MalformedTree("root has a parent")
        seen = 0
        for handle in self.preorder():
            seen += 1
            node = self.nodes[handle]
            if node.kind.is_control and not node.children:
                raise MalformedTree(f"{node.kind.value} node {handle} "
                                    f"has no children")
            if not node.kind.is_control and node.children:
                raise MalformedTree(f"leaf {handle} has children")
            for child in node.children:
                if self.nodes[child].parent != handle:
                    raise MalformedTree(f"node {child} has a broken "
                                        f"parent link")
            if world is not None:
                self._check_binding(node, world)
        if seen != len(self.nodes):
            raise MalformedTree(f"{len(self.nodes) - seen} nodes are not "
                                f"reachable from the root")

    @staticmethod
    def _check_binding(node: BtNode, world: WorldView):
        if node.kind is NodeKind.ACTION and \
                not world.knows_skill(node.binding.name):
            raise UnresolvedBinding(f"unknown skill '{node.binding.name}'")
        if node.kind is NodeKind.CONDITION and \
                not world.knows_condition(node.binding.name):
            raise UnresolvedBinding(f"unknown condition "
                                    f"'{node.binding.name}'")

    # ---------------------------------------------------------------------
    # execution

    def tick(self, world: WorldView) -> Status:
        """
        Propagate one tick from the root and return the root status.

        Afterwards, live executions of actions not reached in this tick are
        cancelled. The ``(handle, status)`` pairs of all evaluated nodes
        are kept in :attr:`last_trace` in completion order.
        """
        if self.root is None:
            raise MalformedTree("tree has no root")
        self.last_trace = []
        status = self._tick(world)
        ticked = {h for h, _ in self.last_trace}
        for handle, node in self.nodes.items():
            if node.execution is not None and handle not in ticked:
                logger.debug('preempting %s', node.label)
                world.cancel(node.execution)
                node.execution = None
        return status

    def _tick_leaf(self, node: BtNode, world: WorldView) -> Status:
        self._check_binding(node, world)
        if node.kind is NodeKind.CONDITION:
            return Status.SUCCESS if world.evaluate(node.binding) \
                else Status.FAILURE
        if node.execution is None:
            node.execution = world.send(node.binding)
        status = world.monitor(node.execution)
        if status is not Status.RUNNING:
            node.execution = None
        return status

    def _tick(self, world: WorldView) -> Status:
        nodes = self.nodes
        status = None
        # frames of [handle, index of the next child to tick]
        stack = [[self.root, 0]]
        while stack:
            frame = stack[-1]
            handle, position = frame
            node = nodes[handle]
            if node.kind.is_control:
                if not node.children:
                    raise MalformedTree(f"{node.kind.value} node {handle} "
                                        f"has no children")
                # Sequence continues on Success, Fallback on Failure
                proceed = Status.SUCCESS if node.kind is NodeKind.SEQUENCE \
                    else Status.FAILURE
                if (position == 0 or status is proceed) and \
                        position < len(node.children):
                    frame[1] += 1
                    stack.append([node.children[position], 0])
                    continue
            else:
                status = self._tick_leaf(node, world)
            stack.pop()
            self.last_trace.append((handle, status))
        return status

    def active_actions(self) -> List[int]:
        """Handles of actions that hold a live execution."""
        return [h for h in self.preorder()
                if self.nodes[h].execution is not None]

    def reset(self, world: Optional[WorldView] = None):
        """Drop (and cancel, given a world) all live executions."""
        for node in self.nodes.values():
            if node.execution is not None and world is not None:
                world.cancel(node.execution)
            node.execution = None
        self.last_trace = []

    # ---------------------------------------------------------------------
    # edits

    def insert_subtree(self, parent: int, index: int,
                       subtree: 'PolicyTree') -> EditReceipt:
        """
        Attach a copy of ``subtree`` as the ``index``-th child of ``parent``.

        Only the parent's child list changes. One elementary operation is
        counted per node created and per link attached.
        """
        node = self.node(parent)
        if not node.kind.is_control:
            raise NotAControlNode(f"node {parent} ({node.label}) is a leaf")
        if not 0 <= index <= len(node.children):
            raise IndexOutOfRange(f"index {index} outside 0.."
                                  f"{len(node.children)}")
        if subtree.root is None:
            raise MalformedTree("cannot insert an empty tree")
        handle = self._graft(subtree, subtree.root)
        self.nodes[handle].parent = parent
        node.children.insert(index, handle)
        size = subtree.node_count
        receipt = EditReceipt('insert_subtree', created=size, attached=size,
                              touched=2 + size, node=handle, parent=parent,
                              index=index)
        self.last_receipt = receipt
        logger.debug('inserted %d nodes under %d at %d', size, parent, index)
        return receipt

    def remove_subtree(self, handle: int) -> 'PolicyTree':
        """
        Detach the subtree rooted at ``handle`` and return it.

        Handles of the detached nodes are kept in the returned tree. The
        receipt, with the former parent and position, is stored in
        :attr:`last_receipt`.

        Only the link to the parent is cut: the edit touches the parent
        and the subtree root whatever the subtree size. The detached nodes
        leave this tree's node table the next time either tree reads it.
        """
        node = self.node(handle)
        if handle == self.root:
            raise RootRemoval("the root cannot be removed")
        parent = self._nodes[node.parent]
        if len(parent.children) == 1:
            raise MalformedTree(f"removing node {handle} would leave "
                                f"{parent.kind.value} node {node.parent} "
                                f"without children")
        index = parent.children.index(handle)
        del parent.children[index]
        detached = PolicyTree(self.name)
        detached.root = handle
        detached._next_handle = self._next_handle
        detached._source = self
        self._removed.append((handle, detached))
        self.last_receipt = EditReceipt('remove_subtree', detached=1,
                                        touched=2, node=handle,
                                        parent=node.parent, index=index)
        node.parent = None
        logger.debug('removed subtree %d from %d', handle,
                     self.last_receipt.parent)
        return detached

    def wrap_root(self, kind: NodeKind = NodeKind.SEQUENCE) -> EditReceipt:
        """Put a new control node above the root."""
        if not kind.is_control:
            raise NotAControlNode(f"{kind.value} cannot have children")
        if self.root is None:
            raise MalformedTree("tree has no root")
        old = self.root
        self.root = self._new_node(kind)
        self.nodes[self.root].children.append(old)
        self.nodes[old].parent = self.root
        receipt = EditReceipt('wrap_root', created=1, attached=1, touched=2,
                              node=self.root)
        self.last_receipt = receipt
        return receipt

    def unwrap_root(self) -> EditReceipt:
        """Remove a control root that has exactly one child."""
        root = self.node(self.root)
        if len(root.children) != 1:
            raise MalformedTree("only a root with one child can be unwrapped")
        old = self.root
        self.root = root.children[0]
        self.nodes[self.root].parent = None
        del self.nodes[old]
        receipt = EditReceipt('unwrap_root', created=0, detached=2,
                              touched=2, node=self.root)
        self.last_receipt = receipt
        return receipt

    # ---------------------------------------------------------------------
    # conversions

    def to_graph(self, name: Optional[str] = None) -> DirectedGraph:
        """One node ``n<handle>`` per tree node in pre-order."""
        graph = DirectedGraph(name or self.name or 'bt')
        for handle in self.preorder():
            graph.add_node(f"n{handle}", self.nodes[handle].label)
        for handle in self.preorder():
            for child in self.nodes[handle].children:
                graph.add_edge(f"n{handle}", f"n{child}")
        return graph

    def mirrored(self) -> 'PolicyTree':
        """Copy with every Sequence and Fallback swapped."""
        other = self.copy()
        for node in other.nodes.values():
            node.kind = node.kind.mirrored()
        return other

    def to_sexpr(self, indent: str = '    ') -> str:
        """Render as the s-expression used in policy documents."""
        if self.root is None:
            return ''
        nodes = self.nodes
        lines = []
        # None closes the innermost open control node
        stack = [(self.root, 0)]
        while stack:
            handle, level = stack.pop()
            if handle is None:
                lines[-1] += ')'
                continue
            node = nodes[handle]
            pad = indent * level
            if not node.kind.is_control:
                lines.append(pad + node.label)
                continue
            lines.append(f"{pad}({node.kind.value}")
            stack.append((None, level))
            stack.extend((c, level + 1) for c in reversed(node.children))
        return '\n'.join(lines)

    def signature(self, handle: Optional[int] = None) -> tuple:
        """
        Shape of a subtree (whole tree by default), independent of handles.

        A flat tuple of ``(kind, binding, number of children)`` in
        pre-order; two subtrees are equal exactly when their signatures
        are.
        """
        handle = self.root if handle is None else handle
        if handle is None:
            return ()
        nodes = self.nodes
        return tuple((nodes[h].kind.value, nodes[h].binding,
                      len(nodes[h].children)) for h in self.preorder(handle))

    def __eq__(self, other):
        if not isinstance(other, PolicyTree):
            return NotImplemented
        return self.signature() == other.signature()

    __hash__ = None

    def __repr__(self):
        return (f"PolicyTree({self.name!r}, nodes={self.node_count}, "
                f"edges={self.edge_count})")

    def __str__(self):
        return self.to_sexpr()
