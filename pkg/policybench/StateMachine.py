"""
State Machine
=============

Finite state machine policies: action states bound to skills, an optional
IDLE dispatcher, and terminal outcome nodes.

Transitions are keyed by ``(state, outcome)``. An action state registers
at least the outcomes ``success``, ``failure`` and ``running``; any further
outcome label is an interrupt whose :class:`~policybench.skills.Guard` is
looked up in :attr:`StateMachine.guards` and checked before the skill runs.

.. rubric:: Fault-tolerant wiring

In a fault-tolerant machine every action state maps ``failure`` to IDLE and
``running`` to itself. IDLE walks its ``dispatch`` list, an ordered list of
outcome labels, and takes the first label whose guard holds in the world.
While nothing matches it reports ``running`` through its own self-loop, up
to ``IDLE_WAIT_LIMIT`` consecutive steps.
"""

import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Set, Tuple

from .AppSettings import exec_settings
from .Graph import DirectedGraph
from .skills import CallRef, EditReceipt, Guard, Status, WorldView

logger = logging.getLogger(__name__)

SUCCESS = Status.SUCCESS.value
FAILURE = Status.FAILURE.value
RUNNING = Status.RUNNING.value
BASE_OUTCOMES = (SUCCESS, FAILURE, RUNNING)

SUCCEEDED = 'succeeded'
FAILED = 'failed'
IDLE = 'IDLE'

# =========================================================================

class MachineError(ValueError):
    """Base class of state machine errors."""


class UnmappedOutcome(MachineError):
    """A registered or produced outcome has no transition."""


class NoDispatchMatch(MachineError):
    """IDLE found neither a state to resume nor a terminal condition."""


class NotFaultTolerant(MachineError):
    """The operation or invariant requires an IDLE state."""


class DuplicateStateId(MachineError):
    """A state with this id already exists."""


class MissingLink(MachineError):
    """The expected success transition is not present."""


class UnknownState(MachineError, KeyError):
    """No state with this id."""

    def __str__(self):
        return str(self.args[0]) if self.args else ''


class IdleRemoval(MachineError):
    """The IDLE state cannot be removed."""

# =========================================================================

@dataclass
class State:
    """
    One state of a :class:`StateMachine`.

    :param id: State id
    :param binding: Skill reference, ``None`` for the IDLE state
    :param outcomes: Registered outcome labels in order
    :param dispatch: IDLE only: outcome labels in evaluation order
    """
    id: str
    binding: Optional[CallRef] = None
    outcomes: List[str] = field(default_factory=list)
    dispatch: List[str] = field(default_factory=list)
    execution: object = field(default=None, compare=False, repr=False)

    @property
    def is_idle(self) -> bool:
        return self.binding is None

    @property
    def label(self) -> str:
        return self.id if self.binding is None else str(self.binding)

    def register(self, outcome: str, front: bool = False):
        if outcome not in self.outcomes:
            if front:
                self.outcomes.insert(0, outcome)
            else:
                self.outcomes.append(outcome)


@dataclass
class StepResult:
    """
    Result of one :meth:`StateMachine.step`.

    :param state: State that was active during the step
    :param outcome: Outcome label it produced
    :param target: State or terminal the machine moved to
    :param event: ``send``, ``monitor``, ``interrupt`` or ``dispatch``
    :param finished: Terminal outcome if execution ended
    """
    state: str
    outcome: str
    target: str
    event: str = ''
    finished: Optional[str] = None

# =========================================================================

class StateMachine:
    """
    Deterministic outcome-labelled transition system over skills.

    :param name: Name written in the policy document
    """

    def __init__(self, name: str = ''):
        self.name = name
        self.states: Dict[str, State] = {}
        self.transitions: Dict[Tuple[str, str], str] = {}
        self.guards: Dict[str, Guard] = {}
        self.terminals: List[str] = []
        self.initial: Optional[str] = None
        self.idle: Optional[str] = None
        self.active: Optional[str] = None
        self.finished: Optional[str] = None
        self.last_receipt: Optional[EditReceipt] = None
        self._idle_wait = 0

    def __repr__(self):
        return (f"StateMachine({self.name!r}, states={len(self.states)}, "
                f"transitions={self.arc_count})")

    # ---------------------------------------------------------------------
    # construction

    def add_terminal(self, label: str):
        if label in self.states:
            raise DuplicateStateId(f"'{label}' is already a state")
        if label not in self.terminals:
            self.terminals.append(label)

    def add_state(self, state: State) -> State:
        if state.id in self.states or state.id in self.terminals:
            raise DuplicateStateId(f"state '{state.id}' already exists")
        self.states[state.id] = state
        if self.initial is None and not state.is_idle:
            self.initial = state.id
        return state

    def add_idle(self, state_id: str = IDLE) -> State:
        if self.idle is not None:
            raise DuplicateStateId(f"machine already has IDLE state "
                                   f"'{self.idle}'")
        state = self.add_state(State(state_id))
        self.idle = state_id
        return state

    def state(self, state_id: str) -> State:
        try:
            return self.states[state_id]
        except KeyError:
            raise UnknownState(f"no state '{state_id}'") from None

    def is_target(self, name: str) -> bool:
        return name in self.states or name in self.terminals

    def add_transition(self, state_id: str, outcome: str, target: str,
                       front: bool = False) -> bool:
        """
        Register ``outcome`` on a state and map it to ``target``.

        :param front: Register the outcome ahead of the existing ones
        :return: True if this adds a new arc to the graph (no other
            outcome of the state already leads to ``target``)
        :raises MachineError: if the outcome is already mapped elsewhere
        """
        state = self.state(state_id)
        if not self.is_target(target):
            raise UnknownState(f"transition target '{target}' is neither "
                               f"a state nor a terminal outcome")
        key = (state_id, outcome)
        if key in self.transitions and self.transitions[key] != target:
            raise MachineError(f"outcome '{outcome}' of '{state_id}' already "
                               f"leads to '{self.transitions[key]}'")
        new_arc = not self.has_arc(state_id, target)
        state.register(outcome, front)
        self.transitions[key] = target
        return new_arc

    def remove_transition(self, state_id: str, outcome: str) -> bool:
        """
        Drop a transition and unregister its outcome.

        :return: True if the corresponding graph arc disappeared
        """
        target = self.transitions.pop((state_id, outcome))
        state = self.states[state_id]
        if outcome in state.outcomes:
            state.outcomes.remove(outcome)
        if outcome in state.dispatch:
            state.dispatch.remove(outcome)
        return not self.has_arc(state_id, target)

    def has_arc(self, source: str, target: str) -> bool:
        return any(s == source and t == target
                   for (s, _), t in self.transitions.items())

    def arcs(self) -> Dict[Tuple[str, str], List[str]]:
        """Graph arcs in transition order with their outcome labels."""
        result: Dict[Tuple[str, str], List[str]] = {}
        for state in self.states.values():
            for outcome in state.outcomes:
                target = self.transitions.get((state.id, outcome))
                if target is not None:
                    result.setdefault((state.id, target), []).append(outcome)
        return result

    @property
    def arc_count(self) -> int:
        return len({(s, t) for (s, _), t in self.transitions.items()})

    @property
    def action_states(self) -> List[State]:
        return [s for s in self.states.values() if not s.is_idle]

    def interrupts(self, state_id: str) -> List[str]:
        """Guarded outcome labels of an action state."""
        state = self.state(state_id)
        return [o for o in state.outcomes
                if o not in BASE_OUTCOMES and o in self.guards]

    # ---------------------------------------------------------------------
    # checks

    def validate(self):
        """
        Check outcome totality, targets and the fault-tolerant closure.

        :raises UnmappedOutcome: if a registered outcome has no transition
        :raises NotFaultTolerant: if an action state lacks the failure or
            running transition required by an IDLE machine
        :raises MachineError: for any other structural violation
        """
        if self.action_states and self.initial not in self.states:
            raise MachineError(f"initial state '{self.initial}' is unknown")
        if self.idle is not None and self.idle not in self.states:
            raise MachineError(f"IDLE state '{self.idle}' is unknown")
        for state in self.states.values():
            for outcome in state.outcomes:
                target = self.transitions.get((state.id, outcome))
                if target is None:
                    raise UnmappedOutcome(f"outcome '{outcome}' of state "
                                          f"'{state.id}' has no transition")
                if not self.is_target(target):
                    raise MachineError(f"'{state.id}' --{outcome}--> "
                                       f"unknown target '{target}'")
            for label in state.dispatch:
                if label not in state.outcomes:
                    raise UnmappedOutcome(f"dispatch label '{label}' is not "
                                          f"an outcome of '{state.id}'")
            if state.is_idle:
                if state.id != self.idle:
                    raise MachineError(f"state '{state.id}' has no skill")
                continue
            missing = [o for o in BASE_OUTCOMES if o not in state.outcomes]
            if missing:
                raise UnmappedOutcome(f"state '{state.id}' lacks outcomes "
                                      f"{missing}")
            if self.idle is not None:
                if self.transitions[(state.id, FAILURE)] != self.idle or \
                        self.transitions[(state.id, RUNNING)] != state.id:
                    raise NotFaultTolerant(f"state '{state.id}' breaks the "
                                           f"failure/running closure")
        for (state_id, _), _target in self.transitions.items():
            if state_id not in self.states:
                raise MachineError(f"transition from unknown state "
                                   f"'{state_id}'")

    # ---------------------------------------------------------------------
    # execution

    def reset(self, world: Optional[WorldView] = None):
        """Return to the initial state, cancelling a live execution."""
        for state in self.states.values():
            if state.execution is not None and world is not None:
                world.cancel(state.execution)
            state.execution = None
        self.active = self.initial or self.idle
        self.finished = None
        self._idle_wait = 0

    def step(self, world: WorldView) -> StepResult:
        """
        Execute the active state for one step and follow its transition.

        :raises UnmappedOutcome: if the produced outcome has no transition
        :raises NoDispatchMatch: if IDLE cannot dispatch
        """
        if self.finished is not None:
            raise MachineError(f"machine already finished with "
                               f"'{self.finished}'")
        if self.active is None:
            self.active = self.initial or self.idle
        state = self.state(self.active)
        if state.is_idle:
            outcome = self._dispatch(state, world)
            event = 'dispatch'
        else:
            outcome, event = self._execute(state, world)
        target = self.transitions.get((state.id, outcome))
        if target is None:
            raise UnmappedOutcome(f"state '{state.id}' produced unmapped "
                                  f"outcome '{outcome}'")
        result = StepResult(state.id, outcome, target, event)
        if target in self.terminals:
            self.finished = target
            result.finished = target
            logger.info('%s finished with %s', self.name or 'fsm', target)
        elif target != state.id:
            logger.debug('%s --%s--> %s', state.id, outcome, target)
        self.active = target
        return result

    def _execute(self, state: State, world: WorldView) -> Tuple[str, str]:
        for label in self.interrupts(state.id):
            if self.guards[label].holds(world):
                if state.execution is not None:
                    world.cancel(state.execution)
                    state.execution = None
                logger.debug('%s interrupted by %s', state.id, label)
                return label, 'interrupt'
        event = 'monitor'
        if state.execution is None:
            state.execution = world.send(state.binding)
            event = 'send'
        status = world.monitor(state.execution)
        if status is not Status.RUNNING:
            state.execution = None
        return status.value, event

    def _dispatch(self, idle: State, world: WorldView) -> str:
        for label in idle.dispatch:
            guard = self.guards.get(label)
            if guard is not None and guard.holds(world):
                self._idle_wait = 0
                return label
        limit = exec_settings.get('IDLE_WAIT_LIMIT')
        if (idle.id, RUNNING) in self.transitions and self._idle_wait < limit:
            self._idle_wait += 1
            return RUNNING
        raise NoDispatchMatch(f"IDLE found no state to resume after "
                              f"{self._idle_wait} waiting steps")

    # ---------------------------------------------------------------------
    # edits

    def add_connected_state(self, new_state: State, condition: str,
                            idle_condition: str,
                            guard: Optional[Guard] = None) -> EditReceipt:
        """
        Connect a new state to every existing state.

        Every existing action state gains the outcome ``condition`` and IDLE
        gains ``idle_condition`` (first in its dispatch order), both leading
        to the new state. The new state maps ``running`` to itself and
        ``success``/``failure`` to IDLE.

        ``success`` and ``failure`` share one arc back to IDLE, so the
        graph gains one arc per existing state plus two.

        :param guard: World condition that triggers both new outcomes
        """
        if self.idle is None:
            raise NotFaultTolerant("connected states need an IDLE state")
        if new_state.id in self.states or new_state.id in self.terminals:
            raise DuplicateStateId(f"state '{new_state.id}' already exists")
        existing = list(self.states.values())
        attached = 0
        self.add_state(new_state)
        for state in existing:
            if state.is_idle:
                attached += self.add_transition(state.id, idle_condition,
                                                new_state.id, front=True)
                state.dispatch.insert(0, idle_condition)
            else:
                attached += self.add_transition(state.id, condition,
                                                new_state.id)
        attached += self.add_transition(new_state.id, SUCCESS, self.idle)
        attached += self.add_transition(new_state.id, FAILURE, self.idle)
        attached += self.add_transition(new_state.id, RUNNING, new_state.id)
        if guard is not None:
            self.guards[condition] = guard
            self.guards[idle_condition] = guard
        self.validate()
        receipt = EditReceipt('add_connected_state', created=1,
                              attached=attached, touched=len(existing),
                              node=new_state.id)
        self.last_receipt = receipt
        logger.info('connected state %s: %d transitions added to %d states',
                    new_state.id, attached, len(existing))
        return receipt

    def add_sequential_state(self, new_state: State, preceding: str,
                             following: str,
                             resume_guard: Optional[Guard] = None
                             ) -> EditReceipt:
        """
        Insert a state on the success link ``preceding -> following``.

        The new state inherits the interrupts of ``preceding`` and, in a
        fault-tolerant machine, gets its failure link to IDLE and an IDLE
        dispatch entry. Without ``resume_guard`` the dispatch entry reuses
        the guard of ``following``'s entry, if any.
        """
        if self.transitions.get((preceding, SUCCESS)) != following:
            raise MissingLink(f"no success transition '{preceding}' -> "
                              f"'{following}'")
        if new_state.id in self.states or new_state.id in self.terminals:
            raise DuplicateStateId(f"state '{new_state.id}' already exists")
        detached = int(self.remove_transition(preceding, SUCCESS))
        self.add_state(new_state)
        attached = 0
        attached += self.add_transition(preceding, SUCCESS, new_state.id)
        attached += self.add_transition(new_state.id, SUCCESS, following)
        attached += self.add_transition(new_state.id, RUNNING, new_state.id)
        touched = 2
        if self.idle is not None:
            attached += self.add_transition(new_state.id, FAILURE, self.idle)
            idle = self.states[self.idle]
            label = f"to_{new_state.id}"
            follow_label = f"to_{following}"
            if resume_guard is None:
                resume_guard = self.guards.get(follow_label)
            if follow_label in idle.dispatch:
                idle.dispatch.insert(idle.dispatch.index(follow_label), label)
            else:
                idle.dispatch.append(label)
            attached += self.add_transition(self.idle, label, new_state.id)
            if resume_guard is not None:
                self.guards[label] = resume_guard
            touched += 1
        elif FAILED in self.terminals:
            attached += self.add_transition(new_state.id, FAILURE, FAILED)
        for label in self.interrupts(preceding):
            attached += self.add_transition(new_state.id, label,
                                            self.transitions[(preceding,
                                                              label)])
        self.validate()
        receipt = EditReceipt('add_sequential_state', created=1,
                              attached=attached, detached=detached,
                              touched=touched, node=new_state.id)
        self.last_receipt = receipt
        logger.info('sequential state %s between %s and %s: +%d/-%d',
                    new_state.id, preceding, following, attached, detached)
        return receipt

    def remove_state(self, target: str) -> EditReceipt:
        """
        Remove a state with all transitions to and from it.

        Two passes run over all states: the first drops the outgoing
        transitions and collects incoming ones, the second unregisters the
        incoming outcomes. A predecessor on the success chain is re-linked
        to the removed state's success target.
        """
        state = self.state(target)
        if state.is_idle:
            raise IdleRemoval("the IDLE state cannot be removed")
        successor = self.transitions.get((target, SUCCESS))
        if successor == target:
            successor = None
        touched = 0
        detached = 0
        incoming = []
        # pass 1: outgoing transitions, collect incoming
        for state_id, other in self.states.items():
            touched += 1
            for outcome in list(other.outcomes):
                if self.transitions.get((state_id, outcome)) != target:
                    continue
                if state_id != target:
                    incoming.append((state_id, outcome))
        for outcome in list(state.outcomes):
            detached += self.remove_transition(target, outcome)
        # pass 2: incoming transitions and registered outcomes
        attached = 0
        for state_id in list(self.states):
            touched += 1
            for source, outcome in incoming:
                if source != state_id:
                    continue
                detached += self.remove_transition(source, outcome)
                if outcome == SUCCESS and successor is not None:
                    attached += self.add_transition(source, SUCCESS,
                                                    successor)
        del self.states[target]
        used = {o for s in self.states.values() for o in s.outcomes}
        for label in [g for g in self.guards if g not in used]:
            del self.guards[label]
        if self.initial == target:
            self.initial = successor if successor in self.states \
                else next((s.id for s in self.action_states), self.idle)
        if self.active == target:
            self.active = None
        self.validate()
        receipt = EditReceipt('remove_state', attached=attached,
                              detached=detached, touched=touched,
                              node=target)
        self.last_receipt = receipt
        logger.info('removed state %s: %d transitions removed, %d scanned',
                    target, detached, touched)
        return receipt

    # ---------------------------------------------------------------------
    # conversions

    def to_graph(self, name: Optional[str] = None) -> DirectedGraph:
        """
        One node per state and per terminal outcome, one edge per arc.

        Edge labels list the outcomes sharing the arc, joined by ``|``.
        """
        graph = DirectedGraph(name or self.name or 'fsm')
        for state in self.states.values():
            graph.add_node(state.id, state.label)
        for terminal in self.terminals:
            graph.add_node(terminal, terminal)
        for (source, target), outcomes in self.arcs().items():
            graph.add_edge(source, target, '|'.join(outcomes))
        return graph

    def copy(self) -> 'StateMachine':
        other = StateMachine(self.name)
        for state in self.states.values():
            other.states[state.id] = State(state.id, state.binding,
                                           list(state.outcomes),
                                           list(state.dispatch))
        other.transitions = dict(self.transitions)
        other.guards = dict(self.guards)
        other.terminals = list(self.terminals)
        other.initial = self.initial
        other.idle = self.idle
        return other

    def signature(self) -> tuple:
        """Structure independent of execution state."""
        return (tuple((s.id, s.binding, tuple(s.outcomes), tuple(s.dispatch))
                      for s in self.states.values()),
                tuple(sorted(self.transitions.items())),
                tuple(sorted((k, v.literals) for k, v in self.guards.items())),
                tuple(self.terminals), self.initial, self.idle)

    def structure(self) -> tuple:
        """Order-insensitive structure used for isomorphism checks."""
        return (frozenset((s.id, s.binding, frozenset(s.outcomes))
                          for s in self.states.values()),
                frozenset(self.transitions.items()),
                frozenset(self.terminals), self.idle)

    def __eq__(self, other):
        if not isinstance(other, StateMachine):
            return NotImplemented
        return self.signature() == other.signature()

    __hash__ = None

    def invoked_skills(self) -> Set[CallRef]:
        return {s.binding for s in self.action_states}
