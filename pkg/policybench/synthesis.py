"""
Policy Synthesis
================

Compiles a goal list over a :class:`~policybench.skills.SkillLibrary` into
the two policy representations.

Backchaining expands each goal condition ``c`` into
``Fallback(c?, Sequence(expansion(p1), ..., expansion(pk), a!))`` where
``a`` is the unique skill achieving ``c`` and ``p1..pk`` its preconditions
in declared order. Without preconditions the Sequence is dropped:
``Fallback(c?, a!)``. Several goals are joined under a root Sequence.

The same expansion fixes the order of the FSM action states and, for the
fault-tolerant FSM, the guard IDLE checks before resuming each of them:
the literals a tick satisfies on its way to that action.
"""

import logging
import re
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, Tuple

from .BehaviorTree import NodeKind, PolicyTree
from .StateMachine import (FAILED, FAILURE, IDLE, RUNNING, SUCCEEDED,
                           SUCCESS, State, StateMachine)
from .skills import (CallRef, GoalSpec, Guard, Literal, SkillLibrary,
                     SkillSpec)

logger = logging.getLogger(__name__)

DONE = 'done'

# =========================================================================

class SynthesisError(ValueError):
    """Base class of synthesis errors."""


class UnachievableCondition(SynthesisError):
    """No skill has a postcondition matching the condition."""


class AmbiguousAchiever(SynthesisError):
    """Several skills achieve the condition equally specifically."""


class UnboundParameter(SynthesisError):
    """The achiever has a parameter its matched postcondition leaves open."""


class CyclicDependency(SynthesisError):
    """A condition is (indirectly) a precondition of its own achiever."""


class OrderingConflict(SynthesisError):
    """The expansion requires a condition to hold and not hold."""


class EmptyGoal(SynthesisError):
    """Nothing to synthesize."""

# =========================================================================

@dataclass
class Expansion:
    """
    Backchained expansion of one condition.

    :param condition: The condition to establish
    :param skill: Bound invocation of its achiever
    :param prerequisites: Expansions of the achiever's preconditions
    :param guard: Literals that hold when a tick reaches the action
    """
    condition: CallRef
    skill: CallRef
    prerequisites: List['Expansion'] = field(default_factory=list)
    guard: Guard = field(default_factory=Guard)

    def actions(self) -> Iterator['Expansion']:
        """Expansions in execution order (prerequisites first)."""
        for pre in self.prerequisites:
            yield from pre.actions()
        yield self

    def to_tree(self) -> PolicyTree:
        check = PolicyTree.condition(self.condition)
        act = PolicyTree.action(self.skill)
        if not self.prerequisites:
            return PolicyTree.fallback(check, act)
        steps = [pre.to_tree() for pre in self.prerequisites]
        return PolicyTree.fallback(check, PolicyTree.sequence(*steps, act))


@dataclass
class Plan:
    """Expansions of a goal list, split by goal type."""
    goals: GoalSpec
    expansions: List[Expansion]

    @property
    def achieve(self) -> List[Expansion]:
        return [e for g, e in zip(self.goals, self.expansions)
                if not g.maintain]

    @property
    def maintain(self) -> List[Expansion]:
        return [e for g, e in zip(self.goals, self.expansions) if g.maintain]

    def steps(self, include_maintain: bool = False) -> List[Expansion]:
        """Action expansions in task order."""
        chosen = self.expansions if include_maintain else self.achieve
        return [a for e in chosen for a in e.actions()]

# =========================================================================

def find_achiever(condition: CallRef, library: SkillLibrary
                  ) -> Tuple[SkillSpec, CallRef]:
    """
    Select the skill achieving ``condition`` and bind its arguments.

    A postcondition matches if name and arity agree and every constant
    argument equals the condition's argument at that position. Among
    matching skills the one with most constant positions wins.

    :return: (skill, bound invocation)
    """
    candidates: Dict[str, Tuple[int, SkillSpec, Dict[str, str]]] = {}
    for spec in library.skills.values():
        for post in spec.postconditions:
            if post.name != condition.name or post.arity != condition.arity:
                continue
            binding: Dict[str, str] = {}
            constants = 0
            for formal, actual in zip(post.args, condition.args):
                if formal in spec.param_names:
                    if binding.setdefault(formal, actual) != actual:
                        break
                elif formal == actual:
                    constants += 1
                else:
                    break
            else:
                best = candidates.get(spec.name)
                if best is None or constants > best[0]:
                    candidates[spec.name] = (constants, spec, binding)
    if not candidates:
        raise UnachievableCondition(f"no skill achieves {condition}")
    ranked = sorted(candidates.values(), key=lambda c: -c[0])
    top = [c for c in ranked if c[0] == ranked[0][0]]
    if len(top) > 1:
        names = ', '.join(c[1].name for c in top)
        raise AmbiguousAchiever(f"{condition} is achieved by {names}")
    _, spec, binding = top[0]
    unbound = [p for p in spec.param_names if p not in binding]
    if unbound:
        raise UnboundParameter(f"{spec.name} leaves {', '.join(unbound)} "
                               f"unbound when achieving {condition}")
    return spec, CallRef(spec.name,
                         tuple(binding[p] for p in spec.param_names))


def expand(condition: CallRef, library: SkillLibrary,
           context: Tuple[Literal, ...] = (),
           stack: Tuple[CallRef, ...] = ()) -> Expansion:
    """Recursively expand a condition through its achiever."""
    if condition in stack:
        chain = ' -> '.join(str(c) for c in stack + (condition,))
        raise CyclicDependency(f"cyclic preconditions: {chain}")
    spec, invocation = find_achiever(condition, library)
    preconditions = spec.bound_preconditions(invocation.args)
    base = context + (Literal(condition, False),)
    prerequisites = []
    for i, pre in enumerate(preconditions):
        established = tuple(Literal(p) for p in preconditions[:i])
        prerequisites.append(expand(pre, library, base + established,
                                    stack + (condition,)))
    guard = Guard(base + tuple(Literal(p) for p in preconditions))
    if guard.is_contradictory():
        raise OrderingConflict(f"{invocation} requires contradicting "
                               f"conditions: {guard}")
    return Expansion(condition, invocation, prerequisites, guard)


def make_plan(goal: GoalSpec, library: SkillLibrary) -> Plan:
    """Expand every goal; achieve goals see earlier achieve goals as held."""
    if not len(goal):
        raise EmptyGoal("the goal list is empty")
    context: Tuple[Literal, ...] = ()
    expansions = []
    for g in goal:
        if g.maintain:
            expansions.append(expand(g.ref, library))
        else:
            expansions.append(expand(g.ref, library, context))
            context += (Literal(g.ref),)
    return Plan(goal, expansions)

# =========================================================================

def backchain(goal: GoalSpec, library: SkillLibrary,
              name: str = '') -> PolicyTree:
    """
    Build the behavior tree for a goal list.

    :raises EmptyGoal: without goals
    :raises UnachievableCondition: if some condition has no achiever
    :raises CyclicDependency: if the preconditions form a cycle
    """
    plan = make_plan(goal, library)
    trees = [e.to_tree() for e in plan.expansions]
    tree = trees[0] if len(trees) == 1 else PolicyTree.sequence(*trees)
    tree.name = name
    logger.info('backchained %d goals into %d nodes', len(goal),
                tree.node_count)
    return tree

# -------------------------------------------------------------------------

def state_id(ref: CallRef, taken) -> str:
    """``<skill>_<args>``, numbered from ``_2`` on repetition."""
    base = re.sub(r'\W', '_', '_'.join((ref.name,) + ref.args))
    candidate, n = base, 1
    while candidate in taken:
        n += 1
        candidate = f"{base}_{n}"
    return candidate


def _chain(sm: StateMachine, steps: List[Expansion]) -> List[str]:
    ids = []
    for step in steps:
        sid = state_id(step.skill, set(sm.states) | set(sm.terminals))
        sm.add_state(State(sid, step.skill))
        ids.append(sid)
    return ids


def _link(sm: StateMachine, ids: List[str], failure_target: str):
    for i, sid in enumerate(ids):
        following = ids[i + 1] if i + 1 < len(ids) else SUCCEEDED
        sm.add_transition(sid, SUCCESS, following)
        sm.add_transition(sid, RUNNING, sid)
        sm.add_transition(sid, FAILURE, failure_target)


def assemble_fault_tolerant_fsm(goal: GoalSpec, library: SkillLibrary,
                                name: str = '') -> StateMachine:
    """
    Build the fault-tolerant state machine for a goal list.

    Action states are chained by success in task order; each maps failure
    to IDLE and running to itself. IDLE dispatches to every action state
    under the guard of its expansion, to ``succeeded`` once all achieve
    goals hold, and otherwise waits on its running self-loop. Maintain
    goals become connected states.
    """
    plan = make_plan(goal, library)
    steps = plan.steps()
    if not steps:
        raise EmptyGoal("a state machine needs at least one achieve goal")
    sm = StateMachine(name)
    sm.add_terminal(SUCCEEDED)
    ids = _chain(sm, steps)
    sm.add_idle(IDLE)
    _link(sm, ids, IDLE)
    idle = sm.states[IDLE]
    for sid, step in zip(ids, steps):
        label = f"to_{sid}"
        sm.add_transition(IDLE, label, sid)
        idle.dispatch.append(label)
        sm.guards[label] = step.guard
    sm.add_transition(IDLE, DONE, SUCCEEDED)
    idle.dispatch.append(DONE)
    sm.guards[DONE] = Guard(tuple(Literal(e.condition) for e in plan.achieve))
    sm.add_transition(IDLE, RUNNING, IDLE)
    sm.validate()
    for expansion in plan.maintain:
        if expansion.prerequisites:
            raise SynthesisError(f"maintain goal {expansion.condition}: "
                                 f"{expansion.skill.name} must not have "
                                 f"preconditions")
        sid = state_id(expansion.skill, set(sm.states) | set(sm.terminals))
        sm.add_connected_state(
            State(sid, expansion.skill),
            condition=f"{expansion.skill.name}_needed",
            idle_condition=f"resume_{sid}",
            guard=Guard((Literal(expansion.condition, False),)))
    logger.info('assembled fault-tolerant FSM: %d states, %d transitions',
                len(sm.states), sm.arc_count)
    return sm


def assemble_sequential_fsm(goal: GoalSpec, library: SkillLibrary,
                            name: str = '') -> StateMachine:
    """
    Build the sequential state machine for a goal list.

    Action states are chained by success; running loops, and every failure
    ends the run in the ``failed`` terminal.
    """
    plan = make_plan(goal, library)
    steps = plan.steps(include_maintain=True)
    sm = StateMachine(name)
    sm.add_terminal(SUCCEEDED)
    sm.add_terminal(FAILED)
    ids = _chain(sm, steps)
    _link(sm, ids, FAILED)
    sm.validate()
    logger.info('assembled sequential FSM: %d states, %d transitions',
                len(sm.states), sm.arc_count)
    return sm


def invocations(policy) -> set:
    """Skill invocations a policy can issue."""
    if isinstance(policy, PolicyTree):
        return {leaf.binding for leaf in policy.leaves()
                if leaf.kind is NodeKind.ACTION}
    return policy.invoked_skills()
