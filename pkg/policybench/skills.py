"""
Skill Model
===========

Types shared by both policy representations: bound references to skills
and conditions, guard literals, skill/condition declarations, goals and the
registry that the synthesizers and the simulator consult.

.. rubric:: Example

>>> ref = CallRef.parse_text('object_at(cube, delivery)')
>>> ref.name, ref.args
('object_at', ('cube', 'delivery'))
>>> str(Literal(ref, positive=False))
'not object_at(cube, delivery)'
"""

import logging
import re
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, List, Optional, Protocol, Tuple

logger = logging.getLogger(__name__)

PARAM_TYPES = ('any', 'pose', 'object', 'station')

_REF_RE = re.compile(r'^\s*([A-Za-z_]\w*)\s*\(([^()]*)\)\s*$')

# =========================================================================

class Status(Enum):
    """Return status of a tick, a state step or a skill monitor call."""
    SUCCESS = "success"
    FAILURE = "failure"
    RUNNING = "running"

    def inverted(self) -> 'Status':
        """Swap Success and Failure, Running stays."""
        if self is Status.SUCCESS:
            return Status.FAILURE
        if self is Status.FAILURE:
            return Status.SUCCESS
        return self

# =========================================================================

@dataclass(frozen=True)
class CallRef:
    """
    A skill or condition name with bound arguments, e.g. ``pick(cube)``.

    :param name: Skill or condition identifier
    :param args: Bound argument values (object, station or constant names)
    """
    name: str
    args: Tuple[str, ...] = ()

    def __str__(self):
        return f"{self.name}({', '.join(self.args)})"

    @property
    def arity(self) -> int:
        return len(self.args)

    @classmethod
    def parse_text(cls, text: str) -> 'CallRef':
        """Parse ``name(a, b)`` without position tracking."""
        match = _REF_RE.match(text)
        if not match:
            raise ValueError(f"not a reference: {text!r}")
        args = tuple(a.strip() for a in match.group(2).split(',')
                     if a.strip())
        return cls(match.group(1), args)


@dataclass(frozen=True)
class Literal:
    """A condition reference that must hold (or must not hold)."""
    ref: CallRef
    positive: bool = True

    def negated(self) -> 'Literal':
        return Literal(self.ref, not self.positive)

    def __str__(self):
        return str(self.ref) if self.positive else f"not {self.ref}"


@dataclass(frozen=True)
class Guard:
    """
    Ordered conjunction of literals. An empty guard always holds.
    """
    literals: Tuple[Literal, ...] = ()

    def __str__(self):
        return ', '.join(str(lit) for lit in self.literals)

    def __iter__(self) -> Iterator[Literal]:
        return iter(self.literals)

    def __len__(self):
        return len(self.literals)

    def extended(self, *literals: Literal) -> 'Guard':
        return Guard(self.literals + tuple(literals))

    def is_contradictory(self) -> bool:
        """True if the guard requires some condition to hold and not hold."""
        seen = {}
        for lit in self.literals:
            if seen.get(lit.ref, lit.positive) != lit.positive:
                return True
            seen[lit.ref] = lit.positive
        return False

    def excludes(self, other: 'Guard') -> bool:
        """True if the two guards can never hold at the same time."""
        mine = {lit.ref: lit.positive for lit in self.literals}
        return any(lit.ref in mine and mine[lit.ref] != lit.positive
                   for lit in other.literals)

    def holds(self, world: 'WorldView') -> bool:
        return all(world.evaluate(lit.ref) == lit.positive
                   for lit in self.literals)

# =========================================================================

@dataclass(frozen=True)
class Param:
    """Typed parameter slot of a skill or condition."""
    name: str
    type: str = 'any'

    def __str__(self):
        return self.name if self.type == 'any' else f"{self.name}: {self.type}"


@dataclass
class ConditionSpec:
    """
    Declaration of a condition.

    :param name: Condition identifier
    :param params: Parameter slots
    :param tolerance: Per-dimension numeric bounds, e.g. ``(x, y, yaw)`` for
        ``robot_at`` or the threshold for ``battery_ok``
    """
    name: str
    params: Tuple[Param, ...] = ()
    tolerance: Tuple[float, ...] = ()

    def __post_init__(self):
        self.params = tuple(self.params)
        self.tolerance = tuple(float(t) for t in self.tolerance)
        for t in self.tolerance:
            if t <= 0:
                raise ValueError(f"condition {self.name}: tolerance "
                                 f"entries must be positive, got {t}")


@dataclass
class SkillSpec:
    """
    Declaration of a robot skill.

    Pre- and postconditions are written over the parameter names; any
    argument that is not a parameter name is a constant.

    :param name: Skill identifier
    :param params: Parameter slots
    :param preconditions: Conditions required before the skill runs, in the
        order a backchained policy establishes them
    :param postconditions: Conditions the skill achieves
    :param duration: Simulation steps needed, at least 1
    :param failure_model: Failure injection hook id (defaults to ``name``)
    """
    name: str
    params: Tuple[Param, ...] = ()
    preconditions: Tuple[CallRef, ...] = ()
    postconditions: Tuple[CallRef, ...] = ()
    duration: int = 1
    failure_model: str = ''

    def __post_init__(self):
        self.params = tuple(self.params)
        self.preconditions = tuple(self.preconditions)
        self.postconditions = tuple(self.postconditions)
        if not self.failure_model:
            self.failure_model = self.name
        if int(self.duration) < 1:
            raise ValueError(f"skill {self.name}: duration must be "
                             f"at least 1, got {self.duration}")
        self.duration = int(self.duration)

    @property
    def param_names(self) -> Tuple[str, ...]:
        return tuple(p.name for p in self.params)

    def bind(self, args: Tuple[str, ...]) -> Dict[str, str]:
        """Map parameter names to the arguments of a call."""
        if len(args) != len(self.params):
            raise ValueError(f"skill {self.name} takes {len(self.params)} "
                             f"arguments, got {len(args)}")
        return dict(zip(self.param_names, args))

    def substitute(self, ref: CallRef, binding: Dict[str, str]) -> CallRef:
        """Instantiate a pre/postcondition with a parameter binding."""
        return CallRef(ref.name, tuple(binding.get(a, a) for a in ref.args))

    def bound_preconditions(self, args: Tuple[str, ...]) -> List[CallRef]:
        binding = self.bind(args)
        return [self.substitute(c, binding) for c in self.preconditions]

    def bound_postconditions(self, args: Tuple[str, ...]) -> List[CallRef]:
        binding = self.bind(args)
        return [self.substitute(c, binding) for c in self.postconditions]


@dataclass(frozen=True)
class Goal:
    """A bound goal condition; ``maintain`` goals must hold throughout."""
    ref: CallRef
    maintain: bool = False


@dataclass
class GoalSpec:
    """Ordered list of goals."""
    goals: List[Goal] = field(default_factory=list)

    def __iter__(self) -> Iterator[Goal]:
        return iter(self.goals)

    def __len__(self):
        return len(self.goals)

    @property
    def achieve(self) -> List[Goal]:
        return [g for g in self.goals if not g.maintain]

    @property
    def maintain(self) -> List[Goal]:
        return [g for g in self.goals if g.maintain]

    @classmethod
    def of(cls, *refs: str) -> 'GoalSpec':
        """Build from reference strings, ``!`` prefix marks maintain goals."""
        goals = []
        for text in refs:
            maintain = text.startswith('!')
            goals.append(Goal(CallRef.parse_text(text.lstrip('!')), maintain))
        return cls(goals)

# =========================================================================

class SkillLibrary:
    """
    Registry of skill and condition declarations.

    Both synthesizers and the simulator consult the same library so the
    two representations share one skill set.
    """

    def __init__(self, skills: Optional[List[SkillSpec]] = None,
                 conditions: Optional[List[ConditionSpec]] = None):
        self.skills: Dict[str, SkillSpec] = {}
        self.conditions: Dict[str, ConditionSpec] = {}
        for c in conditions or []:
            self.add_condition(c)
        for s in skills or []:
            self.add_skill(s)

    def add_condition(self, spec: ConditionSpec):
        if spec.name in self.conditions or spec.name in self.skills:
            raise ValueError(f"duplicate name '{spec.name}'")
        self.conditions[spec.name] = spec

    def add_skill(self, spec: SkillSpec):
        if spec.name in self.skills or spec.name in self.conditions:
            raise ValueError(f"duplicate name '{spec.name}'")
        for ref in spec.preconditions + spec.postconditions:
            if ref.name not in self.conditions:
                raise KeyError(f"skill {spec.name} references unknown "
                               f"condition '{ref.name}'")
        self.skills[spec.name] = spec

    def skill(self, name: str) -> SkillSpec:
        try:
            return self.skills[name]
        except KeyError:
            raise KeyError(f"unknown skill '{name}'") from None

    def condition(self, name: str) -> ConditionSpec:
        try:
            return self.conditions[name]
        except KeyError:
            raise KeyError(f"unknown condition '{name}'") from None

    def __contains__(self, name: str) -> bool:
        return name in self.skills or name in self.conditions

# =========================================================================

@dataclass
class EditReceipt:
    """
    Cost record of one structural edit.

    For trees, ``created`` counts new nodes and ``attached``/``detached``
    count parent-child links. For state machines, ``created`` counts new
    states and ``attached``/``detached`` count transition arcs added or
    removed (registering an outcome is folded into its transition).
    ``touched`` counts structure elements read or written.

    :param operation: Name of the edit
    :param created: Elements created
    :param attached: Links added
    :param detached: Links removed
    :param touched: Elements accessed
    :param node: Handle or state id the edit is anchored at
    :param parent: Parent handle (tree edits)
    :param index: Child position (tree edits)
    """
    operation: str
    created: int = 0
    attached: int = 0
    detached: int = 0
    touched: int = 0
    node: Optional[object] = None
    parent: Optional[int] = None
    index: Optional[int] = None

    @property
    def elementary_ops(self) -> int:
        return self.created + self.attached + self.detached

    @classmethod
    def combine(cls, operation: str,
                receipts: List['EditReceipt']) -> 'EditReceipt':
        """Sum several receipts into one."""
        return cls(operation,
                   created=sum(r.created for r in receipts),
                   attached=sum(r.attached for r in receipts),
                   detached=sum(r.detached for r in receipts),
                   touched=sum(r.touched for r in receipts),
                   node=receipts[-1].node if receipts else None)

    def to_record(self) -> Dict:
        return {
            'operation': self.operation,
            'created': self.created,
            'attached': self.attached,
            'detached': self.detached,
            'elementary_ops': self.elementary_ops,
            'touched': self.touched,
        }

# =========================================================================

class WorldView(Protocol):
    """What a policy needs from the world it controls."""

    def evaluate(self, ref: CallRef) -> bool: ...

    def send(self, ref: CallRef): ...

    def monitor(self, execution) -> Status: ...

    def cancel(self, execution) -> None: ...

    def knows_skill(self, name: str) -> bool: ...

    def knows_condition(self, name: str) -> bool: ...
