"""
Simulated World
===============

Deterministic kinematic simulation of a mobile manipulator serving a set
of stations (fetch tables, delivery station, recharge station, inspection
table). Skills run behind a send / monitor / cancel contract so both
policy representations drive the same world.

The simulation is discrete: :meth:`Simulation.advance` moves the clock by
one step, drains the battery, progresses every active skill and applies
the scripted events that are due. Navigation interpolates the robot pose
at constant velocity; manipulation applies its effect on completion.

.. rubric:: Example

>>> sim = Simulation.create(library, stations, objects)
>>> execution = sim.send(CallRef('move_to', ('fetch_table_1',)))
>>> while sim.monitor(execution) is Status.RUNNING:
...     sim.advance()
"""

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Callable, Dict, FrozenSet, List, Optional, Tuple

import numpy as np

from .AppSettings import sim_settings
from .skills import CallRef, SkillLibrary, SkillSpec, Status
from .utils import digest, interpolate_pose, wrap_angle

logger = logging.getLogger(__name__)

Pose = Tuple[float, float, float]

PRECONDITION_UNSATISFIED = 'PreconditionUnsatisfied'
INJECTED_FAILURE = 'InjectedFailure'

# =========================================================================

class SimulationError(ValueError):
    """Base class of simulation errors."""


class UnknownCondition(SimulationError):
    """The condition is not declared or has no evaluator."""


class UnknownSkill(SimulationError):
    """The skill is not declared or has no skill model."""


class ArityMismatch(SimulationError):
    """A reference has the wrong number of arguments."""

# =========================================================================

class ArmState(Enum):
    TUCKED = 'tucked'
    MONITORING = 'monitoring'
    MANIPULATING = 'manipulating'


class ExecState(Enum):
    IDLE = 'idle'
    ACTIVE = 'active'
    SUCCEEDED = 'succeeded'
    FAILED = 'failed'
    CANCELLED = 'cancelled'

    @property
    def is_final(self) -> bool:
        return self not in (ExecState.IDLE, ExecState.ACTIVE)


@dataclass(frozen=True)
class Station:
    """A named place with a robot pose and a table surface height."""
    name: str
    pose: Pose
    z: float = 0.0

    @property
    def position(self) -> Tuple[float, float, float]:
        return float(self.pose[0]), float(self.pose[1]), float(self.z)


@dataclass(frozen=True)
class ObjectPlacement:
    """Initial placement of an object on a station."""
    name: str
    station: str

# =========================================================================

#: event name -> argument types
EVENT_SIGNATURES: Dict[str, Tuple[type, ...]] = {
    'inject_failure': (str, int),
    'move_object': (str, str),
    'set_battery': (float,),
    'drain_rate': (float,),
}


@dataclass(frozen=True)
class ScenarioEvent:
    """
    Scripted perturbation.

    :param step: Clock value at which the event applies
    :param kind: One of :data:`EVENT_SIGNATURES`
    :param args: Event arguments
    """
    step: int
    kind: str
    args: Tuple = ()

    def __post_init__(self):
        if self.kind not in EVENT_SIGNATURES:
            raise ValueError(f"unknown event '{self.kind}'")
        if int(self.step) < 0:
            raise ValueError(f"event step must not be negative, "
                             f"got {self.step}")
        types = EVENT_SIGNATURES[self.kind]
        if len(self.args) != len(types):
            raise ValueError(f"event {self.kind} takes {len(types)} "
                             f"arguments, got {len(self.args)}")
        try:
            args = tuple(t(a) for t, a in zip(types, self.args))
        except (TypeError, ValueError):
            raise ValueError(f"invalid arguments for {self.kind}: "
                             f"{self.args!r}") from None
        object.__setattr__(self, 'step', int(self.step))
        object.__setattr__(self, 'args', args)

    def __str__(self):
        return f"{self.kind}({', '.join(str(a) for a in self.args)})"


@dataclass
class ScenarioScript:
    """
    Initial world overrides plus a list of scripted events.

    ``None`` fields fall back to the simulation settings. ``known=None``
    means every object is known from the start.
    """
    name: str = ''
    robot: Optional[Pose] = None
    battery: Optional[float] = None
    drain: Optional[float] = None
    known: Optional[Tuple[str, ...]] = None
    seed: Optional[int] = None
    failure_rate: Optional[float] = None
    events: List[ScenarioEvent] = field(default_factory=list)

    def __post_init__(self):
        if self.battery is not None and not 0.0 <= self.battery <= 100.0:
            raise ValueError(f"battery must be within [0, 100], "
                             f"got {self.battery}")
        if self.drain is not None and self.drain < 0:
            raise ValueError(f"drain must not be negative, got {self.drain}")
        if self.failure_rate is not None and \
                not 0.0 <= self.failure_rate <= 1.0:
            raise ValueError(f"failure_rate must be within [0, 1], "
                             f"got {self.failure_rate}")
        if self.robot is not None:
            if len(self.robot) != 3:
                raise ValueError("robot pose needs x, y and yaw")
            self.robot = tuple(float(v) for v in self.robot)
        if self.known is not None:
            self.known = tuple(self.known)
        # stable sort keeps the written order of same-step events
        self.events = sorted(self.events, key=lambda e: e.step)

# =========================================================================

@dataclass
class WorldState:
    """
    Complete simulated state.

    :param robot_pose: (x, y, yaw) in meters/radians
    :param arm: Arm configuration
    :param held_object: Object in the gripper, if any
    :param battery: Battery level in percent
    :param objects: Object id -> (x, y, z)
    :param resting: Object id -> station it rests on (``None`` while held)
    :param stations: Station name -> :class:`Station`
    :param known: Objects the robot has located
    :param clock: Step counter
    """
    robot_pose: Pose = (0.0, 0.0, 0.0)
    arm: ArmState = ArmState.MONITORING
    held_object: Optional[str] = None
    battery: float = 100.0
    objects: Dict[str, Tuple[float, float, float]] = field(
        default_factory=dict)
    resting: Dict[str, Optional[str]] = field(default_factory=dict)
    stations: Dict[str, Station] = field(default_factory=dict)
    known: FrozenSet[str] = frozenset()
    clock: int = 0

    def to_record(self) -> Dict:
        return {
            'clock': self.clock,
            'robot_pose': list(self.robot_pose),
            'arm': self.arm.value,
            'held_object': self.held_object,
            'battery': self.battery,
            'objects': {k: list(v) for k, v in self.objects.items()},
            'resting': dict(self.resting),
            'known': sorted(self.known),
        }

    def digest(self) -> str:
        return digest(self.to_record())

    def copy(self) -> 'WorldState':
        return WorldState(self.robot_pose, self.arm, self.held_object,
                          self.battery, dict(self.objects),
                          dict(self.resting), dict(self.stations),
                          self.known, self.clock)

    def carry_position(self) -> Tuple[float, float, float]:
        return (self.robot_pose[0], self.robot_pose[1],
                sim_settings.get('CARRY_HEIGHT'))

    def resolve_target(self, name: str) -> Optional[Pose]:
        """
        Pose the robot has to reach to be *at* ``name``.

        A station resolves to its pose, an object to the pose of the
        station it rests on (or the robot pose while held). Unknown
        objects resolve to ``None``.

        :raises SimulationError: if ``name`` is neither station nor object
        """
        if name in self.stations:
            return self.stations[name].pose
        if name in self.objects:
            if name not in self.known:
                return None
            if self.held_object == name:
                return self.robot_pose
            return self.stations[self.resting[name]].pose
        raise SimulationError(f"unknown target '{name}'")

# =========================================================================

@dataclass(eq=False)
class SkillExecution:
    """
    Handle of one skill goal sent to the simulation.

    :param ref: Bound invocation
    :param spec: Skill declaration
    :param attempt: Ordinal of this send for the skill's failure hook
    :param state: Execution state
    :param steps_remaining: Steps until completion
    :param elapsed: Steps since the goal was sent
    :param doomed: The execution will fail at its midpoint
    :param reason: Failure reason
    """
    ref: CallRef
    spec: SkillSpec
    attempt: int = 1
    state: ExecState = ExecState.IDLE
    steps_remaining: int = 0
    elapsed: int = 0
    doomed: bool = False
    reason: str = ''
    start_pose: Optional[Pose] = None
    target_pose: Optional[Pose] = None

    def __repr__(self):
        return (f"SkillExecution({self.ref}, attempt={self.attempt}, "
                f"{self.state.value})")

    @property
    def status(self) -> Status:
        if self.state is ExecState.ACTIVE:
            return Status.RUNNING
        if self.state is ExecState.SUCCEEDED:
            return Status.SUCCESS
        return Status.FAILURE

    @property
    def fraction(self) -> float:
        return min(1.0, self.elapsed / self.spec.duration)

    @property
    def fail_at(self) -> int:
        return max(1, (self.spec.duration + 1) // 2)

# =========================================================================
# skill models

class SkillModel:
    """
    World effects of a skill.

    ``start`` returns a failure reason (or ``''``) when the goal is sent,
    ``update`` is called on every step while active, ``complete`` applies
    the postconditions and may also return a failure reason, ``abort``
    undoes transient state on failure or cancellation.
    """

    def start(self, sim: 'Simulation', execution: SkillExecution) -> str:
        return ''

    def update(self, sim: 'Simulation', execution: SkillExecution):
        pass

    def complete(self, sim: 'Simulation', execution: SkillExecution) -> str:
        return ''

    def abort(self, sim: 'Simulation', execution: SkillExecution):
        pass


class NavigationModel(SkillModel):
    """
    Drive to a target at constant velocity.

    The target is the argument of the skill's ``robot_at`` postcondition.
    """

    def target(self, sim: 'Simulation', execution: SkillExecution) -> str:
        for post in execution.spec.bound_postconditions(execution.ref.args):
            if post.name == 'robot_at' and post.args:
                return post.args[0]
        raise SimulationError(f"skill {execution.spec.name} has no "
                              f"robot_at postcondition to navigate to")

    def start(self, sim, execution):
        name = self.target(sim, execution)
        pose = sim.state.resolve_target(name)
        if pose is None:
            return f"{PRECONDITION_UNSATISFIED}: {name} is not known"
        execution.start_pose = sim.state.robot_pose
        execution.target_pose = tuple(float(v) for v in pose)
        return ''

    def update(self, sim, execution):
        sim.state.robot_pose = interpolate_pose(
            execution.start_pose, execution.target_pose, execution.fraction)


class RechargeModel(NavigationModel):
    """Drive to the recharge station and swap the battery on arrival."""

    def target(self, sim, execution):
        return sim_settings.get('RECHARGE_STATION')

    def complete(self, sim, execution):
        sim.state.battery = 100.0
        return ''


class PickModel(SkillModel):

    def start(self, sim, execution):
        obj = execution.ref.args[0]
        state = sim.state
        if obj not in state.objects:
            raise SimulationError(f"unknown object '{obj}'")
        if state.held_object is not None:
            return f"{PRECONDITION_UNSATISFIED}: holding {state.held_object}"
        if obj not in state.known:
            return f"{PRECONDITION_UNSATISFIED}: {obj} is not known"
        state.arm = ArmState.MANIPULATING
        return ''

    def complete(self, sim, execution):
        obj = execution.ref.args[0]
        state = sim.state
        station = state.resting.get(obj)
        if station is None or not sim.robot_near(state.stations[station].pose):
            state.arm = ArmState.MONITORING
            return f"ObjectMoved: {obj} is out of reach"
        state.held_object = obj
        state.resting[obj] = None
        state.objects[obj] = state.carry_position()
        state.arm = ArmState.TUCKED
        return ''

    def abort(self, sim, execution):
        sim.state.arm = ArmState.MONITORING


class PlaceModel(SkillModel):

    def start(self, sim, execution):
        obj, station = execution.ref.args
        state = sim.state
        if station not in state.stations:
            raise SimulationError(f"unknown station '{station}'")
        if state.held_object != obj:
            return f"{PRECONDITION_UNSATISFIED}: not holding {obj}"
        state.arm = ArmState.MANIPULATING
        return ''

    def complete(self, sim, execution):
        obj, station = execution.ref.args
        state = sim.state
        if state.held_object != obj:
            state.arm = ArmState.MONITORING
            return f"ObjectLost: {obj} left the gripper"
        state.held_object = None
        state.resting[obj] = station
        state.objects[obj] = state.stations[station].position
        state.arm = ArmState.MONITORING
        return ''

    def abort(self, sim, execution):
        sim.state.arm = ArmState.TUCKED if sim.state.held_object \
            else ArmState.MONITORING


class SearchModel(SkillModel):
    """Turn on the spot once and locate every object."""

    def start(self, sim, execution):
        execution.start_pose = sim.state.robot_pose
        return ''

    def update(self, sim, execution):
        x, y, yaw = execution.start_pose
        sweep = 2 * math.pi * execution.fraction
        sim.state.robot_pose = (x, y, wrap_angle(yaw + sweep))

    def complete(self, sim, execution):
        sim.state.robot_pose = execution.start_pose
        sim.state.known = frozenset(sim.state.objects)
        return ''

    def abort(self, sim, execution):
        sim.state.robot_pose = execution.start_pose


#: skill name -> world model
SKILL_MODELS: Dict[str, SkillModel] = {
    'move_to': NavigationModel(),
    'dock': NavigationModel(),
    'recharge': RechargeModel(),
    'pick': PickModel(),
    'place': PlaceModel(),
    'search': SearchModel(),
}

# =========================================================================
# conditions

def _robot_at(state: WorldState, args, tol) -> bool:
    pose = state.resolve_target(args[0])
    if pose is None:
        return False
    x, y, yaw = state.robot_pose
    return (abs(x - pose[0]) <= tol[0] and abs(y - pose[1]) <= tol[1] and
            abs(wrap_angle(yaw - pose[2])) <= tol[2])


def _in_hand(state: WorldState, args, tol) -> bool:
    return state.held_object == args[0]


def _object_at(state: WorldState, args, tol) -> bool:
    obj, station = args
    if obj not in state.objects:
        raise SimulationError(f"unknown object '{obj}'")
    if station not in state.stations:
        raise SimulationError(f"unknown station '{station}'")
    if obj not in state.known or state.held_object == obj:
        return False
    offset = np.abs(np.subtract(state.objects[obj],
                                state.stations[station].position))
    return bool(np.all(offset <= np.asarray(tol)))


def _battery_ok(state: WorldState, args, tol) -> bool:
    return state.battery >= tol[0]


def _objects_known(state: WorldState, args, tol) -> bool:
    return state.known >= frozenset(state.objects)


#: condition name -> (arity, predicate)
CONDITION_EVALUATORS: Dict[str, Tuple[int, Callable]] = {
    'robot_at': (1, _robot_at),
    'in_hand': (1, _in_hand),
    'object_at': (2, _object_at),
    'battery_ok': (0, _battery_ok),
    'objects_known': (0, _objects_known),
}


def condition_tolerance(name: str, library: Optional[SkillLibrary] = None,
                        threshold: Optional[float] = None
                        ) -> Tuple[float, ...]:
    """
    Numeric bounds used to evaluate a condition.

    Declared tolerances take precedence over the settings; for
    ``battery_ok`` an explicit ``threshold`` beats both.
    """
    declared = ()
    if library is not None and name in library.conditions:
        declared = library.conditions[name].tolerance
    xy = sim_settings.get('TOLERANCE_XY')
    if name == 'robot_at':
        return declared if len(declared) == 3 else \
            (xy, xy, sim_settings.get('TOLERANCE_YAW'))
    if name == 'object_at':
        return declared if len(declared) == 3 else \
            (xy, xy, sim_settings.get('TOLERANCE_Z'))
    if name == 'battery_ok':
        if threshold is not None:
            return (float(threshold),)
        return declared[:1] or (sim_settings.get('BATTERY_THRESHOLD'),)
    return declared


def evaluate_condition(ref: CallRef, state: WorldState,
                       library: Optional[SkillLibrary] = None,
                       threshold: Optional[float] = None) -> bool:
    """
    Evaluate a condition on a world state without modifying it.

    :raises UnknownCondition: if there is no evaluator (or the library
        does not declare the condition)
    :raises ArityMismatch: on a wrong number of arguments
    """
    if ref.name not in CONDITION_EVALUATORS or \
            (library is not None and ref.name not in library.conditions):
        raise UnknownCondition(f"unknown condition '{ref.name}'")
    arity, predicate = CONDITION_EVALUATORS[ref.name]
    if ref.arity != arity:
        raise ArityMismatch(f"{ref.name} takes {arity} arguments, "
                            f"got {ref.arity}")
    return predicate(state, ref.args,
                     condition_tolerance(ref.name, library, threshold))

# =========================================================================

class Simulation:
    """
    A world together with the skill executions running in it.

    Implements the :class:`~policybench.skills.WorldView` protocol. A
    simulation belongs to one run loop; parallel runs use separate
    instances.

    :param library: Skill and condition declarations
    :param state: Initial world state
    :param script: Scenario with scripted events
    :param threshold: Battery threshold override
    :param drain: Battery drain per step
    :param seed: Seed of the random failure injection
    :param failure_rate: Probability that a send is doomed
    """

    def __init__(self, library: SkillLibrary, state: WorldState,
                 script: Optional[ScenarioScript] = None,
                 threshold: Optional[float] = None, drain: float = 0.0,
                 seed: int = 0, failure_rate: float = 0.0):
        self.library = library
        self.state = state
        self.script = script or ScenarioScript()
        self.threshold = threshold
        self.drain = float(drain)
        self.failure_rate = float(failure_rate)
        self.rng = np.random.default_rng(seed)
        self.active: List[SkillExecution] = []
        self.attempts: Dict[str, int] = {}
        self.doomed: set = set()
        self.log: List[Tuple[int, str, str]] = []
        self.invocations: List[Tuple[int, CallRef, float]] = []
        self._next_event = 0
        self._apply_events()

    @classmethod
    def create(cls, library: SkillLibrary, stations: List[Station],
               objects: List[ObjectPlacement],
               script: Optional[ScenarioScript] = None,
               threshold: Optional[float] = None,
               drain: Optional[float] = None,
               seed: Optional[int] = None,
               failure_rate: Optional[float] = None) -> 'Simulation':
        """
        Build a simulation from station and object declarations.

        Explicit arguments override the scenario, which overrides the
        simulation settings.
        """
        script = script or ScenarioScript()
        table = {s.name: s for s in stations}
        state = WorldState(stations=table)
        for placement in objects:
            if placement.station not in table:
                raise SimulationError(f"object {placement.name} rests on "
                                      f"unknown station "
                                      f"'{placement.station}'")
            state.resting[placement.name] = placement.station
            state.objects[placement.name] = table[placement.station].position
        if script.robot is not None:
            state.robot_pose = script.robot
        state.battery = script.battery if script.battery is not None \
            else sim_settings.get('BATTERY_START')
        if script.known is None:
            state.known = frozenset(state.objects)
        else:
            unknown = set(script.known) - set(state.objects)
            if unknown:
                raise SimulationError(f"unknown objects in known list: "
                                      f"{', '.join(sorted(unknown))}")
            state.known = frozenset(script.known)
        if drain is None:
            drain = script.drain if script.drain is not None \
                else sim_settings.get('BATTERY_DRAIN')
        if seed is None:
            seed = script.seed or 0
        if failure_rate is None:
            failure_rate = script.failure_rate or 0.0
        return cls(library, state, script, threshold, drain, seed,
                   failure_rate)

    def __repr__(self):
        return (f"Simulation(clock={self.state.clock}, "
                f"battery={self.state.battery:.1f}, "
                f"active={len(self.active)})")

    @property
    def clock(self) -> int:
        return self.state.clock

    # ---------------------------------------------------------------------
    # WorldView

    def knows_skill(self, name: str) -> bool:
        return name in self.library.skills and name in SKILL_MODELS

    def knows_condition(self, name: str) -> bool:
        return name in self.library.conditions and \
            name in CONDITION_EVALUATORS

    def evaluate(self, ref: CallRef) -> bool:
        return evaluate_condition(ref, self.state, self.library,
                                  self.threshold)

    def evaluate_condition(self, ref: CallRef) -> bool:
        return self.evaluate(ref)

    def robot_near(self, pose: Pose) -> bool:
        tol = condition_tolerance('robot_at', self.library)
        x, y, yaw = self.state.robot_pose
        return (abs(x - pose[0]) <= tol[0] and abs(y - pose[1]) <= tol[1]
                and abs(wrap_angle(yaw - pose[2])) <= tol[2])

    def send(self, ref: CallRef) -> SkillExecution:
        """
        Activate a skill goal.

        Unsatisfied preconditions do not raise: the execution fails
        immediately and carries the reason.

        :raises UnknownSkill: if the skill is undeclared or has no model
        :raises ArityMismatch: on a wrong number of arguments
        """
        if not self.knows_skill(ref.name):
            raise UnknownSkill(f"unknown skill '{ref.name}'")
        spec = self.library.skill(ref.name)
        if ref.arity != len(spec.params):
            raise ArityMismatch(f"{ref.name} takes {len(spec.params)} "
                                f"arguments, got {ref.arity}")
        hook = spec.failure_model
        attempt = self.attempts.get(hook, 0) + 1
        self.attempts[hook] = attempt
        execution = SkillExecution(ref, spec, attempt)
        execution.doomed = (hook, attempt) in self.doomed
        if self.failure_rate > 0 and self.rng.random() < self.failure_rate:
            execution.doomed = True
        execution.state = ExecState.ACTIVE
        execution.steps_remaining = spec.duration
        self.invocations.append((self.clock, ref, self.state.battery))
        self._log('send', f"{ref} attempt {attempt}")

        reason = ''
        for pre in spec.bound_preconditions(ref.args):
            if not self.evaluate(pre):
                reason = f"{PRECONDITION_UNSATISFIED}: {pre}"
                break
        if not reason:
            reason = SKILL_MODELS[ref.name].start(self, execution)
        if reason:
            self._finish(execution, ExecState.FAILED, reason)
        else:
            self.active.append(execution)
        return execution

    def monitor(self, execution: SkillExecution) -> Status:
        return execution.status

    def cancel(self, execution: SkillExecution):
        """Stop an active execution; anything else is left as it is."""
        if execution.state is not ExecState.ACTIVE:
            return
        SKILL_MODELS[execution.ref.name].abort(self, execution)
        self.active.remove(execution)
        self._finish(execution, ExecState.CANCELLED, 'cancelled')

    # ---------------------------------------------------------------------
    # time

    def advance(self) -> WorldState:
        """
        Simulate one step.

        Order: clock, battery drain, skill progress (in send order), held
        object tracking, then the scripted events due at the new clock.
        """
        state = self.state
        state.clock += 1
        state.battery = max(0.0, state.battery - self.drain)
        for execution in list(self.active):
            self._progress(execution)
        if state.held_object is not None:
            state.objects[state.held_object] = state.carry_position()
        self._apply_events()
        self.check_invariants()
        return state

    def _progress(self, execution: SkillExecution):
        model = SKILL_MODELS[execution.ref.name]
        execution.elapsed += 1
        execution.steps_remaining -= 1
        if execution.doomed and execution.elapsed >= execution.fail_at:
            model.abort(self, execution)
            self.active.remove(execution)
            self._finish(execution, ExecState.FAILED, INJECTED_FAILURE)
            return
        model.update(self, execution)
        if execution.steps_remaining > 0:
            return
        self.active.remove(execution)
        reason = model.complete(self, execution)
        if reason:
            self._finish(execution, ExecState.FAILED, reason)
        else:
            self._finish(execution, ExecState.SUCCEEDED)

    def _finish(self, execution: SkillExecution, state: ExecState,
                reason: str = ''):
        execution.state = state
        execution.reason = reason
        detail = f"{execution.ref}: {reason}" if reason \
            else str(execution.ref)
        self._log(state.value, detail)

    # ---------------------------------------------------------------------
    # scripted events

    def pending_events(self) -> List[ScenarioEvent]:
        """Events not applied yet."""
        return self.script.events[self._next_event:]

    def _apply_events(self):
        events = self.script.events
        while self._next_event < len(events) and \
                events[self._next_event].step <= self.clock:
            self.apply_event(events[self._next_event])
            self._next_event += 1

    def apply_event(self, event: ScenarioEvent):
        state = self.state
        if event.kind == 'inject_failure':
            hook, nth = event.args
            self.doomed.add((hook, nth))
        elif event.kind == 'move_object':
            obj, station = event.args
            if obj not in state.objects:
                raise SimulationError(f"event {event}: unknown object")
            if station not in state.stations:
                raise SimulationError(f"event {event}: unknown station")
            if state.held_object == obj:
                state.held_object = None
                state.arm = ArmState.MONITORING
            state.resting[obj] = station
            state.objects[obj] = state.stations[station].position
        elif event.kind == 'set_battery':
            state.battery = float(np.clip(event.args[0], 0.0, 100.0))
        elif event.kind == 'drain_rate':
            self.drain = max(0.0, event.args[0])
        self._log('event', str(event))

    # ---------------------------------------------------------------------

    def check_invariants(self):
        """
        :raises SimulationError: if the world is inconsistent
        """
        state = self.state
        if not 0.0 <= state.battery <= 100.0:
            raise SimulationError(f"battery out of range: {state.battery}")
        for obj, station in state.resting.items():
            held = state.held_object == obj
            if held == (station is not None):
                raise SimulationError(f"object {obj} must be either held "
                                      f"or resting")

    def _log(self, kind: str, detail: str):
        self.log.append((self.clock, kind, detail))
        logger.debug('[%d] %s %s', self.clock, kind, detail)

    def digest(self) -> str:
        return self.state.digest()
