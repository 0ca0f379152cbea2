"""
Scenario Runs
=============

Executes a policy against a :class:`~policybench.SimWorld.Simulation`
until the task ends or the step budget runs out.

A behavior tree is ticked once per simulation step. It keeps being ticked
after the root reports Success while scripted events are still pending,
so a disturbance after completion is handled; the run ends at a root
Success with no pending events.

A state machine is stepped until its active state reports ``running``
(or a terminal outcome is reached), then the world advances. Transitions
between states therefore take no simulated time.
"""

import json
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple, Union

from .AppSettings import exec_settings
from .BehaviorTree import PolicyTree
from .SimWorld import Simulation, WorldState
from .StateMachine import (RUNNING, SUCCEEDED, NoDispatchMatch,
                           StateMachine)
from .policydsl import Document, Policy, load
from .skills import CallRef, Status
from .synthesis import (assemble_fault_tolerant_fsm, assemble_sequential_fsm,
                        backchain)

logger = logging.getLogger(__name__)

REPRESENTATIONS = ('bt', 'fsm', 'fsm-seq')

OUTCOME_SUCCESS = 'success'
OUTCOME_FAILURE = 'failure'
OUTCOME_TIMEOUT = 'timeout'
OUTCOME_STUCK = 'stuck'

# =========================================================================

@dataclass
class RunConfig:
    """
    What to run and with which overrides.

    :param document: Parsed document or path to a ``.pol`` file
    :param representation: ``bt``, ``fsm`` (fault tolerant) or ``fsm-seq``
    :param scenario: Scenario name, the document's first by default
    :param threshold: Battery threshold override (percent)
    :param drain: Battery drain override (percent per step)
    :param seed: Seed override of the random failure injection
    :param budget: Step budget, ``STEP_BUDGET`` by default
    :param policy: Policy to run instead of building one
    """
    document: Union[Document, str, Path]
    representation: str = 'bt'
    scenario: Optional[str] = None
    threshold: Optional[float] = None
    drain: Optional[float] = None
    seed: Optional[int] = None
    budget: Optional[int] = None
    policy: Optional[Policy] = None

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"representation must be one of "
                             f"{', '.join(REPRESENTATIONS)}, got "
                             f"'{self.representation}'")
        if self.budget is None:
            self.budget = exec_settings.get('STEP_BUDGET')
        if self.budget <= 0:
            raise ValueError(f"step budget must be positive, "
                             f"got {self.budget}")
        if self.threshold is not None and \
                not 0.0 <= self.threshold <= 100.0:
            raise ValueError(f"threshold must be within [0, 100], "
                             f"got {self.threshold}")
        if self.drain is not None and self.drain < 0:
            raise ValueError(f"drain must not be negative, got {self.drain}")

    def load_document(self) -> Document:
        if isinstance(self.document, Document):
            return self.document
        return load(self.document)


@dataclass
class TraceRecord:
    """One line of a run trace."""
    step: int
    element: str
    event: str
    status: str
    battery: float
    digest: str

    def to_record(self) -> Dict:
        return {
            'step': self.step,
            'element': self.element,
            'event': self.event,
            'status': self.status,
            'battery': round(self.battery, 6),
            'digest': self.digest,
        }


@dataclass
class RunResult:
    """
    Outcome of a run.

    :param outcome: ``success``, ``failure``, ``timeout`` or ``stuck``
    :param steps: Simulation steps taken
    :param skill_trace: Skill invocations in send order
    :param trace: Per-step records
    :param final_digest: Digest of the final world state
    :param world: Final world state
    :param invocations: (clock, invocation, battery) per send
    """
    outcome: str
    steps: int
    skill_trace: List[str] = field(default_factory=list)
    trace: List[TraceRecord] = field(default_factory=list)
    final_digest: str = ''
    world: Optional[WorldState] = None
    invocations: List[Tuple[int, CallRef, float]] = field(
        default_factory=list)
    representation: str = ''
    scenario: str = ''

    @property
    def succeeded(self) -> bool:
        return self.outcome == OUTCOME_SUCCESS

    def sends(self, skill: str) -> List[Tuple[int, CallRef, float]]:
        """Invocations of one skill."""
        return [i for i in self.invocations if i[1].name == skill]

    def to_record(self) -> Dict:
        return {
            'representation': self.representation,
            'scenario': self.scenario,
            'outcome': self.outcome,
            'steps': self.steps,
            'skill_trace': list(self.skill_trace),
            'final_digest': self.final_digest,
        }

# =========================================================================

def build_policy(doc: Document, representation: str,
                 name: str = '') -> Policy:
    """Synthesize the requested policy representation from the goals."""
    library = doc.library()
    if representation == 'bt':
        return backchain(doc.goals, library, name)
    if representation == 'fsm':
        return assemble_fault_tolerant_fsm(doc.goals, library, name)
    if representation == 'fsm-seq':
        return assemble_sequential_fsm(doc.goals, library, name)
    raise ValueError(f"unknown representation '{representation}'")


def representation_of(policy: Policy) -> str:
    if isinstance(policy, PolicyTree):
        return 'bt'
    return 'fsm' if policy.idle is not None else 'fsm-seq'


def select_policy(doc: Document, representation: str) -> Policy:
    """The document's own policy if it matches, a synthesized one else."""
    if doc.policy is not None and \
            representation_of(doc.policy) == representation:
        return doc.policy
    return build_policy(doc, representation)


def make_simulation(doc: Document, config: RunConfig) -> Simulation:
    script = doc.get_scenario(config.scenario)
    return Simulation.create(doc.library(), doc.stations, doc.objects,
                             script, threshold=config.threshold,
                             drain=config.drain, seed=config.seed)

# -------------------------------------------------------------------------

def _record(sim: Simulation, element: str, event: str,
            status: str) -> TraceRecord:
    return TraceRecord(sim.clock, element, event, status,
                       sim.state.battery, sim.digest())


def _run_tree(tree: PolicyTree, sim: Simulation, budget: int,
              trace: List[TraceRecord]) -> str:
    tree.reset()
    while True:
        status = tree.tick(sim)
        active = [tree.nodes[h].label for h in tree.active_actions()]
        element = ','.join(active) or tree.nodes[tree.root].label
        trace.append(_record(sim, element, 'tick', status.value))
        if status is Status.SUCCESS and not sim.pending_events():
            return OUTCOME_SUCCESS
        if sim.clock >= budget:
            return OUTCOME_TIMEOUT
        sim.advance()


def _run_machine(sm: StateMachine, sim: Simulation, budget: int,
                 trace: List[TraceRecord]) -> str:
    sm.reset()
    limit = 4 * (len(sm.states) + 1)
    while True:
        for _ in range(limit):
            try:
                result = sm.step(sim)
            except NoDispatchMatch as e:
                logger.error('run stuck at step %d: %s', sim.clock, e)
                trace.append(_record(sim, sm.active or '', 'stuck',
                                     OUTCOME_STUCK))
                return OUTCOME_STUCK
            trace.append(_record(sim, result.state, result.event,
                                 result.outcome))
            if result.finished is not None:
                return OUTCOME_SUCCESS if result.finished == SUCCEEDED \
                    else OUTCOME_FAILURE
            if result.outcome == RUNNING:
                break
        if sim.clock >= budget:
            return OUTCOME_TIMEOUT
        sim.advance()


def run_policy(policy: Policy, sim: Simulation,
               budget: Optional[int] = None) -> RunResult:
    """
    Run a copy of ``policy`` in ``sim``.

    :param budget: Maximum clock value, ``STEP_BUDGET`` by default
    """
    if budget is None:
        budget = exec_settings.get('STEP_BUDGET')
    trace: List[TraceRecord] = []
    policy = policy.copy()
    if isinstance(policy, PolicyTree):
        policy.validate(sim)
        outcome = _run_tree(policy, sim, budget, trace)
    else:
        policy.validate()
        outcome = _run_machine(policy, sim, budget, trace)
    if outcome == OUTCOME_TIMEOUT:
        logger.warning('step budget of %d exhausted', budget)
    result = RunResult(
        outcome=outcome, steps=sim.clock,
        skill_trace=[str(ref) for _, ref, _ in sim.invocations],
        trace=trace, final_digest=sim.digest(), world=sim.state,
        invocations=list(sim.invocations),
        representation=representation_of(policy),
        scenario=sim.script.name)
    logger.info('%s run of scenario %r: %s after %d steps',
                result.representation, result.scenario, outcome, sim.clock)
    return result


def run(config: RunConfig) -> RunResult:
    """Load, build (unless given a policy), simulate."""
    doc = config.load_document()
    policy = config.policy if config.policy is not None \
        else select_policy(doc, config.representation)
    sim = make_simulation(doc, config)
    return run_policy(policy, sim, config.budget)


def run_many(configs: List[RunConfig], jobs: int = 1) -> List[RunResult]:
    """
    Run several configurations, each on its own world.

    Results keep the order of ``configs``.
    """
    if jobs <= 1 or len(configs) <= 1:
        return [run(c) for c in configs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(run, configs))


def write_trace(result: RunResult, path: Union[str, Path]):
    """Write the trace as JSON lines."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8') as f:
        for record in result.trace:
            f.write(json.dumps(record.to_record(), sort_keys=True) + '\n')
    logger.info('wrote trace %s (%d records)', path, len(result.trace))
