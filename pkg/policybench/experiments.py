"""
Experiment Reproduction
=======================

The four experiments of the benchmark, each comparing the behavior tree
with the fault-tolerant state machine on the fetch task:

``exp1``
    baseline policies, their structure and their runs with and without an
    injected grasp failure (the sequential state machine for contrast) and
    with the cube relocated after the task is done
``exp2``
    adding the recharge behavior: edit effort, structure, graph edit
    distance and the recharge trigger
``exp3``
    adding the docking step to the ``exp2`` policies
``scale``
    adding the recharge behavior to the five-cube task

Every published number becomes a :class:`Check`; a report with a failing
check raises :class:`ReproductionMismatch` from
:meth:`ExperimentReport.raise_for_mismatch`.
"""

import logging
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Optional

from .AppSettings import harness_settings, sim_settings
from .BehaviorTree import PolicyTree
from .Graph import DirectedGraph
from .SimWorld import condition_tolerance, evaluate_condition
from .editing import DOCK_CONDITION, EditResult, edit
from .graph_metrics import GedResult, cyclomatic_complexity, ged
from .policydsl import Document, Policy, load_fixture
from .runner import RunConfig, RunResult, build_policy, run_many
from .skills import CallRef

logger = logging.getLogger(__name__)

FETCH_DOCUMENT = 'fetch_task.pol'
SCALE_DOCUMENT = 'scale_task.pol'

# =========================================================================

class ReproductionMismatch(AssertionError):
    """At least one reproduced number differs from the expected one."""

    def __init__(self, report: 'ExperimentReport'):
        self.report = report
        lines = [f"{c.name}: expected {c.expected!r}, got {c.actual!r}"
                 for c in report.mismatches]
        super().__init__(f"{report.experiment}: {len(lines)} mismatches\n" +
                         '\n'.join(lines))


@dataclass
class Check:
    name: str
    expected: Any
    actual: Any

    @property
    def passed(self) -> bool:
        return self.expected == self.actual

    def to_record(self) -> Dict:
        return {'name': self.name, 'expected': self.expected,
                'actual': self.actual, 'passed': self.passed}


@dataclass
class ExperimentReport:
    """
    Structure, edit, distance and run records of one experiment plus the
    checks against the expected numbers.
    """
    experiment: str
    policies: List[Dict] = field(default_factory=list)
    edits: List[Dict] = field(default_factory=list)
    distances: List[Dict] = field(default_factory=list)
    runs: List[Dict] = field(default_factory=list)
    checks: List[Check] = field(default_factory=list)

    @property
    def mismatches(self) -> List[Check]:
        return [c for c in self.checks if not c.passed]

    @property
    def passed(self) -> bool:
        return not self.mismatches

    def check(self, name: str, expected, actual) -> bool:
        entry = Check(name, expected, actual)
        self.checks.append(entry)
        if not entry.passed:
            logger.warning('%s: expected %r, got %r', name, expected, actual)
        return entry.passed

    def raise_for_mismatch(self):
        if not self.passed:
            raise ReproductionMismatch(self)

    # ---------------------------------------------------------------------

    def add_policy(self, representation: str, stage: str,
                   policy: Policy) -> DirectedGraph:
        graph = policy.to_graph(f"{representation}_{stage}")
        record = {'representation': representation, 'stage': stage,
                  'nodes': graph.node_count, 'edges': graph.edge_count}
        if not isinstance(policy, PolicyTree):
            record['cc'] = cyclomatic_complexity(graph)
        self.policies.append(record)
        return graph

    def add_edit(self, representation: str, result: EditResult):
        record = result.to_record()
        record['representation'] = representation
        record['operation'] = '; '.join(r.operation for r in result.receipts)
        self.edits.append(record)

    def add_distance(self, representation: str, source: str, target: str,
                     g1: DirectedGraph, g2: DirectedGraph) -> GedResult:
        result = ged(g1, g2)
        record = result.to_record()
        record.update({'representation': representation,
                       'from': source, 'to': target})
        self.distances.append(record)
        return result

    def add_run(self, result: RunResult):
        self.runs.append(result.to_record())

    # ---------------------------------------------------------------------

    def to_record(self) -> Dict:
        return {
            'schema': harness_settings.get('REPORT_SCHEMA'),
            'experiment': self.experiment,
            'policies': self.policies,
            'edits': self.edits,
            'distances': self.distances,
            'runs': self.runs,
            'checks': [c.to_record() for c in self.checks],
            'passed': self.passed,
        }

    def to_text(self) -> str:
        lines = [f"experiment {self.experiment}"]
        for p in self.policies:
            cc = f", cc {p['cc']}" if 'cc' in p else ''
            lines.append(f"  policy {p['representation']} {p['stage']}: "
                         f"{p['nodes']} nodes, {p['edges']} edges{cc}")
        for e in self.edits:
            lines.append(f"  edit {e['representation']} {e['operation']}: "
                         f"{e['elementary_ops']} elementary operations, "
                         f"{e['touched']} touched")
        for d in self.distances:
            exact = 'exact' if d['exact'] else 'upper bound'
            lines.append(f"  ged {d['representation']} {d['from']} -> "
                         f"{d['to']}: {d['distance']} ({exact})")
        for r in self.runs:
            lines.append(f"  run {r['representation']} {r['scenario']}: "
                         f"{r['outcome']} after {r['steps']} steps")
        for c in self.checks:
            status = 'ok' if c.passed else 'MISMATCH'
            lines.append(f"  check {c.name}: expected {c.expected}, "
                         f"got {c.actual} {status}")
        lines.append('passed' if self.passed else
                     f"FAILED ({len(self.mismatches)} mismatches)")
        return '\n'.join(lines) + '\n'

# =========================================================================

def _structure(report: ExperimentReport, key: str, graph: DirectedGraph,
               nodes: int, edges: int, cc: Optional[int] = None):
    report.check(f"{key}.nodes", nodes, graph.node_count)
    report.check(f"{key}.edges", edges, graph.edge_count)
    if cc is not None:
        report.check(f"{key}.cc", cc, cyclomatic_complexity(graph))


def _distance(report: ExperimentReport, key: str, representation: str,
              source: str, target: str, g1: DirectedGraph,
              g2: DirectedGraph, expected: int):
    result = report.add_distance(representation, source, target, g1, g2)
    report.check(f"{key}.ged", expected, int(round(result.distance)))
    report.check(f"{key}.ged_exact", True, result.exact)


def _edited(report: ExperimentReport, representation: str, policy: Policy,
            script: str, doc: Document) -> EditResult:
    result = edit(policy, script, doc.library())
    report.add_edit(representation, result)
    return result


def _runs(report: ExperimentReport, configs: List[RunConfig],
          jobs: int) -> List[RunResult]:
    results = run_many(configs, jobs)
    for result in results:
        report.add_run(result)
    return results


def _holds(result: RunResult, ref: CallRef, doc: Document) -> bool:
    return evaluate_condition(ref, result.world, doc.library())


def _baselines(doc: Document) -> Dict[str, Policy]:
    return {'bt': build_policy(doc, 'bt', 'fetch'),
            'fsm': build_policy(doc, 'fsm', 'fetch')}

# -------------------------------------------------------------------------

def exp1(doc: Optional[Document] = None, jobs: int = 1) -> ExperimentReport:
    doc = doc or load_fixture(FETCH_DOCUMENT)
    report = ExperimentReport('exp1')
    policies = _baselines(doc)
    policies['fsm-seq'] = build_policy(doc, 'fsm-seq', 'fetch')
    for rep, policy in policies.items():
        report.add_policy(rep, 'exp1', policy)
    _structure(report, 'bt.exp1', policies['bt'].to_graph(), 14, 13)
    _structure(report, 'fsm.exp1', policies['fsm'].to_graph(), 6, 18, 14)

    configs = [RunConfig(doc, rep, scenario)
               for scenario in ('exp1_nominal', 'exp1_pick_failure')
               for rep in ('bt', 'fsm', 'fsm-seq')]
    configs.append(RunConfig(doc, 'bt', 'exp1_relocation'))
    results = _runs(report, configs, jobs)
    nominal, failure, relocation = results[:3], results[3:6], results[6]
    for result in nominal:
        report.check(f"{result.representation}.exp1_nominal.outcome",
                     'success', result.outcome)
    expected = {'bt': 'success', 'fsm': 'success', 'fsm-seq': 'failure'}
    for result in failure:
        rep = result.representation
        report.check(f"{rep}.exp1_pick_failure.outcome", expected[rep],
                     result.outcome)
        if rep != 'fsm-seq':
            # the failed grasp is re-attempted once
            report.check(f"{rep}.exp1_pick_failure.pick_sends", 2,
                         len(result.sends('pick')))
    report.check('bt.exp1_relocation.outcome', 'success', relocation.outcome)
    report.check('bt.exp1_relocation.pick_sends', 2,
                 len(relocation.sends('pick')))
    goal = doc.goals.achieve[0].ref
    report.check('bt.exp1_relocation.goal_holds', True,
                 _holds(relocation, goal, doc))
    return report


def exp2(doc: Optional[Document] = None, jobs: int = 1) -> ExperimentReport:
    doc = doc or load_fixture(FETCH_DOCUMENT)
    report = ExperimentReport('exp2')
    base = _baselines(doc)
    edited = {}
    for rep, policy in base.items():
        g1 = report.add_policy(rep, 'exp1', policy)
        result = _edited(report, rep, policy, 'add-recharge', doc)
        edited[rep] = result.policy
        g2 = report.add_policy(rep, 'exp2', result.policy)
        report.check(f"{rep}.add_recharge.elementary_ops", 8,
                     result.receipt.elementary_ops)
        _distance(report, f"{rep}.exp1_exp2", rep, 'exp1', 'exp2', g1, g2, 8)
    _structure(report, 'bt.exp2', edited['bt'].to_graph(), 18, 17)
    _structure(report, 'fsm.exp2', edited['fsm'].to_graph(), 7, 25, 20)

    # removing the recharge behavior restores the baseline
    undone = edit(edited['bt'], 'remove(recharge()!); unwrap').policy
    report.check('bt.exp2_removed.same_as_exp1', True, undone == base['bt'])
    undone = edit(edited['fsm'], 'remove(recharge)').policy
    report.check('fsm.exp2_removed.same_as_exp1', True,
                 undone.structure() == base['fsm'].structure())

    scenario = doc.get_scenario('exp2_recharge')
    threshold = condition_tolerance('battery_ok', doc.library())[0]
    drain = scenario.drain if scenario.drain is not None \
        else sim_settings.get('BATTERY_DRAIN')
    configs = [RunConfig(doc, rep, 'exp2_recharge', policy=edited[rep])
               for rep in ('bt', 'fsm')]
    for result in _runs(report, configs, jobs):
        key = f"{result.representation}.exp2_recharge"
        report.check(f"{key}.outcome", 'success', result.outcome)
        sends = result.sends('recharge')
        report.check(f"{key}.recharged", True, bool(sends))
        if sends:
            battery = sends[0][2]
            report.check(f"{key}.below_threshold", True, battery < threshold)
            report.check(f"{key}.on_first_crossing", True,
                         battery >= threshold - drain)
    return report


def exp3(doc: Optional[Document] = None, jobs: int = 1) -> ExperimentReport:
    doc = doc or load_fixture(FETCH_DOCUMENT)
    report = ExperimentReport('exp3')
    edited = {}
    for rep, policy in _baselines(doc).items():
        previous = edit(policy, 'add-recharge', doc.library()).policy
        g1 = report.add_policy(rep, 'exp2', previous)
        result = _edited(report, rep, previous, 'add-dock', doc)
        edited[rep] = result.policy
        g2 = report.add_policy(rep, 'exp3', result.policy)
        _distance(report, f"{rep}.exp2_exp3", rep, 'exp2', 'exp3', g1, g2, 6)
    _structure(report, 'bt.exp3', edited['bt'].to_graph(), 21, 20)
    _structure(report, 'fsm.exp3', edited['fsm'].to_graph(), 8, 30, 24)

    configs = [RunConfig(doc, rep, 'exp3_dock', policy=edited[rep])
               for rep in ('bt', 'fsm')]
    for result in _runs(report, configs, jobs):
        key = f"{result.representation}.exp3_dock"
        report.check(f"{key}.outcome", 'success', result.outcome)
        report.check(f"{key}.docked", True,
                     _holds(result, DOCK_CONDITION, doc))
    return report


def scale(doc: Optional[Document] = None, jobs: int = 1) -> ExperimentReport:
    doc = doc or load_fixture(SCALE_DOCUMENT)
    report = ExperimentReport('scale')
    expected = {'bt': ((77, 76), (80, 79), 6),
                'fsm': ((24, 90), (25, 115), 26)}
    edited = {}
    for rep in ('bt', 'fsm'):
        policy = build_policy(doc, rep, 'scale')
        before, after, distance = expected[rep]
        g1 = report.add_policy(rep, 'base', policy)
        result = _edited(report, rep, policy, 'add-recharge', doc)
        edited[rep] = result.policy
        g2 = report.add_policy(rep, 'recharge', result.policy)
        _structure(report, f"{rep}.base", g1, *before)
        _structure(report, f"{rep}.recharge", g2, *after)
        _distance(report, f"{rep}.base_recharge", rep, 'base', 'recharge',
                  g1, g2, distance)
        if rep == 'bt':
            # one parent splice plus the three inserted nodes
            report.check('bt.add_recharge.touched', 5, result.receipt.touched)
        else:
            existing = len(policy.states)
            report.check('fsm.add_recharge.attached', existing + 2,
                         result.receipt.attached)
    configs = [RunConfig(doc, rep, policy=edited[rep])
               for rep in ('bt', 'fsm')]
    for result in _runs(report, configs, jobs):
        report.check(f"{result.representation}.scale.outcome", 'success',
                     result.outcome)
    return report


#: experiment id -> reproduction function
EXPERIMENTS: Dict[str, Callable[..., ExperimentReport]] = {
    'exp1': exp1,
    'exp2': exp2,
    'exp3': exp3,
    'scale': scale,
}


def reproduce(experiment: str, doc: Optional[Document] = None,
              jobs: int = 1) -> ExperimentReport:
    """Run one experiment and return its report (mismatches included)."""
    try:
        function = EXPERIMENTS[experiment]
    except KeyError:
        raise ValueError(f"unknown experiment '{experiment}', choose from "
                         f"{', '.join(EXPERIMENTS)}") from None
    report = function(doc, jobs)
    logger.info('%s: %d checks, %d mismatches', experiment,
                len(report.checks), len(report.mismatches))
    return report
