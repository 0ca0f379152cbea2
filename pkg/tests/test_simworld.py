import math

import pytest

from policybench.AppSettings import sim_settings
from policybench.SimWorld import (INJECTED_FAILURE, PRECONDITION_UNSATISFIED,
                                  ArityMismatch, ArmState, ExecState,
                                  ObjectPlacement, ScenarioEvent,
                                  ScenarioScript, Simulation,
                                  SimulationError, UnknownCondition,
                                  UnknownSkill, condition_tolerance,
                                  evaluate_condition)
from policybench.skills import CallRef, Status
from policybench.utils import angle_diff, digest, interpolate_pose, wrap_angle

ref = CallRef.parse_text


@pytest.fixture
def world(fetch_doc, library):
    """Simulation factory over the fetch task scene."""
    def factory(script=None, **kwargs):
        return Simulation.create(library, fetch_doc.stations,
                                 fetch_doc.objects, script, **kwargs)
    return factory


def finish(sim, text):
    """Send a skill and advance until it is no longer running."""
    execution = sim.send(ref(text))
    while sim.monitor(execution) is Status.RUNNING:
        sim.advance()
    return execution

# =========================================================================

class TestGeometry:

    def test_wrap_angle(self):
        assert wrap_angle(0.0) == 0.0
        assert wrap_angle(math.pi) == pytest.approx(-math.pi)
        assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)

    def test_angle_diff_takes_short_arc(self):
        assert angle_diff(3.0, -3.0) == pytest.approx(6.0 - 2 * math.pi)

    def test_interpolate_pose(self):
        start, target = (0.0, 0.0, 0.0), (2.0, 4.0, 1.0)
        assert interpolate_pose(start, target, 0.5) == \
            pytest.approx((1.0, 2.0, 0.5))
        assert interpolate_pose(start, target, 1.0) == target
        assert interpolate_pose(start, target, -1.0) == \
            pytest.approx(start)

    def test_digest_rounds_floats(self):
        assert digest({'x': 0.1 + 0.2}) == digest({'x': 0.3})
        assert digest({'x': 1.0}) != digest({'x': 1.5})
        assert len(digest([1, 2], length=8)) == 8

# =========================================================================

class TestScenarioScript:

    def test_events_sorted_stably(self):
        script = ScenarioScript('s', events=[
            ScenarioEvent(5, 'set_battery', (50,)),
            ScenarioEvent(1, 'drain_rate', (1,)),
            ScenarioEvent(5, 'drain_rate', (2,))])
        assert [(e.step, e.kind) for e in script.events] == [
            (1, 'drain_rate'), (5, 'set_battery'), (5, 'drain_rate')]

    def test_event_arguments_cast(self):
        event = ScenarioEvent('3', 'inject_failure', ('pick', '2'))
        assert event.step == 3
        assert event.args == ('pick', 2)
        assert str(event) == 'inject_failure(pick, 2)'

    @pytest.mark.parametrize('step, kind, args', [
        (0, 'explode', ()),
        (-1, 'set_battery', (10,)),
        (0, 'set_battery', ()),
        (0, 'inject_failure', ('pick', 'twice')),
    ])
    def test_invalid_events(self, step, kind, args):
        with pytest.raises(ValueError):
            ScenarioEvent(step, kind, args)

    @pytest.mark.parametrize('kwargs', [
        {'battery': 120.0}, {'drain': -0.1}, {'failure_rate': 1.5},
        {'robot': (1.0, 2.0)},
    ])
    def test_invalid_overrides(self, kwargs):
        with pytest.raises(ValueError):
            ScenarioScript('s', **kwargs)

# =========================================================================

class TestSimulation:

    def test_initial_state(self, world):
        sim = world()
        assert sim.state.robot_pose == (0.0, 0.0, 0.0)
        assert sim.state.battery == 100.0
        assert sim.state.resting == {'cube': 'fetch_table_1'}
        assert sim.state.objects['cube'] == (2.0, 0.0, 0.75)
        assert sim.evaluate(ref('object_at(cube, fetch_table_1)'))

    def test_unknown_station_of_object(self, fetch_doc, library):
        with pytest.raises(SimulationError):
            Simulation.create(library, fetch_doc.stations,
                              [ObjectPlacement('cube', 'nowhere')])

    def test_battery_drain(self, world):
        sim = world()
        for _ in range(10):
            sim.advance()
        assert sim.clock == 10
        assert sim.state.battery == pytest.approx(95.0)

    def test_battery_never_negative(self, world):
        sim = world(ScenarioScript(battery=1.0, drain=0.4))
        for _ in range(5):
            sim.advance()
        assert sim.state.battery == 0.0

    def test_navigation(self, world):
        sim = world()
        execution = sim.send(ref('move_to(fetch_table_1)'))
        for _ in range(2):
            sim.advance()
        assert sim.monitor(execution) is Status.RUNNING
        assert sim.state.robot_pose[0] == pytest.approx(0.8)
        for _ in range(3):
            sim.advance()
        assert sim.monitor(execution) is Status.SUCCESS
        assert sim.state.robot_pose == (2.0, 0.0, 0.0)
        assert sim.evaluate(ref('robot_at(fetch_table_1)'))
        assert sim.evaluate(ref('robot_at(cube)'))

    def test_precondition_fails_at_send(self, world):
        sim = world()
        execution = sim.send(ref('pick(cube)'))
        assert sim.monitor(execution) is Status.FAILURE
        assert execution.reason.startswith(PRECONDITION_UNSATISFIED)
        assert not sim.active

    def test_fetch_sequence(self, world):
        sim = world()
        for text in ('move_to(cube)', 'pick(cube)', 'move_to(delivery)',
                     'place(cube, delivery)'):
            assert finish(sim, text).status is Status.SUCCESS, text
        assert sim.clock == 16
        assert sim.evaluate(ref('object_at(cube, delivery)'))
        assert sim.state.held_object is None
        assert sim.state.arm is ArmState.MONITORING

    def test_held_object_follows_robot(self, world):
        sim = world()
        finish(sim, 'move_to(cube)')
        finish(sim, 'pick(cube)')
        assert sim.evaluate(ref('in_hand(cube)'))
        assert sim.state.arm is ArmState.TUCKED
        finish(sim, 'move_to(delivery)')
        carry = sim_settings.get('CARRY_HEIGHT')
        assert sim.state.objects['cube'] == (-2.0, 0.0, carry)
        assert not sim.evaluate(ref('object_at(cube, delivery)'))

    def test_injected_failure(self, world):
        script = ScenarioScript(
            'fail', events=[ScenarioEvent(0, 'inject_failure', ('pick', 1))])
        sim = world(script)
        finish(sim, 'move_to(cube)')
        start = sim.clock
        first = finish(sim, 'pick(cube)')
        assert first.status is Status.FAILURE
        assert first.reason == INJECTED_FAILURE
        assert sim.clock - start == 2
        assert sim.state.arm is ArmState.MONITORING
        second = finish(sim, 'pick(cube)')
        assert second.attempt == 2
        assert second.status is Status.SUCCESS

    def test_failure_rate(self, world):
        sim = world(failure_rate=1.0)
        assert finish(sim, 'move_to(delivery)').reason == INJECTED_FAILURE

    def test_seeded_failures_repeat(self, world):
        def outcomes(seed):
            sim = world(failure_rate=0.5, seed=seed)
            return [finish(sim, 'search()').state for _ in range(8)]
        assert outcomes(3) == outcomes(3)

    def test_recharge(self, world):
        sim = world(ScenarioScript(battery=30.0))
        finish(sim, 'recharge()')
        assert sim.state.battery == 100.0
        assert sim.evaluate(ref('robot_at(recharge_station)'))

    def test_battery_threshold(self, world):
        assert not world(ScenarioScript(battery=19.0)).evaluate(
            ref('battery_ok()'))
        assert world(ScenarioScript(battery=20.0)).evaluate(
            ref('battery_ok()'))
        assert world(ScenarioScript(battery=19.0), threshold=10).evaluate(
            ref('battery_ok()'))

    def test_cancel(self, world):
        sim = world()
        finish(sim, 'move_to(cube)')
        execution = sim.send(ref('pick(cube)'))
        assert sim.state.arm is ArmState.MANIPULATING
        sim.cancel(execution)
        assert execution.state is ExecState.CANCELLED
        assert sim.monitor(execution) is Status.FAILURE
        assert sim.state.arm is ArmState.MONITORING
        sim.cancel(execution)
        assert execution.state is ExecState.CANCELLED

    def test_unknown_references(self, world):
        sim = world()
        with pytest.raises(UnknownSkill):
            sim.send(ref('fly()'))
        with pytest.raises(ArityMismatch):
            sim.send(ref('move_to()'))
        with pytest.raises(UnknownCondition):
            sim.evaluate(ref('raining()'))
        with pytest.raises(ArityMismatch):
            sim.evaluate(ref('in_hand(cube, cube)'))
        with pytest.raises(SimulationError):
            sim.evaluate(ref('object_at(ball, delivery)'))

    def test_search_locates_objects(self, world):
        sim = world(ScenarioScript(known=()))
        assert not sim.evaluate(ref('objects_known()'))
        assert not sim.evaluate(ref('robot_at(cube)'))
        blocked = sim.send(ref('move_to(cube)'))
        assert blocked.status is Status.FAILURE
        assert 'not known' in blocked.reason
        finish(sim, 'search()')
        assert sim.evaluate(ref('objects_known()'))
        assert sim.state.robot_pose == (0.0, 0.0, 0.0)

    def test_move_object_event(self, world):
        script = ScenarioScript('moved', events=[
            ScenarioEvent(3, 'move_object', ('cube', 'fetch_table_2'))])
        sim = world(script)
        for _ in range(2):
            sim.advance()
        assert sim.state.resting['cube'] == 'fetch_table_1'
        assert sim.pending_events()
        sim.advance()
        assert sim.state.resting['cube'] == 'fetch_table_2'
        assert not sim.pending_events()

    def test_move_object_out_of_gripper(self, world):
        sim = world()
        finish(sim, 'move_to(cube)')
        finish(sim, 'pick(cube)')
        sim.apply_event(ScenarioEvent(sim.clock, 'move_object',
                                      ('cube', 'fetch_table_2')))
        assert sim.state.held_object is None
        sim.check_invariants()
        lost = finish(sim, 'place(cube, delivery)')
        assert lost.status is Status.FAILURE

    def test_battery_events(self, world):
        sim = world()
        sim.apply_event(ScenarioEvent(0, 'set_battery', (150,)))
        assert sim.state.battery == 100.0
        sim.apply_event(ScenarioEvent(0, 'drain_rate', (2.0,)))
        sim.advance()
        assert sim.state.battery == 98.0

    def test_invariant_violation(self, world):
        sim = world()
        sim.state.held_object = 'cube'
        with pytest.raises(SimulationError):
            sim.check_invariants()

    def test_digest_is_deterministic(self, world):
        a, b = world(), world()
        assert a.digest() == b.digest()
        finish(a, 'move_to(delivery)')
        finish(b, 'move_to(delivery)')
        assert a.digest() == b.digest()
        a.advance()
        assert a.digest() != b.digest()

# =========================================================================

class TestConditions:

    def test_declared_tolerance_wins(self, library):
        assert condition_tolerance('object_at', library) == (0.1, 0.1, 0.3)
        assert condition_tolerance('battery_ok', library) == (20.0,)
        assert condition_tolerance('battery_ok', library, 35) == (35.0,)

    def test_settings_fallback(self):
        sim_settings.set('TOLERANCE_YAW', 0.5)
        assert condition_tolerance('robot_at') == (0.1, 0.1, 0.5)
        assert condition_tolerance('battery_ok') == (20.0,)

    def test_evaluate_without_simulation(self, world, library):
        state = world().state.copy()
        state.robot_pose = (2.05, -0.05, 0.1)
        assert evaluate_condition(ref('robot_at(fetch_table_1)'), state,
                                  library)
        state.robot_pose = (2.05, -0.05, 0.3)
        assert not evaluate_condition(ref('robot_at(fetch_table_1)'), state,
                                      library)
