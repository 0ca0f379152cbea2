import json

import pytest

from policybench.AppSettings import exec_settings
from policybench.editing import edit
from policybench.runner import (OUTCOME_FAILURE, OUTCOME_SUCCESS,
                                OUTCOME_TIMEOUT, REPRESENTATIONS, RunConfig,
                                build_policy, representation_of, run,
                                run_many, select_policy, write_trace)
from policybench.utils import get_fixture_dir

FETCH_SKILLS = ['move_to(cube)', 'pick(cube)', 'move_to(delivery)',
                'place(cube, delivery)']

# =========================================================================

class TestRunConfig:

    def test_defaults(self, fetch_doc):
        config = RunConfig(fetch_doc)
        assert config.representation == 'bt'
        assert config.budget == exec_settings.get('STEP_BUDGET')

    def test_budget_from_settings(self, fetch_doc):
        exec_settings.set('STEP_BUDGET', 42)
        assert RunConfig(fetch_doc).budget == 42

    @pytest.mark.parametrize('kwargs', [
        {'representation': 'petri'},
        {'budget': 0},
        {'threshold': 101.0},
        {'drain': -1.0},
    ])
    def test_rejected(self, fetch_doc, kwargs):
        with pytest.raises(ValueError):
            RunConfig(fetch_doc, **kwargs)

    def test_loads_path(self):
        config = RunConfig(get_fixture_dir() / 'fetch_task.pol')
        assert config.load_document().goals.achieve

# =========================================================================

class TestPolicySelection:

    @pytest.mark.parametrize('representation', REPRESENTATIONS)
    def test_representation_of(self, fetch_doc, representation):
        policy = build_policy(fetch_doc, representation)
        assert representation_of(policy) == representation

    def test_unknown_representation(self, fetch_doc):
        with pytest.raises(ValueError):
            build_policy(fetch_doc, 'petri')

    def test_document_policy_is_preferred(self, fetch_doc, library):
        fetch_doc.policy = edit(build_policy(fetch_doc, 'bt'),
                                'add-recharge', library).policy
        assert select_policy(fetch_doc, 'bt') is fetch_doc.policy
        assert select_policy(fetch_doc, 'fsm') is not fetch_doc.policy

# =========================================================================

class TestRun:

    @pytest.mark.parametrize('representation', REPRESENTATIONS)
    def test_nominal(self, fetch_doc, representation):
        result = run(RunConfig(fetch_doc, representation, 'exp1_nominal'))
        assert result.outcome == OUTCOME_SUCCESS
        assert result.succeeded
        assert result.skill_trace == FETCH_SKILLS
        assert result.representation == representation
        assert result.scenario == 'exp1_nominal'

    @pytest.mark.parametrize('representation, outcome, picks', [
        ('bt', OUTCOME_SUCCESS, 2),
        ('fsm', OUTCOME_SUCCESS, 2),
        ('fsm-seq', OUTCOME_FAILURE, 1),
    ])
    def test_pick_failure(self, fetch_doc, representation, outcome, picks):
        result = run(RunConfig(fetch_doc, representation,
                               'exp1_pick_failure'))
        assert result.outcome == outcome
        assert len(result.sends('pick')) == picks

    def test_runs_are_deterministic(self, fetch_doc):
        first = run(RunConfig(fetch_doc, 'fsm', 'exp1_pick_failure'))
        second = run(RunConfig(fetch_doc, 'fsm', 'exp1_pick_failure'))
        assert first.final_digest == second.final_digest
        assert first.steps == second.steps
        assert [r.to_record() for r in first.trace] == \
            [r.to_record() for r in second.trace]

    def test_timeout(self, fetch_doc):
        result = run(RunConfig(fetch_doc, 'bt', 'exp1_nominal', budget=3))
        assert result.outcome == OUTCOME_TIMEOUT
        assert result.steps == 3

    def test_given_policy_is_not_modified(self, fetch_doc, library):
        policy = edit(build_policy(fetch_doc, 'bt'), 'add-recharge',
                      library).policy
        before = policy.signature()
        result = run(RunConfig(fetch_doc, 'bt', 'exp2_recharge',
                               policy=policy))
        assert result.succeeded
        assert policy.signature() == before

    @pytest.mark.parametrize('representation', ('bt', 'fsm'))
    def test_recharge_below_threshold(self, fetch_doc, library,
                                      representation):
        policy = edit(build_policy(fetch_doc, representation),
                      'add-recharge', library).policy
        result = run(RunConfig(fetch_doc, representation, 'exp2_recharge',
                               policy=policy))
        assert result.succeeded
        (_, _, battery), = result.sends('recharge')
        assert 19.5 <= battery < 20.0

    def test_threshold_override(self, fetch_doc, library):
        policy = edit(build_policy(fetch_doc, 'fsm'), 'add-recharge',
                      library).policy
        result = run(RunConfig(fetch_doc, 'fsm', 'exp2_recharge',
                               threshold=0.0, policy=policy))
        assert result.succeeded
        assert not result.sends('recharge')

    def test_record(self, fetch_doc):
        record = run(RunConfig(fetch_doc, 'fsm')).to_record()
        assert set(record) == {'representation', 'scenario', 'outcome',
                               'steps', 'skill_trace', 'final_digest'}
        assert record['scenario'] == 'exp1_nominal'

# =========================================================================

class TestRunMany:

    def test_keeps_order(self, fetch_doc):
        configs = [RunConfig(fetch_doc, rep, 'exp1_pick_failure')
                   for rep in REPRESENTATIONS]
        serial = run_many(configs)
        parallel = run_many(configs, jobs=3)
        assert [r.representation for r in parallel] == list(REPRESENTATIONS)
        assert [r.final_digest for r in parallel] == \
            [r.final_digest for r in serial]


def test_write_trace(fetch_doc, tmp_path):
    result = run(RunConfig(fetch_doc, 'fsm'))
    path = tmp_path / 'traces' / 'fsm.jsonl'
    write_trace(result, path)
    lines = path.read_text(encoding='utf-8').splitlines()
    assert len(lines) == len(result.trace)
    first = json.loads(lines[0])
    assert set(first) == {'step', 'element', 'event', 'status', 'battery',
                          'digest'}
    assert json.loads(lines[-1])['step'] == result.steps
