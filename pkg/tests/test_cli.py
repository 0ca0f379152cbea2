import json

import pytest

from policybench.AppMain import EXIT_ERROR, EXIT_MISMATCH, EXIT_OK, main
from policybench.utils import get_fixture_dir


def record(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.fixture
def fetch_path():
    return get_fixture_dir() / 'fetch_task.pol'


def test_build(tmp_path, capsys):
    assert main(['build', '--repr', 'fsm', '--out', str(tmp_path)]) == \
        EXIT_OK
    out = capsys.readouterr().out
    assert 'fsm: 6 nodes, 18 edges, 1 sinks, cc 14' in out
    assert (tmp_path / 'fsm.pol').is_file()
    assert (tmp_path / 'fsm.dot').read_text().startswith('digraph')


def test_build_record(capsys):
    assert main(['build', '--format', 'record']) == EXIT_OK
    result = record(capsys)
    assert (result['nodes'], result['edges']) == (14, 13)
    assert result['policy'].startswith('bt')


def test_run(tmp_path, capsys):
    assert main(['run', '--repr', 'fsm', '--scenario', 'exp1_nominal',
                 '--scenario', 'exp1_pick_failure', '--out', str(tmp_path),
                 '--format', 'record', '--jobs', '2']) == EXIT_OK
    runs = record(capsys)['runs']
    assert [r['scenario'] for r in runs] == ['exp1_nominal',
                                             'exp1_pick_failure']
    assert all(r['outcome'] == 'success' for r in runs)
    assert (tmp_path / 'fsm_exp1_pick_failure.jsonl').is_file()


def test_run_budget(capsys):
    assert main(['run', '--budget', '3']) == EXIT_OK
    assert 'timeout after 3 steps' in capsys.readouterr().out


def test_edit(capsys):
    assert main(['edit', '--repr', 'bt', '--script', 'add-recharge',
                 '--format', 'record']) == EXIT_OK
    result = record(capsys)
    assert result['receipt']['elementary_ops'] == 8
    assert (result['before']['nodes'], result['after']['nodes']) == (14, 18)


def test_edit_script_file(tmp_path, capsys):
    script = tmp_path / 'recharge.edit'
    script.write_text('# fault tolerant recharge\nadd-recharge\nadd-dock\n')
    assert main(['edit', '--repr', 'fsm', '--script', str(script),
                 '--out', str(tmp_path)]) == EXIT_OK
    assert '8 nodes, 30 edges' in capsys.readouterr().out
    assert (tmp_path / 'fsm_edited.pol').is_file()


def test_metrics(tmp_path, capsys):
    main(['build', '--out', str(tmp_path)])
    main(['edit', '--script', 'add-recharge', '--out', str(tmp_path)])
    capsys.readouterr()
    assert main(['metrics', str(tmp_path / 'bt.dot'),
                 str(tmp_path / 'bt_edited.dot')]) == EXIT_OK
    assert 'ged 8 (exact)' in capsys.readouterr().out


def test_metrics_from_document(fetch_path, capsys):
    assert main(['metrics', '--repr', 'fsm', '--format', 'record',
                 str(fetch_path)]) == EXIT_OK
    (summary,) = record(capsys)['graphs']
    assert (summary['nodes'], summary['cc']) == (6, 14)


def test_reproduce(tmp_path, capsys):
    assert main(['reproduce', 'exp1', '--out', str(tmp_path)]) == EXIT_OK
    assert 'passed' in capsys.readouterr().out
    report = json.loads((tmp_path / 'exp1.json').read_text())
    assert report['passed']


def test_reproduce_mismatch(tmp_path, fetch_path):
    text = fetch_path.read_text().replace('inject_failure(pick, 1)',
                                          'inject_failure(pick, 2)')
    doc = tmp_path / 'twice.pol'
    doc.write_text(text)
    assert main(['reproduce', 'exp1', '--doc', str(doc)]) == EXIT_MISMATCH


@pytest.mark.parametrize('argv', [
    ['build', '--doc', 'missing.pol'],
    ['edit', '--script', 'fly away'],
    ['run', '--scenario', 'nowhere'],
    ['metrics', 'missing.dot'],
])
def test_errors(argv):
    assert main(argv) == EXIT_ERROR


def test_bad_document(tmp_path):
    doc = tmp_path / 'broken.pol'
    doc.write_text('goal object_at(cube, delivery\n')
    assert main(['build', '--doc', str(doc)]) == EXIT_ERROR


def test_usage_errors():
    with pytest.raises(SystemExit) as info:
        main(['run', '--jobs', '0'])
    assert info.value.code == 2
    with pytest.raises(SystemExit):
        main([])


def test_config_shows_file_and_changed_values(tmp_path, capsys):
    ini = tmp_path / 'lab.ini'
    ini.write_text('[execution]\nSTEP_BUDGET = 80\n', encoding='utf-8')
    assert main(['--config', str(ini), 'config']) == EXIT_OK
    out = capsys.readouterr().out
    assert out.splitlines()[0] == f"# {ini}"
    assert 'STEP_BUDGET = 80  # default: 500' in out
    assert 'IDLE_WAIT_LIMIT = 25\n' in out


def test_config_save(tmp_path, capsys):
    ini = tmp_path / 'saved' / 'settings.ini'
    assert main(['--config', str(ini), 'config', '--save',
                 '--format', 'record']) == EXIT_OK
    result = record(capsys)
    assert result['path'] == str(ini)
    assert result['metrics']['BRUTEFORCE_MAX_NODES'] == \
        {'value': 6, 'default': 6}
    assert '[harness]' in ini.read_text(encoding='utf-8')
