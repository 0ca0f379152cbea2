import pytest

from policybench import AppSettings
from policybench.AppSettings import (exec_settings, harness_settings,
                                     load_settings, save_settings,
                                     settings_manager, sim_settings)


def test_defaults():
    assert sim_settings.get('BATTERY_THRESHOLD') == 20.0
    assert exec_settings.get('STEP_BUDGET') == 500
    assert sim_settings.get_description('CARRY_HEIGHT').startswith('Height')


def test_set_casts_to_default_type():
    exec_settings.set('STEP_BUDGET', '42')
    assert exec_settings.get('STEP_BUDGET') == 42
    sim_settings.set('BATTERY_DRAIN', 1)
    assert isinstance(sim_settings.get('BATTERY_DRAIN'), float)


def test_set_rejects_bad_values():
    with pytest.raises(TypeError):
        exec_settings.set('STEP_BUDGET', 'many')
    with pytest.raises(KeyError):
        exec_settings.set('NO_SUCH_SETTING', 1)
    with pytest.raises(KeyError):
        exec_settings.get('NO_SUCH_SETTING')


def test_reset():
    exec_settings.set('STEP_BUDGET', 7)
    exec_settings.reset_param_to_default('STEP_BUDGET')
    assert exec_settings.get('STEP_BUDGET') == 500


def test_config_file_location():
    assert AppSettings.get_config_file().name == 'settings.ini'
    assert AppSettings.get_config_dir().name == 'policybench'


def test_save_and_load(tmp_path):
    path = tmp_path / 'settings.ini'
    exec_settings.set('STEP_BUDGET', 250)
    harness_settings.set('FIXTURE_DIR', '/srv/fixtures')
    assert save_settings(path)
    settings_manager.reset_to_defaults()
    assert exec_settings.get('STEP_BUDGET') == 500
    assert load_settings(path)
    assert exec_settings.get('STEP_BUDGET') == 250
    assert harness_settings.get('FIXTURE_DIR') == '/srv/fixtures'


def test_load_keeps_defaults_on_bad_values(tmp_path):
    path = tmp_path / 'settings.ini'
    path.write_text('[execution]\n'
                    'step_budget = lots\n'
                    'unknown = 3\n'
                    '[simulation]\n'
                    'BATTERY_DRAIN = 1.5\n', encoding='utf-8')
    assert load_settings(path)
    assert exec_settings.get('STEP_BUDGET') == 500
    assert sim_settings.get('BATTERY_DRAIN') == 1.5


def test_missing_file(tmp_path):
    assert not load_settings(tmp_path / 'absent.ini')
    assert not load_settings()


def test_defaults_survive_changes():
    sim_settings.set('BATTERY_THRESHOLD', 35)
    assert sim_settings.get_default('BATTERY_THRESHOLD') == 20.0
    assert not sim_settings.is_default('BATTERY_THRESHOLD')
    with pytest.raises(KeyError):
        sim_settings.get_default('NO_SUCH_SETTING')


def test_settings_file_path_follows_last_file(tmp_path):
    assert AppSettings.get_settings_file_path() == \
        str(AppSettings.get_config_file())
    path = tmp_path / 'lab.ini'
    save_settings(path)
    assert AppSettings.get_settings_file_path() == str(path)
    exec_settings.set('STEP_BUDGET', 99)
    assert save_settings()
    assert 'STEP_BUDGET = 99' in path.read_text(encoding='utf-8')


def test_settings_report():
    exec_settings.set('IDLE_WAIT_LIMIT', 3)
    text = AppSettings.settings_report()
    assert text.startswith(f"# {AppSettings.get_settings_file_path()}")
    assert '[metrics]' in text
    assert 'IDLE_WAIT_LIMIT = 3  # default: 25' in text
    assert '# Maximum number of simulation steps per run\n' \
        'STEP_BUDGET = 500\n' in text
