from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from policybench import AppSettings
from policybench.policydsl import load_fixture
from policybench.skills import Status
from policybench.utils import FIXTURE_ENV

INVALID_DIR = Path(__file__).parent / 'fixtures' / 'invalid'

# settings isolation is per test, not per generated example
settings.register_profile(
    'policybench', deadline=None,
    suppress_health_check=[HealthCheck.function_scoped_fixture,
                           HealthCheck.too_slow])
settings.load_profile('policybench')


@pytest.fixture(autouse=True)
def isolated_settings(tmp_path, monkeypatch):
    """Keep the user's settings file and fixture override out of tests."""
    monkeypatch.setenv('XDG_CONFIG_HOME', str(tmp_path / 'config'))
    monkeypatch.setenv('APPDATA', str(tmp_path / 'config'))
    monkeypatch.setenv('HOME', str(tmp_path / 'home'))
    monkeypatch.delenv(FIXTURE_ENV, raising=False)
    yield
    AppSettings.settings_manager.reset_to_defaults()
    AppSettings.settings_manager.forget_path()


@pytest.fixture
def fetch_doc():
    return load_fixture('fetch_task.pol')


@pytest.fixture
def scale_doc():
    return load_fixture('scale_task.pol')


@pytest.fixture
def library(fetch_doc):
    return fetch_doc.library()

# -------------------------------------------------------------------------

class StubExecution:

    def __init__(self, ref):
        self.ref = ref
        self.cancelled = False


class StubWorld:
    """
    World with fixed condition values and fixed action results.

    Unlisted conditions are false, unlisted actions keep running.
    """

    def __init__(self, conditions=None, actions=None):
        self.conditions = dict(conditions or {})
        self.actions = dict(actions or {})
        self.sent = []
        self.cancelled = []

    def knows_skill(self, name):
        return True

    def knows_condition(self, name):
        return True

    def evaluate(self, ref):
        return self.conditions.get(ref.name, False)

    def send(self, ref):
        execution = StubExecution(ref)
        self.sent.append(ref)
        return execution

    def monitor(self, execution):
        return self.actions.get(execution.ref.name, Status.RUNNING)

    def cancel(self, execution):
        execution.cancelled = True
        self.cancelled.append(execution.ref)
