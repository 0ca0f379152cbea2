"""
Application Settings
====================

Typed, persistent settings of the simulator, the policy runner, the graph
metrics and the harness.

Every group is a section of one INI file in the user's config directory:

- Linux: ~/.config/policybench/settings.ini
- Windows: %APPDATA%/policybench/settings.ini
- macOS: ~/Library/Application Support/policybench/settings.ini

``policybench --config FILE`` reads another file instead, and
``policybench config`` lists the values in effect.
"""

import ast
import configparser
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Dict, Iterator, Optional, Tuple, Union

logger = logging.getLogger(__name__)

TRUE_WORDS = ('true', 'yes', '1', 'on')


# =============================================================================
# Configuration File Handling
# =============================================================================

def get_config_dir() -> Path:
    """Platform-specific directory holding ``settings.ini``."""
    if sys.platform == 'win32':
        base = Path(os.environ.get('APPDATA', Path.home()))
    elif sys.platform == 'darwin':
        base = Path.home() / 'Library' / 'Application Support'
    else:
        base = Path(os.environ.get('XDG_CONFIG_HOME',
                                   Path.home() / '.config'))
    return base / 'policybench'


def get_config_file() -> Path:
    return get_config_dir() / 'settings.ini'


# =============================================================================
# Settings Classes
# =============================================================================

@dataclass
class Definition:
    """Default value of a setting and its one-line description."""
    value: Any
    description: str


class Definitions(dict):
    """Mapping of setting names to their :class:`Definition`."""
    def __init__(self, values: Optional[Dict[str, Definition]] = None):
        super().__init__()
        if values:
            self.update(values)


class Settings:
    """
    One settings group, written as one INI section.

    The type of each default is the type of the setting: assigned values
    are cast to it, and a value that cannot be cast raises
    :class:`TypeError`. Unknown names raise :class:`KeyError`.

    :param defaults: Names, default values and descriptions
    :param section: INI section name
    """

    def __init__(self, defaults: Definitions, section: str = 'general'):
        self._defaults = defaults
        self._section = section
        self._values: Dict[str, Any] = {
            key: d.value for key, d in defaults.items()}

    @property
    def section(self) -> str:
        return self._section

    def _definition(self, key: str) -> Definition:
        try:
            return self._defaults[key]
        except KeyError:
            raise KeyError(f"Parameter '{key}' not defined") from None

    def get(self, key: str) -> Any:
        self._definition(key)
        return self._values[key]

    def get_default(self, key: str) -> Any:
        return self._definition(key).value

    def get_description(self, key: str) -> str:
        return self._definition(key).description

    def is_default(self, key: str) -> bool:
        return self.get(key) == self.get_default(key)

    def set(self, key: str, value: Any):
        """Assign ``value``, cast to the type of the default."""
        kind = type(self._definition(key).value)
        if not isinstance(value, kind):
            try:
                value = kind(value)
            except (ValueError, TypeError):
                raise TypeError(f"Parameter '{key}' must be of type "
                                f"{kind.__name__}") from None
        self._values[key] = value

    def get_all_keys(self):
        return list(self._defaults)

    def reset_param_to_default(self, key: str):
        self._values[key] = self.get_default(key)

    def reset_to_defaults(self):
        for key in self._defaults:
            self.reset_param_to_default(key)

    def items(self) -> Iterator[Tuple[str, Any, Any, str]]:
        """``(name, value, default, description)`` for every setting."""
        for key, definition in self._defaults.items():
            yield (key, self._values[key], definition.value,
                   definition.description)

    def _parse(self, key: str, text: str) -> Any:
        default = self.get_default(key)
        if isinstance(default, bool):
            return text.lower() in TRUE_WORDS
        if isinstance(default, str):
            return text
        return type(default)(ast.literal_eval(text))

    def from_dict(self, dictionary: Dict) -> bool:
        """
        Take values from an INI section.

        Names match without regard to case. Unknown names are skipped and
        unreadable values keep the current value; both are logged.
        """
        names = {k.lower(): k for k in self._defaults}
        for name, raw in dictionary.items():
            key = names.get(name.lower())
            if key is None:
                logger.debug('ignoring unknown setting %s.%s',
                             self._section, name)
                continue
            try:
                value = self._parse(key, raw) if isinstance(raw, str) \
                    else raw
                self.set(key, value)
            except (ValueError, TypeError, SyntaxError):
                logger.warning('invalid value %r for setting %s.%s, '
                               'keeping %r', raw, self._section, key,
                               self.get(key))
        return True

    def to_dict(self) -> Dict[str, str]:
        return {key: str(value) for key, value in self._values.items()}


# =============================================================================
# Persistent Settings Manager
# =============================================================================

class SettingsManager:
    """
    Registry of the settings groups and their INI file.

    The file is the user's ``settings.ini`` until :meth:`load_from_file`
    or :meth:`save_to_file` is given another path; later calls without a
    path reuse it.
    """

    def __init__(self):
        self._settings_groups: Dict[str, Settings] = {}
        self._path: Optional[Path] = None

    def register(self, name: str, settings: Settings):
        self._settings_groups[name] = settings

    def groups(self) -> Dict[str, Settings]:
        return dict(self._settings_groups)

    def get_config_file_path(self) -> str:
        """Path of the INI file in use, as a string."""
        return str(self._path or get_config_file())

    def _use(self, path: Optional[Union[str, Path]]) -> Path:
        if path:
            self._path = Path(path)
        return Path(self.get_config_file_path())

    def load_from_file(self, path: Optional[Union[str, Path]] = None) -> bool:
        """
        Read all groups from the INI file.

        :param path: Alternative INI file, the user config file by default
        :return: ``False`` if the file is missing or unreadable
        """
        explicit = bool(path)
        config_file = self._use(path)
        if not config_file.exists():
            if explicit:
                logger.warning('settings file not found: %s', config_file)
            return False
        config = configparser.ConfigParser()
        config.optionxform = str
        try:
            config.read(config_file, encoding='utf-8')
        except (configparser.Error, OSError) as e:
            logger.warning('could not load settings: %s', e)
            return False
        for name, group in self._settings_groups.items():
            if config.has_section(name):
                group.from_dict(dict(config.items(name)))
        logger.info('loaded settings from %s', config_file)
        return True

    def save_to_file(self, path: Optional[Union[str, Path]] = None) -> bool:
        """Write all groups to the INI file; ``False`` if that fails."""
        config_file = self._use(path)
        config = configparser.ConfigParser()
        config.optionxform = str
        for name, group in self._settings_groups.items():
            config[name] = group.to_dict()
        try:
            config_file.parent.mkdir(parents=True, exist_ok=True)
            with open(config_file, 'w', encoding='utf-8') as f:
                f.write("# policybench settings\n")
                f.write("# This file is auto-generated. Edit with care.\n\n")
                config.write(f)
        except OSError as e:
            logger.warning('could not save settings: %s', e)
            return False
        logger.info('saved settings to %s', config_file)
        return True

    def reset_to_defaults(self):
        for group in self._settings_groups.values():
            group.reset_to_defaults()

    def forget_path(self):
        """Go back to the user's ``settings.ini``."""
        self._path = None


# =============================================================================
# Setting Definitions
# =============================================================================

SIMULATION_DEFINITIONS = Definitions({
    'BATTERY_START': Definition(
        100.0, 'Battery level at the start of a scenario (percent)'
    ),
    'BATTERY_DRAIN': Definition(
        0.5, 'Battery drain per simulation step (percent)'
    ),
    'BATTERY_THRESHOLD': Definition(
        20.0, 'Battery level below which battery_ok() fails (percent)'
    ),
    'TOLERANCE_XY': Definition(
        0.1, 'Default position tolerance in x and y (meters)'
    ),
    'TOLERANCE_Z': Definition(
        0.1, 'Default position tolerance in z (meters)'
    ),
    'TOLERANCE_YAW': Definition(
        0.2, 'Default heading tolerance (radians)'
    ),
    'CARRY_HEIGHT': Definition(
        1.0, 'Height of a held object above the floor (meters)'
    ),
    'RECHARGE_STATION': Definition(
        'recharge_station', 'Station the recharge skill navigates to'
    ),
})

EXECUTION_DEFINITIONS = Definitions({
    'STEP_BUDGET': Definition(
        500, 'Maximum number of simulation steps per run'
    ),
    'IDLE_WAIT_LIMIT': Definition(
        25, 'Steps the IDLE state waits for a dispatch guard to hold'
    ),
})

METRICS_DEFINITIONS = Definitions({
    'GED_EXPANSION_BUDGET': Definition(
        200000, 'Search node expansions before GED falls back to a bound'
    ),
    'BRUTEFORCE_MAX_NODES': Definition(
        6, 'Largest graph accepted by the brute-force GED oracle'
    ),
})

HARNESS_DEFINITIONS = Definitions({
    'FIXTURE_DIR': Definition(
        '', 'Directory with the .pol fixtures (empty: packaged fixtures)'
    ),
    'REPORT_SCHEMA': Definition(
        '1', 'Version tag written into structured reports'
    ),
})


# =============================================================================
# Global Instances
# =============================================================================

sim_settings = Settings(SIMULATION_DEFINITIONS, section='simulation')
exec_settings = Settings(EXECUTION_DEFINITIONS, section='execution')
metrics_settings = Settings(METRICS_DEFINITIONS, section='metrics')
harness_settings = Settings(HARNESS_DEFINITIONS, section='harness')

settings_manager = SettingsManager()
for _group in (sim_settings, exec_settings, metrics_settings,
               harness_settings):
    settings_manager.register(_group.section, _group)


def load_settings(path: Optional[Union[str, Path]] = None) -> bool:
    return settings_manager.load_from_file(path)


def save_settings(path: Optional[Union[str, Path]] = None) -> bool:
    return settings_manager.save_to_file(path)


def get_settings_file_path() -> str:
    """Path of the settings file the application reads and writes."""
    return settings_manager.get_config_file_path()


def settings_report() -> str:
    """
    Settings in effect as INI text.

    Changed values carry their default in a trailing comment.
    """
    lines = [f"# {get_settings_file_path()}"]
    for name, group in settings_manager.groups().items():
        lines.append(f"\n[{name}]")
        for key, value, default, description in group.items():
            lines.append(f"# {description}")
            note = '' if value == default else f"  # default: {default}"
            lines.append(f"{key} = {value}{note}")
    return '\n'.join(lines) + '\n'
