import hashlib
import json
import math
import os
from pathlib import Path
from typing import Optional, Tuple

import numpy as np

from .AppSettings import harness_settings

#: environment variable overriding the fixture directory
FIXTURE_ENV = 'POLICYBENCH_FIXTURES'

# =========================================================================

class ParseError(ValueError):
    """
    Structured parse failure with a 1-based source position.

    :param line: Line number (1-based)
    :param column: Column number (1-based)
    :param expected: Description of what the parser expected
    :param found: Offending source text
    """

    def __init__(self, line: int, column: int, expected: str, found: str):
        self.line = line
        self.column = column
        self.expected = expected
        self.found = found
        super().__init__(self.describe())

    def describe(self) -> str:
        return (f"line {self.line}, column {self.column}: "
                f"expected {self.expected}, found {self.found!r}")

# =========================================================================

def wrap_angle(rot: float) -> float:
    """
    Wrap an angle into the interval [-pi, pi).

    :param rot: angle in radians
    :type: float
    :return: equivalent angle in radians
    :rtype: float
    """
    return (rot + math.pi) % (2 * math.pi) - math.pi

# -------------------------------------------------------------------------

def angle_diff(a: float, b: float) -> float:
    """
    Signed shortest difference ``a - b`` between two angles.

    :param a: angle in radians
    :param b: angle in radians
    :rtype: float
    """
    return wrap_angle(a - b)

# -------------------------------------------------------------------------

def interpolate_pose(start: Tuple[float, float, float],
                     target: Tuple[float, float, float],
                     fraction: float) -> Tuple[float, float, float]:
    """
    Constant-velocity interpolation between two planar poses.

    Position is interpolated linearly, yaw along the shortest arc.
    ``fraction`` is clipped to [0, 1]; at 1 the target is returned exactly.

    :param start: (x, y, yaw) start pose
    :param target: (x, y, yaw) target pose
    :param fraction: progress between 0 and 1
    :return: (x, y, yaw)
    """
    fraction = float(np.clip(fraction, 0.0, 1.0))
    if fraction >= 1.0:
        return tuple(float(v) for v in target)
    p0 = np.asarray(start[:2], dtype=float)
    p1 = np.asarray(target[:2], dtype=float)
    x, y = p0 + (p1 - p0) * fraction
    yaw = wrap_angle(start[2] + angle_diff(target[2], start[2]) * fraction)
    return float(x), float(y), float(yaw)

# -------------------------------------------------------------------------

def digest(data, length: int = 16) -> str:
    """
    Stable short hash of JSON-serializable data.

    Floats are rounded to 6 decimals so that equal states hash equally.

    :param data: JSON-serializable structure
    :param length: number of hex digits returned
    """
    def _round(value):
        if isinstance(value, float):
            return round(value, 6) + 0.0
        if isinstance(value, dict):
            return {str(k): _round(v) for k, v in value.items()}
        if isinstance(value, (list, tuple)):
            return [_round(v) for v in value]
        if isinstance(value, (set, frozenset)):
            return sorted(_round(v) for v in value)
        return value
    text = json.dumps(_round(data), sort_keys=True, separators=(',', ':'))
    return hashlib.sha256(text.encode('utf-8')).hexdigest()[:length]

# -------------------------------------------------------------------------

def get_fixture_dir(override: Optional[str] = None) -> Path:
    """
    Directory holding the shipped ``.pol`` documents.

    Lookup order: explicit override, the ``POLICYBENCH_FIXTURES``
    environment variable, the ``FIXTURE_DIR`` setting, the packaged
    ``fixtures`` directory.
    """
    if override:
        return Path(override)
    env = os.environ.get(FIXTURE_ENV)
    if env:
        return Path(env)
    configured = harness_settings.get('FIXTURE_DIR')
    if configured:
        return Path(configured)
    return Path(__file__).parent / 'fixtures'
