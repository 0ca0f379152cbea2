from ._metadata import __title__, __description__, __url__, __version__
from ._metadata import __author__, __author_email__
from ._metadata import __license__, __copyright__

from .BehaviorTree import NodeKind, PolicyTree
from .StateMachine import StateMachine
from .policydsl import Document, load, load_fixture, parse, serialize
from .runner import RunConfig, RunResult, run
