"""
Policy Documents
================

Reader and writer of ``.pol`` documents: skill and condition
declarations, goals, the scene (stations and objects), scenarios and an
optional serialized policy.

The format is line oriented; ``;`` separates statements like a line break
and ``#`` starts a comment. Positions in errors are 1-based.

.. code-block:: text

    condition robot_at(target) tol=0.1, 0.1, 0.2
    skill move_to(target: pose) post=[robot_at(target)] duration=5
    goal object_at(cube, delivery)
    station delivery pose=-2.0, 0.0, 3.14 z=0.75
    object cube on fetch_table_1
    scenario nominal {
        battery 24.0
        at 0: inject_failure(pick, 1)
    }
    bt fetch {
        (fallback
            object_at(cube, delivery)?
            place(cube, delivery)!)
    }

Parsing runs in two phases: the statements are read first, then every
reference is resolved against the complete document, so declarations may
appear in any order.
"""

import logging
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

from .BehaviorTree import NodeKind, PolicyTree
from .SimWorld import (ObjectPlacement, ScenarioEvent, ScenarioScript,
                       Station)
from .StateMachine import MachineError, State, StateMachine
from .skills import (PARAM_TYPES, CallRef, ConditionSpec, Goal, GoalSpec,
                     Guard, Literal, Param, SkillLibrary, SkillSpec)
from .utils import ParseError, get_fixture_dir

logger = logging.getLogger(__name__)

Policy = Union[PolicyTree, StateMachine]

#: deepest accepted nesting of behavior tree control nodes
MAX_DEPTH = 100

_TOKEN_RE = re.compile(r'''
    (?P<space>[ \t\r\f]+)
  | (?P<comment>\#[^\n]*)
  | (?P<newline>[\n;])
  | (?P<arrow>->)
  | (?P<number>-?\d+(?:\.\d*)?(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z_]\w*)
  | (?P<punct>[()\[\]{},:=?!])
''', re.VERBOSE)

# =========================================================================

class ResolutionError(ParseError):
    """A reference does not resolve to a declaration."""


class DuplicateName(ParseError):
    """A name is declared twice in the same namespace."""

# =========================================================================

@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    column: int

    def describe(self) -> str:
        if self.kind == 'eof':
            return 'end of input'
        if self.kind == 'newline':
            return 'end of line'
        return self.text


def tokenize(text: str) -> List[Token]:
    """
    Split document text into tokens, ending with an ``eof`` token.

    :raises ParseError: on a character that starts no token
    """
    tokens = []
    line, line_start, pos = 1, 0, 0
    while pos < len(text):
        match = _TOKEN_RE.match(text, pos)
        column = pos - line_start + 1
        if match is None:
            raise ParseError(line, column, 'a token', text[pos])
        kind = match.lastgroup
        value = match.group()
        if kind == 'newline':
            tokens.append(Token('newline', value, line, column))
            if value == '\n':
                line += 1
                line_start = match.end()
        elif kind == 'arrow':
            tokens.append(Token('punct', value, line, column))
        elif kind != 'space' and kind != 'comment':
            tokens.append(Token(kind, value, line, column))
        pos = match.end()
    tokens.append(Token('eof', '', line, pos - line_start + 1))
    return tokens

# =========================================================================

@dataclass
class Document:
    """
    Contents of one policy document.

    :param conditions: Condition declarations
    :param skills: Skill declarations
    :param goals: Ordered goal list
    :param stations: Named places of the scene
    :param objects: Initial object placements
    :param scenarios: Scenario scripts, the first is the default
    :param policy: Serialized behavior tree or state machine
    """
    conditions: List[ConditionSpec] = field(default_factory=list)
    skills: List[SkillSpec] = field(default_factory=list)
    goals: GoalSpec = field(default_factory=GoalSpec)
    stations: List[Station] = field(default_factory=list)
    objects: List[ObjectPlacement] = field(default_factory=list)
    scenarios: List[ScenarioScript] = field(default_factory=list)
    policy: Optional[Policy] = None

    @property
    def scenario(self) -> Optional[ScenarioScript]:
        return self.scenarios[0] if self.scenarios else None

    def get_scenario(self, name: Optional[str] = None) -> ScenarioScript:
        """
        Scenario by name; without a name the first one, or an empty
        scenario if the document has none.
        """
        if not name:
            return self.scenario or ScenarioScript()
        for scenario in self.scenarios:
            if scenario.name == name:
                return scenario
        raise KeyError(f"no scenario '{name}'")

    def library(self) -> SkillLibrary:
        return SkillLibrary(self.skills, self.conditions)

# =========================================================================

class Parser:
    """
    Recursive-descent reader over the token list of a document.

    The public methods :meth:`ref`, :meth:`literal` and :meth:`sexpr`
    are also used to read fragments, e.g. in edit scripts.
    """

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.pos = 0
        # deferred (namespace, reference, token) checks
        self.refs: List[Tuple[str, object, Token]] = []
        self._names: Dict[str, Token] = {}
        self._places: Dict[str, Token] = {}
        self._scenarios: Dict[str, Token] = {}
        # keyword of the declaration being read
        self.statement: Optional[Token] = None

    # ---------------------------------------------------------------------
    # token access

    @property
    def token(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, offset: int = 1) -> Token:
        return self.tokens[min(self.pos + offset, len(self.tokens) - 1)]

    def advance(self) -> Token:
        token = self.tokens[self.pos]
        if token.kind != 'eof':
            self.pos += 1
        return token

    def at(self, text: str) -> bool:
        return self.token.kind in ('name', 'punct') and \
            self.token.text == text

    def at_end_of_statement(self) -> bool:
        return self.token.kind in ('newline', 'eof') or self.at('}')

    def accept(self, text: str) -> Optional[Token]:
        return self.advance() if self.at(text) else None

    def error(self, expected: str, token: Optional[Token] = None,
              cls=ParseError) -> ParseError:
        token = token or self.token
        return cls(token.line, token.column, expected, token.describe())

    def expect(self, text: str, what: Optional[str] = None) -> Token:
        if not self.at(text):
            raise self.error(what or repr(text))
        return self.advance()

    def expect_name(self, what: str = 'a name') -> Token:
        if self.token.kind != 'name':
            raise self.error(what)
        return self.advance()

    def expect_number(self, what: str = 'a number') -> Tuple[float, Token]:
        if self.token.kind != 'number':
            raise self.error(what)
        token = self.advance()
        return float(token.text), token

    def expect_int(self, what: str = 'an integer') -> Tuple[int, Token]:
        if self.token.kind != 'number':
            raise self.error(what)
        try:
            value = int(self.token.text)
        except ValueError:
            raise self.error(what) from None
        return value, self.advance()

    def skip_newlines(self):
        while self.token.kind == 'newline':
            self.advance()

    def end_statement(self):
        if not self.at_end_of_statement():
            raise self.error('end of line')
        if self.token.kind == 'newline':
            self.advance()

    def comma_list(self, item: Callable, closing: Optional[str] = None
                   ) -> list:
        """Items separated by commas, up to ``closing`` or end of line."""
        items = []
        if (closing and self.at(closing)) or \
                (not closing and self.at_end_of_statement()):
            return items
        items.append(item())
        while self.accept(','):
            items.append(item())
        return items

    def declare(self, table: Dict[str, Token], token: Token):
        if token.text in table:
            first = table[token.text]
            raise DuplicateName(token.line, token.column,
                                f"a name not declared before (line "
                                f"{first.line})", token.text)
        table[token.text] = token

    # ---------------------------------------------------------------------
    # fragments

    def ref(self) -> Tuple[CallRef, Token]:
        """``name(arg, ...)``"""
        name = self.expect_name()
        self.expect('(')
        args = self.comma_list(lambda: self.expect_name('an argument name')
                               .text, ')')
        self.expect(')', "',' or ')'")
        return CallRef(name.text, tuple(args)), name

    def condition_ref(self) -> CallRef:
        ref, token = self.ref()
        self.refs.append(('condition', ref, token))
        return ref

    def literal(self) -> Literal:
        """``[not] name(arg, ...)``"""
        positive = True
        if self.at('not') and self.peek().kind == 'name':
            self.advance()
            positive = False
        return Literal(self.condition_ref(), positive)

    def param(self) -> Tuple[Param, Token]:
        name = self.expect_name('a parameter name')
        if not self.accept(':'):
            return Param(name.text), name
        kind = self.expect_name('a parameter type')
        if kind.text not in PARAM_TYPES:
            raise self.error(f"one of {', '.join(PARAM_TYPES)}", kind)
        return Param(name.text, kind.text), name

    def params(self) -> Tuple[Param, ...]:
        self.expect('(')
        params = self.comma_list(self.param, ')')
        self.expect(')', "',' or ')'")
        seen: Dict[str, Token] = {}
        for _, token in params:
            self.declare(seen, token)
        return tuple(p for p, _ in params)

    def sexpr(self, depth: int = 0) -> PolicyTree:
        """
        ``(sequence ...)``, ``(fallback ...)``, ``cond(args)?`` or
        ``skill(args)!``
        """
        self.skip_newlines()
        if depth > MAX_DEPTH:
            raise self.error(f"nesting depth of at most {MAX_DEPTH}")
        if self.accept('('):
            kind = self.expect_name("'sequence' or 'fallback'")
            if kind.text not in ('sequence', 'fallback'):
                raise self.error("'sequence' or 'fallback'", kind)
            children = []
            self.skip_newlines()
            while not self.at(')'):
                if self.token.kind == 'eof':
                    raise self.error("')'")
                children.append(self.sexpr(depth + 1))
                self.skip_newlines()
            if not children:
                raise self.error('a child node')
            self.advance()
            return PolicyTree.control(NodeKind(kind.text), children)
        if self.token.kind != 'name':
            raise self.error("'(' or a leaf")
        ref, token = self.ref()
        if self.accept('?'):
            self.refs.append(('condition', ref, token))
            return PolicyTree.condition(ref)
        self.expect('!', "'?' or '!'")
        self.refs.append(('skill', ref, token))
        return PolicyTree.action(ref)

    # ---------------------------------------------------------------------
    # statements

    def document(self) -> Document:
        doc = Document()
        statements = {
            'condition': self._condition,
            'skill': self._skill,
            'goal': self._goal,
            'station': self._station,
            'object': self._object,
            'scenario': self._scenario,
            'bt': self._bt,
            'fsm': self._fsm,
        }
        while True:
            self.skip_newlines()
            token = self.token
            if token.kind == 'eof':
                break
            handler = statements.get(token.text) \
                if token.kind == 'name' else None
            if handler is None:
                raise self.error('a declaration')
            self.statement = token
            handler(doc)
            self.end_statement()
        self.resolve(doc)
        return doc

    def _condition(self, doc: Document):
        self.advance()
        name = self.expect_name('a condition name')
        self.declare(self._names, name)
        params = self.params()
        tolerance = []
        if self.at('tol'):
            self.advance()
            self.expect('=')
            tolerance = self.comma_list(self.expect_number)
            if not tolerance:
                raise self.error('a number')
            for value, token in tolerance:
                if value <= 0:
                    raise self.error('a positive tolerance', token)
        doc.conditions.append(ConditionSpec(
            name.text, params, tuple(v for v, _ in tolerance)))

    def _skill(self, doc: Document):
        self.advance()
        name = self.expect_name('a skill name')
        self.declare(self._names, name)
        params = self.params()
        options: Dict[str, object] = {}
        seen: Dict[str, Token] = {}
        while not self.at_end_of_statement():
            key = self.expect_name("'pre', 'post', 'duration' or 'failure'")
            if key.text not in ('pre', 'post', 'duration', 'failure'):
                raise self.error("'pre', 'post', 'duration' or 'failure'",
                                 key)
            self.declare(seen, key)
            self.expect('=')
            if key.text in ('pre', 'post'):
                self.expect('[')
                options[key.text] = tuple(self.comma_list(self.condition_ref,
                                                          ']'))
                self.expect(']', "',' or ']'")
            elif key.text == 'duration':
                value, token = self.expect_int()
                if value < 1:
                    raise self.error('a duration of at least 1', token)
                options['duration'] = value
            else:
                options['failure'] = self.expect_name('a hook name').text
        doc.skills.append(SkillSpec(
            name.text, params,
            preconditions=options.get('pre', ()),
            postconditions=options.get('post', ()),
            duration=options.get('duration', 1),
            failure_model=options.get('failure', '')))

    def _goal(self, doc: Document):
        self.advance()
        maintain = False
        if self.at('maintain') and self.peek().kind == 'name':
            self.advance()
            maintain = True
        doc.goals.goals.append(Goal(self.condition_ref(), maintain))

    def _station(self, doc: Document):
        self.advance()
        name = self.expect_name('a station name')
        self.declare(self._places, name)
        self.expect('pose')
        self.expect('=')
        pose = self._numbers(3, 'x, y, yaw')
        z = 0.0
        if self.accept('z'):
            self.expect('=')
            z, _ = self.expect_number()
        doc.stations.append(Station(name.text, pose, z))

    def _numbers(self, count: int, what: str) -> Tuple[float, ...]:
        values = [self.expect_number(what)[0]]
        for _ in range(count - 1):
            self.expect(',', f"',' ({what})")
            values.append(self.expect_number(what)[0])
        return tuple(values)

    def _object(self, doc: Document):
        self.advance()
        name = self.expect_name('an object name')
        self.declare(self._places, name)
        self.expect('on')
        station = self.expect_name('a station name')
        self.refs.append(('station', station.text, station))
        doc.objects.append(ObjectPlacement(name.text, station.text))

    def _scenario(self, doc: Document):
        keyword = self.advance()
        name = self.advance().text if self.token.kind == 'name' else ''
        self.declare(self._scenarios, Token('name', name, keyword.line,
                                            keyword.column))
        self.expect('{')
        fields: Dict[str, object] = {}
        seen: Dict[str, Token] = {}
        events = []
        while True:
            self.skip_newlines()
            if self.accept('}'):
                break
            key = self.expect_name('a scenario statement')
            if key.text != 'at':
                self.declare(seen, key)
            if key.text == 'robot':
                fields['robot'] = self._numbers(3, 'x, y, yaw')
            elif key.text in ('battery', 'drain', 'failure_rate'):
                value, token = self.expect_number()
                upper = 1.0 if key.text == 'failure_rate' else 100.0
                if key.text != 'drain' and not 0.0 <= value <= upper:
                    raise self.error(f"a value within [0, {upper:g}]", token)
                if value < 0:
                    raise self.error('a non-negative value', token)
                fields[key.text] = value
            elif key.text == 'seed':
                fields['seed'] = self.expect_int()[0]
            elif key.text == 'known':
                names = self.comma_list(
                    lambda: self.expect_name('an object name'))
                for token in names:
                    self.refs.append(('object', token.text, token))
                fields['known'] = tuple(t.text for t in names)
            elif key.text == 'at':
                events.append(self._event())
            else:
                raise self.error('a scenario statement', key)
            self.end_statement()
        doc.scenarios.append(ScenarioScript(name=name, events=events,
                                            **fields))

    def _event(self) -> ScenarioEvent:
        step, _ = self.expect_int('a step number')
        if step < 0:
            raise self.error('a non-negative step', self.tokens[self.pos - 1])
        self.expect(':')
        kind = self.expect_name('an event name')
        self.expect('(')

        def arg():
            if self.token.kind not in ('name', 'number'):
                raise self.error('an event argument')
            return self.advance()

        args = self.comma_list(arg, ')')
        self.expect(')', "',' or ')'")
        try:
            event = ScenarioEvent(step, kind.text, tuple(a.text for a in args))
        except ValueError as e:
            raise self.error(f"a valid event ({e})", kind) from None
        if kind.text == 'move_object':
            self.refs.append(('object', args[0].text, args[0]))
            self.refs.append(('station', args[1].text, args[1]))
        elif kind.text == 'inject_failure':
            self.refs.append(('hook', args[0].text, args[0]))
        return event

    def _set_policy(self, doc: Document, policy: Policy, keyword: Token):
        if doc.policy is not None:
            raise self.error('a single policy block', keyword)
        doc.policy = policy

    def _bt(self, doc: Document):
        keyword = self.advance()
        name = self.advance().text if self.token.kind == 'name' else ''
        self.expect('{')
        tree = self.sexpr()
        self.skip_newlines()
        self.expect('}')
        tree.name = name
        self._set_policy(doc, tree, keyword)

    def _fsm(self, doc: Document):
        keyword = self.advance()
        name = self.advance().text if self.token.kind == 'name' else ''
        self.expect('{')
        sm = StateMachine(name)
        ids: Dict[str, Token] = {}
        guards: Dict[str, Token] = {}
        current: Optional[str] = None
        links: List[Tuple[str, Token, Token]] = []
        dispatch: List[Token] = []
        initial: Optional[Token] = None
        while True:
            self.skip_newlines()
            if self.accept('}'):
                break
            key = self.expect_name('a state machine statement')
            if key.text == 'state':
                sid = self.expect_name('a state id')
                self.declare(ids, sid)
                self.expect(':')
                ref, token = self.ref()
                self.refs.append(('skill', ref, token))
                sm.add_state(State(sid.text, ref))
                current = sid.text
            elif key.text == 'idle':
                sid = self.expect_name('a state id')
                if sm.idle is not None:
                    raise self.error('a single idle state', key)
                self.declare(ids, sid)
                sm.add_idle(sid.text)
                current = sid.text
            elif key.text == 'outcome':
                label = self.expect_name('a terminal outcome')
                self.declare(ids, label)
                sm.add_terminal(label.text)
            elif key.text == 'guard':
                label = self.expect_name('a guard label')
                self.declare(guards, label)
                self.expect('when')
                sm.guards[label.text] = Guard(tuple(
                    self.comma_list(self.literal)))
            elif key.text == 'dispatch':
                if current is None or current != sm.idle:
                    raise self.error("'dispatch' inside the idle state", key)
                labels = self.comma_list(
                    lambda: self.expect_name('an outcome label'))
                sm.states[current].dispatch.extend(t.text for t in labels)
                dispatch.extend(labels)
            elif key.text == 'on':
                if current is None:
                    raise self.error("a 'state' or 'idle' line before 'on'",
                                     key)
                outcome = self.expect_name('an outcome label')
                self.expect('->')
                target = self.expect_name('a transition target')
                links.append((current, outcome, target))
            elif key.text == 'initial':
                initial = self.expect_name('a state id')
            else:
                raise self.error('a state machine statement', key)
            self.end_statement()
        for source, outcome, target in links:
            if not sm.is_target(target.text):
                raise self.error('a state or terminal outcome', target,
                                 ResolutionError)
            try:
                sm.add_transition(source, outcome.text, target.text)
            except MachineError as e:
                raise self.error(f"a single target per outcome ({e})",
                                 outcome) from None
        for label in dispatch:
            if label.text not in sm.states[sm.idle].outcomes:
                raise self.error('an outcome of the idle state', label,
                                 ResolutionError)
        if initial is not None:
            if initial.text not in sm.states:
                raise self.error('a state id', initial, ResolutionError)
            sm.initial = initial.text
        try:
            sm.validate()
        except MachineError as e:
            raise self.error(f"a valid state machine ({e})", keyword) \
                from None
        self._set_policy(doc, sm, keyword)

    # ---------------------------------------------------------------------

    def resolve(self, doc: Document):
        """
        Check every collected reference against the document.

        :raises ResolutionError: at the first dangling reference
        """
        tables = {
            'condition': {c.name: c for c in doc.conditions},
            'skill': {s.name: s for s in doc.skills},
        }
        names = {
            'station': {s.name for s in doc.stations},
            'object': {o.name for o in doc.objects},
            'hook': {s.failure_model for s in doc.skills},
        }
        for namespace, ref, token in self.refs:
            if namespace in tables:
                spec = tables[namespace].get(ref.name)
                if spec is None:
                    raise self.error(f"a declared {namespace}", token,
                                     ResolutionError)
                if len(spec.params) != ref.arity:
                    raise ResolutionError(
                        token.line, token.column,
                        f"{len(spec.params)} arguments for {ref.name}",
                        str(ref))
            elif ref not in names[namespace]:
                raise self.error(f"a declared {namespace}", token,
                                 ResolutionError)

# =========================================================================

def parse(text: str) -> Document:
    """
    Parse a policy document.

    :raises ParseError: with the position of the offending token
    :raises ResolutionError: on a dangling reference
    :raises DuplicateName: on a name declared twice
    """
    parser = Parser(text)
    try:
        doc = parser.document()
    except ParseError:
        raise
    except (ValueError, KeyError) as e:
        # constructor checks not anticipated by the grammar
        token = parser.statement or parser.token
        raise ParseError(token.line, token.column,
                         f"a consistent '{token.text}' declaration",
                         str(e)) from e
    logger.debug('parsed document: %d conditions, %d skills, %d goals',
                 len(doc.conditions), len(doc.skills), len(doc.goals))
    return doc


def parse_tree(text: str, name: str = '') -> PolicyTree:
    """Parse a single behavior tree s-expression (no resolution)."""
    parser = Parser(text)
    tree = parser.sexpr()
    parser.skip_newlines()
    if parser.token.kind != 'eof':
        raise parser.error('end of input')
    tree.name = name
    return tree


def load(path: Union[str, Path]) -> Document:
    """Read and parse a document file (UTF-8)."""
    text = Path(path).read_text(encoding='utf-8')
    doc = parse(text)
    logger.info('loaded %s', path)
    return doc


def load_fixture(name: str) -> Document:
    """Load a shipped document by file name, e.g. ``fetch_task.pol``."""
    return load(get_fixture_dir() / name)

# =========================================================================
# writing

def _num(value: float) -> str:
    return repr(float(value))


def _params(params: Tuple[Param, ...]) -> str:
    return f"({', '.join(str(p) for p in params)})"


def _event_arg(value) -> str:
    return _num(value) if isinstance(value, float) else str(value)


def _condition_line(spec: ConditionSpec) -> str:
    line = f"condition {spec.name}{_params(spec.params)}"
    if spec.tolerance:
        line += f" tol={', '.join(_num(t) for t in spec.tolerance)}"
    return line


def _skill_line(spec: SkillSpec) -> str:
    line = f"skill {spec.name}{_params(spec.params)}"
    if spec.preconditions:
        line += f" pre=[{', '.join(str(r) for r in spec.preconditions)}]"
    if spec.postconditions:
        line += f" post=[{', '.join(str(r) for r in spec.postconditions)}]"
    line += f" duration={spec.duration}"
    if spec.failure_model != spec.name:
        line += f" failure={spec.failure_model}"
    return line


def _scenario_lines(script: ScenarioScript) -> List[str]:
    head = f"scenario {script.name} {{" if script.name else "scenario {"
    lines = [head]
    if script.robot is not None:
        lines.append(f"    robot {', '.join(_num(v) for v in script.robot)}")
    for key in ('battery', 'drain'):
        value = getattr(script, key)
        if value is not None:
            lines.append(f"    {key} {_num(value)}")
    if script.known is not None:
        lines.append(f"    known {', '.join(script.known)}".rstrip())
    if script.seed is not None:
        lines.append(f"    seed {script.seed}")
    if script.failure_rate is not None:
        lines.append(f"    failure_rate {_num(script.failure_rate)}")
    for event in script.events:
        args = ', '.join(_event_arg(a) for a in event.args)
        lines.append(f"    at {event.step}: {event.kind}({args})")
    lines.append("}")
    return lines


def _tree_lines(tree: PolicyTree) -> List[str]:
    head = f"bt {tree.name} {{" if tree.name else "bt {"
    body = ['    ' + line for line in tree.to_sexpr().splitlines()]
    return [head] + body + ["}"]


def _fsm_lines(sm: StateMachine) -> List[str]:
    head = f"fsm {sm.name} {{" if sm.name else "fsm {"
    lines = [head]
    for terminal in sm.terminals:
        lines.append(f"    outcome {terminal}")
    for state in sm.states.values():
        if state.is_idle:
            lines.append(f"    idle {state.id}")
            if state.dispatch:
                lines.append(f"        dispatch {', '.join(state.dispatch)}")
        else:
            lines.append(f"    state {state.id}: {state.binding}")
        for outcome in state.outcomes:
            target = sm.transitions[(state.id, outcome)]
            lines.append(f"        on {outcome} -> {target}")
    for label, guard in sm.guards.items():
        lines.append(f"    guard {label} when {guard}".rstrip())
    if sm.initial is not None:
        lines.append(f"    initial {sm.initial}")
    lines.append("}")
    return lines


def serialize_policy(policy: Policy) -> str:
    """Policy block text of a behavior tree or state machine."""
    if isinstance(policy, PolicyTree):
        return '\n'.join(_tree_lines(policy)) + '\n'
    return '\n'.join(_fsm_lines(policy)) + '\n'


def serialize(doc: Document) -> str:
    """
    Canonical text of a document.

    Sections appear in a fixed order (conditions, skills, goals,
    stations, objects, scenarios, policy) separated by blank lines; the
    empty document serializes to the empty string.
    """
    sections = [
        [_condition_line(c) for c in doc.conditions],
        [_skill_line(s) for s in doc.skills],
        [f"goal {'maintain ' if g.maintain else ''}{g.ref}"
         for g in doc.goals],
        [f"station {s.name} pose={', '.join(_num(v) for v in s.pose)} "
         f"z={_num(s.z)}" for s in doc.stations],
        [f"object {o.name} on {o.station}" for o in doc.objects],
    ]
    for script in doc.scenarios:
        sections.append(_scenario_lines(script))
    if doc.policy is not None:
        sections.append(serialize_policy(doc.policy).splitlines())
    blocks = ['\n'.join(lines) for lines in sections if lines]
    return '\n\n'.join(blocks) + '\n' if blocks else ''


def save(doc: Document, path: Union[str, Path]):
    Path(path).write_text(serialize(doc), encoding='utf-8')
    logger.info('wrote %s', path)
