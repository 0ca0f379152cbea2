"""
Directed Graph
==============

Plain node/edge structure that both policy representations export to for
the effort metrics, with DOT text import/export.

Node and edge tables keep insertion order, so exports and metric searches
iterate deterministically.
"""

import logging
import re
from typing import Dict, Iterator, List, Optional, Tuple

import networkx as nx

from .utils import ParseError

logger = logging.getLogger(__name__)

#: DOT edge colors keyed by the first outcome label of an edge
EDGE_COLORS = {
    'success': 'green',
    'running': 'goldenrod',
    'failure': 'red',
    '': 'black',
}
OTHER_EDGE_COLOR = 'blue'

_ID = r'(?:"((?:[^"\\]|\\.)*)"|([A-Za-z_][\w.]*))'
_ATTRS = r'(?:\[(.*)\])?'
_HEADER_RE = re.compile(r'^\s*(?:strict\s+)?digraph\s*' + _ID + r'?\s*\{\s*$')
_NODE_RE = re.compile(r'^\s*' + _ID + r'\s*' + _ATTRS + r'\s*;?\s*$')
_EDGE_RE = re.compile(r'^\s*' + _ID + r'\s*->\s*' + _ID + r'\s*' + _ATTRS +
                      r'\s*;?\s*$')
_ATTR_RE = re.compile(r'\s*(\w+)\s*=\s*(?:"((?:[^"\\]|\\.)*)"|([^,\s]+))\s*,?')

# =========================================================================

def _quote(text: str) -> str:
    return '"' + text.replace('\\', '\\\\').replace('"', '\\"') + '"'


def _unquote(text: str) -> str:
    return re.sub(r'\\(.)', r'\1', text)


def edge_color(label: str) -> str:
    """Rendering color for an edge label (outcome color coding)."""
    first = label.split('|')[0] if label else ''
    return EDGE_COLORS.get(first, OTHER_EDGE_COLOR)

# =========================================================================

class DirectedGraph:
    """
    Directed graph with labeled nodes and labeled edges.

    Self-loops are permitted; parallel edges are not. Adding an edge
    that already exists merges the labels with ``|``.

    :param name: Graph name used in the DOT header
    """

    def __init__(self, name: str = 'G'):
        self.name = name
        self.nodes: Dict[str, str] = {}
        self.edges: Dict[Tuple[str, str], str] = {}

    def __repr__(self):
        return (f"DirectedGraph({self.name!r}, nodes={self.node_count}, "
                f"edges={self.edge_count})")

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    @property
    def edge_count(self) -> int:
        return len(self.edges)

    # ---------------------------------------------------------------------

    def add_node(self, node: str, label: str = ''):
        """Add a node, or update the label of an existing one."""
        if node in self.nodes and not label:
            return
        self.nodes[node] = label

    def add_edge(self, source: str, target: str, label: str = ''):
        """
        Add the edge ``source -> target``.

        :raises KeyError: if an endpoint is not a node of the graph
        """
        for node in (source, target):
            if node not in self.nodes:
                raise KeyError(f"edge endpoint '{node}' is not a node")
        key = (source, target)
        if key in self.edges:
            parts = self.edges[key].split('|') if self.edges[key] else []
            if label and label not in parts:
                parts.append(label)
            self.edges[key] = '|'.join(parts)
        else:
            self.edges[key] = label

    def remove_edge(self, source: str, target: str):
        del self.edges[(source, target)]

    def remove_node(self, node: str):
        """Remove a node together with its incident edges."""
        del self.nodes[node]
        for key in [k for k in self.edges if node in k]:
            del self.edges[key]

    def has_edge(self, source: str, target: str) -> bool:
        return (source, target) in self.edges

    def successors(self, node: str) -> Iterator[str]:
        return (t for (s, t) in self.edges if s == node)

    def predecessors(self, node: str) -> Iterator[str]:
        return (s for (s, t) in self.edges if t == node)

    def out_degree(self, node: str) -> int:
        """Number of outgoing edges, a self-loop counts as outgoing."""
        return sum(1 for _ in self.successors(node))

    def sinks(self) -> List[str]:
        """Nodes with out-degree zero, in node order."""
        sources = {s for (s, _) in self.edges}
        return [n for n in self.nodes if n not in sources]

    def copy(self, name: Optional[str] = None) -> 'DirectedGraph':
        other = DirectedGraph(self.name if name is None else name)
        other.nodes = dict(self.nodes)
        other.edges = dict(self.edges)
        return other

    def same_structure(self, other: 'DirectedGraph') -> bool:
        """True if node ids and edge pairs coincide (labels ignored)."""
        return (set(self.nodes) == set(other.nodes) and
                set(self.edges) == set(other.edges))

    # ---------------------------------------------------------------------

    def to_dot(self) -> str:
        """
        Render as DOT text with one statement per line.

        Nodes are written in node order, edges in edge order; edges carry
        their outcome label and the matching color.
        """
        lines = [f"digraph {_quote(self.name)} {{"]
        for node, label in self.nodes.items():
            lines.append(f"    {_quote(node)} [label={_quote(label)}];")
        for (source, target), label in self.edges.items():
            lines.append(f"    {_quote(source)} -> {_quote(target)} "
                         f"[label={_quote(label)}, "
                         f"color={_quote(edge_color(label))}];")
        lines.append("}")
        return '\n'.join(lines) + '\n'

    @classmethod
    def from_dot(cls, text: str) -> 'DirectedGraph':
        """
        Parse the line-oriented DOT subset written by :meth:`to_dot`.

        Edges may reference nodes not declared before; such nodes are
        added with an empty label.

        :raises ParseError: on lines outside the subset
        """
        graph = None
        closed = False
        for lineno, raw in enumerate(text.splitlines(), start=1):
            line = raw.split('//', 1)[0] if '"' not in raw else raw
            if not line.strip():
                continue
            column = len(line) - len(line.lstrip()) + 1
            if graph is None:
                match = _HEADER_RE.match(line)
                if not match:
                    raise ParseError(lineno, column, "'digraph <name> {'",
                                     line.strip())
                name = match.group(1) if match.group(1) is not None \
                    else (match.group(2) or 'G')
                graph = cls(_unquote(name))
                continue
            if closed:
                raise ParseError(lineno, column, 'end of input', line.strip())
            if line.strip() == '}':
                closed = True
                continue
            match = _EDGE_RE.match(line)
            if match:
                source = _unquote(match.group(1) if match.group(1) is not None
                                  else match.group(2))
                target = _unquote(match.group(3) if match.group(3) is not None
                                  else match.group(4))
                attrs = _parse_attrs(match.group(5), lineno, column)
                graph.add_node(source)
                graph.add_node(target)
                graph.add_edge(source, target, attrs.get('label', ''))
                continue
            match = _NODE_RE.match(line)
            if match:
                if match.group(2) in ('node', 'edge', 'graph'):
                    # default attribute statements carry no structure
                    continue
                node = _unquote(match.group(1) if match.group(1) is not None
                                else match.group(2))
                attrs = _parse_attrs(match.group(3), lineno, column)
                graph.add_node(node, attrs.get('label', ''))
                continue
            raise ParseError(lineno, column, 'node or edge statement',
                             line.strip())
        if graph is None:
            raise ParseError(1, 1, "'digraph <name> {'", '')
        if not closed:
            lineno = max(1, len(text.splitlines()))
            raise ParseError(lineno, 1, "'}'", 'end of input')
        logger.debug('parsed %r', graph)
        return graph

    def to_networkx(self) -> nx.DiGraph:
        """Copy into a :class:`networkx.DiGraph` with ``label`` attributes."""
        result = nx.DiGraph(name=self.name)
        for node, label in self.nodes.items():
            result.add_node(node, label=label)
        for (source, target), label in self.edges.items():
            result.add_edge(source, target, label=label)
        return result

    @classmethod
    def from_networkx(cls, graph: nx.DiGraph) -> 'DirectedGraph':
        result = cls(str(graph.graph.get('name') or 'G'))
        for node, data in graph.nodes(data=True):
            result.add_node(str(node), str(data.get('label', '')))
        for source, target, data in graph.edges(data=True):
            result.add_edge(str(source), str(target),
                            str(data.get('label', '')))
        return result

# -------------------------------------------------------------------------

def _parse_attrs(text: Optional[str], lineno: int,
                 column: int) -> Dict[str, str]:
    if not text:
        return {}
    attrs = {}
    pos = 0
    while pos < len(text):
        match = _ATTR_RE.match(text, pos)
        if not match or match.end() == pos:
            raise ParseError(lineno, column, 'attribute list',
                             text[pos:].strip())
        value = match.group(2) if match.group(2) is not None \
            else match.group(3)
        attrs[match.group(1)] = _unquote(value)
        pos = match.end()
    return attrs
