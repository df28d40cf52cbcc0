"""Parsed experiment documents.

Values are kept as plain Python data (`None`, `bool`, `int`, `float`,
`str`, `list`, `dict`) wrapped in `Node`s that remember where in the file
they came from, so configuration errors can point at the offending line.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Union

from .error import ContractViolation, Span

Value = Union[None, bool, int, float, str, List['Node'], Dict[str, 'Node']]


@dataclass
class Node:
    """A value and its source span (None for values built in code)."""
    value: Value = None
    span: Optional[Span] = None

    @property
    def is_object(self) -> bool:
        return isinstance(self.value, dict)

    @property
    def is_array(self) -> bool:
        return isinstance(self.value, list)

    def __getitem__(self, key):
        return self.value[key]

    def __contains__(self, key) -> bool:
        return self.is_object and key in self.value


@dataclass
class Document:
    """Prolog directives (`$name: value`) plus the top-level object."""
    prolog: Dict[str, Node] = field(default_factory=dict)
    root: Node = field(default_factory=lambda: Node(value={}))

    def directive(self, name: str) -> Optional[Any]:
        node = self.prolog.get(name)
        return None if node is None else to_plain(node)


def to_plain(node: Node) -> Any:
    """Strip spans recursively."""
    v = node.value
    if isinstance(v, dict):
        return {k: to_plain(child) for k, child in v.items()}
    if isinstance(v, list):
        return [to_plain(child) for child in v]
    return v


def from_plain(value: Any) -> Node:
    """Wrap plain data (tuples count as arrays) into span-less nodes."""
    if isinstance(value, Node):
        return value
    if isinstance(value, dict):
        return Node(value={str(k): from_plain(v) for k, v in value.items()})
    if isinstance(value, (list, tuple)):
        return Node(value=[from_plain(v) for v in value])
    if value is None or isinstance(value, (bool, int, float, str)):
        return Node(value=value)
    raise ContractViolation(f"cannot store {type(value).__name__} in a document")


def lookup(doc: Document, path: str) -> Optional[Node]:
    """Node at a dotted path, or None if any segment is missing."""
    node = doc.root
    for part in path.split('.'):
        if not node.is_object or part not in node.value:
            return None
        node = node.value[part]
    return node


def set_path(doc: Document, path: str, node: Node) -> None:
    """Store `node` at a dotted path, creating intermediate objects.

    Raises `ContractViolation` if a segment on the way is not an object.
    """
    parts = path.split('.')
    if not all(parts):
        raise ContractViolation(f"invalid path '{path}'")
    cur = doc.root
    for i, part in enumerate(parts[:-1]):
        child = cur.value.get(part)
        if child is None:
            child = Node(value={})
            cur.value[part] = child
        elif not child.is_object:
            raise ContractViolation(f"'{'.'.join(parts[:i + 1])}' is not a section")
        cur = child
    cur.value[parts[-1]] = node
