"""Writer for experiment documents.

The pretty form writes the top-level object without braces, one entry per
line, which is how experiment files are meant to look; the compact form is
a single braced line.
"""

import math
from dataclasses import dataclass

from .document import Document, Node
from .error import ContractViolation
from .lexer import is_ident_part, is_ident_start


@dataclass
class Format:
    """Formatting options for serialization."""
    pretty: bool = True
    indent: int = 2
    trailing_commas: bool = True


def to_string_pretty(doc: Document) -> str:
    return to_string_with_format(doc, Format())


def to_string_compact(doc: Document) -> str:
    return to_string_with_format(doc, Format(pretty=False, indent=0, trailing_commas=False))


def to_string_with_format(doc: Document, fmt: Format) -> str:
    out = []
    for name, node in doc.prolog.items():
        out.append(f"${name}: ")
        write_value(out, node, fmt, 0)
        out.append("\n" if fmt.pretty else ", ")

    entries = doc.root.value if doc.root.is_object else {}
    if not fmt.pretty:
        write_value(out, doc.root, fmt, 0)
        return ''.join(out)
    for k, node in entries.items():
        write_key(out, k)
        out.append(': ')
        write_value(out, node, fmt, 0)
        out.append('\n')
    return ''.join(out)


def write_value(out: list, node: Node, fmt: Format, depth: int):
    v = node.value
    if v is None:
        out.append("null")
    elif isinstance(v, bool):
        out.append("true" if v else "false")
    elif isinstance(v, int):
        out.append(str(v))
    elif isinstance(v, float):
        if not math.isfinite(v):
            raise ContractViolation(f"cannot write non-finite number {v}")
        out.append(repr(v))
    elif isinstance(v, str):
        write_string(out, v)
    elif isinstance(v, list):
        if not v or all(not isinstance(n.value, (list, dict)) for n in v):
            write_inline_array(out, v, fmt)
        else:
            write_block(out, '[', ']', [(None, n) for n in v], fmt, depth)
    elif isinstance(v, dict):
        write_block(out, '{', '}', list(v.items()), fmt, depth)
    else:
        raise ContractViolation(f"cannot write {type(v).__name__}")


def write_inline_array(out: list, items, fmt: Format):
    """Arrays of scalars stay on one line (`Lr: [3.0, 3.0]`)."""
    out.append('[')
    for i, n in enumerate(items):
        if i > 0:
            out.append(', ' if fmt.pretty else ',')
        write_value(out, n, fmt, 0)
    out.append(']')


def write_block(out: list, open_: str, close: str, items, fmt: Format, depth: int):
    out.append(open_)
    if fmt.pretty and items:
        out.append('\n')
    for i, (k, n) in enumerate(items):
        if fmt.pretty:
            indent(out, depth + 1, fmt.indent)
        if k is not None:
            write_key(out, k)
            out.append(': ' if fmt.pretty else ':')
        write_value(out, n, fmt, depth + 1)
        if i + 1 < len(items) or fmt.trailing_commas:
            out.append(',')
        if fmt.pretty:
            out.append('\n')
    if fmt.pretty and items:
        indent(out, depth, fmt.indent)
    out.append(close)


def indent(out: list, depth: int, space: int):
    out.append(' ' * (depth * space))


def write_key(out: list, k: str):
    if is_simple_ident(k):
        out.append(k)
    else:
        write_string(out, k)


def is_simple_ident(s: str) -> bool:
    """True if `s` can be written as an unquoted key."""
    if not s or s in ("true", "false", "null"):
        return False
    return is_ident_start(s[0]) and all(is_ident_part(c) for c in s[1:])


def write_string(out: list, s: str):
    out.append('"')
    for ch in s:
        if ch == '\\':
            out.append('\\\\')
        elif ch == '"':
            out.append('\\"')
        elif ch == '\n':
            out.append('\\n')
        elif ch == '\r':
            out.append('\\r')
        elif ch == '\t':
            out.append('\\t')
        elif ord(ch) < 32:
            out.append(f'\\u{ord(ch):04X}')
        else:
            out.append(ch)
    out.append('"')
