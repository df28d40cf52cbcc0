"""Tokenizer for experiment files.

- Ignores whitespace and comments (`//` to end of line, `/* ... */`)
- Tracks line/column per token
- Double-quoted strings with JSON-style escapes
- Integers and floats with optional sign, fraction and exponent
"""

from dataclasses import dataclass
from enum import Enum, auto
from typing import Any, Optional, Tuple

from .error import Eof, Expected, InvalidEscape, InvalidNumber, InvalidToken, NotationError, Span


class TokenType(Enum):
    LBRACE = auto()
    RBRACE = auto()
    LBRACKET = auto()
    RBRACKET = auto()
    COLON = auto()
    COMMA = auto()
    DOLLAR = auto()
    TRUE = auto()
    FALSE = auto()
    NULL = auto()
    IDENT = auto()
    INT = auto()
    FLOAT = auto()
    STRING = auto()
    EOF = auto()


@dataclass
class Token:
    """A token with its type, optional value, and source position."""
    kind: TokenType
    span: Span
    value: Optional[Any] = None


_SINGLE = {
    '{': TokenType.LBRACE,
    '}': TokenType.RBRACE,
    '[': TokenType.LBRACKET,
    ']': TokenType.RBRACKET,
    ':': TokenType.COLON,
    ',': TokenType.COMMA,
    '$': TokenType.DOLLAR,
}

_KEYWORDS = {"true": TokenType.TRUE, "false": TokenType.FALSE, "null": TokenType.NULL}

_ESCAPES = {'"': '"', '\\': '\\', '/': '/', 'b': '\b', 'f': '\f', 'n': '\n', 'r': '\r', 't': '\t'}


class Lexer:
    """Character-level scanner over one experiment file."""

    def __init__(self, src: str):
        self.src = src
        self.idx = 0
        self.line = 1
        self.col = 1

    def bump(self) -> Optional[str]:
        """Consume and return the next character, or None at end of input."""
        if self.idx >= len(self.src):
            return None
        c = self.src[self.idx]
        self.idx += 1
        if c == '\n':
            self.line += 1
            self.col = 1
        else:
            self.col += 1
        return c

    def peek(self, ahead: int = 0) -> Optional[str]:
        i = self.idx + ahead
        return self.src[i] if i < len(self.src) else None

    def span(self) -> Span:
        return Span(offset=self.idx, line=self.line, column=self.col)

    def skip_ws_and_comments(self):
        while True:
            while self.peek() is not None and self.peek() in ' \t\r\n':
                self.bump()
            if self.peek() != '/':
                return
            nxt = self.peek(1)
            if nxt == '/':
                while self.peek() is not None and self.bump() != '\n':
                    pass
            elif nxt == '*':
                start = self.span()
                self.bump()
                self.bump()
                while True:
                    c = self.bump()
                    if c is None:
                        raise NotationError.with_ctx(Eof(), start, "unterminated block comment")
                    if c == '*' and self.peek() == '/':
                        self.bump()
                        break
            else:
                return

    def next_token(self) -> Token:
        """Read the next token; raises `NotationError` on malformed input."""
        self.skip_ws_and_comments()
        start = self.span()
        c = self.peek()
        if c is None:
            return Token(kind=TokenType.EOF, span=start)

        if c in _SINGLE:
            self.bump()
            return Token(kind=_SINGLE[c], span=start)

        if c == '"':
            return Token(kind=TokenType.STRING, span=start, value=self.read_string())

        if c in '+-.' or '0' <= c <= '9':
            int_opt, float_opt = self.read_number()
            if int_opt is not None:
                return Token(kind=TokenType.INT, span=start, value=int_opt)
            return Token(kind=TokenType.FLOAT, span=start, value=float_opt)

        if is_ident_start(c):
            s = self.read_ident()
            if s in _KEYWORDS:
                return Token(kind=_KEYWORDS[s], span=start)
            return Token(kind=TokenType.IDENT, span=start, value=s)

        raise NotationError.new(InvalidToken(repr(c)), start)

    def read_ident(self) -> str:
        start = self.idx
        self.bump()
        while self.peek() is not None and is_ident_part(self.peek()):
            self.bump()
        return self.src[start:self.idx]

    def read_string(self) -> str:
        start = self.span()
        if self.bump() != '"':
            raise NotationError.new(Expected(expected='"', found="not a quote"), start)
        out = []
        while True:
            c = self.bump()
            if c is None:
                raise NotationError.with_ctx(Eof(), start, "unterminated string")
            if c == '"':
                return ''.join(out)
            if c != '\\':
                out.append(c)
                continue
            e = self.bump()
            if e in _ESCAPES:
                out.append(_ESCAPES[e])
            elif e == 'u':
                digits = ''.join(self.bump() or '' for _ in range(4))
                if len(digits) != 4 or any(h not in '0123456789abcdefABCDEF' for h in digits):
                    raise NotationError.new(InvalidEscape(), start)
                out.append(chr(int(digits, 16)))
            else:
                raise NotationError.new(InvalidEscape(), start)

    def read_number(self) -> Tuple[Optional[int], Optional[float]]:
        """Read an integer or float; exactly one of the returned pair is set."""
        start = self.idx
        begin = self.span()
        if self.peek() in ('+', '-'):
            self.bump()
        has_dot = has_exp = has_digit = False
        while True:
            c = self.peek()
            if c is None:
                break
            if '0' <= c <= '9':
                has_digit = True
                self.bump()
            elif c == '.' and not has_dot and not has_exp:
                has_dot = True
                self.bump()
            elif c in 'eE' and has_digit and not has_exp:
                has_exp = True
                self.bump()
                if self.peek() in ('+', '-'):
                    self.bump()
            else:
                break
        text = self.src[start:self.idx]
        if not has_digit:
            raise NotationError.new(InvalidNumber(), begin)
        try:
            if has_dot or has_exp:
                return None, float(text)
            return int(text), None
        except ValueError:
            raise NotationError.new(InvalidNumber(), begin) from None


def is_ident_start(c: str) -> bool:
    """Identifiers start with an ASCII letter or `_`."""
    return ('A' <= c <= 'Z') or ('a' <= c <= 'z') or c == '_'


def is_ident_part(c: str) -> bool:
    """Identifiers continue with letters, digits, `_` or `-`."""
    return is_ident_start(c) or ('0' <= c <= '9') or c == '-'
