"""Recursive-descent parser for experiment files.

Grammar shape:
- Optional prolog: `$ident : value` entries, commas optional
- Then either an implicit top-level object (`key: value` pairs without
  braces) or a single braced object
- Values: object, array, string, number, bool, null
"""

from typing import IO, Optional

from .document import Document, Node
from .error import DuplicateKey, Expected, NotationError
from .lexer import Lexer, Token, TokenType


def parse_str(src: str) -> Document:
    """Parse a full experiment document from a string."""
    return Parser(src).parse_document()


def parse_reader(reader: IO[str]) -> Document:
    return parse_str(reader.read())


def parse_value_str(text: str) -> Node:
    """Parse a single value, as given on the command line.

    A lone bare word (`dopcbf`, `three_section`) is read as a string.
    """
    p = Parser(text)
    if p.peek().kind == TokenType.IDENT:
        t = p.bump()
        node = Node(value=t.value, span=t.span)
    else:
        node = p.parse_value()
    p.expect(TokenType.EOF, "end of value")
    return node


class Parser:
    """Recursive-descent parser with one token of lookahead."""

    def __init__(self, src: str):
        self.lex = Lexer(src)
        self.look: Optional[Token] = None

    def bump(self) -> Token:
        if self.look is not None:
            t = self.look
            self.look = None
            return t
        return self.lex.next_token()

    def peek(self) -> Token:
        if self.look is None:
            self.look = self.lex.next_token()
        return self.look

    def expect(self, kind: TokenType, expected: str) -> Token:
        t = self.bump()
        if t.kind != kind:
            raise NotationError.new(Expected(expected=expected, found=token_name(t.kind)), t.span)
        return t

    def parse_document(self) -> Document:
        doc = Document()

        while self.peek().kind == TokenType.DOLLAR:
            self.bump()
            name_tok = self.expect(TokenType.IDENT, "identifier")
            self.expect(TokenType.COLON, ":")
            if name_tok.value in doc.prolog:
                raise NotationError.new(DuplicateKey("$" + name_tok.value), name_tok.span)
            doc.prolog[name_tok.value] = self.parse_value()
            if self.peek().kind == TokenType.COMMA:
                self.bump()

        start = self.peek()
        if start.kind == TokenType.LBRACE:
            doc.root = self.parse_value()
            self.expect(TokenType.EOF, "end of input")
            return doc

        # implicit top-level object
        entries = {}
        while True:
            t = self.peek()
            if t.kind == TokenType.EOF:
                break
            if t.kind == TokenType.COMMA:
                self.bump()
                continue
            if t.kind not in (TokenType.IDENT, TokenType.STRING):
                self.bump()
                raise NotationError.new(Expected(expected="object key", found=token_name(t.kind)), t.span)
            self.parse_entry(entries)
        doc.root = Node(value=entries, span=start.span)
        return doc

    def parse_entry(self, entries: dict) -> None:
        key_tok = self.bump()
        if key_tok.kind not in (TokenType.IDENT, TokenType.STRING):
            raise NotationError.new(Expected(expected="object key", found=token_name(key_tok.kind)),
                                    key_tok.span)
        self.expect(TokenType.COLON, ":")
        if key_tok.value in entries:
            raise NotationError.new(DuplicateKey(key_tok.value), key_tok.span)
        entries[key_tok.value] = self.parse_value()

    def parse_value(self) -> Node:
        t = self.bump()
        if t.kind == TokenType.LBRACE:
            return self.parse_object(t)
        if t.kind == TokenType.LBRACKET:
            return self.parse_array(t)
        if t.kind in (TokenType.STRING, TokenType.INT, TokenType.FLOAT):
            return Node(value=t.value, span=t.span)
        if t.kind == TokenType.TRUE:
            return Node(value=True, span=t.span)
        if t.kind == TokenType.FALSE:
            return Node(value=False, span=t.span)
        if t.kind == TokenType.NULL:
            return Node(value=None, span=t.span)
        raise NotationError.new(Expected(expected="value", found=token_name(t.kind)), t.span)

    def parse_object(self, open_tok: Token) -> Node:
        entries = {}
        while True:
            if self.peek().kind == TokenType.RBRACE:
                self.bump()
                return Node(value=entries, span=open_tok.span)
            self.parse_entry(entries)
            # optional comma, trailing allowed
            if self.peek().kind == TokenType.COMMA:
                self.bump()

    def parse_array(self, open_tok: Token) -> Node:
        items = []
        while True:
            if self.peek().kind == TokenType.RBRACKET:
                self.bump()
                return Node(value=items, span=open_tok.span)
            items.append(self.parse_value())
            if self.peek().kind == TokenType.COMMA:
                self.bump()


def token_name(k: TokenType) -> str:
    """Human-readable name for a token type."""
    names = {
        TokenType.LBRACE: "{",
        TokenType.RBRACE: "}",
        TokenType.LBRACKET: "[",
        TokenType.RBRACKET: "]",
        TokenType.COLON: ":",
        TokenType.COMMA: ",",
        TokenType.DOLLAR: "$",
        TokenType.TRUE: "true",
        TokenType.FALSE: "false",
        TokenType.NULL: "null",
        TokenType.IDENT: "identifier",
        TokenType.INT: "integer",
        TokenType.FLOAT: "float",
        TokenType.STRING: "string",
        TokenType.EOF: "EOF",
    }
    return names.get(k, str(k))
