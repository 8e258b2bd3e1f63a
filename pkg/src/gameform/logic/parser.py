"""Recursive-descent parser for LGDL source text.

Grammar::

    program  := clause*
    clause   := head ['if' body] '.'
    body     := literal ('and' literal)*
    literal  := 'not' literal | '(' literal ')' | term [cmp term]
    term     := VAR | INT | atom ['(' term (',' term)* ')'] | '[' [term (',' term)*] ']'

Comments run from ``%`` to end of line. The parser keeps going after a
malformed clause so that one pass reports every bad clause.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Optional, Tuple

from .errors import PARSE_ERROR, EngineError, ParseErrors
from .program import BUILTINS, COMPARISONS, Builtin, Call, Clause, Compare, Goal, Not, Program, SourceSpan
from .terms import KEYWORDS, Atom, Int, PList, Struct, Term, Var

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>%[^\n]*)
  | (?P<float>-?[0-9]+\.[0-9]+)
  | (?P<int>-?[0-9]+)
  | (?P<var>[A-Z_][A-Za-z0-9_]*)
  | (?P<name>[a-z][A-Za-z0-9_]*)
  | (?P<quote>')
  | (?P<cmp>>=|=<|\\=|>|<|=)
  | (?P<punct>[()\[\],])
  | (?P<end>\.)
    """,
    re.VERBOSE,
)
_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", "'": "'"}


@dataclass
class Token:
    kind: str  # var name qatom int cmp punct end kw error eof
    value: str
    line: int
    col: int
    pos: int
    end: int


def _error(message: str, line: Optional[int], col: Optional[int], lines: List[str], source: Optional[str]) -> EngineError:
    text = lines[line - 1] if line is not None and 0 < line <= len(lines) else None
    return EngineError(PARSE_ERROR, message, line=line, col=col, line_text=text, source=source)


def tokenize(text: str) -> List[Token]:
    """Split ``text`` into tokens; lexical problems become ``error`` tokens."""
    tokens: List[Token] = []
    pos, line, line_start = 0, 1, 0
    n = len(text)
    while pos < n:
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            ch = text[pos]
            if text.startswith("//", pos) or text.startswith("/*", pos):
                msg = "non-LGDL comment syntax; comments start with '%'"
            elif text.startswith(":-", pos):
                msg = "':-' is not LGDL; rules use 'if' and 'and'"
            elif ch == '"':
                msg = "double-quoted strings are not LGDL; quote atoms with '"
            elif ch == "|":
                msg = "'[H|T]' list patterns are not LGDL; write lists out as [a, b]"
            else:
                msg = f"unexpected character {ch!r}"
            tokens.append(Token("error", msg, line, col, pos, pos + 1))
            # resume on the next line: the rest of this one is unreliable
            nl = text.find("\n", pos)
            pos = n if nl < 0 else nl
            continue
        kind = m.lastgroup
        if kind == "float":
            tokens.append(Token("error", f"only integers are allowed, found {m.group()}", line, col, pos, m.end()))
            pos = _line_end(text, pos)
            continue
        if kind == "ws" or kind == "comment":
            pos = m.end()
            continue
        if kind == "nl":
            pos = m.end()
            line += 1
            line_start = pos
            continue
        if kind == "quote":
            value, end, err = _read_quoted(text, pos + 1)
            if err:
                tokens.append(Token("error", err, line, col, pos, end))
            else:
                tokens.append(Token("qatom", value, line, col, pos, end))
            pos = end
            continue
        value = m.group()
        if kind == "name" and value in KEYWORDS:
            kind = "kw"
        tokens.append(Token(kind, value, line, col, pos, m.end()))
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1, n, n))
    return tokens


def _read_quoted(text: str, pos: int) -> Tuple[str, int, Optional[str]]:
    out = []
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch == "\n":
            return "", pos, "unterminated quoted atom (unescaped quote?)"
        if ch == "\\":
            if pos + 1 < n and text[pos + 1] in _ESCAPES:
                out.append(_ESCAPES[text[pos + 1]])
                pos += 2
                continue
            return "", _line_end(text, pos), "invalid escape sequence in quoted atom"
        if ch == "'":
            if pos + 1 < n and text[pos + 1] == "'":
                out.append("'")
                pos += 2
                continue
            return "".join(out), pos + 1, None
        out.append(ch)
        pos += 1
    return "", pos, "unterminated quoted atom (unescaped quote?)"


def _line_end(text: str, pos: int) -> int:
    nl = text.find("\n", pos)
    return len(text) if nl < 0 else nl


class _Fail(Exception):
    def __init__(self, error: EngineError, resync: bool = True) -> None:
        self.error = error
        self.resync = resync


class Parser:
    def __init__(self, text: str, source: Optional[str] = None) -> None:
        self.text = text
        self.source = source
        self.lines = text.split("\n")
        self.tokens = tokenize(text)
        self.i = 0
        self.anon = 0
        self.errors: List[EngineError] = []

    # token helpers
    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        if t.kind != "eof":
            self.i += 1
        return t

    def prev(self) -> Optional[Token]:
        return self.tokens[self.i - 1] if self.i > 0 else None

    def fail(self, message: str, tok: Optional[Token] = None) -> _Fail:
        tok = tok or self.tok
        if tok.kind == "error":
            return _Fail(_error(tok.value, tok.line, tok.col, self.lines, self.source))
        if tok.kind == "eof":
            return _Fail(EngineError(PARSE_ERROR, "unexpected end of file", source=self.source))
        return _Fail(_error(message, tok.line, tok.col, self.lines, self.source))

    def expect(self, kind: str, value: Optional[str] = None, what: str = "") -> Token:
        t = self.tok
        if t.kind == kind and (value is None or t.value == value):
            return self.advance()
        raise self.fail(f"expected {what or repr(value)}, found {self._describe(t)}")

    @staticmethod
    def _describe(t: Token) -> str:
        if t.kind == "eof":
            return "end of file"
        if t.kind == "qatom":
            return f"'{t.value}'"
        return repr(t.value)

    # grammar
    def program(self) -> List[Clause]:
        clauses = []
        while self.tok.kind != "eof":
            start = self.i
            try:
                clauses.append(self.clause())
            except _Fail as f:
                self.errors.append(self._prefer_lexical(f.error, start))
                if f.resync:
                    self.recover(f.error.line)
        return clauses

    def _prefer_lexical(self, err: EngineError, start: int) -> EngineError:
        # a lexical error on the same line explains a confusing syntax error
        if err.line is None:
            return err
        for t in self.tokens[start:]:
            if t.line > err.line or t.kind in ("end", "eof"):
                break
            if t.kind == "error" and t.line == err.line:
                return _error(t.value, t.line, t.col, self.lines, self.source)
        return err

    def recover(self, line: Optional[int]) -> None:
        while True:
            t = self.tok
            if t.kind == "eof":
                return
            if t.kind == "end":
                self.advance()
                return
            if line is not None and t.line > line and t.col == 1:
                return
            self.advance()

    def clause(self) -> Clause:
        first = self.tok
        head = self.term()
        if isinstance(head, (Var, Int, PList)):
            raise _Fail(
                _error(f"clause head must be an atom or compound term, not {head}", first.line, first.col, self.lines, self.source)
            )
        key = (head.name, 0) if isinstance(head, Atom) else head.indicator
        if key in BUILTINS or (isinstance(head, Struct) and head.functor in COMPARISONS) or head == Atom("not"):
            raise _Fail(_error(f"cannot redefine builtin {key[0]}/{key[1]}", first.line, first.col, self.lines, self.source))
        body: List[Goal] = []
        if self.tok.kind == "kw" and self.tok.value == "if":
            self.advance()
            body = self.body()
        self.finish_clause()
        last = self.prev()
        span = SourceSpan(
            first.line,
            first.col,
            last.line,
            last.col,
            self.text[first.pos:last.end],
            self.source,
        )
        return Clause(head, tuple(body), span)

    def finish_clause(self) -> None:
        t = self.tok
        if t.kind == "end":
            self.advance()
            return
        p = self.prev()
        if t.kind == "eof":
            raise self.fail("")
        if p is not None and t.line > p.line and t.kind != "error":
            # the clause above simply lacks its terminating period
            raise _Fail(
                _error("missing '.' at end of clause", p.line, p.col + (p.end - p.pos), self.lines, self.source),
                resync=False,
            )
        hint = " (use 'and' for conjunction)" if t.value == "," else ""
        raise self.fail(f"expected 'and', 'if' or '.', found {self._describe(t)}{hint}")

    def body(self) -> List[Goal]:
        goals = [self.literal()]
        while self.tok.kind == "kw" and self.tok.value == "and":
            self.advance()
            goals.append(self.literal())
        return goals

    def literal(self) -> Goal:
        t = self.tok
        if t.kind == "kw" and t.value == "not":
            self.advance()
            return Not(self.literal())
        if t.kind == "punct" and t.value == "(":
            self.advance()
            g = self.literal()
            self.expect("punct", ")")
            return g
        left = self.term()
        if self.tok.kind == "cmp":
            op = self.advance().value
            right = self.term()
            return Compare(op, left, right)
        if isinstance(left, Struct):
            if left.indicator in BUILTINS:
                return Builtin(left.functor, left.args)
            return Call(left)
        if isinstance(left, Atom):
            return Call(left)
        raise _Fail(_error(f"{left} is not a callable goal", t.line, t.col, self.lines, self.source))

    def term(self) -> Term:
        t = self.tok
        if t.kind == "var":
            self.advance()
            if t.value == "_":
                self.anon += 1
                return Var("_", -self.anon)
            return Var(t.value)
        if t.kind == "int":
            self.advance()
            return Int(int(t.value))
        if t.kind in ("name", "qatom"):
            self.advance()
            nxt = self.tok
            if nxt.kind == "punct" and nxt.value == "(" and nxt.pos == t.end:
                self.advance()
                args = self.args(")")
                return Struct(t.value, tuple(args))
            return Atom(t.value)
        if t.kind == "punct" and t.value == "[":
            self.advance()
            if self.tok.kind == "punct" and self.tok.value == "]":
                self.advance()
                return PList(())
            return PList(tuple(self.args("]")))
        if t.kind == "kw":
            raise self.fail(f"keyword '{t.value}' cannot be used as a term")
        raise self.fail(f"expected a term, found {self._describe(t)}")

    def args(self, close: str) -> List[Term]:
        items = [self.term()]
        while self.tok.kind == "punct" and self.tok.value == ",":
            self.advance()
            items.append(self.term())
        self.expect("punct", close, f"',' or '{close}'")
        return items


def parse_program(text: str, source: Optional[str] = None) -> Program:
    """Parse LGDL ``text`` into a Program.

    Raises ParseErrors listing every malformed clause.
    """
    parser = Parser(text, source)
    clauses = parser.program()
    if parser.errors:
        raise ParseErrors(parser.errors)
    return Program(clauses)


def check_program(text: str, source: Optional[str] = None) -> Tuple[Optional[Program], List[EngineError]]:
    """Like parse_program but returns ``(program, errors)`` instead of raising."""
    parser = Parser(text, source)
    clauses = parser.program()
    if parser.errors:
        return None, parser.errors
    return Program(clauses), []


def parse_query(text: str) -> List[Goal]:
    text = text.strip()
    if text.startswith("?-"):
        text = text[2:]
    text = text.strip()
    if not text.endswith("."):
        text += "."
    parser = Parser(text, "<query>")
    try:
        goals = [parser.literal()]
        # top-level queries accept ',' as well as 'and'
        while (parser.tok.kind == "kw" and parser.tok.value == "and") or (
            parser.tok.kind == "punct" and parser.tok.value == ","
        ):
            parser.advance()
            goals.append(parser.literal())
        parser.finish_clause()
    except _Fail as f:
        raise ParseErrors([f.error]) from None
    if parser.tok.kind != "eof":
        raise ParseErrors([_error("trailing input after query", parser.tok.line, parser.tok.col, parser.lines, "<query>")])
    return goals


def parse_term(text: str) -> Term:
    parser = Parser(text.strip(), "<term>")
    try:
        term = parser.term()
    except _Fail as f:
        raise ParseErrors([f.error]) from None
    if parser.tok.kind != "eof":
        raise ParseErrors([_error("trailing input after term", parser.tok.line, parser.tok.col, parser.lines, "<term>")])
    return term
