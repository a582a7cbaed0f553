"""Propositional rule language over three-valued factor answers.

Grammar (keywords case-insensitive, identifiers lowercase, whitespace free):

    formula := implies
    implies := or ("IMPLIES" implies)?      right-associative
    or      := and ("OR" and)*              left-associative
    and     := unary ("AND" unary)*         left-associative
    unary   := "NOT" unary | "(" formula ")" | "TRUE" | "FALSE" | identifier

Precedence from loosest to tightest: IMPLIES, OR, AND, NOT. ``parse_formula``
and ``format_formula`` are inverse up to canonical spelling: parsing the
formatted text of any formula yields an equal tree.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Iterator, Mapping, Union

from .errors import DepthExceeded, ParseError, UnboundVariable
from .tribool import TriBool

MAX_DEPTH = 64

IDENTIFIER_RE = re.compile(r"[a-z][a-z0-9_]*\Z")

Formula = Union["Var", "Const", "Not", "And", "Or", "Implies"]


@dataclass(frozen=True)
class Var:
    name: str

    def __post_init__(self):
        if not IDENTIFIER_RE.match(self.name):
            raise ValueError(f"invalid variable name: {self.name!r}")


@dataclass(frozen=True)
class Const:
    value: TriBool

    def __post_init__(self):
        # UNKNOWN is a runtime answer, never a literal in rule text.
        if self.value is TriBool.UNKNOWN:
            raise ValueError("constants are restricted to TRUE and FALSE")


@dataclass(frozen=True)
class Not:
    child: Formula


@dataclass(frozen=True)
class And:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Or:
    left: Formula
    right: Formula


@dataclass(frozen=True)
class Implies:
    left: Formula
    right: Formula


Assignment = Mapping[str, TriBool]


# --- lexer -----------------------------------------------------------------

_KEYWORDS = frozenset({"AND", "OR", "NOT", "IMPLIES", "TRUE", "FALSE"})

_WORD_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*")


@dataclass(frozen=True)
class _Token:
    kind: str  # one of the keywords, "IDENT", "(", ")", "EOF"
    text: str
    position: int  # character index into the source text


def _byte_offset(text: str, position: int) -> int:
    return len(text[:position].encode("utf-8"))


def _tokenize(text: str) -> Iterator[_Token]:
    i = 0
    length = len(text)
    while i < length:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch in "()":
            yield _Token(ch, ch, i)
            i += 1
            continue
        match = _WORD_RE.match(text, i)
        if match:
            word = match.group()
            upper = word.upper()
            if upper in _KEYWORDS:
                yield _Token(upper, word, i)
            elif IDENTIFIER_RE.match(word):
                yield _Token("IDENT", word, i)
            else:
                raise ParseError(
                    f"invalid identifier {word!r}",
                    _byte_offset(text, i),
                    ("identifier",),
                )
            i = match.end()
            continue
        raise ParseError(
            f"unexpected character {ch!r}",
            _byte_offset(text, i),
            ("NOT", "TRUE", "FALSE", "identifier", "("),
        )
    yield _Token("EOF", "", length)


# --- parser ----------------------------------------------------------------

_OPERAND_STARTS = ("(", "NOT", "TRUE", "FALSE", "identifier")


class _Parser:
    def __init__(self, text: str):
        self._text = text
        self._tokens = list(_tokenize(text))
        self._pos = 0

    def _peek(self) -> _Token:
        return self._tokens[self._pos]

    def _next(self) -> _Token:
        token = self._tokens[self._pos]
        self._pos += 1
        return token

    def _fail(self, token: _Token, expected: tuple[str, ...]):
        what = "end of input" if token.kind == "EOF" else repr(token.text)
        raise ParseError(
            f"unexpected {what}",
            _byte_offset(self._text, token.position),
            expected,
        )

    def _check_depth(self, depth: int, token: _Token):
        if depth > MAX_DEPTH:
            raise DepthExceeded(
                f"rule nesting exceeds {MAX_DEPTH} levels "
                f"near offset {_byte_offset(self._text, token.position)}"
            )

    def parse(self) -> Formula:
        formula = self._implies(1)
        trailing = self._peek()
        if trailing.kind != "EOF":
            self._fail(trailing, ("AND", "OR", "IMPLIES", "end of input"))
        return formula

    def _implies(self, depth: int) -> Formula:
        left = self._or(depth)
        if self._peek().kind == "IMPLIES":
            token = self._next()
            self._check_depth(depth + 1, token)
            right = self._implies(depth + 1)
            return Implies(left, right)
        return left

    def _or(self, depth: int) -> Formula:
        node = self._and(depth)
        while self._peek().kind == "OR":
            self._next()
            node = Or(node, self._and(depth))
        return node

    def _and(self, depth: int) -> Formula:
        node = self._unary(depth)
        while self._peek().kind == "AND":
            self._next()
            node = And(node, self._unary(depth))
        return node

    def _unary(self, depth: int) -> Formula:
        token = self._peek()
        if token.kind == "NOT":
            self._next()
            self._check_depth(depth + 1, token)
            return Not(self._unary(depth + 1))
        if token.kind == "(":
            self._next()
            self._check_depth(depth + 1, token)
            inner = self._implies(depth + 1)
            closing = self._peek()
            if closing.kind != ")":
                self._fail(closing, (")", "AND", "OR", "IMPLIES"))
            self._next()
            return inner
        if token.kind == "TRUE":
            self._next()
            return Const(TriBool.TRUE)
        if token.kind == "FALSE":
            self._next()
            return Const(TriBool.FALSE)
        if token.kind == "IDENT":
            self._next()
            return Var(token.text)
        self._fail(token, _OPERAND_STARTS)
        raise AssertionError("unreachable")


def parse_formula(text: str) -> Formula:
    """Parse rule text into a formula tree.

    Raises ParseError with the byte offset of the first offending token, or
    DepthExceeded when the tree would nest deeper than MAX_DEPTH levels.
    """
    formula = _Parser(text).parse()
    if formula_depth(formula) > MAX_DEPTH:
        raise DepthExceeded(f"rule nesting exceeds {MAX_DEPTH} levels")
    return formula


# --- structural helpers ----------------------------------------------------


def formula_depth(formula: Formula) -> int:
    """Height of the tree; a lone atom has depth 1. Iterative on purpose:
    the input may be deeper than the parser would ever admit."""
    deepest = 0
    stack: list[tuple[Formula, int]] = [(formula, 1)]
    while stack:
        node, depth = stack.pop()
        deepest = max(deepest, depth)
        if isinstance(node, Not):
            stack.append((node.child, depth + 1))
        elif isinstance(node, (And, Or, Implies)):
            stack.append((node.left, depth + 1))
            stack.append((node.right, depth + 1))
    return deepest


def free_variables(formula: Formula) -> list[str]:
    """All variable names in the formula, sorted, without duplicates."""
    names: set[str] = set()
    stack: list[Formula] = [formula]
    while stack:
        node = stack.pop()
        if isinstance(node, Var):
            names.add(node.name)
        elif isinstance(node, Not):
            stack.append(node.child)
        elif isinstance(node, (And, Or, Implies)):
            stack.append(node.left)
            stack.append(node.right)
    return sorted(names)


# --- evaluation ------------------------------------------------------------


def eval_formula(formula: Formula, assignment: Assignment) -> TriBool:
    """Evaluate under strong Kleene semantics.

    Unbound variables raise UnboundVariable rather than defaulting to
    UNKNOWN; an incomplete assignment is a caller bug, not missing evidence.
    """
    match formula:
        case Var(name=name):
            try:
                return assignment[name]
            except KeyError:
                raise UnboundVariable(name) from None
        case Const(value=value):
            return value
        case Not(child=child):
            return eval_formula(child, assignment).negate()
        case And(left=left, right=right):
            return eval_formula(left, assignment).and_(eval_formula(right, assignment))
        case Or(left=left, right=right):
            return eval_formula(left, assignment).or_(eval_formula(right, assignment))
        case Implies(left=left, right=right):
            return eval_formula(left, assignment).implies(
                eval_formula(right, assignment)
            )
        case _:
            raise TypeError(f"not a formula: {formula!r}")


# --- canonical text --------------------------------------------------------

_PRECEDENCE = {Implies: 1, Or: 2, And: 3, Not: 4}
_ATOM_PRECEDENCE = 5


def _precedence(node: Formula) -> int:
    return _PRECEDENCE.get(type(node), _ATOM_PRECEDENCE)


def _fmt(node: Formula, minimum: int) -> str:
    precedence = _precedence(node)
    if isinstance(node, Var):
        text = node.name
    elif isinstance(node, Const):
        text = "TRUE" if node.value is TriBool.TRUE else "FALSE"
    elif isinstance(node, Not):
        text = "NOT " + _fmt(node.child, precedence)
    elif isinstance(node, And):
        text = _fmt(node.left, precedence) + " AND " + _fmt(node.right, precedence + 1)
    elif isinstance(node, Or):
        text = _fmt(node.left, precedence) + " OR " + _fmt(node.right, precedence + 1)
    elif isinstance(node, Implies):
        # Right-associative: only a left operand of equal precedence needs parens.
        text = _fmt(node.left, precedence + 1) + " IMPLIES " + _fmt(node.right, precedence)
    else:
        raise TypeError(f"not a formula: {node!r}")
    if precedence < minimum:
        return "(" + text + ")"
    return text


def format_formula(formula: Formula) -> str:
    """Canonical text: uppercase keywords, single spaces, minimal parens."""
    return _fmt(formula, 0)
