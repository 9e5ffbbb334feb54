"""Parser, pretty-printer and evaluator for the ``.emb`` embedding language.

An embedding file looks like::

    embedding "unit-sphere" {
      chart theta in (0.1, 3.04), phi in (-3.1, 3.1);
      ambient signature (+, +, +);
      map sin(theta)*cos(phi); sin(theta)*sin(phi); cos(theta);
    }

Expressions use ``+ - * / ^``, unary minus, parentheses, numeric literals,
chart variables and the functions in :data:`FUNCTIONS`.  Precedence from
tightest to loosest: ``^`` (right-associative, constant exponent only), unary
minus, ``* /``, ``+ -``.  ``#`` starts a comment running to end of line.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Sequence, Union

import numpy as np

from .errors import (
    DimensionError,
    DomainError,
    DslSyntaxError,
    EvalError,
    UnknownIdentifier,
)

__all__ = [
    "Const", "Var", "Unary", "Binary", "Node", "Signature", "EmbeddingMap",
    "FUNCTIONS", "parse_embedding", "parse_expression", "eval_ast",
    "format_expr", "format_embedding", "ast_depth",
]

# Order-0 evaluation goes through the same numpy ufuncs in eval_ast and in the
# jet engine, so the two agree bit for bit.
FUNCTIONS = {
    "sin": np.sin,
    "cos": np.cos,
    "sinh": np.sinh,
    "cosh": np.cosh,
    "exp": np.exp,
    "log": np.log,
    "sqrt": np.sqrt,
}
KEYWORDS = {"embedding", "chart", "in", "ambient", "signature", "map"}
BINARY_OPS = {"+": "add", "-": "sub", "*": "mul", "/": "div", "^": "pow"}
_SYMBOL = {v: k for k, v in BINARY_OPS.items()}

MAX_DEPTH = 200     # AST depth; keeps every recursive walker well inside the stack
MAX_NESTING = 48    # parentheses / function calls / unary minus


@dataclass(frozen=True)
class Const:
    value: float
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Var:
    index: int
    name: str
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Unary:
    op: str             # "neg" or a FUNCTIONS key
    arg: "Node"
    pos: int = field(default=-1, compare=False, repr=False)


@dataclass(frozen=True)
class Binary:
    op: str             # add, sub, mul, div, pow
    left: "Node"
    right: "Node"       # a Const when op == "pow"
    pos: int = field(default=-1, compare=False, repr=False)


Node = Union[Const, Var, Unary, Binary]


def ast_depth(node: Node) -> int:
    if isinstance(node, (Const, Var)):
        return 1
    if isinstance(node, Unary):
        return 1 + ast_depth(node.arg)
    return 1 + max(ast_depth(node.left), ast_depth(node.right))


@dataclass(frozen=True)
class Signature:
    """Diagonal flat ambient metric, one sign per ambient axis."""

    signs: tuple

    def __post_init__(self):
        if len(self.signs) < 1:
            raise DimensionError("signature needs at least one sign")
        if any(s not in (1, -1) for s in self.signs):
            raise ValueError(f"signature entries must be +1 or -1, got {self.signs}")

    @property
    def D(self) -> int:
        return len(self.signs)

    @property
    def p(self) -> int:
        return sum(1 for s in self.signs if s > 0)

    @property
    def q(self) -> int:
        return sum(1 for s in self.signs if s < 0)

    @property
    def eta(self) -> np.ndarray:
        return np.array(self.signs, dtype=float)

    def __str__(self):
        return "(" + ", ".join("+" if s > 0 else "-" for s in self.signs) + ")"


@dataclass(frozen=True)
class EmbeddingMap:
    name: str
    variables: tuple
    domain: tuple           # ((lo, hi), ...) open intervals
    signature: Signature
    components: tuple       # D expression trees

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def D(self) -> int:
        return len(self.components)

    def contains(self, point) -> bool:
        return all(lo < x < hi for x, (lo, hi) in zip(point, self.domain))


# --------------------------------------------------------------------------
# Lexer

_TOKEN_RE = re.compile(r"""
    (?P<ws>[ \t\r\n]+|\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<string>"[^"\n]*")
  | (?P<punct>[{}(),;+\-*/^])
""", re.VERBOSE)


@dataclass
class _Token:
    kind: str       # number, ident, string, punct, eof
    text: str
    pos: int


def _describe(tok: _Token) -> str:
    return "end of input" if tok.kind == "eof" else repr(tok.text)


def _tokenize(source: str) -> list:
    tokens = []
    pos = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        if m is None:
            if source[pos] == '"':
                raise DslSyntaxError("unterminated string", pos, source)
            raise DslSyntaxError(f"unexpected character {source[pos]!r}", pos, source)
        kind = m.lastgroup
        if kind != "ws":
            tokens.append(_Token(kind, m.group(), pos))
        pos = m.end()
    tokens.append(_Token("eof", "", len(source)))
    return tokens


# --------------------------------------------------------------------------
# Parser

class _Parser:
    def __init__(self, source: str, variables: Sequence[str] = ()):
        self.source = source
        self.tokens = _tokenize(source)
        self.i = 0
        self.variables = {name: k for k, name in enumerate(variables)}
        self.nesting = 0

    # token helpers
    @property
    def tok(self) -> _Token:
        return self.tokens[self.i]

    def advance(self) -> _Token:
        tok = self.tokens[self.i]
        if tok.kind != "eof":
            self.i += 1
        return tok

    def error(self, expected: str, tok: _Token = None):
        tok = tok or self.tok
        return DslSyntaxError(f"expected {expected}, found {_describe(tok)}", tok.pos, self.source)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("punct", "ident") and self.tok.text == text

    def expect(self, text: str) -> _Token:
        if not self.at(text):
            raise self.error(repr(text))
        return self.advance()

    def expect_kind(self, kind: str, what: str) -> _Token:
        if self.tok.kind != kind:
            raise self.error(what)
        return self.advance()

    def enter(self, tok: _Token):
        self.nesting += 1
        if self.nesting > MAX_NESTING:
            raise DslSyntaxError("expression nested too deeply", tok.pos, self.source)

    def check_depth(self, node: Node, depth: int) -> int:
        if depth > MAX_DEPTH:
            raise DslSyntaxError("expression too deeply nested", node.pos, self.source)
        return depth

    # numbers
    def number(self, tok: _Token) -> float:
        value = float(tok.text)
        if not math.isfinite(value):
            raise DslSyntaxError(f"numeric literal {tok.text[:20]!r} overflows a double",
                                 tok.pos, self.source)
        return value

    def signed_real(self) -> float:
        sign = 1.0
        if self.at("-") or self.at("+"):
            sign = -1.0 if self.advance().text == "-" else 1.0
        tok = self.expect_kind("number", "a number")
        # inf is allowed through here so the domain check can report it
        return sign * float(tok.text)

    # grammar
    def embedding(self) -> EmbeddingMap:
        self.expect("embedding")
        name = self.expect_kind("string", "a quoted embedding name").text[1:-1]
        self.expect("{")
        self.expect("chart")
        names, domain = [], []
        while True:
            tok = self.tok
            if tok.kind != "ident" or tok.text in KEYWORDS or tok.text in FUNCTIONS:
                raise self.error("a chart variable name")
            if tok.text in names:
                raise DslSyntaxError(f"chart variable {tok.text!r} declared twice", tok.pos, self.source)
            self.advance()
            self.expect("in")
            open_tok = self.expect("(")
            lo = self.signed_real()
            self.expect(",")
            hi = self.signed_real()
            self.expect(")")
            if not (math.isfinite(lo) and math.isfinite(hi)):
                raise DomainError(f"interval for {tok.text!r} must be finite", open_tok.pos, self.source)
            if not lo < hi:
                raise DomainError(f"interval ({lo!r}, {hi!r}) for {tok.text!r} is empty",
                                  open_tok.pos, self.source)
            names.append(tok.text)
            domain.append((lo, hi))
            if self.at(","):
                self.advance()
                continue
            self.expect(";")
            break
        self.variables = {v: k for k, v in enumerate(names)}

        self.expect("ambient")
        self.expect("signature")
        self.expect("(")
        signs = []
        while True:
            tok = self.tok
            if not (self.at("+") or self.at("-")):
                raise self.error("'+' or '-'")
            self.advance()
            signs.append(1 if tok.text == "+" else -1)
            if self.at(","):
                self.advance()
                continue
            self.expect(")")
            break
        self.expect(";")

        map_tok = self.expect("map")
        components = [self.expression()[0]]
        self.expect(";")
        while not self.at("}"):
            if self.tok.kind == "eof":
                raise self.error("'}'")
            components.append(self.expression()[0])
            self.expect(";")
        self.expect("}")
        if self.tok.kind != "eof":
            raise self.error("end of input")

        n, D = len(names), len(signs)
        if len(components) != D:
            raise DimensionError(
                f"map has {len(components)} components but the signature has {D} entries",
                map_tok.pos, self.source)
        if D <= n:
            raise DimensionError(
                f"ambient dimension D={D} must exceed chart dimension n={n}",
                map_tok.pos, self.source)
        return EmbeddingMap(name, tuple(names), tuple(domain), Signature(tuple(signs)),
                            tuple(components))

    def expression(self):
        node, depth = self.term()
        while self.at("+") or self.at("-"):
            tok = self.advance()
            right, rdepth = self.term()
            node = Binary(BINARY_OPS[tok.text], node, right, tok.pos)
            depth = self.check_depth(node, 1 + max(depth, rdepth))
        return node, depth

    def term(self):
        node, depth = self.unary()
        while self.at("*") or self.at("/"):
            tok = self.advance()
            right, rdepth = self.unary()
            node = Binary(BINARY_OPS[tok.text], node, right, tok.pos)
            depth = self.check_depth(node, 1 + max(depth, rdepth))
        return node, depth

    def unary(self):
        if self.at("-"):
            tok = self.advance()
            self.enter(tok)
            arg, depth = self.unary()
            self.nesting -= 1
            node = Unary("neg", arg, tok.pos)
            return node, self.check_depth(node, depth + 1)
        return self.power()

    def power(self):
        base, depth = self.atom()
        if not self.at("^"):
            return base, depth
        tok = self.advance()
        exponent = self.exponent()
        node = Binary("pow", base, exponent, tok.pos)
        return node, self.check_depth(node, depth + 1)

    def exponent(self) -> Const:
        # a right-associative chain of constants, folded into one literal
        values, first = [], self.tok
        while True:
            paren = self.at("(")
            if paren:
                self.advance()
            sign = 1.0
            if self.at("-"):
                self.advance()
                sign = -1.0
            if self.tok.kind != "number":
                raise self.error("a numeric exponent")
            values.append(sign * self.number(self.advance()))
            if paren:
                self.expect(")")
            if not self.at("^"):
                break
            self.advance()
        value = values[-1]
        for base in reversed(values[:-1]):
            try:
                value = base ** value
            except (OverflowError, ZeroDivisionError):
                value = math.nan
            if isinstance(value, complex) or not math.isfinite(value):
                raise DslSyntaxError("constant exponent does not evaluate to a finite real",
                                     first.pos, self.source)
        return Const(float(value), first.pos)

    def atom(self):
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Const(self.number(tok), tok.pos), 1
        if self.at("("):
            self.advance()
            self.enter(tok)
            node = self.expression()
            self.nesting -= 1
            self.expect(")")
            return node
        if tok.kind == "ident":
            self.advance()
            if self.at("("):
                if tok.text not in FUNCTIONS:
                    raise UnknownIdentifier(tok.text, tok.pos, self.source)
                self.advance()
                self.enter(tok)
                arg, depth = self.expression()
                self.nesting -= 1
                self.expect(")")
                node = Unary(tok.text, arg, tok.pos)
                return node, self.check_depth(node, depth + 1)
            if tok.text in FUNCTIONS:
                raise self.error(f"'(' after {tok.text!r}")
            if tok.text not in self.variables:
                raise UnknownIdentifier(tok.text, tok.pos, self.source)
            return Var(self.variables[tok.text], tok.text, tok.pos), 1
        raise self.error("an expression")


def _decode(source) -> str:
    if isinstance(source, (bytes, bytearray, memoryview)):
        raw = bytes(source)
        try:
            return raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise DslSyntaxError(f"invalid UTF-8 byte at offset {exc.start}", exc.start) from None
    if not isinstance(source, str):
        raise TypeError(f"expected str or bytes, got {type(source).__name__}")
    return source


def parse_embedding(source) -> EmbeddingMap:
    """Parse and validate embedding source (``str`` or UTF-8 ``bytes``).

    Raises :class:`DslSyntaxError`, :class:`DimensionError`,
    :class:`UnknownIdentifier` or :class:`DomainError`, each carrying the
    offending position.
    """
    return _Parser(_decode(source)).embedding()


def parse_expression(text: str, variables: Sequence[str]) -> Node:
    """Parse a single expression over the given chart variable names."""
    parser = _Parser(_decode(text), variables)
    node, _ = parser.expression()
    if parser.tok.kind != "eof":
        raise parser.error("end of expression")
    return node


# --------------------------------------------------------------------------
# Evaluation

def check_pow(base, exponent: float, pos=None):
    """Raise EvalError when ``base ** exponent`` leaves the real domain."""
    base = np.asarray(base)
    if float(exponent).is_integer():
        if exponent < 0 and np.any(base == 0):
            raise EvalError("zero raised to a negative power", pos)
    elif np.any(base < 0) or (exponent < 0 and np.any(base == 0)):
        raise EvalError("non-integer power of a negative number", pos)


def _check_positive(op, value, pos):
    if np.any(np.asarray(value) <= 0):
        raise EvalError(f"{op} of a non-positive number", pos)


def eval_ast(node: Node, values: Sequence[float]) -> float:
    """Evaluate ``node`` in double precision at chart coordinates ``values``."""
    if isinstance(node, Const):
        return node.value
    if isinstance(node, Var):
        return float(values[node.index])
    if isinstance(node, Unary):
        x = eval_ast(node.arg, values)
        if node.op == "neg":
            return -x
        if node.op in ("log", "sqrt"):
            _check_positive(node.op, x, node.pos)
        return float(FUNCTIONS[node.op](x))
    a = eval_ast(node.left, values)
    b = eval_ast(node.right, values)
    if node.op == "add":
        return a + b
    if node.op == "sub":
        return a - b
    if node.op == "mul":
        return a * b
    if node.op == "div":
        if b == 0:
            raise EvalError("division by zero", node.pos)
        return a / b
    check_pow(a, b, node.pos)
    return float(np.power(a, b))


# --------------------------------------------------------------------------
# Pretty-printing

def _fmt_real(x: float) -> str:
    return repr(float(x))


def format_expr(node: Node) -> str:
    if isinstance(node, Const):
        return _fmt_real(node.value) if node.value >= 0 else f"({_fmt_real(node.value)})"
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Unary):
        if node.op == "neg":
            return f"(-{format_expr(node.arg)})"
        return f"{node.op}({format_expr(node.arg)})"
    return f"({format_expr(node.left)} {_SYMBOL[node.op]} {format_expr(node.right)})"


def format_embedding(emb: EmbeddingMap) -> str:
    chart = ", ".join(f"{v} in ({_fmt_real(lo)}, {_fmt_real(hi)})"
                      for v, (lo, hi) in zip(emb.variables, emb.domain))
    sig = ", ".join("+" if s > 0 else "-" for s in emb.signature.signs)
    comps = ";\n      ".join(format_expr(c) for c in emb.components)
    return (f'embedding "{emb.name}" {{\n'
            f"  chart {chart};\n"
            f"  ambient signature ({sig});\n"
            f"  map {comps};\n"
            f"}}\n")
