"""Expression language for model entries.

Grammar (EBNF)::

    expr    = term { ("+" | "-") term } ;
    term    = unary { ("*" | "/") unary } ;
    unary   = "-" unary | "+" unary | power ;
    power   = atom { "^" exponent } ;     (* left associative *)
    exponent= ["-"] ( number | "(" constexpr ")" ) ;
    atom    = number | name | name "(" expr ")" | "(" expr ")" ;
    name    = letter { letter | digit | "_" } ;

``#`` starts a comment running to the end of the line.  Exponents must be
numeric constants (``x^2``, ``x^(1/3)``, ``x^-1``).  Functions:
``sin cos exp log sqrt``.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

from .errors import DomainError, SingulodeError
from .taylor import Jet2, jet_variable

FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")


@dataclass(frozen=True)
class SourceSpan:
    start: int
    end: int
    line: int = 1
    column: int = 1

    def shifted(self, line: int, col_offset: int) -> "SourceSpan":
        return SourceSpan(self.start, self.end, line, self.column + col_offset)


class ParseError(SingulodeError):
    def __init__(self, message: str, span: SourceSpan):
        self.message = message
        self.span = span
        super().__init__(f"{message} at line {span.line}, column {span.column}")


class UnknownIdentifier(ParseError):
    pass


# -- AST -------------------------------------------------------------------

class Expr:
    __slots__ = ()

    def __str__(self):
        return to_string(self)


@dataclass(frozen=True)
class Constant(Expr):
    value: float


@dataclass(frozen=True)
class Var(Expr):
    name: str


@dataclass(frozen=True)
class Param(Expr):
    name: str


@dataclass(frozen=True)
class Unary(Expr):
    op: str  # only "-"
    child: Expr


@dataclass(frozen=True)
class Binary(Expr):
    op: str  # + - * / ^
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Call(Expr):
    fn: str
    child: Expr


ZERO = Constant(0.0)
ONE = Constant(1.0)


# -- lexer -----------------------------------------------------------------

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>\#[^\n]*)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)
  | (?P<name>[A-Za-z][A-Za-z0-9_]*)
  | (?P<op>[-+*/^(),])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str  # number, name, op, end
    text: str
    span: SourceSpan


def _span(text: str, start: int, end: int) -> SourceSpan:
    line = text.count("\n", 0, start) + 1
    col = start - (text.rfind("\n", 0, start) + 1) + 1
    return SourceSpan(start, end, line, col)


def tokenize(text: str) -> list[Token]:
    pos = 0
    out = []
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", _span(text, pos, pos + 1))
        kind = m.lastgroup
        if kind not in ("ws", "comment"):
            out.append(Token(kind, m.group(), _span(text, m.start(), m.end())))
        pos = m.end()
    out.append(Token("end", "", _span(text, len(text), len(text))))
    return out


# -- parser ----------------------------------------------------------------

class _Parser:
    def __init__(self, text, variables, params):
        self.text = text
        self.toks = tokenize(text)
        self.i = 0
        self.variables = set(variables) | {"t"}
        self.params = set(params)

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def advance(self) -> Token:
        t = self.toks[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if self.tok.text != text or self.tok.kind == "end":
            raise ParseError(f"expected {text!r}, found {self._describe(self.tok)}", self.tok.span)
        return self.advance()

    @staticmethod
    def _describe(tok: Token) -> str:
        return "end of input" if tok.kind == "end" else repr(tok.text)

    def parse(self) -> Expr:
        if self.tok.kind == "end":
            raise ParseError("empty expression", self.tok.span)
        e = self.expr()
        if self.tok.kind != "end":
            raise ParseError(f"expected operator or end of input, found {self._describe(self.tok)}", self.tok.span)
        return e

    def expr(self) -> Expr:
        left = self.term()
        while self.tok.kind == "op" and self.tok.text in "+-":
            op = self.advance().text
            left = Binary(op, left, self.term())
        return left

    def term(self) -> Expr:
        left = self.unary()
        while self.tok.kind == "op" and self.tok.text in "*/":
            op = self.advance().text
            left = Binary(op, left, self.unary())
        return left

    def unary(self) -> Expr:
        if self.tok.kind == "op" and self.tok.text == "-":
            self.advance()
            child = self.unary()
            if isinstance(child, Constant):
                return Constant(-child.value)
            return Unary("-", child)
        if self.tok.kind == "op" and self.tok.text == "+":
            self.advance()
            return self.unary()
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        while self.tok.kind == "op" and self.tok.text == "^":
            self.advance()
            start = self.tok.span
            try:
                value = self.exponent()
            except _NotConstant:
                raise ParseError("exponent must be constant", start) from None
            base = Binary("^", base, Constant(value))
        return base

    def exponent(self) -> float:
        # a signed numeric literal or a parenthesised constant expression
        if self.tok.kind == "op" and self.tok.text in "-+":
            sign = -1.0 if self.advance().text == "-" else 1.0
            return sign * self.exponent()
        if self.tok.kind == "number":
            return float(self.advance().text)
        if self.tok.kind == "op" and self.tok.text == "(":
            self.advance()
            inner = self.expr()
            self.expect(")")
            return _fold_constant(inner)
        if self.tok.kind == "name":
            raise _NotConstant
        raise ParseError(f"expected exponent, found {self._describe(self.tok)}", self.tok.span)

    def atom(self) -> Expr:
        tok = self.tok
        if tok.kind == "number":
            self.advance()
            return Constant(float(tok.text))
        if tok.kind == "name":
            self.advance()
            if tok.text in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(tok.text, arg)
            if self.tok.kind == "op" and self.tok.text == "(":
                raise ParseError(f"unknown function {tok.text!r}", tok.span)
            if tok.text in self.variables:
                return Var(tok.text)
            if tok.text in self.params:
                return Param(tok.text)
            raise UnknownIdentifier(f"undeclared name {tok.text!r}", tok.span)
        if tok.kind == "op" and tok.text == "(":
            self.advance()
            e = self.expr()
            self.expect(")")
            return e
        raise ParseError(f"expected operand, found {self._describe(tok)}", tok.span)


class _NotConstant(Exception):
    pass


def _fold_constant(e: Expr) -> float:
    if isinstance(e, Constant):
        return e.value
    if isinstance(e, Unary):
        return -_fold_constant(e.child)
    if isinstance(e, Binary) and e.op in "+-*/^":
        a, b = _fold_constant(e.left), _fold_constant(e.right)
        return {"+": a + b, "-": a - b, "*": a * b, "/": a / b if b else math.nan, "^": a**b}[e.op]
    raise _NotConstant


def parse(text: str, declared_vars: Sequence[str] = (), declared_params: Sequence[str] = ()) -> Expr:
    """Parse ``text``; ``t`` is always a valid variable."""
    return _Parser(text, declared_vars, declared_params).parse()


# -- printing ---------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4}


def _num(v: float) -> str:
    if v.is_integer() and abs(v) < 1e16:
        return str(int(v))
    return repr(v)


def to_string(e: Expr) -> str:
    """Render with minimal parentheses; the output reparses to the same tree."""

    def prec(x):
        if isinstance(x, Binary):
            return _PREC[x.op]
        if isinstance(x, Unary):
            return _PREC["neg"]
        if isinstance(x, Constant) and x.value < 0:
            return 0
        return 5

    def wrap(x, need):
        s = to_string(x)
        return f"({s})" if prec(x) < need else s

    if isinstance(e, Constant):
        return _num(e.value) if e.value >= 0 else f"-{_num(-e.value)}"
    if isinstance(e, (Var, Param)):
        return e.name
    if isinstance(e, Call):
        return f"{e.fn}({to_string(e.child)})"
    if isinstance(e, Unary):
        return "-" + wrap(e.child, _PREC["neg"])
    if e.op == "^":
        v = e.right.value
        exp_s = _num(v) if v >= 0 else f"(-{_num(-v)})"
        return f"{wrap(e.left, 5)}^{exp_s}"
    p = _PREC[e.op]
    # left-associative: right operand needs strictly higher precedence
    return f"{wrap(e.left, p)} {e.op} {wrap(e.right, p + 1)}"


# -- evaluation -------------------------------------------------------------

def _real_fn(name: str, v: float) -> float:
    if name == "log" and v <= 0.0:
        raise DomainError("log", v)
    if name == "sqrt" and v < 0.0:
        raise DomainError("sqrt", v)
    if not math.isfinite(v):
        # propagate overflow so callers can report a non-finite state
        return {"exp": math.exp, "log": math.log, "sqrt": math.sqrt}.get(name, lambda _: math.nan)(v)
    try:
        return getattr(math, name)(v)
    except OverflowError:
        return math.inf


def apply_function(name: str, v):
    if isinstance(v, Jet2):
        return getattr(v, name)()
    return _real_fn(name, v)


def _real_pow(v, p):
    if isinstance(v, Jet2):
        return v.pow_const(p)
    if v < 0 and not float(p).is_integer():
        raise DomainError(f"pow(., {p})", v)
    if v == 0 and p < 0:
        raise DomainError(f"pow(., {p})", v)
    try:
        return v**p
    except OverflowError:
        return -math.inf if v < 0 and float(p) % 2 == 1 else math.inf


def _divide(a, b):
    if isinstance(a, Jet2) or isinstance(b, Jet2):
        return a / b
    if b == 0:
        raise DomainError("division", b)
    return a / b


def compile_expr(e: Expr, names: Sequence[str], params: Mapping[str, float]) -> Callable:
    """Build a closure ``f(values)`` where ``values[i]`` binds ``names[i]``.

    Values may be floats or :class:`Jet2`; parameters are baked in.
    """
    index = {n: i for i, n in enumerate(names)}

    def build(x: Expr):
        if isinstance(x, Constant):
            c = x.value
            return lambda v: c
        if isinstance(x, Var):
            try:
                i = index[x.name]
            except KeyError:
                raise UnknownIdentifier(f"unbound variable {x.name!r}", SourceSpan(0, 0)) from None
            return lambda v: v[i]
        if isinstance(x, Param):
            try:
                c = float(params[x.name])
            except KeyError:
                raise UnknownIdentifier(f"unbound parameter {x.name!r}", SourceSpan(0, 0)) from None
            return lambda v: c
        if isinstance(x, Unary):
            f = build(x.child)
            return lambda v: -f(v)
        if isinstance(x, Call):
            f = build(x.child)
            fn = x.fn
            return lambda v: apply_function(fn, f(v))
        l, r = build(x.left), build(x.right)
        if x.op == "+":
            return lambda v: l(v) + r(v)
        if x.op == "-":
            return lambda v: l(v) - r(v)
        if x.op == "*":
            return lambda v: l(v) * r(v)
        if x.op == "/":
            return lambda v: _divide(l(v), r(v))
        p = x.right.value
        return lambda v: _real_pow(l(v), p)

    return build(e)


def eval_real(e: Expr, point: Mapping[str, float], params: Mapping[str, float] | None = None) -> float:
    names = list(point)
    return float(compile_expr(e, names, params or {})([float(point[n]) for n in names]))


def eval_jet(e: Expr, point: Mapping[str, float], params: Mapping[str, float] | None, var_order: Sequence[str]) -> Jet2:
    m = len(var_order)
    seeds = [jet_variable(i, point[n], m) for i, n in enumerate(var_order)]
    out = compile_expr(e, var_order, params or {})(seeds)
    if not isinstance(out, Jet2):
        out = Jet2.constant(out, m)
    return out


# -- symbolic differentiation ------------------------------------------------

def _is_const(e, v=None):
    return isinstance(e, Constant) and (v is None or e.value == v)


def add(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Constant(a.value + b.value)
    if _is_const(a, 0.0):
        return b
    if _is_const(b, 0.0):
        return a
    return Binary("+", a, b)


def sub(a: Expr, b: Expr) -> Expr:
    if _is_const(a) and _is_const(b):
        return Constant(a.value - b.value)
    if _is_const(b, 0.0):
        return a
    if _is_const(a, 0.0):
        return neg(b)
    return Binary("-", a, b)


def neg(a: Expr) -> Expr:
    if _is_const(a):
        return Constant(-a.value)
    if isinstance(a, Unary):
        return a.child
    return Unary("-", a)


def _split_const(e: Expr) -> tuple[float, Expr | None]:
    """``e == c * rest`` with ``rest`` free of a leading numeric factor."""
    if isinstance(e, Constant):
        return e.value, None
    if isinstance(e, Unary):
        c, r = _split_const(e.child)
        return -c, r
    if isinstance(e, Binary) and e.op == "*":
        if isinstance(e.left, Constant):
            c, r = _split_const(e.right)
            return e.left.value * c, r
        if isinstance(e.right, Constant):
            c, r = _split_const(e.left)
            return e.right.value * c, r
    if isinstance(e, Binary) and e.op == "/" and isinstance(e.right, Constant) and e.right.value != 0.0:
        c, r = _split_const(e.left)
        return c / e.right.value, r
    return 1.0, e


def _scaled(c: float, rest: Expr | None) -> Expr:
    if rest is None or c == 0.0:
        return Constant(c)
    if c == 1.0:
        return rest
    if c == -1.0:
        return neg(rest)
    return Binary("*", Constant(c), rest)


def mul(a: Expr, b: Expr) -> Expr:
    ca, ra = _split_const(a)
    cb, rb = _split_const(b)
    if ra is None or rb is None:
        return _scaled(ca * cb, ra if rb is None else rb)
    return _scaled(ca * cb, Binary("*", ra, rb))


def div(a: Expr, b: Expr) -> Expr:
    if _is_const(a, 0.0):
        return ZERO
    ca, ra = _split_const(a)
    cb, rb = _split_const(b)
    if cb == 0.0:
        return Binary("/", a, b)
    if rb is None:
        return _scaled(ca / cb, ra)
    if ra is None:
        return _scaled(ca / cb, Binary("/", ONE, rb)) if ca / cb != 1.0 else Binary("/", ONE, rb)
    return _scaled(ca / cb, Binary("/", ra, rb))


def power(a: Expr, p: float) -> Expr:
    if p == 0.0:
        return ONE
    if p == 1.0:
        return a
    if _is_const(a) and (a.value > 0 or float(p).is_integer()):
        return Constant(a.value**p)
    return Binary("^", a, Constant(p))


def diff(e: Expr, wrt: str) -> Expr:
    """Exact derivative with light simplification."""
    if isinstance(e, (Constant, Param)):
        return ZERO
    if isinstance(e, Var):
        return ONE if e.name == wrt else ZERO
    if isinstance(e, Unary):
        return neg(diff(e.child, wrt))
    if isinstance(e, Call):
        u = e.child
        du = diff(u, wrt)
        if _is_const(du, 0.0):
            return ZERO
        outer = {
            "sin": lambda: Call("cos", u),
            "cos": lambda: neg(Call("sin", u)),
            "exp": lambda: e,
            "log": lambda: div(ONE, u),
            "sqrt": lambda: div(ONE, mul(Constant(2.0), e)),
        }[e.fn]()
        return mul(outer, du)
    a, b = e.left, e.right
    if e.op == "+":
        return add(diff(a, wrt), diff(b, wrt))
    if e.op == "-":
        return sub(diff(a, wrt), diff(b, wrt))
    if e.op == "*":
        return add(mul(diff(a, wrt), b), mul(a, diff(b, wrt)))
    if e.op == "/":
        da, db = diff(a, wrt), diff(b, wrt)
        if _is_const(db, 0.0):
            return div(da, b)
        return div(sub(mul(da, b), mul(a, db)), power(b, 2.0))
    p = b.value
    da = diff(a, wrt)
    return mul(mul(Constant(p), power(a, p - 1.0)), da)


def substitute(e: Expr, mapping: Mapping[str, Expr]) -> Expr:
    """Replace variables by expressions (no simplification)."""
    if isinstance(e, Var):
        return mapping.get(e.name, e)
    if isinstance(e, (Constant, Param)):
        return e
    if isinstance(e, Unary):
        return Unary(e.op, substitute(e.child, mapping))
    if isinstance(e, Call):
        return Call(e.fn, substitute(e.child, mapping))
    if e.op == "^":
        return Binary("^", substitute(e.left, mapping), e.right)
    return Binary(e.op, substitute(e.left, mapping), substitute(e.right, mapping))


def names_in(e: Expr) -> set[str]:
    if isinstance(e, (Var, Param)):
        return {e.name}
    if isinstance(e, Constant):
        return set()
    if isinstance(e, (Unary, Call)):
        return names_in(e.child)
    return names_in(e.left) | names_in(e.right)
