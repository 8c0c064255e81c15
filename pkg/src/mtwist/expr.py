"""A small scalar expression language.

Grammar (``^`` binds tighter than unary minus, exponents are constants)::

    expr   := term (('+'|'-') term)*
    term   := unary (('*'|'/') unary)*
    unary  := ('-'|'+') unary | factor
    factor := base ('^' exponent)?
    base   := number | ident | func '(' expr ')' | '(' expr ')'

Functions: exp, log, sin, cos, sqrt.  The identifier ``pi`` is a constant.
Expressions evaluate on floats, numpy arrays, or :class:`~mtwist.jets.Jet`
objects, and can be differentiated symbolically.
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import DomainError, ExprSyntaxError, UnboundVariableError
from .jets import Jet, constant, variable

__all__ = [
    "Expr", "Num", "Var", "Neg", "Add", "Sub", "Mul", "Div", "Pow", "Call",
    "parse_expr", "as_expr", "substitute", "jet3", "jet3_fd", "FUNCTIONS",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")
CONSTANTS = {"pi": math.pi}


class Expr:
    """Base AST node."""

    def free_vars(self) -> set[str]:
        out: set[str] = set()
        self._collect(out)
        return out

    def _collect(self, out: set[str]) -> None:
        for c in self.children():
            c._collect(out)

    def children(self) -> tuple["Expr", ...]:
        return ()

    def evaluate(self, env: Mapping[str, object]):
        """Evaluate on floats, arrays or jets bound in ``env``."""
        raise NotImplementedError

    def diff(self, name: str) -> "Expr":
        raise NotImplementedError

    def jet(self, env: Mapping[str, object], wrt: Iterable[str], order: int = 3) -> Jet:
        wrt = list(wrt)
        k = len(wrt)
        jenv: dict[str, object] = {}
        for name, val in env.items():
            jenv[name] = constant(val, k, order)
        for i, name in enumerate(wrt):
            if name not in env:
                raise UnboundVariableError(name)
            jenv[name] = variable(env[name], i, k, order)
        out = self.evaluate(jenv)
        if not isinstance(out, Jet):
            out = constant(out, k, order)
        return out

    # operator sugar for building expressions programmatically
    def __add__(self, o): return Add(self, as_expr(o))
    def __radd__(self, o): return Add(as_expr(o), self)
    def __sub__(self, o): return Sub(self, as_expr(o))
    def __rsub__(self, o): return Sub(as_expr(o), self)
    def __mul__(self, o): return Mul(self, as_expr(o))
    def __rmul__(self, o): return Mul(as_expr(o), self)
    def __truediv__(self, o): return Div(self, as_expr(o))
    def __rtruediv__(self, o): return Div(as_expr(o), self)
    def __neg__(self): return Neg(self)
    def __pow__(self, p): return Pow(self, float(p))


def substitute(e: Expr, values: Mapping[str, float]) -> Expr:
    """Replace variables by numeric constants."""
    if isinstance(e, Var):
        return Num(float(values[e.name])) if e.name in values else e
    if isinstance(e, Num):
        return e
    if isinstance(e, Neg):
        return Neg(substitute(e.arg, values))
    if isinstance(e, _Bin):
        return type(e)(substitute(e.left, values), substitute(e.right, values))
    if isinstance(e, Pow):
        return Pow(substitute(e.base, values), e.exponent)
    if isinstance(e, Call):
        return Call(e.func, substitute(e.arg, values))
    raise TypeError(f"unknown node {e!r}")


def as_expr(x) -> Expr:
    if isinstance(x, Expr):
        return x
    if isinstance(x, str):
        return parse_expr(x)
    return Num(float(x))


def _fmt(x: float) -> str:
    s = repr(float(x))
    return f"({s})" if s.startswith("-") else s


@dataclass(frozen=True, eq=True)
class Num(Expr):
    value: float

    def evaluate(self, env):
        return self.value

    def diff(self, name):
        return ZERO

    def __str__(self):
        return _fmt(self.value)


@dataclass(frozen=True, eq=True)
class Var(Expr):
    name: str

    def _collect(self, out):
        out.add(self.name)

    def evaluate(self, env):
        try:
            return env[self.name]
        except KeyError:
            raise UnboundVariableError(self.name) from None

    def diff(self, name):
        return ONE if name == self.name else ZERO

    def __str__(self):
        return self.name


@dataclass(frozen=True, eq=True)
class Neg(Expr):
    arg: Expr

    def children(self):
        return (self.arg,)

    def evaluate(self, env):
        return -self.arg.evaluate(env)

    def diff(self, name):
        return _neg(self.arg.diff(name))

    def __str__(self):
        return f"(-{self.arg})"


@dataclass(frozen=True, eq=True)
class _Bin(Expr):
    left: Expr
    right: Expr

    def children(self):
        return (self.left, self.right)


class Add(_Bin):
    def evaluate(self, env):
        return self.left.evaluate(env) + self.right.evaluate(env)

    def diff(self, name):
        return _add(self.left.diff(name), self.right.diff(name))

    def __str__(self):
        return f"({self.left} + {self.right})"


class Sub(_Bin):
    def evaluate(self, env):
        return self.left.evaluate(env) - self.right.evaluate(env)

    def diff(self, name):
        return _sub(self.left.diff(name), self.right.diff(name))

    def __str__(self):
        return f"({self.left} - {self.right})"


class Mul(_Bin):
    def evaluate(self, env):
        return self.left.evaluate(env) * self.right.evaluate(env)

    def diff(self, name):
        return _add(_mul(self.left.diff(name), self.right),
                    _mul(self.left, self.right.diff(name)))

    def __str__(self):
        return f"({self.left} * {self.right})"


class Div(_Bin):
    def evaluate(self, env):
        num = self.left.evaluate(env)
        den = self.right.evaluate(env)
        if isinstance(den, Jet):
            return num * den.reciprocal()
        den = np.asarray(den, dtype=float)
        if np.any(den == 0):
            raise DomainError("division by zero")
        return num / den

    def diff(self, name):
        # (u/v)' = u'/v - u v'/v^2
        du, dv = self.left.diff(name), self.right.diff(name)
        first = _div(du, self.right)
        if dv == ZERO:
            return first
        return _sub(first, _div(_mul(self.left, dv), Pow(self.right, 2.0)))

    def __str__(self):
        return f"({self.left} / {self.right})"


@dataclass(frozen=True, eq=True)
class Pow(Expr):
    base: Expr
    exponent: float

    def children(self):
        return (self.base,)

    def evaluate(self, env):
        b = self.base.evaluate(env)
        p = self.exponent
        if isinstance(b, Jet):
            return b.power(p)
        b = np.asarray(b, dtype=float)
        if not float(p).is_integer() and np.any(b < 0):
            raise DomainError(f"non-integer power {p} of a negative value")
        if p < 0 and np.any(b == 0):
            raise DomainError("negative power of zero")
        return b ** p

    def diff(self, name):
        db = self.base.diff(name)
        if db == ZERO:
            return ZERO
        p = self.exponent
        if p == 1.0:
            return db
        inner = self.base if p == 2.0 else Pow(self.base, p - 1.0)
        return _mul(_mul(Num(p), inner), db)

    def __str__(self):
        return f"({self.base}^{_fmt(self.exponent)})"


_FUNC_IMPL = {
    "exp": np.exp,
    "log": np.log,
    "sin": np.sin,
    "cos": np.cos,
    "sqrt": np.sqrt,
}


@dataclass(frozen=True, eq=True)
class Call(Expr):
    func: str
    arg: Expr

    def children(self):
        return (self.arg,)

    def evaluate(self, env):
        a = self.arg.evaluate(env)
        if isinstance(a, Jet):
            return getattr(a, self.func)()
        a = np.asarray(a, dtype=float)
        if self.func == "log" and np.any(a <= 0):
            raise DomainError("log of a non-positive value")
        if self.func == "sqrt" and np.any(a < 0):
            raise DomainError("sqrt of a negative value")
        return _FUNC_IMPL[self.func](a)

    def diff(self, name):
        da = self.arg.diff(name)
        if da == ZERO:
            return ZERO
        a = self.arg
        outer = {
            "exp": lambda: self,
            "log": lambda: Pow(a, -1.0),
            "sin": lambda: Call("cos", a),
            "cos": lambda: Neg(Call("sin", a)),
            "sqrt": lambda: Div(Num(0.5), self),
        }[self.func]()
        return _mul(outer, da)

    def __str__(self):
        return f"{self.func}({self.arg})"


ZERO = Num(0.0)
ONE = Num(1.0)


# light simplification keeps symbolic derivatives from exploding
def _add(a, b):
    if a == ZERO:
        return b
    if b == ZERO:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value + b.value)
    return Add(a, b)


def _sub(a, b):
    if b == ZERO:
        return a
    if a == ZERO:
        return _neg(b)
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value - b.value)
    return Sub(a, b)


def _neg(a):
    if isinstance(a, Num):
        return Num(-a.value)
    if isinstance(a, Neg):
        return a.arg
    return Neg(a)


def _mul(a, b):
    if a == ZERO or b == ZERO:
        return ZERO
    if a == ONE:
        return b
    if b == ONE:
        return a
    if isinstance(a, Num) and isinstance(b, Num):
        return Num(a.value * b.value)
    return Mul(a, b)


def _div(a, b):
    if a == ZERO:
        return ZERO
    if b == ONE:
        return a
    return Div(a, b)


# ---------------------------------------------------------------------------
# tokenizer and parser

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)"
    r"|(?P<id>[A-Za-z_][A-Za-z_0-9]*)"
    r"|(?P<op>[-+*/^(),]))"
)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    toks = []
    pos = 0
    n = len(text)
    while pos < n:
        if text[pos].isspace():
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if not m or m.end() == pos:
            raise ExprSyntaxError(f"unexpected character {text[pos]!r}", pos)
        kind = m.lastgroup
        start = m.start(kind)
        toks.append((kind, m.group(kind), start))
        pos = m.end()
    toks.append(("eof", "", n))
    return toks


class _Parser:
    def __init__(self, text: str, scope):
        self.text = text
        self.toks = _tokenize(text)
        self.i = 0
        self.scope = None if scope is None else set(scope)

    def peek(self):
        return self.toks[self.i]

    def take(self):
        tok = self.toks[self.i]
        self.i += 1
        return tok

    def expect(self, value: str):
        tok = self.take()
        if tok[1] != value or tok[0] == "eof":
            what = "end of input" if tok[0] == "eof" else repr(tok[1])
            raise ExprSyntaxError(f"expected {value!r}, found {what}", tok[2])
        return tok

    def parse(self) -> Expr:
        node = self.expr()
        tok = self.peek()
        if tok[0] != "eof":
            raise ExprSyntaxError(f"unexpected token {tok[1]!r}", tok[2])
        return node

    def expr(self):
        node = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.term()
            node = Add(node, rhs) if op == "+" else Sub(node, rhs)
        return node

    def term(self):
        node = self.unary()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            op = self.take()[1]
            rhs = self.unary()
            node = Mul(node, rhs) if op == "*" else Div(node, rhs)
        return node

    def unary(self):
        tok = self.peek()
        if tok[0] == "op" and tok[1] in ("-", "+"):
            self.take()
            arg = self.unary()
            if tok[1] == "+":
                return arg
            return Num(-arg.value) if isinstance(arg, Num) else Neg(arg)
        return self.factor()

    def factor(self):
        node = self.base()
        if self.peek()[1] == "^" and self.peek()[0] == "op":
            self.take()
            node = Pow(node, self.exponent())
        return node

    def exponent(self) -> float:
        tok = self.peek()
        start = tok[2]
        sign = 1.0
        while tok[0] == "op" and tok[1] in ("-", "+"):
            self.take()
            if tok[1] == "-":
                sign = -sign
            tok = self.peek()
        if tok[0] == "num":
            self.take()
            return sign * float(tok[1])
        if tok[1] == "(":
            self.take()
            sub = self.expr()
            self.expect(")")
            if sub.free_vars():
                raise ExprSyntaxError("exponent must be constant", start)
            return sign * float(sub.evaluate({}))
        what = "end of input" if tok[0] == "eof" else repr(tok[1])
        raise ExprSyntaxError(f"expected constant exponent, found {what}", tok[2])

    def base(self):
        tok = self.take()
        kind, val, off = tok
        if kind == "num":
            return Num(float(val))
        if kind == "id":
            if val in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Call(val, arg)
            if val in CONSTANTS and (self.scope is None or val not in self.scope):
                return Num(CONSTANTS[val])
            if self.scope is not None and val not in self.scope:
                raise UnboundVariableError(val, off)
            return Var(val)
        if kind == "op" and val == "(":
            node = self.expr()
            self.expect(")")
            return node
        what = "end of input" if kind == "eof" else repr(val)
        raise ExprSyntaxError(f"unexpected {what}", off)


def parse_expr(text: str, scope: Iterable[str] | None = None) -> Expr:
    """Parse ``text``; with a ``scope`` every identifier must belong to it."""
    return _Parser(text, scope).parse()


# ---------------------------------------------------------------------------
# jets


def jet3(expr: Expr | str, point: Mapping[str, float], wrt: Iterable[str]) -> Jet:
    """Exact value and derivatives (orders 1 to 3) of ``expr`` at ``point``."""
    return as_expr(expr).jet(point, wrt, order=3)


def jet3_fd(expr: Expr | str, point: Mapping[str, float], wrt: Iterable[str]) -> Jet:
    """Central finite-difference counterpart of :func:`jet3`.

    The gradient uses h = 1e-5 (1 + |x|).  Higher orders use larger steps
    (1e-4 and 1e-3 relative) to balance truncation against cancellation.
    Only meant as an independent cross-check.
    """
    e = as_expr(expr)
    wrt = list(wrt)
    k = len(wrt)
    base = {n: float(v) for n, v in point.items()}
    x0 = np.array([base[n] for n in wrt])

    def f(x):
        env = dict(base)
        env.update(zip(wrt, x))
        return float(e.evaluate(env))

    def steps(rel):
        return rel * (1.0 + np.abs(x0))

    h1, h2, h3 = steps(1e-5), steps(1e-4), steps(1e-3)
    eye = np.eye(k)
    g = np.array([(f(x0 + h1[i] * eye[i]) - f(x0 - h1[i] * eye[i])) / (2 * h1[i]) for i in range(k)])

    def grad_at(x, h):
        return np.array([(f(x + h[i] * eye[i]) - f(x - h[i] * eye[i])) / (2 * h[i]) for i in range(k)])

    H = np.empty((k, k))
    for j in range(k):
        H[:, j] = (grad_at(x0 + h2[j] * eye[j], h2) - grad_at(x0 - h2[j] * eye[j], h2)) / (2 * h2[j])
    H = 0.5 * (H + H.T)

    def hess_at(x, h):
        out = np.empty((k, k))
        for j in range(k):
            out[:, j] = (grad_at(x + h[j] * eye[j], h) - grad_at(x - h[j] * eye[j], h)) / (2 * h[j])
        return 0.5 * (out + out.T)

    T = np.empty((k, k, k))
    for m in range(k):
        T[:, :, m] = (hess_at(x0 + h3[m] * eye[m], h3) - hess_at(x0 - h3[m] * eye[m], h3)) / (2 * h3[m])
    # symmetrize over all index permutations
    T = (T + T.transpose(0, 2, 1) + T.transpose(1, 0, 2) + T.transpose(1, 2, 0)
         + T.transpose(2, 0, 1) + T.transpose(2, 1, 0)) / 6.0
    return Jet(f(x0), g, H, T, order=3, k=k)
