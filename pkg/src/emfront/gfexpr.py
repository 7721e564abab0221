"""Generating-function DSL: lexer, parser, evaluator.

Expressions are built from real literals, the chart variables ``x1..xn`` /
``p1..pn``, the binary operators ``+ - * / ^`` (with ``^`` right-associative
and binding tighter than unary minus), unary minus, parentheses, and the
calls ``exp log sin cos sqrt``.

A :class:`GeneratingFunction` couples an expression with the dimension n and
an index partition: indices in I contribute an ``x`` chart variable, the
remaining indices J contribute a ``p`` chart variable.  Chart coordinates are
ordered x_I first (ascending index), then p_J (ascending index).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import jets
from .jets import Jet

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")


class DslError(ValueError):
    def __init__(self, message: str, pos: int | None = None):
        self.pos = pos
        if pos is not None:
            message = f"{message} (at position {pos})"
        super().__init__(message)


class LexError(DslError):
    pass


class ParseError(DslError):
    pass


class PartitionError(DslError):
    pass


class EvalDomainError(DslError):
    """A sub-expression left the real domain during evaluation."""


# -- AST ---------------------------------------------------------------------


@dataclass(frozen=True)
class Num:
    value: float
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Var:
    kind: str  # 'x' or 'p'
    index: int  # 1-based
    pos: int = field(default=0, compare=False)

    @property
    def name(self) -> str:
        return f"{self.kind}{self.index}"


@dataclass(frozen=True)
class Neg:
    arg: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class BinOp:
    op: str  # + - * / ^
    left: "Expr"
    right: "Expr"
    pos: int = field(default=0, compare=False)


@dataclass(frozen=True)
class Call:
    fn: str
    arg: "Expr"
    pos: int = field(default=0, compare=False)


Expr = Num | Var | Neg | BinOp | Call


# -- lexer -------------------------------------------------------------------

_OPS = set("+-*/^()")


def _lex(source: str):
    tokens = []
    i, n = 0, len(source)
    while i < n:
        ch = source[i]
        if ch.isspace():
            i += 1
            continue
        if ch in _OPS:
            tokens.append((ch, ch, i))
            i += 1
            continue
        if ch.isdigit() or ch == ".":
            j = i
            while j < n and (source[j].isdigit() or source[j] == "."):
                j += 1
            if j < n and source[j] in "eE":
                k = j + 1
                if k < n and source[k] in "+-":
                    k += 1
                if k < n and source[k].isdigit():
                    j = k
                    while j < n and source[j].isdigit():
                        j += 1
            text = source[i:j]
            try:
                value = float(text)
            except ValueError:
                raise LexError(f"malformed number {text!r}", i) from None
            tokens.append(("num", value, i))
            i = j
            continue
        if ch.isalpha():
            j = i
            while j < n and (source[j].isalnum() or source[j] == "_"):
                j += 1
            tokens.append(("name", source[i:j], i))
            i = j
            continue
        raise LexError(f"unexpected character {ch!r}", i)
    tokens.append(("end", None, n))
    return tokens


# -- parser ------------------------------------------------------------------


class _Parser:
    def __init__(self, tokens):
        self.tokens = tokens
        self.k = 0

    def peek(self):
        return self.tokens[self.k]

    def next(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def expect(self, kind):
        tok = self.next()
        if tok[0] != kind:
            raise ParseError(f"expected {kind!r}, found {tok[1]!r}", tok[2])
        return tok

    def expression(self) -> Expr:
        node = self.term()
        while self.peek()[0] in ("+", "-"):
            op, _, pos = self.next()
            node = BinOp(op, node, self.term(), pos)
        return node

    def term(self) -> Expr:
        node = self.unary()
        while self.peek()[0] in ("*", "/"):
            op, _, pos = self.next()
            node = BinOp(op, node, self.unary(), pos)
        return node

    def unary(self) -> Expr:
        if self.peek()[0] == "-":
            _, _, pos = self.next()
            return Neg(self.unary(), pos)
        return self.power()

    def power(self) -> Expr:
        base = self.atom()
        if self.peek()[0] == "^":
            _, _, pos = self.next()
            # right-associative; exponent may carry a unary minus
            return BinOp("^", base, self.unary(), pos)
        return base

    def atom(self) -> Expr:
        kind, value, pos = self.next()
        if kind == "num":
            return Num(value, pos)
        if kind == "(":
            node = self.expression()
            tok = self.next()
            if tok[0] != ")":
                raise ParseError("expected ')'", tok[2])
            return node
        if kind == "name":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expression()
                tok = self.next()
                if tok[0] != ")":
                    raise ParseError("expected ')' closing call", tok[2])
                return Call(value, arg, pos)
            if value and value[0] in ("x", "p") and value[1:].isdigit():
                return Var(value[0], int(value[1:]), pos)
            raise ParseError(f"unknown identifier {value!r}", pos)
        raise ParseError(f"unexpected token {value!r}", pos)


# -- generating function -------------------------------------------------------


@dataclass(frozen=True)
class GeneratingFunction:
    """Expression plus index partition; the source of all chart geometry."""

    n: int
    I: frozenset[int]
    expr: Expr

    @property
    def J(self) -> frozenset[int]:
        return frozenset(range(1, self.n + 1)) - self.I

    @property
    def chart_vars(self) -> tuple[tuple[str, int], ...]:
        """Chart coordinates as (kind, index) pairs: x_I then p_J, ascending."""
        return tuple([("x", i) for i in sorted(self.I)]
                     + [("p", j) for j in sorted(self.J)])

    @property
    def chart_names(self) -> tuple[str, ...]:
        return tuple(f"{k}{i}" for k, i in self.chart_vars)

    def chart_position(self, kind: str, index: int) -> int:
        return self.chart_vars.index((kind, index))

    @property
    def num_I(self) -> int:
        return len(self.I)

    def __str__(self):
        return to_source(self.expr)


def _check_partition(expr: Expr, n: int, I: frozenset[int]):
    if isinstance(expr, Var):
        if not 1 <= expr.index <= n:
            raise PartitionError(f"variable {expr.name} out of range for n={n}",
                                 expr.pos)
        in_I = expr.index in I
        if expr.kind == "x" and not in_I:
            raise PartitionError(
                f"variable {expr.name} not allowed: index {expr.index} is not in I",
                expr.pos)
        if expr.kind == "p" and in_I:
            raise PartitionError(
                f"variable {expr.name} not allowed: index {expr.index} is in I",
                expr.pos)
    elif isinstance(expr, Neg):
        _check_partition(expr.arg, n, I)
    elif isinstance(expr, BinOp):
        _check_partition(expr.left, n, I)
        _check_partition(expr.right, n, I)
    elif isinstance(expr, Call):
        _check_partition(expr.arg, n, I)


def parse(source: str, n: int, I) -> GeneratingFunction:
    """Parse a DSL source string into a GeneratingFunction."""
    if n < 1:
        raise DslError(f"dimension n must be >= 1, got {n}")
    I = frozenset(int(i) for i in I)
    if not I <= set(range(1, n + 1)):
        raise DslError(f"I={sorted(I)} is not a subset of 1..{n}")
    tokens = _lex(source)
    parser = _Parser(tokens)
    expr = parser.expression()
    tok = parser.next()
    if tok[0] != "end":
        raise ParseError(f"unexpected trailing input {tok[1]!r}", tok[2])
    _check_partition(expr, n, I)
    return GeneratingFunction(n=n, I=I, expr=expr)


# -- pretty printer ------------------------------------------------------------

_PREC = {"+": 1, "-": 1, "*": 2, "/": 2, "neg": 3, "^": 4, "atom": 5}


def _prec(expr: Expr) -> int:
    if isinstance(expr, BinOp):
        return _PREC[expr.op]
    if isinstance(expr, Neg):
        return _PREC["neg"]
    return _PREC["atom"]


def to_source(expr: Expr) -> str:
    """Render an AST back to DSL source (parses back to an equal AST)."""
    if isinstance(expr, Num):
        return repr(expr.value) if expr.value >= 0 else f"({expr.value!r})"
    if isinstance(expr, Var):
        return expr.name
    if isinstance(expr, Neg):
        inner = to_source(expr.arg)
        if _prec(expr.arg) < _PREC["neg"]:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(expr, Call):
        return f"{expr.fn}({to_source(expr.arg)})"
    if isinstance(expr, BinOp):
        lp, rp = _prec(expr.left), _prec(expr.right)
        mine = _PREC[expr.op]
        left = to_source(expr.left)
        right = to_source(expr.right)
        if lp < mine or (expr.op == "^" and lp <= mine):
            left = f"({left})"
        # + - * / parse left-associative, so right children of equal
        # precedence need parens to keep the tree shape; ^ is right-assoc
        if rp < mine or (expr.op != "^" and rp == mine):
            right = f"({right})"
        return f"{left} {expr.op} {right}"
    raise TypeError(f"not an expression node: {expr!r}")


# -- evaluation ----------------------------------------------------------------


def _contains_var(expr: Expr) -> bool:
    if isinstance(expr, Var):
        return True
    if isinstance(expr, Neg):
        return _contains_var(expr.arg)
    if isinstance(expr, BinOp):
        return _contains_var(expr.left) or _contains_var(expr.right)
    if isinstance(expr, Call):
        return _contains_var(expr.arg)
    return False


def _const_value(expr: Expr) -> float:
    """Evaluate a variable-free subtree to a float."""
    return _eval(expr, {}, _RealOps)


class _RealOps:
    @staticmethod
    def num(value, template):
        return float(value)

    @staticmethod
    def call(fn, a, pos):
        v = float(a)
        if fn == "log":
            if v <= 0.0:
                raise EvalDomainError(f"log of non-positive value {v!r}", pos)
            return math.log(v)
        if fn == "sqrt":
            if v <= 0.0:
                raise EvalDomainError(f"sqrt of non-positive value {v!r}", pos)
            return math.sqrt(v)
        return getattr(math, fn)(v)

    @staticmethod
    def div(a, b, pos):
        if float(b) == 0.0:
            raise EvalDomainError("division by zero", pos)
        return a / b

    @staticmethod
    def int_pow(a, k, pos):
        if float(a) == 0.0 and k < 0:
            raise EvalDomainError("zero raised to a negative power", pos)
        return float(a) ** k

    @staticmethod
    def real_pow(a, r, pos):
        if float(a) <= 0.0:
            raise EvalDomainError(
                f"non-integer power of non-positive base {float(a)!r}", pos)
        return float(a) ** r


class _JetOps:
    @staticmethod
    def num(value, template):
        return Jet.constant(float(value), template.m, template.order)

    @staticmethod
    def call(fn, a, pos):
        try:
            return jets.ELEMENTARY[fn](a)
        except jets.JetDomainError as err:
            raise EvalDomainError(str(err), pos) from None

    @staticmethod
    def div(a, b, pos):
        if isinstance(b, Jet):
            if b.value == 0.0:
                raise EvalDomainError("division by zero", pos)
            return a / b
        if float(b) == 0.0:
            raise EvalDomainError("division by zero", pos)
        return a / float(b)

    @staticmethod
    def int_pow(a, k, pos):
        if a.value == 0.0 and k < 0:
            raise EvalDomainError("zero raised to a negative power", pos)
        return a**k

    @staticmethod
    def real_pow(a, r, pos):
        try:
            return jets.pow_real(a, r)
        except jets.JetDomainError as err:
            raise EvalDomainError(str(err), pos) from None


def _eval(expr: Expr, env: dict, ops, template=None):
    if isinstance(expr, Num):
        return ops.num(expr.value, template)
    if isinstance(expr, Var):
        try:
            return env[(expr.kind, expr.index)]
        except KeyError:
            raise DslError(f"unbound variable {expr.name}", expr.pos) from None
    if isinstance(expr, Neg):
        return -_eval(expr.arg, env, ops, template)
    if isinstance(expr, Call):
        return ops.call(expr.fn, _eval(expr.arg, env, ops, template), expr.pos)
    if isinstance(expr, BinOp):
        if expr.op == "^":
            if _contains_var(expr.right):
                raise EvalDomainError("exponent must be a constant expression",
                                      expr.pos)
            r = _const_value(expr.right)
            base = _eval(expr.left, env, ops, template)
            if abs(r - round(r)) <= 1e-9 and abs(r) < 2**31:
                return ops.int_pow(base, int(round(r)), expr.pos)
            return ops.real_pow(base, r, expr.pos)
        if expr.op == "/" and not _contains_var(expr.right):
            # constant divisor: scalar division, no series reciprocal
            return ops.div(_eval(expr.left, env, ops, template),
                           _const_value(expr.right), expr.pos)
        a = _eval(expr.left, env, ops, template)
        b = _eval(expr.right, env, ops, template)
        if expr.op == "+":
            return a + b
        if expr.op == "-":
            return a - b
        if expr.op == "*":
            return a * b
        if expr.op == "/":
            return ops.div(a, b, expr.pos)
    raise TypeError(f"not an expression node: {expr!r}")


def _chart_array(g: GeneratingFunction, q) -> np.ndarray:
    q = np.asarray(q, dtype=float)
    if q.shape != (g.n,):
        raise DslError(f"chart point must have length {g.n}, got shape {q.shape}")
    return q


def eval_real(g: GeneratingFunction, q) -> float:
    """Value of g at the chart point q."""
    q = _chart_array(g, q)
    env = {kv: float(q[a]) for a, kv in enumerate(g.chart_vars)}
    return float(_eval(g.expr, env, _RealOps))


def eval_jet(g: GeneratingFunction, base, order: int) -> Jet:
    """Jet of g at the chart point `base`, in the n chart variables."""
    if not 0 <= order <= jets.MAX_ORDER:
        raise DslError(f"order must be in 0..{jets.MAX_ORDER}, got {order}")
    base = _chart_array(g, base)
    env = {kv: Jet.variable(a, float(base[a]), g.n, order)
           for a, kv in enumerate(g.chart_vars)}
    template = Jet.constant(0.0, g.n, order)
    out = _eval(g.expr, env, _JetOps, template)
    if not isinstance(out, Jet):  # constant expression
        out = Jet.constant(float(out), g.n, order)
    return out


# -- structural helpers --------------------------------------------------------


def is_polynomial(expr: Expr) -> bool:
    """True when the expression is polynomial in its variables.

    Calls disqualify; division only by variable-free subtrees is allowed;
    powers must have non-negative integer exponents (constant by the ^ rule).
    """
    if isinstance(expr, (Num, Var)):
        return True
    if isinstance(expr, Neg):
        return is_polynomial(expr.arg)
    if isinstance(expr, Call):
        return not _contains_var(expr.arg)
    if isinstance(expr, BinOp):
        if expr.op == "/":
            return is_polynomial(expr.left) and not _contains_var(expr.right)
        if expr.op == "^":
            if _contains_var(expr.right):
                return False
            if not _contains_var(expr.left):
                return True
            r = _const_value(expr.right)
            return abs(r - round(r)) <= 1e-9 and round(r) >= 0
        return is_polynomial(expr.left) and is_polynomial(expr.right)
    return False


def swap_variables(expr: Expr) -> Expr:
    """Rename every x_i to p_i and every p_j to x_j."""
    if isinstance(expr, Num):
        return expr
    if isinstance(expr, Var):
        return Var("p" if expr.kind == "x" else "x", expr.index, expr.pos)
    if isinstance(expr, Neg):
        return Neg(swap_variables(expr.arg), expr.pos)
    if isinstance(expr, BinOp):
        return BinOp(expr.op, swap_variables(expr.left),
                     swap_variables(expr.right), expr.pos)
    if isinstance(expr, Call):
        return Call(expr.fn, swap_variables(expr.arg), expr.pos)
    raise TypeError(f"not an expression node: {expr!r}")
