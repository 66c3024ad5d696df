"""Small expression language for kernels, forcing terms and nonlinearities.

Grammar (highest precedence first)::

    atom   := number | name | func "(" expr ")" | "(" expr ")"
    power  := atom ["^" unary]             # right-associative
    unary  := ("-" | "+") unary | power
    term   := unary (("*" | "/") unary)*
    expr   := term (("+" | "-") term)*

Variables are restricted to ``x``, ``y``, ``z`` and ``eps``; the only named
constant is ``pi``; functions are ``sin cos exp log sqrt``.  ``abs`` is left
out on purpose so every accepted expression is smooth where it is defined.

Trees are immutable and evaluate elementwise on numpy arrays, which is how
kernels are filled on a quadrature grid.
"""

from __future__ import annotations

import math
import re
import weakref
from dataclasses import dataclass, field

import numpy as np

from .exceptions import EvaluationError, ExpressionTooLarge, ParseError

VARIABLES = ("x", "y", "z", "eps")
CONSTANTS = {"pi": math.pi}
FUNCTIONS = ("sin", "cos", "exp", "log", "sqrt")
MAX_NODES = 10**6


@dataclass(frozen=True)
class Expression:
    size: int = field(init=False, repr=False, compare=False)
    variables: frozenset = field(init=False, repr=False, compare=False)

    def children(self):
        return ()

    def __post_init__(self):
        kids = self.children()
        object.__setattr__(self, "size", 1 + sum(c.size for c in kids))
        names = frozenset((self.name,)) if isinstance(self, Var) else frozenset()
        for c in kids:
            names |= c.variables
        object.__setattr__(self, "variables", names)

    def __str__(self):
        return to_string(self)

    def __call__(self, **bindings):
        return evaluate(self, bindings)


@dataclass(frozen=True)
class Num(Expression):
    value: float

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        super().__post_init__()


@dataclass(frozen=True)
class Var(Expression):
    name: str


@dataclass(frozen=True)
class Const(Expression):
    name: str


@dataclass(frozen=True)
class Neg(Expression):
    arg: Expression

    def children(self):
        return (self.arg,)


@dataclass(frozen=True)
class _Binary(Expression):
    left: Expression
    right: Expression

    def children(self):
        return (self.left, self.right)


class Add(_Binary):
    pass


class Sub(_Binary):
    pass


class Mul(_Binary):
    pass


class Div(_Binary):
    pass


class Pow(_Binary):
    pass


@dataclass(frozen=True)
class Func(Expression):
    name: str
    arg: Expression

    def children(self):
        return (self.arg,)


ZERO = Num(0.0)
ONE = Num(1.0)


# ----------------------------------------------------------------------------
# parsing

_TOKEN = re.compile(
    r"\s*(?:(?P<num>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?)|(?P<name>[A-Za-z_]\w*)|(?P<op>[-+*/^(),]))"
)


def _tokenize(text):
    tokens = []
    pos = 0
    while pos < len(text):
        if text[pos:].strip() == "":
            break
        m = _TOKEN.match(text, pos)
        if m is None or m.end() == pos:
            start = pos + (len(text[pos:]) - len(text[pos:].lstrip()))
            raise ParseError(f"unexpected character {text[start]!r}", start)
        kind = m.lastgroup
        tokens.append((kind, m.group(kind), m.start(kind)))
        pos = m.end()
    tokens.append(("end", "", len(text)))
    return tokens


class _Parser:
    def __init__(self, text):
        self.tokens = _tokenize(text)
        self.i = 0

    @property
    def tok(self):
        return self.tokens[self.i]

    def take(self):
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, op):
        kind, value, pos = self.tok
        if kind != "op" or value != op:
            what = "end of input" if kind == "end" else repr(value)
            raise ParseError(f"expected {op!r}, found {what}", pos)
        self.take()

    def parse(self):
        e = self.expr()
        kind, value, pos = self.tok
        if kind != "end":
            raise ParseError(f"unexpected {value!r}", pos)
        return e

    def expr(self):
        e = self.term()
        while self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.take()[1]
            rhs = self.term()
            e = Add(e, rhs) if op == "+" else Sub(e, rhs)
        return e

    def term(self):
        e = self.unary()
        while self.tok[0] == "op" and self.tok[1] in "*/":
            op = self.take()[1]
            rhs = self.unary()
            e = Mul(e, rhs) if op == "*" else Div(e, rhs)
        return e

    def unary(self):
        if self.tok[0] == "op" and self.tok[1] in "+-":
            op = self.take()[1]
            arg = self.unary()
            return Neg(arg) if op == "-" else arg
        return self.power()

    def power(self):
        base = self.atom()
        if self.tok[0] == "op" and self.tok[1] == "^":
            self.take()
            return Pow(base, self.unary())
        return base

    def atom(self):
        kind, value, pos = self.take()
        if kind == "num":
            return Num(float(value))
        if kind == "name":
            if value in FUNCTIONS:
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return Func(value, arg)
            if value in VARIABLES:
                return Var(value)
            if value in CONSTANTS:
                return Const(value)
            raise ParseError(f"unknown identifier {value!r}", pos)
        if kind == "op" and value == "(":
            e = self.expr()
            self.expect(")")
            return e
        what = "end of input" if kind == "end" else repr(value)
        raise ParseError(f"unexpected {what}", pos)


def parse(text) -> Expression:
    """Parse ``text`` into an expression tree.

    Raises :class:`ParseError` (with a 0-based ``position``) on malformed
    input or unknown identifiers.

    >>> parse("x*y + eps*x")
    Add(left=Mul(left=Var(name='x'), right=Var(name='y')), right=Mul(left=Var(name='eps'), right=Var(name='x')))
    """
    if isinstance(text, Expression):
        return text
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return Num(text)
    if not isinstance(text, str):
        raise ParseError(f"expected a string, got {type(text).__name__}", 0)
    return _Parser(text).parse()


# ----------------------------------------------------------------------------
# evaluation

def free_variables(e: Expression) -> frozenset:
    return parse(e).variables


def _fv(e):
    return e.variables


def _domain(msg):
    return EvaluationError(f"domain error: {msg}")


def _eval(e, env, memo):
    key = id(e)
    if key in memo:
        return memo[key]
    out = _eval_node(e, env, memo)
    memo[key] = out
    return out


def _eval_node(e, env, memo):
    if isinstance(e, Num):
        return e.value
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvaluationError(f"unbound variable {e.name!r}") from None
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Neg):
        return -_eval(e.arg, env, memo)
    if isinstance(e, Func):
        a = _eval(e.arg, env, memo)
        if e.name == "log":
            if np.any(np.asarray(a) <= 0):
                raise _domain("log of a non-positive argument")
            return np.log(a)
        if e.name == "sqrt":
            if np.any(np.asarray(a) < 0):
                raise _domain("sqrt of a negative argument")
            return np.sqrt(a)
        return getattr(np, e.name)(a)
    a = _eval(e.left, env, memo)
    b = _eval(e.right, env, memo)
    if isinstance(e, Add):
        return a + b
    if isinstance(e, Sub):
        return a - b
    if isinstance(e, Mul):
        return a * b
    if isinstance(e, Div):
        if np.any(np.asarray(b) == 0):
            raise _domain("division by zero")
        return a / b
    # Pow
    if isinstance(e.right, Num) and e.right.value.is_integer():
        k = int(e.right.value)
        if k < 0 and np.any(np.asarray(a) == 0):
            raise _domain("zero raised to a negative power")
        if isinstance(a, np.ndarray):
            return np.power(a, float(k)) if k < 0 else a**k
        return float(a) ** k
    ab, bb = np.broadcast_arrays(np.asarray(a, dtype=float), np.asarray(b, dtype=float))
    if np.any((ab < 0) & (bb != np.round(bb))):
        raise _domain("negative base with non-integer exponent")
    if np.any((ab == 0) & (bb < 0)):
        raise _domain("zero raised to a negative power")
    return np.power(a, b)


def evaluate(e: Expression, bindings=None, **kw):
    """Evaluate ``e`` with variables bound to scalars or broadcastable arrays.

    Raises :class:`EvaluationError` for unbound variables and for domain
    violations (log/sqrt of invalid arguments, division by zero) instead of
    returning NaN.
    """
    env = dict(bindings or {})
    env.update(kw)
    e = parse(e)
    with np.errstate(all="ignore"):
        out = _eval(e, env, {})
    if np.ndim(out) == 0:
        out = float(out)
        if not math.isfinite(out):
            raise _domain("non-finite result")
    elif not np.all(np.isfinite(out)):
        raise _domain("non-finite result")
    return out


# ----------------------------------------------------------------------------
# folding constructors

_INTERNED = weakref.WeakValueDictionary()


def _node(cls, *args):
    """Shared instance of ``cls(*args)``.

    Repeated derivatives rebuild the same subterms many times; sharing them
    keeps the work proportional to the number of distinct subterms rather
    than to the size of the expanded tree.  Children are keyed by identity,
    which is safe because a live node keeps its children alive.
    """
    key = (cls,) + tuple(id(v) if isinstance(v, Expression) else (v, math.copysign(1.0, v))
                         if isinstance(v, float) else v for v in args)
    node = _INTERNED.get(key)
    if node is None:
        node = cls(*args)
        _INTERNED[key] = node
    return node


def _num(e):
    return e.value if isinstance(e, Num) else None


def make_neg(a):
    if isinstance(a, Num):
        return _node(Num, -a.value)
    if isinstance(a, Neg):
        return a.arg
    return _node(Neg, a)


def make_add(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return _node(Num, va + vb)
    if va == 0:
        return b
    if vb == 0:
        return a
    return _node(Add, a, b)


def make_sub(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return _node(Num, va - vb)
    if vb == 0:
        return a
    if va == 0:
        return make_neg(b)
    return _node(Sub, a, b)


def make_mul(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None:
        return _node(Num, va * vb)
    if va == 0 or vb == 0:
        return ZERO
    if va == 1:
        return b
    if vb == 1:
        return a
    if va == -1:
        return make_neg(b)
    if vb == -1:
        return make_neg(a)
    if isinstance(b, Mul):
        # canonical left-nested products
        return make_mul(make_mul(a, b.left), b.right)
    return _node(Mul, a, b)


def make_div(a, b):
    va, vb = _num(a), _num(b)
    if va is not None and vb is not None and vb != 0:
        return _node(Num, va / vb)
    if va == 0 and vb != 0:
        return ZERO
    if vb == 1:
        return a
    return _node(Div, a, b)


def make_pow(a, b):
    va, vb = _num(a), _num(b)
    if vb == 0:
        return ONE
    if vb == 1:
        return a
    if va is not None and vb is not None:
        try:
            v = va**vb
        except (ZeroDivisionError, OverflowError):
            return _node(Pow, a, b)
        if isinstance(v, float) and math.isfinite(v):
            return _node(Num, v)
    return _node(Pow, a, b)


# ----------------------------------------------------------------------------
# differentiation

def _d(e, var, memo):
    key = id(e)
    if key in memo:
        return memo[key][1]
    if var not in _fv(e):
        out = ZERO
    elif isinstance(e, Var):
        out = ONE
    elif isinstance(e, Neg):
        out = make_neg(_d(e.arg, var, memo))
    elif isinstance(e, Add):
        out = make_add(_d(e.left, var, memo), _d(e.right, var, memo))
    elif isinstance(e, Sub):
        out = make_sub(_d(e.left, var, memo), _d(e.right, var, memo))
    elif isinstance(e, Mul):
        u, v = e.left, e.right
        out = make_add(make_mul(_d(u, var, memo), v), make_mul(u, _d(v, var, memo)))
    elif isinstance(e, Div):
        u, v = e.left, e.right
        du, dv = _d(u, var, memo), _d(v, var, memo)
        if _num(dv) == 0:
            out = make_div(du, v)
        else:
            out = make_div(make_sub(make_mul(du, v), make_mul(u, dv)), make_pow(v, Num(2)))
    elif isinstance(e, Pow):
        u, v = e.left, e.right
        if var not in _fv(v):
            out = make_mul(make_mul(v, make_pow(u, make_sub(v, ONE))), _d(u, var, memo))
        elif var not in _fv(u):
            out = make_mul(make_mul(e, _node(Func, "log", u)), _d(v, var, memo))
        else:
            inner = make_add(
                make_mul(_d(v, var, memo), _node(Func, "log", u)),
                make_div(make_mul(v, _d(u, var, memo)), u),
            )
            out = make_mul(e, inner)
    elif isinstance(e, Func):
        u = e.arg
        du = _d(u, var, memo)
        if e.name == "sin":
            out = make_mul(_node(Func, "cos", u), du)
        elif e.name == "cos":
            out = make_mul(make_neg(_node(Func, "sin", u)), du)
        elif e.name == "exp":
            out = make_mul(e, du)
        elif e.name == "log":
            out = make_div(du, u)
        else:  # sqrt
            out = make_div(du, make_mul(Num(2), e))
    else:
        raise TypeError(f"cannot differentiate {type(e).__name__}")
    if out.size > MAX_NODES:
        raise ExpressionTooLarge(f"derivative expression exceeds {MAX_NODES} nodes")
    memo[key] = (e, out)
    return out


def differentiate(e: Expression, var: str, order: int = 1) -> Expression:
    """Symbolic derivative of ``e`` with respect to ``var``, ``order`` times.

    Only constant folding is applied (``0*u -> 0``, ``1*u -> u``, literal
    arithmetic), so results stay predictable.  Raises
    :class:`ExpressionTooLarge` when a result would exceed ``MAX_NODES``
    tree nodes.
    """
    if var not in VARIABLES:
        raise ValueError(f"unknown variable {var!r}")
    e = parse(e)
    for _ in range(order):
        e = _d(e, var, {})
        if e.size > MAX_NODES:
            raise ExpressionTooLarge(
                f"derivative expression has {e.size} nodes (limit {MAX_NODES})"
            )
    return e


def substitute(e: Expression, var: str, value: Expression) -> Expression:
    """Replace every occurrence of ``var`` by ``value`` (no folding beyond constructors)."""
    e = parse(e)
    value = parse(value)

    def sub(node):
        if isinstance(node, Var):
            return value if node.name == var else node
        if isinstance(node, Neg):
            return make_neg(sub(node.arg))
        if isinstance(node, Func):
            return Func(node.name, sub(node.arg))
        if isinstance(node, _Binary):
            build = {Add: make_add, Sub: make_sub, Mul: make_mul, Div: make_div, Pow: make_pow}
            return build[type(node)](sub(node.left), sub(node.right))
        return node

    return sub(e)


# ----------------------------------------------------------------------------
# printing

_PREC = {Add: 1, Sub: 1, Mul: 2, Div: 2, Neg: 3, Pow: 4}
_SYM = {Add: "+", Sub: "-", Mul: "*", Div: "/", Pow: "^"}


def _prec(e):
    if isinstance(e, Num) and (e.value < 0 or math.copysign(1.0, e.value) < 0):
        return 3
    return _PREC.get(type(e), 5)


def _fmt_num(v):
    v = abs(v)
    if v.is_integer() and v < 1e16:
        return str(int(v))
    return repr(v)


def to_string(e: Expression) -> str:
    """Render ``e`` with the minimal parentheses the grammar needs.

    ``parse(to_string(e))`` evaluates identically to ``e``.
    """
    if isinstance(e, Num):
        s = _fmt_num(e.value)
        return "-" + s if math.copysign(1.0, e.value) < 0 else s
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Func):
        return f"{e.name}({to_string(e.arg)})"
    if isinstance(e, Neg):
        inner = to_string(e.arg)
        return "-" + (f"({inner})" if _prec(e.arg) < 3 else inner)
    p = _PREC[type(e)]
    left, right = to_string(e.left), to_string(e.right)
    if isinstance(e, Pow):
        if _prec(e.left) <= p:
            left = f"({left})"
        if _prec(e.right) < p:
            right = f"({right})"
        return f"{left}^{right}"
    if _prec(e.left) < p:
        left = f"({left})"
    # the parser is left-associative: keep right-nested grouping so that
    # re-parsing reproduces the same evaluation order
    if _prec(e.right) <= p:
        right = f"({right})"
    sep = f" {_SYM[type(e)]} " if p == 1 else _SYM[type(e)]
    return f"{left}{sep}{right}"
