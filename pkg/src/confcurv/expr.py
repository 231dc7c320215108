"""Closed-form expression trees with exact symbolic differentiation.

The grammar covers real literals, coordinate variables ``x1..xn``, the four
arithmetic operations, integer powers, and the unary functions exp, log,
sin, cos, sqrt.  Trees are hash-consed: structurally equal subtrees are the
same object, so equality is identity and derivative caches are cheap.

Canonicalization is deliberately minimal (constant folding plus flattening
of nested sums/products); no algebraic simplification is attempted, so the
output of :func:`differentiate` is predictable.
"""

from __future__ import annotations

import math

from .errors import ExprSyntaxError, UnknownIdentifier, VariableOutOfRange, WrongArity

__all__ = [
    "Expr", "parse", "differentiate", "to_string", "evaluate",
    "const", "var", "add", "sub", "mul", "div", "pow_int", "func", "neg",
    "FUNCTIONS", "depth",
]

FUNCTIONS = ("exp", "log", "sin", "cos", "sqrt")

# node kinds
CONST, VAR, ADD, MUL, DIV, POW, FUNC = "const", "var", "add", "mul", "div", "pow", "func"


class Expr:
    """Immutable, interned expression node.

    ``kind`` is one of const/var/add/mul/div/pow/func; ``args`` holds child
    nodes and ``payload`` the literal value, variable index, exponent, or
    function name.
    """

    __slots__ = ("kind", "args", "payload", "_hash")

    def __init__(self, kind, args, payload):
        self.kind = kind
        self.args = args
        self.payload = payload
        self._hash = hash((kind, payload, tuple(id(a) for a in args)))

    def __hash__(self):
        return self._hash

    def __repr__(self):
        return f"Expr<{to_string(self)}>"


_INTERN: dict = {}


def _node(kind, args, payload):
    key = (kind, payload, tuple(id(a) for a in args))
    node = _INTERN.get(key)
    if node is None:
        node = Expr(kind, tuple(args), payload)
        _INTERN[key] = node
    return node


# --- constructors (canonicalizing) ----------------------------------------

def const(value: float) -> Expr:
    return _node(CONST, (), float(value))


ZERO = const(0.0)
ONE = const(1.0)


def var(index: int) -> Expr:
    if index < 1:
        raise VariableOutOfRange(f"variable index {index} out of range (indices start at 1)")
    return _node(VAR, (), int(index))


def add(*terms: Expr) -> Expr:
    flat = []
    c = 0.0
    for t in terms:
        if t.kind == ADD:
            children = t.args
        else:
            children = (t,)
        for u in children:
            if u.kind == CONST:
                c += u.payload
            else:
                flat.append(u)
    if c != 0.0 or not flat:
        flat.append(const(c))
    if len(flat) == 1:
        return flat[0]
    return _node(ADD, flat, None)


def mul(*factors: Expr) -> Expr:
    flat = []
    c = 1.0
    for f in factors:
        if f.kind == MUL:
            children = f.args
        else:
            children = (f,)
        for u in children:
            if u.kind == CONST:
                c *= u.payload
            else:
                flat.append(u)
    if c == 0.0:
        return ZERO
    if c != 1.0 or not flat:
        flat.insert(0, const(c))
    if len(flat) == 1:
        return flat[0]
    return _node(MUL, flat, None)


def neg(e: Expr) -> Expr:
    return mul(const(-1.0), e)


def sub(a: Expr, b: Expr) -> Expr:
    return add(a, neg(b))


def div(a: Expr, b: Expr) -> Expr:
    if b.kind == CONST:
        if a.kind == CONST:
            return const(a.payload / b.payload)
        if b.payload == 1.0:
            return a
        return mul(const(1.0 / b.payload), a)
    if a.kind == CONST and a.payload == 0.0:
        return ZERO
    return _node(DIV, (a, b), None)


def pow_int(base: Expr, exponent: int) -> Expr:
    exponent = int(exponent)
    if exponent == 0:
        return ONE
    if exponent == 1:
        return base
    if base.kind == CONST:
        return const(base.payload ** exponent)
    return _node(POW, (base,), exponent)


def func(name: str, arg: Expr) -> Expr:
    if name not in FUNCTIONS:
        raise UnknownIdentifier(f"unknown function '{name}'")
    if arg.kind == CONST:
        return const(getattr(math, name)(arg.payload))
    return _node(FUNC, (arg,), name)


def depth(e: Expr) -> int:
    if not e.args:
        return 1
    return 1 + max(depth(a) for a in e.args)


def max_var_index(e: Expr) -> int:
    if e.kind == VAR:
        return e.payload
    if not e.args:
        return 0
    return max(max_var_index(a) for a in e.args)


# --- parser -----------------------------------------------------------------

class _Lexer:
    def __init__(self, source: str):
        self.source = source
        self.pos = 0
        self.line = 1
        self.col = 0
        self.tokens = []
        self._scan()

    def _error(self, msg):
        raise ExprSyntaxError(msg, self.line, self.col)

    def _scan(self):
        s = self.source
        i = 0
        line, linestart = 1, 0
        while i < len(s):
            ch = s[i]
            if ch == "\n":
                line += 1
                linestart = i + 1
                i += 1
                continue
            if ch.isspace():
                i += 1
                continue
            col = i - linestart
            if ch in "+-*/^(),":
                self.tokens.append((ch, ch, line, col))
                i += 1
            elif ch.isdigit() or ch == ".":
                j = i
                while j < len(s) and (s[j].isdigit() or s[j] == "."):
                    j += 1
                if j < len(s) and s[j] in "eE":
                    k = j + 1
                    if k < len(s) and s[k] in "+-":
                        k += 1
                    if k < len(s) and s[k].isdigit():
                        while k < len(s) and s[k].isdigit():
                            k += 1
                        j = k
                try:
                    value = float(s[i:j])
                except ValueError:
                    self.line, self.col = line, col
                    self._error(f"bad numeric literal '{s[i:j]}'")
                self.tokens.append(("num", value, line, col))
                i = j
            elif ch.isalpha() or ch == "_":
                j = i
                while j < len(s) and (s[j].isalnum() or s[j] == "_"):
                    j += 1
                self.tokens.append(("name", s[i:j], line, col))
                i = j
            else:
                self.line, self.col = line, col
                self._error(f"unexpected character '{ch}'")
        self.tokens.append(("end", None, line, len(s) - linestart))


class _Parser:
    def __init__(self, source: str, n: int | None):
        self.tokens = _Lexer(source).tokens
        self.k = 0
        self.n = n

    def _peek(self):
        return self.tokens[self.k]

    def _next(self):
        tok = self.tokens[self.k]
        self.k += 1
        return tok

    def _error(self, msg, tok=None):
        tok = tok or self._peek()
        raise ExprSyntaxError(msg, tok[2], tok[3])

    def parse(self) -> Expr:
        e = self.expr()
        tok = self._peek()
        if tok[0] != "end":
            self._error(f"unexpected token '{tok[1]}'")
        return e

    def expr(self) -> Expr:
        # leading unary minus is accepted: "-x1 + 1"
        if self._peek()[0] == "-":
            self._next()
            e = neg(self.term())
        else:
            e = self.term()
        while self._peek()[0] in ("+", "-"):
            op = self._next()[0]
            rhs = self.term()
            e = add(e, rhs) if op == "+" else sub(e, rhs)
        return e

    def term(self) -> Expr:
        e = self.factor()
        while self._peek()[0] in ("*", "/"):
            op = self._next()[0]
            rhs = self.factor()
            e = mul(e, rhs) if op == "*" else div(e, rhs)
        return e

    def factor(self) -> Expr:
        e = self.base()
        if self._peek()[0] == "^":
            self._next()
            sign = 1
            if self._peek()[0] == "-":
                self._next()
                sign = -1
            tok = self._next()
            if tok[0] != "num" or tok[1] != int(tok[1]):
                self._error("exponent must be an integer", tok)
            e = pow_int(e, sign * int(tok[1]))
        return e

    def base(self) -> Expr:
        tok = self._next()
        if tok[0] == "num":
            return const(tok[1])
        if tok[0] == "(":
            e = self.expr()
            closing = self._next()
            if closing[0] != ")":
                self._error("expected ')'", closing)
            return e
        if tok[0] == "name":
            name = tok[1]
            if self._peek()[0] == "(":
                if name not in FUNCTIONS:
                    raise UnknownIdentifier(
                        f"unknown function '{name}' at line {tok[2]}, column {tok[3]}")
                self._next()
                arg = self.expr()
                nxt = self._next()
                if nxt[0] == ",":
                    raise WrongArity(f"function '{name}' takes exactly one argument")
                if nxt[0] != ")":
                    self._error("expected ')'", nxt)
                return func(name, arg)
            if name.startswith("x") and name[1:].isdigit():
                index = int(name[1:])
                if index < 1 or (self.n is not None and index > self.n):
                    raise VariableOutOfRange(
                        f"variable index out of range: '{name}' with dimension "
                        f"{self.n if self.n is not None else '>=1'}")
                return var(index)
            raise UnknownIdentifier(
                f"unknown identifier '{name}' at line {tok[2]}, column {tok[3]}")
        self._error(f"unexpected token '{tok[1] if tok[1] is not None else 'end of input'}'", tok)


def parse(source: str, n: int | None = None) -> Expr:
    """Parse ``source`` into a canonical Expr.

    ``n`` restricts the admissible variable indices to 1..n.
    """
    return _Parser(source, n).parse()


# --- printer ----------------------------------------------------------------

def _fmt_const(v: float) -> str:
    if v == int(v) and abs(v) < 1e15:
        return str(int(v))
    return repr(v)


def _print(e: Expr, parent: str) -> str:
    if e.kind == CONST:
        s = _fmt_const(e.payload)
        if e.payload < 0 and parent in (MUL, DIV, POW, "rhs"):
            return f"({s})"
        return s
    if e.kind == VAR:
        return f"x{e.payload}"
    if e.kind == ADD:
        parts = []
        for i, a in enumerate(e.args):
            negated, term = False, a
            if a.kind == CONST and a.payload < 0:
                negated, term = True, const(-a.payload)
            elif (a.kind == MUL and a.args[0].kind == CONST
                  and a.args[0].payload < 0):
                negated = True
                term = mul(const(-a.args[0].payload), *a.args[1:])
            body = _print(term, ADD)
            if i == 0:
                parts.append(f"-{body}" if negated else body)
            else:
                parts.append(f" - {body}" if negated else f" + {body}")
        s = "".join(parts)
        if parent in (MUL, DIV, POW, "rhs"):
            return f"({s})"
        return s
    if e.kind == MUL:
        s = "*".join(_print(a, MUL) for a in e.args)
        if parent in (DIV, POW, "rhs"):
            return f"({s})"
        return s
    if e.kind == DIV:
        num = _print(e.args[0], DIV)
        den = _print(e.args[1], "rhs")
        s = f"{num}/{den}"
        if parent in (MUL, DIV, POW, "rhs"):
            return f"({s})"
        return s
    if e.kind == POW:
        base = _print(e.args[0], POW)
        s = f"{base}^{e.payload}"
        return f"({s})" if parent == POW else s
    if e.kind == FUNC:
        return f"{e.payload}({_print(e.args[0], ADD)})"
    raise AssertionError(e.kind)


def to_string(e: Expr) -> str:
    return _print(e, ADD)


# --- differentiation --------------------------------------------------------

_DIFF_CACHE: dict = {}


def differentiate(e: Expr, axis: int) -> Expr:
    """Exact partial derivative with respect to x_axis (1-based)."""
    key = (e, axis)
    cached = _DIFF_CACHE.get(key)
    if cached is None:
        cached = _DIFF_CACHE[key] = _diff(e, axis)
    return cached


def _diff(e: Expr, axis: int) -> Expr:
    if e.kind == CONST:
        return ZERO
    if e.kind == VAR:
        return ONE if e.payload == axis else ZERO
    if e.kind == ADD:
        return add(*[differentiate(a, axis) for a in e.args])
    if e.kind == MUL:
        terms = []
        for i, f in enumerate(e.args):
            df = differentiate(f, axis)
            if df is ZERO:
                continue
            terms.append(mul(*e.args[:i], df, *e.args[i + 1:]))
        return add(*terms) if terms else ZERO
    if e.kind == DIV:
        a, b = e.args
        da, db = differentiate(a, axis), differentiate(b, axis)
        return div(sub(mul(da, b), mul(a, db)), pow_int(b, 2))
    if e.kind == POW:
        base, k = e.args[0], e.payload
        dbase = differentiate(base, axis)
        return mul(const(float(k)), pow_int(base, k - 1), dbase)
    if e.kind == FUNC:
        u = e.args[0]
        du = differentiate(u, axis)
        name = e.payload
        if name == "exp":
            outer = func("exp", u)
        elif name == "log":
            return div(du, u)
        elif name == "sin":
            outer = func("cos", u)
        elif name == "cos":
            outer = neg(func("sin", u))
        elif name == "sqrt":
            return div(du, mul(const(2.0), func("sqrt", u)))
        else:
            raise AssertionError(name)
        return mul(outer, du)
    raise AssertionError(e.kind)


# --- direct evaluation (reference path; hot loops use compiled tapes) -------

def evaluate(e: Expr, x) -> float:
    """Evaluate at a point given as a 0-based sequence of coordinates."""
    if e.kind == CONST:
        return e.payload
    if e.kind == VAR:
        return float(x[e.payload - 1])
    if e.kind == ADD:
        return sum(evaluate(a, x) for a in e.args)
    if e.kind == MUL:
        out = 1.0
        for a in e.args:
            out *= evaluate(a, x)
        return out
    if e.kind == DIV:
        return evaluate(e.args[0], x) / evaluate(e.args[1], x)
    if e.kind == POW:
        return evaluate(e.args[0], x) ** e.payload
    if e.kind == FUNC:
        return getattr(math, e.payload)(evaluate(e.args[0], x))
    raise AssertionError(e.kind)
