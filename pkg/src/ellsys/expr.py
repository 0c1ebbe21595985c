"""Arithmetic expression language for coefficients and nonlinearities.

Users write the pieces of the system -- c1(x), f1(x, u1, u2), boundary
terms, single-variable reaction profiles f(s) -- as text.  This module
turns that text into an immutable AST, evaluates it over floats or numpy
arrays, and probes sampled partial derivatives (used to estimate the
additive shift constants that make the iteration operator monotone).

Grammar (EBNF):

    expr    := term (("+" | "-") term)*
    term    := unary (("*" | "/") unary)*
    unary   := "-" unary | power
    power   := atom ("^" unary)?          # right-associative
    atom    := NUMBER | IDENT | IDENT "(" expr ("," expr)* ")" | "(" expr ")"

Precedence, loosest to tightest: "+ -", "* /", unary "-", "^".
Identifiers are restricted to the variables x, y, u1, u2, s, lambda,
the constants pi and e, and the function names listed in FUNCTIONS.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import EvalError, ParseError

VARIABLES = ("x", "y", "u1", "u2", "s", "lambda")
CONSTANTS = {"pi": math.pi, "e": math.e}
FUNCTIONS = {
    "sin": 1,
    "cos": 1,
    "exp": 1,
    "log": 1,
    "sqrt": 1,
    "tanh": 1,
    "abs": 1,
    "min": 2,
    "max": 2,
}

_ADD, _MUL, _NEG, _POW, _ATOM = 10, 20, 30, 40, 100


@dataclass(frozen=True)
class Lit:
    value: float


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class Neg:
    operand: "Expr"


@dataclass(frozen=True)
class Bin:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    fn: str
    args: tuple["Expr", ...]


Expr = Lit | Var | Const | Neg | Bin | Call


# ---------------------------------------------------------------------------
# Lexer
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class _Token:
    kind: str  # "num", "ident", "op", "end"
    text: str
    offset: int
    value: float = 0.0


def _tokenize(src: str) -> list[_Token]:
    tokens: list[_Token] = []
    i, n = 0, len(src)
    while i < n:
        ch = src[i]
        if ch.isspace():
            i += 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and src[i + 1].isdigit()):
            start = i
            while i < n and src[i].isdigit():
                i += 1
            if i < n and src[i] == ".":
                i += 1
                while i < n and src[i].isdigit():
                    i += 1
            if i < n and src[i] in "eE":
                j = i + 1
                if j < n and src[j] in "+-":
                    j += 1
                if j < n and src[j].isdigit():
                    i = j
                    while i < n and src[i].isdigit():
                        i += 1
            text = src[start:i]
            try:
                value = float(text)
            except ValueError:
                raise ParseError(f"bad number literal '{text}'", start, "number")
            tokens.append(_Token("num", text, start, value))
            continue
        if ch.isalpha() or ch == "_":
            start = i
            while i < n and (src[i].isalnum() or src[i] == "_"):
                i += 1
            tokens.append(_Token("ident", src[start:i], start))
            continue
        if ch in "+-*/^(),":
            tokens.append(_Token("op", ch, i))
            i += 1
            continue
        raise ParseError(f"unexpected character {ch!r}", i, "operator or operand")
    tokens.append(_Token("end", "", n))
    return tokens


# ---------------------------------------------------------------------------
# Pratt parser
# ---------------------------------------------------------------------------

_INFIX_BP = {"+": _ADD, "-": _ADD, "*": _MUL, "/": _MUL, "^": _POW}


class _Parser:
    def __init__(self, tokens: list[_Token]):
        self.tokens = tokens
        self.pos = 0

    @property
    def token(self) -> _Token:
        return self.tokens[self.pos]

    def advance(self) -> _Token:
        tok = self.tokens[self.pos]
        self.pos += 1
        return tok

    def expect(self, text: str, expected: str) -> None:
        tok = self.token
        if tok.kind != "op" or tok.text != text:
            raise ParseError(f"found {tok.text!r}" if tok.kind != "end"
                             else "unexpected end of input", tok.offset, expected)
        self.advance()

    def parse_expr(self, min_bp: int) -> Expr:
        node = self.parse_prefix()
        while True:
            tok = self.token
            if tok.kind != "op" or tok.text not in _INFIX_BP:
                break
            bp = _INFIX_BP[tok.text]
            if bp <= min_bp:
                break
            self.advance()
            # ^ recurses at bp-1 so that a^b^c groups as a^(b^c)
            right = self.parse_expr(bp - 1 if tok.text == "^" else bp)
            node = Bin(tok.text, node, right)
        return node

    def parse_prefix(self) -> Expr:
        tok = self.advance()
        if tok.kind == "num":
            return Lit(tok.value)
        if tok.kind == "ident":
            return self.parse_ident(tok)
        if tok.kind == "op" and tok.text == "-":
            return Neg(self.parse_expr(_NEG))
        if tok.kind == "op" and tok.text == "(":
            node = self.parse_expr(0)
            self.expect(")", "')'")
            return node
        if tok.kind == "end":
            raise ParseError("unexpected end of input", tok.offset, "operand")
        raise ParseError(f"found {tok.text!r}", tok.offset, "operand")

    def parse_ident(self, tok: _Token) -> Expr:
        name = tok.text
        if self.token.kind == "op" and self.token.text == "(":
            if name not in FUNCTIONS:
                raise ParseError(f"unknown function '{name}'", tok.offset,
                                 "one of " + ", ".join(sorted(FUNCTIONS)))
            self.advance()
            args = [self.parse_expr(0)]
            while self.token.kind == "op" and self.token.text == ",":
                self.advance()
                args.append(self.parse_expr(0))
            self.expect(")", "')' or ','")
            if len(args) != FUNCTIONS[name]:
                raise ParseError(
                    f"function '{name}' takes {FUNCTIONS[name]} argument(s), "
                    f"got {len(args)}", tok.offset, "argument list")
            return Call(name, tuple(args))
        if name in CONSTANTS:
            return Const(name)
        if name in VARIABLES:
            return Var(name)
        raise ParseError(f"unknown identifier '{name}'", tok.offset,
                         "one of " + ", ".join(VARIABLES))


def parse(src: str) -> Expr:
    """Parse expression text into an AST.  Raises ParseError on bad input."""
    parser = _Parser(_tokenize(src))
    node = parser.parse_expr(0)
    tok = parser.token
    if tok.kind != "end":
        raise ParseError(f"trailing input {tok.text!r}", tok.offset, "end of input")
    return node


# ---------------------------------------------------------------------------
# Pretty printer (pretty . parse . pretty is a fixed point)
# ---------------------------------------------------------------------------

def _prec(e: Expr) -> int:
    if isinstance(e, Bin):
        return _INFIX_BP[e.op]
    if isinstance(e, Neg):
        return _NEG
    return _ATOM


def pretty(e: Expr) -> str:
    if isinstance(e, Lit):
        return repr(e.value)
    if isinstance(e, (Var, Const)):
        return e.name
    if isinstance(e, Neg):
        inner = pretty(e.operand)
        if _prec(e.operand) < _NEG:
            inner = f"({inner})"
        return f"-{inner}"
    if isinstance(e, Call):
        return f"{e.fn}({', '.join(pretty(a) for a in e.args)})"
    if isinstance(e, Bin):
        p = _INFIX_BP[e.op]
        left, right = pretty(e.left), pretty(e.right)
        if e.op == "^":
            if _prec(e.left) <= p:
                left = f"({left})"
            if _prec(e.right) < p:
                right = f"({right})"
        else:
            if _prec(e.left) < p:
                left = f"({left})"
            if _prec(e.right) < p or (_prec(e.right) == p and e.op in "-/"):
                right = f"({right})"
        return f"{left} {e.op} {right}" if e.op in "+-" else f"{left}{e.op}{right}"
    raise TypeError(f"not an Expr: {e!r}")


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------

def _check_finite(value, e: Expr):
    ok = np.all(np.isfinite(value)) if isinstance(value, np.ndarray) \
        else math.isfinite(value)
    if not ok:
        raise EvalError("non-finite result", pretty(e))
    return value


def evaluate(e: Expr, env: dict):
    """Evaluate over floats or numpy arrays (broadcast per IEEE semantics).

    All free variables must be bound in env.  Domain violations (log or
    sqrt of a negative number, division by zero, overflow to infinity)
    raise EvalError naming the offending subexpression; results are never
    silently NaN.
    """
    if isinstance(e, Lit):
        return e.value
    if isinstance(e, Const):
        return CONSTANTS[e.name]
    if isinstance(e, Var):
        try:
            return env[e.name]
        except KeyError:
            raise EvalError(f"unbound variable '{e.name}'") from None
    if isinstance(e, Neg):
        return -evaluate(e.operand, env)
    if isinstance(e, Bin):
        a = evaluate(e.left, env)
        b = evaluate(e.right, env)
        with np.errstate(all="ignore"):
            if e.op == "+":
                out = a + b
            elif e.op == "-":
                out = a - b
            elif e.op == "*":
                out = a * b
            elif e.op == "/":
                if np.any(b == 0):
                    raise EvalError("division by zero", pretty(e))
                out = a / b
            else:  # ^
                out = np.power(a, b)
        return _check_finite(out, e)
    if isinstance(e, Call):
        args = [evaluate(a, env) for a in e.args]
        a = args[0]
        with np.errstate(all="ignore"):
            if e.fn == "log":
                if np.any(np.asarray(a) <= 0):
                    raise EvalError("log of a non-positive value", pretty(e))
                out = np.log(a)
            elif e.fn == "sqrt":
                if np.any(np.asarray(a) < 0):
                    raise EvalError("sqrt of a negative value", pretty(e))
                out = np.sqrt(a)
            elif e.fn == "sin":
                out = np.sin(a)
            elif e.fn == "cos":
                out = np.cos(a)
            elif e.fn == "exp":
                out = np.exp(a)
            elif e.fn == "tanh":
                out = np.tanh(a)
            elif e.fn == "abs":
                out = np.abs(a)
            elif e.fn == "min":
                out = np.minimum(a, args[1])
            else:  # max
                out = np.maximum(a, args[1])
        if isinstance(out, np.ndarray) and out.ndim == 0:
            out = out.item()
        return _check_finite(out, e)
    raise TypeError(f"not an Expr: {e!r}")


def variables(e: Expr) -> set[str]:
    """Free variables appearing in the expression."""
    if isinstance(e, Var):
        return {e.name}
    if isinstance(e, Neg):
        return variables(e.operand)
    if isinstance(e, Bin):
        return variables(e.left) | variables(e.right)
    if isinstance(e, Call):
        out: set[str] = set()
        for a in e.args:
            out |= variables(a)
        return out
    return set()


def substitute(e: Expr, name: str, replacement: Expr) -> Expr:
    """Replace every occurrence of variable `name` by another expression."""
    if isinstance(e, Var):
        return replacement if e.name == name else e
    if isinstance(e, Neg):
        return Neg(substitute(e.operand, name, replacement))
    if isinstance(e, Bin):
        return Bin(e.op, substitute(e.left, name, replacement),
                   substitute(e.right, name, replacement))
    if isinstance(e, Call):
        return Call(e.fn, tuple(substitute(a, name, replacement) for a in e.args))
    return e


# ---------------------------------------------------------------------------
# Sampled derivative probes
# ---------------------------------------------------------------------------

def sampled_partial(e: Expr, var: str, box: dict[str, tuple[float, float]],
                    grid: int) -> tuple[float, float]:
    """Extreme slopes of e with respect to `var` over a tensor sample grid.

    Central finite differences with step 1e-6 times the width of `var`'s
    interval (1e-6 * max(1, |lo|) when the interval is degenerate).  The
    result brackets the sampled derivative range; it is sound only on the
    probed box.
    """
    if grid < 2:
        raise ValueError("grid must be at least 2 samples per axis")
    if var not in box:
        raise ValueError(f"box does not cover differentiation variable '{var}'")
    names = sorted(box)
    axes = [np.linspace(box[k][0], box[k][1], grid) for k in names]
    mesh = np.meshgrid(*axes, indexing="ij")
    env = {k: m.ravel() for k, m in zip(names, mesh)}
    lo, hi = box[var]
    width = hi - lo
    step = 1e-6 * width if width > 0 else 1e-6 * max(1.0, abs(lo))
    env_hi = dict(env)
    env_hi[var] = env[var] + step
    env_lo = dict(env)
    env_lo[var] = env[var] - step
    slopes = (np.asarray(evaluate(e, env_hi), dtype=float)
              - np.asarray(evaluate(e, env_lo), dtype=float)) / (2.0 * step)
    return float(np.min(slopes)), float(np.max(slopes))


def one_sided_slope(e: Expr, var: str, at: float = 0.0,
                    env: dict | None = None, step: float = 1e-6) -> float:
    """Right-sided difference quotient at a point (for data on [0, inf))."""
    base = dict(env or {})
    lo = dict(base, **{var: at})
    hi = dict(base, **{var: at + step})
    return (float(evaluate(e, hi)) - float(evaluate(e, lo))) / step
