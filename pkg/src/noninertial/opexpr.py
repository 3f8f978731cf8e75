"""Operator-expression mini-language, canonical text form and scenario files.

Expressions are parsed with a small Pratt parser into an AST and evaluated
against a :class:`~noninertial.opalg.SymbolTable`.  The grammar is documented
in ``docs/grammar.md``; scenario files in ``docs/config_schema.md``.
"""

from __future__ import annotations

import configparser
import re
from dataclasses import dataclass, field, fields, replace
from fractions import Fraction
from pathlib import Path
from typing import Mapping

from . import opalg
from .opalg import AlgebraError, GaussianRational, OperatorSeries, SymbolTable

__all__ = [
    "ParseError",
    "ConfigError",
    "parse_expr",
    "parse_ast",
    "format_canonical",
    "ScenarioConfig",
    "parse_scenario",
    "scenario_from_string",
    "dump_scenario",
]

MAX_POWER = 64
MAX_DEPTH = 200
# bound on term-pair products over one evaluation, so hostile input fails fast
MAX_WORK = 20_000
MAX_SQRT_TERMS = 12


class ParseError(ValueError):
    def __init__(self, message: str, line: int = 1, col: int = 1):
        self.message, self.line, self.col = message, line, col
        super().__init__(f"{message} (line {line}, column {col})")


# -- tokens -----------------------------------------------------------------

_TOKEN = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<decimal>\d+\.\d*|\.\d+)
  | (?P<num>\d+(?:/\d+)?i?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>[-+*/^()\[\]{},])
    """,
    re.VERBOSE,
)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        chunk = m.group()
        if kind == "decimal":
            raise ParseError(f"decimal literal {chunk!r} not allowed; write a rational p/q", line, col)
        if kind != "ws":
            tokens.append(Token(kind, chunk, line, col))
        nl = chunk.count("\n")
        if nl:
            line += nl
            line_start = pos + chunk.rindex("\n") + 1
        pos = m.end()
    end_col = len(text) - line_start + 1
    tokens.append(Token("end", "", line, end_col))
    return tokens


# -- AST ----------------------------------------------------------------------

@dataclass(frozen=True)
class Node:
    kind: str  # num, sym, eps, light, add, sub, mul, div, neg, pow, comm, acomm, sqrt
    args: tuple = ()
    value: object = None
    line: int = 1
    col: int = 1


class _Parser:
    BINARY = {"+": 10, "-": 10, "*": 20, "/": 20}

    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0
        self.depth = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        t = self.tok
        if t.text != text or t.kind not in ("op",):
            shown = t.text or "end of input"
            raise ParseError(f"expected {text!r}, found {shown!r}", t.line, t.col)
        return self.advance()

    def parse(self) -> Node:
        node = self.expr(0)
        if self.tok.kind != "end":
            raise ParseError(f"unexpected {self.tok.text!r}", self.tok.line, self.tok.col)
        return node

    def expr(self, rbp: int) -> Node:
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise ParseError("expression nested too deeply", self.tok.line, self.tok.col)
        left = self.prefix()
        while True:
            t = self.tok
            lbp = self.BINARY.get(t.text, 0) if t.kind == "op" else 0
            if lbp <= rbp:
                break
            self.advance()
            right = self.expr(lbp)
            kind = {"+": "add", "-": "sub", "*": "mul", "/": "div"}[t.text]
            left = Node(kind, (left, right), line=t.line, col=t.col)
        self.depth -= 1
        return left

    def prefix(self) -> Node:
        t = self.tok
        if t.kind == "op" and t.text in "+-":
            self.advance()
            operand = self.expr(25)
            return operand if t.text == "+" else Node("neg", (operand,), line=t.line, col=t.col)
        return self.power()

    def power(self) -> Node:
        base = self.atom()
        if self.tok.kind == "op" and self.tok.text == "^":
            caret = self.advance()
            sign = 1
            if self.tok.kind == "op" and self.tok.text == "-":
                self.advance()
                sign = -1
            t = self.tok
            if t.kind != "num" or not t.text.isdigit():
                raise ParseError("exponent must be an integer literal", t.line, t.col)
            self.advance()
            n = sign * int(t.text)
            if abs(n) > MAX_POWER:
                raise ParseError(f"exponent {n} exceeds limit {MAX_POWER}", t.line, t.col)
            base = Node("pow", (base,), value=n, line=caret.line, col=caret.col)
            if self.tok.kind == "op" and self.tok.text == "^":
                raise ParseError("chained powers need parentheses", self.tok.line, self.tok.col)
        return base

    def atom(self) -> Node:
        t = self.tok
        if t.kind == "num":
            self.advance()
            text = t.text
            imag = text.endswith("i")
            if re.search(r"/0+i?$", text):
                raise ParseError("zero denominator in literal", t.line, t.col)
            q = Fraction(text[:-1] if imag else text)
            value = GaussianRational(0, q) if imag else GaussianRational(q)
            return Node("num", value=value, line=t.line, col=t.col)
        if t.kind == "ident":
            self.advance()
            if t.text == "sqrt_series":
                self.expect("(")
                arg = self.expr(0)
                self.expect(",")
                k = self.tok
                sign = 1
                if k.kind == "op" and k.text == "-":
                    self.advance()
                    sign = -1
                    k = self.tok
                if k.kind != "num" or not k.text.isdigit():
                    raise ParseError("truncation order must be an integer literal", k.line, k.col)
                self.advance()
                self.expect(")")
                return Node("sqrt", (arg,), value=sign * int(k.text), line=t.line, col=t.col)
            if t.text == "eps":
                return Node("eps", line=t.line, col=t.col)
            if t.text == "c":
                return Node("light", line=t.line, col=t.col)
            if t.text == "i":
                return Node("num", value=GaussianRational(0, 1), line=t.line, col=t.col)
            return Node("sym", value=t.text, line=t.line, col=t.col)
        if t.kind == "op" and t.text in "([{":
            self.advance()
            first = self.expr(0)
            if t.text == "(":
                self.expect(")")
                return first
            self.expect(",")
            second = self.expr(0)
            self.expect("]" if t.text == "[" else "}")
            return Node("comm" if t.text == "[" else "acomm", (first, second), line=t.line, col=t.col)
        shown = t.text or "end of input"
        raise ParseError(f"unexpected {shown!r}", t.line, t.col)


def parse_ast(text: str) -> Node:
    """Parse ``text`` into an AST without resolving symbols."""
    try:
        return _Parser(text).parse()
    except RecursionError:
        raise ParseError("expression nested too deeply") from None


def _fail(node: Node, message: str):
    raise ParseError(message, node.line, node.col)


def _product(node: Node, a: OperatorSeries, b: OperatorSeries, op, budget: list) -> OperatorSeries:
    budget[0] -= len(a) * len(b)
    if budget[0] < 0:
        _fail(node, "expression too large to expand")
    return op(a, b)


def _evaluate(node: Node, table: SymbolTable, env: Mapping[str, OperatorSeries], order,
              budget: list) -> OperatorSeries:
    kind = node.kind
    if kind == "num":
        return table.number(node.value, order)
    if kind == "eps":
        return table.eps(1, order)
    if kind == "light":
        _fail(node, "the speed of light may only appear with an even power, e.g. c^2")
    if kind == "sym":
        name = node.value
        if name in env:
            return env[name].with_order(order) if order is not None else env[name]
        if table.is_operator(name):
            return table.op(name, order)
        if table.is_scalar(name):
            return table.scalar(name, 1, order)
        _fail(node, f"unknown symbol {name!r}")
    if kind == "pow":
        (base,) = node.args
        n = node.value
        if base.kind == "light":
            if n % 2:
                _fail(node, "the speed of light may only appear with an even power")
            return table.eps(-n // 2, order)
        value = _evaluate(base, table, env, order, budget)
        if n < 0:
            try:
                value = value.inverse_monomial()
            except AlgebraError as exc:
                _fail(node, f"negative power: {exc}")
            n = -n
        out = table.one(order)
        for _ in range(n):
            out = _product(node, out, value, opalg.multiply, budget)
        return out
    if kind == "neg":
        return -_evaluate(node.args[0], table, env, order, budget)
    if kind == "sqrt":
        inner = _evaluate(node.args[0], table, env, None, budget)
        if node.value < 0:
            _fail(node, "truncation order must be non-negative")
        lowest = min(inner.eps_orders(), default=0)
        if node.value - lowest // 2 > MAX_SQRT_TERMS:
            _fail(node, f"square-root expansion would need more than {MAX_SQRT_TERMS} binomial terms")
        return opalg.series_sqrt(inner, node.value)
    a = _evaluate(node.args[0], table, env, order, budget)
    b = _evaluate(node.args[1], table, env, order, budget)
    if kind == "add":
        return a + b
    if kind == "sub":
        return a - b
    if kind == "mul":
        return _product(node, a, b, opalg.multiply, budget)
    if kind == "div":
        if not b.is_scalar():
            _fail(node, "division by an operator is not allowed")
        if b.is_zero():
            _fail(node, "division by zero")
        if len(b) != 1:
            _fail(node, "divisor must be a single scalar monomial")
        return opalg.multiply(a, b.inverse_monomial())
    if kind == "comm":
        return _product(node, a, b, opalg.commutator, budget)
    if kind == "acomm":
        return _product(node, a, b, opalg.anticommutator, budget)
    raise AssertionError(kind)


def parse_expr(text: str, table: SymbolTable, env: Mapping[str, OperatorSeries] | None = None,
               order: int | None = ...) -> OperatorSeries:
    """Parse and evaluate an operator expression.

    ``env`` maps extra names (macros such as ``H0`` or ``K_x``) to series and
    shadows the table's symbols.  Every failure, including algebra errors
    raised during evaluation, surfaces as :class:`ParseError`.
    """
    order = table._order(order)
    tree = parse_ast(text)
    try:
        return _evaluate(tree, table, env or {}, order, [MAX_WORK])
    except ParseError:
        raise
    except AlgebraError as exc:
        raise ParseError(str(exc), tree.line, tree.col) from None
    except RecursionError:
        raise ParseError("expression nested too deeply") from None


# -- canonical text -------------------------------------------------------------

def _frac(q: Fraction) -> str:
    return f"{q.numerator}/{q.denominator}"


def _coeff_text(c: GaussianRational) -> str:
    if not c.im:
        return f"({_frac(c.re)})"
    re_part = "0" if not c.re else _frac(c.re)
    sign = "-" if c.im < 0 else "+"
    return f"({re_part}{sign}{_frac(abs(c.im))}i)"


def format_canonical(a: OperatorSeries) -> str:
    """Deterministic text form, e.g. ``(-1/8)*M^-3 * eps^1 * P_x^4``.

    Terms follow the sorted ``(eps power, operator word, scalar monomial)``
    order; ``parse_expr`` reads the output back to an equal series.
    """
    if a.is_zero():
        return "0"
    parts = []
    for coeff, e, factors, scalars in a:
        text = _coeff_text(coeff) + "".join(f"*{n}^{p}" for n, p in scalars)
        if e:
            text += f" * eps^{e}"
        if factors:
            text += " * " + "*".join(f"{n}^{p}" for n, p in factors)
        parts.append(text)
    return " + ".join(parts)


# -- scenario files ---------------------------------------------------------------

class ConfigError(ValueError):
    pass


TAGS = ("a", "b", "c", "d")
SUPPORT_MODES = ("none", "classical_tuned", "quantum_operator")


@dataclass(frozen=True)
class ScenarioConfig:
    """One observer/particle constellation run (see ``docs/config_schema.md``)."""

    tag: str = "b"
    order: int = 1
    support: str = "none"
    frozen_cm: bool = False
    # physics, dimensionless units with hbar = 1
    g: Fraction = Fraction(1, 1000)
    c: Fraction = Fraction(10)
    M: Fraction = Fraction(1)
    omega_int: Fraction = Fraction(1)
    nbar: Fraction = Fraction(1)
    dx: Fraction = Fraction(10)
    center: Fraction = Fraction(0)
    width: Fraction | None = None
    momentum: Fraction = Fraction(0)
    lam: Fraction = Fraction(0)
    curvature: bool = False
    # truncation
    D_cm: int = 32
    D_int: int = 16
    n_max: int | None = None
    thermal_tail: Fraction = Fraction(1, 10**10)
    omega_cm: Fraction = Fraction(1, 100)
    trap: bool = False
    # propagator
    dt: Fraction = Fraction(1, 100)
    t_max: Fraction = Fraction(1)
    krylov_dim: int = 20
    tol: Fraction = Fraction(1, 10**12)
    record_every: int = 1
    # output
    out_dir: str = "out"
    format: str = "csv"
    name: str = "scenario"

    @property
    def c2(self) -> Fraction:
        return self.c * self.c

    def validate(self) -> "ScenarioConfig":
        failed = []
        if self.tag not in TAGS:
            failed.append(f"tag must be one of {TAGS}")
        if self.order not in (0, 1):
            failed.append("order must be 0 or 1")
        if self.support not in SUPPORT_MODES:
            failed.append(f"support must be one of {SUPPORT_MODES}")
        elif self.support != "none" and self.tag != "d":
            failed.append("support potentials only apply to scenario d")
        if self.support == "classical_tuned" and self.order != 1:
            failed.append("classical_tuned support needs order = 1")
        if self.D_cm < 2:
            failed.append("D_cm >= 2")
        if self.D_int < 2:
            failed.append("D_int >= 2")
        if self.n_max is not None and not 0 <= self.n_max < self.D_int:
            failed.append("0 <= n_max < D_int")
        if self.dt <= 0:
            failed.append("dt > 0")
        if self.t_max < self.dt:
            failed.append("t_max >= dt")
        if self.c <= 0:
            failed.append("c^2 > 0 (c > 0)")
        if self.nbar < 0:
            failed.append("nbar >= 0")
        if self.M <= 0:
            failed.append("M > 0")
        if self.omega_cm <= 0:
            failed.append("omega_cm > 0")
        if self.width is not None and self.width <= 0:
            failed.append("width > 0")
        if not 0 < self.thermal_tail < 1:
            failed.append("0 < thermal_tail < 1")
        if self.krylov_dim < 2:
            failed.append("krylov_dim >= 2")
        if self.tol <= 0:
            failed.append("tol > 0")
        if self.record_every < 1:
            failed.append("record_every >= 1")
        if self.format not in ("csv", "json"):
            failed.append("format must be csv or json")
        if failed:
            raise ConfigError("invalid scenario: " + "; ".join(failed))
        return self


def _as_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def _as_int(text: str) -> int:
    q = Fraction(text.strip())
    if q.denominator != 1:
        raise ValueError("expected an integer")
    return int(q)


def _as_bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("true", "yes", "on", "1"):
        return True
    if t in ("false", "no", "off", "0"):
        return False
    raise ValueError("expected true/false")


def _optional(conv):
    def parse(text):
        return None if text.strip().lower() in ("auto", "none", "") else conv(text)

    return parse


# section -> key -> (field name, converter)
SCHEMA: dict[str, dict[str, tuple]] = {
    "scenario": {
        "tag": ("tag", str.strip),
        "order": ("order", _as_int),
        "support": ("support", str.strip),
        "frozen_cm": ("frozen_cm", _as_bool),
    },
    "physics": {
        "g": ("g", _as_rational),
        "c": ("c", _as_rational),
        "M": ("M", _as_rational),
        "omega_int": ("omega_int", _as_rational),
        "nbar": ("nbar", _as_rational),
        "dx": ("dx", _as_rational),
        "center": ("center", _as_rational),
        "width": ("width", _optional(_as_rational)),
        "momentum": ("momentum", _as_rational),
        "lambda": ("lam", _as_rational),
        "curvature": ("curvature", _as_bool),
    },
    "truncation": {
        "D_cm": ("D_cm", _as_int),
        "D_int": ("D_int", _as_int),
        "n_max": ("n_max", _optional(_as_int)),
        "thermal_tail": ("thermal_tail", _as_rational),
        "omega_cm": ("omega_cm", _as_rational),
        "trap": ("trap", _as_bool),
    },
    "propagator": {
        "dt": ("dt", _as_rational),
        "t_max": ("t_max", _as_rational),
        "krylov_dim": ("krylov_dim", _as_int),
        "tol": ("tol", _as_rational),
        "record_every": ("record_every", _as_int),
    },
    "output": {
        "dir": ("out_dir", str.strip),
        "format": ("format", str.strip),
        "name": ("name", str.strip),
    },
}


def scenario_from_string(text: str, source: str = "<string>") -> ScenarioConfig:
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#", ";"),
                                       inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=source)
    except configparser.Error as exc:
        raise ConfigError(f"{source}: malformed scenario file: {exc}") from None
    values = {}
    for section in parser.sections():
        spec = SCHEMA.get(section)
        if spec is None:
            raise ConfigError(f"{source}: unknown section [{section}]")
        for key, raw in parser.items(section):
            if key not in spec:
                raise ConfigError(f"{source}: unknown key {section}.{key}")
            name, conv = spec[key]
            try:
                values[name] = conv(raw)
            except (ValueError, ZeroDivisionError) as exc:
                raise ConfigError(f"{source}: bad value for {section}.{key} = {raw!r}: {exc}") from None
    return ScenarioConfig(**values).validate()


def parse_scenario(path) -> ScenarioConfig:
    """Read and validate a scenario file; unknown keys are rejected."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return scenario_from_string(text, str(path))


def dump_scenario(cfg: ScenarioConfig) -> str:
    """Scenario file text that parses back to ``cfg``."""
    lines = []
    for section, spec in SCHEMA.items():
        lines.append(f"[{section}]")
        for key, (name, _) in spec.items():
            value = getattr(cfg, name)
            if value is None:
                text = "auto"
            elif isinstance(value, bool):
                text = "true" if value else "false"
            else:
                text = str(value)
            lines.append(f"{key} = {text}")
        lines.append("")
    return "\n".join(lines)


def config_dict(cfg: ScenarioConfig) -> dict:
    """JSON-friendly echo of a config (rationals as strings)."""
    out = {}
    for f in fields(cfg):
        v = getattr(cfg, f.name)
        out[f.name] = str(v) if isinstance(v, Fraction) else v
    return out


def with_overrides(cfg: ScenarioConfig, **changes) -> ScenarioConfig:
    return replace(cfg, **changes).validate()
