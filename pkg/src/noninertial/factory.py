"""Named operators of relativistic c.m. dynamics and the identity suite.

Everything here is built from :mod:`noninertial.opalg` primitives with exact
coefficients.  ``eps`` stands for ``1/c**2``; ``hbar`` is kept explicit.
"""

from __future__ import annotations

import configparser
import json
from dataclasses import dataclass, field
from fractions import Fraction
from importlib import resources
from itertools import product
from typing import Iterable, Sequence

from . import opalg
from .opalg import (
    AlgebraError,
    GaussianRational,
    OperatorSeries,
    SymbolTable,
    anticommutator,
    commutator,
    multiply,
    series_sqrt,
)
from .opexpr import ParseError, format_canonical, parse_expr

AXES = "xyz"


def levi_civita(i: int, j: int, k: int) -> int:
    return (i - j) * (j - k) * (k - i) // 2


@dataclass(frozen=True)
class GeneratorSet:
    """The ten Poincare generators at ``t = 0``, truncated at ``eps**order``."""

    table: SymbolTable
    P: tuple[OperatorSeries, ...]
    J: tuple[OperatorSeries, ...]
    K: tuple[OperatorSeries, ...]
    H: OperatorSeries
    form: str
    order: int

    def all(self) -> dict[str, OperatorSeries]:
        out = {"H": self.H}
        for name, group in (("P", self.P), ("J", self.J), ("K", self.K)):
            for a, g in zip(AXES, group):
                out[f"{name}{a}"] = g
        return out


def _check_order(K: int) -> None:
    if not isinstance(K, int) or K < 0:
        raise AlgebraError(f"truncation order must be a non-negative integer, got {K!r}")


def _cross(table, r: Sequence[OperatorSeries], p: Sequence[OperatorSeries]) -> tuple:
    return tuple(
        multiply(r[(i + 1) % 3], p[(i + 2) % 3]) - multiply(r[(i + 2) % 3], p[(i + 1) % 3])
        for i in range(3)
    )


def build_free_particle_generators(masses: Sequence[str] = ("m1",), K: int = 1) -> GeneratorSet:
    """Generators of ``N`` free spinless particles (no interaction, no interaction boost)."""
    _check_order(K)
    n = len(masses)
    table = opalg.particle_table(n, 3, order=K)
    if tuple(masses) != tuple(f"m{mu}" for mu in range(1, n + 1)):
        raise AlgebraError("masses must be named m1, m2, ... in order")
    zero = table.zero(K)
    P, J, Kb = [zero] * 3, [zero] * 3, [zero] * 3
    H = zero
    for mu in range(1, n + 1):
        r = [table.op(f"{a}{mu}", None) for a in AXES]
        p = [table.op(f"p{a}{mu}", None) for a in AXES]
        m = table.scalar(f"m{mu}", 1, None)
        p2 = sum((multiply(q, q) for q in p), table.zero(None))
        T = series_sqrt(p2 * table.eps(-1, None) + multiply(m, m) * table.eps(-2, None), K)
        H = H + T
        half_eps = table.eps(1, None) * Fraction(1, 2)
        L = _cross(table, r, p)
        for i in range(3):
            P[i] = P[i] + p[i].with_order(K)
            J[i] = J[i] + L[i].with_order(K)
            Kb[i] = Kb[i] + multiply(half_eps, anticommutator(r[i], T)).with_order(K)
    return GeneratorSet(table, tuple(P), tuple(J), tuple(Kb), H, "free", K)


def cm_hrel(table: SymbolTable) -> OperatorSeries:
    """Composite internal Hamiltonian ``M c^2 + Hrel0 + eps Hrel1``."""
    M = table.scalar("M", 1, None)
    return M * table.eps(-1, None) + table.op("Hrel0", None) + table.eps(1, None) * table.op("Hrel1", None)


def momentum_squared(table: SymbolTable) -> OperatorSeries:
    out = table.zero(None)
    for a in AXES:
        name = f"P_{a}"
        if table.is_operator(name):
            q = table.op(name, None)
            out = out + multiply(q, q)
    return out


def minkowski_argument(table: SymbolTable) -> OperatorSeries:
    """``P^2 c^2 + Hrel^2`` with ``Hrel`` expanded; exact, untruncated."""
    hrel = cm_hrel(table)
    return momentum_squared(table) * table.eps(-1, None) + multiply(hrel, hrel)


def build_cm_generators(K: int = 1, dims: int = 3, table: SymbolTable | None = None) -> GeneratorSet:
    """Relativistic single-particle form in c.m. variables."""
    _check_order(K)
    if table is None:
        table = opalg.cm_table(dims, order=K)
    dims = sum(table.is_operator(n) for n in ("X", "Y", "Z"))
    H = series_sqrt(minkowski_argument(table), K)
    pos = [table.op(n, None) for n in ("X", "Y", "Z")[:dims]]
    mom = [table.op(f"P_{a}", None) for a in AXES[:dims]]
    zero = table.zero(K)
    half_eps = table.eps(1, None) * Fraction(1, 2)
    Kb = tuple(multiply(half_eps, anticommutator(x, H.with_order(None))).with_order(K) for x in pos)
    P = tuple(p.with_order(K) for p in mom)
    if dims == 3:
        J = tuple(j.with_order(K) for j in _cross(table, pos, mom))
    else:
        J = ()
    pad = lambda t: t + (zero,) * (3 - len(t))  # noqa: E731
    return GeneratorSet(table, pad(P), pad(J), pad(Kb), H, "cm", K)


def h_minkowski(K: int = 1, dims: int = 3, table: SymbolTable | None = None) -> OperatorSeries:
    if table is None:
        table = opalg.cm_table(dims, order=K)
    return series_sqrt(minkowski_argument(table), K)


def h_rindler(K: int = 1, via: str = "anticommutator", dims: int = 3,
              table: SymbolTable | None = None, g=None) -> OperatorSeries:
    """Rindler Hamiltonian for acceleration ``g`` along x.

    ``via="anticommutator"`` forms ``H + (g eps/2){X, H}`` directly;
    ``via="boost"`` adds ``g K_x`` from the generator set.  ``g`` defaults to
    the scalar symbol ``g``; pass a number or series to override.
    """
    if table is None:
        table = opalg.cm_table(dims, order=K)
    gs = table.scalar("g", 1, None) if g is None else _as_scalar_series(table, g)
    if via == "anticommutator":
        H = h_minkowski(K, table=table)
        X = table.op("X", None)
        extra = multiply(gs * table.eps(1, None) * Fraction(1, 2), anticommutator(X, H.with_order(None)))
        return (H + extra).with_order(K)
    if via == "boost":
        gen = build_cm_generators(K, table=table)
        return (gen.H + multiply(gs, gen.K[0])).with_order(K)
    raise ValueError(f"via must be 'anticommutator' or 'boost', not {via!r}")


def _as_scalar_series(table: SymbolTable, value) -> OperatorSeries:
    if isinstance(value, OperatorSeries):
        if not value.is_scalar():
            raise AlgebraError("alpha/beta must be scalars")
        return value.with_order(None)
    if isinstance(value, str):
        return table.scalar(value, 1, None)
    return table.number(Fraction(value), None)


def u_support(mode: str = "quantum", alpha=Fraction(1, 2), beta=None, dims: int = 3,
              table: SymbolTable | None = None, K: int = 1) -> OperatorSeries:
    """Supporting potential that holds the particle against the acceleration.

    ``mode="classical_level0"`` gives ``-M g X``; ``mode="quantum"`` adds the
    momentum-dependent first-order term with weights ``alpha`` (for ``X P^2``)
    and ``beta`` (for ``P^2 X``).  ``beta`` defaults to ``1 - alpha``; any pair
    not summing to one is rejected.
    """
    if table is None:
        table = opalg.cm_table(dims, order=K)
    M, g = table.scalar("M", 1, None), table.scalar("g", 1, None)
    X = table.op("X", None)
    level0 = -multiply(M * g, X)
    if mode == "classical_level0":
        return level0.with_order(K)
    if mode != "quantum":
        raise ValueError(f"unknown support mode {mode!r}")
    a = _as_scalar_series(table, alpha)
    b = table.one(None) - a if beta is None else _as_scalar_series(table, beta)
    if not (a + b - 1).is_zero():
        raise AlgebraError(f"alpha + beta must equal 1, got {format_canonical(a + b)}")
    return (level0 + table.eps(1, None) * quantum_support_first_order(table, a, b)).with_order(K)


def quantum_support_first_order(table: SymbolTable, alpha, beta) -> OperatorSeries:
    """First-order part ``-Hrel0 g X - (g/2M)(alpha X P^2 + beta P^2 X)``."""
    M, g = table.scalar("M", 1, None), table.scalar("g", 1, None)
    X, H0 = table.op("X", None), table.op("Hrel0", None)
    p2 = momentum_squared(table)
    a = _as_scalar_series(table, alpha)
    b = _as_scalar_series(table, beta)
    mixed = multiply(a, multiply(X, p2)) + multiply(b, multiply(p2, X))
    return -multiply(g, multiply(H0, X)) - multiply(g * Fraction(1, 2) / M, mixed)


def no_acceleration_lhs(U: OperatorSeries) -> OperatorSeries:
    """``[P_x, U] - (i/2 hbar)[[X, U], P^2]`` for an eps-free potential ``U``."""
    table = U.table
    U = U.with_order(None)
    X, Px = table.op("X", None), table.op("P_x", None)
    p2 = momentum_squared(table)
    coeff = table.scalar("hbar", -1, None) * GaussianRational(0, Fraction(1, 2))
    return commutator(Px, U) - multiply(coeff, commutator(commutator(X, U), p2))


def no_acceleration_rhs(table: SymbolTable) -> OperatorSeries:
    """``i hbar g (Hrel0 + (P^2 - 2 P_x^2)/2M)``."""
    Px = table.op("P_x", None)
    M = table.scalar("M", 1, None)
    inner = table.op("Hrel0", None) + (momentum_squared(table) - multiply(Px, Px) * 2) * Fraction(1, 2) / M
    return multiply(table.scalar("hbar", 1, None) * table.scalar("g", 1, None) * GaussianRational(0, 1), inner)


# -- scenario Hamiltonians ----------------------------------------------------------

def scenario_hamiltonian(tag: str, K: int = 1, support: str = "none", curvature: bool = False,
                         table: SymbolTable | None = None) -> OperatorSeries:
    """Hamiltonian of one observer/particle constellation on a 1-D c.m. table.

    a: inertial observer, free particle.  b: accelerated observer, free
    particle.  c: inertial observer, particle pushed by the accelerating
    potential ``MgX + eps(Hrel0 gX + (g/4M){X,P^2})``, which makes it equal to
    b.  d: accelerated observer plus a supporting potential; ``support``
    selects ``quantum_operator`` (symmetric form), ``classical_tuned``
    (``-MgX + eps u1 X`` with the scalar ``u1`` re-bound each step) or none.
    ``curvature`` adds ``eps * M g^2 X^2 / 2``.
    """
    if table is None:
        table = opalg.cm_table(1, order=K)
    if support != "none" and tag != "d":
        raise ValueError("support potentials only apply to scenario d")
    M, g = table.scalar("M", 1, None), table.scalar("g", 1, None)
    X = table.op("X", None)
    HM = h_minkowski(K, table=table)
    if tag == "a":
        H = HM
    elif tag in ("b", "d"):
        H = h_rindler(K, "anticommutator", table=table)
    elif tag == "c":
        p2 = momentum_squared(table)
        push = multiply(M * g, X) + table.eps(1, None) * (
            multiply(g, multiply(table.op("Hrel0", None), X))
            + multiply(g * Fraction(1, 4) / M, anticommutator(X, p2)))
        H = HM + push
    else:
        raise ValueError(f"unknown scenario tag {tag!r}")
    if tag == "d":
        if support == "quantum_operator":
            H = H + u_support("quantum", Fraction(1, 2), table=table, K=K)
        elif support == "classical_tuned":
            u1 = table.scalar("u1", 1, None)
            H = H - multiply(M * g, X) + table.eps(1, None) * multiply(u1, X)
        elif support != "none":
            raise ValueError(f"unknown support mode {support!r}")
    if curvature:
        H = H + table.eps(1, None) * multiply(M * g * g * Fraction(1, 2), multiply(X, X))
    return H.with_order(K)


# -- identity suite ---------------------------------------------------------------

GENERATOR_KINDS = ("cm", "free1", "free2", "none")


@dataclass(frozen=True)
class IdentityCase:
    name: str
    lhs: str
    rhs: str
    order: int = 1
    generators: str = "cm"
    anchor: str = ""


@dataclass
class IdentityResult:
    name: str
    passed: bool
    residual: str
    anchor: str
    error: str | None = None


@dataclass
class IdentityReport:
    results: list[IdentityResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(r.passed for r in self.results)

    @property
    def failures(self) -> list[IdentityResult]:
        return [r for r in self.results if not r.passed]

    def summary(self) -> dict:
        return {"cases": len(self.results), "passed": sum(r.passed for r in self.results),
                "failed": [r.name for r in self.failures]}

    def to_dict(self) -> dict:
        return {"schema": "identity-report/1", "summary": self.summary(),
                "cases": [r.__dict__ for r in self.results]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def environment(kind: str, order: int) -> tuple[SymbolTable, dict[str, OperatorSeries]]:
    """Symbol table and macro names available to identity expressions.

    Common names: ``H, Px..Pz, Jx..Jz, Kx..Kz``.  The c.m. set adds ``HM``,
    ``HR`` (Rindler), ``H0`` (``P^2/2M + Hrel0``), ``Psq`` and the composite
    ``Hrel``; particle sets add ``psq1, psq2, ...``.
    """
    if kind == "cm":
        table = opalg.cm_table(3, order=order)
        gen = build_cm_generators(order, table=table)
        env = gen.all()
        p2 = momentum_squared(table)
        env.update(
            HM=gen.H,
            HR=h_rindler(order, "anticommutator", table=table),
            Psq=p2,
            H0=p2 * Fraction(1, 2) / table.scalar("M", 1, None) + table.op("Hrel0", None),
            Hrel=cm_hrel(table),
        )
        return table, env
    if kind in ("free1", "free2"):
        n = int(kind[-1])
        gen = build_free_particle_generators(tuple(f"m{mu}" for mu in range(1, n + 1)), order)
        env = gen.all()
        for mu in range(1, n + 1):
            env[f"psq{mu}"] = sum((multiply(q, q) for q in
                                   (gen.table.op(f"p{a}{mu}", None) for a in AXES)), gen.table.zero(None))
        return gen.table, env
    if kind == "none":
        return opalg.cm_table(3, order=order), {}
    raise ValueError(f"unknown generator set {kind!r}")


def check_case(case: IdentityCase, table: SymbolTable, env: dict) -> IdentityResult:
    try:
        lhs = parse_expr(case.lhs, table, env, order=case.order)
        rhs = parse_expr(case.rhs, table, env, order=case.order)
    except (ParseError, AlgebraError) as exc:
        return IdentityResult(case.name, False, "", case.anchor, error=str(exc))
    residual = (lhs - rhs).with_order(case.order)
    return IdentityResult(case.name, residual.is_zero(), format_canonical(residual), case.anchor)


def run_identity_suite(cases: Iterable[IdentityCase]) -> IdentityReport:
    """Evaluate every case; failures become report entries, never exceptions."""
    envs: dict[tuple, tuple] = {}
    report = IdentityReport()
    for case in cases:
        key = (case.generators, case.order)
        if key not in envs:
            envs[key] = environment(*key)
        report.results.append(check_case(case, *envs[key]))
    return report


def poincare_cases(kind: str, order: int = 1) -> list[IdentityCase]:
    """All Lie-algebra relations of the ten generators, with ``hbar`` explicit."""
    cases = []

    def add(name, lhs, rhs):
        cases.append(IdentityCase(f"poincare_{kind}_{name}", lhs, rhs, order, kind, "poincare-algebra"))

    def eps_sum(prefix, i, j, tail=""):
        terms = []
        for k in range(3):
            s = levi_civita(i, j, k)
            if s:
                terms.append(f"{'+' if s > 0 else '-'}i*hbar*{prefix}{AXES[k]}{tail}")
        return "".join(terms).lstrip("+") or "0"

    for i, j in product(range(3), repeat=2):
        a, b = AXES[i], AXES[j]
        add(f"PP_{a}{b}", f"[P{a},P{b}]", "0")
        add(f"JJ_{a}{b}", f"[J{a},J{b}]", eps_sum("J", i, j))
        add(f"JP_{a}{b}", f"[J{a},P{b}]", eps_sum("P", i, j))
        add(f"JK_{a}{b}", f"[J{a},K{b}]", eps_sum("K", i, j))
        add(f"KP_{a}{b}", f"[K{a},P{b}]", "i*hbar*H*eps" if i == j else "0")
        kk = eps_sum("J", i, j, "*eps")
        add(f"KK_{a}{b}", f"[K{a},K{b}]", "0" if kk == "0" else "-(" + kk + ")")
    for a in AXES:
        add(f"PH_{a}", f"[P{a},H]", "0")
        add(f"JH_{a}", f"[J{a},H]", "0")
        add(f"KH_{a}", f"[K{a},H]", f"i*hbar*P{a}")
    return cases


# Cases that are written by hand in the data file; the Poincare relations are
# generated by ``poincare_cases`` and appended when the file is regenerated.
_HAND_CASES = [
    IdentityCase("contraction_cm_KP", "[Kx,Px]", "i*hbar*M", 0, "cm", "galilei-contraction"),
    IdentityCase("contraction_cm_KK", "[Kx,Ky]", "0", 0, "cm", "galilei-contraction"),
    IdentityCase("contraction_free1_KP", "[Kx,Px]", "i*hbar*m1", 0, "free1", "galilei-contraction"),
    IdentityCase("contraction_free2_KP", "[Ky,Py]", "i*hbar*(m1+m2)", 0, "free2", "galilei-contraction"),
    IdentityCase("contraction_free2_KK", "[Kx,Kz]", "0", 0, "free2", "galilei-contraction"),
    IdentityCase("galilei_cm_H", "H", "M*c^2 + Psq/(2*M) + Hrel0", 0, "cm", "galilei-single-particle"),
    IdentityCase("galilei_cm_K", "Kx", "M*X", 0, "cm", "galilei-single-particle"),
    IdentityCase("kinetic_free1", "H", "m1*c^2 + psq1/(2*m1) - eps*psq1^2/(8*m1^3)", 1, "free1",
                 "single-particle-kinetic-energy"),
    IdentityCase("minkowski_expansion", "sqrt_series(Psq*c^2 + Hrel^2, 1)",
                 "M*c^2 + Psq/(2*M) + Hrel0 + eps*(-Psq^2/(8*M^3) + Hrel1 - Psq*Hrel0/(2*M^2))",
                 1, "cm", "minkowski-expansion"),
    IdentityCase("rindler_two_constructions", "HM + g*eps/2*{X,HM}", "HM + g*Kx", 1, "cm",
                 "rindler-killing-map"),
    IdentityCase("rindler_expansion", "HR",
                 "M*c^2 + Psq/(2*M) + Hrel0 + M*g*X + eps*(-Psq^2/(8*M^3) + Hrel1 - Psq*Hrel0/(2*M^2)"
                 " + g/(4*M)*{X,Psq} + Hrel0*g*X)", 1, "cm", "rindler-expansion"),
    IdentityCase("comm_X_H0", "[X,H0]", "i*hbar/M*P_x", 1, "cm", "h0-commutators"),
    IdentityCase("comm_X_XH0", "[X,{X,H0}]", "i*hbar/M*{X,P_x}", 1, "cm", "h0-commutators"),
    IdentityCase("comm_XH0_XH0", "[[X,H0],{X,H0}]", "2*hbar^2/M*H0", 1, "cm", "h0-commutators"),
    IdentityCase("comm_XXH0_H0", "[[X,{X,H0}],H0]", "-2*hbar^2/M^2*P_x^2", 1, "cm", "h0-commutators"),
    IdentityCase("comm_XXH0_X", "[[X,{X,H0}],X]", "2*hbar^2/M*X", 1, "cm", "h0-commutators"),
    IdentityCase("pot_P_X", "[P_x,X]", "-i*hbar", 1, "cm", "potential-commutators"),
    IdentityCase("pot_X_X", "[[X,X],Psq]", "0", 1, "cm", "potential-commutators"),
    IdentityCase("pot_P_XP", "[P_x,X*P_x]", "-i*hbar*P_x", 1, "cm", "potential-commutators"),
    IdentityCase("pot_X_XP", "[[X,X*P_x],Psq]", "-2*hbar^2*P_x", 1, "cm", "potential-commutators"),
    IdentityCase("pot_P_XPsq", "[P_x,X*Psq]", "-i*hbar*Psq", 1, "cm", "potential-commutators"),
    IdentityCase("pot_X_XPsq", "[[X,X*Psq],Psq]", "-4*hbar^2*P_x^2", 1, "cm", "potential-commutators"),
    IdentityCase("pot_P_PsqX", "[P_x,Psq*X]", "-i*hbar*Psq", 1, "cm", "potential-commutators"),
    IdentityCase("pot_X_PsqX", "[[X,Psq*X],Psq]", "-4*hbar^2*P_x^2", 1, "cm", "potential-commutators"),
    IdentityCase(
        "no_acceleration_family",
        "[P_x, -Hrel0*g*X - g/(2*M)*(alpha*X*Psq + (1-alpha)*Psq*X)]"
        " - i/(2*hbar)*[[X, -Hrel0*g*X - g/(2*M)*(alpha*X*Psq + (1-alpha)*Psq*X)], Psq]",
        "i*hbar*g*(Hrel0 + (Psq - 2*P_x^2)/(2*M))", 1, "cm", "no-acceleration-condition"),
    IdentityCase(
        "no_acceleration_alpha1",
        "[P_x, -Hrel0*g*X - g/(2*M)*X*Psq] - i/(2*hbar)*[[X, -Hrel0*g*X - g/(2*M)*X*Psq], Psq]",
        "i*hbar*g*(Hrel0 + (Psq - 2*P_x^2)/(2*M))", 1, "cm", "no-acceleration-condition"),
    IdentityCase(
        "supported_rindler_equals_minkowski",
        "HR - M*g*X + eps*(-Hrel0*g*X - g/(4*M)*{X,Psq})", "HM", 1, "cm", "support-cancellation"),
]


def shipped_cases_text() -> str:
    """Regenerate the contents of the shipped identity data file."""
    cases = list(_HAND_CASES)
    for kind in ("cm", "free1", "free2"):
        cases.extend(poincare_cases(kind))
    return dump_cases(cases)


def dump_cases(cases: Sequence[IdentityCase]) -> str:
    lines = ["# Operator identities checked by `noninertial run --identity-suite-only`.",
             "# Regenerate with: python -m noninertial.factory > src/noninertial/data/identities.ini", ""]
    for c in cases:
        lines += [f"[{c.name}]", f"lhs = {c.lhs}", f"rhs = {c.rhs}", f"order = {c.order}",
                  f"generators = {c.generators}", f"anchor = {c.anchor}", ""]
    return "\n".join(lines)


class CaseFileError(ValueError):
    pass


def load_cases(text: str | None = None) -> list[IdentityCase]:
    """Parse an identity-case file; ``None`` loads the shipped suite."""
    if text is None:
        text = resources.files("noninertial").joinpath("data/identities.ini").read_text(encoding="utf-8")
    parser = configparser.ConfigParser(interpolation=None, comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text)
    except configparser.Error as exc:
        raise CaseFileError(f"malformed case file: {exc}") from None
    cases = []
    required = {"lhs", "rhs"}
    allowed = required | {"order", "generators", "anchor"}
    for name in parser.sections():
        sec = parser[name]
        keys = set(sec.keys())
        if not required <= keys:
            raise CaseFileError(f"case [{name}] lacks {sorted(required - keys)}")
        if keys - allowed:
            raise CaseFileError(f"case [{name}] has unknown keys {sorted(keys - allowed)}")
        try:
            order = int(sec.get("order", "1"))
        except ValueError:
            raise CaseFileError(f"case [{name}]: order must be an integer") from None
        kind = sec.get("generators", "cm").strip()
        if kind not in GENERATOR_KINDS:
            raise CaseFileError(f"case [{name}]: generators must be one of {GENERATOR_KINDS}")
        cases.append(IdentityCase(name, sec["lhs"], sec["rhs"], order, kind, sec.get("anchor", "")))
    return cases


if __name__ == "__main__":
    print(shipped_cases_text(), end="")
