"""Exact noncommutative operator algebra graded by ``eps = 1/c**2``.

An :class:`OperatorSeries` is a finite Laurent series in ``eps`` whose
coefficients are normal-ordered polynomials in operator symbols.  Scalar
coefficients are Gaussian rationals times Laurent monomials in scalar
symbols (``hbar``, ``M``, ``g``, ...).  No floating point is used anywhere
in this module.

Operator products are brought to the canonical order fixed by a
:class:`SymbolTable` by repeatedly applying ``ab = ba + [a, b]``.  Every pair
of distinct symbols that has to be swapped needs a declared rule; an
undeclared pair raises :class:`MissingCommutationRule`.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Iterable, Iterator, Mapping

__all__ = [
    "AlgebraError",
    "MissingCommutationRule",
    "SqrtError",
    "GaussianRational",
    "SymbolTable",
    "OperatorSeries",
    "multiply",
    "commutator",
    "anticommutator",
    "normal_order",
    "series_sqrt",
    "adjoint",
    "equals",
    "truncate",
    "substitute",
    "cm_table",
    "particle_table",
]


class AlgebraError(Exception):
    pass


class MissingCommutationRule(AlgebraError):
    def __init__(self, a: str, b: str):
        self.pair = (a, b)
        super().__init__(f"missing commutation rule for pair ({a}, {b})")


class SqrtError(AlgebraError):
    pass


class GaussianRational:
    """Exact complex number ``re + i*im`` with rational parts."""

    __slots__ = ("re", "im")

    def __init__(self, re=0, im=0):
        self.re = re if type(re) is Fraction else Fraction(re)
        self.im = im if type(im) is Fraction else Fraction(im)

    @classmethod
    def coerce(cls, value) -> "GaussianRational":
        if isinstance(value, GaussianRational):
            return value
        if isinstance(value, complex):
            raise TypeError("floating complex values are not exact; use GaussianRational")
        if isinstance(value, float):
            raise TypeError("floats are not allowed in exact coefficients")
        return cls(value, 0)

    def __add__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re + other.re, self.im + other.im)

    __radd__ = __add__

    def __sub__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(self.re - other.re, self.im - other.im)

    def __rsub__(self, other):
        return GaussianRational.coerce(other) - self

    def __mul__(self, other):
        other = GaussianRational.coerce(other)
        return GaussianRational(
            self.re * other.re - self.im * other.im,
            self.re * other.im + self.im * other.re,
        )

    __rmul__ = __mul__

    def __neg__(self):
        return GaussianRational(-self.re, -self.im)

    def conjugate(self):
        return GaussianRational(self.re, -self.im)

    def inverse(self):
        n = self.re * self.re + self.im * self.im
        if n == 0:
            raise ZeroDivisionError("inverse of zero coefficient")
        return GaussianRational(self.re / n, -self.im / n)

    def __truediv__(self, other):
        return self * GaussianRational.coerce(other).inverse()

    def __bool__(self):
        return bool(self.re) or bool(self.im)

    def __eq__(self, other):
        try:
            other = GaussianRational.coerce(other)
        except TypeError:
            return NotImplemented
        return self.re == other.re and self.im == other.im

    def __hash__(self):
        return hash((self.re, self.im))

    def __complex__(self):
        return complex(float(self.re), float(self.im))

    def __repr__(self):
        if not self.im:
            return f"GaussianRational({self.re})"
        return f"GaussianRational({self.re}, {self.im})"


ZERO = GaussianRational(0)
ONE = GaussianRational(1)
I = GaussianRational(0, 1)


def _merge_scalars(s1: tuple, s2: tuple) -> tuple:
    if not s1:
        return s2
    if not s2:
        return s1
    d = dict(s1)
    for k, e in s2:
        e = d.get(k, 0) + e
        if e:
            d[k] = e
        else:
            d.pop(k, None)
    return tuple(sorted(d.items()))


def _accumulate(out: dict, key, coeff: GaussianRational) -> None:
    prev = out.get(key)
    out[key] = coeff if prev is None else prev + coeff


def _prune(terms: dict) -> dict:
    return {k: c for k, c in terms.items() if c}


class SymbolTable:
    """Operator symbols, their canonical order, pairwise commutators and scalars.

    Operators are ranked in declaration order; a normal-ordered word lists
    factors with non-decreasing rank.  Rules are stored for the ordered pair
    ``(low, high)`` as the series ``[low, high]``.
    """

    def __init__(self, operators: Iterable[str] = (), scalars: Iterable[str] = (), default_order: int | None = 1):
        self.operators: list[str] = []
        self.scalars: list[str] = []
        self._op_rank: dict[str, int] = {}
        self._sc_rank: dict[str, int] = {}
        self._rules: dict[tuple[int, int], dict] = {}
        self._nf_cache: dict[tuple, dict] = {}
        self.default_order = default_order
        for name in operators:
            self.declare_operator(name)
        for name in scalars:
            self.declare_scalar(name)

    # -- declarations -------------------------------------------------------
    def _check_new(self, name: str) -> None:
        if name in self._op_rank or name in self._sc_rank:
            raise AlgebraError(f"symbol {name!r} already declared")
        if name in ("eps", "i", "c"):
            raise AlgebraError(f"{name!r} is reserved")

    def declare_operator(self, name: str) -> None:
        self._check_new(name)
        self._op_rank[name] = len(self.operators)
        self.operators.append(name)
        self._nf_cache.clear()

    def declare_scalar(self, name: str) -> None:
        self._check_new(name)
        self._sc_rank[name] = len(self.scalars)
        self.scalars.append(name)

    def is_operator(self, name: str) -> bool:
        return name in self._op_rank

    def is_scalar(self, name: str) -> bool:
        return name in self._sc_rank

    def op_index(self, name: str) -> int:
        try:
            return self._op_rank[name]
        except KeyError:
            raise AlgebraError(f"unknown operator symbol {name!r}") from None

    def sc_index(self, name: str) -> int:
        try:
            return self._sc_rank[name]
        except KeyError:
            raise AlgebraError(f"unknown scalar symbol {name!r}") from None

    def _pair(self, a: str, b: str) -> tuple[int, int, int]:
        ia, ib = self.op_index(a), self.op_index(b)
        if ia == ib:
            raise AlgebraError("a symbol always commutes with itself")
        return (ia, ib, 1) if ia < ib else (ib, ia, -1)

    def set_commuting(self, a: str, b: str) -> None:
        lo, hi, _ = self._pair(a, b)
        self._rules[(lo, hi)] = {}
        self._nf_cache.clear()

    def set_canonical(self, a: str, b: str, scalar=1) -> None:
        """Declare ``[a, b] = i*hbar*scalar`` (``scalar`` rational)."""
        lo, hi, sign = self._pair(a, b)
        coeff = I * GaussianRational.coerce(scalar) * sign
        self._rules[(lo, hi)] = {(0, (), ((self.sc_index("hbar"), 1),)): coeff}
        self._nf_cache.clear()

    def set_commutator(self, a: str, b: str, value: "OperatorSeries") -> None:
        """Declare an explicit commutator ``[a, b] = value``."""
        if value.table is not self:
            raise AlgebraError("commutator value belongs to a different symbol table")
        lo, hi, sign = self._pair(a, b)
        terms = value.terms if sign > 0 else {k: -c for k, c in value.terms.items()}
        self._rules[(lo, hi)] = dict(terms)
        self._nf_cache.clear()

    def has_rule(self, a: str, b: str) -> bool:
        lo, hi, _ = self._pair(a, b)
        return (lo, hi) in self._rules

    def rule_kind(self, a: str, b: str) -> str:
        lo, hi, _ = self._pair(a, b)
        rule = self._rules.get((lo, hi))
        if rule is None:
            return "missing"
        return "commute" if not rule else "commutator"

    # -- normal ordering ----------------------------------------------------
    def _swap_terms(self, hi: int, lo: int) -> dict:
        """Terms of ``[hi, lo]`` for ranks ``hi > lo``."""
        rule = self._rules.get((lo, hi))
        if rule is None:
            raise MissingCommutationRule(self.operators[lo], self.operators[hi])
        return rule

    def normal_form(self, word: tuple) -> dict:
        """Canonical expansion of a product of letters as ``{(eps, word, scalars): coeff}``."""
        cached = self._nf_cache.get(word)
        if cached is not None:
            return cached
        n = len(word)
        i = 0
        while i < n - 1 and word[i] <= word[i + 1]:
            i += 1
        if i >= n - 1:
            result = {(0, word, ()): ONE}
            self._nf_cache[word] = result
            return result
        a, b = word[i], word[i + 1]
        comm = self._swap_terms(a, b)
        head, tail = word[:i], word[i + 2:]
        result = dict(self.normal_form(head + (b, a) + tail))
        if comm:
            # stored rule is [b, a] with b < a, so ab = ba - [b, a]
            for (e, w, s), c in comm.items():
                c = -c
                for (e2, w2, s2), c2 in self.normal_form(head + w + tail).items():
                    _accumulate(result, (e + e2, w2, _merge_scalars(s, s2)), c * c2)
            result = _prune(result)
        self._nf_cache[word] = result
        return result

    # -- constructors -------------------------------------------------------
    def op(self, name: str, order: int | None = ...) -> "OperatorSeries":
        return OperatorSeries(self, {(0, (self.op_index(name),), ()): ONE}, self._order(order))

    def scalar(self, name: str, power: int = 1, order: int | None = ...) -> "OperatorSeries":
        if power == 0:
            return self.one(order)
        return OperatorSeries(self, {(0, (), ((self.sc_index(name), power),)): ONE}, self._order(order))

    def number(self, value, order: int | None = ...) -> "OperatorSeries":
        value = GaussianRational.coerce(value)
        return OperatorSeries(self, {(0, (), ()): value}, self._order(order))

    def one(self, order: int | None = ...) -> "OperatorSeries":
        return self.number(1, order)

    def zero(self, order: int | None = ...) -> "OperatorSeries":
        return OperatorSeries(self, {}, self._order(order))

    def eps(self, power: int = 1, order: int | None = ...) -> "OperatorSeries":
        return OperatorSeries(self, {(power, (), ()): ONE}, self._order(order))

    def _order(self, order):
        return self.default_order if order is ... else order

    def __repr__(self):
        return f"SymbolTable(operators={self.operators}, scalars={self.scalars})"


def _min_order(a, b):
    if a is None:
        return b
    if b is None:
        return a
    return min(a, b)


class OperatorSeries:
    """Immutable normal-ordered Laurent series in ``eps``.

    ``terms`` maps ``(eps_power, word, scalar_monomial)`` to a nonzero
    :class:`GaussianRational`; ``word`` is a tuple of operator ranks in
    canonical order and ``scalar_monomial`` a sorted tuple of
    ``(scalar_rank, exponent)``.  Terms above ``order`` are discarded and
    ``truncated`` records that this happened somewhere upstream.
    """

    __slots__ = ("table", "terms", "order", "truncated", "_hash")

    def __init__(self, table: SymbolTable, terms: Mapping, order: int | None = 1, truncated: bool = False):
        kept = {}
        for key, c in terms.items():
            if not c:
                continue
            if order is not None and key[0] > order:
                truncated = True
                continue
            kept[key] = c
        self.table = table
        self.terms = kept
        self.order = order
        self.truncated = truncated
        self._hash = None

    # -- views ----------------------------------------------------------------
    def __iter__(self) -> Iterator[tuple]:
        """Yield ``(coeff, eps_power, factors, scalars)`` in canonical order.

        ``factors`` is a tuple of ``(operator_name, power)``; ``scalars`` is a
        tuple of ``(scalar_name, exponent)``.
        """
        ops, scs = self.table.operators, self.table.scalars
        for key in sorted(self.terms):
            e, w, s = key
            yield self.terms[key], e, _run_length(w, ops), tuple((scs[k], p) for k, p in s)

    def __len__(self):
        return len(self.terms)

    def is_zero(self) -> bool:
        return not self.terms

    def is_scalar(self) -> bool:
        """True when no operator symbol appears (a multiple of the identity)."""
        return all(not w for _, w, _ in self.terms)

    def eps_orders(self) -> list[int]:
        return sorted({e for e, _, _ in self.terms})

    def symbols(self) -> set[str]:
        names = set()
        for _, w, s in self.terms:
            names.update(self.table.operators[k] for k in w)
            names.update(self.table.scalars[k] for k, _ in s)
        return names

    def eps_coefficient(self, power: int) -> "OperatorSeries":
        """Coefficient of ``eps**power`` as an ``eps``-free series."""
        sub = {(0, w, s): c for (e, w, s), c in self.terms.items() if e == power}
        return OperatorSeries(self.table, sub, None)

    def scalar_coefficients(self, name: str) -> dict[int, "OperatorSeries"]:
        """Split by the exponent of one scalar symbol: ``{power: rest}``."""
        k = self.table.sc_index(name)
        out: dict[int, dict] = {}
        for (e, w, s), c in self.terms.items():
            d = dict(s)
            p = d.pop(k, 0)
            out.setdefault(p, {})[(e, w, tuple(sorted(d.items())))] = c
        return {p: OperatorSeries(self.table, t, self.order) for p, t in out.items()}

    def with_order(self, order: int | None) -> "OperatorSeries":
        return OperatorSeries(self.table, self.terms, order, self.truncated)

    # -- arithmetic ---------------------------------------------------------
    def _coerce(self, other) -> "OperatorSeries":
        if isinstance(other, OperatorSeries):
            if other.table is not self.table:
                raise AlgebraError("operands belong to different symbol tables")
            return other
        return self.table.number(other, None)

    def __add__(self, other):
        other = self._coerce(other)
        out = dict(self.terms)
        for k, c in other.terms.items():
            _accumulate(out, k, c)
        return OperatorSeries(self.table, out, _min_order(self.order, other.order),
                              self.truncated or other.truncated)

    __radd__ = __add__

    def __neg__(self):
        return OperatorSeries(self.table, {k: -c for k, c in self.terms.items()}, self.order, self.truncated)

    def __sub__(self, other):
        return self + (-self._coerce(other))

    def __rsub__(self, other):
        return self._coerce(other) - self

    def __mul__(self, other):
        if isinstance(other, OperatorSeries):
            return multiply(self, other)
        c = GaussianRational.coerce(other)
        return OperatorSeries(self.table, {k: v * c for k, v in self.terms.items()}, self.order, self.truncated)

    def __rmul__(self, other):
        if isinstance(other, OperatorSeries):
            return multiply(other, self)
        return self * other

    def __truediv__(self, other):
        if isinstance(other, OperatorSeries):
            return multiply(self, other.inverse_monomial())
        return self * GaussianRational.coerce(other).inverse()

    def __pow__(self, n: int):
        if not isinstance(n, int):
            raise TypeError("only integer powers")
        if n < 0:
            return self.inverse_monomial() ** (-n)
        result = self.table.one(self.order)
        base = self
        while n:
            if n & 1:
                result = multiply(result, base)
            n >>= 1
            if n:
                base = multiply(base, base)
        return result

    def inverse_monomial(self) -> "OperatorSeries":
        """Inverse of a single scalar Laurent monomial (times ``eps**k``)."""
        if len(self.terms) != 1:
            raise AlgebraError("only a single scalar monomial can be inverted")
        (e, w, s), c = next(iter(self.terms.items()))
        if w:
            raise AlgebraError("division by an operator is not allowed")
        inv_s = tuple((k, -p) for k, p in s)
        return OperatorSeries(self.table, {(-e, (), inv_s): c.inverse()}, None)

    # -- comparison ---------------------------------------------------------
    def __eq__(self, other):
        if isinstance(other, OperatorSeries):
            return other.table is self.table and other.terms == self.terms
        if isinstance(other, (int, Fraction, GaussianRational)):
            return self == self.table.number(other, None)
        return NotImplemented

    def __hash__(self):
        if self._hash is None:
            self._hash = hash(frozenset(self.terms.items()))
        return self._hash

    def __repr__(self):
        from .opexpr import format_canonical

        return f"OperatorSeries({format_canonical(self)!r}, order={self.order})"

    def __str__(self):
        from .opexpr import format_canonical

        return format_canonical(self)


def _run_length(word: tuple, names: list[str]) -> tuple:
    out = []
    for k in word:
        if out and out[-1][0] == k:
            out[-1][1] += 1
        else:
            out.append([k, 1])
    return tuple((names[k], p) for k, p in out)


def _check_tables(a: OperatorSeries, b: OperatorSeries) -> None:
    if a.table is not b.table:
        raise AlgebraError("operands belong to different symbol tables")


def multiply(a: OperatorSeries, b: OperatorSeries) -> OperatorSeries:
    """Normal-ordered product ``a*b`` truncated at the smaller order of the two.

    Results at the truncation order are exact provided the operands carry all
    their terms that can reach it; scalar ``eps**-k`` parts (rest energy)
    cancel in commutators, so commutator identities are unaffected.
    """
    _check_tables(a, b)
    table = a.table
    order = _min_order(a.order, b.order)
    out: dict = {}
    dropped = a.truncated or b.truncated
    for (e1, w1, s1), c1 in a.terms.items():
        for (e2, w2, s2), c2 in b.terms.items():
            e = e1 + e2
            s = _merge_scalars(s1, s2)
            c = c1 * c2
            for (e3, w3, s3), c3 in table.normal_form(w1 + w2).items():
                ee = e + e3
                if order is not None and ee > order:
                    dropped = True
                    continue
                _accumulate(out, (ee, w3, _merge_scalars(s, s3)), c * c3)
    return OperatorSeries(table, out, order, dropped)


def commutator(a: OperatorSeries, b: OperatorSeries) -> OperatorSeries:
    return multiply(a, b) - multiply(b, a)


def anticommutator(a: OperatorSeries, b: OperatorSeries) -> OperatorSeries:
    return multiply(a, b) + multiply(b, a)


def normal_order(a: OperatorSeries) -> OperatorSeries:
    """Re-normal-order every term (idempotent on stored series)."""
    out: dict = {}
    for (e, w, s), c in a.terms.items():
        for (e2, w2, s2), c2 in a.table.normal_form(w).items():
            ee = e + e2
            _accumulate(out, (ee, w2, _merge_scalars(s, s2)), c * c2)
    return OperatorSeries(a.table, out, a.order, a.truncated)


def from_words(table: SymbolTable, words: Iterable[tuple], order: int | None = ...) -> OperatorSeries:
    """Build a series from raw (unordered) products.

    Each item is ``(coeff, eps_power, [operator names], {scalar: exponent})``.
    """
    raw: dict = {}
    for coeff, e, names, scalars in words:
        w = tuple(table.op_index(n) for n in names)
        s = tuple(sorted((table.sc_index(k), p) for k, p in dict(scalars).items() if p))
        _accumulate(raw, (e, w, s), GaussianRational.coerce(coeff))
    out: dict = {}
    for (e, w, s), c in raw.items():
        for (e2, w2, s2), c2 in table.normal_form(w).items():
            _accumulate(out, (e + e2, w2, _merge_scalars(s, s2)), c * c2)
    return OperatorSeries(table, out, table._order(order))


def adjoint(a: OperatorSeries) -> OperatorSeries:
    """Hermitian adjoint; all operator and scalar symbols are self-adjoint."""
    out: dict = {}
    for (e, w, s), c in a.terms.items():
        cc = c.conjugate()
        for (e2, w2, s2), c2 in a.table.normal_form(w[::-1]).items():
            _accumulate(out, (e + e2, w2, _merge_scalars(s, s2)), cc * c2)
    return OperatorSeries(a.table, out, a.order, a.truncated)


def equals(a: OperatorSeries, b: OperatorSeries) -> bool:
    _check_tables(a, b)
    return a.terms == b.terms


def truncate(a: OperatorSeries, order: int | None) -> OperatorSeries:
    return OperatorSeries(a.table, a.terms, _min_order(a.order, order), a.truncated)


def substitute(a: OperatorSeries, symbol: str, replacement: OperatorSeries) -> OperatorSeries:
    """Replace an operator or scalar symbol by a series and re-normal-order.

    A scalar symbol may only be replaced by a scalar series; negative powers
    additionally require the replacement to be a single monomial.
    """
    table = a.table
    replacement = a._coerce(replacement)
    order = a.order
    result = table.zero(order)
    if table.is_operator(symbol):
        k = table.op_index(symbol)
        for (e, w, s), c in a.terms.items():
            if k not in w:
                result = result + OperatorSeries(table, {(e, w, s): c}, order)
                continue
            prod = OperatorSeries(table, {(e, (), s): c}, order)
            run: tuple = ()
            for letter in w:
                if letter == k:
                    if run:
                        prod = multiply(prod, OperatorSeries(table, {(0, run, ()): ONE}, None))
                        run = ()
                    prod = multiply(prod, replacement)
                else:
                    run += (letter,)
            if run:
                prod = multiply(prod, OperatorSeries(table, {(0, run, ()): ONE}, None))
            result = result + prod
        return result
    if table.is_scalar(symbol):
        if not replacement.is_scalar():
            raise AlgebraError(f"scalar {symbol!r} can only be replaced by a scalar series")
        k = table.sc_index(symbol)
        for (e, w, s), c in a.terms.items():
            d = dict(s)
            p = d.pop(k, 0)
            rest = OperatorSeries(table, {(e, w, tuple(sorted(d.items()))): c}, order)
            if p == 0:
                result = result + rest
                continue
            full = replacement.with_order(None)
            factor = full ** p if p > 0 else full.inverse_monomial() ** (-p)
            result = result + multiply(factor.with_order(None), rest)
        return result
    raise AlgebraError(f"unknown symbol {symbol!r}")


def _binomial_half(k: int) -> Fraction:
    out = Fraction(1)
    for j in range(k):
        out *= (Fraction(1, 2) - j) / (j + 1)
    return out


def _rational_sqrt(q: Fraction) -> Fraction | None:
    from math import isqrt

    if q <= 0:
        return None
    n, d = q.numerator, q.denominator
    rn, rd = isqrt(n), isqrt(d)
    if rn * rn != n or rd * rd != d:
        return None
    return Fraction(rn, rd)


def _commute(table: SymbolTable, w1: tuple, w2: tuple) -> bool:
    return _prune(_sub(table.normal_form(w1 + w2), table.normal_form(w2 + w1))) == {}


def _sub(x: dict, y: dict) -> dict:
    out = dict(x)
    for k, c in y.items():
        _accumulate(out, k, -c)
    return out


def series_sqrt(a: OperatorSeries, order: int | None = None) -> OperatorSeries:
    """Binomial square root of ``s**2 * (1 + B)`` truncated at ``eps**order``.

    The lowest ``eps`` power of ``a`` must hold a single term: a positive
    rational square times a scalar monomial with even exponents.  All
    monomials of ``B`` must commute pairwise, otherwise the operator ordering
    of the square root is ambiguous and the call is refused.
    """
    table = a.table
    if order is None:
        order = a.order if a.order is not None else table.default_order
    if a.is_zero():
        raise SqrtError("no scalar leading square: argument is zero")
    e0 = min(e for e, _, _ in a.terms)
    lead = [(k, c) for k, c in a.terms.items() if k[0] == e0]
    if len(lead) != 1 or lead[0][0][1]:
        raise SqrtError("no scalar leading square")
    (_, _, s0), c0 = lead[0]
    root = _rational_sqrt(c0.re) if not c0.im else None
    if root is None or e0 % 2 or any(p % 2 for _, p in s0):
        raise SqrtError("no scalar leading square")
    s = OperatorSeries(table, {(e0 // 2, (), tuple((k, p // 2) for k, p in s0)): GaussianRational(root)}, None)
    inner_order = order - e0 // 2
    s2_inv = OperatorSeries(table, {(-e0, (), tuple((k, -p) for k, p in s0)): c0.inverse()}, None)
    b = (multiply(a.with_order(None), s2_inv) - 1).with_order(inner_order)
    keys = list({w for _, w, _ in b.terms})
    for i, w1 in enumerate(keys):
        for w2 in keys[i + 1:]:
            if not _commute(table, w1, w2):
                raise SqrtError("ordering-ambiguous square root: expansion terms do not commute")
    result = table.one(inner_order)
    power = table.one(inner_order)
    k = 1
    while k <= inner_order:
        power = multiply(power, b)
        if power.is_zero():
            break
        result = result + power * _binomial_half(k)
        k += 1
    out = multiply(s, result.with_order(None))
    return OperatorSeries(table, out.terms, order, a.truncated or b.truncated or bool(power.terms))


CM_SCALARS = ("hbar", "M", "g", "omega", "alpha", "beta", "dx", "lam", "u1", "xc", "pc")


def cm_table(dims: int = 3, internal_commute: bool = True, order: int | None = 1) -> SymbolTable:
    """Centre-of-mass table: positions < momenta < internal symbols.

    ``[X_i, P_j] = i*hbar*delta_ij``; c.m. symbols commute with the internal
    ones.  ``Hrel`` is the unexpanded internal Hamiltonian, ``Hrel0``/``Hrel1``
    its zeroth/first order parts.  With ``internal_commute=False`` the pair
    ``(Hrel0, Hrel1)`` gets an opaque commutator symbol ``Crel``.
    """
    if dims not in (1, 3):
        raise AlgebraError("dims must be 1 or 3")
    axes = "xyz"[:dims]
    pos = ["X", "Y", "Z"][:dims]
    mom = [f"P_{a}" for a in axes]
    internal = ["Hrel", "Hrel0", "Hrel1"] + ([] if internal_commute else ["Crel"])
    t = SymbolTable(pos + mom + internal, CM_SCALARS, default_order=order)
    for group in (pos, mom):
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                t.set_commuting(a, b)
    for i, x in enumerate(pos):
        for j, p in enumerate(mom):
            if i == j:
                t.set_canonical(x, p)
            else:
                t.set_commuting(x, p)
    for a in pos + mom:
        for h in internal:
            t.set_commuting(a, h)
    t.set_commuting("Hrel", "Hrel0")
    t.set_commuting("Hrel", "Hrel1")
    if internal_commute:
        t.set_commuting("Hrel0", "Hrel1")
    else:
        t.set_commutator("Hrel0", "Hrel1", t.op("Crel", None))
        t.set_commuting("Hrel", "Crel")
    return t


def particle_table(n: int, dims: int = 3, order: int | None = 1) -> SymbolTable:
    """Table of ``n`` free particles: ``x1, y1, z1, ...`` then ``px1, ...``."""
    if n < 1:
        raise AlgebraError("need at least one particle")
    axes = "xyz"[:dims]
    pos = [f"{a}{mu}" for mu in range(1, n + 1) for a in axes]
    mom = [f"p{a}{mu}" for mu in range(1, n + 1) for a in axes]
    masses = [f"m{mu}" for mu in range(1, n + 1)]
    t = SymbolTable(pos + mom, ("hbar",) + tuple(masses), default_order=order)
    for group in (pos, mom):
        for i, a in enumerate(group):
            for b in group[i + 1:]:
                t.set_commuting(a, b)
    for x in pos:
        for p in mom:
            if "p" + x == p:
                t.set_canonical(x, p)
            else:
                t.set_commuting(x, p)
    return t
