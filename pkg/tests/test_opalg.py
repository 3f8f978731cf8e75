from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from noninertial import opalg
from noninertial.opalg import (
    AlgebraError,
    GaussianRational,
    MissingCommutationRule,
    SqrtError,
    adjoint,
    anticommutator,
    commutator,
    from_words,
    multiply,
    normal_order,
    series_sqrt,
    substitute,
)

HBAR = Fraction(3, 2)
MASS = Fraction(5, 3)
LETTERS = ("X", "Y", "P_x", "P_y")


TABLE = opalg.cm_table(3, order=None)


@pytest.fixture
def table():
    return TABLE


# -- Weyl-algebra oracle: X multiplies, P = -i hbar d/dx on polynomials -------------

def _padd(out, key, c):
    out[key] = out.get(key, 0) + c
    if out[key] == 0:
        del out[key]


def _apply_letter(name, poly):
    out = {}
    axis = 0 if name in ("X", "P_x") else 1
    for (nx, ny), c in poly.items():
        n = (nx, ny)[axis]
        if name in ("X", "Y"):
            key = (nx + 1, ny) if axis == 0 else (nx, ny + 1)
            _padd(out, key, c)
        elif n:
            key = (nx - 1, ny) if axis == 0 else (nx, ny - 1)
            _padd(out, key, c * n * GaussianRational(0, -HBAR))
    return out


def _apply_word(word, poly):
    for name in reversed(word):
        poly = _apply_letter(name, poly)
    return poly


def _apply_series(a, poly):
    values = {"hbar": HBAR, "M": MASS}
    out = {}
    for coeff, e, factors, scalars in a:
        assert e == 0
        c = GaussianRational.coerce(coeff)
        for name, p in scalars:
            c = c * GaussianRational(values[name] ** p)
        word = [n for n, p in factors for _ in range(p)]
        for key, v in _apply_word(word, poly).items():
            _padd(out, key, c * v)
    return out


TEST_POLYS = [{(0, 0): GaussianRational(1)}, {(3, 1): GaussianRational(2, 1)},
              {(4, 0): GaussianRational(1), (1, 2): GaussianRational(0, 3)}]

words = st.lists(st.sampled_from(LETTERS), max_size=6)


@st.composite
def series(draw, letters=LETTERS, max_terms=4, eps=True):
    items = []
    for _ in range(draw(st.integers(0, max_terms))):
        c = GaussianRational(draw(st.integers(-3, 3)), draw(st.integers(-2, 2)))
        e = draw(st.integers(0, 1)) if eps else 0
        w = draw(st.lists(st.sampled_from(letters), max_size=3))
        items.append((c, e, w, {"M": draw(st.integers(-1, 1))}))
    return from_words(TABLE, items, order=None)


# -- numbers ----------------------------------------------------------------------

@given(st.fractions(max_denominator=50), st.fractions(max_denominator=50),
       st.fractions(max_denominator=50), st.fractions(max_denominator=50))
def test_gaussian_rational_matches_complex(a, b, c, d):
    x, y = GaussianRational(a, b), GaussianRational(c, d)
    assert complex(x * y) == pytest.approx(complex(a, b) * complex(c, d))
    assert complex(x + y) == pytest.approx(complex(a, b) + complex(c, d))
    assert (x * y) - (y * x) == 0
    if y:
        assert (x / y) * y == x


def test_gaussian_rational_inverse_of_zero():
    with pytest.raises(ZeroDivisionError):
        GaussianRational(0).inverse()


# -- normal ordering against the oracle --------------------------------------------

@settings(max_examples=200, deadline=None)
@given(words)
def test_normal_form_of_word_matches_differential_operators(word):
    a = from_words(TABLE, [(1, 0, word, {})], order=None)
    for f in TEST_POLYS:
        assert _apply_series(a, f) == _apply_word(word, f)


@settings(max_examples=100, deadline=None)
@given(series(eps=False), series(eps=False))
def test_product_matches_composition(a, b):
    for f in TEST_POLYS:
        assert _apply_series(multiply(a, b), f) == _apply_series(a, _apply_series(b, f))


def test_canonical_commutator(table):
    X, P = table.op("X"), table.op("P_x")
    assert commutator(X, P) == table.scalar("hbar") * GaussianRational(0, 1)
    assert commutator(X, table.op("P_y")).is_zero()
    # X P^2 is stored as X P P; P^2 X picks up -2 i hbar P
    lhs = multiply(multiply(P, P), X)
    rhs = multiply(X, multiply(P, P)) - multiply(table.scalar("hbar") * GaussianRational(0, 2), P)
    assert lhs == rhs


def test_normal_order_is_idempotent(table):
    a = from_words(table, [(1, 0, ["P_x", "X", "P_x"], {}), (2, 1, ["P_y", "Y"], {"M": -1})], order=None)
    assert normal_order(a) == a
    assert normal_order(normal_order(a)) == a


def test_missing_rule_is_reported():
    t = opalg.SymbolTable(["A", "B"], ["hbar"], default_order=None)
    with pytest.raises(MissingCommutationRule):
        multiply(t.op("B"), t.op("A"))
    t.set_commuting("A", "B")
    assert multiply(t.op("B"), t.op("A")) == multiply(t.op("A"), t.op("B"))


def test_reserved_and_duplicate_names():
    t = opalg.SymbolTable(["A"], ["hbar"])
    for bad in ("A", "eps", "c", "i"):
        with pytest.raises(AlgebraError):
            t.declare_operator(bad)


def test_explicit_commutator_rule():
    t = opalg.cm_table(1, internal_commute=False, order=None)
    a, b = t.op("Hrel0"), t.op("Hrel1")
    assert commutator(a, b) == t.op("Crel")
    assert commutator(b, a) == -t.op("Crel")


# -- ring structure ---------------------------------------------------------------

@settings(max_examples=60, deadline=None)
@given(series(), series(), series())
def test_associativity_and_distributivity(a, b, c):
    assert multiply(multiply(a, b), c) == multiply(a, multiply(b, c))
    assert multiply(a, b + c) == multiply(a, b) + multiply(a, c)
    assert multiply(a + b, c) == multiply(a, c) + multiply(b, c)


@settings(max_examples=60, deadline=None)
@given(series(), series(), series())
def test_jacobi_identity(a, b, c):
    total = commutator(a, commutator(b, c)) + commutator(b, commutator(c, a)) + commutator(c, commutator(a, b))
    assert total.is_zero()


@settings(max_examples=60, deadline=None)
@given(series(), series())
def test_adjoint_reverses_products(a, b):
    assert adjoint(multiply(a, b)) == multiply(adjoint(b), adjoint(a))
    assert adjoint(adjoint(a)) == a


@settings(max_examples=60, deadline=None)
@given(series(), series())
def test_commutator_antisymmetry_and_anticommutator(a, b):
    assert (commutator(a, b) + commutator(b, a)).is_zero()
    assert anticommutator(a, b) == anticommutator(b, a)
    assert anticommutator(a, b) + commutator(a, b) == multiply(a, b) * 2


def test_symmetric_product_is_self_adjoint(table):
    X, P = table.op("X"), table.op("P_x")
    sym = anticommutator(X, multiply(P, P))
    assert adjoint(sym) == sym
    assert adjoint(multiply(X, P)) != multiply(X, P)


# -- eps grading -------------------------------------------------------------------

def test_truncation_drops_high_orders():
    t = opalg.cm_table(1, order=1)
    e = t.eps(1)
    sq = multiply(e, e)
    assert sq.is_zero() and sq.truncated
    assert multiply(t.eps(-1), e) == t.one()


def test_product_order_is_the_smaller_one():
    t = opalg.cm_table(1, order=None)
    assert multiply(t.op("X", 3), t.op("X", 1)).order == 1
    assert multiply(t.op("X", None), t.op("X", 2)).order == 2


def test_eps_coefficient_and_orders():
    t = opalg.cm_table(1, order=None)
    a = t.eps(-1) * t.scalar("M") + t.op("Hrel0") + t.eps(1) * t.op("Hrel1")
    assert a.eps_orders() == [-1, 0, 1]
    assert a.eps_coefficient(1) == t.op("Hrel1")


# -- substitution ------------------------------------------------------------------

def test_substitute_shift(table):
    P, pc = table.op("P_x"), table.scalar("pc")
    shifted = substitute(multiply(P, P), "P_x", P + pc)
    assert shifted == multiply(P, P) + multiply(pc, P) * 2 + multiply(pc, pc)


def test_substitute_scalar_negative_power(table):
    a = table.scalar("M", -2) * table.op("X")
    out = substitute(a, "M", table.number(2) * table.scalar("g"))
    assert out == table.number(Fraction(1, 4)) * table.scalar("g", -2) * table.op("X")
    with pytest.raises(AlgebraError):
        substitute(a, "M", table.op("X"))


# -- square root -------------------------------------------------------------------

@settings(max_examples=40, deadline=None)
@given(series(letters=("P_x", "P_y"), eps=False), st.integers(1, 3), st.sampled_from([1, 4, Fraction(9, 4)]))
def test_sqrt_squares_back(b, K, lead):
    t = TABLE
    # a = lead * M^2 eps^-2 + eps^-1 * (commuting momentum polynomial)
    a = t.number(lead, None) * t.scalar("M", 2, None) * t.eps(-2, None) + t.eps(-1, None) * b
    s = series_sqrt(a, K)
    assert (multiply(s, s) - a).with_order(K - 1).is_zero()


def test_sqrt_kinetic_energy_closed_form():
    t = opalg.cm_table(1, order=None)
    P2 = multiply(t.op("P_x"), t.op("P_x"))
    M = t.scalar("M")
    s = series_sqrt(P2 * t.eps(-1) + multiply(M, M) * t.eps(-2), 2)
    expect = (M * t.eps(-1) + P2 * Fraction(1, 2) / M - multiply(P2, P2) * Fraction(1, 8) / (M ** 3) * t.eps(1)
              + multiply(P2, multiply(P2, P2)) * Fraction(1, 16) / (M ** 5) * t.eps(2))
    assert (s - expect).with_order(2).is_zero()


@pytest.mark.parametrize("arg, reason", [
    (lambda t: t.zero(), "zero"),
    (lambda t: t.number(2) * t.eps(-2), "leading"),
    (lambda t: t.number(1) * t.eps(-1), "leading"),
    (lambda t: t.scalar("M", 1) * t.eps(-2), "leading"),
    (lambda t: t.eps(-2) + t.eps(-1) * (multiply(t.op("X"), t.op("X")) + multiply(t.op("P_x"), t.op("P_x"))),
     "ordering"),
    (lambda t: t.op("X") + t.one(), "leading"),
])
def test_sqrt_refusals(arg, reason):
    t = opalg.cm_table(1, order=None)
    with pytest.raises(SqrtError, match=reason):
        series_sqrt(arg(t), 1)
