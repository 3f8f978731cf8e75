from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from noninertial import opalg
from noninertial.opalg import GaussianRational, OperatorSeries, from_words, multiply
from noninertial.opexpr import (
    ConfigError,
    ParseError,
    ScenarioConfig,
    config_dict,
    dump_scenario,
    format_canonical,
    parse_ast,
    parse_expr,
    parse_scenario,
    scenario_from_string,
    with_overrides,
)

TABLE = opalg.cm_table(3, order=None)
OPS = ("X", "Y", "Z", "P_x", "P_y", "P_z", "Hrel0", "Hrel1")
SCALARS = ("hbar", "M", "g", "omega")

fractions = st.fractions(min_value=-20, max_value=20, max_denominator=12)


@st.composite
def canonical_series(draw):
    items = []
    for _ in range(draw(st.integers(0, 5))):
        c = GaussianRational(draw(fractions), draw(st.one_of(st.just(Fraction(0)), fractions)))
        e = draw(st.integers(-2, 2))
        w = draw(st.lists(st.sampled_from(OPS), max_size=4))
        sc = {s: draw(st.integers(-3, 3)) for s in draw(st.lists(st.sampled_from(SCALARS), max_size=3))}
        items.append((c, e, w, sc))
    return from_words(TABLE, items, order=None)


@settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(canonical_series())
def test_canonical_text_round_trips(a):
    text = format_canonical(a)
    back = parse_expr(text, TABLE, order=None)
    assert back == a
    assert format_canonical(back) == text


def test_canonical_text_examples():
    t = TABLE
    assert format_canonical(t.scalar("hbar") * GaussianRational(0, 1)) == "(0+1/1i)*hbar^1"
    a = parse_expr("-P_x^4*eps/(8*M^3)", t, order=None)
    assert format_canonical(a) == "(-1/8)*M^-3 * eps^1 * P_x^4"
    assert format_canonical(t.zero()) == "0"


@pytest.mark.parametrize("text, expect", [
    ("[X, P_x]", lambda t: t.scalar("hbar") * GaussianRational(0, 1)),
    ("{X, P_x} - 2*X*P_x", lambda t: t.scalar("hbar") * GaussianRational(0, -1)),
    ("c^2*M", lambda t: t.eps(-1) * t.scalar("M")),
    ("c^-2", lambda t: t.eps(1)),
    ("X/(2*M)", lambda t: t.op("X") * Fraction(1, 2) / t.scalar("M")),
    ("3/4i*X", lambda t: t.op("X") * GaussianRational(0, Fraction(3, 4))),
    ("-X^2", lambda t: -multiply(t.op("X"), t.op("X"))),
    ("2^3", lambda t: t.number(8)),
    ("M^-2*M^2", lambda t: t.one()),
    ("sqrt_series(M^2*c^4 + P_x^2*c^2, 1) - M*c^2",
     lambda t: (multiply(t.op("P_x"), t.op("P_x")) / (t.scalar("M") * 2)
                - t.eps(1) * multiply(t.op("P_x"), multiply(t.op("P_x"), multiply(t.op("P_x"), t.op("P_x"))))
                / (t.scalar("M") ** 3 * 8))),
])
def test_parse_values(text, expect):
    assert parse_expr(text, TABLE, order=None) == expect(TABLE)


def test_precedence():
    t = TABLE
    assert parse_expr("1 + 2*3", t) == t.number(7)
    assert parse_expr("2*3^2", t) == t.number(18)
    assert parse_expr("-2^2", t) == t.number(-4)
    assert parse_expr("8/2/2", t) == t.number(2)
    assert parse_expr("1 - 2 - 3", t) == t.number(-4)


def test_order_truncates():
    t = TABLE
    assert parse_expr("eps^2*X + X", t, order=1) == t.op("X", 1)
    assert parse_expr("eps*eps", t, order=1).is_zero()


def test_environment_shadows_symbols():
    t = TABLE
    env = {"H0": t.op("Hrel0", None) + t.op("X", None)}
    assert parse_expr("H0 - X", t, env) == t.op("Hrel0")


@pytest.mark.parametrize("text, line, col, fragment", [
    ("0.5*X", 1, 1, "decimal"),
    ("X + .5", 1, 5, "decimal"),
    ("X/P_x", 1, 2, "division by an operator"),
    ("c*X", 1, 1, "speed of light"),
    ("c^3", 1, 2, "even power"),
    ("foo + X", 1, 1, "unknown symbol"),
    ("[X,", 1, 4, "unexpected"),
    ("X +\n  $", 2, 3, "unexpected character"),
    ("X^2^2", 1, 4, "chained"),
    ("X^65", 1, 3, "exceeds"),
    ("X^P_x", 1, 3, "integer literal"),
    ("X/0", 1, 2, "division by zero"),
    ("1/0", 1, 1, "zero denominator"),
    ("X/(M+g)", 1, 2, "single scalar monomial"),
    ("X^-1", 1, 2, "negative power"),
    ("(X", 1, 3, "expected ')'"),
    ("X)", 1, 2, "unexpected"),
    ("sqrt_series(X^2 + P_x^2, 1)", 1, 1, "leading square"),
    ("sqrt_series(M^2, -1)", 1, 1, "non-negative"),
    ("sqrt_series(M^2, X)", 1, 18, "integer literal"),
])
def test_errors_carry_positions(text, line, col, fragment):
    with pytest.raises(ParseError) as info:
        parse_expr(text, TABLE)
    err = info.value
    assert (err.line, err.col) == (line, col)
    assert fragment in err.message


def test_deep_nesting_is_rejected():
    with pytest.raises(ParseError, match="nested"):
        parse_expr("(" * 500 + "X" + ")" * 500, TABLE)


def test_expansion_budget():
    with pytest.raises(ParseError, match="too large"):
        parse_expr("(X+Y+Z+P_x+P_y+P_z)^64", TABLE)


TOKENS = ["X", "P_x", "Y", "Hrel0", "M", "hbar", "g", "eps", "c", "i", "2", "1/2", "3i", "0", "1/0",
          "0.5", "+", "-", "*", "/", "^", "(", ")", "[", "]", "{", "}", ",", "sqrt_series", "foo",
          "^-", "64", "65", "\n", "@"]


@settings(max_examples=1000, deadline=None)
@given(st.lists(st.sampled_from(TOKENS), max_size=14))
def test_parser_is_total_on_token_soup(tokens):
    text = " ".join(tokens)
    try:
        out = parse_expr(text, TABLE)
    except ParseError as exc:
        assert exc.line >= 1 and exc.col >= 1
    else:
        assert isinstance(out, OperatorSeries)


@settings(max_examples=500, deadline=None)
@given(st.text(max_size=30))
def test_parser_is_total_on_arbitrary_text(text):
    try:
        parse_expr(text, TABLE)
    except ParseError:
        pass


def test_ast_positions():
    node = parse_ast("X +\n 2*P_x")
    assert node.kind == "add"
    assert (node.args[1].line, node.args[1].col) == (2, 3)


# -- scenario files ----------------------------------------------------------------

BASIC = """
[scenario]
tag = d
support = quantum_operator   # symmetric operator support
[physics]
g = 0.001
c = 10
M = 1e4
lambda = 1/100
width = auto
[truncation]
D_cm = 40
n_max = 3
[output]
dir = results
"""


def test_scenario_parses_with_decimals_and_comments():
    cfg = scenario_from_string(BASIC)
    assert cfg.tag == "d" and cfg.support == "quantum_operator"
    assert cfg.g == Fraction(1, 1000) and cfg.M == 10000 and cfg.lam == Fraction(1, 100)
    assert cfg.width is None and cfg.n_max == 3 and cfg.D_cm == 40
    assert cfg.out_dir == "results"
    assert cfg.c2 == 100


def test_dump_round_trips():
    cfg = scenario_from_string(BASIC)
    assert scenario_from_string(dump_scenario(cfg)) == cfg
    assert scenario_from_string(dump_scenario(ScenarioConfig())) == ScenarioConfig()


def test_config_dict_is_json_friendly():
    import json

    d = config_dict(scenario_from_string(BASIC))
    assert json.loads(json.dumps(d))["g"] == "1/1000"


def test_parse_scenario_reads_files(tmp_path):
    p = tmp_path / "s.ini"
    p.write_text(BASIC)
    assert parse_scenario(p).tag == "d"
    with pytest.raises(ConfigError, match="cannot read"):
        parse_scenario(tmp_path / "missing.ini")


@pytest.mark.parametrize("text, fragment", [
    ("[physics]\nfoo = 1\n", "unknown key physics.foo"),
    ("[nonsense]\nx = 1\n", "unknown section"),
    ("[physics]\nc = 0\n", "c > 0"),
    ("[physics]\nc = -3\n", "c > 0"),
    ("[physics]\ng = abc\n", "bad value"),
    ("[physics]\ng = 1/0\n", "bad value"),
    ("[truncation]\nD_cm = 1\n", "D_cm >= 2"),
    ("[truncation]\nD_cm = 3.5\n", "bad value"),
    ("[truncation]\nn_max = 16\n", "n_max < D_int"),
    ("[scenario]\ntag = e\n", "tag must be"),
    ("[scenario]\norder = 2\n", "order must be 0 or 1"),
    ("[scenario]\ntag = b\nsupport = quantum_operator\n", "only apply to scenario d"),
    ("[scenario]\ntag = d\norder = 0\nsupport = classical_tuned\n", "needs order = 1"),
    ("[scenario]\nfrozen_cm = maybe\n", "bad value"),
    ("[propagator]\ndt = 0\n", "dt > 0"),
    ("[propagator]\nt_max = 1/1000\n", "t_max >= dt"),
    ("[output]\nformat = xml\n", "csv or json"),
    ("no section header\n", "malformed"),
])
def test_config_validation(text, fragment):
    with pytest.raises(ConfigError, match=fragment):
        scenario_from_string(text)


def test_validation_lists_every_failure():
    with pytest.raises(ConfigError) as info:
        scenario_from_string("[physics]\nM = -1\nnbar = -1\n")
    assert "M > 0" in str(info.value) and "nbar >= 0" in str(info.value)


def test_overrides_are_validated():
    cfg = ScenarioConfig(tag="d", support="classical_tuned")
    assert with_overrides(cfg, frozen_cm=True).frozen_cm
    with pytest.raises(ConfigError):
        with_overrides(cfg, order=0)
