"""Parser, evaluator and dual-number derivatives."""
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from subaudit import expr
from subaudit.catalog import all_charts
from subaudit.errors import ExprDomainError, ExprSyntaxError, UnknownIdentifierError


def ev(src, **env):
    return expr.evaluate(expr.parse(src, list(env)), env)


def central(e, point, i, h=1e-5):
    up = list(point)
    dn = list(point)
    up[i] += h
    dn[i] -= h
    return (e(up) - e(dn)) / (2 * h)


### Parsing and evaluation

def test_additive_identity():
    e = expr.parse("x + 0", ["x"])
    for x in (-2.5, 0.0, 3.25):
        assert e([x]) == x


def test_pythagorean_identity():
    assert abs(ev("sin(t)^2 + cos(t)^2", t=0.7) - 1.0) <= 1e-15


def test_exp_against_power_series():
    t = 0.3
    series = sum((2 * t) ** k / math.factorial(k) for k in range(30))
    assert ev("exp(2*t)", t=t) == pytest.approx(series, abs=1e-15)
    assert ev("exp(2*t)", t=t) == pytest.approx(1.8221188003905089, abs=1e-15)


def test_simple_values():
    assert ev("x*y", x=0.0, y=5.0) == 0.0
    assert ev("x^2", x=3.0) == 9.0
    assert ev("sqrt(x^2+y^2)", x=3.0, y=4.0) == 5.0


def test_precedence_and_associativity():
    assert ev("-x^2", x=3.0) == -9.0
    assert ev("2^3^2") == 512.0
    assert ev("1 - 2 - 3") == -4.0
    assert ev("8 / 4 / 2") == 1.0
    assert ev("2 + 3 * 4") == 14.0


def test_decimal_and_rational_literals():
    assert ev("1/4 + 0.75") == 1.0
    assert ev("1.5e2") == 150.0


def test_evaluation_is_bit_deterministic():
    e = expr.parse("sin(x)*exp(y)/(1+x^2)", ["x", "y"])
    vals = [e([0.37, -1.2]) for _ in range(5)]
    assert len({v.hex() for v in vals}) == 1


### Errors

@pytest.mark.parametrize("src, column", [("x +* y", 4), ("(x", 3), ("x )", 3), ("2 $ x", 3)])
def test_syntax_error_column(src, column):
    with pytest.raises(ExprSyntaxError) as info:
        expr.parse(src, ["x", "y"])
    assert info.value.column == column


def test_empty_source_rejected():
    with pytest.raises(ExprSyntaxError):
        expr.parse("   ", ["x"])


def test_unknown_identifier_named():
    with pytest.raises(UnknownIdentifierError) as info:
        expr.parse("x + zeta", ["x"])
    assert info.value.name == "zeta"
    assert info.value.column == 5


@pytest.mark.parametrize("src, env", [
    ("log(x)", {"x": 0.0}),
    ("log(x)", {"x": -1.0}),
    ("1/x", {"x": 0.0}),
    ("x^(-1)", {"x": 0.0}),
    ("sqrt(x)", {"x": -4.0}),
])
def test_domain_errors_are_hard(src, env):
    e = expr.parse(src, list(env))
    with pytest.raises(ExprDomainError) as info:
        expr.evaluate(e, env)
    assert info.value.subexpression
    with pytest.raises(ExprDomainError):
        expr.evaluate_dual(e, env)


### Dual numbers

def test_identity_derivative():
    d = expr.evaluate_dual(expr.parse("x", ["x", "y", "z"]), {"x": 1.0, "y": 2.0, "z": 3.0})
    assert d.partials.tolist() == [1.0, 0.0, 0.0]


def test_sin_derivative_at_zero():
    d = expr.evaluate_dual(expr.parse("sin(t)", ["t"]), {"t": 0.0})
    assert d.value == 0.0
    assert d.partials[0] == 1.0


def test_product_partials_match_fd():
    e = expr.parse("x^2*y", ["x", "y"])
    d = e.dual([2.0, 3.0])
    assert d.partials == pytest.approx([12.0, 4.0], abs=1e-12)
    for i in range(2):
        assert abs(d.partials[i] - central(e, [2.0, 3.0], i)) <= 1e-8


def test_abs_derivative_at_zero_is_zero():
    d = expr.parse("abs(x)", ["x"]).dual([0.0])
    assert d.partials[0] == 0.0


def test_dual_value_equals_float_value():
    e = expr.parse("tanh(x)*cosh(y) - sinh(x)/exp(y) + tan(x*y)", ["x", "y"])
    assert e.dual([0.3, 0.4]).value == e([0.3, 0.4])


### Properties

_VARS = ["x", "y", "z"]
_leaf = st.one_of(
    st.sampled_from(_VARS),
    st.integers(1, 5).map(str),
    st.sampled_from(["0.5", "1.25", "2"]),
)


def _extend(children):
    # wrappers keep every intermediate value inside the functions' domains
    unary = st.sampled_from([
        "sin({})", "cos({})", "tanh({})", "exp(sin({}))", "sqrt(1+({})^2)",
        "log(2+sin({}))", "({})^2", "-({})", "abs({})+1", "sinh(sin({}))", "cosh(cos({}))",
    ])
    binary = st.sampled_from(["({})+({})", "({})-({})", "({})*({})", "({})/(2+cos({}))"])
    return st.one_of(
        st.tuples(unary, children).map(lambda p: p[0].format(p[1])),
        st.tuples(binary, children, children).map(lambda p: p[0].format(p[1], p[2])),
    )


def _depth(max_depth):
    s = _leaf
    for _ in range(max_depth):
        s = st.one_of(_leaf, _extend(s))
    return s


@settings(max_examples=200, deadline=None)
@given(src=_depth(5), seed=st.integers(0, 2**31 - 1))
def test_dual_partials_match_central_differences(src, seed):
    e = expr.parse(src, _VARS)
    rng = np.random.default_rng(seed)
    for p in rng.uniform(-1.0, 1.0, size=(5, 3)):
        d = e.dual(list(p))
        for i in range(3):
            fd = central(e, list(p), i)
            assert abs(d.partials[i] - fd) <= 1e-6 * (1 + abs(d.partials[i])), (src, p, i)


@settings(max_examples=200, deadline=None)
@given(src=_depth(5))
def test_render_round_trip(src):
    e = expr.parse(src, _VARS)
    again = expr.parse(e.render(), _VARS)
    assert again == e
    assert again.render() == e.render()


def test_round_trip_over_catalog_metrics():
    count = 0
    for chart in all_charts():
        for row in chart.metric:
            for e in row:
                again = expr.parse(e.render(), chart.coords)
                assert again == e
                count += 1
    assert count > 50
