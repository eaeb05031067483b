"""Parser, evaluator, and symbolic derivative checks."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from saddlekit.expressions import (
    ExpressionError,
    constant_fold,
    differentiate,
    evaluate,
    free_variables,
    parse,
    unparse,
)


def ev(text, **env):
    return evaluate(parse(text), {k: np.asarray(v) for k, v in env.items()})


class TestEvaluation:
    def test_precedence(self):
        assert ev("2+3*4") == 14.0
        assert ev("(2+3)*4") == 20.0
        assert ev("2-3-4") == -5.0
        assert ev("12/3/2") == 2.0

    def test_unary_minus(self):
        assert ev("-2*-3") == 6.0
        assert ev("-(1+2)") == -3.0
        assert ev("3--2") == 5.0

    def test_functions(self):
        assert ev("ln(exp(2))") == pytest.approx(2.0)
        assert ev("sin(0) + cos(0)") == pytest.approx(1.0)
        assert ev("sqrt(2)*sqrt(2)") == pytest.approx(2.0)

    def test_scientific_notation(self):
        assert ev("1.5e2") == 150.0
        assert ev("2E-3") == 0.002

    def test_variables_broadcast(self):
        x = np.linspace(0.0, 1.0, 5)
        got = ev("x1*x1 + 1", x1=x)
        np.testing.assert_allclose(got, x * x + 1)

    def test_all_variable_names(self):
        out = ev("x1 + x2 + u + v", x1=1.0, x2=2.0, u=3.0, v=4.0)
        assert out == 10.0

    def test_free_variables(self):
        assert free_variables(parse("2*x1 + sin(v)")) == {"x1", "v"}
        assert free_variables(parse("3.5")) == set()


class TestErrors:
    def test_trailing_garbage_position(self):
        with pytest.raises(ExpressionError) as exc:
            parse("1 + 2 )")
        assert exc.value.position == 7

    def test_dangling_operator(self):
        with pytest.raises(ExpressionError):
            parse("2 +")

    def test_unclosed_paren(self):
        with pytest.raises(ExpressionError):
            parse("(1 + 2")

    def test_bad_character(self):
        with pytest.raises(ExpressionError) as exc:
            parse("1 + $")
        assert exc.value.position == 5

    def test_unknown_function(self):
        with pytest.raises(ExpressionError):
            parse("tanh(x1)")

    def test_unknown_variable(self):
        with pytest.raises(ExpressionError):
            parse("x3 + 1")

    def test_missing_variable_at_eval(self):
        node = parse("u + 1")
        with pytest.raises(KeyError):
            evaluate(node, {})


class TestDerivative:
    CASES = [
        "x1*x1*x1 - 2*x1",
        "sin(3*x1) * cos(x1)",
        "ln(1 + x1*x1)",
        "exp(-x1) / (1 + x1*x1)",
        "sqrt(4 + x1*x1)",
    ]

    @pytest.mark.parametrize("text", CASES)
    def test_matches_central_difference(self, text):
        node = parse(text)
        deriv = differentiate(node, "x1")
        h = 1e-5
        for x in [-1.3, -0.2, 0.0, 0.7, 2.1]:
            num = (
                evaluate(node, {"x1": np.float64(x + h)})
                - evaluate(node, {"x1": np.float64(x - h)})
            ) / (2 * h)
            sym = evaluate(deriv, {"x1": np.float64(x)})
            assert sym == pytest.approx(num, rel=1e-7, abs=1e-7)

    def test_partial_ignores_other_variable(self):
        d = differentiate(parse("x1*x2 + x2*x2"), "x2")
        got = evaluate(d, {"x1": np.float64(3.0), "x2": np.float64(5.0)})
        assert got == pytest.approx(13.0)

    def test_constant_derivative_is_zero(self):
        d = constant_fold(differentiate(parse("2.5"), "x1"))
        assert evaluate(d, {}) == 0.0


class TestRoundTrip:
    def test_unparse_reparses_equal(self):
        for text in ["2*x1 + sin(x2)/3", "-(u + 1)*v", "ln(1 + u*u)"]:
            node = parse(text)
            again = parse(unparse(node))
            env = {k: np.float64(0.37) for k in ("x1", "x2", "u", "v")}
            assert evaluate(node, env) == pytest.approx(evaluate(again, env))

    @given(st.floats(min_value=-1e6, max_value=1e6, allow_nan=False))
    def test_literal_round_trip(self, x):
        assert ev(repr(float(abs(x)))) == abs(x)

    def test_constant_fold_collapses(self):
        node = constant_fold(parse("2*3 + 4/2"))
        assert evaluate(node, {}) == 8.0
        assert free_variables(node) == set()


def test_finiteness_probe():
    from saddlekit.expressions import math_isfinite_probe

    with np.errstate(invalid="ignore", divide="ignore"):
        assert not math_isfinite_probe(parse("ln(0 - 1)"), {})
        assert not math_isfinite_probe(parse("1/0"), {})
        assert math_isfinite_probe(parse("exp(2) + u"), {"u": np.float64(1.0)})
