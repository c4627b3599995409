"""Expression language: grammar fixtures, errors, round-trip printing."""

import math

import numpy as np
import pytest

from collapsekit.errors import (
    ArityMismatch,
    ExpressionSyntaxError,
    UnknownIdentifier,
)
from collapsekit.expressions import (
    Bin,
    Call,
    Neg,
    Num,
    Var,
    parse_expression,
)


class TestGrammar:
    def test_linear_predictor(self):
        e = parse_expression("exp(0.1 + 0.3*x + 0.2*w)")
        got = e.evaluate(x=0.0, w=0.0)
        assert abs(got - math.exp(0.1)) <= 1e-12
        assert abs(got - 1.10517) <= 1e-4

    def test_unary_minus_binds_looser_than_power(self):
        e = parse_expression("-x^2")
        assert e.evaluate(x=2.0) == -4.0
        assert e == Neg(Bin("^", Var("x"), Num(2.0)))

    def test_double_star_rejected_at_offset(self):
        with pytest.raises(ExpressionSyntaxError) as exc:
            parse_expression("x**2")
        assert exc.value.offset == 1

    def test_power_right_associative(self):
        e = parse_expression("2^3^2")
        assert e.evaluate() == 512.0

    def test_power_negative_exponent(self):
        assert parse_expression("2^-2").evaluate() == 0.25

    def test_precedence(self):
        assert parse_expression("2 + 3 * 4").evaluate() == 14.0
        assert parse_expression("(2 + 3) * 4").evaluate() == 20.0
        assert parse_expression("2 - 3 - 4").evaluate() == -5.0
        assert parse_expression("12 / 3 / 2").evaluate() == 2.0
        assert parse_expression("-2^2 + 1").evaluate() == -3.0

    def test_functions(self):
        assert abs(parse_expression("normpdf(0)").evaluate() - 0.3989422804) < 1e-9
        assert abs(parse_expression("normcdf(0)").evaluate() - 0.5) < 1e-12
        assert parse_expression("min(2, 3)").evaluate() == 2.0
        assert parse_expression("max(2, 3)").evaluate() == 3.0
        assert parse_expression("pow(2, 10)").evaluate() == 1024.0
        assert abs(parse_expression("log(exp(3))").evaluate() - 3.0) < 1e-12
        assert parse_expression("sqrt(abs(-9))").evaluate() == 3.0

    def test_all_variables(self):
        e = parse_expression("x + y + w + w1 + w2")
        assert e.evaluate(x=1, y=2, w=3, w1=4, w2=5) == 15.0
        assert e.variables() == {"x", "y", "w", "w1", "w2"}

    def test_vectorized_evaluation(self):
        e = parse_expression("x^2 + w")
        got = e.evaluate(x=np.array([1.0, 2.0]), w=np.array([10.0, 20.0]))
        assert np.allclose(got, [11.0, 24.0])

    def test_scientific_literals(self):
        assert parse_expression("1e-05").evaluate() == 1e-05
        assert parse_expression("2.5e3").evaluate() == 2500.0
        assert parse_expression(".5").evaluate() == 0.5


class TestErrors:
    def test_unknown_variable(self):
        with pytest.raises(UnknownIdentifier):
            parse_expression("z + 1")

    def test_unknown_function(self):
        with pytest.raises(UnknownIdentifier):
            parse_expression("sin(x)")

    def test_arity(self):
        with pytest.raises(ArityMismatch):
            parse_expression("exp(1, 2)")
        with pytest.raises(ArityMismatch):
            parse_expression("min(1)")

    def test_unbalanced_parens(self):
        with pytest.raises(ExpressionSyntaxError):
            parse_expression("(x + 1")

    def test_trailing_garbage(self):
        with pytest.raises(ExpressionSyntaxError):
            parse_expression("x + 1 )")

    def test_bad_character_offset(self):
        with pytest.raises(ExpressionSyntaxError) as exc:
            parse_expression("x + $")
        assert exc.value.offset == 4

    def test_unbound_variable_at_eval(self):
        e = parse_expression("x + w")
        with pytest.raises(UnknownIdentifier):
            e.evaluate(x=1.0)


def random_ast(rng, depth=0):
    roll = rng.random()
    if depth >= 4 or roll < 0.25:
        if rng.random() < 0.5:
            return Num(float(abs(round(rng.normal() * 10, 3))))
        return Var(rng.choice(["x", "y", "w", "w1", "w2"]))
    if roll < 0.45:
        return Neg(random_ast(rng, depth + 1))
    if roll < 0.85:
        op = rng.choice(["+", "-", "*", "/", "^"])
        return Bin(op, random_ast(rng, depth + 1), random_ast(rng, depth + 1))
    name = rng.choice(["exp", "log", "sqrt", "abs", "normpdf", "normcdf", "pow", "min", "max"])
    arity = 2 if name in ("pow", "min", "max") else 1
    return Call(name, tuple(random_ast(rng, depth + 1) for _ in range(arity)))


class TestRoundTrip:
    def test_parse_print_identity_on_random_asts(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            tree = random_ast(rng)
            text = str(tree)
            assert parse_expression(text) == tree, text

    def test_fixture_round_trips(self):
        for text in ["-x^2", "x^-2", "(-x)^2", "x - -y", "2*-w", "x/(y*w)"]:
            tree = parse_expression(text)
            assert parse_expression(str(tree)) == tree
