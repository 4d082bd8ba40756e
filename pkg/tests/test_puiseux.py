"""Exact truncated-series arithmetic and the ball tree over it."""

import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import treecells.puiseux as px

PREC = F(16)


def s(*terms, prec=PREC):
    return px.series(list(terms), prec)


exponents = st.fractions(min_value=-6, max_value=12, max_denominator=3)
coefficients = st.fractions(min_value=-9, max_value=9, max_denominator=4).filter(
    lambda c: c != 0
)
series_strategy = st.lists(st.tuples(exponents, coefficients), max_size=4).map(
    lambda terms: px.series(terms, PREC)
)


class TestAdditive:
    def test_cancellation(self):
        x = s((F(1, 2), 1), prec=2)
        y = s((F(1, 2), -1), (1, 1), prec=2)
        assert px.add(x, y) == s((1, 1), prec=2)

    def test_zero_identity(self):
        x = s((1, 2), (3, 5))
        assert px.add(x, px.zero()) == x

    def test_self_subtraction(self):
        x = s((F(1, 3), 7), (2, -1))
        assert px.sub(x, x).is_zero_up_to_precision

    @given(series_strategy, series_strategy)
    @settings(max_examples=150, deadline=None)
    def test_commutative(self, x, y):
        assert px.add(x, y) == px.add(y, x)


class TestMultiplicative:
    def test_monomials(self):
        prod = px.mul(px.monomial(1, 2), px.monomial(-1, 3))
        assert prod.terms == ((F(0), F(6)),)

    def test_geometric_division(self):
        q = px.div(px.constant(1, 3), s((0, 1), (1, -1), prec=3))
        assert q == s((0, 1), (1, 1), (2, 1), prec=3)

    def test_mul_by_one(self):
        x = s((F(-1, 2), 3), (1, 1))
        prod = px.mul(x, px.constant(1))
        assert prod.terms == x.terms

    def test_division_by_zero_rejected(self):
        with pytest.raises(ZeroDivisionError):
            px.div(px.constant(1), px.zero())

    @given(series_strategy, series_strategy)
    @settings(max_examples=200, deadline=None)
    def test_valuation_multiplicative(self, x, y):
        if x.is_zero_up_to_precision or y.is_zero_up_to_precision:
            return
        assert px.val(px.mul(x, y)) == px.val(x) + px.val(y)

    @given(series_strategy, series_strategy)
    @settings(max_examples=200, deadline=None)
    def test_ultrametric_inequality(self, x, y):
        total = px.add(x, y)
        floor = min(
            x.terms[0][0] if x.terms else x.precision,
            y.terms[0][0] if y.terms else y.precision,
        )
        if total.terms:
            assert total.terms[0][0] >= floor
        if (
            not x.is_zero_up_to_precision
            and not y.is_zero_up_to_precision
            and px.val(x) != px.val(y)
        ):
            assert px.val(total) == min(px.val(x), px.val(y))

    def test_div_mul_roundtrip(self):
        rng = random.Random(41)
        done = 0
        while done < 300:
            x = px.random_series(rng)
            y = px.random_series(rng)
            if y.is_zero_up_to_precision:
                continue
            back = px.mul(px.div(x, y), y)
            diff = px.sub(back, x)
            assert px.Series(diff.terms, back.precision).is_zero_up_to_precision
            done += 1


class TestValuationResidue:
    def test_val_examples(self):
        assert px.val(s((1, 1), (2, 1))) == 1
        assert px.val(s((0, 3), (1, 1))) == 0
        marker = px.val(px.zero(5))
        assert isinstance(marker, px.UnknownValuation)
        assert marker.floor == 5

    def test_residue_examples(self):
        assert px.residue(s((0, 3), (1, 1))) == 3
        assert px.residue(px.monomial(1)) == 0
        with pytest.raises(ValueError):
            px.residue(px.monomial(-1))

    def test_residue_needs_positive_precision(self):
        with pytest.raises(px.PrecisionError):
            px.residue(px.zero(0))


class TestBalls:
    def test_ball_inf_examples(self):
        assert px.ball_inf(px.monomial(1), s((1, 1), (2, 1))) == px.Ball(
            px.monomial(1), 2
        )
        assert px.ball_inf(px.constant(1), px.monomial(1)) == px.Ball(px.constant(1), 0)
        with pytest.raises(px.PrecisionError):
            px.ball_inf(px.monomial(1), px.monomial(1))

    def test_ball_inf_symmetric(self):
        rng = random.Random(9)
        done = 0
        while done < 200:
            x, y = px.random_series(rng), px.random_series(rng)
            if px.sub(x, y).is_zero_up_to_precision:
                continue
            assert px.ball_inf(x, y) == px.ball_inf(y, x)
            done += 1

    def test_ball_equality_by_radius_digits(self):
        a = px.Ball(px.zero(), 1)
        b = px.Ball(px.monomial(2), 1)  # centers differ by t^2, within radius 1
        assert a == b and hash(a) == hash(b)
        assert a != px.Ball(px.monomial(F(1, 2)), 1)

    def test_radius_must_be_inside_precision(self):
        with pytest.raises(px.PrecisionError):
            px.Ball(px.zero(4), 5)

    def test_nesting_radii(self):
        rng = random.Random(10)
        done = 0
        while done < 200:
            x, y, z = (px.random_series(rng) for _ in range(3))
            if (
                px.sub(x, y).is_zero_up_to_precision
                or px.sub(x, z).is_zero_up_to_precision
            ):
                continue
            b1, b2 = px.ball_inf(x, y), px.ball_inf(x, z)
            if px.ball_le(b1, b2):
                assert b1.radius <= b2.radius
            done += 1


class TestConeIndex:
    def test_examples(self):
        ball = px.Ball(px.zero(), 1)
        assert px.cone_index(ball, s((1, 1), (2, 1))) == 1
        assert px.cone_index(ball, px.monomial(1, 2)) == 2
        with pytest.raises(ValueError):
            px.cone_index(ball, px.constant(1))

    def test_equal_index_iff_same_cone(self):
        rng = random.Random(12)
        ball = px.Ball(px.zero(), 2)
        done = 0
        while done < 200:
            x, y = px.random_series(rng), px.random_series(rng)
            try:
                ix, iy = px.cone_index(ball, x), px.cone_index(ball, y)
            except (ValueError, px.PrecisionError):
                continue
            d = px.sub(x, y)
            if d.is_zero_up_to_precision:
                same_cone = True
            else:
                same_cone = px.val(d) > ball.radius
            assert (ix == iy) == same_cone
            done += 1


class TestSerialization:
    def test_series_roundtrip(self):
        x = s((F(-1, 2), F(3, 4)), (2, -5))
        assert px.series_from_json(px.series_to_json(x)) == x

    def test_ball_roundtrip(self):
        b = px.Ball(s((1, 1)), F(3, 2))
        back = px.ball_from_json(px.ball_to_json(b))
        assert back == b and back.radius == b.radius

    def test_root_ball_roundtrip(self):
        b = px.root_ball()
        assert px.ball_from_json(px.ball_to_json(b)).is_root
