"""Exact algebra layer: grading, brackets, Lie transforms, serialization."""

from fractions import Fraction

import pytest

from sepsplit.coefficients import Coefficient
from sepsplit.errors import ExtensionMismatchError, TruncationError
from sepsplit.qh import (
    QhSeries,
    lie_exp,
    poisson,
    qh_order,
    series_from_json,
    series_to_json,
    validate_area_preservation,
)


def h6(a=1, b=1):
    return QhSeries.from_terms([
        ((0, 2, 0), Fraction(1, 2)),
        ((3, 0, 0), Fraction(a, 3)),
        ((1, 0, 1), -Fraction(b)),
    ])


class TestCoefficient:
    def test_rational_folding(self):
        c = Coefficient(0, 2, Fraction(9, 4))
        assert c.is_rational and c.p == Fraction(3)

    def test_sqrt_extension_arithmetic(self):
        r = Coefficient.sqrt_rational(Fraction(2))
        assert (r * r).as_fraction() == 2
        assert ((1 + r) * (1 - r)).as_fraction() == -1
        assert (1 / r * r).as_fraction() == 1

    def test_sign_is_exact(self):
        r = Coefficient.sqrt_rational(Fraction(2))
        assert (r - Fraction(141421, 100000)).sign() == 1
        assert (r - Fraction(141422, 100000)).sign() == -1

    def test_incompatible_extensions(self):
        a = Coefficient(0, 1, Fraction(2))
        b = Coefficient(0, 1, Fraction(3))
        with pytest.raises(ExtensionMismatchError):
            a * b


class TestGrading:
    def test_qh_order_examples(self):
        assert qh_order((2, 1, 1)) == 11
        assert qh_order((0, 0, 0)) == 0
        # the x^3 monomial of the leading Hamiltonian sits at order 6
        assert qh_order((3, 0, 0)) == 6

    def test_negative_exponent_rejected(self):
        with pytest.raises(ValueError):
            qh_order((-1, 0, 0))


class TestRingOps:
    def test_product_xy(self):
        x = QhSeries.coordinate_x()
        y = QhSeries.coordinate_y()
        prod = x * y
        assert prod.orders() == [5]
        assert prod.part(5).coeff((1, 1, 0)) == 1

    def test_difference_of_squares(self):
        x = QhSeries.coordinate_x()
        e = QhSeries.parameter_eps()
        prod = (x + e) * (x - e)
        expected = QhSeries.from_terms([((2, 0, 0), 1), ((0, 0, 2), -1)])
        assert prod.same_parts(expected)
        assert prod.orders() == [4, 8]

    def test_multiplicative_identity(self):
        one = QhSeries.monomial((0, 0, 0), 1)
        assert (h6() * one).same_parts(h6())

    def test_truncation_fails_loudly(self):
        f = QhSeries.from_terms([((2, 0, 0), 1)], trunc=6)
        with pytest.raises(TruncationError):
            f.part(7)


class TestPoisson:
    def test_canonical_pair(self):
        br = poisson(QhSeries.coordinate_x(), QhSeries.coordinate_y())
        assert br.part(0).coeff((0, 0, 0)) == 1

    def test_x_against_h6(self):
        assert poisson(QhSeries.coordinate_x(), h6()).same_parts(QhSeries.coordinate_y())

    def test_y_against_h6(self):
        # hand differentiation: {y, h6} = -dh6/dx = -a x^2 + b eps
        a, b = 2, 3
        expected = QhSeries.from_terms([((2, 0, 0), -a), ((0, 0, 1), b)])
        assert poisson(QhSeries.coordinate_y(), h6(a, b)).same_parts(expected)


class TestLieExp:
    def test_zero_generator(self):
        g = h6()
        assert lie_exp(QhSeries.zero(), g, 10).same_parts(g)

    def test_flow_of_x_to_order_four(self):
        # exp(L_h6) x = x + y + (1/2){y, h6} + ... = x + y + (-a x^2 + b eps)/2
        a, b = 1, 1
        out = lie_exp(h6(a, b), QhSeries.coordinate_x(), 4)
        expected = QhSeries.from_terms([
            ((1, 0, 0), 1), ((0, 1, 0), 1),
            ((2, 0, 0), Fraction(-a, 2)), ((0, 0, 1), Fraction(b, 2)),
        ]).truncate(4)
        assert out.same_parts(expected)

    def test_inverse_pair(self):
        chi = h6() + QhSeries.monomial((2, 0, 1), Fraction(1, 5))
        x = QhSeries.coordinate_x()
        roundtrip = lie_exp(-chi, lie_exp(chi, x, 12), 12)
        assert roundtrip.same_parts(x.truncate(12))

    def test_low_order_generator_rejected(self):
        with pytest.raises(ValueError):
            lie_exp(QhSeries.monomial((1, 0, 0)), QhSeries.coordinate_x(), 8)


class TestAreaPreservation:
    def test_mcmillan_nonlinearity(self):
        f = QhSeries.from_terms([((0, 0, 1), 1), ((2, 0, 0), -1)])
        ok, bad = validate_area_preservation(f, f, up_to=12)
        assert ok and bad is None

    def test_divergent_example(self):
        f = QhSeries.from_terms([((2, 0, 0), 1)])
        ok, bad = validate_area_preservation(f, QhSeries.zero(), up_to=8)
        assert not ok
        assert bad == 2  # d/dx of x^2 enters at order 2

    def test_zero_map(self):
        ok, _ = validate_area_preservation(QhSeries.zero(), QhSeries.zero(), up_to=10)
        assert ok


class TestSerialization:
    def test_round_trip_rational(self):
        f = h6().truncate(9)
        doc = series_to_json(f)
        back = series_from_json(doc)
        assert back.same_parts(f)
        assert back.trunc == f.trunc

    def test_round_trip_extension(self):
        r = Coefficient(Fraction(1, 3), Fraction(-2, 7), Fraction(5, 2))
        f = QhSeries.from_terms([((1, 1, 0), r)])
        back = series_from_json(series_to_json(f))
        assert back.part(5).coeff((1, 1, 0)) == r

    def test_json_is_integer_exact(self):
        doc = series_to_json(h6())
        for term in doc["terms"]:
            assert isinstance(term["num"], int) and isinstance(term["den"], int)
