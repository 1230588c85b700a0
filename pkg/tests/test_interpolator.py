"""Interpolating Hamiltonian construction and normal-form simplification."""

from fractions import Fraction

import pytest

from sepsplit.errors import DegenerateBifurcationError
from sepsplit.interpolate import (
    apply_change_log,
    change_map_components,
    interpolate,
    interpolation_defect,
    scaled_hamiltonian,
    simplify,
)
from sepsplit.maps import MapFamily, normalize_signs
from sepsplit.qh import QhSeries, poisson


def family_from_potential(*terms):
    """f = g = sum of the given (key, coeff) monomials (always area-preserving)."""
    f = QhSeries.from_terms(list(terms))
    return MapFamily(f, f, label="test")


class TestNormalizeSigns:
    def test_both_signs_flipped_by_point_reflection(self):
        fam = family_from_potential(((0, 0, 1), -1), ((2, 0, 0), 1))
        assert fam.leading_coefficients() == (Fraction(-1), Fraction(-1))
        fixed, subs = normalize_signs(fam)
        assert fixed.leading_coefficients() == (Fraction(1), Fraction(1))
        assert subs == {"point_reflection": True, "epsilon_flip": False}

    def test_epsilon_flip_only(self):
        fam = family_from_potential(((0, 0, 1), -1), ((2, 0, 0), -1))
        fixed, subs = normalize_signs(fam)
        assert fixed.leading_coefficients() == (Fraction(1), Fraction(1))
        assert subs == {"point_reflection": False, "epsilon_flip": True}

    def test_already_normalized(self):
        fam = family_from_potential(((0, 0, 1), 1), ((2, 0, 0), -1))
        fixed, subs = normalize_signs(fam)
        assert subs == {"point_reflection": False, "epsilon_flip": False}
        assert fixed.f_terms.same_parts(fam.f_terms)

    def test_degenerate_rejected(self):
        fam = family_from_potential(((2, 0, 0), -1))
        with pytest.raises(DegenerateBifurcationError):
            normalize_signs(fam)


class TestInterpolate:
    def test_leading_hamiltonian(self, mcmillan):
        ham = interpolate(mcmillan, 1)
        expected = QhSeries.from_terms([
            ((0, 2, 0), Fraction(1, 2)), ((3, 0, 0), Fraction(1, 3)),
            ((1, 0, 1), -1),
        ])
        assert ham.parts.parts[6] == expected.part(6)

    def test_order_seven_part(self, mcmillan):
        ham = interpolate(mcmillan, 2)
        expected = QhSeries.from_terms([
            ((0, 1, 1), Fraction(1, 2)), ((2, 1, 0), Fraction(-1, 2)),
        ])
        assert ham.parts.parts[7] == expected.part(7)

    def test_h6_independent_of_higher_map_orders(self, mcmillan):
        richer = family_from_potential(((0, 0, 1), 1), ((2, 0, 0), -1),
                                       ((4, 0, 0), Fraction(1, 4)))
        h_a = interpolate(mcmillan, 2)
        h_b = interpolate(richer, 2)
        assert h_a.part(6) == h_b.part(6)
        assert h_a.part(7) == h_b.part(7)

    def test_uniqueness_across_truncations(self, mcmillan):
        h4 = interpolate(mcmillan, 4)
        h6 = interpolate(mcmillan, 6)
        for p in range(6, 10):
            assert h4.part(p) == h6.part(p)

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_defect_vanishes_in_guaranteed_range(self, mcmillan, n):
        ham = interpolate(mcmillan, n)
        dx, dy = interpolation_defect(mcmillan, ham, n)
        for p in dx.parts:
            assert p > n + 2, f"first-component defect at order {p}"
        for p in dy.parts:
            assert p > n + 3, f"second-component defect at order {p}"

    def test_defect_is_generically_sharp(self, mcmillan):
        # the first discrepancy really appears at orders (n+3, n+4) here
        ham = interpolate(mcmillan, 1)
        dx, dy = interpolation_defect(mcmillan, ham, 1)
        assert 4 in dx.parts and 5 in dy.parts


class TestSimplify:
    def test_mechanical_form_is_y_free(self, mcmillan_ham_mech):
        for p, poly in mcmillan_ham_mech.parts.parts.items():
            for (k, l, m), _ in poly:
                assert l == 0 or (p, (k, l, m)) == (6, (0, 2, 0))

    def test_order_seven_eliminated(self, mcmillan_ham_mech):
        assert mcmillan_ham_mech.part(7).is_zero()

    def test_odd_orders_vanish(self, mcmillan_ham_mech):
        # quasi-homogeneous order 2k+4m is even for any y-free monomial
        for p in mcmillan_ham_mech.parts.orders():
            assert p % 2 == 0

    def test_change_log_reproduces_raw(self, mcmillan_ham_raw, mcmillan_ham_mech):
        replayed = apply_change_log(mcmillan_ham_raw.parts,
                                    mcmillan_ham_mech.change_log, target_order=20)
        assert replayed.same_parts(mcmillan_ham_mech.parts)

    def test_change_map_is_canonical(self, mcmillan_ham_mech):
        cx, cy = change_map_components(mcmillan_ham_mech.change_log, target_order=14)
        bracket = poisson(cx, cy, max_order=9)
        one = QhSeries.monomial((0, 0, 0), 1).truncate(9)
        assert bracket.same_parts(one)

    def test_already_mechanical_unchanged(self):
        fam = family_from_potential(((0, 0, 1), 1), ((2, 0, 0), -1))
        ham = interpolate(fam, 1)  # only h6, which is already mechanical
        mech = simplify(ham, 1)
        assert mech.change_log == []
        assert mech.parts.same_parts(ham.parts)


class TestScaledHamiltonian:
    def test_leading_part_is_limit_flow(self, mcmillan_ham_mech):
        table = scaled_hamiltonian(mcmillan_ham_mech, 2)
        assert table[1] == {(0, 2): Fraction(1, 2), (3, 0): Fraction(1, 3),
                            (1, 0): Fraction(-1)}

    def test_zero_higher_parts(self):
        fam = family_from_potential(((0, 0, 1), 1), ((2, 0, 0), -1))
        ham = simplify(interpolate(fam, 1), 1)
        table = scaled_hamiltonian(ham, 1)
        assert set(table) == {1} and table[1]

    def test_raw_order_seven_scaling(self, mcmillan_ham_raw):
        # h7 = eps*y/2 - x^2 y/2 contributes Y/2 - X^2 Y / 2 at delta^2
        table = scaled_hamiltonian(mcmillan_ham_raw, 2)
        assert table[2] == {(0, 1): Fraction(1, 2), (2, 1): Fraction(-1, 2)}
