"""Formal separatrix: eta algebra, the recursion, assembly, Laurent data."""

from fractions import Fraction

import pytest
import sympy as sp
from mpmath import mp

from sepsplit.coefficients import Coefficient
from sepsplit.errors import TruncationError, WrongSideOfBifurcationError
from sepsplit.eta import EtaPolynomial, eta0_laurent, eta1_laurent, eta_derivative, eta_reduce
from sepsplit.formal_sep import (
    FormalSeparatrixData,
    SepSeries,
    assemble,
    base_order_roots,
    invert_change,
    laurent_reexpand,
    solve_base_order,
    y_consistency_residual,
)
from sepsplit.interpolate import change_map_components, interpolate, simplify
from sepsplit.maps import MapFamily
from sepsplit.qh import QhSeries


class TestEtaAlgebra:
    def test_reduce_eta1_squared(self):
        out = eta_reduce({(0, 2): 1})
        assert out == EtaPolynomial([0, 0, 1, -1])

    def test_reduce_eta1_cubed(self):
        out = eta_reduce({(0, 3): 1})
        assert out == EtaPolynomial((), [0, 0, 1, -1])

    def test_reduce_already_canonical(self):
        assert eta_reduce({(1, 0): 1}) == EtaPolynomial([0, 1])

    def test_derivative_of_eta0(self):
        assert eta_derivative(EtaPolynomial([0, 1])) == EtaPolynomial((), [1])

    def test_derivative_of_eta1(self):
        out = eta_derivative(EtaPolynomial.eta1())
        assert out == EtaPolynomial([0, 1, Fraction(-3, 2)])

    def test_derivative_of_constant(self):
        assert eta_derivative(EtaPolynomial.constant(5)).is_zero()

    def test_numeric_matches_defining_functions(self):
        mp.dps = 30
        p = eta_reduce({(2, 1): Fraction(1, 3), (0, 2): 2, (1, 0): -1})
        t = mp.mpf("0.73")
        ch, sh = mp.cosh(t / 2), mp.sinh(t / 2)
        eta0 = 1 / ch ** 2
        eta1 = -sh / ch ** 3
        direct = Fraction(1, 3) * 1 * eta0 ** 2 * eta1 + 2 * eta1 ** 2 - eta0
        assert abs(p.evaluate(mp, t) - direct) < mp.mpf("1e-25")


class TestBaseOrder:
    def test_builtin_values(self):
        b0, b1, a1, c3 = solve_base_order(Fraction(1, 3), Fraction(-1))
        assert b0 == -1 and b1 == 3 and a1 == 1
        assert c3 == Fraction(2, 3)

    def test_turning_point_value(self):
        # x1(0) = b0 + b1 at eta0 = 1 equals the loop apex value 2 for a = b = 1
        b0, b1, _, _ = solve_base_order(Fraction(1, 3), Fraction(-1))
        assert b0 + b1 == 2

    def test_sign_rule_gives_positive_a1(self):
        b0, _, a1, _ = solve_base_order(Fraction(1, 3), Fraction(-1))
        assert a1.sign() == 1 and b0.sign() == -1
        roots = base_order_roots(Fraction(1, 3), Fraction(-1))
        assert {r[1].sign() for r in roots} == {1, -1}

    def test_wrong_side_rejected(self):
        with pytest.raises(WrongSideOfBifurcationError):
            solve_base_order(Fraction(1, 3), Fraction(1))

    def test_quadratic_extension_case(self):
        # u30 = 2/3, u11 = -1 (family f = g = eps - 2 x^2): b0 = -sqrt(1/2)
        b0, b1, a1, c3 = solve_base_order(Fraction(2, 3), Fraction(-1))
        assert not b0.is_rational
        assert (b0 * b0).as_fraction() == Fraction(1, 2)
        # a1 = sqrt(a b) with a = 2, b = 1
        assert (a1 * a1).as_fraction() == 2


def brute_force_recursion(u_table, N):
    """Independent computer-algebra solve of the separatrix equation.

    Collects the delta^(2m) residual of beta xdot^2 + U(x) - c with sympy
    and solves every order as one linear system in all unknown coefficients,
    making no use of the library's solution schedule.
    """
    u = {k: sp.Rational(v.numerator, v.denominator) for k, v in u_table.items()}
    e0 = sp.symbols("eta0")
    e1sq = e0 ** 2 - e0 ** 3
    b0, b1, a1 = sp.Integer(-1), sp.Integer(3), sp.Integer(1)
    xs = {1: b0 + b1 * e0}
    aa = {1: a1}
    cc = {3: u[(1, 1)] * b0 + u[(3, 0)] * b0 ** 3}

    def compositions(k, total):
        if k == 1:
            return [[total]] if total in xs else []
        out = []
        for first in xs:
            if first < total:
                for rest in compositions(k - 1, total - first):
                    out.append([first] + rest)
        return out

    def residual(order):
        total = sp.Integer(0)
        for k, ak in aa.items():
            for l in xs:
                m = order - k - l
                if m in xs:
                    total += ak * sp.diff(xs[l], e0) * sp.diff(xs[m], e0) * e1sq
        for (k, m), ukm in u.items():
            idx = order - 2 * m
            if idx < k:
                continue
            for combo in compositions(k, idx):
                term = sp.Integer(1)
                for j in combo:
                    term *= xs[j]
                total += ukm * term
        total -= cc.get(order, sp.Integer(0))
        return sp.Poly(sp.expand(total), e0).all_coeffs()[::-1]

    for n in range(2, N + 1):
        b_sym = sp.symbols(f"b{n}_0:{n + 1}")
        a_sym, c_sym = sp.Symbol(f"a{n}"), sp.Symbol(f"c{n + 2}")
        xs[n] = sum(b_sym[m] * e0 ** m for m in range(n + 1))
        aa[n], cc[n + 2] = a_sym, c_sym
        sol = sp.solve(residual(n + 2), list(b_sym) + [a_sym, c_sym], dict=True)
        assert len(sol) == 1
        xs[n] = sp.expand(xs[n].subs(sol[0]))
        aa[n] = sol[0][a_sym]
        cc[n + 2] = sol[0][c_sym]
    return xs, aa, cc


class TestRecursion:
    def test_order_two_identities(self, mcmillan_state):
        st = mcmillan_state
        u30 = Coefficient.of(st.u[(3, 0)])
        u40 = Coefficient.of(st.u[(4, 0)])
        a1b1 = st.a1 * st.b1
        denom = a1b1 * 4 + st.A * 3
        # denominator identity and the explicit top coefficient
        assert denom == u30 * st.b0 ** 2 * 9
        assert st.b_rows[2][2] == u40 * st.b1 ** 4 / denom
        # 2x2 determinant identity
        assert st.A * st.b1 ** 2 == u30 * st.b0 ** 4 * (-81)

    def test_vanishing_sources(self):
        # exact cubic potential: u21 = u40 = 0 makes the order-2 step trivial
        st = FormalSeparatrixData({(3, 0): Fraction(1, 3), (1, 1): Fraction(-1)},
                                  max_order=10)
        st.solve_order_n(2)
        assert st.x[2].is_zero()
        assert st.a[2].is_zero() and st.c[4].is_zero()

    def test_order_three_against_independent_oracle(self, mcmillan_state):
        xs, aa, cc = brute_force_recursion(mcmillan_state.u, 3)
        # frozen golden values, produced by the oracle
        assert aa[3] == sp.Rational(2, 45)
        assert cc[5] == 0
        golden = [sp.Rational(-1, 360), sp.Rational(163, 480),
                  sp.Rational(-363, 320), sp.Rational(243, 320)]
        oracle = sp.Poly(xs[3], sp.symbols("eta0")).all_coeffs()[::-1]
        assert list(oracle) == golden
        # and the library reproduces the oracle
        st = mcmillan_state
        assert st.a[3] == Coefficient(Fraction(2, 45))
        assert st.c[5].is_zero()
        assert [c.as_fraction() for c in st.x[3].P] == \
            [Fraction(g.p, g.q) for g in golden]

    def test_exact_residual_through_order(self, mcmillan_state):
        assert mcmillan_state.squared_equation_residual(10) == {}

    def test_degree_bounds(self, mcmillan_state):
        for n, poly in mcmillan_state.x.items():
            assert poly.p_degree() <= n
            assert not poly.has_eta1_part()

    def test_orders_must_be_consecutive(self):
        st = FormalSeparatrixData({(3, 0): Fraction(1, 3), (1, 1): Fraction(-1)})
        with pytest.raises(Exception):
            st.solve_order_n(3)

    def test_truncation_guard(self):
        st = FormalSeparatrixData({(3, 0): Fraction(1, 3), (1, 1): Fraction(-1),
                                   (4, 0): Fraction(1, 24)})
        with pytest.raises(TruncationError):
            st.solve_through(5)

    def test_quadratic_extension_recursion(self):
        fam = MapFamily(*2 * [QhSeries.from_terms([((0, 0, 1), 1), ((2, 0, 0), -2)])],
                        label="asym")
        mech = simplify(interpolate(fam, 7), 7)
        st = FormalSeparatrixData(mech.potential()).solve_through(4)
        assert st.d == Fraction(1, 2)
        assert st.squared_equation_residual(6) == {}
        # the squared-exponent series must stay real and positive at the front
        assert st.a[1].sign() == 1


class TestAssemble:
    def test_leading_y_term(self, mcmillan_sep8):
        # y = mu * xdot: leading delta^3 coefficient is 3*eta1 (times mu0)
        lead = mcmillan_sep8.y.coeffs[3]
        assert lead == EtaPolynomial((), [3])
        assert mcmillan_sep8.mu0_sq == Coefficient(2)

    def test_beta_series_front(self, mcmillan_state):
        assert mcmillan_state.a[1] == 1  # sqrt(a b) for a = b = 1

    def test_mu0_fourth_power(self, mcmillan_sep8):
        # mu0^4 = (2 a1)^2 = 4ab
        assert mcmillan_sep8.mu0_sq ** 2 == Coefficient(4)

    def test_y_consistency(self, mcmillan_sep8):
        assert y_consistency_residual(mcmillan_sep8) == {}

    def test_parity_structure(self, mcmillan_sep8):
        assert mcmillan_sep8.x.parity_ok()
        assert mcmillan_sep8.y.parity_ok()

    def test_log_multiplier_series_front(self, mcmillan_sep8):
        mp.dps = 30
        val = mcmillan_sep8.log_multiplier_series(mp, mp.mpf("0.1"))
        expect = mp.sqrt(2) * mp.mpf("0.1") * (1 - mp.mpf("0.01") / 12
                                               + 3 * mp.mpf("0.0001") / 160)
        assert abs(val - expect) < 1e-8


class TestInvertChange:
    def test_identity_change_log(self, mcmillan_formal):
        mech, _, _ = mcmillan_formal
        out = invert_change(mech, [])
        assert out.x.coeffs == mech.x.coeffs
        assert out.y.coeffs == mech.y.coeffs

    def test_leading_order_unchanged(self, mcmillan_formal):
        mech, orig, _ = mcmillan_formal
        assert orig.x.coeffs[2] == mech.x.coeffs[2]

    def test_structure_and_degrees(self, mcmillan_formal):
        _, orig, _ = mcmillan_formal
        for series in (orig.x, orig.y):
            assert series.parity_ok()
            for k, poly in series.coeffs.items():
                if k % 2 == 0:
                    assert poly.p_degree() <= k // 2
                else:
                    assert poly.q_degree() <= (k - 3) // 2

    def test_against_sympy_substitution(self, mcmillan_formal):
        """Low orders of the restored series via an independent expansion."""
        mech, orig, ham = mcmillan_formal
        cx, cy = change_map_components(ham.change_log, target_order=8)
        d, e0, e1 = sp.symbols("delta eta0 eta1")
        root2 = sp.sqrt(2)

        def sep_to_sympy(series, top):
            total = sp.Integer(0)
            for k, poly in series.coeffs.items():
                if k > top:
                    continue
                factor = d ** k * (root2 if k % 2 else 1)
                body = sum(sp.Rational(c.p.numerator, c.p.denominator) * e0 ** i
                           for i, c in enumerate(poly.P))
                body += e1 * sum(sp.Rational(c.p.numerator, c.p.denominator) * e0 ** i
                                 for i, c in enumerate(poly.Q))
                total += factor * body
            return total

        xm = sep_to_sympy(mech.x, 6)
        ym = sep_to_sympy(mech.y, 7)

        def qh_to_sympy(series, xs, ys):
            total = sp.Integer(0)
            for p in series.orders():
                for (k, l, m), c in series.parts[p]:
                    total += (sp.Rational(c.p.numerator, c.p.denominator)
                              * xs ** k * ys ** l * d ** (4 * m))
            return total

        for component, target in ((orig.x, qh_to_sympy(cx, xm, ym)),
                                  (orig.y, qh_to_sympy(cy, xm, ym))):
            expanded = sp.expand(target)
            # reduce powers of eta1 via eta1^2 = eta0^2 - eta0^3
            for _ in range(4):
                expanded = sp.expand(expanded.subs(e1 ** 2, e0 ** 2 - e0 ** 3))
            poly = sp.Poly(expanded, d)
            for k in range(2, 6):
                want = sep_to_sympy(
                    SepSeries({k: component.coeffs[k]} if k in component.coeffs else {},
                              k, component.mu0_sq), k)
                got = poly.coeff_monomial(d ** k) * d ** k
                assert sp.simplify(sp.expand(got - want)) == 0, f"delta^{k}"


class TestLaurent:
    def test_eta0_series_against_sympy(self):
        s = sp.symbols("s")
        series = sp.series(-1 / sp.sinh(s / 2) ** 2, s, 0, 10).removeO()
        got = eta0_laurent(4)
        for k in range(4):
            want = series.coeff(s, 2 * k - 2) / (-4)
            assert sp.Rational(got[k].numerator, got[k].denominator) == want

    def test_eta1_is_derivative(self):
        s = sp.symbols("s")
        series = sp.series(sp.cosh(s / 2) / sp.sinh(s / 2) ** 3, s, 0, 10).removeO()
        got = eta1_laurent(3)
        for k in range(3):
            want = series.coeff(s, 2 * k - 3) / 8
            assert sp.Rational(got[k].numerator, got[k].denominator) == want

    def test_limit_flow_row(self, mcmillan_formal):
        # m = 0 row reproduces the pole data of the limit-flow separatrix
        _, orig, _ = mcmillan_formal
        table = laurent_reexpand(orig, m_max=2, k_max=6)
        assert table.x_rows[0][0] == Coefficient(-6)
        assert table.y_rows[0][0] == Coefficient(12)
        # x row 0, odd columns vanish at the front (second-order pole structure)
        assert table.x_rows[0][1].is_zero()

    def test_entries_live_in_the_field(self, mcmillan_formal):
        _, orig, _ = mcmillan_formal
        table = laurent_reexpand(orig, m_max=3, k_max=5)
        for rows in (table.x_rows, table.y_rows):
            for row in rows:
                for entry in row:
                    assert entry.is_rational  # builtin: d = 1, everything rational

    def test_numeric_consistency_matched_regime(self, mcmillan_formal):
        _, orig, _ = mcmillan_formal
        table = laurent_reexpand(orig, m_max=2, k_max=8)
        mp.dps = 50
        delta = mp.mpf("0.05")
        L = orig.log_multiplier_series(mp, delta)
        tau = 8 * mp.exp(mp.mpc(0, -2.3))
        t_c = mp.mpc(0, mp.pi) + tau * L
        mu0 = orig.mu0(mp)
        xs = orig.x.evaluate(mp, t_c, delta, mu0)
        ys = orig.y.evaluate(mp, t_c, delta, mu0)
        xt, yt = table.evaluate(mp, tau, delta)
        assert abs(xs - xt) < 1e-5
        assert abs(ys - yt) < 1e-5

    def test_depth_guards(self, mcmillan_formal):
        _, orig, _ = mcmillan_formal
        with pytest.raises(TruncationError):
            laurent_reexpand(orig, m_max=2, k_max=40)
        with pytest.raises(TruncationError):
            laurent_reexpand(orig, m_max=9, k_max=2)
