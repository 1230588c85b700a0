"""High-precision dynamics: saddles, manifolds, homoclinics, flows."""

import random
from dataclasses import replace

import pytest
from mpmath import mp

from sepsplit.errors import SepsplitError, WrongSideOfBifurcationError
from sepsplit.interpolate import scaled_hamiltonian
from sepsplit.numerics import (
    FlowSeparatrix,
    NumericMap,
    PolyHamiltonian,
    PrecisionPolicy,
    conjugacy_residual,
    evaluate_manifold,
    extension_experiment,
    find_homoclinics,
    find_saddle,
    formal_sup_deviation,
    homoclinic_invariant,
    lobe_area,
    parametrize_manifold,
    scaled_map,
    splitting_record,
    time_one_flow_map,
    turning_parameter,
)

DIGITS = 60


@pytest.fixture(scope="module")
def saddle(mcmillan):
    return find_saddle(mcmillan, "0.01", DIGITS)


@pytest.fixture(scope="module")
def manifolds(mcmillan, saddle):
    um = parametrize_manifold(mcmillan, saddle, "unstable")
    sm = parametrize_manifold(mcmillan, saddle, "stable")
    return um, sm


@pytest.fixture(scope="module")
def orbits(manifolds):
    um, sm = manifolds
    return find_homoclinics(sm, um)


class TestPrecisionPolicy:
    def test_formula(self):
        policy = PrecisionPolicy()
        import math

        L = 0.4436
        expected = math.ceil(1.5 * 2 * math.pi ** 2 / (L * math.log(10))) + 50
        assert policy.digits_for(L) == expected

    def test_base_floor(self):
        assert PrecisionPolicy(base_digits=500).digits_for(1.0) == 500


class TestSaddle:
    def test_fixed_point_closed_form(self, saddle):
        with mp.workdps(DIGITS):
            assert abs(saddle.point[0] + mp.mpf("0.1")) < mp.mpf(10) ** (-DIGITS + 5)
            assert abs(saddle.point[1]) < mp.mpf(10) ** (-DIGITS + 5)

    def test_multiplier_closed_form(self, saddle):
        with mp.workdps(DIGITS):
            eps = mp.mpf("0.01")
            lam = 1 + mp.sqrt(eps) + mp.sqrt(2 * mp.sqrt(eps) + eps)
            assert abs(saddle.multiplier - lam) < mp.mpf(10) ** (-DIGITS + 10)

    def test_fixed_point_residual(self, mcmillan, saddle):
        nmap = NumericMap(mcmillan)
        with mp.workdps(DIGITS):
            x1, y1 = nmap.apply(saddle.point[0], saddle.point[1], saddle.eps)
            assert abs(x1 - saddle.point[0]) < mp.mpf(10) ** (-DIGITS + 5)
            assert abs(y1 - saddle.point[1]) < mp.mpf(10) ** (-DIGITS + 5)

    def test_multiplier_law_order(self, mcmillan):
        # |log lambda - sqrt(2) delta| = O(delta^3), ratios bounded by 2 on halvings
        ratios = []
        with mp.workdps(40):
            for ds in ("0.1", "0.2", "0.3"):
                delta = mp.mpf(ds)
                sd = find_saddle(mcmillan, delta ** 4, 40)
                ratios.append(abs(sd.log_multiplier - mp.sqrt(2) * delta) / delta ** 3)
            for r in ratios:
                assert ratios[0] / 2 <= r <= ratios[0] * 2

    def test_log_multiplier_matches_formal_series(self, mcmillan, mcmillan_sep8):
        # log(lambda_delta) - truncated mu(delta) decays at the next odd power
        with mp.workdps(60):
            errs = []
            for ds in ("0.2", "0.1"):
                delta = mp.mpf(ds)
                sd = find_saddle(mcmillan, delta ** 4, 60)
                mu = mcmillan_sep8.log_multiplier_series(mp, delta, terms=4)
                errs.append(abs(sd.log_multiplier - mu))
            # truncating after delta^7 leaves O(delta^9)
            order = mp.log(errs[0] / errs[1]) / mp.log(2)
            assert order > 8.5

    def test_not_a_saddle_rejected(self, mcmillan):
        with pytest.raises(SepsplitError):
            find_saddle(mcmillan, "-0.01", 30)


class TestManifolds:
    def test_conjugacy_residuals(self, mcmillan, manifolds):
        um, sm = manifolds
        rng = random.Random(11)
        with mp.workdps(DIGITS + 10):
            tol = mp.mpf(10) ** (1 - DIGITS)
            for _ in range(10):
                t = mp.mpf(rng.uniform(-8.0, 1.0))
                assert conjugacy_residual(um, t) < tol
                assert conjugacy_residual(sm, t) < tol

    def test_limit_at_minus_infinity(self, manifolds, saddle):
        um, _ = manifolds
        with mp.workdps(DIGITS):
            (pt, _) = evaluate_manifold(um, mp.mpf(-40), derivative=False)
            assert abs(pt[0] - saddle.point[0]) < mp.mpf(10) ** (-15)
            assert abs(pt[1] - saddle.point[1]) < mp.mpf(10) ** (-15)

    def test_truncation_sanity(self, mcmillan, saddle, manifolds):
        um, _ = manifolds
        longer = parametrize_manifold(mcmillan, saddle, "unstable",
                                      j_max=2 * (len(um.cx) - 1))
        with mp.workdps(DIGITS + 10):
            tol = mp.mpf(10) ** (1 - DIGITS)
            for frac in ("0.3", "0.7", "1.0"):
                z = um.r_v * mp.mpf(frac)
                (a, _) = um.series_value(z)
                (b, _) = longer.series_value(z)
                assert abs(a[0] - b[0]) < tol and abs(a[1] - b[1]) < tol

    def test_pushforward_count_invariance(self, manifolds):
        um, _ = manifolds
        smaller = replace(um, r_v=um.r_v / 2)  # forces one more map application
        with mp.workdps(DIGITS + 10):
            tol = mp.mpf(10) ** (1 - DIGITS)
            for t in (mp.mpf("0.4"), mp.mpf("1.3")):
                (a, da) = evaluate_manifold(um, t)
                (b, db) = evaluate_manifold(smaller, t)
                assert abs(a[0] - b[0]) < tol and abs(a[1] - b[1]) < tol
                assert abs(da[0] - db[0]) < tol and abs(da[1] - db[1]) < tol


class TestHomoclinics:
    def test_exactly_two_orbits(self, orbits, saddle):
        assert len(orbits) == 2
        with mp.workdps(DIGITS):
            gap = abs(orbits[1].t_unstable - orbits[0].t_unstable)
            assert gap < saddle.log_multiplier

    def test_residuals(self, orbits):
        with mp.workdps(DIGITS):
            tol = mp.mpf(10) ** (20 - DIGITS)
            for orbit in orbits:
                assert orbit.residual < tol

    def test_opposite_signs(self, orbits):
        with mp.workdps(DIGITS):
            assert orbits[0].omega * orbits[1].omega < 0
            pairing = abs(orbits[0].omega + orbits[1].omega) / abs(orbits[0].omega)
            assert pairing < mp.mpf("1e-10")

    def test_invariant_along_orbit(self, manifolds, orbits, saddle):
        um, sm = manifolds
        with mp.workdps(DIGITS):
            L = saddle.log_multiplier
            o = orbits[0]
            w0 = homoclinic_invariant(sm, um, o.t_stable, o.t_unstable)
            w1 = homoclinic_invariant(sm, um, o.t_stable + L, o.t_unstable + L)
            assert abs(w1 - w0) / abs(w0) < mp.mpf(10) ** (25 - DIGITS)

    def test_invariant_under_normalization(self, mcmillan, saddle, orbits):
        # rescale both parametrizations; omega is unchanged to working accuracy
        um2 = parametrize_manifold(mcmillan, saddle, "unstable", s0="0.0625")
        sm2 = parametrize_manifold(mcmillan, saddle, "stable", s0="0.0625")
        orbits2 = find_homoclinics(sm2, um2)
        with mp.workdps(DIGITS):
            w_ref = sorted([o.omega for o in orbits], key=lambda v: float(v))
            w_new = sorted([o.omega for o in orbits2], key=lambda v: float(v))
            for a, b in zip(w_ref, w_new):
                assert abs(a - b) / abs(a) < mp.mpf(10) ** (22 - DIGITS)

    def test_antisymmetry_and_parallel(self, manifolds, orbits):
        um, sm = manifolds
        o = orbits[0]
        with mp.workdps(DIGITS):
            _, ds = evaluate_manifold(sm, o.t_stable)
            _, du = evaluate_manifold(um, o.t_unstable)
            w = ds[0] * du[1] - ds[1] * du[0]
            w_swapped = du[0] * ds[1] - du[1] * ds[0]
            assert w == -w_swapped
            assert ds[0] * ds[1] - ds[1] * ds[0] == 0

    def test_seed_range_regression(self, mcmillan):
        # the default seeding converges across the sweep range of the study
        for ds in ("0.25", "0.45"):
            rec = splitting_record(mcmillan, ds, with_lobe=False)
            assert len(rec.orbits) == 2


class TestLobe:
    def test_degenerate_loop(self, manifolds, orbits):
        um, sm = manifolds
        with mp.workdps(DIGITS):
            area = lobe_area(sm, um, orbits[0], orbits[0])
            assert abs(area) < mp.mpf(10) ** (10 - DIGITS)

    def test_quadrature_refinement(self, manifolds, orbits):
        um, sm = manifolds
        with mp.workdps(DIGITS):
            a1 = lobe_area(sm, um, orbits[0], orbits[1], quad_degree=8)
            a2 = lobe_area(sm, um, orbits[0], orbits[1], quad_degree=10)
            assert abs(a1 - a2) < mp.mpf(10) ** (10 - DIGITS) * abs(a1)

    def test_omega_relation(self, manifolds, orbits, saddle):
        um, sm = manifolds
        with mp.workdps(DIGITS):
            area = lobe_area(sm, um, orbits[0], orbits[1])
            L = saddle.log_multiplier
            predicted = abs(orbits[0].omega) * L ** 2 / (2 * mp.pi ** 2)
            assert abs(abs(area) - predicted) / abs(area) < mp.mpf("0.05")


@pytest.fixture(scope="module")
def scaled_table(mcmillan_ham_mech):
    return scaled_hamiltonian(mcmillan_ham_mech, 6)


class TestFlowSeparatrix:
    def test_limit_flow_closed_form(self, scaled_table):
        with mp.workdps(40):
            ham = PolyHamiltonian.from_scaled_table({1: scaled_table[1]}, "0.2")
            fs = FlowSeparatrix(ham, 40)
            apex = fs.apex()
            grid = [apex + mp.mpf(v) / 4 for v in range(-16, 9)]
            for (x, _), t in zip(fs.points_on_grid(grid), grid):
                s = t - apex
                assert abs(x - (-1 + 3 / mp.cosh(s / 2) ** 2)) < mp.mpf("1e-35")

    def test_energy_conservation(self, scaled_table):
        with mp.workdps(40):
            ham = PolyHamiltonian.from_scaled_table(
                {k: scaled_table[k] for k in (1, 2, 3)}, "0.3")
            fs = FlowSeparatrix(ham, 40)
            e_ref = fs.energy(-5)
            for t in (0.0, 3.0, 6.0):
                assert abs(fs.energy(t) - e_ref) < mp.mpf(10) ** (5 - 40)

    def test_saddle_limit(self, scaled_table):
        with mp.workdps(40):
            ham = PolyHamiltonian.from_scaled_table({1: scaled_table[1]}, "0.2")
            fs = FlowSeparatrix(ham, 40)
            x, y = fs.point(-30)
            assert abs(x - fs.saddle[0]) < mp.mpf("1e-12")
            assert abs(y - fs.saddle[1]) < mp.mpf("1e-12")

    def test_sepint_order(self, mcmillan_formal, scaled_table):
        # flow separatrix of the truncated Hamiltonian tracks the formal
        # series at the claimed order in delta
        from sepsplit.asymptotics import order_regression

        mech, _, _ = mcmillan_formal
        n = 3
        pairs = []
        with mp.workdps(40):
            mu0 = mech.mu0(mp)
            for ds in ("0.4", "0.3", "0.2", "0.15"):
                d = mp.mpf(ds)
                ham = PolyHamiltonian.from_scaled_table(
                    {k: scaled_table[k] for k in range(1, n + 1)}, ds)
                fs = FlowSeparatrix(ham, 40)
                apex = fs.apex()
                trunc = mech.truncated(n + 1)
                ss = [mp.mpf(v) / 2 for v in range(-12, 7)]
                worst = mp.mpf(0)
                for (x, _), s in zip(fs.points_on_grid([apex + s for s in ss]), ss):
                    xf = trunc.x.evaluate(mp, s, d, mu0) / d ** 2
                    worst = max(worst, abs(x - xf))
                pairs.append((ds, worst))
        reg = order_regression(pairs, claimed=n)
        assert reg.passed, f"slope {reg.slope}"

    def test_sepint_floor_exclusion(self, mcmillan_formal, scaled_table):
        # for this family H^2 = H^1 and X^2 solves it exactly: all points sit
        # at the numeric floor and the regression must report them excluded
        from sepsplit.asymptotics import order_regression
        from sepsplit.errors import PrecisionError

        mech, _, _ = mcmillan_formal
        pairs = []
        with mp.workdps(40):
            mu0 = mech.mu0(mp)
            for ds in ("0.4", "0.2"):
                d = mp.mpf(ds)
                ham = PolyHamiltonian.from_scaled_table(
                    {k: scaled_table[k] for k in (1, 2)}, ds)
                fs = FlowSeparatrix(ham, 40)
                apex = fs.apex()
                trunc = mech.truncated(3)
                ss = [mp.mpf(v) for v in range(-3, 3)]
                worst = max(abs(x - trunc.x.evaluate(mp, s, d, mu0) / d ** 2)
                            for (x, _), s in zip(
                                fs.points_on_grid([apex + s for s in ss]), ss))
                pairs.append((ds, worst))
            assert all(err < mp.mpf("1e-30") for _, err in pairs)
        with pytest.raises(PrecisionError):
            order_regression(pairs, claimed=2, floor=mp.mpf("1e-25"))


class TestFormalComparison:
    def test_manifold_tracks_formal_series(self, mcmillan, mcmillan_formal):
        _, orig, _ = mcmillan_formal
        errs = []
        for ds in ("0.3", "0.15"):
            with mp.workdps(50):
                sd = find_saddle(mcmillan, mp.mpf(ds) ** 4, 50)
            um = parametrize_manifold(mcmillan, sd, "unstable", 50)
            errs.append(formal_sup_deviation(um, orig, ds, n=2, samples=21))
        # O(delta^4): halving delta gains a factor ~16
        assert errs[0] / errs[1] > 8


class TestExtension:
    def test_identical_maps(self, mcmillan):
        with mp.workdps(30):
            step = scaled_map(mcmillan, "0.2", 30)
            sup, _ = extension_experiment(step, step, ("-0.9", "0.3"),
                                          ("-0.9", "0.3"), 1, 3.0, "0.2", 30)
            assert sup == 0

    def test_k_hat_bounded_under_halving(self, mcmillan, mcmillan_ham_mech):
        table = scaled_hamiltonian(mcmillan_ham_mech, 1)
        ks = []
        for ds in ("0.2", "0.1", "0.05"):
            with mp.workdps(30):
                step_map = scaled_map(mcmillan, ds, 30)
                ham = PolyHamiltonian.from_scaled_table({1: table[1]}, ds)
                step_flow = time_one_flow_map(ham, 30)
                _, k_hat = extension_experiment(step_map, step_flow, ("-0.9", "0.3"),
                                                ("-0.9", "0.3"), 1, 5.0, ds, 30)
                ks.append(k_hat)
        assert max(ks) < 2 * min(ks) + 1

    def test_escape_detected(self, mcmillan):
        with mp.workdps(30):
            step = scaled_map(mcmillan, "0.3", 30)
            with pytest.raises(SepsplitError):
                extension_experiment(step, step, ("30", "30"), ("30", "30"),
                                     1, 3.0, "0.3", 30, domain_radius=10.0)


class TestReversorFastPath:
    def test_symmetric_orbits_match_generic_search(self, mcmillan, manifolds, orbits):
        from sepsplit.numerics import reversor_homoclinics

        um, _ = manifolds
        sym = reversor_homoclinics(um)
        assert len(sym) == 2
        with mp.workdps(DIGITS):
            generic = sorted((o.omega for o in orbits), key=float)
            fast = sorted((o.omega for o in sym), key=float)
            for a, b in zip(generic, fast):
                assert abs(a - b) / abs(a) < mp.mpf(10) ** (25 - DIGITS)

    def test_requires_declared_reversor(self, henon, saddle):
        from sepsplit.errors import SepsplitError
        from sepsplit.numerics import reversor_homoclinics

        sd = find_saddle(henon, "0.01", 40)
        um = parametrize_manifold(henon, sd, "unstable", 40)
        with pytest.raises(SepsplitError):
            reversor_homoclinics(um)
