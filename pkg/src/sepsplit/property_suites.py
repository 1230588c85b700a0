"""Randomized exact property suites for the symbolic layers.

Each check asserts an algebraic identity term-exactly on randomly generated
small inputs; a deterministic seed makes runs reproducible.  Used by the CLI
``verify`` subcommand and the acceptance tests.
"""

from __future__ import annotations

import random
from fractions import Fraction
from typing import Callable, List, Tuple

from .coefficients import Coefficient
from .eta import EtaPolynomial, eta_reduce
from .qh import QhSeries, lie_exp, poisson, qh_order, series_from_json, series_to_json

Failures = List[Tuple[str, str]]


def _random_series(rng: random.Random, max_terms: int = 4, min_order: int = 0,
                   max_order: int = 14) -> QhSeries:
    entries = []
    for _ in range(rng.randint(1, max_terms)):
        for _ in range(30):
            k = rng.randint(0, 4)
            l = rng.randint(0, 3)
            m = rng.randint(0, 2)
            p = qh_order((k, l, m))
            if min_order <= p <= max_order:
                break
        else:
            continue
        coeff = Fraction(rng.randint(-6, 6), rng.randint(1, 6))
        entries.append((((k, l, m)), coeff))
    return QhSeries.from_terms(entries)


def _random_generator(rng: random.Random) -> QhSeries:
    # generator for Lie transforms: lowest order >= 6
    entries = []
    for _ in range(rng.randint(1, 3)):
        for _ in range(40):
            k = rng.randint(0, 4)
            l = rng.randint(0, 3)
            m = rng.randint(0, 2)
            if 6 <= qh_order((k, l, m)) <= 12:
                break
        else:
            continue
        entries.append(((k, l, m), Fraction(rng.randint(-4, 4), rng.randint(1, 5))))
    series = QhSeries.from_terms(entries)
    if series.is_zero():
        return QhSeries.monomial((3, 0, 0), Fraction(1, 2))
    return series


def algebra_suite(cases: int = 1000, seed: int = 20240901) -> Failures:
    """Grading, antisymmetry, Jacobi, canonical Lie transforms, serialization."""
    rng = random.Random(seed)
    failures: Failures = []
    checks: List[Callable[[random.Random], Tuple[bool, str]]] = [
        _check_grading, _check_antisymmetry, _check_jacobi,
        _check_lie_inverse, _check_lie_canonical, _check_serialization,
    ]
    for i in range(cases):
        check = checks[i % len(checks)]
        ok, detail = check(rng)
        if not ok:
            failures.append((check.__name__, detail))
    return failures


def _check_grading(rng) -> Tuple[bool, str]:
    f = _random_series(rng)
    g = _random_series(rng)
    prod = f * g
    for p in prod.parts:
        pieces = {pf + pg for pf in f.parts for pg in g.parts}
        if p not in pieces:
            return False, f"product order {p} outside the grading sums"
    br = poisson(f, g)
    for p in br.parts:
        pieces = {pf + pg - 5 for pf in f.parts for pg in g.parts}
        if p not in pieces:
            return False, f"bracket order {p} violates p+q-5"
    return True, ""


def _check_antisymmetry(rng) -> Tuple[bool, str]:
    f = _random_series(rng)
    g = _random_series(rng)
    lhs = poisson(f, g)
    rhs = -poisson(g, f)
    return lhs.same_parts(rhs), "bracket antisymmetry"


def _check_jacobi(rng) -> Tuple[bool, str]:
    f = _random_series(rng, max_terms=2, max_order=10)
    g = _random_series(rng, max_terms=2, max_order=10)
    h = _random_series(rng, max_terms=2, max_order=10)
    total = (poisson(f, poisson(g, h)) + poisson(g, poisson(h, f))
             + poisson(h, poisson(f, g)))
    return total.is_zero(), "Jacobi identity"


def _check_lie_inverse(rng) -> Tuple[bool, str]:
    chi = _random_generator(rng)
    target = 13
    x = QhSeries.coordinate_x()
    forward = lie_exp(chi, x, target)
    back = lie_exp(-chi, forward, target)
    return back.same_parts(x.truncate(target)), "exp(L) o exp(-L) != id"


def _check_lie_canonical(rng) -> Tuple[bool, str]:
    chi = _random_generator(rng)
    target = 12
    xs = lie_exp(chi, QhSeries.coordinate_x(), target)
    ys = lie_exp(chi, QhSeries.coordinate_y(), target)
    bracket = poisson(xs, ys, max_order=target - 5)
    one = QhSeries.monomial((0, 0, 0), 1).truncate(target - 5)
    return bracket.same_parts(one), "Lie transform not canonical"


def _check_serialization(rng) -> Tuple[bool, str]:
    f = _random_series(rng)
    doc = series_to_json(f)
    back = series_from_json(doc)
    return back.same_parts(f) and back.trunc == f.trunc, "serialization round-trip"


def _random_eta(rng: random.Random, deg: int = 4) -> EtaPolynomial:
    terms = {}
    for _ in range(rng.randint(1, 4)):
        i = rng.randint(0, deg)
        j = rng.randint(0, 3)
        terms[(i, j)] = Fraction(rng.randint(-5, 5), rng.randint(1, 4))
    return eta_reduce(terms)


def eta_suite(cases: int = 1000, seed: int = 20240901) -> Failures:
    """Reduction idempotence, ring laws and derivative rules in the eta algebra."""
    rng = random.Random(seed)
    failures: Failures = []
    checks = [_check_eta_reduction, _check_eta_leibniz, _check_eta_ring]
    for i in range(cases):
        check = checks[i % len(checks)]
        ok, detail = check(rng)
        if not ok:
            failures.append((check.__name__, detail))
    return failures


def _check_eta_reduction(rng) -> Tuple[bool, str]:
    # reducing eta1^2 explicitly must agree with multiplying reduced forms
    i = rng.randint(0, 3)
    j = rng.randint(0, 4)
    raw = eta_reduce({(i, j): 1})
    built = EtaPolynomial.eta0_power(i) if i else EtaPolynomial.constant(1)
    e1 = EtaPolynomial.eta1()
    for _ in range(j):
        built = built * e1
    ok = raw == built
    if not ok:
        return False, f"reduction mismatch at eta0^{i} eta1^{j}"
    if raw.q_degree() >= 0 and j % 2 == 0:
        return False, "even eta1 power left a residual eta1 part"
    return True, ""


def _check_eta_leibniz(rng) -> Tuple[bool, str]:
    p = _random_eta(rng)
    q = _random_eta(rng)
    lhs = (p * q).derivative()
    rhs = p.derivative() * q + p * q.derivative()
    return lhs == rhs, "Leibniz rule in the eta algebra"


def _check_eta_ring(rng) -> Tuple[bool, str]:
    p = _random_eta(rng)
    q = _random_eta(rng)
    r = _random_eta(rng)
    if not (p * q) == (q * p):
        return False, "commutativity"
    lhs = p * (q + r)
    rhs = p * q + p * r
    return lhs == rhs, "distributivity"


def all_suites(cases: int = 1000, seed: int = 20240901) -> Failures:
    half = cases // 2
    return algebra_suite(half, seed) + eta_suite(cases - half, seed + 1)
