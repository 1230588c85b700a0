"""Algebra of the separatrix base functions.

The pair ``eta0 = 1/cosh^2(t/2)`` and ``eta1 = -sinh(t/2)/cosh^3(t/2)``
solves ``eta0' = eta1``, ``eta1' = eta0 - (3/2) eta0^2`` and obeys the exact
relation ``eta1^2 = eta0^2 - eta0^3``.  Every function built from them in this
library is reduced to the canonical form ``P(eta0) + eta1 * Q(eta0)``.

The module also provides the exact rational Laurent data of the pair at the
singular time ``t = i*pi``:

    eta0(i*pi + s) = -4/s^2 * (1 + sum_k c_k s^{2k})
    eta1(i*pi + s) =  8/s^3 * (1 + sum_k d_k s^{2k})

with convergence radius 2*pi (the distance to the next singularity).
"""

from __future__ import annotations

from fractions import Fraction
from functools import lru_cache
from typing import Dict, List, Sequence, Tuple

from .coefficients import Coefficient


def _strip(coeffs: List[Coefficient]) -> List[Coefficient]:
    while coeffs and coeffs[-1].is_zero():
        coeffs.pop()
    return coeffs


def _poly_add(a: Sequence[Coefficient], b: Sequence[Coefficient]) -> List[Coefficient]:
    n = max(len(a), len(b))
    out = []
    for i in range(n):
        va = a[i] if i < len(a) else Coefficient(0)
        vb = b[i] if i < len(b) else Coefficient(0)
        out.append(va + vb)
    return _strip(out)


def _poly_mul(a: Sequence[Coefficient], b: Sequence[Coefficient]) -> List[Coefficient]:
    if not a or not b:
        return []
    out = [Coefficient(0)] * (len(a) + len(b) - 1)
    for i, va in enumerate(a):
        if va.is_zero():
            continue
        for j, vb in enumerate(b):
            out[i + j] = out[i + j] + va * vb
    return _strip(out)


def _poly_scale(a: Sequence[Coefficient], s) -> List[Coefficient]:
    s = Coefficient.of(s)
    return _strip([v * s for v in a])


# eta1^2 = eta0^2 - eta0^3 as a coefficient list in eta0
_ETA1_SQ = [Coefficient(0), Coefficient(0), Coefficient(1), Coefficient(-1)]


class EtaPolynomial:
    """Canonical form P(eta0) + eta1 * Q(eta0) with exact coefficients."""

    __slots__ = ("P", "Q")

    def __init__(self, P: Sequence = (), Q: Sequence = ()):
        self.P = _strip([Coefficient.of(v) for v in P])
        self.Q = _strip([Coefficient.of(v) for v in Q])

    # -- constructors --------------------------------------------------------

    @staticmethod
    def constant(value) -> "EtaPolynomial":
        return EtaPolynomial([value])

    @staticmethod
    def eta0_power(m: int, value=1) -> "EtaPolynomial":
        return EtaPolynomial([0] * m + [value])

    @staticmethod
    def eta1() -> "EtaPolynomial":
        return EtaPolynomial((), [1])

    # -- structure -----------------------------------------------------------

    def is_zero(self) -> bool:
        return not self.P and not self.Q

    def p_degree(self) -> int:
        return len(self.P) - 1 if self.P else -1

    def q_degree(self) -> int:
        return len(self.Q) - 1 if self.Q else -1

    def p_coeff(self, i: int) -> Coefficient:
        return self.P[i] if 0 <= i < len(self.P) else Coefficient(0)

    def has_eta1_part(self) -> bool:
        return bool(self.Q)

    def __eq__(self, other):
        return (isinstance(other, EtaPolynomial)
                and self.P == other.P and self.Q == other.Q)

    def __repr__(self):
        return f"EtaPolynomial(P={self.P!r}, Q={self.Q!r})"

    # -- arithmetic ------------------------------------------------------------

    def __add__(self, other: "EtaPolynomial") -> "EtaPolynomial":
        out = EtaPolynomial()
        out.P = _poly_add(self.P, other.P)
        out.Q = _poly_add(self.Q, other.Q)
        return out

    def __neg__(self) -> "EtaPolynomial":
        out = EtaPolynomial()
        out.P = [-v for v in self.P]
        out.Q = [-v for v in self.Q]
        return out

    def __sub__(self, other: "EtaPolynomial") -> "EtaPolynomial":
        return self + (-other)

    def scale(self, s) -> "EtaPolynomial":
        out = EtaPolynomial()
        out.P = _poly_scale(self.P, s)
        out.Q = _poly_scale(self.Q, s)
        return out

    def __mul__(self, other: "EtaPolynomial") -> "EtaPolynomial":
        # (P1 + e1 Q1)(P2 + e1 Q2) = P1 P2 + e1^2 Q1 Q2 + e1 (P1 Q2 + Q1 P2)
        out = EtaPolynomial()
        out.P = _poly_add(
            _poly_mul(self.P, other.P),
            _poly_mul(_ETA1_SQ, _poly_mul(self.Q, other.Q)),
        )
        out.Q = _poly_add(_poly_mul(self.P, other.Q), _poly_mul(self.Q, other.P))
        return out

    def derivative(self) -> "EtaPolynomial":
        """Time derivative in the eta algebra.

        d/dt P(eta0) = eta1 P'(eta0); d/dt (eta1 Q) uses
        eta1' = eta0 - (3/2) eta0^2 and eta1^2 = eta0^2 - eta0^3.
        """
        p_prime = [self.P[i] * i for i in range(1, len(self.P))]
        q_prime = [self.Q[i] * i for i in range(1, len(self.Q))]
        eta1_dot = [Coefficient(0), Coefficient(1), Coefficient(Fraction(-3, 2))]
        out = EtaPolynomial()
        out.P = _poly_add(_poly_mul(eta1_dot, self.Q), _poly_mul(_ETA1_SQ, q_prime))
        out.Q = _strip(list(p_prime))
        return out

    # -- evaluation --------------------------------------------------------------

    def evaluate(self, ctx, t):
        """Numeric value at time t in mpmath context ctx (t may be complex)."""
        half = t / 2
        ch = ctx.cosh(half)
        eta0 = 1 / ch ** 2
        eta1 = -ctx.sinh(half) / ch ** 3
        return self.evaluate_at(ctx, eta0, eta1)

    def evaluate_at(self, ctx, eta0, eta1):
        acc = ctx.mpf(0)
        for i in range(len(self.P) - 1, -1, -1):
            acc = acc * eta0 + self.P[i].to_mpf(ctx)
        accq = ctx.mpf(0)
        for i in range(len(self.Q) - 1, -1, -1):
            accq = accq * eta0 + self.Q[i].to_mpf(ctx)
        return acc + eta1 * accq


def eta_reduce(terms: Dict[Tuple[int, int], object]) -> EtaPolynomial:
    """Reduce a polynomial in (eta0, eta1) to canonical P + eta1*Q form.

    ``terms`` maps (i, j) -> coefficient of eta0^i eta1^j; all powers of eta1
    above one are eliminated through eta1^2 = eta0^2 - eta0^3.
    """
    out = EtaPolynomial()
    sq_powers: List[List[Coefficient]] = [[Coefficient(1)]]
    max_half = max((j // 2 for (_, j) in terms), default=0)
    for _ in range(max_half):
        sq_powers.append(_poly_mul(sq_powers[-1], _ETA1_SQ))
    for (i, j), value in terms.items():
        value = Coefficient.of(value)
        if value.is_zero():
            continue
        base = _poly_scale(_poly_mul([Coefficient(0)] * i + [Coefficient(1)],
                                     sq_powers[j // 2]), value)
        if j % 2 == 0:
            out.P = _poly_add(out.P, base)
        else:
            out.Q = _poly_add(out.Q, base)
    return out


def eta_derivative(poly: EtaPolynomial) -> EtaPolynomial:
    """Free-function form of :meth:`EtaPolynomial.derivative`."""
    return poly.derivative()


def _disk_cached(name: str, k_max: int, compute):
    """Optional persistence of exact Laurent tables under SEPSPLIT_CACHE."""
    import json
    import os

    cache_dir = os.environ.get("SEPSPLIT_CACHE")
    if not cache_dir:
        return compute()
    path = os.path.join(cache_dir, f"{name}-{k_max}.json")
    try:
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        return tuple(Fraction(n, d) for n, d in data)
    except (OSError, ValueError):
        pass
    values = compute()
    try:
        os.makedirs(cache_dir, exist_ok=True)
        with open(path, "w", encoding="utf-8") as fh:
            json.dump([[v.numerator, v.denominator] for v in values], fh)
    except OSError:
        pass
    return values


@lru_cache(maxsize=None)
def eta0_laurent(k_max: int) -> Tuple[Fraction, ...]:
    """Exact coefficients c_0..c_{k_max} of eta0(i*pi + s) = -4/s^2 sum c_k s^{2k}.

    Derived from the even series of sinh^2(s/2) by exact rational series
    inversion; c_0 = 1.
    """
    return _disk_cached("eta0-laurent", k_max, lambda: _eta0_laurent_compute(k_max))


def _eta0_laurent_compute(k_max: int) -> Tuple[Fraction, ...]:
    # sinh(s/2) = sum_i s^{2i+1} / (2^{2i+1} (2i+1)!)
    n = k_max + 1
    sinh_half = []
    fact = 1
    for i in range(n + 1):
        if i > 0:
            fact *= (2 * i) * (2 * i + 1)
        sinh_half.append(Fraction(1, 2 ** (2 * i + 1) * fact))
    # e_k: sinh^2(s/2) = (s^2/4) sum_k e_k s^{2k}
    e = [Fraction(0)] * n
    for i in range(n):
        for j in range(n - i):
            e[i + j] += sinh_half[i] * sinh_half[j] * 4
    # series inverse: sum c_k s^{2k} = 1 / sum e_k s^{2k}
    c = [Fraction(0)] * n
    c[0] = Fraction(1)
    for k in range(1, n):
        c[k] = -sum(e[j] * c[k - j] for j in range(1, k + 1))
    return tuple(c)


@lru_cache(maxsize=None)
def eta1_laurent(k_max: int) -> Tuple[Fraction, ...]:
    """Exact coefficients d_0..d_{k_max} of eta1(i*pi + s) = 8/s^3 sum d_k s^{2k}.

    Since eta1 is the time derivative of eta0, d_k = (1 - k) c_k.
    """
    c = eta0_laurent(k_max)
    return tuple(Fraction(1 - k) * ck for k, ck in enumerate(c))
