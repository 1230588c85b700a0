"""Formal separatrix series of the mechanical Hamiltonian y^2/2 + U(x, eps).

With delta = eps^(1/4), the separatrix of ``beta(eps) xdot^2 = -U(x, eps) +
c(eps)`` is solved order by order in delta^2.  Each order contributes an
eta0-polynomial ``x_n`` of degree <= n plus scalars ``a_n`` (coefficient of
the squared-exponent series beta) and ``c_{n+2}`` (energy series).  The
second component is restored as ``y = mu * xdot`` with ``mu = sqrt(2 beta)``;
since the leading factor ``mu0 = (4ab)^(1/4)`` is a quartic irrationality it
is kept symbolic: series carry an implicit factor mu0 on every odd power of
delta, and mu0^2 = 2 a_1 folds back into the exact coefficient field.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .coefficients import Coefficient
from .errors import SepsplitError, TruncationError, WrongSideOfBifurcationError
from .eta import EtaPolynomial, eta0_laurent, eta1_laurent
from .qh import QhSeries


def base_order_roots(u30, u11):
    """Both sign choices of the leading coefficient, for diagnostics.

    Returns [(b0, a1), ...] for the two roots; exactly one has a1 > 0 and is
    the one the recursion uses.
    """
    u30 = Coefficient.of(u30)
    u11 = Coefficient.of(u11)
    radicand = -u11.as_fraction() / (3 * u30.as_fraction())
    if radicand <= 0:
        raise WrongSideOfBifurcationError(f"radicand {radicand} <= 0")
    root = Coefficient.sqrt_rational(radicand)
    return [(root, u30 * root * (-3)), (-root, u30 * root * 3)]


def solve_base_order(u30, u11) -> Tuple[Coefficient, Coefficient, Coefficient, Coefficient]:
    """Leading-order data (b0, b1, a1, c3) of the separatrix recursion.

    ``x_1 = b0 + b1 eta0`` with b0 = +-sqrt(-u11 / (3 u30)), b1 = -3 b0,
    a1 = -3 u30 b0 and c3 = u11 b0 + u30 b0^3; the sign of b0 is chosen so
    that a1 > 0 (beta is the square of a real series).
    """
    u30 = Coefficient.of(u30)
    u11 = Coefficient.of(u11)
    if u30.is_zero():
        raise WrongSideOfBifurcationError("u30 = 0: degenerate cubic coefficient")
    radicand = -u11.as_fraction() / (3 * u30.as_fraction())
    if radicand <= 0:
        raise WrongSideOfBifurcationError(
            f"-u11/(3 u30) = {radicand} <= 0: no real separatrix loop on this side"
        )
    b0 = Coefficient.sqrt_rational(radicand)
    a1 = u30 * b0 * (-3)
    if not a1 > 0:
        b0 = -b0
        a1 = -a1
    b1 = b0 * (-3)
    c3 = u11 * b0 + u30 * b0 ** 3
    return b0, b1, a1, c3


class FormalSeparatrixData:
    """State of the order-by-order separatrix recursion.

    Attributes
    ----------
    u : dict
        Potential table (k, m) -> u_km as exact rationals.
    x : dict
        Solved orders n -> eta0-polynomial x_n (no eta1 part, degree <= n).
    a, c : dict
        Scalar series coefficients: beta = sum a_n delta^(2n),
        c = sum c_n delta^(2n) (c starts at n = 3).
    """

    def __init__(self, u_table: Dict[Tuple[int, int], Fraction],
                 max_order: Optional[int] = None):
        filtered = {}
        for (k, m), value in u_table.items():
            value = Fraction(value)
            if k < 1:
                raise SepsplitError("potential table may not contain pure-eps terms")
            if value != 0:
                filtered[(k, m)] = value
        if (3, 0) not in filtered or (1, 1) not in filtered:
            raise WrongSideOfBifurcationError("potential lacks x^3 or x*eps leading terms")
        self.u = filtered
        self._max_order = max_order
        b0, b1, a1, c3 = solve_base_order(filtered[(3, 0)], filtered[(1, 1)])
        self.b0, self.b1, self.a1 = b0, b1, a1
        # A = 3 u30 b1 b0, nonzero for any non-degenerate potential
        self.A = Coefficient.of(filtered[(3, 0)]) * b1 * b0 * 3
        self.d = b0.d  # extension modulus actually in play (None if rational)
        self.x: Dict[int, EtaPolynomial] = {1: EtaPolynomial([b0, b1])}
        self.xdot: Dict[int, EtaPolynomial] = {1: self.x[1].derivative()}
        self.a: Dict[int, Coefficient] = {1: a1}
        self.c: Dict[int, Coefficient] = {3: c3}
        self.b_rows: Dict[int, List[Coefficient]] = {1: [b0, b1]}

    # -- availability -----------------------------------------------------------

    def max_order_supported(self) -> int:
        """Largest n with every u_km, k + 2m <= n + 2, known.

        Defaults to the depth spanned by the supplied table; pass
        ``max_order`` at construction when absent entries are genuine zeros
        (an exact polynomial potential) or when the producing Hamiltonian
        was truncated earlier than the table suggests.
        """
        if self._max_order is not None:
            return self._max_order
        return max(k + 2 * m for (k, m) in self.u) - 2

    def solved_order(self) -> int:
        return max(self.x)

    # -- the recursion ------------------------------------------------------------

    def _collect(self, order: int) -> EtaPolynomial:
        """delta^(2*order) coefficient of beta*xdot^2 + U(x) from solved data."""
        acc = EtaPolynomial()
        # sum_{k+l+m = order} a_k xdot_l xdot_m
        for k, ak in self.a.items():
            for l, xl in self.xdot.items():
                rest = order - k - l
                if rest < 1 or rest not in self.xdot:
                    continue
                acc = acc + (xl * self.xdot[rest]).scale(ak)
        # sum u_km [x^k]_{order - 2m}
        powers = self._x_power_cache(order)
        for (k, m), ukm in self.u.items():
            idx = order - 2 * m
            if idx < k:
                continue
            coeff = powers.get((k, idx))
            if coeff is not None:
                acc = acc + coeff.scale(ukm)
        return acc

    def _x_power_cache(self, order: int) -> Dict[Tuple[int, int], EtaPolynomial]:
        """delta^2-series coefficients of x^k for all k in the potential."""
        max_k = max(k for (k, _) in self.u)
        series: Dict[int, EtaPolynomial] = dict(self.x)
        out: Dict[Tuple[int, int], EtaPolynomial] = {
            (1, idx): poly for idx, poly in series.items() if idx <= order
        }
        prev = series
        for k in range(2, max_k + 1):
            nxt: Dict[int, EtaPolynomial] = {}
            for i, pi in prev.items():
                for j, xj in self.x.items():
                    idx = i + j
                    if idx > order:
                        continue
                    term = pi * xj
                    nxt[idx] = nxt[idx] + term if idx in nxt else term
            for idx, poly in nxt.items():
                out[(k, idx)] = poly
            prev = nxt
        return out

    def solve_order_n(self, n: int) -> None:
        """Solve order n >= 2, extending x, a, c by one order.

        At delta^(2(n+2)) the equation reads, with A = 3 u30 b1 b0,

            2 a1 xdot_1 xdot_n + A (2 eta0 - 3 eta0^2) x_n
              + a_n xdot_1^2 + P~ = c_{n+2},

        and is solved per power of eta0 in the fixed schedule: the constant
        gives c_{n+2}; power 1 gives b_{n0}; powers n+2 down to 4 give
        b_{n,j-2} descending; powers 2 and 3 give the 2x2 system for
        (b_{n1}, a_n).  Every denominator is a nonzero multiple of A.
        """
        if n < 2:
            raise ValueError("orders below 2 are the base case")
        if n != self.solved_order() + 1:
            raise SepsplitError("orders must be solved consecutively")
        if n > self.max_order_supported():
            raise TruncationError(
                f"potential table supports order {self.max_order_supported()}, "
                f"order {n} requested"
            )
        target = n + 2
        ptilde = self._collect(target)
        if ptilde.has_eta1_part():
            raise SepsplitError("collected source polynomial has an eta1 part")
        if ptilde.p_degree() > n + 2:
            raise SepsplitError("collected source polynomial exceeds degree n+2")
        p = [ptilde.p_coeff(j) for j in range(n + 3)]
        a1b1 = self.a1 * self.b1
        A = self.A
        b = [Coefficient(0)] * (n + 1)
        c_new = p[0]
        b[0] = -p[1] / (A * 2)
        # descending powers j = n+2 .. 4 determine b_{n, j-2}
        upper = Coefficient(0)  # b_{n, j-1}, absent for j = n+2
        for j in range(n + 2, 3, -1):
            denom = a1b1 * (2 * (j - 2)) + A * 3
            if denom.is_zero():
                raise SepsplitError(f"vanishing denominator at eta0 power {j}")
            b[j - 2] = (upper * (a1b1 * (2 * (j - 1)) + A * 2) + p[j]) / denom
            upper = b[j - 2]
        # remaining unknowns (b_{n1}, a_n) from powers 2 and 3
        m11 = a1b1 * 2 + A * 2
        m12 = self.b1 ** 2
        m21 = -(a1b1 * 2) - A * 3
        m22 = -m12
        r1 = A * 3 * b[0] - p[2]
        r2 = -(a1b1 * 4 + A * 2) * b[2] - p[3]
        det = m11 * m22 - m12 * m21
        if det.is_zero():
            raise SepsplitError("vanishing 2x2 determinant in separatrix recursion")
        b[1] = (r1 * m22 - m12 * r2) / det
        a_new = (m11 * r2 - r1 * m21) / det
        x_new = EtaPolynomial(b)
        # exact verification: the full order must now vanish identically
        self.x[n] = x_new
        self.xdot[n] = x_new.derivative()
        self.a[n] = a_new
        self.c[target] = c_new
        residual = self._collect(target) - EtaPolynomial.constant(c_new)
        if not residual.is_zero():
            del self.x[n], self.xdot[n], self.a[n], self.c[target]
            raise SepsplitError(f"order-{n} solution failed exact verification")
        self.b_rows[n] = b

    def solve_through(self, N: int) -> "FormalSeparatrixData":
        for n in range(self.solved_order() + 1, N + 1):
            self.solve_order_n(n)
        return self

    def squared_equation_residual(self, through_order: int) -> Dict[int, EtaPolynomial]:
        """Nonzero delta^2-coefficients of beta xdot^2 + U(x) - c, if any.

        Exact check of the defining identity through delta-order
        2 * through_order (delta^2-index ``through_order``).
        """
        out: Dict[int, EtaPolynomial] = {}
        for idx in range(0, through_order + 1):
            value = self._collect(idx)
            if idx in self.c:
                value = value - EtaPolynomial.constant(self.c[idx])
            if not value.is_zero():
                out[idx] = value
        return out


# ---------------------------------------------------------------------------
# delta-series with eta-polynomial coefficients


class SepSeries:
    """Series sum_k delta^k mu0^(k mod 2) P_k(eta0, eta1), P_k exact.

    The implicit factor mu0 on odd powers keeps the coefficients inside the
    quadratic extension: products fold mu0^2 = 2 a_1 back into the field.
    """

    __slots__ = ("coeffs", "trunc", "mu0_sq")

    def __init__(self, coeffs: Dict[int, EtaPolynomial], trunc: int, mu0_sq: Coefficient):
        self.coeffs = {k: v for k, v in coeffs.items() if not v.is_zero() and k <= trunc}
        self.trunc = trunc
        self.mu0_sq = mu0_sq

    def copy_empty(self) -> "SepSeries":
        return SepSeries({}, self.trunc, self.mu0_sq)

    def __add__(self, other: "SepSeries") -> "SepSeries":
        trunc = min(self.trunc, other.trunc)
        out = dict(self.coeffs)
        for k, v in other.coeffs.items():
            out[k] = out[k] + v if k in out else v
        return SepSeries(out, trunc, self.mu0_sq)

    def __neg__(self) -> "SepSeries":
        return SepSeries({k: -v for k, v in self.coeffs.items()}, self.trunc, self.mu0_sq)

    def __sub__(self, other: "SepSeries") -> "SepSeries":
        return self + (-other)

    def scale(self, s) -> "SepSeries":
        return SepSeries({k: v.scale(s) for k, v in self.coeffs.items()},
                         self.trunc, self.mu0_sq)

    def shift(self, powers: int) -> "SepSeries":
        """Multiply by delta^powers (even shifts only keep parity bookkeeping)."""
        if powers % 2 != 0:
            raise ValueError("only even delta shifts preserve the mu0 convention")
        return SepSeries({k + powers: v for k, v in self.coeffs.items()},
                         self.trunc + powers, self.mu0_sq)

    def __mul__(self, other: "SepSeries") -> "SepSeries":
        low_s = min(self.coeffs, default=self.trunc + 1)
        low_o = min(other.coeffs, default=other.trunc + 1)
        trunc = min(self.trunc + low_o, other.trunc + low_s)
        out: Dict[int, EtaPolynomial] = {}
        fold = self.mu0_sq
        for i, vi in self.coeffs.items():
            for j, vj in other.coeffs.items():
                k = i + j
                if k > trunc:
                    continue
                term = vi * vj
                if i % 2 == 1 and j % 2 == 1:
                    term = term.scale(fold)
                out[k] = out[k] + term if k in out else term
        return SepSeries(out, trunc, self.mu0_sq)

    def power(self, exponent: int) -> "SepSeries":
        if exponent < 1:
            raise ValueError("power expects exponent >= 1")
        result = self
        for _ in range(exponent - 1):
            result = result * self
        return result

    def derivative(self) -> "SepSeries":
        return SepSeries({k: v.derivative() for k, v in self.coeffs.items()},
                         self.trunc, self.mu0_sq)

    def parity_ok(self, even_pure_p: bool = True) -> bool:
        """Structural check: even orders carry no eta1, odd orders only eta1."""
        for k, v in self.coeffs.items():
            if k % 2 == 0 and even_pure_p and v.has_eta1_part():
                return False
            if k % 2 == 1 and v.P:
                return False
        return True

    def evaluate(self, ctx, t, delta, mu0=None):
        """Numeric sum at (t, delta); mu0 defaults to sqrt(mu0_sq)."""
        if mu0 is None:
            mu0 = ctx.sqrt(self.mu0_sq.to_mpf(ctx))
        half = ctx.mpf(t) / 2 if not isinstance(t, ctx.mpc) else t / 2
        ch = ctx.cosh(half)
        eta0 = 1 / ch ** 2
        eta1 = -ctx.sinh(half) / ch ** 3
        total = ctx.mpf(0)
        d = ctx.mpf(delta)
        for k in sorted(self.coeffs):
            term = self.coeffs[k].evaluate_at(ctx, eta0, eta1) * d ** k
            if k % 2 == 1:
                term = term * mu0
            total += term
        return total


def sqrt_one_plus(series: Dict[int, Coefficient], max_index: int) -> Dict[int, Coefficient]:
    """Exact sqrt(1 + rho) for a series rho with zero constant term.

    Input and output map delta^2-index -> coefficient; index 0 of the result
    is 1.  Solved by matching T*T = 1 + rho.
    """
    t: Dict[int, Coefficient] = {0: Coefficient(1)}
    for k in range(1, max_index + 1):
        conv = Coefficient(0)
        for i in range(1, k):
            if i in t and (k - i) in t:
                conv = conv + t[i] * t[k - i]
        rhs = series.get(k, Coefficient(0)) - conv
        t[k] = rhs / 2
    return {k: v for k, v in t.items() if not v.is_zero()}


class FormalSeparatrix:
    """Assembled separatrix series for one coordinate frame.

    ``x`` and ``y`` are :class:`SepSeries`; the implicit odd-power factor is
    mu0 = sqrt(2 a_1) = (4ab)^(1/4).  ``mu_even`` holds the even series T with
    mu(delta) = mu0 * delta * T(delta^2), and ``beta`` the squared-exponent
    series.
    """

    def __init__(self, x: SepSeries, y: SepSeries, state: FormalSeparatrixData,
                 mu_even: Dict[int, Coefficient], frame: str):
        self.x = x
        self.y = y
        self.state = state
        self.mu_even = mu_even
        self.frame = frame

    @property
    def mu0_sq(self) -> Coefficient:
        return self.x.mu0_sq

    def mu0(self, ctx):
        return ctx.sqrt(self.mu0_sq.to_mpf(ctx))

    def log_multiplier_series(self, ctx, delta, terms: Optional[int] = None):
        """Truncated mu(delta) = mu0 * delta * T(delta^2) at numeric delta."""
        mu0 = self.mu0(ctx)
        d = ctx.mpf(delta)
        total = ctx.mpf(0)
        for l, cl in sorted(self.mu_even.items()):
            if terms is not None and l >= terms:
                continue
            total += cl.to_mpf(ctx) * d ** (2 * l)
        return mu0 * d * total

    def point(self, ctx, t, delta):
        mu0 = self.mu0(ctx)
        return (self.x.evaluate(ctx, t, delta, mu0),
                self.y.evaluate(ctx, t, delta, mu0))

    def velocity(self, ctx, t, delta):
        mu0 = self.mu0(ctx)
        return (self.x.derivative().evaluate(ctx, t, delta, mu0),
                self.y.derivative().evaluate(ctx, t, delta, mu0))

    def truncated(self, max_delta_power: int) -> "FormalSeparatrix":
        """Drop delta-orders above ``max_delta_power`` in both components."""
        x = SepSeries({k: v for k, v in self.x.coeffs.items() if k <= max_delta_power},
                      min(self.x.trunc, max_delta_power), self.x.mu0_sq)
        y = SepSeries({k: v for k, v in self.y.coeffs.items() if k <= max_delta_power},
                      min(self.y.trunc, max_delta_power), self.y.mu0_sq)
        return FormalSeparatrix(x, y, self.state, self.mu_even, self.frame)


def assemble(state: FormalSeparatrixData, N: int) -> FormalSeparatrix:
    """Mechanical-frame separatrix through delta-order (2N, 2N+1).

    x(t) = sum_{k<=N} delta^(2k) x_k, y = mu * xdot with the factored
    representation described on :class:`SepSeries`.
    """
    if state.solved_order() < N:
        state.solve_through(N)
    mu0_sq = state.a[1] * 2
    x = SepSeries({2 * k: state.x[k] for k in range(1, N + 1)}, 2 * N, mu0_sq)
    rho = {k - 1: state.a[k] / state.a[1] for k in range(2, N + 1)}
    t_even = sqrt_one_plus(rho, N - 1)
    mu = SepSeries({2 * l + 1: EtaPolynomial.constant(cl) for l, cl in t_even.items()},
                   2 * N - 1, mu0_sq)
    xdot = x.derivative()
    y = mu * xdot
    sep = FormalSeparatrix(x, y, state, t_even, frame="mechanical")
    if not (x.parity_ok() and y.parity_ok()):
        raise SepsplitError("assembled separatrix violates parity structure")
    return sep


def y_consistency_residual(sep: FormalSeparatrix) -> Dict[int, EtaPolynomial]:
    """Nonzero coefficients of y^2 - 2 beta xdot^2 (exact; expected empty)."""
    y2 = sep.y * sep.y
    xdot = sep.x.derivative()
    beta = SepSeries(
        {2 * k: EtaPolynomial.constant(a) for k, a in sep.state.a.items()},
        2 * sep.state.solved_order(), sep.mu0_sq)
    rhs = (beta * xdot * xdot).scale(2)
    diff = y2 - rhs
    return {k: v for k, v in diff.coeffs.items() if not v.is_zero()}


def invert_change(sep: FormalSeparatrix, change_log, delta_order: Optional[int] = None
                  ) -> FormalSeparatrix:
    """Push the mechanical separatrix back through the normal-form change.

    The logged generators define the map from mechanical to raw coordinates;
    substituting the series for (x, y, eps) into its two components yields
    the separatrix of the original system.  The result keeps the structural
    parity: even delta-orders are polynomials in eta0, odd orders carry a
    single eta1 factor, with degrees bounded by the order index.
    """
    from .interpolate import change_map_components

    if sep.frame != "mechanical":
        raise SepsplitError("invert_change expects a mechanical-frame separatrix")
    if delta_order is None:
        delta_order = sep.y.trunc
    if delta_order > sep.y.trunc:
        raise TruncationError(
            f"separatrix known to delta-order {sep.y.trunc}, {delta_order} requested")
    cx, cy = change_map_components(change_log, target_order=delta_order)
    x_new = _substitute(cx, sep, delta_order)
    y_new = _substitute(cy, sep, delta_order)
    out = FormalSeparatrix(x_new, y_new, sep.state, sep.mu_even, frame="original")
    if not (x_new.parity_ok() and y_new.parity_ok()):
        raise SepsplitError("restored separatrix violates parity structure")
    for series in (x_new, y_new):
        for k, poly in series.coeffs.items():
            bound = k // 2 if k % 2 == 0 else (k - 3) // 2
            deg = poly.p_degree() if k % 2 == 0 else poly.q_degree()
            if deg > bound:
                raise SepsplitError("restored separatrix violates degree bounds")
    return out


def _substitute(series: QhSeries, sep: FormalSeparatrix, delta_order: int) -> SepSeries:
    zero = SepSeries({}, delta_order, sep.mu0_sq)
    x = SepSeries({k: v for k, v in sep.x.coeffs.items() if k <= delta_order},
                  delta_order, sep.mu0_sq)
    y = SepSeries({k: v for k, v in sep.y.coeffs.items() if k <= delta_order},
                  delta_order, sep.mu0_sq)
    x_pows: Dict[int, SepSeries] = {}
    y_pows: Dict[int, SepSeries] = {}

    def xp(k: int) -> SepSeries:
        if k not in x_pows:
            x_pows[k] = x if k == 1 else xp(k - 1) * x
        return x_pows[k]

    def yp(l: int) -> SepSeries:
        if l not in y_pows:
            y_pows[l] = y if l == 1 else yp(l - 1) * y
        return y_pows[l]

    total = zero
    for p in series.orders():
        if p > delta_order:
            continue
        for (k, l, m), coeff in series.parts[p]:
            term: Optional[SepSeries] = None
            if k:
                term = xp(k)
            if l:
                term = yp(l) if term is None else term * yp(l)
            if term is None:
                term = SepSeries({0: EtaPolynomial.constant(1)}, delta_order, sep.mu0_sq)
            if m:
                term = SepSeries({kk + 4 * m: vv for kk, vv in term.coeffs.items()},
                                 delta_order, sep.mu0_sq)
            total = total + term.scale(coeff)
    # the substitution of exact polynomials cannot lose orders <= delta_order
    total.trunc = delta_order
    return total


def build_formal_separatrix(family, N: int):
    """Full formal pipeline: interpolate, simplify, solve, assemble, restore.

    Returns (mechanical separatrix, original-frame separatrix, mechanical
    Hamiltonian).  The interpolation depth is chosen so the potential table
    supports the requested order N.
    """
    from .interpolate import interpolate, simplify

    depth = 2 * N - 1
    ham = simplify(interpolate(family, depth), depth)
    # mechanical parts reach order depth + 5, so u_km is complete for
    # k + 2m <= (depth + 5)/2, supporting the recursion through order N
    state = FormalSeparatrixData(ham.potential(),
                                 max_order=(depth + 5) // 2 - 2).solve_through(N)
    mech = assemble(state, N)
    orig = invert_change(mech, ham.change_log)
    return mech, orig, ham


# ---------------------------------------------------------------------------
# Laurent re-expansion at the singular time


class LaurentTable:
    """Double-series data of the separatrix near its complex singularity.

    Component rows m carry the coefficient of delta^(2m); within a row the
    x-part reads tau^(2m-2) sum_k x_mk tau^(-k) and the y-part
    tau^(2m-3) sum_k y_mk tau^(-k), where tau is the singularity-centred
    time divided by the log-multiplier series.  All entries are exact
    elements of the coefficient field (the mu0 parities cancel pairwise).
    """

    def __init__(self, x_rows: List[List[Coefficient]], y_rows: List[List[Coefficient]],
                 m_max: int, k_max: int):
        self.x_rows = x_rows
        self.y_rows = y_rows
        self.m_max = m_max
        self.k_max = k_max

    def x_entry(self, m: int, k: int) -> Coefficient:
        return self.x_rows[m][k]

    def y_entry(self, m: int, k: int) -> Coefficient:
        return self.y_rows[m][k]

    def evaluate(self, ctx, tau, delta, m_limit: Optional[int] = None):
        """Numeric value of the truncated double series at (tau, delta)."""
        m_top = self.m_max if m_limit is None else min(self.m_max, m_limit)
        x_total = ctx.mpc(0)
        y_total = ctx.mpc(0)
        d = ctx.mpf(delta)
        for m in range(m_top + 1):
            row_x = ctx.mpc(0)
            row_y = ctx.mpc(0)
            for k in range(self.k_max, -1, -1):
                row_x = row_x / tau + self.x_rows[m][k].to_mpf(ctx)
                row_y = row_y / tau + self.y_rows[m][k].to_mpf(ctx)
            x_total += d ** (2 * m) * tau ** (2 * m - 2) * row_x
            y_total += d ** (2 * m) * tau ** (2 * m - 3) * row_y
        return x_total, y_total


def laurent_reexpand(sep: FormalSeparatrix, m_max: int, k_max: int) -> LaurentTable:
    """Re-expand the separatrix at the singular time in matched variables.

    Each delta-order is expanded into its Laurent series at the singularity,
    the time offset is rescaled by the log-multiplier series, and the series
    is regrouped so that every power of delta is even.  The mu0 parities of
    the coefficient and of the rescaling power always cancel, so entries are
    exact field elements.
    """
    if sep.x.trunc < k_max + 2 or sep.y.trunc < k_max + 3:
        raise TruncationError(
            f"Laurent table to k_max={k_max} needs separatrix delta-orders "
            f"through {k_max + 3}; have ({sep.x.trunc}, {sep.y.trunc})")
    if m_max > sep.state.solved_order() - 1:
        raise TruncationError(
            f"Laurent table to m_max={m_max} needs the log-multiplier series "
            f"through index {m_max}; solve the recursion to order {m_max + 1}")
    theta = _ThetaPowers(sep, m_max)
    lx = _component_laurent(sep.x, j_max=m_max)
    ly = _component_laurent(sep.y, j_max=m_max)
    x_rows = _rows(lx, theta, sep, m_max, k_max, leading_shift=2)
    y_rows = _rows(ly, theta, sep, m_max, k_max, leading_shift=3)
    return LaurentTable(x_rows, y_rows, m_max, k_max)


class _ThetaPowers:
    """Exact delta^2-series of theta^p where log-multiplier = delta * theta.

    theta = mu0 * T(delta^2); powers carry mu0^p split into the field factor
    (2 a_1)^(p div 2) and an implicit leftover parity p mod 2.
    """

    def __init__(self, sep: FormalSeparatrix, depth: int):
        self.depth = depth
        self.mu0_sq = sep.mu0_sq
        self.t = {k: v for k, v in sep.mu_even.items() if k <= depth}
        self.t_inv = self._invert(self.t, depth)
        self._cache: Dict[int, Dict[int, Coefficient]] = {
            0: {0: Coefficient(1)}, 1: dict(self.t), -1: dict(self.t_inv)}

    @staticmethod
    def _invert(series: Dict[int, Coefficient], depth: int) -> Dict[int, Coefficient]:
        inv: Dict[int, Coefficient] = {0: Coefficient(1)}
        for k in range(1, depth + 1):
            acc = Coefficient(0)
            for i in range(1, k + 1):
                if i in series and (k - i) in inv:
                    acc = acc + series[i] * inv[k - i]
            inv[k] = -acc
        return {k: v for k, v in inv.items() if not v.is_zero()}

    def _mul(self, a: Dict[int, Coefficient], b: Dict[int, Coefficient]
             ) -> Dict[int, Coefficient]:
        out: Dict[int, Coefficient] = {}
        for i, vi in a.items():
            for j, vj in b.items():
                if i + j > self.depth:
                    continue
                out[i + j] = out.get(i + j, Coefficient(0)) + vi * vj
        return {k: v for k, v in out.items() if not v.is_zero()}

    def t_power(self, p: int) -> Dict[int, Coefficient]:
        if p not in self._cache:
            if p > 0:
                self._cache[p] = self._mul(self.t_power(p - 1), self.t)
            else:
                self._cache[p] = self._mul(self.t_power(p + 1), self.t_inv)
        return self._cache[p]

    def coefficient(self, p: int, l: int) -> Coefficient:
        """Field part of [theta^p]_{delta^(2l)}; implicit mu0^(p mod 2)."""
        base = self.t_power(p).get(l)
        if base is None:
            return Coefficient(0)
        return base * self.mu0_sq ** ((p - (p % 2)) // 2)


def _component_laurent(series: SepSeries, j_max: int) -> Dict[int, List[Coefficient]]:
    """Laurent data psi_{kj}: delta-order k -> coefficients of s^(2j - k).

    Exact composition of each eta-polynomial with the eta Laurent series; the
    implicit mu0 parity of odd k rides along unchanged.
    """
    max_deg = max((max(p.p_degree(), p.q_degree()) for p in series.coeffs.values()),
                  default=0)
    depth = j_max + max_deg + 3
    c = [Coefficient(Fraction(v)) for v in eta0_laurent(depth)]
    d = [Coefficient(Fraction(v)) for v in eta1_laurent(depth)]
    out: Dict[int, List[Coefficient]] = {}
    for k, poly in series.coeffs.items():
        # value = sum_i P_i (-4)^i C(s)^i s^(-2i) + (8/s^3) D(s) sum_i Q_i (-4)^i C^i s^(-2i)
        row = [Coefficient(0)] * (j_max + 1)
        c_pow: List[Coefficient] = [Coefficient(1)] + [Coefficient(0)] * depth

        def add_scaled(buffer, series_coeffs, scale, shift):
            # buffer[j] covers s^(2j - k); contribution at s^(2t - shift)
            for t_idx, value in enumerate(series_coeffs):
                j2 = 2 * t_idx - shift + k
                if j2 < 0:
                    if not (value * scale).is_zero():
                        raise SepsplitError("Laurent pole deeper than delta order")
                    continue
                if j2 % 2:
                    raise SepsplitError("Laurent parity violation")
                j = j2 // 2
                if j <= j_max:
                    buffer[j] = buffer[j] + value * scale

        # P part
        power_cache = [c_pow]
        for i in range(1, max(poly.p_degree(), poly.q_degree()) + 1):
            prev = power_cache[-1]
            nxt = [Coefficient(0)] * len(prev)
            for ii, vv in enumerate(prev):
                if vv.is_zero():
                    continue
                for jj, cc in enumerate(c):
                    if ii + jj < len(nxt):
                        nxt[ii + jj] = nxt[ii + jj] + vv * cc
            power_cache.append(nxt)
        for i, pi in enumerate(poly.P):
            if pi.is_zero():
                continue
            add_scaled(row, power_cache[i], pi * Coefficient(-4) ** i, 2 * i)
        for i, qi in enumerate(poly.Q):
            if qi.is_zero():
                continue
            mixed = [Coefficient(0)] * (len(power_cache[i]) + len(d))
            for ii, vv in enumerate(power_cache[i]):
                if vv.is_zero():
                    continue
                for jj, dd in enumerate(d):
                    mixed[ii + jj] = mixed[ii + jj] + vv * dd
            add_scaled(row, mixed, qi * Coefficient(8) * Coefficient(-4) ** i, 2 * i + 3)
        out[k] = row
    return out


def _rows(laurent: Dict[int, List[Coefficient]], theta: _ThetaPowers,
          sep: FormalSeparatrix, m_max: int, k_max: int, leading_shift: int
          ) -> List[List[Coefficient]]:
    rows = []
    for m in range(m_max + 1):
        row = []
        for kk in range(k_max + 1):
            p = 2 * m - leading_shift - kk
            total = Coefficient(0)
            for j in range(0, m + 1):
                l = m - j
                k = 2 * j - p
                data = laurent.get(k)
                if data is None or j >= len(data):
                    continue
                psi = data[j]
                if psi.is_zero():
                    continue
                w = theta.coefficient(p, l)
                if w.is_zero():
                    continue
                value = psi * w
                if k % 2 == 1:
                    # both factors carry one mu0; fold the square into the field
                    value = value * sep.mu0_sq
                total = total + value
            row.append(total)
        rows.append(row)
    return rows
