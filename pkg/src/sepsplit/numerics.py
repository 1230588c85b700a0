"""Arbitrary-precision dynamics for concrete polynomial map families.

Everything here works at an explicit decimal precision, chosen from the size
of the quantity being resolved: the homoclinic invariant scales like
``exp(-2*pi^2 / log(lambda))``, so the working precision must beat that
exponent with margin.  All derivatives are computed analytically (series
term-wise plus Jacobian accumulation along orbits); finite differences would
be useless at these scales.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Optional, Tuple

import mpmath
from mpmath import mp

from .errors import ConvergenceError, PrecisionError, SepsplitError
from .maps import MapFamily

LN10 = math.log(10.0)


@dataclass
class PrecisionPolicy:
    """Working-precision rule tied to the splitting exponent.

    digits_for returns ``ceil(margin * 2 pi^2 / (log(lambda) ln 10)) + guard``
    bounded below by ``base_digits``; the exponent term is the decimal size of
    the universal prefactor being resolved.
    """

    base_digits: int = 50
    margin: float = 1.5
    guard_digits: int = 50

    def digits_for(self, log_multiplier: float) -> int:
        exponent = 2.0 * math.pi ** 2 / (float(log_multiplier) * LN10)
        return max(self.base_digits, math.ceil(self.margin * exponent) + self.guard_digits)

    def digits_for_delta(self, family: MapFamily, delta: float) -> int:
        a, b = family.leading_coefficients()
        mu0 = (4.0 * float(a) * float(b)) ** 0.25
        return self.digits_for(mu0 * float(delta))


def eval_series(ctx, series, x, y, eps):
    """Numeric value of a graded series at (x, y, eps)."""
    total = x * 0
    for p in series.orders():
        for (k, l, m), c in series.parts[p]:
            total += c.to_mpf(ctx) * x ** k * y ** l * eps ** m
    return total


class NumericMap:
    """Evaluation kernel for a normal-shape family at fixed precision.

    Applies ``(x, y) -> (x + y + f, y + g)``, its Jacobian, and the inverse
    map (Newton; the seed x = x1 - y1 is exact whenever f = g).
    """

    def __init__(self, family: MapFamily):
        self.family = family
        self.f_terms = [(key, c) for p in family.f_terms.orders()
                        for key, c in family.f_terms.parts[p]]
        self.g_terms = [(key, c) for p in family.g_terms.orders()
                        for key, c in family.g_terms.parts[p]]

    @staticmethod
    def _eval(terms, x, y, eps, zero):
        total = zero
        for (k, l, m), c in terms:
            total += c.to_mpf(mp) * x ** k * y ** l * eps ** m
        return total

    @staticmethod
    def _eval_dx(terms, x, y, eps, zero):
        total = zero
        for (k, l, m), c in terms:
            if k:
                total += c.to_mpf(mp) * k * x ** (k - 1) * y ** l * eps ** m
        return total

    @staticmethod
    def _eval_dy(terms, x, y, eps, zero):
        total = zero
        for (k, l, m), c in terms:
            if l:
                total += c.to_mpf(mp) * l * x ** k * y ** (l - 1) * eps ** m
        return total

    def apply(self, x, y, eps):
        zero = x * 0
        fv = self._eval(self.f_terms, x, y, eps, zero)
        gv = self._eval(self.g_terms, x, y, eps, zero)
        return x + y + fv, y + gv

    def jacobian(self, x, y, eps):
        zero = x * 0
        fx = self._eval_dx(self.f_terms, x, y, eps, zero)
        fy = self._eval_dy(self.f_terms, x, y, eps, zero)
        gx = self._eval_dx(self.g_terms, x, y, eps, zero)
        gy = self._eval_dy(self.g_terms, x, y, eps, zero)
        return (1 + fx, 1 + fy), (gx, 1 + gy)

    def apply_inverse(self, x1, y1, eps, tol=None):
        if tol is None:
            tol = mp.mpf(10) ** (8 - mp.dps)
        x, y = x1 - y1, y1
        for _ in range(80):
            fx1, fy1 = self.apply(x, y, eps)
            rx, ry = fx1 - x1, fy1 - y1
            if abs(rx) < tol and abs(ry) < tol:
                return x, y
            (a, bb), (c, d) = self.jacobian(x, y, eps)
            det = a * d - bb * c
            x -= (d * rx - bb * ry) / det
            y -= (a * ry - c * rx) / det
        raise ConvergenceError("map inversion did not converge")


@dataclass
class SaddleData:
    """Hyperbolic fixed point of the family at one parameter value."""

    eps: object
    delta: object
    point: Tuple[object, object]
    multiplier: object
    log_multiplier: object
    unstable_vec: Tuple[object, object]
    stable_vec: Tuple[object, object]
    digits: int

    def to_json(self) -> dict:
        return {
            "eps": _dec(self.eps), "delta": _dec(self.delta),
            "x": _dec(self.point[0]), "y": _dec(self.point[1]),
            "multiplier": _dec(self.multiplier),
            "log_multiplier": _dec(self.log_multiplier),
            "digits": self.digits,
        }


def _dec(value, digits: Optional[int] = None) -> str:
    return mp.nstr(value, digits or mp.dps, strip_zeros=False)


def find_saddle(family: MapFamily, eps, digits: int) -> SaddleData:
    """Newton solve of the fixed-point equations, seeded at the leading saddle.

    Fixed points satisfy y + f = 0, g = 0; the saddle branch continues from
    x = -sqrt(eps b / a), y = 0.  The multiplier is the root > 1 of
    ``lambda^2 - tr(DF) lambda + 1``.
    """
    nmap = NumericMap(family)
    a, b = family.leading_coefficients()
    with mp.workdps(digits + 10):
        eps = mp.mpf(eps)
        if eps <= 0:
            raise SepsplitError("saddle continuation requires eps > 0")
        x = -mp.sqrt(eps * mp.mpf(b.numerator) / b.denominator
                     * mp.mpf(a.denominator) / a.numerator)
        y = mp.mpf(0)
        tol = mp.mpf(10) ** (5 - digits)
        converged = False
        for _ in range(200):
            zero = x * 0
            fv = nmap._eval(nmap.f_terms, x, y, eps, zero)
            gv = nmap._eval(nmap.g_terms, x, y, eps, zero)
            r1, r2 = y + fv, gv
            if abs(r1) < tol and abs(r2) < tol:
                converged = True
                break
            fx = nmap._eval_dx(nmap.f_terms, x, y, eps, zero)
            fy = nmap._eval_dy(nmap.f_terms, x, y, eps, zero)
            gx = nmap._eval_dx(nmap.g_terms, x, y, eps, zero)
            gy = nmap._eval_dy(nmap.g_terms, x, y, eps, zero)
            det = fx * gy - (1 + fy) * gx
            if det == 0:
                raise ConvergenceError("singular Jacobian in saddle Newton")
            dx = (gy * r1 - (1 + fy) * r2) / det
            dy = (fx * r2 - gx * r1) / det
            x, y = x - dx, y - dy
        if not converged:
            raise ConvergenceError("saddle Newton did not converge; eps outside basin?")
        (j11, j12), (j21, j22) = nmap.jacobian(x, y, eps)
        tr = j11 + j22
        if tr <= 2:
            raise SepsplitError("fixed point is not a direct saddle (trace <= 2)")
        lam = (tr + mp.sqrt(tr * tr - 4)) / 2
        vu = _eigenvector(j11, j12, j21, j22, lam)
        vs = _eigenvector(j11, j12, j21, j22, 1 / lam)
        return SaddleData(
            eps=eps, delta=mp.root(eps, 4), point=(x, y), multiplier=lam,
            log_multiplier=mp.log(lam), unstable_vec=vu, stable_vec=vs,
            digits=digits,
        )


def _eigenvector(j11, j12, j21, j22, lam):
    # rows of (J - lam I) are proportional; use the better-conditioned one
    v1 = (j12, lam - j11)
    v2 = (lam - j22, j21)
    cand = v1 if abs(v1[0]) + abs(v1[1]) >= abs(v2[0]) + abs(v2[1]) else v2
    norm = mp.sqrt(cand[0] ** 2 + cand[1] ** 2)
    vx, vy = cand[0] / norm, cand[1] / norm
    if vx < 0 or (vx == 0 and vy < 0):
        vx, vy = -vx, -vy
    return vx, vy


class _Composer:
    """Incremental power series of the map's nonlinearity along Psi - p.

    Maintains the deviation series (u, v) and every monomial power product
    the shifted map needs, each extendable one order at a time in O(order)
    multiplications.
    """

    def __init__(self, monomials: Dict[Tuple[int, int], Tuple[object, object]]):
        self.monomials = monomials
        self.u: List[object] = [mp.mpf(0)]
        self.v: List[object] = [mp.mpf(0)]
        self.products: Dict[Tuple[int, int], List[object]] = {}
        self.plan: List[Tuple[Tuple[int, int], Tuple[int, int], Tuple[int, int]]] = []
        needed = sorted(monomials, key=lambda kv: (kv[0] + kv[1], kv[0]))
        known = {(1, 0), (0, 1)}
        for key in needed:
            self._plan_product(key, known)

    def _plan_product(self, key, known):
        if key in known:
            return
        alpha, beta = key
        if alpha > 0:
            sub = (alpha - 1, beta)
            fac = (1, 0)
        else:
            sub = (alpha, beta - 1)
            fac = (0, 1)
        self._plan_product(sub, known)
        self.plan.append((key, sub, fac))
        known.add(key)

    def _factor(self, key):
        if key == (1, 0):
            return self.u
        if key == (0, 1):
            return self.v
        return self.products[key]

    def push(self, cu, cv):
        """Record the solved order-j deviation coefficients."""
        self.u.append(cu)
        self.v.append(cv)

    def advance(self):
        """Extend every product to the next order.

        The order-j coefficient of each product is an interior convolution of
        strictly lower orders (all factors vanish at order 0), so it is
        available before the order-j deviation coefficient is solved.
        """
        j = len(self.u)
        for key, sub, fac in self.plan:
            a = self._factor(sub)
            b = self._factor(fac)
            acc = mp.mpf(0)
            for i in range(1, j):
                if i < len(a) and j - i < len(b):
                    acc += a[i] * b[j - i]
            series = self.products.setdefault(key, [mp.mpf(0)] * j)
            if len(series) != j:
                raise SepsplitError("product series misaligned")
            series.append(acc)

    def nonlinear(self, j):
        """Order-j coefficient of the shifted nonlinearity, both components."""
        n1 = mp.mpf(0)
        n2 = mp.mpf(0)
        for key, (w1, w2) in self.monomials.items():
            series = self._factor(key)
            if j < len(series):
                value = series[j]
                n1 += w1 * value
                n2 += w2 * value
        return n1, n2


def _shifted_monomials(nmap: NumericMap, px, py, eps) -> Dict[Tuple[int, int], Tuple[object, object]]:
    """Quadratic-and-higher terms of F(p + u) - p in powers of the deviation."""
    out: Dict[Tuple[int, int], Tuple[object, object]] = {}
    for slot, terms in ((0, nmap.f_terms), (1, nmap.g_terms)):
        for (k, l, m), c in terms:
            scale = c.to_mpf(mp) * eps ** m
            for i in range(k + 1):
                ci = mp.binomial(k, i) * px ** (k - i)
                for j in range(l + 1):
                    if i + j < 2:
                        continue
                    w = scale * ci * mp.binomial(l, j) * py ** (l - j)
                    if w == 0:
                        continue
                    w1, w2 = out.get((i, j), (mp.mpf(0), mp.mpf(0)))
                    if slot == 0:
                        out[(i, j)] = (w1 + w, w2)
                    else:
                        out[(i, j)] = (w1, w2 + w)
    return out


@dataclass
class ManifoldParametrization:
    """Linearizing parametrization Psi(z) = p + sum c_j z^j of one separatrix.

    ``Psi(nu z) = F(Psi(z))`` with nu the corresponding multiplier (lambda for
    the unstable manifold, 1/lambda for the stable one).  ``psi(t)`` follows
    as Psi(e^t) resp. Psi(e^-t); evaluation beyond the validated radius
    pushes forward along the orbit with the map (or its inverse).
    """

    kind: str
    saddle: SaddleData
    nu: object
    cx: List[object]
    cy: List[object]
    s0: object
    r_v: object
    digits: int
    family: MapFamily
    push_cap: int = 4000

    def series_value(self, z, derivative: bool = False):
        x = mp.mpf(0) if not isinstance(z, mp.mpc) else mp.mpc(0)
        y = x * 0
        dx = x * 0
        dy = x * 0
        for j in range(len(self.cx) - 1, 0, -1):
            x = x * z + self.cx[j]
            y = y * z + self.cy[j]
            if derivative:
                dx = dx * z + j * self.cx[j]
                dy = dy * z + j * self.cy[j]
        x = x * z + self.saddle.point[0]
        y = y * z + self.saddle.point[1]
        if not derivative:
            return (x, y), None
        return (x, y), (dx, dy)


def parametrize_manifold(family: MapFamily, saddle: SaddleData, kind: str,
                         digits: Optional[int] = None, j_max: Optional[int] = None,
                         s0=None) -> ManifoldParametrization:
    """Solve the conjugacy order by order and validate a working radius.

    Order j >= 2 satisfies ``(DF(p) - nu^j I) c_j = -N_j`` with N_j the
    order-j coefficient of the shifted nonlinearity of Psi truncated below j;
    the matrix is invertible because nu^j avoids the spectrum {lambda,
    1/lambda}.  c_1 is s0 times the unit eigenvector (oriented with positive
    leading component).
    """
    if kind not in ("unstable", "stable"):
        raise ValueError("kind must be 'unstable' or 'stable'")
    digits = digits or saddle.digits
    if j_max is None:
        j_max = int(3.4 * digits) + 40
    nmap = NumericMap(family)
    with mp.workdps(digits + 10):
        eps = mp.mpf(saddle.eps)
        px, py = saddle.point
        lam = saddle.multiplier
        nu = lam if kind == "unstable" else 1 / lam
        vec = saddle.unstable_vec if kind == "unstable" else saddle.stable_vec
        if s0 is None:
            s0 = mp.mpf(1) / 4
        else:
            s0 = mp.mpf(s0)
        (j11, j12), (j21, j22) = nmap.jacobian(px, py, eps)
        monomials = _shifted_monomials(nmap, px, py, eps)
        composer = _Composer(monomials)
        cx = [mp.mpf(0), s0 * vec[0]]
        cy = [mp.mpf(0), s0 * vec[1]]
        composer.push(cx[1], cy[1])
        nu_pow = nu
        for j in range(2, j_max + 1):
            nu_pow *= nu
            composer.advance()
            n1, n2 = composer.nonlinear(j)
            a11, a12 = j11 - nu_pow, j12
            a21, a22 = j21, j22 - nu_pow
            det = a11 * a22 - a12 * a21
            if det == 0:
                raise SepsplitError(f"resonant linear solve at series order {j}")
            cj_x = (-n1 * a22 + n2 * a12) / det
            cj_y = (-n2 * a11 + n1 * a21) / det
            cx.append(cj_x)
            cy.append(cj_y)
            composer.push(cj_x, cj_y)
        a, b = family.leading_coefficients()
        loop_scale = mp.sqrt(eps * mp.mpf(b.numerator) * a.denominator
                             / (b.denominator * a.numerator))
        r_v = _validated_radius(cx, cy, digits, displacement_cap=loop_scale)
        return ManifoldParametrization(
            kind=kind, saddle=saddle, nu=nu, cx=cx, cy=cy, s0=s0, r_v=r_v,
            digits=digits, family=family,
        )


def _validated_radius(cx, cy, digits, displacement_cap=None) -> object:
    """Radius where the truncation tail sits below the working precision.

    ``displacement_cap`` additionally confines |Psi(z) - p| so that evaluation
    stays inside the near-saddle chart where orbit pushforwards are reliable.
    """
    J = len(cx) - 1
    window = range(max(2, int(0.7 * J)), J + 1)
    rho = mp.mpf(0)
    for j in window:
        size = max(abs(cx[j]), abs(cy[j]))
        if size > 0:
            rho = max(rho, size ** (mp.mpf(1) / j))
    r = mp.mpf("0.5") / rho if rho > 0 else mp.mpf(1)
    scale = max(abs(cx[1]), abs(cy[1]))
    floor = mp.mpf(10) ** (-digits) * scale
    for _ in range(400):
        tail = max(abs(cx[J]), abs(cy[J])) * r ** J * J
        if tail < floor:
            if displacement_cap is None:
                return r
            reach = mp.mpf(0)
            for j in range(J, 0, -1):
                reach = reach * r + max(abs(cx[j]), abs(cy[j]))
            reach = reach * r
            if reach <= displacement_cap:
                return r
        r = r * mp.mpf("0.85")
    raise PrecisionError("no validated radius: series truncation too short")


def evaluate_manifold(par: ManifoldParametrization, t, derivative: bool = True):
    """Point (and dpsi/dt) of psi at parameter t, via series plus pushforward.

    Unstable: psi(t) = F^N(Psi(exp(t - N log lambda))) with minimal N >= 0
    bringing the series argument inside the validated radius; stable mirrors
    this with exp(-t) and inverse-map steps.  Jacobians are accumulated for
    the derivative.
    """
    with mp.workdps(par.digits + 10):
        nmap = NumericMap(par.family)
        eps = mp.mpf(par.saddle.eps)
        L = par.saddle.log_multiplier
        log_rv = mp.log(par.r_v)
        t = mp.mpf(t) if not isinstance(t, mp.mpc) else t
        sgn = 1 if par.kind == "unstable" else -1
        reach = sgn * mp.re(t)
        n_push = int(max(0, mp.ceil((reach - log_rv) / L)))
        if n_push > par.push_cap:
            raise SepsplitError("parameter too deep into the tangle; raise push_cap")
        z = mp.exp(sgn * t - n_push * L)
        (x, y), dxy = par.series_value(z, derivative=derivative)
        if derivative:
            dx = dxy[0] * z * sgn
            dy = dxy[1] * z * sgn
        if par.kind == "unstable":
            for _ in range(n_push):
                if derivative:
                    (a, b), (c, d) = nmap.jacobian(x, y, eps)
                    dx, dy = a * dx + b * dy, c * dx + d * dy
                x, y = nmap.apply(x, y, eps)
        else:
            for _ in range(n_push):
                x, y = nmap.apply_inverse(x, y, eps)
                if derivative:
                    (a, b), (c, d) = nmap.jacobian(x, y, eps)
                    det = a * d - b * c
                    dx, dy = (d * dx - b * dy) / det, (a * dy - c * dx) / det
        if derivative:
            return (x, y), (dx, dy)
        return (x, y), None


def conjugacy_residual(par: ManifoldParametrization, t) -> object:
    """|psi(t + log lambda) - F(psi(t))| at one parameter value."""
    with mp.workdps(par.digits + 10):
        nmap = NumericMap(par.family)
        eps = mp.mpf(par.saddle.eps)
        L = par.saddle.log_multiplier
        (x, y), _ = evaluate_manifold(par, t, derivative=False)
        (xs, ys), _ = evaluate_manifold(par, mp.mpf(t) + L, derivative=False)
        fx, fy = nmap.apply(x, y, eps)
        return mp.sqrt((xs - fx) ** 2 + (ys - fy) ** 2)


def turning_parameter(par: ManifoldParametrization) -> object:
    """Parameter of the first loop apex: y-component crossing the saddle level.

    Scans outward from the edge of the validated series domain until the
    y-offset from the saddle changes sign, then bisects.  Used to seed the
    homoclinic search in a normalization-independent way.
    """
    with mp.workdps(par.digits + 10):
        py = par.saddle.point[1]
        L = par.saddle.log_multiplier
        sgn = 1 if par.kind == "unstable" else -1
        t = sgn * mp.log(par.r_v) * mp.mpf("1.0")

        def offset(tv):
            (x, y), _ = evaluate_manifold(par, tv, derivative=False)
            return y - py

        step = sgn * L / 3
        prev = offset(t)
        for _ in range(3000):
            t_next = t + step
            cur = offset(t_next)
            if mp.sign(cur) != mp.sign(prev) and prev != 0:
                lo, hi = t, t_next
                for _ in range(90):
                    mid = (lo + hi) / 2
                    if mp.sign(offset(mid)) == mp.sign(prev):
                        lo = mid
                    else:
                        hi = mid
                return (lo + hi) / 2
            t, prev = t_next, cur
        raise ConvergenceError("no turning point found along the manifold")


@dataclass
class HomoclinicOrbit:
    """One primary homoclinic orbit: parameters on each manifold plus omega."""

    t_stable: object
    t_unstable: object
    omega: object
    residual: object


def find_homoclinics(stable: ManifoldParametrization,
                     unstable: ManifoldParametrization,
                     seeds: Optional[List[Tuple[object, object]]] = None,
                     max_iter: int = 80) -> List[HomoclinicOrbit]:
    """Newton solve of psi_s(t1) = psi_u(t2); returns the two primary orbits.

    The 2x2 Jacobian [dpsi_s, -dpsi_u] has determinant +-omega, so the system
    is poorly conditioned on purpose: the working precision absorbs it.
    Seeds default to the loop apexes of both manifolds offset by quarter
    periods; solutions are deduplicated modulo the simultaneous shift of both
    parameters by log lambda.
    """
    digits = min(stable.digits, unstable.digits)
    with mp.workdps(digits + 10):
        L = unstable.saddle.log_multiplier
        tol = mp.mpf(10) ** (20 - digits)
        if seeds is None:
            ts0 = turning_parameter(stable)
            tu0 = turning_parameter(unstable)
            seeds = [(ts0 + k * L / 4, tu0 + k * L / 4) for k in range(4)]
        found: List[HomoclinicOrbit] = []
        for t1, t2 in seeds:
            sol = _newton_homoclinic(stable, unstable, mp.mpf(t1), mp.mpf(t2),
                                     tol, L, max_iter)
            if sol is None:
                continue
            t1s, t2s, res = sol
            # normalize: shift both parameters so t2 lies in [tu_ref, tu_ref + L)
            ref = seeds[0][1]
            shift = mp.floor((t2s - ref) / L)
            t1s -= shift * L
            t2s -= shift * L
            if any(abs(t2s - other.t_unstable) < L / 10 for other in found):
                continue
            _, ds = evaluate_manifold(stable, t1s, derivative=True)
            _, du = evaluate_manifold(unstable, t2s, derivative=True)
            omega = ds[0] * du[1] - ds[1] * du[0]
            found.append(HomoclinicOrbit(t_stable=t1s, t_unstable=t2s,
                                         omega=omega, residual=res))
        found.sort(key=lambda orbit: mp.mpf(orbit.t_unstable))
        if len(found) != 2:
            raise ConvergenceError(
                f"expected 2 primary homoclinic orbits, found {len(found)}")
        return found


def _newton_homoclinic(stable, unstable, t1, t2, tol, L, max_iter):
    for _ in range(max_iter):
        (ps, dvs) = evaluate_manifold(stable, t1, derivative=True)
        (pu, dvu) = evaluate_manifold(unstable, t2, derivative=True)
        g1 = ps[0] - pu[0]
        g2 = ps[1] - pu[1]
        res = mp.sqrt(g1 * g1 + g2 * g2)
        if res < tol:
            return t1, t2, res
        a11, a21 = dvs[0], dvs[1]
        a12, a22 = -dvu[0], -dvu[1]
        det = a11 * a22 - a12 * a21
        if det == 0:
            return None
        d1 = (-g1 * a22 + g2 * a12) / det
        d2 = (-g2 * a11 + g1 * a21) / det
        step = max(abs(d1), abs(d2))
        cap = L / 2
        if step > cap:
            d1, d2 = d1 * cap / step, d2 * cap / step
        t1, t2 = t1 + d1, t2 + d2
    return None


def reversor_homoclinics(unstable: ManifoldParametrization) -> List[HomoclinicOrbit]:
    """Fast path for families declaring the reversor R(x, y) = (x, -y - V(x)).

    R conjugates the map to its inverse, so intersections of the unstable
    manifold with a symmetry set are homoclinic points reachable by a
    one-dimensional solve.  The two primary orbits sit on the two symmetry
    sets: Fix(R) = {2y + V(x) = 0} and Fix(F o R) = {y = 0}.  The stable
    tangent at a symmetric point is the reversor image of the unstable one,

        omega = Omega(-D(reversor)(gamma) psi'(t*), psi'(t*)),

    so no stable-manifold parametrization is needed.
    """
    family = unstable.family
    spec = family.reversor()
    if spec is None:
        raise SepsplitError("family does not declare a reversor")
    digits = unstable.digits
    nmap = NumericMap(family)
    with mp.workdps(digits + 10):
        eps = mp.mpf(unstable.saddle.eps)
        v_terms = [(key, c) for p in spec.v_terms.orders()
                   for key, c in spec.v_terms.parts[p]]
        apex = turning_parameter(unstable)

        def point_and_tangent(t):
            return evaluate_manifold(unstable, t, derivative=True)

        orbits = []
        # branch Fix(F o R): y = 0, at the loop apex itself
        def on_axis(t):
            (pt, _) = evaluate_manifold(unstable, t, derivative=False)
            return pt[1]

        t_axis = _secant_zero(on_axis, apex, digits)
        (pt, dv) = point_and_tangent(t_axis)
        # u = -D(F o R) v = -DF(R(gamma)) DR(gamma) v
        vp = nmap._eval_dx(v_terms, pt[0], pt[1] * 0, eps, pt[0] * 0)
        rv = (dv[0], -vp * dv[0] - dv[1])
        r_pt = (pt[0], -pt[1] - nmap._eval(v_terms, pt[0], pt[1] * 0, eps, pt[0] * 0))
        (a, b), (c, d) = nmap.jacobian(r_pt[0], r_pt[1], eps)
        ux, uy = -(a * rv[0] + b * rv[1]), -(c * rv[0] + d * rv[1])
        orbits.append(HomoclinicOrbit(
            t_stable=-t_axis, t_unstable=t_axis,
            omega=ux * dv[1] - uy * dv[0], residual=abs(on_axis(t_axis))))

        # branch Fix(R): 2y + V(x) = 0, half a step along the loop
        def on_curve(t):
            (p2, _) = evaluate_manifold(unstable, t, derivative=False)
            return 2 * p2[1] + nmap._eval(v_terms, p2[0], p2[1] * 0, eps, p2[0] * 0)

        L = unstable.saddle.log_multiplier
        t_curve = _secant_zero(on_curve, t_axis - L / 2, digits)
        (pt, dv) = point_and_tangent(t_curve)
        vp = nmap._eval_dx(v_terms, pt[0], pt[1] * 0, eps, pt[0] * 0)
        ux, uy = -dv[0], vp * dv[0] + dv[1]
        orbits.append(HomoclinicOrbit(
            t_stable=-t_curve, t_unstable=t_curve,
            omega=ux * dv[1] - uy * dv[0], residual=abs(on_curve(t_curve))))
        orbits.sort(key=lambda o: mp.mpf(o.t_unstable))
        return orbits


def homoclinic_invariant(stable: ManifoldParametrization,
                         unstable: ManifoldParametrization,
                         t1, t2) -> object:
    """omega = Omega(dpsi_s(t1), dpsi_u(t2)) with Omega(u, v) = u_x v_y - u_y v_x."""
    digits = min(stable.digits, unstable.digits)
    with mp.workdps(digits + 10):
        _, ds = evaluate_manifold(stable, t1, derivative=True)
        _, du = evaluate_manifold(unstable, t2, derivative=True)
        return ds[0] * du[1] - ds[1] * du[0]


def lobe_area(stable: ManifoldParametrization, unstable: ManifoldParametrization,
              orbit_a: HomoclinicOrbit, orbit_b: HomoclinicOrbit,
              quad_degree: int = 10) -> object:
    """Oriented area of the lobe between two adjacent primary homoclinic points.

    The closed curve runs along the unstable manifold from the first point to
    the second and back along the stable manifold; its algebraic area is the
    contour integral of y dx, evaluated with Gauss-Legendre quadrature on the
    analytic parametrizations.
    """
    digits = min(stable.digits, unstable.digits)
    with mp.workdps(digits + 10):
        def integrand_u(t):
            (pt, dv) = evaluate_manifold(unstable, t, derivative=True)
            return pt[1] * dv[0]

        def integrand_s(t):
            (pt, dv) = evaluate_manifold(stable, t, derivative=True)
            return pt[1] * dv[0]

        a_u = mp.quad(integrand_u, [orbit_a.t_unstable, orbit_b.t_unstable],
                      maxdegree=quad_degree)
        a_s = mp.quad(integrand_s, [orbit_a.t_stable, orbit_b.t_stable],
                      maxdegree=quad_degree)
        return a_u - a_s


# ---------------------------------------------------------------------------
# polynomial Hamiltonian flows (comparison oracles)


class PolyHamiltonian:
    """Numeric 2D polynomial Hamiltonian with gradient and Hessian."""

    def __init__(self, coeffs: Dict[Tuple[int, int], object]):
        self.coeffs = {key: mp.mpf(value) if not isinstance(value, mp.mpf) else value
                       for key, value in coeffs.items() if value != 0}

    @staticmethod
    def from_scaled_table(table: Dict[int, Dict[Tuple[int, int], Fraction]], delta):
        """Combine the graded table sum_k delta^k h_{5+k}(X, Y, 1) at numeric delta."""
        delta = mp.mpf(delta)
        coeffs: Dict[Tuple[int, int], object] = {}
        for k, entry in table.items():
            w = delta ** k
            for key, val in entry.items():
                coeffs[key] = coeffs.get(key, mp.mpf(0)) + w * mp.mpf(val.numerator) / val.denominator
        return PolyHamiltonian(coeffs)

    def value(self, x, y):
        total = x * 0
        for (i, j), c in self.coeffs.items():
            total += c * x ** i * y ** j
        return total

    def gradient(self, x, y):
        gx = x * 0
        gy = x * 0
        for (i, j), c in self.coeffs.items():
            if i:
                gx += c * i * x ** (i - 1) * y ** j
            if j:
                gy += c * j * x ** i * y ** (j - 1)
        return gx, gy

    def hessian(self, x, y):
        hxx = x * 0
        hxy = x * 0
        hyy = x * 0
        for (i, j), c in self.coeffs.items():
            if i >= 2:
                hxx += c * i * (i - 1) * x ** (i - 2) * y ** j
            if i >= 1 and j >= 1:
                hxy += c * i * j * x ** (i - 1) * y ** (j - 1)
            if j >= 2:
                hyy += c * j * (j - 1) * x ** i * y ** (j - 2)
        return hxx, hxy, hyy

    def field(self, x, y):
        gx, gy = self.gradient(x, y)
        return gy, -gx


def hamiltonian_saddle(ham: PolyHamiltonian, seed: Tuple[object, object],
                       tol_digits: int) -> Tuple[Tuple[object, object], object, Tuple[object, object]]:
    """Saddle equilibrium, Lyapunov exponent and unstable eigenvector."""
    x, y = mp.mpf(seed[0]), mp.mpf(seed[1])
    tol = mp.mpf(10) ** (5 - tol_digits)
    for _ in range(200):
        gx, gy = ham.gradient(x, y)
        if abs(gx) < tol and abs(gy) < tol:
            break
        hxx, hxy, hyy = ham.hessian(x, y)
        det = hxx * hyy - hxy * hxy
        x -= (hyy * gx - hxy * gy) / det
        y -= (hxx * gy - hxy * gx) / det
    else:
        raise ConvergenceError("Hamiltonian saddle Newton did not converge")
    hxx, hxy, hyy = ham.hessian(x, y)
    disc = hxy * hxy - hxx * hyy
    if disc <= 0:
        raise SepsplitError("equilibrium is not a saddle")
    exponent = mp.sqrt(disc)
    # J Hess eigenvector for +exponent, from either row of (J Hess - mu I)
    v1 = (hyy, exponent - hxy)
    v2 = (hxy + exponent, -hxx)
    vec = v1 if abs(v1[0]) + abs(v1[1]) >= abs(v2[0]) + abs(v2[1]) else v2
    norm = mp.sqrt(vec[0] ** 2 + vec[1] ** 2)
    vec = (vec[0] / norm, vec[1] / norm)
    if vec[0] < 0 or (vec[0] == 0 and vec[1] < 0):
        vec = (-vec[0], -vec[1])
    return (x, y), exponent, vec


def taylor_step(ham: PolyHamiltonian, x, y, h, order: int = 24, scale=1):
    """One Taylor step of z' = scale * J grad H(z).

    Solution jets are built order by order; the power series x^e, y^e along
    the jet are extended incrementally, so a step costs O(order^2) ring
    operations times the polynomial size.
    """
    xs = [x]
    ys = [y]
    max_e = max(max(i for i, _ in ham.coeffs), max(j for _, j in ham.coeffs))
    px: List[List[object]] = [[mp.mpf(1)]] + [[x ** e] for e in range(1, max_e + 1)]
    py: List[List[object]] = [[mp.mpf(1)]] + [[y ** e] for e in range(1, max_e + 1)]
    one = mp.mpf(1)
    for k in range(order):
        fx = mp.mpf(0)
        fy = mp.mpf(0)
        for (i, j), c in ham.coeffs.items():
            if j >= 1:
                a_ser, b_ser = px[i], py[j - 1]
                conv = mp.mpf(0)
                for a in range(k + 1):
                    conv += a_ser[a] * b_ser[k - a]
                fx += c * j * conv
            if i >= 1:
                a_ser, b_ser = px[i - 1], py[j]
                conv = mp.mpf(0)
                for a in range(k + 1):
                    conv += a_ser[a] * b_ser[k - a]
                fy -= c * i * conv
        xs.append(scale * fx / (k + 1))
        ys.append(scale * fy / (k + 1))
        # extend power caches through jet order k+1
        px[0].append(mp.mpf(0))
        py[0].append(mp.mpf(0))
        for e in range(1, max_e + 1):
            acc = mp.mpf(0)
            bcc = mp.mpf(0)
            lower_x, lower_y = px[e - 1], py[e - 1]
            for a in range(k + 2):
                acc += lower_x[a] * xs[k + 1 - a]
                bcc += lower_y[a] * ys[k + 1 - a]
            px[e].append(acc)
            py[e].append(bcc)
    vx = mp.mpf(0)
    vy = mp.mpf(0)
    for k in range(order, -1, -1):
        vx = vx * h + xs[k]
        vy = vy * h + ys[k]
    return vx, vy


class FlowSeparatrix:
    """Separatrix solution of z' = mu^-1 J grad H with unit unstable exponent.

    Local representation q + sum_k w_k e^{kt}; values beyond the local domain
    are reached by Taylor-integrating the rescaled field.
    """

    def __init__(self, ham: PolyHamiltonian, digits: int, k_max: int = 60,
                 amplitude=None):
        self.ham = ham
        self.digits = digits
        with mp.workdps(digits + 10):
            seed = self._default_seed()
            q, mu, vec = hamiltonian_saddle(ham, seed, digits)
            self.saddle = q
            self.exponent = mu
            hxx, hxy, hyy = ham.hessian(*q)
            if amplitude is None:
                amplitude = mp.mpf(1) / 4
            wx = [mp.mpf(0), amplitude * vec[0]]
            wy = [mp.mpf(0), amplitude * vec[1]]
            m11, m12 = hxy / mu, hyy / mu
            m21, m22 = -hxx / mu, -hxy / mu
            shifted = self._shifted_monomials(q)
            composer = _Composer(shifted)
            composer.push(wx[1], wy[1])
            for k in range(2, k_max + 1):
                composer.advance()
                n1, n2 = composer.nonlinear(k)
                n1, n2 = n1 / mu, n2 / mu
                a11, a12 = m11 - k, m12
                a21, a22 = m21, m22 - k
                det = a11 * a22 - a12 * a21
                wk_x = (-n1 * a22 + n2 * a12) / det
                wk_y = (-n2 * a11 + n1 * a21) / det
                wx.append(wk_x)
                wy.append(wk_y)
                composer.push(wk_x, wk_y)
            self.wx, self.wy = wx, wy
            cap = max(abs(self.saddle[0]), mp.mpf("0.1"))
            self.t_v = mp.log(_validated_radius(wx, wy, digits, displacement_cap=cap))

    def _default_seed(self):
        # saddle of Y^2/2 + a X^3/3 - b X sits near (-sqrt(b/a), 0)
        a = self.ham.coeffs.get((3, 0), mp.mpf(0)) * 3
        b = -self.ham.coeffs.get((1, 0), mp.mpf(0))
        if a == 0 or b <= 0:
            raise SepsplitError("cannot seed saddle search from leading part")
        return (-mp.sqrt(b / a), mp.mpf(0))

    def _shifted_monomials(self, q):
        out: Dict[Tuple[int, int], Tuple[object, object]] = {}
        for (i, j), c in self.ham.coeffs.items():
            for ii in range(i + 1):
                ci = mp.binomial(i, ii) * q[0] ** (i - ii)
                for jj in range(j + 1):
                    w = c * ci * mp.binomial(j, jj) * q[1] ** (j - jj)
                    if w == 0:
                        continue
                    # field = (d/dy, -d/dx) applied to the shifted monomial
                    if jj >= 1 and ii + jj - 1 >= 2:
                        w1, w2 = out.get((ii, jj - 1), (mp.mpf(0), mp.mpf(0)))
                        out[(ii, jj - 1)] = (w1 + w * jj, w2)
                    if ii >= 1 and ii - 1 + jj >= 2:
                        w1, w2 = out.get((ii - 1, jj), (mp.mpf(0), mp.mpf(0)))
                        out[(ii - 1, jj)] = (w1, w2 - w * ii)
        return out

    def _series_point(self, t):
        e = mp.exp(t)
        x = mp.mpf(0)
        y = mp.mpf(0)
        for k in range(len(self.wx) - 1, 0, -1):
            x = x * e + self.wx[k]
            y = y * e + self.wy[k]
        return x * e + self.saddle[0], y * e + self.saddle[1]

    def _advance(self, state, dt):
        x, y = state
        step = mp.mpf(1) / 8
        order = max(30, int(1.1 * self.digits))
        scale = 1 / self.exponent
        remaining = mp.mpf(dt)
        sign = 1 if remaining >= 0 else -1
        remaining = abs(remaining)
        while remaining > 0:
            h = min(step, remaining)
            x, y = taylor_step(self.ham, x, y, sign * h, order=order, scale=scale)
            remaining -= h
        return x, y

    def point(self, t):
        """Separatrix point at time t (real), with Taylor continuation."""
        with mp.workdps(self.digits + 10):
            t = mp.mpf(t)
            base = min(t, self.t_v)
            state = self._series_point(base)
            if t > base:
                state = self._advance(state, t - base)
            return state

    def points_on_grid(self, ts):
        """Points at an increasing sequence of times, one integration sweep."""
        with mp.workdps(self.digits + 10):
            ts = [mp.mpf(t) for t in ts]
            out = []
            prev_t = None
            state = None
            for t in ts:
                if prev_t is not None and t < prev_t:
                    raise ValueError("grid must be non-decreasing")
                if t <= self.t_v:
                    state = self._series_point(t)
                elif state is None or prev_t is None or prev_t < self.t_v:
                    state = self.point(t)
                else:
                    state = self._advance(state, t - prev_t)
                out.append(state)
                prev_t = t
            return out

    def apex(self) -> object:
        """First time where the y-component vanishes (top of the loop)."""
        with mp.workdps(self.digits + 10):
            t = self.t_v
            state = self._series_point(t)
            step = mp.mpf(1) / 2
            prev = state[1]
            for _ in range(400):
                nxt = self._advance(state, step)
                if mp.sign(nxt[1]) != mp.sign(prev) and prev != 0:
                    lo_state, lo, hi = state, t, t + step

                    def fy(tv):
                        return self._advance(lo_state, tv - lo)[1]

                    return _secant_zero(fy, (lo + hi) / 2, self.digits,
                                        shift=(hi - lo) / 8)
                state, t, prev = nxt, t + step, nxt[1]
            raise ConvergenceError("no apex found along the flow separatrix")

    def energy(self, t):
        x, y = self.point(t)
        return self.ham.value(x, y)


def time_one_flow_map(ham: PolyHamiltonian, digits: int, substeps: int = 8,
                      order: int = 24):
    """Time-one map of the Hamiltonian flow of ``ham`` as a callable."""

    def step(x, y):
        with mp.workdps(digits + 10):
            h = mp.mpf(1) / substeps
            for _ in range(substeps):
                x, y = taylor_step(ham, x, y, h, order=order)
            return x, y

    return step


def scaled_map(family: MapFamily, delta, digits: int):
    """The close-to-identity form of the family in scaled variables.

    Conjugation by x = delta^2 X, y = delta^3 Y at eps = delta^4 turns the
    family into id + delta * G_delta.
    """
    nmap = NumericMap(family)

    def step(X, Y):
        with mp.workdps(digits + 10):
            d = mp.mpf(delta)
            x, y = d ** 2 * X, d ** 3 * Y
            x1, y1 = nmap.apply(x, y, d ** 4)
            return x1 / d ** 2, y1 / d ** 3

    return step


def _secant_zero(fun, seed, digits, shift=None, max_iter=80):
    """Secant root solve for a smooth O(1) function of one real parameter."""
    t0 = mp.mpf(seed)
    t1 = t0 + (shift if shift is not None else mp.mpf("0.03125"))
    f0, f1 = fun(t0), fun(t1)
    tol = mp.mpf(10) ** (-(2 * digits) // 3)
    for _ in range(max_iter):
        if f1 == f0:
            break
        t2 = t1 - f1 * (t1 - t0) / (f1 - f0)
        t0, f0, t1 = t1, f1, t2
        f1 = fun(t1)
        if abs(t1 - t0) < tol:
            return t1
    raise ConvergenceError("secant solve for the apex did not converge")


def manifold_apex(par: ManifoldParametrization) -> object:
    """Parameter where the x-velocity of the manifold vanishes (loop apex)."""
    with mp.workdps(par.digits + 10):
        seed = turning_parameter(par)

        def vel_x(t):
            _, dv = evaluate_manifold(par, t, derivative=True)
            return dv[0]

        return _secant_zero(vel_x, seed, par.digits)


def formal_apex(sep, delta, digits: int) -> object:
    """Time where the x-velocity of the formal separatrix vanishes (near 0)."""
    with mp.workdps(digits + 10):
        def vel_x(t):
            return sep.velocity(mp, t, delta)[0]

        return _secant_zero(vel_x, mp.mpf(0), digits)


def formal_sup_deviation(par: ManifoldParametrization, formal, delta, n: int,
                         lo: float = -10.0, hi: float = 0.0, samples: int = 41):
    """sup_t |psi_x - X^n_x| over a real interval, apex-aligned phases.

    ``X^n`` keeps the first n scaled orders of the formal series, i.e.
    unscaled x-orders through delta^(n+1).  Both curves are anchored at their
    loop apex (x-velocity zero), which pins the translation freedom without
    changing the power of the leading error.
    """
    digits = par.digits
    with mp.workdps(digits + 10):
        d = mp.mpf(delta)
        truncated = formal.truncated(n + 1)
        t_psi = manifold_apex(par)
        t_formal = formal_apex(formal, d, digits)
        mu0 = formal.mu0(mp)
        worst = mp.mpf(0)
        for i in range(samples):
            s = mp.mpf(lo) + (mp.mpf(hi) - mp.mpf(lo)) * i / (samples - 1)
            (pt, _) = evaluate_manifold(par, t_psi + s, derivative=False)
            x_formal = truncated.x.evaluate(mp, t_formal + s, d, mu0)
            worst = max(worst, abs(pt[0] - x_formal))
        return worst


@dataclass
class SplittingRecord:
    """Per-parameter measurement bundle of the separatrix splitting."""

    delta: object
    eps: object
    log_multiplier: object
    orbits: List[HomoclinicOrbit]
    omega_plus: object
    omega_minus: object
    lobe: Optional[object]
    amplitude: Optional[object]
    digits: int
    diagnostics: Dict[str, object] = field(default_factory=dict)

    def to_json(self) -> dict:
        with mp.workdps(self.digits):
            doc = {
                "delta": _dec(self.delta), "eps": _dec(self.eps),
                "log_multiplier": _dec(self.log_multiplier),
                "omega_plus": _dec(self.omega_plus),
                "omega_minus": _dec(self.omega_minus),
                "lobe_area": _dec(self.lobe) if self.lobe is not None else None,
                "amplitude": _dec(self.amplitude) if self.amplitude is not None else None,
                "digits": self.digits,
                "orbits": [
                    {"t_stable": _dec(o.t_stable), "t_unstable": _dec(o.t_unstable),
                     "omega": _dec(o.omega), "residual": _dec(o.residual, 5)}
                    for o in self.orbits
                ],
                "diagnostics": {k: _dec(v, 8) for k, v in self.diagnostics.items()},
            }
        return doc


def splitting_record(family: MapFamily, delta, policy: Optional[PrecisionPolicy] = None,
                     digits: Optional[int] = None, with_lobe: bool = True,
                     s0=None, j_max: Optional[int] = None) -> SplittingRecord:
    """Full splitting measurement at one parameter value.

    Runs saddle -> manifolds -> homoclinic orbits -> invariants (and lobe
    area), escalating the working precision once if the ill-conditioned
    homoclinic solve stalls.
    """
    policy = policy or PrecisionPolicy()
    if digits is None:
        digits = policy.digits_for_delta(family, float(delta))
    attempt_digits = digits
    last_error: Optional[Exception] = None
    for attempt in range(2):
        try:
            return _splitting_attempt(family, delta, attempt_digits, with_lobe,
                                      s0, j_max)
        except (ConvergenceError, PrecisionError) as exc:
            last_error = exc
            attempt_digits = attempt_digits + 40
    raise ConvergenceError(f"splitting failed after precision escalation: {last_error}")


def _splitting_attempt(family, delta, digits, with_lobe, s0, j_max) -> SplittingRecord:
    with mp.workdps(digits + 10):
        d = mp.mpf(delta)
        eps = d ** 4
    saddle = find_saddle(family, eps, digits)
    unstable = parametrize_manifold(family, saddle, "unstable", digits, j_max, s0)
    stable = parametrize_manifold(family, saddle, "stable", digits, j_max, s0)
    orbits = find_homoclinics(stable, unstable)
    with mp.workdps(digits + 10):
        omegas = sorted((o.omega for o in orbits), reverse=True)
        omega_plus, omega_minus = omegas[0], omegas[-1]
        lobe = lobe_area(stable, unstable, orbits[0], orbits[1]) if with_lobe else None
        diag = {
            "conjugacy_unstable": conjugacy_residual(unstable, orbits[0].t_unstable - 1),
            "conjugacy_stable": conjugacy_residual(stable, orbits[0].t_stable + 1),
            "orbit_residual": max(o.residual for o in orbits),
        }
        return SplittingRecord(
            delta=d, eps=mp.mpf(saddle.eps), log_multiplier=saddle.log_multiplier,
            orbits=orbits, omega_plus=omega_plus, omega_minus=omega_minus,
            lobe=lobe, amplitude=None, digits=digits, diagnostics=diag,
        )


def extension_experiment(step_map, step_flow, z0, z0_tilde, n: int, T: float,
                         delta, digits: int, domain_radius: float = 50.0):
    """Iterate a map against an approximating flow map for floor(T/delta) steps.

    Returns the sup deviation over the orbit and the empirical constant
    K = sup / delta^n.  Raises if either orbit escapes the stated domain.
    """
    with mp.workdps(digits + 10):
        d = mp.mpf(delta)
        steps = int(mp.floor(T / d))
        x, y = mp.mpf(z0[0]), mp.mpf(z0[1])
        xt, yt = mp.mpf(z0_tilde[0]), mp.mpf(z0_tilde[1])
        sup = mp.sqrt((x - xt) ** 2 + (y - yt) ** 2)
        for _ in range(steps):
            x, y = step_map(x, y)
            xt, yt = step_flow(xt, yt)
            if max(abs(x), abs(y), abs(xt), abs(yt)) > domain_radius:
                raise SepsplitError("orbit escaped the comparison domain")
            sup = max(sup, mp.sqrt((x - xt) ** 2 + (y - yt) ** 2))
        return sup, sup / d ** n
