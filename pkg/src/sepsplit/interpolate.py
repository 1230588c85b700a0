"""Formal interpolating Hamiltonian of a normal-shape map.

The time-one Lie flow of a graded Hamiltonian ``h = h_6 + h_7 + ...`` is
matched against the map order by order.  Orders ``(p, p+1)`` of the two
components determine ``h_{p+3}`` up to a function of eps alone, which is
pinned to zero.  A second pass removes all y-dependence beyond the exact
``y^2/2`` by a sequence of canonical Lie transforms, leaving a mechanical
Hamiltonian ``y^2/2 + U(x, eps)`` together with the generating polynomials
needed to undo the change.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, List, Optional, Tuple

from .coefficients import Coefficient
from .errors import InterpolationError, SepsplitError
from .maps import MapFamily
from .qh import QhPolynomial, QhSeries, lie_exp, poisson, qh_order, series_to_json

RAW = "raw"
MECHANICAL = "mechanical"


class FormalHamiltonian:
    """Graded Hamiltonian h = sum_{p>=6} h_p plus its change-of-variables log.

    ``change_log`` records the generating polynomials chi_p applied (in
    order) while simplifying; an empty log means the Hamiltonian is still in
    the raw interpolating form.
    """

    def __init__(self, parts: QhSeries, form_flag: str = RAW,
                 change_log: Optional[List[QhPolynomial]] = None,
                 source: str = "custom"):
        low = parts.lowest()
        if low is not None and low < 6:
            raise SepsplitError("Hamiltonian parts must start at order 6")
        self.parts = parts
        self.form_flag = form_flag
        self.change_log = list(change_log or [])
        self.source = source

    def part(self, p: int) -> QhPolynomial:
        return self.parts.part(p)

    def leading_coefficients(self) -> Tuple[Fraction, Fraction]:
        """(a, b) from h6 = y^2/2 + a x^3/3 - b eps x."""
        h6 = self.part(6)
        if h6.coeff((0, 2, 0)) != Coefficient(Fraction(1, 2)):
            raise SepsplitError("h6 does not carry the exact y^2/2 term")
        a = h6.coeff((3, 0, 0)) * 3
        b = -h6.coeff((1, 0, 1))
        return a.as_fraction(), b.as_fraction()

    def potential(self) -> Dict[Tuple[int, int], Fraction]:
        """u_{km} table of U(x, eps) = sum u_{km} x^k eps^m (mechanical form only).

        Terms with k = 0 (pure powers of eps) are dropped: they generate no
        dynamics and are absorbed into the energy-constant series of the
        separatrix equation, matching the k >= 1 normalisation of the
        potential.
        """
        if self.form_flag != MECHANICAL:
            raise SepsplitError("potential table requires the mechanical form")
        table: Dict[Tuple[int, int], Fraction] = {}
        for p in self.parts.orders():
            for (k, l, m), c in self.parts.parts[p]:
                if l == 0 and k > 0:
                    table[(k, m)] = c.as_fraction()
        return table

    def to_json(self) -> dict:
        return {
            "format": "sepsplit-hamiltonian/1",
            "source": self.source,
            "form": self.form_flag,
            "free_series_convention": "additive functions of eps pinned to zero",
            "parts": series_to_json(self.parts),
            "change_log": [series_to_json(QhSeries({chi.order: chi}))
                           for chi in self.change_log],
        }


def interpolate(family: MapFamily, n: int) -> FormalHamiltonian:
    """Hamiltonian h = h_6 + ... + h_{n+5} whose time-one flow matches the map.

    The match is exact through component orders (n+2, n+3); the first
    discrepancy sits at orders (n+3, n+4).  Requires the family to be known
    (and area-preserving) through the orders consumed.
    """
    if n < 1:
        raise ValueError("interpolation order must be >= 1")
    x = QhSeries.coordinate_x()
    y = QhSeries.coordinate_y()
    comp1 = x + y + family.f_terms
    comp2 = y + family.g_terms
    h = QhSeries.zero(trunc=n + 5)
    for p in range(3, n + 3):
        flow_x = lie_exp(h, x, target_order=p)
        flow_y = lie_exp(h, y, target_order=p + 1)
        rx = comp1.part(p) - flow_x.part(p)
        ry = comp2.part(p + 1) - flow_y.part(p + 1)
        h_new = _solve_divergence_free(rx, ry)
        if not h_new.is_zero():
            h = h + QhSeries({h_new.order: h_new}, trunc=n + 5)
    return FormalHamiltonian(h, form_flag=RAW, source=family.label)


def _solve_divergence_free(rx: QhPolynomial, ry: QhPolynomial) -> QhPolynomial:
    """Solve dh/dy = rx, -dh/dx = ry for one quasi-homogeneous order.

    Solvable iff (rx, ry) is divergence free, which area preservation
    guarantees; the free additive function of eps is set to zero.
    """
    p = rx.order
    rx_series = QhSeries({p: rx}) if not rx.is_zero() else QhSeries.zero()
    ry_series = QhSeries({p + 1: ry}) if not ry.is_zero() else QhSeries.zero()
    primitive = rx_series.integrate(axis=1)
    residual = ry_series + primitive.diff_x()
    for part in residual.parts.values():
        if any(l != 0 for (_, l, _) in part.terms):
            raise InterpolationError(
                f"order-({p},{p + 1}) data is not divergence free; "
                "input map is not area-preserving (or truncated too early)"
            )
    h_series = primitive - residual.integrate(axis=0)
    part = h_series.part(p + 3) if h_series.parts else QhPolynomial(p + 3)
    return part


def simplify(ham: FormalHamiltonian, n: int) -> FormalHamiltonian:
    """Canonical change removing y-dependence beyond y^2/2, through order n + 5.

    Returns a mechanical Hamiltonian whose change_log holds the generating
    polynomials in application order; transforming the raw Hamiltonian by the
    logged generators reproduces the mechanical one.
    """
    if ham.form_flag != RAW:
        raise SepsplitError("simplify expects a raw interpolating Hamiltonian")
    a, b = ham.leading_coefficients()
    # dU6/dx with U6 = a x^3 / 3 - b eps x
    u6_prime = QhSeries.from_terms([((2, 0, 0), a), ((0, 0, 1), -b)])
    current = ham.parts.truncate(n + 5)
    h6 = current.part(6)
    for (k, l, m), _ in h6:
        if l > 0 and (k, l, m) != (0, 2, 0):
            raise SepsplitError("h6 contains y-terms beyond y^2/2")
    change_log: List[QhPolynomial] = []
    for p in range(6, n + 5):
        target = current.part(p + 1)
        if _is_y_free(target):
            continue
        chi = _solve_homological(target, u6_prime)
        current = lie_exp(QhSeries({chi.order: chi}), current, target_order=n + 5)
        if not _is_y_free(current.part(p + 1)):
            raise SepsplitError(f"homological step at order {p + 1} left y-terms")
        change_log.append(chi)
    return FormalHamiltonian(current, form_flag=MECHANICAL,
                             change_log=change_log, source=ham.source)


def _is_y_free(poly: QhPolynomial) -> bool:
    return all(l == 0 for (_, l, _) in poly.terms)


def _solve_homological(target: QhPolynomial, u6_prime: QhSeries) -> QhPolynomial:
    """chi of order p with target + {h6, chi} free of y.

    Writing chi = sum_j y^j chi_j(x, eps) and matching powers of y in
    ``{h6, chi} = U6'(x, eps) d(chi)/dy - y d(chi)/dx`` gives a triangular
    chain: the coefficient of y^j determines chi_{j-1} by an x-integration.
    Unassigned top components (the freedom of adding polynomials of h6 and
    eps) are pinned to zero.
    """
    p = target.order - 1
    w = _y_slices(QhSeries({target.order: target}))
    chi_slices: Dict[int, QhSeries] = {}
    for j in range((p + 1) // 3 + 1, 0, -1):
        integrand = w.get(j, QhSeries.zero())
        upper = chi_slices.get(j + 1)
        if upper is not None:
            integrand = integrand + upper.scale(j + 1) * u6_prime
        if integrand.is_zero():
            continue
        if p - 3 * (j - 1) < 0:
            raise SepsplitError("homological chain produced an impossible order")
        chi_slices[j - 1] = integrand.integrate(axis=0)
    chi = QhPolynomial(p)
    for j, xs in chi_slices.items():
        for poly in xs.parts.values():
            for (k, _, m), c in poly.terms.items():
                chi.terms[(k, j, m)] = c
    return QhPolynomial(p, chi.terms)


def _y_slices(series: QhSeries) -> Dict[int, QhSeries]:
    """Split sum_j y^j w_j(x, eps) into the (x, eps) series w_j."""
    slices: Dict[int, Dict] = {}
    for poly in series.parts.values():
        for (k, l, m), c in poly.terms.items():
            slices.setdefault(l, {})[(k, 0, m)] = c
    return {
        j: QhSeries.from_terms(entries.items())
        for j, entries in slices.items()
    }


def apply_change_log(series: QhSeries, change_log: List[QhPolynomial],
                     target_order: int) -> QhSeries:
    """Transform a series by the logged generators, in application order."""
    result = series.truncate(target_order) if (
        series.trunc is None or series.trunc > target_order) else series
    for chi in change_log:
        result = lie_exp(QhSeries({chi.order: chi}), result, target_order)
    return result


def change_map_components(change_log: List[QhPolynomial],
                          target_order: int) -> Tuple[QhSeries, QhSeries]:
    """Coordinate functions of the composite change, old variables in new ones.

    A point on an orbit of the mechanical system maps to the raw-variable
    orbit through these two series.
    """
    x = apply_change_log(QhSeries.coordinate_x(), change_log, target_order)
    y = apply_change_log(QhSeries.coordinate_y(), change_log, target_order)
    return x, y


def scaled_hamiltonian(ham: FormalHamiltonian, n: int) -> Dict[int, Dict[Tuple[int, int], Fraction]]:
    """Coefficients of H_delta^n(X, Y) = sum_{k=1..n} delta^k h_{5+k}(X, Y, 1).

    The standard scaling x = delta^2 X, y = delta^3 Y, eps = delta^4 sends the
    symplectic form to delta^5 dX ^ dY; dividing the Hamiltonian by delta^5
    restores the standard form, so the time-one flow in scaled variables is
    generated by this polynomial.  Returned as {k: {(i, j): coeff}} where
    (i, j) are powers of (X, Y).
    """
    table: Dict[int, Dict[Tuple[int, int], Fraction]] = {}
    for k in range(1, n + 1):
        poly = ham.part(5 + k)
        entry: Dict[Tuple[int, int], Fraction] = {}
        for (i, j, m), c in poly:
            key = (i, j)
            entry[key] = entry.get(key, Fraction(0)) + c.as_fraction()
        table[k] = {key: val for key, val in entry.items() if val != 0}
    return table


def interpolation_defect(family: MapFamily, ham: FormalHamiltonian,
                         n: int) -> Tuple[QhSeries, QhSeries]:
    """Component-wise difference between the time-one flow of h^n and the map.

    h^n = h_6 + ... + h_{n+5} is a genuine polynomial, so its flow is defined
    at every order; the difference is computed through orders (n+3, n+4).
    The theorem guarantees zero coefficients strictly below those orders, and
    generically nothing more.
    """
    x = QhSeries.coordinate_x()
    y = QhSeries.coordinate_y()
    h = QhSeries({p: poly for p, poly in ham.parts.parts.items() if p <= n + 5})
    flow_x = lie_exp(h, x, target_order=n + 3)
    flow_y = lie_exp(h, y, target_order=n + 4)
    comp1 = (x + y + family.f_terms).truncate(n + 3)
    comp2 = (y + family.g_terms).truncate(n + 4)
    return flow_x - comp1, flow_y - comp2
