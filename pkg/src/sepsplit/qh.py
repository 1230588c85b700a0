"""Quasi-homogeneous polynomial and truncated-series algebra.

Monomials ``x^k y^l eps^m`` are graded with weights 2, 3, 4, so a polynomial of
order ``p`` satisfies ``Q(s^2 x, s^3 y, s^4 eps) = s^p Q(x, y, eps)``.  A
:class:`QhSeries` is a finite family of such polynomials together with an
explicit truncation order; any operation that would need coefficients beyond
the truncation raises :class:`~sepsplit.errors.TruncationError` instead of
silently dropping them.

Coefficients are exact (:class:`~sepsplit.coefficients.Coefficient`), so every
identity in this module can be asserted term by term.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, Optional, Tuple

from .coefficients import Coefficient
from .errors import TruncationError

Exponents = Tuple[int, int, int]

WEIGHTS = (2, 3, 4)


def qh_order(exponents: Exponents) -> int:
    """Quasi-homogeneous order 2k + 3l + 4m of an exponent triple."""
    k, l, m = exponents
    if k < 0 or l < 0 or m < 0:
        raise ValueError("exponents must be non-negative")
    return 2 * k + 3 * l + 4 * m


class QhPolynomial:
    """Single quasi-homogeneous polynomial: exponent triple -> coefficient."""

    __slots__ = ("order", "terms")

    def __init__(self, order: int, terms: Optional[Dict[Exponents, Coefficient]] = None):
        self.order = order
        self.terms: Dict[Exponents, Coefficient] = {}
        if terms:
            for key, value in terms.items():
                value = Coefficient.of(value)
                if value.is_zero():
                    continue
                if qh_order(key) != order:
                    raise ValueError(f"term {key} has order {qh_order(key)}, not {order}")
                self.terms[key] = value

    def is_zero(self) -> bool:
        return not self.terms

    def __iter__(self):
        return iter(self.terms.items())

    def coeff(self, key: Exponents) -> Coefficient:
        return self.terms.get(key, Coefficient(0))

    def __add__(self, other: "QhPolynomial") -> "QhPolynomial":
        if self.order != other.order:
            raise ValueError("cannot add polynomials of different orders")
        terms = dict(self.terms)
        for key, value in other.terms.items():
            acc = terms.get(key)
            total = value if acc is None else acc + value
            if total.is_zero():
                terms.pop(key, None)
            else:
                terms[key] = total
        result = QhPolynomial(self.order)
        result.terms = terms
        return result

    def __neg__(self) -> "QhPolynomial":
        result = QhPolynomial(self.order)
        result.terms = {k: -v for k, v in self.terms.items()}
        return result

    def __sub__(self, other: "QhPolynomial") -> "QhPolynomial":
        return self + (-other)

    def scale(self, factor) -> "QhPolynomial":
        factor = Coefficient.of(factor)
        result = QhPolynomial(self.order)
        if not factor.is_zero():
            result.terms = {k: v * factor for k, v in self.terms.items()}
        return result

    def __eq__(self, other):
        return (
            isinstance(other, QhPolynomial)
            and self.order == other.order
            and self.terms == other.terms
        )

    def __repr__(self):
        if not self.terms:
            return f"QhPolynomial({self.order}, 0)"
        bits = []
        for (k, l, m), c in sorted(self.terms.items()):
            bits.append(f"{c!r}*x^{k} y^{l} e^{m}")
        return f"QhPolynomial({self.order}, {' + '.join(bits)})"


def _mul_poly(a: QhPolynomial, b: QhPolynomial) -> QhPolynomial:
    result = QhPolynomial(a.order + b.order)
    terms = result.terms
    for (k1, l1, m1), c1 in a.terms.items():
        for (k2, l2, m2), c2 in b.terms.items():
            key = (k1 + k2, l1 + l2, m1 + m2)
            prod = c1 * c2
            acc = terms.get(key)
            total = prod if acc is None else acc + prod
            if total.is_zero():
                terms.pop(key, None)
            else:
                terms[key] = total
    return result


def _poisson_poly(a: QhPolynomial, b: QhPolynomial) -> QhPolynomial:
    """{a, b} = a_x b_y - a_y b_x; lands at order a.order + b.order - 5."""
    result = QhPolynomial(a.order + b.order - 5)
    terms = result.terms
    for (k1, l1, m1), c1 in a.terms.items():
        for (k2, l2, m2), c2 in b.terms.items():
            # a_x * b_y
            if k1 > 0 and l2 > 0:
                key = (k1 + k2 - 1, l1 + l2 - 1, m1 + m2)
                val = c1 * c2 * (k1 * l2)
                acc = terms.get(key)
                total = val if acc is None else acc + val
                if total.is_zero():
                    terms.pop(key, None)
                else:
                    terms[key] = total
            # - a_y * b_x
            if l1 > 0 and k2 > 0:
                key = (k1 + k2 - 1, l1 + l2 - 1, m1 + m2)
                val = c1 * c2 * (-l1 * k2)
                acc = terms.get(key)
                total = val if acc is None else acc + val
                if total.is_zero():
                    terms.pop(key, None)
                else:
                    terms[key] = total
    return result


class QhSeries:
    """Sum of quasi-homogeneous polynomials with explicit truncation.

    Parameters
    ----------
    parts : dict
        Map from order ``p`` to :class:`QhPolynomial` of that order.
    trunc : int or None
        Orders above ``trunc`` are undefined.  ``None`` means the series is
        exact (a genuine polynomial, every absent order is zero).
    """

    __slots__ = ("parts", "trunc")

    def __init__(self, parts: Optional[Dict[int, QhPolynomial]] = None,
                 trunc: Optional[int] = None):
        self.parts: Dict[int, QhPolynomial] = {}
        self.trunc = trunc
        if parts:
            for p, poly in parts.items():
                if poly.order != p:
                    raise ValueError("part order mismatch")
                if not poly.is_zero():
                    if trunc is not None and p > trunc:
                        raise ValueError("part beyond declared truncation")
                    self.parts[p] = poly

    # -- construction helpers ------------------------------------------------

    @staticmethod
    def from_terms(entries: Iterable[Tuple[Exponents, object]],
                   trunc: Optional[int] = None) -> "QhSeries":
        grouped: Dict[int, Dict[Exponents, Coefficient]] = {}
        for key, value in entries:
            p = qh_order(key)
            grouped.setdefault(p, {})[key] = Coefficient.of(value)
        parts = {p: QhPolynomial(p, terms) for p, terms in grouped.items()}
        return QhSeries(parts, trunc)

    @staticmethod
    def monomial(key: Exponents, value=1, trunc: Optional[int] = None) -> "QhSeries":
        return QhSeries.from_terms([(key, value)], trunc)

    @staticmethod
    def zero(trunc: Optional[int] = None) -> "QhSeries":
        return QhSeries({}, trunc)

    @staticmethod
    def coordinate_x() -> "QhSeries":
        return QhSeries.monomial((1, 0, 0))

    @staticmethod
    def coordinate_y() -> "QhSeries":
        return QhSeries.monomial((0, 1, 0))

    @staticmethod
    def parameter_eps() -> "QhSeries":
        return QhSeries.monomial((0, 0, 1))

    # -- bookkeeping -----------------------------------------------------------

    def lowest(self) -> Optional[int]:
        """Lowest stored order, or None for the zero series."""
        return min(self.parts) if self.parts else None

    def orders(self):
        return sorted(self.parts)

    def is_zero(self) -> bool:
        return not self.parts

    def part(self, p: int) -> QhPolynomial:
        """Order-p polynomial; raises if p lies beyond the truncation."""
        if self.trunc is not None and p > self.trunc:
            raise TruncationError(f"order {p} beyond truncation {self.trunc}")
        return self.parts.get(p, QhPolynomial(p))

    def truncate(self, new_trunc: Optional[int]) -> "QhSeries":
        if new_trunc is None:
            if self.trunc is not None:
                raise TruncationError("cannot extend a truncated series")
            return self
        parts = {p: poly for p, poly in self.parts.items() if p <= new_trunc}
        if self.trunc is not None and new_trunc > self.trunc:
            new_trunc = self.trunc
        return QhSeries(parts, new_trunc)

    def _trunc_with(self, other: "QhSeries") -> Optional[int]:
        if self.trunc is None:
            return other.trunc
        if other.trunc is None:
            return self.trunc
        return min(self.trunc, other.trunc)

    def __eq__(self, other):
        return (
            isinstance(other, QhSeries)
            and self.parts == other.parts
            and self.trunc == other.trunc
        )

    def same_parts(self, other: "QhSeries") -> bool:
        """Coefficient-level equality on all mutually defined orders."""
        limit = self._trunc_with(other)
        orders = set(self.parts) | set(other.parts)
        if limit is not None:
            orders = {p for p in orders if p <= limit}
        return all(self.part(p) == other.part(p) for p in orders)

    # -- ring operations -------------------------------------------------------

    def __add__(self, other: "QhSeries") -> "QhSeries":
        trunc = self._trunc_with(other)
        parts: Dict[int, QhPolynomial] = {}
        for p in set(self.parts) | set(other.parts):
            if trunc is not None and p > trunc:
                continue
            total = self.parts.get(p, QhPolynomial(p)) + other.parts.get(p, QhPolynomial(p))
            if not total.is_zero():
                parts[p] = total
        return QhSeries(parts, trunc)

    def __neg__(self) -> "QhSeries":
        return QhSeries({p: -poly for p, poly in self.parts.items()}, self.trunc)

    def __sub__(self, other: "QhSeries") -> "QhSeries":
        return self + (-other)

    def scale(self, factor) -> "QhSeries":
        factor = Coefficient.of(factor)
        if factor.is_zero():
            return QhSeries({}, self.trunc)
        return QhSeries({p: poly.scale(factor) for p, poly in self.parts.items()}, self.trunc)

    def __mul__(self, other: "QhSeries") -> "QhSeries":
        trunc = _product_trunc(self, other, shift=0)
        parts: Dict[int, QhPolynomial] = {}
        for p1, poly1 in self.parts.items():
            for p2, poly2 in other.parts.items():
                p = p1 + p2
                if trunc is not None and p > trunc:
                    continue
                prod = _mul_poly(poly1, poly2)
                if prod.is_zero():
                    continue
                acc = parts.get(p)
                total = prod if acc is None else acc + prod
                if total.is_zero():
                    parts.pop(p, None)
                else:
                    parts[p] = total
        return QhSeries(parts, trunc)

    def diff_x(self) -> "QhSeries":
        return self._diff(0)

    def diff_y(self) -> "QhSeries":
        return self._diff(1)

    def _diff(self, axis: int) -> "QhSeries":
        weight = WEIGHTS[axis]
        trunc = None if self.trunc is None else self.trunc - weight
        parts: Dict[int, QhPolynomial] = {}
        for p, poly in self.parts.items():
            out = QhPolynomial(p - weight)
            for key, value in poly.terms.items():
                e = key[axis]
                if e == 0:
                    continue
                new_key = list(key)
                new_key[axis] = e - 1
                out.terms[tuple(new_key)] = value * e
            if not out.is_zero():
                parts[p - weight] = out
        return QhSeries(parts, trunc)

    def integrate(self, axis: int) -> "QhSeries":
        """Antiderivative in x (axis 0) or y (axis 1), no integration constant."""
        weight = WEIGHTS[axis]
        trunc = None if self.trunc is None else self.trunc + weight
        parts: Dict[int, QhPolynomial] = {}
        for p, poly in self.parts.items():
            out = QhPolynomial(p + weight)
            for key, value in poly.terms.items():
                new_key = list(key)
                new_key[axis] = key[axis] + 1
                out.terms[tuple(new_key)] = value * Fraction(1, key[axis] + 1)
            if not out.is_zero():
                parts[p + weight] = out
        return QhSeries(parts, trunc)


def _product_trunc(a: QhSeries, b: QhSeries, shift: int) -> Optional[int]:
    """Orders of a*b (or {a,b} with shift=-5) that are fully determined."""
    if a.trunc is None and b.trunc is None:
        return None
    INF = float("inf")
    a_low = a.lowest() if a.parts else None
    b_low = b.lowest() if b.parts else None
    ta = INF if a.trunc is None else a.trunc
    tb = INF if b.trunc is None else b.trunc
    la = INF if a_low is None else a_low
    lb = INF if b_low is None else b_low
    bound = min(ta + lb, tb + la) + shift
    return None if bound == INF else int(bound)


def poisson(f: QhSeries, g: QhSeries, max_order: Optional[int] = None) -> QhSeries:
    """Poisson bracket {f, g} = f_x g_y - f_y g_x on graded series.

    A bracket of orders (p, q) lands at order p + q - 5.  ``max_order`` skips
    term pairs above that order (the truncation is tightened accordingly).
    """
    trunc = _product_trunc(f, g, shift=-5)
    if max_order is not None:
        trunc = max_order if trunc is None else min(trunc, max_order)
    parts: Dict[int, QhPolynomial] = {}
    for p1, poly1 in f.parts.items():
        for p2, poly2 in g.parts.items():
            p = p1 + p2 - 5
            if trunc is not None and p > trunc:
                continue
            prod = _poisson_poly(poly1, poly2)
            if prod.is_zero():
                continue
            acc = parts.get(p)
            total = prod if acc is None else acc + prod
            if total.is_zero():
                parts.pop(p, None)
            else:
                parts[p] = total
    return QhSeries(parts, trunc)


def lie_exp(chi: QhSeries, g: QhSeries, target_order: int) -> QhSeries:
    """Truncated Lie transform exp(L_chi) g = sum_k L_chi^k g / k!.

    ``chi`` must start at order >= 6 so each application of
    ``L_chi(.) = {., chi}`` raises the order by at least one and the sum is
    finite order by order.
    """
    low = chi.lowest()
    if low is not None and low < 6:
        raise ValueError(f"generator starts at order {low} < 6; Lie series would not grade")
    result = g.truncate(target_order) if (g.trunc is None or g.trunc > target_order) else g
    if result.trunc is None or result.trunc < target_order:
        if result.trunc is not None and result.trunc < target_order:
            raise TruncationError(
                f"input known to order {result.trunc} < target {target_order}"
            )
    term = result
    k = 0
    while not term.is_zero():
        k += 1
        term = poisson(term, chi, max_order=target_order).scale(Fraction(1, k))
        if term.trunc is not None and term.trunc < target_order:
            raise TruncationError("generator truncation too small for target order")
        if term.is_zero():
            break
        result = result + term
        lowest = term.lowest()
        if lowest is not None and lowest > target_order:
            break
    return result.truncate(target_order)


def canonical_pair_defect(xs: QhSeries, ys: QhSeries, up_to: int) -> QhSeries:
    """{X, Y} - 1 for a candidate canonical pair, through order ``up_to``."""
    bracket = poisson(xs, ys, max_order=up_to)
    one = QhSeries.monomial((0, 0, 0), 1, trunc=bracket.trunc)
    return bracket - one


def validate_area_preservation(f: QhSeries, g: QhSeries, up_to: int):
    """Check the exact area-preservation identity of a normal-shape map.

    For the map ``x1 = x + y + f``, ``y1 = y + g`` unit Jacobian determinant
    is equivalent to ``f_x + g_y + {f, g} - g_x = 0``.  Returns
    ``(ok, first_failing_order)`` with orders checked up to ``up_to - 2``.
    """
    identity = f.diff_x() + g.diff_y() + poisson(f, g, max_order=up_to - 2) - g.diff_x()
    limit = up_to - 2
    if identity.trunc is not None:
        limit = min(limit, identity.trunc)
    for p in sorted(identity.parts):
        if p <= limit and not identity.parts[p].is_zero():
            return False, p
    return True, None


# -- serialization --------------------------------------------------------------


def series_to_json(series: QhSeries) -> dict:
    """JSON document for a series; round-trips bit-exactly."""
    terms = []
    d = None
    for p in sorted(series.parts):
        for key, value in sorted(series.parts[p].terms.items()):
            entry = {
                "k": key[0], "l": key[1], "m": key[2],
                "num": value.p.numerator, "den": value.p.denominator,
            }
            if value.q != 0:
                entry["q_num"] = value.q.numerator
                entry["q_den"] = value.q.denominator
                d = value.d
            terms.append(entry)
    context = {"truncation_order": series.trunc}
    if d is not None:
        context["d_num"] = d.numerator
        context["d_den"] = d.denominator
    return {"context": context, "terms": terms}


def series_from_json(doc: dict) -> QhSeries:
    context = doc.get("context", {})
    trunc = context.get("truncation_order")
    d = None
    if "d_num" in context:
        d = Fraction(context["d_num"], context.get("d_den", 1))
    entries = []
    for item in doc["terms"]:
        p = Fraction(item["num"], item.get("den", 1))
        if "q_num" in item:
            if d is None:
                raise ValueError("irrational term without extension context")
            value = Coefficient(p, Fraction(item["q_num"], item.get("q_den", 1)), d)
        else:
            value = Coefficient(p)
        entries.append(((item["k"], item["l"], item["m"]), value))
    return QhSeries.from_terms(entries, trunc)
