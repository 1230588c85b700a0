"""Area-preserving map families in parabolic normal shape.

A family is stored through the nonlinearities of

    x1 = x + y + f(x, y, eps),    y1 = y + g(x, y, eps),

with ``f`` and ``g`` graded series of quasi-homogeneous order >= 4 and exact
rational coefficients.  At ``eps = 0`` the origin is then a parabolic fixed
point whose Jacobian is the unit upper-triangular Jordan block.
"""

from __future__ import annotations

import json
from fractions import Fraction
from importlib import resources
from typing import Optional, Tuple

from .errors import DegenerateBifurcationError, SepsplitError
from .qh import QhSeries, series_from_json, series_to_json, validate_area_preservation


class MapFamily:
    """Normal-shape area-preserving family with exact coefficients.

    Parameters
    ----------
    f_terms, g_terms : QhSeries
        Nonlinear parts of the two components (the structural ``y`` in the
        first component is implicit).  Lowest order must be >= 4.
    label : str
        Provenance tag carried into every artifact produced from the family.
    check : bool
        Validate the area-preservation identity through the declared
        truncation (on by default).
    """

    def __init__(self, f_terms: QhSeries, g_terms: QhSeries, label: str = "custom",
                 check: bool = True):
        for name, series in (("f", f_terms), ("g", g_terms)):
            low = series.lowest()
            if low is not None and low < 4:
                raise SepsplitError(f"{name}-component has terms below order 4")
        self.f_terms = f_terms
        self.g_terms = g_terms
        self.label = label
        if check:
            limit = self._check_limit()
            ok, bad = validate_area_preservation(f_terms, g_terms, up_to=limit)
            if not ok:
                raise SepsplitError(f"map '{label}' is not area-preserving "
                                    f"(identity fails at order {bad})")

    def _check_limit(self) -> int:
        candidates = [t for t in (self.f_terms.trunc, self.g_terms.trunc) if t is not None]
        if candidates:
            return min(candidates)
        highs = [max(s.parts) for s in (self.f_terms, self.g_terms) if s.parts]
        return 2 * max(highs) if highs else 6

    # -- leading normal-form data ------------------------------------------

    def leading_coefficients(self) -> Tuple[Fraction, Fraction]:
        """(a, b) of the leading interpolating Hamiltonian y^2/2 + a x^3/3 - b eps x.

        The order-4 part of g is y-free, and matching the time-one flow at
        leading order forces -dU/dx = g4, so a = -[x^2]g4 and b = [eps]g4.
        """
        g4 = self.g_terms.part(4)
        a = -g4.coeff((2, 0, 0))
        b = g4.coeff((0, 0, 1))
        return a.as_fraction(), b.as_fraction()

    def is_degenerate(self) -> bool:
        a, b = self.leading_coefficients()
        return a == 0 or b == 0

    def reversor(self):
        """Reversor R(x, y) = (x, -y - f(x, eps)) when f == g and both are y-free.

        For such families R is an involution conjugating the map to its
        inverse; its fixed set is the curve y = -f(x, eps)/2.  Returns None
        when the family does not declare this structure.
        """
        if not self.f_terms.same_parts(self.g_terms):
            return None
        for poly in self.f_terms.parts.values():
            if any(l != 0 for (_, l, _) in poly.terms):
                return None
        return ReversorSpec(self.f_terms)

    # -- serialization -------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "format": "sepsplit-map/1",
            "label": self.label,
            "f": series_to_json(self.f_terms),
            "g": series_to_json(self.g_terms),
        }

    @staticmethod
    def from_json(doc: dict, check: bool = True) -> "MapFamily":
        return MapFamily(
            series_from_json(doc["f"]),
            series_from_json(doc["g"]),
            label=doc.get("label", "custom"),
            check=check,
        )

    @staticmethod
    def load(path: str, check: bool = True) -> "MapFamily":
        with open(path, "r", encoding="utf-8") as fh:
            return MapFamily.from_json(json.load(fh), check=check)


class ReversorSpec:
    """Involution (x, y) -> (x, -y - V(x, eps)) for families with f = g = V."""

    def __init__(self, v_terms: QhSeries):
        self.v_terms = v_terms

    def apply(self, ctx, x, y, eps):
        from .numerics import eval_series

        return x, -y - eval_series(ctx, self.v_terms, x, y, eps)


def normalize_signs(family: MapFamily) -> Tuple[MapFamily, dict]:
    """Return an equivalent family with a > 0 and b > 0, plus the substitutions.

    The sign of ``a`` flips under conjugation by the symplectic point
    reflection (x, y) -> (-x, -y) (which also flips b), and the sign of ``b``
    alone flips under the parameter change eps -> -eps.
    """
    a, b = family.leading_coefficients()
    if a == 0 or b == 0:
        raise DegenerateBifurcationError(
            f"map '{family.label}': a = {a}, b = {b}; need a*b != 0 at order 6"
        )
    point_reflection = a < 0
    f, g = family.f_terms, family.g_terms
    if point_reflection:
        f = _conjugate_point_reflection(f)
        g = _conjugate_point_reflection(g)
        a, b = -a, -b
    epsilon_flip = b < 0
    if epsilon_flip:
        f = _flip_epsilon(f)
        g = _flip_epsilon(g)
        b = -b
    result = MapFamily(f, g, label=family.label, check=False)
    return result, {"point_reflection": point_reflection, "epsilon_flip": epsilon_flip}


def _conjugate_point_reflection(series: QhSeries) -> QhSeries:
    """Nonlinearity of sigma o F o sigma with sigma = -id: h(x,y) -> -h(-x,-y)."""
    entries = []
    for p in series.parts.values():
        for (k, l, m), c in p.terms.items():
            sign = -1 if (k + l) % 2 == 0 else 1
            entries.append(((k, l, m), c * sign))
    return QhSeries.from_terms(entries, series.trunc)


def _flip_epsilon(series: QhSeries) -> QhSeries:
    entries = []
    for p in series.parts.values():
        for (k, l, m), c in p.terms.items():
            entries.append(((k, l, m), c * (-1 if m % 2 else 1)))
    return QhSeries.from_terms(entries, series.trunc)


# -- registry ---------------------------------------------------------------


def _mcmillan() -> MapFamily:
    # f = g = eps - x^2: the simplest family in normal shape; fixed points
    # and multipliers have closed forms, which the oracle tests rely on.
    f = QhSeries.from_terms([((0, 0, 1), 1), ((2, 0, 0), -1)])
    return MapFamily(f, f, label="builtin:mcmillan")


def _henon() -> MapFamily:
    # Shipped as data: the quadratic Henon family after the affine change
    # that puts its parabolic point at the origin in normal shape.
    text = resources.files("sepsplit.data").joinpath("henon.json").read_text()
    return MapFamily.from_json(json.loads(text))


BUILTIN_MAPS = {
    "mcmillan": _mcmillan,
    "henon": _henon,
}


def get_map(source: str) -> MapFamily:
    """Resolve ``builtin:<name>`` or a JSON file path to a MapFamily."""
    if source.startswith("builtin:"):
        name = source.split(":", 1)[1]
        try:
            return BUILTIN_MAPS[name]()
        except KeyError:
            raise SepsplitError(f"unknown builtin map '{name}'; "
                                f"have {sorted(BUILTIN_MAPS)}") from None
    return MapFamily.load(source)
