"""Asymptotic-law extraction: prefactor stripping, even-series fits, order checks.

The homoclinic invariant carries the universal factor
``(2 pi / log^2 lambda) exp(-2 pi^2 / log lambda)``; dividing it out leaves a
normalized amplitude w(delta) that behaves like an even power series.  This
module strips the prefactor, fits the even series on a delta sweep, and runs
log-log order regressions for every power-law accuracy claim.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from mpmath import mp

from .errors import PrecisionError, SepsplitError
from .maps import MapFamily
from .numerics import PrecisionPolicy, SplittingRecord, splitting_record


def normalize_amplitude(record: SplittingRecord, which: str = "plus"):
    """w(delta) = |omega| log^2(lambda) exp(+2 pi^2 / log lambda) / (2 pi).

    Inverts the universal prefactor of the splitting law.  The exponential
    amplifies absolute error, which is why the record must have been computed
    under the precision policy.
    """
    with mp.workdps(record.digits):
        omega = record.omega_plus if which == "plus" else record.omega_minus
        L = record.log_multiplier
        value = abs(omega) * L ** 2 * mp.exp(2 * mp.pi ** 2 / L) / (2 * mp.pi)
        record.amplitude = value
        return value


@dataclass
class AsymptoticFit:
    """Even-series fit w(delta) ~ sum_{k<=K} a_k delta^(2k) on a sweep."""

    degree: int
    coefficients: List[object]
    residual_norm: object
    samples: int

    @property
    def a0(self):
        return self.coefficients[0]

    def to_json(self) -> dict:
        return {
            "degree": self.degree,
            "coefficients": [mp.nstr(c, 30) for c in self.coefficients],
            "residual_norm": mp.nstr(self.residual_norm, 10),
            "samples": self.samples,
        }


def fit_even_series(points: Sequence[Tuple[object, object]], degree: int) -> AsymptoticFit:
    """Least squares of w against even powers of delta.

    The fit runs in the centred, scaled variable u' = (delta^2 - mean)/spread
    to tame the Vandermonde conditioning, then converts the coefficients back
    to the plain delta^(2k) basis.
    """
    if len(points) < degree + 2:
        raise SepsplitError("need at least degree + 2 sweep points")
    us = [mp.mpf(d) ** 2 for d, _ in points]
    ws = [mp.mpf(w) for _, w in points]
    mean = sum(us) / len(us)
    spread = max(abs(u - mean) for u in us)
    if spread == 0:
        raise SepsplitError("degenerate sweep grid")
    xs = [(u - mean) / spread for u in us]
    rows = [[x ** k for k in range(degree + 1)] for x in xs]
    a_mat = mp.matrix(rows)
    b_vec = mp.matrix(ws)
    sol = mp.qr_solve(a_mat, b_vec)
    centred = [sol[0][k] for k in range(degree + 1)]
    residual = sol[1]
    raw = _uncenter(centred, mean, spread)
    return AsymptoticFit(degree=degree, coefficients=raw,
                         residual_norm=residual, samples=len(points))


def _uncenter(centred: List[object], mean, spread) -> List[object]:
    """Coefficients of p(u) = sum c_k ((u - mean)/spread)^k in powers of u."""
    out = [mp.mpf(0)] * len(centred)
    for k, ck in enumerate(centred):
        # ((u - mean)/spread)^k expanded binomially
        for i in range(k + 1):
            out[i] += ck * mp.binomial(k, i) * (-mean) ** (k - i) / spread ** k
    return out


@dataclass
class OrderRegression:
    """Log-log slope estimate for an O(delta^n) accuracy claim."""

    slope: object
    intercept: object
    claimed: float
    passed: bool
    points: List[Tuple[object, object]]
    excluded: List[Tuple[object, object]]

    def to_json(self) -> dict:
        return {
            "slope": mp.nstr(self.slope, 10),
            "claimed": self.claimed,
            "passed": self.passed,
            "points": [[mp.nstr(a, 8), mp.nstr(b, 8)] for a, b in self.points],
            "excluded": [[mp.nstr(a, 8), mp.nstr(b, 8)] for a, b in self.excluded],
        }


def order_regression(pairs: Sequence[Tuple[object, object]], claimed: float,
                     floor=None, tolerance: float = 0.25) -> OrderRegression:
    """Fit err ~ C delta^s by log-log least squares; pass iff s >= claimed - tol.

    Points with error at or below ``floor`` (numerical noise) are excluded
    and reported.
    """
    used: List[Tuple[object, object]] = []
    excluded: List[Tuple[object, object]] = []
    for d, e in pairs:
        d, e = mp.mpf(d), mp.mpf(e)
        if e <= 0 or (floor is not None and e < floor):
            excluded.append((d, e))
        else:
            used.append((d, e))
    if len(used) < 2:
        raise PrecisionError("not enough points above the error floor")
    xs = [mp.log(d) for d, _ in used]
    ys = [mp.log(e) for _, e in used]
    n = len(xs)
    sx = sum(xs); sy = sum(ys)
    sxx = sum(x * x for x in xs); sxy = sum(x * y for x, y in zip(xs, ys))
    denom = n * sxx - sx * sx
    slope = (n * sxy - sx * sy) / denom
    intercept = (sy - slope * sx) / n
    return OrderRegression(slope=slope, intercept=intercept, claimed=claimed,
                           passed=bool(slope >= claimed - tolerance),
                           points=used, excluded=excluded)


@dataclass
class SweepPlan:
    """Parameter grid and settings for a splitting sweep."""

    deltas: List[float]
    order: int = 4
    policy: PrecisionPolicy = field(default_factory=PrecisionPolicy)
    digits_override: Optional[int] = None
    with_lobe: bool = True
    map_source: str = "builtin:mcmillan"

    def __post_init__(self):
        if not self.deltas:
            raise SepsplitError("empty sweep grid")
        if any(d <= 0 for d in self.deltas):
            raise SepsplitError("sweep grid must be positive")
        if sorted(self.deltas) != list(self.deltas):
            raise SepsplitError("sweep grid must be increasing")

    @staticmethod
    def geometric(lo: float, hi: float, count: int, **kw) -> "SweepPlan":
        if count < 2:
            raise SepsplitError("need at least two grid points")
        ratio = (hi / lo) ** (1.0 / (count - 1))
        deltas = [lo * ratio ** i for i in range(count)]
        return SweepPlan(deltas=deltas, **kw)

    @staticmethod
    def linear(lo: float, hi: float, count: int, **kw) -> "SweepPlan":
        step = (hi - lo) / (count - 1)
        return SweepPlan(deltas=[lo + i * step for i in range(count)], **kw)


@dataclass
class SweepReport:
    """Sweep output: per-delta records plus the even-series fits."""

    records: List[SplittingRecord]
    fits: Dict[int, AsymptoticFit]
    plan: SweepPlan

    def to_json(self) -> dict:
        return {
            "format": "sepsplit-report/1",
            "map": self.plan.map_source,
            "order": self.plan.order,
            "records": [r.to_json() for r in self.records],
            "fits": {str(k): f.to_json() for k, f in self.fits.items()},
        }

    def csv_rows(self) -> List[str]:
        rows = ["delta,log_multiplier,omega_plus,omega_minus,lobe_area,amplitude"]
        for r in self.records:
            with mp.workdps(r.digits):
                rows.append(",".join([
                    mp.nstr(r.delta, 17),
                    mp.nstr(r.log_multiplier, r.digits),
                    mp.nstr(r.omega_plus, r.digits),
                    mp.nstr(r.omega_minus, r.digits),
                    mp.nstr(r.lobe, r.digits) if r.lobe is not None else "",
                    mp.nstr(r.amplitude, r.digits) if r.amplitude is not None else "",
                ]))
        return rows


def _sweep_worker(args):
    map_json, delta, digits_override, with_lobe, policy_tuple = args
    family = MapFamily.from_json(map_json)
    policy = PrecisionPolicy(*policy_tuple)
    record = splitting_record(family, str(delta), policy=policy,
                              digits=digits_override, with_lobe=with_lobe)
    normalize_amplitude(record)
    return record


def run_sweep(family: MapFamily, plan: SweepPlan, fit_degrees: Sequence[int] = (2, 3),
              workers: int = 1) -> SweepReport:
    """Measure the splitting on the grid and fit the even asymptotic series."""
    jobs = [(family.to_json(), d, plan.digits_override, plan.with_lobe,
             (plan.policy.base_digits, plan.policy.margin, plan.policy.guard_digits))
            for d in plan.deltas]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(max_workers=workers) as pool:
            records = list(pool.map(_sweep_worker, jobs))
    else:
        records = [_sweep_worker(job) for job in jobs]
    max_digits = max(r.digits for r in records)
    with mp.workdps(max_digits):
        points = [(r.delta, r.amplitude) for r in records]
        fits = {K: fit_even_series(points, K) for K in fit_degrees
                if len(points) >= K + 2}
    return SweepReport(records=records, fits=fits, plan=plan)
