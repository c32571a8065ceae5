"""Boundary classification for power-law rates ``gamma_i(x) = b_i x**r_i``.

Each classifier evaluates the sufficient-condition lists for one boundary
behavior and returns a verdict together with the labels of the conditions
that fired.  Parameter points where no list applies (critical equalities)
come back as ``Indeterminate``.

Label scheme: the prefix names the list (``ext``, ``nonext``, ``exp``,
``nonexp``, ``cdi``, ``stay``), the first group names the case (``i`` for
``b0 <= 0``, ``ii`` for ``b0 > 0``), the second the item inside the case.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np

from .analytics import DEFAULT_QUAD, QuadratureConfig, g_a, gamma
from .exceptions import ParameterError
from .model import BranchingModel, PowerLawRates

__all__ = [
    "Verdict",
    "Tolerances",
    "BoundaryReport",
    "GaAsymptoticsProbe",
    "classify_extinction",
    "classify_explosion",
    "classify_cdi",
    "classify_all",
    "probe_ga_asymptotics",
]


class Verdict(str, enum.Enum):
    ALMOST_SURE = "AlmostSure"
    POSITIVE_PROBABILITY = "PositiveProbability"
    NEVER = "Never"
    INDETERMINATE = "Indeterminate"

    def __str__(self) -> str:
        return self.value


# Names used for the coming-down verdict in reports.
CDI_NAMES = {
    Verdict.ALMOST_SURE: "ComesDown",
    Verdict.NEVER: "StaysInfinite",
    Verdict.INDETERMINATE: "Indeterminate",
}


@dataclass(frozen=True)
class Tolerances:
    """Equality tolerances: absolute for exponents, relative for coefficients."""

    exponent_abs: float = 1e-12
    coefficient_rel: float = 1e-12


DEFAULT_TOL = Tolerances()


class _Cmp:
    """Tolerance-aware comparisons; ``lt``/``gt`` are strict outside the band."""

    def __init__(self, tol: Tolerances):
        self.tol = tol

    def eq_r(self, x: float, y: float) -> bool:
        return abs(x - y) <= self.tol.exponent_abs

    def lt_r(self, x: float, y: float) -> bool:
        return x < y - self.tol.exponent_abs

    def gt_r(self, x: float, y: float) -> bool:
        return x > y + self.tol.exponent_abs

    def _band(self, x: float, y: float) -> float:
        return self.tol.coefficient_rel * max(abs(x), abs(y), 1e-300)

    def eq_b(self, x: float, y: float) -> bool:
        return abs(x - y) <= self._band(x, y)

    def lt_b(self, x: float, y: float) -> bool:
        return x < y - self._band(x, y)

    def gt_b(self, x: float, y: float) -> bool:
        return x > y + self._band(x, y)


def _unpack(rates: PowerLawRates, alpha: float):
    if not isinstance(rates, PowerLawRates):
        raise ParameterError("decision tables need power-law rates")
    if not 1.0 < alpha < 2.0:
        raise ParameterError(f"alpha must lie in (1, 2), got {alpha}")
    return rates.as_tuple()


def _threshold(b1, r1, b2, r2, r0, alpha, c: _Cmp, side) -> float:
    """``b1/2 1{r1 = r0+1 side} + Gamma(alpha) b2 1{r2 = r0+alpha-1 side}``.

    ``side(v, bound)`` is the extra comparison on the critical exponent
    (``< 2``, ``> 2``, or none) that each list attaches to its indicator.
    """
    t = 0.0
    if b1 > 0 and c.eq_r(r1, r0 + 1.0) and side(r1, 2.0):
        t += 0.5 * b1
    if b2 > 0 and c.eq_r(r2, r0 + alpha - 1.0) and side(r2, alpha):
        t += gamma(alpha) * b2
    return t


def classify_extinction(rates: PowerLawRates, alpha: float, tol: Tolerances = DEFAULT_TOL):
    """Return ``(verdict, extinguishing, citations)`` for hitting zero."""
    b0, r0, b1, r1, b2, r2 = _unpack(rates, alpha)
    c = _Cmp(tol)

    if b0 <= 0:
        hits = []
        if b0 < 0 and c.lt_r(r0, 1.0):
            hits.append("ext-(i)(ia)")
        if b1 > 0 and c.lt_r(r1, 2.0):
            hits.append("ext-(i)(ib)")
        if b2 > 0 and c.lt_r(r2, alpha):
            hits.append("ext-(i)(ic)")
        if hits:
            return Verdict.ALMOST_SURE, False, hits
        # no item fired, so every active rate is at least critical
        return Verdict.NEVER, True, ["nonext-(i)"]

    lim1 = min(r0 + 1.0, 2.0)
    lim2 = min(r0 + alpha - 1.0, alpha)
    thr = _threshold(b1, r1, b2, r2, r0, alpha, c, lambda v, bound: c.lt_r(v, bound))
    hits = []
    if b1 > 0 and c.lt_r(r1, lim1):
        hits.append("ext-(ii)(iia)")
    if b2 > 0 and c.lt_r(r2, lim2):
        hits.append("ext-(ii)(iib)")
    if c.lt_b(b0, thr):
        hits.append("ext-(ii)(iic)")
    if hits:
        return Verdict.POSITIVE_PROBABILITY, False, hits
    if (b1 == 0 or not c.lt_r(r1, lim1)) and (b2 == 0 or not c.lt_r(r2, lim2)) and c.gt_b(b0, thr):
        return Verdict.NEVER, False, ["nonext-(ii)"]
    return Verdict.INDETERMINATE, False, []


def classify_explosion(rates: PowerLawRates, alpha: float, tol: Tolerances = DEFAULT_TOL):
    """Return ``(verdict, citations)``; ``AlmostSure`` is never produced."""
    b0, r0, b1, r1, b2, r2 = _unpack(rates, alpha)
    c = _Cmp(tol)

    if b0 <= 0:
        return Verdict.NEVER, ["nonexp-(b0<=0)"]
    if not c.gt_r(r0, 1.0):
        return Verdict.NEVER, ["nonexp-(i)"]

    thr = _threshold(b1, r1, b2, r2, r0, alpha, c, lambda v, bound: True)
    hits = []
    if b1 > 0 and c.gt_r(r1, r0 + 1.0):
        hits.append("nonexp-(ii)(iia)")
    if b2 > 0 and c.gt_r(r2, r0 + alpha - 1.0):
        hits.append("nonexp-(ii)(iib)")
    if c.lt_b(b0, thr):
        hits.append("nonexp-(ii)(iic)")
    if hits:
        return Verdict.NEVER, hits
    if c.gt_b(b0, thr):
        return Verdict.POSITIVE_PROBABILITY, ["exp-(i)(ii)(iii)"]
    return Verdict.INDETERMINATE, []


def classify_cdi(rates: PowerLawRates, alpha: float, tol: Tolerances = DEFAULT_TOL):
    """Return ``(verdict, citations)``: ``AlmostSure`` means comes down, ``Never`` stays infinite."""
    b0, r0, b1, r1, b2, r2 = _unpack(rates, alpha)
    c = _Cmp(tol)

    if b0 <= 0:
        hits = []
        if b0 < 0 and c.gt_r(r0, 1.0):
            hits.append("cdi-(i)(ia)")
        if b1 > 0 and c.gt_r(r1, 2.0):
            hits.append("cdi-(i)(ib)")
        if b2 > 0 and c.gt_r(r2, alpha):
            hits.append("cdi-(i)(ic)")
        if hits:
            return Verdict.ALMOST_SURE, hits
        # no item strictly supercritical, so every active rate is at most critical
        return Verdict.NEVER, ["stay-(i)"]

    lim1 = max(r0 + 1.0, 2.0)
    lim2 = max(r0 + alpha - 1.0, alpha)
    thr = _threshold(b1, r1, b2, r2, r0, alpha, c, lambda v, bound: c.gt_r(v, bound))
    hits = []
    if b1 > 0 and c.gt_r(r1, lim1):
        hits.append("cdi-(ii)(iia)")
    if b2 > 0 and c.gt_r(r2, lim2):
        hits.append("cdi-(ii)(iib)")
    if c.lt_b(b0, thr):
        hits.append("cdi-(ii)(iic)")
    if hits:
        return Verdict.ALMOST_SURE, hits
    if c.gt_b(b0, thr):
        return Verdict.NEVER, ["stay-(ii)"]
    return Verdict.INDETERMINATE, []


@dataclass(frozen=True)
class BoundaryReport:
    extinction: Verdict
    extinguishing: bool
    explosion: Verdict
    comes_down: Verdict
    citations: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "extinction": self.extinction.value,
            "extinguishing": self.extinguishing,
            "explosion": self.explosion.value,
            "comes_down": CDI_NAMES[self.comes_down],
            "citations": list(self.citations),
        }


def classify_all(rates: PowerLawRates, alpha: float, tol: Tolerances = DEFAULT_TOL) -> BoundaryReport:
    ext, extinguishing, c1 = classify_extinction(rates, alpha, tol)
    exp_, c2 = classify_explosion(rates, alpha, tol)
    cdi, c3 = classify_cdi(rates, alpha, tol)
    return BoundaryReport(ext, extinguishing, exp_, cdi, c1 + c2 + c3)


@dataclass(frozen=True)
class GaAsymptoticsProbe:
    side: str
    a: float
    r: float
    grid: np.ndarray
    satisfied: bool
    worst_margin: float


def probe_ga_asymptotics(
    model: BranchingModel,
    side: str,
    a: float,
    r: float,
    u_grid=None,
    quad: QuadratureConfig = DEFAULT_QUAD,
) -> GaAsymptoticsProbe:
    """Pointwise check of ``G_a(u) >= -(ln 1/u)**r`` (near zero) or ``>= (ln u)**r`` (near infinity).

    ``r > 1`` tests the upper-bound direction ``G_a >= +(ln)**r``, so the
    signs follow the boundary being probed: near zero the growth bound is
    ``-(ln 1/u)**r`` for ``r <= 1`` and ``+(ln 1/u)**r`` for ``r > 1``;
    near infinity ``+(ln u)**r`` for ``r > 1`` and ``-(ln u)**r`` otherwise.
    """
    if side not in ("near_zero", "near_infinity"):
        raise ParameterError("side must be 'near_zero' or 'near_infinity'")
    if u_grid is None:
        u_grid = np.logspace(-12, -3, 40) if side == "near_zero" else np.logspace(3, 12, 40)
    grid = np.asarray(u_grid, dtype=float)
    if grid.ndim != 1 or grid.size < 10 or np.any(np.diff(grid) <= 0):
        raise ParameterError("u_grid must be strictly increasing with at least 10 points")
    if side == "near_zero" and not (grid[0] > 0 and grid[-1] < math.exp(-1.0)):
        raise ParameterError("near_zero grid must lie in (0, 1/e)")
    if side == "near_infinity" and not grid[0] > math.e:
        raise ParameterError("near_infinity grid must lie in (e, inf)")
    logs = np.log(1.0 / grid) if side == "near_zero" else np.log(grid)
    sign = 1.0 if r > 1.0 else -1.0
    bound = sign * logs ** r
    values = np.array([g_a(model, float(u), a, quad).value for u in grid])
    margins = values - bound
    worst = float(margins.min())
    return GaAsymptoticsProbe(side, float(a), float(r), grid, bool(worst >= 0.0), worst)
