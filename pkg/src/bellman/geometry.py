"""Problem domains of the four sharp-constant problems.

Each domain is a parameterized region in the (x1, x2) plane of interval
averages:

* ``Buckley(delta)``   -- log(x1/delta) <= x2 <= log x1, x1 > 0
* ``BMO(eps)``         -- x1^2 <= x2 <= x1^2 + eps^2
* ``TwoWeight(m, M)``  -- m^2 <= x1*x2 <= M^2, x1, x2 >= 0
* ``Maximal(L)``       -- 0 < x1 <= L, x1^2 <= x2

Membership tests take an explicit additive tolerance; boundary
classification returns one tag per point with the same tolerance band.
Segment containment reports the worst constraint excess along the chord,
computed exactly where the constraint is quadratic in the chord parameter
and by dense sampling otherwise.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Optional

from .errors import MissingParameterError

#: default tolerance for points given in closed form
TOL_CLOSED_FORM = 1e-12
#: default tolerance for points produced by dyadic averaging
TOL_DYADIC = 1e-9


@dataclass(frozen=True)
class BellmanPoint:
    """A point x = (x1, x2), optionally carrying the external parameter L."""

    x1: float
    x2: float
    L: Optional[float] = None

    def as_tuple(self):
        return (self.x1, self.x2)


class BoundaryClass(Enum):
    LOWER_PARABOLA = "LowerParabola"
    UPPER_PARABOLA = "UpperParabola"
    RIGHT_EDGE = "RightEdge"
    LOWER_HYPERBOLA = "LowerHyperbola"
    UPPER_HYPERBOLA = "UpperHyperbola"
    JENSEN_EDGE = "JensenEdge"
    AINF_EDGE = "AinfEdge"
    INTERIOR = "Interior"
    OUTSIDE = "Outside"


def _as_point(x) -> BellmanPoint:
    if isinstance(x, BellmanPoint):
        return x
    if len(x) == 3:
        return BellmanPoint(float(x[0]), float(x[1]), float(x[2]))
    return BellmanPoint(float(x[0]), float(x[1]))


class ProblemDomain:
    """Base class: a domain is a list of constraints g_i(x) <= 0."""

    kind = "abstract"

    def constraints(self, x: BellmanPoint):
        """Return [(name, value)] with value <= 0 meaning satisfied."""
        raise NotImplementedError

    def defect(self, x) -> float:
        """Largest constraint value at x (<= 0 iff the point is inside)."""
        return max(v for _, v in self.constraints(_as_point(x)))

    def contains(self, x, tol: float = TOL_CLOSED_FORM) -> bool:
        if tol < 0:
            raise ValueError("tolerance must be nonnegative")
        try:
            return self.defect(x) <= tol
        except ValueError:
            return False

    def classify_boundary(self, x, tol: float = TOL_CLOSED_FORM) -> BoundaryClass:
        x = _as_point(x)
        if not self.contains(x, tol):
            return BoundaryClass.OUTSIDE
        tags = {m.value for m in BoundaryClass}
        for name, value in self.constraints(x):
            if name in tags and abs(value) <= tol:
                return BoundaryClass(name)
        return BoundaryClass.INTERIOR

    # -- segment containment ------------------------------------------------

    def _chord_excess(self, a: BellmanPoint, b: BellmanPoint, samples: int) -> float:
        """Max over theta in [0,1] of the largest constraint along the chord.

        Default: dense sampling.  Subclasses override with exact chord
        extrema where every constraint is quadratic in theta.
        """
        worst = -math.inf
        for i in range(samples):
            th = i / (samples - 1)
            p = BellmanPoint(a.x1 + th * (b.x1 - a.x1), a.x2 + th * (b.x2 - a.x2),
                             a.L if a.L is not None else b.L)
            try:
                worst = max(worst, self.defect(p))
            except ValueError:
                worst = math.inf
        return worst

    def segment_in_domain(self, a, b, samples: int = 64, tol: float = TOL_CLOSED_FORM):
        """Whether the whole chord [a, b] lies in the domain.

        Returns ``(inside, excess)`` where ``excess`` is the maximal
        violated-constraint value along the segment (<= 0 means contained).
        """
        if samples < 2:
            raise ValueError("samples must be >= 2")
        a, b = _as_point(a), _as_point(b)
        excess = self._chord_excess(a, b, samples)
        return excess <= tol, excess


def _quad_max(c0: float, c1: float, c2: float) -> float:
    """Max of c0 + c1*t + c2*t^2 over t in [0, 1]."""
    best = max(c0, c0 + c1 + c2)
    if c2 < 0.0:
        t = -c1 / (2.0 * c2)
        if 0.0 < t < 1.0:
            best = max(best, c0 + c1 * t + c2 * t * t)
    return best


@dataclass(frozen=True)
class Buckley(ProblemDomain):
    """Omega_delta = {log(x1/delta) <= x2 <= log x1}."""

    delta: float
    kind = "buckley"

    def __post_init__(self):
        if not self.delta > 1.0:
            raise ValueError("Buckley domain needs delta > 1")

    def constraints(self, x: BellmanPoint):
        if x.x1 <= 0.0:
            return [(BoundaryClass.JENSEN_EDGE.value, math.inf),
                    (BoundaryClass.AINF_EDGE.value, math.inf)]
        lx = math.log(x.x1)
        return [
            (BoundaryClass.JENSEN_EDGE.value, x.x2 - lx),
            (BoundaryClass.AINF_EDGE.value, lx - math.log(self.delta) - x.x2),
        ]


@dataclass(frozen=True)
class BMO(ProblemDomain):
    """Omega_eps = {x1^2 <= x2 <= x1^2 + eps^2}."""

    eps: float
    kind = "bmo"

    def __post_init__(self):
        if not self.eps > 0.0:
            raise ValueError("BMO domain needs eps > 0")

    def constraints(self, x: BellmanPoint):
        return [
            (BoundaryClass.LOWER_PARABOLA.value, x.x1 * x.x1 - x.x2),
            (BoundaryClass.UPPER_PARABOLA.value, x.x2 - x.x1 * x.x1 - self.eps * self.eps),
        ]

    def _chord_excess(self, a, b, samples):
        # both constraints are quadratic along the chord: exact extrema
        d1, d2 = b.x1 - a.x1, b.x2 - a.x2
        # x2 - x1^2 - eps^2:  c2 = -d1^2 (concave), interior max possible
        upper = _quad_max(a.x2 - a.x1 * a.x1 - self.eps * self.eps,
                          d2 - 2.0 * a.x1 * d1, -d1 * d1)
        # x1^2 - x2: convex in theta, max at the endpoints
        lower = max(a.x1 * a.x1 - a.x2, b.x1 * b.x1 - b.x2)
        return max(upper, lower)


@dataclass(frozen=True)
class TwoWeight(ProblemDomain):
    """Omega = {m^2 <= x1*x2 <= M^2, x1 >= 0, x2 >= 0}."""

    m: float
    M: float
    kind = "two_weight"

    def __post_init__(self):
        if self.m < 0.0 or not self.M > self.m:
            raise ValueError("TwoWeight domain needs 0 <= m < M")

    def constraints(self, x: BellmanPoint):
        s = x.x1 * x.x2
        return [
            (BoundaryClass.LOWER_HYPERBOLA.value, self.m * self.m - s),
            (BoundaryClass.UPPER_HYPERBOLA.value, s - self.M * self.M),
            ("x1_nonneg", -x.x1),
            ("x2_nonneg", -x.x2),
        ]

    def _chord_excess(self, a, b, samples):
        d1, d2 = b.x1 - a.x1, b.x2 - a.x2
        s0 = a.x1 * a.x2
        c1 = a.x1 * d2 + a.x2 * d1
        c2 = d1 * d2
        upper = _quad_max(s0 - self.M * self.M, c1, c2)
        lower = _quad_max(self.m * self.m - s0, -c1, -c2)
        sign = max(-min(a.x1, b.x1), -min(a.x2, b.x2))
        return max(upper, lower, sign)


@dataclass(frozen=True)
class Maximal(ProblemDomain):
    """Omega_L = {0 < x1 <= L, x1^2 <= x2}; L may come from the point."""

    L: Optional[float] = None
    kind = "maximal"

    def _L_for(self, x: BellmanPoint) -> float:
        L = x.L if x.L is not None else self.L
        if L is None:
            raise MissingParameterError(
                "maximal-operator membership needs an L parameter "
                "(neither the domain nor the point carries one)")
        return L

    def constraints(self, x: BellmanPoint):
        L = self._L_for(x)
        return [
            (BoundaryClass.LOWER_PARABOLA.value, x.x1 * x.x1 - x.x2),
            (BoundaryClass.RIGHT_EDGE.value, x.x1 - L),
            ("x1_positive", -x.x1),
        ]

    def _chord_excess(self, a, b, samples):
        L = self._L_for(a if a.L is not None else b)
        lower = _quad_max(a.x1 * a.x1 - a.x2,
                          2.0 * a.x1 * (b.x1 - a.x1) - (b.x2 - a.x2),
                          (b.x1 - a.x1) ** 2)
        right = max(a.x1 - L, b.x1 - L)
        positive = max(-a.x1, -b.x1)
        return max(lower, right, positive)


def contains(domain: ProblemDomain, x, tol: float = TOL_CLOSED_FORM) -> bool:
    return domain.contains(x, tol)


def classify_boundary(domain: ProblemDomain, x, tol: float = TOL_CLOSED_FORM) -> BoundaryClass:
    return domain.classify_boundary(x, tol)


def segment_in_domain(domain: ProblemDomain, a, b, samples: int = 64,
                      tol: float = TOL_CLOSED_FORM):
    return domain.segment_in_domain(a, b, samples, tol)
