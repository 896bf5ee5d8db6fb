"""Foliation machinery for degenerate-Hessian (Monge--Ampere) candidates.

A candidate solving det D^2 B = 0 is linear along the integral curves of the
Hessian-kernel field Theta, the coefficients of the affine representation
B = t0 + x1 t1 + x2 t2 are constant on each curve, and the curves are
straight lines.  This module extracts kernel directions, traces trajectories
and measures the constancy/straightness defects, produces the closed-form
extremal lines of the exponential-bound and maximal-operator candidates, and
rebuilds the exponential-bound surface from arbitrary lower-boundary data by
quadrature against the kernel e^{-|t-u|/eps}.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy import integrate

from .candidates import CandidateSurface, _safe_sqrt
from .errors import DegenerateHessianError, OutOfDomainError, QuadratureError
from .geometry import BoundaryClass

#: |det| / (1 + ||H||_F^2) above this is treated as a rank-2 Hessian
RANK_TOL = 1e-6
#: ||H||_F below this (relative to 1) is treated as the zero matrix
ZERO_TOL = 1e-10


@dataclass(frozen=True)
class FoliationLine:
    """A straight extremal line with its affine coefficients.

    ``u`` is the abscissa of the lower-boundary endpoint (u, u^2); ``a`` the
    tangency abscissa of the line on its enveloping parabola; on the line,
    t0 + x1 t1 + x2 t2 equals the candidate value.
    """

    u: float
    a: float
    direction: np.ndarray
    t0: float
    t1: float
    t2: float
    v: Optional[float] = None      # right-edge ordinate for fan lines

    def affine_value(self, x1, x2):
        return self.t0 + self.t1 * np.asarray(x1, dtype=float) \
            + self.t2 * np.asarray(x2, dtype=float)

    def x2_of_x1(self, x1):
        d1, d2 = self.direction
        if abs(d1) < 1e-300:
            raise ValueError("vertical line has no x2(x1) graph")
        return self.u * self.u + (np.asarray(x1, dtype=float) - self.u) * d2 / d1


def kernel_direction(surface: CandidateSurface, x1: float, x2: float,
                     L=None) -> np.ndarray:
    """Unit kernel vector of the candidate's concavity matrix at an interior point.

    Sign convention: positive x1-component, or positive x2-component when the
    x1-component vanishes.  Raises when the matrix is numerically zero (every
    direction degenerate) or has full rank (no degenerate direction).
    """
    h11, h12, h22 = (float(v) for v in surface.concavity_matrix(x1, x2, L=L))
    norm = math.sqrt(h11 * h11 + 2.0 * h12 * h12 + h22 * h22)
    if norm <= ZERO_TOL:
        raise DegenerateHessianError(
            "zero matrix: every direction is in the kernel "
            f"(problem={surface.problem})")
    det = h11 * h22 - h12 * h12
    if abs(det) / (1.0 + norm * norm) > RANK_TOL:
        raise DegenerateHessianError(
            f"rank 2: no kernel direction (relative det {det / (1 + norm * norm):.3e})")
    # null vector of the dominant row
    if abs(h11) >= abs(h22):
        v = np.array([-h12, h11])
    else:
        v = np.array([-h22, h12])
    v = v / np.linalg.norm(v)
    if v[0] < 0.0 or (v[0] == 0.0 and v[1] < 0.0):
        v = -v
    if abs(v[0]) < 1e-15:
        v = np.array([0.0, 1.0])
    return v


@dataclass
class TrajectoryReport:
    """Traced integral curve of the kernel field with constancy diagnostics."""

    points: np.ndarray                  # (N, 2)
    arc: np.ndarray                     # (N,) signed arc length from x0
    t_values: np.ndarray                # (N, 3) columns t0, t1, t2
    drift: np.ndarray                   # (3,) max |t_i - t_i(x0)|
    straightness: float                 # max distance to the endpoint chord
    chord_length: float
    truncated: bool
    endpoint_classes: tuple
    both_endpoints_lower: bool = field(default=False)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["s", "x1", "x2", "t0", "t1", "t2"])
            for s, (x1, x2), (t0, t1, t2) in zip(self.arc, self.points, self.t_values):
                writer.writerow([f"{v:.17g}" for v in (s, x1, x2, t0, t1, t2)])


def _coefficients(surface, x1, x2, L=None):
    B = float(surface.value(x1, x2, L=L))
    g1, g2 = surface.gradient(x1, x2, L=L)
    t1, t2 = float(g1), float(g2)
    return np.array([B - x1 * t1 - x2 * t2, t1, t2])


def _hess_norm(surface, x1, x2, L=None):
    h11, h12, h22 = (float(v) for v in surface.concavity_matrix(x1, x2, L=L))
    return math.sqrt(h11 * h11 + 2.0 * h12 * h12 + h22 * h22)


#: cosine of the largest per-step direction turn accepted while marching
_COS_MAX_TURN = math.cos(2e-4)
#: cosine of the cumulative turn relative to the march's start direction; the
#: true trajectories are straight lines, so any creeping rotation marks the
#: fold where the line touches its enveloping parabola
_COS_TOTAL_TURN = math.cos(3e-6)


def _march(surface, x0, direction, step, max_len, domain, L=None, hess_cap=None):
    """March one way along the kernel field; return points walked (excluding x0).

    Stops at the domain boundary, at the fold/singular locus of the foliation
    (cumulative turn or Hessian blow-up: the line's tangency endpoint), or
    with a truncation flag when the budget runs out / the kernel vanishes.
    """
    pts = []
    x = np.array(x0, dtype=float)
    d_start = np.array(direction, dtype=float)
    d_prev = d_start
    traveled = 0.0
    truncated = False
    h = step
    while traveled < max_len:
        try:
            d1 = kernel_direction(surface, x[0], x[1], L=L)
        except DegenerateHessianError:
            truncated = True
            break
        if float(np.dot(d1, d_prev)) < 0.0:
            d1 = -d1
        xm = x + 0.5 * h * d1
        if domain.contains((xm[0], xm[1]), 0.0):
            try:
                d2 = kernel_direction(surface, xm[0], xm[1], L=L)
                if float(np.dot(d2, d1)) < 0.0:
                    d2 = -d2
            except DegenerateHessianError:
                d2 = d1
        else:
            d2 = d1
        if float(np.dot(d2, d1)) < _COS_MAX_TURN and h > step * 1e-6:
            h *= 0.5
            continue
        x_next = x + h * d2
        if not domain.contains((x_next[0], x_next[1]), 0.0):
            if h > step * 1e-6:
                h *= 0.5
                continue
            # boundary reached at the resolution limit
            break
        if hess_cap is not None and _hess_norm(surface, x_next[0], x_next[1], L=L) > hess_cap:
            break
        # reject landing points whose field direction has visibly rotated
        # relative to the march start: they lie past the fold
        try:
            d_next = kernel_direction(surface, x_next[0], x_next[1], L=L)
        except DegenerateHessianError:
            break
        if float(np.dot(d_next, d2)) < 0.0:
            d_next = -d_next
        if float(np.dot(d_next, d_start)) < _COS_TOTAL_TURN:
            if h > step * 1e-6:
                h *= 0.5
                continue
            break
        pts.append(x_next.copy())
        traveled += h
        d_prev = d2
        x = x_next
        h = step
    else:
        truncated = True
    return pts, truncated


def trace_trajectory(surface: CandidateSurface, x0, step: Optional[float] = None,
                     max_len: Optional[float] = None, L=None) -> TrajectoryReport:
    """Integrate the kernel field through x0 in both directions to the boundary.

    Reports the drift of the affine coefficients t0, t1, t2 along the
    polyline and the maximal deviation from the endpoint chord.
    """
    domain = surface.domain()
    x0 = np.array([float(x0[0]), float(x0[1])])
    if not domain.contains((x0[0], x0[1]), 1e-12):
        raise OutOfDomainError(f"trajectory start {tuple(x0)} is outside the domain")
    scale = 1.0 + float(np.linalg.norm(x0))
    if step is None:
        step = 1e-3 * scale
    if max_len is None:
        max_len = 20.0 * scale
    d0 = kernel_direction(surface, x0[0], x0[1], L=L)
    hess_cap = 3e4 * (1.0 + _hess_norm(surface, x0[0], x0[1], L=L))
    fwd, trunc_f = _march(surface, x0, d0, step, max_len, domain, L=L, hess_cap=hess_cap)
    bwd, trunc_b = _march(surface, x0, -d0, step, max_len, domain, L=L, hess_cap=hess_cap)

    pts = list(reversed(bwd)) + [x0] + fwd
    points = np.array(pts)
    arc = np.empty(len(pts))
    origin = len(bwd)
    arc[origin] = 0.0
    for i in range(origin + 1, len(pts)):
        arc[i] = arc[i - 1] + float(np.linalg.norm(points[i] - points[i - 1]))
    for i in range(origin - 1, -1, -1):
        arc[i] = arc[i + 1] - float(np.linalg.norm(points[i + 1] - points[i]))

    t_vals = np.array([_coefficients(surface, p[0], p[1], L=L) for p in pts])
    drift = np.max(np.abs(t_vals - t_vals[origin]), axis=0)

    chord = points[-1] - points[0]
    clen = float(np.linalg.norm(chord))
    if clen > 0.0:
        rel = points - points[0]
        cross = np.abs(rel[:, 0] * chord[1] - rel[:, 1] * chord[0]) / clen
        straightness = float(np.max(cross))
    else:
        straightness = 0.0

    classes = (domain.classify_boundary(tuple(points[0]), 1e-6),
               domain.classify_boundary(tuple(points[-1]), 1e-6))
    both_lower = classes[0] == classes[1] == BoundaryClass.LOWER_PARABOLA
    return TrajectoryReport(points=points, arc=arc, t_values=t_vals, drift=drift,
                            straightness=straightness, chord_length=clen,
                            truncated=trunc_f or trunc_b,
                            endpoint_classes=classes,
                            both_endpoints_lower=both_lower)


# ---------------------------------------------------------------------------
# closed-form extremal lines
# ---------------------------------------------------------------------------

def jn_extremal_line(x1: float, x2: float, delta: float,
                     branch: str = "upper") -> FoliationLine:
    """The tangent line x2 = 2 a x1 - a^2 + delta^2 through (x1, x2).

    The line touches the parabola x2 = x1^2 + delta^2 at (a, a^2 + delta^2)
    and meets the lower parabola at (u, u^2); its affine coefficients carry
    the candidate value: t0 + x1 t1 + x2 t2 = B along the line.
    """
    disc = delta * delta - x2 + x1 * x1
    if disc < -1e-14 * max(1.0, delta * delta):
        raise OutOfDomainError("point lies above the enveloping parabola")
    R = math.sqrt(max(disc, 0.0))
    if branch == "upper":
        a = x1 + R
        u = a - delta
        c = math.exp(-delta) / (2.0 * (1.0 - delta))
    elif branch == "lower":
        a = x1 - R
        u = a + delta
        c = math.exp(delta) / (2.0 * (1.0 + delta))
    else:
        raise ValueError("branch must be 'upper' or 'lower'")
    t2 = c * math.exp(a)
    t1 = -2.0 * (a - 1.0) * t2
    t0 = (a * a - 2.0 * a + 2.0 - delta * delta) * t2
    direction = np.array([1.0, 2.0 * a]) / math.sqrt(1.0 + 4.0 * a * a)
    return FoliationLine(u=u, a=a, direction=direction, t0=t0, t1=t1, t2=t2)


def maximal_fan_line(x1: float, x2: float, L: float) -> FoliationLine:
    """The fan line through (L/2, 0) carrying the right-branch foliation.

    Defined for L/2 < x1 <= L; the line meets the lower parabola at (u, u^2)
    and the right edge at (L, v).  Coefficients: t0 = L^3/(L-u),
    t1 = -2L^2/(L-u), t2 = L^2/(u (L-u)).
    """
    if not x1 > 0.5 * L:
        raise OutOfDomainError("fan lines exist only for x1 > L/2 "
                               "(the left region is foliated by vertical lines)")
    if x1 > L + 1e-12 * max(1.0, L):
        raise OutOfDomainError("fan lines live in x1 <= L")
    if x2 < x1 * x1 - 1e-12 * max(1.0, x1 * x1):
        raise OutOfDomainError("need x2 >= x1^2")
    rx = math.sqrt(x2)
    q = float(_safe_sqrt(x2 - L * (2.0 * x1 - L), max(x2, L * L)))
    u = rx * L / (rx + q)
    v = u * u * L / (2.0 * u - L)
    t0 = L ** 3 / (L - u)
    t1 = -2.0 * L * L / (L - u)
    t2 = L * L / (u * (L - u))
    slope = 2.0 * u * u / (2.0 * u - L)
    direction = np.array([1.0, slope]) / math.sqrt(1.0 + slope * slope)
    return FoliationLine(u=u, a=L, direction=direction, t0=t0, t1=t1, t2=t2, v=v)


# ---------------------------------------------------------------------------
# boundary-value reconstruction
# ---------------------------------------------------------------------------

class BoundaryReconstruction:
    """Surface rebuilt from lower-boundary data f via the k(u) quadrature.

    Along the extremal line touching the enveloping parabola at a and meeting
    the lower boundary at u = a -+ eps, the value is linear:
    B(x) = k(u) (x1 - u) + f(u), with
    k(u) = (1/eps) * integral of e^{-|t-u|/eps} f'(t) dt toward +-infinity
    (the homogeneous constant C_+- is taken to be zero).
    """

    def __init__(self, f: Callable, fprime: Callable, eps: float,
                 sign: str = "upper", quad_tol: float = 1e-10):
        if eps <= 0.0:
            raise ValueError("need eps > 0")
        if sign not in ("upper", "lower"):
            raise ValueError("sign must be 'upper' or 'lower'")
        self.f = f
        self.fprime = fprime
        self.eps = float(eps)
        self.sign = sign
        self.quad_tol = float(quad_tol)
        self.problem = "jn_reconstruction"

    def k(self, u: float) -> float:
        orient = 1.0 if self.sign == "upper" else -1.0
        eps = self.eps

        def integrand(s):
            return math.exp(-s) * self.fprime(u + orient * eps * s)

        val, err = integrate.quad(integrand, 0.0, np.inf,
                                  epsabs=self.quad_tol, epsrel=self.quad_tol,
                                  limit=200)
        if err > 10.0 * max(self.quad_tol, self.quad_tol * abs(val)):
            raise QuadratureError(
                f"k({u}) quadrature reached only {err:.3e}", achieved=err)
        return val

    def value(self, x1: float, x2: float) -> float:
        disc = self.eps ** 2 - x2 + x1 * x1
        if disc < -1e-14 * max(1.0, self.eps ** 2):
            raise OutOfDomainError("point above the enveloping parabola")
        R = math.sqrt(max(disc, 0.0))
        if self.sign == "upper":
            u = x1 + R - self.eps
        else:
            u = x1 - R + self.eps
        return self.k(u) * (x1 - u) + self.f(u)


def reconstruct_from_boundary(f: Callable, fprime: Callable, eps: float,
                              sign: str = "upper",
                              quad_tol: float = 1e-10) -> BoundaryReconstruction:
    return BoundaryReconstruction(f, fprime, eps, sign, quad_tol)
