"""Closed-form Bellman candidates with gradients and Hessian forms.

Four families:

* Buckley square-difference sum:  B(x) = 8 (log x1 - x2), from g(s) = 8 log s
  in the homogeneity variable s = x1 e^{-x2}.
* Two-weight product sum (upper-bound surface):
  B(x) = 4 M sqrt(x1 x2) - x1 x2 + m^2 - 4 m M.
* Exponential bound on the BMO ball, both branches:
  B_{+-}(x) = (1 -+ R) / (1 -+ d) exp{x1 +- R -+ d},  R = sqrt(d^2 - x2 + x1^2);
  the upper branch is the sharp supremum bound, the lower branch the sharp
  infimum bound.  The super-parameter d may exceed the ball radius eps.
* Dyadic maximal operator on L^2:
  B(x; L) = 4 (x2 - x1^2) + L^2           for 0 < x1 <= L/2,
  B(x; L) = (sqrt(x2) + sqrt(x2 - L(2 x1 - L)))^2   for L/2 <= x1 <= L,
  extended C^1-smoothly by B(x; x1) for x1 >= L.

All evaluators broadcast over numpy arrays.  Public scalar entry points
check domain membership; the ``*_raw`` forms do not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np

from . import geometry
from .errors import BellmanInfiniteError, OutOfDomainError
from .geometry import BMO, Buckley, Maximal, TwoWeight

#: relative clamp for square roots of tiny rounding-induced negatives
_SQRT_CLAMP = 1e-14


def _safe_sqrt(v, scale=1.0):
    v = np.asarray(v, dtype=float)
    bad = v < -_SQRT_CLAMP * np.maximum(scale, 1.0)
    out = np.sqrt(np.where(v > 0.0, v, 0.0))
    return np.where(bad, np.nan, out)


# ---------------------------------------------------------------------------
# Buckley
# ---------------------------------------------------------------------------

def buckley_value_raw(x1, x2):
    return 8.0 * (np.log(x1) - np.asarray(x2, dtype=float))


def buckley_value(x1: float, x2: float, delta: float,
                  tol: float = geometry.TOL_CLOSED_FORM) -> float:
    dom = Buckley(delta)
    if not dom.contains((x1, x2), tol):
        raise OutOfDomainError(f"({x1}, {x2}) is not in Omega_delta, delta={delta}")
    return float(buckley_value_raw(x1, x2))


def buckley_gradient_raw(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    return 8.0 / x1, np.full_like(x1, -8.0)


def buckley_hessian_raw(x1, x2):
    x1 = np.asarray(x1, dtype=float)
    z = np.zeros_like(x1)
    return -8.0 / (x1 * x1), z, z


def buckley_augmented_matrix(x1, x2):
    """The matrix of the differential inequality: Hessian plus 8/x1^2 in (1,1).

    For g(s) = 8 log s it vanishes identically; every direction is degenerate.
    """
    h11, h12, h22 = buckley_hessian_raw(x1, x2)
    return h11 + 8.0 / (np.asarray(x1, dtype=float) ** 2), h12, h22


# ---------------------------------------------------------------------------
# Two-weight
# ---------------------------------------------------------------------------

def two_weight_value_raw(x1, x2, m, M):
    s = np.asarray(x1, dtype=float) * np.asarray(x2, dtype=float)
    return 4.0 * M * np.sqrt(s) - s + m * m - 4.0 * m * M


def two_weight_value(x1: float, x2: float, m: float, M: float,
                     tol: float = geometry.TOL_CLOSED_FORM) -> float:
    dom = TwoWeight(m, M)
    if not dom.contains((x1, x2), tol):
        raise OutOfDomainError(f"({x1}, {x2}) violates m^2 <= x1 x2 <= M^2")
    return float(two_weight_value_raw(x1, x2, m, M))


def two_weight_gradient_raw(x1, x2, m, M):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.sqrt(x1 * x2)
    return 2.0 * M * x2 / r - x2, 2.0 * M * x1 / r - x1


def two_weight_hessian_raw(x1, x2, m, M):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    r = np.sqrt(x1 * x2)
    h11 = -M * x2 * x2 / r ** 3
    h12 = M / r - 1.0
    h22 = -M * x1 * x1 / r ** 3
    return h11, h12, h22


def two_weight_sigma_matrix(x1, x2, m, M, sigma: int):
    """Hessian with the cost curvature sigma = +-1 added off-diagonal."""
    if sigma not in (1, -1):
        raise ValueError("sigma must be +1 or -1")
    h11, h12, h22 = two_weight_hessian_raw(x1, x2, m, M)
    return h11, h12 + sigma, h22


# ---------------------------------------------------------------------------
# Exponential bound on the BMO ball (John--Nirenberg)
# ---------------------------------------------------------------------------

def _jn_R(x1, x2, delta):
    return _safe_sqrt(delta * delta - np.asarray(x2, dtype=float)
                      + np.asarray(x1, dtype=float) ** 2, scale=delta * delta)


def jn_value_raw(x1, x2, delta, branch="upper"):
    x1 = np.asarray(x1, dtype=float)
    R = _jn_R(x1, x2, delta)
    if branch == "upper":
        return (1.0 - R) / (1.0 - delta) * np.exp(x1 + R - delta)
    return (1.0 + R) / (1.0 + delta) * np.exp(x1 - R + delta)


def jn_value(x1: float, x2: float, eps: float, delta: Optional[float] = None,
             branch: str = "upper", tol: float = geometry.TOL_CLOSED_FORM) -> float:
    """Value of the exponential-bound candidate at a point of Omega_eps.

    ``delta`` is the super-parameter of the surface (defaults to eps); the
    upper branch blows up as delta -> 1 and is infinite beyond.
    """
    if delta is None:
        delta = eps
    if delta < eps:
        raise ValueError("need delta >= eps")
    if branch == "upper" and delta >= 1.0:
        raise BellmanInfiniteError("upper exponential bound is infinite for delta >= 1")
    dom = BMO(eps)
    if not dom.contains((x1, x2), tol):
        raise OutOfDomainError(f"({x1}, {x2}) is not in Omega_eps, eps={eps}")
    return float(jn_value_raw(x1, x2, delta, branch))


def jn_gradient_raw(x1, x2, delta, branch="upper"):
    x1 = np.asarray(x1, dtype=float)
    R = _jn_R(x1, x2, delta)
    B = jn_value_raw(x1, x2, delta, branch)
    s = 1.0 - R if branch == "upper" else 1.0 + R
    return B * (1.0 - x1 / s), B / (2.0 * s)


def jn_hessian_raw(x1, x2, delta, branch="upper"):
    """Rank-one Hessian C * [[a^2, -a/2], [-a/2, 1/4]] with a the tangency abscissa."""
    x1 = np.asarray(x1, dtype=float)
    R = _jn_R(x1, x2, delta)
    E = np.exp(x1 + R - delta) if branch == "upper" else np.exp(x1 - R + delta)
    with np.errstate(divide="ignore", invalid="ignore"):
        if branch == "upper":
            a = x1 + R
            C = -E / (R * (1.0 - delta))
        else:
            a = x1 - R
            C = E / (R * (1.0 + delta))
        return C * a * a, -C * a / 2.0, C * 0.25


def jn_hessian_form(x1, x2, delta, branch, d1, d2):
    """The quadratic form sum B_{x_i x_j} D_i D_j in closed form.

    Degenerates exactly along the tangent-line direction (1, 2a); at R = 0
    the form is a signed infinity carrying the sign of its numerator.
    """
    x1a = np.asarray(x1, dtype=float)
    R = _jn_R(x1a, x2, delta)
    sign = -1.0 if branch == "upper" else 1.0
    a = x1a + R if branch == "upper" else x1a - R
    E = np.exp(x1a + R - delta) if branch == "upper" else np.exp(x1a - R + delta)
    pref = 1.0 - delta if branch == "upper" else 1.0 + delta
    num = (a * np.asarray(d1, dtype=float) - 0.5 * np.asarray(d2, dtype=float)) ** 2
    with np.errstate(divide="ignore", invalid="ignore"):
        out = sign * num / (R * pref) * E
    if np.ndim(out) == 0:
        out = float(out)
        if not math.isfinite(out) and num == 0.0:
            return 0.0
        if math.isinf(out):
            return math.copysign(math.inf, sign * num)
    return out


def jn_g(t, delta, branch="upper"):
    """g(t) = log G(t): the candidate is e^{x1} G(x2 - x1^2)."""
    r = _safe_sqrt(delta * delta - np.asarray(t, dtype=float), scale=delta * delta)
    if branch == "upper":
        return np.log((1.0 - r) / (1.0 - delta)) + r - delta
    return np.log((1.0 + r) / (1.0 + delta)) - r + delta


def jn_g_prime(t, delta, branch="upper"):
    r = _safe_sqrt(delta * delta - np.asarray(t, dtype=float), scale=delta * delta)
    s = 1.0 - r if branch == "upper" else 1.0 + r
    return 1.0 / (2.0 * s)


def jn_g_double_prime(t, delta, branch="upper"):
    r = _safe_sqrt(delta * delta - np.asarray(t, dtype=float), scale=delta * delta)
    if branch == "upper":
        return -1.0 / (4.0 * r * (1.0 - r) ** 2)
    return 1.0 / (4.0 * r * (1.0 + r) ** 2)


def jn_g_ode_residual(t: float, delta: float, branch: str = "upper") -> float:
    """Residual of g'' - 2 g' g'' - 2 (g')^3 = 0 from the first integral."""
    if not 0.0 < t < delta * delta:
        raise ValueError("need 0 < t < delta^2")
    gp = jn_g_prime(t, delta, branch)
    gpp = jn_g_double_prime(t, delta, branch)
    return float(gpp - 2.0 * gp * gpp - 2.0 * gp ** 3)


# ---------------------------------------------------------------------------
# Dyadic maximal operator
# ---------------------------------------------------------------------------

def maximal_value_raw(x1, x2, L, extended=False):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    L = np.asarray(L, dtype=float)
    scale = np.maximum(x2, L * L)
    q_right = _safe_sqrt(x2 - L * (2.0 * x1 - L), scale)
    q_ext = _safe_sqrt(x2 - x1 * x1, scale)
    left = 4.0 * (x2 - x1 * x1) + L * L
    right = (np.sqrt(x2) + q_right) ** 2
    ext = (np.sqrt(x2) + q_ext) ** 2
    out = np.where(x1 <= 0.5 * L, left, right)
    if extended:
        out = np.where(x1 > L, ext, out)
    return out


def maximal_value(x1: float, x2: float, L: float,
                  tol: float = geometry.TOL_CLOSED_FORM) -> float:
    dom = Maximal(L)
    if not dom.contains((x1, x2), tol):
        raise OutOfDomainError(f"({x1}, {x2}) is not in Omega_L, L={L}")
    return float(maximal_value_raw(x1, x2, L))


def maximal_value_extended(x1: float, x2: float, L: float,
                           tol: float = geometry.TOL_CLOSED_FORM) -> float:
    """C^1 extension: the fixed-L value for x1 <= L, the L = x1 value beyond."""
    if x1 <= 0 or x2 < x1 * x1 - tol:
        raise OutOfDomainError(f"({x1}, {x2}) needs x1 > 0 and x2 >= x1^2")
    return float(maximal_value_raw(x1, x2, L, extended=True))


def maximal_gradient_raw(x1, x2, L, extended=False):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    L = np.asarray(L, dtype=float)
    scale = np.maximum(x2, L * L)
    rq = _safe_sqrt(x2 - L * (2.0 * x1 - L), scale)
    re = _safe_sqrt(x2 - x1 * x1, scale)
    rx = np.sqrt(x2)
    with np.errstate(divide="ignore", invalid="ignore"):
        g1_right = -2.0 * L * (1.0 + rx / rq)
        g2_right = (rx + rq) ** 2 / (rx * rq)
        g1_ext = -2.0 * x1 * (1.0 + rx / re)
        g2_ext = (rx + re) ** 2 / (rx * re)
    g1 = np.where(x1 <= 0.5 * L, -8.0 * x1, g1_right)
    g2 = np.where(x1 <= 0.5 * L, 4.0, g2_right)
    if extended:
        g1 = np.where(x1 > L, g1_ext, g1)
        g2 = np.where(x1 > L, g2_ext, g2)
    return g1, g2


def maximal_hessian_raw(x1, x2, L, extended=False):
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    L = np.asarray(L, dtype=float)
    scale = np.maximum(x2, L * L)
    q = _safe_sqrt(x2 - L * (2.0 * x1 - L), scale)
    e = _safe_sqrt(x2 - x1 * x1, scale)
    rx = np.sqrt(x2)
    with np.errstate(divide="ignore", invalid="ignore"):
        h11_r = -2.0 * L * L * rx / q ** 3
        h12_r = L * L * (2.0 * x1 - L) / (rx * q ** 3)
        h22_r = -(L * L * (2.0 * x1 - L) ** 2) / (2.0 * x2 * rx * q ** 3)
        h11_e = -2.0 * (rx / e) ** 3 - 2.0
        h12_e = x1 ** 3 / (rx * e ** 3)
        h22_e = -(x1 ** 4) / (2.0 * x2 * rx * e ** 3)
    in_left = x1 <= 0.5 * L
    h11 = np.where(in_left, -8.0, h11_r)
    h12 = np.where(in_left, 0.0, h12_r)
    h22 = np.where(in_left, 0.0, h22_r)
    if extended:
        beyond = x1 > L
        h11 = np.where(beyond, h11_e, h11)
        h12 = np.where(beyond, h12_e, h12)
        h22 = np.where(beyond, h22_e, h22)
    return h11, h12, h22


def maximal_dL_raw(x1, x2, L):
    """Partial derivative in the exterior level L (vanishes at L = x1)."""
    x1 = np.asarray(x1, dtype=float)
    x2 = np.asarray(x2, dtype=float)
    L = np.asarray(L, dtype=float)
    q = _safe_sqrt(x2 - L * (2.0 * x1 - L), np.maximum(x2, L * L))
    with np.errstate(divide="ignore", invalid="ignore"):
        right = 2.0 * (L - x1) * (np.sqrt(x2) + q) / q
    return np.where(x1 <= 0.5 * L, 2.0 * L, right)


# ---------------------------------------------------------------------------
# Candidate surface objects
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CandidateSurface:
    """A closed-form candidate bound to its problem and parameters."""

    problem: str                      # buckley | two_weight | jn | maximal
    branch: str = "upper"             # jn only: upper (sup bound) / lower (inf bound)
    delta: Optional[float] = None     # buckley delta, or jn super-parameter
    eps: Optional[float] = None
    m: Optional[float] = None
    M: Optional[float] = None
    L: Optional[float] = None
    extended: bool = False            # maximal only: use the C^1 extension

    # -- constructors

    @classmethod
    def buckley(cls, delta: float) -> "CandidateSurface":
        return cls(problem="buckley", delta=float(delta))

    @classmethod
    def two_weight(cls, m: float, M: float) -> "CandidateSurface":
        return cls(problem="two_weight", m=float(m), M=float(M))

    @classmethod
    def jn(cls, eps: float, delta: Optional[float] = None,
           branch: str = "upper") -> "CandidateSurface":
        delta = float(eps) if delta is None else float(delta)
        if delta < eps:
            raise ValueError("need delta >= eps")
        if branch == "upper" and delta >= 1.0:
            raise BellmanInfiniteError(
                "upper exponential bound is infinite for delta >= 1")
        if branch not in ("upper", "lower"):
            raise ValueError("branch must be 'upper' or 'lower'")
        return cls(problem="jn", eps=float(eps), delta=delta, branch=branch)

    @classmethod
    def maximal(cls, L: float, extended: bool = False) -> "CandidateSurface":
        return cls(problem="maximal", L=float(L), extended=extended)

    def with_extension(self) -> "CandidateSurface":
        return replace(self, extended=True)

    # -- evaluation

    def domain(self) -> geometry.ProblemDomain:
        if self.problem == "buckley":
            return Buckley(self.delta)
        if self.problem == "two_weight":
            return TwoWeight(self.m, self.M)
        if self.problem == "jn":
            return BMO(self.eps)
        return Maximal(self.L)

    def value(self, x1, x2, L=None):
        if self.problem == "buckley":
            return buckley_value_raw(x1, x2)
        if self.problem == "two_weight":
            return two_weight_value_raw(x1, x2, self.m, self.M)
        if self.problem == "jn":
            return jn_value_raw(x1, x2, self.delta, self.branch)
        return maximal_value_raw(x1, x2, self.L if L is None else L,
                                 extended=self.extended)

    def gradient(self, x1, x2, L=None):
        if self.problem == "buckley":
            return buckley_gradient_raw(x1, x2)
        if self.problem == "two_weight":
            return two_weight_gradient_raw(x1, x2, self.m, self.M)
        if self.problem == "jn":
            return jn_gradient_raw(x1, x2, self.delta, self.branch)
        return maximal_gradient_raw(x1, x2, self.L if L is None else L,
                                    extended=self.extended)

    def hessian(self, x1, x2, L=None):
        if self.problem == "buckley":
            return buckley_hessian_raw(x1, x2)
        if self.problem == "two_weight":
            return two_weight_hessian_raw(x1, x2, self.m, self.M)
        if self.problem == "jn":
            return jn_hessian_raw(x1, x2, self.delta, self.branch)
        return maximal_hessian_raw(x1, x2, self.L if L is None else L,
                                   extended=self.extended)

    def concavity_matrix(self, x1, x2, L=None):
        """The matrix whose nonpositivity the differential inequality demands.

        Buckley gets the +8/x1^2 cost correction; the others are the Hessian
        (the two-weight surface is checked per sigma via the sigma matrices).
        """
        if self.problem == "buckley":
            return buckley_augmented_matrix(x1, x2)
        return self.hessian(x1, x2, L=L)

    def hessian_form(self, x1, x2, d1, d2, L=None):
        h11, h12, h22 = self.hessian(x1, x2, L=L)
        return h11 * d1 * d1 + 2.0 * h12 * d1 * d2 + h22 * d2 * d2

    def params(self) -> dict:
        out = {"problem": self.problem}
        for key in ("branch", "delta", "eps", "m", "M", "L", "extended"):
            val = getattr(self, key)
            if val is not None:
                out[key] = val
        return out


def gradient(surface: CandidateSurface, x1: float, x2: float, L=None) -> np.ndarray:
    g1, g2 = surface.gradient(x1, x2, L=L)
    return np.array([float(g1), float(g2)])


def hessian(surface: CandidateSurface, x1: float, x2: float, L=None) -> np.ndarray:
    h11, h12, h22 = surface.hessian(x1, x2, L=L)
    return np.array([[float(h11), float(h12)], [float(h12), float(h22)]])


def hessian_det_relative(h11, h12, h22):
    """det scaled by 1 + ||H||_F^2, so 'zero' is meaningful across sizes."""
    det = h11 * h22 - h12 * h12
    norm_sq = h11 * h11 + 2.0 * h12 * h12 + h22 * h22
    return det / (1.0 + norm_sq)


# ---------------------------------------------------------------------------
# finite-difference cross-checks
# ---------------------------------------------------------------------------

def fd_gradient(func, x1: float, x2: float, h: Optional[float] = None,
                domain: Optional[geometry.ProblemDomain] = None):
    """Central differences with step shrink when a stencil point exits the domain."""
    if h is None:
        h = 1e-5 * (1.0 + abs(x1) + abs(x2))
    out = []
    for axis in range(2):
        step = h
        for _ in range(40):
            dx = (step, 0.0) if axis == 0 else (0.0, step)
            p = (x1 + dx[0], x2 + dx[1])
            q = (x1 - dx[0], x2 - dx[1])
            if domain is None or (domain.contains(p, 1e-12) and domain.contains(q, 1e-12)):
                out.append((func(*p) - func(*q)) / (2.0 * step))
                break
            step *= 0.5
        else:
            dx = (step, 0.0) if axis == 0 else (0.0, step)
            out.append((func(x1 + dx[0], x2 + dx[1]) - func(x1, x2)) / step)
    return np.array(out)


def fd_hessian(func, x1: float, x2: float, h: Optional[float] = None):
    """9-point central-difference Hessian (caller keeps the stencil in-domain)."""
    if h is None:
        h = 1e-4 * (1.0 + abs(x1) + abs(x2))
    f = func
    h11 = (f(x1 + h, x2) - 2.0 * f(x1, x2) + f(x1 - h, x2)) / h ** 2
    h22 = (f(x1, x2 + h) - 2.0 * f(x1, x2) + f(x1, x2 - h)) / h ** 2
    h12 = (f(x1 + h, x2 + h) - f(x1 + h, x2 - h)
           - f(x1 - h, x2 + h) + f(x1 - h, x2 - h)) / (4.0 * h ** 2)
    return np.array([[h11, h12], [h12, h22]])
