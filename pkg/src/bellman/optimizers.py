"""Extremal test functions and the non-dyadic splitting algorithm.

Three constructions prove (or approach) sharpness:

* ``jn_optimizer`` / ``jn_lower_optimizer``: the logarithmic extremal
  functions of the exponential bound.  Through any x of the BMO-ball domain
  runs one extremal line touching the enveloping parabola at a and meeting
  the lower boundary at (u, u^2); the optimizer concatenates the known
  boundary optimizers along that line,

      phi(t) = eps * log(c / t) + u  on [0, c],   phi = u  on [c, 1],

  with c = (x1 - u) / eps (upper branch; the lower branch mirrors with the
  opposite log sign).  Sampling is by exact cell averages, so <phi> = x1
  holds to machine precision at every depth.

* ``maximal_optimizer``: the self-similar sequence w_n for the dyadic
  maximal operator.  On (0, 2^-n) the function is the constant alpha_n L;
  the dyadic blocks (2^-k, 2^-k+1), k = 2..n, carry compressed copies of
  w_n itself, and (1/2, 1) carries a copy scaled by beta_n.  (alpha_n,
  beta_n) solve the two-moment system <w> = L, <w^2> = v; alpha_n takes
  the minus root so that alpha_n -> u/L.

* ``split_interval``: the splitting algorithm behind non-dyadic Bellman
  induction.  Try the half split; if the chord of children Bellman points
  leaves the enlarged domain, move the split point so the violating child
  slides toward the parent and stop at tangency rho(alpha) = delta^2.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from .dyadic import DyadicFunction
from .errors import BellmanInfiniteError, OutOfDomainError, SplittingError
from .geometry import TOL_DYADIC, BellmanPoint, BMO

MAX_BUILD_DEPTH = 22


# ---------------------------------------------------------------------------
# logarithmic optimizers for the exponential bound
# ---------------------------------------------------------------------------

def _jn_optimizer_params(x1: float, x2: float, eps: float, branch: str):
    disc = eps * eps - x2 + x1 * x1
    if disc < -1e-12 * max(1.0, eps * eps) or x2 < x1 * x1 - 1e-12:
        raise OutOfDomainError(f"({x1}, {x2}) is not in the eps = {eps} domain")
    R = math.sqrt(max(disc, 0.0))
    if branch == "upper":
        u = x1 + R - eps
        c = (x1 - u) / eps          # length of the logarithmic piece
    else:
        u = x1 - R + eps
        c = (u - x1) / eps
    return u, min(max(c, 0.0), 1.0)


def jn_optimizer(x1: float, x2: float, eps: float, depth: int) -> DyadicFunction:
    """The extremal function for the supremum problem, by exact cell averages.

    Its Bellman point converges to (x1, x2) as depth grows (the mean is exact
    at every depth), its BMO norm does not exceed eps, and <e^phi> increases
    to the sharp value.
    """
    if eps >= 1.0:
        raise BellmanInfiniteError("no summable optimizer for eps >= 1")
    u, c = _jn_optimizer_params(x1, x2, eps, "upper")

    def F(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            head = t * (u + eps + eps * np.log(c / t))
        head = np.where(t <= 0.0, 0.0, head)
        tail = c * (u + eps) + u * (t - c)
        return np.where(t < c, head, tail)

    return DyadicFunction.from_antiderivative(F, depth)


def jn_lower_optimizer(x1: float, x2: float, eps: float, depth: int) -> DyadicFunction:
    """The extremal function for the infimum problem (mirrored log sign)."""
    u, c = _jn_optimizer_params(x1, x2, eps, "lower")

    def F(t):
        t = np.asarray(t, dtype=float)
        with np.errstate(divide="ignore", invalid="ignore"):
            head = t * (u - eps + eps * np.log(t / c))
        head = np.where(t <= 0.0, 0.0, head)
        tail = c * (u - eps) + u * (t - c)
        return np.where(t < c, head, tail)

    return DyadicFunction.from_antiderivative(F, depth)


# ---------------------------------------------------------------------------
# maximal-operator optimizer sequence
# ---------------------------------------------------------------------------

def maximal_alpha(L: float, v: float, n: int, root: str = "minus") -> float:
    """alpha_n of the moment system; the minus root tends to u/L."""
    if v < L * L:
        raise ValueError("need v >= L^2")
    q = 2.0 ** (1 - n)
    c = L * L / v
    s = math.sqrt((1.0 + q) * (1.0 - c))
    if root == "minus":
        return (1.0 + q - s) / (c + q)
    if root == "plus":
        return (1.0 + q + s) / (c + q)
    raise ValueError("root must be 'minus' or 'plus'")


def maximal_beta(L: float, v: float, n: int) -> float:
    return 1.0 + 2.0 ** (1 - n) * (1.0 - maximal_alpha(L, v, n))


def maximal_alpha_limit(L: float, v: float) -> float:
    """u / L, the first coordinate of the lower intersection over L."""
    c = L * L / v
    return (1.0 - math.sqrt(1.0 - c)) / c


@dataclass
class MaximalOptimizer:
    """Stabilized w_n at finite depth, with the exact moment completion."""

    L: float
    v: float
    n: int
    alpha_n: float
    beta_n: float
    w: DyadicFunction
    depth: int
    resolved_measure: float
    fill_tol: float
    mean: float
    mean_sq: float
    objective: float                 # v / alpha_n^2 (closed form)

    def maximal_mean_sq(self) -> float:
        """<(Mw)^2> of the constructed function (measured, not closed form)."""
        return float(np.mean(self.w.dyadic_maximal(self.L).values ** 2))

    def resolved_mask_leaf(self) -> np.ndarray:
        span = 1 << (self.depth - self._structure_depth)
        return np.repeat(self._resolved_structure, span)

    def to_json_dict(self) -> dict:
        return {
            "L": self.L, "v": self.v, "n": self.n,
            "alpha_n": self.alpha_n, "beta_n": self.beta_n,
            "depth": self.depth, "resolved_measure": self.resolved_measure,
            "moments": {"mean": self.mean, "mean_sq": self.mean_sq},
            "objective": self.objective,
        }


def maximal_optimizer(L: float, v: float, n: int, fill_tol: float = 1e-3,
                      root: str = "minus", max_depth: int = MAX_BUILD_DEPTH
                      ) -> MaximalOptimizer:
    """Construct the stabilized w_n on [0, 1] at finite dyadic depth.

    The self-similar orbit of each cell is resolved exactly wherever its
    address reaches the constant region within the depth budget (there the
    function is a genuine constant alpha_n L beta_n^j).  Cells whose orbit
    does not resolve get a two-value completion preserving the cell's exact
    first and second moments, so <w> = L and <w^2> = v hold to rounding;
    the cellwise relation M w = w / alpha_n is exact on resolved cells and
    is not asserted on completed ones.
    """
    if not v > L * L:
        raise ValueError("need v > L^2 strictly (v = L^2 is the constant case)")
    if n < 2:
        raise ValueError("need n >= 2")
    if root != "minus":
        raise ValueError("the plus root does not converge to u/L; use root='minus'")
    if L <= 0:
        raise ValueError("need L > 0")

    alpha = maximal_alpha(L, v, n)
    beta = maximal_beta(L, v, n)

    # moments of w_n restricted to [0, 2^-z) (a pending run of z zeros):
    # the beta block sits outside for z >= 1, so only plain copies contribute
    def m1(z):
        return L if z == 0 else L * (1.0 - 2.0 ** (z - n) * (1.0 - alpha))

    def m2(z):
        return v if z == 0 else v - 2.0 ** (z - n) * (v - alpha * alpha * L * L)

    # completion block of S = 2^K cells (one at a, S-1 at b >= 0) matching a
    # cell's exact first and second moments; S must cover the worst m2/m1^2
    S_min = max(m2(z) / m1(z) ** 2 for z in range(n))
    K = max(1, math.ceil(math.log2(S_min))) if S_min > 2.0 else 1
    depth = n + max(2, math.ceil(math.log2(1.0 / fill_tol)))
    depth = min(depth, max_depth)
    ds = depth - K
    if ds < n:
        raise ValueError(
            f"depth budget {depth} cannot resolve the construction (need {n + K})")

    # orbit scan over structure-cell addresses: blocks of z zeros then a 1
    # multiply by beta iff z = 0; a run of n zeros lands in the constant region
    j = np.arange(1 << ds, dtype=np.int64)
    zrun = np.zeros(j.shape, dtype=np.int16)
    bcount = np.zeros(j.shape, dtype=np.int16)
    resolved = np.zeros(j.shape, dtype=bool)
    for p in range(ds):
        bit = (j >> (ds - 1 - p)) & 1
        active = ~resolved
        ones = active & (bit == 1)
        bcount[ones & (zrun == 0)] += 1
        zrun[ones] = 0
        zeros = active & (bit == 0)
        zrun[zeros] += 1
        resolved |= zrun >= n

    mult = np.power(float(beta), bcount.astype(float))
    S = 1 << K
    m1_by_z = np.array([m1(z) for z in range(n)])
    m2_by_z = np.array([m2(z) for z in range(n)])
    block = np.empty((1 << ds, S))
    block[:, :] = (mult * alpha * L)[:, None]
    unres = ~resolved
    z = zrun[unres].astype(int)
    mu = mult[unres]
    mean_c = mu * m1_by_z[z]
    var_c = mu * mu * np.maximum(m2_by_z[z] - m1_by_z[z] ** 2, 0.0)
    spread = np.sqrt(var_c / (S - 1))
    block[unres, 0] = mean_c + (S - 1) * spread
    block[unres, 1:] = (mean_c - spread)[:, None]
    values = block.reshape(-1)

    w = DyadicFunction(0.0, 1.0, values)
    mean = float(np.mean(values))
    mean_sq = float(np.mean(values ** 2))
    opt = MaximalOptimizer(
        L=L, v=v, n=n, alpha_n=alpha, beta_n=beta, w=w, depth=depth,
        resolved_measure=float(np.mean(resolved)), fill_tol=fill_tol,
        mean=mean, mean_sq=mean_sq, objective=v / alpha ** 2)
    opt._structure_depth = ds
    opt._resolved_structure = resolved
    return opt


# ---------------------------------------------------------------------------
# splitting algorithm
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SplitDecision:
    """Outcome of the chord-splitting search on one subinterval."""

    alpha_plus: float
    x_minus: BellmanPoint
    x_plus: BellmanPoint
    rho_at_stop: float
    stopped_by: str                  # Accept_at_half | Tangency | NotFound
    cut: float                       # absolute coordinate of the split point
    diagnostics: Optional[str] = None


def _chord_t_max(xm, xp, lo: float = 0.0, hi: float = 1.0):
    """Max of x2 - x1^2 on the chord segment theta in [lo, hi]; returns (max, argmax)."""
    d1 = xp[0] - xm[0]
    d2 = xp[1] - xm[1]
    c0 = xm[1] - xm[0] * xm[0]
    c1 = d2 - 2.0 * xm[0] * d1
    c2 = -d1 * d1
    cands = [(c0 + c1 * lo + c2 * lo * lo, lo), (c0 + c1 * hi + c2 * hi * hi, hi)]
    if c2 < 0.0:
        ts = -c1 / (2.0 * c2)
        if lo < ts < hi:
            cands.append((c0 + c1 * ts + c2 * ts * ts, ts))
    return max(cands)


def split_interval(f: DyadicFunction, sub: Tuple[float, float], eps: float,
                   delta: float, root_tol: float = 1e-10,
                   tol: float = TOL_DYADIC) -> SplitDecision:
    """Choose the split proportion so the children's chord stays in the
    enlarged domain.

    Start at alpha = 1/2; if the chord max of x2 - x1^2 exceeds delta^2,
    slide the split so the violating child approaches the parent point and
    bisect on the stopping equation rho(alpha) = delta^2 (rho is continuous
    and falls below eps^2 < delta^2 as the child collapses).
    """
    if not eps < delta:
        raise ValueError("need eps < delta")
    p, q = float(sub[0]), float(sub[1])
    m0, s0 = f.window_stats(p, q)
    t0 = s0 - m0 * m0
    if t0 > eps * eps + tol:
        raise SplittingError(
            f"window variance {t0:.3e} exceeds eps^2 = {eps * eps:.3e}")

    def children(alpha_plus: float):
        cut = p + (1.0 - alpha_plus) * (q - p)
        xm = f.window_stats(p, cut)
        xp = f.window_stats(cut, q)
        return cut, xm, xp

    dd = delta * delta
    cut, xm, xp = children(0.5)
    rho_half, theta_star = _chord_t_max(xm, xp)
    if rho_half <= dd:
        return SplitDecision(alpha_plus=0.5,
                             x_minus=BellmanPoint(*xm), x_plus=BellmanPoint(*xp),
                             rho_at_stop=rho_half, stopped_by="Accept_at_half",
                             cut=cut)

    # which child's side of the chord carries the violation (theta of the
    # parent point is alpha_plus)
    xi_is_plus = theta_star > 0.5

    def rho_side(alpha_plus: float):
        cut, xm, xp = children(alpha_plus)
        if xi_is_plus:
            val, _ = _chord_t_max(xm, xp, lo=alpha_plus, hi=1.0)
        else:
            val, _ = _chord_t_max(xm, xp, lo=0.0, hi=alpha_plus)
        return val, cut, xm, xp

    lo, hi = (0.5, 1.0) if xi_is_plus else (0.0, 0.5)
    # rho > delta^2 at alpha = 1/2; rho -> t(x0) <= eps^2 as xi collapses
    a, b = (lo, hi) if xi_is_plus else (hi, lo)   # rho(a) > dd, rho(b) < dd
    best = None
    for _ in range(200):
        mid = 0.5 * (a + b)
        val, cut, xm, xp = rho_side(mid)
        best = (mid, val, cut, xm, xp)
        if abs(val - dd) <= root_tol:
            break
        if val > dd:
            a = mid
        else:
            b = mid
        if abs(b - a) < 1e-16:
            break

    alpha_star, rho_star, cut, xm, xp = best
    if abs(rho_star - dd) > max(root_tol, 1e-9):
        return SplitDecision(alpha_plus=alpha_star,
                             x_minus=BellmanPoint(*xm), x_plus=BellmanPoint(*xp),
                             rho_at_stop=rho_star, stopped_by="NotFound", cut=cut,
                             diagnostics=f"bisection stalled at rho = {rho_star!r}")
    full, _ = _chord_t_max(xm, xp)
    if full > dd + 10.0 * max(root_tol, 1e-9):
        return SplitDecision(alpha_plus=alpha_star,
                             x_minus=BellmanPoint(*xm), x_plus=BellmanPoint(*xp),
                             rho_at_stop=rho_star, stopped_by="NotFound", cut=cut,
                             diagnostics=f"non-tracked side violates: {full!r}")
    return SplitDecision(alpha_plus=alpha_star,
                         x_minus=BellmanPoint(*xm), x_plus=BellmanPoint(*xp),
                         rho_at_stop=rho_star, stopped_by="Tangency", cut=cut)


def separation_bound(eps: float, delta: float) -> float:
    """Lower bound sqrt(1 - (eps/delta)^2) on min(alpha_+-) at tangency stops."""
    return math.sqrt(max(0.0, 1.0 - (eps / delta) ** 2))
