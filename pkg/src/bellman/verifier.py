"""Inequality scans, Bellman induction on trees, and a value-iteration oracle.

Three independent ways to interrogate a candidate surface:

* ``main_inequality_scan`` draws random admissible triples (x, x+, x-) with
  x the midpoint and checks B(x) >= (B(x+) + B(x-))/2 + cost; for the
  maximal operator the exterior level updates as L+- = max(x1+-, L) and the
  surface extends C^1-smoothly past x1 = L.

* ``bellman_induction`` telescopes the main inequality down the dyadic tree
  of an actual test function, checking that the per-generation totals
  (value on the frontier plus accumulated cost) never increase, and that
  the root value dominates the objective the telescoping produces.

* ``dp_solve`` runs midpoint value iteration on a grid: starting from the
  boundary data, B <- max(B, (B(x+D) + B(x-D))/2 + cost) over a split set
  of grid offsets.  The fixed point is a grid lower bound for the extremal
  value (every split tree is realized by a test function), so candidates
  must dominate it and sharp candidates must nearly meet it.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple

import numpy as np

from . import candidates as cand
from .candidates import CandidateSurface
from .dyadic import DyadicFunction, two_weight_sum
from .errors import NonConvergenceError, SplittingError
from .geometry import BMO, BellmanPoint
from .optimizers import SplitDecision, separation_bound, split_interval

#: relative slack for all inequality checks: slack = RELATIVE_SLACK * (1 + |B|)
RELATIVE_SLACK = 1e-9


# ---------------------------------------------------------------------------
# cost functionals
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class CostFunctional:
    """The additive term of the main inequality."""

    kind: str    # zero | buckley_square | two_weight_product | maximal_zero

    def evaluate(self, x1, xp1, xm1, xp2=None, xm2=None):
        if self.kind == "buckley_square":
            return ((xp1 - xm1) / x1) ** 2
        if self.kind == "two_weight_product":
            return np.abs(xp1 - xm1) * np.abs(xp2 - xm2) / 4.0
        return np.zeros_like(np.asarray(x1, dtype=float))

    @classmethod
    def zero(cls):
        return cls("zero")

    @classmethod
    def buckley_square(cls):
        return cls("buckley_square")

    @classmethod
    def two_weight_product(cls):
        return cls("two_weight_product")

    @classmethod
    def maximal_zero(cls):
        return cls("maximal_zero")

    @classmethod
    def for_surface(cls, surface: CandidateSurface) -> "CostFunctional":
        return {
            "buckley": cls.buckley_square(),
            "two_weight": cls.two_weight_product(),
            "jn": cls.zero(),
            "maximal": cls.maximal_zero(),
        }[surface.problem]


@dataclass(frozen=True)
class ViolationReport:
    x: BellmanPoint
    x_plus: BellmanPoint
    x_minus: BellmanPoint
    lhs: float            # B(x)
    rhs: float            # average + cost
    defect: float         # rhs - lhs, positive = violation

    def to_json_dict(self) -> dict:
        def pt(p):
            d = {"x1": p.x1, "x2": p.x2}
            if p.L is not None:
                d["L"] = p.L
            return d
        return {"x": pt(self.x), "x_plus": pt(self.x_plus),
                "x_minus": pt(self.x_minus),
                "lhs": self.lhs, "rhs": self.rhs, "defect": self.defect}


@dataclass
class ScanResult:
    surface_params: dict
    cost_kind: str
    count: int
    accepted: int
    seed: int
    max_radius: float
    tol_scale: float
    violations: List[ViolationReport] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def replay(self, surface: CandidateSurface, cost: CostFunctional,
               factor: float = 0.1) -> bool:
        """Re-evaluate every stored violation at a tighter slack."""
        for v in self.violations:
            L = v.x.L
            lhs = float(surface.value(v.x.x1, v.x.x2, L=L))
            Lp = None if L is None else max(L, v.x_plus.x1)
            Lm = None if L is None else max(L, v.x_minus.x1)
            bp = float(surface.value(v.x_plus.x1, v.x_plus.x2, L=Lp))
            bm = float(surface.value(v.x_minus.x1, v.x_minus.x2, L=Lm))
            c = float(cost.evaluate(v.x.x1, v.x_plus.x1, v.x_minus.x1,
                                    v.x_plus.x2, v.x_minus.x2))
            if 0.5 * (bp + bm) + c - lhs <= factor * self.tol_scale * (1.0 + abs(lhs)):
                return False
        return True


# ---------------------------------------------------------------------------
# vectorized domain membership (scan internals)
# ---------------------------------------------------------------------------

def _member(problem, x1, x2, params):
    if problem == "buckley":
        delta = params["delta"]
        with np.errstate(invalid="ignore", divide="ignore"):
            lx = np.log(np.where(x1 > 0.0, x1, np.nan))
        return (x1 > 0.0) & (x2 <= lx) & (x2 >= lx - math.log(delta))
    if problem == "jn":
        eps = params["eps"]
        return (x2 >= x1 * x1) & (x2 <= x1 * x1 + eps * eps)
    if problem == "two_weight":
        s = x1 * x2
        return (x1 >= 0.0) & (x2 >= 0.0) & (s >= params["m"] ** 2) & (s <= params["M"] ** 2)
    if problem == "maximal":
        # x1 may exceed L: the exterior level updates to max(x1, L)
        return (x1 > 0.0) & (x2 >= x1 * x1)
    raise ValueError(problem)


def _sample_base(problem, params, rng, count):
    if problem == "buckley":
        delta = params["delta"]
        x1 = np.exp(rng.uniform(math.log(0.5), math.log(2.0), count))
        x2 = np.log(x1) - rng.uniform(0.0, 1.0, count) * math.log(delta)
        return x1, x2
    if problem == "jn":
        eps = params["eps"]
        x1 = rng.uniform(-1.0, 1.0, count)
        x2 = x1 * x1 + rng.uniform(0.0, 1.0, count) * eps * eps
        return x1, x2
    if problem == "two_weight":
        m, M = params["m"], params["M"]
        x1 = np.exp(rng.uniform(math.log(0.2), math.log(3.0), count))
        s = rng.uniform(m * m, M * M, count)
        return x1, s / x1
    if problem == "maximal":
        L = params["L"]
        x1 = rng.uniform(0.02 * L, L, count)
        x2 = x1 * x1 + rng.uniform(0.0, 1.0, count) * 2.0 * L * L
        return x1, x2
    raise ValueError(problem)


def _default_radius(problem, params):
    if problem == "buckley":
        return 0.75 * math.log(params["delta"])
    if problem == "jn":
        return 2.0 * params["eps"]
    if problem == "two_weight":
        return 0.75 * (params["M"] - params["m"] if params["m"] > 0 else params["M"])
    return params["L"]


def main_inequality_scan(surface: CandidateSurface,
                         cost: Optional[CostFunctional] = None,
                         count: int = 100000, seed: int = 0,
                         max_radius: Optional[float] = None,
                         tol_scale: float = RELATIVE_SLACK) -> ScanResult:
    """Random search for midpoint-inequality violations of a candidate.

    Draws count triples (x, x + D, x - D) with all three points admissible
    (for the maximal operator, x+- may exit through x1 > L under the
    exterior-level update).  Reports every triple with
    B(x) < (B(x+) + B(x-))/2 + cost - tol_scale * (1 + |B(x)|).
    """
    if count < 1:
        raise ValueError("need count >= 1")
    if cost is None:
        cost = CostFunctional.for_surface(surface)
    problem = surface.problem
    params = surface.params()
    if max_radius is None:
        max_radius = _default_radius(problem, params)
    rng = np.random.default_rng(seed)

    x1, x2 = _sample_base(problem, params, rng, count)
    theta = rng.uniform(0.0, 2.0 * math.pi, count)
    r = max_radius * rng.uniform(0.0, 1.0, count) ** 1.5
    d1 = r * np.cos(theta)
    d2 = r * np.sin(theta)
    xp1, xp2 = x1 + d1, x2 + d2
    xm1, xm2 = x1 - d1, x2 - d2

    ok = (_member(problem, x1, x2, params)
          & _member(problem, xp1, xp2, params)
          & _member(problem, xm1, xm2, params))
    if problem == "maximal":
        # the midpoint itself must satisfy the fixed-L constraint
        ok &= x1 <= params["L"]

    idx = np.nonzero(ok)[0]
    x1, x2 = x1[idx], x2[idx]
    xp1, xp2, xm1, xm2 = xp1[idx], xp2[idx], xm1[idx], xm2[idx]

    L = params.get("L")
    if problem == "maximal":
        ext = surface.with_extension()
        lhs = np.asarray(ext.value(x1, x2), dtype=float)
        bp = np.asarray(ext.value(xp1, xp2), dtype=float)
        bm = np.asarray(ext.value(xm1, xm2), dtype=float)
    else:
        lhs = np.asarray(surface.value(x1, x2), dtype=float)
        bp = np.asarray(surface.value(xp1, xp2), dtype=float)
        bm = np.asarray(surface.value(xm1, xm2), dtype=float)
    rhs = 0.5 * (bp + bm) + cost.evaluate(x1, xp1, xm1, xp2, xm2)
    defect = rhs - lhs
    bad = defect > tol_scale * (1.0 + np.abs(lhs))

    result = ScanResult(surface_params=params, cost_kind=cost.kind,
                        count=count, accepted=int(idx.size), seed=seed,
                        max_radius=float(max_radius), tol_scale=tol_scale)
    for i in np.nonzero(bad)[0]:
        mkpt = lambda a, b: BellmanPoint(float(a), float(b),
                                         None if L is None else float(L))
        result.violations.append(ViolationReport(
            x=mkpt(x1[i], x2[i]), x_plus=mkpt(xp1[i], xp2[i]),
            x_minus=mkpt(xm1[i], xm2[i]),
            lhs=float(lhs[i]), rhs=float(rhs[i]), defect=float(defect[i])))
    result.violations.sort(key=lambda v: -v.defect)
    return result


def violations_to_json(violations: Sequence[ViolationReport]) -> list:
    return [v.to_json_dict() for v in violations]


# ---------------------------------------------------------------------------
# Bellman induction on the dyadic tree of a test function
# ---------------------------------------------------------------------------

@dataclass
class InductionReport:
    problem: str
    depth: int
    generation_totals: List[float]     # |J|-normalized: frontier value + cost so far
    monotone: bool
    worst_increase: float
    root_value: float                  # B(x^J)
    objective: float                   # the telescoped functional of f
    margin: float                      # root_value - objective

    @property
    def passed(self) -> bool:
        return self.monotone and self.margin >= -RELATIVE_SLACK * (1.0 + abs(self.root_value))


def _level_means_logs(f: DyadicFunction):
    logs = np.log(f.values)
    pyr = [logs]
    for _ in range(f.depth):
        pyr.append(0.5 * (pyr[-1][0::2] + pyr[-1][1::2]))
    return pyr[::-1]


def bellman_induction(surface: CandidateSurface, cost: Optional[CostFunctional],
                      f, L: Optional[float] = None,
                      check_admissible: bool = True) -> InductionReport:
    """Telescope the main inequality down the dyadic tree of f.

    The generation total  sum_{I in D^n} |I| B(x^I) + (cost accumulated
    above level n)  is nonincreasing in n for any super-solution; at the
    finest level the test function is constant per cell, the frontier sits
    on the natural boundary, and the total equals the objective exactly.
    """
    if cost is None:
        cost = CostFunctional.for_surface(surface)
    problem = surface.problem

    if problem == "two_weight":
        u, v = f
        if check_admissible:
            for lvl in range(u.depth + 1):
                s = u.level_means(lvl) * v.level_means(lvl)
                if s.max() > surface.M ** 2 * (1 + 1e-9) or s.min() < surface.m ** 2 * (1 - 1e-9):
                    raise ValueError("pair violates the product bounds m^2 <= <u><v> <= M^2")
        depth = u.depth
        point_at = lambda lvl: (u.level_means(lvl), v.level_means(lvl))
        values_at = lambda lvl, Ls: cand.two_weight_value_raw(
            *point_at(lvl), surface.m, surface.M)
        objective = two_weight_sum(u, v) / 4.0
        f0 = u
    else:
        depth = f.depth
        if problem == "buckley":
            if check_admissible and f.ainf_ratio() > surface.delta * (1 + 1e-9):
                raise ValueError("weight lies outside the A_infty ball: "
                                 f"ratio {f.ainf_ratio()} > delta {surface.delta}")
            logs = _level_means_logs(f)
            point_at = lambda lvl: (f.level_means(lvl), logs[lvl])
            values_at = lambda lvl, Ls: cand.buckley_value_raw(*point_at(lvl))
            objective = f.buckley_sum()
        elif problem == "jn":
            if check_admissible and f.bmo_norm_sq() > surface.eps ** 2 + 1e-9:
                raise ValueError("function lies outside the BMO ball: "
                                 f"norm^2 {f.bmo_norm_sq()} > eps^2 {surface.eps ** 2}")
            point_at = lambda lvl: (f.level_means(lvl), f.level_mean_squares(lvl))
            values_at = lambda lvl, Ls: cand.jn_value_raw(
                *point_at(lvl), surface.delta, surface.branch)
            with np.errstate(over="ignore"):
                objective = float(np.mean(np.exp(f.values)))
        elif problem == "maximal":
            if L is None:
                L = surface.L
            if check_admissible:
                if f.values.min() < 0:
                    raise ValueError("maximal-operator weight must be nonnegative")
                if f.level_means(0)[0] > L * (1 + 1e-12):
                    raise ValueError("exterior level L must dominate <w>_J")
            point_at = lambda lvl: (f.level_means(lvl), f.level_mean_squares(lvl))
            values_at = lambda lvl, Ls: cand.maximal_value_raw(*point_at(lvl), Ls)
            objective = float(np.mean(f.dyadic_maximal(L).values ** 2))
        else:
            raise ValueError(problem)
        f0 = f

    # exterior-level chains for the maximal problem
    L_levels = None
    if problem == "maximal":
        L_levels = [np.maximum(f0.level_means(0), L)]
        for lvl in range(1, depth + 1):
            L_levels.append(np.maximum(np.repeat(L_levels[-1], 2),
                                       f0.level_means(lvl)))

    totals = []
    cost_so_far = 0.0
    worst_increase = -math.inf
    for lvl in range(depth + 1):
        Ls = L_levels[lvl] if L_levels is not None else None
        vals = np.asarray(values_at(lvl, Ls), dtype=float)
        totals.append(float(np.mean(vals)) + cost_so_far)
        if lvl < depth:
            if problem == "two_weight":
                cu = u.level_means(lvl + 1)
                cv = v.level_means(lvl + 1)
                step = np.abs(cu[1::2] - cu[0::2]) * np.abs(cv[1::2] - cv[0::2]) / 4.0
            elif problem == "buckley":
                kids = f0.level_means(lvl + 1)
                step = ((kids[1::2] - kids[0::2]) / f0.level_means(lvl)) ** 2
            else:
                step = None
            if step is not None:
                # each parent cell at this level has measure fraction 2^-lvl
                cost_so_far += float(np.sum(step)) * 2.0 ** (-lvl)
    root_value = totals[0]
    for a, b in zip(totals, totals[1:]):
        worst_increase = max(worst_increase, b - a)
    scale = RELATIVE_SLACK * (1.0 + abs(root_value))
    return InductionReport(
        problem=problem, depth=depth, generation_totals=totals,
        monotone=worst_increase <= scale, worst_increase=worst_increase,
        root_value=root_value, objective=float(objective),
        margin=root_value - float(objective))


# ---------------------------------------------------------------------------
# value-iteration oracles
# ---------------------------------------------------------------------------
#
# The midpoint game is translation/scale covariant, exactly as the extremal
# problems themselves: adding a constant to a test function multiplies the
# exponential functional by e^tau, and scaling a weight leaves the square
# ratio sum unchanged.  The oracle therefore value-iterates the reduced
# one-variable game -- t = x2 - x1^2 for the exponential bound (drift d1
# stays a continuous control with exact weights e^{+-d1}), s = x1 e^{-x2}
# for the square-ratio sum -- instead of a truncated two-variable lattice.
# A naive lattice on a bounded x1 window provably undervalues: the extremal
# functions carry a logarithmic spike whose Bellman points run to x1 = inf.
# The lattice iteration is kept for the experimental fixed-level maximal
# game, where no reduction is shipped.


@dataclass
class ReducedSolution:
    """Fixed point of the reduced one-variable midpoint game."""

    problem: str                      # jn | buckley
    params: dict
    grid: np.ndarray                  # t-grid (jn) or s-grid (buckley)
    values: np.ndarray                # G(t) with B = e^{x1} G, or g(s)
    iterations: int
    final_update: float
    converged: bool

    def value_at(self, x1, x2):
        """Extend the reduced fixed point to the plane (linear in the grid var)."""
        x1 = np.asarray(x1, dtype=float)
        x2 = np.asarray(x2, dtype=float)
        if self.problem == "jn":
            t = x2 - x1 * x1
            return np.exp(x1) * np.interp(t, self.grid, self.values)
        s = x1 * np.exp(-x2)
        return np.interp(s, self.grid, self.values)

    def max_gap_to(self, reference, relative: bool = True) -> float:
        """Largest gap to a reference callable on the reduced grid itself."""
        if self.problem == "jn":
            ref = np.asarray(reference(np.zeros_like(self.grid),
                                       self.grid), dtype=float)
        else:
            ref = np.asarray(reference(self.grid, np.zeros_like(self.grid)),
                             dtype=float)
        gap = np.abs(self.values - ref)
        if relative:
            gap = gap / np.maximum(np.abs(ref), 1e-300)
        return float(np.max(gap))

    def to_csv(self, path, x1_range=(-1.0, 1.0), x1_step=0.05) -> None:
        """Emit x1, x2, value rows over a plane window (exact in x1)."""
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "x2", "value"])
            for x1 in np.arange(x1_range[0], x1_range[1] + x1_step / 2, x1_step):
                for k, g in enumerate(self.grid):
                    if self.problem == "jn":
                        x2 = x1 * x1 + g
                        val = math.exp(x1) * self.values[k]
                    else:
                        x2 = math.log(x1 / g) if x1 > 0 else float("nan")
                        val = self.values[k]
                    writer.writerow([f"{x1:.17g}", f"{x2:.17g}", f"{val:.17g}"])


def _dp_reduced_jn(eps: float, h: float, tol: float, max_iter: int,
                   max_span: Optional[int]):
    nt = max(2, round(eps * eps / h))
    ht = eps * eps / nt
    t = np.linspace(0.0, eps * eps, nt + 1)
    G = np.ones(nt + 1)
    span = nt if max_span is None else min(max_span, nt)

    # precompute, per cell k, the admissible ordered pairs (k+i, k+j) and
    # the drift weights e^{+-d1} with d1 = sqrt(-(i+j) ht / 2)
    pairs = []
    for k in range(nt + 1):
        iv = np.arange(max(-k, -span), min(nt - k, span) + 1)
        I, J = np.meshgrid(iv, iv, indexing="ij")
        keep = (I + J) <= 0
        I, J = I[keep], J[keep]
        d1 = np.sqrt(-(I + J) * ht / 2.0)
        pairs.append((k + I, k + J, np.exp(d1), np.exp(-d1)))

    iterations = 0
    final_update = 0.0
    for iterations in range(1, max_iter + 1):
        Gn = G.copy()
        for k in range(1, nt + 1):     # k = 0 is the pinned boundary G(0) = 1
            ip, jp, wp, wm = pairs[k]
            if ip.size:
                Gn[k] = max(G[k], float(np.max(0.5 * (wp * G[ip] + wm * G[jp]))))
        final_update = float(np.max(Gn - G))
        G = Gn
        if final_update < tol:
            break
    return t, G, iterations, final_update


def _dp_reduced_buckley(delta: float, h: float, tol: float, max_iter: int,
                        max_span: Optional[int]):
    ns = max(2, round((delta - 1.0) / h))
    s = np.linspace(1.0, delta, ns + 1)
    g = np.zeros(ns + 1)
    span = ns if max_span is None else min(max_span, ns)

    pairs = []
    for k in range(ns + 1):
        iv = np.arange(max(-k, -span), min(ns - k, span) + 1)
        I, J = np.meshgrid(iv, iv, indexing="ij")
        si = s[k + I]
        sj = s[k + J]
        keep = si * sj <= s[k] * s[k]
        I, J, si, sj = I[keep], J[keep], si[keep], sj[keep]
        cost = 4.0 * (1.0 - si * sj / (s[k] * s[k]))
        pairs.append((k + I, k + J, cost))

    iterations = 0
    final_update = 0.0
    for iterations in range(1, max_iter + 1):
        gn = g.copy()
        for k in range(1, ns + 1):     # k = 0 is the pinned boundary g(1) = 0
            ip, jp, cost = pairs[k]
            if ip.size:
                gn[k] = max(g[k], float(np.max(0.5 * (g[ip] + g[jp]) + cost)))
        final_update = float(np.max(gn - g))
        g = gn
        if final_update < tol:
            break
    return s, g, iterations, final_update


def dp_solve(problem: str, params: dict, h: float, tol: float = 1e-8,
             max_iter: int = 5000,
             max_span: Optional[int] = None) -> ReducedSolution:
    """Value-iterate the reduced midpoint game to a grid lower bound.

    ``problem`` is ``jn`` (params: eps) or ``buckley`` (params: delta); ``h``
    is the reduced-variable resolution.  ``max_span = 0`` degenerates the
    split set and returns the boundary-interpolated data unchanged;
    enlarging ``max_span`` never decreases the fixed point.
    """
    if problem == "jn":
        grid, vals, iterations, upd = _dp_reduced_jn(
            params["eps"], h, tol, max_iter, max_span)
    elif problem == "buckley":
        grid, vals, iterations, upd = _dp_reduced_buckley(
            params["delta"], h, tol, max_iter, max_span)
    else:
        raise ValueError("reduced oracle covers 'jn' and 'buckley'; "
                         "use dp_solve_lattice for 'maximal-lp'")
    converged = upd < tol or (max_span == 0)
    if not converged and iterations >= max_iter:
        converged = False
    return ReducedSolution(problem=problem, params=dict(params), grid=grid,
                           values=vals, iterations=iterations,
                           final_update=upd, converged=converged)


@dataclass
class GridSolution:
    problem: str
    params: dict
    x1: np.ndarray
    x2: np.ndarray
    values: np.ndarray                 # NaN outside the domain
    iterations: int
    final_update: float
    converged: bool
    pinned: np.ndarray
    mask: np.ndarray

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["x1", "x2", "value"])
            for i, a in enumerate(self.x1):
                for j, b in enumerate(self.x2):
                    if self.mask[i, j]:
                        writer.writerow([f"{a:.17g}", f"{b:.17g}",
                                         f"{self.values[i, j]:.17g}"])

    def max_gap_to(self, reference, window: Optional[Tuple[float, float]] = None,
                   relative: bool = True) -> float:
        """Largest |value - reference| over in-domain cells of an x1 window."""
        lo, hi = window if window is not None else (self.x1[0], self.x1[-1])
        sel = self.mask & (self.x1[:, None] >= lo) & (self.x1[:, None] <= hi)
        ref = np.asarray(reference(self.x1[:, None] + 0.0 * self.x2[None, :],
                                   0.0 * self.x1[:, None] + self.x2[None, :]),
                         dtype=float)
        gap = np.abs(self.values - ref)
        if relative:
            gap = gap / np.maximum(np.abs(ref), 1e-300)
        return float(np.max(gap[sel]))


def default_split_offsets(max_scale: int = 32, max_order: int = 6):
    """Integer grid offsets: all coprime directions up to max_order, at dyadic radii.

    Dense slope coverage matters: the extremal chords run along tangent
    lines whose slopes vary continuously, and the value iteration loses
    quadratically in the direction error.
    """
    directions = [(0, 1)]
    for p in range(1, max_order + 1):
        for q in range(-max_order, max_order + 1):
            if math.gcd(p, abs(q)) == 1:
                directions.append((p, q))
    offsets = []
    s = 1
    while s <= max_scale:
        offsets.extend((s * a, s * b) for a, b in directions)
        s *= 2
    return offsets


def _shift(V, a, b):
    out = np.full_like(V, -np.inf)
    n1, n2 = V.shape
    if abs(a) >= n1 or abs(b) >= n2:
        return out
    src1 = slice(max(0, a), max(0, min(n1, n1 + a)))
    dst1 = slice(max(0, -a), max(0, min(n1, n1 - a)))
    src2 = slice(max(0, b), max(0, min(n2, n2 + b)))
    dst2 = slice(max(0, -b), max(0, min(n2, n2 - b)))
    out[dst1, dst2] = V[src1, src2]
    return out


def dp_solve_lattice(problem: str, params: dict, h: float,
                     x1_range: Optional[Tuple[float, float]] = None,
                     x2_cap: Optional[float] = None,
                     splits: Optional[Sequence[Tuple[int, int]]] = None,
                     tol: float = 1e-8, max_iter: int = 5000) -> GridSolution:
    """Value iteration on a plane lattice over a bounded window.

    ``problem`` is ``jn`` (eps), ``buckley`` (delta), or the experimental
    ``maximal-lp`` (L and power p; splits exiting x1 > L are skipped, so the
    result is a lower bound for the fixed-level game).  The iteration
    starts at the boundary data, is pointwise nondecreasing, and stops when
    the sup-norm update drops below tol.  Cells on the data-carrying
    boundary stay pinned.  Out-of-domain lookups skip the pair.

    The window truncation makes this a strictly weaker lower bound than the
    reduced oracle of ``dp_solve``; it is kept for the maximal-operator
    experiment and for split-set studies.
    """
    if problem == "jn":
        eps = params["eps"]
        lo, hi = x1_range if x1_range else (-1.0, 1.0)
        x1 = np.arange(lo, hi + h / 2, h)
        x2 = np.arange(min(x1 ** 2), max(x1 ** 2) + eps * eps + h / 2, h)
        X1, X2 = x1[:, None], x2[None, :]
        mask = (X2 >= X1 ** 2) & (X2 <= X1 ** 2 + eps * eps)
        pinned = mask & (X2 < X1 ** 2 + h / 2)
        init = np.exp(X1) + 0.0 * X2
        cost_row = None
    elif problem == "buckley":
        delta = params["delta"]
        lo, hi = x1_range if x1_range else (0.5, 2.0)
        x1 = np.arange(lo, hi + h / 2, h)
        x2 = np.arange(math.log(lo / delta), math.log(hi) + h / 2, h)
        X1, X2 = x1[:, None], x2[None, :]
        mask = (X2 <= np.log(X1)) & (X2 >= np.log(X1 / delta))
        pinned = mask & (X2 > np.log(X1) - h / 2)
        init = np.zeros((x1.size, x2.size))
        cost_row = None   # depends on the offset; built per offset below
    elif problem == "maximal-lp":
        L = params["L"]
        p = params.get("p", 2.0)
        lo, hi = x1_range if x1_range else (h, L)
        x1 = np.arange(lo, hi + h / 2, h)
        cap = x2_cap if x2_cap is not None else 2.0 * L ** p
        x2 = np.arange(0.0, cap + h / 2, h)
        X1, X2 = x1[:, None], x2[None, :]
        mask = (X2 >= X1 ** p) & (X1 <= L)
        pinned = mask & (X2 < X1 ** p + h / 2)
        init = np.full((x1.size, x2.size), float(L) ** p)
        cost_row = None
    else:
        raise ValueError(problem)

    if splits is None:
        max_scale = max(4, min(x1.size, x2.size) // 4)
        offsets = default_split_offsets(max_scale=max_scale)
    else:
        offsets = [(int(a), int(b)) for a, b in splits]

    V = np.where(mask, init, -np.inf)
    pin_values = np.where(pinned, init, -np.inf)
    V = np.where(pinned, pin_values, V)

    if not offsets:
        sol_values = np.where(mask, V, np.nan)
        return GridSolution(problem=problem, params=dict(params), x1=x1, x2=x2,
                            values=sol_values, iterations=0, final_update=0.0,
                            converged=True, pinned=pinned, mask=mask)

    cost_per_offset = []
    for (a, b) in offsets:
        if problem == "buckley":
            cost_per_offset.append(((2.0 * a * h) / x1)[:, None] ** 2)
        else:
            cost_per_offset.append(0.0)

    iterations = 0
    final_update = math.inf
    updatable = mask & ~pinned
    for iterations in range(1, max_iter + 1):
        best = V
        for (a, b), c in zip(offsets, cost_per_offset):
            vp = _shift(V, a, b)
            vm = _shift(V, -a, -b)
            with np.errstate(invalid="ignore"):
                val = 0.5 * (vp + vm) + c
            best = np.maximum(best, val)
        Vn = np.where(updatable, best, V)
        diffs = Vn[updatable] - V[updatable]
        final_update = float(np.max(diffs)) if diffs.size else 0.0
        V = Vn
        if final_update < tol:
            break
    converged = final_update < tol
    sol_values = np.where(mask, V, np.nan)
    return GridSolution(problem=problem, params=dict(params), x1=x1, x2=x2,
                        values=sol_values, iterations=iterations,
                        final_update=final_update, converged=converged,
                        pinned=pinned, mask=mask)


# ---------------------------------------------------------------------------
# non-dyadic induction via the splitting algorithm
# ---------------------------------------------------------------------------

@dataclass
class NonDyadicReport:
    eps: float
    delta: float
    max_depth: int
    nodes: int
    leaves: int
    worst_concavity_defect: float      # most negative |I|B(x^I)-|I+|B-|I-|B
    worst_chord_excess: float          # max over nodes of rho - delta^2
    min_alpha: float
    tangency_stops: int
    root_value: float                  # B(x^J)
    objective: float                   # <e^f>_J
    frontier_value: float              # sum |I| B(x^I) over the leaves
    separation_ok: bool

    @property
    def passed(self) -> bool:
        slack = RELATIVE_SLACK * (1.0 + abs(self.root_value))
        return (self.worst_concavity_defect >= -slack
                and self.worst_chord_excess <= slack
                and self.root_value - self.objective >= -slack
                and self.separation_ok)


def nondyadic_induction(surface: CandidateSurface, f: DyadicFunction,
                        eps: float, delta: float, max_depth: int = 12,
                        root_tol: float = 1e-10) -> NonDyadicReport:
    """Run the adapted (non-dyadic) Bellman induction over f.

    Every node is split by the tangency algorithm so the chord of child
    points stays inside the enlarged domain; local concavity of the surface
    is checked at each split, and the recorded split proportions must obey
    the uniform separation bound.
    """
    if not eps < delta:
        raise ValueError("need eps < delta")
    if surface.problem != "jn":
        raise ValueError("non-dyadic induction is defined for the exponential bound")
    bmo_sq = f.bmo_norm_sq()
    if bmo_sq > eps * eps + 1e-9:
        raise ValueError(f"test function has norm^2 {bmo_sq} > eps^2")

    sep = separation_bound(eps, delta)
    B = lambda x1, x2: float(surface.value(x1, x2))
    worst_conc = math.inf
    worst_chord = -math.inf
    min_alpha = 1.0
    tangency = 0
    nodes = leaves = 0
    frontier_value = 0.0

    stack = [(f.left, f.right, 0)]
    while stack:
        p, q, level = stack.pop()
        nodes += 1
        m, s = f.window_stats(p, q)
        var = s - m * m
        if var <= 1e-14 * (1.0 + s) or level >= max_depth:
            leaves += 1
            frontier_value += (q - p) / f.length * B(m, s)
            continue
        dec = split_interval(f, (p, q), eps, delta, root_tol=root_tol)
        if dec.stopped_by == "NotFound":
            raise SplittingError(
                f"no admissible split on [{p}, {q}] at depth {level}: {dec.diagnostics}")
        if dec.stopped_by == "Tangency":
            tangency += 1
            min_alpha = min(min_alpha, dec.alpha_plus, 1.0 - dec.alpha_plus)
        parent = (q - p) * B(m, s)
        child = ((dec.cut - p) * B(dec.x_minus.x1, dec.x_minus.x2)
                 + (q - dec.cut) * B(dec.x_plus.x1, dec.x_plus.x2))
        worst_conc = min(worst_conc, (parent - child) / f.length)
        worst_chord = max(worst_chord, dec.rho_at_stop - delta * delta)
        stack.append((p, dec.cut, level + 1))
        stack.append((dec.cut, q, level + 1))

    m0, s0 = f.window_stats(f.left, f.right)
    with np.errstate(over="ignore"):
        objective = float(np.mean(np.exp(f.values)))
    separation_ok = (tangency == 0) or (min_alpha >= sep - 10.0 * root_tol - 1e-9)
    return NonDyadicReport(
        eps=eps, delta=delta, max_depth=max_depth, nodes=nodes, leaves=leaves,
        worst_concavity_defect=0.0 if math.isinf(worst_conc) else worst_conc,
        worst_chord_excess=0.0 if math.isinf(worst_chord) else worst_chord,
        min_alpha=min_alpha, tangency_stops=tangency,
        root_value=B(m0, s0), objective=objective,
        frontier_value=frontier_value, separation_ok=separation_ok)
