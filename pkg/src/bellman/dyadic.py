"""Piecewise-constant dyadic test functions and their interval statistics.

A ``DyadicFunction`` holds the values of a step function on the 2^n cells
of generation n over an interval [left, right].  Every statistic the
sharp-constant problems use is computed from the pyramid of cell means:

* averages  <f>_I, <f^2>_I, <log f>_I, <e^f>_I  over dyadic cells,
* Haar coefficients  (f, h_I) = sqrt(|I|) (<f>_{I+} - <f>_{I-}) / 2,
* the dyadic BMO norm  sup_I (<f^2>_I - <f>_I^2),
* the A_infty ratio    sup_I <f>_I exp(-<log f>_I),
* the normalized square-difference sum of the Buckley inequality,
* the two-weight product sum,
* the dyadic maximal function with exterior level L,
* cut-offs and the cut-off lemma's variance-drop identity.

Cells are addressed as ``(level, k)`` with ``0 <= k < 2^level``; the halves
``I-`` and ``I+`` are the left and right children.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import ShapeMismatchError


@dataclass(frozen=True)
class IntervalStats:
    """Exact averages of a step function over one interval."""

    mean: float
    mean_sq: float
    mean_log: Optional[float]
    mean_exp: float


class DyadicFunction:
    """Immutable step function at dyadic resolution ``depth`` on [left, right]."""

    def __init__(self, left: float, right: float, values):
        if not right > left:
            raise ValueError("need right > left")
        values = np.asarray(values, dtype=float)
        n = values.size
        depth = int(n).bit_length() - 1
        if n != 1 << depth:
            raise ValueError("value count must be a power of two")
        self.left = float(left)
        self.right = float(right)
        self.depth = depth
        self.values = values.copy()
        self.values.setflags(write=False)
        self._pyr_mean = None
        self._pyr_sq = None

    # -- constructors --------------------------------------------------------

    @classmethod
    def constant(cls, c: float, depth: int = 0, left: float = 0.0, right: float = 1.0):
        return cls(left, right, np.full(1 << depth, float(c)))

    @classmethod
    def from_antiderivative(cls, F: Callable, depth: int,
                            left: float = 0.0, right: float = 1.0):
        """Sample a function by its exact cell averages, F being its antiderivative."""
        grid = np.linspace(left, right, (1 << depth) + 1)
        Fv = np.asarray(F(grid), dtype=float)
        h = (right - left) / (1 << depth)
        return cls(left, right, np.diff(Fv) / h)

    @classmethod
    def sample_log(cls, depth: int, left: float = 0.0, right: float = 1.0):
        """log t sampled by exact cell averages; needs left >= 0."""
        if left < 0:
            raise ValueError("log sampler needs left >= 0")

        def F(t):
            with np.errstate(divide="ignore", invalid="ignore"):
                out = t * np.log(t) - t
            return np.where(t == 0.0, 0.0, out)

        return cls.from_antiderivative(F, depth, left, right)

    @classmethod
    def sample_power(cls, a: float, depth: int, left: float = 0.0, right: float = 1.0):
        """t^a sampled by exact cell averages; a > -1 so cells touching 0 integrate."""
        if a <= -1.0:
            raise ValueError("power sampler needs a > -1")
        if left < 0:
            raise ValueError("power sampler needs left >= 0")

        def F(t):
            return np.power(t, a + 1.0) / (a + 1.0)

        return cls.from_antiderivative(F, depth, left, right)

    @classmethod
    def from_midpoints(cls, f: Callable, depth: int,
                       left: float = 0.0, right: float = 1.0):
        """Midpoint sampling for functions without a handy antiderivative."""
        h = (right - left) / (1 << depth)
        mids = left + h * (np.arange(1 << depth) + 0.5)
        return cls(left, right, np.asarray(f(mids), dtype=float))

    # -- basic geometry --------------------------------------------------------

    @property
    def length(self) -> float:
        return self.right - self.left

    def cell_bounds(self, level: int, k: int):
        w = self.length / (1 << level)
        return self.left + k * w, self.left + (k + 1) * w

    def _leaf_slice(self, level: int, k: int):
        if not (0 <= level <= self.depth):
            raise ValueError(f"cell level {level} outside 0..{self.depth}")
        if not (0 <= k < (1 << level)):
            raise ValueError(f"cell index {k} outside level {level}")
        span = 1 << (self.depth - level)
        return slice(k * span, (k + 1) * span)

    def refine(self, extra: int) -> "DyadicFunction":
        return DyadicFunction(self.left, self.right, np.repeat(self.values, 1 << extra))

    def coarsen(self, levels: int) -> "DyadicFunction":
        if levels > self.depth:
            raise ValueError("cannot coarsen below depth 0")
        v = self.values.reshape(1 << (self.depth - levels), -1).mean(axis=1)
        return DyadicFunction(self.left, self.right, v)

    # -- mean pyramids ---------------------------------------------------------

    def _pyramids(self):
        """means[level][k] and mean-of-squares per cell, level 0..depth."""
        if self._pyr_mean is None:
            m = [self.values]
            s = [self.values * self.values]
            for _ in range(self.depth):
                m.append(0.5 * (m[-1][0::2] + m[-1][1::2]))
                s.append(0.5 * (s[-1][0::2] + s[-1][1::2]))
            self._pyr_mean = m[::-1]
            self._pyr_sq = s[::-1]
        return self._pyr_mean, self._pyr_sq

    def level_means(self, level: int) -> np.ndarray:
        return self._pyramids()[0][level]

    def level_mean_squares(self, level: int) -> np.ndarray:
        return self._pyramids()[1][level]

    # -- statistics -------------------------------------------------------------

    def averages(self, cell=(0, 0)) -> IntervalStats:
        """Exact <f>, <f^2>, <log f>, <e^f> over a dyadic cell."""
        level, k = cell
        sl = self._leaf_slice(level, k)
        v = self.values[sl]
        mean = self.level_means(level)[k]
        mean_sq = self.level_mean_squares(level)[k]
        vmin = v.min()
        if vmin < 0.0:
            mean_log = None
        elif vmin == 0.0:
            mean_log = -math.inf
        else:
            mean_log = float(np.mean(np.log(v)))
        with np.errstate(over="ignore"):
            mean_exp = float(np.mean(np.exp(v)))
        return IntervalStats(float(mean), float(mean_sq), mean_log, mean_exp)

    def haar_coefficient(self, cell=(0, 0)) -> float:
        """(f, h_I) for the L^2-normalized Haar function on the cell."""
        level, k = cell
        if level >= self.depth:
            raise ValueError("cell must be strictly coarser than the leaf level")
        child = self.level_means(level + 1)
        size = self.length / (1 << level)
        return float(math.sqrt(size) * (child[2 * k + 1] - child[2 * k]) / 2.0)

    def bmo_norm_sq(self) -> float:
        """sup over all dyadic cells of the interval variance."""
        means, sqs = self._pyramids()
        worst = 0.0
        for m, s in zip(means, sqs):
            lvl = float(np.max(s - m * m))
            if lvl > worst:
                worst = lvl
        return worst

    def ainf_ratio(self) -> float:
        """Least delta with f in A^d_infty(J, delta); +inf if f hits zero."""
        if self.values.min() < 0.0:
            raise ValueError("A_infty ratio needs nonnegative values")
        if self.values.min() == 0.0:
            return math.inf
        logs = np.log(self.values)
        means, _ = self._pyramids()
        lm = [logs]
        for _ in range(self.depth):
            lm.append(0.5 * (lm[-1][0::2] + lm[-1][1::2]))
        lm = lm[::-1]
        ratio = 1.0
        for m, l in zip(means, lm):
            ratio = max(ratio, float(np.max(m * np.exp(-l))))
        return ratio

    def buckley_sum(self) -> float:
        """(1/|J|) sum over cells of |I| ((<f>_{I+}-<f>_{I-}) / <f>_I)^2."""
        if self.values.min() <= 0.0:
            raise ValueError("Buckley sum needs strictly positive values")
        means, _ = self._pyramids()
        total = 0.0
        for level in range(self.depth):
            parents = means[level]
            kids = means[level + 1]
            diff = kids[1::2] - kids[0::2]
            total += float(np.sum((diff / parents) ** 2)) * 2.0 ** (-level)
        return total

    def haar_form_buckley_sum(self) -> float:
        """sum over cells of ((f,h_I)/<f>_I)^2; equals |J|/4 of buckley_sum."""
        if self.values.min() <= 0.0:
            raise ValueError("Buckley sum needs strictly positive values")
        means, _ = self._pyramids()
        total = 0.0
        for level in range(self.depth):
            size = self.length / (1 << level)
            kids = means[level + 1]
            coeff = math.sqrt(size) * (kids[1::2] - kids[0::2]) / 2.0
            total += float(np.sum((coeff / means[level]) ** 2))
        return total

    def cutoff(self, c: float, d: float) -> "DyadicFunction":
        """Clamp values to [c, d]; c and d may be -inf / +inf."""
        if not c < d:
            raise ValueError("cutoff needs c < d")
        return DyadicFunction(self.left, self.right, np.clip(self.values, c, d))

    def cutoff_identity_residual(self, d: float, cell=(0, 0)) -> float:
        """LHS - RHS of the cut-off lemma's variance-drop identity on a cell.

        With I2 = {f >= d}, I1 = {f < d} and beta_k their measure fractions,
        the drop of variance under the one-sided cut C_d f = min(f, d) equals
        beta2 * var_{I2}(f) + beta1*beta2 * (<f>_{I2} - d)(<f>_{I2} + d - 2<f>_{I1}).
        """
        level, k = cell
        v = self.values[self._leaf_slice(level, k)]
        hi = v >= d
        n2 = int(hi.sum())
        n1 = v.size - n2
        if n1 == 0 or n2 == 0:
            return 0.0
        b1 = n1 / v.size
        b2 = n2 / v.size
        cut = np.minimum(v, d)
        lhs = (np.mean(v * v) - np.mean(v) ** 2) - (np.mean(cut * cut) - np.mean(cut) ** 2)
        a2 = float(np.mean(v[hi]))
        q2 = float(np.mean(v[hi] ** 2))
        a1 = float(np.mean(v[~hi]))
        rhs = b2 * (q2 - a2 * a2) + b1 * b2 * (a2 - d) * (a2 + d - 2.0 * a1)
        return float(lhs - rhs)

    # -- maximal function ---------------------------------------------------------

    def dyadic_maximal(self, L: float) -> "DyadicFunction":
        """Cellwise sup of ancestor-chain averages, floored by the exterior level L.

        Models the paper's setup where every dyadic super-interval of J has
        average exactly L (the test function equals L outside J).
        """
        if self.values.min() < 0.0:
            raise ValueError("maximal function needs nonnegative values")
        if L < 0.0:
            raise ValueError("exterior level L must be nonnegative")
        means, _ = self._pyramids()
        running = np.maximum(means[0], L)
        for level in range(1, self.depth + 1):
            running = np.maximum(np.repeat(running, 2), means[level])
        return DyadicFunction(self.left, self.right, running)

    # -- non-dyadic windows (for the splitting algorithm) ---------------------------

    def window_stats(self, p: float, q: float):
        """(mean, mean_sq) of the step function over an arbitrary [p, q]."""
        if not (self.left - 1e-12 <= p < q <= self.right + 1e-12):
            raise ValueError("window outside the support interval")
        n = 1 << self.depth
        h = self.length / n

        def integrals(t):
            pos = min(max((t - self.left) / h, 0.0), float(n))
            i = int(pos)
            frac = pos - i
            if i >= n:
                i, frac = n - 1, 1.0
            p1 = self._w_prefix[i] + self.values[i] * frac
            p2 = self._w_prefix_sq[i] + self.values[i] ** 2 * frac
            return p1, p2

        if not hasattr(self, "_w_prefix"):
            self._w_prefix = np.concatenate(([0.0], np.cumsum(self.values)))
            self._w_prefix_sq = np.concatenate(([0.0], np.cumsum(self.values ** 2)))
        a1, a2 = integrals(p)
        b1, b2 = integrals(q)
        width = (q - p) / h
        return (b1 - a1) / width, (b2 - a2) / width

    # -- serialization ----------------------------------------------------------------

    def to_csv(self, path) -> None:
        """Rows t_left, t_right, value; deterministic left-to-right order."""
        n = 1 << self.depth
        edges = np.linspace(self.left, self.right, n + 1)
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["t_left", "t_right", "value"])
            for i in range(n):
                writer.writerow([f"{edges[i]:.17g}", f"{edges[i + 1]:.17g}",
                                 f"{self.values[i]:.17g}"])

    @classmethod
    def from_csv(cls, path) -> "DyadicFunction":
        with open(path, newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader)
            if header[:3] != ["t_left", "t_right", "value"]:
                raise ValueError("expected header t_left,t_right,value")
            rows = [(float(a), float(b), float(v)) for a, b, v in reader]
        if not rows:
            raise ValueError("empty CSV")
        values = [v for _, _, v in rows]
        return cls(rows[0][0], rows[-1][1], values)


def _require_same_grid(u: DyadicFunction, v: DyadicFunction):
    if (u.depth != v.depth or abs(u.left - v.left) > 1e-12
            or abs(u.right - v.right) > 1e-12):
        raise ShapeMismatchError("functions must share interval and depth")


def two_weight_sum(u: DyadicFunction, v: DyadicFunction) -> float:
    """(1/|J|) sum |I| |<u>_{I+}-<u>_{I-}| |<v>_{I+}-<v>_{I-}| over all cells."""
    _require_same_grid(u, v)
    if u.values.min() < 0.0 or v.values.min() < 0.0:
        raise ValueError("two-weight sum needs nonnegative values")
    total = 0.0
    for level in range(u.depth):
        du = u.level_means(level + 1)[1::2] - u.level_means(level + 1)[0::2]
        dv = v.level_means(level + 1)[1::2] - v.level_means(level + 1)[0::2]
        total += float(np.sum(np.abs(du) * np.abs(dv))) * 2.0 ** (-level)
    return total


def averages(f: DyadicFunction, cell=(0, 0)) -> IntervalStats:
    return f.averages(cell)


def haar_coefficient(f: DyadicFunction, cell=(0, 0)) -> float:
    return f.haar_coefficient(cell)


def bmo_norm_sq(f: DyadicFunction) -> float:
    return f.bmo_norm_sq()


def ainf_ratio(w: DyadicFunction) -> float:
    return w.ainf_ratio()


def buckley_sum(w: DyadicFunction) -> float:
    return w.buckley_sum()


def dyadic_maximal(w: DyadicFunction, L: float) -> DyadicFunction:
    return w.dyadic_maximal(L)


def cutoff(f: DyadicFunction, c: float, d: float) -> DyadicFunction:
    return f.cutoff(c, d)


def cutoff_identity_residual(f: DyadicFunction, d: float, cell=(0, 0)) -> float:
    return f.cutoff_identity_residual(d, cell)
