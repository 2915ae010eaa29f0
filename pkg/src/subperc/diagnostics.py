"""Empirical fingerprints of sub- and super-Poisson ordering.

Count laws are compared in convex order through their stop-loss
transforms; point processes through void probabilities, Ripley's K,
product moments of box counts and shot-noise Laplace transforms. Capacity
examples show how a more variable interference raises mean capacity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats
from scipy.spatial import cKDTree

from .errors import GeometryError, ParameterError
from .estimates import EstimateWithCI
from .point_processes import PointPattern, ReplicaLaw, Window
from .rng import replication_seeds
from .spatial_graphs import neighbor_pairs, resolve_metric

TAIL_EPS = 1e-17


@dataclass(frozen=True)
class CountDistribution:
    """Law on ``{0, ..., K_max}`` with an exactly known mean.

    Laws with unbounded support are truncated where the remaining mass is
    below ``1e-17``; the stop-loss transform uses the exact mean, so the
    truncation never enters it for ``k <= K_max``.
    """

    pmf: np.ndarray
    mean: float
    name: str

    @classmethod
    def binomial(cls, n: int, p: float | None = None) -> "CountDistribution":
        p = 1.0 / n if p is None else p
        k = np.arange(n + 1)
        label = ReplicaLaw.binomial(n).label if p == 1.0 / n else f"Bin({n},{p:g})"
        return cls(stats.binom.pmf(k, n, p), n * p, label)

    @classmethod
    def poisson(cls, mean: float = 1.0) -> "CountDistribution":
        kmax = 0
        if mean > 0:
            # isf is unreliable this deep in the tail; walk the survival function
            kmax = int(mean + 6 * math.sqrt(mean)) + 5
            while stats.poisson.sf(kmax, mean) > TAIL_EPS:
                kmax += 1
        return cls(stats.poisson.pmf(np.arange(kmax + 1), mean), float(mean), f"Poi({mean:g})")

    @classmethod
    def cox_bernoulli(cls, a: float) -> "CountDistribution":
        inner = cls.poisson(a)
        pmf = inner.pmf / a
        pmf[0] += 1.0 - 1.0 / a
        return cls(pmf, 1.0, f"Cox({a:g})")

    @classmethod
    def scaled_poisson(cls, n: int) -> "CountDistribution":
        inner = cls.poisson(1.0 / n)
        pmf = np.zeros(n * (inner.pmf.size - 1) + 1)
        pmf[::n] = inner.pmf
        return cls(pmf, 1.0, f"SPoi({n})")

    @classmethod
    def from_law(cls, law: ReplicaLaw) -> "CountDistribution":
        if law.variant == "binomial":
            return cls.binomial(law.n, law.p)
        if law.variant == "poisson":
            return cls.poisson(law.mean_param)
        if law.variant == "cox_bernoulli":
            return cls.cox_bernoulli(law.a)
        return cls.scaled_poisson(law.n)

    @property
    def k_max(self) -> int:
        return self.pmf.size - 1

    def stop_loss(self, k: int) -> float:
        return stop_loss(self, k)


def stop_loss(dist: CountDistribution, k: int) -> float:
    """``E[(N - k)^+]``.

    Below the mean this is ``E[N] - k + sum_{j<k} (k - j) P(N = j)``, which
    uses the exact mean and never sees the truncated tail; above it the
    direct tail sum is used.
    """
    if k < 0:
        raise ParameterError("stop-loss level must be nonnegative")
    if k > dist.k_max:
        return 0.0
    if k <= dist.mean:
        j = np.arange(k)
        val = dist.mean - k + float(np.sum((k - j) * dist.pmf[:k]))
    else:
        # the complement form cancels badly far in the tail
        j = np.arange(k + 1, dist.pmf.size)
        val = float(np.sum((j - k) * dist.pmf[k + 1 :]))
    return max(val, 0.0)


@dataclass(frozen=True)
class ConvexOrderResult:
    ordered: bool
    witness: int | str | None
    lower_values: np.ndarray
    upper_values: np.ndarray

    def __bool__(self):
        return self.ordered


def check_convex_order(
    lower: CountDistribution, upper: CountDistribution, k_max: int | None = None
) -> ConvexOrderResult:
    """Equal means plus pointwise stop-loss dominance ``lower <= upper``."""
    if k_max is None:
        k_max = max(lower.k_max, upper.k_max)
    ks = range(k_max + 1)
    lo = np.array([stop_loss(lower, k) for k in ks])
    up = np.array([stop_loss(upper, k) for k in ks])
    if abs(lower.mean - upper.mean) > 1e-9:
        return ConvexOrderResult(False, "mean", lo, up)
    bad = np.flatnonzero(lo > up + 1e-12)
    if bad.size:
        return ConvexOrderResult(False, int(bad[0]), lo, up)
    return ConvexOrderResult(True, None, lo, up)


@dataclass(frozen=True)
class Box:
    """Closed rectangle; zero width/height gives a segment or a point."""

    x0: float
    x1: float
    y0: float
    y1: float

    def __post_init__(self):
        if self.x1 < self.x0 or self.y1 < self.y0:
            raise GeometryError(f"inverted box {self}")

    @classmethod
    def point(cls, x, y) -> "Box":
        return cls(x, x, y, y)

    @property
    def area(self) -> float:
        return (self.x1 - self.x0) * (self.y1 - self.y0)

    @property
    def perimeter(self) -> float:
        return 2.0 * ((self.x1 - self.x0) + (self.y1 - self.y0))

    def dilated_area(self, r: float) -> float:
        return self.area + self.perimeter * r + math.pi * r * r

    def distance(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        dx = np.maximum.reduce([self.x0 - p[:, 0], np.zeros(len(p)), p[:, 0] - self.x1])
        dy = np.maximum.reduce([self.y0 - p[:, 1], np.zeros(len(p)), p[:, 1] - self.y1])
        return np.hypot(dx, dy)

    def count(self, points) -> int:
        """Points in the half-open box ``[x0, x1) x [y0, y1)``."""
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return int(np.count_nonzero((p[:, 0] >= self.x0) & (p[:, 0] < self.x1) & (p[:, 1] >= self.y0) & (p[:, 1] < self.y1)))

    def translated(self, dx: float, dy: float) -> "Box":
        return Box(self.x0 + dx, self.x1 + dx, self.y0 + dy, self.y1 + dy)

    def overlaps(self, other: "Box") -> bool:
        return self.x0 < other.x1 and other.x0 < self.x1 and self.y0 < other.y1 and other.y0 < self.y1

    def inside(self, window: Window, margin: float = 0.0) -> bool:
        return (
            self.x0 - margin >= window.x_min
            and self.x1 + margin <= window.x_max
            and self.y0 - margin >= window.y_min
            and self.y1 + margin <= window.y_max
        )


@dataclass(frozen=True)
class VoidEstimate:
    void: EstimateWithCI
    capacity: EstimateWithCI


def _seeds(seeds, master_seed, name, replications):
    if seeds is not None:
        return list(seeds)[:replications]
    return replication_seeds(master_seed, name, replications)


def estimate_void_probability(
    generator, B: Box, r: float, replications: int, seeds=None, master_seed: int = 0
) -> VoidEstimate:
    """Fraction of realisations with no point within ``r`` of ``B``."""
    if r < 0:
        raise ParameterError("radius must be nonnegative")
    seeds = _seeds(seeds, master_seed, "void", replications)
    empty = np.empty(len(seeds))
    for k, s in enumerate(seeds):
        pat = generator(s)
        if k == 0 and not B.inside(pat.window, r):
            raise GeometryError("B dilated by r must lie inside the window")
        empty[k] = 0.0 if np.any(B.distance(pat.points) <= r) else 1.0
    void = EstimateWithCI.from_samples(empty)
    cap = EstimateWithCI(1.0 - void.value, void.std_error, void.replications)
    return VoidEstimate(void, cap)


def poisson_void_probability(lam: float, B: Box, r: float) -> float:
    return math.exp(-lam * B.dilated_area(r))


def ripley_k(pattern: PointPattern, radii, correction: str | None = None) -> np.ndarray:
    """``K(r) = area / n^2 * sum_{i != j} w_ij 1[d_ij <= r]``.

    ``correction`` is ``"torus"`` (periodic distances, ``w = 1``) or
    ``"translation"`` (``w = area / ((W - |dx|)(H - |dy|))``); it defaults
    to the window's boundary mode.
    """
    radii = np.atleast_1d(np.asarray(radii, dtype=float))
    w = pattern.window
    n = pattern.n
    if n < 2:
        raise ParameterError("Ripley's K needs at least two points")
    if correction is None:
        correction = "torus" if w.is_torus else "translation"
    if correction not in ("torus", "translation"):
        raise ParameterError(f"unknown edge correction {correction!r}")
    if radii.size and radii.max() >= 0.5 * min(w.width, w.height):
        raise ParameterError("radii must be below half the window span")
    if radii.size == 0:
        return radii
    torus = correction == "torus"
    rmax = float(radii.max())
    i, j, d = neighbor_pairs(pattern.points, w, rmax, torus)
    if torus:
        weight = np.ones_like(d)
    else:
        delta = np.abs(pattern.points[j] - pattern.points[i])
        weight = w.area / ((w.width - delta[:, 0]) * (w.height - delta[:, 1]))
    order = np.argsort(d)
    cum = np.concatenate([[0.0], np.cumsum(weight[order])])
    idx = np.searchsorted(d[order], radii, side="right")
    # each unordered pair counts twice in the i != j sum
    return w.area / n**2 * 2.0 * cum[idx]


def empirical_joint_intensity_ratio(
    generator, boxes, replications: int, seeds=None, master_seed: int = 0, intensity=None, shifts=None
) -> EstimateWithCI:
    """``E[prod_i N(B_i)] / prod_i (lambda |B_i|)`` over disjoint boxes.

    ``shifts`` is an optional list of ``(dx, dy)`` translates of the whole
    box configuration; for a stationary generator each replication then
    contributes the average product over all translates, which cuts the
    variance without changing the expectation. Standard errors are taken
    across replications.
    """
    boxes = list(boxes)
    if not 1 <= len(boxes) <= 4:
        raise ParameterError("between one and four boxes are supported")
    for a in range(len(boxes)):
        if boxes[a].area <= 0:
            raise GeometryError("boxes must have positive area")
        for b in range(a + 1, len(boxes)):
            if boxes[a].overlaps(boxes[b]):
                raise GeometryError("boxes must be disjoint")
    lam = intensity if intensity is not None else getattr(generator, "intensity")
    norm = math.prod(lam * b.area for b in boxes)
    shifts = [(0.0, 0.0)] if shifts is None else [tuple(map(float, sh)) for sh in shifts]
    configs = [[b.translated(dx, dy) for b in boxes] for dx, dy in shifts]
    window = getattr(generator, "window", None)
    if window is not None and not all(b.inside(window) for cfg in configs for b in cfg):
        raise GeometryError("translated boxes leave the window")
    seeds = _seeds(seeds, master_seed, "joint_intensity", replications)
    prods = np.empty(len(seeds))
    for k, s in enumerate(seeds):
        pts = generator(s).points
        prods[k] = np.mean([math.prod(b.count(pts) for b in cfg) for cfg in configs])
    return EstimateWithCI.from_samples(prods / norm)


def shannon_mean_capacity(interference_samples, F0: float, N: float) -> EstimateWithCI:
    """Mean of ``log(1 + F0 / (N + I))``."""
    if F0 < 0 or not N > 0:
        raise ParameterError("need F0 >= 0 and N > 0")
    I = np.asarray(interference_samples, dtype=float).ravel()
    return EstimateWithCI.from_samples(np.log1p(F0 / (N + I)))


def outage_capacity(interference_samples, T: float, N: float, rate: float = 1.0) -> EstimateWithCI:
    """Mean of ``Pr{F / (N + I) > T}`` for exponential fading ``F``."""
    if not rate > 0:
        raise ParameterError("fading rate must be positive")
    I = np.asarray(interference_samples, dtype=float).ravel()
    return EstimateWithCI.from_samples(np.exp(-rate * T * (N + I)))


def nearest_neighbor_distances(pattern: PointPattern, metric=None) -> np.ndarray:
    torus = resolve_metric(pattern.window, metric)
    w = pattern.window
    pts = pattern.points - np.array([w.x_min, w.y_min])
    if torus:
        pts = np.mod(pts, [w.width, w.height])
        tree = cKDTree(pts, boxsize=[w.width, w.height])
    else:
        tree = cKDTree(pts)
    d, _ = tree.query(pts, k=2)
    return d[:, 1]


def poisson_nn_cdf(lam: float, r) -> np.ndarray:
    return -np.expm1(-lam * math.pi * np.asarray(r, dtype=float) ** 2)


def cell_count_chisquare(pattern: PointPattern, intensity: float, nx: int = 4, ny: int = 4):
    """Pearson statistic of counts in ``nx * ny`` congruent cells against a
    Poisson law of known mean; returns ``(statistic, p_value)`` on
    ``nx * ny`` degrees of freedom."""
    w = pattern.window
    counts, _, _ = np.histogram2d(
        pattern.points[:, 0], pattern.points[:, 1], bins=[nx, ny], range=[[w.x_min, w.x_max], [w.y_min, w.y_max]]
    )
    mu = intensity * w.area / (nx * ny)
    stat = float(np.sum((counts - mu) ** 2) / mu)
    return stat, float(special.chdtrc(nx * ny, stat))


@dataclass(frozen=True)
class DiagnosticRow:
    diagnostic: str
    params: str
    value: float
    std_error: float
    reference_value: float
    verdict: str

    HEADER = ("diagnostic", "params", "value", "std_error", "reference_value", "verdict")

    def as_tuple(self):
        return (self.diagnostic, self.params, self.value, self.std_error, self.reference_value, self.verdict)
