"""Threshold estimation, lattice discretisation and Peierls-type bounds.

A finite window cannot percolate, so two proxies are provided: the
largest-component fraction (used for critical-range scans) and left-right
crossing (used for site fields, level sets and the discretisation checks).
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import ndimage

from .errors import BracketingError, ParameterError
from .parallel import pmap
from .point_processes import PointPattern, Window
from .rng import replication_seeds
from .spatial_graphs import (
    SpatialGraph,
    build_gilbert,
    component_stats,
    label_components,
)

# 8-neighbourhood: closed boxes of adjacent and diagonal sites intersect
EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


@dataclass
class ScanConfig:
    target_fraction: float = 0.6
    tolerance: float = 0.01
    bracket: tuple[float, float] = (0.8, 1.5)
    replications: int = 10
    seeds: list[int] | None = None
    master_seed: int = 0

    def __post_init__(self):
        lo, hi = self.bracket
        self.bracket = (float(lo), float(hi))
        if not 0.0 < self.target_fraction < 1.0:
            raise ParameterError("target fraction must lie in (0, 1)")
        if not self.tolerance > 0:
            raise ParameterError("tolerance must be positive")
        if not lo < hi:
            raise ParameterError("bracket must satisfy lo < hi")
        if self.replications < 1:
            raise ParameterError("need at least one replication")
        if self.seeds is not None:
            self.seeds = [int(s) for s in self.seeds]
            if len(self.seeds) < self.replications:
                raise ParameterError("fewer seeds than replications")

    def resolved_seeds(self, name: str) -> list[int]:
        if self.seeds is not None:
            return list(self.seeds[: self.replications])
        return replication_seeds(self.master_seed, name, self.replications)


@dataclass
class ScanStep:
    param: float
    mean_fraction: float
    std: float
    replications: int


@dataclass
class ScanResult:
    threshold_estimate: float
    per_step: list[ScanStep]
    config: ScanConfig
    seeds: list[int]
    final_bracket: tuple[float, float] = (math.nan, math.nan)
    label: str = ""

    def summary(self) -> dict:
        cfg = asdict(self.config)
        cfg["bracket"] = list(self.config.bracket)
        return {
            "label": self.label,
            "threshold_estimate": self.threshold_estimate,
            "final_bracket": list(self.final_bracket),
            "config": cfg,
            "seeds": list(self.seeds),
        }


def _fraction_stats(fractions) -> tuple[float, float]:
    f = np.asarray(fractions, dtype=float)
    std = float(f.std(ddof=1)) if f.size > 1 else 0.0
    return float(f.mean()), std


def bisect_threshold(evaluate, lo, hi, target, tolerance, increasing=True):
    """Bisection on a monotone mean-fraction curve.

    ``evaluate(param) -> ScanStep``. For an increasing curve the bracket
    must satisfy ``f(lo) < target <= f(hi)``; for a decreasing one
    ``f(lo) >= target > f(hi)``. Returns ``(estimate, steps, (lo, hi))``
    where the estimate is the midpoint of the final bracket.
    """
    steps = [evaluate(lo), evaluate(hi)]
    f_lo, f_hi = steps[0].mean_fraction, steps[1].mean_fraction
    ok = (f_lo < target <= f_hi) if increasing else (f_lo >= target > f_hi)
    if not ok:
        raise BracketingError(
            f"bracket ({lo:g}, {hi:g}) does not straddle target {target:g}: "
            f"fractions {f_lo:.4f} and {f_hi:.4f}",
            f_lo,
            f_hi,
        )
    while hi - lo > tolerance:
        mid = 0.5 * (lo + hi)
        step = evaluate(mid)
        steps.append(step)
        above = step.mean_fraction >= target
        if above == increasing:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi), steps, (lo, hi)


def _gilbert_at_max(args):
    generator, seed, rho_max = args
    pattern = generator(seed)
    return build_gilbert(pattern, rho_max)


def estimate_critical_radius(generator, config: ScanConfig, jobs: int = 1, name=None) -> ScanResult:
    """Smallest communication range whose mean largest-component fraction
    reaches ``config.target_fraction``.

    Each replication's pattern is drawn once and reused for every bisection
    step, so the mean fraction is monotone in the range.
    """
    label = name or getattr(generator, "label", "pattern")
    seeds = config.resolved_seeds(f"critical_radius/{label}")
    lo, hi = config.bracket
    graphs = pmap(_gilbert_at_max, [(generator, s, hi) for s in seeds], jobs)
    for g in graphs:
        if g.node_count < 100:
            raise ParameterError(f"pattern has {g.node_count} points; need at least 100")

    def evaluate(rho):
        fr = [component_stats(label_components(g.node_count, g.restrict(rho).edges)).largest_fraction for g in graphs]
        mean, std = _fraction_stats(fr)
        return ScanStep(float(rho), mean, std, len(fr))

    est, steps, final = bisect_threshold(
        evaluate, lo, hi, config.target_fraction, config.tolerance, increasing=True
    )
    return ScanResult(est, steps, config, seeds, final, label)


def largest_fraction_curve(graph: SpatialGraph, rhos) -> np.ndarray:
    """Largest-component fraction at each range in ``rhos`` (graph built at
    ``max(rhos)`` or larger)."""
    return np.array(
        [component_stats(label_components(graph.node_count, graph.restrict(r).edges)).largest_fraction for r in rhos]
    )


@dataclass
class SiteField:
    """Binary site states on the grid ``origin + r * (i + 1/2, j + 1/2)``.

    ``open[i, j]`` refers to column ``i`` (x) and row ``j`` (y); the site's
    box is ``(x0 + i r, x0 + (i+1) r] x (y0 + j r, y0 + (j+1) r]``.
    """

    open: np.ndarray
    cell: float
    origin: tuple[float, float]

    @property
    def shape(self):
        return self.open.shape

    def centers(self) -> np.ndarray:
        nx, ny = self.open.shape
        xs = self.origin[0] + self.cell * (np.arange(nx) + 0.5)
        ys = self.origin[1] + self.cell * (np.arange(ny) + 0.5)
        return np.stack(np.meshgrid(xs, ys, indexing="ij"), axis=-1)


def _grid_count(span: float, cell: float) -> int:
    return max(1, math.ceil(span / cell - 1e-9))


def site_percolation_field(pattern: PointPattern, r: float, window: Window | None = None) -> SiteField:
    """Open every site whose ``r``-box holds at least one pattern point."""
    if not r > 0:
        raise ParameterError("site box size must be positive")
    w = window or pattern.window
    nx, ny = _grid_count(w.width, r), _grid_count(w.height, r)
    grid = np.zeros((nx, ny), dtype=bool)
    if pattern.n:
        p = pattern.points
        ix = np.clip(np.ceil((p[:, 0] - w.x_min) / r).astype(np.int64) - 1, 0, nx - 1)
        iy = np.clip(np.ceil((p[:, 1] - w.y_min) / r).astype(np.int64) - 1, 0, ny - 1)
        grid[ix, iy] = True
    return SiteField(grid, float(r), (w.x_min, w.y_min))


def _grid_crosses(mask: np.ndarray) -> bool:
    mask = np.asarray(mask, dtype=bool)
    if mask.ndim != 2 or mask.size == 0:
        return False
    labels, count = ndimage.label(mask, structure=EIGHT_CONNECTED)
    if count == 0:
        return False
    left = set(np.unique(labels[0, :])) - {0}
    right = set(np.unique(labels[-1, :])) - {0}
    return bool(left & right)


def graph_crosses(graph: SpatialGraph, window: Window, margin: float | None = None) -> bool:
    """True when one component reaches within ``margin`` of both the left
    and right window edges. ``margin`` defaults to ``rho / 2``, i.e. the
    component's Boolean-model discs touch both edges."""
    if graph.points is None:
        raise ParameterError("graph carries no node coordinates")
    if margin is None:
        margin = 0.5 * (graph.rho or 0.0)
    if graph.node_count == 0:
        return False
    labels = label_components(graph.node_count, graph.edges)
    x = graph.points[:, 0]
    left = set(labels[x - window.x_min <= margin].tolist())
    right = set(labels[window.x_max - x <= margin].tolist())
    return bool(left & right)


def crossing_exists(obj, window: Window | None = None, margin: float | None = None) -> bool:
    """Left-right crossing of a site field, boolean grid or spatial graph.

    Grids use 8-connectivity with columns along the first axis; graphs
    need ``window`` (see :func:`graph_crosses`).
    """
    if isinstance(obj, SiteField):
        return _grid_crosses(obj.open)
    if isinstance(obj, SpatialGraph):
        if window is None:
            raise ParameterError("graph crossing needs the window")
        return graph_crosses(obj, window, margin)
    return _grid_crosses(np.asarray(obj, dtype=bool))


def level_set_crossing(field_values, M: float, direction: str = "sub_level") -> bool:
    v = np.asarray(field_values, dtype=float)
    if direction == "sub_level":
        return _grid_crosses(v <= M)
    if direction == "super_level":
        return _grid_crosses(v >= M)
    raise ParameterError(f"unknown level-set direction {direction!r}")


def lower_bound_radius(lam: float, d: int = 2) -> float:
    """Largest radius at which the path-count bound still decays:
    ``0.5 * ((3**d - 2) * lam) ** (-1/d)``."""
    if not lam > 0:
        raise ParameterError("intensity must be positive")
    if d < 1:
        raise ParameterError("dimension must be positive")
    return 0.5 * ((3**d - 2) * lam) ** (-1.0 / d)


def expected_path_count_bound(lam: float, r: float, n: int, d: int = 2) -> float:
    """``((3**d - 2) * lam * (2r)**d) ** n``."""
    if lam < 0 or r < 0 or n < 1:
        raise ParameterError("need lam, r >= 0 and n >= 1")
    return ((3**d - 2) * lam * (2.0 * r) ** d) ** n


def path_bound_base(lam: float, r: float, d: int = 2) -> float:
    return expected_path_count_bound(lam, r, 1, d)


def peierls_void_bound(lam: float, r: float, n: int, d: int = 2) -> float:
    """``exp(-lam * n * (r / sqrt(d))**d)``: chance that ``n`` sites of side
    ``r/sqrt(d)`` are all empty, for a sub-Poisson process."""
    if lam < 0 or r < 0 or n < 1:
        raise ParameterError("need lam, r >= 0 and n >= 1")
    return math.exp(-lam * n * (r / math.sqrt(d)) ** d)


_STEPS = [(dx, dy) for dx in (-1, 0, 1) for dy in (-1, 0, 1) if dx or dy]


def count_open_paths(open_grid: np.ndarray, start: tuple[int, int], n: int) -> int:
    """Number of self-avoiding 8-connected paths of ``n`` open sites
    beginning at ``start`` (exhaustive enumeration)."""
    grid = np.asarray(open_grid, dtype=bool)
    nx, ny = grid.shape
    if n < 1 or not grid[start]:
        return 0
    visited = {start}

    def extend(site, remaining):
        if remaining == 0:
            return 1
        total = 0
        x, y = site
        for dx, dy in _STEPS:
            nxt = (x + dx, y + dy)
            if 0 <= nxt[0] < nx and 0 <= nxt[1] < ny and grid[nxt] and nxt not in visited:
                visited.add(nxt)
                total += extend(nxt, remaining - 1)
                visited.remove(nxt)
        return total

    return extend(start, n - 1)


def open_path_count(pattern: PointPattern, r: float, n: int, origin=None) -> int:
    """Open paths of ``n`` sites from the site containing ``origin`` in the
    ``2r``-discretisation of ``pattern`` (origin defaults to the window
    centre)."""
    w = pattern.window
    cell = 2.0 * r
    if origin is None:
        origin = w.center
    field_ = site_percolation_field(pattern, cell)
    ix = min(max(math.ceil((origin[0] - w.x_min) / cell) - 1, 0), field_.shape[0] - 1)
    iy = min(max(math.ceil((origin[1] - w.y_min) / cell) - 1, 0), field_.shape[1] - 1)
    if min(ix, iy, field_.shape[0] - 1 - ix, field_.shape[1] - 1 - iy) < n - 1:
        raise ParameterError("window too small for paths of this length")
    return count_open_paths(field_.open, (ix, iy), n)


@dataclass
class SandwichResult:
    fine: bool
    gilbert: bool
    coarse: bool

    @property
    def consistent(self) -> bool:
        return (not self.fine or self.gilbert) and (not self.gilbert or self.coarse)


def discretization_sandwich(pattern: PointPattern, r: float) -> SandwichResult:
    """Crossing of the ``r/sqrt(2)`` site field, the Gilbert graph at range
    ``2r`` and the ``2r`` site field, on a free-boundary window.

    fine => gilbert => coarse holds exactly when the window width is a
    multiple of ``2r``, so the last coarse column ends on the right edge.
    """
    w = pattern.window.with_mode("free")
    pat = PointPattern(pattern.points, w, pattern.provenance)
    fine = crossing_exists(site_percolation_field(pat, r / math.sqrt(2.0)))
    g = build_gilbert(pat, 2.0 * r, metric="euclidean")
    gil = graph_crosses(g, w, margin=r)
    coarse = crossing_exists(site_percolation_field(pat, 2.0 * r))
    return SandwichResult(fine, gil, coarse)
