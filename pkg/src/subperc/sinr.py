"""Shot-noise interference, SINR graphs and Poisson Laplace transforms."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate

from .errors import (
    InfeasibleError,
    IntegrationError,
    ParameterError,
    PreconditionError,
)
from .estimates import EstimateWithCI
from .parallel import pmap
from .percolation import ScanConfig, ScanResult, ScanStep, bisect_threshold
from .point_processes import PointPattern, Window
from .rng import derive_seed
from .spatial_graphs import (
    SpatialGraph,
    component_stats,
    cross_pairs,
    label_components,
    neighbor_pairs,
    pair_distances,
    resolve_metric,
)

FAMILIES = ("inverse_poly", "truncated_power")


@dataclass(frozen=True)
class Attenuation:
    """Path-gain function ``l(r)``.

    ``inverse_poly``: ``(1 + r) ** -alpha``.
    ``truncated_power``: ``min(1, (r / r0) ** -alpha)``; flat on ``[0, r0]``.

    ``alpha > 2`` is needed for a finite first moment; smaller exponents
    are accepted so callers can probe divergence, but ``SinrParams``
    rejects them.
    """

    family: str = "inverse_poly"
    alpha: float = 4.0
    r0: float = 1.0

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ParameterError(f"unknown attenuation family {self.family!r}")
        if not self.alpha > 0:
            raise ParameterError("attenuation exponent must be positive")
        if not self.r0 > 0:
            raise ParameterError("r0 must be positive")

    @property
    def has_finite_moment(self) -> bool:
        return self.alpha > 2

    @property
    def l0(self) -> float:
        return 1.0

    def __call__(self, r):
        r = np.asarray(r, dtype=float)
        if self.family == "inverse_poly":
            out = (1.0 + r) ** (-self.alpha)
        else:
            with np.errstate(divide="ignore"):
                out = np.where(r <= self.r0, 1.0, (np.maximum(r, self.r0) / self.r0) ** (-self.alpha))
        return out if out.ndim else float(out)

    def inverse(self, y: float) -> float:
        """Largest ``r`` with ``l(r) >= y``, for ``0 < y <= l(0)``."""
        if y > self.l0:
            raise InfeasibleError(f"gain {y:g} exceeds l(0) = {self.l0:g}")
        if not y > 0:
            raise ParameterError("l has unbounded support; inverse of 0 is infinite")
        if self.family == "inverse_poly":
            return max(y ** (-1.0 / self.alpha) - 1.0, 0.0)
        return self.r0 * y ** (-1.0 / self.alpha)

    def tail_integral(self, R: float) -> float:
        """``int_R^inf l(r) r dr``."""
        if not self.has_finite_moment:
            return math.inf
        a = self.alpha
        if self.family == "inverse_poly":
            u = 1.0 + R
            return u ** (2 - a) / (a - 2) - u ** (1 - a) / (a - 1)
        if R >= self.r0:
            return self.r0**a * R ** (2 - a) / (a - 2)
        return 0.5 * (self.r0**2 - R**2) + self.r0**2 / (a - 2)

    def to_dict(self) -> dict:
        return {"family": self.family, "alpha": self.alpha, "r0": self.r0}


@dataclass(frozen=True)
class SinrParams:
    P: float = 1.0
    N: float = 1.0
    T: float = 1.0
    gamma: float = 0.0
    attenuation: Attenuation = Attenuation()

    def __post_init__(self):
        if not self.P > 0:
            raise ParameterError("signal power P must be positive")
        if self.N < 0:
            raise ParameterError("noise power N must be nonnegative")
        if not self.T > 0:
            raise ParameterError("SINR threshold T must be positive")
        if self.gamma < 0:
            raise ParameterError("interference factor gamma must be nonnegative")
        if not self.attenuation.has_finite_moment:
            raise ParameterError("attenuation needs alpha > 2")
        if self.attenuation.l0 < self.T * self.N / self.P:
            raise InfeasibleError("l(0) < T N / P: no link is feasible")

    def with_gamma(self, gamma: float) -> "SinrParams":
        return replace(self, gamma=float(gamma))


def _attenuation_of(obj) -> Attenuation:
    return obj.attenuation if isinstance(obj, SinrParams) else obj


def _distances_to(pattern: PointPattern, x, torus: bool) -> np.ndarray:
    return pair_distances(np.asarray(x, float)[None, :], pattern.points, pattern.window, torus)


def _same_point(points: np.ndarray, x) -> np.ndarray:
    return (points[:, 0] == x[0]) & (points[:, 1] == x[1])


def interference_at(
    pattern: PointPattern, x, params, exclude=None, cutoff: float | None = None, metric=None
) -> float:
    """Shot noise ``sum l(|X - x|)`` over pattern points other than ``x``
    and ``exclude``.

    With ``cutoff`` only points within that distance are summed (via the
    cell list); see :func:`interference_tail_bound` for the expected
    remainder.
    """
    att = _attenuation_of(params)
    if pattern.n == 0:
        return 0.0
    torus = resolve_metric(pattern.window, metric)
    x = np.asarray(x, dtype=float)
    if cutoff is None:
        idx = np.arange(pattern.n)
        d = _distances_to(pattern, x, torus)
    else:
        _, idx, d = cross_pairs(x[None, :], pattern.points, pattern.window, cutoff, torus)
    pts = pattern.points[idx]
    keep = ~_same_point(pts, x)
    if exclude is not None:
        keep &= ~_same_point(pts, np.asarray(exclude, dtype=float))
    return float(np.sum(att(d[keep])))


def interference_tail_bound(intensity: float, params, cutoff: float) -> float:
    """Expected shot noise from beyond ``cutoff`` for a process of the given
    intensity: ``2 pi lambda int_cutoff^inf l(r) r dr``."""
    return 2.0 * math.pi * intensity * _attenuation_of(params).tail_integral(cutoff)


def interference_field(pattern: PointPattern, locations, params, metric=None, chunk=512) -> np.ndarray:
    """Shot noise at each location, skipping pattern points that coincide
    with the location."""
    att = _attenuation_of(params)
    loc = np.asarray(locations, dtype=float).reshape(-1, 2)
    out = np.zeros(loc.shape[0])
    if pattern.n == 0:
        return out
    torus = resolve_metric(pattern.window, metric)
    for s in range(0, loc.shape[0], chunk):
        q = loc[s : s + chunk]
        d = pair_distances(q[:, None, :], pattern.points[None, :, :], pattern.window, torus)
        g = att(d)
        same = (q[:, None, 0] == pattern.points[None, :, 0]) & (q[:, None, 1] == pattern.points[None, :, 1])
        g[same] = 0.0
        out[s : s + chunk] = g.sum(axis=1)
    return out


def interference_grid(pattern: PointPattern, params, nx: int, ny: int, metric=None):
    """Shot noise on an ``nx`` by ``ny`` grid of cell centres.

    Returns ``(xs, ys, values)`` with ``values[i, j]`` at ``(xs[i], ys[j])``.
    """
    w = pattern.window
    xs = w.x_min + (np.arange(nx) + 0.5) * w.width / nx
    ys = w.y_min + (np.arange(ny) + 0.5) * w.height / ny
    gx, gy = np.meshgrid(xs, ys, indexing="ij")
    vals = interference_field(pattern, np.column_stack([gx.ravel(), gy.ravel()]), params, metric)
    return xs, ys, vals.reshape(nx, ny)


def snr_range(params: SinrParams) -> float:
    """Range of the interference-free graph, ``l^-1(T N / P)``."""
    if not params.N > 0:
        raise ParameterError("with N = 0 the SNR range is infinite")
    return params.attenuation.inverse(params.T * params.N / params.P)


def sinr_value(x, y, interferers: PointPattern, params: SinrParams, metric=None) -> float:
    """SINR from ``x`` to ``y``: ``P l(|x-y|) / (N + gamma P I(y))`` where the
    interference at ``y`` omits ``x`` itself."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    torus = resolve_metric(interferers.window, metric)
    signal = params.P * params.attenuation(float(pair_distances(x, y, interferers.window, torus)))
    interference = interference_at(interferers, y, params, exclude=x, metric=metric)
    denom = params.N + params.gamma * params.P * interference
    if not denom > 0:
        raise ParameterError("SINR denominator vanishes (N = 0 and no interference)")
    return signal / denom


@dataclass
class SinrLinkTable:
    """Candidate links of one realisation with the quantities needed to
    decide them at any ``gamma``.

    For a candidate pair ``(i, j)``: ``signal = P l(d)``, ``i_at_j`` is the
    interference at ``j`` without ``i``, ``i_at_i`` the interference at
    ``i`` without ``j``.
    """

    node_count: int
    pairs: np.ndarray
    signal: np.ndarray
    i_at_j: np.ndarray
    i_at_i: np.ndarray
    params: SinrParams
    metric: str
    points: np.ndarray

    def edge_mask(self, gamma: float) -> np.ndarray:
        p = self.params
        with np.errstate(divide="ignore", invalid="ignore"):
            fwd = self.signal / (p.N + gamma * p.P * self.i_at_j)
            bwd = self.signal / (p.N + gamma * p.P * self.i_at_i)
        return (fwd > p.T) & (bwd > p.T)

    def graph(self, gamma: float) -> SpatialGraph:
        return SpatialGraph(self.node_count, self.pairs[self.edge_mask(gamma)], self.metric, None, None, self.points)

    def largest_fraction(self, gamma: float) -> float:
        if self.node_count == 0:
            return 0.0
        return component_stats(label_components(self.node_count, self.pairs[self.edge_mask(gamma)])).largest_fraction


def sinr_link_table(backbone: PointPattern, interferers: PointPattern, params: SinrParams, metric=None) -> SinrLinkTable:
    torus = resolve_metric(backbone.window, metric)
    win = backbone.window
    pts = backbone.points
    if params.N > 0:
        i, j, d = neighbor_pairs(pts, win, snr_range(params), torus)
    else:
        i, j = np.triu_indices(backbone.n, k=1)
        d = pair_distances(pts[i], pts[j], win, torus)
    gain = params.attenuation(d)
    # interference at every node from all interferers not located at the node
    ifield = interference_field(interferers, pts, params, "torus" if torus else "euclidean")
    # Phi \ {x}: remove the transmitter's own contribution if it is an interferer
    if interferers.n:
        key = {}
        for p in map(tuple, interferers.points.tolist()):
            key[p] = key.get(p, 0) + 1
        mult = np.array([key.get(p, 0) for p in map(tuple, pts.tolist())], dtype=float)
    else:
        mult = np.zeros(backbone.n)
    i_at_j = np.maximum(ifield[j] - mult[i] * gain, 0.0)
    i_at_i = np.maximum(ifield[i] - mult[j] * gain, 0.0)
    return SinrLinkTable(
        backbone.n,
        np.column_stack([i, j]).astype(np.int64),
        params.P * gain,
        i_at_j,
        i_at_i,
        params,
        "torus" if torus else "euclidean",
        pts,
    )


def build_sinr_graph(backbone: PointPattern, interferers: PointPattern, params: SinrParams, metric=None) -> SpatialGraph:
    """Edge ``{x, y}`` iff the SINR exceeds ``T`` in both directions."""
    return sinr_link_table(backbone, interferers, params, metric).graph(params.gamma)


def link_table_for_seed(args):
    backbone_gen, interferer_gen, params, seed, include_backbone = args
    backbone = backbone_gen(derive_seed(seed, "backbone"))
    interferers = interferer_gen(derive_seed(seed, "interferers"))
    if include_backbone:
        interferers = interferers.with_points(np.vstack([backbone.points, interferers.points]))
    return sinr_link_table(backbone, interferers, params)


def estimate_gamma_c(
    backbone_generator,
    interferer_generator,
    params_base: SinrParams,
    scan: ScanConfig,
    jobs: int = 1,
    include_backbone: bool = False,
    name: str = "sinr",
) -> ScanResult:
    """Largest interference factor keeping the mean largest-component
    fraction at or above the target, by bisection on ``gamma``.

    ``include_backbone`` adds the backbone nodes to the interferer set.
    """
    seeds = scan.resolved_seeds(f"gamma_c/{name}")
    tables = pmap(
        link_table_for_seed,
        [(backbone_generator, interferer_generator, params_base, s, include_backbone) for s in seeds],
        jobs,
    )

    def evaluate(gamma):
        fr = np.array([t.largest_fraction(gamma) for t in tables])
        std = float(fr.std(ddof=1)) if fr.size > 1 else 0.0
        return ScanStep(float(gamma), float(fr.mean()), std, int(fr.size))

    lo, hi = scan.bracket
    first = evaluate(lo)
    if first.mean_fraction < scan.target_fraction:
        raise PreconditionError(
            f"largest fraction at gamma={lo:g} is {first.mean_fraction:.4f}, "
            f"below target {scan.target_fraction:g}"
        )
    est, steps, final = bisect_threshold(
        evaluate, lo, hi, scan.target_fraction, scan.tolerance, increasing=False
    )
    return ScanResult(est, steps, scan, seeds, final, name)


def gamma_fraction_curve(table: SinrLinkTable, gammas) -> np.ndarray:
    return np.array([table.largest_fraction(g) for g in gammas])


def empirical_joint_laplace(interference_samples, s: float) -> EstimateWithCI:
    """Monte Carlo ``E[exp(s * sum_i I(x_i))]``; rows are replications."""
    v = np.asarray(interference_samples, dtype=float)
    if v.size == 0:
        raise ParameterError("no interference samples")
    if v.ndim == 1:
        v = v[:, None]
    return EstimateWithCI.from_samples(np.exp(s * v.sum(axis=1)))


def poisson_laplace_closed_form(lam: float, attenuation: Attenuation, s: float) -> float:
    """``E[exp(s I)]`` for Poisson shot noise of intensity ``lam``:
    ``exp(2 pi lam int_0^inf (exp(s l(r)) - 1) r dr)``."""
    if lam < 0:
        raise ParameterError("intensity must be nonnegative")
    if lam == 0 or s == 0:
        return 1.0
    if not attenuation.has_finite_moment:
        raise IntegrationError("shot-noise integral diverges for alpha <= 2")

    def f(r):
        return math.expm1(s * attenuation(r)) * r

    brk = max(10.0, 10.0 * (attenuation.r0 if attenuation.family == "truncated_power" else 1.0))
    pts = [attenuation.r0] if attenuation.family == "truncated_power" else None
    with warnings.catch_warnings():
        warnings.simplefilter("error", integrate.IntegrationWarning)
        try:
            core, _ = integrate.quad(f, 0.0, brk, points=pts, epsabs=0.0, epsrel=1e-12, limit=200)
            tail, _ = integrate.quad(f, brk, math.inf, epsabs=0.0, epsrel=1e-12, limit=200)
        except integrate.IntegrationWarning as exc:
            raise IntegrationError(str(exc)) from exc
    return math.exp(2.0 * math.pi * lam * (core + tail))


def sample_interference(generator, locations, params, seeds, metric=None) -> np.ndarray:
    """Shot noise at fixed locations for each seeded realisation; shape
    ``(len(seeds), len(locations))``."""
    return np.vstack([interference_field(generator(s), locations, params, metric) for s in seeds])
