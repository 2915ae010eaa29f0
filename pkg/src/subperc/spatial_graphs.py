"""Gilbert and carrier-sense graphs over point patterns.

Neighbour search uses a uniform cell list (cell side >= search radius,
3x3 stencil, wrapped on a torus), so construction is linear in points plus
candidate pairs. ``brute_force_pairs`` is kept as a reference for tests.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse import csgraph

from .errors import ParameterError
from .point_processes import PointPattern, Window

METRICS = ("euclidean", "torus")

# Relative slack for distance ties. Lattice neighbours at exactly the range
# can come out one ulp long after coordinate arithmetic; without slack the
# unit lattice would not connect at rho = 1.
TIE_RTOL = 1e-12


def within_range(d, radius: float, strict=False) -> np.ndarray:
    """``d <= radius`` (or ``d < radius`` when ``strict``), up to ``TIE_RTOL``."""
    if strict:
        return d < radius * (1.0 - TIE_RTOL)
    return d <= radius * (1.0 + TIE_RTOL)


def resolve_metric(window: Window, metric: str | None) -> bool:
    """True when distances should use the minimum-image (torus) convention."""
    if metric is None:
        return window.is_torus
    if metric not in METRICS:
        raise ParameterError(f"unknown metric {metric!r}")
    return metric == "torus"


def _displacements(a, b, window: Window, torus: bool) -> np.ndarray:
    d = b - a
    if torus:
        span = np.array([window.width, window.height])
        d = d - span * np.round(d / span)
    return d


def pair_distances(a, b, window: Window, torus: bool) -> np.ndarray:
    d = _displacements(np.asarray(a, float), np.asarray(b, float), window, torus)
    return np.hypot(d[..., 0], d[..., 1])


class CellList:
    """Uniform binning of ``data`` points for fixed-radius queries."""

    def __init__(self, data, window: Window, radius: float, torus: bool, extent=None):
        self.data = np.asarray(data, dtype=float).reshape(-1, 2)
        self.window = window
        self.torus = torus
        n = max(self.data.shape[0], 1)
        if torus:
            lo = np.array([window.x_min, window.y_min])
            span = np.array([window.width, window.height])
        else:
            pts = self.data if extent is None else np.vstack([self.data, extent])
            if pts.shape[0] == 0:
                pts = np.array([[window.x_min, window.y_min]])
            lo = pts.min(axis=0)
            span = np.maximum(pts.max(axis=0) - lo, 1e-12)
        # side >= radius; also cap the number of cells at about 4 per point
        side = max(float(radius), math.sqrt(span[0] * span[1] / (4.0 * n)), 1e-12)
        if torus:
            shape = np.maximum(np.floor(span / side).astype(int), 1)
        else:
            shape = np.floor(span / side).astype(int) + 1
        self.lo = lo
        self.shape = shape
        self.cell_size = span / shape if torus else np.array([side, side])
        # a torus stencil with fewer than 3 cells per axis would revisit cells
        self.degenerate = bool(torus and (shape < 3).any())
        cells = self._cell_index(self.data)
        self.order = np.argsort(cells, kind="stable")
        ncell = int(shape[0] * shape[1])
        self.counts = np.bincount(cells, minlength=ncell)
        self.starts = np.concatenate([[0], np.cumsum(self.counts)[:-1]])

    def _cell_coords(self, pts) -> np.ndarray:
        c = np.floor((pts - self.lo) / self.cell_size).astype(np.int64)
        return np.clip(c, 0, self.shape - 1)

    def _cell_index(self, pts) -> np.ndarray:
        c = self._cell_coords(pts)
        return c[:, 0] * self.shape[1] + c[:, 1]

    def candidates(self, query) -> tuple[np.ndarray, np.ndarray]:
        """Index pairs ``(qi, dj)`` for all data points in the 3x3 cell
        neighbourhood of each query point."""
        query = np.asarray(query, dtype=float).reshape(-1, 2)
        nq = query.shape[0]
        if self.degenerate:
            qi, dj = np.meshgrid(np.arange(nq), np.arange(self.data.shape[0]), indexing="ij")
            return qi.ravel(), dj.ravel()
        qc = self._cell_coords(query)
        qis, djs = [], []
        for ox in (-1, 0, 1):
            for oy in (-1, 0, 1):
                cx = qc[:, 0] + ox
                cy = qc[:, 1] + oy
                if self.torus:
                    cx %= self.shape[0]
                    cy %= self.shape[1]
                    valid = np.ones(nq, dtype=bool)
                else:
                    valid = (cx >= 0) & (cx < self.shape[0]) & (cy >= 0) & (cy < self.shape[1])
                cell = np.where(valid, cx * self.shape[1] + cy, 0)
                cnt = np.where(valid, self.counts[cell], 0)
                total = int(cnt.sum())
                if total == 0:
                    continue
                qi = np.repeat(np.arange(nq), cnt)
                first = np.repeat(np.cumsum(cnt) - cnt, cnt)
                pos = np.arange(total) - first
                dj = self.order[np.repeat(self.starts[cell], cnt) + pos]
                qis.append(qi)
                djs.append(dj)
        if not qis:
            return np.empty(0, np.int64), np.empty(0, np.int64)
        return np.concatenate(qis), np.concatenate(djs)


def neighbor_pairs(points, window: Window, radius: float, torus: bool, strict=False):
    """Unordered pairs ``i < j`` with distance ``<= radius`` (``<`` if strict).

    Returns ``(i, j, dist)`` sorted lexicographically by ``(i, j)``.
    """
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    cl = CellList(pts, window, radius * (1.0 + 2 * TIE_RTOL), torus)
    qi, dj = cl.candidates(pts)
    keep = qi < dj
    qi, dj = qi[keep], dj[keep]
    d = pair_distances(pts[qi], pts[dj], window, torus)
    keep = within_range(d, radius, strict)
    qi, dj, d = qi[keep], dj[keep], d[keep]
    order = np.lexsort((dj, qi))
    return qi[order], dj[order], d[order]


def cross_pairs(query, data, window: Window, radius: float, torus: bool, strict=False):
    """Pairs ``(qi, dj, dist)`` between two point sets within ``radius``."""
    q = np.asarray(query, dtype=float).reshape(-1, 2)
    cl = CellList(data, window, radius * (1.0 + 2 * TIE_RTOL), torus, extent=q if q.size else None)
    qi, dj = cl.candidates(q)
    d = pair_distances(q[qi], cl.data[dj], window, torus)
    keep = within_range(d, radius, strict)
    return qi[keep], dj[keep], d[keep]


def brute_force_pairs(points, window: Window, radius: float, torus: bool, strict=False):
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    i, j = np.triu_indices(pts.shape[0], k=1)
    d = pair_distances(pts[i], pts[j], window, torus)
    keep = within_range(d, radius, strict)
    return i[keep], j[keep], d[keep]


@dataclass
class SpatialGraph:
    """Undirected simple graph on pattern indices.

    ``edges`` is an ``(m, 2)`` integer array with ``i < j`` rows in
    lexicographic order; ``lengths`` holds the matching edge lengths when
    known.
    """

    node_count: int
    edges: np.ndarray
    metric: str = "euclidean"
    rho: float | None = None
    lengths: np.ndarray | None = None
    points: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.edges = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)

    @property
    def edge_count(self) -> int:
        return self.edges.shape[0]

    def edge_set(self) -> set[tuple[int, int]]:
        return set(map(tuple, self.edges.tolist()))

    def degrees(self) -> np.ndarray:
        return np.bincount(self.edges.ravel(), minlength=self.node_count)

    def restrict(self, rho: float, strict=False) -> "SpatialGraph":
        """Subgraph keeping edges no longer than ``rho``; needs ``lengths``."""
        if self.lengths is None:
            raise ParameterError("graph has no edge lengths to restrict on")
        keep = within_range(self.lengths, rho, strict)
        return SpatialGraph(
            self.node_count, self.edges[keep], self.metric, rho, self.lengths[keep], self.points
        )


def build_gilbert(pattern: PointPattern, rho: float, metric=None, strict=False) -> SpatialGraph:
    """Join every pair at distance ``<= rho`` (``< rho`` when ``strict``).

    Comparisons carry a ``1e-12`` relative tie tolerance (see ``TIE_RTOL``).
    """
    if rho < 0 or not np.isfinite(rho):
        raise ParameterError("communication range must be a nonnegative number")
    torus = resolve_metric(pattern.window, metric)
    i, j, d = neighbor_pairs(pattern.points, pattern.window, rho, torus, strict=strict)
    return SpatialGraph(
        pattern.n,
        np.column_stack([i, j]),
        "torus" if torus else "euclidean",
        float(rho),
        d,
        pattern.points,
    )


def build_carrier_sense(
    backbone: PointPattern, interferers: PointPattern, rho: float, R: float, metric=None
) -> SpatialGraph:
    """Gilbert graph on ``backbone`` minus every node that senses an
    interferer within distance ``R``."""
    if not rho > 0:
        raise ParameterError("communication range must be positive")
    if not R > rho:
        raise ParameterError("sensing range R must exceed the communication range")
    g = build_gilbert(backbone, rho, metric)
    torus = g.metric == "torus"
    if interferers.n == 0 or g.edge_count == 0:
        return g
    qi, _, _ = cross_pairs(backbone.points, interferers.points, backbone.window, R, torus)
    blocked = np.zeros(backbone.n, dtype=bool)
    blocked[qi] = True
    keep = ~(blocked[g.edges[:, 0]] | blocked[g.edges[:, 1]])
    return SpatialGraph(g.node_count, g.edges[keep], g.metric, rho, g.lengths[keep], g.points)


@dataclass
class ComponentStats:
    labels: np.ndarray
    sizes_desc: np.ndarray
    largest_fraction: float
    top10_fractions: np.ndarray

    @property
    def component_count(self) -> int:
        return len(self.sizes_desc)

    def largest_component(self) -> np.ndarray:
        """Node indices of a largest component (smallest label on ties)."""
        if self.labels.size == 0:
            return np.empty(0, dtype=np.int64)
        sizes = np.bincount(self.labels)
        return np.flatnonzero(self.labels == int(np.argmax(sizes)))


def label_components(node_count: int, edges) -> np.ndarray:
    """Component labels numbered by each component's smallest node index."""
    if node_count == 0:
        return np.empty(0, dtype=np.int64)
    e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
    adj = sparse.coo_matrix((np.ones(len(e), dtype=np.int8), (e[:, 0], e[:, 1])), shape=(node_count, node_count))
    _, raw = csgraph.connected_components(adj, directed=False)
    # relabel in order of first appearance, i.e. by smallest member
    _, first, inverse = np.unique(raw, return_index=True, return_inverse=True)
    rank = np.empty(first.size, dtype=np.int64)
    rank[np.argsort(first)] = np.arange(first.size)
    return rank[inverse]


def component_stats(labels: np.ndarray) -> ComponentStats:
    n = labels.size
    sizes = np.sort(np.bincount(labels))[::-1] if n else np.empty(0, dtype=np.int64)
    top = np.zeros(10)
    if n:
        k = min(10, sizes.size)
        top[:k] = sizes[:k] / n
    largest = float(sizes[0] / n) if n else 0.0
    return ComponentStats(labels, sizes, largest, top)


def connected_components(graph: SpatialGraph) -> ComponentStats:
    return component_stats(label_components(graph.node_count, graph.edges))
