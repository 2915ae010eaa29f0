"""Seeded samplers for planar point patterns on rectangular windows.

Covers the regularity spectrum used throughout the package: the unperturbed
triangular lattice, perturbed lattices with arbitrary replica-count laws
(binomial sub-Poisson, Poisson, Cox super-Poisson), and the homogeneous
Poisson process.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import GeometryError, ParameterError
from .rng import make_rng

SQRT3 = math.sqrt(3.0)
BOUNDARY_MODES = ("torus", "free")


@dataclass(frozen=True)
class Window:
    """Axis-aligned rectangle ``[x_min, x_max) x [y_min, y_max)``.

    With ``boundary_mode="torus"`` opposite edges are identified and all
    distances use the minimum-image convention.
    """

    x_min: float
    x_max: float
    y_min: float
    y_max: float
    boundary_mode: str = "torus"

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise GeometryError(f"degenerate window {self}")
        if self.boundary_mode not in BOUNDARY_MODES:
            raise ParameterError(f"unknown boundary mode {self.boundary_mode!r}")

    @classmethod
    def square(cls, side, boundary_mode="torus"):
        return cls(0.0, float(side), 0.0, float(side), boundary_mode)

    @property
    def width(self) -> float:
        return self.x_max - self.x_min

    @property
    def height(self) -> float:
        return self.y_max - self.y_min

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def is_torus(self) -> bool:
        return self.boundary_mode == "torus"

    @property
    def center(self) -> tuple[float, float]:
        return (0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def with_mode(self, boundary_mode: str) -> "Window":
        return Window(self.x_min, self.x_max, self.y_min, self.y_max, boundary_mode)

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        return (
            (p[:, 0] >= self.x_min)
            & (p[:, 0] < self.x_max)
            & (p[:, 1] >= self.y_min)
            & (p[:, 1] < self.y_max)
        )

    def wrap(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        out = np.empty_like(p)
        out[:, 0] = self.x_min + np.mod(p[:, 0] - self.x_min, self.width)
        out[:, 1] = self.y_min + np.mod(p[:, 1] - self.y_min, self.height)
        # np.mod can round up to the period itself
        out[:, 0] = np.where(out[:, 0] >= self.x_max, self.x_min, out[:, 0])
        out[:, 1] = np.where(out[:, 1] >= self.y_max, self.y_min, out[:, 1])
        return out

    def displacement(self, a, b) -> np.ndarray:
        """Vector ``b - a`` under this window's metric (broadcasting)."""
        d = np.asarray(b, dtype=float) - np.asarray(a, dtype=float)
        if self.is_torus:
            d = d.copy()
            span = np.array([self.width, self.height])
            d -= span * np.round(d / span)
        return d

    def distance(self, a, b) -> np.ndarray:
        d = self.displacement(a, b)
        return np.hypot(d[..., 0], d[..., 1])

    def to_dict(self) -> dict:
        return {
            "x_min": self.x_min,
            "x_max": self.x_max,
            "y_min": self.y_min,
            "y_max": self.y_max,
            "boundary_mode": self.boundary_mode,
        }

    @classmethod
    def from_dict(cls, d) -> "Window":
        return cls(
            float(d["x_min"]),
            float(d["x_max"]),
            float(d["y_min"]),
            float(d["y_max"]),
            d.get("boundary_mode", "torus"),
        )


@dataclass(frozen=True)
class PointPattern:
    """Finite planar point set with its window and generator provenance."""

    points: np.ndarray
    window: Window
    provenance: dict = field(default_factory=dict)

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).reshape(-1, 2)
        if pts.size and not np.all(self.window.contains(pts)):
            raise GeometryError("pattern has points outside its window")
        object.__setattr__(self, "points", pts)

    def __len__(self):
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[0]

    @property
    def empirical_intensity(self) -> float:
        return self.n / self.window.area

    def with_points(self, points, **provenance) -> "PointPattern":
        prov = dict(self.provenance)
        prov.update(provenance)
        return PointPattern(points, self.window, prov)


@dataclass(frozen=True)
class Lattice:
    """Triangular lattice with nearest-neighbour distance ``spacing``.

    Rows are horizontal, ``spacing * sqrt(3)/2`` apart, odd rows shifted by
    half a spacing. The Voronoi cell of each site is a regular hexagon with
    apothem ``spacing / 2`` and vertical flat sides.
    """

    spacing: float = 1.0
    origin: tuple[float, float] | None = None
    kind: str = "triangular"

    def __post_init__(self):
        if not self.spacing > 0:
            raise ParameterError("lattice spacing must be positive")
        if self.kind != "triangular":
            raise ParameterError(f"unsupported lattice kind {self.kind!r}")
        if self.origin is None:
            object.__setattr__(
                self, "origin", (0.25 * self.spacing, 0.25 * self.row_height)
            )

    @property
    def row_height(self) -> float:
        return 0.5 * SQRT3 * self.spacing

    @property
    def intensity(self) -> float:
        return 2.0 / (SQRT3 * self.spacing**2)

    @property
    def apothem(self) -> float:
        return 0.5 * self.spacing

    @property
    def circumradius(self) -> float:
        return 2.0 * self.apothem / SQRT3

    def shifted(self, dx: float, dy: float) -> "Lattice":
        return Lattice(self.spacing, (self.origin[0] + dx, self.origin[1] + dy))

    def fitted_window(self, n_cols: int, n_rows: int, boundary_mode="torus") -> Window:
        """Window holding exactly ``n_cols * n_rows`` sites, periodic when
        ``n_rows`` is even."""
        return Window(
            0.0, n_cols * self.spacing, 0.0, n_rows * self.row_height, boundary_mode
        )

    def is_periodic_in(self, window: Window, rtol=1e-9) -> bool:
        cols = window.width / self.spacing
        pairs = window.height / (2.0 * self.row_height)
        return (
            abs(cols - round(cols)) <= rtol * cols
            and abs(pairs - round(pairs)) <= rtol * pairs
            and round(cols) >= 1
            and round(pairs) >= 1
        )

    def sites(self, window: Window, margin: float = 0.0) -> np.ndarray:
        """All sites in the window grown by ``margin`` (half-open)."""
        ox, oy = self.origin
        h = self.row_height
        j0 = math.ceil((window.y_min - margin - oy) / h)
        j1 = math.floor((window.y_max + margin - oy) / h)
        rows = []
        for j in range(j0, j1 + 1):
            y = oy + j * h
            x0 = ox + (j % 2) * 0.5 * self.spacing
            i0 = math.ceil((window.x_min - margin - x0) / self.spacing)
            i1 = math.floor((window.x_max + margin - x0) / self.spacing)
            if i1 < i0:
                continue
            xs = x0 + self.spacing * np.arange(i0, i1 + 1)
            rows.append(np.column_stack([xs, np.full(xs.shape, y)]))
        if not rows:
            return np.empty((0, 2))
        s = np.vstack(rows)
        keep = (
            (s[:, 0] >= window.x_min - margin)
            & (s[:, 0] < window.x_max + margin)
            & (s[:, 1] >= window.y_min - margin)
            & (s[:, 1] < window.y_max + margin)
        )
        return s[keep]


def _fmt_prob(p: float) -> str:
    f = Fraction(p).limit_denominator(1000)
    if abs(float(f) - p) < 1e-12:
        return str(f)
    return repr(p)


@dataclass(frozen=True)
class ReplicaLaw:
    """Law of the number of replicas placed in each lattice cell.

    Build instances with the class methods: ``binomial(n, p)``,
    ``poisson(mean)``, ``cox_bernoulli(a)`` (``L = a`` w.p. ``1/a`` else 0,
    then ``Poisson(L)``) and ``scaled_poisson(n)`` (``n * Poisson(1/n)``).
    """

    variant: str
    n: int = 1
    p: float = 1.0
    mean_param: float = 1.0
    a: float = 1.0

    @classmethod
    def binomial(cls, n: int, p: float | None = None) -> "ReplicaLaw":
        if int(n) != n or n < 1:
            raise ParameterError("binomial n must be a positive integer")
        p = 1.0 / n if p is None else float(p)
        if not 0.0 <= p <= 1.0:
            raise ParameterError("binomial p must be a probability")
        return cls("binomial", n=int(n), p=p)

    @classmethod
    def poisson(cls, mean: float = 1.0) -> "ReplicaLaw":
        if mean < 0:
            raise ParameterError("poisson mean must be nonnegative")
        return cls("poisson", mean_param=float(mean))

    @classmethod
    def cox_bernoulli(cls, a: float) -> "ReplicaLaw":
        if a < 1:
            raise ParameterError("Cox-Bernoulli parameter a must be >= 1")
        return cls("cox_bernoulli", a=float(a))

    @classmethod
    def scaled_poisson(cls, n: int) -> "ReplicaLaw":
        if int(n) != n or n < 1:
            raise ParameterError("scaled Poisson n must be a positive integer")
        return cls("scaled_poisson", n=int(n))

    @classmethod
    def parse(cls, text: str) -> "ReplicaLaw":
        """Parse labels such as ``Bin(2,1/2)``, ``Poi(1)``, ``Cox(5)``, ``SPoi(3)``."""
        s = text.replace(" ", "")
        name, _, rest = s.partition("(")
        if not rest.endswith(")"):
            raise ParameterError(f"cannot parse replica law {text!r}")
        args = [a for a in rest[:-1].split(",") if a]
        vals = [float(Fraction(a)) for a in args]
        key = name.lower()
        if key in ("bin", "binomial"):
            if len(vals) == 1:
                return cls.binomial(int(vals[0]))
            return cls.binomial(int(vals[0]), vals[1])
        if key in ("poi", "poisson"):
            return cls.poisson(vals[0] if vals else 1.0)
        if key in ("cox", "coxbernoulli", "cox_bernoulli"):
            return cls.cox_bernoulli(vals[0])
        if key in ("spoi", "scaledpoisson", "scaled_poisson"):
            return cls.scaled_poisson(int(vals[0]))
        raise ParameterError(f"unknown replica law {text!r}")

    @property
    def mean(self) -> float:
        if self.variant == "binomial":
            return self.n * self.p
        if self.variant == "poisson":
            return self.mean_param
        return 1.0

    @property
    def label(self) -> str:
        if self.variant == "binomial":
            return f"Bin({self.n},{_fmt_prob(self.p)})"
        if self.variant == "poisson":
            return f"Poi({self.mean_param:g})"
        if self.variant == "cox_bernoulli":
            return f"Cox({self.a:g})"
        return f"SPoi({self.n})"

    def sample(self, rng: np.random.Generator, size=None):
        if self.variant == "binomial":
            return rng.binomial(self.n, self.p, size=size)
        if self.variant == "poisson":
            return rng.poisson(self.mean_param, size=size)
        if self.variant == "cox_bernoulli":
            lam = np.where(rng.random(size=size) < 1.0 / self.a, self.a, 0.0)
            return rng.poisson(lam)
        return self.n * rng.poisson(1.0 / self.n, size=size)


def sample_replica_count(law: ReplicaLaw, rng: np.random.Generator) -> int:
    return int(law.sample(rng))


def in_hexagon(offsets, apothem: float) -> np.ndarray:
    """Membership in the closed hexagon with vertical flat sides at ``+-apothem``."""
    d = np.abs(np.asarray(offsets, dtype=float).reshape(-1, 2))
    return (d[:, 0] <= apothem) & (0.5 * d[:, 0] + 0.5 * SQRT3 * d[:, 1] <= apothem)


def hexagon_offsets(count: int, apothem: float, rng: np.random.Generator):
    """Draw ``count`` uniform offsets in the hexagon by bounding-box rejection.

    Returns ``(offsets, proposals)``; ``count / proposals`` tends to 3/4.
    """
    half_h = 2.0 * apothem / SQRT3
    out = np.empty((count, 2))
    filled = 0
    proposals = 0
    while filled < count:
        need = count - filled
        batch = int(need / 0.75) + 16
        u = rng.random((batch, 2))
        cand = np.column_stack(
            [(2.0 * u[:, 0] - 1.0) * apothem, (2.0 * u[:, 1] - 1.0) * half_h]
        )
        idx = np.flatnonzero(in_hexagon(cand, apothem))[:need]
        out[filled : filled + idx.size] = cand[idx]
        filled += idx.size
        # count proposals up to the last one actually used
        proposals += int(idx[-1]) + 1 if idx.size == need else batch
    return out, proposals


def sample_uniform_in_hexagon(center, apothem: float, rng: np.random.Generator):
    if not apothem > 0:
        raise ParameterError("apothem must be positive")
    off, _ = hexagon_offsets(1, apothem, rng)
    return (float(center[0] + off[0, 0]), float(center[1] + off[0, 1]))


def sample_homogeneous_poisson(intensity: float, window: Window, seed: int) -> PointPattern:
    if intensity < 0:
        raise ParameterError("intensity must be nonnegative")
    rng = make_rng(seed)
    n = rng.poisson(intensity * window.area)
    u = rng.random((n, 2))
    pts = np.column_stack(
        [window.x_min + u[:, 0] * window.width, window.y_min + u[:, 1] * window.height]
    )
    # guard against x_min + 1.0*width rounding onto the open edge
    pts = np.minimum(pts, np.nextafter([window.x_max, window.y_max], -np.inf))
    prov = {"generator": "poisson", "intensity": float(intensity), "seed": int(seed)}
    return PointPattern(pts, window, prov)


def triangular_lattice_pattern(lattice: Lattice, window: Window) -> PointPattern:
    if window.is_torus and not lattice.is_periodic_in(window):
        raise GeometryError("torus window is not a period of the lattice")
    prov = {"generator": "lattice", "spacing": lattice.spacing, "origin": list(lattice.origin)}
    return PointPattern(lattice.sites(window), window, prov)


def sample_perturbed_lattice(
    lattice: Lattice,
    law: ReplicaLaw,
    window: Window,
    seed: int,
    random_shift: bool = False,
) -> PointPattern:
    """Replicate each lattice site ``N ~ law`` times, displacing every
    replica uniformly in the site's hexagonal Voronoi cell.

    On a torus window (which must be a lattice period) displaced points are
    wrapped. With a free boundary every site whose cell meets the window
    contributes and points outside are discarded. ``random_shift`` moves the
    lattice by a uniform vector in one fundamental cell first, which makes
    the resulting process stationary.
    """
    if random_shift:
        sx, sy = make_rng(seed, "shift").random(2)
        lattice = lattice.shifted(sx * lattice.spacing, sy * 2.0 * lattice.row_height)
    if window.is_torus:
        if not lattice.is_periodic_in(window):
            raise GeometryError("torus window is not a period of the lattice")
        sites = lattice.sites(window)
    else:
        sites = lattice.sites(window, margin=lattice.circumradius)
    if sites.shape[0] == 0:
        raise GeometryError("window contains no lattice site")
    counts = np.asarray(law.sample(make_rng(seed, "counts"), size=sites.shape[0]))
    centers = np.repeat(sites, counts, axis=0)
    off, _ = hexagon_offsets(centers.shape[0], lattice.apothem, make_rng(seed, "displace"))
    pts = centers + off
    if window.is_torus:
        pts = window.wrap(pts)
    else:
        pts = pts[window.contains(pts)]
    prov = {
        "generator": "perturbed_lattice",
        "law": law.label,
        "spacing": lattice.spacing,
        "random_shift": bool(random_shift),
        "seed": int(seed),
    }
    return PointPattern(pts, window, prov)


# Picklable generator objects: ``gen(seed) -> PointPattern``.


@dataclass(frozen=True)
class PoissonGenerator:
    intensity: float
    window: Window

    @property
    def label(self) -> str:
        return f"Poisson({self.intensity:.6g})"

    def __call__(self, seed: int) -> PointPattern:
        return sample_homogeneous_poisson(self.intensity, self.window, seed)


@dataclass(frozen=True)
class LatticeGenerator:
    lattice: Lattice
    window: Window

    @property
    def label(self) -> str:
        return "lattice"

    def __call__(self, seed: int) -> PointPattern:
        pat = triangular_lattice_pattern(self.lattice, self.window)
        return pat.with_points(pat.points, seed=int(seed))


@dataclass(frozen=True)
class PerturbedLatticeGenerator:
    lattice: Lattice
    law: ReplicaLaw
    window: Window
    random_shift: bool = False

    @property
    def label(self) -> str:
        return self.law.label

    @property
    def intensity(self) -> float:
        return self.lattice.intensity * self.law.mean

    def __call__(self, seed: int) -> PointPattern:
        return sample_perturbed_lattice(
            self.lattice, self.law, self.window, seed, self.random_shift
        )


def cell_occupancy(pattern: PointPattern, lattice: Lattice) -> np.ndarray:
    """Number of pattern points in the Voronoi cell of each lattice site.

    Sites are those of ``lattice.sites(window)``; the window must be a torus
    period of the lattice so that every point has its nearest site there.
    """
    from scipy.spatial import cKDTree

    w = pattern.window
    if not (w.is_torus and lattice.is_periodic_in(w)):
        raise GeometryError("occupancy needs a torus window that is a lattice period")
    sites = lattice.sites(w)
    lo = np.array([w.x_min, w.y_min])
    box = [w.width, w.height]
    tree = cKDTree(np.mod(sites - lo, box), boxsize=box)
    _, idx = tree.query(np.mod(pattern.points - lo, box))
    return np.bincount(idx, minlength=sites.shape[0])
