"""Experiment configuration: flat ``key = value`` files with dotted keys.

Blank lines and ``#`` comments are ignored. Every key must be known, and
the whole file is parsed and validated before anything runs.

Example::

    experiment = fig2_gilbert_scan
    master_seed = 7
    window.cols = 40
    window.rows = 46
    generator.laws = Bin(1,1), Bin(2,1/2), Bin(3,1/3), Poi(1)
    scan.replications = 10
"""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction
from pathlib import Path

from .errors import ConfigError, SubpercError
from .percolation import ScanConfig
from .point_processes import Lattice, ReplicaLaw, Window
from .sinr import Attenuation, SinrParams

EXPERIMENTS = ("fig1_patterns", "fig2_gilbert_scan", "sinr_gamma_scan", "diagnostics_suite", "bounds_table")


def parse_number(text: str) -> float:
    """Float, fraction ``a/b``, or ``sqrt3``-style shorthands such as ``2/sqrt3``."""
    s = text.strip().replace(" ", "").replace("sqrt(3)", "sqrt3")
    if "sqrt3" in s:
        num, _, den = s.partition("/")
        num_v = math.sqrt(3.0) if num == "sqrt3" else float(Fraction(num))
        if not den:
            return num_v
        den_v = math.sqrt(3.0) if den == "sqrt3" else float(Fraction(den))
        return num_v / den_v
    return float(Fraction(s))


def _int(s):
    return int(s.strip())


def _bool(s):
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


def _float_list(s):
    return [parse_number(x) for x in s.split(",") if x.strip()]


def _int_list(s):
    return [int(x) for x in s.split(",") if x.strip()]


def _law_list(s):
    # split on commas outside parentheses
    out, depth, cur = [], 0, ""
    for ch in s:
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        if ch == "," and depth == 0:
            out.append(cur)
            cur = ""
        else:
            cur += ch
    out.append(cur)
    return [x.strip() for x in out if x.strip()]


@dataclass
class ExperimentConfig:
    experiment: str = "fig2_gilbert_scan"
    master_seed: int = 0
    output_dir: str = "subperc-out"
    window_cols: int | None = None
    window_rows: int | None = None
    boundary_mode: str | None = None
    lattice_spacing: float = 1.0
    laws: list[str] | None = None
    poisson_intensity: float | None = None
    target_fraction: float = 0.6
    tolerance: float = 0.01
    bracket_lo: float = 0.8
    bracket_hi: float = 1.5
    replications: int = 10
    sinr_P: float = 1.0
    sinr_N: float | None = None
    sinr_T: float = 1.0
    sinr_range: float = 1.2
    attenuation: str = "inverse_poly"
    alpha: float = 4.0
    r0: float = 1.0
    backbone_intensity: float | None = None
    interferer_intensity: float | None = None
    include_backbone: bool = False
    gamma_lo: float = 0.0
    gamma_hi: float = 0.1
    gamma_tolerance: float = 0.001
    curve_points: int = 21
    bounds_lambdas: list[float] = field(default_factory=lambda: [0.5, 1.0, 2.0 / math.sqrt(3.0), 2.0, 4.0])
    bounds_radii: list[float] = field(default_factory=lambda: [0.05, 0.1, 0.15, 0.2, 0.25])
    bounds_path_lengths: list[int] = field(default_factory=lambda: [1, 5, 10, 20])
    diag_replications: int = 400

    # experiment-specific defaults for fields left unset
    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"unknown experiment {self.experiment!r}; choose from {', '.join(EXPERIMENTS)}")
        small = self.experiment == "fig1_patterns"
        if self.window_cols is None:
            self.window_cols = 12 if small else 40
        if self.window_rows is None:
            self.window_rows = 14 if small else 46
        if self.boundary_mode is None:
            self.boundary_mode = "torus" if small else "free"
        if self.laws is None:
            if small:
                self.laws = ["Bin(1,1)", "Bin(2,1/2)", "Bin(3,1/3)", "Poi(1)", "Cox(5)"]
            else:
                self.laws = ["Bin(1,1)", "Bin(2,1/2)", "Bin(3,1/3)", "Poi(1)"]
        self.validate()

    def validate(self):
        try:
            if self.window_cols < 1 or self.window_rows < 2:
                raise ConfigError("window needs cols >= 1 and rows >= 2")
            self.window()
            for law in self.laws:
                ReplicaLaw.parse(law)
            self.scan_config()
            self.sinr_params()
            if self.curve_points < 2:
                raise ConfigError("sinr.curve_points must be >= 2")
            if self.diag_replications < 2:
                raise ConfigError("diagnostics.replications must be >= 2")
        except ConfigError:
            raise
        except SubpercError as exc:
            raise ConfigError(str(exc)) from exc

    def lattice(self) -> Lattice:
        return Lattice(self.lattice_spacing)

    def window(self) -> Window:
        return self.lattice().fitted_window(self.window_cols, self.window_rows, self.boundary_mode)

    def scan_config(self) -> ScanConfig:
        return ScanConfig(
            self.target_fraction,
            self.tolerance,
            (self.bracket_lo, self.bracket_hi),
            self.replications,
            None,
            self.master_seed,
        )

    def gamma_scan_config(self) -> ScanConfig:
        return ScanConfig(
            self.target_fraction,
            self.gamma_tolerance,
            (self.gamma_lo, self.gamma_hi),
            self.replications,
            None,
            self.master_seed,
        )

    def attenuation_fn(self) -> Attenuation:
        return Attenuation(self.attenuation, self.alpha, self.r0)

    def sinr_params(self) -> SinrParams:
        att = self.attenuation_fn()
        # noise defaults to the level giving the requested SNR range
        N = self.sinr_N
        if N is None:
            N = self.sinr_P * float(att(self.sinr_range)) / self.sinr_T
        return SinrParams(self.sinr_P, N, self.sinr_T, 0.0, att)

    def to_dict(self) -> dict:
        return asdict(self)


# dotted key -> (attribute, parser)
KEYS = {
    "experiment": ("experiment", str.strip),
    "master_seed": ("master_seed", _int),
    "output_dir": ("output_dir", str.strip),
    "window.cols": ("window_cols", _int),
    "window.rows": ("window_rows", _int),
    "window.boundary_mode": ("boundary_mode", str.strip),
    "lattice.spacing": ("lattice_spacing", parse_number),
    "generator.laws": ("laws", _law_list),
    "generator.poisson_intensity": ("poisson_intensity", parse_number),
    "scan.target_fraction": ("target_fraction", parse_number),
    "scan.tolerance": ("tolerance", parse_number),
    "scan.bracket_lo": ("bracket_lo", parse_number),
    "scan.bracket_hi": ("bracket_hi", parse_number),
    "scan.replications": ("replications", _int),
    "sinr.P": ("sinr_P", parse_number),
    "sinr.N": ("sinr_N", parse_number),
    "sinr.T": ("sinr_T", parse_number),
    "sinr.range": ("sinr_range", parse_number),
    "sinr.attenuation": ("attenuation", str.strip),
    "sinr.alpha": ("alpha", parse_number),
    "sinr.r0": ("r0", parse_number),
    "sinr.backbone_intensity": ("backbone_intensity", parse_number),
    "sinr.interferer_intensity": ("interferer_intensity", parse_number),
    "sinr.include_backbone": ("include_backbone", _bool),
    "sinr.gamma_lo": ("gamma_lo", parse_number),
    "sinr.gamma_hi": ("gamma_hi", parse_number),
    "sinr.gamma_tolerance": ("gamma_tolerance", parse_number),
    "sinr.curve_points": ("curve_points", _int),
    "bounds.lambdas": ("bounds_lambdas", _float_list),
    "bounds.radii": ("bounds_radii", _float_list),
    "bounds.path_lengths": ("bounds_path_lengths", _int_list),
    "diagnostics.replications": ("diag_replications", _int),
}


def parse_config_text(text: str, overrides: dict | None = None) -> ExperimentConfig:
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = line.partition("=")
        key = key.strip()
        if not sep:
            raise ConfigError(f"line {lineno}: expected key = value")
        if key not in KEYS:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        attr, parser = KEYS[key]
        if attr in values:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        try:
            values[attr] = parser(val)
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"line {lineno}: bad value for {key!r}: {exc}") from exc
    for k, v in (overrides or {}).items():
        if v is not None:
            values[k] = v
    try:
        return ExperimentConfig(**values)
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(str(exc)) from exc


def load_config(path, overrides: dict | None = None) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, overrides)
