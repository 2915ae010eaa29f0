"""Configuration-driven experiment pipelines writing CSV, SVG and a manifest.

Every run writes into a fresh directory::

    patterns/*.csv   point patterns (+ .json sidecars)
    figures/*.svg    scatter plots and Gilbert graphs
    tables/*.csv     scan curves, summaries, bounds, diagnostics
    manifest.json    config echo, seeds, tool version, timings
"""
from __future__ import annotations

import math
import re
import time
from contextlib import contextmanager
from pathlib import Path

import numpy as np

from . import __version__
from . import io as sio
from .config import ExperimentConfig
from .diagnostics import (
    Box,
    CountDistribution,
    DiagnosticRow,
    check_convex_order,
    empirical_joint_intensity_ratio,
    estimate_void_probability,
    outage_capacity,
    poisson_void_probability,
    ripley_k,
    shannon_mean_capacity,
    stop_loss,
)
from .percolation import (
    estimate_critical_radius,
    expected_path_count_bound,
    largest_fraction_curve,
    lower_bound_radius,
    path_bound_base,
    peierls_void_bound,
)
from .point_processes import (
    Lattice,
    LatticeGenerator,
    PerturbedLatticeGenerator,
    PoissonGenerator,
    ReplicaLaw,
    Window,
    cell_occupancy,
)
from .estimates import EstimateWithCI
from .rng import derive_seed
from .sinr import (
    Attenuation,
    empirical_joint_laplace,
    estimate_gamma_c,
    gamma_fraction_curve,
    interference_grid,
    poisson_laplace_closed_form,
    link_table_for_seed,
    sample_interference,
    snr_range,
)
from .spatial_graphs import build_gilbert, connected_components
from .svg import render_svg, write_svg

# reference critical ranges for the Gilbert-graph scan
REPORTED_CRITICAL_RANGE = {"Bin(1,1)": 1.04, "Bin(2,1/2)": 1.07, "Bin(3,1/3)": 1.09, "Poi(1)": 1.12}
POISSON_CRITICAL_RANGE = 1.112


def slug(label: str) -> str:
    s = label.lower().replace("/", "-")
    s = re.sub(r"[^a-z0-9.\-]+", "_", s)
    return s.strip("_")


class Run:
    """Output directory bookkeeping for one experiment invocation."""

    def __init__(self, config: ExperimentConfig, out_dir, jobs: int = 1):
        self.config = config
        self.out = Path(out_dir)
        self.jobs = jobs
        if (self.out / "manifest.json").exists():
            raise FileExistsError(f"{self.out} already holds a run; choose a new directory")
        self.out.mkdir(parents=True, exist_ok=True)
        self.outputs: list[str] = []
        self.seeds: dict[str, list[int]] = {}
        self.stages: dict[str, float] = {}
        self.summary: dict = {}

    def path(self, rel: str) -> Path:
        p = self.out / rel
        if p.exists():
            raise FileExistsError(f"refusing to overwrite {p}")
        self.outputs.append(rel)
        return p

    @contextmanager
    def stage(self, name: str):
        t0 = time.perf_counter()
        try:
            yield
        finally:
            self.stages[name] = round(time.perf_counter() - t0, 6)

    def finish(self, status: str = "ok") -> Path:
        manifest = {
            "status": status,
            "tool": "subperc",
            "version": __version__,
            "experiment": self.config.experiment,
            "config": self.config.to_dict(),
            "seeds": self.seeds,
            "stages_seconds": self.stages,
            "outputs": sorted(self.outputs),
            "summary": self.summary,
        }
        return sio.write_json(self.out / "manifest.json", manifest)


def _generators(config: ExperimentConfig, window: Window, with_lattice=False):
    lattice = config.lattice()
    gens = []
    if with_lattice:
        gens.append(("lattice", LatticeGenerator(lattice, window)))
    for text in config.laws:
        law = ReplicaLaw.parse(text)
        gens.append((law.label, PerturbedLatticeGenerator(lattice, law, window)))
    if config.poisson_intensity is not None:
        gens.append(("Poisson", PoissonGenerator(config.poisson_intensity, window)))
    return gens


def run_fig1_patterns(config: ExperimentConfig, run: Run) -> dict:
    """One pattern CSV and scatter SVG per generator on a shared window."""
    window = config.window()
    lattice = config.lattice()
    rows = []
    with run.stage("patterns"):
        for label, gen in _generators(config, window, with_lattice=True):
            seed = derive_seed(config.master_seed, "fig1", label)
            run.seeds[f"fig1/{label}"] = [seed]
            pat = gen(seed)
            name = slug(label)
            sio.write_pattern(pat, run.path(f"patterns/fig1_{name}.csv"))
            run.outputs.append(f"patterns/fig1_{name}.json")
            write_svg(run.path(f"figures/fig1_{name}.svg"), render_svg(pat.points, window, title=label))
            if window.is_torus and lattice.is_periodic_in(window):
                occ = cell_occupancy(pat, lattice)
                sites, empty = occ.size, float(np.mean(occ == 0))
            else:
                sites, empty = lattice.sites(window).shape[0], math.nan
            rows.append((label, pat.n, sites, empty))
    sio.write_rows(run.path("tables/fig1_summary.csv"), ("generator", "points", "sites", "empty_cell_fraction"), rows)
    run.summary["panels"] = [r[0] for r in rows]
    return run.summary


def run_fig2_scan(config: ExperimentConfig, run: Run) -> dict:
    """Critical-range scan per generator, plus the Gilbert graph at the
    estimate with its largest component highlighted."""
    window = config.window()
    scan = config.scan_config()
    summary = []
    for label, gen in _generators(config, window):
        name = slug(label)
        with run.stage(f"scan/{label}"):
            result = estimate_critical_radius(gen, scan, jobs=run.jobs, name=label)
        run.seeds[f"fig2/{label}"] = result.seeds
        sio.write_scan(result, run.path(f"tables/fig2_scan_{name}.csv"))
        run.outputs.append(f"tables/fig2_scan_{name}.json")
        rho = result.threshold_estimate
        with run.stage(f"render/{label}"):
            fractions = []
            for k, seed in enumerate(result.seeds):
                pat = gen(seed)
                g = build_gilbert(pat, rho)
                stats = connected_components(g)
                fractions.append(stats.largest_fraction)
                if k == 0:
                    shown, shown_graph, shown_stats = pat, g, stats
            sio.write_pattern(shown, run.path(f"patterns/fig2_{name}.csv"))
            run.outputs.append(f"patterns/fig2_{name}.json")
            sio.write_edges(shown_graph, run.path(f"tables/fig2_edges_{name}.csv"))
            sio.write_components(shown_stats, run.path(f"tables/fig2_components_{name}.csv"))
            sio.write_rows(
                run.path(f"tables/fig2_top10_{name}.csv"),
                ("rank", "fraction"),
                enumerate(shown_stats.top10_fractions.tolist(), 1),
            )
            svg = render_svg(
                shown.points,
                window,
                edges=shown_graph.edges,
                highlight=shown_stats.largest_component(),
                bars=shown_stats.top10_fractions,
                title=f"{label}, rho={rho:.2f}",
                radius=1.2,
            )
            write_svg(run.path(f"figures/fig2_{name}.svg"), svg)
        f = np.asarray(fractions)
        summary.append(
            (
                label,
                rho,
                REPORTED_CRITICAL_RANGE.get(label, POISSON_CRITICAL_RANGE if label == "Poisson" else math.nan),
                float(f.mean()),
                float(f.std(ddof=1)) if f.size > 1 else 0.0,
                f.size,
            )
        )
    sio.write_rows(
        run.path("tables/fig2_summary.csv"),
        ("generator", "rho_hat", "reported_rho", "mean_fraction_at_rho_hat", "std", "replications"),
        summary,
    )
    run.summary["rho_hat"] = {row[0]: row[1] for row in summary}
    return run.summary


def sinr_generators(config: ExperimentConfig):
    window = config.window()
    lam = config.lattice().intensity
    backbone = PoissonGenerator(config.backbone_intensity or lam, window)
    interferers = PoissonGenerator(config.interferer_intensity or lam, window)
    return backbone, interferers


def run_sinr_gamma_scan(config: ExperimentConfig, run: Run) -> dict:
    """Bisection for the critical interference factor and the full
    fraction-versus-gamma curve on the same realisations."""
    params = config.sinr_params()
    backbone, interferers = sinr_generators(config)
    scan = config.gamma_scan_config()
    run.summary["snr_range"] = snr_range(params)
    run.summary["noise"] = params.N
    with run.stage("gamma_scan"):
        result = estimate_gamma_c(backbone, interferers, params, scan, run.jobs, config.include_backbone)
    run.seeds["gamma_c"] = result.seeds
    sio.write_scan(result, run.path("tables/sinr_gamma_scan.csv"))
    run.outputs.append("tables/sinr_gamma_scan.json")
    gammas = np.linspace(config.gamma_lo, config.gamma_hi, config.curve_points)
    with run.stage("gamma_curve"):
        curves = []
        for seed in result.seeds:
            table = link_table_for_seed((backbone, interferers, params, seed, config.include_backbone))
            curves.append(gamma_fraction_curve(table, gammas))
        curves = np.asarray(curves)
    rep_rows = [(k, g, curves[k, m]) for k in range(curves.shape[0]) for m, g in enumerate(gammas.tolist())]
    sio.write_rows(run.path("tables/sinr_gamma_curve_reps.csv"), ("replication", "gamma", "fraction"), rep_rows)
    std = curves.std(axis=0, ddof=1) if curves.shape[0] > 1 else np.zeros(gammas.size)
    sio.write_rows(
        run.path("tables/sinr_gamma_curve.csv"),
        ("gamma", "mean_fraction", "std", "replications"),
        zip(gammas.tolist(), curves.mean(axis=0).tolist(), std.tolist(), [curves.shape[0]] * gammas.size),
    )
    with run.stage("interference_grid"):
        pat = interferers(derive_seed(result.seeds[0], "interferers"))
        xs, ys, vals = interference_grid(pat, params, 40, 40)
    sio.write_interference_grid(xs, ys, vals, run.path("tables/interference_grid.csv"))
    run.summary["gamma_c"] = result.threshold_estimate
    run.summary["curve_nonincreasing"] = bool(np.all(np.diff(curves, axis=1) <= 0))
    return run.summary


def run_bounds_table(config: ExperimentConfig, run: Run) -> dict:
    """Lower-bound radii, path-count and void bounds, and a cross-check
    against the reported critical ranges."""
    d = 2
    with run.stage("bounds"):
        lower = [(lam, d, lower_bound_radius(lam, d), path_bound_base(lam, lower_bound_radius(lam, d), d)) for lam in config.bounds_lambdas]
        path_rows = [
            (lam, r, n, path_bound_base(lam, r, d), expected_path_count_bound(lam, r, n, d))
            for lam in config.bounds_lambdas
            for r in config.bounds_radii
            for n in config.bounds_path_lengths
        ]
        peierls_rows = [
            (lam, r, n, peierls_void_bound(lam, r, n, d))
            for lam in config.bounds_lambdas
            for r in config.bounds_radii
            for n in config.bounds_path_lengths
        ]
        lam0 = config.lattice().intensity
        c0 = lower_bound_radius(lam0, d)
        cross = [(lab, rho, rho / 2.0, lam0, c0, c0 <= rho / 2.0) for lab, rho in REPORTED_CRITICAL_RANGE.items()]
    sio.write_rows(run.path("tables/lower_bound.csv"), ("lambda", "d", "c_lambda", "path_base_at_c"), lower)
    sio.write_rows(run.path("tables/path_bound.csv"), ("lambda", "r", "n", "base", "bound"), path_rows)
    sio.write_rows(run.path("tables/peierls_bound.csv"), ("lambda", "r", "n", "bound"), peierls_rows)
    sio.write_rows(
        run.path("tables/bounds_vs_fig2.csv"),
        ("generator", "reported_rho", "radius", "lambda", "c_lambda", "holds"),
        cross,
    )
    run.summary["all_hold"] = all(row[-1] for row in cross)
    return run.summary


def diagnostics_rows(replications: int, master_seed: int) -> list[DiagnosticRow]:
    """The ordering fingerprints and Poisson closed-form checks."""
    rows = []
    k3 = 3.0

    def verdict(ok):
        return "pass" if ok else "fail"

    poi = CountDistribution.poisson(1.0)
    for n in range(1, 11):
        res = check_convex_order(CountDistribution.binomial(n), poi)
        rows.append(DiagnosticRow("convex_order", f"{ReplicaLaw.binomial(n).label}<=Poi(1)", float(res.ordered), 0.0, 1.0, verdict(res.ordered)))
    for n in range(1, 10):
        res = check_convex_order(CountDistribution.binomial(n), CountDistribution.binomial(n + 1))
        rows.append(DiagnosticRow("convex_order", f"{ReplicaLaw.binomial(n).label}<={ReplicaLaw.binomial(n + 1).label}", float(res.ordered), 0.0, 1.0, verdict(res.ordered)))
    rev = check_convex_order(poi, CountDistribution.binomial(2))
    rows.append(DiagnosticRow("convex_order", "Poi(1)<=Bin(2,1/2)", float(rev.ordered), 0.0, 0.0, verdict(not rev.ordered and rev.witness == 1)))
    rows.append(DiagnosticRow("stop_loss", "Poi(1),k=1", stop_loss(poi, 1), 0.0, math.exp(-1), verdict(abs(stop_loss(poi, 1) - math.exp(-1)) < 1e-9)))

    lattice = Lattice()
    lam = lattice.intensity
    torus = lattice.fitted_window(30, 34, "torus")
    bin11 = PerturbedLatticeGenerator(lattice, ReplicaLaw.binomial(1), torus, random_shift=True)
    pois = PoissonGenerator(lam, torus)

    # void probabilities
    small = Window(0.0, 6.0, 0.0, 6.0, "free")
    v = estimate_void_probability(PoissonGenerator(1.0, small), Box.point(3.0, 3.0), 1.0, replications, master_seed=master_seed)
    ref = poisson_void_probability(1.0, Box.point(3, 3), 1.0)
    rows.append(DiagnosticRow("void_poisson", "lam=1,B=point,r=1", v.void.value, v.void.std_error, ref, verdict(v.void.within(ref, k3))))
    B = Box.point(*torus.center)
    vb = estimate_void_probability(bin11, B, 0.8, replications, master_seed=master_seed)
    vp = estimate_void_probability(pois, B, 0.8, replications, master_seed=master_seed + 1)
    rows.append(DiagnosticRow("void_order", "Bin(1,1) vs Poisson,r=0.8", vb.void.value, vb.void.std_error, vp.void.value, verdict(vb.void.leq(vp.void, k3))))

    # Ripley's K
    big = Window(0.0, 50.0, 0.0, 50.0, "torus")
    ks = np.array([ripley_k(PoissonGenerator(1.0, big)(derive_seed(master_seed, "ripley", i)), [1.0])[0] for i in range(min(replications, 200))])
    kp = EstimateWithCI.from_samples(ks)
    rows.append(DiagnosticRow("ripley_poisson", "lam=1,r=1", kp.value, kp.std_error, math.pi, verdict(kp.within(math.pi, k3))))
    kb = EstimateWithCI.from_samples([ripley_k(bin11(derive_seed(master_seed, "ripley_bin", i)), [0.5])[0] for i in range(min(replications, 200))])
    rows.append(DiagnosticRow("ripley_order", "Bin(1,1),r=0.5", kb.value, kb.std_error, math.pi / 4, verdict(kb.value + k3 * kb.std_error < math.pi / 4)))

    # product moments on disjoint boxes
    c = torus.center
    b1, b2, b3 = Box(c[0] - 1, c[0], c[1], c[1] + 1), Box(c[0], c[0] + 1, c[1], c[1] + 1), Box(c[0] - 1, c[0], c[1] - 1, c[1])
    for k, boxes in ((2, [b1, b2]), (3, [b1, b2, b3])):
        e = empirical_joint_intensity_ratio(pois, boxes, replications, master_seed=master_seed)
        rows.append(DiagnosticRow("joint_intensity_poisson", f"k={k}", e.value, e.std_error, 1.0, verdict(e.within(1.0, k3))))
    # translates of the adjacent pair tile most of the torus; stationarity
    # (random shift) makes every translate an unbiased sample
    shifts = [(dx, dy) for dx in np.arange(-12.0, 12.0, 2.0) for dy in np.arange(-12.0, 12.0, 1.5)]
    e = empirical_joint_intensity_ratio(bin11, [b1, b2], max(replications // 4, 2), master_seed=master_seed, shifts=shifts)
    rows.append(DiagnosticRow("joint_intensity_order", "Bin(1,1),k=2", e.value, e.std_error, 1.0, verdict(e.value + k3 * e.std_error < 1.0)))

    # shot-noise Laplace transforms and capacities
    probes = [c, (c[0] + 1, c[1]), (c[0], c[1] + 1), (c[0] + 1, c[1] + 1)]
    seeds_b = [derive_seed(master_seed, "laplace_bin", i) for i in range(replications)]
    seeds_p = [derive_seed(master_seed, "laplace_poi", i) for i in range(replications)]
    att = Attenuation()
    ib = sample_interference(bin11, probes, att, seeds_b)
    ip = sample_interference(pois, probes, att, seeds_p)
    for s in (-1.0, 0.5):
        e = empirical_joint_laplace(ip[:, :1], s)
        ref = poisson_laplace_closed_form(lam, att, s)
        rows.append(DiagnosticRow("laplace_poisson", f"s={s:g},n=1", e.value, e.std_error, ref, verdict(e.within(ref, k3))))
    for s in (-1.0, -0.5, 0.5):
        for n in (1, 2, 4):
            eb = empirical_joint_laplace(ib[:, :n], s)
            ep = empirical_joint_laplace(ip[:, :n], s)
            rows.append(DiagnosticRow("laplace_order", f"s={s:g},n={n}", eb.value, eb.std_error, ep.value, verdict(eb.leq(ep, k3))))
    for label, samples in (("Bin(1,1)", ib[:, 0]), ("Poisson", ip[:, 0])):
        sh = shannon_mean_capacity(samples, 1.0, 1.0)
        rows.append(DiagnosticRow("shannon_capacity", label, sh.value, sh.std_error, math.log1p(1.0 / (1.0 + samples.mean())), verdict(sh.value >= math.log1p(1.0 / (1.0 + samples.mean())))))
        oc = outage_capacity(samples, 1.0, 1.0, 1.0)
        rows.append(DiagnosticRow("outage_capacity", label, oc.value, oc.std_error, math.exp(-(1.0 + samples.mean())), verdict(oc.value >= math.exp(-(1.0 + samples.mean())))))
    return rows


def run_diagnostics_suite(config: ExperimentConfig, run: Run) -> dict:
    with run.stage("diagnostics"):
        rows = diagnostics_rows(config.diag_replications, config.master_seed)
    sio.write_diagnostics(rows, run.path("tables/diagnostics.csv"))
    run.summary["failures"] = [f"{r.diagnostic}:{r.params}" for r in rows if r.verdict != "pass"]
    return run.summary


RUNNERS = {
    "fig1_patterns": run_fig1_patterns,
    "fig2_gilbert_scan": run_fig2_scan,
    "sinr_gamma_scan": run_sinr_gamma_scan,
    "diagnostics_suite": run_diagnostics_suite,
    "bounds_table": run_bounds_table,
}


def run_experiment(config: ExperimentConfig, out_dir=None, jobs: int = 1) -> Run:
    run = Run(config, out_dir or config.output_dir, jobs)
    try:
        RUNNERS[config.experiment](config, run)
    except BaseException as exc:
        run.finish(f"failed: {type(exc).__name__}: {exc}")
        raise
    run.finish()
    return run
