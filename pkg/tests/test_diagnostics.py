import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from subperc.diagnostics import (
    Box,
    CountDistribution,
    check_convex_order,
    cell_count_chisquare,
    empirical_joint_intensity_ratio,
    estimate_void_probability,
    nearest_neighbor_distances,
    outage_capacity,
    poisson_nn_cdf,
    poisson_void_probability,
    ripley_k,
    shannon_mean_capacity,
    stop_loss,
)
from subperc.errors import GeometryError, ParameterError
from subperc.estimates import EstimateWithCI
from subperc.point_processes import (
    Lattice,
    PerturbedLatticeGenerator,
    PointPattern,
    PoissonGenerator,
    ReplicaLaw,
    Window,
    sample_homogeneous_poisson,
)
from subperc.rng import derive_seed

POI = CountDistribution.poisson(1.0)
LAT = Lattice()


def _brute_stop_loss(dist, k):
    j = np.arange(dist.pmf.size)
    return float(np.sum(np.maximum(j - k, 0) * dist.pmf))


# --- count laws and stop-loss ---


@pytest.mark.parametrize(
    "dist",
    [CountDistribution.binomial(3), POI, CountDistribution.poisson(7.5), CountDistribution.cox_bernoulli(5), CountDistribution.scaled_poisson(3)],
)
def test_pmf_normalised_and_mean(dist):
    assert dist.pmf.sum() == pytest.approx(1.0, abs=1e-12)
    assert float(np.arange(dist.pmf.size) @ dist.pmf) == pytest.approx(dist.mean, abs=1e-12)


def test_from_law_matches_constructors():
    assert CountDistribution.from_law(ReplicaLaw.parse("Bin(2,1/2)")).name == "Bin(2,1/2)"
    assert np.allclose(CountDistribution.from_law(ReplicaLaw.parse("Poi(1)")).pmf, POI.pmf)
    assert CountDistribution.from_law(ReplicaLaw.parse("Cox(5)")).mean == 1.0


def test_stop_loss_examples():
    assert stop_loss(POI, 1) == pytest.approx(math.exp(-1), abs=1e-15)
    assert stop_loss(CountDistribution.binomial(2), 1) == pytest.approx(0.25, abs=1e-15)
    for d in (POI, CountDistribution.binomial(4), CountDistribution.cox_bernoulli(3)):
        assert stop_loss(d, 0) == pytest.approx(d.mean, abs=1e-15)


def test_stop_loss_negative_level():
    with pytest.raises(ParameterError):
        stop_loss(POI, -1)


@pytest.mark.parametrize("dist", [POI, CountDistribution.binomial(5), CountDistribution.cox_bernoulli(4), CountDistribution.scaled_poisson(2)])
def test_stop_loss_matches_direct_sum_convex_nonincreasing(dist):
    vals = np.array([stop_loss(dist, k) for k in range(dist.k_max + 3)])
    direct = np.array([_brute_stop_loss(dist, k) for k in range(dist.k_max + 3)])
    assert np.allclose(vals, direct, atol=1e-12)
    assert np.all(np.diff(vals) <= 1e-14)
    assert np.all(np.diff(vals, 2) >= -1e-12)


# --- convex order ---


@pytest.mark.parametrize("n", range(1, 11))
def test_binomial_below_poisson(n):
    assert check_convex_order(CountDistribution.binomial(n), POI).ordered


def test_binomial_chain():
    for n in range(1, 10):
        assert check_convex_order(CountDistribution.binomial(n), CountDistribution.binomial(n + 1))


def test_reversed_direction_witness():
    res = check_convex_order(POI, CountDistribution.binomial(2))
    assert not res.ordered and res.witness == 1
    assert res.lower_values[1] == pytest.approx(math.exp(-1), abs=1e-9)
    assert res.upper_values[1] == pytest.approx(0.25, abs=1e-9)


def test_mean_mismatch_witness():
    res = check_convex_order(CountDistribution.poisson(1.0), CountDistribution.poisson(1.1))
    assert not res and res.witness == "mean"


def test_super_poisson_laws_above_poisson():
    assert check_convex_order(POI, CountDistribution.cox_bernoulli(5))
    assert check_convex_order(POI, CountDistribution.scaled_poisson(3))
    assert not check_convex_order(CountDistribution.cox_bernoulli(5), POI)


_FAMILY = [CountDistribution.binomial(n) for n in (1, 2, 3, 5)] + [POI, CountDistribution.cox_bernoulli(2), CountDistribution.cox_bernoulli(5)]


@settings(max_examples=60)
@given(a=st.integers(0, 6), b=st.integers(0, 6), c=st.integers(0, 6))
def test_property_reflexive_transitive(a, b, c):
    A, B, C = _FAMILY[a], _FAMILY[b], _FAMILY[c]
    assert check_convex_order(A, A)
    if check_convex_order(A, B) and check_convex_order(B, C):
        assert check_convex_order(A, C)


# --- boxes and void probability ---


def test_box_geometry():
    b = Box(0, 2, 0, 1)
    assert b.area == 2 and b.perimeter == 6
    assert b.dilated_area(0.5) == pytest.approx(2 + 3 + math.pi / 4)
    assert b.distance([[3, 0.5], [1, 1]]).tolist() == [1.0, 0.0]
    assert b.count([[0, 0], [2, 0.5], [1.9, 0.99]]) == 2
    assert b.overlaps(Box(1.5, 3, 0.5, 2)) and not b.overlaps(Box(2, 3, 0, 1))
    with pytest.raises(GeometryError):
        Box(1, 0, 0, 1)


def test_void_probability_poisson_point():
    w = Window(0, 6, 0, 6, "free")
    v = estimate_void_probability(PoissonGenerator(1.0, w), Box.point(3, 3), 1.0, 2000, master_seed=1)
    assert v.void.within(math.exp(-math.pi), 3)
    assert v.void.value + v.capacity.value == 1.0


def test_void_probability_poisson_box():
    w = Window(0, 6, 0, 6, "free")
    B = Box(2.5, 3.5, 2.8, 3.2)
    v = estimate_void_probability(PoissonGenerator(0.5, w), B, 0.5, 2000, master_seed=2)
    assert v.void.within(poisson_void_probability(0.5, B, 0.5), 3)


def test_void_probability_large_region_is_zero():
    w = Window(0, 30, 0, 30, "free")
    v = estimate_void_probability(PoissonGenerator(1.0, w), Box(10, 20, 10, 20), 3.0, 20)
    assert v.void.value == 0.0 and v.capacity.value == 1.0


def test_void_probability_boundary_check():
    w = Window(0, 6, 0, 6, "free")
    with pytest.raises(GeometryError):
        estimate_void_probability(PoissonGenerator(1.0, w), Box.point(0.5, 3), 1.0, 5)


def test_void_smaller_for_bin11():
    w = LAT.fitted_window(20, 24, "torus")
    B = Box.point(*w.center)
    vb = estimate_void_probability(PerturbedLatticeGenerator(LAT, ReplicaLaw.binomial(1), w, True), B, 0.6, 500)
    vp = estimate_void_probability(PoissonGenerator(LAT.intensity, w), B, 0.6, 500, master_seed=1)
    assert vb.void.leq(vp.void)
    assert vb.void.value < vp.void.value


# --- Ripley's K ---


def test_ripley_zero_radius_and_errors():
    p = sample_homogeneous_poisson(1.0, Window.square(20), 1)
    assert ripley_k(p, [0.0])[0] == 0.0
    with pytest.raises(ParameterError):
        ripley_k(p, [10.0])
    with pytest.raises(ParameterError):
        ripley_k(PointPattern(np.array([[1.0, 1.0]]), Window.square(20)), [1.0])


def test_ripley_matches_direct_pair_count():
    w = Window(0, 10, 0, 8, "free")
    p = sample_homogeneous_poisson(2.0, w, 3)
    for corr in ("torus", "translation"):
        got = ripley_k(p, [0.5, 1.0, 2.5], corr)
        torus = corr == "torus"
        d = (w.with_mode("torus") if torus else w).distance(p.points[:, None], p.points[None, :])
        delta = np.abs(p.points[:, None] - p.points[None, :])
        wt = 1.0 if torus else w.area / ((w.width - delta[..., 0]) * (w.height - delta[..., 1]))
        np.fill_diagonal(d, np.inf)
        want = [w.area / p.n**2 * np.sum(wt * (d <= r)) for r in (0.5, 1.0, 2.5)]
        assert np.allclose(got, want, rtol=1e-12)


def test_ripley_poisson_pi():
    w = Window(0, 50, 0, 50, "torus")
    ks = [ripley_k(sample_homogeneous_poisson(1.0, w, derive_seed(7, i)), [1.0])[0] for i in range(200)]
    assert EstimateWithCI.from_samples(ks).within(math.pi, 3)


def test_ripley_translation_unbiased_free_window():
    w = Window(0, 20, 0, 20, "free")
    ks = [ripley_k(sample_homogeneous_poisson(1.0, w, derive_seed(8, i)), [2.0])[0] for i in range(200)]
    assert EstimateWithCI.from_samples(ks).within(4 * math.pi, 3.5)


def test_ripley_bin11_below_poisson():
    w = LAT.fitted_window(30, 34, "torus")
    g = PerturbedLatticeGenerator(LAT, ReplicaLaw.binomial(1), w, True)
    k = EstimateWithCI.from_samples([ripley_k(g(derive_seed(9, i)), [0.5])[0] for i in range(50)])
    assert k.value + 3 * k.std_error < math.pi / 4


# --- joint intensities ---


def test_joint_intensity_validation():
    g = PoissonGenerator(1.0, Window.square(10))
    with pytest.raises(GeometryError):
        empirical_joint_intensity_ratio(g, [Box(0, 2, 0, 2), Box(1, 3, 1, 3)], 5)
    with pytest.raises(ParameterError):
        empirical_joint_intensity_ratio(g, [Box(i, i + 1, 0, 1) for i in range(5)], 5)
    with pytest.raises(GeometryError):
        empirical_joint_intensity_ratio(g, [Box(0, 1, 0, 1)], 5, shifts=[(9.5, 0)])


@pytest.mark.parametrize("k", [2, 3])
def test_joint_intensity_poisson_factorises(k):
    g = PoissonGenerator(2.0, Window.square(10))
    boxes = [Box(4, 5, 4, 5), Box(5, 6, 4, 5), Box(4, 5, 5, 6)][:k]
    e = empirical_joint_intensity_ratio(g, boxes, 3000, master_seed=4)
    assert e.within(1.0, 3)


def test_joint_intensity_k1_mean_measure():
    w = LAT.fitted_window(20, 24, "torus")
    g = PerturbedLatticeGenerator(LAT, ReplicaLaw.parse("Bin(3,1/3)"), w, True)
    e = empirical_joint_intensity_ratio(g, [Box(5, 7, 5, 7)], 1000)
    assert e.within(1.0, 3)


def test_joint_intensity_bin11_adjacent_boxes_below_one():
    w = LAT.fitted_window(30, 34, "torus")
    c = w.center
    g = PerturbedLatticeGenerator(LAT, ReplicaLaw.binomial(1), w, True)
    shifts = [(dx, dy) for dx in np.arange(-12.0, 12.0, 2.0) for dy in np.arange(-12.0, 12.0, 1.5)]
    e = empirical_joint_intensity_ratio(g, [Box(c[0] - 1, c[0], c[1], c[1] + 1), Box(c[0], c[0] + 1, c[1], c[1] + 1)], 60, shifts=shifts)
    assert e.value + 3 * e.std_error < 1.0


# --- capacities ---


def test_shannon_examples():
    assert shannon_mean_capacity([0.3, 2.0], 0.0, 1.0).value == 0.0
    assert shannon_mean_capacity(np.full(5, 0.4), 2.0, 1.0).value == pytest.approx(math.log1p(2 / 1.4))
    two = shannon_mean_capacity([0.0, 2.0], 1.0, 1.0).value
    assert two == pytest.approx(0.5 * (math.log(2) + math.log(4 / 3)))
    assert two == pytest.approx(0.49041, abs=1e-5)
    assert two > math.log(1.5)


def test_outage_examples():
    assert outage_capacity(np.zeros(3), 2.0, 0.5).value == pytest.approx(math.exp(-1.0))
    assert outage_capacity(np.full(3, 0.7), 1.0, 0.5).value == pytest.approx(math.exp(-1.2))
    two = outage_capacity([0.0, 2.0], 1.0, 1.0, 1.0).value
    assert two == pytest.approx(0.20884, abs=1e-5) and two > math.exp(-2)


@settings(max_examples=60)
@given(
    samples=st.lists(st.floats(0, 50, allow_nan=False), min_size=1, max_size=30),
    F0=st.floats(0.01, 10),
    N=st.floats(0.01, 10),
    T=st.floats(0.01, 5),
    rate=st.floats(0.1, 3),
)
def test_property_jensen(samples, F0, N, T, rate):
    m = float(np.mean(samples))
    assert shannon_mean_capacity(samples, F0, N).value >= math.log1p(F0 / (N + m)) - 1e-12
    assert outage_capacity(samples, T, N, rate).value >= math.exp(-rate * T * (N + m)) * (1 - 1e-12)


def test_capacity_parameter_checks():
    with pytest.raises(ParameterError):
        shannon_mean_capacity([1.0], 1.0, 0.0)
    with pytest.raises(ParameterError):
        outage_capacity([1.0], 1.0, 1.0, 0.0)


# --- Poisson reduction tools ---


def test_nn_distances_match_brute_force():
    w = Window(0, 10, 0, 10, "torus")
    p = sample_homogeneous_poisson(1.0, w, 2)
    d = w.distance(p.points[:, None], p.points[None, :])
    np.fill_diagonal(d, np.inf)
    assert np.allclose(nearest_neighbor_distances(p), d.min(axis=1))


def test_poisson_nn_distances_ks():
    w = Window(0, 40, 0, 40, "torus")
    d = nearest_neighbor_distances(sample_homogeneous_poisson(1.0, w, 3))
    assert stats.kstest(d, lambda r: poisson_nn_cdf(1.0, r)).pvalue > 0.001


def test_chisquare_poisson_counts_calibrated():
    w = Window(0, 20, 0, 20, "free")
    ps = [cell_count_chisquare(sample_homogeneous_poisson(1.5, w, derive_seed(6, i)), 1.5)[1] for i in range(300)]
    assert 0.003 <= np.mean(np.array(ps) < 0.05) <= 0.1
    # a lattice is far too regular only in the other tail; a clustered pattern fails
    pts = np.repeat(np.array([[5.0, 5.0], [15.0, 15.0]]), 300, axis=0)
    assert cell_count_chisquare(PointPattern(pts, w), 1.5)[1] < 1e-10
