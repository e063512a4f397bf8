import numpy as np
import pytest

from cvtopt.energy import (
    cvt_energy,
    cvt_gradient_explicit,
    cvt_gradient_integral,
    lloyd_step,
    triangle_jacobian,
    triangle_term,
)
from cvtopt.geometry import BoxDomain, SiteSet, build_diagram

from conftest import central_differences, random_sites, stable_configs


def unit1(x, y):
    return build_diagram(SiteSet(np.array([[x, y]]), BoxDomain(1.0)))


def energy_at(coords, domain):
    return cvt_energy(build_diagram(SiteSet.from_coords(coords, domain))).total


def test_triangle_jacobian_examples():
    assert triangle_jacobian([1, 0], [0, 1], [0, 0]) == pytest.approx(1.0)
    assert triangle_jacobian([0, 1], [1, 0], [0, 0]) == pytest.approx(-1.0)
    assert triangle_jacobian([1, 1], [2, 2], [0, 0]) == 0.0
    rng = np.random.default_rng(0)
    for _ in range(10):
        v, w, a = rng.normal(size=(3, 2))
        det = (v[0] - a[0]) * (w[1] - a[1]) - (v[1] - a[1]) * (w[0] - a[0])
        assert triangle_jacobian(v, w, a) == pytest.approx(det, rel=1e-12)


def test_triangle_term_quadratic_factor():
    t = triangle_term([1, 0], [0, 1], [0, 0])
    assert t.jacobian == pytest.approx(1.0)
    assert t.quad == pytest.approx(2.0)


def test_single_cell_energies():
    assert cvt_energy(unit1(0.5, 0.5)).total == pytest.approx(1 / 6, abs=1e-15)
    assert cvt_energy(unit1(0.0, 0.0)).total == pytest.approx(2 / 3, abs=1e-15)


def test_energy_matches_monte_carlo():
    rng = np.random.default_rng(1)
    s = random_sites(8, rng)
    d = build_diagram(s)
    q = rng.uniform(0, s.domain.side, (400_000, 2))
    d2 = ((q[:, None, :] - s.points[None]) ** 2).sum(-1).min(axis=1)
    mc = d2.mean() * s.domain.area / s.kappa0
    se = d2.std() / np.sqrt(len(q)) * s.domain.area / s.kappa0
    eb = cvt_energy(d)
    assert abs(eb.total - mc) <= 4 * se
    assert eb.total == pytest.approx(eb.per_cell.sum() / s.kappa0)
    assert np.all(eb.per_cell > 0)


def test_integral_gradient_single_cell():
    assert np.allclose(cvt_gradient_integral(unit1(0.3, 0.5)), [-0.4, 0.0])
    assert np.allclose(cvt_gradient_explicit(unit1(0.3, 0.5)), [-0.4, 0.0], atol=1e-14)


def test_gradients_vanish_at_a_centroidal_configuration():
    s = SiteSet(np.array([[0.25, 0.5], [0.75, 0.5]]), BoxDomain(1.0))
    d = build_diagram(s)
    assert np.max(np.abs(cvt_gradient_integral(d))) <= 1e-15
    assert np.max(np.abs(cvt_gradient_explicit(d))) <= 1e-10


def test_gradients_vanish_at_an_optimized_cvt(cvt10):
    d = build_diagram(cvt10)
    assert np.max(np.abs(cvt_gradient_integral(d))) <= 1e-8
    assert np.max(np.abs(cvt_gradient_explicit(d))) <= 1e-8 + 1e-10


@pytest.mark.parametrize("kappa0", [3, 5, 10, 50])
def test_two_gradient_formulas_agree(kappa0):
    for d in stable_configs(kappa0, 5, seed=kappa0):
        assert np.max(np.abs(cvt_gradient_integral(d) - cvt_gradient_explicit(d))) <= 1e-10


@pytest.mark.parametrize("kappa0", [3, 5, 10])
def test_gradients_match_finite_differences(kappa0):
    for d in stable_configs(kappa0, 4, seed=20 + kappa0):
        fd = central_differences(lambda z: energy_at(z, d.domain), d.sites.coords.copy(), 1e-6)
        assert np.max(np.abs(cvt_gradient_integral(d) - fd)) <= 1e-6
        assert np.max(np.abs(cvt_gradient_explicit(d) - fd)) <= 1e-6


def test_lloyd_step_examples():
    s = lloyd_step(unit1(0.3, 0.5))
    assert np.allclose(s.points, [[0.5, 0.5]])
    strip = SiteSet(np.array([[0.25, 0.5], [0.75, 0.5]]), BoxDomain(1.0))
    assert np.allclose(lloyd_step(build_diagram(strip)).points, strip.points)


def test_lloyd_step_decreases_energy():
    for seed in range(5):
        d = build_diagram(random_sites(10, np.random.default_rng(seed)))
        after = build_diagram(lloyd_step(d))
        assert cvt_energy(after).total < cvt_energy(d).total


def test_stationarity_bounds_distance_to_centroids(cvt10):
    d = build_diagram(cvt10)
    eps = np.max(np.abs(cvt_gradient_integral(d)))
    gap = np.max(np.abs(cvt10.points - d.centroids))
    assert gap <= eps * d.kappa0 / (2 * d.areas.min())
