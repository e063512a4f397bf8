import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cvtopt.exceptions import DegenerateInput
from cvtopt.geometry import (
    Boundary,
    BoundaryEdge,
    BoxDomain,
    Corner,
    Interior,
    InteriorEdge,
    SiteSet,
    build_diagram,
    cell_measures,
    check_nondegeneracy,
    nearest_site,
    polygon_measures,
)

from conftest import random_sites


def unit(points):
    return SiteSet(np.asarray(points, dtype=float), BoxDomain(1.0))


# -- domain --------------------------------------------------------------------


def test_box_pieces_vanish_on_their_side_with_unit_outward_normal():
    dom = BoxDomain(3.0)
    on_side = {0: (1.0, 0.0), 1: (3.0, 2.0), 2: (0.5, 3.0), 3: (0.0, 1.0)}
    outward = {0: (0, -1), 1: (1, 0), 2: (0, 1), 3: (-1, 0)}
    for side, p in on_side.items():
        assert dom.phi(side, p) == pytest.approx(0.0)
        n = dom.normal(side)
        assert np.allclose(n, outward[side])
        assert np.linalg.norm(n) == pytest.approx(1.0)
        # stepping along the normal increases phi at unit rate
        assert dom.phi(side, np.add(p, 0.1 * n)) == pytest.approx(0.1)


def test_domain_for_sites_has_area_kappa0():
    dom = BoxDomain.for_sites(7)
    assert dom.side == pytest.approx(np.sqrt(7))
    assert dom.area == pytest.approx(7.0)
    assert dom.corners.shape == (4, 2)


def test_siteset_rejects_points_outside_or_nonfinite():
    with pytest.raises(ValueError):
        unit([[1.5, 0.5]])
    with pytest.raises(ValueError):
        unit([[np.nan, 0.5]])
    s = unit([[0.2, 0.3], [0.4, 0.9]])
    assert s.kappa0 == 2
    assert np.array_equal(s.coords, [0.2, 0.3, 0.4, 0.9])


# -- construction examples -------------------------------------------------------


def test_single_site_owns_the_square():
    d = build_diagram(unit([[0.5, 0.5]]))
    cell = d.cell(0)
    assert len(cell.vertices) == 4
    assert all(isinstance(p, Corner) for _, p in cell.vertices)
    assert all(isinstance(k, BoundaryEdge) for _, _, k in cell.edges)
    assert d.areas[0] == pytest.approx(1.0)
    assert sorted(map(tuple, np.round(cell.polygon, 12))) == [(0, 0), (0, 1), (1, 0), (1, 1)]


def test_two_sites_split_by_vertical_bisector():
    d = build_diagram(unit([[0.25, 0.5], [0.75, 0.5]]))
    assert np.allclose(d.areas, [0.5, 0.5])
    for i, k in ((0, 1), (1, 0)):
        cell = d.cell(i)
        inner = [(v, w) for v, w, kind in cell.edges if kind == InteriorEdge(k)]
        assert len(inner) == 1
        v, w = inner[0]
        a, b = cell.vertices[v][0], cell.vertices[w][0]
        assert np.linalg.norm(b - a) == pytest.approx(1.0)
        assert a[0] == pytest.approx(0.5) and b[0] == pytest.approx(0.5)
        provs = {cell.vertices[v][1].canonical(), cell.vertices[w][1].canonical()}
        assert provs == {Boundary(0, 1, 0), Boundary(0, 1, 2)}
    # the shared edge runs in opposite directions in the two cells
    e0 = [s for s in range(d.ptr[0], d.ptr[1]) if d.labels[s] == 1][0]
    e1 = [s for s in range(d.ptr[1], d.ptr[2]) if d.labels[s] == 0][0]
    assert np.allclose(d.xy[e0], d.xy[d.nxt[e1]])
    assert np.allclose(d.xy[d.nxt[e0]], d.xy[e1])


def test_point_location_matches_nearest_site_for_50_sites():
    rng = np.random.default_rng(3)
    s = random_sites(50, rng)
    d = build_diagram(s)
    q = rng.uniform(0, s.domain.side, (10_000, 2))
    assert np.array_equal(d.locate(q), nearest_site(s, q))


def test_coincident_sites_raise():
    with pytest.raises(DegenerateInput):
        build_diagram(unit([[0.3, 0.3], [0.3, 0.3], [0.8, 0.1]]))


def test_parallel_build_gives_the_same_cells():
    s = random_sites(300, np.random.default_rng(5))
    a, b = build_diagram(s), build_diagram(s, parallel=True)
    assert np.array_equal(a.ptr, b.ptr)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.xy, b.xy)


def test_interior_vertices_are_circumcenters_in_counterclockwise_order():
    s = random_sites(40, np.random.default_rng(8))
    d = build_diagram(s)
    pts = s.points
    n_inner = 0
    for slot in range(d.n_slots):
        p = d.provenance(slot)
        if not isinstance(p, Interior):
            continue
        n_inner += 1
        assert p.i == d.owner[slot]
        v = d.xy[slot]
        r = [np.linalg.norm(v - pts[t]) for t in (p.i, p.j, p.k)]
        assert max(r) - min(r) <= 1e-9 * s.domain.side
        # owner, then neighbours counterclockwise around v
        ang = [np.arctan2(*(pts[t] - v)[::-1]) for t in (p.i, p.j, p.k)]
        turn = [(ang[(t + 1) % 3] - ang[t]) % (2 * np.pi) for t in range(3)]
        assert sum(turn) == pytest.approx(2 * np.pi)
        c = p.canonical()
        assert c.i == min(p.i, p.j, p.k)
    assert n_inner > 0


def test_boundary_vertex_lies_on_its_side_and_bisector():
    s = random_sites(30, np.random.default_rng(2))
    d = build_diagram(s)
    for slot in range(d.n_slots):
        p = d.provenance(slot)
        if isinstance(p, Boundary):
            v = d.xy[slot]
            assert abs(d.domain.phi(p.side, v)) <= 1e-12 * d.domain.side
            gap = np.linalg.norm(v - s.points[p.i]) - np.linalg.norm(v - s.points[p.j])
            assert abs(gap) <= 1e-9 * d.domain.side


# -- invariants --------------------------------------------------------------------


def _check_invariants(d):
    L = d.domain.side
    pts = d.sites.points
    assert abs(d.areas.sum() - L * L) <= 1e-9 * L * L
    assert np.all(d.areas > 0)
    edges = {}
    for s in range(d.n_slots):
        i, k = int(d.owner[s]), int(d.labels[s])
        v, w = d.xy[s], d.xy[d.nxt[s]]
        if k >= 0:
            edges[(i, k)] = (v, w)
            for p in (v, w):
                assert abs(np.linalg.norm(p - pts[i]) - np.linalg.norm(p - pts[k])) <= 1e-9 * L
    for (i, k), (v, w) in edges.items():
        # reciprocity with reversed orientation
        v2, w2 = edges[(k, i)]
        assert np.allclose(v, w2, atol=1e-9 * L) and np.allclose(w, v2, atol=1e-9 * L)
    for i in range(d.kappa0):
        poly = d.polygon(i)
        e = np.roll(poly, -1, axis=0) - poly
        e2 = np.roll(e, -1, axis=0)
        assert np.all(e[:, 0] * e2[:, 1] - e[:, 1] * e2[:, 0] >= -1e-12)


@pytest.mark.parametrize("kappa0", [2, 3, 10, 64, 65, 200, 1000])
def test_partition_reciprocity_bisector_convexity(kappa0):
    _check_invariants(build_diagram(random_sites(kappa0, np.random.default_rng(kappa0))))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 60), st.integers(0, 2**32 - 1))
def test_invariants_hold_for_random_site_sets(kappa0, seed):
    s = random_sites(kappa0, np.random.default_rng(seed))
    d = build_diagram(s)
    _check_invariants(d)
    q = np.random.default_rng(seed + 1).uniform(0, s.domain.side, (200, 2))
    assert np.array_equal(d.locate(q), nearest_site(s, q))


def test_sites_on_the_boundary_are_handled():
    s = unit([[0.0, 0.0], [1.0, 0.3], [0.4, 1.0], [0.5, 0.5]])
    _check_invariants(build_diagram(s))


# -- nearest_site --------------------------------------------------------------------


def test_nearest_site_examples():
    s = SiteSet(np.array([[0.0, 0.0], [1.0, 1.0]]), BoxDomain(1.0))
    assert nearest_site(s, [0.1, 0.1]) == 0
    assert nearest_site(s, [0.5, 0.5]) == 0  # tie goes to the lower index
    assert nearest_site(s, [1.0, 0.0]) == 0
    assert nearest_site(s, [0.9, 0.8]) == 1


def test_nearest_site_matches_exhaustive_scan():
    rng = np.random.default_rng(11)
    s = random_sites(100, rng)
    for x in rng.uniform(0, s.domain.side, (50, 2)):
        d = [np.hypot(*(x - p)) for p in s.points]
        assert nearest_site(s, x) == int(np.argmin(d))


# -- measures ----------------------------------------------------------------------


def test_unit_square_cell_measures():
    d = build_diagram(unit([[0.3, 0.6]]))
    m = cell_measures(d, 0)
    assert m.area == pytest.approx(1.0)
    assert np.allclose(m.centroid, [0.5, 0.5])
    assert m.perimeter == pytest.approx(4.0)
    assert np.allclose(m.edge_lengths, 1.0)


def test_right_triangle_measures():
    m = polygon_measures([[0, 0], [1, 0], [0, 1]])
    assert m.area == pytest.approx(0.5)
    assert np.allclose(m.centroid, [1 / 3, 1 / 3])
    assert m.perimeter == pytest.approx(2 + np.sqrt(2))


def test_polygon_measures_against_monte_carlo():
    rng = np.random.default_rng(4)
    ang = np.sort(rng.uniform(0, 2 * np.pi, 9))
    poly = np.column_stack([np.cos(ang), np.sin(ang)]) * 0.45 + 0.5
    m = polygon_measures(poly)
    n = 400_000
    q = rng.uniform(0, 1, (n, 2))
    e = np.roll(poly, -1, axis=0) - poly
    rel = q[:, None, :] - poly[None]
    inside = np.all(e[None, :, 0] * rel[..., 1] - e[None, :, 1] * rel[..., 0] >= 0, axis=1)
    p = inside.mean()
    assert abs(m.area - p) <= 3 * np.sqrt(p * (1 - p) / n)
    inner = q[inside]
    se = inner.std(axis=0) / np.sqrt(len(inner))
    assert np.all(np.abs(m.centroid - inner.mean(axis=0)) <= 3 * se + 1e-12)


def test_diagram_measures_agree_with_polygon_measures():
    d = build_diagram(random_sites(25, np.random.default_rng(6)))
    for i in range(d.kappa0):
        a, b = cell_measures(d, i), polygon_measures(d.polygon(i))
        assert a.area == pytest.approx(b.area, rel=1e-12)
        assert np.allclose(a.centroid, b.centroid, atol=1e-12)
        assert np.allclose(a.edge_lengths, b.edge_lengths, atol=1e-12)
        assert d.n_edges[i] == len(d.polygon(i))
        assert d.min_edge_ratios[i] == pytest.approx(
            b.edge_lengths.min() / (b.perimeter / len(b.edge_lengths)))


# -- non-degeneracy ------------------------------------------------------------------


def test_square_of_four_sites_has_a_shared_vertex():
    s = SiteSet(np.array([[0.5, 0.5], [1.5, 0.5], [1.5, 1.5], [0.5, 1.5]]), BoxDomain(2.0))
    rep = check_nondegeneracy(build_diagram(s), s)
    assert not rep.ok
    assert "shared_vertex" in rep.kinds()
    assert any(v.where == (0, 1, 2, 3) for v in rep.violations if v.kind == "shared_vertex")


def test_generic_sites_pass():
    s = random_sites(100, np.random.default_rng(12))
    assert check_nondegeneracy(build_diagram(s), s).ok


def test_coincident_sites_reported():
    s = unit([[0.2, 0.2], [0.7, 0.6]])
    d = build_diagram(s)
    twin = unit([[0.2, 0.2], [0.2, 0.2]])
    rep = check_nondegeneracy(d, twin)
    assert "coincident_sites" in rep.kinds()
    assert rep.violations[0].where == (0, 1)


def test_bisector_through_a_corner_is_flagged():
    s = unit([[0.2, 0.2], [0.8, 0.8]])
    rep = check_nondegeneracy(build_diagram(s), s)
    assert "corner_vertex" in rep.kinds()
