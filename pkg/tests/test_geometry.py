"""Domain, distance, grid, and sampling checks.

Iterative distances are validated against brute-force boundary sweeps; grid
counts against direct enumeration written out here rather than trusted.
"""

import math

import numpy as np
import pytest

from bigreen.geometry import (
    ADJACENT,
    EXTERIOR,
    INTERIOR,
    STENCIL_OFFSETS,
    Disk,
    Ellipse,
    Limacon,
    PointPair,
    Rectangle,
    _newton_nearest,
    grid_discretize,
    parse_domain,
    sample_pairs,
)

CATALOG = [Disk(1.0), Ellipse(2.0, 1.0), Limacon(1.0, 0.4), Rectangle(1.5, 0.8)]


def brute_force_distance(dom, p, n=1_000_000):
    t = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    g = dom.boundary_point(t)
    return float(np.min(np.linalg.norm(g - np.asarray(p), axis=1)))


# ---------------------------------------------------------------------------
# distances

def test_disk_rect_closed_forms():
    d = Disk(1.0)
    assert d.distance((0.3, 0.0)) == pytest.approx(0.7, abs=1e-15)
    assert d.distance((2.0, 0.0)) == pytest.approx(1.0, abs=1e-15)
    r = Rectangle(1.0, 1.0, center=(0.5, 0.5))
    assert r.distance((0.2, 0.5)) == pytest.approx(0.2, abs=1e-15)
    assert r.distance((0.5, 0.9)) == pytest.approx(0.1, abs=1e-15)
    assert r.distance((2.5, 0.5)) == pytest.approx(2.0, abs=1e-15)
    assert r.distance((1.3, 1.9)) == pytest.approx(math.hypot(0.3, 0.9), abs=1e-14)


def test_ellipse_center_distance_brute_force():
    e = Ellipse(2.0, 1.0)
    assert e.distance((0.0, 0.0)) == pytest.approx(1.0, abs=1e-10)
    assert e.distance((0.0, 0.0)) == pytest.approx(
        brute_force_distance(e, (0.0, 0.0)), abs=1e-9)


def test_newton_distance_vs_brute_force():
    rng = np.random.default_rng(21)
    for dom in (Ellipse(2.0, 1.0), Limacon(1.0, 0.4)):
        lo, hi = dom.bounding_box()
        pts = rng.uniform(lo - 0.5, hi + 0.5, (25, 2))
        got = dom.distance(pts)
        for p, g in zip(pts, got):
            assert g == pytest.approx(brute_force_distance(dom, p, 200_000), abs=1e-6)


def test_disk_forced_iterative_matches_closed_form():
    d = Disk(1.0)
    rng = np.random.default_rng(4)
    pts = rng.uniform(-1.5, 1.5, (40, 2))
    it, _ = _newton_nearest(d, pts)
    np.testing.assert_allclose(it, d.distance(pts), atol=1e-10)


def test_boundary_points_have_zero_distance():
    for dom in (Disk(1.0), Ellipse(2.0, 1.0), Limacon(1.0, 0.4)):
        t = np.linspace(0.0, 2.0 * math.pi, 17)
        for p in dom.boundary_point(t):
            assert dom.distance(p) <= 1e-10


def test_distance_is_lipschitz():
    rng = np.random.default_rng(8)
    for dom in CATALOG:
        lo, hi = dom.bounding_box()
        a = rng.uniform(lo - 0.3, hi + 0.3, (200, 2))
        b = rng.uniform(lo - 0.3, hi + 0.3, (200, 2))
        da, db = dom.distance(a), dom.distance(b)
        gap = np.linalg.norm(a - b, axis=1)
        assert np.all(np.abs(da - db) <= gap + 1e-9)


def test_outward_normals():
    assert Disk(1.0).outward_normal((1.0, 0.0)) == pytest.approx([1.0, 0.0], abs=1e-9)
    assert Ellipse(2.0, 1.0).outward_normal((0.0, 1.0)) == pytest.approx([0.0, 1.0], abs=1e-9)
    assert Rectangle(2.0, 1.0).outward_normal((1.0, 0.2)) == pytest.approx([1.0, 0.0])


def test_limacon_parameter_validation():
    with pytest.raises(ValueError):
        Limacon(1.0, 0.6)  # inner loop risk: a < 2b
    with pytest.raises(ValueError):
        Limacon(1.0, 0.0)
    Limacon(0.8, 0.4)  # boundary case a = 2b is allowed


def test_parse_domain():
    assert parse_domain("disk:1").tag() == "disk:1"
    assert parse_domain("ellipse:5,1").tag() == "ellipse:5,1"
    assert parse_domain("limacon:1,0.4").tag() == "limacon:1,0.4"
    assert parse_domain("rect:2,1").tag() == "rect:2,1"
    for bad in ("triangle:1", "disk:", "disk:1,2", "ellipse:1", "disk:abc"):
        with pytest.raises(ValueError):
            parse_domain(bad)


# ---------------------------------------------------------------------------
# grids

def test_disk_grid_interior_count_enumeration():
    # enumerate nodes (0.5 i, 0.5 j) with |x| < 1 strictly: i^2 + j^2 < 4
    expected = sum(1 for i in range(-4, 5) for j in range(-4, 5)
                   if 0.25 * (i * i + j * j) < 1.0)
    assert expected == 9
    mask = grid_discretize(Disk(1.0), 0.5, min_interior=1)
    assert mask.n_interior == expected
    # the grid is anchored so the center is a node
    i, j = mask.nearest_node((0.0, 0.0))
    assert np.allclose(mask.node_coords(i, j), (0.0, 0.0))


def test_rect_grid_three_by_three():
    mask = grid_discretize(Rectangle(1.0, 1.0), 0.25, min_interior=1)
    assert mask.n_interior == 9
    pts = mask.interior_points()
    assert np.allclose(sorted(set(np.round(pts[:, 0], 12))), [-0.25, 0.0, 0.25])


def test_grid_too_coarse_rejected_with_count():
    with pytest.raises(ValueError, match="0 interior"):
        grid_discretize(Disk(1.0), 10.0, min_interior=1)
    with pytest.raises(ValueError, match="9 interior"):
        grid_discretize(Disk(1.0), 0.5)  # default floor of 25 interior nodes


def test_grid_classification_consistent():
    dom = Ellipse(1.0, 0.6)
    mask = grid_discretize(dom, 0.1)
    xs, ys = mask.axes()
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    inside = dom.contains(np.stack([X.ravel(), Y.ravel()], axis=1)).reshape(mask.nx, mask.ny)
    assert np.array_equal(mask.kind == INTERIOR, inside)
    # adjacency re-derived from the stencil footprint
    adj = np.zeros_like(inside)
    ii, jj = np.nonzero(inside)
    for di, dj in STENCIL_OFFSETS:
        ti, tj = ii + di, jj + dj
        ok = (ti >= 0) & (ti < mask.nx) & (tj >= 0) & (tj < mask.ny)
        adj[ti[ok], tj[ok]] = True
    assert np.array_equal(mask.kind == ADJACENT, adj & ~inside)
    assert np.array_equal(mask.kind == EXTERIOR, ~adj & ~inside)
    # interior nodes sit strictly inside
    assert np.all(dom.distance(mask.interior_points()) > 0.0)


# ---------------------------------------------------------------------------
# sampling

def test_sampling_deterministic():
    dom = Disk(1.0)
    for strategy in ("uniform", "boundary-stratified", "near-diagonal"):
        a = sample_pairs(dom, 30, 123, strategy)
        b = sample_pairs(dom, 30, 123, strategy)
        assert a == b
    assert sample_pairs(dom, 10, 1) != sample_pairs(dom, 10, 2)


def test_sampling_pairs_valid_and_cached_distances():
    for dom in CATALOG:
        for p in sample_pairs(dom, 25, 5, "uniform"):
            assert dom.contains(p.x) and dom.contains(p.y)
            assert p.r > 0.0 and p.dx > 0.0 and p.dy > 0.0
            assert p.r == pytest.approx(math.dist(p.x, p.y), abs=1e-14)
            assert p.dx == pytest.approx(dom.distance(p.x), abs=1e-10)
            assert p.dy == pytest.approx(dom.distance(p.y), abs=1e-10)


def test_boundary_stratified_regime_counts():
    pairs = sample_pairs(Disk(1.0), 999, 42, "boundary-stratified")
    case1 = sum(1 for p in pairs if p.dx * p.dy <= p.r**2)
    case2 = sum(1 for p in pairs if p.dx * p.dy > p.r**2)
    assert case1 >= 300 and case2 >= 300
    # the mixed third hugs the case boundary
    mixed = pairs[2::3]
    assert all(abs(math.log(p.dx * p.dy / p.r**2)) <= 0.25 for p in mixed)


def test_near_diagonal_strategy():
    pairs = sample_pairs(Disk(1.0), 50, 9, "near-diagonal")
    assert all(p.r <= min(p.dx, p.dy) / 2.0 for p in pairs)


def test_sampling_argument_validation():
    with pytest.raises(ValueError):
        sample_pairs(Disk(1.0), 0, 1)
    with pytest.raises(ValueError):
        sample_pairs(Disk(1.0), 5, 1, "bogus")
