import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from coopgeo.geometry import (
    Area,
    Position,
    Shape,
    Topology,
    classify,
    csa_npa,
    csa_ppa,
    distance,
    farthest_point,
    gabriel_violates,
    in_relaying_area,
    optimal_relay_point,
    relaying_area_boundary,
    reuleaux_apex,
    segment_intersection,
    segments_cross,
)
from coopgeo.phy import qam_params

coord = st.floats(-10, 10, allow_nan=False)
point = st.tuples(coord, coord)

S0, F0 = Position(0.0, 0.0), Position(1.0, 0.0)


@pytest.mark.parametrize("a, b, d", [((0, 0), (1, 0), 1.0), ((0, 0), (0, 0), 0.0), ((0, 0), (3, 4), 5.0)])
def test_distance(a, b, d):
    assert distance(a, b) == pytest.approx(d)


@given(point, point)
def test_distance_symmetric(a, b):
    assert distance(a, b) == distance(b, a) >= 0.0


@pytest.mark.parametrize(
    "F, area",
    [((0.5, 0), Area.PPA), ((-0.5, 0), Area.NPA), ((1.5, 0), Area.OUT_OF_RANGE), ((0, 0.5), Area.NPA)],
)
def test_classify(F, area):
    assert classify((0, 0), (2, 0), F, 1.0) is area


def test_classify_zero_progress_is_npa():
    # d(F, D) == d(S, D) == 5 exactly
    assert classify((0, 0), (5, 0), (2, 4), 5.0) is Area.NPA


@pytest.mark.parametrize("d_fd, expected", [(0.0, 0), (0.25, 1), (0.999, 3)])
def test_csa_ppa_table(d_fd, expected):
    S, D = (0.0, 0.0), (1.0, 0.0)
    F = (1.0 - d_fd, 0.0)
    assert csa_ppa(S, D, F, 1.0, 8) == expected


@pytest.mark.parametrize("d_sf, expected", [(0.4, 4), (0.6, 5), (1.0, 7)])
def test_csa_npa_table(d_sf, expected):
    assert csa_npa((0.0, 0.0), (-d_sf, 0.0), 1.0, 8) == expected


def test_csa_rejects_wrong_area():
    with pytest.raises(ValueError):
        csa_ppa((0, 0), (2, 0), (-0.5, 0), 1.0, 8)
    with pytest.raises(ValueError):
        csa_npa((0, 0), (0.5, 0), 1.0, 8, D=(2, 0))
    with pytest.raises(ValueError):
        csa_npa((0, 0), (1.5, 0), 1.0, 8)
    with pytest.raises(ValueError):
        csa_ppa((0, 0), (2, 0), (0.5, 0), 1.0, 7)


@settings(max_examples=300)
@given(st.floats(0, 2 * math.pi), st.floats(1e-6, 1.0), st.sampled_from([2, 4, 8, 16]))
def test_csa_partition(theta, rad, nsa):
    S, D = (0.0, 0.0), (3.0, 0.0)
    F = (rad * math.cos(theta), rad * math.sin(theta))
    if classify(S, D, F, 1.0) is Area.PPA:
        assert 0 <= csa_ppa(S, D, F, 1.0, nsa) <= nsa // 2 - 1
    else:
        assert nsa // 2 <= csa_npa(S, F, 1.0, nsa, D) <= nsa - 1


@pytest.mark.parametrize("i", [1, 2, 3, 4])
def test_npa_coronas(i):
    r1 = 0.5  # r / sqrt(NSA / 2) for r = 1, NSA = 8
    lo, hi = math.sqrt(i - 1) * r1, math.sqrt(i) * r1
    for d in np.linspace(lo, hi, 7)[:-1] + 1e-9:
        assert csa_npa((0, 0), (-d, 0), 1.0, 8) == (i - 1) + 4
    # equal-area coronas
    assert math.pi * (i * r1**2 - (i - 1) * r1**2) == pytest.approx(math.pi * r1**2)


@given(st.floats(0.0, 0.999), st.floats(0.0, 0.999))
def test_csa_ppa_monotone_in_progress(a, b):
    S, D = (0.0, 0.0), (1.0, 0.0)
    lo, hi = sorted((a, b))
    # smaller d_FD means more progress, never a later band
    assert csa_ppa(S, D, (1 - lo, 0), 1.0, 8) <= csa_ppa(S, D, (1 - hi, 0), 1.0, 8)


@pytest.mark.parametrize(
    "x, shape, inside",
    [
        ((0.5, 0.0), Shape.LENS, True),
        ((0.5, 0.0), Shape.REULEAUX, True),
        ((0.5, 0.9), Shape.LENS, False),
        ((0.5, 0.9), Shape.REULEAUX, False),
        ((0.5, -0.4), Shape.REULEAUX, False),
        ((0.5, 0.4), Shape.REULEAUX, True),
    ],
)
def test_in_relaying_area(x, shape, inside):
    assert in_relaying_area(S0, F0, x, 1.0, shape) is inside


def test_reuleaux_apex_is_equilateral():
    P = reuleaux_apex(S0, F0)
    assert P == pytest.approx((0.5, math.sqrt(3) / 2))
    assert reuleaux_apex(S0, F0, side=-1) == pytest.approx((0.5, -math.sqrt(3) / 2))


def _sample_reuleaux(S, F, rng, n):
    d = distance(S, F)
    lo = np.minimum(S, F) - d
    hi = np.maximum(S, F) + d
    pts = rng.uniform(lo, hi, (n * 20, 2))
    keep = [p for p in pts if in_relaying_area(S, F, p, 1.0, Shape.REULEAUX)]
    return np.array(keep[:n])


def test_reuleaux_pairwise_hearing(rng):
    for _ in range(5):
        S = Position(*rng.uniform(-1, 1, 2))
        ang = rng.uniform(0, 2 * math.pi)
        d = rng.uniform(0.05, 1.0)
        F = Position(S.x + d * math.cos(ang), S.y + d * math.sin(ang))
        pts = _sample_reuleaux(S, F, rng, 500)
        i = rng.integers(0, len(pts), 20_000)
        j = rng.integers(0, len(pts), 20_000)
        dist = np.hypot(*(pts[i] - pts[j]).T)
        assert dist.max() <= d + 1e-12


@pytest.mark.parametrize(
    "w, expected", [((0.5, 0.4), True), ((0.5, 0.6), False), ((0.5, 0.5), False)]
)
def test_gabriel_violates(w, expected):
    assert gabriel_violates((0, 0), (1, 0), w) is expected


@given(point, point, point)
def test_gabriel_symmetric(u, v, w):
    assert gabriel_violates(u, v, w) == gabriel_violates(v, u, w)


def test_optimal_relay_point_qpsk():
    q = qam_params(4)
    assert optimal_relay_point(S0, F0, q.A, q.B) == pytest.approx((0.6359, 0.0), abs=1e-3)


def test_optimal_relay_point_edge_cases():
    assert optimal_relay_point(S0, F0, 1.0, 1.0) == pytest.approx((0.5, 0.0))
    assert optimal_relay_point(S0, S0, 0.5, 0.3) == pytest.approx(S0)
    with pytest.raises(ValueError):
        optimal_relay_point(S0, F0, 0.0, 0.0)


@given(point, point)
def test_optimal_relay_point_is_stationary(S, F):
    q = qam_params(4)
    x = optimal_relay_point(S, F, q.A, q.B)

    def f(p):
        return q.A**2 * distance(S, p) ** 2 + q.B * distance(F, p) ** 2

    # on segment SF
    assert distance(S, x) + distance(x, F) == pytest.approx(distance(S, F), abs=1e-9)
    for k in range(8):
        a = k * math.pi / 4
        y = (x[0] + 1e-4 * math.cos(a), x[1] + 1e-4 * math.sin(a))
        assert f(x) <= f(y) + 1e-12


def test_farthest_point_lens():
    q = qam_params(4)
    x_star = optimal_relay_point(S0, F0, q.A, q.B)
    p = farthest_point(S0, F0, 1.0, Shape.LENS, x_star)
    # Farthest from x* (right of the midpoint) is the left tip of the lens.
    assert p[0] == pytest.approx(0.5, abs=1e-3)
    assert abs(p[1]) == pytest.approx(math.sqrt(3) / 2, abs=1e-3)


def test_farthest_point_reuleaux_beats_interior_samples(rng):
    q = qam_params(4)
    x_star = optimal_relay_point(S0, F0, q.A, q.B)

    def f(pts):
        pts = np.atleast_2d(pts)
        return q.A**2 * np.hypot(*pts.T) ** 2 + q.B * np.hypot(pts[:, 0] - 1, pts[:, 1]) ** 2

    best = farthest_point(S0, F0, 1.0, Shape.REULEAUX, x_star, metric=f)
    inner = _sample_reuleaux(S0, F0, rng, 10_000)
    assert len(inner) == 10_000
    assert f(np.array(best))[0] >= f(inner).max() - 1e-6


def test_farthest_point_degenerate():
    assert farthest_point(S0, S0, 1.0, Shape.REULEAUX, S0) == S0


def test_boundary_points_lie_on_area_edge():
    for shape in Shape:
        pts = relaying_area_boundary(S0, F0, 1.0, shape, n=999)
        assert all(in_relaying_area(S0, F0, p * (1 - 1e-9) + np.array([0.5, 0.2]) * 1e-9, 1.0, shape) for p in pts)


def test_segments():
    assert segments_cross((0, 0), (1, 1), (0, 1), (1, 0))
    assert not segments_cross((0, 0), (1, 0), (0, 1), (1, 1))
    assert not segments_cross((0, 0), (1, 1), (1, 1), (2, 0))  # shared endpoint
    assert segment_intersection((0, 0), (1, 1), (0, 1), (1, 0)) == pytest.approx((0.5, 0.5))
    assert segment_intersection((0, 0), (1, 0), (0, 1), (1, 1)) is None


def test_topology_basics():
    t = Topology([(0, 0), (0.5, 0), (1.2, 0)], 0.6)
    assert len(t) == 3
    assert t.neighbors(0) == (1,)
    assert t.neighbors(1) == (0,)
    assert t.hears(0, 1) and not t.hears(0, 2)
    assert t.distance(0, 2) == pytest.approx(1.2)
    assert t.mean_degree() == pytest.approx(2 / 3)
    assert not t.connected(0, 2)
    assert not t.is_connected()


def test_topology_rejects_bad_input():
    with pytest.raises(ValueError):
        Topology([(0, 0)], 0.0)
    with pytest.raises(ValueError):
        Topology([(0, float("nan"))], 1.0)
