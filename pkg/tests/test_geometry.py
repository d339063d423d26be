import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull

from lanemap.errors import DegenerateInputError, DomainError, SingularityError
from lanemap.geometry import (
    BezierCurve,
    Point2,
    Polyline,
    arc_length,
    bezier_eval,
    bezier_eval_many,
    bezier_sample,
    curvature_at,
    fit_bezier,
    l1_control_distance,
)
from oracles import (
    arc_length_quadrature,
    de_casteljau,
    fd_curvature,
    lane_curve,
)

CUBIC = BezierCurve([(0, 0), (1, 2), (3, 2), (4, 0)])


def test_eval_linear_midpoint():
    p = bezier_eval(BezierCurve([(0, 0), (2, 2)]), 0.5)
    assert (p.x, p.y) == (1.0, 1.0)


def test_eval_endpoints_interpolate():
    rng = np.random.default_rng(0)
    for _ in range(20):
        degree = rng.integers(1, 7)
        cps = rng.uniform(-100, 100, (degree + 1, 2))
        curve = BezierCurve(cps)
        p0 = bezier_eval(curve, 0.0)
        p1 = bezier_eval(curve, 1.0)
        assert abs(p0.x - cps[0, 0]) < 1e-12 and abs(p0.y - cps[0, 1]) < 1e-12
        assert abs(p1.x - cps[-1, 0]) < 1e-12 and abs(p1.y - cps[-1, 1]) < 1e-12


def test_eval_matches_de_casteljau_cubic():
    p = bezier_eval(CUBIC, 0.25)
    ref = de_casteljau(CUBIC.control_points, 0.25)
    assert abs(p.x - ref[0]) < 1e-12
    assert abs(p.y - ref[1]) < 1e-12


def test_eval_matches_de_casteljau_random_degrees():
    rng = np.random.default_rng(7)
    for _ in range(200):
        degree = int(rng.integers(1, 7))
        cps = rng.uniform(-50, 50, (degree + 1, 2))
        t = float(rng.uniform())
        got = bezier_eval_many(BezierCurve(cps), [t])[0]
        want = de_casteljau(cps, t)
        assert np.abs(got - want).max() < 1e-12


def test_eval_rejects_t_outside_unit_interval():
    with pytest.raises(DomainError):
        bezier_eval(CUBIC, -0.01)
    with pytest.raises(DomainError):
        bezier_eval(CUBIC, 1.01)


def test_curve_needs_finite_points():
    with pytest.raises(DomainError):
        BezierCurve([(0, 0), (math.nan, 1)])
    with pytest.raises(DomainError):
        Point2(math.inf, 0.0)


def test_sample_straight_segment_quarter_spacing():
    line = bezier_sample(BezierCurve([(0, 0), (1, 0)]), 0.25)
    assert np.allclose(line.points, [(0, 0), (0.25, 0), (0.5, 0), (0.75, 0), (1, 0)])


def test_sample_spacing_larger_than_length():
    line = bezier_sample(CUBIC, 1000.0)
    assert line.points.shape[0] == 2
    assert np.allclose(line.points[0], (0, 0))
    assert np.allclose(line.points[-1], (4, 0))


def test_sample_gaps_and_total_length_against_quadrature():
    line = bezier_sample(CUBIC, 0.25)
    gaps = np.linalg.norm(np.diff(line.points, axis=0), axis=1)
    assert (gaps <= 0.25 + 1e-9).all()
    total = arc_length_quadrature(CUBIC.control_points)
    # chord sums cut corners, so they sit slightly under the true length
    assert gaps.sum() <= total + 1e-9
    assert abs(gaps.sum() - total) / total < 1e-3
    assert abs(arc_length(CUBIC) - total) / total < 1e-5


def test_sample_points_lie_on_curve():
    line = bezier_sample(CUBIC, 0.3)
    # each sampled point must be reachable at some parameter
    ts = np.linspace(0, 1, 20001)
    dense = bezier_eval_many(CUBIC, ts)
    for p in line.points:
        assert np.linalg.norm(dense - p, axis=1).min() < 1e-3


def test_sample_rejects_nonpositive_spacing():
    with pytest.raises(DomainError):
        bezier_sample(CUBIC, 0.0)
    with pytest.raises(DomainError):
        bezier_sample(CUBIC, -1.0)


def test_fit_two_point_line_degree_one():
    fit = fit_bezier(Polyline([(0, 0), (3, 4)]), 1)
    assert np.allclose(fit.control_points, [(0, 0), (3, 4)])


def test_fit_collinear_points_degree_three():
    xs = np.linspace(0, 10, 21)
    fit = fit_bezier(Polyline(np.column_stack([xs, 0.5 * xs])), 3)
    samples = bezier_sample(fit, 0.05).points
    deviation = np.abs(samples[:, 1] * 2.0 - samples[:, 0]) / math.sqrt(5.0)
    assert deviation.max() < 1e-9


def test_fit_round_trip_recovers_control_points():
    rng = np.random.default_rng(21)
    for _ in range(5):
        cps = lane_curve(rng, 3)
        line = bezier_sample(BezierCurve(cps), 0.2)
        fit = fit_bezier(line, 3)
        assert np.abs(fit.control_points - cps).max() <= 1e-6


def test_fit_round_trip_quadratic():
    rng = np.random.default_rng(22)
    cps = lane_curve(rng, 2)
    line = bezier_sample(BezierCurve(cps), 0.2)
    assert np.abs(fit_bezier(line, 2).control_points - cps).max() <= 1e-6


def test_fit_endpoints_clamped():
    rng = np.random.default_rng(3)
    pts = np.cumsum(rng.uniform(0.1, 1.0, (12, 2)), axis=0)
    fit = fit_bezier(Polyline(pts), 3)
    assert np.allclose(fit.control_points[0], pts[0])
    assert np.allclose(fit.control_points[-1], pts[-1])


def test_fit_no_worse_than_plain_chord_least_squares():
    """The parameter refinement may only shrink the chord-parameter residual."""
    rng = np.random.default_rng(5)
    pts = np.cumsum(rng.uniform(0.05, 0.6, (40, 2)), axis=0)
    pts[:, 1] += np.sin(np.linspace(0, 3, 40))
    line = Polyline(pts)
    degree = 3
    cum = line.cumulative_lengths()
    u = cum / cum[-1]
    n = degree
    basis = np.array(
        [[math.comb(n, k) * (1 - ui) ** (n - k) * ui**k for k in range(n + 1)] for ui in u]
    )
    rhs = pts - np.outer(basis[:, 0], pts[0]) - np.outer(basis[:, -1], pts[-1])
    interior, *_ = np.linalg.lstsq(basis[:, 1:-1], rhs, rcond=None)
    plain = np.vstack([pts[0], interior, pts[-1]])
    plain_rms = np.linalg.norm(basis @ plain - pts)

    fit = fit_bezier(line, degree)
    # evaluate the returned fit at its best foot points on a dense grid
    dense = bezier_eval_many(fit, np.linspace(0, 1, 4001))
    fit_rms = math.sqrt(
        sum(np.linalg.norm(dense - p, axis=1).min() ** 2 for p in pts)
    )
    assert fit_rms <= plain_rms + 1e-9


def test_fit_rejects_too_few_points():
    with pytest.raises(DomainError):
        fit_bezier(Polyline([(0, 0), (1, 0), (2, 0)]), 3)


def test_fit_rejects_coincident_points():
    pts = [(0, 0), (1e-14, 0), (2e-14, 0)]
    with pytest.raises(DegenerateInputError):
        fit_bezier(Polyline(pts), 2)


def test_polyline_rejects_repeated_consecutive_points():
    with pytest.raises(DomainError):
        Polyline([(0, 0), (0, 0), (1, 0)])


def test_curvature_degree_one_is_zero():
    assert curvature_at(BezierCurve([(0, 0), (5, 5)]), 0.3) == 0.0


def test_curvature_quadratic_circle_arc():
    r, half_angle = 10.0, 0.2
    p0 = (r * math.sin(-half_angle), r - r * math.cos(-half_angle))
    p2 = (r * math.sin(half_angle), r - r * math.cos(half_angle))
    p1 = (0.0, r - r / math.cos(half_angle))
    k = curvature_at(BezierCurve([p0, p1, p2]), 0.5)
    assert abs(abs(k) - 0.1) / 0.1 < 0.05


def test_curvature_mirror_negates():
    rng = np.random.default_rng(11)
    for _ in range(20):
        cps = rng.uniform(-10, 10, (4, 2))
        t = float(rng.uniform(0.05, 0.95))
        try:
            k = curvature_at(BezierCurve(cps), t)
        except SingularityError:
            continue
        mirrored = cps * np.array([1.0, -1.0])
        assert curvature_at(BezierCurve(mirrored), t) == pytest.approx(-k, rel=1e-9)


def test_curvature_matches_finite_differences():
    rng = np.random.default_rng(13)
    for _ in range(30):
        cps = lane_curve(rng, 3)
        t = float(rng.uniform(0.1, 0.9))
        k = curvature_at(BezierCurve(cps), t)
        assert k == pytest.approx(fd_curvature(cps, t), rel=1e-4, abs=1e-7)


def test_curvature_cusp_raises():
    curve = BezierCurve([(0, 0), (0, 0.0 + 1e-30), (1, 1), (2, 0)])
    with pytest.raises(SingularityError):
        curvature_at(curve, 0.0)


def test_l1_identical_curves():
    assert l1_control_distance(CUBIC, CUBIC) == 0.0


def test_l1_unit_shift_per_point():
    shifted = BezierCurve(CUBIC.control_points + np.array([1.0, 0.0]))
    assert l1_control_distance(CUBIC, shifted) == 4.0


def test_l1_symmetric():
    rng = np.random.default_rng(17)
    for _ in range(25):
        a = BezierCurve(rng.uniform(-40, 40, (4, 2)))
        b = BezierCurve(rng.uniform(-40, 40, (4, 2)))
        assert l1_control_distance(a, b) == l1_control_distance(b, a)


def test_l1_degree_mismatch():
    with pytest.raises(DomainError):
        l1_control_distance(CUBIC, BezierCurve([(0, 0), (1, 1)]))


def test_convex_hull_property():
    rng = np.random.default_rng(19)
    checked = 0
    while checked < 15:
        degree = int(rng.integers(2, 7))
        cps = rng.uniform(-20, 20, (degree + 1, 2))
        try:
            hull = ConvexHull(cps)
        except Exception:
            continue
        samples = bezier_eval_many(BezierCurve(cps), np.linspace(0, 1, 200))
        # hull.equations rows are outward normals: A @ p + b <= 0 inside
        slack = samples @ hull.equations[:, :2].T + hull.equations[:, 2]
        assert slack.max() < 1e-9
        checked += 1


def test_affine_invariance():
    rng = np.random.default_rng(23)
    ts = np.linspace(0, 1, 50)
    for _ in range(20):
        cps = rng.uniform(-30, 30, (4, 2))
        matrix = rng.uniform(-2, 2, (2, 2))
        offset = rng.uniform(-100, 100, 2)
        direct = bezier_eval_many(BezierCurve(cps @ matrix.T + offset), ts)
        mapped = bezier_eval_many(BezierCurve(cps), ts) @ matrix.T + offset
        assert np.abs(direct - mapped).max() < 1e-9


def test_arc_length_straight_line():
    assert arc_length(BezierCurve([(0, 0), (3, 4)])) == pytest.approx(5.0, abs=1e-9)


def test_arc_length_random_curves_against_quadrature():
    rng = np.random.default_rng(29)
    for _ in range(5):
        cps = lane_curve(rng, 4)
        want = arc_length_quadrature(cps, steps=200_000)
        assert arc_length(BezierCurve(cps)) == pytest.approx(want, rel=1e-5)
