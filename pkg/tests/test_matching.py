import math

import numpy as np
import pytest

from lanemap.errors import DomainError, InfiniteLossError
from lanemap.geometry import BezierCurve, l1_control_distance
from lanemap.matching import MatchMap, hungarian, match_lanes, matching_loss
from oracles import assignment_bruteforce, lane_curve


def test_hungarian_zero_diagonal():
    m = hungarian([[0, 1], [1, 0]])
    assert m.items() == [(0, 0), (1, 1)]


def test_hungarian_single_cell():
    assert hungarian([[5.0]]).items() == [(0, 0)]


def test_hungarian_empty_matrix():
    assert len(hungarian(np.zeros((0, 3)))) == 0
    assert len(hungarian(np.zeros((3, 0)))) == 0


def test_hungarian_matches_bruteforce_totals():
    rng = np.random.default_rng(31)
    for _ in range(120):
        r = int(rng.integers(1, 7))
        c = int(rng.integers(1, 7))
        costs = rng.integers(0, 20, (r, c)).astype(float)
        m = hungarian(costs)
        got = sum(costs[i, j] for i, j in m.items())
        want, _ = assignment_bruteforce(costs)
        assert got == pytest.approx(want, abs=1e-9)
        assert len(m) == min(r, c)


def test_hungarian_lexicographic_tie_break():
    # both diagonals cost 2; the identity vector (0, 1) orders first
    m = hungarian([[1, 1], [1, 1]])
    assert m.items() == [(0, 0), (1, 1)]
    _, want = assignment_bruteforce([[1, 1], [1, 1]])
    assert dict(m.items()) == want


def test_hungarian_tie_break_matches_enumeration():
    rng = np.random.default_rng(37)
    for _ in range(150):
        r = int(rng.integers(1, 6))
        c = int(rng.integers(1, 6))
        costs = rng.integers(0, 4, (r, c)).astype(float)  # small ints force ties
        got = dict(hungarian(costs).items())
        _, want = assignment_bruteforce(costs)
        assert got == want


def test_hungarian_scale_invariance():
    rng = np.random.default_rng(41)
    costs = rng.integers(0, 9, (5, 5)).astype(float)
    base = hungarian(costs).items()
    assert hungarian(costs * 37.5).items() == base


def test_hungarian_rejects_bad_input():
    with pytest.raises(DomainError):
        hungarian(np.zeros((2, 2, 2)))
    with pytest.raises(DomainError):
        hungarian([[1.0, math.inf], [0.0, 1.0]])
    with pytest.raises(DomainError):
        hungarian([[-1.0]])


def test_matchmap_rejects_duplicate_target():
    with pytest.raises(DomainError):
        MatchMap({0: 1, 2: 1})


def test_matchmap_inverse():
    m = MatchMap({0: 2, 3: 1})
    assert m.inverse() == {2: {0}, 1: {3}}
    assert m.matched_targets() == {1, 2}


def test_match_lanes_identity():
    rng = np.random.default_rng(43)
    curves = [BezierCurve(lane_curve(rng, 3)) for _ in range(4)]
    m = match_lanes(curves, curves)
    assert dict(m.items()) == {i: i for i in range(4)}


def test_match_lanes_reversed():
    rng = np.random.default_rng(47)
    curves = [BezierCurve(lane_curve(rng, 3)) for _ in range(5)]
    m = match_lanes(curves, curves[::-1])
    assert dict(m.items()) == {i: 4 - i for i in range(5)}


def test_match_lanes_rectangular_against_injection_enumeration():
    rng = np.random.default_rng(53)
    est = [BezierCurve(lane_curve(rng, 3)) for _ in range(3)]
    gt = [BezierCurve(lane_curve(rng, 3)) for _ in range(5)]
    costs = np.array([[l1_control_distance(e, g) for g in gt] for e in est])
    got = sum(costs[i, j] for i, j in match_lanes(est, gt).items())
    want, _ = assignment_bruteforce(costs)
    assert got == pytest.approx(want, rel=1e-12)


def test_match_lanes_empty_sides():
    assert len(match_lanes([], [BezierCurve([(0, 0), (1, 1)])])) == 0
    assert len(match_lanes([BezierCurve([(0, 0), (1, 1)])], [])) == 0


def test_match_lanes_degree_mismatch():
    with pytest.raises(DomainError):
        match_lanes([BezierCurve([(0, 0), (1, 1)])], [BezierCurve([(0, 0), (1, 1), (2, 0)])])


def test_loss_perfect_match_is_zero():
    rng = np.random.default_rng(59)
    gt = [BezierCurve(lane_curve(rng, 3)) for _ in range(3)]
    est = [(c, 1.0) for c in gt]
    m = MatchMap({i: i for i in range(3)})
    for lam in (0.0, 0.5, 2.0):
        loss = matching_loss(est, gt, m, lambda_=lam)
        assert loss.total == 0.0


def test_loss_single_pair_arithmetic():
    a = BezierCurve([(0, 0), (1, 0), (2, 0), (3, 0)])
    b = BezierCurve([(0, 0.5), (1, 0.5), (2, 0.5), (3, 0.5)])  # L1 gap 2.0
    loss = matching_loss([(a, 1.0)], [b], MatchMap({0: 0}), lambda_=0.5)
    assert loss.l1 == pytest.approx(2.0)
    assert loss.cross_entropy == 0.0
    assert loss.total == pytest.approx(1.0)


def test_loss_random_instances_match_direct_formula():
    rng = np.random.default_rng(61)
    for _ in range(30):
        n_est, n_gt = int(rng.integers(1, 5)), int(rng.integers(1, 5))
        curves = [BezierCurve(lane_curve(rng, 3)) for _ in range(n_est)]
        gt = [BezierCurve(lane_curve(rng, 3)) for _ in range(n_gt)]
        probs = rng.uniform(0.05, 0.95, n_est)
        est = list(zip(curves, probs))
        size = min(n_est, n_gt)
        targets = list(rng.permutation(n_gt)[:size])
        m = MatchMap({i: int(t) for i, t in zip(range(size), targets)})
        lam = float(rng.uniform(0, 2))
        loss = matching_loss(est, gt, m, lambda_=lam)

        ce_terms = []
        for i in range(n_est):
            if i in m:
                ce_terms.append(-math.log(probs[i]))
            else:
                ce_terms.append(-math.log(1.0 - probs[i]))
        ce = sum(ce_terms) / len(ce_terms)
        gaps = [
            float(np.abs(curves[i].control_points - gt[j].control_points).sum())
            for i, j in m.items()
        ]
        l1 = sum(gaps) / len(gaps)
        assert loss.cross_entropy == pytest.approx(ce, rel=1e-12)
        assert loss.l1 == pytest.approx(l1, rel=1e-12)
        assert loss.total == pytest.approx(ce + lam * l1, rel=1e-12)


def test_loss_monotone_in_lambda():
    a = BezierCurve([(0, 0), (1, 1), (2, 1), (3, 0)])
    b = BezierCurve([(0, 1), (1, 2), (2, 2), (3, 1)])
    m = MatchMap({0: 0})
    totals = [matching_loss([(a, 0.8)], [b], m, lambda_=lam).total for lam in (0.0, 0.5, 1.0, 2.0)]
    assert totals == sorted(totals)


def test_loss_infinite_probability_cases():
    a = BezierCurve([(0, 0), (1, 1)])
    with pytest.raises(InfiniteLossError):
        matching_loss([(a, 0.0)], [a], MatchMap({0: 0}))
    with pytest.raises(InfiniteLossError):
        matching_loss([(a, 1.0)], [a], MatchMap({}))


def test_loss_rejects_bad_probability_and_lambda():
    a = BezierCurve([(0, 0), (1, 1)])
    with pytest.raises(DomainError):
        matching_loss([(a, 1.5)], [a], MatchMap({0: 0}))
    with pytest.raises(DomainError):
        matching_loss([(a, 0.5)], [a], MatchMap({0: 0}), lambda_=-1.0)


def test_loss_out_of_range_match_indices():
    a = BezierCurve([(0, 0), (1, 1)])
    with pytest.raises(DomainError):
        matching_loss([(a, 0.5)], [a], MatchMap({3: 0}))
    with pytest.raises(DomainError):
        matching_loss([(a, 0.5)], [a], MatchMap({0: 3}))
