"""Optimal estimated-to-GT lane assignment and the detection matching loss.

The assignment minimizes total cost over all injective matchings of size
min(rows, cols).  Among cost-optimal assignments the one with the
lexicographically smallest assignment vector is returned (row i's entry is its
matched column, with "unmatched" ordered after every real column), so results
are reproducible across runs and platforms.
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import DomainError, InfiniteLossError
from .geometry import BezierCurve, l1_control_distance

_REL_TOL = 1e-9


@dataclass(frozen=True)
class MatchMap:
    """Partial injective map from estimate indices to GT target indices."""

    assignments: dict[int, int] = field(default_factory=dict)

    def __post_init__(self):
        seen = set()
        for i, j in self.assignments.items():
            if i < 0 or j < 0:
                raise DomainError(f"negative index in assignment {i} -> {j}")
            if j in seen:
                raise DomainError(f"target {j} assigned twice")
            seen.add(j)

    def get(self, i: int):
        return self.assignments.get(i)

    def items(self):
        return sorted(self.assignments.items())

    def inverse(self) -> dict[int, set[int]]:
        """Sets of estimate indices per matched target."""
        out: dict[int, set[int]] = {}
        for i, j in self.assignments.items():
            out.setdefault(j, set()).add(i)
        return out

    def matched_targets(self) -> set[int]:
        return set(self.assignments.values())

    def __len__(self):
        return len(self.assignments)

    def __contains__(self, i):
        return i in self.assignments


def _optimal_total(costs: np.ndarray) -> float:
    if costs.shape[0] == 0 or costs.shape[1] == 0:
        return 0.0
    rows, cols = linear_sum_assignment(costs)
    return float(costs[rows, cols].sum())


def hungarian(costs) -> MatchMap:
    """Minimum-total-cost assignment of size min(rows, cols).

    Empty matrices yield an empty map.  Costs must be finite and nonnegative.
    """
    matrix = np.asarray(costs, dtype=float)
    if matrix.ndim != 2:
        raise DomainError(f"cost matrix must be 2D, got shape {matrix.shape}")
    if matrix.size == 0:
        return MatchMap({})
    if not np.isfinite(matrix).all():
        raise DomainError("cost matrix contains non-finite entries")
    if (matrix < 0).any():
        raise DomainError("cost matrix contains negative entries")

    n_rows, n_cols = matrix.shape
    size = min(n_rows, n_cols)
    optimum = _optimal_total(matrix)

    assignments: dict[int, int] = {}
    used_cols: set[int] = set()
    spent = 0.0
    for i in range(n_rows):
        if len(assignments) == size:
            break
        rows_after = np.arange(i + 1, n_rows)
        free_cols = [j for j in range(n_cols) if j not in used_cols]
        need_rest = size - len(assignments) - 1
        chosen = None
        for j in free_cols:
            if need_rest > min(len(rows_after), len(free_cols) - 1):
                continue
            rest_cols = [c for c in free_cols if c != j]
            rest = _optimal_total(matrix[np.ix_(rows_after, rest_cols)])
            total = spent + matrix[i, j] + rest
            if math.isclose(total, optimum, rel_tol=_REL_TOL, abs_tol=_REL_TOL):
                chosen = j
                break
        if chosen is None:
            # Leaving row i unmatched must itself complete to the optimum.
            continue
        assignments[i] = chosen
        used_cols.add(chosen)
        spent += matrix[i, chosen]
    return MatchMap(assignments)


def match_lanes(est: list[BezierCurve], gt: list[BezierCurve]) -> MatchMap:
    """Assignment minimizing summed L1 control-point distance; surplus unmatched."""
    if not est or not gt:
        return MatchMap({})
    degrees = {c.degree for c in est} | {c.degree for c in gt}
    if len(degrees) > 1:
        raise DomainError(f"curves must share a degree, got {sorted(degrees)}")
    costs = np.array([[l1_control_distance(e, g) for g in gt] for e in est])
    return hungarian(costs)


@dataclass(frozen=True)
class LossBreakdown:
    """Matching-loss terms: total = cross_entropy + lambda_ * l1."""

    cross_entropy: float
    l1: float
    lambda_: float
    total: float


def matching_loss(est, gt: list[BezierCurve], m: MatchMap, lambda_: float = 1.0) -> LossBreakdown:
    """Detection cross-entropy plus weighted mean L1 gap over matched pairs.

    `est` is a sequence of (curve, detection probability) pairs.  Matched
    estimates score -log(p); unmatched estimates score -log(1 - p) against the
    no-object outcome.  A probability that makes either term infinite raises
    InfiniteLossError.
    """
    lambda_ = float(lambda_)
    if lambda_ < 0:
        raise DomainError(f"lambda must be nonnegative, got {lambda_}")
    curves = [c for c, _ in est]
    probs = [float(p) for _, p in est]
    for p in probs:
        if not 0.0 <= p <= 1.0:
            raise DomainError(f"detection probability out of [0, 1]: {p}")
    for i, j in m.items():
        if i >= len(curves):
            raise DomainError(f"match references estimate {i} beyond {len(curves)}")
        if j >= len(gt):
            raise DomainError(f"match references target {j} beyond {len(gt)}")

    ce_terms = []
    for i, p in enumerate(probs):
        if i in m:
            if p == 0.0:
                raise InfiniteLossError(f"matched estimate {i} has probability 0")
            ce_terms.append(-math.log(p))
        else:
            if p == 1.0:
                raise InfiniteLossError(f"unmatched estimate {i} has probability 1")
            ce_terms.append(-math.log(1.0 - p))
    cross_entropy = sum(ce_terms) / len(ce_terms) if ce_terms else 0.0

    gaps = [l1_control_distance(curves[i], gt[j]) for i, j in m.items()]
    l1 = sum(gaps) / len(gaps) if gaps else 0.0
    return LossBreakdown(cross_entropy, l1, lambda_, cross_entropy + lambda_ * l1)
