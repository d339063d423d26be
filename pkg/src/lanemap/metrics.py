"""Graph-against-graph evaluation: detection precision/recall, detection ratio,
and connectivity precision/recall.

Detection counting is point-based on curves resampled at a fixed spacing.
True/false positives are counted on the matched estimates' sample points
(distance to the matched GT polyline vs. the threshold); false negatives are
GT sample points missed by their matched estimate plus every sample point of
an unmatched GT centerline.  Connectivity counting is edge-based under the
estimate-to-GT match: an estimated edge (i, j) is a true positive when both
endpoints are matched and either they share a target or their targets are
connected in GT; a GT edge is a false negative when no pair of estimates
matched to its endpoints is connected.
"""

import json
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .geometry import BezierCurve, bezier_sample
from .graph import LaneGraph
from .matching import MatchMap, match_lanes

DEFAULT_THRESHOLD = 0.5
DEFAULT_SPACING = 0.25


@dataclass(frozen=True)
class PrecisionRecall:
    """Precision/recall with raw counts; 0/0 reports 1.0 with a vacuous flag."""

    precision: float
    recall: float
    tp: int
    fp: int
    fn: int
    vacuous_precision: bool = False
    vacuous_recall: bool = False

    @classmethod
    def from_counts(cls, tp: int, fp: int, fn: int) -> "PrecisionRecall":
        vac_p = tp + fp == 0
        vac_r = tp + fn == 0
        precision = 1.0 if vac_p else tp / (tp + fp)
        recall = 1.0 if vac_r else tp / (tp + fn)
        return cls(precision, recall, tp, fp, fn, vac_p, vac_r)

    def to_dict(self) -> dict:
        return {
            "precision": self.precision,
            "recall": self.recall,
            "tp": self.tp,
            "fp": self.fp,
            "fn": self.fn,
            "vacuous_precision": self.vacuous_precision,
            "vacuous_recall": self.vacuous_recall,
        }


def point_to_polyline_distances(points, polyline) -> np.ndarray:
    """Distance from each query point to the nearest polyline segment."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    poly = np.asarray(polyline, dtype=float).reshape(-1, 2)
    starts = poly[:-1]
    deltas = np.diff(poly, axis=0)
    seg_len_sq = (deltas**2).sum(axis=1)
    seg_len_sq = np.where(seg_len_sq == 0.0, 1.0, seg_len_sq)
    # (n_points, n_segments) projection parameters clipped to the segments.
    rel = pts[:, None, :] - starts[None, :, :]
    t = np.clip((rel * deltas[None, :, :]).sum(axis=2) / seg_len_sq[None, :], 0.0, 1.0)
    closest = starts[None, :, :] + t[:, :, None] * deltas[None, :, :]
    dists = np.linalg.norm(pts[:, None, :] - closest, axis=2)
    return dists.min(axis=1)


def _validate_match(m: MatchMap, est_count: int, gt_count: int):
    for i, j in m.items():
        if i >= est_count:
            raise DomainError(f"match references estimate {i} beyond {est_count}")
        if j >= gt_count:
            raise DomainError(f"match references target {j} beyond {gt_count}")


def detection_pr(
    est: list[BezierCurve],
    gt: list[BezierCurve],
    m: MatchMap,
    threshold: float = DEFAULT_THRESHOLD,
    spacing: float = DEFAULT_SPACING,
) -> PrecisionRecall:
    """Point-level detection counts at the given distance threshold."""
    if threshold <= 0:
        raise DomainError(f"threshold must be positive, got {threshold}")
    if spacing <= 0:
        raise DomainError(f"spacing must be positive, got {spacing}")
    _validate_match(m, len(est), len(gt))

    tp = fp = fn = 0
    matched_gt = m.matched_targets()
    for i, j in m.items():
        est_pts = bezier_sample(est[i], spacing).points
        gt_pts = bezier_sample(gt[j], spacing).points
        d_est = point_to_polyline_distances(est_pts, gt_pts)
        tp += int((d_est <= threshold).sum())
        fp += int((d_est > threshold).sum())
        d_gt = point_to_polyline_distances(gt_pts, est_pts)
        fn += int((d_gt > threshold).sum())
    for j in range(len(gt)):
        if j not in matched_gt:
            fn += len(bezier_sample(gt[j], spacing))
    return PrecisionRecall.from_counts(tp, fp, fn)


def detection_ratio(m: MatchMap, gt_count: int) -> float:
    """Fraction of GT centerlines matched by at least one estimate."""
    if gt_count < 0:
        raise DomainError(f"gt_count must be nonnegative, got {gt_count}")
    if gt_count == 0:
        return 1.0
    return len(m.matched_targets()) / gt_count


def connectivity_pr(e_est, i_gt, m: MatchMap) -> PrecisionRecall:
    """Edge-level connectivity counts under the estimate-to-GT match."""
    e = np.asarray(e_est, dtype=int)
    g = np.asarray(i_gt, dtype=int)
    for name, mat in (("estimated", e), ("GT", g)):
        if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
            raise DomainError(f"{name} incidence matrix must be square, got {mat.shape}")
    _validate_match(m, e.shape[0], g.shape[0])

    tp = fp = 0
    for i in range(e.shape[0]):
        for j in range(e.shape[1]):
            if i == j or e[i, j] != 1:
                continue
            mi, mj = m.get(i), m.get(j)
            if mi is None or mj is None:
                fp += 1
            elif mi == mj or g[mi, mj] == 1:
                tp += 1
            else:
                fp += 1

    inverse = m.inverse()
    fn = 0
    for a in range(g.shape[0]):
        for b in range(g.shape[1]):
            if a == b or g[a, b] != 1:
                continue
            covered = any(
                e[i, j] == 1 for i in inverse.get(a, ()) for j in inverse.get(b, ())
            )
            if not covered:
                fn += 1
    return PrecisionRecall.from_counts(tp, fp, fn)


@dataclass(frozen=True)
class MetricsReport:
    """All evaluation outputs for one estimated-vs-GT graph pair."""

    detection: PrecisionRecall
    detection_ratio: float
    connectivity: PrecisionRecall
    threshold: float
    spacing: float

    def to_dict(self) -> dict:
        return {
            "detection": self.detection.to_dict(),
            "detection_ratio": self.detection_ratio,
            "connectivity": self.connectivity.to_dict(),
            "threshold": self.threshold,
            "spacing": self.spacing,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def evaluate(
    est: LaneGraph,
    gt: LaneGraph,
    threshold: float = DEFAULT_THRESHOLD,
    spacing: float = DEFAULT_SPACING,
) -> MetricsReport:
    """Match estimated lanes to GT and compute all three metrics."""
    if est.vertices and gt.vertices and est.degree != gt.degree:
        raise DomainError(f"graphs must share a degree, got {est.degree} and {gt.degree}")
    m = match_lanes(est.vertices, gt.vertices)
    return MetricsReport(
        detection=detection_pr(est.vertices, gt.vertices, m, threshold, spacing),
        detection_ratio=detection_ratio(m, gt.vertex_count),
        connectivity=connectivity_pr(est.incidence(), gt.incidence(), m),
        threshold=threshold,
        spacing=spacing,
    )
