"""Cloud-side merge of per-vehicle lane maps into one global geometric layer.

State lives in a single local tangent plane anchored at the first ingested
frame's pose.  Incoming centerlines are resampled and either merged into a
nearby global lane (discrete Frechet distance within the match gate and
sufficient arclength overlap) by support-weighted pointwise averaging, or
appended as new lanes.  Duplicate (vehicle_id, frame_id) submissions are
ignored, which makes ingestion idempotent per frame.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.spatial.distance import cdist

from .errors import (
    DegenerateInputError,
    DomainError,
    OutOfRegionError,
    ReferentialIntegrityError,
    SchemaError,
)
from .geodesy import geodetic_distance, local_offsets, offsets_to_world
from .geojson import frame_meta_from_doc, validate_geolanemap

REGION_LIMIT_M = 10_000.0
STATE_FORMAT_VERSION = 1
GLOBAL_VEHICLE_ID = "global"


@dataclass(frozen=True)
class MergeConfig:
    match_distance: float = 1.0
    resample_spacing: float = 0.25
    min_overlap_fraction: float = 0.6

    def __post_init__(self):
        if self.match_distance <= 0.0 or self.resample_spacing <= 0.0:
            raise DomainError("match_distance and resample_spacing must be positive")
        if not 0.0 <= self.min_overlap_fraction <= 1.0:
            raise DomainError(
                f"min_overlap_fraction must be in [0, 1], got {self.min_overlap_fraction}"
            )


@dataclass
class GlobalLane:
    lane_id: int
    points: np.ndarray
    support_count: int
    contributors: list


@dataclass
class GlobalMap:
    anchor: tuple = None
    lanes: list = field(default_factory=list)
    edges: set = field(default_factory=set)
    submissions: set = field(default_factory=set)
    ingest_count: int = 0
    next_id: int = 0


def _polyline_array(line) -> np.ndarray:
    pts = line.points if hasattr(line, "points") else np.asarray(line, dtype=float)
    return np.asarray(pts, dtype=float).reshape(-1, 2)


def _cumulative(points: np.ndarray) -> np.ndarray:
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    return np.concatenate([[0.0], np.cumsum(steps)])


def resample_polyline(points, spacing: float) -> np.ndarray:
    """Equal-arclength resampling of a polyline at roughly the given spacing."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    cum = _cumulative(pts)
    total = float(cum[-1])
    if total <= 0.0:
        raise DegenerateInputError("cannot resample a zero-length polyline")
    segments = max(1, int(math.ceil(total / spacing - 1e-9)))
    return _resample_to_count(pts, segments + 1, cum)


def _resample_to_count(points: np.ndarray, count: int, cum=None) -> np.ndarray:
    if cum is None:
        cum = _cumulative(points)
    targets = np.linspace(0.0, cum[-1], count)
    return np.column_stack(
        [np.interp(targets, cum, points[:, 0]), np.interp(targets, cum, points[:, 1])]
    )


def frechet_distance(a, b, limit: float = None) -> float:
    """Discrete Frechet distance between two polylines.

    With `limit` set, returns inf as soon as every coupling provably exceeds
    it, which keeps the merge gate cheap for far-apart lanes.
    """
    pa, pb = _polyline_array(a), _polyline_array(b)
    dist = cdist(pa, pb)
    n, m = dist.shape
    row = np.empty(m)
    row[0] = dist[0, 0]
    for j in range(1, m):
        row[j] = max(row[j - 1], dist[0, j])
    for i in range(1, n):
        prev = row
        row = np.empty(m)
        row[0] = max(prev[0], dist[i, 0])
        for j in range(1, m):
            row[j] = max(min(prev[j - 1], prev[j], row[j - 1]), dist[i, j])
        if limit is not None and row.min() > limit:
            return math.inf
    return float(row[-1])


def _bbox_gap(a: np.ndarray, b: np.ndarray) -> float:
    # Separation of axis-aligned bounding boxes: a lower bound on every
    # point-pair distance, hence on the Frechet distance.
    lo = np.maximum(a.min(axis=0) - b.max(axis=0), b.min(axis=0) - a.max(axis=0))
    gap = np.maximum(lo, 0.0)
    return float(np.hypot(gap[0], gap[1]))


def _frechet_lower_bound(a: np.ndarray, b: np.ndarray) -> float:
    endpoints = max(
        float(np.linalg.norm(a[0] - b[0])), float(np.linalg.norm(a[-1] - b[-1]))
    )
    return max(endpoints, _bbox_gap(a, b))


def _arclength(points: np.ndarray) -> float:
    return float(np.linalg.norm(np.diff(points, axis=0), axis=1).sum())


def ingest(state: GlobalMap, doc: dict, cfg: MergeConfig = MergeConfig()) -> GlobalMap:
    """Fold one decoded lane map document into the global state (in place)."""
    validate_geolanemap(doc)
    meta = frame_meta_from_doc(doc)
    key = (meta.vehicle_id, meta.frame_id)
    if key in state.submissions:
        return state
    if state.anchor is None:
        state.anchor = (meta.pose.latitude, meta.pose.longitude)
    else:
        away = geodetic_distance(
            state.anchor[0], state.anchor[1], meta.pose.latitude, meta.pose.longitude
        )
        if away > REGION_LIMIT_M:
            raise OutOfRegionError(
                f"frame pose is {away / 1000.0:.1f} km from the map anchor "
                f"(limit {REGION_LIMIT_M / 1000.0:.0f} km)"
            )
    lane_edges = doc.get("lane_edges", [])
    known_ids = {f["properties"]["lane_id"] for f in doc["features"]}
    for ei, edge in enumerate(lane_edges):
        for lane_id in edge:
            if lane_id not in known_ids:
                raise ReferentialIntegrityError(
                    f"edge references unknown lane_id {lane_id!r}", f"/lane_edges/{ei}"
                )
    mapping = {}
    for feature in doc["features"]:
        lane_id = feature["properties"]["lane_id"]
        coords = np.asarray(feature["geometry"]["coordinates"], dtype=float)
        local = local_offsets(state.anchor[0], state.anchor[1], coords[:, [1, 0]])
        incoming = resample_polyline(local, cfg.resample_spacing)
        target = _best_merge_target(state, incoming, cfg)
        if target is None:
            lane = GlobalLane(state.next_id, incoming, 1, [(meta.vehicle_id, meta.frame_id, lane_id)])
            state.next_id += 1
            state.lanes.append(lane)
        else:
            _merge_into(target, incoming, (meta.vehicle_id, meta.frame_id, lane_id))
            lane = target
        mapping[lane_id] = lane.lane_id
    for src_id, dst_id in lane_edges:
        gsrc, gdst = mapping[src_id], mapping[dst_id]
        if gsrc != gdst:
            state.edges.add((gsrc, gdst))
    state.submissions.add(key)
    state.ingest_count += 1
    return state


def _best_merge_target(state: GlobalMap, incoming: np.ndarray, cfg: MergeConfig):
    length_in = _arclength(incoming)
    best, best_dist = None, math.inf
    for lane in state.lanes:
        length_lane = _arclength(lane.points)
        longer = max(length_in, length_lane)
        overlap = 1.0 if longer <= 0.0 else min(length_in, length_lane) / longer
        if overlap < cfg.min_overlap_fraction:
            continue
        if _frechet_lower_bound(incoming, lane.points) > cfg.match_distance:
            continue
        d = frechet_distance(incoming, lane.points, limit=cfg.match_distance)
        if d <= cfg.match_distance and d < best_dist:
            best, best_dist = lane, d
    return best


def _merge_into(lane: GlobalLane, incoming: np.ndarray, contributor: tuple):
    count = max(lane.points.shape[0], incoming.shape[0])
    base = lane.points if lane.points.shape[0] == count else _resample_to_count(lane.points, count)
    add = incoming if incoming.shape[0] == count else _resample_to_count(incoming, count)
    weight = lane.support_count
    lane.points = (base * weight + add) / (weight + 1)
    lane.support_count += 1
    lane.contributors.append(contributor)


def _midpoint_curvature(points: np.ndarray) -> float:
    # Signed three-point (circumcircle) curvature at the polyline midpoint.
    if points.shape[0] < 3:
        return 0.0
    mid = points.shape[0] // 2
    a, b, c = points[mid - 1], points[mid], points[(mid + 1) % points.shape[0]]
    cross = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    lab = np.linalg.norm(b - a)
    lbc = np.linalg.norm(c - b)
    lca = np.linalg.norm(c - a)
    denom = lab * lbc * lca
    if denom < 1e-12:
        return 0.0
    return float(2.0 * cross / denom)


def snapshot(state: GlobalMap) -> dict:
    """Deterministic lane map export of the global state."""
    anchor = state.anchor if state.anchor is not None else (0.0, 0.0)
    features = []
    for lane in sorted(state.lanes, key=lambda l: l.lane_id):
        latlon = offsets_to_world(anchor[0], anchor[1], lane.points)
        coords = [[round(lon, 7) + 0.0, round(lat, 7) + 0.0] for lat, lon in latlon]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {
                    "lane_id": f"g{lane.lane_id}",
                    "lane_type": "driving",
                    "curvature": round(_midpoint_curvature(lane.points), 9) + 0.0,
                    "frame_id": state.ingest_count,
                    "vehicle_id": GLOBAL_VEHICLE_ID,
                    "support_count": lane.support_count,
                },
            }
        )
    lane_edges = sorted([f"g{s}", f"g{d}"] for s, d in state.edges)
    return {
        "type": "FeatureCollection",
        "features": features,
        "lane_edges": lane_edges,
        "frame_meta": {
            "vehicle_id": GLOBAL_VEHICLE_ID,
            "frame_id": state.ingest_count,
            "timestamp_ms": 0,
            "pose": {"latitude": anchor[0], "longitude": anchor[1], "heading": 0.0},
        },
    }


def state_to_dict(state: GlobalMap) -> dict:
    return {
        "version": STATE_FORMAT_VERSION,
        "anchor": None if state.anchor is None else [state.anchor[0], state.anchor[1]],
        "ingest_count": state.ingest_count,
        "next_id": state.next_id,
        "submissions": sorted([v, f] for v, f in state.submissions),
        "edges": sorted([s, d] for s, d in state.edges),
        "lanes": [
            {
                "id": lane.lane_id,
                "points": [[float(x), float(y)] for x, y in lane.points],
                "support_count": lane.support_count,
                "contributors": [[v, f, l] for v, f, l in lane.contributors],
            }
            for lane in sorted(state.lanes, key=lambda l: l.lane_id)
        ],
    }


def state_from_dict(doc: dict) -> GlobalMap:
    if not isinstance(doc, dict):
        raise SchemaError("state must be an object", "")
    if doc.get("version") != STATE_FORMAT_VERSION:
        raise SchemaError(f"unsupported state version {doc.get('version')!r}", "/version")
    try:
        state = GlobalMap(
            anchor=None if doc["anchor"] is None else (float(doc["anchor"][0]), float(doc["anchor"][1])),
            ingest_count=int(doc["ingest_count"]),
            next_id=int(doc["next_id"]),
            submissions={(v, int(f)) for v, f in doc["submissions"]},
            edges={(int(s), int(d)) for s, d in doc["edges"]},
            lanes=[
                GlobalLane(
                    int(entry["id"]),
                    np.asarray(entry["points"], dtype=float).reshape(-1, 2),
                    int(entry["support_count"]),
                    [(v, int(f), l) for v, f, l in entry["contributors"]],
                )
                for entry in doc["lanes"]
            ],
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"malformed state document: {exc}") from exc
    return state


def dumps_state(state: GlobalMap) -> str:
    return json.dumps(state_to_dict(state), sort_keys=True, separators=(",", ":"), allow_nan=False)


def save_state(state: GlobalMap, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_state(state))


def load_state(path) -> GlobalMap:
    with open(path, "r", encoding="utf-8") as fh:
        return state_from_dict(json.load(fh))
