"""Geo-referenced lane maps as RFC 7946 GeoJSON FeatureCollections.

One document describes one vehicle frame.  Each centerline becomes a
LineString Feature with [longitude, latitude] coordinates fixed to 7 decimal
places; connectivity travels in a "lane_edges" foreign member (lists of
[from_lane_id, to_lane_id]) and the frame identity/pose in a "frame_meta"
foreign member, both legal under RFC 7946.  Serialization is canonical
(sorted keys, compact separators), so identical inputs give identical bytes.
"""

import json
import numbers
import warnings
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ReferentialIntegrityError, SchemaError
from .geodesy import VehiclePose, bev_to_world_many, world_to_bev_many
from .geometry import BezierCurve, Polyline, bezier_sample, curvature_at, fit_bezier
from .graph import DEFAULT_RELATIONS, LaneGraph

COORD_DECIMALS = 7
CURVATURE_DECIMALS = 9
DEFAULT_LANE_TYPE = "driving"


@dataclass(frozen=True)
class FrameMeta:
    """Identity and localization of one vehicle frame."""

    vehicle_id: str
    frame_id: int
    pose: VehiclePose
    timestamp_ms: int = 0

    def __post_init__(self):
        if not self.vehicle_id:
            raise DomainError("vehicle_id must be nonempty")
        if self.frame_id < 0:
            raise DomainError(f"frame_id must be nonnegative, got {self.frame_id}")


def _round7(value: float) -> float:
    return round(float(value), COORD_DECIMALS) + 0.0


def graph_to_geojson(graph: LaneGraph, meta: FrameMeta, spacing: float = 0.25) -> dict:
    """Serialize a BEV lane graph to a geo-referenced FeatureCollection.

    Curves are sampled at `spacing` (at least degree+1 points so the document
    can be refit on ingestion), projected through the frame pose, and written
    as LineStrings with lane attributes.
    """
    features = []
    for idx, curve in enumerate(graph.vertices):
        pts = bezier_sample(curve, spacing, min_segments=max(1, curve.degree)).points
        latlon = bev_to_world_many(meta.pose, pts)
        coords = [[_round7(lon), _round7(lat)] for lat, lon in latlon]
        features.append(
            {
                "type": "Feature",
                "geometry": {"type": "LineString", "coordinates": coords},
                "properties": {
                    "lane_id": f"lane_{idx}",
                    "lane_type": DEFAULT_LANE_TYPE,
                    "curvature": round(curvature_at(curve, 0.5), CURVATURE_DECIMALS) + 0.0,
                    "frame_id": meta.frame_id,
                    "vehicle_id": meta.vehicle_id,
                },
            }
        )
    lane_edges = sorted({(f"lane_{s}", f"lane_{d}") for s, _, d in graph.edges})
    return {
        "type": "FeatureCollection",
        "features": features,
        "lane_edges": [list(edge) for edge in lane_edges],
        "frame_meta": {
            "vehicle_id": meta.vehicle_id,
            "frame_id": meta.frame_id,
            "timestamp_ms": meta.timestamp_ms,
            "pose": {
                "latitude": meta.pose.latitude,
                "longitude": meta.pose.longitude,
                "heading": meta.pose.heading,
            },
        },
    }


def dumps_geojson(doc: dict) -> str:
    """Canonical serialization: sorted keys, compact separators, no NaN."""
    return json.dumps(doc, sort_keys=True, separators=(",", ":"), allow_nan=False)


def _is_number(x) -> bool:
    return isinstance(x, numbers.Real) and not isinstance(x, bool)


def _require(cond: bool, message: str, pointer: str):
    if not cond:
        raise SchemaError(message, pointer)


def validate_geolanemap(doc):
    """Structural validation; raises SchemaError with a JSON pointer."""
    _require(isinstance(doc, dict), "document must be an object", "")
    _require(doc.get("type") == "FeatureCollection", 'type must be "FeatureCollection"', "/type")
    features = doc.get("features")
    _require(isinstance(features, list), "features must be a list", "/features")
    lane_ids = set()
    for fi, feature in enumerate(features):
        where = f"/features/{fi}"
        _require(isinstance(feature, dict), "feature must be an object", where)
        _require(feature.get("type") == "Feature", 'type must be "Feature"', f"{where}/type")
        geom = feature.get("geometry")
        _require(isinstance(geom, dict), "geometry must be an object", f"{where}/geometry")
        _require(
            geom.get("type") == "LineString",
            'geometry type must be "LineString"',
            f"{where}/geometry/type",
        )
        coords = geom.get("coordinates")
        _require(
            isinstance(coords, list) and len(coords) >= 2,
            "coordinates must list at least 2 positions",
            f"{where}/geometry/coordinates",
        )
        for ci, pos in enumerate(coords):
            cw = f"{where}/geometry/coordinates/{ci}"
            _require(
                isinstance(pos, list) and len(pos) >= 2 and all(_is_number(v) for v in pos[:2]),
                "position must be [longitude, latitude] numbers",
                cw,
            )
            lon, lat = float(pos[0]), float(pos[1])
            _require(abs(lon) <= 180.0, f"longitude out of range: {lon}", cw)
            _require(abs(lat) <= 90.0, f"latitude out of range: {lat}", cw)
        props = feature.get("properties")
        _require(isinstance(props, dict), "properties must be an object", f"{where}/properties")
        lane_id = props.get("lane_id")
        _require(
            isinstance(lane_id, str) and lane_id != "",
            "lane_id must be a nonempty string",
            f"{where}/properties/lane_id",
        )
        _require(
            lane_id not in lane_ids, f"duplicate lane_id {lane_id!r}", f"{where}/properties/lane_id"
        )
        lane_ids.add(lane_id)
        _require(
            isinstance(props.get("lane_type"), str),
            "lane_type must be a string",
            f"{where}/properties/lane_type",
        )
        _require(
            _is_number(props.get("curvature")),
            "curvature must be a number",
            f"{where}/properties/curvature",
        )
        _require(
            isinstance(props.get("frame_id"), int) and not isinstance(props.get("frame_id"), bool),
            "frame_id must be an integer",
            f"{where}/properties/frame_id",
        )
        _require(
            isinstance(props.get("vehicle_id"), str),
            "vehicle_id must be a string",
            f"{where}/properties/vehicle_id",
        )
    if "lane_edges" in doc:
        edges = doc["lane_edges"]
        _require(isinstance(edges, list), "lane_edges must be a list", "/lane_edges")
        for ei, edge in enumerate(edges):
            ew = f"/lane_edges/{ei}"
            _require(
                isinstance(edge, list) and len(edge) == 2 and all(isinstance(x, str) for x in edge),
                "edge must be [from_lane_id, to_lane_id] strings",
                ew,
            )
            _require(edge[0] != edge[1], "self-loop lane edge", ew)
    meta = doc.get("frame_meta")
    _require(isinstance(meta, dict), "frame_meta must be an object", "/frame_meta")
    _require(
        isinstance(meta.get("vehicle_id"), str) and meta["vehicle_id"] != "",
        "vehicle_id must be a nonempty string",
        "/frame_meta/vehicle_id",
    )
    fid = meta.get("frame_id")
    _require(
        isinstance(fid, int) and not isinstance(fid, bool) and fid >= 0,
        "frame_id must be a nonnegative integer",
        "/frame_meta/frame_id",
    )
    _require(
        isinstance(meta.get("timestamp_ms"), int) and not isinstance(meta["timestamp_ms"], bool),
        "timestamp_ms must be an integer",
        "/frame_meta/timestamp_ms",
    )
    pose = meta.get("pose")
    _require(isinstance(pose, dict), "pose must be an object", "/frame_meta/pose")
    for key in ("latitude", "longitude", "heading"):
        _require(
            _is_number(pose.get(key)), f"{key} must be a number", f"/frame_meta/pose/{key}"
        )
    _require(abs(pose["latitude"]) <= 90.0, "latitude out of range", "/frame_meta/pose/latitude")
    _require(
        abs(pose["longitude"]) <= 180.0, "longitude out of range", "/frame_meta/pose/longitude"
    )


def parse_geojson(data) -> dict:
    """Parse and validate a serialized lane map (str or UTF-8 bytes)."""
    if isinstance(data, (bytes, bytearray)):
        try:
            data = bytes(data).decode("utf-8")
        except UnicodeDecodeError as exc:
            raise SchemaError(f"payload is not UTF-8: {exc}") from exc
    try:
        doc = json.loads(data)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    validate_geolanemap(doc)
    return doc


def frame_meta_from_doc(doc: dict) -> FrameMeta:
    meta = doc["frame_meta"]
    pose = meta["pose"]
    return FrameMeta(
        vehicle_id=meta["vehicle_id"],
        frame_id=meta["frame_id"],
        pose=VehiclePose(pose["latitude"], pose["longitude"], pose["heading"]),
        timestamp_ms=meta["timestamp_ms"],
    )


def _dedupe_consecutive(points: np.ndarray) -> np.ndarray:
    if points.shape[0] < 2:
        return points
    keep = np.concatenate([[True], np.linalg.norm(np.diff(points, axis=0), axis=1) > 0.0])
    return points[keep]


def _densify(points: np.ndarray, minimum: int) -> np.ndarray:
    if points.shape[0] >= minimum:
        return points
    steps = np.linalg.norm(np.diff(points, axis=0), axis=1)
    cum = np.concatenate([[0.0], np.cumsum(steps)])
    targets = np.linspace(0.0, cum[-1], minimum)
    return np.column_stack(
        [np.interp(targets, cum, points[:, 0]), np.interp(targets, cum, points[:, 1])]
    )


def geojson_to_graph(doc: dict, degree: int = 3) -> tuple[LaneGraph, FrameMeta]:
    """Rebuild a BEV lane graph from a lane-map document.

    LineStrings are inverse-projected through the document's pose back into
    its local frame and refit as Bezier curves of the given degree.
    """
    validate_geolanemap(doc)
    meta = frame_meta_from_doc(doc)
    graph = LaneGraph(DEFAULT_RELATIONS)
    index_of = {}
    for fi, feature in enumerate(doc["features"]):
        coords = np.asarray(feature["geometry"]["coordinates"], dtype=float)
        latlon = coords[:, [1, 0]]
        pts = world_to_bev_many(meta.pose, latlon)
        pts = _densify(_dedupe_consecutive(pts), degree + 1)
        try:
            curve = fit_bezier(Polyline(pts), degree)
        except DomainError as exc:
            raise SchemaError(
                f"cannot fit a degree-{degree} centerline: {exc}", f"/features/{fi}/geometry"
            ) from exc
        index_of[feature["properties"]["lane_id"]] = graph.add_centerline(curve)
    if "lane_edges" in doc:
        rel = graph.relation_id("follows")
        for ei, (src_id, dst_id) in enumerate(doc["lane_edges"]):
            for lane_id in (src_id, dst_id):
                if lane_id not in index_of:
                    raise ReferentialIntegrityError(
                        f"edge references unknown lane_id {lane_id!r}", f"/lane_edges/{ei}"
                    )
            graph.connect(index_of[src_id], rel, index_of[dst_id])
    else:
        warnings.warn("lane map has no lane_edges member; assuming no connectivity", stacklevel=2)
    return graph, meta
