"""Synthetic scenario definitions and the vehicle observation model.

A scenario JSON file (version 1, unknown keys rejected) describes a world of
ground-truth lanes in a local metric frame anchored at a geographic point,
plus vehicles with pose trajectories, visibility radii, detection noise, and
uplink channel settings.  Generation is deterministic: each (vehicle, frame)
pair gets its own seeded random stream.

World frame: x east, y north, meters from the anchor.  Vehicle headings are
radians clockwise from north.  A vehicle frame's BEV x axis points right of
travel and y forward, matching the pose conventions used for geo projection.
"""

import json
import math
from dataclasses import dataclass

import numpy as np

from .aggregator import MergeConfig
from .errors import ConfigError
from .geodesy import VehiclePose, offsets_to_world
from .geojson import FrameMeta
from .geometry import BezierCurve
from .graph import DEFAULT_RELATIONS, LaneGraph, graph_from_dict, graph_to_dict
from .transport import ChannelConfig

SCENARIO_FORMAT_VERSION = 1
FRAME_FORMAT_VERSION = 1
FRAME_INTERVAL_MS = 100
_SEED_MASK = 2**64 - 1


@dataclass(frozen=True)
class VehicleSpec:
    vehicle_id: str
    visibility_radius: float  # None means unlimited
    noise_sigma: float
    channel: ChannelConfig
    trajectory: tuple  # of (x, y, heading) world-frame poses


@dataclass(frozen=True)
class Scenario:
    seed: int
    anchor: tuple  # (latitude, longitude)
    degree: int
    world: LaneGraph
    lane_ids: tuple
    vehicles: tuple
    merge: MergeConfig


@dataclass(frozen=True)
class FrameRecord:
    vehicle_index: int
    frame_index: int
    meta: FrameMeta
    graph: LaneGraph


def _check_keys(obj: dict, allowed, where: str):
    unknown = sorted(set(obj) - set(allowed))
    if unknown:
        raise ConfigError(f"unknown keys {unknown} in {where}")


def _require_key(obj: dict, key: str, where: str):
    if key not in obj:
        raise ConfigError(f"missing key {key!r} in {where}")
    return obj[key]


def _number(value, where: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{where} must be a number, got {value!r}")
    return float(value)


def scenario_from_dict(doc: dict) -> Scenario:
    if not isinstance(doc, dict):
        raise ConfigError("scenario must be a JSON object")
    _check_keys(
        doc, ("version", "seed", "anchor", "bezier_degree", "world", "vehicles", "merge"),
        "scenario",
    )
    if _require_key(doc, "version", "scenario") != SCENARIO_FORMAT_VERSION:
        raise ConfigError(f"unsupported scenario version {doc['version']!r}")
    seed = _require_key(doc, "seed", "scenario")
    if isinstance(seed, bool) or not isinstance(seed, int):
        raise ConfigError(f"seed must be an integer, got {seed!r}")
    anchor_obj = _require_key(doc, "anchor", "scenario")
    if not isinstance(anchor_obj, dict):
        raise ConfigError("anchor must be an object")
    _check_keys(anchor_obj, ("latitude", "longitude"), "anchor")
    anchor = (
        _number(_require_key(anchor_obj, "latitude", "anchor"), "anchor.latitude"),
        _number(_require_key(anchor_obj, "longitude", "anchor"), "anchor.longitude"),
    )
    degree = doc.get("bezier_degree", 3)
    if isinstance(degree, bool) or not isinstance(degree, int) or degree < 1:
        raise ConfigError(f"bezier_degree must be a positive integer, got {degree!r}")

    world_obj = _require_key(doc, "world", "scenario")
    if not isinstance(world_obj, dict):
        raise ConfigError("world must be an object")
    _check_keys(world_obj, ("lanes", "edges"), "world")
    lanes = _require_key(world_obj, "lanes", "world")
    if not isinstance(lanes, list) or not lanes:
        raise ConfigError("world.lanes must be a nonempty list")
    world = LaneGraph(DEFAULT_RELATIONS)
    lane_ids = []
    index_of = {}
    for li, lane in enumerate(lanes):
        where = f"world.lanes[{li}]"
        if not isinstance(lane, dict):
            raise ConfigError(f"{where} must be an object")
        _check_keys(lane, ("id", "control_points"), where)
        lane_id = _require_key(lane, "id", where)
        if not isinstance(lane_id, str) or not lane_id:
            raise ConfigError(f"{where}.id must be a nonempty string")
        if lane_id in index_of:
            raise ConfigError(f"duplicate lane id {lane_id!r}")
        cps = _require_key(lane, "control_points", where)
        try:
            arr = np.asarray(cps, dtype=float)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"{where}.control_points is not numeric: {exc}") from exc
        if arr.ndim != 2 or arr.shape[1] != 2:
            raise ConfigError(f"{where}.control_points must be a list of [x, y] pairs")
        if arr.shape[0] != degree + 1:
            raise ConfigError(
                f"{where}.control_points has {arr.shape[0]} points, "
                f"expected {degree + 1} for degree {degree}"
            )
        index_of[lane_id] = world.add_centerline(BezierCurve(arr))
        lane_ids.append(lane_id)
    edges = world_obj.get("edges", [])
    if not isinstance(edges, list):
        raise ConfigError("world.edges must be a list")
    rel = world.relation_id("follows")
    for ei, edge in enumerate(edges):
        where = f"world.edges[{ei}]"
        if not (isinstance(edge, list) and len(edge) == 2 and all(isinstance(e, str) for e in edge)):
            raise ConfigError(f"{where} must be [from_id, to_id] strings")
        for lane_id in edge:
            if lane_id not in index_of:
                raise ConfigError(f"{where} references unknown lane id {lane_id!r}")
        if edge[0] == edge[1]:
            raise ConfigError(f"{where} is a self-loop")
        world.connect(index_of[edge[0]], rel, index_of[edge[1]])

    vehicles_obj = _require_key(doc, "vehicles", "scenario")
    if not isinstance(vehicles_obj, list) or not vehicles_obj:
        raise ConfigError("vehicles must be a nonempty list")
    vehicles = []
    seen_ids = set()
    for vi, veh in enumerate(vehicles_obj):
        where = f"vehicles[{vi}]"
        if not isinstance(veh, dict):
            raise ConfigError(f"{where} must be an object")
        _check_keys(
            veh,
            ("vehicle_id", "visibility_radius", "noise_sigma", "channel", "trajectory"),
            where,
        )
        vehicle_id = _require_key(veh, "vehicle_id", where)
        if not isinstance(vehicle_id, str) or not vehicle_id:
            raise ConfigError(f"{where}.vehicle_id must be a nonempty string")
        if vehicle_id in seen_ids:
            raise ConfigError(f"duplicate vehicle_id {vehicle_id!r}")
        seen_ids.add(vehicle_id)
        radius = veh.get("visibility_radius")
        if radius is not None:
            radius = _number(radius, f"{where}.visibility_radius")
            if radius <= 0.0:
                raise ConfigError(f"{where}.visibility_radius must be positive or null")
        sigma = _number(veh.get("noise_sigma", 0.0), f"{where}.noise_sigma")
        if sigma < 0.0:
            raise ConfigError(f"{where}.noise_sigma must be nonnegative")
        channel_obj = veh.get("channel", {})
        if not isinstance(channel_obj, dict):
            raise ConfigError(f"{where}.channel must be an object")
        _check_keys(
            channel_obj,
            ("drop_probability", "latency_ms_min", "latency_ms_max", "reorder", "seed"),
            f"{where}.channel",
        )
        try:
            channel = ChannelConfig(**channel_obj)
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"bad {where}.channel: {exc}") from exc
        traj_obj = _require_key(veh, "trajectory", where)
        if not isinstance(traj_obj, list) or not traj_obj:
            raise ConfigError(f"{where}.trajectory must be a nonempty list")
        trajectory = []
        for fi, pose in enumerate(traj_obj):
            pw = f"{where}.trajectory[{fi}]"
            if not isinstance(pose, dict):
                raise ConfigError(f"{pw} must be an object")
            _check_keys(pose, ("x", "y", "heading"), pw)
            trajectory.append(
                (
                    _number(_require_key(pose, "x", pw), f"{pw}.x"),
                    _number(_require_key(pose, "y", pw), f"{pw}.y"),
                    _number(pose.get("heading", 0.0), f"{pw}.heading"),
                )
            )
        vehicles.append(
            VehicleSpec(vehicle_id, radius, sigma, channel, tuple(trajectory))
        )

    merge_obj = doc.get("merge", {})
    if not isinstance(merge_obj, dict):
        raise ConfigError("merge must be an object")
    _check_keys(
        merge_obj, ("match_distance", "resample_spacing", "min_overlap_fraction"), "merge"
    )
    try:
        merge = MergeConfig(**merge_obj)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad merge config: {exc}") from exc

    problems = world.validate()
    if problems:
        raise ConfigError("invalid world graph: " + "; ".join(problems))
    return Scenario(seed, anchor, degree, world, tuple(lane_ids), tuple(vehicles), merge)


def load_scenario(path) -> Scenario:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"scenario file is not valid JSON: {exc}") from exc
    return scenario_from_dict(doc)


def vehicle_pose(scenario: Scenario, x: float, y: float, heading: float) -> VehiclePose:
    lat, lon = offsets_to_world(scenario.anchor[0], scenario.anchor[1], [[x, y]])[0]
    return VehiclePose(float(lat), float(lon), heading)


def observe_frame(scenario: Scenario, vehicle_index: int, frame_index: int) -> FrameRecord:
    """One vehicle's noisy view of the world at one trajectory step.

    Lanes are visible when all their control points lie within the vehicle's
    visibility radius.  Visible control points are rotated into the vehicle
    BEV frame and perturbed with Gaussian noise from a stream seeded by
    (scenario seed, vehicle index, frame index).
    """
    vehicle = scenario.vehicles[vehicle_index]
    x, y, heading = vehicle.trajectory[frame_index]
    rng = np.random.default_rng([scenario.seed & _SEED_MASK, vehicle_index, frame_index])
    cos_h, sin_h = math.cos(heading), math.sin(heading)
    graph = LaneGraph(scenario.world.relations)
    kept = {}
    for idx, curve in enumerate(scenario.world.vertices):
        delta = curve.control_points - (x, y)
        if vehicle.visibility_radius is not None:
            reach = float(np.max(np.hypot(delta[:, 0], delta[:, 1])))
            if reach > vehicle.visibility_radius:
                continue
        bev = np.column_stack(
            [
                delta[:, 0] * cos_h - delta[:, 1] * sin_h,
                delta[:, 0] * sin_h + delta[:, 1] * cos_h,
            ]
        )
        bev = bev + rng.normal(0.0, vehicle.noise_sigma, bev.shape)
        kept[idx] = graph.add_centerline(BezierCurve(bev))
    for src, rel, dst in sorted(scenario.world.edges):
        if src in kept and dst in kept:
            graph.connect(kept[src], rel, kept[dst])
    meta = FrameMeta(
        vehicle_id=vehicle.vehicle_id,
        frame_id=frame_index,
        pose=vehicle_pose(scenario, x, y, heading),
        timestamp_ms=frame_index * FRAME_INTERVAL_MS,
    )
    return FrameRecord(vehicle_index, frame_index, meta, graph)


def iter_frames(scenario: Scenario):
    """All frames of all vehicles, vehicle-major, trajectory order."""
    for vi in range(len(scenario.vehicles)):
        for fi in range(len(scenario.vehicles[vi].trajectory)):
            yield observe_frame(scenario, vi, fi)


def frame_to_dict(record: FrameRecord) -> dict:
    meta = record.meta
    return {
        "version": FRAME_FORMAT_VERSION,
        "meta": {
            "vehicle_id": meta.vehicle_id,
            "frame_id": meta.frame_id,
            "timestamp_ms": meta.timestamp_ms,
            "pose": {
                "latitude": meta.pose.latitude,
                "longitude": meta.pose.longitude,
                "heading": meta.pose.heading,
            },
        },
        "graph": graph_to_dict(record.graph),
    }


def frame_from_dict(doc: dict) -> tuple:
    if not isinstance(doc, dict) or doc.get("version") != FRAME_FORMAT_VERSION:
        raise ConfigError("not a frame file (bad version)")
    meta_obj = doc["meta"]
    pose = meta_obj["pose"]
    meta = FrameMeta(
        vehicle_id=meta_obj["vehicle_id"],
        frame_id=meta_obj["frame_id"],
        pose=VehiclePose(pose["latitude"], pose["longitude"], pose["heading"]),
        timestamp_ms=meta_obj["timestamp_ms"],
    )
    return graph_from_dict(doc["graph"]), meta


def dumps_frame(record: FrameRecord) -> str:
    return json.dumps(frame_to_dict(record), sort_keys=True, separators=(",", ":"), allow_nan=False)
