"""WGS84 local-tangent-plane conversion between BEV meters and geographic degrees.

All conversions are linearized around a reference latitude, which is accurate
to well under a decimeter for the few-kilometer extents a per-frame lane map
covers.  Headings are radians clockwise from true north.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SingularityError

WGS84_A = 6378137.0
WGS84_F = 1.0 / 298.257223563
WGS84_E2 = WGS84_F * (2.0 - WGS84_F)

# Latitudes closer to a pole than this have no usable east direction.
_POLE_LAT_LIMIT = 90.0 - 1e-6


@dataclass(frozen=True)
class VehiclePose:
    """Geographic position and heading of the vehicle BEV frame origin."""

    latitude: float
    longitude: float
    heading: float

    def __post_init__(self):
        if not (
            math.isfinite(self.latitude)
            and math.isfinite(self.longitude)
            and math.isfinite(self.heading)
        ):
            raise DomainError("pose fields must be finite")
        if abs(self.latitude) > 90.0:
            raise DomainError(f"latitude out of range: {self.latitude}")
        if abs(self.longitude) > 180.0:
            raise DomainError(f"longitude out of range: {self.longitude}")


def meridian_radius(latitude: float) -> float:
    """Radius of curvature along a meridian at the given latitude (degrees)."""
    s = math.sin(math.radians(latitude))
    return WGS84_A * (1.0 - WGS84_E2) / (1.0 - WGS84_E2 * s * s) ** 1.5


def normal_radius(latitude: float) -> float:
    """Radius of curvature in the prime vertical at the given latitude (degrees)."""
    s = math.sin(math.radians(latitude))
    return WGS84_A / math.sqrt(1.0 - WGS84_E2 * s * s)


def _check_projectable(latitude: float):
    if abs(latitude) > _POLE_LAT_LIMIT:
        raise SingularityError(f"tangent-plane projection undefined near the pole (lat={latitude})")


def _heading_rotation(heading: float) -> np.ndarray:
    # Right-multiplication matrix taking BEV (right, forward) rows to (east, north):
    # east = x cos(h) + y sin(h), north = -x sin(h) + y cos(h).
    c, s = math.cos(heading), math.sin(heading)
    return np.array([[c, -s], [s, c]])


def bev_to_world_many(pose: VehiclePose, points) -> np.ndarray:
    """Project BEV points (n, 2) to geographic (latitude, longitude) rows."""
    _check_projectable(pose.latitude)
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    east_north = pts @ _heading_rotation(pose.heading)
    lat_rad = math.radians(pose.latitude)
    dlat = np.degrees(east_north[:, 1] / meridian_radius(pose.latitude))
    dlon = np.degrees(east_north[:, 0] / (normal_radius(pose.latitude) * math.cos(lat_rad)))
    return np.column_stack([pose.latitude + dlat, pose.longitude + dlon])


def bev_to_world(pose: VehiclePose, point) -> tuple[float, float]:
    """Project one BEV point to (latitude, longitude) degrees."""
    if hasattr(point, "as_array"):
        point = point.as_array()
    lat, lon = bev_to_world_many(pose, np.asarray(point, dtype=float).reshape(1, 2))[0]
    return float(lat), float(lon)


def world_to_bev_many(pose: VehiclePose, latlon) -> np.ndarray:
    """Inverse of :func:`bev_to_world_many` for (latitude, longitude) rows."""
    _check_projectable(pose.latitude)
    ll = np.asarray(latlon, dtype=float).reshape(-1, 2)
    lat_rad = math.radians(pose.latitude)
    north = np.radians(ll[:, 0] - pose.latitude) * meridian_radius(pose.latitude)
    east = np.radians(ll[:, 1] - pose.longitude) * (
        normal_radius(pose.latitude) * math.cos(lat_rad)
    )
    return np.column_stack([east, north]) @ _heading_rotation(pose.heading).T


def geodetic_distance(lat_a: float, lon_a: float, lat_b: float, lon_b: float) -> float:
    """Tangent-plane distance in meters between two nearby geographic points."""
    offset = local_offsets(lat_a, lon_a, [[lat_b, lon_b]])[0]
    return float(np.hypot(offset[0], offset[1]))


def local_offsets(anchor_lat: float, anchor_lon: float, latlon) -> np.ndarray:
    """East/north meters of (latitude, longitude) rows relative to an anchor."""
    pose = VehiclePose(anchor_lat, anchor_lon, 0.0)
    return world_to_bev_many(pose, latlon)


def offsets_to_world(anchor_lat: float, anchor_lon: float, east_north) -> np.ndarray:
    """Inverse of :func:`local_offsets`: east/north meters to (lat, lon) rows."""
    pose = VehiclePose(anchor_lat, anchor_lon, 0.0)
    return bev_to_world_many(pose, east_north)
