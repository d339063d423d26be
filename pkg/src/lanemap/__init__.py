"""Lane-centerline HD map toolkit: Bezier lane graphs, connectivity
prediction, evaluation metrics, geo serialization, and multi-vehicle
aggregation over a simulated uplink."""

from .aggregator import GlobalMap, MergeConfig, frechet_distance, ingest, snapshot
from .errors import (
    ConfigError,
    ConstraintError,
    CorruptionError,
    DegenerateInputError,
    DomainError,
    FramingError,
    InfiniteLossError,
    LaneMapError,
    OutOfRegionError,
    PayloadError,
    ProtocolError,
    ReferentialIntegrityError,
    SchemaError,
    SingularityError,
    TransportError,
    UnsupportedVersionError,
)
from .geodesy import VehiclePose
from .geojson import FrameMeta, geojson_to_graph, graph_to_geojson
from .geometry import BezierCurve, Point2, Polyline, arc_length, bezier_eval, bezier_sample, fit_bezier
from .graph import LaneGraph
from .matching import MatchMap, hungarian, match_lanes, matching_loss
from .metrics import MetricsReport, PrecisionRecall, evaluate
from .rgcn import RgcnModel, forward, predict_links
from .transport import ChannelConfig, channel_transmit, decode_frame, encode_frame

__version__ = "0.1.0"

__all__ = [
    "BezierCurve",
    "ChannelConfig",
    "ConfigError",
    "ConstraintError",
    "CorruptionError",
    "DegenerateInputError",
    "DomainError",
    "FrameMeta",
    "FramingError",
    "GlobalMap",
    "InfiniteLossError",
    "LaneGraph",
    "LaneMapError",
    "MatchMap",
    "MergeConfig",
    "MetricsReport",
    "OutOfRegionError",
    "PayloadError",
    "Point2",
    "Polyline",
    "PrecisionRecall",
    "ProtocolError",
    "ReferentialIntegrityError",
    "RgcnModel",
    "SchemaError",
    "SingularityError",
    "TransportError",
    "UnsupportedVersionError",
    "VehiclePose",
    "arc_length",
    "bezier_eval",
    "bezier_sample",
    "channel_transmit",
    "decode_frame",
    "encode_frame",
    "evaluate",
    "fit_bezier",
    "forward",
    "frechet_distance",
    "geojson_to_graph",
    "graph_to_geojson",
    "hungarian",
    "ingest",
    "match_lanes",
    "matching_loss",
    "predict_links",
    "snapshot",
]
