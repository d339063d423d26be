"""Wire framing and a seeded lossy channel for per-frame lane map uploads.

Frame layout, all integers big-endian:

    magic "HDM1" (4 bytes) | version (1 byte) | payload length (u32)
    | payload (UTF-8 lane map JSON) | CRC32 of payload (u32)

Decoding failures are classified: bad magic, unsupported version, bad
length/truncation, checksum mismatch, and invalid payload each raise their
own error type so receivers can report them distinctly.
"""

import random
import struct
import zlib
from dataclasses import dataclass

from .errors import (
    CorruptionError,
    DomainError,
    FramingError,
    PayloadError,
    ProtocolError,
    SchemaError,
    UnsupportedVersionError,
)
from .geojson import dumps_geojson, parse_geojson

MAGIC = b"HDM1"
WIRE_VERSION = 1
_HEADER = struct.Struct(">4sBI")
_TRAILER = struct.Struct(">I")
WIRE_OVERHEAD = _HEADER.size + _TRAILER.size
_MAX_PAYLOAD = 2**32 - 1


def encode_frame(doc) -> bytes:
    """Encode a lane map document (or pre-serialized payload) as a wire frame."""
    if isinstance(doc, dict):
        payload = dumps_geojson(doc).encode("utf-8")
    elif isinstance(doc, str):
        payload = doc.encode("utf-8")
    elif isinstance(doc, (bytes, bytearray)):
        payload = bytes(doc)
    else:
        raise DomainError(f"cannot encode {type(doc).__name__} as a frame payload")
    if len(payload) > _MAX_PAYLOAD:
        raise DomainError(f"payload too large for a u32 length field: {len(payload)} bytes")
    header = _HEADER.pack(MAGIC, WIRE_VERSION, len(payload))
    return header + payload + _TRAILER.pack(zlib.crc32(payload) & 0xFFFFFFFF)


def decode_frame(data: bytes) -> dict:
    """Decode and validate one wire frame, returning the lane map document."""
    data = bytes(data)
    if len(data) < 4:
        raise FramingError(f"frame shorter than the 4-byte magic: {len(data)} bytes")
    if data[:4] != MAGIC:
        raise ProtocolError(f"bad magic {data[:4]!r}")
    if len(data) < 5:
        raise FramingError("frame ends before the version byte")
    version = data[4]
    if version != WIRE_VERSION:
        raise UnsupportedVersionError(f"unsupported frame version {version}")
    if len(data) < _HEADER.size:
        raise FramingError("frame ends inside the length field")
    declared = _HEADER.unpack_from(data)[2]
    expected = _HEADER.size + declared + _TRAILER.size
    if len(data) != expected:
        raise FramingError(f"frame is {len(data)} bytes, header declares {expected}")
    payload = data[_HEADER.size : _HEADER.size + declared]
    (stored_crc,) = _TRAILER.unpack_from(data, _HEADER.size + declared)
    actual_crc = zlib.crc32(payload) & 0xFFFFFFFF
    if stored_crc != actual_crc:
        raise CorruptionError(f"CRC mismatch: stored {stored_crc:#010x}, computed {actual_crc:#010x}")
    try:
        return parse_geojson(payload)
    except SchemaError as exc:
        raise PayloadError(f"invalid lane map payload: {exc}") from exc


@dataclass(frozen=True)
class ChannelConfig:
    """Seeded loss/latency model for the uplink."""

    drop_probability: float = 0.0
    latency_ms_min: float = 0.0
    latency_ms_max: float = 0.0
    reorder: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.drop_probability <= 1.0:
            raise DomainError(f"drop_probability must be in [0, 1], got {self.drop_probability}")
        if self.latency_ms_min < 0.0 or self.latency_ms_max < 0.0:
            raise DomainError("latencies must be nonnegative")
        if self.latency_ms_min > self.latency_ms_max:
            raise DomainError(
                f"latency_ms_min {self.latency_ms_min} exceeds latency_ms_max {self.latency_ms_max}"
            )


def channel_transmit(cfg: ChannelConfig, frames) -> list:
    """Push frames through the channel; returns [(frame, deliver_time_ms), ...].

    Each frame is independently dropped with cfg.drop_probability; survivors
    get a uniform latency from the seeded generator.  Without reorder the
    delivery times are monotonized (running maximum) so arrival preserves
    send order.  Equal (cfg, frames) always produce an equal schedule.
    """
    rng = random.Random(cfg.seed)
    survivors = []
    for frame in frames:
        dropped = rng.random() < cfg.drop_probability
        if dropped:
            continue
        latency = rng.uniform(cfg.latency_ms_min, cfg.latency_ms_max)
        survivors.append((bytes(frame), latency))
    if cfg.reorder:
        return sorted(survivors, key=lambda item: item[1])
    schedule = []
    floor = 0.0
    for frame, t in survivors:
        floor = max(floor, t)
        schedule.append((frame, floor))
    return schedule
