"""Exception types shared across the toolkit."""


class LaneMapError(Exception):
    """Base class for all lanemap errors."""


class DomainError(LaneMapError, ValueError):
    """An argument lies outside the operation's domain."""


class DegenerateInputError(DomainError):
    """Input carries no usable geometric information (e.g. coincident points)."""


class ConstraintError(DomainError):
    """A structural constraint would be violated (e.g. a self-loop edge)."""


class SingularityError(LaneMapError):
    """No well-defined result exists at the requested point."""


class InfiniteLossError(LaneMapError):
    """A loss term diverges for the given detection probabilities."""


class SchemaError(LaneMapError):
    """A document does not match its expected structure.

    ``pointer`` locates the offending element as an RFC 6901 JSON pointer.
    """

    def __init__(self, message: str, pointer: str = ""):
        super().__init__(f"{pointer or '/'}: {message}")
        self.pointer = pointer


class ReferentialIntegrityError(SchemaError):
    """A document references an identifier that does not exist in it."""


class ConfigError(LaneMapError):
    """A configuration file is malformed or carries unknown keys."""


class OutOfRegionError(LaneMapError):
    """A frame lies too far from the aggregation anchor to be merged."""


class TransportError(LaneMapError):
    """Base class for wire-frame decoding failures."""


class ProtocolError(TransportError):
    """The frame does not start with the expected magic bytes."""


class UnsupportedVersionError(TransportError):
    """The frame declares a protocol version this decoder does not speak."""


class FramingError(TransportError):
    """The frame is truncated or its declared length is inconsistent."""


class CorruptionError(TransportError):
    """The payload checksum does not verify."""


class PayloadError(TransportError):
    """The payload is not a parseable lane-map document."""
