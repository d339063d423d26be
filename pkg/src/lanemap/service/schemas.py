"""Request/response bodies for the aggregation service."""

from pydantic import BaseModel


class IngestResult(BaseModel):
    accepted: bool
    duplicate: bool
    vehicle_id: str
    frame_id: int
    global_lanes: int


class StateSummary(BaseModel):
    anchor: list | None
    global_lanes: int
    global_edges: int
    ingest_count: int


class HealthStatus(BaseModel):
    status: str


class ResetResult(BaseModel):
    cleared: bool
