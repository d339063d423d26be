"""HTTP front end for the cloud aggregator.

POST /v1/frames takes raw wire frames (the binary uplink format) and folds
them into one in-memory global map; GET /v1/snapshot returns the merged lane
map as canonical GeoJSON.  Ingestion is serialized through a lock, so
concurrent producers see a consistent merge order.
"""

import threading

from fastapi import FastAPI, HTTPException, Request, Response

from ..aggregator import MergeConfig, GlobalMap, dumps_state, ingest, snapshot
from ..errors import LaneMapError, OutOfRegionError, TransportError
from ..geojson import dumps_geojson
from ..transport import decode_frame
from .schemas import HealthStatus, IngestResult, ResetResult, StateSummary


def create_app(merge: MergeConfig = None) -> FastAPI:
    app = FastAPI(title="lanemap aggregation service", version="1.0")
    app.state.map = GlobalMap()
    app.state.lock = threading.Lock()
    app.state.merge = merge if merge is not None else MergeConfig()

    @app.post("/v1/frames", response_model=IngestResult)
    async def post_frame(request: Request):
        data = await request.body()
        try:
            doc = decode_frame(data)
        except TransportError as exc:
            raise HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")
        meta = doc["frame_meta"]
        key = (meta["vehicle_id"], meta["frame_id"])
        with app.state.lock:
            duplicate = key in app.state.map.submissions
            if not duplicate:
                try:
                    ingest(app.state.map, doc, app.state.merge)
                except OutOfRegionError as exc:
                    raise HTTPException(status_code=409, detail=str(exc))
                except LaneMapError as exc:
                    raise HTTPException(status_code=400, detail=f"{type(exc).__name__}: {exc}")
            return IngestResult(
                accepted=not duplicate,
                duplicate=duplicate,
                vehicle_id=meta["vehicle_id"],
                frame_id=meta["frame_id"],
                global_lanes=len(app.state.map.lanes),
            )

    @app.get("/v1/snapshot")
    def get_snapshot():
        with app.state.lock:
            doc = snapshot(app.state.map)
        return Response(
            content=dumps_geojson(doc).encode("utf-8"), media_type="application/geo+json"
        )

    @app.get("/v1/state")
    def get_state():
        with app.state.lock:
            body = dumps_state(app.state.map)
        return Response(content=body.encode("utf-8"), media_type="application/json")

    @app.get("/v1/summary", response_model=StateSummary)
    def get_summary():
        with app.state.lock:
            state = app.state.map
            return StateSummary(
                anchor=None if state.anchor is None else list(state.anchor),
                global_lanes=len(state.lanes),
                global_edges=len(state.edges),
                ingest_count=state.ingest_count,
            )

    @app.get("/v1/health", response_model=HealthStatus)
    def get_health():
        return HealthStatus(status="ok")

    @app.post("/v1/reset", response_model=ResetResult)
    def post_reset():
        with app.state.lock:
            app.state.map = GlobalMap()
        return ResetResult(cleared=True)

    return app


app = create_app()
