"""Batch command-line entry points.

All diagnostics go to standard error; standard output and files carry only
machine-readable JSON.  Exit codes: 0 success, 1 pipeline error, 2 usage or
input-file error.
"""

import json
import sys
from pathlib import Path

import click

from .aggregator import GlobalMap, dumps_state, ingest, load_state, snapshot
from .errors import ConfigError, LaneMapError, SchemaError
from .geodesy import local_offsets
from .geojson import dumps_geojson, geojson_to_graph, graph_to_geojson
from .graph import LaneGraph, dumps_graph, load_graph
from .metrics import DEFAULT_SPACING, DEFAULT_THRESHOLD, evaluate as evaluate_graphs
from .rgcn import control_point_features, load_model, predict_links
from .scenario import dumps_frame, iter_frames, load_scenario
from .transport import WIRE_OVERHEAD, channel_transmit, decode_frame, encode_frame


class _InputError(click.ClickException):
    exit_code = 2


class _PipelineError(click.ClickException):
    exit_code = 1


def _translate(exc: Exception):
    if isinstance(exc, (ConfigError, SchemaError)):
        return _InputError(str(exc))
    if isinstance(exc, FileNotFoundError):
        return _InputError(f"no such file: {exc.filename or exc}")
    if isinstance(exc, OSError):
        return _InputError(str(exc))
    if isinstance(exc, json.JSONDecodeError):
        return _InputError(f"invalid JSON: {exc}")
    if isinstance(exc, LaneMapError):
        return _PipelineError(str(exc))
    return None


def _guarded(fn, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except click.ClickException:
        raise
    except Exception as exc:
        translated = _translate(exc)
        if translated is None:
            raise
        raise translated from exc


def _note(message: str):
    click.echo(message, err=True)


@click.group()
def main():
    """Lane-graph HD map tools: synthesize, evaluate, simulate, export."""


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
def generate(spec_path, out_dir):
    """Write GT and per-vehicle per-frame lane graphs for a scenario."""
    manifest = _guarded(_generate, spec_path, out_dir)
    click.echo(json.dumps(manifest, sort_keys=True, separators=(",", ":")))


def _generate(spec_path, out_dir):
    scenario = load_scenario(spec_path)
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    (out / "gt.json").write_text(dumps_graph(scenario.world), encoding="utf-8")
    frame_count = 0
    for record in iter_frames(scenario):
        vdir = out / record.meta.vehicle_id
        vdir.mkdir(exist_ok=True)
        path = vdir / f"frame_{record.frame_index:04d}.json"
        path.write_text(dumps_frame(record), encoding="utf-8")
        frame_count += 1
    _note(f"wrote gt.json and {frame_count} frame files under {out}")
    return {
        "frames": frame_count,
        "gt": str(out / "gt.json"),
        "vehicles": [v.vehicle_id for v in scenario.vehicles],
    }


@main.command()
@click.option("--est", "est_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gt", "gt_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--threshold", default=DEFAULT_THRESHOLD, show_default=True, type=float)
@click.option("--spacing", default=DEFAULT_SPACING, show_default=True, type=float)
def evaluate(est_path, gt_path, threshold, spacing):
    """Compare an estimated lane graph against ground truth."""
    report = _guarded(_evaluate, est_path, gt_path, threshold, spacing)
    click.echo(report.to_json())


def _evaluate(est_path, gt_path, threshold, spacing):
    est = load_graph(est_path)
    gt = load_graph(gt_path)
    return evaluate_graphs(est, gt, threshold, spacing)


@main.command()
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", default=None, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_dir", required=True, type=click.Path(file_okay=False))
@click.option("--server", "server_url", default=None, help="Aggregator base URL; default runs in-process.")
def simulate(spec_path, model_path, out_dir, server_url):
    """Run observe -> encode -> channel -> decode -> ingest and evaluate the result."""
    report = _guarded(_simulate, spec_path, model_path, out_dir, server_url)
    click.echo(report.to_json())


def _simulate(spec_path, model_path, out_dir, server_url):
    scenario = load_scenario(spec_path)
    model = load_model(model_path) if model_path else None
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    log_lines = []

    def log(event: dict):
        log_lines.append(json.dumps(event, sort_keys=True, separators=(",", ":")))

    per_vehicle = [[] for _ in scenario.vehicles]
    for record in iter_frames(scenario):
        graph = record.graph
        if model is not None:
            graph = _predicted_topology(model, graph)
        doc = graph_to_geojson(graph, record.meta, scenario.merge.resample_spacing)
        wire = encode_frame(doc)
        per_vehicle[record.vehicle_index].append((record, wire))

    deliveries = []
    for vi, sent in enumerate(per_vehicle):
        vehicle = scenario.vehicles[vi]
        schedule = channel_transmit(vehicle.channel, [wire for _, wire in sent])
        delivered_bytes = {bytes(frame) for frame, _ in schedule}
        for record, wire in sent:
            log(
                {
                    "event": "send",
                    "vehicle_id": vehicle.vehicle_id,
                    "frame_id": record.frame_index,
                    "payload_bytes": len(wire) - WIRE_OVERHEAD,
                }
            )
            if wire not in delivered_bytes:
                log(
                    {
                        "event": "drop",
                        "vehicle_id": vehicle.vehicle_id,
                        "frame_id": record.frame_index,
                    }
                )
        for position, (frame, deliver_ms) in enumerate(schedule):
            deliveries.append((deliver_ms, vi, position, frame))
    deliveries.sort(key=lambda item: (item[0], item[1], item[2]))

    if server_url is None:
        state = GlobalMap()
        for deliver_ms, vi, _, frame in deliveries:
            doc = decode_frame(frame)
            ingest(state, doc, scenario.merge)
            log(
                {
                    "event": "ingest",
                    "vehicle_id": doc["frame_meta"]["vehicle_id"],
                    "frame_id": doc["frame_meta"]["frame_id"],
                    "deliver_time_ms": deliver_ms,
                    "global_lanes": len(state.lanes),
                }
            )
        snap = snapshot(state)
        (out / "state.json").write_text(dumps_state(state), encoding="utf-8")
    else:
        snap = _drive_server(server_url, deliveries, log)

    (out / "snapshot.geojson").write_text(dumps_geojson(snap), encoding="utf-8")
    (out / "log.ndjson").write_text("".join(line + "\n" for line in log_lines), encoding="utf-8")
    (out / "gt_graph.json").write_text(dumps_graph(scenario.world), encoding="utf-8")

    est = _reanchored_graph(snap, scenario)
    (out / "est_graph.json").write_text(dumps_graph(est), encoding="utf-8")
    report = evaluate_graphs(est, scenario.world)
    (out / "metrics.json").write_text(report.to_json() + "\n", encoding="utf-8")
    _note(f"simulated {sum(len(v) for v in per_vehicle)} frames -> {len(snap['features'])} global lanes")
    return report


def _predicted_topology(model, graph: LaneGraph) -> LaneGraph:
    # Inference-time connectivity: score every ordered vertex pair from the
    # features alone; no prior edges feed the convolution.
    out = LaneGraph(graph.relations)
    for curve in graph.vertices:
        out.add_centerline(curve)
    if out.vertex_count == 0:
        return out
    h0 = control_point_features(graph)
    links = predict_links(model, h0, {}, "follows")
    rel = out.relation_id("follows")
    for i in range(links.shape[0]):
        for j in range(links.shape[1]):
            if links[i, j] == 1:
                out.connect(i, rel, j)
    return out


def _reanchored_graph(snap: dict, scenario) -> LaneGraph:
    graph, meta = geojson_to_graph(snap, scenario.degree)
    if graph.vertex_count == 0:
        return graph
    e0, n0 = local_offsets(
        scenario.anchor[0], scenario.anchor[1], [[meta.pose.latitude, meta.pose.longitude]]
    )[0]
    out = LaneGraph(graph.relations)
    for curve in graph.vertices:
        out.add_centerline(curve.translated(float(e0), float(n0)))
    for src, rel, dst in sorted(graph.edges):
        out.connect(src, rel, dst)
    return out


def _drive_server(server_url, deliveries, log):
    import httpx

    base = server_url.rstrip("/")
    with httpx.Client(base_url=base, timeout=30.0) as client:
        for deliver_ms, _, _, frame in deliveries:
            resp = client.post(
                "/v1/frames", content=frame, headers={"content-type": "application/octet-stream"}
            )
            if resp.status_code >= 400:
                raise _PipelineError(f"server rejected frame: {resp.status_code} {resp.text}")
            body = resp.json()
            log(
                {
                    "event": "ingest",
                    "vehicle_id": body.get("vehicle_id"),
                    "frame_id": body.get("frame_id"),
                    "deliver_time_ms": deliver_ms,
                    "global_lanes": body.get("global_lanes"),
                }
            )
        resp = client.get("/v1/snapshot")
        if resp.status_code >= 400:
            raise _PipelineError(f"snapshot request failed: {resp.status_code}")
        return json.loads(resp.content)


@main.command()
@click.option("--snapshot", "state_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out", "out_path", required=True, type=click.Path(dir_okay=False))
def export(state_path, out_path):
    """Render saved aggregator state as a GeoJSON lane map."""
    manifest = _guarded(_export, state_path, out_path)
    click.echo(json.dumps(manifest, sort_keys=True, separators=(",", ":")))


def _export(state_path, out_path):
    state = load_state(state_path)
    doc = snapshot(state)
    Path(out_path).write_text(dumps_geojson(doc), encoding="utf-8")
    _note(f"wrote {out_path}")
    return {"lanes": len(doc["features"]), "out": str(out_path)}


@main.command()
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", default=8000, show_default=True, type=int)
def serve(host, port):
    """Run the aggregation service (blocks until interrupted)."""
    import uvicorn

    from .service.app import create_app

    uvicorn.run(create_app(), host=host, port=port, log_level="warning")


if __name__ == "__main__":
    sys.exit(main())
