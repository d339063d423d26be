"""Directed lane-centerline graphs with incidence-matrix connectivity.

Vertices are Bezier centerlines; edges are labeled (src, relation, dst)
triples with src != dst.  The incidence matrix collapses relations: entry
(i, j) is 1 when any relation connects i to j.
"""

import json
from pathlib import Path

import numpy as np

from .errors import ConstraintError, DomainError, SchemaError
from .geometry import BezierCurve

DEFAULT_RELATIONS = ("follows",)

GRAPH_FORMAT_VERSION = 1


class LaneGraph:
    """Mutable directed graph of lane centerlines."""

    __slots__ = ("vertices", "relations", "edges")

    def __init__(self, relations=DEFAULT_RELATIONS):
        if not relations:
            raise DomainError("graph needs at least one relation label")
        self.vertices: list[BezierCurve] = []
        self.relations: list[str] = [str(r) for r in relations]
        self.edges: set[tuple[int, int, int]] = set()

    @property
    def vertex_count(self) -> int:
        return len(self.vertices)

    @property
    def degree(self):
        """Shared Bezier degree of the vertices, or None while empty."""
        return self.vertices[0].degree if self.vertices else None

    def relation_id(self, label: str) -> int:
        try:
            return self.relations.index(label)
        except ValueError:
            raise DomainError(f"unknown relation label {label!r}") from None

    def add_centerline(self, curve: BezierCurve) -> int:
        if self.vertices and curve.degree != self.degree:
            raise DomainError(
                f"curve degree {curve.degree} does not match graph degree {self.degree}"
            )
        self.vertices.append(curve)
        return len(self.vertices) - 1

    def connect(self, src: int, rel: int, dst: int):
        for vid in (src, dst):
            if not 0 <= vid < len(self.vertices):
                raise DomainError(f"vertex id {vid} out of range (count {len(self.vertices)})")
        if not 0 <= rel < len(self.relations):
            raise DomainError(f"relation id {rel} out of range (count {len(self.relations)})")
        if src == dst:
            raise ConstraintError(f"self-loop edge on vertex {src} not allowed")
        self.edges.add((src, rel, dst))

    def incidence(self) -> np.ndarray:
        """0/1 connectivity matrix over all relations; zero diagonal."""
        m = len(self.vertices)
        matrix = np.zeros((m, m), dtype=int)
        for src, _, dst in self.edges:
            if src != dst:
                matrix[src, dst] = 1
        return matrix

    def edges_by_relation(self) -> dict[str, list[tuple[int, int]]]:
        """Per-relation (src, dst) lists in sorted order."""
        out: dict[str, list[tuple[int, int]]] = {label: [] for label in self.relations}
        for src, rel, dst in sorted(self.edges):
            out[self.relations[rel]].append((src, dst))
        return out

    def validate(self) -> list[str]:
        """Report every invariant violation; empty list means well-formed."""
        problems = []
        degrees = {c.degree for c in self.vertices}
        if len(degrees) > 1:
            problems.append(f"vertices mix Bezier degrees {sorted(degrees)}")
        for i, curve in enumerate(self.vertices):
            if not np.isfinite(curve.control_points).all():
                problems.append(f"vertex {i} has a non-finite control point")
        count = len(self.vertices)
        for src, rel, dst in sorted(self.edges):
            if src == dst:
                problems.append(f"self-loop edge on vertex {src}")
            if not (0 <= src < count) or not (0 <= dst < count):
                problems.append(f"edge ({src}, {rel}, {dst}) references a missing vertex")
            if not 0 <= rel < len(self.relations):
                problems.append(f"edge ({src}, {rel}, {dst}) references a missing relation")
        return problems

    def __repr__(self):
        return (
            f"LaneGraph({len(self.vertices)} vertices, {len(self.edges)} edges, "
            f"relations={self.relations})"
        )


def graph_to_dict(graph: LaneGraph) -> dict:
    return {
        "version": GRAPH_FORMAT_VERSION,
        "bezier_degree": graph.degree if graph.vertices else None,
        "relations": list(graph.relations),
        "vertices": [c.control_points.tolist() for c in graph.vertices],
        "edges": [list(e) for e in sorted(graph.edges)],
    }


def graph_from_dict(doc: dict) -> LaneGraph:
    if not isinstance(doc, dict):
        raise SchemaError("expected a JSON object")
    version = doc.get("version")
    if version != GRAPH_FORMAT_VERSION:
        raise SchemaError(f"unsupported graph format version {version!r}", "/version")
    relations = doc.get("relations")
    if not isinstance(relations, list) or not all(isinstance(r, str) for r in relations):
        raise SchemaError("relations must be a list of strings", "/relations")
    graph = LaneGraph(relations or DEFAULT_RELATIONS)
    vertices = doc.get("vertices")
    if not isinstance(vertices, list):
        raise SchemaError("vertices must be a list", "/vertices")
    for i, pts in enumerate(vertices):
        try:
            graph.add_centerline(BezierCurve(pts))
        except (DomainError, TypeError, ValueError) as exc:
            raise SchemaError(f"bad control points: {exc}", f"/vertices/{i}") from exc
    edges = doc.get("edges", [])
    if not isinstance(edges, list):
        raise SchemaError("edges must be a list", "/edges")
    for i, edge in enumerate(edges):
        if not (isinstance(edge, list) and len(edge) == 3 and all(isinstance(v, int) for v in edge)):
            raise SchemaError("edge must be [src, rel, dst] integers", f"/edges/{i}")
        try:
            graph.connect(edge[0], edge[1], edge[2])
        except DomainError as exc:
            raise SchemaError(str(exc), f"/edges/{i}") from exc
    return graph


def dumps_graph(graph: LaneGraph) -> str:
    return json.dumps(graph_to_dict(graph), sort_keys=True, separators=(",", ":"), allow_nan=False)


def save_graph(graph: LaneGraph, path):
    Path(path).write_text(dumps_graph(graph) + "\n", encoding="utf-8")


def load_graph(path) -> LaneGraph:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return graph_from_dict(doc)
