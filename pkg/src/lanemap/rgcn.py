"""Inference-only relational graph convolution with DistMult link scoring.

Each layer updates node i as
    h'_i = act( sum_r sum_{j in N_i^r} (1/c_{i,r}) h_j W_r  +  h_i W_0 )
where N_i^r are the in-neighbors of i under relation r (messages flow along
edge direction) and c_{i,r} is the in-degree under r (or 1 when configured to
"none" or the neighbor set is empty).  Weight matrices act on row vectors,
shape (d_in, d_out).

Per-node sums use exact (correctly rounded) accumulation, so relabeling the
vertices permutes the output rows bitwise identically.

Model files are JSON:
    {"version": 1, "activation": "relu", "normalization": "in_degree",
     "layers": [{"w_self": [[...]], "w_rel": {"<relation>": [[...]]}}],
     "distmult": {"<relation>": [...]}}
"""

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DomainError, SchemaError
from .graph import LaneGraph

MODEL_FORMAT_VERSION = 1

ACTIVATIONS = {
    "relu": lambda x: np.maximum(x, 0.0),
    "identity": lambda x: x,
    "tanh": np.tanh,
}

NORMALIZATIONS = ("in_degree", "none")


@dataclass(frozen=True)
class RgcnLayer:
    """One relational convolution layer: self weight plus per-relation weights."""

    w_self: np.ndarray
    w_rel: dict[str, np.ndarray]

    @property
    def in_dim(self) -> int:
        return self.w_self.shape[0]

    @property
    def out_dim(self) -> int:
        return self.w_self.shape[1]


class RgcnModel:
    """Stacked relational convolution layers with per-relation DistMult diagonals."""

    __slots__ = ("layers", "activation", "distmult", "normalization")

    def __init__(self, layers, activation="relu", distmult=None, normalization="in_degree"):
        self.layers = list(layers)
        self.activation = activation
        self.distmult = {k: np.asarray(v, dtype=float) for k, v in (distmult or {}).items()}
        self.normalization = normalization
        _validate_model(self)

    @property
    def embedding_dim(self) -> int:
        return self.layers[-1].out_dim

    def relation_labels(self) -> list[str]:
        return sorted(self.distmult)


def _validate_model(model: RgcnModel):
    if not model.layers:
        raise SchemaError("model needs at least one layer", "/layers")
    if model.activation not in ACTIVATIONS:
        raise SchemaError(f"unknown activation {model.activation!r}", "/activation")
    if model.normalization not in NORMALIZATIONS:
        raise SchemaError(f"unknown normalization {model.normalization!r}", "/normalization")
    for idx, layer in enumerate(model.layers):
        if layer.w_self.ndim != 2:
            raise SchemaError("w_self must be a matrix", f"/layers/{idx}/w_self")
        for label, w in layer.w_rel.items():
            if w.shape != layer.w_self.shape:
                raise SchemaError(
                    f"relation {label!r} weight shape {w.shape} != w_self shape "
                    f"{layer.w_self.shape}",
                    f"/layers/{idx}/w_rel/{label}",
                )
        if idx > 0 and layer.in_dim != model.layers[idx - 1].out_dim:
            raise SchemaError(
                f"layer {idx} input dim {layer.in_dim} does not chain from layer "
                f"{idx - 1} output dim {model.layers[idx - 1].out_dim}",
                f"/layers/{idx}",
            )
    for label, diag in model.distmult.items():
        if diag.ndim != 1 or diag.shape[0] != model.embedding_dim:
            raise SchemaError(
                f"diagonal for {label!r} must have length {model.embedding_dim}",
                f"/distmult/{label}",
            )


def _check_features(h, width: int | None = None) -> np.ndarray:
    arr = np.asarray(h, dtype=float)
    if arr.ndim != 2:
        raise DomainError(f"node features must be 2D, got shape {arr.shape}")
    if not np.isfinite(arr).all():
        raise DomainError("node features contain non-finite values")
    if width is not None and arr.shape[1] != width:
        raise DomainError(f"feature width {arr.shape[1]} does not match expected {width}")
    return arr


def layer_forward(
    layer: RgcnLayer,
    h,
    edges: dict[str, list[tuple[int, int]]],
    activation: str = "relu",
    normalization: str = "in_degree",
) -> np.ndarray:
    """Apply one relational convolution layer to row-vector node features."""
    h = _check_features(h, layer.in_dim)
    if activation not in ACTIVATIONS:
        raise DomainError(f"unknown activation {activation!r}")
    if normalization not in NORMALIZATIONS:
        raise DomainError(f"unknown normalization {normalization!r}")
    m = h.shape[0]

    self_proj = h @ layer.w_self
    contributions: list[list[list[float]]] = [[[] for _ in range(layer.out_dim)] for _ in range(m)]
    for label, edge_list in edges.items():
        if label not in layer.w_rel:
            raise DomainError(f"relation {label!r} has no weight in this layer")
        pairs = sorted(set((int(s), int(d)) for s, d in edge_list))
        for s, d in pairs:
            if not (0 <= s < m and 0 <= d < m):
                raise DomainError(f"edge ({s}, {d}) out of range for {m} nodes")
        proj = h @ layer.w_rel[label]
        in_degree = [0] * m
        for _, dst in pairs:
            in_degree[dst] += 1
        for src, dst in pairs:
            c = in_degree[dst] if normalization == "in_degree" else 1
            scale = 1.0 / max(c, 1)
            row = proj[src] * scale
            for k in range(layer.out_dim):
                contributions[dst][k].append(float(row[k]))

    out = np.empty((m, layer.out_dim))
    for i in range(m):
        for k in range(layer.out_dim):
            out[i, k] = math.fsum(contributions[i][k] + [float(self_proj[i, k])])
    return ACTIVATIONS[activation](out)


def forward(model: RgcnModel, h0, edges: dict[str, list[tuple[int, int]]]) -> np.ndarray:
    """Left-to-right fold of the model's layers over the input features."""
    h = _check_features(h0, model.layers[0].in_dim)
    for layer in model.layers:
        h = layer_forward(layer, h, edges, model.activation, model.normalization)
    return h


def distmult_score(e_i, r_diag, e_j) -> float:
    """Trilinear score sum_k e_i[k] * r[k] * e_j[k]; exactly symmetric in i, j."""
    a = np.asarray(e_i, dtype=float)
    r = np.asarray(r_diag, dtype=float)
    b = np.asarray(e_j, dtype=float)
    if not (a.shape == r.shape == b.shape) or a.ndim != 1:
        raise DomainError(f"vectors must share one length, got {a.shape}, {r.shape}, {b.shape}")
    # a*b commutes bitwise, so scoring order cannot break symmetry.
    return float(np.dot(r, a * b))


def logistic(x: float) -> float:
    if x >= 0:
        return 1.0 / (1.0 + math.exp(-x))
    z = math.exp(x)
    return z / (1.0 + z)


def predict_links(
    model: RgcnModel,
    h0,
    edges: dict[str, list[tuple[int, int]]],
    relation: str,
    score_threshold: float = 0.5,
) -> np.ndarray:
    """Threshold the squashed DistMult scores into a 0/1 incidence matrix."""
    if relation not in model.distmult:
        raise DomainError(f"model has no DistMult diagonal for relation {relation!r}")
    emb = forward(model, h0, edges)
    diag = model.distmult[relation]
    m = emb.shape[0]
    out = np.zeros((m, m), dtype=int)
    for i in range(m):
        for j in range(m):
            if i == j:
                continue
            p = logistic(distmult_score(emb[i], diag, emb[j]))
            if p > score_threshold:
                out[i, j] = 1
    return out


def control_point_features(graph: LaneGraph) -> np.ndarray:
    """Default vertex features: flattened control points, normalized to the
    frame's bounding box (uniform scale, values in [0, 1])."""
    if not graph.vertices:
        return np.zeros((0, 0))
    stacked = np.vstack([c.control_points for c in graph.vertices])
    lo = stacked.min(axis=0)
    extent = float((stacked.max(axis=0) - lo).max())
    scale = extent if extent > 1e-12 else 1.0
    return np.vstack(
        [((c.control_points - lo) / scale).reshape(-1) for c in graph.vertices]
    )


def model_to_dict(model: RgcnModel) -> dict:
    return {
        "version": MODEL_FORMAT_VERSION,
        "activation": model.activation,
        "normalization": model.normalization,
        "layers": [
            {
                "w_self": layer.w_self.tolist(),
                "w_rel": {label: w.tolist() for label, w in sorted(layer.w_rel.items())},
            }
            for layer in model.layers
        ],
        "distmult": {label: diag.tolist() for label, diag in sorted(model.distmult.items())},
    }


def _matrix_from(obj, pointer: str) -> np.ndarray:
    try:
        arr = np.asarray(obj, dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"not a numeric matrix: {exc}", pointer) from exc
    if arr.ndim != 2 or not np.isfinite(arr).all():
        raise SchemaError("expected a finite 2D matrix", pointer)
    return arr


def model_from_dict(doc: dict) -> RgcnModel:
    if not isinstance(doc, dict):
        raise SchemaError("expected a JSON object")
    if doc.get("version") != MODEL_FORMAT_VERSION:
        raise SchemaError(f"unsupported model version {doc.get('version')!r}", "/version")
    raw_layers = doc.get("layers")
    if not isinstance(raw_layers, list) or not raw_layers:
        raise SchemaError("layers must be a nonempty list", "/layers")
    layers = []
    for idx, entry in enumerate(raw_layers):
        if not isinstance(entry, dict) or "w_self" not in entry:
            raise SchemaError("layer must be an object with w_self", f"/layers/{idx}")
        w_self = _matrix_from(entry["w_self"], f"/layers/{idx}/w_self")
        w_rel = {}
        for label, w in (entry.get("w_rel") or {}).items():
            w_rel[label] = _matrix_from(w, f"/layers/{idx}/w_rel/{label}")
        layers.append(RgcnLayer(w_self, w_rel))
    raw_distmult = doc.get("distmult")
    if not isinstance(raw_distmult, dict):
        raise SchemaError("distmult must be an object", "/distmult")
    distmult = {}
    for label, diag in raw_distmult.items():
        arr = np.asarray(diag, dtype=float)
        if arr.ndim != 1 or not np.isfinite(arr).all():
            raise SchemaError("expected a finite vector", f"/distmult/{label}")
        distmult[label] = arr
    return RgcnModel(
        layers,
        activation=doc.get("activation", "relu"),
        distmult=distmult,
        normalization=doc.get("normalization", "in_degree"),
    )


def save_model(model: RgcnModel, path):
    Path(path).write_text(
        json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":")) + "\n",
        encoding="utf-8",
    )


def load_model(path) -> RgcnModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return model_from_dict(doc)
