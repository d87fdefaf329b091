"""Network specifications and the forward/backward drivers.

A NetworkSpec is an ordered list of LayerSpec entries plus the (batch-less)
input shape and class count. Parameters live outside the spec as a plain
dict: layer index -> {name -> float64 array}, so trained weights can be
shared read-only across threads while specs stay immutable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping

import numpy as np

from ..errors import CompositionError, ShapeError, TrainingDivergedError
from . import layers as L

KINDS = ("Embedding", "Dense", "GlobalAveragePool1D", "Conv1D", "BiLSTM", "Dropout", "Activation")
ACTIVATIONS = ("none", "relu", "softmax")

Params = dict[int, dict[str, np.ndarray]]


@dataclass(frozen=True)
class LayerSpec:
    kind: str
    params: Mapping[str, Any] = field(default_factory=dict)
    activation: str = "none"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ShapeError(f"unknown layer kind {self.kind!r}")
        if self.activation not in ACTIVATIONS:
            raise ShapeError(f"unknown activation {self.activation!r}")
        for key, value in self.params.items():
            if key == "rate":
                if not 0.0 <= float(value) < 1.0:
                    raise ShapeError(f"dropout rate must lie in [0, 1), got {value}")
            elif int(value) < 1:
                raise ShapeError(f"{self.kind} parameter {key} must be >= 1, got {value}")
        object.__setattr__(self, "params", dict(self.params))


def embedding(vocab_size: int, dim: int) -> LayerSpec:
    return LayerSpec("Embedding", {"vocab_size": vocab_size, "dim": dim})


def dense(units: int, activation: str = "none") -> LayerSpec:
    return LayerSpec("Dense", {"units": units}, activation)


def conv1d(filters: int, kernel: int, activation: str = "none") -> LayerSpec:
    return LayerSpec("Conv1D", {"filters": filters, "kernel": kernel}, activation)


def bilstm(units: int) -> LayerSpec:
    """units is the hidden size per direction; the output width is 2 * units."""
    return LayerSpec("BiLSTM", {"units": units})


def global_average_pool() -> LayerSpec:
    return LayerSpec("GlobalAveragePool1D")


def dropout(rate: float) -> LayerSpec:
    return LayerSpec("Dropout", {"rate": float(rate)})


def activation(name: str) -> LayerSpec:
    return LayerSpec("Activation", {}, name)


@dataclass(frozen=True)
class NetworkSpec:
    layers: tuple[LayerSpec, ...]
    input_shape: tuple[int, ...]
    n_classes: int

    def __post_init__(self):
        object.__setattr__(self, "layers", tuple(self.layers))
        object.__setattr__(self, "input_shape", tuple(int(d) for d in self.input_shape))
        validate(self)


def _layer_output_shape(layer: LayerSpec, idx: int, shape: tuple[int, ...]) -> tuple[int, ...]:
    kind, p = layer.kind, layer.params
    if kind == "Embedding":
        if len(shape) != 1:
            raise CompositionError(f"layer {idx} (Embedding): expected (length,) input, got {shape}")
        return (shape[0], p["dim"])
    if kind == "Dense":
        if len(shape) != 1:
            raise CompositionError(f"layer {idx} (Dense): expected (features,) input, got {shape}")
        return (p["units"],)
    if kind == "GlobalAveragePool1D":
        if len(shape) != 2:
            raise CompositionError(
                f"layer {idx} (GlobalAveragePool1D): expected (length, channels) input, got {shape}"
            )
        return (shape[1],)
    if kind == "Conv1D":
        if len(shape) != 2:
            raise CompositionError(f"layer {idx} (Conv1D): expected (length, channels) input, got {shape}")
        return (shape[0], p["filters"])
    if kind == "BiLSTM":
        if len(shape) != 2:
            raise CompositionError(f"layer {idx} (BiLSTM): expected (length, channels) input, got {shape}")
        return (2 * p["units"],)
    # Dropout and Activation preserve shape
    return shape


def infer_shapes(spec: NetworkSpec) -> list[tuple[int, ...]]:
    """Per-layer output shapes (without the batch axis)."""
    shapes = []
    shape = spec.input_shape
    for idx, layer in enumerate(spec.layers):
        shape = _layer_output_shape(layer, idx, shape)
        shapes.append(shape)
    return shapes


def symbolic_shapes(spec: NetworkSpec) -> list[tuple]:
    """Output shapes with None for the batch axis and any sequence-length axis."""
    out = []
    for shape in infer_shapes(spec):
        if len(shape) == 2:  # (length, channels): length is data-dependent
            out.append((None, None, shape[1]))
        else:
            out.append((None,) + shape)
    return out


def validate(spec: NetworkSpec) -> None:
    if not spec.layers:
        raise CompositionError("network needs at least one layer")
    shapes = infer_shapes(spec)
    for idx, layer in enumerate(spec.layers):
        if layer.activation == "softmax" and idx != len(spec.layers) - 1:
            raise CompositionError(f"layer {idx}: softmax is only supported on the final layer")
    last = spec.layers[-1]
    if last.activation != "softmax":
        raise CompositionError("the final layer must apply softmax")
    if shapes[-1] != (spec.n_classes,):
        raise CompositionError(
            f"final layer width {shapes[-1]} does not match n_classes={spec.n_classes}"
        )


# ---------------------------------------------------------------------------
# Parameter shapes, counts, initialization
# ---------------------------------------------------------------------------

def _param_shapes(layer: LayerSpec, in_shape: tuple[int, ...]) -> dict[str, tuple[int, ...]]:
    kind, p = layer.kind, layer.params
    if kind == "Embedding":
        return {"table": (p["vocab_size"], p["dim"])}
    if kind == "Dense":
        return {"w": (in_shape[0], p["units"]), "b": (p["units"],)}
    if kind == "Conv1D":
        cin = in_shape[1]
        return {"w": (p["kernel"], cin, p["filters"]), "b": (p["filters"],)}
    if kind == "BiLSTM":
        e, h = in_shape[1], p["units"]
        return {
            "wf": (e, 4 * h), "uf": (h, 4 * h), "bf": (4 * h,),
            "wb": (e, 4 * h), "ub": (h, 4 * h), "bb": (4 * h,),
        }
    return {}


def param_shapes(spec: NetworkSpec) -> dict[int, dict[str, tuple[int, ...]]]:
    shapes = [spec.input_shape] + infer_shapes(spec)
    return {
        idx: _param_shapes(layer, shapes[idx])
        for idx, layer in enumerate(spec.layers)
        if _param_shapes(layer, shapes[idx])
    }


def layer_param_counts(spec: NetworkSpec) -> list[int]:
    shapes = [spec.input_shape] + infer_shapes(spec)
    counts = []
    for idx, layer in enumerate(spec.layers):
        counts.append(sum(int(np.prod(s)) for s in _param_shapes(layer, shapes[idx]).values()))
    return counts


def param_count(spec: NetworkSpec) -> int:
    return sum(layer_param_counts(spec))


def summary(spec: NetworkSpec) -> list[tuple[str, tuple, int]]:
    """(kind, symbolic output shape, parameter count) per layer, for table printing."""
    return list(zip([l.kind for l in spec.layers], symbolic_shapes(spec), layer_param_counts(spec)))


def init_params(spec: NetworkSpec, seed: int = 0) -> Params:
    """Seeded Glorot-uniform weights, zero biases (LSTM forget-gate bias 1)."""
    rng = np.random.default_rng(seed)
    params: Params = {}
    for idx, shapes in param_shapes(spec).items():
        layer_params = {}
        hidden = spec.layers[idx].params.get("units")
        for name in sorted(shapes):
            shape = shapes[name]
            if name.startswith("b"):
                value = np.zeros(shape)
                if spec.layers[idx].kind == "BiLSTM":
                    value[hidden:2 * hidden] = 1.0  # forget gate opens at init
            else:
                if spec.layers[idx].kind == "Conv1D":
                    k, cin, cout = shape
                    fan_in, fan_out = k * cin, k * cout
                else:
                    fan_in, fan_out = shape[0], shape[-1]
                limit = np.sqrt(6.0 / (fan_in + fan_out))
                value = rng.uniform(-limit, limit, size=shape)
            layer_params[name] = value
        params[idx] = layer_params
    return params


# ---------------------------------------------------------------------------
# Forward / backward
# ---------------------------------------------------------------------------

def _check_batch(spec: NetworkSpec, batch: np.ndarray) -> np.ndarray:
    batch = np.asarray(batch)
    if batch.shape[1:] != spec.input_shape:
        raise CompositionError(
            f"batch shape {batch.shape} does not extend input shape {spec.input_shape}"
        )
    return batch


def _layer_forward(layer, lp, x, training, rng, idx):
    kind = layer.kind
    try:
        if kind == "Embedding":
            pre, cache = L.embedding_forward(x, lp["table"]), x
        elif kind == "Dense":
            pre, cache = L.dense_forward(x, lp["w"], lp["b"]), x
        elif kind == "GlobalAveragePool1D":
            pre, cache = L.global_average_pool_forward(x), x.shape[1]
        elif kind == "Conv1D":
            pre, cache = L.conv1d_forward(x, lp["w"], lp["b"]), x
        elif kind == "BiLSTM":
            pre, cache = L.bilstm_forward(x, lp["wf"], lp["uf"], lp["bf"], lp["wb"], lp["ub"], lp["bb"])
        elif kind == "Dropout":
            pre, cache = L.dropout_forward(x, layer.params["rate"], rng, training)
        else:  # Activation
            pre, cache = x, None
    except (ValueError, ShapeError) as exc:
        raise CompositionError(f"layer {idx} ({kind}): {exc}") from exc

    if layer.activation == "relu":
        return L.relu(pre), (cache, pre)
    if layer.activation == "softmax":
        return L.softmax(pre), (cache, None)
    return pre, (cache, None)


def _forward(spec, params, batch, training, rng):
    x = _check_batch(spec, batch)
    acts, caches = [], []
    for idx, layer in enumerate(spec.layers):
        x, cache = _layer_forward(layer, params.get(idx, {}), x, training, rng, idx)
        acts.append(x)
        caches.append(cache)
    return acts, caches


def forward(spec: NetworkSpec, params: Params, batch, training: bool = False, seed=0) -> list[np.ndarray]:
    """Per-layer activations; the final entry is the class-probability matrix."""
    acts, _ = _forward(spec, params, batch, training, np.random.default_rng(seed))
    return acts


def predict_proba(spec: NetworkSpec, params: Params, batch) -> np.ndarray:
    return forward(spec, params, batch)[-1]


def _layer_backward(layer, lp, d, cache, acts_in):
    kind = layer.kind
    if kind == "Embedding":
        return None, {"table": L.embedding_backward(d, cache, lp["table"].shape)}
    if kind == "Dense":
        dx, dw, db = L.dense_backward(d, cache, lp["w"])
        return dx, {"w": dw, "b": db}
    if kind == "GlobalAveragePool1D":
        return L.global_average_pool_backward(d, cache), {}
    if kind == "Conv1D":
        dx, dw, db = L.conv1d_backward(d, cache, lp["w"])
        return dx, {"w": dw, "b": db}
    if kind == "BiLSTM":
        dx, grads = L.bilstm_backward(d, cache)
        return dx, grads
    if kind == "Dropout":
        return L.dropout_backward(d, cache), {}
    return d, {}  # Activation


def backward(spec: NetworkSpec, params: Params, batch, targets, training: bool = False, seed=0):
    """Mean cross-entropy loss and gradients for every parameter tensor."""
    targets = np.asarray(targets, dtype=np.int64)
    acts, caches = _forward(spec, params, batch, training, np.random.default_rng(seed))
    probs = acts[-1]
    loss = L.cross_entropy_batch(probs, targets)

    n = len(targets)
    onehot = np.zeros_like(probs)
    onehot[np.arange(n), targets] = 1.0
    # softmax + cross-entropy fold to (p - y)/n at the final pre-activation
    d = (probs - onehot) / n

    grads: Params = {}
    for idx in range(len(spec.layers) - 1, -1, -1):
        layer = spec.layers[idx]
        cache, pre = caches[idx]
        if idx != len(spec.layers) - 1 and layer.activation == "relu":
            d = d * (pre > 0)
        dx, layer_grads = _layer_backward(layer, params.get(idx, {}), d, cache, None)
        if layer_grads:
            grads[idx] = layer_grads
        d = dx
        if d is None and idx > 0:
            raise CompositionError(f"layer {idx} ({layer.kind}) cannot receive upstream layers")
    return loss, grads


def loss_only(spec, params, batch, targets, training=False, seed=0) -> float:
    acts, _ = _forward(spec, params, batch, training, np.random.default_rng(seed))
    return L.cross_entropy_batch(acts[-1], np.asarray(targets, dtype=np.int64))
