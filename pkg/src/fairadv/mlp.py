"""Minimal feed-forward binary classifier with exact reverse-mode gradients.

Fixed computation graph: dense layers with relu/tanh hidden activations and a
sigmoid output head producing one soft label in (0,1) per row.  Gradients with
respect to both parameters and inputs are computed analytically; every other
module differentiates through this one.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, NumericError, SchemaError, ShapeError

HIDDEN_ACTIVATIONS = ("relu", "tanh")

# Soft labels are clamped into [CE_CLAMP, 1 - CE_CLAMP] before taking logs in
# the cross-entropy *value*; gradients use the unclamped analytic form.
CE_CLAMP = 1e-12


def _sigmoid(z: np.ndarray) -> np.ndarray:
    out = np.empty_like(z, dtype=np.float64)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def _freeze(arr: np.ndarray) -> np.ndarray:
    out = np.array(arr, dtype=np.float64)
    out.flags.writeable = False
    return out


@dataclass(frozen=True)
class MlpModel:
    """Immutable MLP parameters.

    ``weights[l]`` has shape ``(layer_dims[l], layer_dims[l+1])`` (row-major,
    inputs indexing rows), ``biases[l]`` has shape ``(layer_dims[l+1],)``.
    ``group_thresholds``, when set, are per-sensitive-group decision
    thresholds attached by postprocessing; hard metrics honor them.
    """

    layer_dims: tuple[int, ...]
    weights: tuple[np.ndarray, ...]
    biases: tuple[np.ndarray, ...]
    hidden_activation: str = "relu"
    group_thresholds: tuple[float, float] | None = None

    def __post_init__(self):
        dims = tuple(int(d) for d in self.layer_dims)
        if len(dims) < 2 or any(d < 1 for d in dims):
            raise ShapeError(f"layer_dims must be >= 2 positive ints, got {dims}")
        if dims[-1] != 1:
            raise ShapeError(f"output layer must have width 1, got {dims[-1]}")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise DomainError(f"unknown hidden activation {self.hidden_activation!r}")
        if len(self.weights) != len(dims) - 1 or len(self.biases) != len(dims) - 1:
            raise ShapeError("need exactly one weight matrix and bias vector per layer")
        ws, bs = [], []
        for l, (w, b) in enumerate(zip(self.weights, self.biases)):
            w = np.asarray(w, dtype=np.float64)
            b = np.asarray(b, dtype=np.float64)
            if w.shape != (dims[l], dims[l + 1]):
                raise ShapeError(
                    f"layer {l}: weight shape {w.shape} != {(dims[l], dims[l + 1])}"
                )
            if b.shape != (dims[l + 1],):
                raise ShapeError(f"layer {l}: bias shape {b.shape} != {(dims[l + 1],)}")
            ws.append(_freeze(w))
            bs.append(_freeze(b))
        object.__setattr__(self, "layer_dims", dims)
        object.__setattr__(self, "weights", tuple(ws))
        object.__setattr__(self, "biases", tuple(bs))
        if self.group_thresholds is not None:
            t0, t1 = self.group_thresholds
            if not (0.0 < t0 < 1.0 and 0.0 < t1 < 1.0):
                raise DomainError(f"group thresholds must lie in (0,1), got {self.group_thresholds}")
            object.__setattr__(self, "group_thresholds", (float(t0), float(t1)))

    @property
    def n_features(self) -> int:
        return self.layer_dims[0]

    @property
    def n_layers(self) -> int:
        return len(self.weights)

    def with_thresholds(self, t0: float, t1: float) -> "MlpModel":
        return MlpModel(self.layer_dims, self.weights, self.biases,
                        self.hidden_activation, (t0, t1))


@dataclass(frozen=True)
class ForwardTrace:
    """Cached forward pass of one batch: per-layer pre-activations and
    activations, final soft labels in (0,1)."""

    inputs: np.ndarray                     # (N, n)
    pre_activations: tuple[np.ndarray, ...]
    activations: tuple[np.ndarray, ...]    # activations[-1] is (N, 1) sigmoid output
    soft_labels: np.ndarray                # (N,)

    @property
    def n_layers(self) -> int:
        return len(self.pre_activations)


@dataclass(frozen=True)
class GradientPair:
    """Gradients of a scalar batch loss: per-sample input gradients plus
    per-layer parameter gradients matching the model's shapes."""

    input_grad: np.ndarray                 # (N, n)
    weight_grads: tuple[np.ndarray, ...]
    bias_grads: tuple[np.ndarray, ...]


def new_model(layer_dims, hidden_activation: str = "relu", seed: int = 0) -> MlpModel:
    """Fresh model with uniform(+/- sqrt(6/(fan_in+fan_out))) weights and zero biases."""
    rng = np.random.default_rng(seed)
    dims = tuple(int(d) for d in layer_dims)
    weights, biases = [], []
    for l in range(len(dims) - 1):
        bound = np.sqrt(6.0 / (dims[l] + dims[l + 1]))
        weights.append(rng.uniform(-bound, bound, size=(dims[l], dims[l + 1])))
        biases.append(np.zeros(dims[l + 1]))
    return MlpModel(dims, tuple(weights), tuple(biases), hidden_activation)


def default_model(n_features: int, seed: int = 0) -> MlpModel:
    """The standard architecture used throughout: n -> 32 -> 16 -> 1, relu."""
    return new_model((n_features, 32, 16, 1), "relu", seed)


def forward(model: MlpModel, features: np.ndarray) -> ForwardTrace:
    """Run the batch through the network, caching intermediates for backprop.

    ``features`` is (N, n_features); returns soft labels f(x) in (0,1) per row.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != model.n_features:
        raise ShapeError(
            f"features must be (N, {model.n_features}), got {x.shape}"
        )
    if not np.all(np.isfinite(x)):
        raise DomainError("features contain non-finite entries")
    pre, act = [], []
    a = x
    last = model.n_layers - 1
    for l, (w, b) in enumerate(zip(model.weights, model.biases)):
        z = a @ w + b
        pre.append(z)
        if l == last:
            a = _sigmoid(z)
        elif model.hidden_activation == "relu":
            a = np.maximum(z, 0.0)
        else:
            a = np.tanh(z)
        act.append(a)
    soft = act[-1][:, 0].copy()
    return ForwardTrace(x, tuple(pre), tuple(act), soft)


def predict(model: MlpModel, features: np.ndarray) -> np.ndarray:
    """Soft labels only; convenience wrapper over forward()."""
    return forward(model, features).soft_labels


def cross_entropy(soft_labels: np.ndarray, labels: np.ndarray) -> np.ndarray:
    """Per-sample binary cross-entropy, with soft labels clamped away from
    {0,1} before the log (numerical tolerance, not part of the gradients)."""
    f = np.clip(np.asarray(soft_labels, dtype=np.float64), CE_CLAMP, 1.0 - CE_CLAMP)
    y = np.asarray(labels, dtype=np.float64)
    return -(y * np.log(f) + (1.0 - y) * np.log(1.0 - f))


def backward_loss(
    model: MlpModel,
    trace: ForwardTrace,
    loss_kind: str,
    labels_or_signs: np.ndarray,
    sample_weights: np.ndarray | None = None,
) -> GradientPair:
    """Exact gradients of a scalar loss summed over the batch.

    ``loss_kind`` selects the per-sample term:
      * ``"ce"``: cross-entropy against labels in {0,1};
      * ``"signed_soft_label"``: v_i * f(x_i) with finite real coefficients (the
        per-sample group-mean terms of the relaxed fairness losses, with the
        constant 1/|group| factors folded into ``sample_weights``).

    ``sample_weights`` scales each sample's contribution to the summed loss.
    Returns per-sample input gradients and summed parameter gradients.
    """
    n_batch = trace.inputs.shape[0]
    if trace.n_layers != model.n_layers or trace.inputs.shape[1] != model.n_features:
        raise ShapeError("trace does not match model architecture")
    for l, w in enumerate(model.weights):
        if trace.pre_activations[l].shape != (n_batch, w.shape[1]):
            raise ShapeError(f"trace layer {l} shape mismatch against model")
    v = np.asarray(labels_or_signs, dtype=np.float64)
    if v.shape != (n_batch,):
        raise ShapeError(f"labels_or_signs must be ({n_batch},), got {v.shape}")
    f = trace.soft_labels
    if loss_kind == "ce":
        if not np.all((v == 0.0) | (v == 1.0)):
            raise DomainError("ce labels must be in {0,1}")
        delta = (f - v)[:, None]                      # dL/dz at the sigmoid head
    elif loss_kind == "signed_soft_label":
        if not np.all(np.isfinite(v)):
            raise DomainError("soft-label coefficients must be finite")
        delta = (v * f * (1.0 - f))[:, None]
    else:
        raise DomainError(f"unknown loss_kind {loss_kind!r}")
    if sample_weights is not None:
        w_s = np.asarray(sample_weights, dtype=np.float64)
        if w_s.shape != (n_batch,):
            raise ShapeError(f"sample_weights must be ({n_batch},), got {w_s.shape}")
        delta = delta * w_s[:, None]

    weight_grads = [None] * model.n_layers
    bias_grads = [None] * model.n_layers
    for l in range(model.n_layers - 1, -1, -1):
        a_prev = trace.inputs if l == 0 else trace.activations[l - 1]
        weight_grads[l] = a_prev.T @ delta
        bias_grads[l] = delta.sum(axis=0)
        delta = delta @ model.weights[l].T
        if l > 0:
            if model.hidden_activation == "relu":
                delta = delta * (trace.pre_activations[l - 1] > 0.0)
            else:
                delta = delta * (1.0 - trace.activations[l - 1] ** 2)
    return GradientPair(delta, tuple(weight_grads), tuple(bias_grads))


def input_gradient_soft_label(model: MlpModel, trace: ForwardTrace) -> np.ndarray:
    """Per-sample gradient of f(x) itself w.r.t. the inputs, shape (N, n)."""
    ones = np.ones(trace.inputs.shape[0])
    return backward_loss(model, trace, "signed_soft_label", ones).input_grad


def sgd_step(model: MlpModel, grads: GradientPair, lr: float) -> MlpModel:
    """One deterministic gradient-descent step: theta <- theta - lr * grad."""
    if lr < 0:
        raise DomainError(f"learning rate must be >= 0, got {lr}")
    for g in (*grads.weight_grads, *grads.bias_grads):
        if not np.all(np.isfinite(g)):
            raise NumericError("non-finite gradient entries")
    new_w = tuple(w - lr * g for w, g in zip(model.weights, grads.weight_grads))
    new_b = tuple(b - lr * g for b, g in zip(model.biases, grads.bias_grads))
    return MlpModel(model.layer_dims, new_w, new_b, model.hidden_activation,
                    model.group_thresholds)


def save_model(model: MlpModel, path) -> None:
    """Line-oriented text format, exact round trip at 17 significant digits."""
    lines = ["mlp v1 " + " ".join(str(d) for d in model.layer_dims)
             + f" {model.hidden_activation}"]
    for w, b in zip(model.weights, model.biases):
        lines.append(" ".join("%.17g" % v for v in w.ravel(order="C")))
        lines.append(" ".join("%.17g" % v for v in b))
    if model.group_thresholds is not None:
        t0, t1 = model.group_thresholds
        lines.append("thresholds %.17g %.17g" % (t0, t1))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_model(path) -> MlpModel:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or not lines[0].startswith("mlp v1 "):
        raise SchemaError(f"{path}: not an mlp v1 model file")
    head = lines[0].split()
    activation = head[-1]
    try:
        dims = tuple(int(t) for t in head[2:-1])
    except ValueError as exc:
        raise SchemaError(f"{path}: bad header {lines[0]!r}") from exc
    n_layers = len(dims) - 1
    thresholds = None
    body = lines[1:]
    if body and body[-1].startswith("thresholds "):
        parts = body[-1].split()
        if len(parts) != 3:
            raise SchemaError(f"{path}: bad thresholds trailer")
        thresholds = (float(parts[1]), float(parts[2]))
        body = body[:-1]
    if len(body) != 2 * n_layers:
        raise SchemaError(
            f"{path}: expected {2 * n_layers} tensor lines, got {len(body)}"
        )
    weights, biases = [], []
    for l in range(n_layers):
        try:
            w = np.array([float(t) for t in body[2 * l].split()])
            b = np.array([float(t) for t in body[2 * l + 1].split()])
        except ValueError as exc:
            raise SchemaError(f"{path}: unparseable tensor at layer {l}") from exc
        if w.size != dims[l] * dims[l + 1] or b.size != dims[l + 1]:
            raise SchemaError(f"{path}: tensor size mismatch at layer {l}")
        weights.append(w.reshape(dims[l], dims[l + 1]))
        biases.append(b)
    try:
        return MlpModel(dims, tuple(weights), tuple(biases), activation, thresholds)
    except (ShapeError, DomainError) as exc:
        raise SchemaError(f"{path}: {exc}") from exc
