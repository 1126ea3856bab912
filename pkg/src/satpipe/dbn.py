"""Restricted Boltzmann Machines, greedy DBN pretraining, and supervised
fine-tuning of the resulting feedforward classifier.

An RBM over visible units v and hidden units h is scored by the energy

    E(v, h) = -sum_i a_i v_i - sum_j b_j h_j - sum_ij h_j w_ij v_i

whose bipartite structure yields factorized conditionals
``P(h_j=1|v) = sigmoid(b_j + sum_i w_ij v_i)`` and symmetrically for
``P(v_i=1|h)``. Training approximately ascends the data log-likelihood via
contrastive divergence (CD-k). Visible units are treated as real-valued
probabilities in [0, 1] throughout (inputs are scaled pixels or normalized
features), so the positive phase uses the data as-is and the negative chain
alternates Bernoulli-sampled hidden states with real-valued visible
probabilities.

A trained stack initializes a sigmoid feedforward network whose outputs,
under sum-squared-error training with 1-of-K targets, estimate the class
posterior probabilities; ``predict_proba`` clamps and renormalizes them so
they form a distribution. Fine-tuning holds out a validation slice and keeps
the parameter snapshot with the lowest validation error.

All training is deterministic given (data, config, seed): one PCG64 stream
drives initialization, batch order, and sampling.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import DegenerateLabelsError, NumericError
from .patchio import ClassScheme

INPUT_RAW_PIXELS = "raw_pixels"
INPUT_FEATURES22 = "features22"

_PROBA_FLOOR = 1e-9


def sigmoid(x):
    """Logistic function 1/(1+exp(-x)), stable for large |x|."""
    x = np.asarray(x, dtype=np.float64)
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out if out.ndim else float(out)


@dataclass
class RbmParams:
    """Weights (visible x hidden) plus visible and hidden biases."""

    weights: np.ndarray
    visible_bias: np.ndarray
    hidden_bias: np.ndarray

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.visible_bias = np.asarray(self.visible_bias, dtype=np.float64)
        self.hidden_bias = np.asarray(self.hidden_bias, dtype=np.float64)
        m, n = self.weights.shape
        if self.visible_bias.shape != (m,) or self.hidden_bias.shape != (n,):
            raise ValueError("bias shapes must match the weight matrix")

    @property
    def visible_units(self) -> int:
        return self.weights.shape[0]

    @property
    def hidden_units(self) -> int:
        return self.weights.shape[1]

    def copy(self) -> "RbmParams":
        return RbmParams(self.weights.copy(), self.visible_bias.copy(), self.hidden_bias.copy())


@dataclass(frozen=True)
class TrainConfig:
    """Hyperparameters for pretraining and fine-tuning.

    Only the fine-tune epoch cap (500), L2 regularization, and early stopping
    on validation error are externally mandated; the remaining defaults are
    conventional values and are recorded in every run report.
    """

    layer_sizes: tuple[int, ...] = (50, 50)
    cd_steps: int = 1
    rbm_learning_rate: float = 0.05
    rbm_epochs: int = 30
    momentum_initial: float = 0.5
    momentum_final: float = 0.9
    momentum_switch_epoch: int = 5
    batch_size: int = 100
    finetune_learning_rate: float = 0.01
    max_finetune_epochs: int = 500
    l2_coefficient: float = 1e-4
    validation_fraction: float = 0.1
    early_stopping_patience: int = 20
    init_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        if any(w < 1 for w in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.cd_steps < 1:
            raise ValueError("cd_steps must be >= 1")
        if min(self.rbm_learning_rate, self.finetune_learning_rate) < 0:
            raise ValueError("learning rates must be >= 0")
        if self.batch_size < 1 or self.max_finetune_epochs < 1 or self.early_stopping_patience < 1:
            raise ValueError("batch size, epoch cap, and patience must be >= 1")
        if not 0.0 <= self.validation_fraction < 1.0:
            raise ValueError("validation_fraction must lie in [0, 1)")

    def momentum_at(self, epoch: int) -> float:
        return self.momentum_initial if epoch < self.momentum_switch_epoch else self.momentum_final


@dataclass
class DbnModel:
    """RBM stack plus a classifier head mapping the top layer to class scores."""

    stack: list[RbmParams]
    head_weights: np.ndarray
    head_bias: np.ndarray
    input_kind: str
    scheme: ClassScheme

    def __post_init__(self):
        self.head_weights = np.asarray(self.head_weights, dtype=np.float64)
        self.head_bias = np.asarray(self.head_bias, dtype=np.float64)
        width = self.stack[-1].hidden_units if self.stack else self.head_weights.shape[0]
        for lower, upper in zip(self.stack, self.stack[1:]):
            if lower.hidden_units != upper.visible_units:
                raise ValueError("adjacent RBM layer widths do not chain")
        if self.head_weights.shape != (width, self.scheme.class_count):
            raise ValueError("head shape must be (top width, class count)")
        if self.head_bias.shape != (self.scheme.class_count,):
            raise ValueError("head bias must have one entry per class")

    @property
    def input_width(self) -> int:
        return self.stack[0].visible_units if self.stack else self.head_weights.shape[0]

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return tuple(p.hidden_units for p in self.stack)

    def copy(self) -> "DbnModel":
        return DbnModel(
            [p.copy() for p in self.stack],
            self.head_weights.copy(),
            self.head_bias.copy(),
            self.input_kind,
            self.scheme,
        )


@dataclass
class TrainReport:
    """Per-epoch errors of a fine-tuning run (error = mean sum-squared loss)."""

    train_errors: list[float] = field(default_factory=list)
    validation_errors: list[float] = field(default_factory=list)
    train_error_rates: list[float] = field(default_factory=list)
    validation_error_rates: list[float] = field(default_factory=list)
    best_epoch: int = -1
    pretrain_reconstruction: list[list[float]] | None = None

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            fh.write("epoch,train_error,validation_error\n")
            for epoch, (tr, va) in enumerate(zip(self.train_errors, self.validation_errors)):
                fh.write(f"{epoch},{tr!r},{va!r}\n")


@dataclass(frozen=True)
class EvalResult:
    accuracy: float
    confusion: np.ndarray


def energy(v: np.ndarray, h: np.ndarray, params: RbmParams) -> float:
    """Energy -a.v - b.h - h.W'v of one joint configuration."""
    v = np.asarray(v, dtype=np.float64)
    h = np.asarray(h, dtype=np.float64)
    if v.shape != (params.visible_units,) or h.shape != (params.hidden_units,):
        raise ValueError("v and h must match the RBM dimensions")
    return float(-params.visible_bias @ v - params.hidden_bias @ h - v @ params.weights @ h)


def prob_h_given_v(v: np.ndarray, params: RbmParams) -> np.ndarray:
    """P(h_j = 1 | v) for a single vector or a batch of rows."""
    return sigmoid(np.asarray(v, dtype=np.float64) @ params.weights + params.hidden_bias)


def prob_v_given_h(h: np.ndarray, params: RbmParams) -> np.ndarray:
    """P(v_i = 1 | h) for a single vector or a batch of rows."""
    return sigmoid(np.asarray(h, dtype=np.float64) @ params.weights.T + params.visible_bias)


def _bernoulli(probs: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return (rng.random(probs.shape) < probs).astype(np.float64)


def cd_update(
    batch: np.ndarray,
    params: RbmParams,
    config: TrainConfig,
    rng: np.random.Generator,
    velocity: dict | None = None,
    momentum: float = 0.0,
) -> RbmParams:
    """One CD-k parameter update from a batch of [0, 1] visible rows.

    The positive phase uses the data with hidden probabilities; the negative
    chain starts from Bernoulli-sampled hidden states and alternates visible
    probabilities with sampled hidden states for k steps, finishing on hidden
    probabilities. Weight gradients include L2 decay; ``velocity`` (mutated in
    place when given) carries the momentum state across calls. A zero learning
    rate returns bit-identical parameters.
    """
    v0 = np.atleast_2d(np.asarray(batch, dtype=np.float64))
    n = v0.shape[0]
    h0 = prob_h_given_v(v0, params)

    h_state = _bernoulli(h0, rng)
    for step in range(config.cd_steps):
        vk = prob_v_given_h(h_state, params)
        hk = prob_h_given_v(vk, params)
        if step < config.cd_steps - 1:
            h_state = _bernoulli(hk, rng)

    grad_w = (v0.T @ h0 - vk.T @ hk) / n - config.l2_coefficient * params.weights
    grad_a = (v0 - vk).mean(axis=0)
    grad_b = (h0 - hk).mean(axis=0)

    if velocity is not None:
        velocity["w"] = momentum * velocity["w"] + grad_w
        velocity["a"] = momentum * velocity["a"] + grad_a
        velocity["b"] = momentum * velocity["b"] + grad_b
        grad_w, grad_a, grad_b = velocity["w"], velocity["a"], velocity["b"]

    lr = config.rbm_learning_rate
    return RbmParams(
        params.weights + lr * grad_w,
        params.visible_bias + lr * grad_a,
        params.hidden_bias + lr * grad_b,
    )


def _zero_velocity(params: RbmParams) -> dict:
    return {
        "w": np.zeros_like(params.weights),
        "a": np.zeros_like(params.visible_bias),
        "b": np.zeros_like(params.hidden_bias),
    }


def random_rbm(
    visible: int, hidden: int, rng: np.random.Generator, init_std: float = 0.01
) -> RbmParams:
    """Gaussian-initialized weights (std ``init_std``), zero biases."""
    return RbmParams(
        rng.normal(0.0, init_std, size=(visible, hidden)),
        np.zeros(visible),
        np.zeros(hidden),
    )


def pretrain(
    data: np.ndarray, config: TrainConfig, rng: np.random.Generator | None = None
) -> tuple[list[RbmParams], list[list[float]]]:
    """Greedy layerwise RBM training.

    Layer t trains on the hidden probabilities of layer t-1. Returns the stack
    and, per layer, the per-epoch mean squared reconstruction error of the CD
    chain (v0 vs v_k).
    """
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    x = np.asarray(data, dtype=np.float64)
    stack: list[RbmParams] = []
    recon_errors: list[list[float]] = []
    for width in config.layer_sizes:
        params = random_rbm(x.shape[1], width, rng, config.init_std)
        velocity = _zero_velocity(params)
        layer_errors = []
        for epoch in range(config.rbm_epochs):
            momentum = config.momentum_at(epoch)
            order = rng.permutation(x.shape[0])
            epoch_err, batches = 0.0, 0
            for start in range(0, len(order), config.batch_size):
                batch = x[order[start : start + config.batch_size]]
                h0 = prob_h_given_v(batch, params)
                vk = prob_v_given_h(_bernoulli(h0, rng), params)
                epoch_err += float(((batch - vk) ** 2).mean())
                batches += 1
                params = cd_update(batch, params, config, rng, velocity, momentum)
            layer_errors.append(epoch_err / max(1, batches))
        if not np.all(np.isfinite(params.weights)):
            raise NumericError("RBM weights diverged during pretraining")
        stack.append(params)
        recon_errors.append(layer_errors)
        x = prob_h_given_v(x, params)
    return stack, recon_errors


def init_classifier(
    stack: list[RbmParams],
    class_count: int,
    input_dim: int | None = None,
    seed: int = 0,
    input_kind: str = INPUT_FEATURES22,
    scheme: ClassScheme | None = None,
    init_std: float = 0.01,
) -> DbnModel:
    """Build a classifier from a pretrained stack (copied) plus a fresh head.

    An empty stack yields a plain linear-head classifier on the raw input, in
    which case ``input_dim`` is required.
    """
    if stack:
        top = stack[-1].hidden_units
    elif input_dim is not None:
        top = input_dim
    else:
        raise ValueError("input_dim is required when the stack is empty")
    rng = np.random.default_rng(seed)
    return DbnModel(
        stack=[p.copy() for p in stack],
        head_weights=rng.normal(0.0, init_std, size=(top, class_count)),
        head_bias=np.zeros(class_count),
        input_kind=input_kind,
        scheme=scheme or ClassScheme.from_class_count(class_count),
    )


def forward_activations(model: DbnModel, x: np.ndarray) -> tuple[list[np.ndarray], np.ndarray]:
    """Sigmoid activations of every hidden layer plus the raw head outputs."""
    a = np.atleast_2d(np.asarray(x, dtype=np.float64))
    hidden = []
    for layer in model.stack:
        a = sigmoid(a @ layer.weights + layer.hidden_bias)
        hidden.append(a)
    return hidden, sigmoid(a @ model.head_weights + model.head_bias)


def loss_and_gradients(
    model: DbnModel, x: np.ndarray, targets: np.ndarray, l2: float
) -> tuple[float, list[tuple[np.ndarray, np.ndarray]]]:
    """Sum-squared loss with L2 penalty and its exact gradients.

    Loss is ``0.5 * mean_over_samples ||y - t||^2 + 0.5 * l2 * sum ||W||^2``
    (weights only; biases are not penalized). Gradients are returned per layer
    bottom-up, the head last, each as (dW, db).
    """
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    targets = np.atleast_2d(np.asarray(targets, dtype=np.float64))
    n = x.shape[0]
    hidden, y = forward_activations(model, x)

    weight_norms = sum(float((p.weights**2).sum()) for p in model.stack)
    weight_norms += float((model.head_weights**2).sum())
    loss = 0.5 * float(((y - targets) ** 2).sum()) / n + 0.5 * l2 * weight_norms

    activations = [x, *hidden]
    delta = (y - targets) * y * (1.0 - y) / n
    head_grad = (activations[-1].T @ delta + l2 * model.head_weights, delta.sum(axis=0))

    grads: list[tuple[np.ndarray, np.ndarray]] = []
    back = delta @ model.head_weights.T
    for idx in range(len(model.stack) - 1, -1, -1):
        act = activations[idx + 1]
        delta = back * act * (1.0 - act)
        grads.append(
            (activations[idx].T @ delta + l2 * model.stack[idx].weights, delta.sum(axis=0))
        )
        back = delta @ model.stack[idx].weights.T
    grads.reverse()
    grads.append(head_grad)
    return loss, grads


def one_hot(labels: np.ndarray, class_count: int) -> np.ndarray:
    labels = np.asarray(labels, dtype=np.int64)
    targets = np.zeros((len(labels), class_count))
    targets[np.arange(len(labels)), labels] = 1.0
    return targets


def _dataset_error(model: DbnModel, x: np.ndarray, targets: np.ndarray, labels: np.ndarray):
    _, y = forward_activations(model, x)
    loss = 0.5 * float(((y - targets) ** 2).sum()) / len(x)
    error_rate = float(np.mean(np.argmax(y, axis=1) != labels))
    return loss, error_rate


def finetune(
    model: DbnModel,
    train: tuple[np.ndarray, np.ndarray],
    config: TrainConfig,
    rng: np.random.Generator | None = None,
) -> tuple[DbnModel, TrainReport]:
    """Backpropagation fine-tuning with early stopping.

    Minimizes the sum-squared error of sigmoid outputs against 1-of-K targets
    with an L2 penalty, holding out ``validation_fraction`` of the training
    rows; the returned model is the snapshot with the lowest validation error
    within ``max_finetune_epochs`` (training error is monitored when the
    validation slice is empty).
    """
    x, labels = train
    x = np.asarray(x, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if len(x) == 0:
        raise ValueError("training data must be non-empty")
    if len(np.unique(labels)) < 2:
        raise DegenerateLabelsError("fine-tuning requires at least two distinct classes")

    rng = rng if rng is not None else np.random.default_rng(config.seed)
    k = model.scheme.class_count

    n_val = int(np.floor(config.validation_fraction * len(x)))
    order = rng.permutation(len(x))
    val_idx, train_idx = order[:n_val], order[n_val:]
    x_tr, y_tr = x[train_idx], labels[train_idx]
    x_val, y_val = x[val_idx], labels[val_idx]
    t_tr = one_hot(y_tr, k)
    t_val = one_hot(y_val, k)

    model = model.copy()
    best = model.copy()
    best_error = np.inf
    report = TrainReport()
    stall = 0
    lr = config.finetune_learning_rate

    for epoch in range(config.max_finetune_epochs):
        batch_losses = []
        for start in range(0, len(x_tr), config.batch_size):
            idx = slice(start, start + config.batch_size)
            loss, grads = loss_and_gradients(model, x_tr[idx], t_tr[idx], config.l2_coefficient)
            batch_losses.append(loss)
            for layer, (gw, gb) in zip(model.stack, grads):
                layer.weights -= lr * gw
                layer.hidden_bias -= lr * gb
            gw, gb = grads[-1]
            model.head_weights -= lr * gw
            model.head_bias -= lr * gb
        order = rng.permutation(len(x_tr))
        x_tr, y_tr, t_tr = x_tr[order], y_tr[order], t_tr[order]

        train_loss = float(np.mean(batch_losses))
        if not np.isfinite(train_loss):
            raise NumericError(f"fine-tuning loss became non-finite at epoch {epoch}")
        _, train_rate = _dataset_error(model, x_tr, t_tr, y_tr)
        if n_val:
            val_loss, val_rate = _dataset_error(model, x_val, t_val, y_val)
        else:
            val_loss, val_rate = _dataset_error(model, x_tr, t_tr, y_tr)[0], train_rate
        report.train_errors.append(train_loss)
        report.validation_errors.append(val_loss)
        report.train_error_rates.append(train_rate)
        report.validation_error_rates.append(val_rate)

        if val_loss < best_error:
            best_error = val_loss
            best = model.copy()
            report.best_epoch = epoch
            stall = 0
        else:
            stall += 1
            if stall >= config.early_stopping_patience:
                break
    return best, report


def predict_proba(model: DbnModel, features: np.ndarray) -> np.ndarray:
    """Posterior estimates: sigmoid outputs clamped to [1e-9, 1], renormalized."""
    x = np.asarray(features, dtype=np.float64)
    single = x.ndim == 1
    _, y = forward_activations(model, x)
    y = np.clip(y, _PROBA_FLOOR, 1.0)
    y /= y.sum(axis=1, keepdims=True)
    return y[0] if single else y


def classify(model: DbnModel, features: np.ndarray):
    """Argmax class index of the posterior; ties break to the lowest index."""
    proba = predict_proba(model, features)
    if proba.ndim == 1:
        return int(np.argmax(proba))
    return np.argmax(proba, axis=1)


def evaluate(model: DbnModel, test: tuple[np.ndarray, np.ndarray]) -> EvalResult:
    """Accuracy and a (true x predicted) confusion-count matrix."""
    x, labels = test
    labels = np.asarray(labels, dtype=np.int64)
    if len(labels) == 0:
        raise ValueError("test set must be non-empty")
    predicted = np.atleast_1d(classify(model, x))
    k = model.scheme.class_count
    confusion = np.zeros((k, k), dtype=np.int64)
    np.add.at(confusion, (labels, predicted), 1)
    return EvalResult(float(np.mean(predicted == labels)), confusion)


def _array_doc(a: np.ndarray):
    return np.asarray(a, dtype=np.float64).tolist()


def save_model(
    path,
    model: DbnModel,
    kind: str = "dbn",
    config: TrainConfig | None = None,
    seed: int | None = None,
    normalization: dict | None = None,
    extra_doc: dict | None = None,
) -> None:
    """Serialize a model (and its run context) as a versioned JSON document.

    Matrices are stored as nested lists at full float precision; keys are
    sorted so identical models produce byte-identical files.
    """
    doc = {
        "format": "satpipe-model",
        "version": 1,
        "kind": kind,
        "input_kind": model.input_kind,
        "scheme": {"name": model.scheme.name, "class_names": list(model.scheme.class_names)},
        "layer_sizes": list(model.layer_sizes),
        "stack": [
            {
                "weights": _array_doc(p.weights),
                "visible_bias": _array_doc(p.visible_bias),
                "hidden_bias": _array_doc(p.hidden_bias),
            }
            for p in model.stack
        ],
        "head": {"weights": _array_doc(model.head_weights), "bias": _array_doc(model.head_bias)},
        "config": asdict(config) if config is not None else None,
        "seed": seed,
        "normalization": normalization,
    }
    if doc["config"] is not None:
        doc["config"]["layer_sizes"] = list(config.layer_sizes)
    if extra_doc:
        doc.update(extra_doc)
    with open(path, "w") as fh:
        json.dump(doc, fh, sort_keys=True, indent=1)
        fh.write("\n")


def load_model(path) -> tuple[DbnModel, dict]:
    """Load a serialized model; returns (model, full document)."""
    with open(path) as fh:
        doc = json.load(fh)
    if doc.get("format") != "satpipe-model" or doc.get("version") != 1:
        raise ValueError(f"{path} is not a version-1 satpipe model file")
    scheme = ClassScheme(doc["scheme"]["name"], tuple(doc["scheme"]["class_names"]))
    stack = [
        RbmParams(
            np.asarray(entry["weights"], dtype=np.float64),
            np.asarray(entry["visible_bias"], dtype=np.float64),
            np.asarray(entry["hidden_bias"], dtype=np.float64),
        )
        for entry in doc["stack"]
    ]
    model = DbnModel(
        stack=stack,
        head_weights=np.asarray(doc["head"]["weights"], dtype=np.float64),
        head_bias=np.asarray(doc["head"]["bias"], dtype=np.float64),
        input_kind=doc["input_kind"],
        scheme=scheme,
    )
    return model, doc
