"""Stacked denoising autoencoder: greedy layerwise reconstruction pretraining
with masking corruption, then supervised fine-tuning of the deepest layer.

Each layer learns ``encode(x) = sigmoid(W1 x + b1)`` and
``decode(h) = sigmoid(W2 h + b2)`` (untied weights) by minimizing the mean
squared reconstruction of the *clean* input from a corrupted copy, where
corruption masks a random fraction of entries to zero. Once a layer is
trained its parameters are frozen and the next layer trains on its
activations. The deepest activations feed a classifier head fine-tuned with
the same backpropagation machinery as the DBN path (sum-squared loss, L2,
early stopping).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dbn
from .errors import NumericError
from .patchio import ClassScheme


@dataclass
class AutoencoderParams:
    """Untied encode/decode weights and biases of one layer."""

    encode_weights: np.ndarray
    encode_bias: np.ndarray
    decode_weights: np.ndarray
    decode_bias: np.ndarray

    def __post_init__(self):
        self.encode_weights = np.asarray(self.encode_weights, dtype=np.float64)
        self.encode_bias = np.asarray(self.encode_bias, dtype=np.float64)
        self.decode_weights = np.asarray(self.decode_weights, dtype=np.float64)
        self.decode_bias = np.asarray(self.decode_bias, dtype=np.float64)
        m, n = self.encode_weights.shape
        if self.decode_weights.shape != (n, m):
            raise ValueError("decode weights must transpose the encode shape")
        if self.encode_bias.shape != (n,) or self.decode_bias.shape != (m,):
            raise ValueError("bias shapes must match the weight matrices")


@dataclass(frozen=True)
class SdaeConfig:
    """Pretraining knobs plus the shared fine-tune fields."""

    layer_sizes: tuple[int, ...] = (100,)
    corruption_fraction: float = 0.25
    learning_rate: float = 0.01
    epochs_per_layer: int = 30
    batch_size: int = 100
    l2_coefficient: float = 1e-4
    init_std: float = 0.01
    finetune_learning_rate: float = 0.01
    max_finetune_epochs: int = 500
    validation_fraction: float = 0.1
    early_stopping_patience: int = 20
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.corruption_fraction < 1.0:
            raise ValueError("corruption_fraction must lie in [0, 1)")
        if any(w < 1 for w in self.layer_sizes):
            raise ValueError("layer sizes must be positive")
        if self.epochs_per_layer < 0 or self.batch_size < 1:
            raise ValueError("epochs must be >= 0 and batch size >= 1")

    def to_train_config(self) -> dbn.TrainConfig:
        return dbn.TrainConfig(
            layer_sizes=self.layer_sizes,
            batch_size=self.batch_size,
            finetune_learning_rate=self.finetune_learning_rate,
            max_finetune_epochs=self.max_finetune_epochs,
            l2_coefficient=self.l2_coefficient,
            validation_fraction=self.validation_fraction,
            early_stopping_patience=self.early_stopping_patience,
            init_std=self.init_std,
            seed=self.seed,
        )


def encode(x: np.ndarray, params: AutoencoderParams) -> np.ndarray:
    """Hidden activation sigmoid(x W1 + b1); accepts a vector or batch rows."""
    return dbn.sigmoid(np.asarray(x, dtype=np.float64) @ params.encode_weights + params.encode_bias)


def decode(h: np.ndarray, params: AutoencoderParams) -> np.ndarray:
    """Reconstruction sigmoid(h W2 + b2) with the shape of the original input."""
    return dbn.sigmoid(np.asarray(h, dtype=np.float64) @ params.decode_weights + params.decode_bias)


def corrupt(x: np.ndarray, fraction: float, rng: np.random.Generator) -> np.ndarray:
    """Masking noise: zero each entry independently with the given probability."""
    if fraction <= 0.0:
        return np.asarray(x, dtype=np.float64)
    return np.where(rng.random(x.shape) < fraction, 0.0, x)


def reconstruction_loss_and_gradients(
    params: AutoencoderParams, x_corrupt: np.ndarray, x_clean: np.ndarray, l2: float
):
    """Denoising loss ``0.5*mean||decode(encode(x~)) - x||^2 + 0.5*l2*sum||W||^2``
    and its exact gradients (dW1, db1, dW2, db2)."""
    xc = np.atleast_2d(np.asarray(x_corrupt, dtype=np.float64))
    x = np.atleast_2d(np.asarray(x_clean, dtype=np.float64))
    n = x.shape[0]
    h = encode(xc, params)
    out = decode(h, params)

    penalty = float((params.encode_weights**2).sum() + (params.decode_weights**2).sum())
    loss = 0.5 * float(((out - x) ** 2).sum()) / n + 0.5 * l2 * penalty

    delta_out = (out - x) * out * (1.0 - out) / n
    grad_w2 = h.T @ delta_out + l2 * params.decode_weights
    grad_b2 = delta_out.sum(axis=0)
    delta_h = (delta_out @ params.decode_weights.T) * h * (1.0 - h)
    grad_w1 = xc.T @ delta_h + l2 * params.encode_weights
    grad_b1 = delta_h.sum(axis=0)
    return loss, (grad_w1, grad_b1, grad_w2, grad_b2)


def clean_reconstruction_error(params: AutoencoderParams, x: np.ndarray) -> float:
    """Mean squared error of the uncorrupted encode/decode pass."""
    x = np.atleast_2d(np.asarray(x, dtype=np.float64))
    return float(((decode(encode(x, params), params) - x) ** 2).mean())


def pretrain_layer(
    data: np.ndarray,
    width: int,
    config: SdaeConfig,
    rng: np.random.Generator | None = None,
) -> tuple[AutoencoderParams, list[float]]:
    """Train one denoising layer; returns its params and the per-epoch
    clean-pass reconstruction error (measured after each epoch)."""
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    x = np.asarray(data, dtype=np.float64)
    m = x.shape[1]
    params = AutoencoderParams(
        rng.normal(0.0, config.init_std, size=(m, width)),
        np.zeros(width),
        rng.normal(0.0, config.init_std, size=(width, m)),
        np.zeros(m),
    )
    errors = []
    for _ in range(config.epochs_per_layer):
        order = rng.permutation(x.shape[0])
        for start in range(0, len(order), config.batch_size):
            batch = x[order[start : start + config.batch_size]]
            noisy = corrupt(batch, config.corruption_fraction, rng)
            loss, (gw1, gb1, gw2, gb2) = reconstruction_loss_and_gradients(
                params, noisy, batch, config.l2_coefficient
            )
            if not np.isfinite(loss):
                raise NumericError("SDAE reconstruction loss became non-finite")
            params.encode_weights -= config.learning_rate * gw1
            params.encode_bias -= config.learning_rate * gb1
            params.decode_weights -= config.learning_rate * gw2
            params.decode_bias -= config.learning_rate * gb2
        errors.append(clean_reconstruction_error(params, x))
    return params, errors


def train_sdae(
    data: np.ndarray,
    labels: np.ndarray,
    config: SdaeConfig,
    class_count: int | None = None,
    scheme: ClassScheme | None = None,
    input_kind: str = dbn.INPUT_FEATURES22,
) -> tuple[dbn.DbnModel, dbn.TrainReport]:
    """Greedy pretraining followed by supervised fine-tuning.

    The frozen encoders become the hidden layers of a feedforward classifier
    (decoders are discarded), a seeded head is attached, and the whole network
    is fine-tuned with the DBN backprop machinery. The per-layer pretraining
    reconstruction series is attached to the report.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if class_count is None:
        class_count = scheme.class_count if scheme else int(labels.max()) + 1
    rng = np.random.default_rng(config.seed)
    x = np.asarray(data, dtype=np.float64)

    stack: list[dbn.RbmParams] = []
    recon_errors: list[list[float]] = []
    for width in config.layer_sizes:
        params, errors = pretrain_layer(x, width, config, rng)
        stack.append(dbn.RbmParams(params.encode_weights, np.zeros(x.shape[1]), params.encode_bias))
        recon_errors.append(errors)
        x = encode(x, params)

    model = dbn.init_classifier(
        stack,
        class_count,
        input_dim=data.shape[1],
        seed=config.seed,
        input_kind=input_kind,
        scheme=scheme,
        init_std=config.init_std,
    )
    model, report = dbn.finetune(model, (data, labels), config.to_train_config(), rng)
    report.pretrain_reconstruction = recon_errors
    return model, report
