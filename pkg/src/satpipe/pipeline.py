"""End-to-end training/evaluation pipelines shared by the CLI and tests.

Two input representations are supported: the 22-feature vectors (min-max
normalized) and raw pixels scaled by 1/255. Feature normalization defaults to
fitting train and test matrices separately; "shared" mode fits on train and
applies those statistics to evaluation data. The mode (and stats, when
shared) ride along with the saved model so evaluation is self-contained.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import dbn, features, normalize, sdae
from .errors import NumericError
from .patchio import Dataset

NORM_SEPARATE = "separate"
NORM_SHARED = "shared"
NORM_NONE = "none"


@dataclass
class TrainedPipeline:
    model: dbn.DbnModel
    report: dbn.TrainReport
    normalization: dict


def input_matrix(
    dataset: Dataset,
    input_kind: str,
    feature_config: features.FeatureConfig | None = None,
    workers: int = 1,
) -> np.ndarray:
    if input_kind == dbn.INPUT_RAW_PIXELS:
        return dataset.raw_matrix()
    if input_kind == dbn.INPUT_FEATURES22:
        return features.extract_batch(dataset, feature_config, workers=workers)
    raise ValueError(f"unknown input kind {input_kind!r}")


def _normalization_doc(mode: str, stats: normalize.NormalizationStats | None) -> dict:
    doc = {"mode": mode}
    if stats is not None:
        doc["minima"] = stats.minima.tolist()
        doc["maxima"] = stats.maxima.tolist()
    return doc


def normalization_from_doc(doc: dict | None):
    if not doc or doc.get("mode") in (None, NORM_NONE):
        return NORM_NONE, None
    stats = None
    if "minima" in doc:
        stats = normalize.NormalizationStats(np.asarray(doc["minima"]), np.asarray(doc["maxima"]))
    return doc["mode"], stats


def prepare_eval_matrix(
    model: dbn.DbnModel,
    dataset: Dataset,
    normalization: dict | None,
    feature_config: features.FeatureConfig | None = None,
    workers: int = 1,
) -> np.ndarray:
    """Build the evaluation matrix the way the recorded normalization demands."""
    matrix = input_matrix(dataset, model.input_kind, feature_config, workers)
    mode, stats = normalization_from_doc(normalization)
    if mode == NORM_SEPARATE:
        matrix = normalize.apply(normalize.fit(matrix), matrix)
    elif mode == NORM_SHARED:
        matrix = normalize.apply(stats, matrix)
    return matrix


def train_dbn_pipeline(
    train_ds: Dataset,
    config: dbn.TrainConfig,
    input_kind: str = dbn.INPUT_FEATURES22,
    feature_config: features.FeatureConfig | None = None,
    norm_mode: str = NORM_SEPARATE,
    workers: int = 1,
) -> TrainedPipeline:
    """Extract (or scale), normalize, pretrain, and fine-tune a DBN classifier."""
    matrix = input_matrix(train_ds, input_kind, feature_config, workers)
    stats = None
    if input_kind == dbn.INPUT_FEATURES22:
        matrix, stats = normalize.fit_apply(matrix)
        norm_doc = _normalization_doc(norm_mode, stats if norm_mode == NORM_SHARED else None)
    else:
        norm_doc = {"mode": NORM_NONE}

    rng = np.random.default_rng(config.seed)
    stack, recon = dbn.pretrain(matrix, config, rng)
    model = dbn.init_classifier(
        stack,
        train_ds.scheme.class_count,
        input_dim=matrix.shape[1],
        seed=config.seed,
        input_kind=input_kind,
        scheme=train_ds.scheme,
        init_std=config.init_std,
    )
    model, report = dbn.finetune(model, (matrix, train_ds.labels), config, rng)
    report.pretrain_reconstruction = recon
    _check_finite(model)
    return TrainedPipeline(model, report, norm_doc)


def train_sdae_pipeline(
    train_ds: Dataset,
    config: sdae.SdaeConfig,
    input_kind: str = dbn.INPUT_RAW_PIXELS,
    feature_config: features.FeatureConfig | None = None,
    norm_mode: str = NORM_SEPARATE,
    workers: int = 1,
) -> TrainedPipeline:
    """Same pipeline with SDAE pretraining instead of RBMs."""
    matrix = input_matrix(train_ds, input_kind, feature_config, workers)
    if input_kind == dbn.INPUT_FEATURES22:
        matrix, stats = normalize.fit_apply(matrix)
        norm_doc = _normalization_doc(norm_mode, stats if norm_mode == NORM_SHARED else None)
    else:
        norm_doc = {"mode": NORM_NONE}
    model, report = sdae.train_sdae(
        matrix,
        train_ds.labels,
        config,
        scheme=train_ds.scheme,
        input_kind=input_kind,
    )
    _check_finite(model)
    return TrainedPipeline(model, report, norm_doc)


def evaluate_pipeline(
    model: dbn.DbnModel,
    dataset: Dataset,
    normalization: dict | None,
    feature_config: features.FeatureConfig | None = None,
    workers: int = 1,
) -> dbn.EvalResult:
    matrix = prepare_eval_matrix(model, dataset, normalization, feature_config, workers)
    return dbn.evaluate(model, (matrix, dataset.labels))


def _check_finite(model: dbn.DbnModel) -> None:
    arrays = [model.head_weights, model.head_bias]
    for p in model.stack:
        arrays.extend([p.weights, p.visible_bias, p.hidden_bias])
    if not all(np.all(np.isfinite(a)) for a in arrays):
        raise NumericError("trained model contains non-finite parameters")
