"""Command-line pipeline with seeded, reproducible runs.

Every invocation resolves its configuration from flags, then an optional
``key=value`` config file (``--config``), then the ``SATPIPE_SEED``
environment variable (seed only), then built-in defaults, and writes exactly
one ``manifest.json`` under ``--out-dir`` recording the resolved config,
seeds, input digests, and output paths. Identical argv plus identical input
files reproduce identical artifacts byte for byte.

Exit codes: 0 success, 1 usage error, 2 data error, 3 numeric failure.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
import time
from dataclasses import asdict, dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from . import __version__, analysis, dbn, features, patchio, pipeline, sdae
from .errors import DataError, NumericError

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_NUMERIC = 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunManifest:
    """Record of one CLI run, sufficient to re-run it bit-identically."""

    subcommand: str
    argv: list
    config: dict
    seeds: dict
    prng: str
    inputs: dict
    outputs: dict
    duration_seconds: float
    package_version: str

    def write(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(asdict(self), fh, indent=1, sort_keys=True)
            fh.write("\n")


def _sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            digest.update(chunk)
    return digest.hexdigest()


class RunContext:
    """Tracks inputs/outputs of one run and writes its manifest."""

    def __init__(self, subcommand: str, out_dir: Path, argv: list):
        self.subcommand = subcommand
        self.out_dir = out_dir
        self.argv = list(argv)
        self.started = time.monotonic()
        self.inputs: dict = {}
        self.outputs: list = []
        out_dir.mkdir(parents=True, exist_ok=True)

    def record_input(self, path) -> None:
        self.inputs[str(path)] = _sha256(path)

    def out(self, name_or_path) -> Path:
        path = Path(name_or_path)
        if not path.is_absolute() and path.parent == Path("."):
            path = self.out_dir / path
        path.parent.mkdir(parents=True, exist_ok=True)
        self.outputs.append(path)
        return path

    def finish(self, config: dict, seeds: dict) -> None:
        manifest = RunManifest(
            subcommand=self.subcommand,
            argv=self.argv,
            config=config,
            seeds=seeds,
            prng=patchio.PRNG_NAME,
            inputs=self.inputs,
            outputs={str(p): _sha256(p) for p in self.outputs if Path(p).exists()},
            duration_seconds=time.monotonic() - self.started,
            package_version=__version__,
        )
        manifest.write(self.out_dir / "manifest.json")


def _read_config_file(path) -> dict:
    values = {}
    try:
        with open(path) as fh:
            for line_no, raw in enumerate(fh, start=1):
                line = raw.strip()
                if not line or line.startswith("#"):
                    continue
                if "=" not in line:
                    raise DataError(f"{path}:{line_no}: expected key=value")
                key, _, value = line.partition("=")
                values[key.strip()] = value.strip()
    except OSError as exc:
        raise DataError(f"cannot read config file {path}: {exc}") from exc
    return values


class Resolver:
    """Flag > config file > (SATPIPE_SEED for seed) > default."""

    def __init__(self, args):
        self.args = args
        config_path = getattr(args, "config", None)
        self.file_values = _read_config_file(config_path) if config_path else {}

    def get(self, key, default, cast=None):
        value = getattr(self.args, key, None)
        if value is None and key in self.file_values:
            value = self.file_values[key]
        if value is None:
            return default
        return cast(value) if cast and isinstance(value, str) else value

    def seed(self, default: int = 0) -> int:
        value = self.get("seed", None, int)
        if value is None:
            env = os.environ.get("SATPIPE_SEED")
            value = int(env) if env else default
        return int(value)


def _int_list(text) -> tuple[int, ...]:
    try:
        return tuple(int(v) for v in str(text).split(",") if v != "")
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated integer list, got {text!r}") from exc


def _float_list(text) -> tuple[float, ...]:
    try:
        return tuple(float(v) for v in str(text).split(",") if v != "")
    except ValueError as exc:
        raise UsageError(f"expected a comma-separated number list, got {text!r}") from exc


def _out_dir(resolver: Resolver, subcommand: str) -> Path:
    explicit = resolver.get("out_dir", None)
    if explicit:
        return Path(explicit)
    stamp = datetime.now().strftime("%Y%m%d-%H%M%S")
    return Path("runs") / f"{stamp}-{subcommand.replace(' ', '-')}"


def _add_common(parser) -> None:
    parser.add_argument("--seed", type=int, default=None, help="PRNG seed (PCG64)")
    parser.add_argument("--out-dir", dest="out_dir", default=None, help="output directory")
    parser.add_argument("--config", default=None, help="key=value config file")


def build_parser() -> _Parser:
    parser = _Parser(prog="satpipe", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    ds = sub.add_parser("dataset", help="generate, convert, or split patch datasets")
    ds_sub = ds.add_subparsers(dest="dataset_command", required=True)

    gen = ds_sub.add_parser("gen", help="generate a synthetic dataset")
    gen.add_argument("--classes", type=int, default=None)
    gen.add_argument("--per-class", dest="per_class", type=int, default=None)
    gen.add_argument("--out", required=True)
    gen.add_argument("--periods", type=_int_list, default=None, help="texture period per class")
    gen.add_argument("--noise", type=_float_list, default=None, help="noise std per class")
    gen.add_argument(
        "--means",
        default=None,
        help="per-class band means, semicolon-separated r,g,b,nir quadruples",
    )
    gen.add_argument("--amplitude", type=float, default=None)
    _add_common(gen)

    conv = ds_sub.add_parser("convert", help="convert between SATBIN and CSV containers")
    conv.add_argument("--in", dest="input", required=True)
    conv.add_argument("--out", required=True)
    _add_common(conv)

    split = ds_sub.add_parser("split", help="shuffle-split a dataset")
    split.add_argument("--in", dest="input", required=True)
    split.add_argument("--train-out", dest="train_out", required=True)
    split.add_argument("--test-out", dest="test_out", required=True)
    split.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    _add_common(split)

    ext = sub.add_parser("extract", help="extract the 22-feature matrix as CSV")
    ext.add_argument("--data", required=True)
    ext.add_argument("--out", default=None, help="output CSV (default features.csv in out-dir)")
    ext.add_argument("--levels", type=int, default=None)
    ext.add_argument("--workers", type=int, default=None)
    _add_common(ext)

    train = sub.add_parser("train", help="train a classifier")
    train_sub = train.add_subparsers(dest="train_command", required=True)
    for name in ("deepsat", "dbn-raw", "sdae"):
        tp = train_sub.add_parser(name)
        tp.add_argument("--data", default=None, help="single file, split internally")
        tp.add_argument("--train", default=None, help="pre-split training file")
        tp.add_argument("--test", default=None, help="pre-split test file")
        tp.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
        tp.add_argument("--layers", type=_int_list, default=None)
        tp.add_argument("--rbm-epochs", dest="rbm_epochs", type=int, default=None)
        tp.add_argument("--rbm-lr", dest="rbm_learning_rate", type=float, default=None)
        tp.add_argument("--cd-steps", dest="cd_steps", type=int, default=None)
        tp.add_argument("--batch-size", dest="batch_size", type=int, default=None)
        tp.add_argument("--finetune-lr", dest="finetune_learning_rate", type=float, default=None)
        tp.add_argument("--max-epochs", dest="max_finetune_epochs", type=int, default=None)
        tp.add_argument("--l2", dest="l2_coefficient", type=float, default=None)
        tp.add_argument("--patience", dest="early_stopping_patience", type=int, default=None)
        tp.add_argument("--val-fraction", dest="validation_fraction", type=float, default=None)
        tp.add_argument("--levels", type=int, default=None, help="CCM quantization levels")
        tp.add_argument("--workers", type=int, default=None)
        tp.add_argument(
            "--shared-stats",
            dest="shared_stats",
            action="store_true",
            help="apply train normalization stats at evaluation time",
        )
        if name == "sdae":
            tp.add_argument("--corruption", type=float, default=None)
            tp.add_argument("--pretrain-epochs", dest="pretrain_epochs", type=int, default=None)
            tp.add_argument("--pretrain-lr", dest="pretrain_lr", type=float, default=None)
            tp.add_argument("--input", choices=["raw", "features"], default=None)
        _add_common(tp)

    ev = sub.add_parser("eval", help="evaluate a saved model on a dataset")
    ev.add_argument("--model", required=True)
    ev.add_argument("--data", required=True)
    ev.add_argument("--workers", type=int, default=None)
    _add_common(ev)

    rank = sub.add_parser("rank", help="rank features by distribution separability")
    rank.add_argument("--features", required=True, help="labeled feature CSV")
    _add_common(rank)

    sep = sub.add_parser("separability", help="separability report for a matrix")
    sep.add_argument("--features", default=None, help="labeled feature CSV")
    sep.add_argument("--data", default=None, help="dataset file (with --input)")
    sep.add_argument("--input", choices=["raw", "features"], default=None)
    sep.add_argument("--workers", type=int, default=None)
    _add_common(sep)

    lsep = sub.add_parser("layersep", help="per-layer separability of a trained model")
    lsep.add_argument("--model", required=True)
    lsep.add_argument("--data", required=True)
    lsep.add_argument("--mode", choices=["sample_mean", "per_unit_mean"], default=None)
    lsep.add_argument("--workers", type=int, default=None)
    _add_common(lsep)

    idp = sub.add_parser("id", help="intrinsic dimension estimate")
    idp.add_argument("--features", default=None, help="labeled feature CSV")
    idp.add_argument("--data", default=None, help="dataset file (with --input)")
    idp.add_argument("--input", choices=["raw", "features"], default=None)
    idp.add_argument("--k", type=int, default=None)
    idp.add_argument("--rounds", type=int, default=None)
    idp.add_argument("--samples", type=int, default=None)
    idp.add_argument("--workers", type=int, default=None)
    _add_common(idp)

    hyp = sub.add_parser("hypersphere", help="relative unit-ball volume per dimension")
    hyp.add_argument("--max-dim", dest="max_dim", type=int, default=None)
    _add_common(hyp)

    rep = sub.add_parser("report", help="end-to-end demo bundle with figures")
    rep.add_argument("--classes", type=int, default=None)
    rep.add_argument("--per-class", dest="per_class", type=int, default=None)
    rep.add_argument("--train-fraction", dest="train_fraction", type=float, default=None)
    rep.add_argument("--max-epochs", dest="max_finetune_epochs", type=int, default=None)
    rep.add_argument("--rbm-epochs", dest="rbm_epochs", type=int, default=None)
    rep.add_argument("--workers", type=int, default=None)
    rep.add_argument("--quick", action="store_true", help="smaller sizes for a fast smoke run")
    _add_common(rep)

    return parser


def _load_dataset_checked(ctx: RunContext, path) -> patchio.Dataset:
    try:
        dataset = patchio.load_dataset(path)
    except FileNotFoundError as exc:
        raise DataError(f"dataset file not found: {path}") from exc
    ctx.record_input(path)
    return dataset


def _synthetic_spec(resolver: Resolver, classes: int, per_class: int) -> patchio.SyntheticSpec:
    base = patchio.default_demo_spec(classes, per_class)
    periods = resolver.get("periods", None, _int_list)
    noise = resolver.get("noise", None, _float_list)
    means_text = resolver.get("means", None)
    amplitude = resolver.get("amplitude", base.texture_amplitude, float)

    def per_class_tuple(values, what):
        if len(values) == 1:
            return tuple(values) * classes
        if len(values) != classes:
            raise UsageError(f"{what} needs 1 or {classes} values")
        return tuple(values)

    band_means = base.band_means
    if means_text:
        groups = [g for g in str(means_text).split(";") if g]
        quads = [tuple(float(v) for v in g.split(",")) for g in groups]
        if len(quads) == 1:
            quads = quads * classes
        if len(quads) != classes or any(len(q) != 4 for q in quads):
            raise UsageError("--means needs 1 or one r,g,b,nir quadruple per class")
        band_means = tuple(quads)
    return patchio.SyntheticSpec(
        class_count=classes,
        band_means=band_means,
        noise_std=per_class_tuple(noise, "--noise") if noise else base.noise_std,
        texture_period=per_class_tuple(periods, "--periods") if periods else base.texture_period,
        patches_per_class=per_class,
        texture_amplitude=amplitude,
    )


def cmd_dataset_gen(args, argv) -> int:
    resolver = Resolver(args)
    seed = resolver.seed()
    classes = resolver.get("classes", 4, int)
    per_class = resolver.get("per_class", 100, int)
    ctx = RunContext("dataset gen", _out_dir(resolver, "dataset-gen"), argv)
    spec = _synthetic_spec(resolver, classes, per_class)
    dataset = patchio.generate_synthetic(spec, seed)
    out = ctx.out(args.out)
    patchio.save_dataset(dataset, out)
    ctx.finish(
        {
            "classes": classes,
            "per_class": per_class,
            "periods": list(spec.texture_period),
            "noise_std": list(spec.noise_std),
            "band_means": [list(m) for m in spec.band_means],
            "amplitude": spec.texture_amplitude,
        },
        {"seed": seed},
    )
    print(f"wrote {len(dataset)} patches to {out}")
    return EXIT_OK


def cmd_dataset_convert(args, argv) -> int:
    resolver = Resolver(args)
    ctx = RunContext("dataset convert", _out_dir(resolver, "dataset-convert"), argv)
    dataset = _load_dataset_checked(ctx, args.input)
    out = ctx.out(args.out)
    if str(out).lower().endswith(".csv"):
        patchio.save_dataset_csv(dataset, out)
    else:
        patchio.save_dataset(dataset, out)
    ctx.finish({"input": args.input, "output": str(out)}, {})
    print(f"converted {len(dataset)} patches to {out}")
    return EXIT_OK


def cmd_dataset_split(args, argv) -> int:
    resolver = Resolver(args)
    seed = resolver.seed()
    fraction = resolver.get("train_fraction", 0.8, float)
    ctx = RunContext("dataset split", _out_dir(resolver, "dataset-split"), argv)
    dataset = _load_dataset_checked(ctx, args.input)
    train_ds, test_ds = patchio.shuffle_split(dataset, fraction, seed)
    train_out, test_out = ctx.out(args.train_out), ctx.out(args.test_out)
    patchio.save_dataset(train_ds, train_out)
    patchio.save_dataset(test_ds, test_out)
    ctx.finish({"train_fraction": fraction}, {"seed": seed})
    print(f"split {len(dataset)} -> {len(train_ds)} train / {len(test_ds)} test")
    return EXIT_OK


def cmd_extract(args, argv) -> int:
    resolver = Resolver(args)
    levels = resolver.get("levels", 8, int)
    workers = resolver.get("workers", os.cpu_count() or 1, int)
    ctx = RunContext("extract", _out_dir(resolver, "extract"), argv)
    dataset = _load_dataset_checked(ctx, args.data)
    config = features.FeatureConfig(levels=levels)
    matrix = features.extract_batch(dataset, config, workers=workers)
    out = ctx.out(args.out or "features.csv")
    features.write_feature_csv(out, matrix, dataset.labels)
    ctx.finish({"levels": levels, "workers": workers}, {"seed": resolver.seed()})
    print(f"extracted {matrix.shape[0]}x{matrix.shape[1]} features to {out}")
    return EXIT_OK


def _train_config(resolver: Resolver, layers, seed) -> dbn.TrainConfig:
    return dbn.TrainConfig(
        layer_sizes=layers,
        cd_steps=resolver.get("cd_steps", 1, int),
        rbm_learning_rate=resolver.get("rbm_learning_rate", 0.05, float),
        rbm_epochs=resolver.get("rbm_epochs", 30, int),
        batch_size=resolver.get("batch_size", 100, int),
        finetune_learning_rate=resolver.get("finetune_learning_rate", 0.01, float),
        max_finetune_epochs=resolver.get("max_finetune_epochs", 500, int),
        l2_coefficient=resolver.get("l2_coefficient", 1e-4, float),
        validation_fraction=resolver.get("validation_fraction", 0.1, float),
        early_stopping_patience=resolver.get("early_stopping_patience", 20, int),
        seed=seed,
    )


def _train_datasets(ctx, resolver, args, seed):
    if args.data and (args.train or args.test):
        raise UsageError("use either --data or --train/--test, not both")
    if args.data:
        dataset = _load_dataset_checked(ctx, args.data)
        fraction = resolver.get("train_fraction", 0.8, float)
        return patchio.shuffle_split(dataset, fraction, seed)
    if not (args.train and args.test):
        raise UsageError("provide --data or both --train and --test")
    return _load_dataset_checked(ctx, args.train), _load_dataset_checked(ctx, args.test)


def cmd_train(args, argv) -> int:
    resolver = Resolver(args)
    seed = resolver.seed()
    variant = args.train_command
    ctx = RunContext(f"train {variant}", _out_dir(resolver, f"train-{variant}"), argv)
    train_ds, test_ds = _train_datasets(ctx, resolver, args, seed)
    levels = resolver.get("levels", 8, int)
    workers = resolver.get("workers", 1, int)
    feature_config = features.FeatureConfig(levels=levels)
    norm_mode = pipeline.NORM_SHARED if getattr(args, "shared_stats", False) else pipeline.NORM_SEPARATE

    if variant == "sdae":
        input_kind = (
            dbn.INPUT_FEATURES22
            if resolver.get("input", "raw") == "features"
            else dbn.INPUT_RAW_PIXELS
        )
        config = sdae.SdaeConfig(
            layer_sizes=resolver.get("layers", (100,), _int_list),
            corruption_fraction=resolver.get("corruption", 0.25, float),
            learning_rate=resolver.get("pretrain_lr", 0.01, float),
            epochs_per_layer=resolver.get("pretrain_epochs", 30, int),
            batch_size=resolver.get("batch_size", 100, int),
            l2_coefficient=resolver.get("l2_coefficient", 1e-4, float),
            finetune_learning_rate=resolver.get("finetune_learning_rate", 0.01, float),
            max_finetune_epochs=resolver.get("max_finetune_epochs", 500, int),
            validation_fraction=resolver.get("validation_fraction", 0.1, float),
            early_stopping_patience=resolver.get("early_stopping_patience", 20, int),
            seed=seed,
        )
        trained = pipeline.train_sdae_pipeline(
            train_ds, config, input_kind, feature_config, norm_mode, workers
        )
        config_doc = asdict(config)
        kind = "sdae"
        train_config = None
    else:
        input_kind = dbn.INPUT_FEATURES22 if variant == "deepsat" else dbn.INPUT_RAW_PIXELS
        default_layers = (50, 50) if variant == "deepsat" else (100, 100, 100)
        config = _train_config(resolver, resolver.get("layers", default_layers, _int_list), seed)
        trained = pipeline.train_dbn_pipeline(
            train_ds, config, input_kind, feature_config, norm_mode, workers
        )
        config_doc = asdict(config)
        kind = "dbn"
        train_config = config

    config_doc["layer_sizes"] = list(config.layer_sizes)
    model_path = ctx.out("model.json")
    dbn.save_model(
        model_path,
        trained.model,
        kind=kind,
        config=train_config,
        seed=seed,
        normalization=trained.normalization,
        extra_doc={"feature_levels": levels},
    )
    trained.report.to_csv(ctx.out("train_report.csv"))

    result = pipeline.evaluate_pipeline(
        trained.model, test_ds, trained.normalization, feature_config, workers
    )
    with open(ctx.out("metrics.json"), "w") as fh:
        json.dump(
            {
                "accuracy": result.accuracy,
                "confusion": result.confusion.tolist(),
                "test_size": len(test_ds),
            },
            fh,
            indent=1,
            sort_keys=True,
        )
        fh.write("\n")
    ctx.finish(
        {"variant": variant, "input_kind": input_kind, "norm_mode": norm_mode, **config_doc},
        {"seed": seed},
    )
    print(f"trained {variant} ({input_kind}); test accuracy {result.accuracy:.4f}")
    return EXIT_OK


def cmd_eval(args, argv) -> int:
    resolver = Resolver(args)
    workers = resolver.get("workers", 1, int)
    ctx = RunContext("eval", _out_dir(resolver, "eval"), argv)
    try:
        model, doc = dbn.load_model(args.model)
    except FileNotFoundError as exc:
        raise DataError(f"model file not found: {args.model}") from exc
    except (json.JSONDecodeError, KeyError, ValueError) as exc:
        raise DataError(f"cannot parse model file {args.model}: {exc}") from exc
    ctx.record_input(args.model)
    dataset = _load_dataset_checked(ctx, args.data)
    feature_config = features.FeatureConfig(levels=doc.get("feature_levels") or 8)
    result = pipeline.evaluate_pipeline(
        model, dataset, doc.get("normalization"), feature_config, workers
    )
    with open(ctx.out("metrics.json"), "w") as fh:
        json.dump(
            {
                "accuracy": result.accuracy,
                "confusion": result.confusion.tolist(),
                "test_size": len(dataset),
            },
            fh,
            indent=1,
            sort_keys=True,
        )
        fh.write("\n")
    ctx.finish({"model": args.model, "data": args.data}, {"seed": resolver.seed()})
    print(f"accuracy {result.accuracy:.4f} on {len(dataset)} patches")
    return EXIT_OK


def _matrix_from_args(ctx, resolver, args) -> tuple[np.ndarray, np.ndarray]:
    """Labeled matrix from --features CSV or --data plus --input."""
    if args.features and args.data:
        raise UsageError("use either --features or --data, not both")
    if args.features:
        try:
            matrix, labels, _ = features.read_feature_csv(args.features)
        except FileNotFoundError as exc:
            raise DataError(f"feature CSV not found: {args.features}") from exc
        except ValueError as exc:
            raise DataError(str(exc)) from exc
        ctx.record_input(args.features)
        return matrix, labels
    if not args.data:
        raise UsageError("provide --features or --data")
    dataset = _load_dataset_checked(ctx, args.data)
    workers = resolver.get("workers", 1, int)
    if resolver.get("input", "features") == "raw":
        return dataset.raw_matrix(), dataset.labels
    return features.extract_batch(dataset, workers=workers), dataset.labels


def cmd_rank(args, argv) -> int:
    resolver = Resolver(args)
    ctx = RunContext("rank", _out_dir(resolver, "rank"), argv)
    try:
        matrix, labels, names = features.read_feature_csv(args.features)
    except FileNotFoundError as exc:
        raise DataError(f"feature CSV not found: {args.features}") from exc
    except ValueError as exc:
        raise DataError(str(exc)) from exc
    ctx.record_input(args.features)
    ranking = analysis.rank_features(matrix, labels, names)
    analysis.ranking_to_csv(ranking, ctx.out("ranking.csv"))
    analysis.ranking_to_json(ranking, ctx.out("ranking.json"))
    ctx.finish({"features": args.features}, {"seed": resolver.seed()})
    top = ranking.entries[0]
    print(f"top feature: {top.name} (D_s {top.d_s:.4f})")
    return EXIT_OK


def cmd_separability(args, argv) -> int:
    resolver = Resolver(args)
    ctx = RunContext("separability", _out_dir(resolver, "separability"), argv)
    matrix, labels = _matrix_from_args(ctx, resolver, args)
    report = analysis.separability(matrix, labels)
    analysis.separability_to_csv(report, ctx.out("separability.csv"))
    analysis.separability_to_json(report, ctx.out("separability.json"))
    summary = {
        "columns": len(report.names),
        "mean_delta_mean": float(report.delta_mean.mean()),
        "mean_delta_sigma": float(report.delta_sigma.mean()),
        "mean_d_s": float(report.d_s[np.isfinite(report.d_s)].mean()),
    }
    with open(ctx.out("separability_summary.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    ctx.finish({"source": args.features or args.data}, {"seed": resolver.seed()})
    print(f"mean D_s {summary['mean_d_s']:.4f} over {summary['columns']} columns")
    return EXIT_OK


def cmd_layersep(args, argv) -> int:
    resolver = Resolver(args)
    mode = resolver.get("mode", "sample_mean")
    workers = resolver.get("workers", 1, int)
    ctx = RunContext("layersep", _out_dir(resolver, "layersep"), argv)
    try:
        model, doc = dbn.load_model(args.model)
    except FileNotFoundError as exc:
        raise DataError(f"model file not found: {args.model}") from exc
    ctx.record_input(args.model)
    dataset = _load_dataset_checked(ctx, args.data)
    feature_config = features.FeatureConfig(levels=doc.get("feature_levels") or 8)
    matrix = pipeline.prepare_eval_matrix(
        model, dataset, doc.get("normalization"), feature_config, workers
    )
    values = analysis.layer_separability(model, matrix, dataset.labels, mode=mode)
    with open(ctx.out("layersep.csv"), "w") as fh:
        fh.write("layer,d_s\n")
        for i, v in enumerate(values, start=1):
            fh.write(f"{i},{v!r}\n")
    ctx.finish({"mode": mode, "model": args.model}, {"seed": resolver.seed()})
    print("layer D_s: " + ", ".join(f"{v:.4g}" for v in values))
    return EXIT_OK


def cmd_id(args, argv) -> int:
    resolver = Resolver(args)
    k = resolver.get("k", 10, int)
    rounds = resolver.get("rounds", 10, int)
    samples = resolver.get("samples", 1000, int)
    seed = resolver.seed()
    ctx = RunContext("id", _out_dir(resolver, "id"), argv)
    matrix, _ = _matrix_from_args(ctx, resolver, args)
    estimate = analysis.intrinsic_dimension(matrix, k=k, rounds=rounds, sample_size=samples, seed=seed)
    with open(ctx.out("id.json"), "w") as fh:
        json.dump(
            {
                "dimension": estimate.dimension,
                "k": estimate.k,
                "sample_size": estimate.sample_size,
                "rounds": estimate.rounds,
            },
            fh,
            indent=1,
            sort_keys=True,
        )
        fh.write("\n")
    ctx.finish({"k": k, "rounds": rounds, "samples": samples}, {"seed": seed})
    print(f"intrinsic dimension ~= {estimate.dimension:.3f} (k={k})")
    return EXIT_OK


def cmd_hypersphere(args, argv) -> int:
    resolver = Resolver(args)
    max_dim = resolver.get("max_dim", 30, int)
    if max_dim < 1:
        raise UsageError("--max-dim must be >= 1")
    ctx = RunContext("hypersphere", _out_dir(resolver, "hypersphere"), argv)
    dims = list(range(1, max_dim + 1))
    values = [analysis.hypersphere_relative_volume(n) for n in dims]
    with open(ctx.out("hypersphere.csv"), "w") as fh:
        fh.write("dimension,relative_volume\n")
        for n, v in zip(dims, values):
            fh.write(f"{n},{v!r}\n")
    ctx.finish({"max_dim": max_dim}, {"seed": resolver.seed()})
    print(f"V_relative({max_dim}) = {values[-1]:.3e}")
    return EXIT_OK


def cmd_report(args, argv) -> int:
    from . import report as figures

    resolver = Resolver(args)
    seed = resolver.seed(7)
    quick = bool(args.quick)
    classes = resolver.get("classes", 4, int)
    per_class = resolver.get("per_class", 60 if quick else 150, int)
    fraction = resolver.get("train_fraction", 0.8, float)
    max_epochs = resolver.get("max_finetune_epochs", 40 if quick else 200, int)
    rbm_epochs = resolver.get("rbm_epochs", 3 if quick else 10, int)
    workers = resolver.get("workers", 1, int)
    ctx = RunContext("report", _out_dir(resolver, "report"), argv)

    spec = patchio.default_demo_spec(classes, per_class)
    dataset = patchio.generate_synthetic(spec, seed)
    train_ds, test_ds = patchio.shuffle_split(dataset, fraction, seed)
    feature_config = features.FeatureConfig()

    train_feats = features.extract_batch(train_ds, feature_config, workers=workers)
    features.write_feature_csv(ctx.out("train_features.csv"), train_feats, train_ds.labels)

    ranking = analysis.rank_features(train_feats, train_ds.labels, features.FEATURE_NAMES)
    analysis.ranking_to_csv(ranking, ctx.out("ranking.csv"))
    analysis.ranking_to_json(ranking, ctx.out("ranking.json"))
    figures.render_ranking_figure(ranking, ctx.out("fig_ranking.png"))

    raw_train = train_ds.raw_matrix()
    sep_rows = []
    for label, matrix in (("raw_pixels", raw_train), ("features22", train_feats)):
        rep = analysis.separability(matrix, train_ds.labels)
        finite = np.isfinite(rep.d_s)
        sep_rows.append(
            {
                "input": label,
                "mean_delta_mean": float(rep.delta_mean.mean()),
                "mean_delta_sigma": float(rep.delta_sigma.mean()),
                "mean_d_s": float(rep.d_s[finite].mean()),
            }
        )
    with open(ctx.out("separability_comparison.csv"), "w") as fh:
        fh.write("input,mean_delta_mean,mean_delta_sigma,mean_d_s\n")
        for row in sep_rows:
            fh.write(
                f"{row['input']},{row['mean_delta_mean']!r},"
                f"{row['mean_delta_sigma']!r},{row['mean_d_s']!r}\n"
            )

    # small demo sets need small batches so each epoch still makes progress
    batch = max(10, min(100, len(train_ds) // 20))
    patience = max(10, max_epochs // 3)
    shared = dict(
        rbm_epochs=rbm_epochs,
        rbm_learning_rate=0.1,
        init_std=0.1,
        batch_size=batch,
        max_finetune_epochs=max_epochs,
        early_stopping_patience=patience,
        seed=seed,
    )
    runs = {
        "deepsat": pipeline.train_dbn_pipeline(
            train_ds,
            dbn.TrainConfig(layer_sizes=(50, 50), finetune_learning_rate=0.5, **shared),
            dbn.INPUT_FEATURES22,
            feature_config,
            workers=workers,
        ),
        "dbn-raw": pipeline.train_dbn_pipeline(
            train_ds,
            dbn.TrainConfig(layer_sizes=(100, 100, 100), finetune_learning_rate=0.3, **shared),
            dbn.INPUT_RAW_PIXELS,
            feature_config,
            workers=workers,
        ),
        "sdae": pipeline.train_sdae_pipeline(
            train_ds,
            sdae.SdaeConfig(
                layer_sizes=(50, 50),
                epochs_per_layer=rbm_epochs,
                learning_rate=0.1,
                batch_size=batch,
                init_std=0.1,
                finetune_learning_rate=1.0,
                max_finetune_epochs=max_epochs,
                early_stopping_patience=patience,
                seed=seed,
            ),
            dbn.INPUT_FEATURES22,
            feature_config,
            workers=workers,
        ),
    }

    grid_rows, layout_series, train_reports = [], {}, {}
    for name, trained in runs.items():
        result = pipeline.evaluate_pipeline(
            trained.model, test_ds, trained.normalization, feature_config, workers
        )
        grid_rows.append(
            {
                "model": name,
                "input": trained.model.input_kind,
                "layers": "x".join(str(w) for w in trained.model.layer_sizes),
                "accuracy_percent": 100.0 * result.accuracy,
            }
        )
        matrix = pipeline.prepare_eval_matrix(
            trained.model, test_ds, trained.normalization, feature_config, workers
        )
        layout_series[name] = analysis.layer_separability(trained.model, matrix, test_ds.labels)
        train_reports[name] = trained.report
    with open(ctx.out("accuracy_grid.csv"), "w") as fh:
        fh.write("model,input,layers,accuracy_percent\n")
        for row in grid_rows:
            fh.write(f"{row['model']},{row['input']},{row['layers']},{row['accuracy_percent']!r}\n")
    with open(ctx.out("layersep_series.csv"), "w") as fh:
        fh.write("model,layer,d_s\n")
        for name, values in layout_series.items():
            for i, v in enumerate(values, start=1):
                fh.write(f"{name},{i},{v!r}\n")
    figures.render_layer_separability_figure(layout_series, ctx.out("fig_layersep.png"))
    figures.render_training_curves(train_reports, ctx.out("fig_training.png"))

    id_rows = []
    for label, matrix in (("raw_pixels", raw_train), ("features22", train_feats)):
        est = analysis.intrinsic_dimension(matrix, k=10, seed=seed)
        id_rows.append({"input": label, "dimension": est.dimension, "k": est.k})
    with open(ctx.out("id_estimates.csv"), "w") as fh:
        fh.write("input,dimension,k\n")
        for row in id_rows:
            fh.write(f"{row['input']},{row['dimension']!r},{row['k']}\n")

    dims = list(range(1, 21))
    volumes = [analysis.hypersphere_relative_volume(n) for n in dims]
    with open(ctx.out("hypersphere.csv"), "w") as fh:
        fh.write("dimension,relative_volume\n")
        for n, v in zip(dims, volumes):
            fh.write(f"{n},{v!r}\n")
    figures.render_hypersphere_figure(dims, volumes, ctx.out("fig_hypersphere.png"))

    summary = {
        "dataset": {"classes": classes, "train": len(train_ds), "test": len(test_ds)},
        "accuracy_grid": grid_rows,
        "separability": sep_rows,
        "intrinsic_dimension": id_rows,
        "top_features": ranking.names()[:5],
    }
    with open(ctx.out("report.json"), "w") as fh:
        json.dump(summary, fh, indent=1, sort_keys=True)
        fh.write("\n")
    ctx.finish(
        {
            "classes": classes,
            "per_class": per_class,
            "train_fraction": fraction,
            "max_finetune_epochs": max_epochs,
            "rbm_epochs": rbm_epochs,
            "quick": quick,
        },
        {"seed": seed},
    )
    for row in grid_rows:
        print(f"{row['model']:8s} {row['layers']:>12s} {row['accuracy_percent']:.2f}%")
    return EXIT_OK


_DISPATCH = {
    ("dataset", "gen"): cmd_dataset_gen,
    ("dataset", "convert"): cmd_dataset_convert,
    ("dataset", "split"): cmd_dataset_split,
    ("extract", None): cmd_extract,
    ("train", None): cmd_train,
    ("eval", None): cmd_eval,
    ("rank", None): cmd_rank,
    ("separability", None): cmd_separability,
    ("layersep", None): cmd_layersep,
    ("id", None): cmd_id,
    ("hypersphere", None): cmd_hypersphere,
    ("report", None): cmd_report,
}


def run(argv=None) -> int:
    """Execute one CLI invocation; returns the process exit code."""
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        key = (args.command, getattr(args, "dataset_command", None))
        if key not in _DISPATCH:
            key = (args.command, None)
        return _DISPATCH[key](args, argv)
    except UsageError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (DataError, OSError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except NumericError as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except SystemExit as exc:  # argparse -h
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run())
