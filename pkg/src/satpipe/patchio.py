"""Labeled patch datasets: binary/CSV containers, synthetic generation, splits.

A patch is a numpy array of shape ``(bands, height, width)`` with dtype
``uint8``; a dataset stacks n patches into ``(n, bands, height, width)`` with a
parallel integer label vector and a class scheme. Datasets are treated as
immutable once constructed: every operation here returns new objects and none
mutates its inputs.

The native on-disk container (SATBIN, little-endian) is::

    magic "SATP" | version u8=1 | width u16 | height u16 | band_count u8
    | class_count u8 | record_count u32

followed by ``record_count`` records, each a label byte and then
``band_count`` planes of ``width*height`` bytes, plane-sequential, row-major.
A CSV alternative uses a ``label,px_0,...,px_3135`` header with the same
plane-sequential pixel order (fixed 4x28x28 geometry).
"""

from __future__ import annotations

import csv
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import DataError, FormatError, LabelError, TruncationError

PATCH_WIDTH = 28
PATCH_HEIGHT = 28
PATCH_BANDS = 4

SATBIN_MAGIC = b"SATP"
SATBIN_VERSION = 1
_HEADER = struct.Struct("<4sBHHBBI")

SAT4_CLASS_NAMES = ("barren land", "trees", "grassland", "other")
SAT6_CLASS_NAMES = ("barren land", "trees", "grassland", "roads", "buildings", "water bodies")

PRNG_NAME = "numpy-pcg64"


@dataclass(frozen=True)
class ClassScheme:
    """A named set of land-cover classes."""

    name: str
    class_names: tuple[str, ...]

    @property
    def class_count(self) -> int:
        return len(self.class_names)

    @staticmethod
    def sat4() -> "ClassScheme":
        return ClassScheme("SAT4", SAT4_CLASS_NAMES)

    @staticmethod
    def sat6() -> "ClassScheme":
        return ClassScheme("SAT6", SAT6_CLASS_NAMES)

    @staticmethod
    def custom(class_count: int) -> "ClassScheme":
        return ClassScheme(
            f"CUSTOM{class_count}",
            tuple(f"class_{i}" for i in range(class_count)),
        )

    @staticmethod
    def from_class_count(class_count: int) -> "ClassScheme":
        """Canonical scheme for a class count: 4 -> SAT4, 6 -> SAT6, else custom."""
        if class_count == 4:
            return ClassScheme.sat4()
        if class_count == 6:
            return ClassScheme.sat6()
        return ClassScheme.custom(class_count)


@dataclass(frozen=True)
class ClassLabel:
    scheme: ClassScheme
    index: int

    def __post_init__(self):
        if not 0 <= self.index < self.scheme.class_count:
            raise LabelError(
                f"label index {self.index} outside scheme {self.scheme.name} "
                f"with {self.scheme.class_count} classes"
            )

    @property
    def name(self) -> str:
        return self.scheme.class_names[self.index]


@dataclass(eq=False)
class Dataset:
    """An ordered set of labeled patches sharing one class scheme."""

    patches: np.ndarray
    labels: np.ndarray
    scheme: ClassScheme

    def __post_init__(self):
        self.patches = np.asarray(self.patches, dtype=np.uint8)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.patches.ndim != 4:
            raise ValueError(f"patches must be (n, bands, h, w), got shape {self.patches.shape}")
        if self.labels.ndim != 1 or len(self.labels) != len(self.patches):
            raise ValueError("labels must be a 1-D vector parallel to patches")
        if len(self.labels) and (self.labels.min() < 0 or self.labels.max() >= self.scheme.class_count):
            raise LabelError(
                f"labels must lie in [0, {self.scheme.class_count}) for scheme {self.scheme.name}"
            )

    def __len__(self) -> int:
        return len(self.patches)

    def __eq__(self, other) -> bool:
        return (
            isinstance(other, Dataset)
            and self.scheme == other.scheme
            and np.array_equal(self.patches, other.patches)
            and np.array_equal(self.labels, other.labels)
        )

    def label_at(self, i: int) -> ClassLabel:
        return ClassLabel(self.scheme, int(self.labels[i]))

    def raw_matrix(self) -> np.ndarray:
        """Patches flattened plane-sequentially and scaled by 1/255 to [0, 1]."""
        return self.patches.reshape(len(self), -1).astype(np.float64) / 255.0


@dataclass(frozen=True)
class SyntheticSpec:
    """Recipe for a texture-differentiated synthetic dataset.

    Each class draws patches as ``clamp(band_mean + texture + noise, 0, 255)``
    where ``texture`` is a sinusoidal modulation shared across bands,
    ``amplitude * sin(2*pi*(x+ox)/period) * sin(2*pi*(y+oy)/period)`` with
    per-patch integer offsets ``ox, oy``, so classes can differ in texture
    rather than only in channel means. Period 1 degenerates to zero modulation
    on the integer pixel grid.
    """

    class_count: int
    band_means: tuple[tuple[float, float, float, float], ...]
    noise_std: tuple[float, ...]
    texture_period: tuple[int, ...]
    patches_per_class: int
    texture_amplitude: float = 30.0

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("class_count must be >= 2")
        if self.patches_per_class < 1:
            raise ValueError("patches_per_class must be >= 1")
        for name, seq in (
            ("band_means", self.band_means),
            ("noise_std", self.noise_std),
            ("texture_period", self.texture_period),
        ):
            if len(seq) != self.class_count:
                raise ValueError(f"{name} must have one entry per class")
        for means in self.band_means:
            if len(means) != PATCH_BANDS or not all(0 <= m <= 255 for m in means):
                raise ValueError("band means must be 4 values in [0, 255]")
        if any(s < 0 for s in self.noise_std):
            raise ValueError("noise std must be >= 0")
        if any(p < 1 or int(p) != p for p in self.texture_period):
            raise ValueError("texture period must be an integer >= 1")


# Lag-1 modulation correlations cos(2*pi/p) of these periods are spread out
# (-0.5, 0.0, 0.5, 0.81, ...), which is what separates the classes in
# co-occurrence feature space.
_DEMO_PERIODS = (3, 4, 6, 10, 5, 8, 14, 20, 7, 12)


def default_demo_spec(class_count: int = 4, patches_per_class: int = 100) -> SyntheticSpec:
    """Canonical demo spec: classes share channel means and differ in texture period."""
    if class_count > len(_DEMO_PERIODS):
        raise ValueError(f"demo spec supports at most {len(_DEMO_PERIODS)} classes")
    means = (120.0, 124.0, 118.0, 132.0)
    return SyntheticSpec(
        class_count=class_count,
        band_means=tuple(means for _ in range(class_count)),
        noise_std=tuple(20.0 for _ in range(class_count)),
        texture_period=_DEMO_PERIODS[:class_count],
        patches_per_class=patches_per_class,
    )


def generate_synthetic(spec: SyntheticSpec, seed: int) -> Dataset:
    """Generate a synthetic dataset; a pure function of ``(spec, seed)``."""
    rng = np.random.default_rng(seed)
    h, w = PATCH_HEIGHT, PATCH_WIDTH
    n = spec.class_count * spec.patches_per_class
    patches = np.empty((n, PATCH_BANDS, h, w), dtype=np.uint8)
    labels = np.empty(n, dtype=np.int64)
    xs = np.arange(w, dtype=np.float64)
    ys = np.arange(h, dtype=np.float64)
    i = 0
    for c in range(spec.class_count):
        period = float(spec.texture_period[c])
        means = np.asarray(spec.band_means[c], dtype=np.float64)[:, None, None]
        std = float(spec.noise_std[c])
        for _ in range(spec.patches_per_class):
            ox = int(rng.integers(0, spec.texture_period[c]))
            oy = int(rng.integers(0, spec.texture_period[c]))
            sx = np.sin(2.0 * np.pi * (xs + ox) / period)
            sy = np.sin(2.0 * np.pi * (ys + oy) / period)
            texture = spec.texture_amplitude * np.outer(sy, sx)
            noise = rng.normal(0.0, std, size=(PATCH_BANDS, h, w)) if std > 0 else 0.0
            values = means + texture[None, :, :] + noise
            patches[i] = np.clip(np.rint(values), 0, 255).astype(np.uint8)
            labels[i] = c
            i += 1
    return Dataset(patches, labels, ClassScheme.from_class_count(spec.class_count))


def shuffle_split(dataset: Dataset, train_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Shuffle and partition into (train, test); train size is floor(fraction * n)."""
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must lie in (0, 1)")
    n = len(dataset)
    if n < 2:
        raise DataError(f"cannot split a dataset of {n} patches")
    perm = np.random.default_rng(seed).permutation(n)
    n_train = math.floor(train_fraction * n)
    train_idx, test_idx = perm[:n_train], perm[n_train:]
    return (
        Dataset(dataset.patches[train_idx], dataset.labels[train_idx], dataset.scheme),
        Dataset(dataset.patches[test_idx], dataset.labels[test_idx], dataset.scheme),
    )


def load_dataset(path, format: str | None = None) -> Dataset:
    """Load a dataset from a SATBIN or CSV container.

    ``format`` is ``"satbin"`` or ``"csv"``; when omitted it is inferred from
    the file suffix (``.csv`` -> CSV, anything else -> SATBIN).
    """
    fmt = (format or ("csv" if str(path).lower().endswith(".csv") else "satbin")).lower()
    if fmt == "satbin":
        return _load_satbin(path)
    if fmt == "csv":
        return _load_csv(path)
    raise ValueError(f"unknown dataset format {format!r}")


def _load_satbin(path) -> Dataset:
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < _HEADER.size:
        raise TruncationError("file shorter than the SATBIN header", len(data))
    magic, version, width, height, bands, class_count, count = _HEADER.unpack_from(data)
    if magic != SATBIN_MAGIC:
        raise FormatError(f"bad magic {magic!r}, expected {SATBIN_MAGIC!r}")
    if version != SATBIN_VERSION:
        raise FormatError(f"unsupported SATBIN version {version}")
    if width == 0 or height == 0 or bands == 0:
        raise FormatError("zero patch dimensions in header")
    record_size = 1 + bands * width * height
    expected = _HEADER.size + count * record_size
    if len(data) < expected:
        raise TruncationError(
            f"payload truncated: expected {expected} bytes for {count} records", len(data)
        )
    if len(data) > expected:
        raise FormatError(f"{len(data) - expected} trailing bytes after the last record")
    records = np.frombuffer(data, dtype=np.uint8, offset=_HEADER.size).reshape(count, record_size)
    labels = records[:, 0].astype(np.int64)
    if count and labels.max() >= class_count:
        raise LabelError(
            f"label {labels.max()} >= class count {class_count} "
            f"(first bad record {int(np.argmax(labels >= class_count))})"
        )
    patches = records[:, 1:].reshape(count, bands, height, width).copy()
    return Dataset(patches, labels, ClassScheme.from_class_count(class_count))


def _load_csv(path) -> Dataset:
    pixel_count = PATCH_BANDS * PATCH_HEIGHT * PATCH_WIDTH
    expected_header = ["label"] + [f"px_{i}" for i in range(pixel_count)]
    patches, labels = [], []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header != expected_header:
            raise FormatError("CSV header must be label,px_0,...,px_3135")
        for row_no, row in enumerate(reader):
            if len(row) != 1 + pixel_count:
                raise FormatError(f"row {row_no} has {len(row)} fields, expected {1 + pixel_count}")
            try:
                values = [int(v) for v in row]
            except ValueError as exc:
                raise FormatError(f"row {row_no}: non-integer value") from exc
            if values[0] < 0 or any(not 0 <= v <= 255 for v in values[1:]):
                raise FormatError(f"row {row_no}: values outside byte range")
            labels.append(values[0])
            patches.append(values[1:])
    n = len(labels)
    arr = np.asarray(patches, dtype=np.uint8).reshape(n, PATCH_BANDS, PATCH_HEIGHT, PATCH_WIDTH)
    labels_arr = np.asarray(labels, dtype=np.int64)
    class_count = int(labels_arr.max()) + 1 if n else 0
    return Dataset(arr, labels_arr, ClassScheme.from_class_count(class_count))


def save_dataset(dataset: Dataset, path, format: str = "satbin") -> None:
    """Write a dataset to its native SATBIN container."""
    if format.lower() != "satbin":
        raise ValueError("save_dataset writes SATBIN only; see save_dataset_csv")
    n, bands, height, width = dataset.patches.shape
    header = _HEADER.pack(
        SATBIN_MAGIC, SATBIN_VERSION, width, height, bands, dataset.scheme.class_count, n
    )
    records = np.empty((n, 1 + bands * height * width), dtype=np.uint8)
    records[:, 0] = dataset.labels
    records[:, 1:] = dataset.patches.reshape(n, bands * height * width)
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(records.tobytes())


def save_dataset_csv(dataset: Dataset, path) -> None:
    """Write the CSV alternative container (fixed 4x28x28 geometry)."""
    n, bands, height, width = dataset.patches.shape
    if (bands, height, width) != (PATCH_BANDS, PATCH_HEIGHT, PATCH_WIDTH):
        raise ValueError("CSV container is fixed to 4x28x28 patches")
    flat = dataset.patches.reshape(n, -1)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["label"] + [f"px_{i}" for i in range(flat.shape[1])])
        for label, row in zip(dataset.labels, flat):
            writer.writerow([int(label)] + row.tolist())
