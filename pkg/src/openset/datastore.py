"""Dataset container, synthetic generators, CSV/IDX loaders, open-set splitting."""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .gradcore import Array

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


@dataclass
class LabeledSet:
    features: Array                       # N x D float64
    labels: Array                         # N int64
    class_names: list[str] | None = None

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=np.float64)
        if self.features.ndim != 2:
            raise ValueError(f"features must be 2-D, got shape {self.features.shape}")
        self.labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        if self.labels.shape[0] != self.features.shape[0]:
            raise ValueError(
                f"{self.labels.shape[0]} labels for {self.features.shape[0]} feature rows"
            )
        if self.labels.size and self.labels.min() < 0:
            raise ValueError("labels must be nonnegative")
        if self.class_names is not None and self.labels.size:
            if self.labels.max() >= len(self.class_names):
                raise ValueError(
                    f"label {self.labels.max()} exceeds the {len(self.class_names)} declared classes"
                )

    def __len__(self) -> int:
        return self.features.shape[0]

    @property
    def dim(self) -> int:
        return self.features.shape[1]

    def subset(self, indices) -> LabeledSet:
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledSet(self.features[idx].copy(), self.labels[idx].copy(), self.class_names)


@dataclass
class OpenSplit:
    """Which classes are known/unknown and how known rows are partitioned."""

    known_class_ids: list[int]
    unknown_class_ids: list[int] = field(default_factory=list)
    val_fraction: float = 0.1
    test_fraction: float = 0.3
    seed: int = 0

    def __post_init__(self):
        self.known_class_ids = [int(c) for c in self.known_class_ids]
        self.unknown_class_ids = [int(c) for c in self.unknown_class_ids]
        if len(self.known_class_ids) < 2:
            raise ValueError("need at least 2 known classes")
        if len(set(self.known_class_ids)) != len(self.known_class_ids):
            raise ValueError("duplicate known class ids")
        overlap = set(self.known_class_ids) & set(self.unknown_class_ids)
        if overlap:
            raise ValueError(f"classes cannot be both known and unknown: {sorted(overlap)}")
        if not 0.0 < self.val_fraction < 1.0:
            raise ValueError(f"val_fraction must be in (0, 1), got {self.val_fraction}")
        if not 0.0 < self.test_fraction < 1.0:
            raise ValueError(f"test_fraction must be in (0, 1), got {self.test_fraction}")
        if self.val_fraction + self.test_fraction >= 1.0:
            raise ValueError("val_fraction + test_fraction must leave room for training rows")


@dataclass
class Standardization:
    """Per-dimension affine transform fitted on training rows only."""

    mean: Array
    std: Array

    def apply(self, features) -> Array:
        return (np.asarray(features, dtype=np.float64) - self.mean) / self.std


def fit_standardization(features) -> Standardization:
    x = np.asarray(features, dtype=np.float64)
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    std = np.where(std < 1e-12, 1.0, std)
    return Standardization(mean, std)


def gen_gaussian_blobs(num_classes: int, per_class: int, dim: int = 2,
                       center_scale: float = 4.0, spread: float = 0.6,
                       seed: int = 0) -> LabeledSet:
    """Class centers uniform in [-center_scale, center_scale]^dim, points
    Gaussian around their center with standard deviation `spread`."""
    if num_classes < 1 or per_class < 1 or dim < 1:
        raise ValueError("num_classes, per_class, and dim must be positive")
    rng = np.random.default_rng(seed)
    centers = rng.uniform(-center_scale, center_scale, size=(num_classes, dim))
    features = np.empty((num_classes * per_class, dim))
    labels = np.empty(num_classes * per_class, dtype=np.int64)
    for c in range(num_classes):
        block = slice(c * per_class, (c + 1) * per_class)
        features[block] = centers[c] + spread * rng.standard_normal((per_class, dim))
        labels[block] = c
    return LabeledSet(features, labels)


def gen_rings(num_classes: int, per_class: int, noise: float = 0.05, seed: int = 0) -> LabeledSet:
    """Concentric 2-D circles, class c at radius c+1, with radial Gaussian noise."""
    if num_classes < 1 or per_class < 1:
        raise ValueError("num_classes and per_class must be positive")
    if noise < 0:
        raise ValueError(f"noise must be nonnegative, got {noise}")
    rng = np.random.default_rng(seed)
    features = np.empty((num_classes * per_class, 2))
    labels = np.empty(num_classes * per_class, dtype=np.int64)
    for c in range(num_classes):
        angles = rng.uniform(0.0, 2.0 * math.pi, size=per_class)
        radii = (c + 1.0) + noise * rng.standard_normal(per_class)
        block = slice(c * per_class, (c + 1) * per_class)
        features[block, 0] = radii * np.cos(angles)
        features[block, 1] = radii * np.sin(angles)
        labels[block] = c
    return LabeledSet(features, labels)


def load_csv(path) -> LabeledSet:
    """Each data line: D decimal features then an integer label, comma-separated.
    An optional non-numeric header line is skipped. Line numbers in errors are
    1-based file lines."""
    with open(path, "r", encoding="utf-8") as f:
        lines = f.read().splitlines()
    rows: list[list[float]] = []
    labels: list[int] = []
    width: int | None = None
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        cells = [c.strip() for c in line.split(",")]
        if width is None:
            try:
                [float(c) for c in cells]
            except ValueError:
                continue  # header
        if len(cells) < 2:
            raise ValueError(f"line {lineno}: need at least one feature and a label")
        if width is not None and len(cells) != width + 1:
            raise ValueError(f"line {lineno}: expected {width} features, got {len(cells) - 1}")
        try:
            feats = [float(c) for c in cells[:-1]]
            label = int(cells[-1])
        except ValueError as exc:
            raise ValueError(f"line {lineno}: non-numeric cell ({exc})") from None
        if width is None:
            width = len(feats)
        rows.append(feats)
        labels.append(label)
    if not rows:
        raise ValueError(f"no data rows in {path}")
    return LabeledSet(np.array(rows), np.array(labels))


def save_csv(dataset: LabeledSet, path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(",".join([f"f{i}" for i in range(dataset.dim)] + ["label"]) + "\n")
        for row, label in zip(dataset.features, dataset.labels):
            f.write(",".join(repr(float(v)) for v in row) + f",{int(label)}\n")


def _read_idx_header(data: bytes, path, magic: int, num_dims: int) -> tuple[list[int], int]:
    header_len = 4 * (1 + num_dims)
    if len(data) < header_len:
        raise ValueError(f"{path}: truncated IDX header")
    fields = struct.unpack(f">{1 + num_dims}I", data[:header_len])
    if fields[0] != magic:
        raise ValueError(f"{path}: bad IDX magic 0x{fields[0]:08x}, expected 0x{magic:08x}")
    return list(fields[1:]), header_len


def load_idx(images_path, labels_path) -> LabeledSet:
    """MNIST-style big-endian IDX pair. Pixels are scaled to [0, 1] and
    flattened row-major."""
    with open(images_path, "rb") as f:
        image_data = f.read()
    with open(labels_path, "rb") as f:
        label_data = f.read()
    (n_img, rows, cols), offset = _read_idx_header(image_data, images_path, IDX_IMAGE_MAGIC, 3)
    (n_lab,), lab_offset = _read_idx_header(label_data, labels_path, IDX_LABEL_MAGIC, 1)
    if n_img != n_lab:
        raise ValueError(f"count mismatch: {n_img} images vs {n_lab} labels")
    n_pixels = n_img * rows * cols
    if len(image_data) - offset != n_pixels:
        raise ValueError(
            f"{images_path}: expected {n_pixels} pixel bytes, got {len(image_data) - offset}"
        )
    if len(label_data) - lab_offset != n_lab:
        raise ValueError(
            f"{labels_path}: expected {n_lab} label bytes, got {len(label_data) - lab_offset}"
        )
    pixels = np.frombuffer(image_data, dtype=np.uint8, offset=offset)
    features = pixels.reshape(n_img, rows * cols).astype(np.float64) / 255.0
    labels = np.frombuffer(label_data, dtype=np.uint8, offset=lab_offset).astype(np.int64)
    return LabeledSet(features, labels)


def split_known_unknown(dataset: LabeledSet, split: OpenSplit) -> tuple[LabeledSet, LabeledSet, LabeledSet]:
    """Partition rows into (train, val, test).

    Known classes are relabeled to contiguous [0, K) by ascending original
    id. Each known class contributes val_fraction of its rows to val and
    test_fraction to test (both rounded down, at least 1), the rest to train.
    Every unknown-class row lands in test with label K. Train and val never
    contain unknown rows.
    """
    present = set(np.unique(dataset.labels).tolist())
    for cls in [*split.known_class_ids, *split.unknown_class_ids]:
        if cls not in present:
            raise ValueError(f"class {cls} not present in the dataset")
    known_sorted = sorted(split.known_class_ids)
    relabel = {orig: new for new, orig in enumerate(known_sorted)}
    k = len(known_sorted)

    rng = np.random.default_rng(split.seed)
    train_idx: list[Array] = []
    val_idx: list[Array] = []
    test_idx: list[Array] = []
    test_labels: list[Array] = []
    for orig in known_sorted:
        rows = np.nonzero(dataset.labels == orig)[0]
        n = rows.size
        if n < 2:
            raise ValueError(f"known class {orig} has {n} rows, need at least 2")
        rows = rows[rng.permutation(n)]
        n_val = max(1, int(split.val_fraction * n))
        n_test = max(1, int(split.test_fraction * n))
        if n_val + n_test >= n:
            raise ValueError(
                f"known class {orig} has {n} rows, too few for val_fraction "
                f"{split.val_fraction} and test_fraction {split.test_fraction}"
            )
        val_idx.append(rows[:n_val])
        test_idx.append(rows[n_val:n_val + n_test])
        test_labels.append(np.full(n_test, relabel[orig], dtype=np.int64))
        train_idx.append(rows[n_val + n_test:])

    def _known_set(chunks: list[Array]) -> LabeledSet:
        idx = np.concatenate(chunks)
        labels = np.array([relabel[c] for c in dataset.labels[idx]], dtype=np.int64)
        return LabeledSet(dataset.features[idx].copy(), labels)

    train = _known_set(train_idx)
    val = _known_set(val_idx)

    unknown_rows = np.nonzero(np.isin(dataset.labels, split.unknown_class_ids))[0]
    test_feature_idx = np.concatenate(test_idx + [unknown_rows]) if len(unknown_rows) else np.concatenate(test_idx)
    all_test_labels = np.concatenate(test_labels + [np.full(unknown_rows.size, k, dtype=np.int64)])
    test = LabeledSet(dataset.features[test_feature_idx].copy(), all_test_labels)
    return train, val, test
