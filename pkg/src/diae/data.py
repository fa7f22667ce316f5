"""Dataset ingestion: IDX binaries, delimited text tables, one-hot encoding
and deterministic stratified subsetting.

Image datasets load as float64 matrices with one flattened sample per
column, pixel values scaled into [0, 1].
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .validation import DimensionMismatchError, as_label_vector, as_matrix

__all__ = [
    "Dataset",
    "DataFormatError",
    "load_idx",
    "write_idx_images",
    "write_idx_labels",
    "load_delimited",
    "one_hot",
    "subset",
]

IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DataFormatError(ValueError):
    """Raised on malformed dataset files."""


@dataclass(frozen=True)
class Dataset:
    """Feature matrix (features x samples) plus per-sample class ids."""

    X: np.ndarray
    labels: np.ndarray
    name: str = ""
    image_dims: tuple[int, int] | None = None

    def __post_init__(self):
        X = as_matrix(self.X, "X", allow_empty_cols=True)
        labels = as_label_vector(self.labels, "labels")
        if X.shape[1] != labels.shape[0]:
            raise DimensionMismatchError(
                f"X has {X.shape[1]} columns but {labels.shape[0]} labels given"
            )
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "labels", labels)

    @property
    def n_features(self) -> int:
        return self.X.shape[0]

    @property
    def n_samples(self) -> int:
        return self.X.shape[1]

    @property
    def n_classes(self) -> int:
        return int(self.labels.max()) + 1 if self.labels.size else 0


# ---------------------------------------------------------------------------
# IDX binary format


def _read_exact(f, n: int, what: str) -> bytes:
    chunk = f.read(n)
    if len(chunk) != n:
        raise DataFormatError(f"truncated IDX file: expected {n} bytes for {what}")
    return chunk


def load_idx(images_path, labels_path, name: str = "") -> Dataset:
    """Parse an IDX image/label file pair.

    Image files start with big-endian magic ``0x00000803`` followed by
    big-endian 32-bit sample, row and column counts and the raw unsigned
    pixel bytes; label files use magic ``0x00000801``.  Pixels are scaled
    by 1/255 and each image becomes one column.
    """
    with open(images_path, "rb") as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, "image magic"))
        if magic != IDX_IMAGE_MAGIC:
            raise DataFormatError(
                f"bad image file magic 0x{magic:08x}, expected 0x{IDX_IMAGE_MAGIC:08x}"
            )
        n, rows, cols = struct.unpack(">III", _read_exact(f, 12, "image header"))
        raw = _read_exact(f, n * rows * cols, "pixel data")
        if f.read(1):
            raise DataFormatError("trailing bytes after pixel data")
    with open(labels_path, "rb") as f:
        (magic,) = struct.unpack(">I", _read_exact(f, 4, "label magic"))
        if magic != IDX_LABEL_MAGIC:
            raise DataFormatError(
                f"bad label file magic 0x{magic:08x}, expected 0x{IDX_LABEL_MAGIC:08x}"
            )
        (n_labels,) = struct.unpack(">I", _read_exact(f, 4, "label count"))
        label_raw = _read_exact(f, n_labels, "label data")
        if f.read(1):
            raise DataFormatError("trailing bytes after label data")
    if n != n_labels:
        raise DataFormatError(
            f"image file holds {n} samples but label file holds {n_labels}"
        )
    pixels = np.frombuffer(raw, dtype=np.uint8).reshape(n, rows * cols)
    X = (pixels.astype(np.float64) / 255.0).T
    labels = np.frombuffer(label_raw, dtype=np.uint8).astype(np.int64)
    return Dataset(X=X, labels=labels, name=name, image_dims=(rows, cols))


def write_idx_images(path, images: np.ndarray) -> None:
    """Write a (n, rows, cols) uint8 array as an IDX image file."""
    arr = np.ascontiguousarray(images, dtype=np.uint8)
    if arr.ndim != 3:
        raise ValueError(f"images must be (n, rows, cols), got shape {arr.shape}")
    n, rows, cols = arr.shape
    with open(path, "wb") as f:
        f.write(struct.pack(">IIII", IDX_IMAGE_MAGIC, n, rows, cols))
        f.write(arr.tobytes())


def write_idx_labels(path, labels) -> None:
    """Write class ids (all < 256) as an IDX label file."""
    arr = as_label_vector(labels, "labels")
    if arr.size and arr.max() > 255:
        raise ValueError("IDX label files store single bytes; labels must be < 256")
    with open(path, "wb") as f:
        f.write(struct.pack(">II", IDX_LABEL_MAGIC, arr.shape[0]))
        f.write(arr.astype(np.uint8).tobytes())


# ---------------------------------------------------------------------------
# Delimited text


def load_delimited(path, delimiter: str = ",", label_column: int = 0,
                   name: str = "", scale: bool = True, skiprows: int = 0) -> Dataset:
    """Load a rectangular numeric table, one sample per row.

    The designated column holds integer class ids; the remaining columns are
    features.  With ``scale=True`` features are divided by the largest
    absolute value in the table (all-zero tables are left untouched), which
    puts image exports in [0, 1]; pass ``scale=False`` to read values back
    verbatim, e.g. when re-importing exported feature files.
    """
    rows: list[list[float]] = []
    labels: list[int] = []
    width: int | None = None
    with open(path, "r", encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            if lineno <= skiprows:
                continue
            line = line.strip()
            if not line:
                continue
            cells = line.split(delimiter)
            if width is None:
                width = len(cells)
                if width < 2:
                    raise DataFormatError(
                        f"row {lineno}: need at least 2 columns (features + label)"
                    )
                col = label_column if label_column >= 0 else width + label_column
                if not (0 <= col < width):
                    raise DataFormatError(
                        f"label column {label_column} out of range for {width} columns"
                    )
            elif len(cells) != width:
                raise DataFormatError(
                    f"row {lineno}: expected {width} cells, got {len(cells)}"
                )
            try:
                values = [float(c) for c in cells]
            except ValueError as exc:
                raise DataFormatError(f"row {lineno}: non-numeric cell ({exc})") from exc
            label = values.pop(col)
            if label != int(label) or label < 0:
                raise DataFormatError(
                    f"row {lineno}: label {label!r} is not a non-negative integer"
                )
            labels.append(int(label))
            rows.append(values)
    if not rows:
        raise DataFormatError(f"{path}: no data rows found")
    X = np.asarray(rows, dtype=np.float64).T
    if scale:
        peak = np.abs(X).max() if X.size else 0.0
        if peak > 0:
            X = X / peak
    return Dataset(X=X, labels=np.asarray(labels, dtype=np.int64), name=name)


# ---------------------------------------------------------------------------
# Labels and subsetting


def one_hot(labels, n_classes: int) -> np.ndarray:
    """Class-indicator matrix with a single 1 per column."""
    y = as_label_vector(labels, "labels")
    if y.size == 0:
        raise ValueError("cannot one-hot encode an empty label list")
    if n_classes < 1:
        raise ValueError("n_classes must be positive")
    if y.max() >= n_classes:
        raise ValueError(
            f"label {int(y.max())} out of range for {n_classes} classes"
        )
    L = np.zeros((n_classes, y.shape[0]))
    L[y, np.arange(y.shape[0])] = 1.0
    return L


def subset(ds: Dataset, n: int, seed: int) -> Dataset:
    """Deterministic stratified sample of ``n`` items without replacement.

    Per-class counts follow the largest-remainder rule, so proportions are
    preserved to within one sample per class.
    """
    if not (0 <= n <= ds.n_samples):
        raise ValueError(f"n must lie in [0, {ds.n_samples}], got {n}")
    classes, class_counts = np.unique(ds.labels, return_counts=True)
    quotas = n * class_counts / ds.n_samples
    base = np.floor(quotas).astype(np.int64)
    remainder = n - int(base.sum())
    if remainder:
        # Largest fractional parts win the leftover slots; ties to lower ids.
        order = np.lexsort((classes, -(quotas - base)))
        base[order[:remainder]] += 1
    rng = np.random.default_rng(seed)
    picks = []
    for c, count in zip(classes, base):
        idx = np.flatnonzero(ds.labels == c)
        picks.append(rng.choice(idx, size=count, replace=False))
    chosen = np.concatenate(picks) if picks else np.empty(0, dtype=np.int64)
    rng.shuffle(chosen)
    return Dataset(X=ds.X[:, chosen], labels=ds.labels[chosen],
                   name=ds.name, image_dims=ds.image_dims)
