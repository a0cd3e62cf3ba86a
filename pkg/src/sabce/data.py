"""Datasets, CSV ingestion, stratified splits, class centroids and the
planted-feature synthetic generator."""
from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError
from .numerics import make_rng

MISSING_TOKENS = {"", "?", "na", "nan", "NA", "NaN", "null"}


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray
    labels: np.ndarray
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]
    # positions of these rows in the dataset they were split from
    indices: np.ndarray | None = field(default=None, compare=False)

    def __post_init__(self):
        x = np.asarray(self.x, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if x.ndim != 2:
            raise DataError(f"x must be 2-D, got shape {x.shape}")
        if labels.shape != (x.shape[0],):
            raise DataError(f"labels length {labels.shape} does not match {x.shape[0]} rows")
        if len(self.feature_names) != x.shape[1]:
            raise DataError("feature_names length does not match column count")
        if not np.all(np.isfinite(x)):
            raise DataError("x contains NaN or Inf")
        if labels.size and (labels.min() < 0 or labels.max() >= len(self.class_names)):
            raise DataError("labels outside 0..M-1")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "feature_names", tuple(self.feature_names))
        object.__setattr__(self, "class_names", tuple(self.class_names))
        if self.indices is None:
            object.__setattr__(self, "indices", np.arange(x.shape[0]))

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def n_classes(self) -> int:
        return len(self.class_names)

    def check_all_classes(self):
        counts = np.bincount(self.labels, minlength=self.n_classes)
        missing = [self.class_names[j] for j in np.flatnonzero(counts == 0)]
        if missing:
            raise DataError(f"classes without samples: {missing}")

    def subset(self, rows) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.x[rows], self.labels[rows], self.feature_names,
                       self.class_names, indices=self.indices[rows])

    def with_x(self, x: np.ndarray) -> "Dataset":
        return Dataset(x, self.labels, self.feature_names, self.class_names,
                       indices=self.indices)

    def select_features(self, cols: Sequence[int]) -> "Dataset":
        cols = list(cols)
        return Dataset(self.x[:, cols], self.labels,
                       [self.feature_names[c] for c in cols], self.class_names,
                       indices=self.indices)

    def with_labels(self, labels) -> "Dataset":
        return Dataset(self.x, labels, self.feature_names, self.class_names,
                       indices=self.indices)


def _label_index(header: list[str], label_column) -> int:
    if isinstance(label_column, int):
        idx = label_column if label_column >= 0 else len(header) + label_column
    elif isinstance(label_column, str) and label_column.lstrip("-").isdigit() \
            and label_column not in header:
        return _label_index(header, int(label_column))
    else:
        if label_column not in header:
            raise DataError(f"label column {label_column!r} not in header")
        idx = header.index(label_column)
    if not 0 <= idx < len(header):
        raise DataError(f"label column index {label_column} out of range")
    return idx


def load_csv(path, label_column=-1, impute_missing: bool = False) -> Dataset:
    """Read a comma-separated numeric table with a header row.

    Labels are re-encoded to 0..M-1 in order of first appearance. Missing
    cells (empty, ``?``, ``NA``...) are replaced by the column mean over the
    non-missing rows when ``impute_missing`` is set.
    """
    path = Path(path)
    if not path.exists():
        raise DataError(f"no such file: {path}")
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise DataError(f"{path}: empty file")
    header, body = rows[0], [r for r in rows[1:] if r]
    li = _label_index(header, label_column)
    feature_names = [h for j, h in enumerate(header) if j != li]
    x = np.empty((len(body), len(feature_names)))
    raw_labels = []
    for r, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise DataError(f"{path}: row {r} has {len(row)} cells, header has {len(header)}")
        raw_labels.append(row[li].strip())
        c = 0
        for j, cell in enumerate(row):
            if j == li:
                continue
            cell = cell.strip()
            if cell in MISSING_TOKENS:
                if not impute_missing:
                    raise DataError(f"{path}: missing value at row {r}, column {header[j]!r}")
                x[r - 2, c] = np.nan
            else:
                try:
                    x[r - 2, c] = float(cell)
                except ValueError:
                    raise DataError(f"{path}: cannot parse {cell!r} at row {r}, "
                                    f"column {header[j]!r}") from None
            c += 1

    if impute_missing:
        x = impute_column_means(x)

    class_names: list[str] = []
    lookup: dict[str, int] = {}
    labels = np.empty(len(raw_labels), dtype=np.int64)
    for i, lab in enumerate(raw_labels):
        if lab not in lookup:
            lookup[lab] = len(class_names)
            class_names.append(lab)
        labels[i] = lookup[lab]
    if len(class_names) < 2:
        raise DataError(f"{path}: need at least two classes, found {len(class_names)}")
    return Dataset(x, labels, feature_names, class_names)


def impute_column_means(x: np.ndarray) -> np.ndarray:
    x = np.array(x, dtype=np.float64)
    miss = np.isnan(x)
    if not miss.any():
        return x
    for c in np.flatnonzero(miss.any(axis=0)):
        present = x[~miss[:, c], c]
        if present.size == 0:
            raise DataError(f"column {c} has no observed values to impute from")
        x[miss[:, c], c] = present.mean()
    return x


def write_csv(ds: Dataset, path, label_name: str = "label"):
    """Write ``ds`` so that ``load_csv(path, label_name)`` reproduces it."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow([*ds.feature_names, label_name])
        for row, lab in zip(ds.x, ds.labels):
            w.writerow([repr(float(v)) for v in row] + [ds.class_names[lab]])


@dataclass
class CentroidSet:
    base: np.ndarray
    adapted: np.ndarray
    epoch_stamp: int = 0

    def adapt(self, spl: np.ndarray, epoch: int) -> "CentroidSet":
        """Sparsify the ambient centroids by the sparse-layer weights (signed)."""
        return CentroidSet(self.base, self.base * spl[None, :], epoch)

    def reset(self) -> "CentroidSet":
        return CentroidSet(self.base, self.base.copy(), self.epoch_stamp)


def compute_centroids(ds: Dataset) -> CentroidSet:
    ds.check_all_classes()
    onehot = np.zeros((ds.n, ds.n_classes))
    onehot[np.arange(ds.n), ds.labels] = 1.0
    base = (onehot.T @ ds.x) / onehot.sum(axis=0)[:, None]
    return CentroidSet(base, base.copy(), 0)


@dataclass(frozen=True)
class SplitSpec:
    fractions: tuple[float, float, float] = (0.5, 0.0, 0.5)
    stratified: bool = True
    seed: int = 0

    def __post_init__(self):
        f = tuple(float(v) for v in self.fractions)
        if len(f) != 3 or any(v < 0 or v > 1 for v in f) or abs(sum(f) - 1) > 1e-9:
            raise DataError(f"split fractions must be three values in [0,1] summing to 1: {f}")
        object.__setattr__(self, "fractions", f)


def _largest_remainder(total: int, fractions) -> np.ndarray:
    exact = total * np.asarray(fractions)
    counts = np.floor(exact).astype(np.int64)
    short = total - counts.sum()
    # ties go to the earlier partition
    order = sorted(range(len(exact)), key=lambda p: (-(exact[p] - counts[p]), p))
    for p in order[:short]:
        counts[p] += 1
    return counts


def _stratified_counts(class_sizes: np.ndarray, fractions) -> np.ndarray:
    """Per-class partition counts (M x 3).

    Each class gets floor(n_c * f_p) plus at most one extra slot per
    partition, and partition totals follow largest-remainder rounding of
    N * f_p, so per-class counts stay within one sample of the request.
    """
    f = np.asarray(fractions)
    exact = class_sizes[:, None] * f[None, :]
    counts = np.floor(exact).astype(np.int64)
    frac = exact - counts
    need_row = class_sizes - counts.sum(axis=1)
    need_col = _largest_remainder(int(class_sizes.sum()), f) - counts.sum(axis=0)
    extra = np.zeros_like(counts)
    # greedy Gale-Ryser fill: biggest column demand first, rows with most need
    for p in sorted(range(3), key=lambda p: -need_col[p]):
        cand = [c for c in range(len(class_sizes)) if need_row[c] > 0 and f[p] > 0]
        cand.sort(key=lambda c: (-need_row[c], -frac[c, p], c))
        for c in cand[:max(need_col[p], 0)]:
            extra[c, p] = 1
            need_row[c] -= 1
    # leftovers (infeasible greedy); put them where the remainder is largest
    for c in np.flatnonzero(need_row > 0):
        for p in sorted(range(3), key=lambda p: (-frac[c, p], p)):
            if need_row[c] == 0:
                break
            if f[p] > 0 and extra[c, p] == 0:
                extra[c, p] = 1
                need_row[c] -= 1
    return counts + extra


def split_indices(labels: np.ndarray, spec: SplitSpec) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    labels = np.asarray(labels)
    rng = make_rng(spec.seed)
    n = labels.size
    nonempty = [p for p in range(3) if spec.fractions[p] > 0]
    parts: list[list[np.ndarray]] = [[], [], []]
    if not spec.stratified:
        perm = rng.permutation(n)
        cuts = np.cumsum(_largest_remainder(n, spec.fractions))
        return perm[:cuts[0]], perm[cuts[0]:cuts[1]], perm[cuts[1]:]

    classes = np.unique(labels)
    sizes = np.array([np.sum(labels == c) for c in classes])
    small = [int(c) for c, s in zip(classes, sizes) if s < len(nonempty)]
    if small:
        raise DataError(f"classes {small} have fewer samples than the "
                        f"{len(nonempty)} nonempty partitions")
    counts = _stratified_counts(sizes, spec.fractions)
    for row, c in enumerate(classes):
        # every nonempty partition must see every class
        for p in nonempty:
            if counts[row, p] == 0:
                donor = int(np.argmax(counts[row]))
                counts[row, donor] -= 1
                counts[row, p] += 1
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        start = 0
        for p in range(3):
            parts[p].append(idx[start:start + counts[row, p]])
            start += counts[row, p]
    return tuple(np.sort(np.concatenate(p)).astype(np.int64) for p in parts)


def split(ds: Dataset, spec: SplitSpec) -> tuple[Dataset, Dataset, Dataset]:
    tr, va, te = split_indices(ds.labels, spec)
    return ds.subset(tr), ds.subset(va), ds.subset(te)


def kfold_indices(labels: np.ndarray, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Stratified k-fold (train_idx, held_idx) pairs."""
    labels = np.asarray(labels)
    rng = make_rng(seed)
    fold_of = np.empty(labels.size, dtype=np.int64)
    offset = 0
    for c in np.unique(labels):
        idx = np.flatnonzero(labels == c)
        idx = idx[rng.permutation(idx.size)]
        fold_of[idx] = (np.arange(idx.size) + offset) % k
        offset += idx.size
    out = []
    for f in range(k):
        out.append((np.flatnonzero(fold_of != f), np.flatnonzero(fold_of == f)))
    return out


def make_synthetic(n_per_class: int, d: int, informative: Sequence[int], shift: float,
                   noise_std: float, seed: int) -> tuple[Dataset, list[int]]:
    """Two Gaussian classes that differ only on ``informative`` columns.

    Returns the dataset and the sorted list of informative column indices
    (the ground truth).
    """
    informative = sorted(set(int(i) for i in informative))
    if any(i < 0 or i >= d for i in informative):
        raise DataError("informative indices must lie in 0..d-1")
    rng = make_rng(seed)
    x = rng.standard_normal((2 * n_per_class, d)) * noise_std
    labels = np.repeat([0, 1], n_per_class)
    x[n_per_class:, informative] += shift
    names = [f"f{j}" for j in range(d)]
    return Dataset(x, labels, names, ("class0", "class1")), informative


def planted_fixture(seed: int, n_per_class: int = 200, d: int = 100, n_informative: int = 10,
                    shift: float = 3.0, noise_std: float = 1.0,
                    extra_noise: int = 0, extra_noise_scale: float = 3.0) -> tuple[Dataset, list[int]]:
    """The standard planted-feature fixture: informative columns are 0..n_informative-1.

    ``extra_noise`` appends that many pure-noise columns with standard
    deviation ``extra_noise_scale * noise_std``.
    """
    ds, truth = make_synthetic(n_per_class, d, range(n_informative), shift, noise_std, seed)
    if extra_noise:
        rng = make_rng(seed + 1_000_003)
        extra = rng.standard_normal((ds.n, extra_noise)) * noise_std * extra_noise_scale
        names = list(ds.feature_names) + [f"f{d + j}" for j in range(extra_noise)]
        ds = Dataset(np.hstack([ds.x, extra]), ds.labels, names, ds.class_names)
    return ds, truth


def write_ground_truth(indices: Sequence[int], path):
    Path(path).write_text("".join(f"{i}\n" for i in indices))


def read_ground_truth(path) -> list[int]:
    return [int(line) for line in Path(path).read_text().split()]
