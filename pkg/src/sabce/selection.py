"""Feature ranking by sparse-layer weight magnitude, elbow cut-off and
selection stability."""
from __future__ import annotations

import csv
import itertools
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

from .errors import DataError

# relative threshold under which the sorted curve counts as a straight line
COLLINEAR_RTOL = 1e-12


@dataclass(frozen=True)
class FeatureRanking:
    order: np.ndarray
    magnitudes: np.ndarray
    feature_names: tuple[str, ...]
    elbow_index: int | None = None
    selected: frozenset[int] = frozenset()
    collinear: bool = False

    @property
    def n_selected(self) -> int:
        return len(self.selected)


def rank_features(spl, names: Sequence[str] | None = None) -> FeatureRanking:
    """Sort features by |weight| descending; ties keep ascending feature index."""
    mags = np.abs(np.asarray(spl, dtype=np.float64))
    order = np.lexsort((np.arange(mags.size), -mags))
    if names is None:
        names = [f"f{j}" for j in range(mags.size)]
    return FeatureRanking(order, mags[order], tuple(names))


def elbow_distances(magnitudes, normalize: bool = False) -> np.ndarray:
    """Perpendicular distance of each (rank, value) point to the end-to-end chord."""
    y = np.asarray(magnitudes, dtype=np.float64)
    n = y.size
    x = np.arange(n, dtype=np.float64)
    if normalize:
        x = x / (n - 1)
        span = y[0] - y[-1]
        y = (y - y[-1]) / span if span > 0 else np.zeros_like(y)
    dx, dy = x[-1] - x[0], y[-1] - y[0]
    cross = np.abs(dx * (y[0] - y) - (x[0] - x) * dy)
    return cross / np.hypot(dx, dy)


def elbow_cutoff(magnitudes, normalize: bool = False) -> tuple[int, bool]:
    """Return ``(elbow_index, collinear)`` for a nonincreasing curve.

    ``collinear`` is True when no point sits measurably off the chord; the
    index is then 0.
    """
    y = np.asarray(magnitudes, dtype=np.float64)
    if y.size < 3:
        raise ValueError("elbow undefined for fewer than 3 points")
    dist = elbow_distances(y, normalize)
    scale = max(float(np.max(np.abs(y))), 1.0 if normalize else 0.0, 1e-300)
    if dist.max() <= COLLINEAR_RTOL * scale:
        return 0, True
    return int(np.argmax(dist)), False


def apply_elbow(ranking: FeatureRanking, normalize: bool = False) -> FeatureRanking:
    """Select every feature strictly above the elbow magnitude.

    A collinear curve or one too short for an elbow selects all features.
    """
    d = ranking.magnitudes.size
    try:
        idx, collinear = elbow_cutoff(ranking.magnitudes, normalize)
    except ValueError:
        return replace(ranking, elbow_index=None, selected=frozenset(range(d)), collinear=True)
    if collinear:
        selected = frozenset(int(j) for j in ranking.order)
    else:
        keep = ranking.magnitudes > ranking.magnitudes[idx]
        selected = frozenset(int(j) for j in ranking.order[keep])
    return replace(ranking, elbow_index=idx, selected=selected, collinear=collinear)


def select_features(spl, names=None, normalize: bool = False) -> FeatureRanking:
    return apply_elbow(rank_features(spl, names), normalize)


def top_k(ranking: FeatureRanking, k: int) -> list[int]:
    d = ranking.order.size
    if k > d or k < 0:
        raise DataError(f"top_k: k={k} outside 0..{d}")
    return [int(j) for j in ranking.order[:k]]


def jaccard_stability(sets: Sequence[set]) -> float:
    """Multiway Jaccard index |intersection| / |union|."""
    sets = [set(s) for s in sets]
    if len(sets) < 2:
        raise ValueError("need at least 2 feature sets")
    union = set().union(*sets)
    if not union:
        raise ValueError("Jaccard index undefined for an empty union")
    return len(set.intersection(*sets)) / len(union)


def pairwise_overlap(sets: Sequence[set]) -> np.ndarray:
    """Matrix of pairwise intersection sizes (diagonal = set sizes)."""
    sets = [set(s) for s in sets]
    out = np.zeros((len(sets), len(sets)), dtype=np.int64)
    for i, j in itertools.product(range(len(sets)), repeat=2):
        out[i, j] = len(sets[i] & sets[j])
    return out


def write_ranking_csv(ranking: FeatureRanking, path):
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rank", "feature_index", "feature_name", "abs_weight", "selected"])
        for r, (j, m) in enumerate(zip(ranking.order, ranking.magnitudes)):
            w.writerow([r, int(j), ranking.feature_names[j], repr(float(m)),
                        int(int(j) in ranking.selected)])


def read_ranking_csv(path) -> FeatureRanking:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.DictReader(fh))
    order = np.array([int(r["feature_index"]) for r in rows])
    mags = np.array([float(r["abs_weight"]) for r in rows])
    names = [""] * len(rows)
    for r in rows:
        names[int(r["feature_index"])] = r["feature_name"]
    selected = frozenset(int(r["feature_index"]) for r in rows if r["selected"] == "1")
    return FeatureRanking(order, mags, tuple(names), selected=selected)


def write_sparsity_curve(ranking: FeatureRanking, path):
    lines = ["rank,abs_weight"] + [f"{r},{float(m)!r}" for r, m in enumerate(ranking.magnitudes)]
    Path(path).write_text("\n".join(lines) + "\n")
