"""Benchmark protocols and analyses built on the trainer.

Every fit (standardizer, encoder, classifier, hyperparameter choice) sees
training or validation rows only; each result carries an :class:`IndexAudit`
so tests can check that no test row was used.
"""
from __future__ import annotations

import csv
import json
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from .classifier import AnnConfig, ann_classify, knn_predict
from .data import Dataset, SplitSpec, kfold_indices, split, split_indices
from .errors import DataError
from .network import encode
from .numerics import derive_seed, fit_standardizer
from .selection import FeatureRanking, jaccard_stability, pairwise_overlap, rank_features, \
    select_features, top_k
from .trainer import Mode, TrainConfig, train


@dataclass
class IndexAudit:
    fit_rows: set[int] = field(default_factory=set)
    test_rows: set[int] = field(default_factory=set)

    def saw(self, ds: Dataset):
        self.fit_rows.update(int(i) for i in ds.indices)

    def tested(self, ds: Dataset):
        self.test_rows.update(int(i) for i in ds.indices)

    @property
    def leaked(self) -> set[int]:
        return self.fit_rows & self.test_rows


@dataclass
class ProtocolResult:
    protocol: str
    k: int
    accuracies: list[float]
    feature_sets: list[list[int]]
    hidden_units: list[int] = field(default_factory=list)
    fractions: tuple[float, float, float] = (0.5, 0.0, 0.5)
    config: dict = field(default_factory=dict)
    audits: list[IndexAudit] = field(default_factory=list, repr=False)

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def sd(self) -> float:
        # population SD so a single repeat reports 0
        return float(np.std(self.accuracies))

    def to_dict(self) -> dict:
        return {"protocol": self.protocol, "k": self.k, "fractions": list(self.fractions),
                "accuracies": self.accuracies, "mean": self.mean, "sd": self.sd,
                "hidden_units": self.hidden_units, "feature_sets": self.feature_sets,
                "config": self.config}


def map_jobs(fn: Callable, jobs: Sequence, n_jobs: int = 1) -> list:
    """Run independent jobs, in order, optionally in worker processes."""
    if n_jobs <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=n_jobs) as pool:
        return list(pool.map(fn, jobs))


def preprocess(train: Dataset, *others: Dataset, method: str = "zscore"):
    """Fit scaling on ``train`` only and apply it to every partition."""
    if method == "none":
        return (train, *others)
    if method == "zscore":
        st = fit_standardizer(train.x)
        return tuple(p.with_x(st.transform(p.x)) for p in (train, *others))
    if method == "minmax":
        lo, hi = train.x.min(axis=0), train.x.max(axis=0)
        span = np.where(hi - lo < 1e-12, 1.0, hi - lo)
        return tuple(p.with_x((p.x - lo) / span) for p in (train, *others))
    raise DataError(f"unknown preprocessing {method!r}")


def fit_ranking(train: Dataset, cfg: TrainConfig) -> FeatureRanking:
    rep = train_fn(train, cfg)
    return select_features(rep.params.spl, train.feature_names)


def train_fn(ds: Dataset, cfg: TrainConfig):
    return train(ds, cfg)


def restrict(ds: Dataset, features: Sequence[int]) -> Dataset:
    # column order fixed by index so K = d reproduces the all-feature run
    return ds.select_features(sorted(features))


def _cv_score(train: Dataset, cfg: TrainConfig, k: int, ann: AnnConfig, folds: int,
              seed: int, method: str, audit: IndexAudit) -> float:
    scores = []
    for f, (tr, held) in enumerate(kfold_indices(train.labels, folds, seed)):
        a, b = preprocess(train.subset(tr), train.subset(held), method=method)
        audit.saw(a)
        audit.saw(b)
        feats = top_k(fit_ranking(a, cfg), min(k, a.d))
        res = ann_classify(restrict(a, feats), None, restrict(b, feats),
                           replace(ann, seed=derive_seed(seed, f)))
        scores.append(res.accuracy)
    return float(np.mean(scores))


def tune_by_cv(train: Dataset, cfg: TrainConfig, candidates: Sequence[dict], k: int,
               ann: AnnConfig, folds: int = 5, seed: int = 0, method: str = "zscore",
               audit: IndexAudit | None = None) -> TrainConfig:
    """Pick the candidate override with the best mean k-fold accuracy."""
    if not candidates:
        return cfg
    audit = audit or IndexAudit()
    scored = []
    for c in candidates:
        cand = cfg.with_overrides(**c)
        scored.append((_cv_score(train, cand, k, ann, folds, seed, method, audit), cand))
    return max(scored, key=lambda s: s[0])[1]


def protocol_experiment1(ds: Dataset, cfg: TrainConfig, ks: Sequence[int] = (10, 50),
                         repeats: int = 20, seed: int = 0, ann: AnnConfig = AnnConfig(),
                         candidates: Sequence[dict] = (), method: str = "zscore",
                         folds: int = 5) -> dict[int, ProtocolResult]:
    """Repeated stratified 50:50 train/test splits.

    Each repeat trains the encoder on the training half, extracts the top-K
    features and scores the classifier on the test half. Optional
    ``candidates`` are tuned once by k-fold CV on the first training half.
    """
    ks = list(ks)
    if max(ks) > ds.d:
        raise DataError(f"K={max(ks)} exceeds d={ds.d}")
    results = {k: ProtocolResult("exp1", k, [], [], fractions=(0.5, 0.0, 0.5)) for k in ks}
    for r in range(repeats):
        rseed = derive_seed(seed, r)
        tr, _, te = split(ds, SplitSpec((0.5, 0.0, 0.5), True, rseed))
        audit = IndexAudit()
        audit.tested(te)
        if r == 0 and candidates:
            cfg = tune_by_cv(tr, cfg, candidates, max(ks), ann, folds, rseed, method, audit)
        tr, te = preprocess(tr, te, method=method)
        audit.saw(tr)
        ranking = fit_ranking(tr, replace(cfg, seed=rseed))
        for k in ks:
            feats = top_k(ranking, k)
            res = ann_classify(restrict(tr, feats), None, restrict(te, feats),
                               replace(ann, seed=derive_seed(rseed, k)))
            out = results[k]
            out.accuracies.append(res.accuracy)
            out.feature_sets.append(feats)
            out.hidden_units.append(res.hidden_units)
            out.audits.append(audit)
    for out in results.values():
        out.config = cfg.to_dict()
    return results


def protocol_experiment2(ds: Dataset, cfg: TrainConfig, k: int = 50, repeats: int = 20,
                         seed: int = 0, ann: AnnConfig = AnnConfig(),
                         candidates: Sequence[dict] = (), method: str = "zscore",
                         fractions=(0.7, 0.1, 0.2)) -> ProtocolResult:
    """One stratified 70:10:20 split; validation drives the hyperparameter
    choice; the classifier is reseeded ``repeats`` times on the fixed top-K set."""
    if k > ds.d:
        raise DataError(f"K={k} exceeds d={ds.d}")
    tr, va, te = split(ds, SplitSpec(tuple(fractions), True, seed))
    audit = IndexAudit()
    audit.tested(te)
    tr, va, te = preprocess(tr, va, te, method=method)
    audit.saw(tr)
    audit.saw(va)
    best_cfg, best_feats = cfg, None
    if candidates:
        best_acc = -1.0
        for c in candidates:
            cand = cfg.with_overrides(**c)
            feats = top_k(fit_ranking(tr, cand), k)
            acc = ann_classify(restrict(tr, feats), restrict(va, feats), restrict(va, feats),
                               replace(ann, seed=seed)).accuracy
            if acc > best_acc:
                best_acc, best_cfg, best_feats = acc, cand, feats
    if best_feats is None:
        best_feats = top_k(fit_ranking(tr, best_cfg), k)
    out = ProtocolResult("exp2", k, [], [], fractions=tuple(fractions), config=best_cfg.to_dict())
    trk, vak, tek = (restrict(p, best_feats) for p in (tr, va, te))
    for r in range(repeats):
        res = ann_classify(trk, vak, tek, replace(ann, seed=derive_seed(seed, 1000 + r)))
        out.accuracies.append(res.accuracy)
        out.feature_sets.append(best_feats)
        out.hidden_units.append(res.hidden_units)
        out.audits.append(audit)
    return out


def all_features_experiment2(ds: Dataset, repeats: int = 20, seed: int = 0,
                             ann: AnnConfig = AnnConfig(), method: str = "zscore",
                             fractions=(0.7, 0.1, 0.2)) -> ProtocolResult:
    """Same split and classifier loop as :func:`protocol_experiment2` on every feature."""
    tr, va, te = split(ds, SplitSpec(tuple(fractions), True, seed))
    tr, va, te = preprocess(tr, va, te, method=method)
    out = ProtocolResult("exp2-all", ds.d, [], [], fractions=tuple(fractions))
    for r in range(repeats):
        res = ann_classify(tr, va, te, replace(ann, seed=derive_seed(seed, 1000 + r)))
        out.accuracies.append(res.accuracy)
        out.feature_sets.append(list(range(ds.d)))
        out.hidden_units.append(res.hidden_units)
    return out


def mu_grid_analysis(ds: Dataset, mu1_grid: Sequence[float], mu2_grid: Sequence[float],
                     cfg: TrainConfig, bottleneck: int = 2, hidden: int = 50, k: int = 5,
                     seed: int = 0, method: str = "zscore", n_jobs: int = 1) -> np.ndarray:
    """5-NN validation error in a 2-D bottleneck for each (mu1, mu2) pair.

    20% of each class is held out for validation; the encoder is a plain
    bottleneck centroid-encoder d->hidden->bottleneck->hidden->d.
    """
    if not len(mu1_grid) or not len(mu2_grid):
        raise DataError("mu grids must be nonempty")
    tr, va, _ = split(ds, SplitSpec((0.8, 0.2, 0.0), True, seed))
    tr, va = preprocess(tr, va, method=method)
    base = replace(cfg, hidden=(hidden, bottleneck, hidden), mode=Mode.BCE)
    jobs = [(tr, va, base.with_overrides(mu1=m1, mu2=m2, seed=derive_seed(seed, i)), k)
            for i, (m1, m2) in enumerate((a, b) for a in mu1_grid for b in mu2_grid)]
    errs = map_jobs(_mu_cell, jobs, n_jobs)
    return np.array(errs).reshape(len(mu1_grid), len(mu2_grid))


def _mu_cell(job) -> float:
    tr, va, cfg, k = job
    rep = train(tr, cfg)
    pred = knn_predict(encode(rep.params, tr.x), tr.labels, encode(rep.params, va.x), k)
    return float(np.mean(pred != va.labels))


def write_heatmap_csv(mu1_grid, mu2_grid, errors: np.ndarray, path):
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["mu1", "mu2", "error_rate"])
        for i, m1 in enumerate(mu1_grid):
            for j, m2 in enumerate(mu2_grid):
                w.writerow([m1, m2, repr(float(errors[i, j]))])


def accuracy_vs_feature_count(ds: Dataset, cfg: TrainConfig, ks: Sequence[int], seed: int = 0,
                              ann: AnnConfig = AnnConfig(), method: str = "zscore",
                              ranking: FeatureRanking | None = None) -> list[tuple[int, float]]:
    """Validation accuracy of the classifier on the top-K features, per K.

    One encoder is trained on an 80% stratified training part; the
    classifier picks H and is scored on the remaining 20%.
    """
    if max(ks) > ds.d:
        raise DataError(f"K={max(ks)} exceeds d={ds.d}")
    tr, va, _ = split(ds, SplitSpec((0.8, 0.2, 0.0), True, seed))
    tr, va = preprocess(tr, va, method=method)
    if ranking is None:
        ranking = fit_ranking(tr, replace(cfg, seed=seed))
    curve = []
    for k in ks:
        feats = top_k(ranking, k)
        res = ann_classify(restrict(tr, feats), restrict(va, feats), restrict(va, feats),
                           replace(ann, seed=seed))
        curve.append((int(k), res.accuracy))
    return curve


def write_curve_csv(curve, path, header=("k", "accuracy")):
    lines = [",".join(header)] + [f"{a},{float(b)!r}" for a, b in curve]
    Path(path).write_text("\n".join(lines) + "\n")


def near_zero_count(spl, threshold: float = 1e-4) -> int:
    return int(np.sum(np.abs(spl) < threshold))


def lambda_sweep(ds: Dataset, cfg: TrainConfig, lambda1_list=(), lambda2_list=(),
                 n_jobs: int = 1) -> dict[tuple[str, float], FeatureRanking]:
    """Sparsity curves with one lambda varied and the other held at ``cfg``'s value."""
    jobs = [("lambda1", v, cfg.with_overrides(lambda1=v)) for v in lambda1_list]
    jobs += [("lambda2", v, cfg.with_overrides(lambda2=v)) for v in lambda2_list]
    rankings = map_jobs(_sweep_cell, [(ds, c) for _, _, c in jobs], n_jobs)
    return {(name, v): r for (name, v, _), r in zip(jobs, rankings)}


def _sweep_cell(job) -> FeatureRanking:
    ds, cfg = job
    rep = train(ds, cfg)
    return rank_features(rep.params.spl, ds.feature_names)


@dataclass
class StabilityResult:
    seeds: list[int]
    selected: list[list[int]]
    jaccard: float
    overlap: np.ndarray

    def to_dict(self) -> dict:
        return {"seeds": self.seeds, "selected": self.selected, "jaccard": self.jaccard,
                "overlap": self.overlap.tolist(),
                "sizes": [len(s) for s in self.selected]}


def stability(ds: Dataset, cfg: TrainConfig, runs: int = 5, seed: int = 0,
              same_seed: bool = False, n_jobs: int = 1) -> StabilityResult:
    """Train ``runs`` times with derived seeds and compare elbow-selected sets."""
    if runs < 2:
        raise DataError("stability needs >= 2 runs")
    seeds = [seed if same_seed else derive_seed(seed, r) for r in range(runs)]
    rankings = map_jobs(_stability_cell, [(ds, replace(cfg, seed=s)) for s in seeds], n_jobs)
    sets = [sorted(r.selected) for r in rankings]
    return StabilityResult(seeds, sets, jaccard_stability(sets), pairwise_overlap(sets))


def _stability_cell(job) -> FeatureRanking:
    ds, cfg = job
    return fit_ranking(ds, cfg)


def write_report(results, path):
    """JSON report of one or more ProtocolResults plus a flat CSV beside it."""
    results = list(results)
    path = Path(path)
    path.write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n")
    with path.with_suffix(".csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["protocol", "k", "repeats", "mean", "sd"])
        for r in results:
            w.writerow([r.protocol, r.k, len(r.accuracies), repr(r.mean), repr(r.sd)])
