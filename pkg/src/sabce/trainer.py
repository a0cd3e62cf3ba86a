"""Three-phase training schedule for BCE / SBCE / SABCE.

Phase 1 (pretrain): sparse layer bypassed, no penalty.
Phase 2 (spl warm-up): sparse layer in the path at weight 1, no penalty.
Phase 3 (main): elastic-net penalty on the sparse layer. In SABCE mode the
centroid targets are re-sparsified at the start of every epoch from the
sparse weights reached at the end of the previous one.

Each epoch is one Adam step on the whole training set.
"""
from __future__ import annotations

import enum
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .checkpoint import Checkpoint, save_checkpoint
from .data import CentroidSet, Dataset, compute_centroids
from .errors import ConfigError, DivergenceError, NumericalError
from .network import ModelParams, Topology, init_params
from .numerics import make_rng
from .objective import LossBreakdown, LossConfig, loss_and_grad
from .optimizer import AdamState, adam_step


class Mode(str, enum.Enum):
    BCE = "bce"
    SBCE = "sbce"
    SABCE = "sabce"


@dataclass(frozen=True)
class TrainConfig:
    hidden: tuple[int, ...] = (100,)
    loss: LossConfig = field(default_factory=LossConfig)
    learning_rate: float = 0.008
    phase_epochs: tuple[int, int, int] = (10, 10, 1000)
    mode: Mode = Mode.SABCE
    seed: int = 0
    checkpoint_every: int = 0
    freeze_dense_in_warmup: bool = False
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "hidden", tuple(int(h) for h in self.hidden))
        object.__setattr__(self, "phase_epochs", tuple(int(p) for p in self.phase_epochs))
        object.__setattr__(self, "mode", Mode(self.mode))
        if len(self.phase_epochs) != 3 or min(self.phase_epochs) < 0:
            raise ConfigError(f"phase_epochs must be three counts >= 0, got {self.phase_epochs}")
        if not self.learning_rate > 0:
            raise ConfigError("learning_rate must be > 0")
        if not self.hidden or min(self.hidden) < 1:
            raise ConfigError(f"hidden widths must be >= 1, got {self.hidden}")
        if self.checkpoint_every < 0:
            raise ConfigError("checkpoint_every must be >= 0")

    @property
    def total_epochs(self) -> int:
        return sum(self.phase_epochs)

    def topology(self, input_dim: int) -> Topology:
        return Topology.from_hidden(input_dim, self.hidden, spl_enabled=self.mode != Mode.BCE)

    def to_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        out["hidden"] = list(self.hidden)
        out["phase_epochs"] = list(self.phase_epochs)
        return out

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        d = dict(d)
        d["loss"] = LossConfig(**d["loss"]) if isinstance(d.get("loss"), dict) else d.get("loss", LossConfig())
        return cls(**d)

    def with_overrides(self, **kw) -> "TrainConfig":
        loss_kw = {k: kw.pop(k) for k in ("mu1", "mu2", "lambda1", "lambda2") if k in kw}
        cfg = replace(self, **kw) if kw else self
        if loss_kw:
            cfg = replace(cfg, loss=replace(cfg.loss, **loss_kw))
        return cfg


@dataclass
class TrainReport:
    history: list[LossBreakdown]
    params: ModelParams
    centroids: CentroidSet
    seconds: float
    mode: Mode
    config: TrainConfig
    adam: AdamState | None = None

    def history_array(self) -> np.ndarray:
        return np.array([h.as_tuple() + (h.total,) for h in self.history]).reshape(-1, 6)

    def write_history_csv(self, path):
        lines = ["epoch," + ",".join(LossBreakdown.FIELDS) + ",total"]
        for e, h in enumerate(self.history):
            vals = h.as_tuple() + (h.total,)
            lines.append(f"{e}," + ",".join(repr(float(v)) for v in vals))
        Path(path).write_text("\n".join(lines) + "\n")


def phase_of(epoch: int, phase_epochs) -> int:
    p1, p2, _ = phase_epochs
    if epoch < p1:
        return 1
    if epoch < p1 + p2:
        return 2
    return 3


def epoch_setup(epoch: int, cfg: TrainConfig, params: ModelParams, base: CentroidSet):
    """Sparse-layer activity, loss config and centroid targets for ``epoch``."""
    phase = phase_of(epoch, cfg.phase_epochs)
    sparse = cfg.mode != Mode.BCE
    spl_active = sparse and phase >= 2
    penalty = sparse and phase == 3
    lcfg = replace(cfg.loss, penalty_active=penalty)
    if cfg.mode == Mode.SABCE and phase == 3:
        cents = base.adapt(params.spl, epoch)
    else:
        cents = base
    return phase, spl_active, lcfg, cents


def train(ds: Dataset, cfg: TrainConfig, checkpoint_dir=None,
          resume: Checkpoint | None = None, progress=None) -> TrainReport:
    """Train on ``ds`` (already preprocessed) following ``cfg``'s schedule.

    ``resume`` continues from a checkpoint written by an earlier call with the
    same config; the result is bit-identical to an uninterrupted run.
    """
    t0 = time.perf_counter()
    ds.check_all_classes()
    topo = cfg.topology(ds.d)
    base = compute_centroids(ds)
    if resume is None:
        params = init_params(topo, make_rng(cfg.seed))
        adam = AdamState.zeros(params.size(), cfg.learning_rate, cfg.beta1, cfg.beta2, cfg.epsilon)
        history: list[LossBreakdown] = []
        start = 0
    else:
        if resume.params.topology != topo:
            raise ConfigError("checkpoint topology does not match config")
        params, adam = resume.params.copy(), resume.adam
        history = list(resume.history)
        start = resume.epoch

    def snapshot(epoch, p, a, h):
        return Checkpoint(p, a, epoch, list(h), cfg.to_dict(),
                          ds.feature_names, ds.class_names)

    cents = base
    for epoch in range(start, cfg.total_epochs):
        phase, spl_active, lcfg, cents = epoch_setup(epoch, cfg, params, base)
        try:
            parts, g = loss_and_grad(params, ds, cents, lcfg, spl_active)
            new_params, new_adam = adam_step(params, g, adam)
            if not np.all(np.isfinite(new_params.flat())):
                raise NumericalError("non-finite parameters after update")
        except NumericalError as exc:
            raise DivergenceError(f"training diverged at epoch {epoch}: {exc}", epoch,
                                  snapshot(epoch, params, adam, history)) from exc
        if phase == 2 and cfg.freeze_dense_in_warmup:
            new_params = ModelParams(topo, new_params.spl, params.weights, params.biases)
        params, adam = new_params, new_adam
        history.append(parts)
        if progress is not None:
            progress(epoch, phase, parts)
        if checkpoint_dir is not None and cfg.checkpoint_every \
                and (epoch + 1) % cfg.checkpoint_every == 0:
            save_checkpoint(Path(checkpoint_dir) / f"epoch_{epoch + 1:06d}.npz",
                            snapshot(epoch + 1, params, adam, history))

    final_cents = cents
    if cfg.total_epochs and cfg.mode == Mode.SABCE and phase_of(cfg.total_epochs - 1, cfg.phase_epochs) == 3:
        final_cents = base.adapt(params.spl, cfg.total_epochs)
    return TrainReport(history, params, final_cents, time.perf_counter() - t0, cfg.mode, cfg, adam)


def report_checkpoint(report: TrainReport, ds: Dataset) -> Checkpoint:
    return Checkpoint(report.params, report.adam, len(report.history), list(report.history),
                      report.config.to_dict(), ds.feature_names, ds.class_names)
