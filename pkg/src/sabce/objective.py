"""Bottleneck centroid-encoder loss with the elastic-net sparse-layer penalty,
and its hand-derived gradient.

With samples x_i of class j(i), (adapted) centroids c_j and N samples::

    reconstruction     = 1/(2N) sum_i ||c_j(i) - f(x_i)||^2
    bottleneck_pull    = mu1/(2N) sum_i ||g(c_j(i)) - g(x_i)||^2
    centroid_repulsion = mu2 sum_{k<l} 1 / (1 + ||g(c_k) - g(c_l)||^2)
    l1_penalty         = lambda1 * sum |spl|
    l2_penalty         = lambda2 * sum spl^2

Centroids go through the same network (sparse layer included) as samples;
both are stacked in one batch so g(c_j) and g(x_i) share parameters. The
centroid targets themselves are constants.
"""
from __future__ import annotations

from dataclasses import dataclass, astuple

import numpy as np

from .data import CentroidSet, Dataset
from .errors import ConfigError, NumericalError
from .network import ForwardTrace, ModelParams, forward


@dataclass(frozen=True)
class LossConfig:
    mu1: float = 0.6
    mu2: float = 0.1
    lambda1: float = 0.001
    lambda2: float = 0.001
    penalty_active: bool = True

    def __post_init__(self):
        for name in ("mu1", "mu2", "lambda1", "lambda2"):
            v = float(getattr(self, name))
            if not np.isfinite(v) or v < 0:
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")
            object.__setattr__(self, name, v)


@dataclass(frozen=True)
class LossBreakdown:
    reconstruction: float
    bottleneck_pull: float
    centroid_repulsion: float
    l1_penalty: float
    l2_penalty: float

    @property
    def total(self) -> float:
        return (self.reconstruction + self.bottleneck_pull + self.centroid_repulsion
                + self.l1_penalty + self.l2_penalty)

    FIELDS = ("reconstruction", "bottleneck_pull", "centroid_repulsion",
              "l1_penalty", "l2_penalty")

    def as_tuple(self) -> tuple[float, ...]:
        return astuple(self)


def _combined_trace(params, x, cents, spl_active):
    z = np.vstack([x, cents.adapted])
    return forward(params, z, spl_active)


def _terms(params: ModelParams, batch: Dataset, cents: CentroidSet, cfg: LossConfig,
           trace: ForwardTrace):
    n = batch.n
    c = cents.adapted
    out = trace.output[:n]
    g = trace.bottleneck
    g_x, g_c = g[:n], g[n:]
    resid = out - c[batch.labels]
    gdiff = g_x - g_c[batch.labels]
    cdiff = g_c[:, None, :] - g_c[None, :, :]
    sq = np.einsum("klb,klb->kl", cdiff, cdiff)
    upper = np.triu_indices(c.shape[0], k=1)

    recon = 0.5 / n * float(np.sum(resid * resid))
    pull = cfg.mu1 * 0.5 / n * float(np.sum(gdiff * gdiff))
    repel = cfg.mu2 * float(np.sum(1.0 / (1.0 + sq[upper])))
    if cfg.penalty_active:
        l1 = cfg.lambda1 * float(np.sum(np.abs(params.spl)))
        l2 = cfg.lambda2 * float(np.sum(params.spl * params.spl))
    else:
        l1 = l2 = 0.0
    parts = LossBreakdown(recon, pull, repel, l1, l2)
    for name, v in zip(LossBreakdown.FIELDS, parts.as_tuple()):
        if not np.isfinite(v):
            raise NumericalError(f"non-finite {name} term")
    return parts, resid, gdiff, cdiff, sq


def loss(params: ModelParams, batch: Dataset, cents: CentroidSet, cfg: LossConfig,
         spl_active: bool | None = None) -> LossBreakdown:
    trace = _combined_trace(params, batch.x, cents, spl_active)
    return _terms(params, batch, cents, cfg, trace)[0]


def loss_and_grad(params: ModelParams, batch: Dataset, cents: CentroidSet, cfg: LossConfig,
                  spl_active: bool | None = None) -> tuple[LossBreakdown, ModelParams]:
    trace = _combined_trace(params, batch.x, cents, spl_active)
    parts, resid, gdiff, cdiff, sq = _terms(params, batch, cents, cfg, trace)
    n, m = batch.n, cents.adapted.shape[0]
    n_layers = len(params.weights)
    bl = trace.bottleneck_layer

    # dL/d(output rows); centroid rows do not reach the reconstruction term
    grad_a = np.zeros_like(trace.output)
    grad_a[:n] = resid / n

    # direct gradient on the bottleneck activations
    grad_g = np.zeros_like(trace.bottleneck)
    grad_g[:n] = cfg.mu1 / n * gdiff
    onehot = np.zeros((n, m))
    onehot[np.arange(n), batch.labels] = 1.0
    grad_g[n:] = -cfg.mu1 / n * (onehot.T @ gdiff)
    w = 1.0 / (1.0 + sq) ** 2
    np.fill_diagonal(w, 0.0)
    grad_g[n:] += -2.0 * cfg.mu2 * np.einsum("kl,klb->kb", w, cdiff)

    gw = [None] * n_layers
    gb = [None] * n_layers
    for i in range(n_layers - 1, -1, -1):
        if i == bl:
            grad_a = grad_a + grad_g
        if i == n_layers - 1:
            grad_z = grad_a
        else:
            act = trace.post[i]
            grad_z = grad_a * (1.0 - act * act)
        prev = trace.post[i - 1] if i > 0 else trace.spl_out
        gw[i] = prev.T @ grad_z
        gb[i] = grad_z.sum(axis=0)
        grad_a = grad_z @ params.weights[i].T

    if trace.spl_active:
        gspl = np.sum(grad_a * trace.inputs, axis=0)
    else:
        gspl = np.zeros_like(params.spl)
    if cfg.penalty_active:
        # subgradient of |w| taken as 0 at w == 0
        gspl = gspl + cfg.lambda1 * np.sign(params.spl) + 2.0 * cfg.lambda2 * params.spl
    return parts, ModelParams(params.topology, gspl, gw, gb)


def grad(params: ModelParams, batch: Dataset, cents: CentroidSet, cfg: LossConfig,
         spl_active: bool | None = None) -> ModelParams:
    return loss_and_grad(params, batch, cents, cfg, spl_active)[1]
