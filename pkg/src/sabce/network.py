"""Encoder/decoder network with a diagonal sparsity-promoting input layer.

Layout for a batch ``z`` (rows are samples)::

    a0 = z * spl                      # diagonal layer, no bias, no nonlinearity
    a1 = tanh(a0 @ W1 + b1)
    ...
    aB = tanh(...)                    # bottleneck g(z): last encoder layer
    ...
    f  = a_{L-1} @ WL + bL            # linear reconstruction h(g(z))

Weights are stored as (fan_in, fan_out) so a batch multiplies from the left.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DataError


@dataclass(frozen=True)
class Topology:
    input_dim: int
    encoder_widths: tuple[int, ...]
    decoder_widths: tuple[int, ...]
    spl_enabled: bool = True
    hidden_activation: str = "tanh"
    output_activation: str = "linear"

    def __post_init__(self):
        enc = tuple(int(w) for w in self.encoder_widths)
        dec = tuple(int(w) for w in self.decoder_widths)
        object.__setattr__(self, "encoder_widths", enc)
        object.__setattr__(self, "decoder_widths", dec)
        if self.input_dim < 1 or not enc or not dec or min(enc + dec) < 1:
            raise ConfigError(f"invalid topology widths: d={self.input_dim}, "
                              f"encoder={enc}, decoder={dec}")
        if dec[-1] != self.input_dim:
            raise ConfigError(f"decoder must end at input width {self.input_dim}, got {dec[-1]}")
        if self.hidden_activation != "tanh" or self.output_activation != "linear":
            raise ConfigError("only tanh hidden / linear output activations are supported")

    @property
    def widths(self) -> tuple[int, ...]:
        return (self.input_dim, *self.encoder_widths, *self.decoder_widths)

    @property
    def n_layers(self) -> int:
        return len(self.encoder_widths) + len(self.decoder_widths)

    @property
    def bottleneck_layer(self) -> int:
        """0-based index of the dense layer whose activation is g(.)."""
        return len(self.encoder_widths) - 1

    @property
    def bottleneck_width(self) -> int:
        return self.encoder_widths[-1]

    @classmethod
    def from_hidden(cls, input_dim: int, hidden, spl_enabled: bool = True) -> "Topology":
        """Build from hidden widths; the first narrowest hidden layer is the bottleneck."""
        hidden = [int(h) for h in hidden]
        if not hidden:
            raise ConfigError("topology needs at least one hidden layer")
        b = int(np.argmin(hidden))
        return cls(input_dim, tuple(hidden[:b + 1]), tuple(hidden[b + 1:]) + (input_dim,),
                   spl_enabled)

    @classmethod
    def parse(cls, text: str, input_dim: int, spl_enabled: bool = True) -> "Topology":
        return cls.from_hidden(input_dim, parse_hidden(text), spl_enabled)

    def describe(self) -> str:
        return "->".join(["d", *map(str, self.encoder_widths + self.decoder_widths[:-1]), "d"])


@dataclass
class ModelParams:
    topology: Topology
    spl: np.ndarray
    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def copy(self) -> "ModelParams":
        return ModelParams(self.topology, self.spl.copy(),
                           [w.copy() for w in self.weights], [b.copy() for b in self.biases])

    def flat(self) -> np.ndarray:
        return np.concatenate([self.spl.ravel()]
                              + [np.concatenate([w.ravel(), b.ravel()])
                                 for w, b in zip(self.weights, self.biases)])

    def size(self) -> int:
        return self.spl.size + sum(w.size + b.size for w, b in zip(self.weights, self.biases))

    def with_flat(self, vec: np.ndarray) -> "ModelParams":
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.size():
            raise DataError(f"flat vector has {vec.size} entries, expected {self.size()}")
        d = self.spl.size
        spl = vec[:d].copy()
        pos = d
        ws, bs = [], []
        for w, b in zip(self.weights, self.biases):
            ws.append(vec[pos:pos + w.size].reshape(w.shape).copy())
            pos += w.size
            bs.append(vec[pos:pos + b.size].copy())
            pos += b.size
        return ModelParams(self.topology, spl, ws, bs)

    def zeros_like(self) -> "ModelParams":
        return ModelParams(self.topology, np.zeros_like(self.spl),
                           [np.zeros_like(w) for w in self.weights],
                           [np.zeros_like(b) for b in self.biases])


def parse_hidden(text: str) -> tuple[int, ...]:
    """Hidden widths from ``"d->250->d"`` / ``"d→100→2→100→d"`` style strings."""
    parts = [p.strip() for p in re.split(r"->|→|,", str(text)) if p.strip()]
    if len(parts) < 3 or parts[0] != "d" or parts[-1] != "d":
        raise ConfigError(f"topology must look like 'd->H->d', got {text!r}")
    try:
        return tuple(int(p) for p in parts[1:-1])
    except ValueError:
        raise ConfigError(f"non-integer width in topology {text!r}") from None


def glorot_bound(fan_in: int, fan_out: int) -> float:
    return float(np.sqrt(6.0 / (fan_in + fan_out)))


def init_params(topology: Topology, rng: np.random.Generator) -> ModelParams:
    """All-ones sparse layer, Glorot-uniform dense weights, zero biases."""
    widths = topology.widths
    weights, biases = [], []
    for fan_in, fan_out in zip(widths[:-1], widths[1:]):
        bound = glorot_bound(fan_in, fan_out)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return ModelParams(topology, np.ones(topology.input_dim), weights, biases)


@dataclass
class ForwardTrace:
    inputs: np.ndarray
    spl_out: np.ndarray
    pre: list[np.ndarray] = field(default_factory=list)
    post: list[np.ndarray] = field(default_factory=list)
    bottleneck_layer: int = 0
    spl_active: bool = True

    @property
    def bottleneck(self) -> np.ndarray:
        return self.post[self.bottleneck_layer]

    @property
    def output(self) -> np.ndarray:
        return self.post[-1]


def forward(params: ModelParams, x: np.ndarray, spl_active: bool | None = None) -> ForwardTrace:
    """Run a batch through the network and keep every intermediate."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != params.topology.input_dim:
        raise DataError(f"forward: expected (*, {params.topology.input_dim}) batch, got {x.shape}")
    if spl_active is None:
        spl_active = params.topology.spl_enabled
    a = x * params.spl if spl_active else x
    trace = ForwardTrace(x, a, bottleneck_layer=params.topology.bottleneck_layer,
                         spl_active=spl_active)
    last = len(params.weights) - 1
    for i, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = a @ w + b
        a = z if i == last else np.tanh(z)
        trace.pre.append(z)
        trace.post.append(a)
    return trace


def encode(params: ModelParams, x: np.ndarray, spl_active: bool | None = None) -> np.ndarray:
    return forward(params, x, spl_active).bottleneck
