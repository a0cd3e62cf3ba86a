"""Full-batch Adam on flat parameter vectors."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .errors import ConfigError, NumericalError
from .network import ModelParams


@dataclass(frozen=True)
class AdamState:
    m: np.ndarray
    v: np.ndarray
    learning_rate: float = 0.001
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    t: int = 0

    @classmethod
    def zeros(cls, size: int, learning_rate: float = 0.001, beta1: float = 0.9,
              beta2: float = 0.999, epsilon: float = 1e-8) -> "AdamState":
        if not learning_rate > 0:
            raise ConfigError(f"learning_rate must be > 0, got {learning_rate}")
        return cls(np.zeros(size), np.zeros(size), float(learning_rate), beta1, beta2, epsilon, 0)


def adam_step(params, g, state: AdamState):
    """One bias-corrected Adam update.

    ``params``/``g`` may be flat arrays or :class:`ModelParams`; the result has
    the same kind as ``params``.
    """
    as_model = isinstance(params, ModelParams)
    p = params.flat() if as_model else np.asarray(params, dtype=np.float64)
    gv = g.flat() if isinstance(g, ModelParams) else np.asarray(g, dtype=np.float64)
    if p.shape != gv.shape or p.shape != state.m.shape:
        raise ValueError(f"adam_step: shape mismatch params {p.shape}, grad {gv.shape}, "
                         f"state {state.m.shape}")
    if not np.all(np.isfinite(gv)):
        raise NumericalError(f"adam_step: non-finite gradient at index "
                             f"{int(np.flatnonzero(~np.isfinite(gv))[0])}")
    t = state.t + 1
    m = state.beta1 * state.m + (1.0 - state.beta1) * gv
    v = state.beta2 * state.v + (1.0 - state.beta2) * gv * gv
    m_hat = m / (1.0 - state.beta1 ** t)
    v_hat = v / (1.0 - state.beta2 ** t)
    new_p = p - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)
    new_state = replace(state, m=m, v=v, t=t)
    if as_model:
        return params.with_flat(new_p), new_state
    return new_p, new_state
