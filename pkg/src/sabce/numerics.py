"""Dense float64 helpers, seeded generators and the finite-difference oracle.

Matrices are plain ``numpy.ndarray`` objects of dtype float64. Random streams
come from numpy's PCG64 bit generator (``numpy.random.default_rng``), which is
stable across platforms for a given seed.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import DataError, NumericalError

STD_FLOOR = 1e-12


def as_matrix(values, name: str = "matrix") -> np.ndarray:
    """Copy ``values`` into a 2-D float64 array, rejecting NaN/Inf."""
    arr = np.array(values, dtype=np.float64)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    if arr.ndim != 2:
        raise DataError(f"{name}: expected 2-D data, got shape {arr.shape}")
    bad = ~np.isfinite(arr)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise DataError(f"{name}: non-finite entry at row {r}, column {c}")
    return arr


def make_rng(seed: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(int(seed)))


def derive_seed(master_seed: int, job_index: int) -> int:
    """Deterministic 64-bit child seed for job ``job_index`` of a run."""
    ss = np.random.SeedSequence([int(master_seed), int(job_index)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2 or a.shape[1] != b.shape[0]:
        raise ValueError(f"matmul: cannot multiply {a.shape} by {b.shape}")
    return a @ b


def finite_diff_grad(loss_fn: Callable[[np.ndarray], float], params,
                     step: float = 1e-6) -> np.ndarray:
    """Central-difference gradient of ``loss_fn`` at the flat vector ``params``."""
    if not step > 0:
        raise ValueError("step must be positive")
    p = np.array(params, dtype=np.float64).ravel()
    out = np.empty_like(p)
    for i in range(p.size):
        orig = p[i]
        p[i] = orig + step
        up = float(loss_fn(p))
        p[i] = orig - step
        down = float(loss_fn(p))
        p[i] = orig
        if not (np.isfinite(up) and np.isfinite(down)):
            raise NumericalError(f"finite_diff_grad: non-finite loss at coordinate {i}")
        out[i] = (up - down) / (2.0 * step)
    return out


def max_relative_error(analytic, numeric) -> float:
    """Max absolute deviation scaled by the largest reference component."""
    a = np.asarray(analytic, dtype=np.float64).ravel()
    b = np.asarray(numeric, dtype=np.float64).ravel()
    scale = max(np.max(np.abs(b)), np.max(np.abs(a)), 1e-12)
    return float(np.max(np.abs(a - b)) / scale)


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    std: np.ndarray

    def transform(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=np.float64)
        scale = np.where(self.std < STD_FLOOR, 1.0, self.std)
        return (x - self.mean) / scale

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}


def fit_standardizer(train: np.ndarray) -> Standardizer:
    train = np.asarray(train, dtype=np.float64)
    if train.shape[0] == 0:
        raise DataError("standardize: empty training matrix")
    # population std (denominator n)
    return Standardizer(train.mean(axis=0), train.std(axis=0))


def standardize(train: np.ndarray, apply_to: np.ndarray) -> tuple[np.ndarray, Standardizer]:
    """Z-score ``apply_to`` with statistics fit on ``train`` only.

    Features whose training std is below 1e-12 are only centered.
    """
    st = fit_standardizer(train)
    return st.transform(apply_to), st
