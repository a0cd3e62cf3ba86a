"""Checkpoint files.

A checkpoint is a numpy ``.npz`` archive (no pickling) holding:

* ``meta``: JSON string with ``format_version``, ``epoch``, topology fields,
  training config, feature/class names, Adam scalars and step count;
* ``spl``, ``W{i}``, ``b{i}``: network parameters;
* ``adam_m``, ``adam_v``: Adam moments (absent if no optimizer state);
* ``history``: (epochs, 5) float64 loss terms per epoch.

All arrays are float64, so a save/load round trip is exact.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .errors import DataError
from .network import ModelParams, Topology
from .objective import LossBreakdown
from .optimizer import AdamState

FORMAT_VERSION = 1


@dataclass
class Checkpoint:
    params: ModelParams
    adam: AdamState | None
    epoch: int
    history: list[LossBreakdown]
    config: dict
    feature_names: tuple[str, ...]
    class_names: tuple[str, ...]


def save_checkpoint(path, ckpt: Checkpoint):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    topo = asdict(ckpt.params.topology)
    meta = {
        "format_version": FORMAT_VERSION,
        "epoch": ckpt.epoch,
        "topology": topo,
        "config": ckpt.config,
        "feature_names": list(ckpt.feature_names),
        "class_names": list(ckpt.class_names),
        "n_layers": len(ckpt.params.weights),
    }
    arrays = {"spl": ckpt.params.spl}
    for i, (w, b) in enumerate(zip(ckpt.params.weights, ckpt.params.biases)):
        arrays[f"W{i}"] = w
        arrays[f"b{i}"] = b
    if ckpt.adam is not None:
        a = ckpt.adam
        meta["adam"] = {"t": a.t, "learning_rate": a.learning_rate, "beta1": a.beta1,
                        "beta2": a.beta2, "epsilon": a.epsilon}
        arrays["adam_m"] = a.m
        arrays["adam_v"] = a.v
    arrays["history"] = np.array([h.as_tuple() for h in ckpt.history], dtype=np.float64).reshape(-1, 5)
    arrays["meta"] = np.array(json.dumps(meta, sort_keys=True))
    with path.open("wb") as fh:
        np.savez(fh, **arrays)


def load_checkpoint(path) -> Checkpoint:
    path = Path(path)
    try:
        with np.load(path, allow_pickle=False) as z:
            meta = json.loads(str(z["meta"]))
            if meta.get("format_version") != FORMAT_VERSION:
                raise DataError(f"{path}: unsupported checkpoint version {meta.get('format_version')}")
            topo = Topology(**{**meta["topology"],
                               "encoder_widths": tuple(meta["topology"]["encoder_widths"]),
                               "decoder_widths": tuple(meta["topology"]["decoder_widths"])})
            n = meta["n_layers"]
            params = ModelParams(topo, z["spl"].copy(), [z[f"W{i}"].copy() for i in range(n)],
                                 [z[f"b{i}"].copy() for i in range(n)])
            adam = None
            if "adam" in meta:
                a = meta["adam"]
                adam = AdamState(z["adam_m"].copy(), z["adam_v"].copy(), a["learning_rate"],
                                 a["beta1"], a["beta2"], a["epsilon"], a["t"])
            history = [LossBreakdown(*map(float, row)) for row in z["history"]]
    except DataError:
        raise
    except Exception as exc:  # zip/npz/json/key errors all mean a bad file
        raise DataError(f"{path}: corrupt or unreadable checkpoint ({exc})") from exc
    return Checkpoint(params, adam, meta["epoch"], history, meta["config"],
                      tuple(meta["feature_names"]), tuple(meta["class_names"]))
