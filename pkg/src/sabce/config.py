"""Run configuration files.

A config is a flat YAML mapping named after the per-dataset settings table::

    topology: d->100->d
    activation: tanh
    learning_rate: 0.008
    lambda1: 0.001
    lambda2: 0.001
    mu1: 0.2
    mu2: 0.6
    epochs: 1000          # main (penalized) phase; 1030 matches a 1050 total

Optional keys: ``pretrain_epochs`` (10), ``spl_warmup_epochs`` (10),
``mode`` (sabce), ``seed``, ``preprocess`` (zscore|minmax|none),
``label_column``, ``impute_missing``, ``checkpoint_every``,
``freeze_dense_in_warmup``, ``classifier_hidden_grid``,
``classifier_learning_rate``, ``classifier_epochs`` and ``tune`` (a list of
override mappings tried by the protocols).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .classifier import AnnConfig
from .errors import ConfigError
from .network import parse_hidden
from .objective import LossConfig
from .trainer import Mode, TrainConfig

REQUIRED_KEYS = ("topology", "activation", "learning_rate", "lambda1", "lambda2",
                 "mu1", "mu2", "epochs")
OPTIONAL_KEYS = {
    "pretrain_epochs": 10,
    "spl_warmup_epochs": 10,
    "mode": "sabce",
    "seed": 0,
    "preprocess": "zscore",
    "label_column": None,
    "impute_missing": False,
    "checkpoint_every": 0,
    "freeze_dense_in_warmup": False,
    "classifier_hidden_grid": [10, 25, 50, 100],
    "classifier_learning_rate": 0.01,
    "classifier_epochs": 300,
    "tune": [],
}

DEFAULTS = {
    "topology": "d->100->d",
    "activation": "tanh",
    "learning_rate": 0.008,
    "lambda1": 0.001,
    "lambda2": 0.001,
    "mu1": 0.6,
    "mu2": 0.1,
    "epochs": 1000,
}


@dataclass
class RunConfig:
    values: dict
    source: str | None = None
    train: TrainConfig = field(init=False)
    ann: AnnConfig = field(init=False)

    def __post_init__(self):
        v = self.values
        if v["activation"] != "tanh":
            raise ConfigError(f"activation must be tanh, got {v['activation']!r}")
        if v["preprocess"] not in ("zscore", "minmax", "none"):
            raise ConfigError(f"preprocess must be zscore, minmax or none, got {v['preprocess']!r}")
        try:
            self.train = TrainConfig(
                hidden=parse_hidden(v["topology"]),
                loss=LossConfig(v["mu1"], v["mu2"], v["lambda1"], v["lambda2"]),
                learning_rate=float(v["learning_rate"]),
                phase_epochs=(int(v["pretrain_epochs"]), int(v["spl_warmup_epochs"]),
                              int(v["epochs"])),
                mode=Mode(str(v["mode"]).lower()),
                seed=int(v["seed"]),
                checkpoint_every=int(v["checkpoint_every"]),
                freeze_dense_in_warmup=bool(v["freeze_dense_in_warmup"]),
            )
            self.ann = AnnConfig(tuple(v["classifier_hidden_grid"]),
                                 float(v["classifier_learning_rate"]),
                                 int(v["classifier_epochs"]), int(v["seed"]))
        except (TypeError, ValueError) as exc:
            if isinstance(exc, ConfigError):
                raise
            raise ConfigError(f"bad config value: {exc}") from exc

    def override(self, **kw) -> "RunConfig":
        vals = dict(self.values)
        vals.update({k: val for k, val in kw.items() if val is not None})
        return RunConfig(vals, self.source)

    def dump(self, path):
        Path(path).write_text(yaml.safe_dump(self.values, sort_keys=True))


def from_mapping(data: dict, source: str | None = None, require: bool = True) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("config must be a key-value mapping")
    unknown = set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS)
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    vals = {}
    for key in REQUIRED_KEYS:
        if key in data:
            vals[key] = data[key]
        elif require:
            raise ConfigError(f"missing config key: {key}")
        else:
            vals[key] = DEFAULTS[key]
    for key, default in OPTIONAL_KEYS.items():
        vals[key] = data.get(key, default)
    return RunConfig(vals, source)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: cannot parse config ({exc})") from exc
    return from_mapping(data, str(path))


def default_config() -> RunConfig:
    return from_mapping({}, None, require=False)
