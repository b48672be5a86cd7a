"""Run configuration: one flat key=value namespace for the whole pipeline.

Precedence is CLI flag > config file > built-in default. Every field is
validated before any stage runs, and unknown keys in a config file are
rejected rather than ignored.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass
from typing import Optional

from .decoder import DecoderConfig
from .encoder import EncoderConfig
from .errors import InvalidConfigError
from .transe import TranseConfig


@dataclass
class RunConfig:
    # data
    train: Optional[str] = None
    valid: Optional[str] = None
    test: Optional[str] = None
    workdir: str = "runs"
    toy: bool = False  # use the built-in toy dataset (written under workdir)

    # embedding dimensions
    dim: int = 200        # stage-1 entity/relation width
    n_head: int = 2
    d_k: int = 100
    d_out: int = 200
    p_mid: int = 200
    p_out: int = 200
    n_hop: int = 2

    # stage hyperparameters
    gamma_transe: float = 1.0
    gamma_encoder: float = 1.0
    num_filters: int = 8
    reg_lambda: float = 0.001
    lr: float = 0.001
    batch_size: int = 128
    neg_ratio: int = 1
    epochs_transe: int = 200
    epochs_encoder: int = 300
    epochs_decoder: int = 200
    seed: int = 0

    # evaluation
    k_list: str = "1,3,10"
    eval_raw: bool = False  # also display the raw-setting table

    # behavior flags
    plain_sgd: bool = False
    filtered_negatives: bool = False
    joint_finetune: bool = False

    def ks(self) -> tuple[int, ...]:
        try:
            ks = tuple(int(part) for part in self.k_list.split(",") if part.strip())
        except ValueError:
            raise InvalidConfigError(f"k_list must be comma-separated integers: {self.k_list!r}")
        if not ks or any(k < 1 for k in ks):
            raise InvalidConfigError(f"k_list entries must be >= 1: {self.k_list!r}")
        return ks

    def validate(self) -> None:
        self.ks()
        self.transe_config().validate()
        self.encoder_config().validate()
        self.decoder_config().validate()

    def transe_config(self) -> TranseConfig:
        return TranseConfig(
            dim=self.dim, gamma=self.gamma_transe, lr=self.lr,
            epochs=self.epochs_transe, batch_size=self.batch_size,
            neg_ratio=self.neg_ratio, seed=self.seed, plain_sgd=self.plain_sgd,
            filtered_negatives=self.filtered_negatives,
        )

    def encoder_config(self) -> EncoderConfig:
        return EncoderConfig(
            n_head=self.n_head, d_k=self.d_k, d_out=self.d_out,
            p_mid=self.p_mid, p_out=self.p_out, n_hop=self.n_hop,
            gamma=self.gamma_encoder, lr=self.lr, epochs=self.epochs_encoder,
            batch_size=self.batch_size, neg_ratio=self.neg_ratio, seed=self.seed,
            plain_sgd=self.plain_sgd, filtered_negatives=self.filtered_negatives,
        )

    def decoder_config(self) -> DecoderConfig:
        return DecoderConfig(
            num_filters=self.num_filters, reg_lambda=self.reg_lambda, lr=self.lr,
            epochs=self.epochs_decoder, batch_size=self.batch_size,
            neg_ratio=self.neg_ratio, seed=self.seed, plain_sgd=self.plain_sgd,
            filtered_negatives=self.filtered_negatives,
            joint_finetune=self.joint_finetune,
        )

    def as_lines(self) -> list[str]:
        """Resolved configuration as sorted ``key = value`` lines."""
        return [f"{f.name} = {getattr(self, f.name)}" for f in sorted(
            dataclasses.fields(self), key=lambda f: f.name)]


_FIELDS = {f.name: f for f in dataclasses.fields(RunConfig)}
_BOOL_WORDS = {"true": True, "1": True, "yes": True, "false": False, "0": False, "no": False}


def _convert(name: str, raw: str):
    target = _FIELDS[name].type
    raw = raw.strip()
    if target == "bool":
        word = raw.lower()
        if word not in _BOOL_WORDS:
            raise InvalidConfigError(f"{name}: expected a boolean, got {raw!r}")
        return _BOOL_WORDS[word]
    if target == "int":
        try:
            return int(raw)
        except ValueError:
            raise InvalidConfigError(f"{name}: expected an integer, got {raw!r}")
    if target == "float":
        try:
            return float(raw)
        except ValueError:
            raise InvalidConfigError(f"{name}: expected a number, got {raw!r}")
    return raw  # str / Optional[str]


def load_config_file(path) -> dict:
    """Parse a ``key = value`` config file; '#' starts a comment."""
    values: dict = {}
    try:
        with open(path, "r", encoding="utf-8") as fh:
            lines = fh.readlines()
    except OSError as exc:
        raise InvalidConfigError(f"cannot read config {path}: {exc}") from exc
    for lineno, line in enumerate(lines, start=1):
        stripped = line.split("#", 1)[0].strip()
        if not stripped:
            continue
        if "=" not in stripped:
            raise InvalidConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, raw = stripped.split("=", 1)
        key = key.strip()
        if key not in _FIELDS:
            raise InvalidConfigError(f"{path}:{lineno}: unknown config key {key!r}")
        values[key] = _convert(key, raw)
    return values


def resolve_config(file_path=None, overrides: Optional[dict] = None) -> RunConfig:
    """Defaults, then config file, then non-None overrides; validated."""
    cfg = RunConfig()
    if file_path is not None:
        for key, value in load_config_file(file_path).items():
            setattr(cfg, key, value)
    if overrides:
        for key, value in overrides.items():
            if value is None:
                continue
            if key not in _FIELDS:
                raise InvalidConfigError(f"unknown config key {key!r}")
            setattr(cfg, key, value)
    cfg.validate()
    return cfg
