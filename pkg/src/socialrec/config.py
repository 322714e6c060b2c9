"""Training configuration: every knob of the pipeline with documented defaults."""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass
from typing import Optional

from .errors import ConfigError
from .utils import canonical_json, sha256_hex

ABLATIONS = ("full", "plus_uu", "no_u2u", "no_u2c", "no_mimic")
MIMIC_VARIANTS = ("random_mask", "distribution_shift", "inactive_mixture")
READOUT_DIVISORS = ("layers", "hops")


@dataclass
class TrainConfig:
    """All hyperparameters of the model and its optimization.

    ``readout_divisor`` picks the scale of the layer-combination readout:
    ``"layers"`` averages the K+1 stored layers uniformly (default),
    ``"hops"`` divides the same sum by K instead.
    ``infonce_full_denominator`` switches the cluster-matching loss to the
    conventional form whose denominator includes the positive pair; by default
    the denominator contains only the non-matching clusters.
    """

    embedding_dim: int = 64
    hidden_dim: Optional[int] = None  # None -> embedding_dim
    num_layers: int = 3  # propagation depth K
    num_heads: int = 2  # similarity heads Q
    del_smoothness: float = 10.0  # r1 of the deletion ratio
    add_smoothness: float = 10.0  # r2 of the addition ratio
    num_clusters: int = 30
    fuse_alpha: float = 0.5
    refine_iters: int = 2  # T
    reg_lambda: float = 1e-4
    mimic_weight: float = 0.1  # coefficient on the mimic loss
    temperature: float = 0.2
    mix_beta: float = 0.5
    mimic_samples: int = 1  # pseudo users generated per active user
    mask_keep_prob: float = 0.5
    learning_rate: float = 1e-3
    mimic_learning_rate: Optional[float] = None  # optional separate rate for the mimic gradient
    batch_size: int = 8192
    epochs: int = 30
    seed: int = 0
    holdout_fraction: float = 0.5
    inactive_threshold: Optional[int] = 7
    inactive_percentile: Optional[float] = None
    ablation: str = "full"
    mimic_variant: str = "inactive_mixture"
    readout_divisor: str = "layers"
    infonce_full_denominator: bool = False
    mimic_refined_anchors: bool = False

    def __post_init__(self) -> None:
        self.validate()

    def validate(self) -> None:
        if self.embedding_dim < 1:
            raise ConfigError("embedding_dim must be >= 1")
        if self.hidden_dim is not None and self.hidden_dim < 1:
            raise ConfigError("hidden_dim must be >= 1 when set")
        if self.num_layers < 1:
            raise ConfigError("num_layers must be >= 1")
        if self.num_heads < 1:
            raise ConfigError("num_heads must be >= 1")
        if self.del_smoothness <= 0 or self.add_smoothness <= 0:
            raise ConfigError("smoothness parameters must be > 0")
        if self.num_clusters < 2:
            raise ConfigError("num_clusters must be >= 2")
        if not 0.0 <= self.fuse_alpha <= 1.0:
            raise ConfigError("fuse_alpha must lie in [0, 1]")
        if self.refine_iters < 1:
            raise ConfigError("refine_iters must be >= 1")
        if self.reg_lambda < 0:
            raise ConfigError("reg_lambda must be >= 0")
        if self.mimic_weight < 0:
            raise ConfigError("mimic_weight must be >= 0")
        if self.temperature <= 0:
            raise ConfigError("temperature must be > 0")
        if not 0.0 < self.mix_beta < 1.0:
            raise ConfigError("mix_beta must lie in (0, 1)")
        if self.mimic_samples < 1:
            raise ConfigError("mimic_samples must be >= 1")
        if not 0.0 <= self.mask_keep_prob <= 1.0:
            raise ConfigError("mask_keep_prob must lie in [0, 1]")
        if self.learning_rate < 0:
            raise ConfigError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ConfigError("epochs must be >= 0")
        if not 0.0 < self.holdout_fraction < 1.0:
            raise ConfigError("holdout_fraction must lie in (0, 1)")
        if (self.inactive_threshold is None) == (self.inactive_percentile is None):
            raise ConfigError("set exactly one of inactive_threshold / inactive_percentile")
        if self.inactive_threshold is not None and self.inactive_threshold < 1:
            raise ConfigError("inactive_threshold must be >= 1")
        if self.inactive_percentile is not None and not 0.0 < self.inactive_percentile < 1.0:
            raise ConfigError("inactive_percentile must lie in (0, 1)")
        if self.ablation not in ABLATIONS:
            raise ConfigError(f"ablation must be one of {ABLATIONS}, got {self.ablation!r}")
        if self.mimic_variant not in MIMIC_VARIANTS:
            raise ConfigError(f"mimic_variant must be one of {MIMIC_VARIANTS}")
        if self.readout_divisor not in READOUT_DIVISORS:
            raise ConfigError(f"readout_divisor must be one of {READOUT_DIVISORS}")

    @property
    def resolved_hidden_dim(self) -> int:
        return self.embedding_dim if self.hidden_dim is None else self.hidden_dim

    @property
    def mimic_enabled(self) -> bool:
        return self.ablation != "no_mimic" and self.mimic_weight > 0

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainConfig":
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        return cls(**d)

    @classmethod
    def from_json_file(cls, path: str) -> "TrainConfig":
        with open(path, "r", encoding="utf-8") as f:
            try:
                d = json.load(f)
            except json.JSONDecodeError as e:
                raise ConfigError(f"{path}: invalid JSON ({e})") from e
        return cls.from_dict(d)

    def replace(self, **kwargs) -> "TrainConfig":
        return dataclasses.replace(self, **kwargs)

    def config_hash(self) -> str:
        return sha256_hex(canonical_json(self.to_dict()).encode())
