"""Run configuration: training hyperparameters and the full pipeline config.

Configs are plain dataclasses serializable to JSON. Parsing is strict:
unknown keys are rejected so a config file always means what it says. The
canonical JSON form (sorted keys, compact separators) is hashed to give
every output artifact a provenance tag.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import asdict, dataclass, field, fields, replace

from .dataset import AugmentSpec
from .denoise import NlmParams
from .equalize import ClaheParams
from .errors import ConfigError, ParamError

DENOISER_KINDS = ("nlm", "median", "bilateral", "gaussian", "none")


@dataclass(frozen=True)
class AdamParams:
    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ParamError(f"learning_rate must be > 0, got {self.learning_rate}")


@dataclass(frozen=True)
class TrainConfig:
    batch_size: int = 16
    epochs: int = 50
    adam: AdamParams = field(default_factory=AdamParams)
    dropout: float = 0.3
    input_size: int = 128
    conv_filters: tuple[int, int, int] = (16, 32, 64)
    dense_hidden: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.batch_size < 1:
            raise ParamError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.epochs < 0:
            raise ParamError(f"epochs must be >= 0, got {self.epochs}")
        if not 0.0 <= self.dropout < 1.0:
            raise ParamError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.input_size < 8 or self.input_size % 8 != 0:
            raise ParamError(
                f"input_size must be a positive multiple of 8 (three 2x2 pools), got {self.input_size}"
            )
        if len(self.conv_filters) != 3 or any(f < 1 for f in self.conv_filters):
            raise ParamError(f"conv_filters must be three positive counts, got {self.conv_filters}")


@dataclass(frozen=True)
class DenoiserConfig:
    kind: str = "nlm"
    nlm: NlmParams = field(default_factory=NlmParams)
    gaussian_sigma: float = 1.0
    gaussian_kernel_size: int = 3
    median_kernel_size: int = 3
    bilateral_sigma_spatial: float = 1.5
    bilateral_sigma_range: float = 0.1

    def __post_init__(self):
        if self.kind not in DENOISER_KINDS:
            raise ParamError(f"denoiser kind must be one of {DENOISER_KINDS}, got {self.kind!r}")


@dataclass(frozen=True)
class ClaheConfig:
    enabled: bool = True
    params: ClaheParams = field(default_factory=ClaheParams)


@dataclass(frozen=True)
class PipelineConfig:
    dataset_root: str = ""
    output_dir: str = "out"
    seed: int = 0
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    clahe: ClaheConfig = field(default_factory=ClaheConfig)
    augment: AugmentSpec = field(default_factory=AugmentSpec)
    train: TrainConfig = field(default_factory=TrainConfig)

    def with_seed(self, seed: int) -> "PipelineConfig":
        return replace(self, seed=seed, train=replace(self.train, seed=seed))


def config_to_dict(cfg: PipelineConfig) -> dict:
    d = asdict(cfg)
    d["augment"]["rescale_range"] = list(cfg.augment.rescale_range)
    d["train"]["conv_filters"] = list(cfg.train.conv_filters)
    return d


def train_config_to_dict(cfg: TrainConfig) -> dict:
    d = asdict(cfg)
    d["conv_filters"] = list(cfg.conv_filters)
    return d


def train_config_from_dict(data: dict) -> TrainConfig:
    return _build(TrainConfig, data, "train")


def config_hash(cfg: PipelineConfig) -> str:
    """Hash of the pipeline semantics: workspace locations are excluded so
    the same experiment hashes identically wherever it runs."""
    d = config_to_dict(cfg)
    d.pop("output_dir", None)
    d.pop("dataset_root", None)
    canon = json.dumps(d, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()[:16]


def _build(cls, data: dict, path: str):
    """Construct a (possibly nested) config dataclass, rejecting unknown keys."""
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'}: expected an object, got {type(data).__name__}")
    known = {f.name: f for f in fields(cls)}
    unknown = set(data) - set(known)
    if unknown:
        raise ConfigError(f"{path or 'config'}: unknown key(s) {sorted(unknown)}")
    kwargs = {}
    nested = {
        "adam": AdamParams,
        "nlm": NlmParams,
        "params": ClaheParams,
        "denoiser": DenoiserConfig,
        "clahe": ClaheConfig,
        "augment": AugmentSpec,
        "train": TrainConfig,
    }
    for key, value in data.items():
        sub = f"{path}.{key}" if path else key
        if key in nested and isinstance(value, dict):
            kwargs[key] = _build(nested[key], value, sub)
        elif key in ("rescale_range", "conv_filters") and isinstance(value, list):
            kwargs[key] = tuple(value)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ParamError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def config_from_dict(data: dict) -> PipelineConfig:
    cfg = _build(PipelineConfig, data, "")
    # Keep the two seed fields coherent when only the top-level one is given.
    if "seed" in data and "train" in data and "seed" not in data["train"]:
        cfg = replace(cfg, train=replace(cfg.train, seed=cfg.seed))
    elif "seed" in data and "train" not in data:
        cfg = replace(cfg, train=replace(cfg.train, seed=cfg.seed))
    return cfg


def config_from_json(text: str) -> PipelineConfig:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    return config_from_dict(data)
