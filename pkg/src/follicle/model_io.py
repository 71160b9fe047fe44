"""Versioned binary model format.

Layout:
    magic  b"FOLL1"
    version u16  (little-endian)
    header_len u32 (little-endian)
    header JSON (UTF-8, sorted keys): architecture specs, ordered param
        shapes, training config, seed, Adam step counter, extra metadata
    blobs: for each param in header order, three little-endian float32
        tensors back to back: value, Adam first moment, Adam second moment

Saving the same model twice produces byte-identical files.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .config import TrainConfig, train_config_from_dict, train_config_to_dict
from .errors import ModelFormatError
from .nn import Adam, Model, build_model, layer_specs

MAGIC = b"FOLL1"
VERSION = 1


@dataclass
class LoadedModel:
    model: Model
    adam_step: int
    header: dict

    @property
    def config(self) -> TrainConfig:
        return self.model.config


def _header_dict(model: Model, adam_step: int, extra: dict | None) -> dict:
    return {
        "specs": layer_specs(model),
        "params": [{"name": p.name, "shape": list(p.value.shape)} for p in model.params()],
        "config": train_config_to_dict(model.config),
        "seed": model.config.seed,
        "adam_step": adam_step,
        "extra": extra or {},
    }


def save_model(model: Model, path: str | Path, adam_step: int = 0, extra: dict | None = None) -> None:
    """Write the model (weights + Adam moments) to `path`."""
    header = json.dumps(_header_dict(model, adam_step, extra), sort_keys=True,
                        separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(VERSION.to_bytes(2, "little"))
        fh.write(len(header).to_bytes(4, "little"))
        fh.write(header)
        for p in model.params():
            for tensor in (p.value, p.m, p.v):
                fh.write(np.ascontiguousarray(tensor, dtype="<f4").tobytes())


def load_model(path: str | Path) -> LoadedModel:
    """Read a model file, validating magic, version, and shapes."""
    blob = Path(path).read_bytes()
    if len(blob) < len(MAGIC) + 6:
        raise ModelFormatError(f"file too short to be a model ({len(blob)} bytes)")
    if blob[: len(MAGIC)] != MAGIC:
        raise ModelFormatError(f"bad magic {blob[:len(MAGIC)]!r}; expected {MAGIC!r}")
    pos = len(MAGIC)
    version = int.from_bytes(blob[pos : pos + 2], "little")
    if version != VERSION:
        raise ModelFormatError(f"unsupported model version {version}; expected {VERSION}")
    pos += 2
    header_len = int.from_bytes(blob[pos : pos + 4], "little")
    pos += 4
    if pos + header_len > len(blob):
        raise ModelFormatError("truncated file: header extends past end of file")
    try:
        header = json.loads(blob[pos : pos + header_len].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ModelFormatError(f"malformed header JSON: {exc}") from exc
    pos += header_len

    config = train_config_from_dict(header["config"])
    model = build_model(config)
    params = model.params()
    declared = header.get("params", [])
    if len(declared) != len(params):
        raise ModelFormatError(
            f"header declares {len(declared)} params, architecture has {len(params)}"
        )
    for p, meta in zip(params, declared):
        shape = tuple(meta["shape"])
        if meta["name"] != p.name or shape != p.value.shape:
            raise ModelFormatError(
                f"shape mismatch for {meta['name']}: header {shape}, architecture {p.value.shape}"
            )
        nbytes = int(np.prod(shape)) * 4
        tensors = []
        for _ in range(3):
            if pos + nbytes > len(blob):
                raise ModelFormatError(f"truncated file: blob for {p.name} is incomplete")
            tensors.append(np.frombuffer(blob[pos : pos + nbytes], dtype="<f4").reshape(shape).copy())
            pos += nbytes
        p.value, p.m, p.v = tensors
    if pos != len(blob):
        raise ModelFormatError(f"{len(blob) - pos} trailing bytes after the last blob")
    return LoadedModel(model=model, adam_step=int(header.get("adam_step", 0)), header=header)


def resume_adam(loaded: LoadedModel, config: TrainConfig) -> Adam:
    """Adam optimizer continuing from the stored moments and step counter."""
    return Adam(
        loaded.model.params(),
        lr=config.adam.learning_rate,
        beta1=config.adam.beta1,
        beta2=config.adam.beta2,
        eps=config.adam.epsilon,
        t=loaded.adam_step,
    )
