"""End-to-end pipeline stages shared by the CLI and experiment scripts.

Stage order follows the workflow: denoise, equalize, resize to the network
input size, split, balance, train, evaluate. Preprocessing can fan out
across worker threads (``FOLLICLE_THREADS`` caps the pool); every other
stage is a deterministic single-threaded transform.
"""

from __future__ import annotations

import hashlib
import json
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import dataset as ds
from .config import PipelineConfig, config_hash, config_to_dict
from .denoise import NlmParams, bilateral_filter, gaussian_blur, median_filter, nlm_denoise
from .equalize import clahe
from .errors import IngestError, PipelineError
from .image import ImageTensor, decode_image, encode_png, resize_bilinear
from .metrics import MetricsReport, metrics_from_confusion
from .model_io import LoadedModel, save_model
from .train import EpochRecord, confusion_to_csv, evaluate, history_to_csv, train


def worker_count(n_tasks: int) -> int:
    """Worker threads for preprocessing, capped by FOLLICLE_THREADS."""
    cap = os.environ.get("FOLLICLE_THREADS")
    limit = int(cap) if cap else (os.cpu_count() or 1)
    return max(1, min(limit, n_tasks))


def denoise_image(img: ImageTensor, cfg: PipelineConfig) -> ImageTensor:
    d = cfg.denoiser
    if d.kind == "nlm":
        return nlm_denoise(img, d.nlm)
    if d.kind == "median":
        return median_filter(img, d.median_kernel_size)
    if d.kind == "bilateral":
        return bilateral_filter(img, d.bilateral_sigma_spatial, d.bilateral_sigma_range)
    if d.kind == "gaussian":
        return gaussian_blur(img, d.gaussian_sigma, d.gaussian_kernel_size)
    return img  # "none"


def preprocess_image(img: ImageTensor, cfg: PipelineConfig) -> ImageTensor:
    """Denoise, equalize, and resize one image to the network input size."""
    img = denoise_image(img, cfg)
    if cfg.clahe.enabled:
        img = clahe(img, cfg.clahe.params)
    return resize_bilinear(img, cfg.train.input_size, cfg.train.input_size)


@dataclass
class PreprocessResult:
    manifest: ds.DatasetManifest
    log_path: Path
    failures: list[dict]


def preprocess_manifest(
    manifest: ds.DatasetManifest, cfg: PipelineConfig, out_dir: str | Path
) -> PreprocessResult:
    """Process every manifest image into `<out_dir>/<class>/<name>.png`,
    writing a manifest for the processed tree and a per-image log."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)
    src_root = Path(manifest.root)

    def process(sample: ds.LabeledSample) -> dict:
        started = time.perf_counter()
        # Appending .png (rather than swapping the suffix) keeps distinct
        # sources like foo.jpg and foo.png from colliding on one output.
        rel = sample.path if sample.path.lower().endswith(".png") else sample.path + ".png"
        entry = {"path": sample.path, "output": rel}
        try:
            img = decode_image((src_root / sample.path).read_bytes())
            processed = preprocess_image(img, cfg)
            target = out_dir / rel
            target.parent.mkdir(parents=True, exist_ok=True)
            target.write_bytes(encode_png(processed))
            entry["seconds"] = round(time.perf_counter() - started, 4)
        except (PipelineError, OSError) as exc:
            entry["error"] = str(exc)
        return entry

    with ThreadPoolExecutor(max_workers=worker_count(len(manifest.samples))) as pool:
        entries = list(pool.map(process, manifest.samples))

    failures = [e for e in entries if "error" in e]
    log = {
        "config_hash": chash,
        "denoiser": config_to_dict(cfg)["denoiser"],
        "clahe": config_to_dict(cfg)["clahe"],
        "input_size": cfg.train.input_size,
        "images": entries,
    }
    log_path = out_dir / "preprocess_log.json"
    log_path.write_text(json.dumps(log, indent=2, sort_keys=True) + "\n")

    ok = {e["path"]: e["output"] for e in entries if "error" not in e}
    samples = []
    for s in manifest.samples:
        if s.path not in ok:
            continue
        data = (out_dir / ok[s.path]).read_bytes()
        samples.append(
            ds.LabeledSample(
                path=ok[s.path],
                label=s.label,
                checksum=hashlib.sha256(data).hexdigest(),
            )
        )
    counts = [0] * ds.NUM_CLASSES
    for s in samples:
        counts[s.label] += 1
    if any(c < 2 for c in counts):
        short = ds.CLASS_NAMES[counts.index(min(counts))]
        raise IngestError(f"class {short} has fewer than 2 usable images after preprocessing")
    processed = ds.DatasetManifest(
        root=str(out_dir.resolve()),
        samples=samples,
        seed=manifest.seed,
        created_at=datetime.now(timezone.utc).isoformat(),
        config_hash=chash,
    )
    processed.save(out_dir / "manifest.json")
    return PreprocessResult(manifest=processed, log_path=log_path, failures=failures)


@dataclass
class TrainArtifacts:
    model_path: Path
    history_path: Path
    metrics_path: Path
    confusion_path: Path
    report: MetricsReport
    history: list[EpochRecord]
    split_manifest: ds.DatasetManifest


def metrics_json(report: MetricsReport, chash: str, history_len: int | None = None) -> str:
    payload = report.to_dict(ds.CLASS_NAMES)
    payload["config_hash"] = chash
    if history_len is not None:
        payload["epochs"] = history_len
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def train_from_manifest(
    manifest: ds.DatasetManifest, cfg: PipelineConfig, out_dir: str | Path
) -> TrainArtifacts:
    """Split, balance, train, evaluate, and write all artifacts."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    chash = config_hash(cfg)

    split = ds.stratified_split(manifest, train_fraction=0.7, seed=cfg.seed)
    balanced = ds.oversample_balance(split, cfg.augment, seed=cfg.seed)
    balanced.save(out_dir / "split_manifest.json")

    train_x, train_y = ds.load_split_arrays(balanced, "train", cfg.train.input_size, cfg.augment)
    val_x, val_y = ds.load_split_arrays(balanced, "test", cfg.train.input_size, cfg.augment)

    model, adam, history = train(replace(cfg.train, seed=cfg.seed), train_x, train_y, val_x, val_y)
    cm, _ = evaluate(model, val_x, val_y)
    report = metrics_from_confusion(cm)

    model_path = out_dir / "model.foll1"
    save_model(model, model_path, adam_step=adam.t, extra={"config_hash": chash})
    history_path = out_dir / "history.csv"
    history_path.write_text(history_to_csv(history, chash))
    metrics_path = out_dir / "metrics.json"
    metrics_path.write_text(metrics_json(report, chash, len(history)))
    confusion_path = out_dir / "confusion.csv"
    confusion_path.write_text(confusion_to_csv(cm, ds.CLASS_NAMES, chash))
    return TrainArtifacts(
        model_path=model_path,
        history_path=history_path,
        metrics_path=metrics_path,
        confusion_path=confusion_path,
        report=report,
        history=history,
        split_manifest=balanced,
    )


def evaluate_manifest(
    loaded: LoadedModel, manifest: ds.DatasetManifest, split: str = "test"
) -> MetricsReport:
    """Evaluate the stored split of a manifest (all samples if unsplit).

    Manifest images must already be at the model's input size; a mismatch
    is an error rather than a silent resize, so preprocessing gaps surface.
    """
    subset = manifest.subset(split)
    if not subset:
        subset = manifest.samples
    size = loaded.config.input_size
    images = []
    for s in subset:
        img = ds.load_sample(manifest, s)
        if (img.height, img.width) != (size, size):
            raise PipelineError(
                f"{s.path} is {img.height}x{img.width} but the model expects "
                f"{size}x{size}; run preprocess first"
            )
        images.append(img.data)
    x = np.stack(images)
    y = np.array([s.label for s in subset], dtype=np.int64)
    cm, _ = evaluate(loaded.model, x, y)
    return metrics_from_confusion(cm)


def evaluate_directory(
    loaded: LoadedModel, manifest: ds.DatasetManifest, cfg: PipelineConfig
) -> MetricsReport:
    """Evaluate raw labeled images, preprocessing each one like training."""
    cfg = _with_model_input_size(cfg, loaded)
    images, labels = [], []
    for s in manifest.samples:
        img = decode_image((Path(manifest.root) / s.path).read_bytes())
        images.append(preprocess_image(img, cfg).data)
        labels.append(s.label)
    cm, _ = evaluate(loaded.model, np.stack(images), np.array(labels, dtype=np.int64))
    return metrics_from_confusion(cm)


def _with_model_input_size(cfg: PipelineConfig, loaded: LoadedModel) -> PipelineConfig:
    # The model dictates its own input size; config supplies the filters.
    return replace(cfg, train=replace(cfg.train, input_size=loaded.config.input_size))


def predict_image(loaded: LoadedModel, img: ImageTensor, cfg: PipelineConfig) -> dict:
    """Class probabilities for one raw image, preprocessed like training."""
    processed = preprocess_image(img, _with_model_input_size(cfg, loaded))
    probs = loaded.model.forward(processed.data[None])[0]
    label = int(probs.argmax())
    return {
        "label": label,
        "class_name": ds.CLASS_NAMES[label],
        "probabilities": [float(p) for p in probs],
    }
