"""Command-line interface.

Subcommands: ingest, preprocess, train, evaluate, predict. Every config
field is reachable three ways with increasing precedence: built-in
defaults, a --config JSON file, and individual flags. The effective
configuration is echoed to ``<out>/config.resolved.json`` and its hash is
stamped into every artifact.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from . import dataset as ds
from . import pipeline
from .config import (
    DENOISER_KINDS,
    AdamParams,
    ClaheConfig,
    DenoiserConfig,
    PipelineConfig,
    config_from_json,
    config_hash,
    config_to_dict,
)
from .dataset import AugmentSpec
from .denoise import NlmParams
from .equalize import ClaheParams
from .errors import PipelineError
from .image import decode_image
from .model_io import load_model

ERROR_PREFIX = "follicle: error:"


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", metavar="PATH", help="JSON config file (strict schema)")
    p.add_argument("--seed", type=int, help="master RNG seed")
    p.add_argument("--out", metavar="DIR", help="output directory")
    p.add_argument("--dataset-root", help="dataset root directory")

    g = p.add_argument_group("denoiser")
    g.add_argument("--denoiser", choices=DENOISER_KINDS)
    g.add_argument("--nlm-patch-size", type=int)
    g.add_argument("--nlm-patch-distance", type=int)
    g.add_argument("--nlm-strength", type=float)
    g.add_argument("--gaussian-sigma", type=float)
    g.add_argument("--gaussian-kernel-size", type=int)
    g.add_argument("--median-kernel-size", type=int)
    g.add_argument("--bilateral-sigma-spatial", type=float)
    g.add_argument("--bilateral-sigma-range", type=float)

    g = p.add_argument_group("equalization")
    g.add_argument("--clahe", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--clahe-tiles-x", type=int)
    g.add_argument("--clahe-tiles-y", type=int)
    g.add_argument("--clahe-clip-limit", type=float)

    g = p.add_argument_group("augmentation")
    g.add_argument("--rotation-range", type=float)
    g.add_argument("--crop-fraction", type=float)
    g.add_argument("--hflip", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--vflip", action=argparse.BooleanOptionalAction, default=None)
    g.add_argument("--rescale-min", type=float)
    g.add_argument("--rescale-max", type=float)

    g = p.add_argument_group("training")
    g.add_argument("--batch-size", type=int)
    g.add_argument("--epochs", type=int)
    g.add_argument("--learning-rate", type=float)
    g.add_argument("--beta1", type=float)
    g.add_argument("--beta2", type=float)
    g.add_argument("--epsilon", type=float)
    g.add_argument("--dropout", type=float)
    g.add_argument("--input-size", type=int)
    g.add_argument("--conv-filters", help="three counts, e.g. 16,32,64")
    g.add_argument("--dense-hidden", type=int)


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    """defaults <- config file <- flags."""
    cfg = PipelineConfig()
    if args.config:
        cfg = config_from_json(Path(args.config).read_text())

    def pick(value, fallback):
        return fallback if value is None else value

    den = cfg.denoiser
    den = DenoiserConfig(
        kind=pick(args.denoiser, den.kind),
        nlm=NlmParams(
            patch_size=pick(args.nlm_patch_size, den.nlm.patch_size),
            patch_distance=pick(args.nlm_patch_distance, den.nlm.patch_distance),
            strength=pick(args.nlm_strength, den.nlm.strength),
        ),
        gaussian_sigma=pick(args.gaussian_sigma, den.gaussian_sigma),
        gaussian_kernel_size=pick(args.gaussian_kernel_size, den.gaussian_kernel_size),
        median_kernel_size=pick(args.median_kernel_size, den.median_kernel_size),
        bilateral_sigma_spatial=pick(args.bilateral_sigma_spatial, den.bilateral_sigma_spatial),
        bilateral_sigma_range=pick(args.bilateral_sigma_range, den.bilateral_sigma_range),
    )
    cl = cfg.clahe
    cl = ClaheConfig(
        enabled=pick(args.clahe, cl.enabled),
        params=ClaheParams(
            tiles_x=pick(args.clahe_tiles_x, cl.params.tiles_x),
            tiles_y=pick(args.clahe_tiles_y, cl.params.tiles_y),
            clip_limit=pick(args.clahe_clip_limit, cl.params.clip_limit),
        ),
    )
    aug = cfg.augment
    aug = AugmentSpec(
        rotation_range=pick(args.rotation_range, aug.rotation_range),
        crop_fraction=pick(args.crop_fraction, aug.crop_fraction),
        hflip=pick(args.hflip, aug.hflip),
        vflip=pick(args.vflip, aug.vflip),
        rescale_range=(
            pick(args.rescale_min, aug.rescale_range[0]),
            pick(args.rescale_max, aug.rescale_range[1]),
        ),
    )
    tr = cfg.train
    filters = tr.conv_filters
    if args.conv_filters is not None:
        filters = tuple(int(v) for v in args.conv_filters.split(","))
    tr = replace(
        tr,
        batch_size=pick(args.batch_size, tr.batch_size),
        epochs=pick(args.epochs, tr.epochs),
        adam=AdamParams(
            learning_rate=pick(args.learning_rate, tr.adam.learning_rate),
            beta1=pick(args.beta1, tr.adam.beta1),
            beta2=pick(args.beta2, tr.adam.beta2),
            epsilon=pick(args.epsilon, tr.adam.epsilon),
        ),
        dropout=pick(args.dropout, tr.dropout),
        input_size=pick(args.input_size, tr.input_size),
        conv_filters=filters,
        dense_hidden=pick(args.dense_hidden, tr.dense_hidden),
    )
    cfg = PipelineConfig(
        dataset_root=pick(args.dataset_root, cfg.dataset_root),
        output_dir=pick(args.out, cfg.output_dir),
        seed=pick(args.seed, cfg.seed),
        denoiser=den,
        clahe=cl,
        augment=aug,
        train=tr,
    )
    return cfg.with_seed(cfg.seed)


def _echo_config(cfg: PipelineConfig) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    resolved = dict(config_to_dict(cfg), config_hash=config_hash(cfg))
    (out / "config.resolved.json").write_text(json.dumps(resolved, indent=2, sort_keys=True) + "\n")
    return out


def _print_counts(manifest: ds.DatasetManifest) -> None:
    counts = manifest.class_counts
    width = max(len(n) for n in counts)
    for name, count in counts.items():
        print(f"{name:<{width}}  {count}")
    print(f"{'total':<{width}}  {sum(counts.values())}")


def cmd_ingest(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    root = args.root or cfg.dataset_root
    if not root:
        raise PipelineError("no dataset root given (positional argument or --dataset-root)")
    out = _echo_config(cfg)
    manifest, skipped = ds.ingest(root, seed=cfg.seed)
    manifest.config_hash = config_hash(cfg)
    manifest_path = Path(args.manifest_out) if args.manifest_out else out / "manifest.json"
    manifest.save(manifest_path)
    _print_counts(manifest)
    for skip in skipped:
        print(f"skipped {skip.path}: {skip.reason}", file=sys.stderr)
    print(f"manifest written to {manifest_path}")
    return 0


def cmd_preprocess(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _echo_config(cfg)
    manifest = ds.DatasetManifest.load(args.manifest)
    result = pipeline.preprocess_manifest(manifest, cfg, out / "processed")
    for failure in result.failures:
        print(f"failed {failure['path']}: {failure['error']}", file=sys.stderr)
    print(f"processed {len(result.manifest.samples)} images to {Path(result.manifest.root)}")
    print(f"log written to {result.log_path}")
    return 0


def cmd_train(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _echo_config(cfg)
    manifest = ds.DatasetManifest.load(args.manifest)
    artifacts = pipeline.train_from_manifest(manifest, cfg, out)
    final = artifacts.history[-1] if artifacts.history else None
    if final:
        print(
            f"epoch {final.epoch}: train_acc={final.train_acc:.4f} val_acc={final.val_acc:.4f} "
            f"train_loss={final.train_loss:.4f} val_loss={final.val_loss:.4f}"
        )
    print(f"test accuracy: {artifacts.report.accuracy:.4f}")
    print(f"model written to {artifacts.model_path}")
    return 0


def _print_metrics(report) -> None:
    print("confusion matrix (rows true, columns predicted):")
    for k, name in enumerate(ds.CLASS_NAMES):
        row = " ".join(f"{int(v):4d}" for v in report.confusion.counts[k])
        print(f"  {name:<13} {row}")
    print(f"accuracy: {report.accuracy:.4f}")
    print(f"{'class':<13} {'precision':>9} {'recall':>9} {'f1':>9}")
    for k, name in enumerate(ds.CLASS_NAMES):
        print(f"{name:<13} {report.precision[k]:9.4f} {report.recall[k]:9.4f} {report.f1[k]:9.4f}")


def cmd_evaluate(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    out = _echo_config(cfg)
    loaded = load_model(args.model)
    target = Path(args.target)
    if target.is_file():
        manifest = ds.DatasetManifest.load(target)
        report = pipeline.evaluate_manifest(loaded, manifest)
    elif target.is_dir() and all((target / n).is_dir() for n in ds.CLASS_NAMES):
        manifest, _ = ds.ingest(target, seed=cfg.seed)
        report = pipeline.evaluate_directory(loaded, manifest, cfg)
    elif target.is_dir():
        # Unlabeled directory: per-image probabilities, no metrics.
        for path in sorted(target.iterdir()):
            if path.suffix.lower() not in (".png", ".jpg", ".jpeg"):
                continue
            result = pipeline.predict_image(loaded, decode_image(path.read_bytes()), cfg)
            probs = " ".join(f"{p:.4f}" for p in result["probabilities"])
            print(f"{path.name}: [{probs}] -> {result['class_name']}")
        return 0
    else:
        raise PipelineError(f"evaluation target {target} is neither a manifest nor a directory")
    _print_metrics(report)
    metrics_path = out / "metrics.json"
    metrics_path.write_text(pipeline.metrics_json(report, config_hash(cfg)))
    print(f"metrics written to {metrics_path}")
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    cfg = resolve_config(args)
    loaded = load_model(args.model)
    img = decode_image(Path(args.image).read_bytes())
    result = pipeline.predict_image(loaded, img, cfg)
    print(json.dumps(result))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="follicle",
        description="Scalp-disease image classification pipeline: ingest, preprocess, train, evaluate, predict.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("ingest", help="scan a class-per-directory dataset into a manifest")
    p.add_argument("root", nargs="?", help="dataset root (defaults to --dataset-root)")
    p.add_argument("--manifest-out", help="manifest path (default <out>/manifest.json)")
    _add_config_flags(p)
    p.set_defaults(func=cmd_ingest)

    p = sub.add_parser("preprocess", help="denoise, equalize, and resize every manifest image")
    p.add_argument("manifest", help="manifest JSON from `ingest`")
    _add_config_flags(p)
    p.set_defaults(func=cmd_preprocess)

    p = sub.add_parser("train", help="split, balance, train, and write artifacts")
    p.add_argument("manifest", help="manifest JSON of preprocessed images")
    _add_config_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="evaluate a model on a manifest or directory")
    p.add_argument("model", help="model file")
    p.add_argument("target", help="manifest JSON, labeled directory, or directory of images")
    _add_config_flags(p)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("predict", help="classify one image")
    p.add_argument("model", help="model file")
    p.add_argument("image", help="PNG or JPEG file")
    _add_config_flags(p)
    p.set_defaults(func=cmd_predict)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except PipelineError as exc:
        print(f"{ERROR_PREFIX} {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"{ERROR_PREFIX} {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
