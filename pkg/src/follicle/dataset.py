"""Dataset ingestion, stratified splitting, augmentation, and oversampling.

A dataset lives on disk as ``<root>/<class_name>/*.{png,jpg,jpeg}`` with
class directories ``alopecia/``, ``psoriasis/``, ``folliculitis/``. The
manifest is a JSON document (schema version 1) listing every sample with
its label, content checksum, and split assignment. Augmented copies are
manifest entries that reference a source file plus a stored augmentation
seed; the pixels are regenerated deterministically at load time, so a
manifest fully determines the training set.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from enum import IntEnum
from pathlib import Path

import numpy as np

from .errors import IngestError, ParamError, PipelineError, SplitError
from .image import ImageTensor, decode_image, resize_bilinear
from .seeding import derive_seed, seed_stream

MANIFEST_VERSION = 1


class ClassLabel(IntEnum):
    ALOPECIA = 0
    PSORIASIS = 1
    FOLLICULITIS = 2


CLASS_NAMES = ("alopecia", "psoriasis", "folliculitis")
NUM_CLASSES = len(CLASS_NAMES)
_IMAGE_SUFFIXES = (".png", ".jpg", ".jpeg")


@dataclass(frozen=True)
class LabeledSample:
    path: str  # relative to the manifest root
    label: int
    checksum: str
    split: str = "unassigned"  # train | test | unassigned
    augmented: bool = False
    source_path: str | None = None  # provenance for augmented copies
    aug_seed: int | None = None

    def to_dict(self) -> dict:
        d = {"path": self.path, "label": self.label, "checksum": self.checksum, "split": self.split}
        if self.augmented:
            d.update(augmented=True, source_path=self.source_path, aug_seed=self.aug_seed)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "LabeledSample":
        return cls(
            path=d["path"],
            label=int(d["label"]),
            checksum=d["checksum"],
            split=d.get("split", "unassigned"),
            augmented=bool(d.get("augmented", False)),
            source_path=d.get("source_path"),
            aug_seed=d.get("aug_seed"),
        )


@dataclass
class SkippedFile:
    path: str
    reason: str


@dataclass
class DatasetManifest:
    root: str
    samples: list[LabeledSample]
    seed: int
    created_at: str
    config_hash: str | None = None

    @property
    def class_counts(self) -> dict[str, int]:
        counts = {name: 0 for name in CLASS_NAMES}
        for s in self.samples:
            counts[CLASS_NAMES[s.label]] += 1
        return counts

    def split_counts(self, split: str) -> tuple[int, ...]:
        counts = [0] * NUM_CLASSES
        for s in self.samples:
            if s.split == split:
                counts[s.label] += 1
        return tuple(counts)

    def subset(self, split: str) -> list[LabeledSample]:
        return [s for s in self.samples if s.split == split]

    def to_dict(self) -> dict:
        d = {
            "version": MANIFEST_VERSION,
            "root": self.root,
            "seed": self.seed,
            "created_at": self.created_at,
            "class_counts": self.class_counts,
            "samples": [s.to_dict() for s in self.samples],
        }
        if self.config_hash is not None:
            d["config_hash"] = self.config_hash
        return d

    def save(self, path: str | Path) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n")

    @classmethod
    def from_dict(cls, d: dict) -> "DatasetManifest":
        if d.get("version") != MANIFEST_VERSION:
            raise PipelineError(f"unsupported manifest version {d.get('version')!r}")
        return cls(
            root=d["root"],
            samples=[LabeledSample.from_dict(s) for s in d["samples"]],
            seed=int(d["seed"]),
            created_at=d["created_at"],
            config_hash=d.get("config_hash"),
        )

    @classmethod
    def load(cls, path: str | Path) -> "DatasetManifest":
        return cls.from_dict(json.loads(Path(path).read_text()))


@dataclass(frozen=True)
class AugmentSpec:
    """Augmentation families and magnitudes, applied in a fixed order:
    hflip, vflip, rotate, central crop + resize back, intensity rescale."""

    rotation_range: float = 25.0  # degrees, drawn from U(-range, +range)
    crop_fraction: float = 0.9  # side fraction retained by the central crop
    hflip: bool = True
    vflip: bool = True
    rescale_range: tuple[float, float] = (0.9, 1.1)

    def __post_init__(self):
        if not 0.0 < self.crop_fraction <= 1.0:
            raise ParamError(f"crop_fraction must be in (0, 1], got {self.crop_fraction}")
        if self.rotation_range < 0:
            raise ParamError(f"rotation_range must be >= 0, got {self.rotation_range}")
        lo, hi = self.rescale_range
        if not (0.0 < lo <= hi):
            raise ParamError(f"invalid rescale_range {self.rescale_range}")


def _sha256_file(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def ingest(root: str | Path, seed: int = 0) -> tuple[DatasetManifest, list[SkippedFile]]:
    """Scan a class-per-directory dataset into a manifest.

    Undecodable files are skipped and reported, never silently dropped.
    Raises when a class directory is missing or contains no usable image.
    """
    root = Path(root)
    if not root.is_dir():
        raise IngestError(f"dataset root {root} is not a directory")
    samples: list[LabeledSample] = []
    skipped: list[SkippedFile] = []
    for label, name in enumerate(CLASS_NAMES):
        class_dir = root / name
        if not class_dir.is_dir():
            raise IngestError(f"missing class directory: {class_dir}")
        n_before = len(samples)
        for path in sorted(class_dir.iterdir()):
            if path.suffix.lower() not in _IMAGE_SUFFIXES or not path.is_file():
                continue
            rel = str(path.relative_to(root))
            try:
                data = path.read_bytes()
                decode_image(data)
            except PipelineError as exc:
                skipped.append(SkippedFile(path=rel, reason=str(exc)))
                continue
            samples.append(
                LabeledSample(path=rel, label=label, checksum=hashlib.sha256(data).hexdigest())
            )
        if len(samples) == n_before:
            raise IngestError(f"no decodable images in class directory: {class_dir}")
    samples.sort(key=lambda s: (s.label, s.path))
    manifest = DatasetManifest(
        root=str(root.resolve()),
        samples=samples,
        seed=seed,
        created_at=datetime.now(timezone.utc).isoformat(),
    )
    return manifest, skipped


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def stratified_split(
    manifest: DatasetManifest, train_fraction: float = 0.7, seed: int | None = None
) -> DatasetManifest:
    """Assign train/test per class, seeded and deterministic.

    Each class contributes floor(count * (1 - fraction)) test samples; any
    slots still needed to reach round(total * (1 - fraction)) go to classes
    in ascending order of size.
    """
    if not 0.0 < train_fraction < 1.0:
        raise ParamError(f"train_fraction must be in (0, 1), got {train_fraction}")
    if any(s.split != "unassigned" for s in manifest.samples):
        raise SplitError("manifest already has split assignments")
    seed = manifest.seed if seed is None else seed
    by_class: list[list[int]] = [[] for _ in range(NUM_CLASSES)]
    for i, s in enumerate(manifest.samples):
        by_class[s.label].append(i)
    counts = [len(ix) for ix in by_class]
    for label, n in enumerate(counts):
        if n < 2:
            raise SplitError(f"class {CLASS_NAMES[label]} has {n} sample(s); need at least 2")

    test_frac = 1.0 - train_fraction
    test_counts = [int(math.floor(n * test_frac)) for n in counts]
    target = _round_half_up(sum(counts) * test_frac)
    deficit = target - sum(test_counts)
    for label in sorted(range(NUM_CLASSES), key=lambda k: (counts[k], k)):
        if deficit <= 0:
            break
        if test_counts[label] < counts[label] - 1:
            test_counts[label] += 1
            deficit -= 1

    rng = seed_stream(seed, "split")
    assigned = list(manifest.samples)
    for label in range(NUM_CLASSES):
        order = rng.permutation(len(by_class[label]))
        for j, pos in enumerate(order):
            idx = by_class[label][pos]
            split = "test" if j < test_counts[label] else "train"
            assigned[idx] = replace(assigned[idx], split=split)
    return replace_samples(manifest, assigned)


def replace_samples(manifest: DatasetManifest, samples: list[LabeledSample]) -> DatasetManifest:
    return DatasetManifest(
        root=manifest.root,
        samples=samples,
        seed=manifest.seed,
        created_at=manifest.created_at,
        config_hash=manifest.config_hash,
    )


def hflip(img: ImageTensor) -> ImageTensor:
    return ImageTensor(np.ascontiguousarray(img.data[:, ::-1]))


def vflip(img: ImageTensor) -> ImageTensor:
    return ImageTensor(np.ascontiguousarray(img.data[::-1]))


def _reflect_coords(coords: np.ndarray, n: int) -> np.ndarray:
    # Mirror continuous coordinates into [-0.5, n - 0.5) with the edge-
    # inclusive symmetry used by the filters (position -1 maps to 0).
    if n == 1:
        return np.zeros_like(coords)
    period = 2.0 * n
    m = np.mod(coords + 0.5, period) - 0.5
    return np.where(m > n - 0.5, period - 1.0 - m, m)


def _bilinear_sample(data: np.ndarray, ys: np.ndarray, xs: np.ndarray) -> np.ndarray:
    h, w = data.shape[:2]
    y0 = np.clip(np.floor(ys).astype(np.intp), 0, h - 1)
    x0 = np.clip(np.floor(xs).astype(np.intp), 0, w - 1)
    y1 = np.minimum(y0 + 1, h - 1)
    x1 = np.minimum(x0 + 1, w - 1)
    fy = (ys - y0)[..., None]
    fx = (xs - x0)[..., None]
    top = data[y0, x0] * (1.0 - fx) + data[y0, x1] * fx
    bot = data[y1, x0] * (1.0 - fx) + data[y1, x1] * fx
    return top * (1.0 - fy) + bot * fy


def rotate(img: ImageTensor, degrees: float) -> ImageTensor:
    """Rotate counterclockwise about the image center, bilinear resampling
    with mirrored fill. Exact for multiples of 90 degrees on square images."""
    if degrees == 0.0:
        return img
    theta = math.radians(degrees)
    h, w = img.height, img.width
    cy, cx = (h - 1) / 2.0, (w - 1) / 2.0
    yy, xx = np.meshgrid(np.arange(h, dtype=np.float64), np.arange(w, dtype=np.float64), indexing="ij")
    dx, dy = xx - cx, yy - cy
    src_x = cx + math.cos(theta) * dx - math.sin(theta) * dy
    src_y = cy + math.sin(theta) * dx + math.cos(theta) * dy
    out = _bilinear_sample(
        img.data.astype(np.float64), _reflect_coords(src_y, h), _reflect_coords(src_x, w)
    )
    return ImageTensor(np.clip(out, 0.0, 1.0).astype(np.float32))


def central_crop_resize(img: ImageTensor, fraction: float) -> ImageTensor:
    """Crop the central `fraction` of each side, then resize back."""
    if fraction >= 1.0:
        return img
    ch = max(1, _round_half_up(img.height * fraction))
    cw = max(1, _round_half_up(img.width * fraction))
    y0 = (img.height - ch) // 2
    x0 = (img.width - cw) // 2
    cropped = ImageTensor(np.ascontiguousarray(img.data[y0 : y0 + ch, x0 : x0 + cw]))
    return resize_bilinear(cropped, img.height, img.width)


def rescale_intensity(img: ImageTensor, factor: float) -> ImageTensor:
    if factor == 1.0:
        return img
    return ImageTensor(np.clip(img.data * np.float32(factor), 0.0, 1.0))


def augment(img: ImageTensor, spec: AugmentSpec, rng: np.random.Generator) -> ImageTensor:
    """One random augmentation draw. All randomness comes from `rng`."""
    if spec.hflip and rng.random() < 0.5:
        img = hflip(img)
    if spec.vflip and rng.random() < 0.5:
        img = vflip(img)
    if spec.rotation_range > 0:
        img = rotate(img, float(rng.uniform(-spec.rotation_range, spec.rotation_range)))
    if spec.crop_fraction < 1.0:
        img = central_crop_resize(img, spec.crop_fraction)
    lo, hi = spec.rescale_range
    if hi > lo:
        img = rescale_intensity(img, float(rng.uniform(lo, hi)))
    elif lo != 1.0:
        img = rescale_intensity(img, lo)
    return img


def oversample_balance(
    manifest: DatasetManifest, spec: AugmentSpec, seed: int | None = None
) -> DatasetManifest:
    """Top up minority train classes with augmented copies of seeded-randomly
    chosen originals until every train class matches the majority count.
    Test samples are never touched and never serve as augmentation sources.
    """
    seed = manifest.seed if seed is None else seed
    train_by_class: list[list[LabeledSample]] = [[] for _ in range(NUM_CLASSES)]
    for s in manifest.samples:
        if s.split == "train":
            train_by_class[s.label].append(s)
    counts = [len(g) for g in train_by_class]
    majority = max(counts)
    if majority == 0:
        raise SplitError("no train samples; run stratified_split first")

    rng = seed_stream(seed, "oversample")
    new_samples = list(manifest.samples)
    copy_index = 0
    for label in range(NUM_CLASSES):
        deficit = majority - counts[label]
        if deficit == 0:
            continue
        originals = train_by_class[label]
        order = rng.permutation(len(originals))
        for i in range(deficit):
            src = originals[order[i % len(originals)]]
            new_samples.append(
                LabeledSample(
                    path=src.path,
                    label=src.label,
                    checksum=src.checksum,
                    split="train",
                    augmented=True,
                    source_path=src.path,
                    aug_seed=derive_seed(seed, "augment", copy_index),
                )
            )
            copy_index += 1
    return replace_samples(manifest, new_samples)


def load_sample(
    manifest: DatasetManifest,
    sample: LabeledSample,
    input_size: int | None = None,
    spec: AugmentSpec | None = None,
) -> ImageTensor:
    """Materialize one manifest entry as pixels, regenerating augmented
    copies from their stored seed."""
    img = decode_image((Path(manifest.root) / sample.path).read_bytes())
    if input_size is not None:
        img = resize_bilinear(img, input_size, input_size)
    if sample.augmented:
        img = augment(img, spec or AugmentSpec(), np.random.default_rng(sample.aug_seed))
    return img


def load_split_arrays(
    manifest: DatasetManifest,
    split: str,
    input_size: int,
    spec: AugmentSpec | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Stack one split into (N, S, S, 3) float32 pixels and (N,) labels."""
    subset = manifest.subset(split)
    if not subset:
        raise SplitError(f"no samples in split {split!r}")
    xs = np.stack([load_sample(manifest, s, input_size, spec).data for s in subset])
    ys = np.array([s.label for s in subset], dtype=np.int64)
    return xs, ys
