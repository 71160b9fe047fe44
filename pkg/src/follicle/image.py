"""Image representation, codec, resizing, and color-space conversion.

The canonical unit is :class:`ImageTensor`: an H x W x C array of 32-bit
floats in [0, 1], C in {1, 3}. Histogram-based operations quantize to 256
bins internally; the bin of a value v is floor(v * 255 + 0.5).
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DecodeError, ParamError, ShapeError, SizeError, UnsupportedFormatError

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"
_JPEG_MAGIC = b"\xff\xd8\xff"

# BT.601 luma coefficients.
_KR, _KG, _KB = 0.299, 0.587, 0.114


@dataclass(frozen=True)
class ImageTensor:
    """Immutable H x W x C float32 raster with values in [0, 1]."""

    data: np.ndarray

    def __post_init__(self):
        arr = self.data
        if not isinstance(arr, np.ndarray) or arr.ndim != 3:
            raise ShapeError(f"expected a 3-d array, got {getattr(arr, 'shape', type(arr))}")
        h, w, c = arr.shape
        if h < 1 or w < 1:
            raise SizeError(f"image dimensions must be >= 1, got {h}x{w}")
        if c not in (1, 3):
            raise ShapeError(f"channel count must be 1 or 3, got {c}")
        if arr.dtype != np.float32:
            raise ShapeError(f"expected float32 data, got {arr.dtype}")
        if not np.all(np.isfinite(arr)):
            raise ParamError("image contains non-finite values")
        if arr.min() < 0.0 or arr.max() > 1.0:
            raise ParamError(f"values outside [0, 1]: min={arr.min()}, max={arr.max()}")
        arr.flags.writeable = False

    @classmethod
    def from_array(cls, arr: np.ndarray) -> "ImageTensor":
        """Validate and wrap an array, casting to float32 and adding a
        trailing channel axis to 2-d input."""
        arr = np.asarray(arr)
        if arr.ndim == 2:
            arr = arr[:, :, None]
        return cls(np.ascontiguousarray(arr, dtype=np.float32))

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]


@dataclass(frozen=True)
class IntensityHistogram:
    """256-bin intensity histogram of one channel."""

    bins: np.ndarray
    total: int = field(default=0)

    def __post_init__(self):
        if self.bins.shape != (256,):
            raise ShapeError(f"expected 256 bins, got {self.bins.shape}")
        if int(self.bins.sum()) != self.total:
            raise ParamError("histogram total inconsistent with bin counts")


def decode_image(data: bytes) -> ImageTensor:
    """Decode a PNG or JPEG byte stream to an RGB tensor.

    8-bit source values v map to v / 255.0. Grayscale and palette sources
    are promoted to three channels; 16-bit sources are rejected.
    """
    if data.startswith(_PNG_MAGIC):
        fmt = "PNG"
    elif data.startswith(_JPEG_MAGIC):
        fmt = "JPEG"
    else:
        head = data[:8].hex() if data else "<empty>"
        raise UnsupportedFormatError(f"not a PNG or JPEG stream (leading bytes {head})")
    try:
        with Image.open(io.BytesIO(data)) as im:
            if im.format != fmt:
                raise DecodeError(f"container/magic mismatch: {im.format} vs {fmt}")
            if im.mode in ("I", "I;16", "I;16B", "I;16L"):
                raise UnsupportedFormatError(f"16-bit depth not supported (mode {im.mode})")
            rgb = im.convert("RGB")
            rgb.load()
    except UnidentifiedImageError as exc:
        raise DecodeError(f"unrecognized {fmt} stream: {exc}") from exc
    except (OSError, SyntaxError, ValueError) as exc:
        raise DecodeError(f"malformed {fmt} stream: {exc}") from exc
    arr = np.asarray(rgb, dtype=np.float32) / 255.0
    return ImageTensor(np.ascontiguousarray(arr))


def _to_uint8(img: ImageTensor) -> np.ndarray:
    return np.floor(img.data * 255.0 + 0.5).astype(np.uint8)


def encode_png(img: ImageTensor) -> bytes:
    """Encode to PNG bytes (lossless for the quantized 8-bit values)."""
    arr = _to_uint8(img)
    mode = "L" if img.channels == 1 else "RGB"
    pil = Image.fromarray(arr[:, :, 0] if img.channels == 1 else arr, mode)
    buf = io.BytesIO()
    pil.save(buf, format="PNG")
    return buf.getvalue()


def encode_jpeg(img: ImageTensor, quality: int = 95) -> bytes:
    """Encode to JPEG bytes without chroma subsampling."""
    arr = _to_uint8(img)
    mode = "L" if img.channels == 1 else "RGB"
    pil = Image.fromarray(arr[:, :, 0] if img.channels == 1 else arr, mode)
    buf = io.BytesIO()
    pil.save(buf, format="JPEG", quality=quality, subsampling=0)
    return buf.getvalue()


def _axis_coords(out_n: int, in_n: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # Half-pixel center alignment: output center maps to input coordinate
    # (i + 0.5) * in/out - 0.5, clamped to the valid range.
    src = (np.arange(out_n, dtype=np.float64) + 0.5) * (in_n / out_n) - 0.5
    src = np.clip(src, 0.0, in_n - 1.0)
    i0 = np.floor(src).astype(np.intp)
    i1 = np.minimum(i0 + 1, in_n - 1)
    return i0, i1, src - i0


def resize_bilinear(img: ImageTensor, out_h: int, out_w: int) -> ImageTensor:
    """Bilinear resize with half-pixel centers. Identity dims are a no-op."""
    if out_h < 1 or out_w < 1:
        raise ParamError(f"output dims must be >= 1, got {out_h}x{out_w}")
    if out_h == img.height and out_w == img.width:
        return img
    a = img.data.astype(np.float64)
    y0, y1, fy = _axis_coords(out_h, img.height)
    x0, x1, fx = _axis_coords(out_w, img.width)
    rows = a[y0] * (1.0 - fy)[:, None, None] + a[y1] * fy[:, None, None]
    out = rows[:, x0] * (1.0 - fx)[None, :, None] + rows[:, x1] * fx[None, :, None]
    return ImageTensor(np.clip(out, 0.0, 1.0).astype(np.float32))


def to_luma_chroma(img: ImageTensor) -> ImageTensor:
    """RGB -> BT.601 YCbCr with chroma centered at 0.5, clamped to [0, 1]."""
    if img.channels != 3:
        raise ShapeError(f"expected 3 channels, got {img.channels}")
    a = img.data.astype(np.float64)
    r, g, b = a[:, :, 0], a[:, :, 1], a[:, :, 2]
    y = _KR * r + _KG * g + _KB * b
    cb = 0.5 + (b - y) * (0.5 / (1.0 - _KB))
    cr = 0.5 + (r - y) * (0.5 / (1.0 - _KR))
    out = np.stack([y, cb, cr], axis=-1)
    return ImageTensor(np.clip(out, 0.0, 1.0).astype(np.float32))


def from_luma_chroma(img: ImageTensor) -> ImageTensor:
    """Inverse of :func:`to_luma_chroma`, clamped to [0, 1]."""
    if img.channels != 3:
        raise ShapeError(f"expected 3 channels, got {img.channels}")
    a = img.data.astype(np.float64)
    y, cb, cr = a[:, :, 0], a[:, :, 1], a[:, :, 2]
    r = y + (cr - 0.5) * ((1.0 - _KR) / 0.5)
    b = y + (cb - 0.5) * ((1.0 - _KB) / 0.5)
    g = (y - _KR * r - _KB * b) / _KG
    out = np.stack([r, g, b], axis=-1)
    return ImageTensor(np.clip(out, 0.0, 1.0).astype(np.float32))


def quantize_256(values: np.ndarray) -> np.ndarray:
    """Map values in [0, 1] to bin indices 0..255 (round half up)."""
    return np.floor(values * 255.0 + 0.5).astype(np.intp)


def histogram_256(img: ImageTensor, channel: int) -> IntensityHistogram:
    """256-bin histogram of one channel."""
    if not 0 <= channel < img.channels:
        raise ParamError(f"channel {channel} out of range for {img.channels}-channel image")
    bins = np.bincount(quantize_256(img.data[:, :, channel]).ravel(), minlength=256)
    return IntensityHistogram(bins=bins.astype(np.int64), total=img.height * img.width)
