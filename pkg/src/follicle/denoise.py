"""Noise filters: gaussian, median, bilateral, and non-local means.

All filters operate independently per channel, accumulate in float64 with
a fixed summation order, and use edge-inclusive mirror padding, so results
are deterministic and every output pixel is a convex combination of input
pixels. Set ``CHECK_WEIGHTS = True`` to assert per-pixel weight invariants
(non-negative, normalized) inside the weighted filters.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ParamError, SizeError
from .image import ImageTensor

# Debug mode: verify weight normalization inside bilateral/NLM.
CHECK_WEIGHTS = False


@dataclass(frozen=True)
class NlmParams:
    """Non-local means parameters.

    ``strength`` is the decay constant h of the exponential patch-distance
    weighting, in intensity units on [0, 1].
    """

    patch_size: int = 3
    patch_distance: int = 5
    strength: float = 0.1

    def __post_init__(self):
        if self.patch_size < 1 or self.patch_size % 2 == 0:
            raise ParamError(f"patch_size must be odd and >= 1, got {self.patch_size}")
        if self.patch_distance < 1:
            raise ParamError(f"patch_distance must be >= 1, got {self.patch_distance}")
        if not self.strength > 0:
            raise ParamError(f"strength must be > 0, got {self.strength}")


def _pad(arr: np.ndarray, pad_h: int, pad_w: int) -> np.ndarray:
    # Edge-inclusive mirror; works for images as small as 1x1.
    return np.pad(arr, ((pad_h, pad_h), (pad_w, pad_w), (0, 0)), mode="symmetric")


def _finish(out: np.ndarray) -> ImageTensor:
    return ImageTensor(np.clip(out, 0.0, 1.0).astype(np.float32))


def gaussian_kernel_1d(sigma: float, kernel_size: int) -> np.ndarray:
    """Normalized 1-d Gaussian taps of the given odd length."""
    half = kernel_size // 2
    offsets = np.arange(-half, half + 1, dtype=np.float64)
    k = np.exp(-(offsets**2) / (2.0 * sigma * sigma))
    return k / k.sum()


def gaussian_blur(img: ImageTensor, sigma: float, kernel_size: int) -> ImageTensor:
    """Separable Gaussian convolution."""
    if not sigma > 0:
        raise ParamError(f"sigma must be > 0, got {sigma}")
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ParamError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    k = gaussian_kernel_1d(sigma, kernel_size)
    half = kernel_size // 2
    h, w = img.height, img.width

    a = _pad(img.data.astype(np.float64), half, 0)
    vert = np.zeros((h, w, img.channels))
    for i in range(kernel_size):
        vert += k[i] * a[i : i + h]
    a = np.pad(vert, ((0, 0), (half, half), (0, 0)), mode="symmetric")
    out = np.zeros_like(vert)
    for i in range(kernel_size):
        out += k[i] * a[:, i : i + w]
    return _finish(out)


def median_filter(img: ImageTensor, kernel_size: int = 3) -> ImageTensor:
    """Median of the k x k mirrored neighborhood of each pixel."""
    if kernel_size < 1 or kernel_size % 2 == 0:
        raise ParamError(f"kernel_size must be odd and >= 1, got {kernel_size}")
    half = kernel_size // 2
    padded = _pad(img.data, half, half)
    windows = np.lib.stride_tricks.sliding_window_view(padded, (kernel_size, kernel_size), axis=(0, 1))
    out = np.median(windows.reshape(*windows.shape[:3], -1), axis=-1)
    return _finish(out)


def bilateral_filter(img: ImageTensor, sigma_spatial: float, sigma_range: float) -> ImageTensor:
    """Edge-preserving blur with joint spatial/intensity Gaussian weights.

    Window radius is ceil(3 * sigma_spatial); range weights are computed
    per channel.
    """
    if not sigma_spatial > 0 or not sigma_range > 0:
        raise ParamError(f"sigmas must be > 0, got {sigma_spatial}, {sigma_range}")
    radius = math.ceil(3.0 * sigma_spatial)
    h, w = img.height, img.width
    center = img.data.astype(np.float64)
    padded = _pad(center, radius, radius)

    inv_2ss = 1.0 / (2.0 * sigma_spatial * sigma_spatial)
    inv_2sr = 1.0 / (2.0 * sigma_range * sigma_range)
    num = np.zeros_like(center)
    den = np.zeros_like(center)
    for dy in range(-radius, radius + 1):
        for dx in range(-radius, radius + 1):
            shifted = padded[radius + dy : radius + dy + h, radius + dx : radius + dx + w]
            dv = shifted - center
            wgt = math.exp(-(dy * dy + dx * dx) * inv_2ss) * np.exp(-(dv * dv) * inv_2sr)
            if CHECK_WEIGHTS:
                assert np.all(wgt >= 0.0)
            num += wgt * shifted
            den += wgt
    if CHECK_WEIGHTS:
        assert np.all(den > 0.0)
    return _finish(num / den)


def _box_mean(arr: np.ndarray, half: int) -> np.ndarray:
    # Uniform (2*half+1)^2 mean, valid positions only; shift-add keeps the
    # summation order fixed.
    size = 2 * half + 1
    h = arr.shape[0] - 2 * half
    acc = np.zeros((h,) + arr.shape[1:])
    for i in range(size):
        acc += arr[i : i + h]
    w = arr.shape[1] - 2 * half
    out = np.zeros((h, w) + arr.shape[2:])
    for i in range(size):
        out += acc[:, i : i + w]
    return out / float(size * size)


def nlm_denoise(img: ImageTensor, params: NlmParams | None = None, noise_sigma: float = 0.0) -> ImageTensor:
    """Non-local means: each pixel becomes a weighted mean over its search
    window, weighted by exp(-max(d^2 - 2*sigma^2, 0) / h^2) where d^2 is the
    mean squared patch difference.
    """
    params = params or NlmParams()
    if img.height < params.patch_size or img.width < params.patch_size:
        raise SizeError(
            f"image {img.height}x{img.width} smaller than one {params.patch_size}x{params.patch_size} patch"
        )
    f = params.patch_size // 2
    t = params.patch_distance
    pad = t + f
    h, w = img.height, img.width
    center = img.data.astype(np.float64)
    padded = _pad(center, pad, pad)

    inv_h2 = 1.0 / (params.strength * params.strength)
    two_sigma2 = 2.0 * noise_sigma * noise_sigma
    num = np.zeros_like(center)
    den = np.zeros_like(center)
    # Patch distances need squared differences on an f-wide margin around
    # the image; the central region of `padded` provides it.
    ref = padded[t : t + h + 2 * f, t : t + w + 2 * f]
    for dy in range(-t, t + 1):
        for dx in range(-t, t + 1):
            shifted = padded[t + dy : t + dy + h + 2 * f, t + dx : t + dx + w + 2 * f]
            d2 = _box_mean((ref - shifted) ** 2, f)
            wgt = np.exp(-np.maximum(d2 - two_sigma2, 0.0) * inv_h2)
            if CHECK_WEIGHTS:
                assert np.all(wgt >= 0.0) and np.all(wgt <= 1.0)
            num += wgt * shifted[f : f + h, f : f + w]
            den += wgt
    if CHECK_WEIGHTS:
        assert np.all(den >= 1.0)  # the zero-offset term contributes weight 1
    return _finish(num / den)
