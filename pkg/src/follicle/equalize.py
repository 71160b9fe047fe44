"""Histogram equalization and CLAHE on the luminance channel.

Color images are converted to YCbCr, the Y channel is remapped, and chroma
passes through untouched. Single-channel images are remapped directly.
Intensities quantize to 256 bins; the equalization mapping is

    L(v) = round(255 * (cdf(v) - cdf_min) / (N - cdf_min))

with cdf_min the CDF value at the first occupied bin. A constant region
(N == cdf_min) keeps its value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParamError, SizeError
from .image import ImageTensor, from_luma_chroma, quantize_256, to_luma_chroma


@dataclass(frozen=True)
class ClaheParams:
    """CLAHE tile grid and clip limit.

    ``clip_limit`` is a multiple of the uniform bin height (tile_pixels/256),
    so its meaning is invariant to image size. 1.0 flattens everything;
    values >= 256 disable clipping entirely.
    """

    tiles_x: int = 8
    tiles_y: int = 8
    clip_limit: float = 2.0

    def __post_init__(self):
        if self.tiles_x < 1 or self.tiles_y < 1:
            raise ParamError(f"tile counts must be >= 1, got {self.tiles_x}x{self.tiles_y}")
        if self.clip_limit < 1.0:
            raise ParamError(f"clip_limit must be >= 1.0, got {self.clip_limit}")


def equalization_lut(hist: np.ndarray, total: float) -> np.ndarray:
    """Level mapping 0..255 -> 0..255 from a (possibly fractional) histogram.

    Monotone non-decreasing; identity when all mass sits in one bin.
    """
    cdf = np.cumsum(hist)
    occupied = np.nonzero(hist > 0)[0]
    cdf_min = cdf[occupied[0]] if occupied.size else total
    denom = total - cdf_min
    if denom <= 0:
        return np.arange(256, dtype=np.float64)
    lut = np.round(255.0 * (cdf - cdf_min) / denom)
    return np.clip(lut, 0.0, 255.0)


def clip_histogram(hist: np.ndarray, clip_limit: float) -> np.ndarray:
    """Clip bins at clip_limit * (total/256) and spread the excess uniformly.

    One redistribution pass: bins receive excess/256 each, which may leave
    formerly-full bins marginally above the ceiling. Total mass is preserved.
    """
    hist = hist.astype(np.float64)
    ceiling = clip_limit * hist.sum() / 256.0
    excess = np.maximum(hist - ceiling, 0.0).sum()
    return np.minimum(hist, ceiling) + excess / 256.0


def _split_edges(n: int, tiles: int) -> np.ndarray:
    # Tile boundaries covering [0, n) with sizes differing by at most 1.
    return np.floor(np.arange(tiles + 1) * n / tiles).astype(np.intp)


def _interp_axis(n: int, centers: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    # For each pixel index, the bracketing tile indices and blend weight.
    # Pixels outside the first/last tile centers clamp to the edge mapping.
    if len(centers) == 1:
        zero = np.zeros(n, dtype=np.intp)
        return zero, zero, np.zeros(n)
    pos = np.arange(n, dtype=np.float64)
    hi = np.clip(np.searchsorted(centers, pos, side="right"), 1, len(centers) - 1)
    lo = hi - 1
    wgt = np.clip((pos - centers[lo]) / (centers[hi] - centers[lo]), 0.0, 1.0)
    return lo, hi, wgt


def _equalize_channel(chan: np.ndarray) -> np.ndarray:
    bins = quantize_256(chan)
    hist = np.bincount(bins.ravel(), minlength=256).astype(np.float64)
    lut = equalization_lut(hist, float(chan.size))
    return lut[bins] / 255.0


def _clahe_channel(chan: np.ndarray, params: ClaheParams) -> np.ndarray:
    h, w = chan.shape
    ty, tx = params.tiles_y, params.tiles_x
    if h < ty or w < tx:
        raise SizeError(f"image {h}x{w} smaller than tile grid {ty}x{tx}")
    bins = quantize_256(chan)
    row_edges = _split_edges(h, ty)
    col_edges = _split_edges(w, tx)

    luts = np.empty((ty, tx, 256))
    for r in range(ty):
        for c in range(tx):
            tile = bins[row_edges[r] : row_edges[r + 1], col_edges[c] : col_edges[c + 1]]
            hist = np.bincount(tile.ravel(), minlength=256).astype(np.float64)
            clipped = clip_histogram(hist, params.clip_limit)
            luts[r, c] = equalization_lut(clipped, float(tile.size))

    row_centers = (row_edges[:-1] + row_edges[1:] - 1) / 2.0
    col_centers = (col_edges[:-1] + col_edges[1:] - 1) / 2.0
    r0, r1, wy = _interp_axis(h, row_centers)
    c0, c1, wx = _interp_axis(w, col_centers)

    # Gather the four surrounding tile mappings for every pixel and blend.
    r0 = r0[:, None]
    r1 = r1[:, None]
    wy = wy[:, None]
    top = (1.0 - wx) * luts[r0, c0[None, :], bins] + wx * luts[r0, c1[None, :], bins]
    bot = (1.0 - wx) * luts[r1, c0[None, :], bins] + wx * luts[r1, c1[None, :], bins]
    return ((1.0 - wy) * top + wy * bot) / 255.0


def _apply_on_luma(img: ImageTensor, fn) -> ImageTensor:
    if img.channels == 1:
        out = fn(img.data[:, :, 0].astype(np.float64))
        return ImageTensor(np.clip(out, 0.0, 1.0).astype(np.float32)[:, :, None])
    ycc = to_luma_chroma(img)
    y = fn(ycc.data[:, :, 0].astype(np.float64))
    merged = np.stack(
        [np.clip(y, 0.0, 1.0).astype(np.float32), ycc.data[:, :, 1], ycc.data[:, :, 2]], axis=-1
    )
    return from_luma_chroma(ImageTensor(np.ascontiguousarray(merged)))


def hist_equalize(img: ImageTensor) -> ImageTensor:
    """Global histogram equalization of the luminance channel."""
    return _apply_on_luma(img, _equalize_channel)


def clahe(img: ImageTensor, params: ClaheParams | None = None) -> ImageTensor:
    """Contrast-limited adaptive equalization: per-tile clipped histograms
    with bilinear interpolation between the four surrounding tile mappings.
    """
    params = params or ClaheParams()
    return _apply_on_luma(img, lambda chan: _clahe_channel(chan, params))
