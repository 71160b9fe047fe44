"""Independent brute-force reference implementations used as test oracles.

Everything here is deliberately written as plain nested loops over pixels,
windows, and channels, sharing no code with the package other than numpy
itself, so agreement is evidence rather than tautology.
"""

from __future__ import annotations

import math

import numpy as np


def mirror_index(i: int, n: int) -> int:
    """Edge-inclusive mirror of an integer index into [0, n)."""
    if n == 1:
        return 0
    period = 2 * n
    i = i % period
    if i < 0:
        i += period
    return i if i < n else period - 1 - i


def resize_bilinear_ref(img: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Per-pixel bilinear interpolation with half-pixel centers."""
    in_h, in_w, c = img.shape
    out = np.zeros((out_h, out_w, c))
    for y in range(out_h):
        sy = min(max((y + 0.5) * in_h / out_h - 0.5, 0.0), in_h - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, in_h - 1)
        fy = sy - y0
        for x in range(out_w):
            sx = min(max((x + 0.5) * in_w / out_w - 0.5, 0.0), in_w - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, in_w - 1)
            fx = sx - x0
            for ch in range(c):
                top = img[y0, x0, ch] * (1 - fx) + img[y0, x1, ch] * fx
                bot = img[y1, x0, ch] * (1 - fx) + img[y1, x1, ch] * fx
                out[y, x, ch] = top * (1 - fy) + bot * fy
    return out


def median_filter_ref(img: np.ndarray, k: int) -> np.ndarray:
    h, w, c = img.shape
    half = k // 2
    out = np.zeros((h, w, c))
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                vals = []
                for dy in range(-half, half + 1):
                    for dx in range(-half, half + 1):
                        vals.append(img[mirror_index(y + dy, h), mirror_index(x + dx, w), ch])
                vals.sort()
                out[y, x, ch] = vals[len(vals) // 2]
    return out


def bilateral_filter_ref(img: np.ndarray, sigma_spatial: float, sigma_range: float) -> np.ndarray:
    h, w, c = img.shape
    radius = math.ceil(3.0 * sigma_spatial)
    out = np.zeros((h, w, c))
    for y in range(h):
        for x in range(w):
            for ch in range(c):
                center = img[y, x, ch]
                num = 0.0
                den = 0.0
                for dy in range(-radius, radius + 1):
                    for dx in range(-radius, radius + 1):
                        v = img[mirror_index(y + dy, h), mirror_index(x + dx, w), ch]
                        wt = math.exp(-(dy * dy + dx * dx) / (2 * sigma_spatial**2)) * math.exp(
                            -((v - center) ** 2) / (2 * sigma_range**2)
                        )
                        num += wt * v
                        den += wt
                out[y, x, ch] = num / den
    return out


def nlm_ref(img: np.ndarray, patch_size: int, patch_distance: int, h_strength: float) -> np.ndarray:
    """Quadruple-nested-loop non-local means (pixels x search offsets),
    with two more loops inside for the patch comparison."""
    hgt, wid, c = img.shape
    f = patch_size // 2
    t = patch_distance
    inv_h2 = 1.0 / (h_strength * h_strength)
    out = np.zeros((hgt, wid, c))
    for y in range(hgt):
        for x in range(wid):
            for ch in range(c):
                num = 0.0
                den = 0.0
                for dy in range(-t, t + 1):
                    for dx in range(-t, t + 1):
                        d2 = 0.0
                        for py in range(-f, f + 1):
                            for px in range(-f, f + 1):
                                a = img[mirror_index(y + py, hgt), mirror_index(x + px, wid), ch]
                                b = img[
                                    mirror_index(y + dy + py, hgt), mirror_index(x + dx + px, wid), ch
                                ]
                                d2 += (a - b) ** 2
                        d2 /= patch_size * patch_size
                        wt = math.exp(-d2 * inv_h2)
                        num += wt * img[mirror_index(y + dy, hgt), mirror_index(x + dx, wid), ch]
                        den += wt
                out[y, x, ch] = num / den
    return out


def conv2d_ref(x: np.ndarray, w: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Six-nested-loop same-padding 3x3 convolution, NHWC batch."""
    n, h, wid, cin = x.shape
    cout = w.shape[3]
    xp = np.pad(x, ((0, 0), (1, 1), (1, 1), (0, 0)))
    out = np.zeros((n, h, wid, cout))
    for ni in range(n):
        for y in range(h):
            for xx in range(wid):
                for o in range(cout):
                    acc = float(b[o])
                    for ky in range(3):
                        for kx in range(3):
                            for i in range(cin):
                                acc += xp[ni, y + ky, xx + kx, i] * w[ky, kx, i, o]
                    out[ni, y, xx, o] = acc
    return out


def maxpool_ref(x: np.ndarray) -> np.ndarray:
    n, h, w, c = x.shape
    out = np.zeros((n, h // 2, w // 2, c))
    for ni in range(n):
        for y in range(h // 2):
            for xx in range(w // 2):
                for ch in range(c):
                    out[ni, y, xx, ch] = x[ni, 2 * y : 2 * y + 2, 2 * xx : 2 * xx + 2, ch].max()
    return out


def metrics_ref(true: np.ndarray, pred: np.ndarray, k: int) -> dict:
    """Precision/recall/F1/accuracy recomputed directly from label pairs."""
    precision, recall, f1 = [], [], []
    for cls in range(k):
        tp = int(np.sum((pred == cls) & (true == cls)))
        predicted = int(np.sum(pred == cls))
        actual = int(np.sum(true == cls))
        p = tp / predicted if predicted else 0.0
        r = tp / actual if actual else 0.0
        precision.append(p)
        recall.append(r)
        f1.append(2 * p * r / (p + r) if p + r else 0.0)
    return {
        "accuracy": float(np.mean(true == pred)),
        "precision": precision,
        "recall": recall,
        "f1": f1,
    }


def finite_diff_grad(loss_fn, tensor: np.ndarray, coords, delta: float = 1e-3) -> list[float]:
    """Central finite differences of loss_fn at the given tensor coords."""
    grads = []
    for idx in coords:
        orig = tensor[idx]
        tensor[idx] = orig + delta
        up = loss_fn()
        tensor[idx] = orig - delta
        down = loss_fn()
        tensor[idx] = orig
        grads.append((up - down) / (2 * delta))
    return grads
