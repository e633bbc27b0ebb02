"""Image similarity scores mapped to [0, 1] (1 = identical).

All inputs are intensity grids in [0, 1], typically polar frames.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np
from scipy.ndimage import correlate1d

from .scene import InvalidParameterError

PSNR_CAP_DB = 100.0
SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03
MS_SSIM_WEIGHTS = (0.0448, 0.2856, 0.3001, 0.2363, 0.1333)


@dataclass(frozen=True)
class SimilarityReport:
    mse_similarity: float
    psnr_similarity: float
    ssim: float
    ms_ssim: float

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(a, b) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise InvalidParameterError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def mse(a, b) -> float:
    a, b = _pair(a, b)
    return float(np.mean((a - b) ** 2))


def mse_similarity(a, b) -> float:
    """``1 - MSE`` (the largest possible MSE on [0, 1] data is 1)."""
    return float(np.clip(1.0 - mse(a, b), 0.0, 1.0))


def psnr(a, b) -> float:
    err = mse(a, b)
    return np.inf if err == 0 else float(10.0 * np.log10(1.0 / err))


def psnr_similarity(a, b, cap_db: float = PSNR_CAP_DB) -> float:
    """PSNR (peak 1.0) divided by ``cap_db`` and clamped to [0, 1]."""
    p = psnr(a, b)
    if np.isinf(p):
        return 1.0
    return float(np.clip(p / cap_db, 0.0, 1.0))


def gaussian_window(size: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA) -> np.ndarray:
    x = np.arange(size) - (size - 1) / 2.0
    g = np.exp(-(x ** 2) / (2 * sigma ** 2))
    return g / g.sum()


def _filter(img: np.ndarray, win: np.ndarray) -> np.ndarray:
    # separable filtering, then keep only windows fully inside the image
    out = correlate1d(correlate1d(img, win, axis=0, mode="constant"), win, axis=1, mode="constant")
    p = len(win) // 2
    return out[p:img.shape[0] - p, p:img.shape[1] - p]


def ssim_maps(a, b, window: int = SSIM_WINDOW, sigma: float = SSIM_SIGMA,
              k1: float = SSIM_K1, k2: float = SSIM_K2, data_range: float = 1.0):
    """Per-window SSIM and contrast-structure maps over valid windows."""
    a, b = _pair(a, b)
    if a.ndim != 2 or min(a.shape) < window:
        raise InvalidParameterError(f"image {a.shape} smaller than the {window}x{window} window")
    win = gaussian_window(window, sigma)
    c1 = (k1 * data_range) ** 2
    c2 = (k2 * data_range) ** 2
    mu_a = _filter(a, win)
    mu_b = _filter(b, win)
    var_a = _filter(a * a, win) - mu_a * mu_a
    var_b = _filter(b * b, win) - mu_b * mu_b
    cov = _filter(a * b, win) - mu_a * mu_b
    cs = (2 * cov + c2) / (var_a + var_b + c2)
    lum = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1)
    return lum * cs, cs


def ssim_raw(a, b, **kw) -> float:
    """Mean windowed SSIM in [-1, 1]."""
    s, _ = ssim_maps(a, b, **kw)
    return float(np.mean(s))


def ssim(a, b, negative: str = "clip", **kw) -> float:
    """Windowed SSIM (Gaussian 11x11, sigma 1.5).

    Non-negative scores are reported as is.  ``negative`` selects what happens
    below zero: ``"clip"`` maps to 0, ``"affine"`` rescales the whole range by
    ``(s + 1) / 2``.
    """
    s = ssim_raw(a, b, **kw)
    if negative == "affine":
        return float(np.clip((s + 1.0) / 2.0, 0.0, 1.0))
    if negative != "clip":
        raise InvalidParameterError(f"unknown negative-score mode {negative!r}")
    return float(np.clip(s, 0.0, 1.0))


def _downsample(img: np.ndarray) -> np.ndarray:
    h, w = img.shape[0] // 2 * 2, img.shape[1] // 2 * 2
    x = img[:h, :w]
    return 0.25 * (x[0::2, 0::2] + x[1::2, 0::2] + x[0::2, 1::2] + x[1::2, 1::2])


def ms_ssim(a, b, weights=MS_SSIM_WEIGHTS, **kw) -> float:
    """Multi-scale SSIM with 2x2 mean pooling between scales.

    Contrast-structure terms of the finer scales and the full SSIM of the
    coarsest scale are clamped at 0 before exponentiation.  ``weights=(1,)``
    reduces to single-scale :func:`ssim`; trailing zero weights are dropped,
    so ``(1, 0, 0, 0, 0)`` does too.
    """
    a, b = _pair(a, b)
    window = kw.get("window", SSIM_WINDOW)
    weights = list(weights)
    while len(weights) > 1 and weights[-1] == 0:
        weights.pop()
    n = len(weights)
    need = 2 ** (n - 1) * window
    if a.ndim != 2 or min(a.shape) < need:
        raise InvalidParameterError(
            f"MS-SSIM with {n} scales needs images of at least {need}x{need}, got {a.shape}")
    w = np.asarray(weights, dtype=np.float64)
    value = 1.0
    for level in range(n):
        s_map, cs_map = ssim_maps(a, b, **kw)
        if level == n - 1:
            term = max(float(np.mean(s_map)), 0.0)
        else:
            term = max(float(np.mean(cs_map)), 0.0)
            a, b = _downsample(a), _downsample(b)
        value *= term ** w[level]
    return float(np.clip(value, 0.0, 1.0))


def fitting_weights(shape, weights=MS_SSIM_WEIGHTS, window: int = SSIM_WINDOW) -> tuple:
    """Leading MS-SSIM weights for the deepest pyramid that fits ``shape``, renormalized."""
    side = min(shape)
    n = len(weights)
    while n > 1 and side < 2 ** (n - 1) * window:
        n -= 1
    if n == len(weights):
        return tuple(weights)
    w = np.asarray(weights[:n], dtype=np.float64)
    return tuple(w / w.sum())


def compare(a, b, weights=None) -> SimilarityReport:
    """All four scores; MS-SSIM falls back to fewer scales on small frames."""
    a, b = _pair(a, b)
    if weights is None:
        weights = fitting_weights(a.shape)
    return SimilarityReport(mse_similarity(a, b), psnr_similarity(a, b), ssim(a, b),
                            ms_ssim(a, b, weights))
