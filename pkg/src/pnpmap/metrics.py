"""Image quality metrics on [0, 1] grids: PSNR and mean local SSIM."""

from __future__ import annotations

import numpy as np
from scipy.signal import convolve2d

from .exceptions import ShapeMismatchError

SSIM_WINDOW = 11
SSIM_SIGMA = 1.5
SSIM_K1 = 0.01
SSIM_K2 = 0.03


def psnr(x, ref) -> float:
    """10 log10(1 / MSE) for unit dynamic range; +inf for an exact match."""
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ShapeMismatchError(f"shape mismatch {x.shape} vs {ref.shape}")
    mse = float(np.mean((x - ref) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(1.0 / mse)


def _gaussian_window(size: int, sigma: float) -> np.ndarray:
    half = (size - 1) / 2.0
    coords = np.arange(size) - half
    g = np.exp(-(coords**2) / (2.0 * sigma**2))
    kernel = np.outer(g, g)
    return kernel / kernel.sum()


def ssim(x, ref) -> float:
    """Mean local SSIM with an 11x11 Gaussian window (sigma 1.5), range 1.

    Local moments are Gaussian-weighted; only windows fully inside the
    image contribute, so both dimensions must be at least the window size.
    """
    x = np.asarray(x, dtype=np.float64)
    ref = np.asarray(ref, dtype=np.float64)
    if x.shape != ref.shape:
        raise ShapeMismatchError(f"shape mismatch {x.shape} vs {ref.shape}")
    if x.ndim != 2 or min(x.shape) < SSIM_WINDOW:
        raise ShapeMismatchError(
            f"SSIM needs a 2-D image with min dimension >= {SSIM_WINDOW}"
        )
    window = _gaussian_window(SSIM_WINDOW, SSIM_SIGMA)

    def local_mean(img):
        return convolve2d(img, window, mode="valid")

    mu_x = local_mean(x)
    mu_y = local_mean(ref)
    var_x = local_mean(x * x) - mu_x**2
    var_y = local_mean(ref * ref) - mu_y**2
    cov = local_mean(x * ref) - mu_x * mu_y

    c1 = SSIM_K1**2
    c2 = SSIM_K2**2
    numerator = (2.0 * mu_x * mu_y + c1) * (2.0 * cov + c2)
    denominator = (mu_x**2 + mu_y**2 + c1) * (var_x + var_y + c2)
    return float(np.mean(numerator / denominator))
