"""Image quality metrics."""

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DimensionError


def _pair(a, b):
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"image shapes differ: {a.shape} vs {b.shape}")
    return a, b


def psnr(a, b, peak: float = 1.0) -> float:
    """Peak signal-to-noise ratio in dB; ``inf`` for identical inputs."""
    if peak <= 0:
        raise ValueError("peak must be positive")
    a, b = _pair(a, b)
    mse = float(np.mean((a - b) ** 2))
    if mse == 0.0:
        return float("inf")
    return float(10.0 * np.log10(peak ** 2 / mse))


def ssim(a, b, peak: float = 1.0, window: int = 8) -> float:
    """Mean SSIM over all ``window x window`` patches (stride 1).

    Uses uniform windows, population (biased) local statistics and the
    constants ``C1 = (0.01 peak)^2``, ``C2 = (0.03 peak)^2``.
    """
    a, b = _pair(a, b)
    if a.ndim != 2 or min(a.shape) < window:
        raise DimensionError(f"SSIM needs 2-D images of at least {window}x{window}, got {a.shape}")
    c1, c2 = (0.01 * peak) ** 2, (0.03 * peak) ** 2
    pa = sliding_window_view(a, (window, window))
    pb = sliding_window_view(b, (window, window))
    mu_a = pa.mean(axis=(-2, -1))
    mu_b = pb.mean(axis=(-2, -1))
    var_a = (pa ** 2).mean(axis=(-2, -1)) - mu_a ** 2
    var_b = (pb ** 2).mean(axis=(-2, -1)) - mu_b ** 2
    cov = (pa * pb).mean(axis=(-2, -1)) - mu_a * mu_b
    num = (2 * mu_a * mu_b + c1) * (2 * cov + c2)
    den = (mu_a ** 2 + mu_b ** 2 + c1) * (var_a + var_b + c2)
    return float(np.mean(num / den))
