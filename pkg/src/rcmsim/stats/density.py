"""Gaussian kernel density estimate and histogram counts."""
from __future__ import annotations

import math

import numpy as np

_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _sample(values) -> np.ndarray:
    x = np.asarray(values, dtype=float).ravel()
    if x.size < 2:
        raise ValueError("density estimation needs at least 2 values")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    return x


def silverman_bandwidth(values) -> float:
    """Silverman's rule ``0.9 * min(sd, IQR / 1.34) * n**(-1/5)``.

    Falls back to the standard deviation when the IQR is zero.
    """
    x = _sample(values)
    sd = float(np.std(x, ddof=1))
    q1, q3 = np.percentile(x, [25, 75])
    iqr = float(q3 - q1)
    spread = min(sd, iqr / 1.34) if iqr > 0 else sd
    if not spread > 0:
        raise ValueError("bandwidth undefined for a sample with zero spread")
    return 0.9 * spread * x.size ** (-0.2)


def kde_density(values, grid, bandwidth: float | None = None) -> np.ndarray:
    """Gaussian KDE of ``values`` evaluated at ``grid``."""
    x = _sample(values)
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    g = np.asarray(grid, dtype=float)
    z = (g[..., None] - x) / h
    return np.exp(-0.5 * z * z).sum(axis=-1) / (x.size * h * _SQRT_2PI)


def kde_grid(values, n: int = 200, pad: float = 3.0, bandwidth: float | None = None) -> np.ndarray:
    """Evenly spaced grid covering the sample plus ``pad`` bandwidths either side."""
    x = _sample(values)
    h = silverman_bandwidth(x) if bandwidth is None else bandwidth
    return np.linspace(x.min() - pad * h, x.max() + pad * h, n)


def histogram(values, edges=None, bins: int | str = "fd"):
    """Counts and densities on ``edges`` (computed by numpy's ``bins`` rule if absent)."""
    x = np.asarray(values, dtype=float).ravel()
    if x.size == 0:
        raise ValueError("histogram of an empty sample")
    if edges is None:
        edges = np.histogram_bin_edges(x, bins=bins)
    counts, edges = np.histogram(x, bins=edges)
    widths = np.diff(edges)
    density = counts / (x.size * widths)
    return edges, counts, density
