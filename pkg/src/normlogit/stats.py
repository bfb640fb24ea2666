"""Two-sample Kolmogorov-Smirnov test and Gaussian kernel density estimates."""
from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from scipy.integrate import trapezoid
from scipy.signal import find_peaks
from scipy.special import kolmogorov

from .errors import DegenerateSample, EmptySample


@dataclass(frozen=True)
class KsResult:
    statistic: float
    p_value: float
    n1: int
    n2: int


def ks_statistic(a, b) -> float:
    """sup |F_a - F_b| over the pooled sample, right-continuous ECDFs."""
    a = np.sort(np.asarray(a, dtype=float))
    b = np.sort(np.asarray(b, dtype=float))
    pooled = np.unique(np.concatenate([a, b]))
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def ks_two_sample(a, b) -> KsResult:
    """Two-sided two-sample KS test with the asymptotic p-value.

    The p-value is the Kolmogorov survival function at
    ``D * sqrt(n1 n2 / (n1 + n2))``. It is an approximation and is
    optimistic for samples smaller than about 25.
    """
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples must be nonempty")
    d = ks_statistic(a, b)
    n_eff = a.size * b.size / (a.size + b.size)
    p = float(np.clip(kolmogorov(np.sqrt(n_eff) * d), 0.0, 1.0))
    return KsResult(d, p, a.size, b.size)


@dataclass(frozen=True, eq=False)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float
    n_samples: int = 0

    def n_modes(self, min_prominence=0.0):
        """Count local maxima whose topographic prominence exceeds ``min_prominence``.

        With the default every maximum counts, including ripples from
        individual sample points.
        """
        padded = np.concatenate([[0.0], self.density, [0.0]])
        peaks, _ = find_peaks(padded, prominence=(min_prominence or None))
        return int(peaks.size)

    def standard_error(self):
        """Pointwise standard error of a Gaussian KDE at fixed bandwidth,
        ``sqrt((f R(K) / h - f^2) / n)`` with ``R(K) = 1 / (2 sqrt(pi))``."""
        if self.n_samples < 1:
            raise ValueError("sample size unknown")
        f = self.density
        var = (f / (2 * np.sqrt(np.pi) * self.bandwidth) - f * f) / self.n_samples
        return np.sqrt(np.clip(var, 0.0, None))

    def n_significant_modes(self, z=2.0):
        """Modes whose prominence exceeds ``z`` standard errors at the highest peak."""
        return self.n_modes(min_prominence=z * float(self.standard_error().max()))

    def to_csv(self, path):
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["grid", "density"])
            for g, v in zip(self.grid, self.density):
                w.writerow([repr(float(g)), repr(float(v))])


def silverman_bandwidth(sample) -> float:
    x = np.asarray(sample, dtype=float)
    sd = x.std(ddof=1)
    q75, q25 = np.percentile(x, [75, 25])
    spread = min(sd, (q75 - q25) / 1.34) if q75 > q25 else sd
    return 0.9 * spread * x.size ** (-0.2)


def kde(sample, grid_points=512, bandwidth=None) -> DensityCurve:
    """Gaussian KDE on ``[min - 3h, max + 3h]`` with Silverman's bandwidth.

    Kernel mass beyond the grid ends is dropped and the curve is rescaled
    to unit trapezoid area over the grid (a change of at most ~0.14%).
    Pass ``bandwidth`` to override the rule.
    """
    x = np.asarray(sample, dtype=float).ravel()
    if x.size < 2 or np.ptp(x) == 0.0:
        raise DegenerateSample("kde needs at least two distinct values")
    if int(grid_points) < 2:
        raise ValueError("grid_points must be >= 2")
    h = silverman_bandwidth(x) if bandwidth is None else float(bandwidth)
    if not h > 0:
        raise ValueError("bandwidth must be positive")
    grid = np.linspace(x.min() - 3 * h, x.max() + 3 * h, int(grid_points))
    z = (grid[:, None] - x[None, :]) / h
    dens = np.exp(-0.5 * z * z).sum(axis=1) / (x.size * h * np.sqrt(2 * np.pi))
    dens /= trapezoid(dens, grid)
    return DensityCurve(grid, dens, float(h), int(x.size))
