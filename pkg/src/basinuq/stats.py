"""Empirical-distribution helpers: two-sample CDF distance and KDE pdfs.

The CDF distance is the two-sample Kolmogorov-Smirnov statistic
D = max |F_a - F_b| over the pooled sample points.  Densities use a
Gaussian kernel with a fixed bandwidth (the kernel's standard
deviation), the convention of kernel-smoothing windows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

SQRT_2PI = np.sqrt(2.0 * np.pi)


def cdf_distance(samples_a, samples_b) -> float:
    """Two-sample Kolmogorov-Smirnov statistic."""
    a = np.sort(np.asarray(samples_a, dtype=float).ravel())
    b = np.sort(np.asarray(samples_b, dtype=float).ravel())
    if len(a) == 0 or len(b) == 0:
        raise ValueError("both samples must be non-empty")
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / len(a)
    fb = np.searchsorted(b, pooled, side="right") / len(b)
    return float(np.max(np.abs(fa - fb)))


@dataclass
class EmpiricalDistribution:
    """Sample with its empirical CDF and a Gaussian-kernel density."""

    samples: np.ndarray
    bandwidth: float
    grid: np.ndarray
    pdf: np.ndarray

    def ecdf(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        srt = np.sort(self.samples)
        out = np.searchsorted(srt, x, side="right") / len(srt)
        return out if out.ndim else float(out)

    def pdf_at(self, x) -> np.ndarray:
        x = np.atleast_1d(np.asarray(x, dtype=float))
        z = (x[:, None] - self.samples[None, :]) / self.bandwidth
        vals = np.exp(-0.5 * z**2).sum(axis=1) / (
            len(self.samples) * self.bandwidth * SQRT_2PI
        )
        return vals

    def integral(self) -> float:
        """Trapezoid integral of the pdf over the evaluation grid."""
        return float(np.trapezoid(self.pdf, self.grid))

    def local_maxima(self, min_height_frac: float = 0.05) -> np.ndarray:
        """Grid locations of interior local maxima of the pdf.

        Peaks lower than ``min_height_frac`` of the global maximum are
        ignored (they are kernel ripples, not modes).
        """
        p = self.pdf
        interior = np.flatnonzero(
            (p[1:-1] > p[:-2]) & (p[1:-1] >= p[2:])
        ) + 1
        keep = interior[p[interior] >= min_height_frac * p.max()]
        return self.grid[keep]


def kde_pdf(samples, bandwidth: float = 0.02, grid=None,
            pad_sigmas: float = 5.0, n_grid: int = 512) -> EmpiricalDistribution:
    """Gaussian-kernel density estimate on an evaluation grid.

    The default bandwidth (0.02) is tuned for porosity values.  Without
    an explicit grid, the grid spans the sample range padded by
    ``pad_sigmas`` bandwidths so the density integrates to ~1 on it.
    """
    if bandwidth <= 0.0:
        raise ValueError("bandwidth must be positive")
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("need at least one sample")
    if grid is None:
        lo = samples.min() - pad_sigmas * bandwidth
        hi = samples.max() + pad_sigmas * bandwidth
        grid = np.linspace(lo, hi, n_grid)
    else:
        grid = np.asarray(grid, dtype=float)
    dist = EmpiricalDistribution(
        samples=samples, bandwidth=float(bandwidth), grid=grid,
        pdf=np.zeros_like(grid),
    )
    dist.pdf = dist.pdf_at(grid)
    return dist
