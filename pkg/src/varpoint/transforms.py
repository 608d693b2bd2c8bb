"""Periodic FFT convolution and frequency-localized projections.

Convolution treats grid functions as densities on the torus: the discrete
convolution is scaled by the cell volume so it approximates the continuum
integral, and it is exact for band-limited data.

Frequency decompositions use a smooth radial profile ``phi`` that equals one
on [0, 1], vanishes from 2 on, and interpolates monotonically in between with
the standard exp(-1/x) glue.  The band projection at scale k applies the
multiplier ``phi(|xi| / 2^k) - phi(|xi| / 2^(k-1))``, supported exactly in
``2^(k-1) <= |xi| <= 2^(k+1)``; the low-pass multiplier is ``phi(|xi| / 2^k)``
and the high-pass complement is formed by exact sample subtraction.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grids import Grid, GridFunction


@dataclass(frozen=True)
class BumpProfile:
    """Smooth cutoff profile on [0, inf): one until ``flat_end``, zero after ``support_end``."""

    flat_end: float = 1.0
    support_end: float = 2.0

    def __post_init__(self):
        if not 0 < self.flat_end < self.support_end:
            raise DomainError("profile needs 0 < flat_end < support_end")

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if np.any(x < 0):
            raise DomainError("profile argument must be non-negative")
        out = np.zeros_like(x)
        out[x <= self.flat_end] = 1.0
        mid = (x > self.flat_end) & (x < self.support_end)
        if np.any(mid):
            # rescale the transition zone to (0, 1) and glue with exp(-1/u)
            u = (x[mid] - self.flat_end) / (self.support_end - self.flat_end)
            fall = np.exp(-1.0 / (1.0 - u))
            rise = np.exp(-1.0 / u)
            out[mid] = fall / (fall + rise)
        return out


DEFAULT_PROFILE = BumpProfile()


def _zero_index(grid: Grid) -> tuple[int, ...]:
    idx = []
    for o in grid.origin:
        i = round(-o / grid.spacing)
        if abs(o + i * grid.spacing) > 1e-9 * grid.spacing:
            raise DomainError("grid must contain the coordinate origin on-lattice")
        idx.append(int(i) % grid.extent)
    return tuple(idx)


def _fft(a: np.ndarray, dim: int) -> np.ndarray:
    return np.fft.fft(a) if dim == 1 else np.fft.fft2(a)


def _ifft(a: np.ndarray, dim: int) -> np.ndarray:
    return np.fft.ifft(a) if dim == 1 else np.fft.ifft2(a)


def convolve(f: GridFunction, g: GridFunction) -> GridFunction:
    """Periodic convolution ``(f * g)(x) = h^d sum_y f(y) g(x - y)``.

    Computed with forward/inverse FFTs; both functions must live on the same
    grid, and the kernel grid must contain the coordinate origin so kernel
    samples can be read as displacement values.
    """
    if f.grid != g.grid:
        raise DomainError("convolution requires a common grid")
    grid = f.grid
    shift = tuple(-i for i in _zero_index(grid))
    kernel = np.roll(g.samples, shift, axis=tuple(range(grid.dim)))
    spec = _fft(f.samples, grid.dim) * _fft(kernel, grid.dim)
    out = _ifft(spec, grid.dim) * grid.cell_volume
    return GridFunction(grid, out)


def convolve_direct(f: GridFunction, g: GridFunction) -> GridFunction:
    """Quadratic-time reference convolution used to validate the FFT path."""
    if f.grid != g.grid:
        raise DomainError("convolution requires a common grid")
    grid = f.grid
    shift = tuple(-i for i in _zero_index(grid))
    kernel = np.roll(g.samples, shift, axis=tuple(range(grid.dim)))
    n = grid.extent
    if grid.dim == 1:
        out = np.array([
            np.sum(f.samples * kernel[(m - np.arange(n)) % n]) for m in range(n)
        ])
    else:
        ix = np.arange(n)
        out = np.empty((n, n), dtype=np.complex128)
        for m0 in range(n):
            for m1 in range(n):
                out[m0, m1] = np.sum(
                    f.samples * kernel[(m0 - ix[:, None]) % n, (m1 - ix[None, :]) % n])
    return GridFunction(grid, out * grid.cell_volume)


def angular_frequencies(grid: Grid) -> tuple[np.ndarray, ...]:
    """Per-axis angular frequency values matching the FFT layout."""
    freqs = 2.0 * math.pi * np.fft.fftfreq(grid.extent, d=grid.spacing)
    if grid.dim == 1:
        return (freqs,)
    return freqs[:, None], freqs[None, :]


def frequency_magnitude(grid: Grid) -> np.ndarray:
    axes = angular_frequencies(grid)
    if grid.dim == 1:
        return np.abs(axes[0])
    return np.sqrt(axes[0] ** 2 + axes[1] ** 2)


def nyquist(grid: Grid) -> float:
    return math.pi / grid.spacing


def fourier_coefficients(f: GridFunction) -> np.ndarray:
    """Continuum-normalized transform ``h^d sum_x f(x) exp(-i x . xi)`` on the FFT layout."""
    grid = f.grid
    spec = _fft(f.samples, grid.dim) * grid.cell_volume
    for axis in range(grid.dim):
        freqs = 2.0 * math.pi * np.fft.fftfreq(grid.extent, d=grid.spacing)
        shape = [1] * grid.dim
        shape[axis] = grid.extent
        spec = spec * np.exp(-1j * grid.origin[axis] * freqs).reshape(shape)
    return spec


def apply_multiplier(f: GridFunction, multiplier: np.ndarray) -> GridFunction:
    spec = _fft(f.samples, f.grid.dim) * multiplier
    return GridFunction(f.grid, _ifft(spec, f.grid.dim))


def _check_scale(grid: Grid, k: int):
    if 2.0 ** (k + 1) > nyquist(grid) * (1 + 1e-12):
        raise DomainError(
            f"band scale k={k} puts 2^(k+1) above the grid Nyquist frequency "
            f"{nyquist(grid):.6g}")


def band_multiplier(grid: Grid, k: int, profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    _check_scale(grid, k)
    mag = frequency_magnitude(grid)
    return profile(mag * 2.0**-k) - profile(mag * 2.0 ** (1 - k))


def low_multiplier(grid: Grid, k: int, profile: BumpProfile = DEFAULT_PROFILE) -> np.ndarray:
    _check_scale(grid, k)
    return profile(frequency_magnitude(grid) * 2.0**-k)


def lp_projection(f: GridFunction, k: int, profile: BumpProfile = DEFAULT_PROFILE) -> GridFunction:
    """Band projection at dyadic scale k (frequency support in [2^(k-1), 2^(k+1)])."""
    return apply_multiplier(f, band_multiplier(f.grid, k, profile))


def lp_low(f: GridFunction, k: int, profile: BumpProfile = DEFAULT_PROFILE) -> GridFunction:
    """Low-pass projection at scale k (multiplier one on ``|xi| <= 2^k``)."""
    return apply_multiplier(f, low_multiplier(f.grid, k, profile))


def lp_high(f: GridFunction, k: int, profile: BumpProfile = DEFAULT_PROFILE) -> GridFunction:
    """High-pass complement, formed as an exact samplewise difference."""
    low = lp_low(f, k, profile)
    return GridFunction(f.grid, f.samples - low.samples)


def dyadic_band_peaks(f: GridFunction, lo: float, hi: float) -> list[tuple[float, float]]:
    """Peak spectrum modulus per dyadic frequency band covering [lo, hi].

    Returns ``(band geometric center, max |f^|)`` pairs for the bands
    ``[lo, 2 lo), [2 lo, 4 lo), ...`` up to ``hi``.
    """
    if not (0 < lo < hi):
        raise DomainError("need 0 < lo < hi")
    spec = np.abs(fourier_coefficients(f))
    mag = frequency_magnitude(f.grid)
    out = []
    edge = lo
    while edge * 2.0 <= hi * (1 + 1e-9):
        mask = (mag >= edge) & (mag < edge * 2.0)
        if np.any(mask):
            out.append((edge * math.sqrt(2.0), float(spec[mask].max())))
        edge *= 2.0
    return out


def fit_loglog_slope(points) -> float:
    """Least-squares slope of log2(y) against log2(x) for positive pairs."""
    pts = [(x, y) for x, y in points if x > 0 and y > 0]
    if len(pts) < 2:
        raise DomainError("slope fit needs at least two positive points")
    xs = np.log2([x for x, _ in pts])
    ys = np.log2([y for _, y in pts])
    return float(np.polyfit(xs, ys, 1)[0])
