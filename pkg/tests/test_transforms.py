"""FFT convolution against the direct oracle; band projection identities."""
import math

import numpy as np
import pytest

from varpoint import DomainError
from varpoint.grids import Grid, GridFunction, SimpleFunction, dyadic_cube, lp_norm, rasterize
from varpoint.transforms import (
    BumpProfile,
    DEFAULT_PROFILE,
    angular_frequencies,
    band_multiplier,
    convolve,
    convolve_direct,
    fourier_coefficients,
    frequency_magnitude,
    lp_high,
    lp_low,
    lp_projection,
    nyquist,
)


def random_field(grid, seed):
    rng = np.random.default_rng(seed)
    return GridFunction(grid, rng.normal(size=grid.shape) + 1j * rng.normal(size=grid.shape))


def test_profile_branches_exact():
    phi = DEFAULT_PROFILE
    assert phi(0.0) == 1.0 and phi(1.0) == 1.0
    assert phi(2.0) == 0.0 and phi(5.0) == 0.0
    xs = np.linspace(1.001, 1.999, 501)
    vals = phi(xs)
    assert np.all((vals >= 0) & (vals <= 1))
    assert np.all(np.diff(vals) <= 0)  # monotone on the transition
    core = phi(np.linspace(1.05, 1.95, 181))
    assert np.all(np.diff(core) < 0)  # strict away from the float-saturated ends
    with pytest.raises(DomainError):
        phi(-0.5)
    with pytest.raises(DomainError):
        BumpProfile(2.0, 1.0)


def test_profile_smooth_at_junctions():
    phi = DEFAULT_PROFILE
    eps = 1e-4
    # one-sided derivatives vanish at both ends of the transition zone
    assert abs(phi(1.0 + eps) - 1.0) < 1e-3
    assert abs(phi(2.0 - eps)) < 1e-3
    d_left = (phi(1.0 + eps) - phi(1.0)) / eps
    d_right = (phi(2.0) - phi(2.0 - eps)) / eps
    assert abs(d_left) < 0.05 and abs(d_right) < 0.05


def test_convolution_hat_function():
    # indicator of [0,1) convolved with itself: hat peaking at 1 at x=1
    g = Grid(1, 256, 2.0**-6, (-2.0,))
    f = rasterize(SimpleFunction(((1.0, dyadic_cube(0, (0,))),)), g)
    conv = convolve(f, f)
    xs = g.axis_coordinates(0)
    peak = conv.samples.real[np.argmin(np.abs(xs - 1.0))]
    # half-open indicators: the discrete peak sits one cell below the continuum 1
    assert abs(peak - 1.0) <= g.spacing + 1e-12
    hat = np.clip(1.0 - np.abs(xs - 1.0), 0.0, None)
    assert np.max(np.abs(conv.samples.real - hat)) <= g.spacing + 1e-12
    oracle = convolve_direct(f, f)
    assert np.max(np.abs(conv.samples - oracle.samples)) < 1e-9


def test_convolution_matches_direct_oracle():
    g = Grid(1, 64, 0.125, (-4.0,))
    f, k = random_field(g, 1), random_field(g, 2)
    a = convolve(f, k)
    b = convolve_direct(f, k)
    assert np.max(np.abs(a.samples - b.samples)) < 1e-9


def test_convolution_matches_direct_oracle_2d():
    g = Grid(2, 16, 0.25, (-2.0, -2.0))
    f, k = random_field(g, 3), random_field(g, 4)
    a = convolve(f, k)
    b = convolve_direct(f, k)
    assert np.max(np.abs(a.samples - b.samples)) < 1e-9


def test_convolution_commutes_and_identity():
    g = Grid(1, 128, 0.0625, (-4.0,))
    f, k = random_field(g, 5), random_field(g, 6)
    ab = convolve(f, k)
    ba = convolve(k, f)
    assert np.max(np.abs(ab.samples - ba.samples)) < 1e-10
    # delta-like kernel: mass 1/h at the origin cell
    delta = np.zeros(g.shape, dtype=complex)
    delta[np.argmin(np.abs(g.axis_coordinates(0)))] = 1.0 / g.spacing
    ident = convolve(f, GridFunction(g, delta))
    assert np.max(np.abs(ident.samples - f.samples)) < 1e-9


def test_convolution_parseval():
    g = Grid(1, 64, 0.25, (-8.0,))
    f, k = random_field(g, 7), random_field(g, 8)
    conv = convolve(f, k)
    spatial = lp_norm(conv, 2) ** 2
    spec = np.abs(fourier_coefficients(conv)) ** 2
    # Parseval with angular frequencies: sum over modes * (2*pi / period)
    freq_side = np.sum(spec) / g.period
    assert spatial == pytest.approx(freq_side, rel=1e-10)


def test_grid_mismatch_rejected():
    a = random_field(Grid(1, 64, 0.125, (-4.0,)), 1)
    b = random_field(Grid(1, 64, 0.25, (-8.0,)), 1)
    with pytest.raises(DomainError):
        convolve(a, b)


def test_band_localization_exact():
    g = Grid(1, 512, 2.0**-5, (-8.0,))
    f = random_field(g, 9)
    k = 3
    pf = lp_projection(f, k)
    spec = np.fft.fft(pf.samples)
    mag = frequency_magnitude(g)
    outside = (mag < 2.0 ** (k - 1)) | (mag > 2.0 ** (k + 1))
    assert np.max(np.abs(spec[outside])) <= 1e-12 * np.max(np.abs(spec))
    # multiplier is exactly zero off the band
    m = band_multiplier(g, k)
    assert np.all(m[outside] == 0.0)


def test_pure_wave_passes_band_unchanged():
    g = Grid(1, 512, 2.0**-5, (-8.0,))
    xs = g.axis_coordinates(0)
    k = 2
    wave = np.exp(1j * (2.0**k) * xs)
    # 2^k must be an exact grid frequency: 4 = 2*pi*m/period -> m = 4*16/(2pi)?
    # use the closest exact mode instead
    mags = frequency_magnitude(g)
    mode = np.argmin(np.abs(mags - 2.0**k))
    xi = 2.0 * math.pi * np.fft.fftfreq(g.extent, g.spacing)[mode]
    wave = np.exp(1j * xi * xs)
    f = GridFunction(g, wave)
    pf = lp_projection(f, k)
    assert np.max(np.abs(pf.samples - f.samples)) < 1e-10


def test_telescoping_identity():
    g = Grid(2, 64, 2.0**-4, (-2.0, -2.0))
    f = random_field(g, 10)
    for k in (1, 2, 3):
        low_k = lp_low(f, k)
        low_prev = lp_low(f, k - 1)
        band = lp_projection(f, k)
        resid = low_k.samples - low_prev.samples - band.samples
        assert np.max(np.abs(resid)) < 1e-12 * max(1.0, np.max(np.abs(low_k.samples)))


def test_high_pass_exact_complement():
    g = Grid(1, 128, 2.0**-4, (-4.0,))
    f = random_field(g, 11)
    low = lp_low(f, 2)
    high = lp_high(f, 2)
    assert np.array_equal(high.samples, f.samples - low.samples)


def test_band_limited_reconstruction():
    g = Grid(1, 1024, 2.0**-6, (-8.0,))
    rng = np.random.default_rng(12)
    mag = frequency_magnitude(g)
    k_lo, k_hi = 2, 5
    spec = np.zeros(g.extent, dtype=complex)
    band = (mag >= 2.0**k_lo) & (mag <= 2.0**k_hi)
    spec[band] = rng.normal(size=band.sum()) + 1j * rng.normal(size=band.sum())
    f = GridFunction(g, np.fft.ifft(spec))
    total = np.zeros(g.shape, dtype=complex)
    for k in range(k_lo, k_hi + 1):
        total += lp_projection(f, k).samples
    rel = np.max(np.abs(total - f.samples)) / np.max(np.abs(f.samples))
    assert rel < 1e-6


def test_band_scale_beyond_nyquist_rejected():
    g = Grid(1, 64, 0.5, (-16.0,))
    f = random_field(g, 13)
    k_bad = math.ceil(math.log2(nyquist(g)))
    with pytest.raises(DomainError):
        lp_projection(f, k_bad + 1)


def test_angular_frequency_layout():
    g = Grid(1, 8, 0.5, (-2.0,))
    (freqs,) = angular_frequencies(g)
    assert freqs[0] == 0.0
    assert freqs[1] == pytest.approx(2.0 * math.pi / g.period)
