"""Continuity scale, indicator surrogate, point-mass surrogate."""
import json
import math

import numpy as np
import pytest

from varpoint import (
    DomainError,
    NormalizationError,
    ResolutionError,
    UnsupportedKernelError,
)
from varpoint.approximation import (
    cdg_point_masses,
    modulus_delta,
    moon_indicator,
)
from varpoint.grids import (
    GridFunction,
    SimpleFunction,
    ball,
    centered_grid,
    dyadic_cube,
    lp_norm,
    random_simple_function,
    rasterize,
    rasterize_indicator,
    region_sample_count,
)
from varpoint.kernels import KernelEntry, KernelFamily, dyadic_averages, heat_family
from varpoint.transforms import convolve_direct


def _constant_family(grid, value=0.7):
    samples = GridFunction(grid, np.full(grid.shape, value))
    mass = value * grid.period ** grid.dim
    entry = KernelEntry(0.0, samples, None, mass, abs(mass))
    return KernelFamily("const", (entry,))


def _heat_lipschitz(t: float) -> float:
    # max |d/dx (4 pi t)^(-1/2) exp(-x^2/4t)|, attained at x = sqrt(2t)
    return math.exp(-0.5) / (math.sqrt(2.0 * t) * math.sqrt(4.0 * math.pi * t))


def test_modulus_constant_family_any_epsilon():
    g = centered_grid(1, 1024, 2.0**-6)
    fam = _constant_family(g)
    assert modulus_delta(fam, 1e-9) == pytest.approx(8.0)
    assert modulus_delta(fam, 10.0) == pytest.approx(8.0)


def test_modulus_constant_family_2d_large_grid():
    g = centered_grid(2, 256, 0.25)
    fam = _constant_family(g)
    # diameter of the torus; the shift count forces the window-range path
    assert modulus_delta(fam, 1e-6) == pytest.approx(32.0 * math.sqrt(2.0))


def test_modulus_tracks_lipschitz_scale():
    g = centered_grid(1, 1024, 2.0**-6)
    fam = heat_family([1.0], g)
    eps = 0.01
    delta = modulus_delta(fam, eps)
    slope = _heat_lipschitz(1.0)
    assert eps / (2.0 * slope) <= delta <= eps / slope
    assert delta == pytest.approx(0.0625)


def test_modulus_monotone_in_epsilon():
    g = centered_grid(1, 512, 2.0**-5)
    fam = heat_family([0.5, 2.0], g)
    deltas = [modulus_delta(fam, e) for e in (0.1, 0.05, 0.02, 0.01)]
    assert all(a >= b for a, b in zip(deltas, deltas[1:]))
    assert deltas[0] > deltas[-1]


def test_modulus_unresolvable_family():
    g = centered_grid(1, 128, 0.25)
    fam = dyadic_averages(1, g)
    with pytest.raises(ResolutionError):
        modulus_delta(fam, 1e-6)
    with pytest.raises(DomainError):
        modulus_delta(fam, 0.0)


def test_moon_identity_ball():
    g = centered_grid(1, 2048, 2.0**-7)
    fam = heat_family([6.0, 10.0], g)
    region = ball((0.37,), 0.2)
    f = SimpleFunction(((1.0, region),))
    out = moon_indicator(f, fam, 0.05)
    assert len(out.regions) == 1
    assert out.regions[0].center == region.center
    assert region_sample_count(out.regions[0], g) == region_sample_count(region, g)
    assert out.achieved_error == 0.0
    assert out.measure_defect_cells <= 1e-9


def test_moon_half_coefficient_ball():
    g = centered_grid(1, 2048, 2.0**-7)
    fam = heat_family([6.0, 10.0], g)
    region = ball((-1.234,), 0.2)
    f = SimpleFunction(((0.5, region),))
    out = moon_indicator(f, fam, 0.05)
    sub = out.regions[0]
    assert sub.center == region.center
    assert sub.radius < region.radius
    want = 0.5 * region_sample_count(region, g)
    assert abs(region_sample_count(sub, g) - want) <= 0.5 + 1e-9
    assert out.measure_defect_cells <= 1.0
    assert out.achieved_error < out.error_bound


def test_moon_three_random_balls_both_conclusions():
    g = centered_grid(1, 4096, 2.0**-7)
    fam = heat_family([6.0, 8.0, 12.0, 16.0], g)
    f = random_simple_function(5, 1, region_kind="ball",
                               scale_range=(0.1, 0.2))
    out = moon_indicator(f, fam, 0.05)

    f_grid = rasterize(f, g)
    indicator = out.indicator(g)
    l1 = lp_norm(f_grid, 1)
    # captured measure matches the mass to one cell
    captured = np.count_nonzero(indicator.samples.real) * g.cell_volume
    assert abs(captured - l1) <= g.cell_volume * (1.0 + 1e-9)
    # smoothing by any member stays inside the budget, checked against the
    # quadratic-time convolution rather than the production FFT
    worst = 0.0
    diff = GridFunction(g, f_grid.samples - indicator.samples)
    for entry in fam.entries:
        smoothed = convolve_direct(diff, entry.samples)
        worst = max(worst, float(np.max(np.abs(smoothed.samples))))
    assert worst < l1 * 0.05
    assert out.achieved_error == pytest.approx(worst, rel=1e-6, abs=1e-12)
    # sub-balls stay concentric inside their hosts
    for (coeff, host), sub in zip(f.terms, out.regions):
        assert sub.center == host.center
        assert sub.radius <= host.radius + 1e-12


def test_moon_2d_balls():
    g = centered_grid(2, 64, 0.5)
    fam = heat_family([6.0, 10.0], g)
    f = random_simple_function(7, 2, region_kind="ball",
                               scale_range=(0.8, 1.6))
    out = moon_indicator(f, fam, 0.05)
    f_grid = rasterize(f, g)
    l1 = lp_norm(f_grid, 1)
    captured = np.count_nonzero(out.indicator(g).samples.real) * g.cell_volume
    assert abs(captured - l1) <= g.cell_volume * (1.0 + 1e-9)
    assert out.achieved_error < l1 * 0.05


def test_moon_rejects_bad_input():
    g = centered_grid(1, 1024, 2.0**-6)
    fam = heat_family([6.0], g)
    good = ball((0.0,), 0.2)
    with pytest.raises(NormalizationError):
        moon_indicator(SimpleFunction(((1.2, good),)), fam, 0.05)
    with pytest.raises(NormalizationError):
        moon_indicator(SimpleFunction(((-0.3, good),)), fam, 0.05)
    with pytest.raises(DomainError):
        moon_indicator(SimpleFunction(((0.5, dyadic_cube(0, (0,))),)), fam, 0.05)
    with pytest.raises(ResolutionError):
        # diameter 6 exceeds any admissible continuity scale here
        moon_indicator(SimpleFunction(((1.0, ball((0.0,), 3.0)),)), fam, 0.05)
    with pytest.raises(DomainError):
        moon_indicator(SimpleFunction(((1.0, good),)), fam, -0.1)
    with pytest.raises(DomainError):
        moon_indicator(SimpleFunction(((1.0, good),)), fam, 0.05,
                       modulus_fraction=1.0)


def test_moon_rejects_complex_family():
    g = centered_grid(1, 256, 0.125)
    samples = GridFunction(g, np.full(g.shape, 0.5 + 0.1j))
    fam = KernelFamily("cplx", (KernelEntry(0.0, samples, None, 1.0, 2.0),))
    with pytest.raises(DomainError):
        moon_indicator(SimpleFunction(((1.0, ball((0.0,), 0.2)),)), fam, 0.05)


def test_cdg_single_small_cube():
    g = centered_grid(1, 2048, 2.0**-6)
    fam = heat_family([4.0, 8.0], g)
    f = SimpleFunction(((1.0, dyadic_cube(2, (1,))),))
    out = cdg_point_masses(f, fam, 0.01)
    assert out.points == ((0.375,),)
    assert out.weights == (0.25,)
    assert out.achieved_error < out.error_bound


def test_cdg_two_equal_cubes_get_equal_weights():
    g = centered_grid(1, 2048, 2.0**-6)
    fam = heat_family([4.0, 8.0], g)
    f = SimpleFunction(((0.7, dyadic_cube(1, (-3,))),
                        (0.7, dyadic_cube(1, (4,)))))
    out = cdg_point_masses(f, fam, 0.01)
    assert len(set(out.weights)) == 1
    assert len(out.points) == len(out.weights)


def test_cdg_random_function_bound_verified():
    g = centered_grid(1, 2048, 2.0**-6)
    fam = heat_family([4.0, 8.0], g)
    f = random_simple_function(21, 1, region_kind="cube",
                               scale_range=(0.5, 2.0))
    out = cdg_point_masses(f, fam, 0.01)
    f_grid = rasterize(f, g)
    l1 = lp_norm(f_grid, 1)
    combs = out.comb_field(fam)
    worst = 0.0
    for entry, comb in zip(fam.entries, combs):
        smoothed = convolve_direct(f_grid, entry.samples)
        worst = max(worst, float(np.max(np.abs(smoothed.samples
                                               - comb.samples))))
    assert worst < 2.0 * l1 * 0.01
    assert out.achieved_error == pytest.approx(worst, rel=1e-6, abs=1e-12)
    # weights are coefficient times refined cube volume
    for (coeff, cube), w in zip(out.terms, out.weights):
        assert w == pytest.approx(coeff * cube.measure())


def test_cdg_shrinking_epsilon_shrinks_error():
    g = centered_grid(1, 2048, 2.0**-6)
    fam = heat_family([4.0, 8.0], g)
    f = random_simple_function(22, 1, region_kind="cube",
                               scale_range=(0.5, 2.0))
    coarse = cdg_point_masses(f, fam, 0.04)
    fine = cdg_point_masses(f, fam, 0.01)
    assert fine.achieved_error <= coarse.achieved_error + 1e-12
    assert fine.delta_used <= coarse.delta_used


def test_cdg_rejects_bad_input():
    g = centered_grid(1, 1024, 2.0**-6)
    fam = heat_family([4.0], g)
    with pytest.raises(DomainError):
        cdg_point_masses(SimpleFunction(((1.0, ball((0.0,), 0.5)),)), fam, 0.01)
    nofam = KernelFamily("bare", (KernelEntry(
        0.0, fam.entries[0].samples, None, 1.0, 1.0),))
    with pytest.raises(UnsupportedKernelError):
        cdg_point_masses(SimpleFunction(((1.0, dyadic_cube(1, (0,)),),)),
                         nofam, 0.01)


def test_cdg_incompatible_spacing():
    g = centered_grid(1, 64, 0.3)
    fam = heat_family([1.0], g)
    f = SimpleFunction(((1.0, dyadic_cube(1, (0,))),))
    with pytest.raises(ResolutionError):
        cdg_point_masses(f, fam, 0.05)


def test_approximants_serialize_to_json():
    g = centered_grid(1, 2048, 2.0**-7)
    fam = heat_family([6.0, 10.0], g)
    f = SimpleFunction(((1.0, ball((0.37,), 0.2)),))
    moon = moon_indicator(f, fam, 0.05)
    blob = json.loads(moon.to_json())
    assert blob["regions"][0]["kind"] == "ball"
    assert blob["achieved_error"] == moon.achieved_error
    assert blob["epsilon"] == 0.05

    fam2 = heat_family([4.0, 8.0], centered_grid(1, 2048, 2.0**-6))
    cubes = SimpleFunction(((1.0, dyadic_cube(2, (1,))),))
    cdg = cdg_point_masses(cubes, fam2, 0.01)
    blob = json.loads(cdg.to_json())
    assert blob["points"] == [[0.375]]
    assert blob["weights"] == [0.25]
    assert blob["terms"][0]["region"]["kind"] == "cube"
