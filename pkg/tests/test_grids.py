"""Grids, regions, rasterization, norms, refinement, serialization."""
import json
import math

import numpy as np
import pytest

from varpoint import DomainError
from varpoint.grids import (
    Grid,
    GridFunction,
    PointConfiguration,
    SimpleFunction,
    ball,
    centered_grid,
    comb_convolve,
    dyadic_cube,
    dyadic_refine,
    grid_function_from_json,
    grid_function_to_json,
    level_measure,
    lp_norm,
    random_simple_function,
    rasterize,
    rasterize_indicator,
    region_sample_count,
)


def test_grid_validation():
    with pytest.raises(DomainError):
        Grid(3, 8, 1.0, (0.0, 0.0, 0.0))
    with pytest.raises(DomainError):
        Grid(1, 9, 1.0, (0.0,))
    with pytest.raises(DomainError):
        Grid(1, 8, -1.0, (0.0,))
    g = centered_grid(2, 8, 0.5)
    assert g.period == 4.0
    assert g.cell_volume == 0.25
    assert g.origin == (-2.0, -2.0)


def test_rasterize_unit_cube():
    g = Grid(1, 64, 2.0**-4, (-2.0,))
    f = rasterize(SimpleFunction(((1.0, dyadic_cube(0, (0,))),)), g)
    xs = g.axis_coordinates(0)
    inside = (xs >= 0.0) & (xs < 1.0)
    assert np.array_equal(f.samples.real > 0.5, inside)
    # half-open cube: exactly 1/h samples
    assert int(np.count_nonzero(f.samples)) == 16


def test_rasterize_ball_halfopen_1d():
    # ball radius 0.5 at 0 with spacing 0.25 covers the [-0.5, 0.5) lattice
    g = Grid(1, 16, 0.25, (-2.0,))
    f = rasterize(SimpleFunction(((2.0, ball((0.0,), 0.5)),)), g)
    xs = g.axis_coordinates(0)
    hit = xs[f.samples.real == 2.0]
    assert np.allclose(hit, [-0.5, -0.25, 0.0, 0.25])


def test_rasterize_ball_2d_boundary_rule():
    g = Grid(2, 16, 0.25, (-2.0, -2.0))
    reg = ball((0.0, 0.0), 1.0)
    count = region_sample_count(reg, g)
    # interior points (|x| < 1) plus the lexicographically-lower boundary:
    # (-1, 0) and (0, -1) included, (1, 0) and (0, 1) excluded
    xs = g.axis_coordinates(0)
    inside = 0
    for x in xs:
        for y in xs:
            d2 = x * x + y * y
            if d2 < 1.0 or (d2 == 1.0 and (x < 0 or (x == 0 and y < 0))):
                inside += 1
    assert count == inside


def test_level_measure_two_levels():
    g = Grid(1, 32, 0.125, (-2.0,))
    sf = SimpleFunction((
        (1.0, dyadic_cube(1, (0,))),   # [0, 0.5) at height 1
        (0.25, dyadic_cube(1, (-2,))), # [-1, -0.5) at height 0.25
    ))
    f = rasterize(sf, g)
    assert level_measure(f, 0.5) == pytest.approx(0.5)
    assert level_measure(f, 0.1) == pytest.approx(1.0)
    # strict comparison: threshold equal to the level excludes it
    assert level_measure(f, 1.0) == 0.0


def test_lp_norms():
    g = Grid(1, 16, 0.5, (-4.0,))
    f = rasterize(SimpleFunction(((3.0, dyadic_cube(-1, (0,))),)), g)  # side 2
    assert lp_norm(f, 1) == pytest.approx(6.0)
    assert lp_norm(f, 2) == pytest.approx(math.sqrt(9.0 * 2.0))
    assert lp_norm(f, math.inf) == pytest.approx(3.0)
    with pytest.raises(DomainError):
        lp_norm(f, 0.5)


def test_region_outside_grid_rejected():
    g = Grid(1, 8, 0.25, (-1.0,))
    with pytest.raises(DomainError):
        rasterize(SimpleFunction(((1.0, ball((0.0,), 3.0)),)), g)


def test_dyadic_refine_identity_and_split():
    g = Grid(1, 64, 2.0**-4, (-2.0,))
    sf = SimpleFunction(((0.75, dyadic_cube(-1, (0,))),))  # side 2 on [0, 2)
    same = dyadic_refine(sf, 2.0)
    assert same == sf
    fine = dyadic_refine(sf, 0.25)
    assert len(fine.terms) == 8
    assert all(reg.side == 0.25 for _, reg in fine.terms)
    a = rasterize(sf, g).samples
    b = rasterize(fine, g).samples
    assert np.array_equal(a, b)
    with pytest.raises(DomainError):
        dyadic_refine(SimpleFunction(((1.0, ball((0.0,), 1.0)),)), 0.25)


def test_dyadic_refine_2d_exact():
    g = Grid(2, 32, 0.125, (-2.0, -2.0))
    sf = SimpleFunction(((0.5, dyadic_cube(0, (0, -1))),))
    fine = dyadic_refine(sf, 0.3)
    assert len(fine.terms) == 16
    assert np.array_equal(rasterize(sf, g).samples, rasterize(fine, g).samples)


def test_random_simple_function_deterministic_disjoint():
    a = random_simple_function(42, dim=1, num_terms=3, region_kind="ball")
    b = random_simple_function(42, dim=1, num_terms=3, region_kind="ball")
    assert a == b
    assert a.sup_norm() == pytest.approx(1.0)
    bounds = [reg.bounds()[0] for _, reg in a.terms]
    for i in range(len(bounds)):
        for j in range(i + 1, len(bounds)):
            lo1, hi1 = bounds[i]
            lo2, hi2 = bounds[j]
            assert hi1 <= lo2 or hi2 <= lo1
    c = random_simple_function(43, dim=2, num_terms=2, region_kind="cube")
    assert c.dim == 2


def test_comb_convolve_box_kernel():
    # single unit mass at the origin against the box kernel (1/2) 1_[-1,1]
    g = Grid(1, 64, 0.125, (-4.0,))

    def box(disp):
        return np.where(np.abs(disp[..., 0]) <= 1.0, 0.5, 0.0)

    pc = PointConfiguration(((0.0,),))
    f = comb_convolve(pc, box, g)
    xs = g.axis_coordinates(0)
    expected = np.where(np.abs(xs) <= 1.0, 0.5, 0.0)
    assert np.allclose(f.samples.real, expected)


def test_comb_convolve_weights_and_wrap():
    g = Grid(1, 32, 0.25, (-4.0,))

    def box(disp):
        return np.where(np.abs(disp[..., 0]) <= 0.5, 1.0, 0.0)

    # mass near the torus edge wraps around
    pc = PointConfiguration(((3.75,),), (2.0,))
    f = comb_convolve(pc, box, g)
    xs = g.axis_coordinates(0)
    val_at = dict(zip(xs.tolist(), f.samples.real.tolist()))
    assert val_at[3.75] == pytest.approx(2.0)
    assert val_at[-4.0] == pytest.approx(2.0)  # 3.75 + 0.5 wraps to -3.75's side
    assert val_at[0.0] == pytest.approx(0.0)


def test_point_configuration_validation():
    with pytest.raises(DomainError):
        PointConfiguration((), ())
    with pytest.raises(DomainError):
        PointConfiguration(((0.0,),), (-1.0,))
    pc = PointConfiguration(((0.0,), (1.0,)))
    assert pc.weights == (1.0, 1.0)
    assert len(pc) == 2


def test_serialization_roundtrip():
    g = Grid(2, 8, 0.5, (-2.0, -2.0))
    rng = np.random.default_rng(5)
    samples = rng.normal(size=(8, 8)) + 1j * rng.normal(size=(8, 8))
    f = GridFunction(g, samples)
    text = grid_function_to_json(f)
    doc = json.loads(text)
    assert doc["dim"] == 2 and doc["extent"] == 8
    back = grid_function_from_json(text)
    assert back.grid == g
    assert np.array_equal(back.samples, f.samples)
    # corrupted payload size is rejected
    doc["samples"] = doc["samples"][: len(doc["samples"]) // 2]
    with pytest.raises(DomainError):
        grid_function_from_json(json.dumps(doc))


def test_indicator_union():
    g = Grid(1, 32, 0.25, (-4.0,))
    f = rasterize_indicator([dyadic_cube(0, (0,)), dyadic_cube(0, (2,))], g)
    assert lp_norm(f, 1) == pytest.approx(2.0)
    assert float(f.samples.real.max()) == 1.0
