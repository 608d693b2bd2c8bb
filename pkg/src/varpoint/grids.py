"""Periodic sampling grids, regions, simple functions and point masses.

A ``Grid`` discretizes a flat torus in one or two dimensions with a
power-of-two number of samples per axis.  ``GridFunction`` holds complex
samples on such a grid; measures and L^p norms are Riemann sums with cell
volume ``spacing ** dim``.

Regions are either dyadic cubes (side ``2**-level``, integer corner on the
mesh of that side, half-open so translates tile exactly) or balls.  Ball
membership is the half-open convention: the open ball plus the
lexicographically-lower part of the boundary, so in one dimension a ball is
the interval ``[c - r, c + r)``.

``SimpleFunction`` is a finite list of ``(coefficient, region)`` terms and
rasterizes by summing coefficients over the region indicators.
"""
from __future__ import annotations

import base64
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError


@dataclass(frozen=True)
class Grid:
    dim: int
    extent: int
    spacing: float
    origin: tuple[float, ...]

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise DomainError(f"grid dimension must be 1 or 2, got {self.dim}")
        n = self.extent
        if n < 2 or (n & (n - 1)) != 0:
            raise DomainError(f"grid extent must be a power of two >= 2, got {n}")
        if not self.spacing > 0:
            raise DomainError("grid spacing must be positive")
        origin = tuple(float(c) for c in self.origin)
        object.__setattr__(self, "origin", origin)
        if len(origin) != self.dim:
            raise DomainError("origin dimension mismatch")

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.extent,) * self.dim

    @property
    def period(self) -> float:
        """Torus side length."""
        return self.extent * self.spacing

    @property
    def cell_volume(self) -> float:
        return self.spacing**self.dim

    def axis_coordinates(self, axis: int) -> np.ndarray:
        return self.origin[axis] + self.spacing * np.arange(self.extent)

    def coordinate_arrays(self) -> tuple[np.ndarray, ...]:
        """Per-axis coordinates broadcastable to ``shape``."""
        if self.dim == 1:
            return (self.axis_coordinates(0),)
        x = self.axis_coordinates(0)[:, None]
        y = self.axis_coordinates(1)[None, :]
        return x, y

    def bounds(self) -> tuple[tuple[float, float], ...]:
        return tuple((o, o + self.period) for o in self.origin)


def centered_grid(dim: int, extent: int, spacing: float) -> Grid:
    half = extent * spacing / 2.0
    return Grid(dim, extent, spacing, (-half,) * dim)


@dataclass(frozen=True, eq=False)
class GridFunction:
    grid: Grid
    samples: np.ndarray = field(repr=False)

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.complex128)
        if arr.shape != self.grid.shape:
            raise DomainError(
                f"sample shape {arr.shape} does not match grid shape {self.grid.shape}")
        arr = np.ascontiguousarray(arr)
        arr.flags.writeable = False
        object.__setattr__(self, "samples", arr)

    @property
    def real_samples(self) -> np.ndarray:
        return self.samples.real


def lp_norm(f: GridFunction, p) -> float:
    """Grid L^p norm, ``(cell_volume * sum |f|^p)^(1/p)``; ``p=inf`` is the max modulus."""
    p = float(p)
    if p < 1.0 or math.isnan(p):
        raise DomainError(f"norm exponent must satisfy p >= 1, got {p}")
    mags = np.abs(f.samples)
    if math.isinf(p):
        return float(mags.max())
    return float((f.grid.cell_volume * np.sum(mags**p)) ** (1.0 / p))


def level_measure(f: GridFunction, lam) -> float:
    """Measure of the strict super-level set ``{x : f(x) > lam}``.

    Counts samples whose real part exceeds ``lam`` strictly, scaled by the
    cell volume.  Intended for the real non-negative fields produced by the
    pointwise operators.
    """
    lam = float(lam)
    return f.grid.cell_volume * int(np.count_nonzero(f.samples.real > lam))


# --- regions ---------------------------------------------------------------

@dataclass(frozen=True)
class Region:
    kind: str
    level: int | None = None
    corner: tuple[int, ...] | None = None
    center: tuple[float, ...] | None = None
    radius: float | None = None

    def __post_init__(self):
        if self.kind == "cube":
            if self.level is None or self.corner is None:
                raise DomainError("dyadic cube needs level and corner")
            object.__setattr__(self, "corner", tuple(int(c) for c in self.corner))
        elif self.kind == "ball":
            if self.center is None or self.radius is None:
                raise DomainError("ball needs center and radius")
            if not self.radius > 0:
                raise DomainError("ball radius must be positive")
            object.__setattr__(self, "center", tuple(float(c) for c in self.center))
        else:
            raise DomainError(f"unknown region kind {self.kind!r}")

    @property
    def dim(self) -> int:
        return len(self.corner) if self.kind == "cube" else len(self.center)

    @property
    def side(self) -> float:
        if self.kind != "cube":
            raise DomainError("side is defined for cubes only")
        return 2.0 ** (-self.level)

    def bounds(self) -> tuple[tuple[float, float], ...]:
        if self.kind == "cube":
            s = self.side
            return tuple((c * s, (c + 1) * s) for c in self.corner)
        r = self.radius
        return tuple((c - r, c + r) for c in self.center)

    def measure(self) -> float:
        """Continuum volume."""
        if self.kind == "cube":
            return self.side ** self.dim
        if self.dim == 1:
            return 2.0 * self.radius
        return math.pi * self.radius**2

    def diameter(self) -> float:
        if self.kind == "cube":
            return self.side * math.sqrt(self.dim)
        return 2.0 * self.radius

    def membership(self, coords: tuple[np.ndarray, ...]) -> np.ndarray:
        """Boolean mask of grid points inside the region (half-open rules)."""
        if self.kind == "cube":
            mask = None
            for axis, (lo, hi) in enumerate(self.bounds()):
                c = coords[axis]
                m = (c >= lo) & (c < hi)
                mask = m if mask is None else (mask & m)
            return mask
        deltas = [coords[a] - self.center[a] for a in range(self.dim)]
        d2 = sum(d * d for d in deltas)
        r2 = self.radius * self.radius
        inside = d2 < r2
        on_boundary = d2 == r2
        lex_lower = deltas[0] < 0
        if self.dim == 2:
            lex_lower = lex_lower | ((deltas[0] == 0) & (deltas[1] < 0))
        return inside | (on_boundary & lex_lower)


def dyadic_cube(level: int, corner) -> Region:
    return Region("cube", level=int(level), corner=tuple(corner))


def ball(center, radius: float) -> Region:
    center = tuple(np.atleast_1d(np.asarray(center, dtype=float)))
    return Region("ball", center=center, radius=float(radius))


# --- simple functions -------------------------------------------------------

@dataclass(frozen=True)
class SimpleFunction:
    terms: tuple[tuple[float, Region], ...]

    def __post_init__(self):
        terms = tuple((float(a), reg) for a, reg in self.terms)
        object.__setattr__(self, "terms", terms)
        if not terms:
            raise DomainError("simple function needs at least one term")
        dims = {reg.dim for _, reg in terms}
        if len(dims) != 1:
            raise DomainError("all regions must share a dimension")

    @property
    def dim(self) -> int:
        return self.terms[0][1].dim

    def sup_norm(self) -> float:
        """Max coefficient modulus; equals the sup norm when regions are disjoint."""
        return max(abs(a) for a, _ in self.terms)

    def l1_continuum(self) -> float:
        return sum(abs(a) * reg.measure() for a, reg in self.terms)


def _check_region_fits(region: Region, grid: Grid):
    for (lo, hi), (glo, ghi) in zip(region.bounds(), grid.bounds()):
        if lo < glo - 1e-12 or hi > ghi + 1e-12:
            raise DomainError(
                f"region bounds ({lo}, {hi}) exceed grid domain ({glo}, {ghi})")


def rasterize(sf: SimpleFunction, grid: Grid) -> GridFunction:
    """Sum of coefficient * indicator samples over the grid."""
    if sf.dim != grid.dim:
        raise DomainError("simple function and grid dimension mismatch")
    coords = grid.coordinate_arrays()
    out = np.zeros(grid.shape)
    for coeff, region in sf.terms:
        _check_region_fits(region, grid)
        mask = region.membership(coords)
        if grid.dim == 1:
            out += coeff * mask
        else:
            out += coeff * np.broadcast_to(mask, grid.shape)
    return GridFunction(grid, out)


def rasterize_indicator(regions, grid: Grid) -> GridFunction:
    """Indicator of a union of regions (coefficient one on each)."""
    return rasterize(SimpleFunction(tuple((1.0, r) for r in regions)), grid)


def region_sample_count(region: Region, grid: Grid) -> int:
    coords = grid.coordinate_arrays()
    mask = region.membership(coords)
    if grid.dim == 2:
        mask = np.broadcast_to(mask, grid.shape)
    return int(np.count_nonzero(mask))


def dyadic_refine(sf: SimpleFunction, max_side: float) -> SimpleFunction:
    """Split every dyadic-cube term into children of side <= max_side.

    Coefficients are inherited, so the rasterization is unchanged.  Terms
    already small enough pass through.  Non-cube regions are rejected.
    """
    if not max_side > 0:
        raise DomainError("max_side must be positive")
    target_level = math.ceil(-math.log2(max_side) - 1e-12)
    out = []
    for coeff, region in sf.terms:
        if region.kind != "cube":
            raise DomainError("dyadic refinement applies to cube regions only")
        if region.level >= target_level:
            out.append((coeff, region))
            continue
        factor = 2 ** (target_level - region.level)
        base = tuple(c * factor for c in region.corner)
        ranges = [range(factor)] * region.dim
        idx = np.stack(np.meshgrid(*ranges, indexing="ij"), axis=-1).reshape(-1, region.dim)
        for offset in idx:
            corner = tuple(b + int(o) for b, o in zip(base, offset))
            out.append((coeff, dyadic_cube(target_level, corner)))
    return SimpleFunction(tuple(out))


# --- random generators ------------------------------------------------------

def _as_rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def random_simple_function(
    seed,
    dim: int,
    num_terms: int = 3,
    region_kind: str = "cube",
    coeff_range: tuple[float, float] = (0.2, 1.0),
    center_box: float = 8.0,
    scale_range: tuple[float, float] = (0.5, 2.0),
    max_tries: int = 200,
) -> SimpleFunction:
    """Deterministic random simple function with pairwise disjoint regions.

    Regions are sampled inside ``[-center_box, center_box]^dim`` with sizes in
    ``scale_range``; overlapping candidates are rejected.  Coefficients are
    scaled so the largest equals one.
    """
    rng = _as_rng(seed)
    if region_kind not in ("cube", "ball"):
        raise DomainError(f"unknown region kind {region_kind!r}")
    regions: list[Region] = []
    tries = 0
    while len(regions) < num_terms:
        tries += 1
        if tries > max_tries:
            raise DomainError("could not place disjoint regions; box too small")
        if region_kind == "ball":
            radius = float(rng.uniform(scale_range[0] / 2, scale_range[1] / 2))
            center = rng.uniform(-center_box + radius, center_box - radius, size=dim)
            cand = ball(center, radius)
        else:
            side = float(rng.uniform(*scale_range))
            level = int(round(-math.log2(side)))
            side = 2.0**-level
            span = int(center_box / side)
            corner = tuple(int(c) for c in rng.integers(-span, span, size=dim))
            cand = dyadic_cube(level, corner)
        if all(_bounds_disjoint(cand.bounds(), r.bounds()) for r in regions):
            regions.append(cand)
    coeffs = rng.uniform(coeff_range[0], coeff_range[1], size=num_terms)
    coeffs = coeffs / coeffs.max()
    return SimpleFunction(tuple(zip(coeffs.tolist(), regions)))


def _bounds_disjoint(a, b) -> bool:
    for (alo, ahi), (blo, bhi) in zip(a, b):
        if ahi <= blo or bhi <= alo:
            return True
    return False


# --- point configurations ---------------------------------------------------

@dataclass(frozen=True)
class PointConfiguration:
    """Weighted points on the torus; weights default to one."""

    points: tuple[tuple[float, ...], ...]
    weights: tuple[float, ...] | None = None

    def __post_init__(self):
        pts = tuple(tuple(float(c) for c in p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if not pts:
            raise DomainError("point configuration needs at least one point")
        dims = {len(p) for p in pts}
        if len(dims) != 1:
            raise DomainError("all points must share a dimension")
        if self.weights is None:
            object.__setattr__(self, "weights", (1.0,) * len(pts))
        else:
            w = tuple(float(x) for x in self.weights)
            object.__setattr__(self, "weights", w)
            if len(w) != len(pts):
                raise DomainError("weights length must match points")
            if any(x <= 0 for x in w):
                raise DomainError("weights must be positive")

    @property
    def dim(self) -> int:
        return len(self.points[0])

    def __len__(self) -> int:
        return len(self.points)


def comb_convolve(pc: PointConfiguration, evaluator, grid: Grid) -> GridFunction:
    """Superpose kernel translates: ``sum_k w_k g(x - x_k)`` sampled on the grid.

    ``evaluator`` maps an array of displacement vectors, shape ``(..., dim)``,
    to kernel values.  Displacements are wrapped to the nearest torus image so
    the result matches periodic convolution against a rasterized point mass.
    """
    if pc.dim != grid.dim:
        raise DomainError("point configuration and grid dimension mismatch")
    coords = grid.coordinate_arrays()
    period = grid.period
    out = np.zeros(grid.shape)
    for weight, point in zip(pc.weights, pc.points):
        deltas = []
        for axis in range(grid.dim):
            d = coords[axis] - point[axis]
            d = (d + period / 2.0) % period - period / 2.0
            deltas.append(np.broadcast_to(d, grid.shape))
        disp = np.stack(deltas, axis=-1)
        out = out + weight * np.asarray(evaluator(disp), dtype=float)
    return GridFunction(grid, out)


# --- serialization ----------------------------------------------------------

_ENCODING = "complex128-le-interleaved-base64"


def grid_function_to_json(f: GridFunction) -> str:
    """JSON document: grid header plus base64 little-endian (re, im) samples."""
    payload = np.ascontiguousarray(f.samples, dtype="<c16").tobytes()
    doc = {
        "dim": f.grid.dim,
        "extent": f.grid.extent,
        "spacing": f.grid.spacing,
        "origin": list(f.grid.origin),
        "encoding": _ENCODING,
        "samples": base64.b64encode(payload).decode("ascii"),
    }
    return json.dumps(doc)


def grid_function_from_json(text: str) -> GridFunction:
    doc = json.loads(text)
    if doc.get("encoding") != _ENCODING:
        raise DomainError(f"unsupported sample encoding {doc.get('encoding')!r}")
    grid = Grid(int(doc["dim"]), int(doc["extent"]), float(doc["spacing"]),
                tuple(doc["origin"]))
    raw = base64.b64decode(doc["samples"])
    expected = grid.extent**grid.dim * 16
    if len(raw) != expected:
        raise DomainError(f"sample payload has {len(raw)} bytes, expected {expected}")
    samples = np.frombuffer(raw, dtype="<c16").astype(np.complex128).reshape(grid.shape)
    return GridFunction(grid, samples)
