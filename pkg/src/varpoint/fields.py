"""Pointwise trajectory statistics of convolved families.

Convolving a function against every kernel in a family gives, at each grid
point x, a finite trajectory t -> (f * g_t)(x).  This module evaluates the
sequence statistics (r-variation, thresholded jump surrogate, maximal value)
on all of those trajectories simultaneously, producing scalar fields on the
grid.  The vectorized recursions mirror the scalar ones in
:mod:`varpoint.sequences` step for step and are cross-checked against them in
the test suite.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError
from .grids import GridFunction, PointConfiguration
from .kernels import KernelFamily
from .sequences import _check_order, _check_threshold
from .transforms import convolve

_KINDS = ("variation", "jump_surrogate", "maximal")


@dataclass(frozen=True)
class OperatorSpec:
    """Which trajectory statistic to apply, plus its parameters.

    ``kind`` selects among "variation" (needs ``r``), "jump_surrogate"
    (needs finite ``r`` and a positive ``threshold``) and "maximal" (no
    parameters).  ``index_subset`` restricts the trajectory to the listed
    entry positions, counted from zero, before the statistic is taken.
    """

    kind: str
    r: float | None = None
    threshold: float | None = None
    index_subset: tuple[int, ...] | None = None

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise DomainError(f"unknown operator kind {self.kind!r}")
        if self.kind == "maximal":
            if self.r is not None or self.threshold is not None:
                raise DomainError("maximal statistic takes no parameters")
        else:
            if self.r is None:
                raise DomainError(f"{self.kind} statistic needs an order r")
            object.__setattr__(self, "r", _check_order(self.r))
        if self.kind == "jump_surrogate":
            if math.isinf(self.r):
                raise DomainError("jump surrogate requires a finite order r")
            if self.threshold is None:
                raise DomainError("jump surrogate needs a threshold")
            object.__setattr__(self, "threshold",
                               _check_threshold(self.threshold))
        elif self.threshold is not None:
            raise DomainError(f"{self.kind} statistic takes no threshold")
        if self.index_subset is not None:
            subset = tuple(int(i) for i in self.index_subset)
            if not subset:
                raise DomainError("index_subset must be non-empty")
            if subset[0] < 0:
                raise DomainError("index_subset entries must be >= 0")
            if any(b <= a for a, b in zip(subset, subset[1:])):
                raise DomainError("index_subset must be strictly increasing")
            object.__setattr__(self, "index_subset", subset)


def apply_family(f: GridFunction, fam: KernelFamily) -> list[GridFunction]:
    """Convolve ``f`` with every kernel of the family, in entry order."""
    if f.grid != fam.grid:
        raise DomainError("function and kernel family live on different grids")
    return [convolve(f, entry.samples) for entry in fam.entries]


def trajectory_stack(fields) -> np.ndarray:
    """Stack per-kernel fields into one complex array of shape (T, ...)."""
    fields = list(fields)
    if not fields:
        raise DomainError("need at least one field to stack")
    if len({f.grid for f in fields}) != 1:
        raise DomainError("stacked fields must share a grid")
    return np.stack([f.samples for f in fields])


def operator_values(stack, spec: OperatorSpec) -> np.ndarray:
    """Apply the statistic named by ``spec`` along axis 0 of ``stack``.

    The leading axis is the trajectory index; the result drops it.  Output
    values agree with the scalar sequence operations applied one trailing
    index at a time.
    """
    stack = np.asarray(stack, dtype=np.complex128)
    if stack.ndim < 1 or stack.shape[0] == 0:
        raise DomainError("trajectory stack needs a non-empty leading axis")
    if spec.index_subset is not None:
        if spec.index_subset[-1] >= stack.shape[0]:
            raise DomainError("index_subset exceeds the trajectory length")
        stack = stack[list(spec.index_subset)]
    shape = stack.shape[1:]
    flat = stack.reshape(stack.shape[0], -1)
    if spec.kind == "maximal":
        out = np.max(np.abs(flat), axis=0)
    elif spec.kind == "variation":
        out = _variation_values(flat, spec.r)
    else:
        counts = _jump_counts(flat, spec.threshold)
        out = spec.threshold * counts.astype(float) ** (1.0 / spec.r)
    return out.reshape(shape)


def operator_field(f: GridFunction, fam: KernelFamily,
                   spec: OperatorSpec) -> GridFunction:
    """Field of trajectory statistics of ``t -> (f * g_t)(x)``.

    The output is real and non-negative at every sample.
    """
    stack = trajectory_stack(apply_family(f, fam))
    return GridFunction(f.grid, operator_values(stack, spec))


def jump_count_values(stack, threshold) -> np.ndarray:
    """Integer jump counts along axis 0 of ``stack``."""
    threshold = _check_threshold(threshold)
    stack = np.asarray(stack, dtype=np.complex128)
    if stack.ndim < 1 or stack.shape[0] == 0:
        raise DomainError("trajectory stack needs a non-empty leading axis")
    flat = stack.reshape(stack.shape[0], -1)
    return _jump_counts(flat, threshold).reshape(stack.shape[1:])


def _variation_values(flat: np.ndarray, r: float) -> np.ndarray:
    steps, npts = flat.shape
    if steps == 1:
        return np.zeros(npts)
    if math.isinf(r):
        out = np.zeros(npts)
        for i in range(steps - 1):
            np.maximum(out, np.max(np.abs(flat[i + 1:] - flat[i]), axis=0),
                       out=out)
        return out
    best = np.zeros((steps, npts))
    for j in range(1, steps):
        cand = best[:j] + np.abs(flat[j] - flat[:j]) ** r
        best[j] = np.maximum(0.0, cand.max(axis=0))
    return np.max(best, axis=0) ** (1.0 / r)


def _jump_counts(flat: np.ndarray, lam: float) -> np.ndarray:
    if np.all(flat.imag == 0.0):
        return _jump_counts_real(flat.real, lam)
    return _jump_counts_window(flat, lam)


def _jump_counts_real(flat: np.ndarray, lam: float) -> np.ndarray:
    counts = np.zeros(flat.shape[1], dtype=np.int64)
    wmin = flat[0].copy()
    wmax = flat[0].copy()
    for t in range(1, flat.shape[0]):
        v = flat[t]
        jump = (wmax - v > lam) | (v - wmin > lam)
        counts += jump
        wmin = np.where(jump, v, np.minimum(wmin, v))
        wmax = np.where(jump, v, np.maximum(wmax, v))
    return counts


def _jump_counts_window(flat: np.ndarray, lam: float) -> np.ndarray:
    # window membership per point since the last completed jump
    steps, npts = flat.shape
    counts = np.zeros(npts, dtype=np.int64)
    active = np.zeros((steps, npts), dtype=bool)
    active[0] = True
    for t in range(1, steps):
        exceeds = np.abs(flat[t] - flat[:t]) > lam
        jump = np.any(exceeds & active[:t], axis=0)
        counts += jump
        active[:t, jump] = False
        active[t] = True
    return counts


def comb_trajectories(pc: PointConfiguration, fam: KernelFamily,
                      points) -> np.ndarray:
    """Trajectories of a weighted point superposition at chosen locations.

    Returns a complex array of shape (T, K) whose (t, k) entry is
    ``sum_j w_j g_t(x_k - y_j)`` with displacements wrapped to the nearest
    torus image.  Agrees with sampling ``comb_convolve`` when the locations
    sit on the lattice.
    """
    fam.require_evaluators()
    grid = fam.grid
    if pc.dim != grid.dim:
        raise DomainError("point configuration and family dimension mismatch")
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != grid.dim:
        raise DomainError("locations must form an array of shape (K, dim)")
    period = grid.period
    sources = np.asarray(pc.points, dtype=float)
    weights = np.asarray(pc.weights, dtype=float)
    disp = pts[:, None, :] - sources[None, :, :]
    disp = (disp + period / 2.0) % period - period / 2.0
    out = np.empty((len(fam), pts.shape[0]), dtype=np.complex128)
    for t, entry in enumerate(fam.entries):
        vals = np.asarray(entry.evaluator(disp), dtype=float)
        out[t] = vals @ weights
    return out
