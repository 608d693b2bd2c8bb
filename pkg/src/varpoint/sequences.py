"""Oscillation statistics of finite complex sample sequences.

Given a finite trajectory (a_0, ..., a_{T-1}) of complex numbers, this module
computes:

* ``variation`` -- the r-variation seminorm, the supremum over increasing
  subsequences t_0 < t_1 < ... of ``(sum_i |a_{t_i} - a_{t_{i+1}}|^r)^(1/r)``,
  with ``r = inf`` giving the diameter ``max_{i<j} |a_i - a_j|``;
* ``jump_count`` -- the maximal number of pairs s_0 < t_0 <= s_1 < t_1 <= ...
  with ``|a_{s_i} - a_{t_i}| > lam`` (strict), i.e. the number of
  lambda-fluctuations the trajectory completes;
* ``jump_surrogate`` -- ``lam * jump_count(seq, lam) ** (1/r)``;
* ``maximal`` -- ``max_i |a_i|``.

Each fast implementation is paired with an exhaustive oracle
(``variation_bruteforce``, ``jump_count_bruteforce``) that enumerates
subsequences or pair chains directly.  The oracles are deliberately naive and
capped in input size; the verification suites compare the two on random data.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, SizeCapError

# Exhaustive enumeration grows like 2**n; keep the oracles honest but bounded.
VARIATION_BRUTEFORCE_CAP = 20
JUMP_BRUTEFORCE_CAP = 16


@dataclass(frozen=True)
class SampleSequence:
    """A finite complex trajectory, optionally tagged with source indices.

    ``index_subset`` records which positions of a longer parent trajectory
    these values were sampled from; it must be strictly increasing.  The
    statistics below depend only on the order of the values, so the tag is
    bookkeeping for restriction experiments.
    """

    values: tuple[complex, ...]
    index_subset: tuple[int, ...] | None = None

    def __post_init__(self):
        values = tuple(complex(v) for v in self.values)
        object.__setattr__(self, "values", values)
        if len(values) == 0:
            raise DomainError("sample sequence must be non-empty")
        if self.index_subset is not None:
            subset = tuple(int(i) for i in self.index_subset)
            object.__setattr__(self, "index_subset", subset)
            if len(subset) != len(values):
                raise DomainError("index_subset length must match values")
            if any(b <= a for a, b in zip(subset, subset[1:])):
                raise DomainError("index_subset must be strictly increasing")

    def __len__(self):
        return len(self.values)

    def restrict(self, positions) -> "SampleSequence":
        """Subsequence at the given strictly increasing positions."""
        positions = tuple(int(p) for p in positions)
        if len(positions) == 0:
            raise DomainError("restriction must keep at least one position")
        if any(b <= a for a, b in zip(positions, positions[1:])):
            raise DomainError("positions must be strictly increasing")
        if positions[0] < 0 or positions[-1] >= len(self.values):
            raise DomainError("positions out of range")
        base = self.index_subset or tuple(range(len(self.values)))
        return SampleSequence(
            tuple(self.values[p] for p in positions),
            tuple(base[p] for p in positions),
        )


def _values(seq) -> np.ndarray:
    if isinstance(seq, SampleSequence):
        arr = np.asarray(seq.values, dtype=np.complex128)
    else:
        arr = np.asarray(seq, dtype=np.complex128)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("expected a non-empty one-dimensional sequence")
    return arr


def _check_order(r) -> float:
    r = float(r)
    if math.isnan(r) or r < 1.0:
        raise DomainError(f"variation order must satisfy r >= 1, got {r}")
    return r


def _check_threshold(lam) -> float:
    lam = float(lam)
    if not lam > 0.0:
        raise DomainError(f"jump threshold must be positive, got {lam}")
    return lam


def variation(seq, r) -> float:
    """r-variation seminorm of a finite complex sequence.

    Dynamic program over chain endpoints: ``best[j]`` is the largest value of
    ``sum |a_{t_i} - a_{t_{i+1}}|^r`` over chains ending at j, so
    ``best[j] = max(0, max_{i<j} best[i] + |a_j - a_i|^r)`` and the result is
    ``(max_j best[j])^(1/r)``.  O(n^2).  ``r = inf`` returns the diameter.
    """
    vals = _values(seq)
    r = _check_order(r)
    n = vals.size
    if n == 1:
        return 0.0
    if math.isinf(r):
        # sup over chains of the largest single increment = diameter
        diffs = np.abs(vals[:, None] - vals[None, :])
        return float(diffs.max())
    best = np.zeros(n)
    for j in range(1, n):
        best[j] = max(0.0, float(np.max(best[:j] + np.abs(vals[j] - vals[:j]) ** r)))
    return float(np.max(best)) ** (1.0 / r)


def variation_bruteforce(seq, r) -> float:
    """Exhaustive r-variation oracle: enumerate every increasing subsequence.

    Exponential in the length; inputs longer than VARIATION_BRUTEFORCE_CAP are
    rejected rather than silently truncated.
    """
    vals = _values(seq)
    r = _check_order(r)
    n = vals.size
    if n > VARIATION_BRUTEFORCE_CAP:
        raise SizeCapError(f"bruteforce variation capped at length {VARIATION_BRUTEFORCE_CAP}")
    if n == 1:
        return 0.0
    best = 0.0
    indices = range(n)
    for length in range(2, n + 1):
        for chain in itertools.combinations(indices, length):
            steps = [abs(vals[b] - vals[a]) for a, b in zip(chain, chain[1:])]
            if math.isinf(r):
                value = max(steps)
            else:
                value = sum(s**r for s in steps) ** (1.0 / r)
            if value > best:
                best = value
    return best


def jump_count(seq, lam) -> int:
    """Maximal number of lambda-jumps completed by the trajectory.

    Counts pairs s_0 < t_0 <= s_1 < t_1 <= ... with |a_{s_i} - a_{t_i}| > lam
    (strict).  Earliest-finish greedy: starting from window position p, the
    first index t admitting some s in [p, t) with |a_t - a_s| > lam completes
    a jump, and the window restarts at p = t.  Exchange argument: any chain's
    first pair finishes no earlier, so the greedy count is maximal.

    Real-valued input runs in O(n) by tracking the window min/max; complex
    input falls back to scanning the window.
    """
    vals = _values(seq)
    lam = _check_threshold(lam)
    if np.all(vals.imag == 0.0):
        return _jump_count_real(vals.real, lam)
    count = 0
    window = [vals[0]]
    for t in range(1, vals.size):
        v = vals[t]
        if any(abs(v - w) > lam for w in window):
            count += 1
            window = [v]
        else:
            window.append(v)
    return count


def _jump_count_real(vals: np.ndarray, lam: float) -> int:
    count = 0
    wmin = wmax = vals[0]
    for t in range(1, vals.size):
        v = vals[t]
        if wmax - v > lam or v - wmin > lam:
            count += 1
            wmin = wmax = v
        else:
            wmin = min(wmin, v)
            wmax = max(wmax, v)
    return count


def jump_count_bruteforce(seq, lam) -> int:
    """Exhaustive jump-count oracle: explore every valid pair chain.

    Recursion over the minimal allowed start index; every pair (s, t) with
    |a_s - a_t| > lam branches into a chain continuation with starts >= t.
    Exponential; capped at JUMP_BRUTEFORCE_CAP.
    """
    vals = _values(seq)
    lam = _check_threshold(lam)
    n = vals.size
    if n > JUMP_BRUTEFORCE_CAP:
        raise SizeCapError(f"bruteforce jump count capped at length {JUMP_BRUTEFORCE_CAP}")

    def explore(p: int) -> int:
        best = 0
        for s in range(p, n - 1):
            for t in range(s + 1, n):
                if abs(vals[t] - vals[s]) > lam:
                    cand = 1 + explore(t)
                    if cand > best:
                        best = cand
        return best

    return explore(0)


def jump_surrogate(seq, lam, r) -> float:
    """``lam * N_lam(seq)^(1/r)``, the scale-normalized jump statistic."""
    lam = _check_threshold(lam)
    r = _check_order(r)
    if math.isinf(r):
        raise DomainError("jump surrogate requires a finite order r")
    return lam * jump_count(seq, lam) ** (1.0 / r)


def maximal(seq) -> float:
    """Largest modulus along the trajectory."""
    vals = _values(seq)
    return float(np.max(np.abs(vals)))
