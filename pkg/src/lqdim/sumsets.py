"""Sumsets, box counting, gap derivations and thickness.

A :class:`DyadicSet` is read with point semantics for thickness: grid points
that are adjacent (one cell apart) belong to one solid interval, and any
wider spacing is a gap. Gaps narrower than a cell are invisible, so the
thickness of a set at resolution ``2**-m`` is an upper bound for the
thickness of the compact set it approximates.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from .core import (
    DimensionEstimate,
    DyadicMeasure,
    DyadicSet,
    InvalidArgumentError,
    _check_levels,
    _finish_estimate,
    convolve,
)
from .generators import MeasureSpec, generate


def sumset(a: DyadicSet, b: DyadicSet, pad: bool = True, max_work=None) -> DyadicSet:
    """``A + B`` on the common grid.

    The index sums ``i + j`` always appear. With ``pad`` the neighbour
    ``i + j + 1`` is added too: the cells ``[i, i+1)`` and ``[j, j+1)`` sum to
    ``[i+j, i+j+2)``, so the padded set contains every cell meeting the true
    sumset of the cell unions.
    """
    if a.level != b.level:
        raise InvalidArgumentError(f"level mismatch: {a.level} != {b.level}")
    if a.size == 0 or b.size == 0:
        raise InvalidArgumentError("empty set")
    s = convolve(a.uniform_measure(), b.uniform_measure(), max_work=max_work).indices
    if pad:
        s = np.union1d(s, s + 1)
    return DyadicSet(a.level, s)


def nfold_sumset(a: DyadicSet, n: int, pad: bool = True, max_work=None) -> DyadicSet:
    if n < 1:
        raise InvalidArgumentError("n must be at least 1")
    out = a
    for _ in range(n - 1):
        out = sumset(out, a, pad=pad, max_work=max_work)
    return out


def unit_normalized(A: DyadicSet) -> DyadicSet:
    """Shift to start at 0 and coarsen so the set fits in [0, 1) at the same label."""
    idx = A.indices - A.indices[0]
    j = max(0, int(idx[-1]).bit_length() - A.level)
    return DyadicSet(A.level, np.unique(idx >> j))


def box_count(A: DyadicSet, level: int) -> int:
    return A.coarsen(level).size


def box_dimension_estimate(source, levels, window=None, normalize=True) -> DimensionEstimate:
    """Per-scale ``log2 N_m(A) / m``.

    ``source`` is a MeasureSpec (its support), a DyadicMeasure or a
    DyadicSet; the finest requested level is built once and coarsened. The
    estimate carries ``q = 0`` (box counting is the ``q = 0`` member of the
    family: ``sum mass**0`` counts atoms).
    """
    levels = _check_levels(levels)
    if isinstance(source, MeasureSpec):
        top = generate(source, levels[-1]).support
    elif isinstance(source, DyadicMeasure):
        top = source.support
    else:
        top = source
    if levels[-1] > top.level:
        raise InvalidArgumentError("requested level is finer than the input")
    vals, logs = [], []
    for m in levels:
        A = top.coarsen(m)
        if normalize:
            A = unit_normalized(A)
        ln = math.log2(A.size)
        logs.append(ln)
        vals.append(0.0 if m == 0 else ln / m)
    return _finish_estimate(0.0, levels, vals, logs, window)


# ---------------------------------------------------------------------------
# derivations and thickness


def set_intervals(A: DyadicSet) -> list:
    """Maximal runs of adjacent grid points, as ``(lo, hi)`` in grid units."""
    idx = A.indices
    if idx.size == 0:
        raise InvalidArgumentError("empty set")
    brk = np.flatnonzero(np.diff(idx) > 1)
    lo = idx[np.r_[0, brk + 1]]
    hi = idx[np.r_[brk, idx.size - 1]]
    return list(zip(lo.tolist(), hi.tolist()))


def _merge(intervals) -> list:
    out = []
    for lo, hi in sorted(intervals):
        if hi < lo:
            raise InvalidArgumentError(f"interval ({lo}, {hi}) has hi < lo")
        if out and lo <= out[-1][1]:
            if hi > out[-1][1]:
                out[-1] = (out[-1][0], hi)
        else:
            out.append((lo, hi))
    return out


@dataclass(frozen=True)
class DerivationTree:
    """Maximal-gap derivation over disjoint intervals ``I_0 < ... < I_{n-1}``.

    Node t splits at gap t (between intervals t and t+1). Its bridge spans
    intervals ``first[t] .. last[t]``; the children are the sub-bridges
    ``first[t] .. t`` and ``t+1 .. last[t]`` (``left[t]``/``right[t]`` are child
    nodes, -1 for a leaf bridge without gaps).
    """

    intervals: tuple
    root: int
    left: tuple
    right: tuple
    first: tuple
    last: tuple
    local_tau: tuple

    @property
    def n_gaps(self) -> int:
        return len(self.local_tau)

    def bridge(self, t: int):
        return self.intervals[self.first[t]][0], self.intervals[self.last[t]][1]

    def gap(self, t: int):
        return self.intervals[t][1], self.intervals[t + 1][0]

    def children(self, t: int):
        return (
            (self.intervals[self.first[t]][0], self.intervals[t][1]),
            (self.intervals[t + 1][0], self.intervals[self.last[t]][1]),
        )

    def check(self) -> bool:
        """Every node's children and gap tile its bridge, and each gap is maximal in it."""
        for t in range(self.n_gaps):
            (a0, a1), (b0, b1) = self.children(t)
            g0, g1 = self.gap(t)
            lo, hi = self.bridge(t)
            if not (a0 == lo and a1 == g0 and g1 == b0 and b1 == hi and g0 < g1):
                return False
            width = g1 - g0
            for u in range(self.first[t], self.last[t]):
                gu = self.intervals[u + 1][0] - self.intervals[u][1]
                if gu > width or (gu == width and u < t):
                    return False
        return True


def _cartesian_tree(gaps: Sequence):
    """Max-Cartesian tree; among equal gaps the leftmost is the ancestor."""
    n = len(gaps)
    left = [-1] * n
    right = [-1] * n
    stack = []
    for i in range(n):
        last = -1
        while stack and gaps[stack[-1]] < gaps[i]:
            last = stack.pop()
        left[i] = last
        if stack:
            right[stack[-1]] = i
        stack.append(i)
    return (stack[0] if stack else -1), left, right


@dataclass(frozen=True)
class ThicknessReport:
    tau: float
    derivation: DerivationTree
    resolution: int | None
    exact: Fraction | None = None
    upper_bound: bool = False

    def to_dict(self):
        return {
            "tau": "inf" if math.isinf(self.tau) else self.tau,
            "exact": None if self.exact is None else str(self.exact),
            "resolution": self.resolution,
            "upper_bound": self.upper_bound,
            "n_gaps": self.derivation.n_gaps,
        }


def derive_thickness(source, resolution: int | None = None) -> ThicknessReport:
    """Thickness of the maximal-gap derivation.

    ``source`` is a DyadicSet or a list of closed intervals ``(lo, hi)``
    (overlapping ones are merged). Each split contributes
    ``min(diam I_left, diam I_right) / diam(gap)``; ``tau`` is the minimum,
    and infinite when there is no gap. Exact rational input gives an exact
    result (also returned as ``exact``).
    """
    if isinstance(source, DyadicSet):
        intervals = set_intervals(source)
        resolution = source.level
        upper = True
    else:
        intervals = _merge(list(source))
        upper = False
    if not intervals:
        raise InvalidArgumentError("empty set")
    n = len(intervals)
    gaps = [intervals[i + 1][0] - intervals[i][1] for i in range(n - 1)]
    root, left, right = _cartesian_tree(gaps)
    first = [0] * (n - 1)
    last = [0] * (n - 1)
    taus = [math.inf] * (n - 1)
    exact_vals = []
    is_exact = all(isinstance(v, (int, Fraction)) for iv in intervals for v in iv)
    if root >= 0:
        stack = [(root, 0, n - 1)]
        while stack:
            t, a, b = stack.pop()
            first[t], last[t] = a, b
            dl = intervals[t][1] - intervals[a][0]
            dr = intervals[b][1] - intervals[t + 1][0]
            ratio = (Fraction(min(dl, dr)) / Fraction(gaps[t])) if is_exact else min(dl, dr) / gaps[t]
            if is_exact:
                exact_vals.append(ratio)
            taus[t] = float(ratio)
            if left[t] >= 0:
                stack.append((left[t], a, t))
            if right[t] >= 0:
                stack.append((right[t], t + 1, b))
    tree = DerivationTree(
        tuple(intervals), root, tuple(left), tuple(right), tuple(first), tuple(last), tuple(taus)
    )
    tau = min(taus) if taus else math.inf
    exact = min(exact_vals) if exact_vals else None
    return ThicknessReport(float(tau), tree, resolution, exact, upper)


@dataclass(frozen=True)
class AstelsResult:
    total: float
    passed: bool
    side_condition: bool | None = None
    borderline: bool = False

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return {
            "sum": self.total,
            "passed": self.passed,
            "side_condition": self.side_condition,
            "borderline": self.borderline,
        }


def astels_check(taus: Sequence[float], interval_sets: Sequence | None = None, rel_tol: float = 1e-9) -> AstelsResult:
    """``sum tau / (tau + 1) >= 1`` (an infinite tau contributes 1).

    With ``interval_sets`` (one interval list per set), also checks that the
    largest gap of every set is at most the smallest hull diameter.
    """
    terms = []
    for t in taus:
        if t < 0:
            raise InvalidArgumentError("thickness values must be non-negative")
        if math.isinf(t):
            terms.append(Fraction(1))
        elif isinstance(t, (int, Fraction)):
            terms.append(Fraction(t) / (Fraction(t) + 1))
        else:
            terms.append(t / (t + 1.0))
    total = sum(terms) if terms else 0.0
    passed = total >= 1
    borderline = abs(float(total) - 1.0) <= rel_tol
    side = None
    if interval_sets is not None:
        max_gap = 0.0
        min_diam = math.inf
        for ivs in interval_sets:
            ivs = _merge(list(ivs))
            min_diam = min(min_diam, ivs[-1][1] - ivs[0][0])
            for (a0, a1), (b0, b1) in zip(ivs, ivs[1:]):
                max_gap = max(max_gap, b0 - a1)
        side = bool(max_gap <= min_diam)
        borderline = borderline or math.isclose(max_gap, min_diam, rel_tol=rel_tol)
    return AstelsResult(float(total), bool(passed), side, borderline)


# ---------------------------------------------------------------------------
# constant conversions between uniform perfectness, lower dimension and thickness


def up_to_lowerdim(K: float) -> float:
    """A K-uniformly perfect set has lower dimension above ``1 / (log2(2K) + 1)``."""
    if not K > 1:
        raise InvalidArgumentError("K must exceed 1")
    return 1.0 / (math.log2(2.0 * K) + 1.0)


def lowerdim_to_up(t: float, c_t: float) -> float:
    """``K = (2 / c_t)**(1/t)``."""
    if not 0 < t <= 1:
        raise InvalidArgumentError("t must lie in (0, 1]")
    if not c_t > 0:
        raise InvalidArgumentError("c_t must be positive")
    return (2.0 / c_t) ** (1.0 / t)


def up_to_thickness(K: float) -> float:
    """``tau >= 1 / K``."""
    if not K > 1:
        raise InvalidArgumentError("K must exceed 1")
    return 1.0 / K


def thickness_to_up(tau: float):
    """Smallest K with ``tau > 2 / (K - 1)``, as ``(K, strict)``.

    The inequality is strict, so every K strictly above the returned value
    works and ``strict`` is always True.
    """
    if not tau > 0:
        raise InvalidArgumentError("tau must be positive")
    if math.isinf(tau):
        return 1.0, True
    return 1.0 + 2.0 / tau, True


def interval_detect(A: DyadicSet) -> bool:
    """True iff every grid cell between the extreme indices is occupied."""
    if A.size == 0:
        raise InvalidArgumentError("empty set")
    return bool(A.indices[-1] - A.indices[0] + 1 == A.size)


@dataclass(frozen=True)
class SumsetRow:
    n: int
    level: int
    N_m: int
    box_estimate: float
    is_interval: bool


@dataclass(frozen=True)
class NfoldReport:
    rows: tuple
    first_interval: int | None

    def to_dict(self):
        return {
            "rows": [r.__dict__ for r in self.rows],
            "first_interval": self.first_interval,
        }

    def csv_rows(self):
        return [(r.n, r.level, r.N_m, r.box_estimate, r.is_interval) for r in self.rows]


def nfold_sumset_experiment(source, n_max: int, level: int, pad: bool = True, max_work=None, stop_at_interval: bool = True) -> NfoldReport:
    """N_m, box exponent and interval detection for ``nA``, ``n = 1 .. n_max``."""
    if n_max < 1:
        raise InvalidArgumentError("n_max must be at least 1")
    if isinstance(source, MeasureSpec):
        A = generate(source, level).support
    elif isinstance(source, DyadicMeasure):
        A = source.support
    else:
        A = source
    rows = []
    first = None
    S = A
    for n in range(1, n_max + 1):
        if n > 1:
            S = sumset(S, A, pad=pad, max_work=max_work)
        U = unit_normalized(S)
        iv = interval_detect(S)
        rows.append(SumsetRow(n, level, S.size, math.log2(U.size) / level if level else 0.0, iv))
        if iv and first is None:
            first = n
            if stop_at_interval:
                break
    return NfoldReport(tuple(rows), first)
