"""Branching structure of dyadic sets and greedy uniformization.

Levels are indexed ``s = 0 .. ell - 1``: stage s looks at the level-``sD``
cells ``J`` meeting the set and counts their level-``(s+1)D`` children.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import DyadicMeasure, DyadicSet
from .errors import InvalidArgumentError

COUNT = "count"


@dataclass(frozen=True)
class LqObjective:
    """Retain as much of ``sum mass**q`` as possible."""

    q: float

    def __post_init__(self):
        if not self.q > 1:
            raise InvalidArgumentError("q must exceed 1")


def LQ_NORM(q: float) -> LqObjective:
    return LqObjective(float(q))


def _check_shape(level: int, D: int, ell: int):
    if D < 1 or ell < 1:
        raise InvalidArgumentError("D and ell must be positive")
    if level != D * ell:
        raise InvalidArgumentError(f"level {level} must equal D * ell = {D * ell}")


def _stage(idx: np.ndarray, m: int, D: int, s: int):
    """Parents at level sD, and for each parent the number of children at level (s+1)D."""
    child = np.unique(idx >> (m - (s + 1) * D))
    parent, counts = np.unique(child >> D, return_counts=True)
    return parent, counts


def branching_profile(A: DyadicSet, D: int, ell: int) -> list:
    """For each s, the sorted child counts ``N_{(s+1)D}(A cap J)`` over ``J`` in D_{sD}(A)."""
    _check_shape(A.level, D, ell)
    return [np.sort(_stage(A.indices, A.level, D, s)[1]) for s in range(ell)]


def is_uniform(A: DyadicSet, D: int, ell: int):
    """The branching sequence ``(R_0, ..., R_{ell-1})`` if A is uniform, else None."""
    if A.size == 0:
        return None
    prof = branching_profile(A, D, ell)
    if all(c[0] == c[-1] for c in prof):
        return tuple(int(c[0]) for c in prof)
    return None


@dataclass(frozen=True)
class UniformTree:
    D: int
    ell: int
    branching: tuple
    leaves: DyadicSet
    delta: float = 0.1

    @property
    def full_scales(self) -> frozenset:
        thr = 2.0 ** ((1.0 - self.delta) * self.D)
        return frozenset(s for s, R in enumerate(self.branching) if R >= thr)

    def to_dict(self):
        return {
            "D": self.D,
            "ell": self.ell,
            "branching": list(self.branching),
            "leaves": self.leaves.indices.tolist(),
            "full_scales": sorted(self.full_scales),
            "delta": self.delta,
        }


@dataclass(frozen=True)
class UniformizeResult:
    tree: UniformTree
    measure: DyadicMeasure
    retention: float
    retained_mass: float

    def to_dict(self):
        return {
            "tree": self.tree.to_dict(),
            "retention": self.retention,
            "retained_mass": self.retained_mass,
        }


def _leaf_values(mu: DyadicMeasure, objective) -> np.ndarray:
    if objective == COUNT:
        return np.ones(mu.size)
    if isinstance(objective, LqObjective):
        lm = np.log2(mu.masses)
        # rescale to avoid underflow; only ratios matter
        return np.exp2(objective.q * (lm - lm.max()))
    raise InvalidArgumentError(f"unknown objective {objective!r}")


def uniformize(mu: DyadicMeasure, D: int, ell: int, objective=COUNT, delta: float = 0.1) -> UniformizeResult:
    """Greedy fine-to-coarse uniformization of ``spt mu``.

    At stage s (from ``ell - 1`` down to 0) every surviving level-sD cell J
    has ``c_J`` surviving children, each carrying the objective value of its
    (already uniform) subtree. For each candidate ``R`` among the counts,
    keeping the cells with ``c_J >= R``, each trimmed to its R heaviest
    children (ties: leftmost), gives a uniform stage; the best R wins.
    Restricting to one class ``2**j <= c_J < 2**(j+1)`` trimmed to its
    smallest count already retains ``1 / (2 (D + 1))`` of the stage's value,
    so the result retains at least ``(2 (D + 1))**-ell`` of the leaf count
    (COUNT) or of ``||mu||_q^q`` (LQ_NORM).
    """
    _check_shape(mu.level, D, ell)
    if mu.size == 0:
        raise InvalidArgumentError("empty support")
    m = mu.level
    idx = mu.indices
    val = _leaf_values(mu, objective)
    total = float(math.fsum(val))
    alive = np.ones(idx.size, dtype=bool)
    branching = [0] * ell
    for s in range(ell - 1, -1, -1):
        cell_of_leaf = idx >> (m - (s + 1) * D)
        cells, inv = np.unique(cell_of_leaf[alive], return_inverse=True)
        cval = np.bincount(inv, weights=val[alive])
        parent = cells >> D
        # order children by parent, then heaviest first, then leftmost
        order = np.lexsort((cells, -cval, parent))
        p_sorted = parent[order]
        v_sorted = cval[order]
        starts = np.flatnonzero(np.r_[True, p_sorted[1:] != p_sorted[:-1]])
        counts = np.diff(np.r_[starts, p_sorted.size])
        rank = np.arange(p_sorted.size) - np.repeat(starts, counts)
        csum = np.cumsum(v_sorted)
        base = np.repeat(np.r_[0.0, csum[starts[1:] - 1]], counts)
        prefix = csum - base  # sum of the top (rank + 1) children of each parent
        best_R, best_val = 0, -1.0
        for R in np.unique(counts):
            pick = (rank == R - 1) & np.repeat(counts >= R, counts)
            v = float(prefix[pick].sum())
            if v > best_val * (1 + 1e-12):
                best_R, best_val = int(R), v
        keep_sorted = (rank < best_R) & np.repeat(counts >= best_R, counts)
        kept_cells = np.sort(cells[order][keep_sorted])
        alive &= np.isin(cell_of_leaf, kept_cells)
        branching[s] = best_R
    leaves = idx[alive]
    retained = float(math.fsum(val[alive])) / total
    masses = mu.masses[alive]
    kept_mass = float(math.fsum(masses))
    sub = DyadicMeasure(m, leaves, masses / kept_mass)
    if objective == COUNT:
        retention = leaves.size / idx.size
    else:
        retention = retained
    tree = UniformTree(D, ell, tuple(branching), DyadicSet(m, leaves), delta)
    return UniformizeResult(tree, sub, retention, kept_mass)


def uniformize_bound(D: int, ell: int) -> float:
    """Guaranteed retention ``(2 (D + 1))**-ell``."""
    return float((2 * (D + 1)) ** (-ell))


def saturation_check(A: DyadicSet, D: int, ell: int) -> list:
    """For each s, whether every point lies in the middle half of its level-sD cell.

    A point ``k 2**-m`` lies in the middle half of the cell ``[a, a + L)``
    when ``a + L/4 <= k 2**-m < a + 3L/4``.
    """
    _check_shape(A.level, D, ell)
    m = A.level
    out = []
    for s in range(ell):
        shift = m - s * D
        off = A.indices - ((A.indices >> shift) << shift)
        L = 1 << shift
        out.append(bool(np.all((4 * off >= L) & (4 * off < 3 * L))))
    return out


@dataclass(frozen=True)
class ScaleSet:
    scales: frozenset
    D: int
    delta: float
    m: int

    def bracket(self, log2_norm_qq: float, q: float) -> dict:
        """Compare ``D |S|`` with ``log2 ||nu||_q^{-q'} +- m delta``.

        ``log2_norm_qq`` is ``log2 ||nu||_q^q`` (as returned by ``lq_norm``).
        """
        if not q > 1:
            raise InvalidArgumentError("q must exceed 1")
        centre = -log2_norm_qq / (q - 1.0)
        value = self.D * len(self.scales)
        lo, hi = centre - self.m * self.delta, centre + self.m * self.delta
        return {"D_S": value, "lower": lo, "upper": hi, "holds": bool(lo <= value <= hi)}


def branching_scale_set(tree: UniformTree, delta: float | None = None) -> ScaleSet:
    """``S = {s : R_s >= 2**((1 - delta) D)}``."""
    delta = tree.delta if delta is None else delta
    if not 0 < delta < 1:
        raise InvalidArgumentError("delta must lie in (0, 1)")
    thr = 2.0 ** ((1.0 - delta) * tree.D)
    S = frozenset(s for s, R in enumerate(tree.branching) if R >= thr)
    return ScaleSet(S, tree.D, delta, tree.D * tree.ell)
