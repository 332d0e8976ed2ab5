"""Slow, independent reference implementations used only by the tests.

Nothing here imports the package's numerical internals; every oracle works
from first principles (Python integers, Fractions, explicit loops).
"""

from __future__ import annotations

import itertools
from fractions import Fraction

import numpy as np


def convolve_rows(ia, ma, ib, mb, level):
    """Quadratic convolution, accumulated row by row in index order.

    Rows are ascending in ``ia``; within a row every target index is distinct,
    so ``out[t] += a * b`` happens in the same order as a plain double loop.
    """
    lo = int(ia[0]) + int(ib[0])
    span = int(ia[-1]) + int(ib[-1]) - lo + 1
    out = np.zeros(span)
    hit = np.zeros(span, dtype=bool)
    off = np.asarray(ib, dtype=np.int64) - int(ib[0])
    mb = np.asarray(mb, dtype=np.float64)
    for i, a in zip(ia, ma):
        t = int(i) - int(ia[0]) + off
        out[t] += a * mb
        hit[t] = True
    k = np.flatnonzero(hit)
    return k + lo, out[k]


def convolve_dict(a: dict, b: dict) -> dict:
    out: dict = {}
    for i in sorted(a):
        for j in sorted(b):
            out[i + j] = out.get(i + j, 0.0) + a[i] * b[j]
    return out


def cantor_cells(level: int) -> set:
    """Level-``level`` dyadic cells meeting the middle-thirds Cantor set.

    Exact recursion on closed triadic construction intervals. Both endpoints
    of every construction interval lie in the set, so once an interval spans
    at most two adjacent cells, the cells of its endpoints are exactly the
    cells it meets in the set.
    """
    scale = 2**level
    out = set()
    stack = [(Fraction(0), Fraction(1))]
    while stack:
        lo, hi = stack.pop()
        a = (lo * scale).__floor__()
        b = min((hi * scale).__floor__(), scale - 1)
        if b - a <= 1:
            out.update((a, b))
            continue
        t = (hi - lo) / 3
        stack.append((lo, lo + t))
        stack.append((hi - t, hi))
    return out


def cantor_cdf(x: Fraction, digits: int = 80) -> float:
    """Cantor function at ``x`` in [0, 1] via ternary digits (exact to 2**-digits)."""
    if x >= 1:
        return 1.0
    acc = Fraction(0)
    w = Fraction(1, 2)
    for _ in range(digits):
        x *= 3
        d = x.__floor__()
        x -= d
        if d == 1:
            return float(acc + w)
        acc += w * (d // 2)
        w /= 2
    return float(acc)


def cantor_cell_masses(level: int) -> dict:
    """Exact Cantor-Lebesgue mass of each level cell, by CDF differences."""
    s = 2**level
    out = {}
    prev = 0.0
    for k in range(s):
        nxt = cantor_cdf(Fraction(k + 1, s))
        if nxt > prev:
            out[k] = nxt - prev
        prev = nxt
    return out


def ball(idx, mass, c, r):
    """Mass of the half-open window ``[c - r, c + r)`` in grid units, by a loop."""
    return sum(m for i, m in zip(idx, mass) if c - r <= i < c + r)


def up_brute(idx, mass, N, gamma):
    """Uniform perfectness over support centers and dyadic radii, by loops."""
    idx = [int(i) for i in idx]
    diam = idx[-1] - idx[0]
    r = 1
    while r <= diam:
        for c in idx:
            if max(c - idx[0], idx[-1] - c) > N * r:
                small = ball(idx, mass, c, r)
                big = ball(idx, mass, c, N * r)
                if big < 2**gamma * small * (1 - 1e-12):
                    return False
        r *= 2
    return True


def porosity_brute(indices, level, k) -> bool:
    occupied = set(int(i) for i in indices)
    for n in range(level - k + 1):
        w = 2 ** (level - n)
        sub = 2 ** (level - n - k)
        for cell in {i // w for i in occupied}:
            base = cell * w
            if all(any(base + j * sub <= i < base + (j + 1) * sub for i in occupied) for j in range(2**k)):
                return False
    return True


def best_uniform_count(indices, level, D, ell):
    """Largest uniform subset by exhaustive search over branching vectors.

    For a fixed vector (R_0, ..., R_{ell-1}) the maximum retained leaf count is
    computed bottom-up: a node at stage s can keep ``R_s`` children iff it
    has that many feasible ones, and keeps the best ``R_s`` of them.
    """
    idx = sorted(int(i) for i in indices)
    best = 0
    for R in itertools.product(range(1, 2**D + 1), repeat=ell):
        val = {i: 1 for i in idx}  # leaves, at level ell*D == level
        ok = True
        for s in range(ell - 1, -1, -1):
            parents: dict = {}
            for c, v in val.items():
                parents.setdefault(c >> D, []).append(v)
            val = {}
            for p, vs in parents.items():
                if len(vs) >= R[s]:
                    val[p] = sum(sorted(vs, reverse=True)[: R[s]])
            if not val:
                ok = False
                break
        if ok:
            best = max(best, sum(val.values()))
    return best
