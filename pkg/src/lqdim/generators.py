"""Declarative measure specifications and their level-m dyadic discretizations.

Self-affine and Moran measures are generated by refining construction
pieces breadth-first. A piece whose hull fits inside one level-m cell
deposits its whole mass there; pieces straddling a cell boundary are
refined further. Refinement stops once a piece's mass drops below
``mass_floor``; such pieces go to the cell of their left endpoint, and their
total mass is reported as the (positional, never lost) discretization error.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Callable, Sequence

import jsonschema
import numpy as np

from .core import DyadicMeasure, DyadicSet, InvalidArgumentError, _check_level, discretize
from .errors import ResourceLimitError, SpecInvalidError

WEIGHT_TOL = 1e-9
DEFAULT_MASS_FLOOR = 1e-18
MAX_FRONTIER = 2**23
MAX_DEPTH = 4000
MAX_FREE_DIGITS = 26
MAX_AFFINE_LEVEL = 48
GRID_EXTRA_LEVELS = 8


def _num(x):
    """Parse ``"1/3"``-style strings to Fraction; pass numbers through."""
    if isinstance(x, str):
        try:
            return Fraction(x)
        except (ValueError, ZeroDivisionError):
            raise InvalidArgumentError(f"not a number: {x!r}")
    return x


def _jsonable(x):
    if isinstance(x, Fraction):
        return str(x) if x.denominator != 1 else int(x)
    return x


class MeasureSpec:
    """Base class; ``kind`` is the JSON discriminator."""

    kind = ""

    def validate(self):
        return self

    def to_dict(self) -> dict:
        raise NotImplementedError


@dataclass(frozen=True)
class AffineMap:
    """``x -> ratio * x + shift``."""

    ratio: float | Fraction
    shift: float | Fraction

    def __call__(self, x):
        return self.ratio * x + self.shift


@dataclass(frozen=True)
class IFSSpec(MeasureSpec):
    maps: tuple
    weights: tuple
    kind = "IFS"

    def __post_init__(self):
        maps = tuple(m if isinstance(m, AffineMap) else AffineMap(*m) for m in self.maps)
        object.__setattr__(self, "maps", maps)
        object.__setattr__(self, "weights", tuple(self.weights))

    def validate(self):
        if len(self.maps) == 0:
            raise SpecInvalidError("at least one map is required", "IFS", "maps")
        if len(self.weights) != len(self.maps):
            raise SpecInvalidError("one weight per map is required", "weights", "weights")
        for i, m in enumerate(self.maps):
            if not 0 < abs(float(m.ratio)) < 1:
                raise SpecInvalidError(f"|ratio| must lie in (0, 1), got {m.ratio}", "IFS", f"maps[{i}].ratio")
        for i, p in enumerate(self.weights):
            if not float(p) > 0:
                raise SpecInvalidError(f"weight must be positive, got {p}", "weights", f"weights[{i}]")
        total = math.fsum(float(p) for p in self.weights)
        if abs(total - 1.0) > WEIGHT_TOL:
            raise SpecInvalidError(f"weights sum to {total}, not 1", "weights", "weights")
        return self

    @property
    def exact(self) -> bool:
        vals = [m.ratio for m in self.maps] + [m.shift for m in self.maps]
        return all(isinstance(v, (Fraction, int)) for v in vals)

    def hull(self, exact=False):
        """Convex hull ``[a, b]`` of the attractor."""
        if exact and self.exact:
            return _affine_hull_exact(self.maps)
        r = np.array([float(m.ratio) for m in self.maps])
        t = np.array([float(m.shift) for m in self.maps])
        return _affine_hull(r, t)

    def is_symmetric(self, tol=1e-12) -> bool:
        """True if the system is invariant under ``x -> -x`` (weights included)."""
        items = sorted((float(m.ratio), float(m.shift), float(p)) for m, p in zip(self.maps, self.weights))
        mirror = sorted((float(m.ratio), -float(m.shift), float(p)) for m, p in zip(self.maps, self.weights))
        return all(
            all(abs(u - v) <= tol for u, v in zip(a, b)) for a, b in zip(items, mirror)
        )

    def to_dict(self):
        return {
            "kind": self.kind,
            "maps": [{"ratio": _jsonable(m.ratio), "shift": _jsonable(m.shift)} for m in self.maps],
            "weights": [_jsonable(p) for p in self.weights],
        }


@dataclass(frozen=True)
class MoranStage:
    """Children of a construction interval, relative to it (``[0, 1]`` = the parent)."""

    children: tuple
    weights: tuple

    def __post_init__(self):
        object.__setattr__(self, "children", tuple(tuple(c) for c in self.children))
        object.__setattr__(self, "weights", tuple(self.weights))


@dataclass(frozen=True)
class MoranSpec(MeasureSpec):
    """Moran construction with declared constants.

    Children are produced either by ``stages`` (cycled by depth) or by a
    Python ``rule(word) -> [(lo, hi, weight), ...]`` giving relative child
    intervals and weights for the construction interval of ``word``.
    """

    p_lower: float
    p_upper: float
    beta: float
    alpha_lower: float
    rho: float
    root: tuple = (0.0, 1.0)
    stages: tuple = ()
    rule: Callable | None = field(default=None, compare=False)
    validate_depth: int = 5
    kind = "MORAN"

    def __post_init__(self):
        stages = tuple(s if isinstance(s, MoranStage) else MoranStage(**s) for s in self.stages)
        object.__setattr__(self, "stages", stages)
        object.__setattr__(self, "root", tuple(float(x) for x in self.root))

    def children(self, word):
        if self.rule is not None:
            return [tuple(map(float, c)) for c in self.rule(tuple(word))]
        st = self.stages[len(word) % len(self.stages)]
        return [(float(c[0]), float(c[1]), float(p)) for c, p in zip(st.children, st.weights)]

    def validate(self):
        validate_moran(self)
        return self

    def to_dict(self):
        if self.rule is not None:
            raise InvalidArgumentError("rule-based Moran specs are not JSON serializable")
        return {
            "kind": self.kind,
            "root": list(self.root),
            "stages": [
                {"children": [list(c) for c in s.children], "weights": list(s.weights)}
                for s in self.stages
            ],
            "p_lower": self.p_lower,
            "p_upper": self.p_upper,
            "beta": self.beta,
            "alpha_lower": self.alpha_lower,
            "rho": self.rho,
        }


@dataclass(frozen=True)
class DigitPatternSpec(MeasureSpec):
    """Binary digits in the forced set E are 0, all others are fair coin flips.

    Exactly one of ``forced`` (finite set), ``all_forced`` or
    ``block_rule`` (``j -> n_j``, giving ``E = U_j [n_j, 2 n_j]``) is used;
    ``predicate(n)`` may be given for arbitrary decidable E.
    """

    forced: frozenset = frozenset()
    all_forced: bool = False
    block_rule: Callable | None = field(default=None, compare=False)
    predicate: Callable | None = field(default=None, compare=False)
    rule_name: str | None = None
    kind = "DIGIT_PATTERN"

    def __post_init__(self):
        object.__setattr__(self, "forced", frozenset(int(n) for n in self.forced))

    def forced_digits(self, level: int) -> np.ndarray:
        """Boolean array ``e`` with ``e[n]`` true iff digit n (1-based) is forced, n <= level."""
        e = np.zeros(level + 1, dtype=bool)
        if self.all_forced:
            e[1:] = True
            return e
        for n in self.forced:
            if 1 <= n <= level:
                e[n] = True
        if self.block_rule is not None:
            prev = None
            j = 1
            while True:
                nj = int(self.block_rule(j))
                if prev is not None and nj <= prev:
                    raise SpecInvalidError("block rule must be strictly increasing", "DIGIT_PATTERN", f"n_{j}")
                if nj > level:
                    break
                e[nj : min(2 * nj, level) + 1] = True
                prev = nj
                j += 1
        if self.predicate is not None:
            for n in range(1, level + 1):
                if self.predicate(n):
                    e[n] = True
        e[0] = False
        return e

    def free_digits(self, level: int) -> int:
        """``f(m)``: number of free digits among ``1..m``."""
        return int(level - np.count_nonzero(self.forced_digits(level)))

    def validate(self):
        if any(n < 1 for n in self.forced):
            raise SpecInvalidError("digit positions start at 1", "DIGIT_PATTERN", "forced")
        return self

    def to_dict(self):
        d = {"kind": self.kind}
        if self.all_forced:
            d["forced"] = "all"
        elif self.rule_name is not None:
            d["blocks"] = json.loads(self.rule_name)
        elif self.block_rule is not None or self.predicate is not None:
            raise InvalidArgumentError("callable digit patterns are not JSON serializable")
        else:
            d["forced"] = sorted(self.forced)
        return d


@dataclass(frozen=True)
class ExplicitSpec(MeasureSpec):
    measure: DyadicMeasure
    kind = "EXPLICIT"

    def to_dict(self):
        return {"kind": self.kind, **self.measure.to_dict()}


@dataclass(frozen=True)
class LebesgueSpec(MeasureSpec):
    """Lebesgue measure on [0, 1)."""

    kind = "LEBESGUE"

    def to_dict(self):
        return {"kind": self.kind}


@dataclass(frozen=True)
class DiracSpec(MeasureSpec):
    point: float = 0.0
    kind = "DIRAC"

    def to_dict(self):
        return {"kind": self.kind, "point": self.point}


# ---------------------------------------------------------------------------
# common specs


def middle_thirds() -> IFSSpec:
    """Cantor-Lebesgue measure on the middle-thirds Cantor set (exact maps)."""
    return IFSSpec(
        (AffineMap(Fraction(1, 3), Fraction(0)), AffineMap(Fraction(1, 3), Fraction(2, 3))),
        (Fraction(1, 2), Fraction(1, 2)),
    )


def central_cantor(ratio, centered=False) -> IFSSpec:
    """Uniform measure on the central Cantor set with two maps of contraction ``ratio``.

    The hull is [0, 1], or [-1/2, 1/2] with ``centered``.
    """
    r = _num(ratio)
    if not 0 < r < Fraction(1, 2) if isinstance(r, Fraction) else not 0 < r < 0.5:
        raise InvalidArgumentError(f"central Cantor ratio must lie in (0, 1/2), got {ratio}")
    if isinstance(r, Fraction):
        half = Fraction(1, 2)
        if centered:
            maps = (AffineMap(r, -(1 - r) * half), AffineMap(r, (1 - r) * half))
        else:
            maps = (AffineMap(r, Fraction(0)), AffineMap(r, 1 - r))
        return IFSSpec(maps, (half, half))
    if centered:
        maps = (AffineMap(r, -(1 - r) / 2), AffineMap(r, (1 - r) / 2))
    else:
        maps = (AffineMap(r, 0.0), AffineMap(r, 1 - r))
    return IFSSpec(maps, (0.5, 0.5))


def factorial_blocks(scale: int = 1) -> Callable[[int], int]:
    """Block rule ``n_j = scale * j!``."""

    def rule(j):
        return scale * math.factorial(j)

    return rule


def sparse_digit_spec(scale: int = 1) -> DigitPatternSpec:
    """Forced digits ``E = U_j [n_j, 2 n_j]`` with ``n_j = scale * j!``."""
    return DigitPatternSpec(
        block_rule=factorial_blocks(scale),
        rule_name=json.dumps({"rule": "factorial", "scale": scale}),
    )


# ---------------------------------------------------------------------------
# affine attractors


def _affine_hull(r: np.ndarray, t: np.ndarray):
    fix = t / (1.0 - r)
    a, b = float(np.min(fix)), float(np.max(fix))
    for _ in range(10000):
        lo = np.minimum(r * a, r * b) + t
        hi = np.maximum(r * a, r * b) + t
        na, nb = float(np.min(lo)), float(np.max(hi))
        if na == a and nb == b:
            break
        a, b = na, nb
    return a, b


def _affine_hull_exact(maps):
    """Exact hull of a rational system.

    Each endpoint is the image of an endpoint under one map: ``a = r_i e + t_i``
    with ``e = a`` for a positive ratio and ``e = b`` for a negative one, and
    likewise for ``b``. The float iteration identifies the active maps; the
    resulting 2x2 linear system is then solved in Fractions.
    """
    if all(m.ratio > 0 for m in maps):
        fix = [m.shift / (1 - m.ratio) for m in maps]
        return min(fix), max(fix)
    r = [Fraction(m.ratio) for m in maps]
    t = [Fraction(m.shift) for m in maps]
    fa, fb = _affine_hull(np.array([float(x) for x in r]), np.array([float(x) for x in t]))
    lo_img = [min(float(ri) * fa, float(ri) * fb) + float(ti) for ri, ti in zip(r, t)]
    hi_img = [max(float(ri) * fa, float(ri) * fb) + float(ti) for ri, ti in zip(r, t)]
    i = int(np.argmin(lo_img))
    j = int(np.argmax(hi_img))
    # a = r_i * (a if r_i > 0 else b) + t_i ; b = r_j * (b if r_j > 0 else a) + t_j
    m11, m12 = (1 - r[i], Fraction(0)) if r[i] > 0 else (Fraction(1), -r[i])
    m21, m22 = (Fraction(0), 1 - r[j]) if r[j] > 0 else (-r[j], Fraction(1))
    det = m11 * m22 - m12 * m21
    a = (t[i] * m22 - m12 * t[j]) / det
    b = (m11 * t[j] - m21 * t[i]) / det
    return a, b


def _generate_affine_exact(spec: IFSSpec, level: int, mass_floor: float):
    """Refinement in exact integer arithmetic for rational maps.

    A depth-n piece is ``x -> (An x + Bn) / L**n`` with integer numerators
    over the common denominator L of the maps, so cell decisions are exact
    even where the attractor touches the grid. Only pieces straddling a grid
    point of the attractor survive to the mass floor.
    """
    rs = [Fraction(m.ratio) for m in spec.maps]
    ts = [Fraction(m.shift) for m in spec.maps]
    L = math.lcm(*(x.denominator for x in rs + ts))
    rn = np.array([int(x * L) for x in rs], dtype=object)
    tn = np.array([int(x * L) for x in ts], dtype=object)
    p = np.array([float(w) for w in spec.weights])
    a, b = _affine_hull_exact(spec.maps)
    H = math.lcm(a.denominator, b.denominator)
    aH, bH = int(a * H), int(b * H)
    two_m = 1 << level
    An = np.array([1], dtype=object)
    Bn = np.array([0], dtype=object)
    M = np.ones(1)
    den = H
    cells, masses = [], []
    forced = 0.0
    depth = 0
    while An.size:
        x0 = An * aH + Bn * H
        x1 = An * bH + Bn * H
        lo = np.minimum(x0, x1) * two_m
        hi = np.maximum(x0, x1) * two_m
        klo = lo // den
        # ceil(hi) - 1: a piece ending exactly on a boundary stays in its cell
        done = (-((-hi) // den) - 1 <= klo).astype(bool)
        small = ~done & (M < mass_floor)
        take = done | small
        if np.any(take):
            cells.append(klo[take].astype(np.int64))
            masses.append(M[take])
            forced += float(np.sum(M[small]))
        keep = ~take
        An, Bn, M = An[keep], Bn[keep], M[keep]
        if An.size == 0:
            break
        depth += 1
        if An.size * rn.size > MAX_FRONTIER or depth > MAX_DEPTH:
            return None
        An, Bn, M = (
            (An[:, None] * rn[None, :]).ravel(),
            (An[:, None] * tn[None, :] + Bn[:, None] * L).ravel(),
            (M[:, None] * p[None, :]).ravel(),
        )
        den *= L
    return np.concatenate(cells), np.concatenate(masses), forced


def _generate_affine(spec: IFSSpec, level: int, mass_floor: float):
    r = np.array([float(m.ratio) for m in spec.maps])
    t = np.array([float(m.shift) for m in spec.maps])
    p = np.array([float(w) for w in spec.weights])
    a, b = _affine_hull(r, t)
    scale = math.ldexp(1.0, level)
    A = np.ones(1)
    B = np.zeros(1)
    M = np.ones(1)
    cells, masses = [], []
    forced = 0.0
    depth = 0
    while A.size:
        x0 = A * a + B
        x1 = A * b + B
        lo = np.minimum(x0, x1)
        hi = np.maximum(x0, x1)
        klo = np.floor(lo * scale)
        done = np.ceil(hi * scale) - 1 <= klo
        small = ~done & (M < mass_floor)
        take = done | small
        if np.any(take):
            cells.append(klo[take].astype(np.int64))
            masses.append(M[take])
            forced += float(np.sum(M[small]))
        keep = ~take
        A, B, M = A[keep], B[keep], M[keep]
        if A.size == 0:
            break
        depth += 1
        if A.size * r.size > MAX_FRONTIER:
            # overlapping pieces straddle boundaries faster than they shrink
            return _generate_affine_grid(spec, level)
        if depth > MAX_DEPTH:
            raise ResourceLimitError(
                f"IFS refinement did not resolve level {level} (depth {depth}, "
                f"{A.size} open pieces); contraction too slow for this level"
            )
        A, B, M = (
            (A[:, None] * r[None, :]).ravel(),
            (A[:, None] * t[None, :] + B[:, None]).ravel(),
            (M[:, None] * p[None, :]).ravel(),
        )
    return np.concatenate(cells), np.concatenate(masses), forced


def _generate_affine_grid(spec: IFSSpec, level: int, extra: int = GRID_EXTRA_LEVELS):
    """Fallback for heavily overlapping systems: iterate the transfer operator
    ``nu -> sum_i p_i f_i nu`` on the level ``level + extra`` grid, rounding
    images to the nearest grid point, until the starting point is forgotten.

    Positional error is at most ``2**-(level+extra)`` / (1 - max ratio) plus
    the contracted initial error; all of it is reported as forced mass.
    """
    r = np.array([float(m.ratio) for m in spec.maps])
    t = np.array([float(m.shift) for m in spec.maps])
    p = np.array([float(w) for w in spec.weights])
    fine = level + extra
    rmax = float(np.max(np.abs(r)))
    n_iter = math.ceil((fine + 4) / -math.log2(rmax))
    if n_iter > MAX_DEPTH:
        raise ResourceLimitError(f"contraction ratio {rmax} is too slow to resolve level {level}")
    scale = math.ldexp(1.0, fine)
    x = np.array([float(t[0] / (1 - r[0]))])
    w = np.ones(1)
    for _ in range(n_iter):
        y = (x[:, None] * r[None, :] + t[None, :]).ravel()
        k = np.rint(y * scale).astype(np.int64)
        mass = (w[:, None] * p[None, :]).ravel()
        uk, inv = np.unique(k, return_inverse=True)
        w = np.bincount(inv, weights=mass)
        x = uk / scale
    mu = DyadicMeasure.from_atoms(fine, uk, w, normalize=True)
    mu = discretize(mu, level)
    return mu.indices, mu.masses, math.nan


def _generate_moran(spec: MoranSpec, level: int, mass_floor: float):
    scale = math.ldexp(1.0, level)
    cells, masses = [], []
    forced = 0.0
    if spec.rule is None:
        lo = np.array([spec.root[0]])
        hi = np.array([spec.root[1]])
        M = np.ones(1)
        depth = 0
        while lo.size:
            klo = np.floor(lo * scale)
            done = np.ceil(hi * scale) - 1 <= klo
            small = ~done & (M < mass_floor)
            take = done | small
            if np.any(take):
                cells.append(klo[take].astype(np.int64))
                masses.append(M[take])
                forced += float(np.sum(M[small]))
            lo, hi, M = lo[~take], hi[~take], M[~take]
            if lo.size == 0:
                break
            st = spec.stages[depth % len(spec.stages)]
            c = np.array(st.children, dtype=float)
            w = np.array(st.weights, dtype=float)
            depth += 1
            if depth > MAX_DEPTH or lo.size * w.size > MAX_FRONTIER:
                raise ResourceLimitError(f"Moran refinement did not resolve level {level}")
            d = hi - lo
            lo, hi, M = (
                (lo[:, None] + d[:, None] * c[None, :, 0]).ravel(),
                (lo[:, None] + d[:, None] * c[None, :, 1]).ravel(),
                (M[:, None] * w[None, :]).ravel(),
            )
        return np.concatenate(cells), np.concatenate(masses), forced

    frontier = [((), spec.root[0], spec.root[1], 1.0)]
    depth = 0
    while frontier:
        nxt = []
        for word, lo, hi, m in frontier:
            klo = math.floor(lo * scale)
            if math.ceil(hi * scale) - 1 <= klo or m < mass_floor:
                cells.append(np.array([klo], dtype=np.int64))
                masses.append(np.array([m]))
                if m < mass_floor and not math.ceil(hi * scale) - 1 <= klo:
                    forced += m
                continue
            d = hi - lo
            for i, (c0, c1, p) in enumerate(spec.children(word)):
                nxt.append((word + (i,), lo + d * c0, lo + d * c1, m * p))
        depth += 1
        if depth > MAX_DEPTH or len(nxt) > MAX_FRONTIER:
            raise ResourceLimitError(f"Moran refinement did not resolve level {level}")
        frontier = nxt
    return np.concatenate(cells), np.concatenate(masses), forced


@dataclass(frozen=True)
class GenerationInfo:
    """Bookkeeping from the last refinement: mass placed by the left-endpoint fallback."""

    level: int
    forced_mass: float


def generate(spec: MeasureSpec, level: int, mass_floor: float = DEFAULT_MASS_FLOOR, info: list | None = None) -> DyadicMeasure:
    """Level-``level`` discretization of the measure described by ``spec``.

    Deterministic for a fixed spec and level. If ``info`` is a list, a
    :class:`GenerationInfo` is appended to it.
    """
    level = _check_level(level)
    spec.validate()
    forced = 0.0
    if isinstance(spec, LebesgueSpec):
        mu = DyadicMeasure.uniform(level)
    elif isinstance(spec, DiracSpec):
        k = math.floor(math.ldexp(float(spec.point), level))
        mu = DyadicMeasure.dirac(level, k)
    elif isinstance(spec, ExplicitSpec):
        src = spec.measure
        if level <= src.level:
            mu = discretize(src, level)
        else:
            mu = DyadicMeasure(level, src.indices << (level - src.level), src.masses)
    elif isinstance(spec, DigitPatternSpec):
        mu = _generate_digits(spec, level)
    elif isinstance(spec, IFSSpec):
        if level > MAX_AFFINE_LEVEL:
            raise ResourceLimitError(f"affine generation is limited to level {MAX_AFFINE_LEVEL}")
        res = _generate_affine_exact(spec, level, mass_floor) if spec.exact else None
        k, w, forced = res if res is not None else _generate_affine(spec, level, mass_floor)
        mu = DyadicMeasure.from_atoms(level, k, w, normalize=True)
    elif isinstance(spec, MoranSpec):
        if level > MAX_AFFINE_LEVEL:
            raise ResourceLimitError(f"Moran generation is limited to level {MAX_AFFINE_LEVEL}")
        k, w, forced = _generate_moran(spec, level, mass_floor)
        mu = DyadicMeasure.from_atoms(level, k, w, normalize=True)
    else:
        raise InvalidArgumentError(f"unsupported spec type {type(spec).__name__}")
    if info is not None:
        info.append(GenerationInfo(level, forced))
    return mu


def generate_set(spec: MeasureSpec, level: int) -> DyadicSet:
    """Support of :func:`generate` as a DyadicSet."""
    return generate(spec, level).support


def _generate_digits(spec: DigitPatternSpec, level: int) -> DyadicMeasure:
    e = spec.forced_digits(level)
    free = [n for n in range(1, level + 1) if not e[n]]
    if len(free) > MAX_FREE_DIGITS:
        raise ResourceLimitError(
            f"{len(free)} free digits up to level {level} means 2**{len(free)} atoms"
        )
    idx = np.zeros(1, dtype=np.int64)
    for n in free:
        idx = np.concatenate([idx, idx + (1 << (level - n))])
    idx.sort()
    return DyadicMeasure(level, idx, np.full(idx.size, math.ldexp(1.0, -len(free))))


def generate_digit_blocks(block_rule: Callable[[int], int], level: int) -> DyadicMeasure:
    """The sparse-digit measure with forced digits ``U_j [n_j, 2 n_j]``.

    At level m this is the uniform measure on ``2**f(m)`` atoms, where
    ``f(m)`` counts the free digits ``<= m``.
    """
    return generate(DigitPatternSpec(block_rule=block_rule), level)


# ---------------------------------------------------------------------------
# Ahlfors-regular examples


def ahlfors_constant(alpha: float) -> float:
    """Ahlfors constant of the two-map central Cantor measure with ratio ``2**(-1/alpha)``.

    For ``r`` in (0, 1) and ``x`` in the support, ``r**a / C <= mu(B(x, r)) <= C r**a``
    with ``C = 2**t`` where ``t >= 1`` is the least integer with
    ``rho**-t (1 - 2 rho) >= 2``: a ball of radius ``r < rho**(n-1)`` meets at
    most one level ``n - t`` piece, and always contains a whole level-n piece.
    """
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    rho = 2.0 ** (-1.0 / alpha)
    t = max(1, math.ceil(math.log(2.0 / (1.0 - 2.0 * rho)) / math.log(1.0 / rho) - 1e-12))
    return float(2**t)


@dataclass(frozen=True)
class AhlforsExample:
    measure: DyadicMeasure
    spec: IFSSpec
    alpha: float
    ratio: float
    constant: float

    def to_dict(self):
        return {
            "alpha": self.alpha,
            "ratio": self.ratio,
            "constant": self.constant,
            "spec": self.spec.to_dict(),
        }


def ahlfors_example_spec(alpha: float, centered: bool = False) -> IFSSpec:
    if not 0 < alpha < 1:
        raise InvalidArgumentError(f"alpha must lie in (0, 1), got {alpha}")
    rho = 2.0 ** (-1.0 / alpha)
    if alpha == 0.5:
        rho = Fraction(1, 4)
    return central_cantor(rho, centered=centered)


def generate_ahlfors_example(alpha: float, level: int, centered: bool = False) -> AhlforsExample:
    """Uniform Bernoulli measure on the central Cantor set with ratio ``2**(-1/alpha)``."""
    spec = ahlfors_example_spec(alpha, centered)
    mu = generate(spec, level)
    return AhlforsExample(mu, spec, float(alpha), 2.0 ** (-1.0 / alpha), ahlfors_constant(alpha))


# ---------------------------------------------------------------------------
# construction intervals (for thickness)


def construction_intervals(spec: IFSSpec, level: int, exact: bool = True) -> list:
    """Hulls of the construction pieces at the first depth where all have length <= 2**-level.

    Uses Fraction arithmetic when the maps are rational and ``exact`` is set.
    """
    spec.validate()
    level = _check_level(level)
    use_exact = exact and spec.exact
    a, b = spec.hull(exact=use_exact)
    target = Fraction(1, 2**level) if use_exact else math.ldexp(1.0, -level)
    maps = [(m.ratio, m.shift) if use_exact else (float(m.ratio), float(m.shift)) for m in spec.maps]
    pieces = [(Fraction(1) if use_exact else 1.0, Fraction(0) if use_exact else 0.0)]
    length = b - a
    depth = 0
    while max(abs(A) for A, _ in pieces) * length > target:
        pieces = [(A * r, A * t + B) for A, B in pieces for r, t in maps]
        depth += 1
        if len(pieces) > 2**22:
            raise ResourceLimitError("too many construction intervals at this level")
    out = []
    for A, B in pieces:
        x0, x1 = A * a + B, A * b + B
        out.append((min(x0, x1), max(x0, x1)))
    out.sort()
    return out


# ---------------------------------------------------------------------------
# Moran validation


def _limit_hull(spec: MoranSpec, word, depth=60):
    """Relative hull of the limit set inside ``E_word`` (leftmost/rightmost descent)."""
    ends = []
    for pick in (min, max):
        lo, hi = 0.0, 1.0
        w = tuple(word)
        for _ in range(depth):
            ch = spec.children(w)
            key = (lambda c: c[0]) if pick is min else (lambda c: c[1])
            i = (min if pick is min else max)(range(len(ch)), key=lambda j: key(ch[j]))
            c0, c1, _ = ch[i]
            lo, hi = lo + (hi - lo) * c0, lo + (hi - lo) * c1
            w = w + (i,)
            if hi - lo < 1e-15:
                break
        ends.append(lo if pick is min else hi)
    return ends[0], ends[1]


def validate_moran(spec: MoranSpec, depth: int | None = None):
    """Check M1-M5 and the weight conditions on all words up to ``depth``.

    Raises SpecInvalidError whose ``condition`` names the first violated rule.
    Diameters are measured relative to the root interval.
    """
    depth = spec.validate_depth if depth is None else depth
    if spec.rule is None and not spec.stages:
        raise SpecInvalidError("a Moran spec needs stages or a rule", "MORAN", "stages")
    if not spec.root[0] < spec.root[1]:
        raise SpecInvalidError("root interval must have positive length", "M1", "root")
    if not 0 < spec.p_lower <= spec.p_upper < 1:
        raise SpecInvalidError("need 0 < p_lower <= p_upper < 1", "weights", "p_lower")
    if not spec.beta >= 1:
        raise SpecInvalidError(f"beta must be >= 1, got {spec.beta}", "M3", "beta")
    if not 0 < spec.alpha_lower < 1:
        raise SpecInvalidError("alpha_lower must lie in (0, 1)", "M4", "alpha_lower")
    if not spec.rho > 0:
        raise SpecInvalidError("rho must be positive", "M5", "rho")

    diam = {(): 1.0}
    frontier = [()]
    for d in range(depth):
        nxt = []
        for w in frontier:
            ch = spec.children(w)
            where = f"word {w}"
            if len(ch) < 1:
                raise SpecInvalidError("no children", "M1", where)
            tot = 0.0
            for i, (c0, c1, p) in enumerate(ch):
                loc = f"{where} child {i}"
                if not (0.0 <= c0 < c1 <= 1.0):
                    raise SpecInvalidError(
                        f"child [{c0}, {c1}] is not a positive-length subinterval of its parent", "M1", loc
                    )
                if c1 - c0 < spec.alpha_lower - 1e-12:
                    raise SpecInvalidError(
                        f"relative diameter {c1 - c0} below alpha_lower {spec.alpha_lower}", "M4", loc
                    )
                if not spec.p_lower - 1e-12 <= p <= spec.p_upper + 1e-12:
                    raise SpecInvalidError(
                        f"weight {p} outside [{spec.p_lower}, {spec.p_upper}]", "weights", loc
                    )
                tot += p
                diam[w + (i,)] = diam[w] * (c1 - c0)
                nxt.append(w + (i,))
            if abs(tot - 1.0) > WEIGHT_TOL:
                raise SpecInvalidError(f"sibling weights sum to {tot}, not 1", "weights", where)
        frontier = nxt
        if len(frontier) > 50000:
            break

    # M2: diameters must keep shrinking along every branch
    if spec.rule is None:
        worst = 1.0
        for st in spec.stages:
            worst *= max(c[1] - c[0] for c in st.children)
        if worst >= 1.0:
            raise SpecInvalidError("some branch never shrinks (relative diameter 1 each cycle)", "M2", "stages")
    else:
        half = max(v for w, v in diam.items() if len(w) == max(1, depth // 2))
        final = max(v for w, v in diam.items() if len(w) == max(len(k) for k in diam))
        if final >= half and final > 0:
            raise SpecInvalidError("diameters do not shrink with depth", "M2", f"depth {depth}")

    # M3: diam(E_ij) <= beta diam(E_i) diam(E_j)
    for w, dw in diam.items():
        for s in range(1, len(w)):
            i, j = w[:s], w[s:]
            if j in diam and dw > spec.beta * diam[i] * diam[j] * (1 + 1e-12):
                raise SpecInvalidError(
                    f"diam(E_ij) = {dw:.6g} exceeds beta * diam(E_i) * diam(E_j) = "
                    f"{spec.beta * diam[i] * diam[j]:.6g} for i={i}, j={j}",
                    "M3",
                    f"word {w}",
                )

    # M5: the limit set inside each E_i spreads over at least rho * diam(E_i)
    for w in sorted(diam, key=len):
        if len(w) > min(depth, 3):
            break
        lo, hi = _limit_hull(spec, w)
        if not hi - lo >= spec.rho * (1 - 1e-9):
            raise SpecInvalidError(
                f"limit set inside E_{w} spans {hi - lo:.6g} < rho = {spec.rho} (relative)", "M5", f"word {w}"
            )
    return True


def normalized_moran_constants(spec: MoranSpec) -> dict:
    """Constants after replacing every E_i by its limit-set hull (rho becomes 1)."""
    return {"beta": spec.beta / spec.rho**2, "alpha_lower": spec.alpha_lower * spec.rho, "rho": 1.0}


# ---------------------------------------------------------------------------
# JSON


@lru_cache(maxsize=None)
def _schema(name: str) -> dict:
    return json.loads(resources.files("lqdim").joinpath("schemas", name).read_text())


def _schema_error(err: jsonschema.ValidationError, base: str) -> SpecInvalidError:
    path = base + "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in err.absolute_path)
    return SpecInvalidError(err.message, "schema", path.lstrip(".") or "$")


def validate_spec_json(d, path: str = "") -> None:
    """Validate a JSON measure spec, raising SpecInvalidError with the failing path."""
    schema = _schema("measure_spec.schema.json")
    if not isinstance(d, dict):
        raise SpecInvalidError("spec must be a JSON object", "schema", path or "$")
    kind = d.get("kind")
    defs = schema["$defs"]
    if kind not in defs:
        raise SpecInvalidError(
            f"kind must be one of {sorted(defs)}, got {kind!r}", "schema", f"{path}.kind".lstrip(".")
        )
    sub = dict(defs[kind])
    sub["$defs"] = defs
    v = jsonschema.Draft202012Validator(sub)
    err = jsonschema.exceptions.best_match(v.iter_errors(d))
    if err is not None:
        raise _schema_error(err, path)


def spec_from_dict(d, path: str = "") -> MeasureSpec:
    validate_spec_json(d, path)
    kind = d["kind"]
    if kind == "IFS":
        maps = tuple(AffineMap(_num(m["ratio"]), _num(m["shift"])) for m in d["maps"])
        spec = IFSSpec(maps, tuple(_num(p) for p in d["weights"]))
    elif kind == "MORAN":
        spec = MoranSpec(
            p_lower=d["p_lower"],
            p_upper=d["p_upper"],
            beta=d["beta"],
            alpha_lower=d["alpha_lower"],
            rho=d["rho"],
            root=tuple(d.get("root", (0.0, 1.0))),
            stages=tuple(MoranStage(tuple(map(tuple, s["children"])), tuple(s["weights"])) for s in d["stages"]),
        )
    elif kind == "DIGIT_PATTERN":
        if "blocks" in d:
            b = d["blocks"]
            if b["rule"] == "factorial":
                rule = factorial_blocks(int(b.get("scale", 1)))
            elif b["rule"] == "power":
                base, sc = int(b["base"]), int(b.get("scale", 1))

                def rule(j, base=base, sc=sc):
                    return sc * base**j
            else:
                seq = [int(n) for n in b["values"]]

                def rule(j, seq=seq):
                    return seq[j - 1] if j <= len(seq) else 2**62
            spec = DigitPatternSpec(block_rule=rule, rule_name=json.dumps(b, sort_keys=True))
        elif d.get("forced") == "all":
            spec = DigitPatternSpec(all_forced=True)
        else:
            spec = DigitPatternSpec(forced=frozenset(d.get("forced", [])))
    elif kind == "EXPLICIT":
        try:
            spec = ExplicitSpec(DyadicMeasure.from_dict(d))
        except InvalidArgumentError as e:
            raise SpecInvalidError(str(e), "EXPLICIT", path or "$")
    elif kind == "LEBESGUE":
        spec = LebesgueSpec()
    else:
        spec = DiracSpec(float(d.get("point", 0.0)))
    try:
        spec.validate()
    except SpecInvalidError as e:
        if path:
            raise SpecInvalidError(e.message, e.condition, f"{path}.{e.path}" if e.path else path)
        raise
    return spec


def spec_from_json(text: str) -> MeasureSpec:
    return spec_from_dict(json.loads(text))


def spec_to_json(spec: MeasureSpec) -> str:
    return json.dumps(spec.to_dict())
