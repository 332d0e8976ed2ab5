"""Sparse dyadic measures and sets, discretization, convolution and norms.

A level-``m`` measure is a finite atomic probability measure whose atoms sit
on the grid ``2**-m * Z``. Atoms are stored as two parallel arrays: sorted
unique integer grid indices and strictly positive float64 masses.

All ``log`` quantities are base 2.
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
import scipy.fft

from . import _kernels
from .errors import InvalidArgumentError, ResourceLimitError

MASS_TOL = 1e-9
MAX_LEVEL = 62
DEFAULT_WORK_CAP = 2**34
# direct convolution is always used below this many atom pairs (exact path)
EXACT_PAIR_LIMIT = 2**28
DENSE_SPAN_LIMIT = 2**26
FFT_SPAN_LIMIT = 2**27


def default_work_cap() -> int:
    """Work cap for convolutions, overridable through ``LQDIM_MAX_WORK``."""
    env = os.environ.get("LQDIM_MAX_WORK")
    if env:
        try:
            return int(float(env))
        except ValueError:
            raise InvalidArgumentError(f"LQDIM_MAX_WORK is not a number: {env!r}")
    return DEFAULT_WORK_CAP


def _check_level(level) -> int:
    if isinstance(level, bool) or not isinstance(level, (int, np.integer)):
        raise InvalidArgumentError(f"level must be an integer, got {level!r}")
    level = int(level)
    if level < 0:
        raise InvalidArgumentError(f"level must be non-negative, got {level}")
    if level > MAX_LEVEL:
        raise InvalidArgumentError(f"level {level} exceeds the supported maximum {MAX_LEVEL}")
    return level


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class DyadicSet:
    """A finite set of grid points ``k * 2**-level``."""

    level: int
    indices: np.ndarray

    def __post_init__(self):
        level = _check_level(self.level)
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            idx = np.unique(idx)
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "indices", _frozen(idx))

    def __len__(self):
        return int(self.indices.size)

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def positions(self) -> np.ndarray:
        return np.ldexp(self.indices.astype(np.float64), -self.level)

    @property
    def diameter(self) -> float:
        if self.indices.size == 0:
            return 0.0
        return math.ldexp(float(self.indices[-1] - self.indices[0]), -self.level)

    def coarsen(self, level: int) -> "DyadicSet":
        """Cells of ``level`` meeting the set (``N_level`` of the set)."""
        level = _check_level(level)
        if level > self.level:
            raise InvalidArgumentError(f"cannot coarsen level {self.level} set to finer level {level}")
        return DyadicSet(level, np.unique(self.indices >> (self.level - level)))

    def shifted(self, k: int) -> "DyadicSet":
        return DyadicSet(self.level, self.indices + int(k))

    def uniform_measure(self) -> "DyadicMeasure":
        if self.size == 0:
            raise InvalidArgumentError("empty set carries no probability measure")
        n = self.size
        return DyadicMeasure(self.level, self.indices, np.full(n, 1.0 / n))

    def to_dict(self) -> dict:
        return {"level": self.level, "indices": [int(k) for k in self.indices]}

    @classmethod
    def from_dict(cls, d) -> "DyadicSet":
        return cls(d["level"], np.asarray(d["indices"], dtype=np.int64))

    def __eq__(self, other):
        if not isinstance(other, DyadicSet):
            return NotImplemented
        return self.level == other.level and np.array_equal(self.indices, other.indices)

    def __repr__(self):
        return f"DyadicSet(level={self.level}, size={self.size})"


@dataclass(frozen=True, eq=False)
class DyadicMeasure:
    """Probability measure with atoms at ``indices * 2**-level``.

    The constructor validates but never rescales; use :meth:`from_atoms` with
    ``normalize=True`` to renormalize raw weights.
    """

    level: int
    indices: np.ndarray
    masses: np.ndarray

    def __post_init__(self):
        level = _check_level(self.level)
        idx = np.asarray(self.indices, dtype=np.int64).ravel()
        w = np.asarray(self.masses, dtype=np.float64).ravel()
        if idx.shape != w.shape:
            raise InvalidArgumentError("indices and masses must have equal length")
        if idx.size == 0:
            raise InvalidArgumentError("a probability measure needs at least one atom")
        if idx.size > 1 and np.any(np.diff(idx) <= 0):
            raise InvalidArgumentError("indices must be strictly increasing")
        if not np.all(np.isfinite(w)) or np.any(w <= 0):
            raise InvalidArgumentError("masses must be finite and strictly positive")
        total = float(np.sum(w))
        if abs(total - 1.0) > MASS_TOL:
            raise InvalidArgumentError(f"total mass {total!r} is not within {MASS_TOL} of 1")
        object.__setattr__(self, "level", level)
        object.__setattr__(self, "indices", _frozen(idx))
        object.__setattr__(self, "masses", _frozen(w))

    # construction helpers -------------------------------------------------

    @classmethod
    def from_atoms(cls, level, indices, masses, normalize=False) -> "DyadicMeasure":
        """Build from possibly unsorted, repeated, or zero-mass atoms.

        Repeated indices are merged by summing; zero masses are dropped.
        """
        idx = np.asarray(indices, dtype=np.int64).ravel()
        w = np.asarray(masses, dtype=np.float64).ravel()
        if idx.shape != w.shape:
            raise InvalidArgumentError("indices and masses must have equal length")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidArgumentError("masses must be finite and non-negative")
        order = np.argsort(idx, kind="stable")
        idx, w = idx[order], w[order]
        uniq, start = np.unique(idx, return_index=True)
        if uniq.size != idx.size:
            w = np.add.reduceat(w, start)
            idx = uniq
        keep = w > 0
        idx, w = idx[keep], w[keep]
        if normalize:
            total = math.fsum(w)
            if total <= 0:
                raise InvalidArgumentError("total mass must be positive")
            w = w / total
        return cls(level, idx, w)

    @classmethod
    def dirac(cls, level: int, index: int = 0) -> "DyadicMeasure":
        return cls(level, np.array([index], dtype=np.int64), np.array([1.0]))

    @classmethod
    def uniform(cls, level: int, indices=None) -> "DyadicMeasure":
        """Uniform measure on ``indices`` (all ``2**level`` cells of [0,1) by default)."""
        level = _check_level(level)
        if indices is None:
            if level > 30:
                raise ResourceLimitError(f"uniform measure on 2**{level} atoms is too large")
            indices = np.arange(2**level, dtype=np.int64)
        idx = np.unique(np.asarray(indices, dtype=np.int64))
        return cls(level, idx, np.full(idx.size, 1.0 / idx.size))

    # basic properties -----------------------------------------------------

    def __len__(self):
        return int(self.indices.size)

    @property
    def size(self) -> int:
        return int(self.indices.size)

    @property
    def positions(self) -> np.ndarray:
        return np.ldexp(self.indices.astype(np.float64), -self.level)

    @property
    def total_mass(self) -> float:
        return math.fsum(self.masses)

    @property
    def diameter(self) -> float:
        return math.ldexp(float(self.indices[-1] - self.indices[0]), -self.level)

    @property
    def support(self) -> DyadicSet:
        return DyadicSet(self.level, self.indices)

    def cumulative(self) -> np.ndarray:
        """Prefix sums with a leading zero: ``cum[i]`` is the mass of atoms ``< i``."""
        cum = np.empty(self.size + 1)
        cum[0] = 0.0
        np.cumsum(self.masses, out=cum[1:])
        return cum

    def shifted(self, k: int) -> "DyadicMeasure":
        return DyadicMeasure(self.level, self.indices + int(k), self.masses)

    def reflected(self) -> "DyadicMeasure":
        """Image under ``x -> -x`` followed by the left-endpoint collapse."""
        return DyadicMeasure(self.level, (-self.indices - 1)[::-1], self.masses[::-1])

    def mass_dict(self) -> dict:
        return dict(zip(self.indices.tolist(), self.masses.tolist()))

    # serialization --------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "level": self.level,
            "atoms": [[int(k), float(w)] for k, w in zip(self.indices, self.masses)],
        }

    @classmethod
    def from_dict(cls, d) -> "DyadicMeasure":
        if not isinstance(d, dict) or "level" not in d or "atoms" not in d:
            raise InvalidArgumentError('expected an object with "level" and "atoms"')
        atoms = d["atoms"]
        if len(atoms) == 0:
            raise InvalidArgumentError("atoms: empty atom list")
        for i, a in enumerate(atoms):
            if not isinstance(a, (list, tuple)) or len(a) != 2:
                raise InvalidArgumentError(f"atoms[{i}]: expected [index, mass]")
            if isinstance(a[0], bool) or not isinstance(a[0], int):
                raise InvalidArgumentError(f"atoms[{i}][0]: index must be an integer")
        idx = np.array([a[0] for a in atoms], dtype=np.int64)
        w = np.array([a[1] for a in atoms], dtype=np.float64)
        return cls(d["level"], idx, w)

    def to_json(self) -> str:
        return json.dumps(self.to_dict())

    @classmethod
    def from_json(cls, text: str) -> "DyadicMeasure":
        return cls.from_dict(json.loads(text))

    def __eq__(self, other):
        if not isinstance(other, DyadicMeasure):
            return NotImplemented
        return (
            self.level == other.level
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.masses, other.masses)
        )

    def __repr__(self):
        return f"DyadicMeasure(level={self.level}, atoms={self.size})"


# ---------------------------------------------------------------------------
# discretization


def discretize(measure: DyadicMeasure, target_level: int) -> DyadicMeasure:
    """Collapse every level-``target_level`` cell's mass to its left endpoint."""
    if isinstance(target_level, (int, np.integer)) and target_level < 0:
        raise InvalidArgumentError(f"target_level must be non-negative, got {target_level}")
    target_level = _check_level(target_level)
    if target_level > measure.level:
        raise InvalidArgumentError(
            f"target_level {target_level} is finer than the measure's level {measure.level}"
        )
    if target_level == measure.level:
        return measure
    coarse = measure.indices >> (measure.level - target_level)
    uniq, start = np.unique(coarse, return_index=True)
    w = np.add.reduceat(measure.masses, start)
    return DyadicMeasure(target_level, uniq, w)


def normalize_to_unit(measure: DyadicMeasure) -> DyadicMeasure:
    """Translate and rescale by a power of two so the support lies in [0, 1).

    The result is reported at the same level: a support spanning
    ``2**j`` unit lengths is shrunk by ``2**-j``, so its level-``m``
    discretization is the original's level-``m - j`` discretization.
    """
    k = measure.indices - measure.indices[0]
    j = max(0, int(k[-1]).bit_length() - measure.level)
    if j == 0:
        return DyadicMeasure(measure.level, k, measure.masses)
    coarse = k >> j
    uniq, start = np.unique(coarse, return_index=True)
    return DyadicMeasure(measure.level, uniq, np.add.reduceat(measure.masses, start))


# ---------------------------------------------------------------------------
# norms


def _log2_sum_pow(masses: np.ndarray, q: float) -> float:
    terms = q * np.log2(masses)
    top = float(np.max(terms))
    # numpy's float reductions use pairwise summation
    return top + math.log2(float(np.sum(np.exp2(terms - top))))


def _check_q(q) -> float:
    q = float(q)
    if not q > 1 or math.isnan(q):
        raise InvalidArgumentError(f"q must be > 1, got {q}")
    if math.isinf(q):
        raise InvalidArgumentError("q = inf is not an L^q exponent here; use linf_norm")
    return q


def lq_norm(mu: DyadicMeasure, q: float) -> float:
    """``log2 ||mu||_q^q = log2 sum_x mu(x)**q``."""
    return _log2_sum_pow(mu.masses, _check_q(q))


def linf_norm(mu: DyadicMeasure) -> float:
    return float(np.max(mu.masses))


def density_lq_norm(mu: DyadicMeasure, q: float) -> float:
    """``log2 ||mu_m||_q^q`` for the piecewise-constant density at scale 2**-m."""
    q = _check_q(q)
    return mu.level * (q - 1.0) + lq_norm(mu, q)


def lq_exponent(mu: DyadicMeasure, q: float) -> float:
    """Normalized exponent ``-log2 ||mu||_q^q / ((q - 1) m)``; 0 when m = 0."""
    q = _check_q(q)
    if mu.level == 0:
        return 0.0
    return -lq_norm(mu, q) / ((q - 1.0) * mu.level)


def linf_exponent(mu: DyadicMeasure) -> float:
    """``-log2 max_x mu(x) / m``, the single-scale Frostman exponent."""
    if mu.level == 0:
        return 0.0
    return -math.log2(linf_norm(mu)) / mu.level


# ---------------------------------------------------------------------------
# ball masses


def ball_masses(mu: DyadicMeasure, centers, radii, cum=None) -> np.ndarray:
    """Masses of closed balls ``B(x, r)``; ``centers`` and ``radii`` are in grid units.

    Returns an array of shape ``(len(centers), len(radii))``.
    """
    centers = np.asarray(centers, dtype=np.float64).reshape(-1, 1)
    radii = np.asarray(radii, dtype=np.float64).reshape(1, -1)
    if cum is None:
        cum = mu.cumulative()
    idx = mu.indices
    lo = np.searchsorted(idx, centers - radii, side="left")
    hi = np.searchsorted(idx, centers + radii, side="right")
    return cum[hi] - cum[lo]


def ball_mass(mu: DyadicMeasure, x: float, r: float) -> float:
    """Mass of the closed ball ``B(x, r)`` in real coordinates."""
    scale = math.ldexp(1.0, mu.level)
    return float(ball_masses(mu, [x * scale], [r * scale])[0, 0])


# ---------------------------------------------------------------------------
# convolution


def _gcd_stride(ia: np.ndarray, ib: np.ndarray) -> int:
    g = 0
    if ia.size > 1:
        g = int(np.gcd.reduce(ia - ia[0]))
    if ib.size > 1:
        g = math.gcd(g, int(np.gcd.reduce(ib - ib[0])))
    return max(g, 1)


def convolution_plan(mu: DyadicMeasure, nu: DyadicMeasure) -> dict:
    """Work estimates used to pick a convolution strategy."""
    ia, ib = mu.indices, nu.indices
    g = _gcd_stride(ia, ib)
    span = int((ia[-1] - ia[0]) // g + (ib[-1] - ib[0]) // g + 1)
    pairs = mu.size * nu.size
    n = scipy.fft.next_fast_len(span, real=True)
    fft_work = int(2 * n * max(1.0, math.log2(n)))
    return {"stride": g, "span": span, "pairs": pairs, "fft_work": fft_work}


def convolve(mu: DyadicMeasure, nu: DyadicMeasure, method: str = "auto", max_work=None) -> DyadicMeasure:
    """Exact discrete convolution ``(mu * nu)(k) = sum_j mu(j) nu(k - j)``.

    ``method`` is ``"direct"`` (exact pairwise accumulation, same term order
    as a naive double loop), ``"fft"`` (dense transform on the common
    sub-lattice; support is exact, masses accurate to ~1e-15 absolute) or
    ``"auto"``, which uses the direct path whenever the pair count is at most
    ``EXACT_PAIR_LIMIT`` and otherwise the cheaper of the two.

    Raises ``ResourceLimitError`` when the chosen strategy's work estimate
    exceeds ``max_work`` (default: :func:`default_work_cap`). Coarsen the
    inputs with :func:`discretize` first; L^q norms of ``(mu*nu)^(m)`` and
    ``mu^(m) * nu^(m)`` agree up to the factor ``2**q``.
    """
    if mu.level != nu.level:
        raise InvalidArgumentError(f"level mismatch: {mu.level} != {nu.level}")
    if method not in ("auto", "direct", "fft"):
        raise InvalidArgumentError(f"unknown convolution method {method!r}")
    cap = default_work_cap() if max_work is None else int(max_work)
    plan = convolution_plan(mu, nu)
    pairs, fft_work, span = plan["pairs"], plan["fft_work"], plan["span"]

    if method == "auto":
        if pairs <= EXACT_PAIR_LIMIT or (pairs <= fft_work and span <= DENSE_SPAN_LIMIT):
            method = "direct"
        else:
            method = "fft"
        if method == "fft" and span > FFT_SPAN_LIMIT:
            method = "direct"
    work = pairs if method == "direct" else fft_work
    if work > cap:
        raise ResourceLimitError(
            f"convolution needs ~{work:.3g} operations ({method}), above the cap {cap:.3g}; "
            "coarsen both measures with discretize() first"
        )
    if method == "fft" and span > FFT_SPAN_LIMIT:
        raise ResourceLimitError(
            f"dense span {span} exceeds {FFT_SPAN_LIMIT}; coarsen both measures first"
        )

    g = plan["stride"]
    a0, b0 = int(mu.indices[0]), int(nu.indices[0])
    ca = (mu.indices - a0) // g
    cb = (nu.indices - b0) // g
    if method == "direct":
        k, w = _direct(ca, mu.masses, cb, nu.masses, span)
    else:
        k, w = _fft(ca, mu.masses, cb, nu.masses, span)
    return DyadicMeasure(mu.level, a0 + b0 + g * k, w)


def _direct(ca, ma, cb, mb, span):
    if span <= DENSE_SPAN_LIMIT:
        out = np.zeros(span)
        _kernels.direct_convolve_dense(ca, ma, cb, mb, out)
        k = np.flatnonzero(out > 0)
        return k.astype(np.int64), out[k]
    # very sparse, huge span: accumulate chunked pair sums
    acc_k, acc_w = [], []
    rows = max(1, 2**24 // max(1, cb.size))
    for s in range(0, ca.size, rows):
        sums = (ca[s : s + rows, None] + cb[None, :]).ravel()
        vals = (ma[s : s + rows, None] * mb[None, :]).ravel()
        u, inv = np.unique(sums, return_inverse=True)
        acc_k.append(u)
        acc_w.append(np.bincount(inv, weights=vals, minlength=u.size))
    k = np.concatenate(acc_k)
    w = np.concatenate(acc_w)
    u, inv = np.unique(k, return_inverse=True)
    return u, np.bincount(inv, weights=w, minlength=u.size)


def _fft(ca, ma, cb, mb, span):
    n = scipy.fft.next_fast_len(span, real=True)
    da = np.zeros(n)
    db = np.zeros(n)
    da[ca] = ma
    db[cb] = mb
    vals = scipy.fft.irfft(scipy.fft.rfft(da) * scipy.fft.rfft(db), n)[:span]
    da[:] = 0.0
    db[:] = 0.0
    da[ca] = 1.0
    db[cb] = 1.0
    counts = scipy.fft.irfft(scipy.fft.rfft(da) * scipy.fft.rfft(db), n)[:span]
    k = np.flatnonzero(counts > 0.5)
    floor = float(np.min(ma)) * float(np.min(mb))
    w = np.maximum(vals[k], floor)
    w /= math.fsum(w)
    return k.astype(np.int64), w


def convolve_many(measures: Sequence[DyadicMeasure], **kw) -> DyadicMeasure:
    out = measures[0]
    for m in measures[1:]:
        out = convolve(out, m, **kw)
    return out


# ---------------------------------------------------------------------------
# dimension estimates

INFINITY = math.inf


@dataclass(frozen=True)
class DimensionEstimate:
    """Per-scale normalized exponents with point and windowed-slope summaries."""

    q: float
    levels: tuple
    values: tuple
    log_norms: tuple
    point_estimate: float
    slope_estimate: float
    window: int

    @property
    def per_scale(self) -> list:
        return list(zip(self.levels, self.values))

    @property
    def dual_exponent(self) -> float:
        if math.isinf(self.q):
            return 1.0
        return self.q / (self.q - 1.0)

    def value_at(self, m: int) -> float:
        return self.values[self.levels.index(m)]

    def to_dict(self) -> dict:
        return {
            "q": "inf" if math.isinf(self.q) else self.q,
            "dual_exponent": self.dual_exponent,
            "per_scale": [[m, v] for m, v in self.per_scale],
            "point": self.point_estimate,
            "slope": self.slope_estimate,
            "window": self.window,
        }


def _finish_estimate(q, levels, values, log_norms, window) -> DimensionEstimate:
    levels = tuple(int(m) for m in levels)
    # rounding can leave -0.0 or -1e-17 for Dirac masses
    values = tuple(max(float(v), 0.0) for v in values)
    if window is None:
        window = min(5, len(levels))
    window = max(1, min(int(window), len(levels)))
    # slope of -log ||.|| against the normalizer (q - 1) m, over the trailing window
    scale = 1.0 if math.isinf(q) else (q - 1.0)
    xs = np.array(levels[-window:], dtype=float) * scale
    ys = -np.array(log_norms[-window:], dtype=float)
    if window >= 2 and np.ptp(xs) > 0:
        slope = float(np.polyfit(xs, ys, 1)[0])
    else:
        slope = values[-1]
    return DimensionEstimate(
        q=q,
        levels=levels,
        values=values,
        log_norms=tuple(float(x) for x in log_norms),
        point_estimate=values[-1],
        slope_estimate=slope,
        window=window,
    )


def _check_levels(levels) -> list:
    levels = [int(m) for m in levels]
    if not levels:
        raise InvalidArgumentError("levels must be non-empty")
    if any(b <= a for a, b in zip(levels, levels[1:])):
        raise InvalidArgumentError("levels must be strictly increasing")
    for m in levels:
        _check_level(m)
    return levels


def _measures_at_levels(source, levels):
    """Yield ``(m, mu^(m))`` for a DyadicMeasure or a MeasureSpec source."""
    if isinstance(source, DyadicMeasure):
        top = source
    else:
        from .generators import generate

        top = generate(source, levels[-1])
    if levels[-1] > top.level:
        raise InvalidArgumentError(
            f"requested level {levels[-1]} is finer than the measure's level {top.level}"
        )
    for m in levels:
        yield m, discretize(top, m)


def lq_dimension_estimate(source, q: float, levels: Iterable[int], window=None, normalize=True) -> DimensionEstimate:
    """Per-scale ``-log2 ||mu^(m)||_q^q / ((q - 1) m)`` for each requested level.

    ``source`` is a MeasureSpec (generated once at the finest level, then
    discretized) or a DyadicMeasure. With ``normalize`` each discretization is
    first moved into [0, 1) by :func:`normalize_to_unit`, which keeps the
    values in [0, 1].
    """
    q = _check_q(q)
    levels = _check_levels(levels)
    vals, logs = [], []
    for m, mu in _measures_at_levels(source, levels):
        if normalize:
            mu = normalize_to_unit(mu)
        ln = lq_norm(mu, q)
        logs.append(ln)
        vals.append(0.0 if m == 0 else -ln / ((q - 1.0) * m))
    return _finish_estimate(q, levels, vals, logs, window)


def linf_dimension_estimate(source, levels: Iterable[int], window=None, normalize=True) -> DimensionEstimate:
    """Per-scale Frostman exponent ``-log2 max_Q mu(Q) / m`` over level-m cells."""
    levels = _check_levels(levels)
    vals, logs = [], []
    for m, mu in _measures_at_levels(source, levels):
        if normalize:
            mu = normalize_to_unit(mu)
        ln = math.log2(linf_norm(mu))
        logs.append(ln)
        vals.append(0.0 if m == 0 else -ln / m)
    return _finish_estimate(INFINITY, levels, vals, logs, window)


def local_exponents(mu: DyadicMeasure, x: float, radii: Sequence[float]) -> np.ndarray:
    """``log2 mu(B(x, r)) / log2 r`` for each radius (real coordinates)."""
    scale = math.ldexp(1.0, mu.level)
    r = np.asarray(radii, dtype=float)
    m = ball_masses(mu, [x * scale], r * scale)[0]
    with np.errstate(divide="ignore"):
        return np.log2(m) / np.log2(r)
