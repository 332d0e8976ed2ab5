"""Regularity diagnostics on discretized measures and sets.

All sweeps use dyadic radii ``r = 2**j`` in grid units centred at support
atoms unless stated otherwise. An atom at ``k`` stands for the cell
``[k, k + 1)``, so the ball ``B(x, r)`` collects the atoms in the window
``[x - r, x + r)``: exactly the mass the cell-uniform density gives a ball of
radius r around a grid point, without double counting the boundary atom. Checks return a
:class:`CheckResult` that is truthy iff the condition held everywhere swept.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ._kernels import distinct_in_windows
from .core import DyadicMeasure, DyadicSet, discretize
from .errors import DegenerateInputError, InvalidArgumentError

REL_SLACK = 1e-12
K_CUTOFF = 16
DEFAULT_N_GRID = (2, 3, 4, 5, 6, 8, 10, 12, 16, 24, 32, 48, 64, 128, 256, 512, 1024)
DEFAULT_GAMMA_GRID = (1.0, 0.75, 0.5, 0.25, 0.1, 0.05, 0.01)
DEFAULT_ALPHA_GRID = tuple(np.round(np.arange(1, 1001) / 1000, 3))
CHUNK = 1 << 16


@dataclass(frozen=True)
class CheckResult:
    """Outcome of an exhaustive sweep; ``witness`` locates the first violation."""

    passed: bool
    checked: int
    witness: dict | None = None
    detail: dict = field(default_factory=dict)

    def __bool__(self):
        return self.passed

    def to_dict(self):
        return asdict(self)


def _require_spread(idx: np.ndarray):
    if idx.size == 0 or idx[-1] == idx[0]:
        raise DegenerateInputError("support has zero diameter; the condition is vacuous and rejected")


def _dyadic_radii(diam_grid: float, min_exp: int = 0, max_radius: float | None = None) -> np.ndarray:
    top = diam_grid if max_radius is None else min(diam_grid, max_radius)
    out = []
    j = min_exp
    while math.ldexp(1.0, j) <= top:
        out.append(math.ldexp(1.0, j))
        j += 1
    return np.array(out)


def _centers(mu: DyadicMeasure, centers) -> np.ndarray:
    idx = mu.indices
    if isinstance(centers, str):
        if centers == "support":
            return idx.astype(np.float64)
        if centers == "grid":
            return np.arange(idx[0], idx[-1] + 1, dtype=np.float64)
        if centers == "half-grid":
            return np.arange(2 * idx[0], 2 * idx[-1] + 1, dtype=np.float64) / 2.0
        raise InvalidArgumentError(f"unknown center mode {centers!r}")
    return np.asarray(centers, dtype=np.float64) * math.ldexp(1.0, mu.level)


def _balls(idx, cum, c, r):
    """Ball masses for centers ``c`` (column) and radii ``r`` (row), grid units."""
    lo = np.searchsorted(idx, c - r, side="left")
    hi = np.searchsorted(idx, c + r, side="left")
    return cum[hi] - cum[lo]


def _to_real(mu, x, r):
    s = math.ldexp(1.0, -mu.level)
    return {"x": float(x) * s, "r": float(r) * s}


# ---------------------------------------------------------------------------
# uniform perfectness


def _up_sweep(mu: DyadicMeasure, N: float, centers="support", min_exp: int | None = None):
    """Yield ``(c, r, small, big, valid)`` chunks of the uniform-perfectness sweep."""
    idx = mu.indices
    _require_spread(idx)
    diam = float(idx[-1] - idx[0])
    if not N < diam:
        raise InvalidArgumentError(f"N * 2**-m = {N} cells must be below the diameter ({diam:g} cells)")
    if min_exp is None:
        min_exp = -1 if centers == "half-grid" else 0
    radii = _dyadic_radii(diam, min_exp)[None, :]
    cs = _centers(mu, centers)
    cum = mu.cumulative()
    for s in range(0, cs.size, CHUNK):
        c = cs[s : s + CHUNK, None]
        small = _balls(idx, cum, c, radii)
        big = _balls(idx, cum, c, N * radii)
        far = np.maximum(c - idx[0], idx[-1] - c)
        valid = far > N * radii
        yield c, radii, small, big, valid


def check_uniformly_perfect(mu: DyadicMeasure, N: float, gamma: float, centers="support", min_exp: int | None = None) -> CheckResult:
    """``mu(B(x, N r)) >= 2**gamma mu(B(x, r))`` whenever ``spt mu`` is not inside ``B(x, N r)``.

    ``centers`` is ``"support"`` (atoms), ``"grid"`` (every grid point of the
    hull), ``"half-grid"`` (grid points and cell midpoints, with radii down to
    half a cell) or an explicit array of real positions.
    """
    if not N > 1:
        raise InvalidArgumentError(f"N must exceed 1, got {N}")
    if not 0 < gamma <= 1:
        raise InvalidArgumentError(f"gamma must lie in (0, 1], got {gamma}")
    factor = 2.0**gamma
    checked = 0
    for c, r, small, big, valid in _up_sweep(mu, N, centers, min_exp):
        bad = valid & (big < factor * small * (1 - REL_SLACK))
        checked += int(np.count_nonzero(valid))
        if np.any(bad):
            i, j = np.argwhere(bad)[0]
            w = _to_real(mu, c[i, 0], r[0, j])
            w.update(small=float(small[i, j]), big=float(big[i, j]))
            return CheckResult(False, checked, w)
    return CheckResult(True, checked)


def uniform_perfectness_gamma(mu: DyadicMeasure, N: float, centers="support", min_exp: int | None = None):
    """Largest gamma for which the (N, gamma) check passes, with the binding (x, r)."""
    best = math.inf
    witness = None
    for c, r, small, big, valid in _up_sweep(mu, N, centers, min_exp):
        use = valid & (small > 0)
        if not np.any(use):
            continue
        with np.errstate(divide="ignore"):
            g = np.where(use, np.log2(big / np.where(small > 0, small, 1.0)), np.inf)
        i, j = np.unravel_index(np.argmin(g), g.shape)
        if g[i, j] < best:
            best = float(g[i, j])
            witness = _to_real(mu, c[i, 0], r[0, j])
    return best, witness


@dataclass(frozen=True)
class UniformPerfectFit:
    N: float | None
    gamma: float | None
    found: bool
    gamma_max: float | None = None

    def to_dict(self):
        return asdict(self)


def fit_uniform_perfectness(mu: DyadicMeasure, N_grid=DEFAULT_N_GRID, gamma_grid=DEFAULT_GAMMA_GRID, centers="support") -> UniformPerfectFit:
    """Smallest N on the grid admitting some gamma on the grid; the largest such gamma."""
    _require_spread(mu.indices)
    diam = float(mu.indices[-1] - mu.indices[0])
    for N in sorted(N_grid):
        if not N < diam:
            break
        gmax, _ = uniform_perfectness_gamma(mu, N, centers)
        ok = [g for g in gamma_grid if 0 < g <= 1 and g <= gmax]
        if ok:
            g = max(ok)
            if check_uniformly_perfect(mu, N, g, centers):
                return UniformPerfectFit(float(N), float(g), True, min(gmax, 1e300))
    return UniformPerfectFit(None, None, False)


def check_gap_chain(mu: DyadicMeasure, N_exp: int, gamma: float, D: int) -> CheckResult:
    """Cell-level decay implied by ``(2**N_exp, gamma)``-uniform perfectness.

    For ``I`` in D_{(s+1)D} inside the middle half of ``J`` in D_{sD} with
    the support not inside ``J``: ``mu(I) <= 2**(-gamma floor((D-1)/N_exp)) mu(J)``.
    """
    if D < 2:
        raise InvalidArgumentError("D must be at least 2")
    bound = 2.0 ** (-gamma * ((D - 1) // N_exp))
    m = mu.level
    kmin, kmax = int(mu.indices[0]), int(mu.indices[-1])
    checked = 0
    worst = 0.0
    for s in range(0, m // D):
        fine_level = (s + 1) * D
        fine = discretize(mu, fine_level)
        coarse = discretize(mu, s * D)
        parent = fine.indices >> D
        child = fine.indices - (parent << D)
        mid = (child >= (1 << (D - 2))) & (child < 3 * (1 << (D - 2)))
        shift = m - s * D
        inside = (kmin >> shift) == (kmax >> shift)
        pos = np.searchsorted(coarse.indices, parent)
        pm = coarse.masses[pos]
        use = mid & ~(inside & (parent == (kmin >> shift)))
        if not np.any(use):
            continue
        checked += int(np.count_nonzero(use))
        ratio = fine.masses[use] / pm[use]
        worst = max(worst, float(ratio.max()))
        bad = ratio > bound * (1 + REL_SLACK)
        if np.any(bad):
            t = np.flatnonzero(use)[np.argmax(bad)]
            return CheckResult(
                False,
                checked,
                {"s": s, "I": int(fine.indices[t]), "J": int(parent[t]), "ratio": float(fine.masses[t] / pm[t])},
                {"bound": bound, "worst_ratio": worst},
            )
    return CheckResult(True, checked, None, {"bound": bound, "worst_ratio": worst})


def check_set_uniformly_perfect(A: DyadicSet, K: float) -> CheckResult:
    """For x in A and dyadic r: ``A`` inside ``B(x, K r)`` or ``A`` meets ``B(x, K r) minus B(x, r)``."""
    K_star, witness, checked = _set_up_constant(A)
    if K_star <= K * (1 + REL_SLACK):
        return CheckResult(True, checked, None, {"K_required": K_star})
    return CheckResult(False, checked, witness, {"K_required": K_star})


def fit_set_uniform_perfectness(A: DyadicSet) -> float:
    """Least K passing :func:`check_set_uniformly_perfect` (over dyadic radii)."""
    return _set_up_constant(A)[0]


def _set_up_constant(A: DyadicSet):
    idx = A.indices
    _require_spread(idx)
    diam = float(idx[-1] - idx[0])
    radii = _dyadic_radii(diam)[None, :]
    c = idx.astype(np.float64)[:, None]
    # nearest point strictly farther than r on either side
    right = np.searchsorted(idx, c + radii, side="right")
    left = np.searchsorted(idx, c - radii, side="left") - 1
    dr = np.where(right < idx.size, idx[np.minimum(right, idx.size - 1)] - c, np.inf)
    dl = np.where(left >= 0, c - idx[np.maximum(left, 0)], np.inf)
    d = np.minimum(dr, dl)
    ratio = np.where(np.isfinite(d), d / radii, 0.0)
    i, j = np.unravel_index(np.argmax(ratio), ratio.shape)
    witness = _to_real(A.uniform_measure(), c[i, 0], radii[0, j])
    witness["next_distance"] = float(d[i, j]) * math.ldexp(1.0, -A.level)
    return max(float(ratio[i, j]), 1.0), witness, int(ratio.size)


# ---------------------------------------------------------------------------
# Ahlfors regularity


def _ahlfors_table(mu: DyadicMeasure, K_cutoff: int = K_CUTOFF):
    """Per-radius min and max of log2 ball mass over support centres.

    Radii ``r = 2**j`` cells with ``K_cutoff < r < 2**m`` cells (real r in
    (K 2**-m, 1)).
    """
    idx = mu.indices
    _require_spread(idx)
    m = mu.level
    js = [j for j in range(0, m) if K_cutoff < 2**j]
    if not js:
        raise InvalidArgumentError(f"empty sweep: no dyadic radius in ({K_cutoff} * 2**-{m}, 1)")
    cum = mu.cumulative()
    c = idx.astype(np.float64)[:, None]
    r = np.array([float(2**j) for j in js])[None, :]
    masses = _balls(idx, cum, c, r)
    logm = np.log2(masses)
    log_r = np.array(js, dtype=float) - m
    return log_r, logm.min(axis=0), logm.max(axis=0), masses


def check_ahlfors(mu: DyadicMeasure, C: float, alpha: float, K_cutoff: int = K_CUTOFF) -> CheckResult:
    """``r**alpha / C <= mu(B(x, r)) <= C r**alpha`` for support x and swept r."""
    if not C >= 1:
        raise InvalidArgumentError("C must be at least 1")
    log_r, lo, hi, _ = _ahlfors_table(mu, K_cutoff)
    lc = math.log2(C) + 1e-12
    for j, lr in enumerate(log_r):
        if lo[j] < alpha * lr - lc:
            return CheckResult(False, j + 1, {"r": 2.0**lr, "side": "lower", "log2_mass": float(lo[j])})
        if hi[j] > alpha * lr + lc:
            return CheckResult(False, j + 1, {"r": 2.0**lr, "side": "upper", "log2_mass": float(hi[j])})
    return CheckResult(True, int(log_r.size))


@dataclass(frozen=True)
class AhlforsFit:
    C: float
    alpha: float
    residual: float

    def to_dict(self):
        return asdict(self)


def fit_ahlfors(mu: DyadicMeasure, alpha_grid=DEFAULT_ALPHA_GRID, K_cutoff: int = K_CUTOFF) -> AhlforsFit:
    """Fit alpha as the slope of the per-radius log2 ball-mass band, snapped to the grid.

    The minimax residual alone does not pin alpha over a bounded range of
    scales (a smaller alpha trades against C), so the slope of the band's
    midline fixes alpha and ``C = 2**residual`` is then the least constant.
    """
    log_r, lo, hi, _ = _ahlfors_table(mu, K_cutoff)
    grid = np.asarray(alpha_grid, dtype=float)
    if log_r.size >= 2:
        slope = float(np.polyfit(log_r, (lo + hi) / 2.0, 1)[0])
    else:
        slope = float((lo[0] + hi[0]) / 2.0 / log_r[0])
    a = float(grid[np.argmin(np.abs(grid - slope))])
    res = float(np.max(np.maximum(np.abs(lo - a * log_r), np.abs(hi - a * log_r))))
    return AhlforsFit(float(2.0**res), a, res)


def ahlfors_to_up_constants(C: float, alpha: float, gamma: float) -> float:
    """``N = 2 (2**gamma C**2)**(1/alpha) + 1``."""
    if not C >= 1:
        raise InvalidArgumentError("C must be at least 1")
    if not 0 < alpha <= 1:
        raise InvalidArgumentError("alpha must lie in (0, 1]")
    if not 0 < gamma <= 1:
        raise InvalidArgumentError("gamma must lie in (0, 1]")
    return 2.0 * (2.0**gamma * C * C) ** (1.0 / alpha) + 1.0


def ahlfors_porosity_k(C: float, alpha: float) -> int:
    """``k = ceil((3 + 2 log2 C) / (1 - alpha))``."""
    if not C >= 1:
        raise InvalidArgumentError("C must be at least 1")
    if not 0 < alpha < 1:
        raise InvalidArgumentError("alpha must lie in (0, 1)")
    return math.ceil((3.0 + 2.0 * math.log2(C)) / (1.0 - alpha))


# ---------------------------------------------------------------------------
# porosity and doubling


def check_dyadic_porosity(A: DyadicSet, k: int) -> CheckResult:
    """Every level-n cell meeting A has an empty level-(n+k) subcell, n = 0 .. level - k."""
    k = int(k)
    if k < 1:
        raise InvalidArgumentError("k must be at least 1")
    if k > A.level:
        raise InvalidArgumentError(f"k = {k} exceeds the set's level {A.level}")
    if A.size == 0:
        raise InvalidArgumentError("empty set")
    checked = 0
    for n in range(0, A.level - k + 1):
        child = np.unique(A.indices >> (A.level - n - k))
        parent, counts = np.unique(child >> k, return_counts=True)
        checked += parent.size
        full = counts == (1 << k)
        if np.any(full):
            return CheckResult(False, checked, {"n": n, "cell": int(parent[np.argmax(full)])})
    return CheckResult(True, checked)


def fit_porosity_k(A: DyadicSet, k_max: int | None = None) -> int | None:
    """Smallest k passing :func:`check_dyadic_porosity`, or None."""
    k_max = A.level if k_max is None else min(k_max, A.level)
    for k in range(1, k_max + 1):
        if check_dyadic_porosity(A, k):
            return k
    return None


def _doubling_ratios(mu: DyadicMeasure, min_exp: int = 1):
    idx = mu.indices
    _require_spread(idx)
    diam = float(idx[-1] - idx[0])
    radii = _dyadic_radii(diam, min_exp)[None, :]
    cum = mu.cumulative()
    c = idx.astype(np.float64)[:, None]
    small = _balls(idx, cum, c, radii)
    big = _balls(idx, cum, c, 2 * radii)
    return c, radii, big / small


def check_doubling(mu: DyadicMeasure, C: float, min_exp: int = 1) -> CheckResult:
    """``C mu(B(x, r)) >= mu(B(x, 2r))`` for support x and dyadic ``r >= 2**min_exp`` cells.

    The default floor of two cells skips the one-cell window ``[x - 1, x + 1)``,
    which is lopsided around the atom's own cell and measures resolution,
    not the measure.
    """
    c, radii, ratio = _doubling_ratios(mu, min_exp)
    bad = ratio > C * (1 + REL_SLACK)
    if np.any(bad):
        i, j = np.argwhere(bad)[0]
        w = _to_real(mu, c[i, 0], radii[0, j])
        w["ratio"] = float(ratio[i, j])
        return CheckResult(False, int(ratio.size), w)
    return CheckResult(True, int(ratio.size))


def fit_doubling(mu: DyadicMeasure, min_exp: int = 1) -> float:
    """Least doubling constant over the sweep."""
    return float(_doubling_ratios(mu, min_exp)[2].max())


def doubling_up_constants(C: float, K: float):
    """``N = 2K + 1``, ``M = ceil(log2(N + 1))``, ``gamma = log2(1 + C**-M)``."""
    if not C >= 1:
        raise InvalidArgumentError("C must be at least 1")
    if not K > 1:
        raise InvalidArgumentError("K must exceed 1")
    N = 2 * K + 1
    M = math.ceil(math.log2(N + 1))
    return N, M, math.log2(1.0 + C ** (-M))


# ---------------------------------------------------------------------------
# lower dimension


@dataclass(frozen=True)
class LowerDimension:
    t: float
    c_t: float
    counts: tuple = ()

    def to_dict(self):
        return {"t": self.t, "c_t": self.c_t, "log2_min_counts": list(self.counts)}


def covering_profile(A: DyadicSet) -> np.ndarray:
    """``g[k] = min log2 N(x, R 2**-k, R)`` over x in A and dyadic ``R <= diam``.

    ``N(x, r, R)`` counts the level cells of side r meeting ``A`` within the
    closed ball ``B(x, R)``.
    """
    idx = A.indices
    diam = float(idx[-1] - idx[0]) if idx.size else 0.0
    if diam == 0:
        return np.zeros(1)
    top = int(math.floor(math.log2(diam)))
    g = np.full(top + 1, np.inf)
    g[0] = 0.0
    c = idx.astype(np.float64)
    for a in range(0, top):
        coarse = idx >> a
        for b in range(a + 1, top + 1):
            R = float(1 << b)
            lo = np.searchsorted(idx, c - R, side="left")
            hi = np.searchsorted(idx, c + R, side="right")
            n = distinct_in_windows(coarse, lo, hi)
            g[b - a] = min(g[b - a], math.log2(int(n.min())))
    return g


def estimate_lower_dimension(A: DyadicSet, k_min: int = 2, k_skip_top: int = 2) -> LowerDimension:
    """Lower dimension from the worst-case covering profile.

    ``t`` is the least-squares slope of ``g(k)`` for ``k_min <= k <= K - k_skip_top``
    (clamped to [0, 1]) and ``c_t = min_k 2**(g(k) - t k)`` is the witness
    constant: every swept configuration needs at least ``c_t (R/r)**t`` cells.
    """
    if A.size <= 1:
        return LowerDimension(0.0, 1.0)
    g = covering_profile(A)
    ks = np.arange(g.size)
    hi = max(g.size - k_skip_top, min(g.size, k_min + 2))
    sel = slice(min(k_min, max(0, hi - 2)), hi)
    if ks[sel].size >= 2:
        t = float(np.polyfit(ks[sel], g[sel], 1)[0])
    else:
        t = float(g[-1] / max(ks[-1], 1))
    t = min(max(t, 0.0), 1.0)
    c_t = float(np.min(2.0 ** (g - t * ks)))
    return LowerDimension(t, c_t, tuple(float(v) for v in g))


# ---------------------------------------------------------------------------
# report


@dataclass(frozen=True)
class RegularityReport:
    diameter: float
    uniform_perfect: dict | None = None
    ahlfors: dict | None = None
    doubling_constant: float | None = None
    porosity_k: int | None = None
    lower_dim: dict | None = None
    thickness: float | None = None

    def to_dict(self):
        d = asdict(self)
        if d["thickness"] == math.inf:
            d["thickness"] = "inf"
        return d


def regularity_report(mu: DyadicMeasure, N=None, gamma=None, N_grid=DEFAULT_N_GRID, gamma_grid=DEFAULT_GAMMA_GRID, thickness: bool = True) -> RegularityReport:
    """Fit every regularity constant on ``mu`` (and its support)."""
    from .sumsets import derive_thickness

    _require_spread(mu.indices)
    up = fit_uniform_perfectness(mu, N_grid, gamma_grid).to_dict()
    if N is not None and gamma is not None:
        res = check_uniformly_perfect(mu, N, gamma)
        up["requested"] = {"N": N, "gamma": gamma, "passed": res.passed, "witness": res.witness}
    try:
        ah = fit_ahlfors(mu).to_dict()
    except InvalidArgumentError:
        ah = None
    A = mu.support
    ld = estimate_lower_dimension(A)
    return RegularityReport(
        diameter=mu.diameter,
        uniform_perfect=up,
        ahlfors=ah,
        doubling_constant=fit_doubling(mu),
        porosity_k=fit_porosity_k(A, 24),
        lower_dim={"t": ld.t, "c_t": ld.c_t},
        thickness=derive_thickness(A).tau if thickness else None,
    )
