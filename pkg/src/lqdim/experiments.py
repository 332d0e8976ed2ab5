"""Experiment runners: thin orchestration over the library operations.

Every number in a report comes from a public library call; the runners only
select levels, check preconditions and tabulate. A failed mathematical
precondition is a reported outcome (``status = "precondition_unmet"``), not
an exception.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Any

import jsonschema
import numpy as np

from .core import (
    DyadicMeasure,
    ball_mass,
    convolve,
    discretize,
    linf_exponent,
    lq_exponent,
    lq_norm,
    normalize_to_unit,
)
from .errors import DegenerateInputError, InvalidArgumentError, SpecInvalidError
from .generators import (
    IFSSpec,
    LebesgueSpec,
    MeasureSpec,
    _schema,
    ahlfors_constant,
    construction_intervals,
    generate,
    spec_from_dict,
)
from .regularity import (
    DEFAULT_GAMMA_GRID,
    DEFAULT_N_GRID,
    fit_porosity_k,
    fit_uniform_perfectness,
    regularity_report,
)
from .sumsets import astels_check, derive_thickness, nfold_sumset_experiment
from .uniformity import COUNT, LQ_NORM, branching_scale_set, uniformize, uniformize_bound

EXPERIMENTS = ("IMPROVEMENT", "REPEATED", "POROUS_DUAL", "INFTY_JUMP", "REGULARITY", "SUMSET", "UNIFORMIZE")
DEFAULT_MAX_LEVEL = 26
CSV_COLUMNS = ("experiment", "n", "m", "q", "exponent", "improvement")
MONOTONE_TOL = 1e-6


@dataclass
class ExperimentConfig:
    experiment: str
    mu: MeasureSpec | None = None
    nu: MeasureSpec | None = None
    measures: tuple = ()
    q: tuple = (2.0,)
    levels: tuple | None = None
    max_level: int = DEFAULT_MAX_LEVEL
    eta: float = 0.01
    sigma: float = 0.1
    p: float = 2.0
    a: float | None = None
    n_max: int = 4
    D: int = 3
    ell: int = 4
    delta: float = 0.1
    objective: Any = COUNT
    N_grid: tuple = DEFAULT_N_GRID
    gamma_grid: tuple = DEFAULT_GAMMA_GRID
    require_uniformly_perfect: bool = True
    pad: bool = True
    seed: int = 0
    max_work: int | None = None

    def __post_init__(self):
        self.experiment = self.experiment.upper().replace("-", "_")
        if self.experiment not in EXPERIMENTS:
            raise InvalidArgumentError(f"unknown experiment {self.experiment!r}")
        self.q = tuple(float(x) for x in self.q)
        if any(not x > 1 for x in self.q):
            raise InvalidArgumentError("every q must exceed 1")
        if self.levels is None:
            self.levels = default_levels(self.experiment)
        self.levels = tuple(sorted(set(int(m) for m in self.levels)))
        if not self.levels:
            raise InvalidArgumentError("levels must be non-empty")
        if self.levels[0] < 0 or self.levels[-1] > self.max_level:
            raise InvalidArgumentError(f"levels must lie in [0, {self.max_level}]")

    @property
    def top(self) -> int:
        return self.levels[-1]

    def to_dict(self):
        def spec(s):
            try:
                return None if s is None else s.to_dict()
            except InvalidArgumentError:
                return repr(s)

        obj = self.objective if self.objective == COUNT else {"lq": self.objective.q}
        return {
            "experiment": self.experiment,
            "mu": spec(self.mu),
            "nu": spec(self.nu),
            "measures": [spec(s) for s in self.measures],
            "q": list(self.q),
            "levels": list(self.levels),
            "max_level": self.max_level,
            "eta": self.eta,
            "sigma": self.sigma,
            "p": self.p,
            "a": self.a,
            "n_max": self.n_max,
            "D": self.D,
            "ell": self.ell,
            "delta": self.delta,
            "objective": obj,
            "require_uniformly_perfect": self.require_uniformly_perfect,
            "pad": self.pad,
            "seed": self.seed,
            "max_work": self.max_work,
        }


def default_levels(experiment: str) -> tuple:
    if experiment == "REPEATED":
        return tuple(range(12, 21))
    if experiment in ("INFTY_JUMP", "REGULARITY"):
        return tuple(range(12, 21))
    if experiment == "SUMSET":
        return (16,)
    if experiment == "UNIFORMIZE":
        return (12,)
    return tuple(range(12, 25))


def parse_levels(text: str) -> tuple:
    """``"12..24"`` (inclusive) or ``"12,16,20"``."""
    text = text.strip()
    if ".." in text:
        a, b = text.split("..", 1)
        a, b = int(a), int(b)
        if b < a:
            raise InvalidArgumentError(f"empty level range {text!r}")
        return tuple(range(a, b + 1))
    return tuple(sorted({int(x) for x in text.split(",") if x.strip()}))


def config_from_dict(d: dict, experiment: str | None = None) -> ExperimentConfig:
    """Validate against the ExperimentConfig schema and build the config."""
    v = jsonschema.Draft202012Validator(_schema("experiment_config.schema.json"))
    e = jsonschema.exceptions.best_match(v.iter_errors(d))
    if e is not None:
        path = "".join(f"[{p}]" if isinstance(p, int) else f".{p}" for p in e.absolute_path).lstrip(".")
        raise SpecInvalidError(e.message, "schema", path or "$")
    exp = experiment or d.get("experiment")
    if exp is None:
        raise SpecInvalidError("experiment is not specified", "schema", "experiment")
    if experiment and d.get("experiment") and d["experiment"] != experiment.upper().replace("-", "_"):
        raise SpecInvalidError(
            f"config is for {d['experiment']}, not {experiment}", "schema", "experiment"
        )
    kw = {}
    for key in ("eta", "sigma", "p", "a", "n_max", "D", "ell", "delta", "max_level",
                "require_uniformly_perfect", "pad", "seed", "max_work"):
        if key in d:
            kw[key] = d[key]
    for key in ("mu", "nu"):
        if key in d:
            kw[key] = spec_from_dict(d[key], key)
    if "measures" in d:
        kw["measures"] = tuple(spec_from_dict(s, f"measures[{i}]") for i, s in enumerate(d["measures"]))
    if "q" in d:
        kw["q"] = tuple(d["q"])
    if "levels" in d:
        kw["levels"] = parse_levels(d["levels"]) if isinstance(d["levels"], str) else tuple(d["levels"])
    if "objective" in d:
        kw["objective"] = COUNT if d["objective"] == "count" else LQ_NORM(d["objective"]["lq"])
    if "N_grid" in d:
        kw["N_grid"] = tuple(d["N_grid"])
    if "gamma_grid" in d:
        kw["gamma_grid"] = tuple(d["gamma_grid"])
    return ExperimentConfig(experiment=exp, **kw)


@dataclass
class Report:
    experiment: str
    status: str = "ok"
    message: str = ""
    rows: list = field(default_factory=list)
    summary: dict = field(default_factory=dict)
    config: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def add(self, n, m, q, exponent, improvement=None):
        self.rows.append(
            {"experiment": self.experiment, "n": n, "m": m, "q": _q(q), "exponent": exponent, "improvement": improvement}
        )

    def unmet(self, message: str) -> "Report":
        self.status = "precondition_unmet"
        self.message = message
        return self

    def to_dict(self):
        return {
            "experiment": self.experiment,
            "status": self.status,
            "message": self.message,
            "summary": _jsonable(self.summary),
            "rows": _jsonable(self.rows),
            "config": _jsonable(self.config),
        }

    def csv_rows(self):
        for r in self.rows:
            yield [("" if r[c] is None else r[c]) for c in CSV_COLUMNS]


def _q(q):
    return "inf" if isinstance(q, float) and math.isinf(q) else q


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (np.floating, float)):
        x = float(x)
        if math.isinf(x):
            return "inf" if x > 0 else "-inf"
        if math.isnan(x):
            return None
        return x
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def _exp(mu: DyadicMeasure, q: float) -> float:
    """Per-scale exponent after moving the support into [0, 1)."""
    return max(0.0, lq_exponent(normalize_to_unit(mu), q))


def _frostman(mu: DyadicMeasure) -> float:
    return max(0.0, linf_exponent(normalize_to_unit(mu)))


def _up_precondition(nu_top: DyadicMeasure, cfg: ExperimentConfig, label: str):
    """Fit uniform perfectness on a moderate level; returns (fit dict, error message)."""
    lvl = min(nu_top.level, 16)
    try:
        fit = fit_uniform_perfectness(discretize(nu_top, lvl), cfg.N_grid, cfg.gamma_grid)
    except DegenerateInputError as e:
        return None, f"{label}: {e}"
    if not fit.found:
        return fit.to_dict(), f"{label}: no (N, gamma) on the grid passes the uniform-perfectness check"
    return fit.to_dict(), None


def run_improvement(cfg: ExperimentConfig) -> Report:
    """Per-scale exponents of mu, nu and mu * nu and the gap ``exponent(mu*nu) - exponent(mu)``."""
    rep = Report("IMPROVEMENT", config=cfg.to_dict())
    mu_spec = cfg.mu or LebesgueSpec()
    nu_spec = cfg.nu or mu_spec
    mu = generate(mu_spec, cfg.top)
    nu = mu if nu_spec is mu_spec else generate(nu_spec, cfg.top)
    fit, err = _up_precondition(nu, cfg, "nu")
    rep.summary["nu_uniformly_perfect"] = fit
    if err:
        return rep.unmet(err)
    top_exps = {q: _exp(mu, q) for q in cfg.q}
    rep.summary["mu_top_exponent"] = {str(q): v for q, v in top_exps.items()}
    if any(v > 1 - cfg.eta for v in top_exps.values()):
        return rep.unmet(f"eta-precondition unmet: exponent of mu at level {cfg.top} exceeds 1 - eta = {1 - cfg.eta}")
    conv = convolve(mu, nu, max_work=cfg.max_work)
    improvements = {}
    nu_exps = {}
    for m in cfg.levels:
        mu_m, nu_m, c_m = discretize(mu, m), discretize(nu, m), discretize(conv, m)
        for q in cfg.q:
            e_mu, e_nu, e_c = _exp(mu_m, q), _exp(nu_m, q), _exp(c_m, q)
            rep.add(1, m, q, e_mu)
            rep.add(2, m, q, e_c, e_c - e_mu)
            nu_exps.setdefault(str(q), []).append((m, e_nu))
            improvements.setdefault(str(q), []).append((m, e_c - e_mu))
    rep.summary["nu_exponent"] = {q: dict(v) for q, v in nu_exps.items()}
    rep.summary["improvement"] = {q: dict(v) for q, v in improvements.items()}
    rep.summary["improvement_at_top"] = {q: v[-1][1] for q, v in improvements.items()}
    return rep


def run_repeated(cfg: ExperimentConfig) -> Report:
    """Exponents of the n-fold convolutions ``nu_1 * ... * nu_n``, n = 1 .. n_max."""
    rep = Report("REPEATED", config=cfg.to_dict())
    specs = list(cfg.measures) or [cfg.mu or LebesgueSpec()]
    if len(specs) == 1:
        specs = specs * cfg.n_max
    gens = {}
    measures = []
    for i, s in enumerate(specs[: cfg.n_max]):
        if id(s) not in gens:
            gens[id(s)] = generate(s, cfg.top)
            if cfg.require_uniformly_perfect:
                _, err = _up_precondition(gens[id(s)], cfg, f"measures[{i}]")
                if err:
                    return rep.unmet(err)
        measures.append(gens[id(s)])
    cur = measures[0]
    seq = {str(q): [] for q in cfg.q}
    frost = []
    prev = {}
    for n in range(1, len(measures) + 1):
        if n > 1:
            cur = convolve(cur, measures[n - 1], max_work=cfg.max_work)
        for m in cfg.levels:
            c_m = discretize(cur, m)
            for q in cfg.q:
                e = _exp(c_m, q)
                imp = None if n == 1 else e - prev[(m, q)]
                rep.add(n, m, q, e, imp)
                prev[(m, q)] = e
                if m == cfg.top:
                    seq[str(q)].append(e)
            f = _frostman(c_m)
            rep.add(n, m, math.inf, f, None)
            if m == cfg.top:
                frost.append(f)
    mono = {}
    for q, v in seq.items():
        mono[q] = all(b > a + MONOTONE_TOL or a >= 1 - MONOTONE_TOL for a, b in zip(v, v[1:]))
    rep.summary.update(
        {"top_level": cfg.top, "exponents_at_top": seq, "strictly_increasing": mono, "frostman_at_top": frost}
    )
    return rep


def run_porous_dual(cfg: ExperimentConfig) -> Report:
    """Improvement for porous mu against a nu with a dimension floor."""
    rep = Report("POROUS_DUAL", config=cfg.to_dict())
    mu_spec = cfg.mu or LebesgueSpec()
    nu_spec = cfg.nu or LebesgueSpec()
    mu = generate(mu_spec, cfg.top)
    k = fit_porosity_k(mu.support, max(1, cfg.top - 1))
    rep.summary["porosity_k"] = k
    if k is None:
        return rep.unmet("support of mu is not dyadically porous at any k below the top level")
    nu = generate(nu_spec, cfg.top)
    e_nu = _exp(nu, cfg.p)
    rep.summary["nu_exponent_p"] = e_nu
    if e_nu < cfg.sigma:
        return rep.unmet(f"L^{cfg.p} exponent of nu is {e_nu:.4g} < sigma = {cfg.sigma}")
    conv = convolve(mu, nu, max_work=cfg.max_work)
    top = {}
    for m in cfg.levels:
        mu_m, c_m = discretize(mu, m), discretize(conv, m)
        for q in cfg.q:
            e_mu, e_c = _exp(mu_m, q), _exp(c_m, q)
            rep.add(1, m, q, e_mu)
            rep.add(2, m, q, e_c, e_c - e_mu)
            if m == cfg.top:
                top[str(q)] = e_c - e_mu
    rep.summary["improvement_at_top"] = top
    return rep


def _central_cantor_params(spec) -> tuple | None:
    """(ratio, alpha) for a symmetric two-map central Cantor spec, else None."""
    if not isinstance(spec, IFSSpec) or len(spec.maps) != 2:
        return None
    r0, r1 = (float(m.ratio) for m in spec.maps)
    if abs(r0 - r1) > 1e-12 or not 0 < r0 < 0.5 or not spec.is_symmetric():
        return None
    if any(abs(float(p) - 0.5) > 1e-12 for p in spec.weights):
        return None
    return r0, math.log(2.0) / math.log(1.0 / r0)


def run_infty_jump(cfg: ExperimentConfig) -> Report:
    """Frostman proxies of mu, mu*mu, mu*mu*mu for a symmetric central Cantor measure.

    Also checks the stall bound ``(mu*mu)(B(0, r)) >= C**-3 2**(-2 alpha) r**alpha``
    over dyadic r, with C the Ahlfors constant of the example.
    """
    rep = Report("INFTY_JUMP", config=cfg.to_dict())
    spec = cfg.mu
    params = _central_cantor_params(spec)
    if params is None:
        return rep.unmet("input must be a symmetric two-map central Cantor IFS (support symmetric around 0)")
    rho, alpha = params
    C = ahlfors_constant(alpha)
    mu = generate(spec, cfg.top)
    m2 = convolve(mu, mu, max_work=cfg.max_work)
    m3 = convolve(m2, mu, max_work=cfg.max_work)
    for m in cfg.levels:
        for n, M in ((1, mu), (2, m2), (3, m3)):
            rep.add(n, m, math.inf, max(0.0, linf_exponent(discretize(M, m))))
    stall = []
    for j in range(0, cfg.top + 1):
        r = 2.0**-j
        mass = ball_mass(m2, 0.0, r)
        bound = C**-3 * 2.0 ** (-2 * alpha) * r**alpha
        stall.append({"r": r, "mass": mass, "bound": bound, "holds": bool(mass >= bound)})
    r_min = 2.0**-cfg.top
    local = math.log2(ball_mass(m2, 0.0, r_min)) / math.log2(r_min)
    p = {n: max(0.0, linf_exponent(M)) for n, M in ((1, mu), (2, m2), (3, m3))}
    rep.summary.update(
        {
            "alpha": alpha,
            "ratio": rho,
            "C": C,
            "frostman": {str(n): v for n, v in p.items()},
            "two_fold_local_exponent_at_0": local,
            "stall_bound_holds": all(s["holds"] for s in stall),
            "stall": stall,
            "jump": p[3] - p[2],
        }
    )
    return rep


def run_regularity(cfg: ExperimentConfig) -> Report:
    rep = Report("REGULARITY", config=cfg.to_dict())
    mu = generate(cfg.mu or LebesgueSpec(), cfg.top)
    try:
        rr = regularity_report(mu, N_grid=cfg.N_grid, gamma_grid=cfg.gamma_grid)
    except DegenerateInputError as e:
        return rep.unmet(str(e))
    rep.summary["regularity"] = rr.to_dict()
    ah = rr.ahlfors
    for m in cfg.levels:
        for q in cfg.q:
            rep.add(1, m, q, _exp(discretize(mu, m), q))
    if ah is not None:
        rep.summary["alpha"] = ah["alpha"]
    return rep


def run_sumset(cfg: ExperimentConfig) -> Report:
    rep = Report("SUMSET", config=cfg.to_dict())
    spec = cfg.mu or LebesgueSpec()
    level = cfg.top
    nf = nfold_sumset_experiment(spec, cfg.n_max, level, pad=cfg.pad, max_work=cfg.max_work)
    for r in nf.rows:
        rep.rows.append(
            {"experiment": "SUMSET", "n": r.n, "m": r.level, "q": 0, "exponent": r.box_estimate,
             "improvement": None, "N_m": r.N_m, "is_interval": r.is_interval}
        )
    if isinstance(spec, IFSSpec):
        th = derive_thickness(construction_intervals(spec, level))
    else:
        th = derive_thickness(generate(spec, level).support)
    tau = th.tau
    astels_n = None
    if tau > 0:
        for n in range(1, 1000):
            if astels_check([tau] * n):
                astels_n = n
                break
    rep.summary.update(
        {"first_interval": nf.first_interval, "thickness": th.to_dict(), "astels_sufficient_n": astels_n}
    )
    return rep


def run_uniformize(cfg: ExperimentConfig) -> Report:
    rep = Report("UNIFORMIZE", config=cfg.to_dict())
    level = cfg.D * cfg.ell
    mu = generate(cfg.mu or LebesgueSpec(), level)
    res = uniformize(mu, cfg.D, cfg.ell, cfg.objective, cfg.delta)
    S = branching_scale_set(res.tree, cfg.delta)

    brackets = {str(q): S.bracket(lq_norm(res.measure, q), q) for q in cfg.q}
    rep.summary.update(
        {
            "D": cfg.D,
            "ell": cfg.ell,
            "branching": list(res.tree.branching),
            "retention": res.retention,
            "guaranteed_retention": uniformize_bound(cfg.D, cfg.ell),
            "full_scales": sorted(S.scales),
            "bracket": brackets,
            "leaves": res.tree.leaves.size,
            "input_atoms": mu.size,
        }
    )
    for q in cfg.q:
        rep.add(1, level, q, _exp(mu, q))
        rep.add(2, level, q, _exp(res.measure, q), None)
    return rep


RUNNERS = {
    "IMPROVEMENT": run_improvement,
    "REPEATED": run_repeated,
    "POROUS_DUAL": run_porous_dual,
    "INFTY_JUMP": run_infty_jump,
    "REGULARITY": run_regularity,
    "SUMSET": run_sumset,
    "UNIFORMIZE": run_uniformize,
}


def run(cfg: ExperimentConfig) -> Report:
    return RUNNERS[cfg.experiment](cfg)
