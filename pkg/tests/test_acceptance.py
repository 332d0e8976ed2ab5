"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run ``pytest tests/test_acceptance.py -v``; the lines are repeated in the
``acceptance criteria`` section of the terminal summary.
"""

import json
import math
import time
from fractions import Fraction

import numpy as np
import pytest

from lqdim import (
    AffineMap,
    DyadicSet,
    IFSSpec,
    ahlfors_porosity_k,
    ahlfors_to_up_constants,
    astels_check,
    check_dyadic_porosity,
    check_uniformly_perfect,
    construction_intervals,
    convolve,
    derive_thickness,
    discretize,
    generate,
    generate_ahlfors_example,
    generate_set,
    interval_detect,
    is_uniform,
    linf_norm,
    lowerdim_to_up,
    lq_exponent,
    lq_norm,
    middle_thirds,
    normalize_to_unit,
    sparse_digit_spec,
    spec_to_json,
    sumset,
    uniformize,
    up_to_lowerdim,
    up_to_thickness,
)
from lqdim.experiments import config_from_dict, run_infty_jump
from lqdim.generators import ahlfors_example_spec, factorial_blocks
from lqdim.regularity import uniform_perfectness_gamma
from lqdim.sumsets import unit_normalized
from lqdim.uniformity import uniformize_bound

from . import oracles
from .conftest import random_sparse_measure

LOG3_2 = math.log(2) / math.log(3)
QS = (1.5, 2.0, 4.0)


def exponent(mu, q):
    return lq_exponent(normalize_to_unit(mu), q)


def test_ac01_convexity(fuzz_pairs, report_ac):
    t0 = time.perf_counter()
    worst = -math.inf
    bad = 0
    for mu, nu in fuzz_pairs:
        conv = convolve(mu, nu)
        for q in QS:
            # log2 ||.||_q = lq_norm / q
            gap = (lq_norm(conv, q) - lq_norm(mu, q)) / q
            worst = max(worst, gap)
            bad += gap > 1e-12
    dt = time.perf_counter() - t0
    ok = bad == 0 and dt < 60
    report_ac(1, ok, f"convexity: {bad} violations / {3 * len(fuzz_pairs)}, worst log gap {worst:.3g}, {dt:.1f}s")
    assert ok


def test_ac02_young(fuzz_pairs, report_ac):
    bad = 0
    worst = -math.inf
    for mu, nu in fuzz_pairs:
        lhs = math.log2(linf_norm(convolve(mu, nu)))
        rhs = (lq_norm(mu, 2) + lq_norm(nu, 2)) / 2
        worst = max(worst, lhs - rhs)
        bad += lhs > rhs + 1e-12
    report_ac(2, bad == 0, f"Young bound: {bad} violations / {len(fuzz_pairs)}, worst log gap {worst:.3g}")
    assert bad == 0


def test_ac03_discretization_comparability(report_ac):
    rng = np.random.default_rng(7)
    bad = 0
    checks = 0
    for i in range(200):
        m = int(rng.integers(1, 17))
        fine = m + 6
        span = int(min(2**fine, rng.choice([64, 2048, 2**fine])))
        mu = random_sparse_measure(rng, fine, 200, span)
        nu = random_sparse_measure(rng, fine, 200, span)
        a = convolve(discretize(mu, m), discretize(nu, m))
        b = discretize(convolve(mu, nu), m)
        for q in QS:
            la, lb = lq_norm(a, q), lq_norm(b, q)
            # 2**-q ||a||_q^q <= ||b||_q^q <= 2**q ||a||_q^q
            checks += 2
            bad += lb > la + q + 1e-9
            bad += la > lb + q + 1e-9
    report_ac(3, bad == 0, f"discretization comparability C_q = 2^q: {bad} violations / {checks}")
    assert bad == 0


def test_ac04_brute_force_convolution(report_ac):
    rng = np.random.default_rng(11)
    mismatches = 0
    for i in range(100):
        level = int(rng.integers(4, 25))
        span = int(min(2**level, rng.choice([32, 1024, 2**16, 2**level])))
        mu = random_sparse_measure(rng, level, 1000, span)
        nu = random_sparse_measure(rng, level, 1000, span)
        got = convolve(mu, nu, method="direct")
        k, w = oracles.convolve_rows(mu.indices, mu.masses, nu.indices, nu.masses, level)
        if not (np.array_equal(got.indices, k) and np.array_equal(got.masses, w)):
            mismatches += 1
    report_ac(4, mismatches == 0, f"convolve vs quadratic oracle: {mismatches} inexact / 100")
    assert mismatches == 0


def test_ac05_cantor_lq_dimension(report_ac):
    t0 = time.perf_counter()
    mu = generate(middle_thirds(), 24)
    vals = {q: exponent(mu, q) for q in QS}
    dt = time.perf_counter() - t0
    ok = all(abs(v - LOG3_2) <= 0.05 for v in vals.values()) and dt < 60
    txt = ", ".join(f"q={q}: {v:.4f}" for q, v in vals.items())
    report_ac(5, ok, f"middle-thirds exponent at m=24 ({txt}) vs {LOG3_2:.4f}, {dt:.1f}s")
    assert ok


def test_ac06_convolution_improvement(report_ac):
    mu = generate(middle_thirds(), 24)
    conv = convolve(mu, mu)
    gaps = {m: exponent(discretize(conv, m), 2) - exponent(discretize(mu, m), 2) for m in range(16, 25)}
    ok = gaps[24] >= 0.05 and all(g > 0 for g in gaps.values())
    report_ac(6, ok, f"improvement at m=24: {gaps[24]:.4f}; min over m=16..24: {min(gaps.values()):.4f}")
    assert ok


def test_ac07_repeated_convolution(report_ac):
    mu = generate(middle_thirds(), 20)
    seq = []
    cur = mu
    for n in range(1, 5):
        if n > 1:
            cur = convolve(cur, mu)
        seq.append(exponent(cur, 2))
    ok = all(b > a for a, b in zip(seq, seq[1:])) and seq[-1] >= 0.95
    report_ac(7, ok, "n-fold exponents at m=20: " + " < ".join(f"{v:.4f}" for v in seq))
    assert ok


def _free_digits(m, rule):
    forced = set()
    j = 1
    while rule(j) <= m:
        forced.update(range(rule(j), 2 * rule(j) + 1))
        j += 1
    return sum(1 for d in range(1, m + 1) if d not in forced)


def test_ac08_sparse_digit_stall(report_ac):
    scale = 15
    spec = sparse_digit_spec(scale)
    rule = factorial_blocks(scale)
    worst = 0.0
    for m in range(1, 61):
        mu = generate(spec, m)
        f = _free_digits(m, rule)
        for q in QS:
            worst = max(worst, abs(lq_exponent(mu, q) - f / m))
    exact = worst <= 1e-12
    stall = {}
    for m in (2 * rule(1), 2 * rule(2)):
        mu = generate(spec, m)
        stall[m] = exponent(convolve(mu, mu), 2) - exponent(mu, 2)
    ok = exact and all(v <= 0.02 for v in stall.values())
    txt = ", ".join(f"m={m}: {v:.4f}" for m, v in stall.items())
    report_ac(8, ok, f"exponent = f(m)/m up to {worst:.2g}; q=2 self-convolution gain at stall scales {txt}")
    assert ok


def test_ac09_constant_formulas(report_ac):
    vals = {
        "ahlfors_to_up_constants(1, 1/2, 1)": (ahlfors_to_up_constants(1, 0.5, 1), 9),
        "ahlfors_porosity_k(1, 1/2)": (ahlfors_porosity_k(1, 0.5), 6),
        "ahlfors_porosity_k(2, 1/2)": (ahlfors_porosity_k(2, 0.5), 10),
        "up_to_lowerdim(2)": (up_to_lowerdim(2), 1 / 3),
        "up_to_thickness(2)": (up_to_thickness(2), 1 / 2),
        "lowerdim_to_up(1/2, 1/2)": (lowerdim_to_up(0.5, 0.5), 16),
    }
    wrong = [k for k, (got, want) in vals.items() if got != want]
    report_ac(9, not wrong, "constants bit-exact" if not wrong else f"mismatch: {wrong}")
    assert not wrong


def test_ac10_ahlfors_examples(report_ac):
    out = []
    ok = True
    for alpha in (0.4, 0.5, 0.63):
        ex = generate_ahlfors_example(alpha, 20)
        N = ahlfors_to_up_constants(ex.constant, alpha, 1)
        k = ahlfors_porosity_k(ex.constant, alpha)
        up = check_uniformly_perfect(ex.measure, N, 1.0)
        por = check_dyadic_porosity(ex.measure.support, k)
        ok &= bool(up) and bool(por)
        out.append(f"a={alpha}: C={ex.constant:g} N={N:g} u.p. {'ok' if up else 'FAIL'}, k={k} porous {'ok' if por else 'FAIL'}")
    report_ac(10, ok, "; ".join(out))
    assert ok


def random_ifs(rng):
    """Non-overlapping IFS with hull [0, 1], 2 or 3 maps, random weights."""
    n = int(rng.integers(2, 4))
    ratios = rng.uniform(0.12, 0.8 / n, size=n)
    gaps = rng.dirichlet(np.ones(n - 1)) * (1 - ratios.sum())
    shifts = np.r_[0.0, np.cumsum(ratios[:-1] + gaps)]
    weights = rng.dirichlet(np.ones(n) * 2)
    maps = tuple(AffineMap(float(r), float(t)) for r, t in zip(ratios, shifts))
    return IFSSpec(maps, tuple(float(w) for w in weights))


def test_ac11_discretization_transfer(report_ac):
    rng = np.random.default_rng(3)
    fails = []
    n_inst = 0
    N = 4.0
    while n_inst < 50:
        spec = random_ifs(rng)
        fine = generate(spec, 18)
        gamma, _ = uniform_perfectness_gamma(fine, N)
        if not gamma > 0:
            continue
        gamma = min(gamma, 1.0)
        n_inst += 1
        coarse = discretize(fine, 12)
        if not check_uniformly_perfect(coarse, 2 * N + 1, gamma):
            fails.append(n_inst)
    report_ac(11, not fails, f"(N, gamma) -> (2N+1, gamma) after discretization: {len(fails)} failures / 50")
    assert not fails


def test_ac12_thickness(report_ac):
    taus = {m: derive_thickness(construction_intervals(middle_thirds(), m)) for m in (12, 15, 18)}
    cantor_ok = all(r.exact == 1 and r.tau == 1.0 for r in taus.values())
    interval = derive_thickness([(Fraction(0), Fraction(1))]).tau
    isolated = derive_thickness(DyadicSet(10, np.r_[np.arange(0, 200), 400, np.arange(600, 1024)])).tau
    ok = cantor_ok and math.isinf(interval) and isolated == 0
    report_ac(12, ok, f"middle-thirds tau {[str(r.exact) for r in taus.values()]}; interval {interval}; isolated point {isolated}")
    assert ok


def test_ac13_astels(report_ac):
    C = generate_set(middle_thirds(), 16)
    S = sumset(C, C)
    iv = interval_detect(S)
    ast = astels_check([Fraction(1), Fraction(1)])
    ast_f = astels_check([1.0, 1.0])
    ok = iv and ast.passed and ast.total == 1.0 and ast_f.passed and ast_f.total == 1.0
    report_ac(13, ok, f"C+C interval at m=16: {iv}; astels_check([1,1]) sum {ast.total!r} passed {ast.passed}")
    assert ok


def test_ac14_infty_jump(report_ac):
    spec = ahlfors_example_spec(0.5, centered=True)
    cfg = config_from_dict({"mu": json.loads(spec_to_json(spec)), "levels": [20]}, "INFTY_JUMP")
    rep = run_infty_jump(cfg)
    s = rep.summary
    holds = s["stall_bound_holds"]
    worst = min(st["mass"] / st["bound"] for st in s["stall"])
    ok = rep.ok and holds and s["jump"] >= 0.03
    report_ac(
        14,
        ok,
        f"two-fold mass near 0 >= bound at {len(s['stall'])} radii: {holds} (min ratio {worst:.3g}); "
        f"three-fold minus two-fold Frostman proxy {s['jump']:.4f}",
    )
    assert ok


def test_ac15_uniformize(report_ac):
    rng = np.random.default_rng(5)
    not_uniform = 0
    below = 0
    small = 0
    for _ in range(200):
        D = int(rng.integers(1, 4))
        ell = int(rng.integers(1, 5))
        level = D * ell
        mu = random_sparse_measure(rng, level, 2**level)
        res = uniformize(mu, D, ell)
        if is_uniform(res.tree.leaves, D, ell) is None:
            not_uniform += 1
        if mu.size <= 2**12:
            small += 1
            if res.tree.leaves.size < uniformize_bound(D, ell) * mu.size * (1 - 1e-12):
                below += 1
    ok = not_uniform == 0 and below == 0
    report_ac(15, ok, f"non-uniform outputs {not_uniform} / 200; retention below bound {below} / {small}")
    assert ok


def test_ac16_sumset_box_gain(report_ac):
    gains = {}
    for m in range(16, 25):
        F1 = generate_set(sparse_digit_spec(1), m)
        F2 = generate_set(middle_thirds(), m)
        S = unit_normalized(sumset(F1, F2))
        e1 = math.log2(unit_normalized(F1).size) / m
        gains[m] = math.log2(S.size) / m - e1
    ok = all(g >= 0.02 for g in gains.values())
    report_ac(16, ok, f"box exponent gain of F1+F2 over F1, m=16..24: min {min(gains.values()):.4f}, max {max(gains.values()):.4f}")
    assert ok
