import json
import math
from fractions import Fraction

import numpy as np
import pytest

from lqdim import (
    DyadicSet,
    LebesgueSpec,
    astels_check,
    box_dimension_estimate,
    central_cantor,
    construction_intervals,
    derive_thickness,
    generate_set,
    interval_detect,
    lowerdim_to_up,
    middle_thirds,
    nfold_sumset_experiment,
    sumset,
    thickness_to_up,
    up_to_lowerdim,
    up_to_thickness,
)
from lqdim.errors import InvalidArgumentError, ResourceLimitError
from lqdim.regularity import estimate_lower_dimension, fit_set_uniform_perfectness
from lqdim.sumsets import box_count, set_intervals, unit_normalized

LOG3_2 = math.log(2) / math.log(3)


class TestSumset:
    def test_zero_plus_A_is_padded_A(self):
        A = DyadicSet(6, [3, 9, 10])
        S = sumset(DyadicSet(6, [0]), A)
        assert S.indices.tolist() == [3, 4, 9, 10, 11]
        assert sumset(DyadicSet(6, [0]), A, pad=False) == A

    def test_halves(self):
        H = DyadicSet(1, [0, 1])
        assert sumset(H, H, pad=False).indices.tolist() == [0, 1, 2]

    def test_padding_contains_truth(self):
        # real sums of points from the cells always land in k or k + 1
        rng = np.random.default_rng(2)
        a = DyadicSet(4, np.sort(rng.choice(16, 5, replace=False)))
        b = DyadicSet(4, np.sort(rng.choice(16, 5, replace=False)))
        S = set(sumset(a, b).indices.tolist())
        for i in a.indices:
            for j in b.indices:
                for x in np.linspace(0, 0.999, 7):
                    for y in np.linspace(0, 0.999, 7):
                        assert int(math.floor(i + x + j + y)) in S

    def test_middle_thirds_covers(self):
        C = generate_set(middle_thirds(), 16)
        S = sumset(C, C)
        assert interval_detect(S)
        assert S.indices[0] == 0 and S.indices[-1] >= 2 * (2**16 - 1)

    def test_errors(self):
        with pytest.raises(InvalidArgumentError):
            sumset(DyadicSet(3, [1]), DyadicSet(4, [1]))
        big = DyadicSet(14, np.arange(2**14))
        with pytest.raises(ResourceLimitError):
            sumset(big, big, max_work=10)


class TestBox:
    def test_interval(self):
        est = box_dimension_estimate(DyadicSet(12, np.arange(4096)), range(6, 13))
        assert all(v == 1.0 for v in est.values)

    def test_finite_set_decays(self):
        est = box_dimension_estimate(DyadicSet(20, [0, 5, 1000, 77777]), [8, 12, 16, 20])
        assert est.values[-1] < est.values[0] and est.values[-1] <= 2 / 20

    def test_middle_thirds(self):
        # N_m is about 2 * 2**(0.63 m), so the per-scale value carries a 1/m
        # offset; the windowed slope removes it
        est = box_dimension_estimate(middle_thirds(), range(16, 25))
        assert abs(est.slope_estimate - LOG3_2) < 0.03
        assert est.values[-1] == math.log2(box_count(generate_set(middle_thirds(), 24), 24)) / 24


class TestThickness:
    @pytest.mark.parametrize("m", [12, 15, 18])
    def test_middle_thirds_exact(self, m):
        rep = derive_thickness(construction_intervals(middle_thirds(), m))
        assert rep.exact == 1 and rep.tau == 1.0 and not rep.upper_bound

    def test_resolution_stable(self):
        taus = [derive_thickness(construction_intervals(middle_thirds(), m)).tau for m in (12, 15, 18)]
        assert max(taus) - min(taus) <= 1e-12

    def test_interval_and_isolated_point(self):
        assert math.isinf(derive_thickness(DyadicSet(8, np.arange(256))).tau)
        rep = derive_thickness(DyadicSet(8, np.r_[np.arange(100), 150, np.arange(200, 256)]))
        assert rep.tau == 0.0 and rep.upper_bound and rep.resolution == 8

    def test_derivation_tree_invariants(self):
        rep = derive_thickness(construction_intervals(middle_thirds(), 6))
        t = rep.derivation
        t.check()
        assert t.n_gaps == len(t.intervals) - 1
        json.dumps(rep.to_dict())

    def test_fifth_cantor(self):
        rep = derive_thickness(construction_intervals(central_cantor(Fraction(1, 5)), 12))
        assert rep.exact == Fraction(1, 3)

    def test_set_intervals(self):
        assert set_intervals(DyadicSet(5, [1, 2, 3, 7, 9, 10])) == [(1, 3), (7, 7), (9, 10)]


class TestAstels:
    def test_examples(self):
        r = astels_check([1, 1])
        assert r.passed and r.total == 1.0 and r.borderline
        r = astels_check([Fraction(1, 3)])
        assert not r.passed and r.total == 0.25
        assert astels_check([math.inf]).passed

    def test_side_condition(self):
        iv = construction_intervals(middle_thirds(), 8)
        assert astels_check([1, 1], [iv, iv]).side_condition

    def test_negative(self):
        with pytest.raises(InvalidArgumentError):
            astels_check([-1])


class TestConversions:
    def test_values(self):
        assert up_to_lowerdim(2) == 1 / 3
        assert lowerdim_to_up(0.5, 0.5) == 16
        assert up_to_thickness(2) == 0.5
        assert thickness_to_up(1) == (3.0, True)
        assert thickness_to_up(math.inf) == (1.0, True)

    def test_domains(self):
        for f, arg in ((up_to_lowerdim, 1), (up_to_thickness, 0.5), (thickness_to_up, 0)):
            with pytest.raises(InvalidArgumentError):
                f(arg)

    @pytest.mark.parametrize("ratio", [Fraction(1, 3), Fraction(1, 4), Fraction(1, 5)])
    def test_self_consistency(self, ratio):
        spec = central_cantor(ratio)
        A = generate_set(spec, 16)
        K = fit_set_uniform_perfectness(A)
        tau = derive_thickness(construction_intervals(spec, 16)).tau
        assert tau >= 1 / K - 2.0**-16
        assert estimate_lower_dimension(A).t > up_to_lowerdim(K) - 0.05


class TestIntervalDetect:
    def test_basic(self):
        assert interval_detect(DyadicSet(4, np.arange(3, 12)))
        assert not interval_detect(DyadicSet(4, np.delete(np.arange(3, 12), 4)))

    def test_nfold(self):
        assert nfold_sumset_experiment(middle_thirds(), 4, 14).first_interval == 2
        assert nfold_sumset_experiment(LebesgueSpec(), 3, 8).first_interval == 1
        fifth = nfold_sumset_experiment(central_cantor(Fraction(1, 5)), 6, 14)
        # Astels: n tau / (tau + 1) >= 1 with tau = 1/3 needs n = 4
        assert fifth.first_interval == 4
        assert [r.n for r in fifth.rows] == [1, 2, 3, 4]
        json.dumps(fifth.to_dict())

    def test_unit_normalized(self):
        U = unit_normalized(DyadicSet(3, [2, 5, 9, 10]))
        assert U.indices.tolist() == [0, 1, 3, 4]
