import json
import math
from fractions import Fraction

import numpy as np
import pytest

from lqdim import (
    DyadicMeasure,
    DyadicSet,
    ball_mass,
    convolve,
    convolve_many,
    density_lq_norm,
    discretize,
    generate,
    linf_dimension_estimate,
    linf_exponent,
    linf_norm,
    lq_dimension_estimate,
    lq_exponent,
    lq_norm,
    middle_thirds,
    normalize_to_unit,
)
from lqdim.core import convolution_plan, local_exponents
from lqdim.errors import InvalidArgumentError, ResourceLimitError

from . import oracles

# [DERIVED] exact CDF differences of the Cantor function (tests/oracles.py)
CANTOR_LOG2_SUMSQ = {6: -4.570186464449519, 8: -5.7311590327330135}
CANTOR_MAX_CELL = {6: 0.0625, 8: 0.02734375}


class TestContainers:
    def test_from_atoms_merges_and_sorts(self):
        mu = DyadicMeasure.from_atoms(3, [5, 1, 5, 2], [0.25, 0.5, 0.25, 0.0])
        assert mu.indices.tolist() == [1, 5]
        assert mu.masses.tolist() == [0.5, 0.5]

    def test_rejects_negative_and_unsorted(self):
        with pytest.raises(InvalidArgumentError):
            DyadicMeasure.from_atoms(2, [0], [-1.0])
        with pytest.raises(InvalidArgumentError):
            DyadicMeasure(2, np.array([2, 1]), np.array([0.5, 0.5]))

    def test_arrays_are_read_only(self):
        mu = DyadicMeasure.uniform(3)
        with pytest.raises(ValueError):
            mu.masses[0] = 1.0

    def test_json_round_trip(self):
        mu = generate(middle_thirds(), 6)
        assert DyadicMeasure.from_json(mu.to_json()) == mu
        A = mu.support
        assert DyadicSet.from_dict(json.loads(json.dumps(A.to_dict()))) == A

    def test_positions_and_diameter(self):
        mu = DyadicMeasure.from_atoms(4, [0, 8, 15], [1, 1, 2], normalize=True)
        assert mu.positions.tolist() == [0.0, 0.5, 15 / 16]
        assert mu.diameter == 15 / 16
        assert mu.total_mass == 1.0


class TestDiscretize:
    def test_cantor_masses_match_exact_cdf(self):
        mu = discretize(generate(middle_thirds(), 20), 10)
        o = oracles.cantor_cell_masses(10)
        assert set(mu.indices.tolist()) == set(o)
        assert max(abs(o[int(k)] - w) for k, w in zip(mu.indices, mu.masses)) < 1e-15

    def test_identity_and_rejects_refinement(self):
        mu = DyadicMeasure.uniform(4)
        assert discretize(mu, 4) is mu
        with pytest.raises(InvalidArgumentError):
            discretize(mu, 5)

    def test_left_endpoint_collapse(self):
        mu = DyadicMeasure.from_atoms(3, [1, 2, 3, 7], [0.25] * 4)
        d = discretize(mu, 1)
        assert d.indices.tolist() == [0, 1]
        assert d.masses.tolist() == [0.75, 0.25]

    def test_normalize_to_unit_coarsens_wide_support(self):
        mu = DyadicMeasure.from_atoms(2, [3, 4, 8], [0.5, 0.25, 0.25])
        u = normalize_to_unit(mu)
        # span 5 cells needs 3 bits at level 2: coarsen by one
        assert u.indices.tolist() == [0, 2]
        assert u.masses.tolist() == [0.75, 0.25]


class TestNorms:
    @pytest.mark.parametrize("m", [6, 8])
    def test_cantor_l2_norm_frozen(self, m):
        mu = generate(middle_thirds(), m)
        assert lq_norm(mu, 2) == pytest.approx(CANTOR_LOG2_SUMSQ[m], abs=1e-12)
        assert linf_norm(mu) == pytest.approx(CANTOR_MAX_CELL[m], abs=1e-15)

    def test_lebesgue_and_dirac(self):
        leb = DyadicMeasure.uniform(10)
        assert lq_exponent(leb, 2) == pytest.approx(1.0)
        assert density_lq_norm(leb, 3) == pytest.approx(0.0, abs=1e-12)
        dirac = DyadicMeasure.dirac(10)
        assert lq_exponent(dirac, 2) == 0.0
        assert linf_exponent(dirac) == 0.0

    @pytest.mark.parametrize("q", [1.0, 0.5, math.nan, math.inf])
    def test_bad_q(self, q):
        with pytest.raises(InvalidArgumentError):
            lq_norm(DyadicMeasure.uniform(2), q)

    def test_tiny_masses_do_not_underflow(self):
        mu = DyadicMeasure.from_atoms(60, [0, 1], [1.0, 1e-300], normalize=True)
        assert math.isfinite(lq_norm(mu, 4))


class TestBalls:
    def test_closed_ball(self):
        mu = DyadicMeasure.from_atoms(3, [0, 2, 4], [0.25, 0.25, 0.5])
        assert ball_mass(mu, 0.25, 0.25) == 1.0
        assert ball_mass(mu, 0.0, 0.24) == 0.25

    def test_local_exponents(self):
        leb = DyadicMeasure.uniform(12)
        r = np.array([2.0**-4, 2.0**-8])
        e = local_exponents(leb, 0.5, r)
        # closed ball: 2r of cells plus the atom at x + r
        want = np.log2(2 * r + 2.0**-12) / np.log2(r)
        assert np.allclose(e, want, rtol=0, atol=1e-14)


class TestConvolve:
    def test_small_exact(self):
        mu = DyadicMeasure.from_atoms(2, [0, 1], [0.5, 0.5])
        c = convolve(mu, mu)
        assert c.indices.tolist() == [0, 1, 2]
        assert c.masses.tolist() == [0.25, 0.5, 0.25]

    def test_level_mismatch(self):
        with pytest.raises(InvalidArgumentError):
            convolve(DyadicMeasure.uniform(2), DyadicMeasure.uniform(3))

    def test_cantor_matches_dict_oracle_bitwise(self):
        mu = generate(middle_thirds(), 10)
        a = dict(zip(mu.indices.tolist(), mu.masses.tolist()))
        want = oracles.convolve_dict(a, a)
        got = convolve(mu, mu)
        assert got.indices.tolist() == sorted(want)
        assert got.masses.tolist() == [want[k] for k in sorted(want)]

    def test_fft_path_close_to_direct(self):
        mu = generate(middle_thirds(), 14)
        d = convolve(mu, mu, method="direct")
        f = convolve(mu, mu, method="fft")
        assert np.array_equal(d.indices, f.indices)
        assert np.max(np.abs(d.masses - f.masses)) < 1e-15

    def test_strided_support_is_compressed(self):
        mu = DyadicMeasure.from_atoms(50, [0, 2**40, 2**41], [1, 1, 1], normalize=True)
        plan = convolution_plan(mu, mu)
        assert plan["stride"] == 2**40
        c = convolve(mu, mu)
        assert c.indices.tolist() == [0, 2**40, 2**41, 3 * 2**40, 2**42]

    def test_work_cap(self):
        mu = DyadicMeasure.uniform(12)
        with pytest.raises(ResourceLimitError):
            convolve(mu, mu, max_work=1000)

    def test_env_work_cap(self, monkeypatch):
        monkeypatch.setenv("LQDIM_MAX_WORK", "1000")
        with pytest.raises(ResourceLimitError):
            convolve(DyadicMeasure.uniform(12), DyadicMeasure.uniform(12))

    def test_convolve_many(self):
        mu = DyadicMeasure.from_atoms(1, [0, 1], [0.5, 0.5])
        c = convolve_many([mu, mu, mu])
        assert c.masses.tolist() == [0.125, 0.375, 0.375, 0.125]


class TestEstimates:
    def test_lebesgue_estimate_is_one(self):
        est = lq_dimension_estimate(DyadicMeasure.uniform(16), 2, range(8, 17))
        assert all(v == pytest.approx(1.0) for v in est.values)
        assert est.slope_estimate == pytest.approx(1.0)

    def test_cantor_slope_close_to_dimension(self):
        est = lq_dimension_estimate(middle_thirds(), 2, range(14, 25))
        assert abs(est.slope_estimate - math.log(2) / math.log(3)) < 0.01

    def test_linf_cantor(self):
        est = linf_dimension_estimate(middle_thirds(), [12, 18, 24])
        assert est.dual_exponent == 1.0
        assert abs(est.point_estimate - math.log(2) / math.log(3)) < 0.05

    def test_levels_validated(self):
        with pytest.raises(InvalidArgumentError):
            lq_dimension_estimate(DyadicMeasure.uniform(4), 2, [3, 2])
        with pytest.raises(InvalidArgumentError):
            lq_dimension_estimate(DyadicMeasure.uniform(4), 2, [5])

    def test_to_dict_is_json(self):
        est = linf_dimension_estimate(DyadicMeasure.uniform(6), [3, 6])
        json.dumps(est.to_dict())
