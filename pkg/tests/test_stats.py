import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import quad
from scipy.special import expi

from qds.core import TriangularArrayScheme
from qds.maps import ExpandingMapParams, LambdaAstar, constant_curve
from qds.observables import constant, cosine, tabulated
from qds.sampling import DiscreteSampler, LebesgueSampler
from qds.stats import (CorrelationSpec, EnsembleEstimate,
                       PHI_PLATEAU, centered_four_point_moment,
                       correlation_estimate, decay_fit,
                       four_point_expansion_check, four_point_random_spaces,
                       fourth_moment_series, moments_growth_ok, phi,
                       phi_half_integral_bound_check, psi)

TAU = 2 * math.pi


def li(x):
    return expi(math.log(x))


class TestPhi:
    def test_plateau_value(self):
        assert phi(0.0) == pytest.approx(0.5 / math.log(2) ** 2, rel=1e-15)
        assert PHI_PLATEAU == phi(0.0)

    def test_continuity_at_knee(self):
        assert phi(2.0) == pytest.approx(phi(1.999999), rel=1e-5)
        assert phi(2.0) == pytest.approx(0.5 / math.log(2) ** 2, rel=1e-15)

    def test_e_squared(self):
        assert phi(math.e ** 2) == pytest.approx(math.exp(-2) / 4, rel=1e-14)

    def test_negative_rejected(self):
        with pytest.raises(ValueError):
            phi(-0.1)

    def test_non_increasing_and_integrable(self):
        s = np.linspace(0, 1e4, 20001)
        vals = phi(s)
        assert np.all(np.diff(vals) <= 0)
        # analytic integral of the tail: int_2^X ds/(s log^2 s) = 1/log 2 - 1/log X
        total, _ = quad(phi, 0, 1e8, points=[2.0], limit=400)
        analytic = 2 * PHI_PLATEAU + 1 / math.log(2) - 1 / math.log(1e8)
        assert total == pytest.approx(analytic, rel=1e-6)

    @given(st.floats(0, 1e6, allow_nan=False), st.floats(0, 1e6, allow_nan=False))
    def test_min_bounded_by_geometric_mean(self, a, b):
        # elementary inequality used to split the moment bound integrals;
        # slack covers sqrt rounding when a == b
        assert min(a, b) <= math.sqrt(a) * math.sqrt(b) * (1 + 1e-15) + 1e-12


class TestPhiHalfIntegral:
    def test_knee_case_passes_with_equality(self):
        res = phi_half_integral_bound_check(2)
        assert res.lhs == pytest.approx(res.rhs, abs=1e-12)
        assert res.passed

    def test_lhs_against_logarithmic_integral_oracle(self):
        # substitution u = sqrt(s) turns the tail into int du / log u
        for n in (100, 10 ** 4, 10 ** 6):
            res = phi_half_integral_bound_check(n)
            oracle = (2 * math.sqrt(PHI_PLATEAU)
                      + li(math.sqrt(n)) - li(math.sqrt(2)))
            assert res.lhs == pytest.approx(oracle, rel=1e-6)

    def test_stated_bound_fails_beyond_the_knee(self):
        # the comparison 2 phi(0)^0.5 + 2 psi(n) - 2 psi(2) undershoots the
        # integral for every n beyond ~3: d(psi)/ds < phi(s)^0.5 / 2 always
        for n in (100, 10 ** 4):
            res = phi_half_integral_bound_check(n)
            assert res.lhs > res.rhs
            assert not res.passed

    def test_sqrt_over_log_scaling_is_bounded(self):
        ratios = []
        for n in (10 ** 4, 10 ** 5, 10 ** 6):
            res = phi_half_integral_bound_check(n)
            ratios.append(res.lhs / (math.sqrt(n) / math.log(n)))
        assert max(ratios) < 5.0
        assert max(ratios) / min(ratios) < 1.6

    def test_psi_formula(self):
        assert psi(4.0) == pytest.approx(2 / math.log(4))


class TestCorrelationEstimate:
    def test_constant_observable_zero(self, doubling_curve):
        spec = CorrelationSpec(ell=2, j=1, k_indices=(0, 5), n=10)
        est = correlation_estimate(spec, constant(2.0),
                                   TriangularArrayScheme(doubling_curve),
                                   LebesgueSampler(), 500, seed=1)
        assert est.mean == 0.0
        assert est.std_error == 0.0

    def test_variance_of_cosine(self, doubling_curve):
        # ell=2, k1=k2=0: the estimate is Var(f) = 1/2 under Lebesgue
        spec = CorrelationSpec(ell=2, j=1, k_indices=(0, 0), n=4)
        est = correlation_estimate(spec, cosine(1),
                                   TriangularArrayScheme(doubling_curve),
                                   LebesgueSampler(), 100_000, seed=2)
        assert abs(est.mean - 0.5) <= 3 * est.std_error

    def test_doubling_gap_twenty_correlation_vanishes(self, doubling_curve):
        # Fourier orthogonality: cos harmonics of 2^k x are uncorrelated
        spec = CorrelationSpec(ell=2, j=1, k_indices=(0, 20), n=32)
        est = correlation_estimate(spec, cosine(1),
                                   TriangularArrayScheme(doubling_curve),
                                   LebesgueSampler(), 200_000, seed=3)
        assert abs(est.mean) <= 3 * est.std_error

    def test_small_sample_rejected(self, doubling_curve):
        spec = CorrelationSpec(ell=2, j=1, k_indices=(0, 1), n=4)
        with pytest.raises(ValueError):
            correlation_estimate(spec, cosine(1),
                                 TriangularArrayScheme(doubling_curve),
                                 LebesgueSampler(), 99, seed=1)

    def test_seed_determinism(self, doubling_curve):
        spec = CorrelationSpec(ell=2, j=1, k_indices=(2, 7), n=16)
        args = (spec, cosine(1), TriangularArrayScheme(doubling_curve),
                LebesgueSampler(), 5000)
        assert correlation_estimate(*args, seed=11) == correlation_estimate(
            *args, seed=11)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            CorrelationSpec(ell=5, j=1, k_indices=(0, 1, 2, 3, 4), n=10)
        with pytest.raises(ValueError):
            CorrelationSpec(ell=3, j=2, k_indices=(3, 1, 4), n=10)
        with pytest.raises(ValueError):
            CorrelationSpec(ell=2, j=1, k_indices=(0, 11), n=10)

    def test_four_point_permutation_symmetry(self):
        curve = constant_curve(ExpandingMapParams(2, 0.5, 0.0))
        scheme = TriangularArrayScheme(curve)
        sampler = LebesgueSampler()
        base = centered_four_point_moment(cosine(1), scheme, 32,
                                          (0.1, 0.4, 0.6, 0.9), sampler,
                                          20_000, seed=5)
        for perm in [(0.4, 0.1, 0.9, 0.6), (0.9, 0.6, 0.4, 0.1)]:
            assert centered_four_point_moment(cosine(1), scheme, 32, perm,
                                              sampler, 20_000, seed=5) == base


class TestDecayFit:
    @staticmethod
    def synthetic(values, se=1e-9):
        return [EnsembleEstimate(mean=v, std_error=se, samples=1000, seed=0)
                for v in values]

    def test_exact_exponential(self):
        gaps = list(range(1, 9))
        fit = decay_fit(gaps, self.synthetic([0.8 ** g for g in gaps]))
        assert fit is not None
        assert fit.theta == pytest.approx(0.8, abs=1e-6)
        assert fit.residual_rms < 1e-9
        assert fit.decaying

    def test_phi_shape_fits_with_large_residual(self):
        gaps = list(range(1, 13))
        fit = decay_fit(gaps, self.synthetic([phi(g) for g in gaps]))
        assert fit is not None
        assert fit.theta < 1.0
        assert fit.residual_rms > 0.05  # visibly not exponential

    def test_all_zero_inconclusive(self):
        gaps = list(range(1, 8))
        fit = decay_fit(gaps, self.synthetic([0.0] * 7, se=1e-3))
        assert fit is None

    def test_insufficient_significant_points(self):
        ests = self.synthetic([0.5, 0.3, 0.0, 0.0, 0.0], se=1e-2)
        assert decay_fit(range(1, 6), ests) is None


class TestFourthMoments:
    def test_constant_observable_zero(self, ramp_curve):
        series = fourth_moment_series(constant(1.5),
                                      TriangularArrayScheme(ramp_curve),
                                      1.0, [1, 4, 16], LebesgueSampler(),
                                      400, seed=1)
        assert all(e.fourth_moment == 0.0 for e in series)

    def test_two_point_level_one(self, ramp_curve):
        # f in {1, 3} with equal mass: centered zeta_1(., 1) = +-1, m4 = 1
        f = tabulated(4.0 * np.arange(8192) / 8192, name="4x")
        sampler = DiscreteSampler(points=(0.25, 0.75))
        series = fourth_moment_series(f, TriangularArrayScheme(ramp_curve),
                                      1.0, [1], sampler, 20_000, seed=2)
        assert series[0].fourth_moment == pytest.approx(1.0, abs=0.02)

    def test_scaled_series_helper(self):
        mk = lambda n, m4, se: type("E", (), {
            "scaled": n * math.log(n) ** 2 * m4,
            "scaled_std_error": n * math.log(n) ** 2 * se})()
        good = [mk(100, 1e-4, 1e-6), mk(1000, 2e-6, 5e-8)]
        bad = [mk(100, 1e-4, 1e-6), mk(1000, 1e-4, 1e-6)]
        assert moments_growth_ok(good)
        assert not moments_growth_ok(bad)


class TestFourPointExpansion:
    def test_identical_centered_functions_give_fourth_moment(self):
        w = np.array([0.25, 0.25, 0.5])
        vals = np.array([1.0, -1.0, 0.5])
        v = np.tile(vals, (4, 1))
        assert four_point_expansion_check(w, v) <= 1e-14
        m = float(np.dot(w, vals))
        m4_direct = float(np.dot(w, (vals - m) ** 4))
        lhs = float(np.dot(w, (vals - m) ** 4))
        assert lhs == pytest.approx(m4_direct)

    def test_two_point_space_fixed_seed(self):
        rng = np.random.Generator(np.random.Philox(key=17))
        w = np.array([0.5, 0.5])
        v = rng.uniform(-1, 1, size=(4, 2))
        assert four_point_expansion_check(w, v) <= 1e-12

    def test_identity_holds_exactly_over_rationals(self):
        # independent oracle: redo the expansion in exact Fraction arithmetic
        rng = np.random.Generator(np.random.Philox(key=23))
        for _ in range(20):
            k = int(rng.integers(2, 7))
            wq = [Fraction(int(rng.integers(1, 10)), 1) for _ in range(k)]
            total = sum(wq)
            wq = [w / total for w in wq]
            vq = [[Fraction(int(rng.integers(-8, 9)), int(rng.integers(1, 5)))
                   for _ in range(k)] for _ in range(4)]

            def ave(*idx):
                out = Fraction(0)
                for pos in range(k):
                    term = wq[pos]
                    for i in idx:
                        term *= vq[i][pos]
                    out += term
                return out

            m = [ave(i) for i in range(4)]
            lhs = Fraction(0)
            for pos in range(k):
                term = wq[pos]
                for i in range(4):
                    term *= vq[i][pos] - m[i]
                lhs += term
            rhs = (
                (ave(0, 1, 2, 3) - ave(0, 1, 2) * m[3])
                - m[2] * (ave(0, 1, 3) - ave(0, 1) * m[3])
                - m[1] * (ave(0, 2, 3) - ave(0, 2) * m[3])
                + m[1] * m[2] * (ave(0, 3) - m[0] * m[3])
                - m[0] * (ave(1, 2, 3) - ave(1, 2) * m[3])
                + m[0] * m[2] * (ave(1, 3) - m[1] * m[3])
                + m[0] * m[1] * (ave(2, 3) - m[2] * m[3])
            )
            assert lhs == rhs

    def test_batch_of_random_spaces(self):
        assert four_point_random_spaces(100, 16, seed=9) <= 1e-12

    def test_input_validation(self):
        with pytest.raises(ValueError):
            four_point_expansion_check(np.array([0.7, 0.7]),
                                       np.zeros((4, 2)))
        with pytest.raises(ValueError):
            four_point_expansion_check(np.array([1.0]), np.zeros((4, 1)))
