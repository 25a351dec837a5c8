"""Covariance construction, Wigner sampling, and moment validation."""

import math

import numpy as np
import pytest

from sqhhg.exceptions import InsufficientDataError, InvalidParameterError
from sqhhg.quadrature import (
    covariance_det_residual,
    QuadratureCovariance,
    QuadratureSample,
    SeedSpec,
    SqueezeParams,
    benchmark_covariance,
    covariance_of,
    estimate_covariance,
    sample_classical_benchmark,
    sample_coherent,
    sample_wigner,
)


def rotation_oracle(r, theta):
    """Independent construction: rotate the principal-axis covariance.

    Sign convention: positive theta tilts the squeezed axis so the
    cross-covariance is positive for theta in (0, pi/2), matching
    sigma_xp = sin(theta) cos(theta) (e^{2r} - e^{-2r}) / 2.
    """
    rot = np.array([[math.cos(theta), math.sin(theta)],
                    [-math.sin(theta), math.cos(theta)]])
    diag = np.diag([0.5 * math.exp(-2 * r), 0.5 * math.exp(2 * r)])
    return rot @ diag @ rot.T


def covariance_se(cov, n):
    """Standard errors of Gaussian sample-covariance entries."""
    se_xx = cov.sxx * math.sqrt(2.0 / (n - 1))
    se_pp = cov.spp * math.sqrt(2.0 / (n - 1))
    se_xp = math.sqrt((cov.sxx * cov.spp + cov.sxp**2) / (n - 1))
    return se_xx, se_pp, se_xp


class TestCovarianceOf:
    def test_vacuum_isotropic(self):
        for theta in (0.0, 0.3, 1.0, 2.5):
            cov = covariance_of(0.0, theta)
            assert cov.sxx == pytest.approx(0.5, abs=1e-15)
            assert cov.spp == pytest.approx(0.5, abs=1e-15)
            assert cov.sxp == pytest.approx(0.0, abs=1e-15)

    def test_amplitude_squeezed_r1(self):
        cov = covariance_of(1.0, 0.0)
        assert cov.sxx == pytest.approx(0.067668, abs=5e-7)
        assert cov.spp == pytest.approx(3.694528, abs=5e-7)
        assert cov.sxp == 0.0

    def test_diagonal_angle(self):
        cov = covariance_of(1.0, math.pi / 4)
        assert cov.sxx == pytest.approx(1.881098, abs=5e-7)
        assert cov.spp == pytest.approx(1.881098, abs=5e-7)
        assert cov.sxp == pytest.approx(1.813430, abs=5e-7)
        assert cov.det() == pytest.approx(0.25, abs=1e-12)

    @pytest.mark.parametrize("r", [0.0, 0.4, 1.1, 2.3, 3.0])
    @pytest.mark.parametrize("theta", [0.1, 0.7, 1.3, 2.0, 2.9])
    def test_matches_rotation_oracle(self, r, theta):
        cov = covariance_of(r, theta)
        ref = rotation_oracle(r, theta)
        assert cov.sxx == pytest.approx(ref[0, 0], rel=1e-12)
        assert cov.spp == pytest.approx(ref[1, 1], rel=1e-12)
        assert cov.sxp == pytest.approx(ref[0, 1], rel=1e-12, abs=1e-15)

    def test_det_identity_grid(self):
        eps = np.finfo(float).eps
        for r in np.arange(0.0, 3.0 + 1e-9, 0.1):
            for theta in np.arange(0.0, math.pi, math.pi / 32):
                # the identity itself, checked where float64 cannot cancel
                assert covariance_det_residual(r, theta) < 1e-12
                # the float64 entries agree with it up to their conditioning
                cov = covariance_of(r, theta)
                bound = 10 * eps * (cov.sxx * cov.spp + cov.sxp**2) + 1e-13
                assert abs(cov.det() - 0.25) < bound

    def test_principal_axes_exact_zero_cross(self):
        for r in (0.5, 1.5, 3.0):
            assert covariance_of(r, 0.0).sxp == 0.0
            assert covariance_of(r, math.pi / 2).sxp == 0.0

    def test_rotated_marginal_law(self):
        # measuring along a frame rotated by tp is the same as tilting the
        # state by tp: Var(X cos tp + P sin tp) = sigma_X^2(theta + tp)
        for r in (0.3, 1.2, 2.4):
            for theta in (0.2, 1.0, 2.8):
                cov = covariance_of(r, theta)
                for tp in (0.0, 0.4, 1.1, 1.9):
                    expected = covariance_of(r, theta + tp).sxx
                    assert cov.rotated_variance(tp) == pytest.approx(expected, rel=1e-12)

    def test_invalid_parameters(self):
        with pytest.raises(InvalidParameterError):
            covariance_of(-0.1, 0.0)
        with pytest.raises(InvalidParameterError):
            covariance_of(float("nan"), 0.0)
        with pytest.raises(InvalidParameterError):
            covariance_of(1.0, float("inf"))


class TestSqueezeParams:
    def test_theta_normalized_to_half_period(self):
        p = SqueezeParams(r=1.0, theta=math.pi + 0.3)
        assert p.theta == pytest.approx(0.3)
        assert SqueezeParams(r=0.0, theta=-0.1).theta == pytest.approx(math.pi - 0.1)

    def test_negative_r_rejected(self):
        with pytest.raises(InvalidParameterError):
            SqueezeParams(r=-1.0)

    def test_mean_quadratures(self):
        p = SqueezeParams(r=0.0, alpha_mag=2.0, phi=math.pi / 2)
        xc, pc = p.mean_quadratures()
        assert xc == pytest.approx(0.0, abs=1e-15)
        assert pc == pytest.approx(2.0)


class TestSampling:
    def test_vacuum_moments(self):
        n = 100_000
        samples = sample_wigner(SqueezeParams(), (0.0, 0.0), n, SeedSpec(11))
        est = estimate_covariance(samples)
        se = covariance_se(covariance_of(0.0, 0.0), n)
        assert abs(est.sxx - 0.5) < 3 * se[0]
        assert abs(est.spp - 0.5) < 3 * se[1]
        assert abs(est.sxp) < 3 * se[2]

    def test_squeezed_moments_with_displacement(self):
        n = 100_000
        params = SqueezeParams(r=1.0, theta=0.0)
        samples = sample_wigner(params, (100.0, 0.0), n, SeedSpec(12))
        est = estimate_covariance(samples)
        cov = covariance_of(1.0, 0.0)
        se = covariance_se(cov, n)
        assert abs(est.sxx - cov.sxx) < 3 * se[0]
        assert abs(est.sxp) < 3 * se[2]
        assert np.mean([s.x for s in samples]) == pytest.approx(100.0, abs=3 * math.sqrt(cov.sxx / n))

    def test_rotated_cross_covariance(self):
        n = 100_000
        params = SqueezeParams(r=1.0, theta=math.pi / 4)
        samples = sample_wigner(params, (0.0, 0.0), n, SeedSpec(13))
        est = estimate_covariance(samples)
        cov = covariance_of(1.0, math.pi / 4)
        se = covariance_se(cov, n)
        assert abs(est.sxp - cov.sxp) < 3 * se[2]

    def test_determinism_and_substreams(self):
        a = sample_wigner(SqueezeParams(r=1.0), (0.0, 0.0), 5, SeedSpec(42, 7))
        b = sample_wigner(SqueezeParams(r=1.0), (0.0, 0.0), 5, SeedSpec(42, 7))
        assert [(s.x, s.p) for s in a] == [(s.x, s.p) for s in b]
        # bulk draw equals per-shot draws at matching indices
        single = sample_wigner(SqueezeParams(r=1.0), (0.0, 0.0), 1, SeedSpec(42, 9))[0]
        assert (a[2].x, a[2].p) == (single.x, single.p)
        assert a[0].shot_index == 7 and a[4].shot_index == 11
        other = sample_wigner(SqueezeParams(r=1.0), (0.0, 0.0), 5, SeedSpec(43, 7))
        assert (a[0].x, a[0].p) != (other[0].x, other[0].p)

    def test_sample_count_validated(self):
        with pytest.raises(InvalidParameterError):
            sample_wigner(SqueezeParams(), (0.0, 0.0), 0, SeedSpec(1))


class TestClassicalBenchmark:
    def test_anti_squeezed_matches_wigner_variance(self):
        n = 100_000
        samples = sample_classical_benchmark(1.5, math.pi / 2, (0.0, 0.0), n, SeedSpec(21))
        est = estimate_covariance(samples)
        target = 0.5 * math.exp(3.0)  # ~10.043
        se = covariance_se(benchmark_covariance(1.5, math.pi / 2), n)
        assert abs(est.sxx - target) < 3 * se[0]
        assert abs(est.spp - 0.5) < 3 * se[1]

    def test_squeezed_direction_clipped_at_sql(self):
        n = 100_000
        samples = sample_classical_benchmark(1.5, 0.0, (0.0, 0.0), n, SeedSpec(22))
        est = estimate_covariance(samples)
        se = covariance_se(benchmark_covariance(1.5, 0.0), n)
        assert abs(est.sxx - 0.5) < 3 * se[0]

    def test_r_zero_identical_to_coherent(self):
        a = sample_classical_benchmark(0.0, 0.7, (3.0, 1.0), 50, SeedSpec(23))
        b = sample_coherent((3.0, 1.0), 50, SeedSpec(23))
        assert [(s.x, s.p) for s in a] == [(s.x, s.p) for s in b]

    def test_all_rotated_marginals_at_least_sql(self):
        n = 50_000
        samples = sample_classical_benchmark(2.0, 0.3, (0.0, 0.0), n, SeedSpec(24))
        x = np.array([s.x for s in samples])
        p = np.array([s.p for s in samples])
        for tp in np.linspace(0, math.pi, 16, endpoint=False):
            v = np.var(x * math.cos(tp) + p * math.sin(tp), ddof=1)
            se = v * math.sqrt(2.0 / (n - 1))
            assert v >= 0.5 - 3 * se


class TestEstimateCovariance:
    def test_two_point_hand_computation(self):
        samples = [QuadratureSample(0.0, 0.0, 0), QuadratureSample(2.0, 0.0, 1)]
        est = estimate_covariance(samples)
        assert est.sxx == pytest.approx(2.0)
        assert est.spp == 0.0
        assert est.sxp == 0.0

    def test_needs_two_samples(self):
        with pytest.raises(InsufficientDataError):
            estimate_covariance([QuadratureSample(1.0, 2.0, 0)])

    def test_det_of_estimate_near_quarter(self):
        n = 1_000_000
        samples = sample_wigner(SqueezeParams(r=2.0, theta=0.0), (0.0, 0.0), n, SeedSpec(31))
        est = estimate_covariance(samples)
        assert est.det() == pytest.approx(0.25, rel=0.05)


class TestQuadratureCovariance:
    def test_positive_semidefinite_validation(self):
        from sqhhg.quadrature import _cholesky_2x2

        with pytest.raises(InvalidParameterError):
            _cholesky_2x2(QuadratureCovariance(sxx=1.0, spp=1.0, sxp=2.0))
