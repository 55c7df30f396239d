"""Decoration sampling, Laplace functionals and the shift-constant fit."""

import math

import numpy as np
import pytest

from brwlab import (
    EmpiricalCdf,
    PointSample,
    RampFunction,
    binary_gaussian,
    empirical_laplace,
    fit_shift_constant,
    gumbel_mixture_cdf,
    sample_decoration,
)
from brwlab.errors import (
    CoverageError,
    FitAmbiguityError,
    PartialResultError,
    UnsupportedConfigurationError,
)
from brwlab.laws import ReproductionLaw
from brwlab.pointproc import DecorationOrigin

TWO_OUTCOME = ReproductionLaw(
    "finite_atomic", atoms=((0.5, (0.0, 0.0)), (0.5, (1.0, 0.0))))


class TestPointSample:
    def test_non_increasing_enforced(self):
        with pytest.raises(ValueError):
            PointSample(points=np.array([0.0, 1.0]), origin=None)

    def test_decoration_anchor(self):
        origin = DecorationOrigin(n=4, threshold=1.0, depth_window=5.0, overshoot=0.1)
        PointSample(points=np.array([0.0, -1.0]), origin=origin)
        with pytest.raises(ValueError):
            PointSample(points=np.array([-0.5, -1.0]), origin=origin)


class TestRamp:
    def test_shape(self):
        phi = RampFunction(-1.0, 1.0, 2.0)
        assert phi(-2.0) == 0.0
        assert phi(0.0) == 1.0
        assert phi(5.0) == 2.0
        assert phi.support_left_bound == -1.0

    def test_validation(self):
        with pytest.raises(Exception):
            RampFunction(1.0, 1.0, 1.0)
        with pytest.raises(Exception):
            RampFunction(0.0, 1.0, -1.0)


class TestDecorationSampler:
    def test_two_outcome_exact(self):
        # theta=3 makes the threshold kappa'(3) ~ 0.87 sit between the two
        # outcome maxima, so conditioning selects the {1,0} brood surely
        dec = sample_decoration(TWO_OUTCOME, 3.0, 1, target_accepts=300,
                                master_seed=11, budget=5000)
        assert all(s.points.tolist() == [0.0, -1.0] for s in dec.samples)
        se = math.sqrt(0.25 / dec.trials)
        assert abs(dec.acceptance_rate - 0.5) <= 4 * se
        assert dec.rate_ci[0] <= dec.acceptance_rate <= dec.rate_ci[1]

    def test_max_atom_always_zero(self):
        th = math.sqrt(2 * math.log(2) / 1.22)
        dec = sample_decoration(binary_gaussian(1.44), th, 10, target_accepts=100,
                                master_seed=3, budget=50_000)
        assert all(s.points[0] == 0.0 for s in dec.samples)
        assert np.all(dec.overshoots >= 0)

    def test_gap_precondition(self):
        with pytest.raises(UnsupportedConfigurationError):
            sample_decoration(TWO_OUTCOME, 1.0, 4, target_accepts=10,
                              master_seed=0, budget=100)

    def test_budget_exhaustion_partial(self):
        with pytest.raises(PartialResultError) as exc:
            sample_decoration(binary_gaussian(1.44),
                              math.sqrt(2 * math.log(2) / 1.22), 14,
                              target_accepts=10**5, master_seed=5, budget=300)
        assert exc.value.accepted is not None
        assert 0.0 <= exc.value.acceptance_rate <= 1.0


class TestEmpiricalLaplace:
    def _samples(self):
        return sample_decoration(TWO_OUTCOME, 3.0, 1, target_accepts=200,
                                 master_seed=7, budget=4000).samples

    def test_hand_computed_value(self):
        # every sample is {0, -1}: phi(0) = 1, phi(-1) = 0.5 -> e^{-1.5} exactly
        est, se = empirical_laplace(self._samples(), RampFunction(-1.5, -0.5, 1.0))
        assert est == pytest.approx(math.exp(-1.5), abs=1e-12)
        assert se == pytest.approx(0.0, abs=1e-12)

    def test_support_above_all_points(self):
        est, _ = empirical_laplace(self._samples(), RampFunction(0.5, 1.0, 3.0))
        assert est == 1.0

    def test_indicator_limit(self):
        # capped tall ramp approximates the indicator of a point above b
        est, _ = empirical_laplace(self._samples(), RampFunction(-0.5, -0.2, 700.0))
        assert est == pytest.approx(0.0, abs=1e-200)

    def test_coverage_error(self):
        with pytest.raises(CoverageError):
            empirical_laplace(self._samples(), RampFunction(-99.0, 1.0, 1.0))

    def test_bounds_invariant(self):
        samples = self._samples()
        for phi in (RampFunction(-2.0, -1.0, 0.7), RampFunction(-1.0, 0.5, 3.0)):
            est, _ = empirical_laplace(samples, phi)
            max_pts = max(s.points.size for s in samples)
            # lower edge attained with equality here; allow a 1-ulp slack
            assert math.exp(-phi.c * max_pts) * (1 - 1e-12) <= est <= 1.0

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            empirical_laplace([], RampFunction(0.0, 1.0, 1.0))


class TestGumbelMixture:
    def test_zero_w_gives_one(self):
        assert gumbel_mixture_cdf(np.zeros(5), 1.0, 1.0, -3.0) == 1.0

    def test_single_point_value(self):
        got = gumbel_mixture_cdf(np.array([1.0]), 1.0, 1.0, 0.0)
        assert got == pytest.approx(math.exp(-1.0), abs=1e-14)

    def test_monotonicity_grids(self):
        w = np.random.default_rng(0).exponential(1.0, 50)
        ys = np.linspace(-5, 5, 41)
        vals = gumbel_mixture_cdf(w, 0.7, 1.3, ys)
        assert np.all(np.diff(vals) >= 0)
        lams = np.geomspace(0.01, 100, 30)
        at_y = np.array([gumbel_mixture_cdf(w, l, 1.3, 0.5) for l in lams])
        assert np.all(np.diff(at_y) <= 0)


class TestFit:
    def test_round_trip_known_lambda(self):
        # maxima generated from the pure Gumbel F(y) = exp(-0.7 e^{-y})
        rng = np.random.default_rng(1)
        u = rng.random(10**4)
        maxima = -np.log(-np.log(u) / 0.7)
        fit = fit_shift_constant(EmpiricalCdf(maxima), np.ones(500), 1.0,
                                 bootstrap_reps=50, seed=2)
        assert 0.63 <= fit.lambda_hat <= 0.77
        assert fit.bootstrap_ci[0] <= fit.lambda_hat <= fit.bootstrap_ci[1]

    def test_constant_w_location_algebra(self):
        # with w ~ c the mixture is a pure Gumbel located at ln(lambda c)/theta;
        # an independent median-based location estimate must match
        theta, c, lam0 = 1.4, 2.5, 0.9
        rng = np.random.default_rng(3)
        u = rng.random(2 * 10**4)
        maxima = -np.log(-np.log(u) / (lam0 * c)) / theta
        fit = fit_shift_constant(EmpiricalCdf(maxima), np.full(300, c), theta,
                                 bootstrap_reps=50, seed=4)
        med = float(np.median(maxima))
        mu_hat = med + math.log(math.log(2.0)) / theta
        lam_indep = math.exp(theta * mu_hat) / c
        assert fit.lambda_hat == pytest.approx(lam_indep, rel=0.1)
        assert fit.lambda_hat == pytest.approx(lam0, rel=0.1)

    def test_empty_w_rejected(self):
        with pytest.raises(ValueError):
            fit_shift_constant(EmpiricalCdf(np.arange(10.0)), np.array([]), 1.0)

    def test_boundary_profile_ambiguity(self):
        # maxima far outside any reachable mixture location push the profile
        # minimum to the scan boundary
        with pytest.raises(FitAmbiguityError):
            fit_shift_constant(EmpiricalCdf(np.linspace(1e5, 2e5, 200)),
                               np.ones(50), 1.0, bootstrap_reps=2)
