"""Reproduction-law transforms, samplers and assumption checks.

Expected values are computed by independent oracles inside each test (closed
forms, direct finite sums, finite differences, plain-measure reweighting),
never by the code path under test.
"""

import math

import numpy as np
import pytest

from brwlab import (
    Gaussian,
    Laplace,
    PointMasses,
    ReproductionLaw,
    binary_gaussian,
    check_assumptions,
    kappa,
    kappa_derivatives,
    rademacher_pair,
    sample_offspring,
    sample_size_biased_offspring,
    sample_tilted_step,
    single_child_at,
)
from brwlab.errors import DegenerateLawError, LawValidationError, TiltDomainError
from brwlab.laws import tilted_steps


class TestKappa:
    def test_binary_gaussian_closed_form(self):
        # oracle: log 2 + theta^2/2 for standard Gaussian displacements
        assert kappa(binary_gaussian(), 1.0) == pytest.approx(math.log(2) + 0.5, abs=1e-14)

    def test_identity_law_is_zero(self):
        law = single_child_at(0.0)
        for theta in (-3.0, 0.1, 1.0, 7.5):
            assert kappa(law, theta) == 0.0

    def test_rademacher_two_term_sum(self):
        # oracle: direct two-term sum log(e + 1/e)
        want = math.log(math.exp(1.0) + math.exp(-1.0))
        assert kappa(rademacher_pair(), 1.0) == pytest.approx(want, abs=1e-14)

    def test_infinite_outside_laplace_interval(self):
        law = ReproductionLaw("deterministic", 2, Laplace())
        assert kappa(law, 1.0) == math.inf
        assert kappa(law, -1.2) == math.inf
        assert math.isfinite(kappa(law, 0.999))

    def test_negative_theta_permitted(self):
        assert kappa(binary_gaussian(), -2.0) == pytest.approx(math.log(2) + 2.0, abs=1e-12)

    def test_poisson_count_formula(self):
        # oracle: log(lam) + log E e^{theta D}
        law = ReproductionLaw("poisson", 3.5, Gaussian(0.2, 2.0))
        theta = 0.7
        want = math.log(3.5) + 0.2 * theta + 2.0 * theta**2 / 2
        assert kappa(law, theta) == pytest.approx(want, abs=1e-12)


class TestKappaDerivatives:
    def test_binary_gaussian_theta2(self):
        tp = kappa_derivatives(binary_gaussian(), 2.0)
        assert tp.kappa_prime == pytest.approx(2.0, abs=1e-14)
        assert tp.kappa_double_prime == pytest.approx(1.0, abs=1e-14)

    def test_degenerate_law_rejected(self):
        with pytest.raises(DegenerateLawError):
            kappa_derivatives(single_child_at(0.0), 1.0)

    def test_rademacher_tanh(self):
        # oracle: (e - 1/e) / (e + 1/e)
        e, em = math.exp(1.0), math.exp(-1.0)
        tp = kappa_derivatives(rademacher_pair(), 1.0)
        assert tp.kappa_prime == pytest.approx((e - em) / (e + em), abs=1e-14)

    def test_domain_error(self):
        with pytest.raises(TiltDomainError):
            kappa_derivatives(ReproductionLaw("deterministic", 2, Laplace()), 1.5)

    def test_gaussian_fixed_count_exact_form(self):
        # the type invariant: kappa = log k + mu*theta + sigma^2 theta^2/2 exactly
        law = ReproductionLaw("deterministic", 5, Gaussian(0.3, 2.5))
        theta = 1.3
        tp = kappa_derivatives(law, theta)
        assert tp.kappa == pytest.approx(math.log(5) + 0.3 * theta + 2.5 * theta**2 / 2,
                                         abs=1e-13)

    @pytest.mark.parametrize("law,lo,hi", [
        (binary_gaussian(), -3.0, 3.0),
        (ReproductionLaw("deterministic", 3, Gaussian(0.5, 2.0)), -2.0, 2.5),
        (ReproductionLaw("deterministic", 2, Laplace()), -0.9, 0.9),
        (ReproductionLaw("poisson", 2.5, Gaussian(0.0, 1.0)), -2.0, 2.0),
        (rademacher_pair(), -3.0, 3.0),
        (ReproductionLaw("finite_atomic",
                         atoms=((0.3, (0.5, -1.2)), (0.7, (2.0, 0.1, -0.4)))), -2.0, 2.0),
        (ReproductionLaw("deterministic", 2,
                         PointMasses((0.0, 1.0, -2.3), (0.5, 0.3, 0.2))), -2.0, 2.0),
    ])
    def test_finite_difference_oracle(self, law, lo, hi):
        # central differences of kappa reproduce the tilted moments
        rng = np.random.default_rng(12)
        h = 1e-5
        for theta in rng.uniform(lo + 10 * h, hi - 10 * h, 50):
            tp = kappa_derivatives(law, theta)
            d1 = (kappa(law, theta + h) - kappa(law, theta - h)) / (2 * h)
            d2 = (kappa(law, theta + h) - 2 * kappa(law, theta) + kappa(law, theta - h)) / h**2
            assert d1 == pytest.approx(tp.kappa_prime, rel=1e-6, abs=1e-8)
            assert d2 == pytest.approx(tp.kappa_double_prime, rel=1e-4, abs=1e-5)


class TestScaling:
    def test_kappa_scaling_covariance(self):
        for law in (binary_gaussian(0.7), rademacher_pair(),
                    ReproductionLaw("deterministic", 3,
                                    PointMasses((1.0, -0.5), (0.4, 0.6)))):
            for c in (0.5, 2.0, 3.7):
                scaled = law.scaled(c)
                for theta in (0.3, 1.1):
                    assert kappa(scaled, theta) == pytest.approx(
                        kappa(law, c * theta), rel=1e-12)


class TestSampleOffspring:
    def test_single_child_at_zero(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert sample_offspring(single_child_at(0.0), rng).tolist() == [0.0]

    def test_rademacher_sorted_pair(self):
        rng = np.random.default_rng(0)
        for _ in range(20):
            assert sample_offspring(rademacher_pair(), rng).tolist() == [1.0, -1.0]

    def test_binary_gaussian_lln(self):
        rng = np.random.default_rng(5)
        n = 10**5
        counts = np.empty(n)
        means = np.empty(n)
        for i in range(n):
            brood = sample_offspring(binary_gaussian(), rng)
            counts[i] = brood.size
            means[i] = brood.mean()
        assert np.all(counts == 2)
        # displacement mean -> 0 within 4 standard errors (var 1/2 per brood mean)
        se = math.sqrt(0.5 / n)
        assert abs(means.mean()) <= 4 * se

    @pytest.mark.parametrize("law", [
        binary_gaussian(),
        ReproductionLaw("poisson", 2.3, Gaussian(0.0, 1.0)),
        ReproductionLaw("deterministic", 4, Laplace()),
        ReproductionLaw("finite_atomic", atoms=((0.5, (1.0, 1.0, -2.0)), (0.5, (0.0,)))),
    ])
    def test_sortedness_postcondition(self, law):
        rng = np.random.default_rng(9)
        for _ in range(200):
            brood = sample_offspring(law, rng)
            assert np.all(np.diff(brood) <= 0)

    @pytest.mark.parametrize("law,theta", [
        (binary_gaussian(), 0.8),
        (ReproductionLaw("poisson", 2.3, Gaussian(0.1, 1.5)), 0.6),
        (ReproductionLaw("deterministic", 3, Laplace()), 0.5),
        (rademacher_pair(), 1.0),
    ])
    def test_unit_mean_weight_identity(self, law, theta):
        # E sum exp(theta*l - kappa) = 1 for every offspring law
        rng = np.random.default_rng(17)
        k = kappa(law, theta)
        n = 10**5
        w = np.empty(n)
        for i in range(n):
            brood = sample_offspring(law, rng)
            w[i] = np.sum(np.exp(theta * brood - k)) if brood.size else 0.0
        se = w.std(ddof=1) / math.sqrt(n)
        assert abs(w.mean() - 1.0) <= 4 * se


class TestSizeBiased:
    def test_identity_law_unchanged(self):
        rng = np.random.default_rng(1)
        for _ in range(10):
            assert sample_size_biased_offspring(single_child_at(0.0), 2.0, rng).tolist() == [0.0]

    def test_two_outcome_reweighting(self):
        # oracle: brute force over outcomes, weights 1/2*1 vs 1/2*4 at theta=ln 2
        law = ReproductionLaw("finite_atomic", atoms=((0.5, (0.0,)), (0.5, (1.0, 1.0))))
        rng = np.random.default_rng(2)
        theta = math.log(2.0)
        n = 10**5
        hits = sum(
            sample_size_biased_offspring(law, theta, rng).size == 2 for _ in range(n)
        )
        p = 4.0 / 5.0
        se = math.sqrt(p * (1 - p) / n)
        assert abs(hits / n - p) <= 4 * se

    def test_importance_reweighting_oracle(self):
        # E_biased[sum e^{theta l - kappa}] must equal E_plain[(sum e^{theta l - kappa})^2]
        law, theta = binary_gaussian(), 1.0
        k = kappa(law, theta)
        rng = np.random.default_rng(3)
        n = 10**5
        biased = np.empty(n)
        plain_sq = np.empty(n)
        for i in range(n):
            b = sample_size_biased_offspring(law, theta, rng)
            biased[i] = np.sum(np.exp(theta * b - k))
            p = sample_offspring(law, rng)
            plain_sq[i] = np.sum(np.exp(theta * p - k)) ** 2
        se = math.sqrt(biased.var(ddof=1) / n + plain_sq.var(ddof=1) / n)
        assert abs(biased.mean() - plain_sq.mean()) <= 4 * se

    def test_poisson_biased_has_extra_point(self):
        # Poisson biased brood = plain brood plus one tilted point: never empty
        law = ReproductionLaw("poisson", 0.4, Gaussian(0.0, 1.0))
        rng = np.random.default_rng(4)
        sizes = [sample_size_biased_offspring(law, 0.5, rng).size for _ in range(2000)]
        assert min(sizes) >= 1
        # and its mean count is lam + 1
        assert np.mean(sizes) == pytest.approx(1.4, abs=4 * 0.7 / math.sqrt(2000))

    def test_domain_error(self):
        with pytest.raises(TiltDomainError):
            sample_size_biased_offspring(
                ReproductionLaw("deterministic", 2, Laplace()), 1.2,
                np.random.default_rng(0))


class TestTiltedStep:
    def test_gaussian_tilt_closed_form(self):
        # exponential tilt of N(0,1) is N(theta, 1), regardless of count family
        rng = np.random.default_rng(6)
        steps = tilted_steps(binary_gaussian(), 1.0, rng, 10**5)
        tp = kappa_derivatives(binary_gaussian(), 1.0)
        se_m = math.sqrt(tp.kappa_double_prime / steps.size)
        assert abs(steps.mean() - tp.kappa_prime) <= 4 * se_m
        se_v = math.sqrt(2.0 / steps.size)  # var of sample variance of N(.,1)
        assert abs(steps.var(ddof=1) - tp.kappa_double_prime) <= 4 * se_v

    def test_identity_law(self):
        rng = np.random.default_rng(7)
        assert sample_tilted_step(single_child_at(0.0), 3.0, rng) == 0.0

    def test_rademacher_two_outcome_tilt(self):
        # oracle: P(+1) = e/(e + 1/e)
        rng = np.random.default_rng(8)
        n = 10**5
        steps = tilted_steps(rademacher_pair(), 1.0, rng, n)
        p = math.e / (math.e + math.exp(-1.0))
        se = math.sqrt(p * (1 - p) / n)
        assert abs(np.mean(steps == 1.0) - p) <= 4 * se

    def test_laplace_tilted_moments(self):
        law = ReproductionLaw("deterministic", 2, Laplace())
        theta = 0.4
        rng = np.random.default_rng(9)
        steps = tilted_steps(law, theta, rng, 10**5)
        tp = kappa_derivatives(law, theta)
        se = math.sqrt(tp.kappa_double_prime / steps.size)
        assert abs(steps.mean() - tp.kappa_prime) <= 4 * se


class TestCheckAssumptions:
    def test_binary_gaussian_all_hold(self):
        rep = check_assumptions(binary_gaussian(), 1.0)
        for name in ("as1", "as3", "as4"):
            assert rep.status(name) == "holds-analytically"
        assert rep.holds("survival")
        assert rep.holds("as6")

    def test_rademacher_lattice_violated(self):
        rep = check_assumptions(rademacher_pair(), 1.0)
        assert rep.status("as4") == "violated"
        assert rep.status("as6") == "violated"  # no critical tilt either

    def test_identity_law_degenerate(self):
        rep = check_assumptions(single_child_at(0.0), 1.0)
        assert rep.status("as1") == "violated"
        assert rep.status("survival") == "violated"

    def test_poisson_survival_violated(self):
        rep = check_assumptions(ReproductionLaw("poisson", 2.0, Gaussian()), 0.5)
        assert rep.status("survival") == "violated"
        assert rep.holds("as4")

    def test_non_lattice_atoms(self):
        law = ReproductionLaw("finite_atomic",
                              atoms=((0.5, (0.0, 1.0)), (0.5, (math.sqrt(2.0),))))
        assert check_assumptions(law, 1.0).status("as4") == "holds-numerically"

    def test_point_mass_lattice(self):
        law = ReproductionLaw("deterministic", 2,
                              PointMasses((0.5, 2.5, -1.5), (0.3, 0.3, 0.4)))
        assert check_assumptions(law, 0.5).status("as4") == "violated"


class TestValidation:
    def test_probs_must_sum_to_one(self):
        with pytest.raises(LawValidationError):
            ReproductionLaw("finite_atomic", atoms=((0.6, (1.0,)), (0.5, (0.0,))))

    def test_empty_atom_group_rejected(self):
        with pytest.raises(LawValidationError):
            ReproductionLaw("finite_atomic", atoms=((1.0, ()),))

    def test_bad_counts(self):
        with pytest.raises(LawValidationError):
            ReproductionLaw("deterministic", 0, Gaussian())
        with pytest.raises(LawValidationError):
            ReproductionLaw("poisson", -1.0, Gaussian())
        with pytest.raises(LawValidationError):
            ReproductionLaw("deterministic", 2.5, Gaussian())

    def test_gaussian_variance_positive(self):
        with pytest.raises(LawValidationError):
            Gaussian(0.0, 0.0)

    def test_atom_tie_order_preserved(self):
        # equal atoms keep their given order (stable sort)
        law = ReproductionLaw("finite_atomic", atoms=((1.0, (1.0, 2.0, 1.0)),))
        assert law.atoms[0][1] == (2.0, 1.0, 1.0)
