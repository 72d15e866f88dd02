import numpy as np
import pytest

from sysrisk.errors import NoBracketError, UnsupportedError
from sysrisk.losses import ExponentialLoss, QuadraticExponentialLoss
from sysrisk.numerics import directional_derivative_fd
from sysrisk.scenarios import RandomVariable, ScenarioSpace
from sysrisk.single_firm import (
    AcceptanceSet,
    Entropic,
    MeanShift,
    ShortfallAcceptance,
    check_single_firm_axioms,
    theta_from_alphas,
)

HALF = ScenarioSpace.uniform(2)


def random_loss(seed: int, K: int = 5) -> RandomVariable:
    rng = np.random.default_rng(seed)
    return RandomVariable(rng.normal(0.0, 1.5, K), ScenarioSpace(rng.dirichlet(np.ones(K))))


class TestEntropic:
    def test_constant(self):
        assert Entropic(0.7).evaluate(RandomVariable.constant(3.2, HALF)) == pytest.approx(3.2)

    def test_value(self):
        X = RandomVariable([0.0, np.log(3.0)], HALF)
        assert Entropic(1.0).evaluate(X) == pytest.approx(np.log(2.0))

    def test_large_losses_do_not_overflow(self):
        X = RandomVariable([1000.0, 1000.0], HALF)
        assert Entropic(2.0).evaluate(X) == pytest.approx(1000.0)

    def test_translation(self):
        X = random_loss(0)
        assert Entropic(1.3).evaluate(X + 2.5) == pytest.approx(Entropic(1.3).evaluate(X) + 2.5, abs=1e-10)

    def test_increasing_in_theta(self):
        X = random_loss(1)
        values = [Entropic(theta).evaluate(X) for theta in (0.1, 0.5, 1.0, 2.0, 5.0)]
        assert np.all(np.diff(values) > 0)
        # tends to the mean for small risk aversion
        assert Entropic(1e-8).evaluate(X) == pytest.approx(X.expectation(), abs=1e-6)

    def test_gradient_density(self):
        X = RandomVariable([0.0, np.log(3.0)], HALF)
        np.testing.assert_allclose(Entropic(1.0).gradient_density(X).values, [0.5, 1.5])
        np.testing.assert_allclose(Entropic(1.0).gradient_density(RandomVariable.constant(4.0, HALF)).values, 1.0)

    def test_gradient_matches_finite_differences(self):
        rho0 = Entropic(0.8)
        X = random_loss(2)
        xi = rho0.gradient_density(X)
        rng = np.random.default_rng(3)
        for _ in range(20):
            V = RandomVariable(rng.normal(size=X.space.K), X.space)
            fd = directional_derivative_fd(rho0.evaluate, X, V)
            assert float(V.space.probabilities @ (V.values * xi.values)) == pytest.approx(float(fd), abs=1e-5)

    def test_invalid_theta(self):
        with pytest.raises(ValueError, match="positive"):
            Entropic(0.0)


class TestMeanShift:
    def test_value(self):
        assert MeanShift(1.0).evaluate(RandomVariable([2.0, 4.0], HALF)) == pytest.approx(2.0)

    def test_gradient(self):
        np.testing.assert_array_equal(MeanShift(3.0).gradient_density(random_loss(0)).values, 1.0)

    def test_properties(self):
        assert MeanShift(0.0).positively_homogeneous
        assert MeanShift(0.0).constant_on_range
        assert not MeanShift(1.0).constant_on_range
        assert MeanShift(0.0).expected_axioms() == {"R1", "R2", "R3", "R4", "R5", "R6"}


class TestAcceptanceSet:
    def test_matches_entropic(self):
        # E[exp(θ(X − m))]/θ ≤ B  ⇔  m ≥ ρ_entr(X) − ln(θB)/θ
        theta, B = 1.5, 2.0
        rho0 = AcceptanceSet(ShortfallAcceptance(ExponentialLoss(theta), B))
        X = random_loss(4)
        expected = Entropic(theta).evaluate(X) - np.log(theta * B) / theta
        assert rho0.evaluate(X) == pytest.approx(expected, abs=1e-9)

    def test_other_loss(self):
        rho0 = AcceptanceSet(ShortfallAcceptance(QuadraticExponentialLoss(1.0), 1.0))
        X = random_loss(5)
        m = rho0.evaluate(X)
        shortfall = X - m
        accepted = X.space.probabilities @ QuadraticExponentialLoss(1.0)(shortfall.values)
        assert accepted == pytest.approx(1.0, abs=1e-9)

    def test_no_gradient(self):
        rho0 = AcceptanceSet(lambda Z: Z.expectation() <= 0.0)
        assert not rho0.has_gradient
        with pytest.raises(UnsupportedError, match="no closed-form gradient"):
            rho0.gradient_density(random_loss(0))

    def test_mean_acceptance(self):
        rho0 = AcceptanceSet(lambda Z: Z.expectation() <= 0.0, description="mean")
        X = random_loss(6)
        assert rho0.evaluate(X) == pytest.approx(X.expectation(), abs=1e-10)
        assert rho0.describe() == "mean"

    def test_never_acceptable(self):
        with pytest.raises(NoBracketError):
            AcceptanceSet(lambda Z: False).evaluate(RandomVariable.constant(0.0, HALF))

    def test_not_monotone(self):
        # acceptable for m in [0, 0.5] and again from m = 10 on
        def predicate(Z):
            m = -Z.expectation()
            return 0.0 <= m <= 0.5 or m >= 10.0

        with pytest.raises(ValueError, match="not monotone"):
            AcceptanceSet(predicate).evaluate(RandomVariable.constant(0.0, HALF))

    def test_nonconvex_flag(self):
        rho0 = AcceptanceSet(lambda Z: Z.expectation() <= 0.0, is_convex=False)
        assert "R2" not in rho0.expected_axioms()


@pytest.mark.parametrize(
    "alphas, expected",
    [((1.0, 1.0), 0.5), ((2.0,), 2.0), ((1.0, 2.0, 3.0), 6 / 11)],
)
def test_theta_from_alphas(alphas, expected):
    assert theta_from_alphas(alphas) == pytest.approx(expected)


def test_theta_from_alphas_invalid():
    with pytest.raises(ValueError, match="positive"):
        theta_from_alphas([1.0, 0.0])


class TestAxioms:
    def test_entropic(self):
        report = check_single_firm_axioms(Entropic(1.0))
        assert report.passed({"R1", "R2", "R4", "R6"})
        assert not report["R3"].passed
        assert report["R3"].counterexample is not None
        assert report.passed(Entropic(1.0).expected_axioms())

    def test_mean_shift_zero(self):
        assert check_single_firm_axioms(MeanShift(0.0)).passed()

    def test_mean_shift_constancy_fails(self):
        report = check_single_firm_axioms(MeanShift(1.0), samples=50)
        assert not report["R6"].passed
        assert report.passed(MeanShift(1.0).expected_axioms())

    def test_constancy_set(self):
        report = check_single_firm_axioms(MeanShift(1.0), samples=10, constancy_set=[])
        assert report["R6"].passed
        assert report["R6"].checked == 0

    def test_acceptance(self):
        rho0 = AcceptanceSet(ShortfallAcceptance(ExponentialLoss(1.0), 1.0))
        report = check_single_firm_axioms(rho0, samples=30, tol=1e-8)
        assert report.passed(rho0.expected_axioms())
