import math

import numpy as np
import pytest

from sysrisk.aggregation import ExpUtility, Loss, Sum, SumShift
from sysrisk.allocation import (
    AllocationMethod,
    AllocationReport,
    allocate,
    aumann_shapley_alt,
    aumann_shapley_chain,
    car_dual,
    car_dual_penalized,
    aumann_shapley,
    exp_utility_aumann_shapley,
    full_allocation_check,
    inject_optimal_allocation,
    scenario_allocation,
)
from sysrisk.composed import ComposedRiskMeasure
from sysrisk.errors import DimensionMismatchError, NotDifferentiableError, UnsupportedError
from sysrisk.inject import (
    ExponentialInjectCapital,
    InjectCapitalProblem,
    evaluate_closed_form,
    group_allocation,
    optimal_allocation,
)
from sysrisk.scenarios import GroupStructure, ScenarioSpace, SystemLoss
from sysrisk.single_firm import Entropic, MeanShift, theta_from_alphas
from sysrisk.tests import coin_flip_system, create_system


def ses(theta: float = 1.0, c: float = 0.0) -> ComposedRiskMeasure:
    return ComposedRiskMeasure(Entropic(theta), SumShift(c) if c else Sum())


def exp_utility(alphas) -> ComposedRiskMeasure:
    # calibrated so that rho(0) = 0
    return ComposedRiskMeasure(MeanShift(sum(1 / a for a in alphas)), ExpUtility(alphas))


class TestAllocationReport:
    def test_defaults(self):
        report = AllocationReport([1, 2], 3.5, "dual")
        assert report.per_firm == (1.0, 2.0)
        assert report.firms == ("firm_1", "firm_2")
        assert report.method is AllocationMethod.DUAL
        assert report.total == 3.0
        assert report.full_allocation_gap == pytest.approx(0.5)
        assert report.calibration_gap is None
        assert not full_allocation_check(report)
        assert repr(report) == "AllocationReport<dual, risk=3.5, gap=0.5>"

    def test_dict(self):
        report = AllocationReport((1.0, 2.0), 3.0, AllocationMethod.AS_ALT, ("a", "b"), system_allocation=4.0)
        d = report.dict()
        assert d["method"] == "as-alt"
        assert d["per_firm"] == {"a": 1.0, "b": 2.0}
        assert d["calibration_gap"] == pytest.approx(1.0)
        assert "group_sums" not in d
        assert "system_allocation" not in AllocationReport((1.0,), 1.0, "dual").dict()

    def test_firm_names(self):
        with pytest.raises(DimensionMismatchError, match="3 firm names for 2 shares"):
            AllocationReport((1.0, 2.0), 3.0, "dual", ("a", "b", "c"))

    def test_unknown_method(self):
        with pytest.raises(ValueError):
            AllocationReport((1.0,), 1.0, "shapley")


class TestDual:
    def test_gap_is_penalty(self):
        X = create_system(n=3, K=5, seed=2)
        rho = ses(0.8)
        sol = rho.dual_solution(X)
        report = car_dual(rho, X, sol)
        assert report.full_allocation_gap == pytest.approx(sol.penalty, abs=1e-9)
        assert report.firms == X.firms

    def test_linear_is_full(self):
        X = create_system(n=3, K=5)
        rho = ComposedRiskMeasure(MeanShift(0.0), Sum())
        report = allocate("dual", rho, X)
        np.testing.assert_allclose(report.per_firm, [X.row(i).expectation() for i in range(3)])
        assert full_allocation_check(report)

    @pytest.mark.parametrize("alphas", [(1.0, 1.0, 1.0), (0.5, 1.0, 4.0)])
    def test_penalized_is_full(self, alphas):
        X = create_system(n=3, K=6, seed=5)
        rho = ses(theta_from_alphas(alphas), 0.3)
        report = car_dual_penalized(rho, X, alphas)
        assert report.full_allocation_gap <= 1e-10
        assert report.method is AllocationMethod.DUAL_PENALIZED

    def test_penalized_deterministic(self):
        X = SystemLoss.deterministic([0.5, -1.0, 2.0], ScenarioSpace.uniform(4))
        report = car_dual_penalized(ses(1 / 3), X, (1.0, 1.0, 1.0))
        np.testing.assert_allclose(report.per_firm, [0.5, -1.0, 2.0], atol=1e-12)

    def test_penalized_size(self):
        with pytest.raises(DimensionMismatchError, match="2 risk aversions for 3 firms"):
            car_dual_penalized(ses(), create_system(n=3, K=2), (1.0, 1.0))

    def test_penalized_needs_alphas(self):
        with pytest.raises(UnsupportedError, match="risk aversions"):
            allocate("dual-penalized", ses(), coin_flip_system())

    def test_penalized_inject_uses_problem(self):
        p = InjectCapitalProblem((1.0, 2.0), 3.0)
        X = create_system(n=2, K=4, seed=1)
        report = allocate("dual-penalized", ExponentialInjectCapital(p), X)
        assert report.full_allocation_gap <= 1e-9


class TestScenarioAllocation:
    def test_sums_to_risk(self):
        alphas = (0.5, 1.0, 2.0)
        theta = theta_from_alphas(alphas)
        X = create_system(n=3, K=5, seed=3)
        Y = scenario_allocation(theta, 0.4, alphas, X)
        np.testing.assert_allclose(Y.total().values, ses(theta, 0.4).evaluate(X))

    def test_matches_inject(self):
        p = InjectCapitalProblem((0.5, 1.0, 2.0), 2.2)
        X = create_system(n=3, K=4, seed=7)
        Y = scenario_allocation(p.theta, p.log_theta_B / p.theta, p.alphas, X)
        np.testing.assert_allclose(Y.values, optimal_allocation(p, X).values, atol=1e-12)

    def test_theta_mismatch(self):
        with pytest.raises(ValueError, match="does not equal"):
            scenario_allocation(1.0, 0.0, (1.0, 1.0), coin_flip_system())


class TestAumannShapley:
    def test_entropic_sum_is_full(self):
        X = create_system(n=3, K=4, seed=4)
        rho = ses(0.7)
        report = allocate("aumann-shapley", rho, X)
        assert report.full_allocation_gap <= 1e-7
        assert report.calibration_gap <= 1e-7

    def test_deterministic_share(self):
        X = SystemLoss.deterministic([0.3, 1.2], ScenarioSpace.uniform(3))
        assert aumann_shapley(ses(2.0), X, X.isolate(0)) == pytest.approx(0.3, abs=1e-9)
        assert aumann_shapley(ses(2.0), X, X) == pytest.approx(1.5, abs=1e-9)

    def test_exp_utility_closed_form(self):
        alphas = (1.0, 2.0)
        X = create_system(n=2, K=3, seed=6, scale=0.5)
        report = allocate("as-chain", exp_utility(alphas), X)
        np.testing.assert_allclose(report.per_firm, exp_utility_aumann_shapley(alphas, X), atol=1e-8)
        assert report.full_allocation_gap <= 1e-7

    def test_exp_utility_constant(self):
        X = SystemLoss.deterministic([math.log(2.0)] * 2, ScenarioSpace.uniform(2))
        assert exp_utility_aumann_shapley((1.0, 1.0), X) == pytest.approx([1.0, 1.0])
        # small alpha goes through exprel without cancellation
        assert exp_utility_aumann_shapley((1e-12,), X.restrict([0])) == pytest.approx([math.log(2.0)])

    def test_generic_matches_chain(self):
        alphas = (1.0, 0.5)
        rho = exp_utility(alphas)
        X = create_system(n=2, K=4, seed=2, scale=0.5)
        Y = X.isolate(0)
        assert aumann_shapley_chain(rho.rho0, rho.rule, X, Y) == pytest.approx(
            allocate("aumann-shapley", rho, X).per_firm[0], abs=1e-8
        )

    @pytest.mark.parametrize("alphas", [(1.0, 2.0, 4.0), (0.5, 3.0), (1.0, 1.5, 2.0, 2.5, 3.0)])
    def test_alternative_gaps(self, alphas):
        n = len(alphas)
        B = sum(1 / a for a in alphas)
        X = create_system(n=n, K=4, seed=8, scale=0.5)
        report = allocate("as-alt", exp_utility(alphas), X)
        assert report.calibration_gap == pytest.approx(B, abs=1e-7)
        assert report.full_allocation_gap == pytest.approx(n * B, abs=1e-7)

    def test_kinked_rule(self):
        X = coin_flip_system()
        rho = ComposedRiskMeasure(Entropic(1.0), Loss())
        with pytest.raises(NotDifferentiableError):
            allocate("as-chain", rho, X)
        # only rho0 is differentiated along the alternative path
        assert np.isfinite(aumann_shapley_alt(rho.rho0, rho.rule, X, X.isolate(0)))

    def test_inject_matches_entropic_sum(self):
        alphas = (1.0, 2.0)
        p = InjectCapitalProblem(alphas, sum(1 / a for a in alphas))
        X = create_system(n=2, K=3, seed=9)
        inject = allocate("aumann-shapley", ExponentialInjectCapital(p), X)
        composed = allocate("aumann-shapley", ses(p.theta), X)
        np.testing.assert_allclose(inject.per_firm, composed.per_firm, atol=1e-9)

    @pytest.mark.parametrize("seed", range(50))
    def test_inject_matches_entropic_sum_random_pairs(self, seed):
        rng = np.random.default_rng(seed)
        n, K = int(rng.integers(1, 4)), int(rng.integers(2, 7))
        alphas = tuple(rng.uniform(0.5, 3.0, n))
        p = InjectCapitalProblem(alphas, sum(1 / a for a in alphas))
        X = create_system(n=n, K=K, seed=seed)
        Y = X.with_values(rng.normal(size=(n, K)))
        expected = aumann_shapley(ses(p.theta), X, Y)
        assert aumann_shapley(ExponentialInjectCapital(p), X, Y) == pytest.approx(expected, abs=1e-6)

    @pytest.mark.parametrize("method", ["as-chain", "as-alt"])
    def test_needs_composed_measure(self, method):
        R = ExponentialInjectCapital(InjectCapitalProblem((1.0, 1.0), 2.0))
        with pytest.raises(UnsupportedError, match="composed measure"):
            allocate(method, R, coin_flip_system())


class TestInjectOptimal:
    def test_report(self):
        p = InjectCapitalProblem((1.0, 0.5, 2.0), 2.0, GroupStructure((1, 3)))
        X = create_system(n=3, K=4, seed=10)
        report = inject_optimal_allocation(p, X)
        assert report.risk == pytest.approx(evaluate_closed_form(p, X))
        assert report.group_sums == pytest.approx(tuple(group_allocation(p, X)))
        assert report.scenario_allocation == optimal_allocation(p, X)
        assert full_allocation_check(report, tol=1e-9)

    def test_needs_inject_measure(self):
        with pytest.raises(UnsupportedError, match="inject-capital measure"):
            allocate("inject-optimal", ses(), coin_flip_system())

    def test_dispatch(self):
        p = InjectCapitalProblem((1.0, 1.0), 2.0)
        X = coin_flip_system()
        report = allocate(AllocationMethod.INJECT_OPTIMAL, ExponentialInjectCapital(p), X)
        assert report.method is AllocationMethod.INJECT_OPTIMAL
        assert report.dict()["group_sums"] == pytest.approx([evaluate_closed_form(p, X)])
