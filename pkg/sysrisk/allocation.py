"""
Systemic capital allocation rules.

Each rule splits the systemic risk ρ(X̄) into per-firm shares CS(e_i X_i; X̄).
Full allocation holds when the shares add up to ρ(X̄). It is reported,
never enforced.
"""

from __future__ import annotations

import dataclasses
import logging
from collections.abc import Sequence
from enum import Enum
from typing import Any

import numpy as np
from scipy.special import exprel

from sysrisk.aggregation import AggregationRule
from sysrisk.composed import ComposedRiskMeasure, DualSolution
from sysrisk.errors import DimensionMismatchError, UnsupportedError
from sysrisk.inject import (
    ExponentialInjectCapital,
    InjectCapitalProblem,
    evaluate_closed_form,
    group_allocation,
    optimal_allocation,
    systemic_capital_allocation_dual,
)
from sysrisk.numerics import QuadratureConfig, Side, directional_derivative_fd, integrate_unit_interval
from sysrisk.scenarios import SystemLoss, pairing
from sysrisk.single_firm import Entropic, SingleFirmRiskMeasure, theta_from_alphas
from sysrisk.types import DifferentiableRiskMeasure, SystemicRiskMeasure

logger = logging.getLogger(__name__)


class AllocationMethod(str, Enum):
    DUAL = "dual"
    DUAL_PENALIZED = "dual-penalized"
    AUMANN_SHAPLEY = "aumann-shapley"
    AS_CHAIN = "as-chain"
    AS_ALT = "as-alt"
    INJECT_OPTIMAL = "inject-optimal"


@dataclasses.dataclass(frozen=True)
class AllocationReport:
    """
    Per-firm capital shares together with the risk they allocate.

    Attributes
    ----------
    system_allocation
        CS(X̄; X̄) for rules defined on arbitrary sub-portfolios (Aumann-Shapley).
    scenario_allocation
        Scenario-dependent allocation Ȳ, when the rule produces one.
    group_sums
        Deterministic capital of each group, for inject-capital allocations.
    """

    per_firm: tuple[float, ...]
    risk: float
    method: AllocationMethod
    firms: tuple[str, ...] = ()
    system_allocation: float | None = None
    scenario_allocation: SystemLoss | None = None
    group_sums: tuple[float, ...] | None = None

    def __post_init__(self) -> None:
        per_firm = tuple(float(v) for v in self.per_firm)
        firms = tuple(self.firms) or tuple(f"firm_{i + 1}" for i in range(len(per_firm)))
        if len(firms) != len(per_firm):
            raise DimensionMismatchError(f"Got {len(firms)} firm names for {len(per_firm)} shares")
        object.__setattr__(self, "per_firm", per_firm)
        object.__setattr__(self, "firms", firms)
        object.__setattr__(self, "method", AllocationMethod(self.method))

    @property
    def total(self) -> float:
        return float(sum(self.per_firm))

    @property
    def full_allocation_gap(self) -> float:
        """
        |Σ per_firm − ρ(X̄)|.

        Zero for full allocations. The alternative Aumann-Shapley shares use
        Λ(e_i X_i), which still carries the constants of the other firms, so an
        ExpUtility rule with MeanShift(B) leaves a gap of n·B here while
        calibration_gap stays at B.
        """
        return abs(self.total - self.risk)

    @property
    def calibration_gap(self) -> float | None:
        """|CS(X̄; X̄) − ρ(X̄)|, when the system allocation is known."""
        if self.system_allocation is None:
            return None
        return abs(self.system_allocation - self.risk)

    def dict(self) -> dict[str, Any]:
        out: dict[str, Any] = {
            "method": self.method.value,
            "risk": self.risk,
            "per_firm": dict(zip(self.firms, self.per_firm)),
            "total": self.total,
            "full_allocation_gap": self.full_allocation_gap,
        }
        if self.system_allocation is not None:
            out["system_allocation"] = self.system_allocation
            out["calibration_gap"] = self.calibration_gap
        if self.group_sums is not None:
            out["group_sums"] = list(self.group_sums)
        return out

    def __repr__(self) -> str:
        return f"AllocationReport<{self.method.value}, risk={self.risk:.6g}, gap={self.full_allocation_gap:.3g}>"


def car_dual(rho: SystemicRiskMeasure, X: SystemLoss, sol: DualSolution) -> AllocationReport:
    """CS(e_i X_i; X̄) = ⟨X_i, Ξ_i⟩."""
    if sol.n != X.n:
        raise DimensionMismatchError(f"Dual solution has {sol.n} densities, system has {X.n} firms")
    shares = [pairing(X.row(i), sol.Xi[i]) for i in range(X.n)]
    return AllocationReport(shares, rho.evaluate(X), AllocationMethod.DUAL, X.firms)


def car_dual_penalized(rho: Any, X: SystemLoss, alphas: Sequence[float]) -> AllocationReport:
    """
    ⟨X_i, Ξ_i⟩ − γ_i α(ξ, Ξ) with γ_i = θ/α_i, θ = 1/Σ(1/α_j).

    The weights γ_i sum to one, so the penalty is apportioned in full.
    """
    alphas = np.asarray(list(alphas), dtype=np.float64)
    if alphas.size != X.n:
        raise DimensionMismatchError(f"Got {alphas.size} risk aversions for {X.n} firms")
    gammas = theta_from_alphas(alphas) / alphas
    sol = rho.dual_solution(X)
    shares = [pairing(X.row(i), sol.Xi[i]) - gammas[i] * sol.penalty for i in range(X.n)]
    return AllocationReport(shares, rho.evaluate(X), AllocationMethod.DUAL_PENALIZED, X.firms)


def scenario_allocation(theta: float, c: float, alphas: Sequence[float], X: SystemLoss) -> SystemLoss:
    """
    Scenario-dependent allocation for ρ^{ses,c}, with S = Σ X_k:

        Y_i = X_i − (θ/α_i) S + (1/α_i) ln E[exp(θS)] − (θ/α_i) c,

    whose scenario-wise sum is ρ^{ses}(X̄) − c. For c = ln(θB)/θ this is the
    optimal inject-capital allocation.
    """
    alphas = np.asarray(list(alphas), dtype=np.float64)
    if alphas.size != X.n:
        raise DimensionMismatchError(f"Got {alphas.size} risk aversions for {X.n} firms")
    if not np.isclose(theta, theta_from_alphas(alphas), rtol=1e-12, atol=0.0):
        raise ValueError(
            f"theta={theta} does not equal 1/sum(1/alpha) = {theta_from_alphas(alphas)}"
        )
    S = X.total()
    log_mgf = theta * Entropic(theta).evaluate(S)
    shift = (-theta * S.values[None, :] + log_mgf - theta * c) / alphas[:, None]
    return X.with_values(X.values + shift)


def aumann_shapley(
    rho: DifferentiableRiskMeasure, X: SystemLoss, Y: SystemLoss, cfg: QuadratureConfig | None = None
) -> float:
    """
    CS^AS(Ȳ; X̄) = ∫_0^1 δρ(γX̄, Ȳ) dγ.

    Raises
    ------
    NotDifferentiableError
        If ρ has a kink somewhere on the path γX̄.
    NoConvergenceError
        If the quadrature does not settle.
    """
    return integrate_unit_interval(
        lambda g: rho.directional_derivative(X * g, Y, Side.TWO_SIDED), cfg
    )


def aumann_shapley_chain(
    rho0: SingleFirmRiskMeasure,
    rule: AggregationRule,
    X: SystemLoss,
    Y: SystemLoss,
    cfg: QuadratureConfig | None = None,
) -> float:
    """CS^AS(Ȳ; X̄) = ∫_0^1 ⟨δΛ(γX̄, Ȳ), ∇ρ0(Λ(γX̄))⟩ dγ."""

    def integrand(g: float) -> float:
        path = X * g
        xi = rho0.gradient_density(rule.aggregate_random(path))
        return pairing(rule.gateaux_aggregate(path, Y, Side.TWO_SIDED), xi)

    return integrate_unit_interval(integrand, cfg)


def aumann_shapley_alt(
    rho0: SingleFirmRiskMeasure,
    rule: AggregationRule,
    X: SystemLoss,
    Y: SystemLoss,
    cfg: QuadratureConfig | None = None,
) -> float:
    """
    CS̄^AS(Ȳ; X̄) = ∫_0^1 δρ0(γΛ(X̄), Λ(Ȳ)) dγ.

    Only the single-firm measure is differentiated, so kinked rules are fine.
    """
    LX = rule.aggregate_random(X)
    LY = rule.aggregate_random(Y)

    def integrand(g: float) -> float:
        if rho0.has_gradient:
            return pairing(LY, rho0.gradient_density(LX * g))
        return float(directional_derivative_fd(rho0.evaluate, LX * g, LY))

    return integrate_unit_interval(integrand, cfg)


def exp_utility_aumann_shapley(alphas: Sequence[float], X: SystemLoss) -> list[float]:
    """
    Closed-form Aumann-Shapley shares E[(exp(α_i X_i) − 1)/α_i] for the
    exponential utility rule under ρ0 = E[·] − B.
    """
    alphas = np.asarray(list(alphas), dtype=np.float64)
    if alphas.size != X.n:
        raise DimensionMismatchError(f"Got {alphas.size} risk aversions for {X.n} firms")
    values = X.values * exprel(alphas[:, None] * X.values)
    return [float(X.space.probabilities @ row) for row in values]


def inject_optimal_allocation(p: InjectCapitalProblem, X: SystemLoss) -> AllocationReport:
    """Dual-valued shares ⟨Y_i, Ξ_i⟩ of the optimal inject-capital allocation."""
    return AllocationReport(
        systemic_capital_allocation_dual(p, X),
        evaluate_closed_form(p, X),
        AllocationMethod.INJECT_OPTIMAL,
        X.firms,
        scenario_allocation=optimal_allocation(p, X),
        group_sums=tuple(group_allocation(p, X)),
    )


def _composed(rho: Any, method: AllocationMethod) -> ComposedRiskMeasure:
    if not isinstance(rho, ComposedRiskMeasure):
        raise UnsupportedError(f"Method {method.value!r} needs a composed measure rho0 o Lambda")
    return rho


def allocate(
    method: AllocationMethod | str,
    rho: Any,
    X: SystemLoss,
    *,
    alphas: Sequence[float] | None = None,
    cfg: QuadratureConfig | None = None,
) -> AllocationReport:
    """
    Allocate ρ(X̄) with the given method.

    Aumann-Shapley reports also carry the system allocation CS(X̄; X̄).

    Raises
    ------
    UnsupportedError
        If the method is not defined for this kind of measure.
    """
    method = AllocationMethod(method)
    logger.info("allocating with %s", method.value)

    if method is AllocationMethod.DUAL:
        return car_dual(rho, X, rho.dual_solution(X))

    if method is AllocationMethod.DUAL_PENALIZED:
        if alphas is None:
            if not isinstance(rho, ExponentialInjectCapital):
                raise UnsupportedError("Method 'dual-penalized' needs the firms' risk aversions")
            alphas = rho.problem.alphas
        return car_dual_penalized(rho, X, alphas)

    if method is AllocationMethod.INJECT_OPTIMAL:
        if not isinstance(rho, ExponentialInjectCapital):
            raise UnsupportedError("Method 'inject-optimal' needs an inject-capital measure")
        return inject_optimal_allocation(rho.problem, X)

    if method is AllocationMethod.AUMANN_SHAPLEY:

        def share(Y: SystemLoss) -> float:
            return aumann_shapley(rho, X, Y, cfg)

    elif method is AllocationMethod.AS_CHAIN:
        composed = _composed(rho, method)

        def share(Y: SystemLoss) -> float:
            return aumann_shapley_chain(composed.rho0, composed.rule, X, Y, cfg)

    else:
        composed = _composed(rho, method)

        def share(Y: SystemLoss) -> float:
            return aumann_shapley_alt(composed.rho0, composed.rule, X, Y, cfg)

    shares = [share(X.isolate(i)) for i in range(X.n)]
    return AllocationReport(
        shares, rho.evaluate(X), method, X.firms, system_allocation=share(X)
    )


def full_allocation_check(report: AllocationReport, tol: float = 1e-6) -> bool:
    """Whether the shares add up to the allocated risk within ``tol``."""
    return report.full_allocation_gap <= tol
