"""
"First aggregate" systemic risk measures ρ = ρ0 ∘ Λ.

Evaluation, the primal (epigraph) representation, closed-form dual solutions
with weak/strong duality checks, directional derivatives and the randomized
systemic axiom suite.
"""

from __future__ import annotations

import dataclasses
import logging
from typing import Any, NamedTuple

import numpy as np

from sysrisk.aggregation import KINK_TOLERANCE, AggregationRule, Codomain, Sum, SumShift
from sysrisk.checks import AxiomReport, Tally, range_evidence, scaled
from sysrisk.errors import (
    DimensionMismatchError,
    NoBracketError,
    NotDifferentiableError,
    UnsupportedError,
)
from sysrisk.numerics import Side, bisect_root, directional_derivative_fd
from sysrisk.scenarios import (
    DENSITY_TOLERANCE,
    Density,
    RandomVariable,
    ScenarioSpace,
    SystemLoss,
    _check_same_space,
    pairing,
    relative_entropy,
    system_pairing,
)
from sysrisk.single_firm import Entropic, MeanShift, SingleFirmRiskMeasure
from sysrisk.types import SystemicRiskMeasure

logger = logging.getLogger(__name__)

DIAGONAL_BRACKET = (-50.0, 50.0)


@dataclasses.dataclass(frozen=True)
class DualSolution:
    """
    A candidate (ξ, Ξ) for the dual representation, with its penalty.

    The penalty is split into the part charged by ρ0 and the part charged by Λ.
    Candidates need not be feasible; :func:`verify_dual_feasibility` flags
    those that are not.
    """

    xi: RandomVariable
    Xi: tuple[RandomVariable, ...]
    rho0_penalty: float = 0.0
    rule_penalty: float = 0.0

    def __post_init__(self) -> None:
        Xi = tuple(self.Xi)
        if not Xi:
            raise DimensionMismatchError("A dual solution needs at least one firm density")
        for density in Xi:
            _check_same_space(self.xi.space, density.space)
        if not (np.isfinite(self.rho0_penalty) and np.isfinite(self.rule_penalty)):
            raise ValueError(
                f"Dual penalty must be finite, but got {self.rho0_penalty!r} + {self.rule_penalty!r}"
            )
        object.__setattr__(self, "Xi", Xi)

    @property
    def n(self) -> int:
        return len(self.Xi)

    @property
    def penalty(self) -> float:
        return self.rho0_penalty + self.rule_penalty

    def __repr__(self) -> str:
        return f"DualSolution<n={self.n}, K={self.xi.space.K}, penalty={self.penalty:.6g}>"


@dataclasses.dataclass(frozen=True)
class ComposedRiskMeasure:
    """The systemic risk measure ρ(X̄) = ρ0(Λ(X̄))."""

    rho0: SingleFirmRiskMeasure
    rule: AggregationRule

    @property
    def n(self) -> int | None:
        return self.rule.n

    @property
    def codomain(self) -> Codomain:
        return self.rule.codomain

    @property
    def positively_homogeneous(self) -> bool:
        return self.rho0.positively_homogeneous and self.rule.positively_homogeneous

    def evaluate(self, X: SystemLoss) -> float:
        return self.rho0.evaluate(self.rule.aggregate_random(X))

    def evaluate_point(self, x) -> float:
        """ρ of a deterministic loss vector."""
        return self.rho0.evaluate_constant(self.rule.aggregate_point(x))

    def directional_derivative(
        self, X: SystemLoss, V: SystemLoss, side: Side | str = Side.RIGHT
    ) -> float:
        """
        δρ(X̄, V̄), the right (or two-sided) Gâteaux derivative.

        When ρ0 has a gradient density the chain rule gives
        ⟨δΛ(X̄, V̄), ∇ρ0(Λ(X̄))⟩; otherwise forward finite differences are used.

        Raises
        ------
        NotDifferentiableError
            If ``side="two-sided"`` and the derivative has a kink at X̄ along V̄.
        """
        side = Side(side)
        if self.rho0.has_gradient:
            xi = self.rho0.gradient_density(self.rule.aggregate_random(X))
            return pairing(self.rule.gateaux_aggregate(X, V, side), xi)

        right = float(directional_derivative_fd(self.evaluate, X, V, side="forward"))
        if side is Side.TWO_SIDED:
            left = -float(directional_derivative_fd(self.evaluate, X, -V, side="forward"))
            if abs(left - right) > KINK_TOLERANCE:
                raise NotDifferentiableError(
                    f"{self.describe()} is not differentiable here: left {left:.6g}, right {right:.6g}"
                )
        return right

    def dual_solution(self, X: SystemLoss) -> DualSolution:
        """
        The optimal dual solution at X̄, where it is known in closed form.

        Supported: entropic or mean-shift ρ0 composed with the sum rules.

        Raises
        ------
        UnsupportedError
            For every other combination.
        """
        if not isinstance(self.rule, (Sum, SumShift)):
            raise UnsupportedError(
                f"No closed-form dual solution for rule {self.rule.describe()}"
            )
        c = self.rule.c if isinstance(self.rule, SumShift) else 0.0
        if isinstance(self.rho0, Entropic):
            return dual_solution_entropic_sum(self.rho0.theta, c, X)
        if isinstance(self.rho0, MeanShift):
            ones = Density.uniform(X.space)
            return DualSolution(ones, (ones,) * X.n, rho0_penalty=self.rho0.B, rule_penalty=c)
        raise UnsupportedError(f"No closed-form dual solution for {self.rho0.describe()}")

    def expected_axioms(self) -> frozenset[str]:
        axioms = {"S1", "S4"}
        if self.rho0.convex:
            axioms.update({"S2a", "S2b"})
        if self.positively_homogeneous:
            axioms.add("S3")
        if self.rho0.constant_on_range:
            axioms.add("S5")
            if self.rule.normalized:
                axioms.add("S6")
        return frozenset(axioms)

    def describe(self) -> str:
        return f"{self.rho0.describe()} o {self.rule.describe()}"

    def __repr__(self) -> str:
        return f"ComposedRiskMeasure<{self.describe()}>"


def in_rho0_epigraph(rho0: SingleFirmRiskMeasure, m: float, Y: RandomVariable, tol: float = 0.0) -> bool:
    """(m, Y) lies in the acceptance set of ρ0, i.e. m ≥ ρ0(Y)."""
    return m >= rho0.evaluate(Y) - tol


def in_rule_epigraph(rule: AggregationRule, Y: RandomVariable, X: SystemLoss, tol: float = 0.0) -> bool:
    """(Y, X̄) lies in the acceptance set of Λ, i.e. Y ≥ Λ(X̄) in every scenario."""
    _check_same_space(Y.space, X.space)
    return bool(np.all(Y.values >= rule.aggregate_random(X).values - tol))


def primal_evaluate(
    rho: ComposedRiskMeasure, X: SystemLoss, grid: int = 21, *, include_base: bool = True
) -> float:
    """
    ρ(X̄) = inf{m | m ≥ ρ0(Y), Y ≥ Λ(X̄)}, searched over Y on a grid.

    Candidates are Λ(X̄) shifted by grid offsets along the constant direction and
    along each scenario indicator; infeasible (downward) shifts are discarded.

    With ``include_base`` the unshifted Λ(X̄) is a candidate, and since ρ0 is
    monotone it is always optimal: the result equals ρ0(Λ(X̄)) and the search
    only confirms that no grid candidate undercuts it. Without it only strict
    injections t > 0 are searched, so the result is an upper bound on ρ(X̄)
    no further away than the smallest offset span / grid, span = 1 + max|Λ(X̄)|.
    """
    if grid < 1:
        raise ValueError(f"grid must be at least 1, but got {grid}")
    base = rho.rule.aggregate_random(X)
    span = 1.0 + float(np.max(np.abs(base.values)))
    offsets = np.linspace(0.0, span, grid + 1)[1:]
    offsets = np.concatenate([[0.0], offsets, -offsets] if include_base else [offsets, -offsets])
    directions = [np.ones(X.K)] + [np.eye(X.K)[k] for k in range(X.K)]

    best = np.inf
    for d in directions:
        for t in offsets:
            Y = RandomVariable(base.values + t * d, X.space)
            if not in_rule_epigraph(rho.rule, Y, X):
                continue
            m = rho.rho0.evaluate(Y)
            if in_rho0_epigraph(rho.rho0, m, Y):
                best = min(best, m)
    logger.debug("primal search over %d candidates: %r", len(directions) * offsets.size, best)
    return float(best)


def entropic_sum_dual_from_density(theta: float, c: float, xi: RandomVariable, n: int) -> DualSolution:
    """Dual candidate Ξ = 1_n ξ for ρ^{ses,c}, penalised by (1/θ)H(ξ) + c."""
    if not theta > 0:
        raise ValueError(f"theta must be positive, but got {theta}")
    return DualSolution(xi, (xi,) * n, rho0_penalty=relative_entropy(xi) / theta, rule_penalty=c)


def dual_solution_entropic_sum(theta: float, c: float, X: SystemLoss) -> DualSolution:
    """The optimal dual solution ξ = ∇ρ0^entr(Σ X_i), Ξ = 1_n ξ of ρ^{ses,c} at X̄."""
    xi = Entropic(theta).gradient_density(X.total())
    return entropic_sum_dual_from_density(theta, c, xi, X.n)


def dual_gap(rho: SystemicRiskMeasure, X: SystemLoss, sol: DualSolution) -> float:
    """ρ(X̄) − (⟨X̄, Ξ⟩_n − penalty): nonnegative for feasible candidates, zero at an optimum."""
    if sol.n != X.n:
        raise DimensionMismatchError(f"Dual solution has {sol.n} densities, system has {X.n} firms")
    return rho.evaluate(X) - (system_pairing(X, sol.Xi) - sol.penalty)


def verify_dual_feasibility(
    rho: ComposedRiskMeasure,
    sol: DualSolution,
    samples: int = 1000,
    seed: int = 0,
    *,
    tol: float = 1e-9,
) -> AxiomReport:
    """
    Sampled membership of (ξ, Ξ) in the dual cones of ρ0 and Λ.

    Checks ⟨1, ξ⟩ = 1, nonnegativity of ξ and Ξ,
    m − ⟨Y, ξ⟩ ≥ −α_ρ0 on epigraph samples m = ρ0(Y) + |ε|,
    ⟨Y, ξ⟩ − ⟨Z̄, Ξ⟩_n ≥ −α_Λ on samples Y = Λ(Z̄) + |ε|,
    and ⟨1_n, Ξ⟩_n ≤ n when ρ is positively homogeneous.
    """
    rng = np.random.default_rng(seed)
    space = sol.xi.space
    K, n = space.K, sol.n

    norm = Tally("normalization", "<1, xi> = 1", DENSITY_TOLERANCE)
    mass = sol.xi.expectation()
    norm.record(abs(mass - 1.0) <= DENSITY_TOLERANCE, expectation=mass)

    nonneg = Tally("nonnegativity", "xi >= 0 and Xi >= 0", tol)
    for name, density in [("xi", sol.xi)] + [(f"Xi_{i + 1}", d) for i, d in enumerate(sol.Xi)]:
        nonneg.record(bool(np.all(density.values >= -tol)), density=name, values=density.values)

    rho0_cone = Tally("rho0-cone", "m - <Y, xi> >= -penalty", tol)
    rule_cone = Tally("rule-cone", "<Y, xi> - <Z, Xi> >= -penalty", tol)
    for _ in range(samples):
        Y = RandomVariable(rng.normal(0.0, 2.0, K), space)
        m = rho.rho0.evaluate(Y) + abs(rng.normal())
        lhs = m - pairing(Y, sol.xi)
        rho0_cone.record(lhs >= -sol.rho0_penalty - scaled(tol, m), m=m, Y=Y.values, lhs=lhs)

        Z = SystemLoss(rng.normal(0.0, 2.0, (n, K)), space)
        W = rho.rule.aggregate_random(Z) + RandomVariable(np.abs(rng.normal(0.0, 1.0, K)), space)
        lhs = pairing(W, sol.xi) - system_pairing(Z, sol.Xi)
        rule_cone.record(lhs >= -sol.rule_penalty - scaled(tol, lhs), Y=W.values, Z=Z.values, lhs=lhs)

    results = [norm.result(), nonneg.result(), rho0_cone.result(), rule_cone.result()]
    if rho.positively_homogeneous:
        bound = Tally("mass", "<1_n, Xi> <= n", tol)
        total = sum(d.expectation() for d in sol.Xi)
        bound.record(total <= n + scaled(tol, n), total=total, n=n)
        results.append(bound.result())
    return AxiomReport(f"dual of {rho.describe()}", tuple(results))


class SubgradientReport(NamedTuple):
    passed: bool
    worst_margin: float
    checked: int
    counterexample: dict[str, Any] | None


def subgradient_check(
    rho: SystemicRiskMeasure,
    X: SystemLoss,
    sol: DualSolution,
    samples: int = 1000,
    seed: int = 0,
    *,
    tol: float = 1e-9,
) -> SubgradientReport:
    """
    Sampled check that Ξ is a subgradient of ρ at X̄: ⟨Ū − X̄, Ξ⟩_n ≤ ρ(Ū) − ρ(X̄).

    Ū is X̄ plus noise at log-uniform scales plus a constant shift of all firms.
    """
    if sol.n != X.n:
        raise DimensionMismatchError(f"Dual solution has {sol.n} densities, system has {X.n} firms")
    rng = np.random.default_rng(seed)
    base = rho.evaluate(X)
    worst, counterexample = np.inf, None
    for _ in range(samples):
        scale = 10.0 ** rng.uniform(-3.0, 1.0)
        U = X + X.with_values(scale * rng.normal(size=(X.n, X.K)) + rng.normal())
        rhs = rho.evaluate(U) - base
        lhs = system_pairing(U - X, sol.Xi)
        margin = rhs - lhs
        if margin < worst:
            worst = margin
        if margin < -scaled(tol, rhs, lhs) and counterexample is None:
            counterexample = {"U": U.values.tolist(), "lhs": lhs, "rhs": rhs}
    return SubgradientReport(counterexample is None, float(worst), samples, counterexample)


def _diagonal_preimage(rho: SystemicRiskMeasure, n: int, target: float) -> float:
    """A scalar t with ρ(t·1_n) = target."""
    return bisect_root(lambda t: rho.evaluate_point(np.full(n, t)) - target, DIAGONAL_BRACKET, xtol=1e-12)


def check_systemic_axioms(
    rho: SystemicRiskMeasure,
    samples: int = 1000,
    seed: int = 0,
    *,
    n: int | None = None,
    K: int = 4,
    codomain: Codomain | str | None = None,
    tol: float = 1e-9,
) -> AxiomReport:
    """
    Randomized check of the systemic axioms S1 to S6.

    S1 monotonicity, S2a outcome convexity, S2b risk convexity, S3 positive
    homogeneity, S4 preference consistency, S5 surjectivity (grid evidence),
    S6 normalization ρ(1_n) = n.

    The premises of S2b and S4 are scenario-wise statements about ρ(X̄(ω)).
    They are met by building the comparison system on the diagonal: in every
    scenario Z̄(ω) = t_ω 1_n with t_ω found by bisection. Samples where no such
    t_ω exists are skipped.

    Parameters
    ----------
    rho
        Anything with ``evaluate(SystemLoss)`` and ``evaluate_point(vector)``.
    n : int, optional
        Number of firms; defaults to ``rho.n``, else 3.
    K : int
        Number of scenarios of the sampled space, whose weights are random.
    codomain : {"reals", "nonnegative"}, optional
        Target of the S5 range scan; defaults to ``rho.codomain`` or the reals.
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, but got {samples}")
    rng = np.random.default_rng(seed)
    n = n or getattr(rho, "n", None) or 3
    codomain = Codomain(codomain or getattr(rho, "codomain", Codomain.REALS))
    space = ScenarioSpace(rng.dirichlet(np.ones(K)))
    floor = rho.evaluate_point(np.full(n, DIAGONAL_BRACKET[0]))

    def draw() -> SystemLoss:
        return SystemLoss(rng.normal(0.0, 2.0, (n, K)), space)

    def pointwise(X: SystemLoss) -> np.ndarray:
        return np.array([rho.evaluate_point(X.scenario(k)) for k in range(K)])

    def diagonal_system(targets: np.ndarray) -> SystemLoss:
        t = [_diagonal_preimage(rho, n, max(target, floor)) for target in targets]
        return SystemLoss(np.tile(np.asarray(t), (n, 1)), space)

    s1 = Tally("S1", "monotonicity", tol)
    s2a = Tally("S2a", "outcome convexity", tol)
    s2b = Tally("S2b", "risk convexity", tol)
    s3 = Tally("S3", "positive homogeneity", tol)
    s4 = Tally("S4", "preference consistency", tol)
    for _ in range(samples):
        X, Y = draw(), draw()
        rx, ry = rho.evaluate(X), rho.evaluate(Y)

        lower = X - X.with_values(np.abs(rng.normal(0.0, 1.0, (n, K))))
        rl = rho.evaluate(lower)
        s1.record(rx >= rl - scaled(tol, rx, rl), X=X.values, Y=lower.values, rho_X=rx, rho_Y=rl)

        a = rng.uniform()
        rmix = rho.evaluate(a * X + (1 - a) * Y)
        bound = a * rx + (1 - a) * ry
        s2a.record(rmix <= bound + scaled(tol, rx, ry), X=X.values, Y=Y.values, weight=a, rho_mix=rmix, bound=bound)

        scale = rng.uniform(0.0, 3.0)
        rs = rho.evaluate(scale * X)
        s3.record(abs(rs - scale * rx) <= scaled(tol, rs, rx), X=X.values, scale=scale, rho_scaled=rs, scaled_rho=scale * rx)

        px, py = pointwise(X), pointwise(Y)
        try:
            Z = diagonal_system(a * px + (1 - a) * py)
            W = diagonal_system(px - np.abs(rng.normal(0.0, 1.0, K)))
        except NoBracketError:
            s2b.skip()
            s4.skip()
            continue
        rz, rw = rho.evaluate(Z), rho.evaluate(W)
        s2b.record(rz <= bound + scaled(tol, rx, ry, rz), X=X.values, Y=Y.values, Z=Z.values, weight=a, rho_Z=rz, bound=bound)
        s4.record(rx >= rw - scaled(tol, rx, rw), X=X.values, Y=W.values, rho_X=rx, rho_Y=rw)

    s5 = Tally("S5", f"surjectivity onto {codomain.value}", tol)
    diagonal = np.linspace(-50.0, 50.0, 201)
    values = np.array([rho.evaluate_point(np.full(n, t)) for t in diagonal])
    ok, note = range_evidence(values, codomain.value, tol=tol)
    s5.record(ok, range=[float(values.min()), float(values.max())])

    s6 = Tally("S6", "normalization", tol)
    ones = rho.evaluate_point(np.ones(n))
    s6.record(abs(ones - n) <= scaled(tol, n), rho_ones=ones, n=n)

    results = (
        s1.result(),
        s2a.result(),
        s2b.result(),
        s3.result(),
        s4.result(),
        s5.result(evidence=True, note=note),
        s6.result(),
    )
    subject = rho.describe() if hasattr(rho, "describe") else repr(rho)
    logger.debug("systemic axioms for %s: %s", subject, [r.passed for r in results])
    return AxiomReport(subject, results)

