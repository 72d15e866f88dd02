"""
"First inject capital" systemic risk measures with exponential losses.

    R(X̄) = inf{ Σ Y_i | Ȳ ∈ C, E[Σ l_i(X_i − Y_i)] ≤ B },  l_i(x) = exp(α_i x)/α_i,

where C holds the allocations whose sums over each group of firms are
deterministic. Everything here has a closed form except the brute-force
oracle, which searches the allocation directly and accepts any loss function.
"""

from __future__ import annotations

import dataclasses
import logging
import math
from collections.abc import Sequence
from typing import NamedTuple

import numpy as np

from sysrisk.checks import AxiomReport, Tally, scaled
from sysrisk.composed import DualSolution, check_systemic_axioms
from sysrisk.errors import DimensionMismatchError, ScaleTooLargeError
from sysrisk.losses import ExponentialLoss, LossFunction
from sysrisk.numerics import Side, bisect_root, grid_minimize, zoom_window
from sysrisk.scenarios import (
    Density,
    GroupStructure,
    RandomVariable,
    ScenarioSpace,
    SystemLoss,
    group_sums,
    pairing,
    relative_entropy,
    system_pairing,
)
from sysrisk.single_firm import Entropic, theta_from_alphas

logger = logging.getLogger(__name__)

ORACLE_MAX_FIRMS = 3
ORACLE_MAX_SCENARIOS = 3
ORACLE_GRID_POINTS = 2_000_000
ORACLE_CHUNK = 100_000


@dataclasses.dataclass(frozen=True)
class InjectCapitalProblem:
    """
    Risk aversions α_i, acceptance threshold B > 0 and the group structure.

    ``groups`` defaults to a single group holding every firm.
    """

    alphas: tuple[float, ...]
    B: float
    groups: GroupStructure | None = None

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ValueError("An inject-capital problem needs at least one firm")
        if any(not a > 0 for a in alphas):
            raise ValueError(f"All risk aversions must be positive, but got {list(alphas)}")
        # B must exceed Σ l_i(−∞) = 0
        if not self.B > 0:
            raise ValueError(f"Acceptance threshold B must be positive, but got {self.B}")
        groups = self.groups if self.groups is not None else GroupStructure.single(len(alphas))
        groups.check_firms(len(alphas))
        object.__setattr__(self, "alphas", alphas)
        object.__setattr__(self, "groups", groups)

    @property
    def structure(self) -> GroupStructure:
        assert self.groups is not None
        return self.groups

    @property
    def n(self) -> int:
        return len(self.alphas)

    @property
    def h(self) -> int:
        return self.structure.h

    @property
    def theta(self) -> float:
        """Systemic risk aversion over all firms."""
        return theta_from_alphas(self.alphas)

    @property
    def losses(self) -> tuple[ExponentialLoss, ...]:
        return tuple(ExponentialLoss(a) for a in self.alphas)

    @property
    def log_theta_B(self) -> float:
        return math.log(self.theta * self.B)

    def describe(self) -> str:
        return f"inject(alphas={list(self.alphas)}, B={self.B:g}, groups={list(self.structure.boundaries)})"

    def __repr__(self) -> str:
        return f"InjectCapitalProblem<n={self.n}, h={self.h}, B={self.B:g}>"


def _check_system(p: InjectCapitalProblem, X: SystemLoss) -> None:
    if X.n != p.n:
        raise DimensionMismatchError(f"Problem has {p.n} firms, but the system has {X.n}")


def theta_group(p: InjectCapitalProblem, j: int) -> float:
    """θ_j = 1 / Σ_{i∈I_j} 1/α_i for the 0-based group index j."""
    members = p.structure.members(j)
    return theta_from_alphas(np.asarray(p.alphas)[members])


def _group_totals(p: InjectCapitalProblem, X: SystemLoss) -> list[RandomVariable]:
    _check_system(p, X)
    return [s.total for s in group_sums(X, p.structure)]


def group_allocation(p: InjectCapitalProblem, X: SystemLoss) -> list[float]:
    """Deterministic capital d_j = (1/θ_j) ln E[exp(θ_j S_j)] − ln(θB)/θ_j for each group."""
    totals = _group_totals(p, X)
    out = []
    for j, S in enumerate(totals):
        theta_j = theta_group(p, j)
        out.append(Entropic(theta_j).evaluate(S) - p.log_theta_B / theta_j)
    return out


def evaluate_closed_form(p: InjectCapitalProblem, X: SystemLoss) -> float:
    """R(X̄) = Σ_j d_j."""
    return float(sum(group_allocation(p, X)))


def restrict_to_group(p: InjectCapitalProblem, j: int) -> InjectCapitalProblem:
    """
    The one-group problem on I_j with threshold B_j = (θ/θ_j) B.

    R(X̄) is the sum of these sub-problems evaluated on the restricted systems.
    """
    members = p.structure.members(j)
    B_j = p.theta * p.B / theta_group(p, j)
    return InjectCapitalProblem(tuple(np.asarray(p.alphas)[members]), B_j)


def lambda_star(p: InjectCapitalProblem) -> float:
    """Optimal multiplier λ* = θB of the acceptance constraint."""
    return p.theta * p.B


def _xi_conj_derivative(loss: LossFunction, lam: float, xi: np.ndarray) -> np.ndarray:
    # Ξ (l*)'(λΞ), zero where Ξ vanishes
    with np.errstate(divide="ignore", invalid="ignore"):
        d = xi * loss.conjugate_derivative(lam * xi)
    return np.where(xi > 0, d, 0.0)


def _lambda_equation(
    losses: Sequence[LossFunction], B: float, Xi: Sequence[RandomVariable], lam: float
) -> float:
    total = B
    for loss, density in zip(losses, Xi):
        p = density.space.probabilities
        total += p @ loss.conjugate(lam * density.values)
        total -= lam * (p @ _xi_conj_derivative(loss, lam, density.values))
    return float(total)


def solve_lambda_star(
    losses: Sequence[LossFunction], B: float, Xi: Sequence[RandomVariable]
) -> float:
    """
    Root of B + Σ E[l_i*(λΞ_i)] − λ Σ E[Ξ_i (l_i*)'(λΞ_i)] = 0 over λ > 0.

    Solved by bisection in ln λ; the left-hand side decreases in λ.
    """
    if len(losses) != len(Xi):
        raise DimensionMismatchError(f"Got {len(losses)} loss functions for {len(Xi)} densities")
    u = bisect_root(lambda u: -_lambda_equation(losses, B, Xi, math.exp(u)), xtol=1e-13)
    return math.exp(u)


def dual_density(p: InjectCapitalProblem, X: SystemLoss) -> tuple[Density, ...]:
    """Ξ_i = exp(θ_j S_j) / E[exp(θ_j S_j)] for every firm i of group j."""
    totals = _group_totals(p, X)
    Xi: list[Density] = [None] * p.n  # type: ignore[list-item]
    for j, (S, members) in enumerate(zip(totals, p.structure.groups)):
        density = Density.from_log_weights(theta_group(p, j) * S.values, X.space)
        for i in members:
            Xi[i] = density
    return tuple(Xi)


def penalty(p: InjectCapitalProblem, Xi: Sequence[RandomVariable]) -> float:
    """α(Ξ) = Σ (1/α_i)(H(Ξ_i) + ln θB)."""
    if len(Xi) != p.n:
        raise DimensionMismatchError(f"Got {len(Xi)} densities for {p.n} firms")
    return float(sum((relative_entropy(x) + p.log_theta_B) / a for a, x in zip(p.alphas, Xi)))


def penalty_from_conjugates(
    losses: Sequence[LossFunction], B: float, Xi: Sequence[RandomVariable]
) -> float:
    """α(Ξ) = Σ E[Ξ_i (l_i*)'(λ*Ξ_i)] with λ* from :func:`solve_lambda_star`."""
    lam = solve_lambda_star(losses, B, Xi)
    return float(
        sum(
            x.space.probabilities @ _xi_conj_derivative(loss, lam, x.values)
            for loss, x in zip(losses, Xi)
        )
    )


def optimal_allocation(p: InjectCapitalProblem, X: SystemLoss) -> SystemLoss:
    """
    The scenario-dependent optimal allocation

        Y_i = X_i − (θ_j/α_i) S_j + (1/α_i) ln E[exp(θ_j S_j)] − ln(θB)/α_i.
    """
    totals = _group_totals(p, X)
    Y = np.array(X.values)
    for j, (S, members) in enumerate(zip(totals, p.structure.groups)):
        theta_j = theta_group(p, j)
        log_mgf = theta_j * Entropic(theta_j).evaluate(S)
        for i in members:
            a = p.alphas[i]
            Y[i] += (-theta_j * S.values + log_mgf - p.log_theta_B) / a
    return X.with_values(Y)


def conjugate_allocation(p: InjectCapitalProblem, X: SystemLoss) -> SystemLoss:
    """The optimal allocation in conjugate form Y_i = X_i − (l_i*)'(λ*Ξ_i)."""
    Xi = dual_density(p, X)
    lam = lambda_star(p)
    Y = np.stack(
        [X.values[i] - loss.conjugate_derivative(lam * Xi[i].values) for i, loss in enumerate(p.losses)]
    )
    return X.with_values(Y)


def expected_loss(
    p: InjectCapitalProblem, X: SystemLoss, Y: SystemLoss, losses: Sequence[LossFunction] | None = None
) -> float:
    """E[Σ l_i(X_i − Y_i)]."""
    losses = p.losses if losses is None else losses
    D = X - Y
    return float(sum(D.space.probabilities @ loss(D.values[i]) for i, loss in enumerate(losses)))


def systemic_capital_allocation_dual(p: InjectCapitalProblem, X: SystemLoss) -> list[float]:
    """Fair values ⟨Y_i, Ξ_i⟩ of the optimal random allocation."""
    Y = optimal_allocation(p, X)
    Xi = dual_density(p, X)
    return [pairing(Y.row(i), Xi[i]) for i in range(p.n)]


class OracleSolution(NamedTuple):
    value: float
    allocation: SystemLoss
    expected_loss: float
    group_sums: list[float]


def solve_numerical_oracle(
    p: InjectCapitalProblem,
    X: SystemLoss,
    *,
    losses: Sequence[LossFunction] | None = None,
    resolution: int | None = None,
    refinements: int | None = None,
) -> OracleSolution:
    """
    Brute-force R(X̄) by nested grid search over allocations in C.

    The search runs over Y_i(ω) for every firm but the last of each group and
    over the deterministic group totals d_1, ..., d_{h−1}. The last firm of a
    group takes d_j minus the others. The last total d_h is solved from the
    binding acceptance constraint E[Σ l_i(X_i − Y_i)] = B.

    Raises
    ------
    ScaleTooLargeError
        Beyond three firms or three scenarios.
    """
    _check_system(p, X)
    if p.n > ORACLE_MAX_FIRMS or X.K > ORACLE_MAX_SCENARIOS:
        raise ScaleTooLargeError(
            f"The numerical oracle handles at most {ORACLE_MAX_FIRMS} firms and "
            f"{ORACLE_MAX_SCENARIOS} scenarios, got n={p.n}, K={X.K}"
        )
    losses = p.losses if losses is None else tuple(losses)
    if len(losses) != p.n:
        raise DimensionMismatchError(f"Got {len(losses)} loss functions for {p.n} firms")

    K, groups = X.K, p.structure.groups
    prob = X.space.probabilities
    totals = [X.values[m].sum(axis=0) for m in groups]
    spread = max(float(np.max(np.abs(S))) for S in totals)
    y_half = 2 * spread + abs(p.log_theta_B) / min(p.alphas) + 1
    d_half = spread + abs(p.log_theta_B) / p.theta + 1

    # layout: per group, K columns for every member but the last, then d_1..d_{h-1}
    free = [(i, k) for m in groups for i in m[:-1] for k in range(K)]
    box = [(X.values[i, k] - y_half, X.values[i, k] + y_half) for i, k in free]
    box += [(float(prob @ S) - d_half, float(prob @ S) + d_half) for S in totals[:-1]]
    D = len(box)

    def assemble(points: np.ndarray, d_last: np.ndarray) -> np.ndarray:
        P = points.shape[0]
        Y = np.empty((P, p.n, K))
        col = 0
        for m in groups:
            for i in m[:-1]:
                Y[:, i, :] = points[:, col : col + K]
                col += K
        d = np.column_stack([points[:, col:], d_last[:, None]])
        for j, m in enumerate(groups):
            Y[:, m[-1], :] = d[:, j, None] - Y[:, m[:-1], :].sum(axis=1)
        return Y

    def acceptance(Y: np.ndarray) -> np.ndarray:
        shortfall = X.values[None] - Y
        with np.errstate(over="ignore"):
            return sum(loss(shortfall[:, i, :]) @ prob for i, loss in enumerate(losses))

    def last_total(points: np.ndarray) -> np.ndarray:
        # acceptance decreases in d_h; bisect it to B point by point
        P = points.shape[0]
        center = float(prob @ totals[-1])
        lo = np.full(P, center - d_half)
        hi = np.full(P, center + d_half)
        width = 2 * d_half
        for _ in range(60):
            high = acceptance(assemble(points, hi)) > p.B
            low = acceptance(assemble(points, lo)) < p.B
            if not (high.any() or low.any()):
                break
            hi = np.where(high, hi + width, hi)
            lo = np.where(low, lo - width, lo)
            width *= 2
        feasible = acceptance(assemble(points, hi)) <= p.B
        for _ in range(80):
            mid = (lo + hi) / 2
            ok = acceptance(assemble(points, mid)) <= p.B
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        return np.where(feasible, hi, np.nan)

    def objective(points: np.ndarray) -> np.ndarray:
        out = np.empty(points.shape[0])
        for start in range(0, points.shape[0], ORACLE_CHUNK):
            chunk = points[start : start + ORACLE_CHUNK]
            out[start : start + ORACLE_CHUNK] = chunk[:, len(free) :].sum(axis=1) + last_total(chunk)
        return out

    if resolution is None:
        resolution = min(101, max(11, int(ORACLE_GRID_POINTS ** (1.0 / max(D, 1)))))
    if refinements is None:
        shrink = 1.0 / (2.0 * zoom_window(resolution))
        refinements = min(20, math.ceil(math.log(1e6) / math.log(shrink)))
    logger.debug("oracle over %d dimensions, resolution %d, %d refinements", D, resolution, refinements)

    result = grid_minimize(objective, box, resolution, refinements, vectorized=True)
    point = result.argmin[None, :]
    Y = X.with_values(assemble(point, last_total(point))[0])
    sums = [float(prob @ s.total.values) for s in group_sums(Y, p.structure)]
    return OracleSolution(result.value, Y, expected_loss(p, X, Y, losses), sums)


def evaluate_numerical_oracle(p: InjectCapitalProblem, X: SystemLoss) -> float:
    """Brute-force value of R(X̄); see :func:`solve_numerical_oracle`."""
    return solve_numerical_oracle(p, X).value


@dataclasses.dataclass(frozen=True)
class ExponentialInjectCapital:
    """R as an evaluator, so the generic axiom and allocation machinery can run on it."""

    problem: InjectCapitalProblem

    @property
    def n(self) -> int:
        return self.problem.n

    @property
    def codomain(self) -> str:
        return "reals"

    def evaluate(self, X: SystemLoss) -> float:
        return evaluate_closed_form(self.problem, X)

    def evaluate_point(self, x) -> float:
        """R(x̄) = Σ x_i − ln(θB)/θ for a deterministic loss vector."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.size != self.n:
            raise DimensionMismatchError(f"Problem has {self.n} firms, but got a vector of {x.size}")
        return float(x.sum() - self.problem.log_theta_B / self.problem.theta)

    def directional_derivative(self, X: SystemLoss, V: SystemLoss, side: Side | str = Side.RIGHT) -> float:
        """Σ_i ⟨V_i, Ξ_i⟩; R is differentiable so both sides agree."""
        Side(side)
        return system_pairing(V, dual_density(self.problem, X))

    def dual_solution(self, X: SystemLoss) -> DualSolution:
        Xi = dual_density(self.problem, X)
        return DualSolution(Density.uniform(X.space), Xi, rule_penalty=penalty(self.problem, Xi))

    @property
    def calibrated(self) -> bool:
        """Whether B = Σ l_i(0) = Σ 1/α_i, which makes R(0) = 0."""
        return math.isclose(self.problem.B, sum(1.0 / a for a in self.problem.alphas), rel_tol=1e-12)

    def expected_axioms(self) -> frozenset[str]:
        axioms = {"S1", "S2a", "S5", "continuity"}
        if self.problem.h == 1:
            axioms.update({"S2b", "S4"})
        if self.calibrated:
            axioms.update({"S6", "R0"})
        return frozenset(axioms)

    def describe(self) -> str:
        return self.problem.describe()


def verify_inject_properties(
    p: InjectCapitalProblem, samples: int = 1000, seed: int = 0, *, tol: float = 1e-9
) -> AxiomReport:
    """
    The systemic axiom suite run against R, plus R(0) = 0 (R0) and a sampled
    Lipschitz bound |R(X̄ + εŪ) − R(X̄)| ≤ ε Σ_i ‖U_i‖_∞ (continuity).
    """
    R = ExponentialInjectCapital(p)
    report = check_systemic_axioms(R, samples, seed, n=p.n, tol=tol)

    zero = Tally("R0", "R(0) = 0", 1e-10)
    r0 = R.evaluate_point(np.zeros(p.n))
    zero.record(abs(r0) <= 1e-10, R_zero=r0, B=p.B)

    rng = np.random.default_rng(seed + 1)
    lipschitz = Tally("continuity", "Lipschitz continuity", tol)
    space = ScenarioSpace(rng.dirichlet(np.ones(4)))
    for _ in range(samples):
        X = SystemLoss(rng.normal(0.0, 2.0, (p.n, space.K)), space)
        U = X.with_values(rng.normal(0.0, 1.0, (p.n, space.K)))
        eps = 10.0 ** rng.uniform(-6.0, 0.0)
        change = abs(R.evaluate(X + eps * U) - R.evaluate(X))
        bound = eps * float(np.abs(U.values).max(axis=1).sum())
        lipschitz.record(change <= bound + scaled(tol, change), X=X.values, U=U.values, eps=eps, change=change, bound=bound)

    return report.merged(AxiomReport(report.subject, (zero.result(), lipschitz.result())))
