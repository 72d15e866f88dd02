"""
Single-firm risk measures ρ0 acting on one random loss.

The systemic measures in :mod:`sysrisk.composed` apply one of these to the
aggregated loss Λ(X̄).
"""

from __future__ import annotations

import abc
import dataclasses
import logging
from collections.abc import Callable, Iterable

import numpy as np
from scipy.special import logsumexp

from sysrisk.checks import AxiomReport, Tally, scaled
from sysrisk.errors import UnsupportedError
from sysrisk.losses import LossFunction
from sysrisk.numerics import bisect_root
from sysrisk.scenarios import Density, RandomVariable, ScenarioSpace

logger = logging.getLogger(__name__)

_POINT = ScenarioSpace.uniform(1)


class SingleFirmRiskMeasure(abc.ABC):
    """Base class of the single-firm risk measures."""

    @abc.abstractmethod
    def evaluate(self, X: RandomVariable) -> float: ...

    def evaluate_constant(self, m: float) -> float:
        """ρ0 of the deterministic loss m."""
        return self.evaluate(RandomVariable.constant(m, _POINT))

    def gradient_density(self, X: RandomVariable) -> Density:
        """
        The density ∇ρ0(X) representing the Gâteaux derivative at X.

        Raises
        ------
        UnsupportedError
            For measures without a closed-form gradient.
        """
        raise UnsupportedError(f"{self.describe()} has no closed-form gradient density")

    @property
    def has_gradient(self) -> bool:
        return False

    @property
    def positively_homogeneous(self) -> bool:
        return False

    @property
    def constant_on_range(self) -> bool:
        """Whether ρ0(m) = m for every real m."""
        return False

    @property
    def convex(self) -> bool:
        return True

    def expected_axioms(self) -> frozenset[str]:
        axioms = {"R1", "R4"}
        if self.convex:
            axioms.add("R2")
        if self.positively_homogeneous:
            axioms.update({"R3", "R5"} if self.convex else {"R3"})
        if self.constant_on_range:
            axioms.add("R6")
        return frozenset(axioms)

    @abc.abstractmethod
    def describe(self) -> str: ...


@dataclasses.dataclass(frozen=True)
class Entropic(SingleFirmRiskMeasure):
    """
    The entropic risk measure ρ0(X) = (1/θ) ln E[exp(θX)].

    θ > 0 is the risk aversion: smaller θ means less aversion, and ρ0 tends to
    E[X] as θ → 0.
    """

    theta: float

    def __post_init__(self) -> None:
        if not self.theta > 0:
            raise ValueError(f"Entropic risk aversion theta must be positive, but got {self.theta}")

    def evaluate(self, X: RandomVariable) -> float:
        return float(logsumexp(self.theta * X.values, b=X.space.probabilities) / self.theta)

    def evaluate_constant(self, m: float) -> float:
        return float(m)

    def gradient_density(self, X: RandomVariable) -> Density:
        """exp(θX) / E[exp(θX)]."""
        return Density.from_log_weights(self.theta * X.values, X.space)

    @property
    def has_gradient(self) -> bool:
        return True

    @property
    def constant_on_range(self) -> bool:
        return True

    def describe(self) -> str:
        return f"entropic(theta={self.theta:g})"


@dataclasses.dataclass(frozen=True)
class MeanShift(SingleFirmRiskMeasure):
    """ρ0(X) = E[X] − B."""

    B: float

    def evaluate(self, X: RandomVariable) -> float:
        return X.expectation() - self.B

    def evaluate_constant(self, m: float) -> float:
        return float(m) - self.B

    def gradient_density(self, X: RandomVariable) -> Density:
        return Density.uniform(X.space)

    @property
    def has_gradient(self) -> bool:
        return True

    @property
    def positively_homogeneous(self) -> bool:
        return self.B == 0

    @property
    def constant_on_range(self) -> bool:
        return self.B == 0

    def describe(self) -> str:
        return f"mean_shift(B={self.B:g})"


@dataclasses.dataclass(frozen=True)
class ShortfallAcceptance:
    """Acceptance predicate E[l(Z)] ≤ threshold for a loss function l."""

    loss: LossFunction
    threshold: float

    def __call__(self, Z: RandomVariable) -> bool:
        return bool(Z.space.probabilities @ self.loss(Z.values) <= self.threshold)


@dataclasses.dataclass(frozen=True)
class AcceptanceSet(SingleFirmRiskMeasure):
    """
    ρ0(X) = inf{m ∈ ℝ | X − m is acceptable}.

    Parameters
    ----------
    predicate : callable
        Decides acceptability of a random loss. It must be monotone in the
        subtracted capital: once X − m is acceptable, so is X − m' for m' ≥ m.
    is_convex : bool
        Whether the acceptance set is convex.
    description : str
        Label used in reports.
    """

    predicate: Callable[[RandomVariable], bool]
    is_convex: bool = True
    description: str = "acceptance"

    @property
    def convex(self) -> bool:
        return self.is_convex

    def _excess(self, X: RandomVariable) -> Callable[[float], float]:
        def g(m: float) -> float:
            return 1.0 if self.predicate(X - m) else -1.0

        return g

    def evaluate(self, X: RandomVariable) -> float:
        g = self._excess(X)
        lo, hi = float(X.values.min()) - 1.0, float(X.values.max()) + 1.0
        m = bisect_root(g, (lo, hi), xtol=1e-12)
        # the predicate flips at m; a monotone one must agree one unit either side
        if g(m + 1.0) < 0 or g(m - 1.0) > 0:
            raise ValueError(
                f"Acceptance predicate {self.description!r} is not monotone in the subtracted capital around m={m:.6g}"
            )
        return m

    def describe(self) -> str:
        return self.description


def theta_from_alphas(alphas: Iterable[float]) -> float:
    """Systemic risk aversion θ = 1 / Σ(1/α_i)."""
    alphas = np.asarray(list(alphas), dtype=np.float64)
    if alphas.size == 0 or np.any(alphas <= 0):
        raise ValueError(f"Risk aversions must be positive, but got {alphas.tolist()}")
    return float(1.0 / np.sum(1.0 / alphas))


def check_single_firm_axioms(
    rho0: SingleFirmRiskMeasure,
    samples: int = 1000,
    seed: int = 0,
    *,
    space: ScenarioSpace | None = None,
    constancy_set: Iterable[float] | None = None,
    tol: float = 1e-9,
) -> AxiomReport:
    """
    Randomized check of the single-firm axioms.

    R1 monotonicity, R2 convexity, R3 positive homogeneity, R4 translation,
    R5 subadditivity, R6 constancy ρ0(m) = m on ``constancy_set``.

    Parameters
    ----------
    space : ScenarioSpace, optional
        Where losses are sampled; by default four scenarios with random weights.
    constancy_set : iterable of float, optional
        Scalars checked for R6, by default 41 points in [−10, 10].
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, but got {samples}")
    rng = np.random.default_rng(seed)
    if space is None:
        space = ScenarioSpace(rng.dirichlet(np.ones(4)))
    if constancy_set is None:
        constancy_set = np.linspace(-10.0, 10.0, 41)
    rho = rho0.evaluate

    def draw() -> RandomVariable:
        return RandomVariable(rng.normal(0.0, 2.0, space.K), space)

    r1 = Tally("R1", "monotonicity", tol)
    r2 = Tally("R2", "convexity", tol)
    r3 = Tally("R3", "positive homogeneity", tol)
    r4 = Tally("R4", "translation", tol)
    r5 = Tally("R5", "subadditivity", tol)
    for _ in range(samples):
        X, Y = draw(), draw()
        rx, ry = rho(X), rho(Y)

        lower = X - RandomVariable(np.abs(rng.normal(0.0, 1.0, space.K)), space)
        rl = rho(lower)
        r1.record(rx >= rl - scaled(tol, rx, rl), X=X.values, Y=lower.values, rho_X=rx, rho_Y=rl)

        a = rng.uniform()
        rmix = rho(a * X + (1 - a) * Y)
        bound = a * rx + (1 - a) * ry
        r2.record(rmix <= bound + scaled(tol, rx, ry), X=X.values, Y=Y.values, weight=a, rho_mix=rmix, bound=bound)

        scale = rng.uniform(0.0, 3.0)
        rs = rho(scale * X)
        r3.record(abs(rs - scale * rx) <= scaled(tol, rs, rx), X=X.values, scale=scale, rho_scaled=rs, scaled_rho=scale * rx)

        m = rng.normal(0.0, 2.0)
        rt = rho(X + m)
        r4.record(abs(rt - (rx + m)) <= scaled(tol, rt, rx, m), X=X.values, m=m, rho_shifted=rt, shifted_rho=rx + m)

        rsum = rho(X + Y)
        r5.record(rsum <= rx + ry + scaled(tol, rx, ry), X=X.values, Y=Y.values, rho_sum=rsum, sum_rho=rx + ry)

    r6 = Tally("R6", "constancy", tol)
    for m in constancy_set:
        value = rho(RandomVariable.constant(m, space))
        r6.record(abs(value - m) <= scaled(tol, m), m=float(m), rho_m=value)

    results = (r1.result(), r2.result(), r3.result(), r4.result(), r5.result(), r6.result())
    logger.debug("single-firm axioms for %s: %s", rho0.describe(), [r.passed for r in results])
    return AxiomReport(rho0.describe(), results)
