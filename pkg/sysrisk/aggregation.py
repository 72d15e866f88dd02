"""
Aggregation rules Λ: ℝⁿ → ℝ that compress firm losses into one systemic loss.

Each rule is an immutable value. Rules act on a single loss vector
(``aggregate_point``) or scenario-wise on a whole system (``aggregate_random``),
and expose their right Gâteaux differentials.
"""

from __future__ import annotations

import abc
import dataclasses
import logging
from enum import Enum
from typing import ClassVar

import numpy as np

from sysrisk.checks import AxiomReport, Tally, range_evidence, scaled
from sysrisk.errors import DimensionMismatchError, NotDifferentiableError
from sysrisk.numerics import LinearProgram, Side, fd_step, solve_lp
from sysrisk.scenarios import RandomVariable, SystemLoss, _check_same_space

logger = logging.getLogger(__name__)

KINK_TOLERANCE = 1e-6


class Codomain(str, Enum):
    REALS = "reals"
    NONNEGATIVE = "nonnegative"


def _positive_part_right(x: np.ndarray, v: np.ndarray, level: float = 0.0) -> np.ndarray:
    # right derivative of (x - level)^+ : v above the kink, v^+ at it, 0 below
    offset = x - level
    return np.where(
        offset > KINK_TOLERANCE,
        v,
        np.where(np.abs(offset) <= KINK_TOLERANCE, np.maximum(v, 0.0), 0.0),
    )


class AggregationRule(abc.ABC):
    """Base class of all aggregation rules."""

    codomain: ClassVar[Codomain] = Codomain.REALS

    @property
    def n(self) -> int | None:
        """Number of firms the rule is tied to, or None if it accepts any."""
        return None

    @property
    def positively_homogeneous(self) -> bool:
        return False

    @property
    def normalized(self) -> bool:
        """Whether Λ(1_n) = n."""
        return False

    @abc.abstractmethod
    def _aggregate(self, values: np.ndarray) -> np.ndarray:
        """Apply Λ to every column of an (n, K) array."""

    def _right_derivative(self, x: np.ndarray, v: np.ndarray) -> np.ndarray:
        h = fd_step(x)
        return (self._aggregate(x + h * v) - self._aggregate(x)) / h

    def _check_firms(self, n: int) -> None:
        if self.n is not None and n != self.n:
            raise DimensionMismatchError(
                f"{self.describe()} aggregates {self.n} firms, but got {n}"
            )

    def aggregate_point(self, x) -> float:
        """Λ(x̄) for one loss vector."""
        x = np.atleast_1d(np.asarray(x, dtype=np.float64))
        if x.ndim != 1:
            raise DimensionMismatchError(f"Expected a loss vector, got shape {x.shape}")
        self._check_firms(x.size)
        return float(self._aggregate(x[:, None])[0])

    def aggregate_random(self, X: SystemLoss) -> RandomVariable:
        """The random systemic loss Λ(X̄(ω)), scenario by scenario."""
        self._check_firms(X.n)
        return RandomVariable(self._aggregate(X.values), X.space)

    def f_lambda(self, a: float, n: int | None = None) -> float:
        """f_Λ(a) = Λ(a, ..., a)."""
        n = self.n if self.n is not None else n
        if n is None:
            raise ValueError(f"f_lambda needs the number of firms for {self.describe()}")
        return self.aggregate_point(np.full(n, float(a)))

    def gateaux_aggregate(
        self, X: SystemLoss, V: SystemLoss, side: Side | str = Side.RIGHT
    ) -> RandomVariable:
        """
        Scenario-wise directional derivative δΛ(X̄(ω), V̄(ω)).

        Parameters
        ----------
        side : {"right", "two-sided"}
            "right" returns δ_+Λ everywhere. "two-sided" additionally requires the
            left derivative to agree.

        Raises
        ------
        NotDifferentiableError
            If a two-sided derivative is requested at a kink, i.e. where the left
            and right derivatives differ by more than 1e-6.
        """
        _check_same_space(X.space, V.space)
        if X.n != V.n:
            raise DimensionMismatchError(f"Direction has {V.n} firms, point has {X.n}")
        self._check_firms(X.n)
        right = self._right_derivative(X.values, V.values)
        if Side(side) is Side.TWO_SIDED:
            left = -self._right_derivative(X.values, -V.values)
            gap = np.abs(left - right)
            if np.any(gap > KINK_TOLERANCE):
                k = int(np.argmax(gap))
                raise NotDifferentiableError(
                    f"{self.describe()} is not differentiable in scenario {k}: "
                    f"left derivative {left[k]:.6g}, right derivative {right[k]:.6g}"
                )
        return RandomVariable(right, X.space)

    def expected_axioms(self) -> frozenset[str]:
        axioms = {"A1", "A2", "A3"}
        if self.positively_homogeneous:
            axioms.add("A4")
        if self.normalized:
            axioms.add("A5")
        return frozenset(axioms)

    @abc.abstractmethod
    def describe(self) -> str: ...


@dataclasses.dataclass(frozen=True)
class Sum(AggregationRule):
    """Λ(x) = Σ x_i."""

    @property
    def positively_homogeneous(self) -> bool:
        return True

    @property
    def normalized(self) -> bool:
        return True

    def _aggregate(self, values):
        return values.sum(axis=0)

    def _right_derivative(self, x, v):
        return v.sum(axis=0)

    def describe(self) -> str:
        return "sum"


@dataclasses.dataclass(frozen=True)
class SumShift(AggregationRule):
    """Λ(x) = Σ x_i − c."""

    c: float

    @property
    def positively_homogeneous(self) -> bool:
        return self.c == 0

    @property
    def normalized(self) -> bool:
        return self.c == 0

    def _aggregate(self, values):
        return values.sum(axis=0) - self.c

    def _right_derivative(self, x, v):
        return v.sum(axis=0)

    def describe(self) -> str:
        return f"sum_shift(c={self.c:g})"


@dataclasses.dataclass(frozen=True)
class Loss(AggregationRule):
    """Λ(x) = Σ x_i⁺: only losses count, profits are not netted."""

    codomain: ClassVar[Codomain] = Codomain.NONNEGATIVE

    @property
    def positively_homogeneous(self) -> bool:
        return True

    @property
    def normalized(self) -> bool:
        return True

    def _aggregate(self, values):
        return np.maximum(values, 0.0).sum(axis=0)

    def _right_derivative(self, x, v):
        return _positive_part_right(x, v).sum(axis=0)

    def describe(self) -> str:
        return "loss"


@dataclasses.dataclass(frozen=True)
class LossThreshold(AggregationRule):
    """Λ(x) = Σ (x_i − b)⁺: losses beyond the threshold b ≥ 0."""

    codomain: ClassVar[Codomain] = Codomain.NONNEGATIVE

    b: float

    def __post_init__(self) -> None:
        if not self.b >= 0:
            raise ValueError(f"Loss threshold b must be nonnegative, but got {self.b}")

    @property
    def positively_homogeneous(self) -> bool:
        return self.b == 0

    @property
    def normalized(self) -> bool:
        return self.b == 0

    def _aggregate(self, values):
        return np.maximum(values - self.b, 0.0).sum(axis=0)

    def _right_derivative(self, x, v):
        return _positive_part_right(x, v, self.b).sum(axis=0)

    def describe(self) -> str:
        return f"loss_threshold(b={self.b:g})"


@dataclasses.dataclass(frozen=True)
class Critical(AggregationRule):
    """
    Λ(x) = exp(γ Σ_{i∈A} x_i⁺) − 1 + Σ_{i∉A} x_i⁺.

    Losses of the critical firms A (0-based indices) are penalized exponentially.
    """

    codomain: ClassVar[Codomain] = Codomain.NONNEGATIVE

    critical: tuple[int, ...]
    gamma: float

    def __post_init__(self) -> None:
        critical = tuple(sorted({int(i) for i in self.critical}))
        if not critical:
            raise ValueError("The set of critical firms must not be empty")
        if critical[0] < 0:
            raise ValueError(f"Critical firm indices must be nonnegative, got {critical}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, but got {self.gamma}")
        object.__setattr__(self, "critical", critical)

    def _mask(self, n: int) -> np.ndarray:
        if self.critical[-1] >= n:
            raise DimensionMismatchError(
                f"Critical firm {self.critical[-1]} does not exist in a system of {n} firms"
            )
        mask = np.zeros(n, dtype=bool)
        mask[list(self.critical)] = True
        return mask

    def _aggregate(self, values):
        mask = self._mask(values.shape[0])
        pos = np.maximum(values, 0.0)
        return np.expm1(self.gamma * pos[mask].sum(axis=0)) + pos[~mask].sum(axis=0)

    def _right_derivative(self, x, v):
        mask = self._mask(x.shape[0])
        d = _positive_part_right(x, v)
        scale = np.exp(self.gamma * np.maximum(x, 0.0)[mask].sum(axis=0))
        return scale * self.gamma * d[mask].sum(axis=0) + d[~mask].sum(axis=0)

    def describe(self) -> str:
        firms = ",".join(str(i + 1) for i in self.critical)
        return f"critical(A={{{firms}}}, gamma={self.gamma:g})"


@dataclasses.dataclass(frozen=True)
class ExpUtility(AggregationRule):
    """Λ(x) = Σ exp(α_i x_i) / α_i."""

    codomain: ClassVar[Codomain] = Codomain.NONNEGATIVE

    alphas: tuple[float, ...]

    def __post_init__(self) -> None:
        alphas = tuple(float(a) for a in self.alphas)
        if not alphas:
            raise ValueError("ExpUtility needs at least one risk aversion")
        if any(not a > 0 for a in alphas):
            raise ValueError(f"All risk aversions must be positive, but got {alphas}")
        object.__setattr__(self, "alphas", alphas)

    @property
    def n(self) -> int:
        return len(self.alphas)

    @property
    def _alpha(self) -> np.ndarray:
        return np.asarray(self.alphas)[:, None]

    def _aggregate(self, values):
        return (np.exp(self._alpha * values) / self._alpha).sum(axis=0)

    def _right_derivative(self, x, v):
        return (np.exp(self._alpha * x) * v).sum(axis=0)

    def describe(self) -> str:
        return f"exp_utility(alphas={list(self.alphas)})"


@dataclasses.dataclass(frozen=True)
class Contagion(AggregationRule):
    """
    Contagion through interbank liabilities:

        Λ(x) = min Σ (y_i + γ b_i)  s.t.  b_i + y_i ≥ x_i + Σ_j Π_ji y_j,  y, b ≥ 0.

    y_i is the part of firm i's loss it passes on to its creditors, b_i the part
    bailed out at cost γ > 1. Π is the relative liability matrix: Π_ij is the
    proportion of firm i's liabilities owed to firm j.
    """

    codomain: ClassVar[Codomain] = Codomain.NONNEGATIVE

    liabilities: tuple[tuple[float, ...], ...]
    gamma: float

    def __post_init__(self) -> None:
        Pi = np.atleast_2d(np.asarray(self.liabilities, dtype=np.float64))
        if Pi.ndim != 2 or Pi.shape[0] != Pi.shape[1]:
            raise ValueError(f"Relative liability matrix must be square, got shape {Pi.shape}")
        if np.any(Pi < 0) or np.any(Pi > 1):
            raise ValueError("Relative liabilities must lie in [0, 1]")
        if np.any(Pi.sum(axis=1) > 1 + 1e-12):
            raise ValueError(
                f"Rows of the relative liability matrix must sum to at most 1, got {Pi.sum(axis=1).tolist()}"
            )
        if not self.gamma > 1:
            raise ValueError(f"Bailout cost gamma must exceed 1, but got {self.gamma}")
        object.__setattr__(self, "liabilities", tuple(tuple(row) for row in Pi.tolist()))

    @classmethod
    def from_nominal_liabilities(cls, L, gamma: float) -> "Contagion":
        """Build Π from nominal liabilities L_ij owed by i to j; rows without obligations stay zero."""
        L = np.asarray(L, dtype=np.float64)
        totals = L.sum(axis=1, keepdims=True)
        Pi = np.divide(L, totals, out=np.zeros_like(L), where=totals != 0)
        return cls(tuple(map(tuple, Pi)), gamma)

    @property
    def matrix(self) -> np.ndarray:
        return np.asarray(self.liabilities)

    @property
    def n(self) -> int:
        return len(self.liabilities)

    @property
    def positively_homogeneous(self) -> bool:
        return True

    def linear_program(self, x) -> LinearProgram:
        """The LP whose optimum is Λ(x); variables are (y_1..y_n, b_1..b_n)."""
        n = self.n
        A = np.hstack([np.eye(n) - self.matrix.T, np.eye(n)])
        c = np.concatenate([np.ones(n), np.full(n, self.gamma)])
        return LinearProgram(c, A, np.asarray(x, dtype=np.float64))

    def _aggregate(self, values):
        return np.array([solve_lp(self.linear_program(col)).value for col in values.T])

    def describe(self) -> str:
        return f"contagion(n={self.n}, gamma={self.gamma:g})"


def check_ar_axioms(
    rule: AggregationRule,
    samples: int = 1000,
    seed: int = 0,
    *,
    n: int | None = None,
    codomain: Codomain | str | None = None,
    tol: float = 1e-9,
) -> AxiomReport:
    """
    Randomized check of the aggregation-rule axioms.

    A1 monotonicity, A2 convexity, A3 surjectivity onto ``codomain`` (grid
    evidence along the diagonal), A4 positive homogeneity, A5 normalization
    Λ(1_n) = n.

    Parameters
    ----------
    n : int, optional
        Number of firms to sample; defaults to the rule's own n, else 3.
    codomain : {"reals", "nonnegative"}, optional
        Target of the surjectivity scan; defaults to the rule's codomain.
    """
    if samples < 1:
        raise ValueError(f"samples must be at least 1, but got {samples}")
    rng = np.random.default_rng(seed)
    n = n or rule.n or 3
    codomain = Codomain(codomain or rule.codomain)
    agg = rule.aggregate_point

    a1 = Tally("A1", "monotonicity", tol)
    a2 = Tally("A2", "convexity", tol)
    a4 = Tally("A4", "positive homogeneity", tol)
    for _ in range(samples):
        x = rng.normal(0.0, 2.0, n)
        y = rng.normal(0.0, 2.0, n)

        lower = x - np.abs(rng.normal(0.0, 1.0, n))
        lx, llow = agg(x), agg(lower)
        a1.record(lx >= llow - scaled(tol, lx, llow), x=x, y=lower, lambda_x=lx, lambda_y=llow)

        a = rng.uniform()
        ly, lmix = agg(y), agg(a * x + (1 - a) * y)
        bound = a * lx + (1 - a) * ly
        a2.record(lmix <= bound + scaled(tol, lx, ly), x=x, y=y, weight=a, lambda_mix=lmix, bound=bound)

        scale = rng.uniform(0.0, 3.0)
        lscaled = agg(scale * x)
        a4.record(
            abs(lscaled - scale * lx) <= scaled(tol, lscaled, scale * lx),
            x=x, scale=scale, lambda_scaled=lscaled, scaled_lambda=scale * lx,
        )

    a3 = Tally("A3", f"surjectivity onto {codomain.value}", tol)
    diagonal = np.linspace(-50.0, 50.0, 201)
    values = np.array([rule.f_lambda(t, n) for t in diagonal])
    ok, note = range_evidence(values, codomain.value, tol=tol)
    a3.record(ok, diagonal=[float(diagonal[0]), float(diagonal[-1])], range=[float(values.min()), float(values.max())])

    a5 = Tally("A5", "normalization", tol)
    ones = agg(np.ones(n))
    a5.record(abs(ones - n) <= scaled(tol, n), lambda_ones=ones, n=n)

    results = (
        a1.result(),
        a2.result(),
        a3.result(evidence=True, note=note),
        a4.result(),
        a5.result(),
    )
    logger.debug("aggregation axioms for %s: %s", rule.describe(), [r.passed for r in results])
    return AxiomReport(rule.describe(), results)
