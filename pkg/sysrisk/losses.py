"""Loss functions l: ℝ → ℝ used by shortfall acceptance sets and capital-injection problems."""

from __future__ import annotations

import dataclasses
from typing import Protocol, runtime_checkable

import numpy as np
from scipy.special import xlogy


@runtime_checkable
class LossFunction(Protocol):
    """
    A strictly convex, increasing loss satisfying the Inada conditions.

    All methods act elementwise on arrays.
    """

    def __call__(self, x): ...

    def derivative(self, x): ...

    def conjugate(self, y): ...

    def conjugate_derivative(self, y): ...

    @property
    def at_minus_infinity(self) -> float: ...


@dataclasses.dataclass(frozen=True)
class ExponentialLoss:
    """
    l(x) = exp(αx) / α.

    Its conjugate is l*(y) = (y/α)(ln y − 1) with (l*)'(y) = ln(y)/α.
    """

    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"Risk aversion alpha must be positive, but got {self.alpha}")

    def __call__(self, x):
        return np.exp(self.alpha * np.asarray(x)) / self.alpha

    def derivative(self, x):
        return np.exp(self.alpha * np.asarray(x))

    def conjugate(self, y):
        y = np.asarray(y, dtype=np.float64)
        return (xlogy(y, y) - y) / self.alpha

    def conjugate_derivative(self, y):
        return np.log(np.asarray(y, dtype=np.float64)) / self.alpha

    @property
    def at_minus_infinity(self) -> float:
        return 0.0


@dataclasses.dataclass(frozen=True)
class QuadraticExponentialLoss:
    """
    l(x) = exp(αx)/α + x⁺²/2, an Inada loss without a closed-form conjugate.

    Only the primal methods are available; it exists to feed the brute-force oracle.
    """

    alpha: float

    def __post_init__(self) -> None:
        if not self.alpha > 0:
            raise ValueError(f"Risk aversion alpha must be positive, but got {self.alpha}")

    def __call__(self, x):
        x = np.asarray(x)
        return np.exp(self.alpha * x) / self.alpha + 0.5 * np.maximum(x, 0.0) ** 2

    def derivative(self, x):
        x = np.asarray(x)
        return np.exp(self.alpha * x) + np.maximum(x, 0.0)

    def conjugate(self, y):
        raise NotImplementedError("No closed-form conjugate for QuadraticExponentialLoss")

    def conjugate_derivative(self, y):
        raise NotImplementedError("No closed-form conjugate for QuadraticExponentialLoss")

    @property
    def at_minus_infinity(self) -> float:
        return 0.0
