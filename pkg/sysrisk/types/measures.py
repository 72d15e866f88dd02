from typing import TYPE_CHECKING, Protocol, runtime_checkable

import numpy as np

if TYPE_CHECKING:
    from sysrisk.scenarios import SystemLoss


@runtime_checkable
class SystemicRiskMeasure(Protocol):
    """Anything that assigns a number to a system of random losses and to a deterministic loss vector."""

    @property
    def n(self) -> int | None: ...

    def evaluate(self, X: "SystemLoss") -> float: ...

    def evaluate_point(self, x: np.ndarray) -> float: ...

    def expected_axioms(self) -> frozenset[str]: ...


@runtime_checkable
class DifferentiableRiskMeasure(SystemicRiskMeasure, Protocol):
    def directional_derivative(
        self, X: "SystemLoss", V: "SystemLoss", side: str = "right"
    ) -> float: ...
