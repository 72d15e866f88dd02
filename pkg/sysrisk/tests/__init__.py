import numpy as np
import pytest

from sysrisk.scenarios import ScenarioSpace, SystemLoss

slow = pytest.mark.slow


def create_system(
    n: int = 2, K: int = 4, seed: int = 0, scale: float = 1.0
) -> SystemLoss:
    """
    Random system with sensible defaults.

    Scenario probabilities are Dirichlet draws, losses are normal with the given scale.
    """
    rng = np.random.default_rng(seed)
    space = ScenarioSpace(rng.dirichlet(np.ones(K)))
    return SystemLoss(rng.normal(0.0, scale, (n, K)), space)


def coin_flip_system() -> SystemLoss:
    """Two firms and two equally likely scenarios; exactly one firm loses 1."""
    return SystemLoss(np.array([[1.0, 0.0], [0.0, 1.0]]), ScenarioSpace.uniform(2))
