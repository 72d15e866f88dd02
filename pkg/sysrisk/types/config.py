from typing import TypedDict

# Shapes of the tables found in a run configuration file, after TOML decoding.
# Parameters that only some variants use are optional (total=False).


class RuleSpec(TypedDict, total=False):
    type: str  # sum | sum_shift | loss | loss_threshold | critical | exp_utility | contagion
    c: float
    b: float
    gamma: float
    critical: list[int]  # 1-based firm indices
    alphas: list[float]
    liabilities: list[list[float]]
    nominal: bool  # liabilities are nominal amounts, normalized by row


class Rho0Spec(TypedDict, total=False):
    type: str  # entropic | mean_shift | acceptance
    theta: float
    B: float


class InjectSpec(TypedDict, total=False):
    alphas: list[float]
    B: float
    groups: list[int]  # group boundaries n_1 < ... < n_h = n
