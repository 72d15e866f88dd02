from sysrisk.types.config import (  # type: ignore[F401]
    InjectSpec,
    Rho0Spec,
    RuleSpec,
)
from sysrisk.types.measures import (  # type: ignore[F401]
    DifferentiableRiskMeasure,
    SystemicRiskMeasure,
)

__all__ = [
    "DifferentiableRiskMeasure",
    "InjectSpec",
    "Rho0Spec",
    "RuleSpec",
    "SystemicRiskMeasure",
]
