from sysrisk.scenarios import (  # noqa: F401
    GroupStructure,
    RandomVariable,
    ScenarioSpace,
    SystemLoss,
)
from sysrisk.aggregation import AggregationRule  # noqa: F401
from sysrisk.single_firm import SingleFirmRiskMeasure  # noqa: F401
from sysrisk.composed import ComposedRiskMeasure  # noqa: F401
from sysrisk.inject import ExponentialInjectCapital, InjectCapitalProblem  # noqa: F401
from sysrisk.allocation import allocate  # noqa: F401
from sysrisk.readers import read_scenarios  # noqa: F401

from importlib.metadata import version as _version

try:
    __version__ = _version("sysrisk")
except Exception:
    # Local copy or not installed with setuptools.
    __version__ = "9999"
