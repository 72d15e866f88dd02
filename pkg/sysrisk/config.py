"""
Run configuration: which measure to build, where the scenarios live and how to check them.

Configuration files are TOML. See ``docs/configuration.md`` for the grammar.
"""

from __future__ import annotations

import dataclasses
import logging
import sys
from collections.abc import Mapping
from typing import Any

from sysrisk.aggregation import (
    AggregationRule,
    Contagion,
    Critical,
    ExpUtility,
    Loss,
    LossThreshold,
    Sum,
    SumShift,
)
from sysrisk.allocation import AllocationMethod
from sysrisk.composed import ComposedRiskMeasure
from sysrisk.errors import BadGroupStructureError, ConfigError
from sysrisk.inject import ExponentialInjectCapital, InjectCapitalProblem
from sysrisk.losses import ExponentialLoss
from sysrisk.numerics import QuadratureConfig
from sysrisk.scenarios import GroupStructure
from sysrisk.single_firm import (
    AcceptanceSet,
    Entropic,
    MeanShift,
    ShortfallAcceptance,
    SingleFirmRiskMeasure,
)
from sysrisk.types import InjectSpec, Rho0Spec, RuleSpec
from sysrisk.utils import PathLike, read_text

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

logger = logging.getLogger(__name__)

FORMATS = ("text", "json")
VERIFY_CHECKS = ("rule", "rho0", "systemic", "duality", "inject", "oracle")

_RULE_PARAMS: dict[str, frozenset[str]] = {
    "sum": frozenset(),
    "sum_shift": frozenset({"c"}),
    "loss": frozenset(),
    "loss_threshold": frozenset({"b"}),
    "critical": frozenset({"critical", "gamma"}),
    "exp_utility": frozenset({"alphas"}),
    "contagion": frozenset({"liabilities", "gamma", "nominal"}),
}
_RHO0_PARAMS: dict[str, frozenset[str]] = {
    "entropic": frozenset({"theta"}),
    "mean_shift": frozenset({"B"}),
    "acceptance": frozenset({"theta", "B"}),
}


@dataclasses.dataclass(frozen=True)
class Tolerances:
    dual_gap: float = 1e-8
    full_allocation: float = 1e-6
    oracle: float = 1e-3
    axiom: float = 1e-9
    compare: float = 1e-10

    def __post_init__(self) -> None:
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if not value > 0:
                raise ConfigError(f"Tolerance {field.name} must be positive, but got {value!r}")


@dataclasses.dataclass(frozen=True)
class VerifyConfig:
    """Which check suites ``verify`` runs, on how many samples, and extra axioms to require."""

    samples: int = 1000
    checks: tuple[str, ...] = VERIFY_CHECKS
    require: frozenset[str] = frozenset()

    def __post_init__(self) -> None:
        if self.samples < 1:
            raise ConfigError(f"verify.samples must be at least 1, but got {self.samples}")
        unknown = set(self.checks) - set(VERIFY_CHECKS)
        if unknown:
            raise ConfigError(
                f"Unknown verify checks {sorted(unknown)}; choose from {list(VERIFY_CHECKS)}"
            )
        # keep the registry order whatever order the file lists them in
        object.__setattr__(self, "checks", tuple(c for c in VERIFY_CHECKS if c in self.checks))
        object.__setattr__(self, "require", frozenset(self.require))


@dataclasses.dataclass(frozen=True)
class RunConfig:
    """
    Everything one command needs.

    At least one measure must be given: a composed measure (both ``rho0`` and
    ``rule``) or an inject-capital problem.
    """

    scenarios: str | None = None
    rho0: SingleFirmRiskMeasure | None = None
    rule: AggregationRule | None = None
    inject: InjectCapitalProblem | None = None
    allocation_method: AllocationMethod = AllocationMethod.AUMANN_SHAPLEY
    allocation_alphas: tuple[float, ...] | None = None
    quadrature: QuadratureConfig = dataclasses.field(default_factory=QuadratureConfig)
    seed: int = 0
    format: str = "text"
    tolerances: Tolerances = dataclasses.field(default_factory=Tolerances)
    verify: VerifyConfig = dataclasses.field(default_factory=VerifyConfig)

    def __post_init__(self) -> None:
        if (self.rho0 is None) != (self.rule is None):
            raise ConfigError("A composed measure needs both a [rho0] and a [rule] table")
        if self.rho0 is None and self.inject is None:
            raise ConfigError("No measure configured: give [rho0] and [rule], or [inject]")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {list(FORMATS)}, but got {self.format!r}")
        object.__setattr__(self, "allocation_method", AllocationMethod(self.allocation_method))

    @property
    def composed(self) -> ComposedRiskMeasure | None:
        if self.rho0 is None or self.rule is None:
            return None
        return ComposedRiskMeasure(self.rho0, self.rule)

    @property
    def inject_measure(self) -> ExponentialInjectCapital | None:
        return None if self.inject is None else ExponentialInjectCapital(self.inject)

    def with_overrides(
        self, *, scenarios: str | None = None, seed: int | None = None, format: str | None = None
    ) -> "RunConfig":
        """Command line values take precedence over the file."""
        changes: dict[str, Any] = {}
        if scenarios is not None:
            changes["scenarios"] = scenarios
        if seed is not None:
            changes["seed"] = seed
        if format is not None:
            changes["format"] = format
        return dataclasses.replace(self, **changes) if changes else self

    @classmethod
    def from_toml(
        cls, filepath: PathLike, *, storage_options: dict | None = None
    ) -> "RunConfig":
        """
        Read a TOML configuration file.

        A relative ``scenarios`` path is taken relative to the configuration file.

        Raises
        ------
        ConfigError
            If the file is not valid TOML or describes an invalid run.
        """
        from upath import UPath

        text = read_text(filepath, storage_options=storage_options)
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"Invalid TOML in {filepath}: {e}") from e

        scenarios = data.get("scenarios")
        if isinstance(scenarios, str) and not UPath(scenarios).is_absolute() and "://" not in scenarios:
            data["scenarios"] = str(UPath(filepath).parent / scenarios)
        return cls.from_dict(data)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "RunConfig":
        known = {
            "scenarios", "seed", "format", "rho0", "rule", "inject",
            "allocation", "quadrature", "tolerances", "verify",
        }
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"Unknown configuration keys {sorted(unknown)}")

        allocation = dict(data.get("allocation", {}))
        try:
            kwargs: dict[str, Any] = dict(
                scenarios=data.get("scenarios"),
                rho0=parse_rho0(data["rho0"]) if "rho0" in data else None,
                rule=parse_rule(data["rule"]) if "rule" in data else None,
                inject=parse_inject(data["inject"]) if "inject" in data else None,
                allocation_method=AllocationMethod(allocation.pop("method", "aumann-shapley")),
                allocation_alphas=_alphas(allocation.pop("alphas")) if "alphas" in allocation else None,
                quadrature=QuadratureConfig(**data.get("quadrature", {})),
                seed=int(data.get("seed", 0)),
                format=str(data.get("format", "text")),
                tolerances=Tolerances(**data.get("tolerances", {})),
                verify=_parse_verify(data.get("verify", {})),
            )
        except ConfigError:
            raise
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid configuration: {e}") from e
        if allocation:
            raise ConfigError(f"Unknown keys in [allocation]: {sorted(allocation)}")
        return cls(**kwargs)


def _check_params(table: str, kind: str, spec: Mapping[str, Any], allowed: frozenset[str]) -> None:
    unknown = set(spec) - allowed - {"type"}
    if unknown:
        raise ConfigError(f"Unknown keys for [{table}] type {kind!r}: {sorted(unknown)}")


def _require(table: str, spec: Mapping[str, Any], key: str) -> Any:
    if key not in spec:
        raise ConfigError(f"[{table}] of type {spec.get('type')!r} needs {key!r}")
    return spec[key]


def _alphas(values: Any) -> tuple[float, ...]:
    if not isinstance(values, list) or not values:
        raise ConfigError(f"alphas must be a non-empty list of numbers, but got {values!r}")
    return tuple(float(a) for a in values)


def parse_rule(spec: RuleSpec | Mapping[str, Any]) -> AggregationRule:
    """
    Build an aggregation rule from its ``[rule]`` table.

    Critical firm indices are 1-based in the file and 0-based on the rule.
    """
    kind = spec.get("type")
    if kind not in _RULE_PARAMS:
        raise ConfigError(f"Unknown rule type {kind!r}; choose from {sorted(_RULE_PARAMS)}")
    _check_params("rule", kind, spec, _RULE_PARAMS[kind])
    try:
        if kind == "sum":
            return Sum()
        if kind == "sum_shift":
            return SumShift(float(_require("rule", spec, "c")))
        if kind == "loss":
            return Loss()
        if kind == "loss_threshold":
            return LossThreshold(float(_require("rule", spec, "b")))
        if kind == "critical":
            critical = [int(i) for i in _require("rule", spec, "critical")]
            if any(i < 1 for i in critical):
                raise ConfigError(f"Critical firm indices are 1-based, but got {critical}")
            return Critical(tuple(i - 1 for i in critical), float(_require("rule", spec, "gamma")))
        if kind == "exp_utility":
            return ExpUtility(_alphas(_require("rule", spec, "alphas")))
        liabilities = _require("rule", spec, "liabilities")
        gamma = float(_require("rule", spec, "gamma"))
        if spec.get("nominal", False):
            return Contagion.from_nominal_liabilities(liabilities, gamma)
        return Contagion(tuple(tuple(float(v) for v in row) for row in liabilities), gamma)
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [rule] of type {kind!r}: {e}") from e


def parse_rho0(spec: Rho0Spec | Mapping[str, Any]) -> SingleFirmRiskMeasure:
    """
    Build a single-firm risk measure from its ``[rho0]`` table.

    ``acceptance`` is the shortfall set E[exp(θZ)/θ] ≤ B, evaluated by root finding.
    """
    kind = spec.get("type")
    if kind not in _RHO0_PARAMS:
        raise ConfigError(f"Unknown rho0 type {kind!r}; choose from {sorted(_RHO0_PARAMS)}")
    _check_params("rho0", kind, spec, _RHO0_PARAMS[kind])
    try:
        if kind == "entropic":
            return Entropic(float(_require("rho0", spec, "theta")))
        if kind == "mean_shift":
            return MeanShift(float(_require("rho0", spec, "B")))
        theta = float(_require("rho0", spec, "theta"))
        B = float(_require("rho0", spec, "B"))
        return AcceptanceSet(
            ShortfallAcceptance(ExponentialLoss(theta), B),
            description=f"acceptance(theta={theta:g}, B={B:g})",
        )
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [rho0] of type {kind!r}: {e}") from e


def parse_inject(spec: InjectSpec | Mapping[str, Any]) -> InjectCapitalProblem:
    """Build the inject-capital problem from its ``[inject]`` table."""
    unknown = set(spec) - {"alphas", "B", "groups"}
    if unknown:
        raise ConfigError(f"Unknown keys in [inject]: {sorted(unknown)}")
    try:
        alphas = _alphas(_require("inject", spec, "alphas"))
        groups = GroupStructure(tuple(spec["groups"])) if "groups" in spec else None
        return InjectCapitalProblem(alphas, float(_require("inject", spec, "B")), groups)
    except BadGroupStructureError as e:
        raise ConfigError(f"Invalid [inject] groups: {e}") from e
    except ConfigError:
        raise
    except (TypeError, ValueError) as e:
        raise ConfigError(f"Invalid [inject]: {e}") from e


def _parse_verify(spec: Mapping[str, Any]) -> VerifyConfig:
    unknown = set(spec) - {"samples", "checks", "require"}
    if unknown:
        raise ConfigError(f"Unknown keys in [verify]: {sorted(unknown)}")
    return VerifyConfig(
        samples=int(spec.get("samples", 1000)),
        checks=tuple(spec.get("checks", VERIFY_CHECKS)),
        require=frozenset(spec.get("require", ())),
    )
