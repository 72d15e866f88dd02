import os

import numpy as np
import pytest

from sysrisk.aggregation import (
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
from sysrisk.config import (
    VERIFY_CHECKS,
    RunConfig,
    Tolerances,
    VerifyConfig,
    parse_inject,
    parse_rho0,
    parse_rule,
)
from sysrisk.errors import ConfigError
from sysrisk.inject import ExponentialInjectCapital
from sysrisk.scenarios import GroupStructure
from sysrisk.single_firm import AcceptanceSet, Entropic, MeanShift

FULL = """
scenarios = "scenarios.csv"
seed = 7
format = "json"

[rho0]
type = "entropic"
theta = 0.5

[rule]
type = "sum"

[inject]
alphas = [1, 1]
B = 2
groups = [1, 2]

[allocation]
method = "dual-penalized"
alphas = [1.0, 1.0]

[quadrature]
initial_nodes = 101
tol = 1e-6

[tolerances]
dual_gap = 1e-6

[verify]
samples = 25
checks = ["duality", "rule"]
require = ["S3"]
"""


class TestRunConfig:
    def test_from_toml(self, write_config, tmpdir):
        cfg = RunConfig.from_toml(write_config(FULL))
        assert cfg.scenarios == os.path.join(str(tmpdir), "scenarios.csv")
        assert cfg.seed == 7
        assert cfg.format == "json"
        assert cfg.rho0 == Entropic(0.5)
        assert cfg.rule == Sum()
        assert cfg.inject.structure == GroupStructure((1, 2))
        assert cfg.allocation_method is AllocationMethod.DUAL_PENALIZED
        assert cfg.allocation_alphas == (1.0, 1.0)
        assert cfg.quadrature.initial_nodes == 101
        assert cfg.quadrature.tol == 1e-6
        assert cfg.tolerances.dual_gap == 1e-6
        assert cfg.tolerances.oracle == Tolerances().oracle
        assert cfg.verify.samples == 25
        assert cfg.verify.checks == ("rule", "duality")
        assert cfg.verify.require == frozenset({"S3"})

    def test_defaults(self):
        cfg = RunConfig.from_dict({"rho0": {"type": "mean_shift", "B": 0}, "rule": {"type": "loss"}})
        assert cfg.scenarios is None
        assert cfg.seed == 0
        assert cfg.format == "text"
        assert cfg.allocation_method is AllocationMethod.AUMANN_SHAPLEY
        assert cfg.allocation_alphas is None
        assert cfg.verify.checks == VERIFY_CHECKS
        assert cfg.composed == ComposedRiskMeasure(MeanShift(0.0), Loss())
        assert cfg.inject_measure is None

    def test_absolute_scenarios_path(self, write_config, tmpdir):
        elsewhere = os.path.join(str(tmpdir), "data", "scenarios.json")
        body = f'scenarios = "{elsewhere}"\n[inject]\nalphas = [1.0]\nB = 1.0\n'
        cfg = RunConfig.from_toml(write_config(body))
        assert cfg.scenarios == elsewhere
        assert cfg.composed is None
        assert isinstance(cfg.inject_measure, ExponentialInjectCapital)

    def test_with_overrides(self):
        cfg = RunConfig.from_dict({"inject": {"alphas": [1.0], "B": 1.0}, "seed": 3})
        assert cfg.with_overrides() is cfg
        changed = cfg.with_overrides(scenarios="s.csv", seed=11, format="json")
        assert (changed.scenarios, changed.seed, changed.format) == ("s.csv", 11, "json")
        assert cfg.seed == 3
        with pytest.raises(ConfigError, match="format must be one of"):
            cfg.with_overrides(format="yaml")

    def test_invalid_toml(self, write_config):
        with pytest.raises(ConfigError, match="Invalid TOML"):
            RunConfig.from_toml(write_config("[rule\ntype = 'sum'\n"))

    def test_missing_file(self, tmpdir):
        with pytest.raises(FileNotFoundError):
            RunConfig.from_toml(os.path.join(str(tmpdir), "absent.toml"))

    @pytest.mark.parametrize(
        "data, match",
        [
            ({}, "No measure configured"),
            ({"rule": {"type": "sum"}}, "needs both"),
            ({"rho0": {"type": "entropic", "theta": 1.0}}, "needs both"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "format": "yaml"}, "format must be one of"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "firms": 2}, "Unknown configuration keys"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "allocation": {"weights": 1}}, r"Unknown keys in \[allocation\]"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "allocation": {"method": "shapley"}}, "Invalid configuration"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "quadrature": {"initial_nodes": 100}}, "Invalid configuration"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "quadrature": {"nodes": 101}}, "Invalid configuration"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "tolerances": {"dual_gap": 0.0}}, "Tolerance dual_gap must be positive"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "verify": {"samples": 0}}, "at least 1"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "verify": {"checks": ["speed"]}}, "Unknown verify checks"),
            ({"inject": {"alphas": [1.0], "B": 1.0}, "verify": {"repeat": 2}}, r"Unknown keys in \[verify\]"),
        ],
    )
    def test_invalid(self, data, match):
        with pytest.raises(ConfigError, match=match):
            RunConfig.from_dict(data)

    def test_config_errors_are_value_errors(self):
        with pytest.raises(ValueError):
            RunConfig.from_dict({})


class TestVerifyConfig:
    def test_registry_order(self):
        cfg = VerifyConfig(checks=("oracle", "rho0", "rule"))
        assert cfg.checks == ("rule", "rho0", "oracle")

    def test_require_is_frozen(self):
        assert VerifyConfig(require={"S1"}).require == frozenset({"S1"})


class TestParseRule:
    @pytest.mark.parametrize(
        "spec, expected",
        [
            ({"type": "sum"}, Sum()),
            ({"type": "sum_shift", "c": 1}, SumShift(1.0)),
            ({"type": "loss"}, Loss()),
            ({"type": "loss_threshold", "b": 0.5}, LossThreshold(0.5)),
            ({"type": "critical", "critical": [1, 3], "gamma": 2}, Critical((0, 2), 2.0)),
            ({"type": "exp_utility", "alphas": [1, 2]}, ExpUtility((1.0, 2.0))),
        ],
    )
    def test_types(self, spec, expected):
        assert parse_rule(spec) == expected

    def test_contagion(self):
        rule = parse_rule({"type": "contagion", "liabilities": [[0.0, 0.5], [0.25, 0.0]], "gamma": 2.0})
        assert isinstance(rule, Contagion)
        np.testing.assert_array_equal(rule.matrix, [[0.0, 0.5], [0.25, 0.0]])

    def test_nominal_contagion(self):
        rule = parse_rule({"type": "contagion", "liabilities": [[0, 4], [2, 0]], "gamma": 3, "nominal": True})
        np.testing.assert_array_equal(rule.matrix, [[0.0, 1.0], [1.0, 0.0]])

    @pytest.mark.parametrize(
        "spec, match",
        [
            ({"type": "max"}, "Unknown rule type 'max'"),
            ({}, "Unknown rule type None"),
            ({"type": "sum", "c": 1.0}, "Unknown keys for \\[rule\\] type 'sum'"),
            ({"type": "sum_shift"}, "needs 'c'"),
            ({"type": "critical", "critical": [0], "gamma": 1.0}, "1-based"),
            ({"type": "critical", "critical": [1], "gamma": -1.0}, "Invalid \\[rule\\] of type 'critical'"),
            ({"type": "loss_threshold", "b": "high"}, "Invalid \\[rule\\]"),
            ({"type": "exp_utility", "alphas": []}, "non-empty list"),
            ({"type": "contagion", "liabilities": [[0.0, 0.5], [0.5, 0.0]], "gamma": 0.5}, "Invalid \\[rule\\] of type 'contagion'"),
        ],
    )
    def test_invalid(self, spec, match):
        with pytest.raises(ConfigError, match=match):
            parse_rule(spec)


class TestParseRho0:
    def test_types(self):
        assert parse_rho0({"type": "entropic", "theta": 2}) == Entropic(2.0)
        assert parse_rho0({"type": "mean_shift", "B": 1}) == MeanShift(1.0)
        acceptance = parse_rho0({"type": "acceptance", "theta": 1, "B": 2})
        assert isinstance(acceptance, AcceptanceSet)
        assert acceptance.describe() == "acceptance(theta=1, B=2)"

    @pytest.mark.parametrize(
        "spec, match",
        [
            ({"type": "var"}, "Unknown rho0 type"),
            ({"type": "entropic"}, "needs 'theta'"),
            ({"type": "entropic", "theta": 0.0}, "Invalid \\[rho0\\]"),
            ({"type": "mean_shift", "theta": 1.0}, "Unknown keys for \\[rho0\\]"),
            ({"type": "acceptance", "theta": 1.0}, "needs 'B'"),
        ],
    )
    def test_invalid(self, spec, match):
        with pytest.raises(ConfigError, match=match):
            parse_rho0(spec)


class TestParseInject:
    def test_groups(self):
        p = parse_inject({"alphas": [1, 2, 3], "B": 1.5, "groups": [2, 3]})
        assert p.alphas == (1.0, 2.0, 3.0)
        assert p.h == 2

    @pytest.mark.parametrize(
        "spec, match",
        [
            ({"alphas": [1.0, 1.0], "B": 1.0, "groups": [1, 3]}, "Invalid \\[inject\\] groups"),
            ({"alphas": [1.0, 1.0], "B": 1.0, "groups": [2, 1]}, "Invalid \\[inject\\] groups"),
            ({"alphas": [1.0], "B": 0.0}, "Invalid \\[inject\\]"),
            ({"B": 1.0}, "needs 'alphas'"),
            ({"alphas": [1.0]}, "needs 'B'"),
            ({"alphas": [1.0], "B": 1.0, "theta": 1.0}, "Unknown keys in \\[inject\\]"),
        ],
    )
    def test_invalid(self, spec, match):
        with pytest.raises(ConfigError, match=match):
            parse_inject(spec)
