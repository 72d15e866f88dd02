"""
Command line front end: ``sysrisk risk|allocate|verify|compare``.

Exit codes: 0 success, 1 a required check failed, 2 bad input, 3 numerical
failure, 4 a method that the configured measure does not support.
"""

from __future__ import annotations

import argparse
import logging
import sys
from collections.abc import Callable, Iterable, Sequence
from typing import Any, Union

import xarray as xr

from sysrisk.aggregation import ExpUtility, check_ar_axioms
from sysrisk.allocation import allocate, full_allocation_check
from sysrisk.checks import AxiomResult, Tally
from sysrisk.composed import (
    ComposedRiskMeasure,
    check_systemic_axioms,
    dual_gap,
    subgradient_check,
    verify_dual_feasibility,
)
from sysrisk.config import FORMATS, RunConfig
from sysrisk.errors import (
    ConfigError,
    IncompatibleError,
    InputError,
    NumericalError,
    UnsupportedError,
)
from sysrisk.inject import (
    ORACLE_MAX_FIRMS,
    ORACLE_MAX_SCENARIOS,
    ExponentialInjectCapital,
    expected_loss,
    group_allocation,
    lambda_star,
    optimal_allocation,
    solve_numerical_oracle,
    verify_inject_properties,
)
from sysrisk.readers import read_scenarios
from sysrisk.report import Report
from sysrisk.scenarios import SystemLoss, group_sums
from sysrisk.single_firm import check_single_firm_axioms
from sysrisk.writers import write_report

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_CHECK_FAILED = 1
EXIT_INPUT = 2
EXIT_NUMERICAL = 3
EXIT_INCOMPATIBLE = 4

Measure = Union[ComposedRiskMeasure, ExponentialInjectCapital]


def _load(cfg: RunConfig) -> SystemLoss:
    if cfg.scenarios is None:
        raise ConfigError("No scenario file: set 'scenarios' in the config or pass --scenarios")
    X = read_scenarios(cfg.scenarios)
    logger.info("loaded %d firms over %d scenarios", X.n, X.K)
    return X


def _single_measure(cfg: RunConfig, command: str) -> Measure:
    composed, inject = cfg.composed, cfg.inject_measure
    if composed is not None and inject is not None:
        raise ConfigError(
            f"'{command}' needs exactly one measure, but both [rho0]/[rule] and [inject] are configured"
        )
    measure = composed if composed is not None else inject
    assert measure is not None
    return measure


def _formula(rho: Measure) -> str:
    if isinstance(rho, ComposedRiskMeasure):
        return "rho0(Lambda(X))"
    return "sum_j (1/theta_j) ln E[exp(theta_j S_j)] - ln(theta B)/theta_j"


def cmd_risk(cfg: RunConfig) -> Report:
    """Evaluate the configured measure on the scenarios."""
    X = _load(cfg)
    rho = _single_measure(cfg, "risk")
    fields: dict[str, Any] = {
        "measure": rho.describe(),
        "formula": _formula(rho),
        "firms": X.n,
        "scenarios": X.K,
        "risk": rho.evaluate(X),
    }
    if isinstance(rho, ExponentialInjectCapital):
        fields["group_allocation"] = group_allocation(rho.problem, X)
        fields["lambda_star"] = lambda_star(rho.problem)
    return Report("risk", fields)


def _allocation_alphas(cfg: RunConfig) -> tuple[float, ...] | None:
    if cfg.allocation_alphas is not None:
        return cfg.allocation_alphas
    if isinstance(cfg.rule, ExpUtility):
        return cfg.rule.alphas
    return None


def cmd_allocate(cfg: RunConfig) -> Report:
    """Split the risk among the firms with the configured allocation method."""
    X = _load(cfg)
    rho = _single_measure(cfg, "allocate")
    result = allocate(
        cfg.allocation_method, rho, X, alphas=_allocation_alphas(cfg), cfg=cfg.quadrature
    )
    fields = {"measure": rho.describe(), **result.dict()}
    fields.pop("per_firm")
    fields["full_allocation"] = full_allocation_check(result, cfg.tolerances.full_allocation)

    tables = {
        "per_firm": xr.DataArray(
            list(result.per_firm), dims="firm", coords={"firm": list(result.firms)}, name="capital"
        )
    }
    if result.scenario_allocation is not None:
        tables["scenario_allocation"] = result.scenario_allocation.to_dataarray("allocation")
    return Report("allocate", fields, tables)


def _rows(suite: str, results: Iterable[AxiomResult], required: Callable[[str], bool]) -> list[dict[str, Any]]:
    return [{"suite": suite, **r.dict(), "required": required(r.axiom)} for r in results]


def _skipped(axiom: str, name: str, note: str) -> AxiomResult:
    return AxiomResult(axiom, name, passed=True, checked=0, tolerance=0.0, note=note)


def _composed_suites(cfg: RunConfig, rho: ComposedRiskMeasure, X: SystemLoss) -> list[dict[str, Any]]:
    samples, seed, tol = cfg.verify.samples, cfg.seed, cfg.tolerances
    checks, extra = cfg.verify.checks, cfg.verify.require
    rows: list[dict[str, Any]] = []

    if "rule" in checks:
        expected = rho.rule.expected_axioms() | extra
        report = check_ar_axioms(rho.rule, samples, seed, n=X.n, tol=tol.axiom)
        rows += _rows("rule", report, expected.__contains__)
    if "rho0" in checks:
        expected = rho.rho0.expected_axioms() | extra
        report = check_single_firm_axioms(rho.rho0, samples, seed, space=X.space, tol=tol.axiom)
        rows += _rows("rho0", report, expected.__contains__)
    if "systemic" in checks:
        expected = rho.expected_axioms() | extra
        report = check_systemic_axioms(rho, samples, seed, n=X.n, tol=tol.axiom)
        rows += _rows("systemic", report, expected.__contains__)
    if "duality" in checks:
        try:
            sol = rho.dual_solution(X)
        except UnsupportedError as e:
            rows += _rows("duality", [_skipped("dual-gap", "strong duality", str(e))], lambda _: False)
        else:
            gap = Tally("dual-gap", "strong duality", tol.dual_gap)
            value = dual_gap(rho, X, sol)
            gap.record(abs(value) <= tol.dual_gap, gap=value)
            sub = subgradient_check(rho, X, sol, samples, seed, tol=tol.axiom)
            subgradient = AxiomResult(
                "subgradient", "dual density is a subgradient", sub.passed, sub.checked,
                tol.axiom, sub.counterexample, note=f"worst margin {sub.worst_margin:.3g}",
            )
            feasibility = verify_dual_feasibility(rho, sol, samples, seed, tol=tol.axiom)
            rows += _rows("duality", [gap.result(), *feasibility, subgradient], lambda _: True)
    return rows


def _inject_suites(cfg: RunConfig, R: ExponentialInjectCapital, X: SystemLoss) -> list[dict[str, Any]]:
    samples, seed, tol = cfg.verify.samples, cfg.seed, cfg.tolerances
    p = R.problem
    rows: list[dict[str, Any]] = []

    if "inject" in cfg.verify.checks:
        expected = R.expected_axioms() | cfg.verify.require
        report = verify_inject_properties(p, samples, seed, tol=tol.axiom)
        rows += _rows("inject", report, expected.__contains__)

        risk = R.evaluate(X)
        gap = Tally("dual-gap", "strong duality", tol.dual_gap)
        value = dual_gap(R, X, R.dual_solution(X))
        gap.record(abs(value) <= tol.dual_gap, gap=value)
        binding = Tally("acceptance", "optimal allocation meets E[sum l(X - Y)] = B", tol.dual_gap)
        loss = expected_loss(p, X, optimal_allocation(p, X))
        binding.record(abs(loss - p.B) <= tol.dual_gap, expected_loss=loss, B=p.B)
        groups = Tally("group-allocation", "group capital adds up to R", tol.compare)
        total = sum(group_allocation(p, X))
        groups.record(abs(total - risk) <= tol.compare, total=total, risk=risk)
        rows += _rows("inject", [gap.result(), binding.result(), groups.result()], lambda _: True)

    if "oracle" in cfg.verify.checks:
        if p.n > ORACLE_MAX_FIRMS or X.K > ORACLE_MAX_SCENARIOS:
            note = f"needs at most {ORACLE_MAX_FIRMS} firms and {ORACLE_MAX_SCENARIOS} scenarios"
            rows += _rows("oracle", [_skipped("oracle-value", "oracle agrees with closed form", note)], lambda _: False)
        else:
            sol = solve_numerical_oracle(p, X)
            risk = R.evaluate(X)
            value = Tally("oracle-value", "oracle agrees with closed form", tol.oracle)
            value.record(abs(sol.value - risk) <= tol.oracle, oracle=sol.value, closed_form=risk)
            binding = Tally("oracle-acceptance", "acceptance binds at the oracle", tol.oracle)
            binding.record(abs(sol.expected_loss - p.B) <= tol.oracle, expected_loss=sol.expected_loss, B=p.B)
            deterministic = Tally("oracle-groups", "oracle group sums are deterministic", 1e-18)
            deterministic.record(all(s.is_deterministic for s in group_sums(sol.allocation, p.structure)))
            rows += _rows(
                "oracle", [value.result(), binding.result(), deterministic.result()], lambda _: True
            )
    return rows


def cmd_verify(cfg: RunConfig) -> Report:
    """
    Run the enabled check suites in registry order.

    A check is required when its measure declares the property, or when the
    configuration lists it under ``[verify] require``. Only failures of
    required checks fail the command.
    """
    X = _load(cfg)
    rows: list[dict[str, Any]] = []
    if cfg.composed is not None:
        rows += _composed_suites(cfg, cfg.composed, X)
    if cfg.inject_measure is not None:
        rows += _inject_suites(cfg, cfg.inject_measure, X)

    failed = [f"{r['suite']}:{r['axiom']}" for r in rows if r["required"] and not r["passed"]]
    fields = {
        "checks_run": len(rows),
        "failed_required": failed,
        "failed_optional": [f"{r['suite']}:{r['axiom']}" for r in rows if not r["required"] and not r["passed"]],
        "samples": cfg.verify.samples,
        "seed": cfg.seed,
    }
    return Report("verify", fields, checks=rows, exit_code=EXIT_CHECK_FAILED if failed else EXIT_OK)


def cmd_compare(cfg: RunConfig) -> Report:
    """Evaluate the composed and the inject-capital measure on the same scenarios."""
    composed, inject = cfg.composed, cfg.inject_measure
    if composed is None or inject is None:
        raise ConfigError("'compare' needs both a composed measure ([rho0], [rule]) and [inject]")
    X = _load(cfg)
    a, b = composed.evaluate(X), inject.evaluate(X)
    fields = {
        "composed": composed.describe(),
        "inject": inject.describe(),
        "composed_risk": a,
        "inject_risk": b,
        "difference": a - b,
        "tolerance": cfg.tolerances.compare,
        "agree": abs(a - b) <= cfg.tolerances.compare,
    }
    return Report("compare", fields)


COMMANDS: dict[str, Callable[[RunConfig], Report]] = {
    "risk": cmd_risk,
    "allocate": cmd_allocate,
    "verify": cmd_verify,
    "compare": cmd_compare,
}

_HELP = {
    "risk": "evaluate the systemic risk of the scenarios",
    "allocate": "allocate the systemic risk to the firms",
    "verify": "run axiom, duality and oracle checks",
    "compare": "compare the composed and the inject-capital measure",
}


def build_parser() -> argparse.ArgumentParser:
    from sysrisk import __version__

    parser = argparse.ArgumentParser(
        prog="sysrisk", description="Scenario-based systemic risk measures and capital allocation."
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="command", required=True)
    for name, help in _HELP.items():
        sub = subparsers.add_parser(name, help=help)
        sub.add_argument("--config", required=True, help="TOML run configuration")
        sub.add_argument("--scenarios", help="scenario file (.csv or .json), overrides the config")
        sub.add_argument("--format", choices=FORMATS, help="report format, overrides the config")
        sub.add_argument("--seed", type=int, help="seed of the randomized checks, overrides the config")
        sub.add_argument("-v", "--verbose", action="store_true", help="log debug output to stderr")
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
    logging.captureWarnings(True)

    try:
        cfg = RunConfig.from_toml(args.config).with_overrides(
            scenarios=args.scenarios, seed=args.seed, format=args.format
        )
        logger.info("running %s", args.command)
        report = COMMANDS[args.command](cfg)
    except (InputError, FileNotFoundError) as e:
        print(f"sysrisk: input error: {e}", file=sys.stderr)
        return EXIT_INPUT
    except NumericalError as e:
        print(f"sysrisk: numerical error: {e}", file=sys.stderr)
        return EXIT_NUMERICAL
    except IncompatibleError as e:
        print(f"sysrisk: unsupported: {e}", file=sys.stderr)
        return EXIT_INCOMPATIBLE

    print(write_report(report, cfg.format))
    logger.info("%s finished with exit code %d", args.command, report.exit_code)
    return report.exit_code


if __name__ == "__main__":
    sys.exit(main())
