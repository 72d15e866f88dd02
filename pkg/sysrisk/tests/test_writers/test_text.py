import pytest
import xarray as xr

from sysrisk.report import Report
from sysrisk.scenarios import ScenarioSpace, SystemLoss
from sysrisk.writers import write_report
from sysrisk.writers.text import CHECK_COLUMNS, report_to_text


def test_fields_are_aligned():
    text = report_to_text(Report("risk", {"risk": 0.1 + 0.2, "lambda_star": 1.0, "groups": [1.0, 2.5]}))
    lines = text.splitlines()
    assert lines[0] == "command: risk"
    assert lines[1] == "risk        : 0.3"
    assert lines[2] == "lambda_star : 1"
    assert lines[3] == "groups      : [1, 2.5]"
    assert lines[-1] == "exit code: 0"


def test_tables():
    per_firm = xr.DataArray([0.5, 1.5], dims="firm", coords={"firm": ["bank_a", "bank_b"]}, name="capital")
    Y = SystemLoss([[1.0, 2.0], [3.0, 4.0]], ScenarioSpace.uniform(2), ("bank_a", "bank_b"))
    report = Report("allocate", tables={"per_firm": per_firm, "scenario_allocation": Y.to_dataarray("allocation")})
    text = report_to_text(report)
    assert "per_firm:" in text
    assert "capital" in text
    assert "scenario_allocation:" in text
    assert "bank_b" in text


def test_checks_table():
    rows = [
        {"suite": "systemic", "axiom": "S1", "name": "monotonicity", "passed": True, "required": True,
         "checked": 10, "skipped": 0, "tolerance": 1e-9, "note": "", "counterexample": None},
        {"suite": "systemic", "axiom": "S3", "name": "positive homogeneity", "passed": False, "required": False,
         "checked": 10, "skipped": 0, "tolerance": 1e-9, "note": "", "counterexample": {"scale": 2.0}},
    ]
    text = report_to_text(Report("verify", checks=rows, exit_code=0))
    header = text.split("checks:\n")[1].splitlines()[0]
    assert header.split() == CHECK_COLUMNS
    assert "counterexample" not in text
    assert "positive homogeneity" in text


def test_unknown_format():
    with pytest.raises(ValueError, match="Unknown report format 'yaml'"):
        write_report(Report("risk"), "yaml")
