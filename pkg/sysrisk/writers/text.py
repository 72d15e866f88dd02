from typing import Any

import pandas as pd

from sysrisk.report import Report

CHECK_COLUMNS = ["suite", "axiom", "name", "passed", "required", "checked", "skipped", "tolerance", "note"]


def _format(value: Any) -> str:
    if isinstance(value, float):
        return f"{value:.12g}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(_format(v) for v in value) + "]"
    if isinstance(value, dict):
        return "{" + ", ".join(f"{k}: {_format(v)}" for k, v in value.items()) + "}"
    return str(value)


def report_to_text(report: Report) -> str:
    """Aligned human-readable rendering of a report."""
    lines = [f"command: {report.command}"]
    width = max((len(k) for k in report.fields), default=0)
    lines += [f"{key.ljust(width)} : {_format(value)}" for key, value in report.fields.items()]

    for name, da in report.tables.items():
        df = da.to_pandas()
        frame = df.to_frame(name=da.name or name) if isinstance(df, pd.Series) else df
        lines += ["", f"{name}:", frame.to_string(float_format=lambda v: f"{v:.12g}")]

    if report.checks:
        checks = pd.DataFrame(report.checks).reindex(columns=CHECK_COLUMNS)
        lines += ["", "checks:", checks.to_string(index=False)]

    lines += ["", f"exit code: {report.exit_code}"]
    return "\n".join(lines)
