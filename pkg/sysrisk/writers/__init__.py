from sysrisk.report import Report
from sysrisk.writers.json import report_to_json
from sysrisk.writers.text import report_to_text


def write_report(report: Report, fmt: str = "text") -> str:
    """Render a report as ``"json"`` or ``"text"``."""
    if fmt == "json":
        return report_to_json(report)
    if fmt == "text":
        return report_to_text(report)
    raise ValueError(f"Unknown report format {fmt!r}")


__all__ = ["report_to_json", "report_to_text", "write_report"]
