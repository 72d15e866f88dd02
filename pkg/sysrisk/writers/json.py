from typing import Any

import numpy as np
import ujson  # type: ignore
import xarray as xr

from sysrisk.report import Report


def _plain(obj: Any) -> Any:
    """Replace numpy and xarray values by JSON-ready builtins, recursively."""
    if isinstance(obj, xr.DataArray):
        return _plain(obj.to_dict())
    if isinstance(obj, dict):
        return {str(k): _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _plain(obj.tolist())
    if isinstance(obj, np.generic):
        return _plain(obj.item())
    if isinstance(obj, float) and not np.isfinite(obj):
        # ujson refuses nan and inf
        return None
    return obj


def report_to_json(report: Report) -> str:
    """Serialize a report; keys keep the order the command produced them in."""
    payload = {
        "command": report.command,
        **report.fields,
        "tables": report.tables,
        "checks": report.checks,
        "exit_code": report.exit_code,
    }
    return ujson.dumps(_plain(payload), indent=2, escape_forward_slashes=False)
