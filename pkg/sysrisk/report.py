from __future__ import annotations

import dataclasses
from typing import Any

import xarray as xr


@dataclasses.dataclass
class Report:
    """
    What a command hands to the writers.

    ``fields`` are scalar results in display order, ``tables`` labelled arrays
    (per-firm shares, scenario allocations) and ``checks`` one row per check.
    """

    command: str
    fields: dict[str, Any] = dataclasses.field(default_factory=dict)
    tables: dict[str, xr.DataArray] = dataclasses.field(default_factory=dict)
    checks: list[dict[str, Any]] = dataclasses.field(default_factory=list)
    exit_code: int = 0

    def __repr__(self) -> str:
        return f"Report<{self.command}, {len(self.fields)} fields, {len(self.checks)} checks, exit={self.exit_code}>"
