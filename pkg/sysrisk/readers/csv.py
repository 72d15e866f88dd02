import io
import re

import numpy as np
import pandas as pd
import xarray as xr

from sysrisk.errors import ScenarioParseError
from sysrisk.scenarios import ScenarioSpace, SystemLoss

# header is line 1, the first scenario line 2
_FIRST_DATA_LINE = 2
_PANDAS_LINE = re.compile(r"line (\d+)")


def parse_csv_scenarios(text: str) -> SystemLoss:
    """
    Parse scenarios from CSV text with header ``prob,firm_1,...,firm_n``.

    One row per scenario. The first column holds the probabilities, every
    further column the losses of one firm, named by its header.

    Raises
    ------
    ScenarioParseError
        With the offending line number where one can be determined.
    """
    try:
        # header=None keeps duplicate names, which pandas would otherwise mangle
        raw = pd.read_csv(io.StringIO(text), header=None, dtype=str, skipinitialspace=True)
    except pd.errors.EmptyDataError as e:
        raise ScenarioParseError("Scenario file is empty") from e
    except pd.errors.ParserError as e:
        match = _PANDAS_LINE.search(str(e))
        raise ScenarioParseError(
            f"Malformed CSV: {e}", line=int(match.group(1)) if match else None
        ) from e

    columns = [str(c).strip() for c in raw.iloc[0]]
    df = raw.iloc[1:].reset_index(drop=True)
    if not columns or not columns[0].lower().startswith("prob"):
        raise ScenarioParseError("Header must start with a probability column 'prob'", line=1)
    if len(columns) < 2:
        raise ScenarioParseError("Header names no firm columns", line=1)
    if len(set(columns)) != len(columns):
        raise ScenarioParseError(f"Duplicate column names in header {columns}", line=1)
    if df.empty:
        raise ScenarioParseError("Scenario file has a header but no scenarios")

    numeric = df.apply(pd.to_numeric, errors="coerce").to_numpy(dtype=np.float64)
    bad = ~np.isfinite(numeric)
    if bad.any():
        row, col = (int(v) for v in np.argwhere(bad)[0])
        raise ScenarioParseError(
            f"Column {columns[col]!r} holds {df.iat[row, col]!r}, which is not a finite number",
            line=row + _FIRST_DATA_LINE,
        )

    try:
        space = ScenarioSpace.from_weights(numeric[:, 0])
    except ValueError as e:
        raise ScenarioParseError(f"Invalid probabilities: {e}") from e

    da = xr.DataArray(
        numeric[:, 1:].T,
        dims=("firm", "scenario"),
        coords={
            "firm": columns[1:],
            "scenario": np.arange(space.K),
            "probability": ("scenario", np.array(space.probabilities)),
        },
        name="loss",
    )
    return SystemLoss.from_dataarray(da)
