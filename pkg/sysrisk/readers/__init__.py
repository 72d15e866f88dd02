from enum import Enum
from typing import Optional

from sysrisk.errors import ScenarioParseError
from sysrisk.scenarios import SystemLoss
from sysrisk.utils import PathLike, read_text, suffix


class ScenarioFormat(str, Enum):
    """Scenario file formats, named by their file extension."""

    CSV = "csv"
    JSON = "json"


def read_scenarios(
    filepath: PathLike,
    *,
    fmt: Optional[ScenarioFormat | str] = None,
    storage_options: Optional[dict] = None,
) -> SystemLoss:
    """
    Read a scenario file into a SystemLoss.

    Parameters
    ----------
    filepath : str or os.PathLike
        Local path or fsspec URL.
    fmt : ScenarioFormat or {"csv", "json"}, optional
        File format; guessed from the file extension if not given.
    storage_options : dict, optional
        Passed to the fsspec filesystem.

    Raises
    ------
    ScenarioParseError
        If the format is unknown or the contents are malformed.
    """
    from sysrisk.readers.csv import parse_csv_scenarios
    from sysrisk.readers.json import parse_json_scenarios

    try:
        fmt = ScenarioFormat(suffix(filepath) if fmt is None else fmt)
    except ValueError as e:
        raise ScenarioParseError(
            f"Cannot tell the scenario format of {filepath!s}; expected a .csv or .json file"
        ) from e

    text = read_text(filepath, storage_options=storage_options)
    if fmt is ScenarioFormat.CSV:
        return parse_csv_scenarios(text)
    return parse_json_scenarios(text)


__all__ = ["ScenarioFormat", "read_scenarios"]
