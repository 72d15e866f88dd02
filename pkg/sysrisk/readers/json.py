from typing import Any

import numpy as np
import ujson  # type: ignore

from sysrisk.errors import ScenarioParseError
from sysrisk.scenarios import ScenarioSpace, SystemLoss


def parse_json_scenarios(text: str) -> SystemLoss:
    """
    Parse scenarios from JSON text.

    Expects ``{"probabilities": [p_1, ..., p_K], "losses": [[...], ...]}`` with
    one row of K losses per firm, plus optional ``"firms"`` names.
    """
    try:
        data: Any = ujson.loads(text)
    except ValueError as e:
        raise ScenarioParseError(f"Invalid JSON: {e}") from e
    if not isinstance(data, dict):
        raise ScenarioParseError("Scenario JSON must be an object")

    missing = {"probabilities", "losses"} - set(data)
    if missing:
        raise ScenarioParseError(f"Scenario JSON lacks {sorted(missing)}")

    try:
        probabilities = np.asarray(data["probabilities"], dtype=np.float64)
        losses = np.asarray(data["losses"], dtype=np.float64)
    except (TypeError, ValueError) as e:
        raise ScenarioParseError(f"Probabilities and losses must be numeric arrays: {e}") from e
    if probabilities.ndim != 1:
        raise ScenarioParseError("'probabilities' must be a flat list")
    if losses.ndim != 2 or losses.shape[1] != probabilities.size:
        raise ScenarioParseError(
            f"'losses' must hold one list of {probabilities.size} values per firm, got shape {losses.shape}"
        )
    if not (np.all(np.isfinite(losses)) and np.all(np.isfinite(probabilities))):
        raise ScenarioParseError("Scenario values must be finite numbers")

    try:
        space = ScenarioSpace.from_weights(probabilities)
        return SystemLoss(losses, space, tuple(str(f) for f in data.get("firms", ())))
    except ValueError as e:
        raise ScenarioParseError(f"Invalid scenarios: {e}") from e
