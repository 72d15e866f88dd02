from __future__ import annotations

import logging
import os
from typing import Optional, Union

logger = logging.getLogger(__name__)

PathLike = Union[str, os.PathLike]


def read_text(
    filepath: PathLike,
    *,
    storage_options: Optional[dict] = None,
) -> str:
    """Read a whole text file from any location fsspec understands.

    Parameters
    ----------
    filepath : str or os.PathLike
        Local path or URL such as ``s3://bucket/scenarios.csv`` or ``memory://cfg.toml``.
    storage_options : dict, optional
        Keyword arguments passed to the fsspec filesystem constructor, by default {}

    Returns
    -------
    str
        The decoded (UTF-8) file contents.

    Raises
    ------
    FileNotFoundError
        If nothing exists at ``filepath``.
    """

    import fsspec
    from upath import UPath

    universal_filepath = UPath(filepath)
    protocol = universal_filepath.protocol or "file"

    if storage_options is None:
        storage_options = {}

    fs = fsspec.filesystem(protocol, **storage_options)
    path = os.fspath(filepath)
    logger.info("reading %s", path)
    with fs.open(path, mode="rt", encoding="utf-8") as f:
        return f.read()


def suffix(filepath: PathLike) -> str:
    """Lower-cased file extension without the dot, e.g. ``"csv"``."""
    from upath import UPath

    return UPath(filepath).suffix.lstrip(".").lower()
