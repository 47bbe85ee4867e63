"""Exception types shared by every gridtrace module.

Every failure carries a short machine-readable ``code`` (``"empty-frame"``,
``"collinear"``...) so callers and the CLI can dispatch on it without parsing
messages.
"""

from __future__ import annotations


class GridtraceError(ValueError):
    """Validation or contract failure.

    Parameters
    ----------
    code : str
        Stable identifier of the failure kind.
    message : str, optional
        Human readable detail.
    """

    def __init__(self, code: str, message: str = "", **context):
        self.code = code
        self.context = context
        text = f"{code}: {message}" if message else code
        super().__init__(text)


class NumericalError(GridtraceError):
    """Estimation failed numerically (singular systems, divergence, instability)."""


class FileIOError(GridtraceError):
    """Reading or writing a file failed."""
