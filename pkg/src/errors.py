"""
Exceptions raised across the optimistic Thompson sampling lab.

The CLI maps these onto exit codes; the MCP tool layer turns them into
``{"error": ...}`` payloads.
"""

from pathlib import Path
from typing import Optional, Union


class LabError(Exception):
    """Base class for every lab failure"""


class DomainError(LabError, ValueError):
    """An argument lies outside the domain of a pure operation"""


class ConfigError(LabError):
    """An experiment config failed validation"""


class ReportIOError(LabError):
    """Reading or writing a lab artifact failed"""

    def __init__(self, message: str, path: Optional[Union[str, Path]] = None):
        self.path = str(path) if path is not None else None
        if self.path and self.path not in message:
            message = f"{message}: {self.path}"
        super().__init__(message)
