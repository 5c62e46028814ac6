"""
Lab Logger for Simulation Runs

Every entry belongs to a lab operation and may carry the run it came from
(the 12-character config hash prefix) and the block of replications it
covers. Entries go to an in-memory buffer the MCP tools query and are
mirrored to the ``ots_lab`` stdlib logger on stderr.
"""

import logging
import threading
from collections import Counter, deque
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import TYPE_CHECKING, Any, Dict, List, Optional, Tuple

if TYPE_CHECKING:
    from lemma_suite import LemmaCheck


class LogLevel(str, Enum):
    """Log levels for lab operations"""
    DEBUG = "debug"
    INFO = "info"
    WARNING = "warning"
    ERROR = "error"


_PY_LEVELS = {
    LogLevel.DEBUG: logging.DEBUG,
    LogLevel.INFO: logging.INFO,
    LogLevel.WARNING: logging.WARNING,
    LogLevel.ERROR: logging.ERROR,
}


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


@dataclass
class LabLogEntry:
    """One lab event"""
    level: LogLevel
    operation: str
    message: str
    details: Dict[str, Any] = field(default_factory=dict)
    run_id: Optional[str] = None
    replications: Optional[Tuple[int, int]] = None
    timestamp: str = field(default_factory=_utc_now)

    def to_dict(self) -> Dict[str, Any]:
        return {
            "timestamp": self.timestamp,
            "level": self.level.value,
            "operation": self.operation,
            "message": self.message,
            "details": self.details,
            "run_id": self.run_id,
            "replications": list(self.replications) if self.replications else None,
        }

    def to_log_string(self) -> str:
        """e.g. ``[LAB:DEBUG] run=3f2a0c9e11d4 reps=0..49 run_batch: done | T=100000``"""
        parts = [f"[LAB:{self.level.value.upper()}]"]
        if self.run_id:
            parts.append(f"run={self.run_id}")
        if self.replications:
            parts.append(f"reps={self.replications[0]}..{self.replications[1]}")
        parts.append(f"{self.operation}: {self.message}")
        line = " ".join(parts)
        if self.details:
            line += " | " + ", ".join(f"{k}={v}" for k, v in self.details.items())
        return line


class LabLogger:
    """
    Thread-safe logger with a bounded buffer of recent entries.

    Replication batches log from worker threads.
    """

    def __init__(self, capacity: int = 1000):
        self.capacity = capacity
        self.entries: deque[LabLogEntry] = deque(maxlen=capacity)
        self.lock = threading.Lock()

        self.py_logger = logging.getLogger("ots_lab")
        self.py_logger.setLevel(logging.DEBUG)
        self.py_logger.propagate = False

        if not self.py_logger.handlers:
            handler = logging.StreamHandler()
            handler.setLevel(logging.INFO)
            handler.setFormatter(logging.Formatter(
                '%(asctime)s - %(name)s - %(levelname)s - %(message)s'
            ))
            self.py_logger.addHandler(handler)

    def set_console_level(self, level: LogLevel) -> None:
        """Raise or lower the threshold of the console handler"""
        for handler in self.py_logger.handlers:
            handler.setLevel(_PY_LEVELS[level])

    def log(
        self,
        level: LogLevel,
        operation: str,
        message: str,
        details: Optional[Dict[str, Any]] = None,
        run_id: Optional[str] = None,
        replications: Optional[Tuple[int, int]] = None
    ) -> None:
        entry = LabLogEntry(level, operation, message, details or {}, run_id, replications)
        with self.lock:
            self.entries.append(entry)
        self.py_logger.log(_PY_LEVELS[level], entry.to_log_string())

    def debug(self, operation: str, message: str, **kwargs) -> None:
        self.log(LogLevel.DEBUG, operation, message, **kwargs)

    def info(self, operation: str, message: str, **kwargs) -> None:
        self.log(LogLevel.INFO, operation, message, **kwargs)

    def warning(self, operation: str, message: str, **kwargs) -> None:
        self.log(LogLevel.WARNING, operation, message, **kwargs)

    def error(self, operation: str, message: str, **kwargs) -> None:
        self.log(LogLevel.ERROR, operation, message, **kwargs)

    def lemma_verdict(self, check: "LemmaCheck") -> None:
        """Passing checks log at info, failing ones at warning"""
        self.log(
            LogLevel.INFO if check.passed else LogLevel.WARNING,
            "lemma_check",
            f"{check.name}: {'pass' if check.passed else 'FAIL'}",
            details={
                "worst_violation": check.worst_violation,
                "tolerance": check.tolerance,
                "grid": check.grid_size,
            },
        )

    def get_recent(
        self,
        count: int = 100,
        level: Optional[LogLevel] = None,
        run_id: Optional[str] = None,
        operation: Optional[str] = None
    ) -> List[Dict[str, Any]]:
        """
        The newest ``count`` entries matching every given filter, oldest first.

        ``run_id`` is the 12-character config hash prefix of a run.
        """
        with self.lock:
            entries = list(self.entries)
        selected = [
            e for e in entries
            if (level is None or e.level == level)
            and (run_id is None or e.run_id == run_id)
            and (operation is None or e.operation == operation)
        ]
        return [e.to_dict() for e in selected[-count:]] if count > 0 else []

    def clear(self) -> int:
        """Empty the buffer and return how many entries were dropped"""
        with self.lock:
            dropped = len(self.entries)
            self.entries.clear()
        return dropped

    def get_stats(self) -> Dict[str, Any]:
        with self.lock:
            entries = list(self.entries)

        by_level = Counter(e.level.value for e in entries)
        return {
            "total_entries": len(entries),
            "capacity": self.capacity,
            "by_level": {lvl.value: by_level.get(lvl.value, 0) for lvl in LogLevel},
            "by_operation": dict(Counter(e.operation for e in entries)),
            "runs": sorted({e.run_id for e in entries if e.run_id}),
            "oldest_timestamp": entries[0].timestamp if entries else None,
            "newest_timestamp": entries[-1].timestamp if entries else None,
        }


_logger = LabLogger()


def get_logger() -> LabLogger:
    """The process-wide lab logger"""
    return _logger
