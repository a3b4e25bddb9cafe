from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, List

ERROR = "error"
WARNING = "warning"

# Stable diagnostic codes
SYNTAX_ERROR = "SYNTAX_ERROR"
UNKNOWN_KEYWORD = "UNKNOWN_KEYWORD"
NESTING_TOO_DEEP = "NESTING_TOO_DEEP"
DUPLICATE_LABEL = "DUPLICATE_LABEL"
BAD_PARAMS = "BAD_PARAMS"
BAD_LEVEL = "BAD_LEVEL"
BAD_ORDER = "BAD_ORDER"
DUPLICATE_SERVICE_LEVEL = "DUPLICATE_SERVICE_LEVEL"
KIND_MISMATCH = "KIND_MISMATCH"
ENCODING_ERROR = "ENCODING_ERROR"

UNKNOWN_SERVICE_TYPE = "UNKNOWN_SERVICE_TYPE"
UNKNOWN_PROPERTY = "UNKNOWN_PROPERTY"
SHORTCUT_UNEXPANDABLE = "SHORTCUT_UNEXPANDABLE"
CYCLIC_CONDITION = "CYCLIC_CONDITION"
UNDECLARED_LABEL = "UNDECLARED_LABEL"
ORDER_GAP = "ORDER_GAP"
DUPLICATE_ORDER = "DUPLICATE_ORDER"
UNDECLARED_SLOT = "UNDECLARED_SLOT"
SLOT_TYPE_MISMATCH = "SLOT_TYPE_MISMATCH"
UNPROVIDED_SERVICE = "UNPROVIDED_SERVICE"

NO_GUARANTEES = "NO_GUARANTEES"
NO_DEFAULT_GUARANTEE = "NO_DEFAULT_GUARANTEE"
UNUSED_RTE = "UNUSED_RTE"
UNUSED_DEMAND = "UNUSED_DEMAND"
UNUSED_GATE = "UNUSED_GATE"
UNREACHABLE_GUARANTEE = "UNREACHABLE_GUARANTEE"


@dataclass(frozen=True)
class Diagnostic:
    severity: str
    line: int
    column: int
    code: str
    message: str
    path: str = ""

    def render(self, path: str = None) -> str:
        where = path if path is not None else (self.path or "<input>")
        return f"{where}:{self.line}:{self.column}: {self.severity} {self.code} {self.message}"


def error(code: str, message: str, line: int = 1, column: int = 1, path: str = "") -> Diagnostic:
    return Diagnostic(ERROR, line, column, code, message, path)


def warning(code: str, message: str, line: int = 1, column: int = 1, path: str = "") -> Diagnostic:
    return Diagnostic(WARNING, line, column, code, message, path)


def has_errors(diagnostics: Iterable[Diagnostic]) -> bool:
    return any(d.severity == ERROR for d in diagnostics)


def sort_diagnostics(diagnostics: Iterable[Diagnostic]) -> List[Diagnostic]:
    return sorted(diagnostics, key=lambda d: (d.path, d.line, d.column, d.code, d.message))
