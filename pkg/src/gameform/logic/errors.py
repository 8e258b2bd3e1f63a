from __future__ import annotations

from typing import List, Optional

PARSE_ERROR = "parse_error"
EXISTENCE_ERROR = "existence_error"
INSTANTIATION_ERROR = "instantiation_error"
DEPTH_LIMIT = "depth_limit"
TYPE_ERROR = "type_error"


class EngineError(Exception):
    """Error raised by the LGDL parser or resolution engine.

    ``line_text`` is the verbatim source line for parse errors; errors at
    end of input have no line. ``trace`` is a call-stack summary for
    runtime errors.
    """

    def __init__(
        self,
        kind: str,
        message: str,
        *,
        line: Optional[int] = None,
        col: Optional[int] = None,
        line_text: Optional[str] = None,
        trace: Optional[List[str]] = None,
        source: Optional[str] = None,
    ) -> None:
        super().__init__(message)
        self.kind = kind
        self.message = message
        self.line = line
        self.col = col
        self.line_text = line_text
        self.trace = list(trace or [])
        self.source = source

    def format(self) -> str:
        """Render as ``line:col: kind: message: <offending line>``."""
        if self.line is not None:
            where = f"{self.line}:{self.col or 1}"
        else:
            where = "eof" if self.kind == PARSE_ERROR else "query"
        prefix = f"{self.source}:" if self.source else ""
        text = f"{prefix}{where}: {self.kind}: {self.message}"
        if self.line_text is not None:
            text += f": {self.line_text}"
        for frame in self.trace:
            text += f"\n    in {frame}"
        return text

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "message": self.message,
            "line": self.line,
            "col": self.col,
            "line_text": self.line_text,
            "source": self.source,
            "trace": self.trace,
        }

    def __repr__(self) -> str:
        return f"EngineError({self.kind!r}, {self.message!r})"


class ParseErrors(Exception):
    """Raised by ``parse_program`` when one or more clauses are malformed."""

    def __init__(self, errors: List[EngineError]) -> None:
        self.errors = errors
        super().__init__("\n".join(e.format() for e in errors))
