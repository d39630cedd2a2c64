"""Exception hierarchy shared across the engine.

Every error carries enough structure (indices, line numbers, positions) for
the CLI and HTTP layers to map it to a diagnostic without string parsing.
"""

from __future__ import annotations


class VizexError(Exception):
    """Base class for all engine errors."""

    code = "ENGINE_ERROR"


# ---------------------------------------------------------------------------
# ingest


class MalformedManifest(VizexError):
    code = "MALFORMED_MANIFEST"


class MissingFrame(VizexError):
    code = "MISSING_FRAME"

    def __init__(self, index: int, path: str = ""):
        self.index = index
        self.path = path
        super().__init__(f"frame {index} missing" + (f": {path}" if path else ""))


class DimensionMismatch(VizexError):
    code = "DIMENSION_MISMATCH"

    def __init__(self, index: int, got: tuple[int, int], want: tuple[int, int]):
        self.index = index
        self.got = got
        self.want = want
        super().__init__(f"frame {index} is {got[0]}x{got[1]}, manifest says {want[0]}x{want[1]}")


class MalformedImage(VizexError):
    code = "MALFORMED_IMAGE"

    def __init__(self, path: str, reason: str = ""):
        self.path = path
        super().__init__(f"cannot decode {path}" + (f": {reason}" if reason else ""))


class MalformedRecord(VizexError):
    code = "MALFORMED_RECORD"

    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"bad log record at line {line_no}" + (f": {reason}" if reason else ""))


class FrameOutOfRange(VizexError):
    code = "FRAME_OUT_OF_RANGE"

    def __init__(self, line_no: int, frame: int, frame_count: int):
        self.line_no = line_no
        self.frame = frame
        super().__init__(f"line {line_no}: frame {frame} outside 0..{frame_count - 1}")


class DuplicateFrame(VizexError):
    code = "DUPLICATE_FRAME"

    def __init__(self, index: int):
        self.index = index
        super().__init__(f"duplicate sample for frame {index}")


class MalformedRow(VizexError):
    code = "MALFORMED_ROW"

    def __init__(self, line_no: int, reason: str = ""):
        self.line_no = line_no
        super().__init__(f"bad CSV row at line {line_no}" + (f": {reason}" if reason else ""))


# ---------------------------------------------------------------------------
# kpi engine


class EmptyRegion(VizexError):
    code = "EMPTY_REGION"


class RegionTooSmall(VizexError):
    code = "REGION_TOO_SMALL"


class UnknownExternal(VizexError):
    code = "UNKNOWN_EXTERNAL"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no external series named {name!r}")


# ---------------------------------------------------------------------------
# rdd


class InsufficientData(VizexError):
    code = "INSUFFICIENT_DATA"


class DegenerateDesign(VizexError):
    code = "DEGENERATE_DESIGN"


class SeriesTooShort(VizexError):
    code = "SERIES_TOO_SHORT"

    def __init__(self, length: int, needed: int):
        self.length = length
        self.needed = needed
        super().__init__(f"series has {length} points, need at least {needed}")


# ---------------------------------------------------------------------------
# surrogate


class DegenerateLabels(VizexError):
    code = "DEGENERATE_LABELS"


# ---------------------------------------------------------------------------
# query


class QuerySyntaxError(VizexError):
    code = "SYNTAX_ERROR"

    def __init__(self, line: int, col: int, expected: tuple[str, ...], found: str):
        self.line = line
        self.col = col
        self.expected = expected
        self.found = found
        exp = " or ".join(expected)
        super().__init__(f"line {line}, col {col}: expected {exp}, found {found}")


class UnknownMetric(VizexError):
    code = "UNKNOWN_METRIC"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no metric series named {name!r}")


class UnknownKpi(VizexError):
    code = "UNKNOWN_KPI"

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"no KPI named {name!r}")


# ---------------------------------------------------------------------------
# synth


class InvalidSpec(VizexError):
    code = "INVALID_SPEC"
