"""Report rows and their serialisations.

The CSV columns and record keys are a compatibility contract documented in
README.rst; add new keys at the end only.
"""

from dataclasses import asdict
from dataclasses import dataclass
from dataclasses import field
from ruinbounds.interfaces import IReportWriter
from zope.component import queryUtility
from zope.interface import implementer

import csv
import json
import math

CSV_COLUMNS = (
    "parameter",
    "value",
    "name",
    "fingerprint",
    "process",
    "u",
    "lower",
    "lower_error",
    "middle",
    "middle_ci",
    "upper",
    "ratio",
    "K",
    "epsilon",
    "frak_c",
    "status",
    "wall_time",
)


@dataclass
class ReportRow:
    """One (configuration, u) cell of an experiment."""

    u: float
    name: str = ""
    fingerprint: str = ""
    process: str = ""
    cell: int = 0
    seed: int = 0
    version: str = ""
    lower: float = None
    lower_error: float = None
    lower_method: str = None
    middle: float = None
    middle_ci: float = None
    middle_low: float = None
    middle_high: float = None
    upper: float = None
    ratio: float = None
    K: float = None
    K_used: str = None
    K_components: dict = field(default_factory=dict)
    epsilon: float = None
    frak_c: float = None
    argmin_t: float = None
    status: str = None
    refinement_trace: list = field(default_factory=list)
    extrapolated: float = None
    terminal_hits: int = None
    n_paths: int = None
    resolution: int = None
    links: dict = field(default_factory=dict)
    notes: list = field(default_factory=list)
    wall_time: float = None
    parameter: str = None
    value: float = None
    error: str = None

    def as_record(self):
        return _finite(asdict(self))


def _finite(value):
    """Replace non-finite floats by None so records stay strict JSON."""
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, dict):
        return {key: _finite(item) for key, item in value.items()}
    if isinstance(value, (list, tuple)):
        return [_finite(item) for item in value]
    return value


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


@implementer(IReportWriter)
class CSVReportWriter:
    extension = "csv"

    def write_header(self, stream):
        csv.writer(stream).writerow(CSV_COLUMNS)

    def write(self, stream, rows):
        writer = csv.writer(stream)
        for row in rows:
            writer.writerow([_cell(getattr(row, column)) for column in CSV_COLUMNS])


@implementer(IReportWriter)
class JSONLinesReportWriter:
    extension = "jsonl"

    def write_header(self, stream):
        pass

    def write(self, stream, rows):
        for row in rows:
            stream.write(json.dumps(row.as_record(), sort_keys=True) + "\n")
        stream.flush()


CSV_WRITER = CSVReportWriter()
JSONL_WRITER = JSONLinesReportWriter()

WRITERS = {
    "csv": CSV_WRITER,
    "jsonl": JSONL_WRITER,
}


def getReportWriter(name):
    """Returns the IReportWriter registered for a format name."""
    writer = queryUtility(IReportWriter, name=name)
    if writer is None:
        writer = WRITERS.get(name)
    if writer is None:
        raise ValueError(f"unknown report format {name!r}")
    return writer
