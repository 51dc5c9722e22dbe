from plone.testing.zca import UNIT_TESTING
from ruinbounds.testing import RUINBOUNDS_FIXTURE

import io
import json
import math
import unittest


def _row(**values):
    from ruinbounds.reports import ReportRow

    values.setdefault("u", 1.5)
    return ReportRow(name="demo", process="bm", status="holds", **values)


class TestCSV(unittest.TestCase):
    layer = UNIT_TESTING

    def test_header(self):
        from ruinbounds.reports import CSV_COLUMNS
        from ruinbounds.reports import CSVReportWriter

        stream = io.StringIO()
        CSVReportWriter().write_header(stream)
        self.assertEqual(",".join(CSV_COLUMNS), stream.getvalue().strip())
        self.assertEqual(("parameter", "value", "name"), CSV_COLUMNS[:3])
        self.assertEqual("wall_time", CSV_COLUMNS[-1])

    def test_cells(self):
        from ruinbounds.reports import CSV_COLUMNS
        from ruinbounds.reports import CSVReportWriter

        stream = io.StringIO()
        CSVReportWriter().write(stream, [_row(K=math.inf, middle=0.125)])
        cells = dict(zip(CSV_COLUMNS, stream.getvalue().strip().split(",")))
        self.assertEqual("inf", cells["K"])
        self.assertEqual("0.125", cells["middle"])
        self.assertEqual("", cells["lower"])
        self.assertEqual("holds", cells["status"])


class TestJSONLines(unittest.TestCase):
    layer = UNIT_TESTING

    def test_records(self):
        from ruinbounds.reports import JSONLinesReportWriter

        stream = io.StringIO()
        writer = JSONLinesReportWriter()
        writer.write_header(stream)
        rows = [
            _row(K=math.inf, K_components={"frak_c": -math.inf}),
            _row(u=2.0, refinement_trace=[(16, 0.1), (32, 0.2)]),
        ]
        writer.write(stream, rows)
        lines = stream.getvalue().splitlines()
        self.assertEqual(2, len(lines))
        first, second = (json.loads(line) for line in lines)
        self.assertIsNone(first["K"])
        self.assertEqual({"frak_c": None}, first["K_components"])
        self.assertEqual([[16, 0.1], [32, 0.2]], second["refinement_trace"])
        self.assertEqual(2.0, second["u"])


class TestWriterLookup(unittest.TestCase):
    layer = UNIT_TESTING

    def test_fallback(self):
        from ruinbounds.reports import CSV_WRITER
        from ruinbounds.reports import getReportWriter

        self.assertIs(CSV_WRITER, getReportWriter("csv"))
        self.assertRaises(ValueError, getReportWriter, "xlsx")

    def test_registered_writer_wins(self):
        from ruinbounds.interfaces import IReportWriter
        from ruinbounds.reports import CSVReportWriter
        from ruinbounds.reports import getReportWriter
        from zope.component import provideUtility

        custom = CSVReportWriter()
        provideUtility(custom, IReportWriter, name="csv")
        self.assertIs(custom, getReportWriter("csv"))


class TestRegisteredWriters(unittest.TestCase):
    layer = RUINBOUNDS_FIXTURE

    def test_configured(self):
        from ruinbounds.interfaces import IReportWriter
        from ruinbounds.reports import JSONL_WRITER
        from zope.component import getUtility

        self.assertIs(JSONL_WRITER, getUtility(IReportWriter, name="jsonl"))
