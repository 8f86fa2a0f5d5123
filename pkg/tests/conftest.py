import zlib

import numpy as np
import pytest

from sepmap.dataset import Category, EventRecord, TimeSeriesSlice, parse_time

# Filled by tests/test_acceptance.py, printed at the end of the session.
ACCEPTANCE_RESULTS = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_RESULTS:
        terminalreporter.write_line(line)


def make_record(event_id="ev", category="Strong", onset="2003-10-28T12:00:00Z", hours=12, cadence=60, n_channels=3, values=None):
    onset_s = parse_time(onset)
    n = int(hours * 3600 // cadence)
    if values is None:
        rng = np.random.default_rng(zlib.crc32(event_id.encode()))
        values = 10 ** rng.normal(0, 0.2, size=(n_channels, n))
    channels = ("P3", "P5", "P7", "XL")[: values.shape[0]]
    sl = TimeSeriesSlice(onset_s - n * cadence, cadence, channels, values)
    return EventRecord(event_id, onset_s, Category.parse(category), sl)


@pytest.fixture
def record_factory():
    return make_record
