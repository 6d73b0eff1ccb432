import numpy as np
import pytest

from trailgrade.ingest import CHANNEL_ORDER, SensorChannel, build_session
from trailgrade.labeling import LabelTrack


def pytest_runtest_logreport(report):
    """One visible pass/fail line per acceptance criterion, capture or not."""
    if report.when != "call" or "test_criterion_" not in report.nodeid:
        return
    name = report.nodeid.split("::")[-1].replace("test_criterion_", "")
    number, _, slug = name.partition("_")
    verdict = "PASS" if report.passed else "FAIL"
    print(
        f"\n{verdict}  acceptance criterion {number} ({slug.replace('_', ' ')}) "
        f"in {report.duration:.1f}s",
        flush=True,
    )


def make_session(length, name="sess", start_ms=0, rate_hz=25.0, seed=0):
    """A session of `length` points with distinct, reproducible values."""
    rng = np.random.default_rng(seed)
    channels = [
        SensorChannel(kind, mount, start_ms, rate_hz, rng.normal(size=(length, 3)))
        for mount, kind in CHANNEL_ORDER
    ]
    session = build_session(channels, name=name)
    return session


def full_track(session, label=1):
    """A track labeling the session's whole time span with one label."""
    period = 1000.0 / session.rate_hz
    end = session.start_time_ms + int(round(session.length_points * period))
    return LabelTrack(((session.start_time_ms, end, label),))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
