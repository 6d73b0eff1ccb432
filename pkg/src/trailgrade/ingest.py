"""Raw sensor log parsing, start-time synchronization, and 25 Hz resampling.

Two IMU units (one on the frame's downtube, one on the helmet) each provide an
accelerometer (unit g) and a gyroscope (unit deg/s). Logs arrive as per-sensor
CSV files with integer millisecond timestamps. Recordings are aligned to a
common start and linearly interpolated onto a constant-rate grid so the four
channels can be stacked into one session.
"""

import struct
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

from .errors import (
    CorruptArchive,
    EmptyAfterSync,
    EmptyLog,
    MalformedLine,
    MalformedManifest,
    MismatchedStart,
    NonMonotonicTimestamp,
    TooFewSamples,
    WrongChannelSet,
)

TARGET_RATE_HZ = 25.0

CSV_HEADER = "timestamp_ms,x,y,z"


class SensorKind(Enum):
    ACCELEROMETER = "accelerometer"
    GYROSCOPE = "gyroscope"


class Mount(Enum):
    FRAME = "frame"
    HELMET = "helmet"


#: Fixed row order of a stacked session: frame unit first, helmet second,
#: accelerometer before gyroscope within a unit.
CHANNEL_ORDER = (
    (Mount.FRAME, SensorKind.ACCELEROMETER),
    (Mount.FRAME, SensorKind.GYROSCOPE),
    (Mount.HELMET, SensorKind.ACCELEROMETER),
    (Mount.HELMET, SensorKind.GYROSCOPE),
)


@dataclass
class RawSensorLog:
    """One sensor's recording: strictly increasing ms timestamps plus xyz triples."""

    sensor_kind: SensorKind
    mount: Mount
    timestamps: np.ndarray  # (n,) int64
    values: np.ndarray  # (n, 3) float64
    nominal_rate_hz: float

    def __post_init__(self):
        self.timestamps = np.asarray(self.timestamps, dtype=np.int64)
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1, 3)
        if self.timestamps.size == 0:
            raise EmptyLog("sensor log has no samples")
        if self.timestamps.size != self.values.shape[0]:
            raise ValueError("timestamps and values disagree in length")
        if self.timestamps.size > 1 and np.any(np.diff(self.timestamps) <= 0):
            raise NonMonotonicTimestamp("timestamps must be strictly increasing")

    @property
    def span_ms(self) -> int:
        return int(self.timestamps[-1] - self.timestamps[0])


@dataclass
class SensorChannel:
    """A resampled channel: sample i sits at start_time_ms + i * 1000 / rate_hz."""

    sensor_kind: SensorKind
    mount: Mount
    start_time_ms: int
    rate_hz: float
    values: np.ndarray  # (length, 3) float64

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64).reshape(-1, 3)
        if self.values.shape[0] == 0:
            raise EmptyLog("channel has no values")

    @property
    def length(self) -> int:
        return self.values.shape[0]


@dataclass
class SyncedSession:
    """Four channels on one grid, truncated to their common length.

    ``data`` stacks the channels as (length_points, 4, 3) with rows in
    CHANNEL_ORDER; it is the array every window sample is sliced from.
    """

    channels: tuple
    length_points: int
    start_time_ms: int
    name: str = ""
    data: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.data is None:
            self.data = np.stack(
                [ch.values[: self.length_points] for ch in self.channels], axis=1
            )

    @property
    def rate_hz(self) -> float:
        return self.channels[0].rate_hz


def _infer_rate_hz(timestamps: np.ndarray) -> float:
    if timestamps.size < 2:
        return float("nan")
    gap = float(np.median(np.diff(timestamps)))
    if gap <= 0:  # non-monotonic input; the log constructor rejects it
        return float("nan")
    return 1000.0 / gap


def parse_sensor_csv(text, sensor_kind: SensorKind, mount: Mount) -> RawSensorLog:
    """Parse ``timestamp_ms,x,y,z`` CSV text (LF or CRLF) into a RawSensorLog.

    The nominal rate is inferred from the median timestamp gap. Blank lines are
    skipped; anything else that does not parse raises MalformedLine with its
    1-based line number.
    """
    if hasattr(text, "read"):
        text = text.read()
    lines = text.split("\n")
    if not lines or lines[0].rstrip("\r").strip() != CSV_HEADER:
        raise MalformedLine(1, f"expected header {CSV_HEADER!r}")
    ts, vals = [], []
    for line_no, raw in enumerate(lines[1:], start=2):
        line = raw.rstrip("\r").strip()
        if not line:
            continue
        parts = line.split(",")
        if len(parts) != 4:
            raise MalformedLine(line_no, f"expected 4 fields, got {len(parts)}")
        try:
            t = int(parts[0])
            xyz = [float(p) for p in parts[1:]]
        except ValueError:
            raise MalformedLine(line_no, f"unparseable record {line!r}") from None
        if not all(np.isfinite(xyz)):
            raise MalformedLine(line_no, "non-finite sensor value")
        ts.append(t)
        vals.append(xyz)
    if not ts:
        raise EmptyLog("no data rows")
    timestamps = np.array(ts, dtype=np.int64)
    return RawSensorLog(
        sensor_kind, mount, timestamps, np.array(vals), _infer_rate_hz(timestamps)
    )


def write_sensor_csv(log: RawSensorLog) -> str:
    """Render a log back to CSV text (LF endings). Round-trips exactly."""
    rows = [CSV_HEADER]
    for t, (x, y, z) in zip(log.timestamps.tolist(), log.values.tolist()):
        rows.append(f"{t},{x!r},{y!r},{z!r}")
    return "\n".join(rows) + "\n"


def synchronize(logs):
    """Align recordings on the latest first timestamp.

    Samples before t0 = max(first timestamps) are dropped and the survivors are
    rebased so time 0 means t0; a sample exactly at t0 is kept. Returns new logs
    in the input order.
    """
    if not logs:
        raise EmptyLog("nothing to synchronize")
    t0 = max(int(log.timestamps[0]) for log in logs)
    out = []
    for log in logs:
        keep = log.timestamps >= t0
        if not keep.any():
            raise EmptyAfterSync(
                f"{log.mount.value} {log.sensor_kind.value}: no samples at or after {t0} ms"
            )
        out.append(
            RawSensorLog(
                log.sensor_kind,
                log.mount,
                log.timestamps[keep] - t0,
                log.values[keep].copy(),
                log.nominal_rate_hz,
            )
        )
    return out


def resample_linear(log: RawSensorLog, target_hz: float = TARGET_RATE_HZ) -> SensorChannel:
    """Interpolate a log onto the regular lattice k * (1000 / target_hz).

    Each axis is interpolated independently between its bracketing samples.
    Lattice points outside [first, last] timestamp are not produced: no data is
    invented on either side.
    """
    if log.timestamps.size < 2:
        raise TooFewSamples("need at least 2 samples to interpolate")
    if target_hz <= 0:
        raise ValueError("target_hz must be positive")
    period = 1000.0 / target_hz
    t = log.timestamps.astype(np.float64)
    k0 = int(np.ceil(t[0] / period - 1e-9))
    k1 = int(np.floor(t[-1] / period + 1e-9))
    if k1 < k0:
        raise TooFewSamples("no lattice point falls inside the log's time span")
    grid = np.arange(k0, k1 + 1, dtype=np.float64) * period
    out = np.empty((grid.size, 3))
    for axis in range(3):
        out[:, axis] = np.interp(grid, t, log.values[:, axis])
    return SensorChannel(
        log.sensor_kind, log.mount, int(round(k0 * period)), float(target_hz), out
    )


def channel_to_log(channel: SensorChannel) -> RawSensorLog:
    """View a resampled channel as a raw log again (for re-resampling checks)."""
    period = 1000.0 / channel.rate_hz
    timestamps = channel.start_time_ms + np.round(
        np.arange(channel.length) * period
    ).astype(np.int64)
    return RawSensorLog(
        channel.sensor_kind,
        channel.mount,
        timestamps,
        channel.values.copy(),
        channel.rate_hz,
    )


def align_channel_starts(channels):
    """Trim leading points so every channel starts at the latest channel start.

    After synchronization the units' first surviving samples can sit on
    different lattice points (each within one period of the common t0).
    All channels share the same lattice, so the difference is a whole number
    of periods and dropping that many leading points aligns them exactly.
    """
    latest = max(ch.start_time_ms for ch in channels)
    out = []
    for ch in channels:
        period = 1000.0 / ch.rate_hz
        shift_exact = (latest - ch.start_time_ms) / period
        shift = int(round(shift_exact))
        if abs(shift_exact - shift) > 1e-6:
            raise MismatchedStart(
                f"start {ch.start_time_ms} ms is not a whole number of periods before {latest} ms"
            )
        if shift >= ch.length:
            raise EmptyAfterSync(
                f"{ch.mount.value} {ch.sensor_kind.value}: no samples at or after {latest} ms"
            )
        if shift == 0:
            out.append(ch)
        else:
            out.append(
                SensorChannel(ch.sensor_kind, ch.mount, latest, ch.rate_hz, ch.values[shift:].copy())
            )
    return out


def build_session(channels, name: str = "") -> SyncedSession:
    """Assemble four channels into a session, fixed row order, common length."""
    combos = [(ch.mount, ch.sensor_kind) for ch in channels]
    if sorted(combos, key=str) != sorted(CHANNEL_ORDER, key=str):
        raise WrongChannelSet(
            "need exactly one channel per (mount, sensor) combination"
        )
    ordered = [
        next(ch for ch in channels if (ch.mount, ch.sensor_kind) == key)
        for key in CHANNEL_ORDER
    ]
    starts = {ch.start_time_ms for ch in ordered}
    if len(starts) != 1:
        raise MismatchedStart(f"channel start times differ: {sorted(starts)}")
    if len({ch.rate_hz for ch in ordered}) != 1:
        raise ValueError("channels disagree on sample rate")
    length = min(ch.length for ch in ordered)
    data = np.stack([ch.values[:length] for ch in ordered], axis=1).copy()
    return SyncedSession(tuple(ordered), length, ordered[0].start_time_ms, name, data)


# --- session archive (binary interchange between `ingest` and `window`) -----

_SESSION_MAGIC = b"TGSS"
_SESSION_VERSION = 1


def write_session_archive(session: SyncedSession, path):
    buf = bytearray()
    buf += _SESSION_MAGIC
    buf.append(_SESSION_VERSION)
    name = session.name.encode("utf-8")
    buf += struct.pack("<H", len(name)) + name
    buf += struct.pack("<qdI", session.start_time_ms, session.rate_hz, session.length_points)
    buf += session.data.astype("<f8").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_session_archive(path) -> SyncedSession:
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CorruptArchive(f"{path}: truncated session archive")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4) != _SESSION_MAGIC:
        raise CorruptArchive(f"{path}: not a session archive")
    if take(1)[0] != _SESSION_VERSION:
        raise CorruptArchive(f"{path}: unsupported session archive version")
    (name_len,) = struct.unpack("<H", take(2))
    name = take(name_len).decode("utf-8")
    start, rate, length = struct.unpack("<qdI", take(20))
    raw = take(length * 4 * 3 * 8)
    if pos != len(data):
        raise CorruptArchive(f"{path}: trailing bytes")
    values = np.frombuffer(raw, dtype="<f8").astype(np.float64).reshape(length, 4, 3)
    channels = tuple(
        SensorChannel(kind, mount, start, rate, values[:, i, :].copy())
        for i, (mount, kind) in enumerate(CHANNEL_ORDER)
    )
    return SyncedSession(channels, length, start, name, values)


# --- session manifest --------------------------------------------------------

_MANIFEST_ROLES = ("frame_accel", "frame_gyro", "helmet_accel", "helmet_gyro")

_ROLE_TO_CHANNEL = {
    "frame_accel": (Mount.FRAME, SensorKind.ACCELEROMETER),
    "frame_gyro": (Mount.FRAME, SensorKind.GYROSCOPE),
    "helmet_accel": (Mount.HELMET, SensorKind.ACCELEROMETER),
    "helmet_gyro": (Mount.HELMET, SensorKind.GYROSCOPE),
}


def parse_session_manifest(text) -> dict:
    """Parse key=value manifest text: a session name plus four CSV paths."""
    if hasattr(text, "read"):
        text = text.read()
    entries = {}
    for line_no, raw in enumerate(text.split("\n"), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise MalformedManifest(f"line {line_no}: expected key=value")
        key, _, value = line.partition("=")
        key = key.strip()
        if key in entries:
            raise MalformedManifest(f"line {line_no}: duplicate key {key!r}")
        entries[key] = value.strip().strip('"')
    missing = [k for k in ("name", *_MANIFEST_ROLES) if k not in entries]
    if missing:
        raise MalformedManifest(f"missing keys: {', '.join(missing)}")
    return entries


def load_session(manifest_path) -> SyncedSession:
    """Manifest -> four parsed CSVs -> synchronize -> resample -> session."""
    manifest_path = Path(manifest_path)
    entries = parse_session_manifest(manifest_path.read_text())
    logs = []
    for role in _MANIFEST_ROLES:
        mount, kind = _ROLE_TO_CHANNEL[role]
        csv_text = (manifest_path.parent / entries[role]).read_text()
        logs.append(parse_sensor_csv(csv_text, kind, mount))
    channels = [resample_linear(log) for log in synchronize(logs)]
    return build_session(align_channel_starts(channels), name=entries["name"])
