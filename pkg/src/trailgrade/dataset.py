"""Windowed sample construction: slicing, stacking, splitting, balancing.

A session is cut by a sliding window with 75% overlap into (n, 4, 3) tensors,
n time steps by 4 sensor rows by 3 axis channels, each carrying one difficulty
label. Only windows whose whole time span sits under a single label are kept.
"""

import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import (
    CorruptArchive,
    EmptyClass,
    OutOfRange,
    SessionTooShort,
    TooFewSamples,
)
from .ingest import SyncedSession
from .labeling import LABELS, LabelTrack, uniform_label

@dataclass(frozen=True)
class WindowConfig:
    """Sliding-window geometry.

    The five studied sizes 1000/2000/5000/10000/20000 ms hold 25/50/125/250/500
    points at 25 Hz; 75% overlap gives a stride of max(1, floor(points / 4)).
    """

    window_ms: int
    overlap_fraction: float = 0.75
    rate_hz: float = 25.0

    def __post_init__(self):
        if not 0.0 <= self.overlap_fraction < 1.0:
            raise ValueError("overlap_fraction must be in [0, 1)")
        points = self.window_ms * self.rate_hz / 1000.0
        if points < 1.0 or abs(points - round(points)) > 1e-9:
            raise ValueError(
                f"window_ms={self.window_ms} is not a whole number of samples at {self.rate_hz} Hz"
            )

    @property
    def window_points(self) -> int:
        return int(round(self.window_ms * self.rate_hz / 1000.0))

    @property
    def stride(self) -> int:
        # floor keeps strides integral (w=25 -> 6); epsilon guards fractions
        # that are not exactly representable (0.75 is)
        return max(1, math.floor(self.window_points * (1.0 - self.overlap_fraction) + 1e-9))


@dataclass(frozen=True, eq=False)
class WindowSample:
    data: np.ndarray  # (window_points, 4, 3) float64
    label: int
    origin: tuple  # (session name, window start time in ms)


@dataclass
class DatasetSplit:
    train: list
    test: list
    seed: int


def stack_sample(session: SyncedSession, start_index: int, window_points: int, label: int) -> WindowSample:
    """One window tensor: data[t, r, c] = channel r's axis c at start_index + t."""
    if start_index < 0 or start_index + window_points > session.length_points:
        raise OutOfRange(
            f"window [{start_index}, {start_index + window_points}) outside session "
            f"of {session.length_points} points"
        )
    data = session.data[start_index : start_index + window_points].copy()
    period = 1000.0 / session.rate_hz
    start_ms = session.start_time_ms + int(round(start_index * period))
    return WindowSample(data, int(label), (session.name, start_ms))


def slice_windows(session: SyncedSession, track: LabelTrack, config: WindowConfig):
    """Sliding-window samples whose whole span carries one single label.

    Windows start at point indices 0, s, 2s, ... with s = the config stride;
    a window is dropped when its [start_ms, start_ms + window_ms) span crosses
    a label change or unlabeled time.
    """
    w = config.window_points
    if session.length_points < w:
        raise SessionTooShort(
            f"session has {session.length_points} points, window needs {w}"
        )
    period = 1000.0 / config.rate_hz
    out = []
    for p in range(0, session.length_points - w + 1, config.stride):
        start_ms = session.start_time_ms + int(round(p * period))
        label = uniform_label(track, start_ms, start_ms + config.window_ms)
        if label is None:
            continue
        out.append(stack_sample(session, p, w, label))
    return out


def split_train_test(samples, train_fraction: float = 0.8, seed: int = 0, by_session: bool = False) -> DatasetSplit:
    """Seeded uniform split; the first round(train_fraction * N) go to train.

    Both sides are kept non-empty. With by_session=True whole recordings are
    assigned to one side (leakage-aware mode, off by default).
    """
    n = len(samples)
    if n < 2:
        raise TooFewSamples("need at least 2 samples to split")
    if not 0.0 < train_fraction < 1.0:
        raise ValueError("train_fraction must be in (0, 1)")
    n_train = min(max(int(round(train_fraction * n)), 1), n - 1)
    rng = np.random.default_rng(seed)
    if not by_session:
        perm = rng.permutation(n)
        train = [samples[i] for i in perm[:n_train]]
        test = [samples[i] for i in perm[n_train:]]
        return DatasetSplit(train, test, seed)

    names = sorted({s.origin[0] for s in samples})
    if len(names) < 2:
        raise TooFewSamples("per-recording split needs at least 2 sessions")
    order = rng.permutation(len(names))
    train_names = set()
    count = 0
    for idx in order[:-1]:  # always leave at least one session for test
        if count >= n_train:
            break
        train_names.add(names[idx])
        count += sum(1 for s in samples if s.origin[0] == names[idx])
    if not train_names:
        train_names.add(names[order[0]])
    train = [s for s in samples if s.origin[0] in train_names]
    test = [s for s in samples if s.origin[0] not in train_names]
    return DatasetSplit(train, test, seed)


def class_histogram(samples) -> dict:
    """Per-label sample counts; always reports the three known labels."""
    counts = {label: 0 for label in LABELS}
    for s in samples:
        counts[s.label] = counts.get(s.label, 0) + 1
    return counts


def oversample_balance(train, seed: int = 0, classes=None):
    """Duplicate minority-class samples until every class matches the largest.

    Each short class is cycled whole (in origin order) as often as it fits and
    the remainder is a seeded draw without replacement. The output is the input
    followed by the duplicates, so no original value is altered or dropped.
    `classes` may name the classes that must be present; an absent one raises
    EmptyClass so the caller can decide whether to proceed with fewer classes.
    """
    counts = class_histogram(train)
    if classes is None:
        classes = [c for c in sorted(counts) if counts[c] > 0]
    else:
        classes = sorted(classes)
        for c in classes:
            if counts.get(c, 0) == 0:
                raise EmptyClass(f"class {c} has no samples to duplicate")
    if not classes:
        raise EmptyClass("no labeled samples to balance")
    target = max(counts[c] for c in classes)
    rng = np.random.default_rng(seed)
    duplicates = []
    for c in classes:
        members = sorted((s for s in train if s.label == c), key=lambda s: s.origin)
        k = len(members)
        need = target - k
        if need <= 0:
            continue
        duplicates.extend(members * (need // k))
        remainder = need % k
        if remainder:
            picks = rng.choice(k, size=remainder, replace=False)
            duplicates.extend(members[i] for i in picks)
    return list(train) + duplicates


def shuffle(samples, seed: int = 0):
    """Seeded uniform permutation of the sample sequence."""
    rng = np.random.default_rng(seed)
    return [samples[i] for i in rng.permutation(len(samples))]


# --- sample archive -----------------------------------------------------------

_ARCHIVE_MAGIC = b"TGDS"
_ARCHIVE_VERSION = 1


def write_sample_archive(samples, path):
    """Binary sample container; float32 payload, bit-exact on re-save."""
    window_points = {s.data.shape[0] for s in samples}
    if len(window_points) > 1:
        raise ValueError(f"mixed window sizes in one archive: {sorted(window_points)}")
    w = window_points.pop() if window_points else 0
    buf = bytearray()
    buf += _ARCHIVE_MAGIC
    buf.append(_ARCHIVE_VERSION)
    buf += struct.pack("<II", len(samples), w)
    for s in samples:
        name, start_ms = s.origin
        name_bytes = name.encode("utf-8")
        buf += struct.pack("<BH", s.label, len(name_bytes))
        buf += name_bytes
        buf += struct.pack("<q", int(start_ms))
        buf += s.data.astype("<f4").tobytes()
    Path(path).write_bytes(bytes(buf))


def read_sample_archive(path):
    data = Path(path).read_bytes()
    pos = 0

    def take(n):
        nonlocal pos
        if pos + n > len(data):
            raise CorruptArchive(f"{path}: truncated sample archive")
        chunk = data[pos : pos + n]
        pos += n
        return chunk

    if take(4) != _ARCHIVE_MAGIC:
        raise CorruptArchive(f"{path}: not a sample archive")
    if take(1)[0] != _ARCHIVE_VERSION:
        raise CorruptArchive(f"{path}: unsupported sample archive version")
    count, w = struct.unpack("<II", take(8))
    samples = []
    for _ in range(count):
        label, name_len = struct.unpack("<BH", take(3))
        name = take(name_len).decode("utf-8")
        (start_ms,) = struct.unpack("<q", take(8))
        raw = take(w * 4 * 3 * 4)
        tensor = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(w, 4, 3)
        samples.append(WindowSample(tensor, int(label), (name, start_ms)))
    if pos != len(data):
        raise CorruptArchive(f"{path}: trailing bytes")
    return samples
