"""The window-size x kernel-size experiment grid, synthetic sessions, reports.

The grid walks five window sizes against five kernel lengths; a cell whose
kernel is longer than the window's point count is skipped (three cells for the
standard lists). Synthetic sessions stand in for real recordings: per-class
sinusoid-plus-impulse signatures that are separable by construction, so the
grid and training machinery can be verified at desk scale.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from .dataset import (
    WindowConfig,
    oversample_balance,
    shuffle,
    slice_windows,
    split_train_test,
)
from .errors import EmptyHistory, InvalidSpec, NoUsableSessions
from .ingest import CHANNEL_ORDER, Mount, SensorChannel, SensorKind, build_session
from .labeling import LabelTrack
from .nn.model import ModelConfig
from .training import TrainConfig, history_to_csv, train

WINDOW_MS_GRID = (1000, 2000, 5000, 10000, 20000)
KERNEL_LEN_GRID = (5, 10, 20, 40, 60)

COMPLETED = "completed"
SKIPPED_KERNEL_TOO_LONG = "skipped_kernel_too_long"


# --- synthetic sessions -------------------------------------------------------

@dataclass(frozen=True)
class ClassSignature:
    """What one difficulty class "feels" like to the IMUs."""

    vibration_g: float
    frequency_hz: float
    gyro_swing_dps: float
    impulses_per_s: float


#: Deliberately separable defaults: amplitude envelopes do not overlap, so an
#: amplitude-threshold baseline already classifies the corpus. The point is to
#: verify the pipeline, not to pose a hard task.
DEFAULT_SIGNATURES = (
    ClassSignature(0.3, 2.0, 20.0, 0.2),  # easy: gentle low-frequency shaking
    ClassSignature(0.8, 5.0, 60.0, 1.0),  # medium
    ClassSignature(1.6, 9.0, 140.0, 3.0),  # hard: violent and impulse-heavy
)

_HELMET_ATTENUATION = 0.6  # the rider's body damps what the helmet unit sees
_GRAVITY_G = 1.0
_IMPULSE_FACTOR = 3.0


@dataclass(frozen=True)
class SyntheticSpec:
    sessions_per_class: int
    session_seconds: int
    seed: int
    signatures: tuple = DEFAULT_SIGNATURES
    noise_std: float = 0.05
    rate_hz: float = 25.0

    def __post_init__(self):
        if self.sessions_per_class < 1 or self.session_seconds < 1:
            raise InvalidSpec("sessions_per_class and session_seconds must be positive")
        if self.noise_std < 0 or self.rate_hz <= 0:
            raise InvalidSpec("noise_std must be >= 0 and rate_hz > 0")
        if len(set(self.signatures)) != len(self.signatures):
            raise InvalidSpec("class signatures must be pairwise distinct")
        for sig in self.signatures:
            if min(sig.vibration_g, sig.frequency_hz, sig.gyro_swing_dps) <= 0 or sig.impulses_per_s < 0:
                raise InvalidSpec(f"non-positive magnitude in {sig}")


def _impulse_train(rng, n, rate_hz, per_second, amplitude):
    out = np.zeros(n)
    count = rng.poisson(per_second * n / rate_hz)
    if count:
        pos = rng.integers(0, n, size=count)
        signs = rng.choice((-1.0, 1.0), size=count)
        np.add.at(out, pos, signs * amplitude)
    return out


def _synthetic_channel(rng, kind, mount, n, sig, spec):
    t = np.arange(n) / spec.rate_hz
    scale = 1.0 if mount is Mount.FRAME else _HELMET_ATTENUATION
    values = np.empty((n, 3))
    for axis in range(3):
        phase = rng.uniform(0.0, 2.0 * np.pi)
        if kind is SensorKind.ACCELEROMETER:
            amp = sig.vibration_g * scale
            signal = amp * np.sin(2.0 * np.pi * sig.frequency_hz * t + phase)
            signal += _impulse_train(rng, n, spec.rate_hz, sig.impulses_per_s, _IMPULSE_FACTOR * amp)
            if axis == 2:
                signal += _GRAVITY_G
        else:
            # the body/bike yaws at roughly half the vibration frequency
            signal = sig.gyro_swing_dps * scale * np.sin(np.pi * sig.frequency_hz * t + phase)
        if spec.noise_std > 0:
            signal = signal + rng.normal(0.0, spec.noise_std, n)
        values[:, axis] = signal
    return SensorChannel(kind, mount, 0, spec.rate_hz, values)


def generate_synthetic(spec: SyntheticSpec):
    """Labeled (SyncedSession, LabelTrack) pairs, deterministic per seed."""
    rng = np.random.default_rng(spec.seed)
    n = int(round(spec.session_seconds * spec.rate_hz))
    out = []
    for label, sig in enumerate(spec.signatures):
        for s in range(spec.sessions_per_class):
            channels = [
                _synthetic_channel(rng, kind, mount, n, sig, spec)
                for mount, kind in CHANNEL_ORDER
            ]
            session = build_session(channels, name=f"synth-c{label}-s{s:02d}")
            track = LabelTrack(((0, spec.session_seconds * 1000, label),))
            out.append((session, track))
    return out


# --- the experiment grid ------------------------------------------------------

@dataclass(frozen=True)
class GridSpec:
    train_config: TrainConfig
    seed: int
    window_ms_list: tuple = WINDOW_MS_GRID
    kernel_len_list: tuple = KERNEL_LEN_GRID
    overlap_fraction: float = 0.75

    def __post_init__(self):
        if not self.window_ms_list or not self.kernel_len_list:
            raise InvalidSpec("window and kernel lists must be non-empty")
        if min(self.window_ms_list) < 1 or min(self.kernel_len_list) < 1:
            raise InvalidSpec("window and kernel entries must be positive")


@dataclass(frozen=True)
class ExperimentResult:
    window_ms: int
    kernel_len: int
    status: str
    best_test_sca: float = None
    best_epoch: int = None
    sample_count: int = None
    oversampled_train_count: int = None


def cell_seed(seed: int, window_ms: int, kernel_len: int) -> int:
    """Stable per-cell seed; an explicit mix, not hash(), for reproducibility."""
    return (seed ^ (window_ms * 0x9E3779B1 + kernel_len * 0x85EBCA6B)) % 2**32


def skipped_cells(window_ms_list, kernel_len_list, overlap_fraction=0.75, rate_hz=25.0):
    """Cells where the kernel cannot fit: kernel_len > window_points."""
    skipped = set()
    for window_ms in window_ms_list:
        points = WindowConfig(window_ms, overlap_fraction, rate_hz).window_points
        for kernel_len in kernel_len_list:
            if kernel_len > points:
                skipped.add((window_ms, kernel_len))
    return skipped


def prepare_splits(samples, seed: int):
    """split 80/20 -> oversample the train side -> shuffle, with staged seeds."""
    split = split_train_test(samples, 0.8, seed=seed)
    balanced = oversample_balance(split.train, seed=seed + 1)
    return shuffle(balanced, seed=seed + 2), split.test


def _run_cell(args):
    data, spec, window_ms, kernel_len = args
    config = WindowConfig(window_ms, spec.overlap_fraction)
    points = config.window_points
    if kernel_len > points:
        return ExperimentResult(window_ms, kernel_len, SKIPPED_KERNEL_TOO_LONG)
    base = cell_seed(spec.seed, window_ms, kernel_len)
    samples = []
    for session, track in data:
        if session.length_points >= points:
            samples.extend(slice_windows(session, track, config))
    train_set, test_set = prepare_splits(samples, base)
    model_config = ModelConfig(window_points=points, kernel_len=kernel_len)
    result = train(train_set, test_set, model_config, replace(spec.train_config, seed=base + 3))
    return ExperimentResult(
        window_ms,
        kernel_len,
        COMPLETED,
        best_test_sca=result.best_test_sca,
        best_epoch=result.best_epoch,
        sample_count=len(samples),
        oversampled_train_count=len(train_set),
    )


def run_grid(data, spec: GridSpec, jobs: int = 1):
    """Every (window, kernel) cell in row-major order.

    `data` is a sequence of (SyncedSession, LabelTrack) pairs; sessions too
    short for a cell's window simply contribute no samples to it. Cells are
    independent (own derived seed each) so they may run in parallel.
    """
    data = list(data)
    if not data:
        raise NoUsableSessions("no sessions provided")
    largest = max(
        WindowConfig(w, spec.overlap_fraction).window_points for w in spec.window_ms_list
    )
    if not any(session.length_points >= largest for session, _ in data):
        raise NoUsableSessions(f"no session reaches the largest window of {largest} points")
    cells = [
        (data, spec, window_ms, kernel_len)
        for window_ms in spec.window_ms_list
        for kernel_len in spec.kernel_len_list
    ]
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(_run_cell, cells))
    return [_run_cell(cell) for cell in cells]


# --- reporting ----------------------------------------------------------------

def _cell_text(result: ExperimentResult) -> str:
    if result.status != COMPLETED:
        return "-"
    return f"{result.best_test_sca:.4f} ({result.best_epoch})"


def report_table(results) -> str:
    """Fixed-width grid of `sca (epochs)` cells plus per-window sample counts."""
    windows = sorted({r.window_ms for r in results})
    kernels = sorted({r.kernel_len for r in results})
    by_cell = {(r.window_ms, r.kernel_len): r for r in results}
    headers = ["window size"] + [f"({k},2)" for k in kernels] + ["samples", "oversampled"]
    rows = []
    for window_ms in windows:
        row = [f"{window_ms}ms"]
        row += [_cell_text(by_cell[(window_ms, k)]) for k in kernels]
        completed = [by_cell[(window_ms, k)] for k in kernels if by_cell[(window_ms, k)].status == COMPLETED]
        row.append(str(completed[0].sample_count) if completed else "-")
        row.append(str(completed[0].oversampled_train_count) if completed else "-")
        rows.append(row)
    widths = [max(len(headers[i]), *(len(r[i]) for r in rows)) for i in range(len(headers))]
    lines = ["  ".join(h.ljust(widths[i]) for i, h in enumerate(headers))]
    for row in rows:
        lines.append("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(row)))
    return "\n".join(lines) + "\n"


def report_csv(results) -> str:
    """One row per cell, in the given order, mirroring the rendered grid."""
    lines = ["window_ms,kernel_len,status,test_sca,best_epoch,samples,oversampled_train"]
    for r in results:
        if r.status == COMPLETED:
            lines.append(
                f"{r.window_ms},{r.kernel_len},{r.status},{r.best_test_sca:.4f},"
                f"{r.best_epoch},{r.sample_count},{r.oversampled_train_count}"
            )
        else:
            lines.append(f"{r.window_ms},{r.kernel_len},{r.status},,,,")
    return "\n".join(lines) + "\n"


def export_curves(history):
    """History as (csv_text, svg_text); the SVG holds train and test polylines."""
    if not history:
        raise EmptyHistory("no epochs recorded")
    return history_to_csv(history), _curves_svg(history)


def _curves_svg(history, width=640, height=400, margin=50):
    max_epoch = history[-1].epoch
    span = max(1, max_epoch - 1)

    def x(epoch):
        return margin + (epoch - 1) * (width - 2 * margin) / span

    def y(value):
        return height - margin - value * (height - 2 * margin)

    train_pts = " ".join(f"{x(r.epoch):.2f},{y(r.train_sca):.2f}" for r in history)
    test_pts = " ".join(f"{x(r.epoch):.2f},{y(r.test_sca):.2f}" for r in history)
    return (
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {width} {height}">\n'
        f'  <rect width="{width}" height="{height}" fill="white"/>\n'
        f'  <line x1="{margin}" y1="{height - margin}" x2="{width - margin}" '
        f'y2="{height - margin}" stroke="black"/>\n'
        f'  <line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" '
        f'stroke="black"/>\n'
        f'  <text x="{width // 2}" y="{height - 10}" text-anchor="middle" '
        f'font-size="14">epoch (1..{max_epoch})</text>\n'
        f'  <text x="14" y="{height // 2}" text-anchor="middle" font-size="14" '
        f'transform="rotate(-90 14 {height // 2})">sparse categorical accuracy</text>\n'
        f'  <polyline fill="none" stroke="#1f77b4" stroke-width="1.5" points="{train_pts}"/>\n'
        f'  <polyline fill="none" stroke="#ff7f0e" stroke-width="1.5" points="{test_pts}"/>\n'
        f"</svg>\n"
    )
