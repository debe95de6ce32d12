"""Phase alignment of three-axis segments at the dominant frequency.

Two adjustments are provided. The independent mode advances every axis by
its own amount so that each axis reaches the target phase, which discards
the inter-axis phase relationships. The single-reference mode derives one
advance from a chosen axis and applies it to all three, keeping every
pairwise relative phase intact.

Time shifts follow the advance convention ``out(t) = in(t + dt)``: a
positive ``dt`` raises the phase at frequency ``f`` by ``2 pi f dt``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .spectral import batch_phases, measure_phases, phase_at_frequency
from .types import (
    AXES,
    AlignmentMode,
    AlignmentPlan,
    AxisId,
    ModeKind,
    PhaseSet,
    SamplingSpec,
    Segment,
    TriAxialRecord,
    wrap_phase,
    wrap_phase_array,
)

def shift_samples(data: np.ndarray, advance: np.ndarray | float) -> np.ndarray:
    """Circularly advance the last axis of ``data`` by ``advance`` samples.

    ``advance`` broadcasts against ``data.shape[:-1]``. The integer part is
    an exact index rotation; the remainder, at most half a sample, is a
    linear phase ramp on the real spectrum. The Nyquist bin of even-length
    inputs is left untouched, which keeps the output real and every DFT
    magnitude unchanged.
    """
    data = np.asarray(data, dtype=float)
    L = data.shape[-1]
    advance = np.broadcast_to(np.asarray(advance, dtype=float), data.shape[:-1])
    if not np.all(np.isfinite(advance)):
        raise ValueError("shift must be finite")
    whole = np.rint(advance)
    frac = advance - whole

    if np.any(whole):
        idx = (np.arange(L) + whole[..., None].astype(np.int64)) % L
        rolled = np.take_along_axis(data, idx, axis=-1)
    else:
        rolled = data.copy()
    if not np.any(frac):
        return rolled

    angle = (2.0 * np.pi / L) * frac[..., None] * np.arange(L // 2 + 1)
    ramp = np.empty(angle.shape, dtype=complex)
    ramp.real = np.cos(angle)
    ramp.imag = np.sin(angle)
    if L % 2 == 0:
        ramp[..., -1] = 1.0
    shifted = np.fft.irfft(np.fft.rfft(rolled, axis=-1) * ramp, n=L, axis=-1)
    return np.where(frac[..., None] == 0.0, rolled, shifted)


def fractional_shift(axis_samples, dt: float, spec: SamplingSpec) -> np.ndarray:
    """Advance one axis by ``dt`` seconds (circular, sub-sample accurate)."""
    x = np.asarray(axis_samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("need a 1-D sequence of at least 2 samples")
    if not math.isfinite(dt):
        raise ValueError(f"non-finite shift {dt!r}")
    return shift_samples(x, dt * spec.sample_rate_hz)


def plan_shifts(
    phases: np.ndarray,
    degenerate: np.ndarray,
    mode: AlignmentMode,
    freq_hz: float,
    target_phi: float = 0.0,
) -> np.ndarray:
    """Per-axis advances in seconds for phase arrays of shape ``(..., 3)``."""
    if not (math.isfinite(freq_hz) and freq_hz > 0):
        raise ValueError(f"dominant frequency must be positive, got {freq_hz}")
    phases = np.asarray(phases, dtype=float)
    degenerate = np.asarray(degenerate, dtype=bool)
    omega = 2.0 * np.pi * freq_hz
    if mode.kind is ModeKind.NONE:
        return np.zeros_like(phases)
    if mode.kind is ModeKind.INDEPENDENT:
        dt = -wrap_phase_array(phases - target_phi) / omega
        return np.where(degenerate, 0.0, dt)
    r = int(mode.reference)
    dt = -wrap_phase_array(phases[..., r] - target_phi) / omega
    dt = np.where(degenerate[..., r], 0.0, dt)
    return np.repeat(dt[..., None], 3, axis=-1)


def compute_plan(phases: PhaseSet, mode: AlignmentMode, target_phi: float = 0.0) -> AlignmentPlan:
    """Time shifts that bring the phase(s) selected by ``mode`` to ``target_phi``.

    Axes whose phase is flagged degenerate get a zero shift and are listed
    in ``plan.flagged``; for reference mode a degenerate reference zeroes
    the whole plan.
    """
    mode = AlignmentMode.parse(mode)
    degen = np.array([a in phases.degenerate for a in AXES])
    dt = plan_shifts(np.array(phases.phases), degen, mode, phases.freq_hz, target_phi)
    if mode.kind is ModeKind.NONE:
        flagged = frozenset()
    elif mode.kind is ModeKind.INDEPENDENT:
        flagged = frozenset(phases.degenerate)
    else:
        flagged = frozenset({mode.reference} & phases.degenerate)
    return AlignmentPlan(mode, *map(float, dt), phases.freq_hz, flagged)


def apply_plan(segment: Segment, plan: AlignmentPlan) -> Segment:
    """Advance every axis of ``segment`` by its planned shift."""
    duration = segment.spec.duration
    for axis, dt in zip(AXES, plan.shifts):
        if not abs(dt) < duration:
            raise ValueError(
                f"shift {dt:g} s on axis {axis.label} is not shorter than the segment ({duration:g} s)"
            )
    if not any(plan.shifts):
        return segment.replace_data(segment.data.copy())
    advance = np.array(plan.shifts) * segment.spec.sample_rate_hz
    return segment.replace_data(shift_samples(segment.data, advance))


def align_segment(
    segment: Segment, mode: AlignmentMode, freq_hz: float, target_phi: float = 0.0
) -> tuple[Segment, AlignmentPlan]:
    plan = compute_plan(measure_phases(segment, freq_hz), mode, target_phi)
    return apply_plan(segment, plan), plan


def align_batch(
    data: np.ndarray,
    mode: AlignmentMode,
    freq_hz: float,
    sample_rate_hz: float,
    target_phi: float = 0.0,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Align a stack of windows shaped ``(n, 3, L)``.

    Returns the aligned stack, the pre-alignment phases ``(n, 3)`` and the
    applied shifts in seconds ``(n, 3)``.
    """
    phases, _, degen = batch_phases(data, freq_hz, sample_rate_hz)
    dt = plan_shifts(phases, degen, mode, freq_hz, target_phi)
    if not np.any(dt):
        return np.array(data, dtype=float, copy=True), phases, dt
    return shift_samples(data, dt * sample_rate_hz), phases, dt


def extract_window(
    data: np.ndarray,
    start: int,
    length: int,
    advance_s: float,
    sample_rate_hz: float,
) -> np.ndarray:
    """Slice ``data[..., start:start+length]`` and advance it by a sub-sample amount.

    Only the residual goes through the circular spectral shift; whole
    samples come from the record itself.
    """
    n = data.shape[-1]
    if start < 0 or start + length > n:
        raise ValueError(f"window [{start}, {start + length}) outside record of {n} samples")
    window = np.array(data[..., start : start + length], dtype=float)
    if advance_s == 0.0:
        return window
    return shift_samples(window, advance_s * sample_rate_hz)


def gather_windows(data: np.ndarray, positions: np.ndarray, length: int) -> np.ndarray:
    """Windows of a ``(3, N)`` record at fractional per-axis start positions.

    ``positions`` has shape ``(n, 3)`` in samples. Each axis is re-sliced at
    the nearest whole sample, then advanced circularly by the remainder.
    """
    positions = np.asarray(positions, dtype=float)
    whole = np.rint(positions).astype(np.int64)
    if whole.size and (whole.min() < 0 or whole.max() + length > data.shape[-1]):
        raise ValueError("window position outside the record")
    idx = whole[..., None] + np.arange(length)
    windows = data[np.arange(3)[None, :, None], idx]
    return shift_samples(windows, positions - whole)


def align_in_record(
    data: np.ndarray,
    positions: np.ndarray,
    length: int,
    mode: AlignmentMode,
    freq_hz: float,
    sample_rate_hz: float,
    target_phi: float = 0.0,
    refine: int = 1,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Align windows by moving them inside their parent record.

    ``positions`` are the (fractional) window starts, shape ``(n,)``. Each
    planned advance is realized by re-slicing the record, wrapped by whole
    periods of ``freq_hz`` where needed to stay inside it; ``refine`` extra
    passes re-measure the moved window and correct the leftover phase
    error, which is non-zero when a window spans a non-integer number of
    cycles. Returns aligned windows ``(n, 3, L)``, phases before alignment
    ``(n, 3)`` and total advances in seconds ``(n, 3)``.
    """
    n_rec = data.shape[-1]
    period = sample_rate_hz / freq_hz
    if n_rec < length + period:
        raise ValueError("record too short to realign inside it; it must span one window plus one period")
    base = np.repeat(np.asarray(positions, dtype=float)[:, None], 3, axis=1)
    windows = gather_windows(data, base, length)
    phases, _, degen = batch_phases(windows, freq_hz, sample_rate_hz)
    if mode.kind is ModeKind.NONE:
        return windows, phases, np.zeros_like(phases)

    pos = base.copy()
    current = windows
    cur_phases, cur_degen = phases, degen
    for _ in range(1 + max(0, int(refine))):
        dt = plan_shifts(cur_phases, cur_degen | degen, mode, freq_hz, target_phi)
        pos = pos + dt * sample_rate_hz
        low, high = 0.0, n_rec - length - 0.5
        pos = np.where(pos < low - 0.5, pos + period * np.ceil((low - 0.5 - pos) / period), pos)
        pos = np.where(pos > high, pos - period * np.ceil((pos - high) / period), pos)
        current = gather_windows(data, pos, length)
        cur_phases, _, cur_degen = batch_phases(current, freq_hz, sample_rate_hz)
    return current, phases, (pos - base) / sample_rate_hz


@dataclass(frozen=True, slots=True)
class Onset:
    """Segmentation onset: whole-sample index plus a sub-sample advance."""

    index: int
    residual_s: float
    sample_rate_hz: float

    @property
    def position(self) -> float:
        """Onset in (fractional) samples."""
        return self.index + self.residual_s * self.sample_rate_hz


def determine_onset(
    record: TriAxialRecord,
    f_d: float,
    reference: AxisId = AxisId.X,
    target_phi: float = 0.0,
    search_start: int = 0,
    probe_len: int = 512,
    max_iter: int = 12,
) -> Onset:
    """Earliest onset at or after ``search_start`` where the reference phase is ``target_phi``.

    The phase of the reference axis on a ``probe_len`` window is converted to
    a forward offset within one period. Because the phase of a window that
    holds a non-integer number of cycles is slightly biased, the offset is
    then refined by re-probing until the measured phase matches the target.
    """
    fs = record.spec.sample_rate_hz
    period_samples = fs / f_d if f_d > 0 else math.inf
    needed = search_start + probe_len + math.ceil(period_samples)
    if search_start < 0 or probe_len < 2 or needed > record.spec.n_samples:
        raise ValueError(
            f"insufficient samples: onset search needs {needed}, record has {record.spec.n_samples}"
        )
    spec = SamplingSpec(fs, probe_len)
    axis = record.axis(AxisId(reference))
    omega = 2.0 * np.pi * f_d
    period = 1.0 / f_d

    def probe(tau: float) -> tuple[int, float, float]:
        pos = tau * fs
        idx = int(round(pos))
        res = (pos - idx) / fs
        window = extract_window(axis, search_start + idx, probe_len, res, fs)
        return idx, res, phase_at_frequency(window, spec, f_d)[0]

    phi0 = phase_at_frequency(axis[search_start : search_start + probe_len], spec, f_d)[0]
    tau = (wrap_phase(target_phi - phi0) / omega) % period
    for _ in range(max_iter):
        _, _, phi = probe(tau)
        err = wrap_phase(target_phi - phi)
        if abs(err) < 1e-12:
            break
        tau += err / omega
    tau %= period
    if period - tau < 1e-9 * period:
        tau = 0.0
    idx, res, _ = probe(tau)
    return Onset(search_start + idx, res, fs)
