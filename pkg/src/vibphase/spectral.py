"""DFT, exact-frequency phase extraction and dominant-frequency detection."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .types import AXES, AxisId, PhaseSet, SamplingSpec, Segment, wrap_phase

# Below this fraction of rms * L the phase at a frequency carries no information.
DEGENERATE_REL_MAG = 1e-12


def dft_axis(samples) -> np.ndarray:
    """Forward DFT with the negative-exponent convention, ``X[k] = sum x[n] e^{-j2pi kn/L}``."""
    x = np.asarray(samples, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise ValueError("dft_axis needs a 1-D sequence of at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise ValueError("samples must be finite")
    return np.fft.fft(x)


def idft_axis(bins) -> np.ndarray:
    """Inverse of :func:`dft_axis`; returns the real part."""
    return np.fft.ifft(np.asarray(bins, dtype=complex)).real


@dataclass(frozen=True)
class SpectrumFrame:
    """Full DFT of all three axes of a segment.

    ``bins`` has shape ``(3, L)``; ``freqs_hz[k] = k * fs / L``.
    """

    freqs_hz: np.ndarray
    bins: np.ndarray

    def axis(self, a: AxisId) -> np.ndarray:
        return self.bins[int(a)]


def spectrum(segment: Segment) -> SpectrumFrame:
    L = segment.spec.n_samples
    freqs = np.arange(L) * segment.spec.sample_rate_hz / L
    return SpectrumFrame(freqs, np.fft.fft(segment.data, axis=-1))


def dtft(samples: np.ndarray, f: float, sample_rate_hz: float) -> np.ndarray:
    """Single-frequency DTFT along the last axis, referenced to the first sample.

    Works on any leading batch shape.
    """
    samples = np.asarray(samples, dtype=float)
    n = np.arange(samples.shape[-1])
    kernel = np.exp(-2j * np.pi * f * n / sample_rate_hz)
    return samples @ kernel


def _check_frequency(f: float, spec: SamplingSpec) -> None:
    if not (math.isfinite(f) and 0.0 < f < spec.nyquist_hz):
        raise ValueError(f"frequency {f} Hz outside (0, {spec.nyquist_hz}) Hz")


TAPERS = {"hann": np.hanning}


def phase_at_frequency(
    segment_axis, spec: SamplingSpec, f: float, taper: str | None = None
) -> tuple[float, float]:
    """Phase and magnitude of one axis at the exact frequency ``f``.

    Evaluates ``sum_n s[n] exp(-j 2 pi f n T_s)`` directly, so off-bin
    frequencies are not snapped to the nearest FFT bin. The phase is
    wrapped to (-pi, pi].

    ``taper="hann"`` weights the samples first. It lowers leakage from
    other components but also moves the phase estimate, so it is off by
    default.
    """
    _check_frequency(f, spec)
    s = np.asarray(segment_axis, dtype=float)
    if s.ndim != 1 or s.size < 2:
        raise ValueError("need a 1-D sequence of at least 2 samples")
    if taper is not None:
        try:
            s = s * TAPERS[taper](s.size)
        except KeyError:
            raise ValueError(f"unknown taper {taper!r}; choose from {sorted(TAPERS)}") from None
    c = dtft(s, f, spec.sample_rate_hz)
    return wrap_phase(np.angle(c)), float(abs(c))


def degenerate_mask(mags: np.ndarray, data: np.ndarray, rel: float = DEGENERATE_REL_MAG) -> np.ndarray:
    """True where ``mags`` is negligible against ``rel * rms * L`` of ``data``.

    ``mags`` has the shape of ``data`` without the last axis, plus any
    trailing frequency axis broadcastable against it.
    """
    L = data.shape[-1]
    rms = np.sqrt(np.mean(np.square(data), axis=-1))
    floor = rel * rms * L
    if mags.ndim > floor.ndim:
        floor = floor[..., None]
    return mags <= floor


def principal_angle(c) -> np.ndarray:
    """``arg(c)`` folded onto (-pi, pi]."""
    ang = np.angle(c)
    return np.where(ang <= -np.pi, np.pi, ang)


def batch_phases(data: np.ndarray, f: float, sample_rate_hz: float):
    """Phases, magnitudes and degeneracy flags at ``f`` for ``(..., 3, L)`` arrays."""
    c = dtft(data, f, sample_rate_hz)
    mags = np.abs(c)
    return principal_angle(c), mags, degenerate_mask(mags, data)


def measure_phases(segment: Segment, f: float) -> PhaseSet:
    """PhaseSet of all three axes of ``segment`` at frequency ``f``."""
    _check_frequency(f, segment.spec)
    phases, mags, degen = batch_phases(segment.data, f, segment.spec.sample_rate_hz)
    return PhaseSet(
        f,
        *phases.tolist(),
        *mags.tolist(),
        degenerate=frozenset(a for a in AXES if degen[int(a)]),
    )


def _quadratic_peak(a: float, b: float, c: float) -> float:
    # Vertex offset of the parabola through (-1, a), (0, b), (1, c).
    denom = a - 2.0 * b + c
    if denom >= 0.0:
        return 0.0
    return float(np.clip(0.5 * (a - c) / denom, -0.5, 0.5))


def detect_dominant_frequency(
    segment: Segment,
    search_band_hz: tuple[float, float],
    detection_axis: AxisId = AxisId.X,
    zero_pad: int = 8,
) -> float:
    """Strongest spectral component of one axis inside a frequency band.

    The spectrum is zero-padded to ``zero_pad * L`` points, then the peak
    bin is refined by a parabola through the log-magnitudes of the peak and
    its two neighbours. Ties go to the lowest frequency. Without padding a
    window holding only a few cycles biases the estimate by most of a bin.
    """
    low, high = (float(v) for v in search_band_hz)
    spec = segment.spec
    if not (math.isfinite(low) and math.isfinite(high)) or low >= high:
        raise ValueError(f"empty search band ({low}, {high})")
    if low <= 0.0 or high >= spec.nyquist_hz:
        raise ValueError(f"search band ({low}, {high}) must lie inside (0, {spec.nyquist_hz}) Hz")

    if int(zero_pad) < 1:
        raise ValueError("zero_pad must be >= 1")
    n_fft = spec.n_samples * int(zero_pad)
    df = spec.sample_rate_hz / n_fft
    mags = np.abs(np.fft.rfft(segment.axis(AxisId(detection_axis)), n=n_fft))
    k_lo = max(1, math.ceil(low / df))
    k_hi = min(mags.size - 1, math.floor(high / df))
    if k_lo > k_hi:
        raise ValueError(f"search band ({low}, {high}) Hz contains no DFT bin at resolution {df:.4g} Hz")

    k = k_lo + int(np.argmax(mags[k_lo : k_hi + 1]))
    offset = 0.0
    if 0 < k < mags.size - 1:
        trio = mags[k - 1 : k + 2]
        if np.all(trio > 0.0):
            offset = _quadratic_peak(*np.log(trio))
    return (k + offset) * df
