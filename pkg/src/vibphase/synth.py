"""Synthetic three-axis rotor vibration with known class signatures.

Each axis is a sum of harmonics of the rotation frequency plus white
Gaussian noise::

    a(t) = sum_h A[a, h] cos(2 pi h f_d t + h theta + delta[a, h]) + noise

``theta`` is the rotor angle at the first recorded sample, drawn uniformly
per file; it models an arbitrary recording start, which advances harmonic
``h`` by ``h * theta``. ``delta[a, h]`` are class-specific phase offsets
with ``delta[X, :] = 0``, so the inter-axis relative phase X-Y at the
fundamental is ``-delta[Y, 0]``.

The class presets are stand-ins: they mirror the washer class structure
(mass grows with washer thickness, mounting position moves the phase
pattern) but no measured signatures exist to calibrate them against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping

import numpy as np

from .types import ClassLabel, SamplingSpec, TriAxialRecord

N_HARMONICS = 3


@dataclass(frozen=True)
class ClassSignature:
    """Per-axis harmonic amplitudes and phase offsets, each shaped ``(3, H)``."""

    amplitudes: np.ndarray
    offsets: np.ndarray

    def __post_init__(self) -> None:
        amps = np.array(self.amplitudes, dtype=float)
        offs = np.array(self.offsets, dtype=float)
        if amps.ndim != 2 or amps.shape[0] != 3 or offs.shape != amps.shape:
            raise ValueError("amplitudes and offsets must both have shape (3, H)")
        if np.any(amps < 0) or not np.all(np.isfinite(amps)):
            raise ValueError("amplitudes must be finite and nonnegative")
        if not np.all(np.isfinite(offs)):
            raise ValueError("phase offsets must be finite")
        amps.flags.writeable = False
        offs.flags.writeable = False
        object.__setattr__(self, "amplitudes", amps)
        object.__setattr__(self, "offsets", offs)

    @classmethod
    def time_lagged(cls, fundamental, harmonic_ratios, delta_xy: float, delta_xz: float) -> ClassSignature:
        """Signature whose axes are scaled, time-lagged copies of one waveform.

        Harmonic ``h`` of an axis lagging by phase ``d`` at the fundamental
        is offset by ``h * d``; ``harmonic_ratios`` scales the fundamental
        amplitude for harmonics 2..H.
        """
        fundamental = np.asarray(fundamental, dtype=float)
        ratios = np.concatenate([[1.0], np.asarray(harmonic_ratios, dtype=float)])
        h = np.arange(1, ratios.size + 1)
        lag = np.array([0.0, -delta_xy, -delta_xz])
        return cls(fundamental[:, None] * ratios[None, :], lag[:, None] * h[None, :])

    @property
    def delta_xy(self) -> float:
        return -float(self.offsets[1, 0])

    @property
    def delta_xz(self) -> float:
        return -float(self.offsets[2, 0])


def _phase_only_presets() -> dict[ClassLabel, ClassSignature]:
    # Identical amplitude spectra for every class; only the axis lags differ.
    amps = [1.0, 0.6, 0.8]
    ratios = [0.3, 0.15]
    h = math.pi / 2
    lags = {
        ClassLabel.CLASS0: (h, h),
        ClassLabel.CLASS1: (h, -h),
        ClassLabel.CLASS2: (-h, h),
        ClassLabel.CLASS3: (-h, -h),
        ClassLabel.CLASS4: (math.pi, 0.0),
        ClassLabel.CLASS5: (0.0, math.pi),
    }
    return {c: ClassSignature.time_lagged(amps, ratios, *lags[c]) for c in ClassLabel}


def _mixed_presets() -> dict[ClassLabel, ClassSignature]:
    # Unbalance amplitude grows with washer mass. Left and right mounting of
    # the same washer differ mostly in the axial and vertical lags, with a
    # smaller shift of amplitude between the axes.
    p = math.pi
    spec = {
        ClassLabel.CLASS0: ([1.00, 0.55, 0.80], [0.30, 0.12], (p / 3, p / 2)),
        ClassLabel.CLASS1: ([1.60, 0.80, 1.35], [0.22, 0.10], (2 * p / 3, p / 4)),
        ClassLabel.CLASS2: ([1.60, 0.90, 1.25], [0.22, 0.10], (-p / 3, 3 * p / 4)),
        ClassLabel.CLASS3: ([1.30, 0.65, 1.10], [0.26, 0.11], (2 * p / 3, p / 4)),
        ClassLabel.CLASS4: ([1.30, 0.75, 1.00], [0.26, 0.11], (-p / 3, 3 * p / 4)),
        ClassLabel.CLASS5: ([1.45, 0.60, 1.20], [0.24, 0.14], (p / 3, p / 2)),
    }
    return {c: ClassSignature.time_lagged(a, r, *d) for c, (a, r, d) in spec.items()}


PRESETS = {"mixed": _mixed_presets, "phase-only": _phase_only_presets}


@dataclass(frozen=True)
class RotorModel:
    f_d: float = 20.0
    sample_rate_hz: float = 3000.0
    n_samples: int = 40000
    noise_sigma: float = 0.1
    classes: Mapping[ClassLabel, ClassSignature] = field(default_factory=_mixed_presets)
    preset: str = "mixed"
    amplitude_jitter: float = 0.0
    phase_jitter: float = 0.0

    def __post_init__(self) -> None:
        SamplingSpec(self.sample_rate_hz, self.n_samples)
        if not (math.isfinite(self.f_d) and self.f_d > 0):
            raise ValueError("f_d must be positive")
        for name in ("noise_sigma", "amplitude_jitter", "phase_jitter"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value >= 0):
                raise ValueError(f"{name} must be nonnegative")
        if set(self.classes) != set(ClassLabel):
            raise ValueError("a rotor model needs a signature for each of the six classes")
        n_h = {s.amplitudes.shape[1] for s in self.classes.values()}
        if max(n_h) * self.f_d >= self.sample_rate_hz / 2:
            raise ValueError("highest harmonic must stay below Nyquist")

    @classmethod
    def from_preset(cls, name: str, **kwargs) -> RotorModel:
        try:
            classes = PRESETS[name]()
        except KeyError:
            raise ValueError(f"unknown preset {name!r}; choose from {sorted(PRESETS)}") from None
        if name == "phase-only":
            kwargs.setdefault("noise_sigma", 0.0)
        return cls(classes=classes, preset=name, **kwargs)

    @property
    def spec(self) -> SamplingSpec:
        return SamplingSpec(self.sample_rate_hz, self.n_samples)

    def with_(self, **changes) -> RotorModel:
        return replace(self, **changes)


def synthesize(
    signature: ClassSignature,
    f_d: float,
    spec: SamplingSpec,
    start_phase: float,
    noise_sigma: float = 0.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Samples shaped ``(3, n)`` for one signature and rotor start angle."""
    t = np.arange(spec.n_samples) / spec.sample_rate_hz
    n_h = signature.amplitudes.shape[1]
    h = np.arange(1, n_h + 1)
    arg = (2.0 * np.pi * f_d * t)[None, :] * h[:, None] + (h * start_phase)[:, None]
    out = np.einsum("ah,ahn->an", signature.amplitudes, np.cos(arg[None, :, :] + signature.offsets[:, :, None]))
    if noise_sigma > 0:
        if rng is None:
            raise ValueError("noise needs a random generator")
        out = out + rng.normal(0.0, noise_sigma, size=out.shape)
    return out


def jittered(signature: ClassSignature, amplitude_jitter: float, phase_jitter: float, rng) -> ClassSignature:
    """Per-file variant of a signature: every axis gets its own gain and lag error."""
    gain = np.exp(rng.normal(0.0, amplitude_jitter, size=3))
    lag = rng.normal(0.0, phase_jitter, size=3)
    lag -= lag[0]
    h = np.arange(1, signature.amplitudes.shape[1] + 1)
    return ClassSignature(
        signature.amplitudes * gain[:, None], signature.offsets + lag[:, None] * h[None, :]
    )


def generate_record(model: RotorModel, label: ClassLabel, seed: int, source_id: str | None = None) -> TriAxialRecord:
    """One labeled record; start angle, file jitter and noise all come from ``seed``."""
    rng = np.random.default_rng(seed)
    theta = rng.uniform(-math.pi, math.pi)
    signature = model.classes[label]
    if model.amplitude_jitter or model.phase_jitter:
        signature = jittered(signature, model.amplitude_jitter, model.phase_jitter, rng)
    data = synthesize(signature, model.f_d, model.spec, theta, model.noise_sigma, rng)
    return TriAxialRecord(
        model.spec,
        data,
        label=label,
        source_id=source_id or f"{label.tag.lower()}_seed{seed}",
        unit="synthetic",
    )


def file_seed(master_seed: int, label: ClassLabel, index: int) -> int:
    seq = np.random.SeedSequence([int(master_seed), label.index, int(index)])
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def generate_benchmark(model: RotorModel, files_per_class: int, seed: int = 0) -> list[TriAxialRecord]:
    """``files_per_class`` records for each of the six classes, ordered by class."""
    if int(files_per_class) != files_per_class or files_per_class < 1:
        raise ValueError(f"files_per_class must be a positive integer, got {files_per_class}")
    return [
        generate_record(model, label, file_seed(seed, label, i), f"{label.tag.lower()}_{i:02d}")
        for label in ClassLabel
        for i in range(files_per_class)
    ]
