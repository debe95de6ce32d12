"""Core data model for synchronized three-axis vibration data."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import Enum, IntEnum

import numpy as np


class AxisId(IntEnum):
    """Sensor axis; integer value doubles as the row index into ``data``."""

    X = 0
    Y = 1
    Z = 2

    @classmethod
    def parse(cls, text: str | AxisId) -> AxisId:
        if isinstance(text, AxisId):
            return text
        try:
            return cls[str(text).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown axis {text!r}; expected x, y or z") from None

    @property
    def label(self) -> str:
        return self.name.lower()


AXES = (AxisId.X, AxisId.Y, AxisId.Z)


class Washer(Enum):
    NONE = "none"
    THIN = "thin"
    THICK = "thick"


class ClassLabel(Enum):
    """Washer-configuration conditions of the rotor dataset.

    Each member carries ``(index, left_washer, right_washer)``.
    """

    CLASS0 = (0, Washer.NONE, Washer.NONE)
    CLASS1 = (1, Washer.THICK, Washer.NONE)
    CLASS2 = (2, Washer.NONE, Washer.THICK)
    CLASS3 = (3, Washer.THIN, Washer.NONE)
    CLASS4 = (4, Washer.NONE, Washer.THIN)
    CLASS5 = (5, Washer.THIN, Washer.THIN)

    @property
    def index(self) -> int:
        return self.value[0]

    @property
    def left_washer(self) -> Washer:
        return self.value[1]

    @property
    def right_washer(self) -> Washer:
        return self.value[2]

    @property
    def is_normal(self) -> bool:
        return self is ClassLabel.CLASS0

    @property
    def tag(self) -> str:
        return f"Class{self.index}"

    @classmethod
    def from_index(cls, index: int) -> ClassLabel:
        for member in cls:
            if member.index == int(index):
                return member
        raise ValueError(f"no class with index {index}")

    @classmethod
    def parse(cls, text: str | int | ClassLabel) -> ClassLabel:
        if isinstance(text, ClassLabel):
            return text
        if isinstance(text, int):
            return cls.from_index(text)
        s = str(text).strip().lower()
        if s.startswith("class"):
            s = s[5:]
        try:
            return cls.from_index(int(s))
        except ValueError:
            raise ValueError(f"unknown class label {text!r}") from None


def wrap_phase(phi: float) -> float:
    """Wrap an angle in radians to the half-open interval (-pi, pi]."""
    phi = float(phi)
    if not math.isfinite(phi):
        raise ValueError(f"cannot wrap non-finite phase {phi!r}")
    wrapped = math.remainder(phi, 2.0 * math.pi)
    # remainder() returns values in [-pi, pi]; fold the excluded endpoint.
    if wrapped <= -math.pi:
        wrapped += 2.0 * math.pi
    return wrapped


def wrap_phase_array(phi: np.ndarray) -> np.ndarray:
    """Vectorized :func:`wrap_phase`."""
    phi = np.asarray(phi, dtype=float)
    if not np.all(np.isfinite(phi)):
        raise ValueError("cannot wrap non-finite phases")
    out = np.remainder(phi + np.pi, 2.0 * np.pi) - np.pi
    return np.where(out <= -np.pi, np.pi, out)


@dataclass(frozen=True, slots=True)
class SamplingSpec:
    sample_rate_hz: float
    n_samples: int

    def __post_init__(self) -> None:
        if not (math.isfinite(self.sample_rate_hz) and self.sample_rate_hz > 0):
            raise ValueError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if int(self.n_samples) != self.n_samples or self.n_samples < 1:
            raise ValueError(f"n_samples must be a positive integer, got {self.n_samples}")
        object.__setattr__(self, "sample_rate_hz", float(self.sample_rate_hz))
        object.__setattr__(self, "n_samples", int(self.n_samples))

    @property
    def period(self) -> float:
        """Sample period in seconds."""
        return 1.0 / self.sample_rate_hz

    @property
    def duration(self) -> float:
        return self.n_samples / self.sample_rate_hz

    @property
    def nyquist_hz(self) -> float:
        return 0.5 * self.sample_rate_hz

    def with_length(self, n_samples: int) -> SamplingSpec:
        return SamplingSpec(self.sample_rate_hz, n_samples)


def _freeze_axes(data, n_expected: int | None) -> np.ndarray:
    arr = np.array(data, dtype=float)
    if arr.ndim != 2 or arr.shape[0] != 3:
        raise ValueError(f"expected three axis sequences, got array of shape {arr.shape}")
    if n_expected is not None and arr.shape[1] != n_expected:
        raise ValueError(
            f"axis length {arr.shape[1]} does not match sampling spec n_samples={n_expected}"
        )
    if not np.all(np.isfinite(arr)):
        axis, idx = np.argwhere(~np.isfinite(arr))[0]
        raise ValueError(f"non-finite sample on axis {AxisId(axis).label} at index {idx}")
    arr.flags.writeable = False
    return arr


def _stack(x, y, z) -> np.ndarray:
    lengths = {len(x), len(y), len(z)}
    if len(lengths) != 1:
        raise ValueError(f"axis lengths differ: x={len(x)}, y={len(y)}, z={len(z)}")
    return np.vstack([np.asarray(x, float), np.asarray(y, float), np.asarray(z, float)])


class _AxesMixin:
    data: np.ndarray

    @property
    def x(self) -> np.ndarray:
        return self.data[0]

    @property
    def y(self) -> np.ndarray:
        return self.data[1]

    @property
    def z(self) -> np.ndarray:
        return self.data[2]

    def axis(self, a: AxisId) -> np.ndarray:
        return self.data[int(a)]

    def __len__(self) -> int:
        return self.data.shape[1]


@dataclass(frozen=True, eq=False)
class TriAxialRecord(_AxesMixin):
    """A synchronized three-axis time series on one shared time base.

    ``data`` has shape ``(3, n_samples)`` with rows ordered X, Y, Z and is
    stored read-only. ``offset`` is the index of ``data[:, 0]`` in the
    stream this record was cut from (0 for raw ingests).
    """

    spec: SamplingSpec
    data: np.ndarray
    label: ClassLabel | None = None
    source_id: str = ""
    unit: str = "arb"
    offset: int = 0

    def __post_init__(self) -> None:
        object.__setattr__(self, "data", _freeze_axes(self.data, self.spec.n_samples))

    @classmethod
    def from_axes(cls, x, y, z, sample_rate_hz: float, **kwargs) -> TriAxialRecord:
        data = _stack(x, y, z)
        return cls(SamplingSpec(sample_rate_hz, data.shape[1]), data, **kwargs)


@dataclass(frozen=True, eq=False)
class Segment(_AxesMixin):
    """A length-L window cut from a record.

    ``time_offset_s`` is the sub-sample advance already applied to the
    window content (non-zero only for phase-consistent onsets).
    """

    spec: SamplingSpec
    data: np.ndarray
    origin_index: int = 0
    label: ClassLabel | None = None
    source_id: str = ""
    time_offset_s: float = 0.0

    def __post_init__(self) -> None:
        if self.spec.n_samples < 2:
            raise ValueError("a segment needs at least 2 samples")
        object.__setattr__(self, "data", _freeze_axes(self.data, self.spec.n_samples))

    @classmethod
    def from_axes(cls, x, y, z, sample_rate_hz: float, **kwargs) -> Segment:
        data = _stack(x, y, z)
        return cls(SamplingSpec(sample_rate_hz, data.shape[1]), data, **kwargs)

    def replace_data(self, data: np.ndarray) -> Segment:
        return Segment(
            self.spec, data, self.origin_index, self.label, self.source_id, self.time_offset_s
        )


@dataclass(frozen=True, slots=True)
class PhaseSet:
    """Per-axis phase and magnitude at one frequency.

    ``degenerate`` lists axes whose magnitude is too small for the phase to
    carry information.
    """

    freq_hz: float
    phase_x: float
    phase_y: float
    phase_z: float
    mag_x: float = 1.0
    mag_y: float = 1.0
    mag_z: float = 1.0
    degenerate: frozenset[AxisId] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        for name in ("phase_x", "phase_y", "phase_z"):
            object.__setattr__(self, name, wrap_phase(getattr(self, name)))
        for name in ("mag_x", "mag_y", "mag_z"):
            if not getattr(self, name) >= 0:
                raise ValueError(f"{name} must be nonnegative")
        object.__setattr__(self, "degenerate", frozenset(self.degenerate))

    def phase(self, axis: AxisId) -> float:
        return (self.phase_x, self.phase_y, self.phase_z)[int(axis)]

    def magnitude(self, axis: AxisId) -> float:
        return (self.mag_x, self.mag_y, self.mag_z)[int(axis)]

    @property
    def phases(self) -> tuple[float, float, float]:
        return (self.phase_x, self.phase_y, self.phase_z)


def relative_phase(p: PhaseSet, j: AxisId, k: AxisId) -> float:
    """Wrapped phase of axis ``j`` relative to axis ``k``."""
    if AxisId(j) == AxisId(k):
        raise ValueError("relative phase needs two distinct axes")
    return wrap_phase(p.phase(j) - p.phase(k))


class ModeKind(Enum):
    NONE = "none"
    INDEPENDENT = "independent"
    REFERENCE = "reference"


@dataclass(frozen=True, slots=True)
class AlignmentMode:
    """Preprocessing condition: no adjustment, per-axis, or single-reference."""

    kind: ModeKind
    reference: AxisId | None = None

    def __post_init__(self) -> None:
        if (self.kind is ModeKind.REFERENCE) != (self.reference is not None):
            raise ValueError("a reference axis is required exactly for reference mode")

    @classmethod
    def none(cls) -> AlignmentMode:
        return cls(ModeKind.NONE)

    @classmethod
    def independent(cls) -> AlignmentMode:
        return cls(ModeKind.INDEPENDENT)

    @classmethod
    def single_reference(cls, axis: AxisId | str = AxisId.X) -> AlignmentMode:
        return cls(ModeKind.REFERENCE, AxisId.parse(axis))

    @classmethod
    def parse(cls, text: str | AlignmentMode) -> AlignmentMode:
        """Parse ``none``, ``independent`` or ``reference:<axis>``."""
        if isinstance(text, AlignmentMode):
            return text
        s = str(text).strip().lower()
        if s == "none":
            return cls.none()
        if s == "independent":
            return cls.independent()
        if s.startswith("reference"):
            _, _, axis = s.partition(":")
            return cls.single_reference(axis or "x")
        raise ValueError(f"unknown alignment mode {text!r}")

    @property
    def key(self) -> str:
        if self.kind is ModeKind.REFERENCE:
            return f"reference:{self.reference.label}"
        return self.kind.value

    @property
    def title(self) -> str:
        """Row name in comparison tables."""
        if self.kind is ModeKind.NONE:
            return "No Adjustment"
        if self.kind is ModeKind.INDEPENDENT:
            return "three Independent"
        return f"{self.reference.name}-axis Reference"

    def __str__(self) -> str:
        return self.key


@dataclass(frozen=True, slots=True)
class AlignmentPlan:
    """Per-axis time advances (seconds) that realize one alignment."""

    mode: AlignmentMode
    dt_x: float
    dt_y: float
    dt_z: float
    freq_hz: float
    flagged: frozenset[AxisId] = field(default_factory=frozenset)

    def __post_init__(self) -> None:
        shifts = (self.dt_x, self.dt_y, self.dt_z)
        if not all(math.isfinite(s) for s in shifts):
            raise ValueError("plan shifts must be finite")
        if not (math.isfinite(self.freq_hz) and self.freq_hz > 0):
            raise ValueError(f"plan frequency must be positive, got {self.freq_hz}")
        if self.mode.kind is ModeKind.NONE and any(s != 0.0 for s in shifts):
            raise ValueError("a no-adjustment plan must have zero shifts")
        if self.mode.kind is ModeKind.REFERENCE and not (self.dt_x == self.dt_y == self.dt_z):
            raise ValueError("a single-reference plan applies one shift to all axes")
        object.__setattr__(self, "flagged", frozenset(self.flagged))

    @property
    def shifts(self) -> tuple[float, float, float]:
        return (self.dt_x, self.dt_y, self.dt_z)
