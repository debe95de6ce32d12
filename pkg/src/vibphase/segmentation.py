"""Trimming, windowed segmentation and file-level dataset splitting."""

from __future__ import annotations

import json
import math
import os
from collections import defaultdict
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .align import determine_onset, shift_samples
from .types import AxisId, ClassLabel, SamplingSpec, Segment, TriAxialRecord


class OnsetKind(Enum):
    ARBITRARY = "arbitrary"
    PHASE_CONSISTENT = "phase-consistent"


@dataclass(frozen=True, slots=True)
class OnsetMode:
    kind: OnsetKind = OnsetKind.ARBITRARY
    reference: AxisId = AxisId.X
    target_phi: float = 0.0

    @classmethod
    def arbitrary(cls) -> OnsetMode:
        return cls()

    @classmethod
    def phase_consistent(cls, reference: AxisId | str = AxisId.X, target_phi: float = 0.0) -> OnsetMode:
        return cls(OnsetKind.PHASE_CONSISTENT, AxisId.parse(reference), float(target_phi))

    @classmethod
    def parse(cls, text: str) -> OnsetMode:
        """``arbitrary`` or ``phase[:axis[:target_phi]]``."""
        s = str(text).strip().lower()
        if s == "arbitrary":
            return cls.arbitrary()
        head, *rest = s.split(":")
        if head in ("phase", "phase-consistent"):
            axis = rest[0] if rest else "x"
            target = float(rest[1]) if len(rest) > 1 else 0.0
            return cls.phase_consistent(axis, target)
        raise ValueError(f"unknown onset mode {text!r}")

    @property
    def key(self) -> str:
        if self.kind is OnsetKind.ARBITRARY:
            return "arbitrary"
        return f"phase:{self.reference.label}:{self.target_phi!r}"


@dataclass(frozen=True, slots=True)
class WindowingSpec:
    window_len: int = 512
    skip_len: int = 32
    onset_mode: OnsetMode = field(default_factory=OnsetMode)

    def __post_init__(self) -> None:
        if int(self.window_len) != self.window_len or self.window_len < 2:
            raise ValueError(f"window_len must be an integer >= 2, got {self.window_len}")
        if int(self.skip_len) != self.skip_len or self.skip_len < 1:
            raise ValueError(f"skip_len must be an integer >= 1, got {self.skip_len}")

    def window_count(self, n_samples: int, start: int = 0) -> int:
        avail = n_samples - start - self.window_len
        return avail // self.skip_len + 1 if avail >= 0 else 0


def trim_and_extract(record: TriAxialRecord, trim: int, keep: int) -> TriAxialRecord:
    """Samples ``[trim, trim + keep)`` of every axis."""
    if trim < 0 or keep < 1 or trim + keep > record.spec.n_samples:
        raise ValueError(
            f"cannot keep {keep} samples after trimming {trim} from a record of {record.spec.n_samples}"
        )
    return TriAxialRecord(
        record.spec.with_length(keep),
        record.data[:, trim : trim + keep],
        label=record.label,
        source_id=record.source_id,
        unit=record.unit,
        offset=record.offset + trim,
    )


@dataclass(frozen=True)
class WindowStack:
    """Windows of one record as a dense array, the bulk form of a Segment list."""

    data: np.ndarray  # (n, 3, L)
    origins: np.ndarray  # (n,)
    sample_rate_hz: float
    residual_s: float = 0.0
    label: ClassLabel | None = None
    source_id: str = ""

    def __len__(self) -> int:
        return self.data.shape[0]

    def segments(self) -> list[Segment]:
        spec = SamplingSpec(self.sample_rate_hz, self.data.shape[-1])
        return [
            Segment(spec, w, int(o), self.label, self.source_id, self.residual_s)
            for w, o in zip(self.data, self.origins)
        ]


def window_stack(
    record: TriAxialRecord,
    w: WindowingSpec,
    f_d: float | None = None,
    start: int = 0,
) -> WindowStack:
    """Cut ``record`` into windows per ``w``; see :func:`segment_record`."""
    n, L, skip = record.spec.n_samples, w.window_len, w.skip_len
    fs = record.spec.sample_rate_hz
    if n < L:
        raise ValueError(f"record of {n} samples is shorter than one window ({L})")
    if start < 0 or start + L > n:
        raise ValueError(f"start index {start} leaves no room for a window")

    residual = 0.0
    if w.onset_mode.kind is OnsetKind.PHASE_CONSISTENT:
        if f_d is None:
            raise ValueError("phase-consistent segmentation needs a dominant frequency")
        onset = determine_onset(
            record, f_d, w.onset_mode.reference, w.onset_mode.target_phi, start, L
        )
        start, residual = onset.index, onset.residual_s

    count = w.window_count(n, start)
    origins = start + skip * np.arange(count)
    if residual == 0.0:
        idx = origins[:, None] + np.arange(L)
        data = np.ascontiguousarray(np.moveaxis(record.data[:, idx], 0, 1))
    else:
        data = _shifted_windows(record.data, origins, L, residual, fs)
    return WindowStack(data, origins, fs, residual, record.label, record.source_id)


def _shifted_windows(src: np.ndarray, origins: np.ndarray, L: int, residual: float, fs: float) -> np.ndarray:
    idx = origins[:, None] + np.arange(L)
    windows = np.moveaxis(src[:, idx], 0, 1)
    return shift_samples(windows, residual * fs)


def segment_record(
    record: TriAxialRecord,
    w: WindowingSpec,
    f_d: float | None = None,
    start: int = 0,
) -> list[Segment]:
    """Windows of length ``w.window_len`` stepping by ``w.skip_len``.

    Arbitrary onsets begin at ``start``. Phase-consistent onsets begin at
    the first point at or after ``start`` where the reference phase at
    ``f_d`` equals the target; every window then carries the same
    sub-sample advance, so all onsets share one phase reference.
    """
    return window_stack(record, w, f_d, start).segments()


@dataclass(frozen=True, slots=True)
class SplitSpec:
    ratio: tuple[int, int, int] = (11, 1, 4)
    seed: int = 0

    def __post_init__(self) -> None:
        if len(self.ratio) != 3 or any(int(r) != r or r <= 0 for r in self.ratio):
            raise ValueError(f"split ratio needs three positive integers, got {self.ratio}")
        object.__setattr__(self, "ratio", tuple(int(r) for r in self.ratio))

    @classmethod
    def parse(cls, text: str, seed: int = 0) -> SplitSpec:
        parts = [p for p in str(text).replace("/", ":").split(":")]
        try:
            return cls(tuple(int(p) for p in parts), seed)
        except ValueError as exc:
            raise ValueError(f"bad split ratio {text!r}: {exc}") from None


SPLITS = ("train", "val", "test")


@dataclass(frozen=True, slots=True)
class ManifestEntry:
    path: str
    label: ClassLabel
    split: str


def apportion(n: int, ratio: Sequence[int]) -> list[int]:
    """Largest-remainder allocation of ``n`` items; ties favour earlier parts."""
    total = sum(ratio)
    quotas = [n * r / total for r in ratio]
    counts = [math.floor(q) for q in quotas]
    order = sorted(range(len(ratio)), key=lambda i: (-(quotas[i] - counts[i]), i))
    for i in order[: n - sum(counts)]:
        counts[i] += 1
    return counts


@dataclass(frozen=True)
class DatasetManifest:
    """Files with labels and a per-file split, plus the preprocessing protocol."""

    entries: tuple[ManifestEntry, ...]
    windowing: WindowingSpec = field(default_factory=WindowingSpec)
    trim: int = 30000
    keep: int | None = 10000
    provenance: dict = field(default_factory=dict)
    root: str = ""

    def split(self, name: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.split == name]

    def counts(self) -> dict[str, int]:
        return {s: len(self.split(s)) for s in SPLITS}

    def resolve(self, entry: ManifestEntry) -> Path:
        p = Path(entry.path)
        return p if p.is_absolute() or not self.root else Path(self.root) / p

    def with_windowing(self, windowing: WindowingSpec) -> DatasetManifest:
        return DatasetManifest(self.entries, windowing, self.trim, self.keep, self.provenance, self.root)

    def to_dict(self) -> dict:
        w = self.windowing
        return {
            "files": [e.path for e in self.entries],
            "labels": [e.label.index for e in self.entries],
            "splits": [e.split for e in self.entries],
            "windowing": {
                "window_len": w.window_len,
                "skip_len": w.skip_len,
                "onset": w.onset_mode.key,
            },
            "trim": self.trim,
            "keep": self.keep,
            "seed": self.provenance.get("seed"),
            "provenance": self.provenance,
        }

    @classmethod
    def from_dict(cls, d: dict, root: str | os.PathLike = "") -> DatasetManifest:
        files, labels, splits = d["files"], d["labels"], d["splits"]
        if not (len(files) == len(labels) == len(splits)):
            raise ValueError("manifest files, labels and splits differ in length")
        bad = set(splits) - set(SPLITS)
        if bad:
            raise ValueError(f"unknown split names {sorted(bad)}")
        wd = d.get("windowing", {})
        windowing = WindowingSpec(
            int(wd.get("window_len", 512)),
            int(wd.get("skip_len", 32)),
            OnsetMode.parse(wd.get("onset", "arbitrary")),
        )
        entries = tuple(
            ManifestEntry(str(f), ClassLabel.parse(l), s) for f, l, s in zip(files, labels, splits)
        )
        keep = d.get("keep", 10000)
        return cls(
            entries,
            windowing,
            int(d.get("trim", 30000)),
            None if keep is None else int(keep),
            dict(d.get("provenance", {})),
            str(root),
        )

    def save(self, path: str | os.PathLike) -> None:
        Path(path).write_text(json.dumps(self.to_dict(), indent=2) + "\n")

    @classmethod
    def load(cls, path: str | os.PathLike) -> DatasetManifest:
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), root=path.parent)


def split_files(
    entries: Iterable[tuple[str, ClassLabel | None]],
    s: SplitSpec,
    windowing: WindowingSpec | None = None,
    classes: Iterable[ClassLabel] | None = tuple(ClassLabel),
    **manifest_kwargs,
) -> DatasetManifest:
    """Stratified per-class, per-file split into train/val/test.

    Files of each class are shuffled with ``s.seed`` and apportioned by
    largest remainder, so a class of 16 files at 11:1:4 gives exactly
    11/1/4 files. Windows never cross splits because files never do.
    Every class in ``classes`` must have files; pass ``None`` to accept
    whatever classes appear.
    """
    by_class: dict[ClassLabel, list[str]] = defaultdict(list)
    for path, label in entries:
        if label is None:
            raise ValueError(f"file {path} has no class label")
        by_class[ClassLabel.parse(label)].append(str(path))
    if not by_class:
        raise ValueError("no files to split")
    if classes is not None:
        empty = [c.tag for c in classes if c not in by_class]
        if empty:
            raise ValueError(f"no files for {', '.join(empty)}")

    out: list[ManifestEntry] = []
    for label in sorted(by_class, key=lambda c: c.index):
        paths = sorted(by_class[label])
        rng = np.random.default_rng([s.seed, label.index])
        order = rng.permutation(len(paths))
        counts = apportion(len(paths), s.ratio)
        names = [name for name, c in zip(SPLITS, counts) for _ in range(c)]
        out.extend(ManifestEntry(paths[i], label, name) for i, name in zip(order, names))

    provenance = {"seed": s.seed, "ratio": list(s.ratio)}
    provenance.update(manifest_kwargs.pop("provenance", {}))
    return DatasetManifest(
        tuple(out), windowing or WindowingSpec(), provenance=provenance, **manifest_kwargs
    )
