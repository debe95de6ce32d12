"""Feature extraction, k-nearest-neighbour classification and the evaluation harness.

The harness ranks preprocessing modes by held-out accuracy. A k-NN stands
in for the SVM stage of the original two-stage learner; every report says
so in its header.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from .align import align_in_record
from .segmentation import SPLITS, DatasetManifest, trim_and_extract, window_stack
from .spectral import degenerate_mask, detect_dominant_frequency
from .types import AlignmentMode, AxisId, ClassLabel, SamplingSpec, Segment, TriAxialRecord

log = logging.getLogger(__name__)

CLASSIFIER_NOTE = (
    "classifier: k-nearest-neighbour on standardized features "
    "(substitutes the SVM of the original two-stage learner)"
)

# Bins whose magnitude is below this fraction of rms * L get phase (1, 0).
FEATURE_DEGENERATE_REL = 1e-9

# A training dimension whose spread is below this fraction of its typical
# size is treated as constant and left unscaled; dividing by a round-off
# spread would turn float noise into the dominant distance term.
CONSTANT_FEATURE_REL = 1e-9
STANDARD_DECIMALS = 9


@dataclass(frozen=True, slots=True)
class FeatureSchema:
    """``raw`` concatenates samples; ``spectral`` uses magnitude/phase per bin."""

    kind: str = "spectral"
    n_bins: int = 16

    def __post_init__(self) -> None:
        if self.kind not in ("raw", "spectral"):
            raise ValueError(f"unknown feature schema {self.kind!r}")
        if self.kind == "spectral" and (int(self.n_bins) != self.n_bins or self.n_bins < 1):
            raise ValueError("n_bins must be a positive integer")

    @classmethod
    def raw_concat(cls) -> FeatureSchema:
        return cls("raw", 0)

    @classmethod
    def spectral_mag_phase(cls, n_bins: int = 16) -> FeatureSchema:
        return cls("spectral", n_bins)

    @classmethod
    def parse(cls, text: str) -> FeatureSchema:
        s = str(text).strip().lower()
        if s in ("raw", "rawconcat"):
            return cls.raw_concat()
        head, _, n = s.partition(":")
        if head in ("spectral", "spectralmagphase"):
            return cls.spectral_mag_phase(int(n) if n else 16)
        raise ValueError(f"unknown feature schema {text!r}")

    @property
    def tag(self) -> str:
        return "raw" if self.kind == "raw" else f"spectral:{self.n_bins}"

    def dimension(self, window_len: int) -> int:
        return 3 * window_len if self.kind == "raw" else 9 * self.n_bins


@dataclass(frozen=True)
class FeatureVector:
    values: np.ndarray
    schema: str


def feature_matrix(data: np.ndarray, schema: FeatureSchema) -> np.ndarray:
    """Features for windows shaped ``(n, 3, L)``, one row per window.

    The spectral layout, per axis X, Y, Z in turn, is ``n_bins`` magnitudes,
    then ``n_bins`` cosines, then ``n_bins`` sines of the bin phases, for DFT
    bins ``0 .. n_bins-1``. Phases of negligible bins encode as (1, 0).
    """
    data = np.asarray(data, dtype=float)
    n, _, L = data.shape
    if schema.kind == "raw":
        return data.reshape(n, 3 * L).copy()
    if schema.n_bins > L // 2:
        raise ValueError(f"n_bins={schema.n_bins} exceeds L/2={L // 2}")
    bins = np.fft.rfft(data, axis=-1)[..., : schema.n_bins]
    mags = np.abs(bins)
    flat = degenerate_mask(mags, data, FEATURE_DEGENERATE_REL)
    safe = np.where(flat, 1.0, mags)
    cos = np.where(flat, 1.0, bins.real / safe)
    sin = np.where(flat, 0.0, bins.imag / safe)
    return np.concatenate([mags, cos, sin], axis=-1).reshape(n, 9 * schema.n_bins)


def extract_features(segment: Segment, schema: FeatureSchema) -> FeatureVector:
    values = feature_matrix(segment.data[None], schema)[0]
    return FeatureVector(values, schema.tag)


@dataclass(frozen=True)
class ClassifierState:
    """Fitted k-NN: standardization parameters plus the standardized training set."""

    k: int
    mean: np.ndarray
    scale: np.ndarray
    train: np.ndarray
    labels: np.ndarray
    classes: np.ndarray

    def transform(self, features) -> np.ndarray:
        return _standardize(np.asarray(features, dtype=float), self.mean, self.scale)

    def predict(self, features, k: int | None = None, chunk: int = 512) -> np.ndarray:
        return knn_predict(self.train, self.labels, self.transform(features), k or self.k, chunk)


def _standardize(X: np.ndarray, mean: np.ndarray, scale: np.ndarray) -> np.ndarray:
    # Snap to a grid far below any meaningful feature difference so that
    # vectors equal up to round-off give exactly tied distances.
    return np.round((X - mean) / scale, STANDARD_DECIMALS)


def _stack_features(features) -> np.ndarray:
    rows = [f.values if isinstance(f, FeatureVector) else f for f in features]
    arr = np.asarray(rows, dtype=float)
    return arr if arr.ndim == 2 else arr.reshape(len(rows), -1)


def train_classifier(features, labels, k: int = 1, classes: Iterable | None = None) -> ClassifierState:
    """Fit a k-NN on standardized features; statistics come from this set only."""
    X = _stack_features(features)
    y = np.asarray([l.index if isinstance(l, ClassLabel) else int(l) for l in labels])
    if X.shape[0] == 0 or X.shape[0] != y.size:
        raise ValueError("need one label per training example")
    if int(k) != k or k < 1 or k % 2 == 0:
        raise ValueError(f"k must be a positive odd integer, got {k}")
    if k > X.shape[0]:
        raise ValueError(f"k={k} exceeds the training size {X.shape[0]}")
    if classes is not None:
        wanted = [c.index if isinstance(c, ClassLabel) else int(c) for c in classes]
        empty = [c for c in wanted if not np.any(y == c)]
        if empty:
            raise ValueError(f"no training examples for classes {empty}")
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    size = np.maximum(np.abs(X).max(axis=0), 1.0)
    scale = np.where(scale > CONSTANT_FEATURE_REL * size, scale, 1.0)
    return ClassifierState(int(k), mean, scale, _standardize(X, mean, scale), y, np.unique(y))


def knn_neighbors(train: np.ndarray, query: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Indices of the ``k`` nearest training rows per query, nearest first.

    Equal distances resolve toward the lower training index.
    """
    k = min(int(k), train.shape[0])
    sq_train = np.einsum("ij,ij->i", train, train)
    out = np.empty((query.shape[0], k), dtype=np.int64)
    for lo in range(0, query.shape[0], chunk):
        q = query[lo : lo + chunk]
        # |q|^2 is constant along each row, so it cannot change the ranking.
        score = sq_train[None, :] - 2.0 * (q @ train.T)
        if k < score.shape[1]:
            # argpartition breaks ties at the k-th distance arbitrarily, so
            # take everything strictly closer plus the lowest-index ties.
            kth = np.partition(score, k - 1, axis=1)[:, k - 1 : k]
            closer = score < kth
            need = k - closer.sum(axis=1, keepdims=True)
            tied = score == kth
            keep = closer | (tied & (np.cumsum(tied, axis=1) <= need))
            cand = np.nonzero(keep)[1].reshape(-1, k)
        else:
            cand = np.broadcast_to(np.arange(score.shape[1]), score.shape).copy()
        cs = np.take_along_axis(score, cand, axis=1)
        order = np.lexsort((cand, cs), axis=1)
        out[lo : lo + chunk] = np.take_along_axis(cand, order, axis=1)
    return out


def knn_predict(train: np.ndarray, labels: np.ndarray, query: np.ndarray, k: int, chunk: int = 512) -> np.ndarray:
    """Majority vote of the ``k`` nearest training rows (Euclidean).

    Tied votes resolve toward the class whose member ranks nearest.
    """
    return _vote(labels[knn_neighbors(train, query, k, chunk)])


def _vote(neigh: np.ndarray) -> np.ndarray:
    n, k = neigh.shape
    if k == 1:
        return neigh[:, 0]
    counts = (neigh[:, :, None] == neigh[:, None, :]).sum(axis=2)
    best = counts.max(axis=1, keepdims=True)
    first = np.argmax(counts == best, axis=1)
    return neigh[np.arange(n), first]


def leave_one_out_accuracy(features, labels, k: int = 1) -> float:
    """Accuracy when each example is classified by a model fit on the others."""
    X = _stack_features(features)
    y = np.asarray([l.index if isinstance(l, ClassLabel) else int(l) for l in labels])
    hits = 0
    for i in range(y.size):
        keep = np.arange(y.size) != i
        state = train_classifier(X[keep], y[keep], k)
        hits += int(state.predict(X[i : i + 1])[0] == y[i])
    return hits / y.size


def confusion_matrix(truth: np.ndarray, pred: np.ndarray, n_classes: int = 6) -> np.ndarray:
    m = np.zeros((n_classes, n_classes), dtype=np.int64)
    np.add.at(m, (truth, pred), 1)
    return m


@dataclass(frozen=True)
class ModeResult:
    mode: str
    title: str
    accuracies: tuple[float, ...]
    selected_k: tuple[int, ...]
    confusion: np.ndarray

    @property
    def mean(self) -> float:
        return float(np.mean(self.accuracies))

    @property
    def std(self) -> float:
        # Population std, so a single repetition reports 0.
        return float(np.std(self.accuracies))


@dataclass(frozen=True)
class EvalReport:
    rows: tuple[ModeResult, ...]
    config: dict = field(default_factory=dict)
    note: str = CLASSIFIER_NOTE

    def row(self, mode: str | AlignmentMode) -> ModeResult:
        key = AlignmentMode.parse(mode).key
        for r in self.rows:
            if r.mode == key:
                return r
        raise KeyError(key)

    def to_dict(self) -> dict:
        return {
            "note": self.note,
            "config": self.config,
            "rows": [
                {
                    "mode": r.mode,
                    "title": r.title,
                    "accuracy_mean": r.mean,
                    "accuracy_std": r.std,
                    "accuracies": list(r.accuracies),
                    "selected_k": list(r.selected_k),
                    "confusion": r.confusion.tolist(),
                }
                for r in self.rows
            ],
        }

    @classmethod
    def from_dict(cls, d: dict) -> EvalReport:
        rows = tuple(
            ModeResult(
                r["mode"],
                r["title"],
                tuple(r["accuracies"]),
                tuple(r["selected_k"]),
                np.asarray(r["confusion"], dtype=np.int64),
            )
            for r in d["rows"]
        )
        return cls(rows, d.get("config", {}), d.get("note", CLASSIFIER_NOTE))


@dataclass(frozen=True)
class FrequencySource:
    """Dominant frequency: fixed in Hz, or detected per file inside ``band``."""

    fixed_hz: float | None = 20.0
    band: tuple[float, float] = (5.0, 100.0)
    axis: AxisId = AxisId.X

    def __post_init__(self) -> None:
        if self.fixed_hz is not None and not (math.isfinite(self.fixed_hz) and self.fixed_hz > 0):
            raise ValueError("fixed dominant frequency must be positive")

    def resolve(self, record: TriAxialRecord, window_len: int | None = None) -> float:
        """Frequency for one file; detection probes the first ``window_len``
        samples, or the whole record when ``window_len`` is None."""
        if self.fixed_hz is not None:
            return float(self.fixed_hz)
        n = record.spec.n_samples if window_len is None else min(int(window_len), record.spec.n_samples)
        probe = Segment(SamplingSpec(record.spec.sample_rate_hz, n), record.data[:, :n])
        return detect_dominant_frequency(probe, self.band, self.axis)

    @property
    def key(self) -> str:
        if self.fixed_hz is not None:
            return f"fixed:{self.fixed_hz!r}"
        return f"detect:{self.band[0]!r}:{self.band[1]!r}:{self.axis.label}"


def prepare_record(record: TriAxialRecord, manifest: DatasetManifest) -> TriAxialRecord:
    keep = manifest.keep if manifest.keep is not None else record.spec.n_samples - manifest.trim
    return trim_and_extract(record, manifest.trim, keep)


def _select_k(state: ClassifierState, Xv: np.ndarray, yv: np.ndarray, k_grid: Sequence[int]) -> int:
    n_train = state.train.shape[0]
    usable = [k for k in k_grid if k <= n_train]
    if not usable:
        raise ValueError("no k in the grid fits the training set")
    if yv.size == 0:
        return usable[0]
    neigh = state.labels[knn_neighbors(state.train, state.transform(Xv), max(usable))]
    scores = [float(np.mean(_vote(neigh[:, :k]) == yv)) for k in usable]
    return usable[int(np.argmax(scores))]


def evaluate_pipeline(
    manifest: DatasetManifest,
    modes: Sequence[AlignmentMode | str],
    schema: FeatureSchema = FeatureSchema(),
    k_grid: Sequence[int] = (1, 3, 5, 7, 9),
    repetitions: int = 5,
    seed: int = 0,
    freq: FrequencySource = FrequencySource(),
    records: Mapping[str, TriAxialRecord] | None = None,
    loader: Callable[[str], TriAxialRecord] | None = None,
    target_phi: float = 0.0,
) -> EvalReport:
    """Accuracy of each preprocessing mode, ``repetitions`` times.

    Every repetition re-cuts the windows of all files from a fresh random
    onset offset (drawn in ``[0, skip)``), so window phases differ between
    repetitions; all modes of one repetition share the same windows, and
    aligned modes move each window inside its record. The
    classifier is fit on the train split, ``k`` is picked on the val split
    and accuracy is measured per window on the test split.
    """
    if repetitions < 1:
        raise ValueError("repetitions must be >= 1")
    if not k_grid or any(int(k) != k or k < 1 or k % 2 == 0 for k in k_grid):
        raise ValueError(f"k grid must hold positive odd integers, got {list(k_grid)}")
    modes = [AlignmentMode.parse(m) for m in modes]
    if not modes:
        raise ValueError("no alignment modes requested")
    counts = manifest.counts()
    if counts["train"] == 0 or counts["test"] == 0:
        raise ValueError(f"manifest needs train and test files, got {counts}")

    if loader is None:
        from .io import ingest_csv

        loader = lambda p: ingest_csv(p)  # noqa: E731
    prepared: dict[str, TriAxialRecord] = {}
    for e in manifest.entries:
        rec = records[e.path] if records is not None else loader(manifest.resolve(e))
        prepared[e.path] = prepare_record(rec, manifest)

    w = manifest.windowing
    # The whole kept record resolves the frequency far better than one window.
    f_by_file = {p: freq.resolve(r) for p, r in prepared.items()}

    acc: dict[int, list[float]] = {i: [] for i in range(len(modes))}
    ks: dict[int, list[int]] = {i: [] for i in range(len(modes))}
    conf = {i: np.zeros((6, 6), dtype=np.int64) for i in range(len(modes))}

    for rep in range(repetitions):
        rng = np.random.default_rng([int(seed), rep])
        offsets = rng.integers(0, w.skip_len, size=len(manifest.entries))
        windows: dict[str, tuple[list, list, list]] = {
            s: ([], [], []) for s in SPLITS
        }
        for e, off in zip(manifest.entries, offsets):
            rec = prepared[e.path]
            stack = window_stack(rec, w, f_by_file[e.path], start=int(off))
            bucket = windows[e.split]
            positions = stack.origins + stack.residual_s * stack.sample_rate_hz
            bucket[0].append((rec.data, positions))
            bucket[1].append(np.full(len(stack), e.label.index))
            bucket[2].append((f_by_file[e.path], rec.spec.sample_rate_hz))

        for mi, mode in enumerate(modes):
            feats, labs = {}, {}
            for split, (datas, labels, freqs) in windows.items():
                if not datas:
                    feats[split] = np.empty((0, schema.dimension(w.window_len)))
                    labs[split] = np.empty(0, dtype=np.int64)
                    continue
                rows = []
                for (data, positions), (f, fs) in zip(datas, freqs):
                    aligned, _, _ = align_in_record(data, positions, w.window_len, mode, f, fs, target_phi)
                    rows.append(feature_matrix(aligned, schema))
                feats[split] = np.concatenate(rows)
                labs[split] = np.concatenate(labels)
            state = train_classifier(feats["train"], labs["train"], k=min(k_grid))
            k = _select_k(state, feats["val"], labs["val"], k_grid)
            pred = state.predict(feats["test"], k)
            acc[mi].append(float(np.mean(pred == labs["test"])))
            ks[mi].append(k)
            conf[mi] += confusion_matrix(labs["test"], pred)
            log.info("rep %d mode %s: k=%d accuracy=%.4f", rep, mode.key, k, acc[mi][-1])

    rows = tuple(
        ModeResult(m.key, m.title, tuple(acc[i]), tuple(ks[i]), conf[i]) for i, m in enumerate(modes)
    )
    config = {
        "modes": [m.key for m in modes],
        "schema": schema.tag,
        "k_grid": list(k_grid),
        "repetitions": repetitions,
        "seed": seed,
        "frequency": freq.key,
        "target_phi": target_phi,
        "windowing": manifest.to_dict()["windowing"],
        "trim": manifest.trim,
        "keep": manifest.keep,
        "split_counts": counts,
    }
    return EvalReport(rows, config)
