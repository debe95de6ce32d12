"""Phase-consistent preprocessing of three-axis vibration records."""

__version__ = "0.1.0"

from .types import (
    AXES,
    AlignmentMode,
    AlignmentPlan,
    AxisId,
    ClassLabel,
    ModeKind,
    PhaseSet,
    SamplingSpec,
    Segment,
    TriAxialRecord,
    relative_phase,
    wrap_phase,
)
from .spectral import detect_dominant_frequency, dft_axis, idft_axis, measure_phases, phase_at_frequency
from .align import (
    align_in_record,
    align_segment,
    apply_plan,
    compute_plan,
    determine_onset,
    fractional_shift,
)
from .segmentation import (
    DatasetManifest,
    OnsetMode,
    SplitSpec,
    WindowingSpec,
    segment_record,
    split_files,
    trim_and_extract,
)
from .synth import RotorModel, generate_benchmark, generate_record
from .classify import (
    EvalReport,
    FeatureSchema,
    evaluate_pipeline,
    extract_features,
    train_classifier,
)
from .io import ingest_csv, read_paln1, write_csv, write_paln1

__all__ = [name for name in dir() if not name.startswith("_")]
