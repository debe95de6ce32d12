import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from vibphase.types import (
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
    Washer,
    relative_phase,
    wrap_phase,
    wrap_phase_array,
)

finite = st.floats(min_value=-1e6, max_value=1e6, allow_nan=False)


class TestWrapPhase:
    def test_examples(self):
        assert wrap_phase(0.0) == 0.0
        assert wrap_phase(3 * math.pi) == pytest.approx(math.pi, abs=1e-12)
        assert wrap_phase(-math.pi) == math.pi

    def test_rejects_non_finite(self):
        for bad in (math.nan, math.inf, -math.inf):
            with pytest.raises(ValueError):
                wrap_phase(bad)
        with pytest.raises(ValueError):
            wrap_phase_array(np.array([0.0, math.nan]))

    @given(finite)
    def test_range_and_congruence(self, phi):
        w = wrap_phase(phi)
        assert -math.pi < w <= math.pi
        # congruent modulo 2 pi: the difference is a whole number of turns
        turns = (phi - w) / (2 * math.pi)
        assert abs(turns - round(turns)) < 1e-9 * max(1.0, abs(phi))

    @given(finite)
    def test_idempotent(self, phi):
        w = wrap_phase(phi)
        assert wrap_phase(w) == w

    @given(st.lists(finite, min_size=1, max_size=20))
    def test_array_matches_scalar(self, values):
        arr = wrap_phase_array(np.array(values))
        for a, v in zip(arr, values):
            assert -math.pi < a <= math.pi
            assert math.isclose(math.cos(a), math.cos(v), abs_tol=1e-9)
            assert math.isclose(math.sin(a), math.sin(v), abs_tol=1e-9)

    def test_array_boundary(self):
        out = wrap_phase_array(np.array([-math.pi, math.pi, 3 * math.pi]))
        assert np.all(out == pytest.approx(math.pi))


class TestRelativePhase:
    def test_examples(self):
        assert relative_phase(PhaseSet(20, 0.5, 0.5, 1.0), AxisId.X, AxisId.Y) == 0.0
        assert relative_phase(PhaseSet(20, math.pi / 2, 0, 0), AxisId.X, AxisId.Y) == pytest.approx(math.pi / 2)
        # wrap(-6): add 2 pi once to land in range
        assert relative_phase(PhaseSet(20, -3, 3, 0), AxisId.X, AxisId.Y) == pytest.approx(2 * math.pi - 6, abs=1e-12)

    def test_same_axis_rejected(self):
        with pytest.raises(ValueError):
            relative_phase(PhaseSet(20, 0, 0, 0), AxisId.Y, AxisId.Y)

    @given(finite, finite, finite)
    def test_antisymmetric(self, a, b, c):
        p = PhaseSet(20.0, a, b, c)
        for j in AXES:
            for k in AXES:
                if j == k:
                    continue
                fwd, back = relative_phase(p, j, k), relative_phase(p, k, j)
                assert fwd == pytest.approx(wrap_phase(-back), abs=1e-9) or abs(fwd) == pytest.approx(math.pi)


def test_axis_ordering_and_parse():
    assert list(AxisId) == [AxisId.X, AxisId.Y, AxisId.Z]
    assert AxisId.X < AxisId.Y < AxisId.Z
    assert AxisId.parse("z") is AxisId.Z
    assert AxisId.parse("Y") is AxisId.Y
    with pytest.raises(ValueError):
        AxisId.parse("w")


def test_class_labels_match_washer_table():
    expected = {
        0: (Washer.NONE, Washer.NONE),
        1: (Washer.THICK, Washer.NONE),
        2: (Washer.NONE, Washer.THICK),
        3: (Washer.THIN, Washer.NONE),
        4: (Washer.NONE, Washer.THIN),
        5: (Washer.THIN, Washer.THIN),
    }
    assert len(ClassLabel) == 6
    for label in ClassLabel:
        assert (label.left_washer, label.right_washer) == expected[label.index]
    assert ClassLabel.parse("Class3") is ClassLabel.CLASS3
    assert ClassLabel.parse(4) is ClassLabel.CLASS4
    with pytest.raises(ValueError):
        ClassLabel.parse("Class9")


def test_sampling_spec():
    s = SamplingSpec(3000.0, 512)
    assert s.period == pytest.approx(1 / 3000)
    assert s.duration == pytest.approx(512 / 3000)
    for bad in ((0.0, 10), (-1.0, 10), (100.0, 0), (math.nan, 4)):
        with pytest.raises(ValueError):
            SamplingSpec(*bad)


class TestRecords:
    def test_rejects_mismatched_axes(self):
        with pytest.raises(ValueError):
            TriAxialRecord.from_axes([1, 2, 3], [1, 2], [1, 2, 3], sample_rate_hz=100)
        with pytest.raises(ValueError):
            TriAxialRecord(SamplingSpec(100, 4), np.zeros((3, 3)))

    def test_rejects_non_finite(self):
        with pytest.raises(ValueError):
            TriAxialRecord.from_axes([1, np.nan, 3], [1, 2, 3], [1, 2, 3], sample_rate_hz=100)
        with pytest.raises(ValueError):
            Segment.from_axes([1, 2], [1, np.inf], [1, 2], sample_rate_hz=100)

    def test_segment_needs_two_samples(self):
        with pytest.raises(ValueError):
            Segment.from_axes([1], [1], [1], sample_rate_hz=100)

    def test_immutable(self):
        rec = TriAxialRecord.from_axes([1.0, 2.0], [3.0, 4.0], [5.0, 6.0], sample_rate_hz=10)
        with pytest.raises(ValueError):
            rec.data[0, 0] = 9.0
        with pytest.raises(AttributeError):
            rec.label = ClassLabel.CLASS1
        np.testing.assert_array_equal(rec.y, [3.0, 4.0])


class TestAlignmentTypes:
    def test_mode_parse_and_titles(self):
        assert AlignmentMode.parse("none").kind is ModeKind.NONE
        assert AlignmentMode.parse("independent").kind is ModeKind.INDEPENDENT
        ref = AlignmentMode.parse("reference:y")
        assert ref.kind is ModeKind.REFERENCE and ref.reference is AxisId.Y
        assert ref.key == "reference:y"
        assert AlignmentMode.parse("none").title == "No Adjustment"
        assert AlignmentMode.parse("independent").title == "three Independent"
        assert AlignmentMode.parse("reference:x").title == "X-axis Reference"
        with pytest.raises(ValueError):
            AlignmentMode.parse("reference:q")

    def test_plan_invariants(self):
        ref = AlignmentMode.single_reference(AxisId.X)
        AlignmentPlan(ref, 0.1, 0.1, 0.1, 20.0)
        with pytest.raises(ValueError):
            AlignmentPlan(ref, 0.1, 0.2, 0.1, 20.0)
        with pytest.raises(ValueError):
            AlignmentPlan(AlignmentMode.none(), 0.0, 0.01, 0.0, 20.0)
        with pytest.raises(ValueError):
            AlignmentPlan(AlignmentMode.independent(), 0.0, 0.0, 0.0, 0.0)
