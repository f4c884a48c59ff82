import io

import numpy as np
import pytest

from limo.errors import (
    EmptySequence,
    MalformedHeader,
    NonFiniteValue,
    TooShort,
    WidthMismatch,
)
from limo.motion import (
    CSV_HEADER,
    CoefficientGroup,
    MotionSequence,
    _parse_csv,
    frame_diff,
    load_binary,
    load_csv,
    load_feature_binary,
    save_binary,
    save_csv,
    save_feature_binary,
    split_segments,
)


def seq_from_rng(seed, t=60, fps=30.0):
    r = np.random.default_rng(seed)
    return MotionSequence(frames=r.normal(size=(t, 70)), fps=fps)


class TestMotionSequence:
    def test_shape_and_dtype(self):
        s = MotionSequence(frames=np.zeros((5, 70), dtype=np.float32))
        assert s.frames.dtype == np.float64
        assert len(s) == 5

    def test_wrong_width_rejected(self):
        with pytest.raises(WidthMismatch):
            MotionSequence(frames=np.zeros((5, 69)))

    def test_empty_rejected(self):
        with pytest.raises(EmptySequence):
            MotionSequence(frames=np.zeros((0, 70)))

    def test_nan_rejected(self):
        bad = np.zeros((3, 70))
        bad[1, 7] = np.nan
        with pytest.raises(NonFiniteValue):
            MotionSequence(frames=bad)

    def test_group_views(self):
        s = seq_from_rng(1, t=4)
        assert s.group(CoefficientGroup.EXPRESSION).shape == (4, 64)
        assert s.group(CoefficientGroup.ANGLE).shape == (4, 3)
        assert s.group(CoefficientGroup.TRANSLATION).shape == (4, 3)
        assert s.group(CoefficientGroup.POSE).shape == (4, 6)
        np.testing.assert_array_equal(
            s.group(CoefficientGroup.POSE), s.frames[:, 64:70]
        )


class TestCsv:
    def test_zero_csv_loads(self):
        body = CSV_HEADER + "\n"
        for i in range(60):
            body += f"{i}," + ",".join("0" for _ in range(70)) + "\n"
        seq = _parse_csv(io.StringIO(body), "<mem>")
        assert len(seq) == 60
        assert seq.fps == 30.0
        assert np.all(seq.frames == 0.0)

    def test_width_mismatch(self):
        body = CSV_HEADER + "\n0," + ",".join("0" for _ in range(69)) + "\n"
        with pytest.raises(WidthMismatch):
            _parse_csv(io.StringIO(body), "<mem>")

    def test_missing_frame_column_accepted(self):
        header = CSV_HEADER[len("frame,"):]
        body = header + "\n" + ",".join("1.5" for _ in range(70)) + "\n"
        seq = _parse_csv(io.StringIO(body), "<mem>")
        assert len(seq) == 1
        assert np.all(seq.frames == 1.5)

    def test_bad_header(self):
        with pytest.raises(MalformedHeader):
            _parse_csv(io.StringIO("a,b,c\n1,2,3\n"), "<mem>")

    def test_empty_body(self):
        with pytest.raises(EmptySequence):
            _parse_csv(io.StringIO(CSV_HEADER + "\n"), "<mem>")

    def test_round_trip(self, tmp_path):
        s = seq_from_rng(11, t=23, fps=25.0)
        p = tmp_path / "m.csv"
        save_csv(s, p)
        back = load_csv(p)
        assert back.fps == 25.0
        # %.17g formatting round-trips float64 exactly
        np.testing.assert_allclose(back.frames, s.frames, rtol=1e-12, atol=0)
        np.testing.assert_array_equal(back.frames, s.frames)


class TestBinary:
    def test_round_trip_bit_exact(self, tmp_path):
        s = seq_from_rng(7, t=41)
        p = tmp_path / "m.bin"
        save_binary(s, p)
        back = load_binary(p)
        assert back.frames.tobytes() == s.frames.tobytes()
        assert back.fps == 30.0

    def test_bad_magic(self, tmp_path):
        p = tmp_path / "x.bin"
        p.write_bytes(b"NOPE" + b"\x00" * 20)
        with pytest.raises(MalformedHeader):
            load_binary(p)

    def test_truncated_payload(self, tmp_path):
        s = seq_from_rng(3, t=10)
        p = tmp_path / "m.bin"
        save_binary(s, p)
        blob = p.read_bytes()
        p.write_bytes(blob[:-8])
        with pytest.raises(MalformedHeader):
            load_binary(p)

    def test_feature_track_width_45(self, tmp_path):
        r = np.random.default_rng(5)
        a = r.normal(size=(31, 45))
        p = tmp_path / "a.bin"
        save_feature_binary(a, 30.0, p)
        back, fps = load_feature_binary(p)
        assert back.tobytes() == a.tobytes()
        assert fps == 30.0
        with pytest.raises(WidthMismatch):
            load_binary(p)


class TestSplit:
    @pytest.mark.parametrize(
        "t,n,dropped", [(180, 3, 0), (150, 2, 30), (59, 0, 59), (60, 1, 0)]
    )
    def test_counts(self, t, n, dropped):
        s = seq_from_rng(2, t=t)
        out = split_segments(s, 60)
        assert len(out.segments) == n
        assert out.dropped_frames == dropped
        for k, seg in enumerate(out.segments):
            assert seg.index == k
            assert seg.start == 60 * k
            assert seg.frames.shape == (60, 70)

    def test_concat_recovers_prefix(self):
        s = seq_from_rng(9, t=151)
        out = split_segments(s, 60)
        joined = np.concatenate([seg.frames for seg in out.segments], axis=0)
        np.testing.assert_array_equal(joined, s.frames[: len(joined)])
        assert len(joined) + out.dropped_frames == len(s)

    def test_min_segment_len(self):
        s = seq_from_rng(2, t=10)
        with pytest.raises(TooShort):
            split_segments(s, 1)


class TestFrameDiff:
    def test_constant_is_zero(self):
        s = MotionSequence(frames=np.full((12, 70), 3.25))
        np.testing.assert_array_equal(frame_diff(s), np.zeros((11, 70)))

    def test_linear_ramp(self):
        v = np.linspace(-1, 1, 70)
        frames = np.arange(9)[:, None] * v[None, :]
        s = MotionSequence(frames=frames)
        d = frame_diff(s)
        np.testing.assert_allclose(d, np.tile(v, (8, 1)), atol=1e-15)

    def test_reconstruction(self):
        s = seq_from_rng(3, t=30)
        d = frame_diff(s)
        np.testing.assert_allclose(
            s.frames[:-1] + d, s.frames[1:], rtol=0, atol=1e-15
        )

    def test_shift_invariance(self):
        s = seq_from_rng(4, t=20)
        shifted = MotionSequence(frames=s.frames + 5.0)
        np.testing.assert_allclose(
            frame_diff(shifted), frame_diff(s), rtol=0, atol=1e-12
        )

    def test_too_short(self):
        s = MotionSequence(frames=np.zeros((1, 70)))
        with pytest.raises(TooShort):
            frame_diff(s)
