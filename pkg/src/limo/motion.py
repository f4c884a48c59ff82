"""Coefficient-sequence container, file formats, segmentation.

A motion sequence is a (T, 70) float64 matrix at a fixed frame rate. The
column layout is fixed:

    [0:64)   expression coefficients   exp0..exp63
    [64:67)  head rotation angles      angle0..angle2
    [67:70)  head translation          trans0..trans2

Two serializations exist. The binary container starts with the magic bytes
``CLM1`` followed by a little-endian header (frame count u32, width u32,
fps f32) and the row-major float64 payload. The CSV form has the exact
header line ``frame,exp0,...,trans2``; the frame-index column is optional
on load. CSV has no native fps slot, so an optional leading comment line
``# fps=<float>`` carries it (default 30 when absent).
"""

from __future__ import annotations

import io
import struct
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

from .errors import (
    EmptySequence,
    MalformedHeader,
    NonFiniteValue,
    TooShort,
    WidthMismatch,
)
from .validation import MOTION_DIM, as_f64, check_finite

MAGIC = b"CLM1"
DEFAULT_FPS = 30.0

_CSV_COLUMNS = (
    ["frame"]
    + [f"exp{i}" for i in range(64)]
    + [f"angle{i}" for i in range(3)]
    + [f"trans{i}" for i in range(3)]
)
CSV_HEADER = ",".join(_CSV_COLUMNS)


class CoefficientGroup(Enum):
    """Named column ranges of the 70-wide layout."""

    EXPRESSION = (0, 64)
    ANGLE = (64, 67)
    TRANSLATION = (67, 70)
    POSE = (64, 70)

    @property
    def slice(self) -> slice:
        lo, hi = self.value
        return slice(lo, hi)

    @property
    def width(self) -> int:
        lo, hi = self.value
        return hi - lo


@dataclass
class MotionSequence:
    """A validated (T, 70) coefficient sequence.

    Frames are float64 and finite; T >= 1. Values are unconstrained in
    range (the coefficient basis is dataset-defined, not normalized here).
    """

    frames: np.ndarray
    fps: float = DEFAULT_FPS

    def __post_init__(self):
        arr = as_f64(self.frames, "frames")
        if arr.ndim != 2 or arr.shape[1] != MOTION_DIM:
            raise WidthMismatch(
                f"frames: expected (T, {MOTION_DIM}), got {arr.shape}"
            )
        if arr.shape[0] < 1:
            raise EmptySequence("frames: need at least one frame")
        if not self.fps > 0:
            raise MalformedHeader(f"fps must be positive, got {self.fps}")
        check_finite(arr, "frames")
        self.frames = arr
        self.fps = float(self.fps)

    def __len__(self) -> int:
        return self.frames.shape[0]

    def group(self, group: CoefficientGroup) -> np.ndarray:
        """View of the columns belonging to one coefficient group."""
        return self.frames[:, group.slice]


@dataclass
class SegmentView:
    """One segment of a parent sequence (frames are a view, not a copy)."""

    frames: np.ndarray
    start: int
    index: int


@dataclass
class SegmentSplit:
    segments: list[SegmentView] = field(default_factory=list)
    dropped_frames: int = 0


def split_segments(seq: MotionSequence, segment_len: int = 60) -> SegmentSplit:
    """Split into consecutive fixed-length segments.

    A trailing remainder shorter than segment_len is dropped and its size
    recorded in the result. segment_len must be at least 2.
    """
    if segment_len < 2:
        raise TooShort(f"segment_len must be >= 2, got {segment_len}")
    t = len(seq)
    n = t // segment_len
    out = SegmentSplit(dropped_frames=t - n * segment_len)
    for k in range(n):
        s = k * segment_len
        out.segments.append(
            SegmentView(frames=seq.frames[s : s + segment_len], start=s, index=k)
        )
    return out


def frame_diff(seq: MotionSequence) -> np.ndarray:
    """First-order frame difference, shape (T-1, 70)."""
    if len(seq) < 2:
        raise TooShort("frame_diff needs at least 2 frames")
    return np.diff(seq.frames, axis=0)


# -- binary container ----------------------------------------------------------

def save_binary(seq: MotionSequence, path) -> None:
    _write_matrix_binary(seq.frames, seq.fps, path)


def load_binary(path) -> MotionSequence:
    frames, fps, dims = _read_matrix_binary(path)
    if dims != MOTION_DIM:
        raise WidthMismatch(f"{path}: container width {dims}, expected {MOTION_DIM}")
    return MotionSequence(frames=frames, fps=fps)


def _write_matrix_binary(arr: np.ndarray, fps: float, path) -> None:
    arr = as_f64(arr, "matrix")
    if arr.ndim != 2:
        raise WidthMismatch(f"matrix must be 2-D, got shape {arr.shape}")
    header = MAGIC + struct.pack("<IIf", arr.shape[0], arr.shape[1], float(fps))
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(arr.astype("<f8", copy=False).tobytes(order="C"))


def _read_matrix_binary(path):
    with open(path, "rb") as fh:
        head = fh.read(16)
        if len(head) < 16 or head[:4] != MAGIC:
            raise MalformedHeader(f"{path}: bad magic or truncated header")
        t, dims, fps = struct.unpack("<IIf", head[4:16])
        payload = fh.read(t * dims * 8)
    if len(payload) != t * dims * 8:
        raise MalformedHeader(f"{path}: payload truncated")
    frames = np.frombuffer(payload, dtype="<f8").reshape(t, dims).copy()
    return frames, float(fps), int(dims)


def save_feature_binary(arr: np.ndarray, fps: float, path) -> None:
    """Same container, arbitrary width; used for acoustic feature tracks."""
    _write_matrix_binary(arr, fps, path)


def load_feature_binary(path):
    """Returns (matrix, fps) without enforcing the 70-wide layout."""
    frames, fps, _ = _read_matrix_binary(path)
    return frames, fps


# -- CSV -----------------------------------------------------------------------

def save_csv(seq: MotionSequence, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"# fps={seq.fps!r}\n")
        fh.write(CSV_HEADER + "\n")
        for i, row in enumerate(seq.frames):
            cells = ",".join(f"{v:.17g}" for v in row)
            fh.write(f"{i},{cells}\n")


def load_csv(path) -> MotionSequence:
    with open(path, "r", encoding="utf-8") as fh:
        return _parse_csv(fh, str(path))


def _parse_csv(fh: io.TextIOBase, origin: str) -> MotionSequence:
    fps = DEFAULT_FPS
    line = fh.readline()
    if line.startswith("#"):
        frag = line[1:].strip()
        if frag.startswith("fps="):
            try:
                fps = float(frag[4:])
            except ValueError:
                raise MalformedHeader(f"{origin}: unreadable fps comment {frag!r}")
        line = fh.readline()
    header = line.rstrip("\n")
    if header == CSV_HEADER:
        has_index = True
    elif header == CSV_HEADER[len("frame,") :]:
        has_index = False
    else:
        raise MalformedHeader(f"{origin}: unexpected CSV header")
    expected = MOTION_DIM + (1 if has_index else 0)
    rows = []
    for lineno, raw in enumerate(fh):
        raw = raw.strip()
        if not raw:
            continue
        cells = raw.split(",")
        if len(cells) != expected:
            raise WidthMismatch(
                f"{origin}: row {lineno} has {len(cells)} cells, expected {expected}"
            )
        vals = cells[1:] if has_index else cells
        try:
            row = [float(v) for v in vals]
        except ValueError as exc:
            raise NonFiniteValue(f"{origin}: row {lineno}: {exc}")
        rows.append(row)
    if not rows:
        raise EmptySequence(f"{origin}: no data rows")
    return MotionSequence(frames=np.array(rows, dtype=np.float64), fps=fps)
