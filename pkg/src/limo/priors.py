"""Motion prior from the previous segment.

The current and previous segments' dynamic token sequences give a row-wise
similarity (row-softmax of scaled dot products); multiplying it onto the
previous segment's motion yields a per-frame convex mixture of past frames
that conditions the current segment. The first segment of a stream has no
history: its prior is exactly zero and marked is_zero. Conditioning
consumes only the prior values, so a zero prior and a zeroed-out prior
channel are the same thing by construction.

During training the past motion is ground truth; at inference it is the
previously generated segment.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptySequence, ShapeMismatch
from .nn.tensor import Tensor, matmul, scale, softmax, swapaxes
from .portrait import _check_rows_normalized
from .validation import MOTION_DIM


@dataclass
class MotionPrior:
    frames: np.ndarray  # (L, 70)
    is_zero: bool = False

    def __post_init__(self):
        arr = np.asarray(self.frames, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] != MOTION_DIM:
            raise ShapeMismatch(f"prior must be (L, {MOTION_DIM}), got {arr.shape}")
        if self.is_zero and np.any(arr != 0.0):
            raise ShapeMismatch("is_zero prior must contain only zeros")
        self.frames = arr


def first_segment_prior(length: int) -> MotionPrior:
    if length < 1:
        raise EmptySequence(f"prior length must be >= 1, got {length}")
    return MotionPrior(frames=np.zeros((length, MOTION_DIM)), is_zero=True)


def segment_similarity(cur_tokens: Tensor, prev_tokens: Tensor) -> Tensor:
    """Row-softmax of cur @ prev^T / sqrt(C); rows sum to 1."""
    if cur_tokens.shape[-1] != prev_tokens.shape[-1]:
        raise ShapeMismatch(
            f"token widths differ: {cur_tokens.shape} vs {prev_tokens.shape}"
        )
    width = cur_tokens.shape[-1]
    logits = scale(
        matmul(cur_tokens, swapaxes(prev_tokens, -1, -2)), 1.0 / np.sqrt(width)
    )
    sim = softmax(logits)
    _check_rows_normalized(sim.data)
    return sim


def motion_prior(sim: Tensor, past_frames) -> Tensor:
    """G = sim @ past; each row is a convex combination of past frames."""
    past = past_frames if isinstance(past_frames, Tensor) else Tensor(past_frames)
    if sim.shape[-1] != past.shape[0]:
        raise ShapeMismatch(
            f"similarity columns {sim.shape[-1]} != past frames {past.shape[0]}"
        )
    return matmul(sim, past)
