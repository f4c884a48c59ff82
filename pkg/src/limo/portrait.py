"""Per-frame conditioning tokens from text, audio, and speaker motion.

Static tokens (one per text word) describe the listener; this module turns
them into frame-aligned dynamic tokens:

  * an audio encoder maps acoustic features (T, 45) to hidden states (T, C);
  * a responsive weight matrix M (T, L) row-softmaxes scaled dot products
    between independently projected audio states and static tokens, so each
    frame holds a convex weighting over the text tokens;
  * time-dependent tokens E = M @ H mix the static tokens per frame;
  * a speaker motion weight (T, 70) summarizes recent speaker movement as
    exp(|backward frame difference|) summed over the `window` frames ending
    at t-1, elementwise per coefficient (a scalar-norm-per-frame variant is
    possible; the elementwise form is used because the downstream
    concatenation consumes a 70-wide vector). Absolute differences are
    clamped at 10 before exponentiation. Frames before the clip contribute
    exp(0), i.e. repeat-first-frame padding. Row t sees speaker frames up
    to t-1 only, never t.
  * dynamic tokens are an affine projection of [E_t | weight_t] back to C.

The responsive rows are re-checked after every forward pass; convex-hull
containment of E is checked columnwise.
"""

from __future__ import annotations

import warnings

import numpy as np

from .errors import NumericError, ShapeMismatch
from .nn.layers import Affine, Conv1dSame, EncoderLayer, LayerNorm, concat_features
from .nn.tensor import Tensor, gelu, matmul, scale, softmax, swapaxes
from .validation import check_motion_frames

MOTION_WEIGHT_CLAMP = 10.0


class WindowTooLarge(UserWarning):
    """Motion-weight window is at least the clip length."""


def speaker_motion_weight(
    speaker_frames: np.ndarray, window: int = 5, clamp: float = MOTION_WEIGHT_CLAMP
) -> np.ndarray:
    """Per-frame, per-coefficient speaker movement weight, shape (T, 70).

    out[t] = sum_{i=t-window}^{t-1} exp(min(|S[i] - S[i-1]|, clamp)),
    with S[i] = S[0] for i <= 0. Entries lie in [window, window * e^clamp].
    Parameter-free and causal: row t never reads frame t.
    """
    s = check_motion_frames(speaker_frames, "speaker_frames")
    t_len = s.shape[0]
    if window < 1:
        raise ShapeMismatch(f"window must be >= 1, got {window}")
    if window >= t_len:
        warnings.warn(
            f"motion window {window} >= clip length {t_len}", WindowTooLarge
        )
    terms = np.ones_like(s)
    if t_len > 1:
        terms[1:] = np.exp(np.minimum(np.abs(np.diff(s, axis=0)), clamp))
    csum = np.zeros((t_len + 1, s.shape[1]))
    np.cumsum(terms, axis=0, out=csum[1:])
    out = np.empty_like(s)
    for t in range(t_len):
        lo = t - window
        pad = max(0, -lo)
        out[t] = pad + (csum[t] - csum[max(lo, 0)])
    return out


class AudioEncoder:
    """Two kernel-3 same-pad convolutions (GELU after the first), a stack of
    self-attention layers, and a final affine. Maps (T, 45) -> (T, C).

    No positional table is added here: a zero input with the default zero
    biases stays exactly zero through the whole encoder.
    """

    def __init__(self, in_dim, width, layers, heads, ffn_width, rng, name="audio"):
        self.conv1 = Conv1dSame(in_dim, width, rng, f"{name}.conv1")
        self.conv2 = Conv1dSame(width, width, rng, f"{name}.conv2")
        self.layers = [
            EncoderLayer(width, heads, ffn_width, rng, f"{name}.layer{i}")
            for i in range(layers)
        ]
        self.final_ln = LayerNorm(width, f"{name}.final_ln")
        self.out = Affine(width, width, rng, f"{name}.out")

    def __call__(self, acoustic) -> Tensor:
        x = acoustic if isinstance(acoustic, Tensor) else Tensor(np.asarray(acoustic, dtype=np.float64))
        x = self.conv2(gelu(self.conv1(x)))
        for layer in self.layers:
            x = layer(x)
        return self.out(self.final_ln(x))

    def parameters(self):
        ps = self.conv1.parameters() + self.conv2.parameters()
        for layer in self.layers:
            ps += layer.parameters()
        return ps + self.final_ln.parameters() + self.out.parameters()


class ResponsiveInteraction:
    """Audio-to-text responsive weights M (T, L).

    M = rowsoftmax(proj_a(A) @ proj_h(H)^T / sqrt(C)); the two projections
    are independent. Rows are checked to sum to 1 within 1e-9 after every
    forward pass.
    """

    def __init__(self, width, rng, name="responsive"):
        self.width = width
        self.audio_proj = Affine(width, width, rng, f"{name}.audio")
        self.text_proj = Affine(width, width, rng, f"{name}.text")

    def __call__(self, audio_tokens: Tensor, static_tokens: Tensor) -> Tensor:
        if audio_tokens.shape[-1] != self.width or static_tokens.shape[-1] != self.width:
            raise ShapeMismatch(
                f"expected width {self.width}, got audio {audio_tokens.shape} "
                f"text {static_tokens.shape}"
            )
        a = self.audio_proj(audio_tokens)
        h = self.text_proj(static_tokens)
        logits = scale(matmul(a, swapaxes(h, -1, -2)), 1.0 / np.sqrt(self.width))
        m = softmax(logits)
        _check_rows_normalized(m.data)
        return m

    def parameters(self):
        return self.audio_proj.parameters() + self.text_proj.parameters()


def _check_rows_normalized(m: np.ndarray, tol: float = 1e-9) -> None:
    sums = m.sum(axis=-1)
    if np.any(np.abs(sums - 1.0) > tol) or np.any(m < -tol):
        worst = float(np.abs(sums - 1.0).max())
        raise NumericError(f"responsive rows not normalized (worst |sum-1| {worst:.3e})")


def time_dependent_tokens(m: Tensor, static_tokens: Tensor) -> Tensor:
    """E = M @ H; every output row is a convex combination of the rows of H."""
    e = matmul(m, static_tokens)
    lo = static_tokens.data.min(axis=0) - 1e-9
    hi = static_tokens.data.max(axis=0) + 1e-9
    if np.any(e.data < lo) or np.any(e.data > hi):
        raise NumericError("time-dependent token left the convex hull of static tokens")
    return e


class DynamicTokenProjector:
    """Affine map of [E_t | motion_weight_t] (C+70) down to C."""

    def __init__(self, width, motion_dim, rng, name="dynamic"):
        self.proj = Affine(width + motion_dim, width, rng, f"{name}.proj")
        # motion-weight rows start at zero: the exp-sum channel sits near a
        # constant `window` * e^|step| offset that would otherwise drown the
        # text mixture; training grows these rows as needed
        self.proj.w.data[width:, :] = 0.0

    def __call__(self, tokens: Tensor, motion_weight: np.ndarray | Tensor) -> Tensor:
        w = motion_weight if isinstance(motion_weight, Tensor) else Tensor(motion_weight)
        if tokens.shape[0] != w.shape[0]:
            raise ShapeMismatch(
                f"token frames {tokens.shape[0]} != weight frames {w.shape[0]}"
            )
        return self.proj(concat_features(tokens, w))

    def parameters(self):
        return self.proj.parameters()
