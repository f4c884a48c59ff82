"""Quantitative suite over coefficient sequences.

fd              mean absolute frame difference, x100
variation_diversity  per-dim temporal variance (population), group mean
tlcc            lagged Pearson correlation curve, listener vs speaker
rtlcc           mean absolute gap between two tlcc curves
rwtlcc          rtlcc windowed and averaged, lag range capped per window
fid_delta_fm    Frechet distance between Gaussian fits of pooled
                adjacent-frame differences, x100

Groups follow the coefficient layout: expression, angle, translation,
pose. Curves treat exactly-constant dims as zero correlation rather than
propagating 0/0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InsufficientSamples, LengthMismatch, NumericError, TooShort
from .motion import CoefficientGroup, MotionSequence, frame_diff
from .validation import MOTION_DIM, as_f64

DEFAULT_MAX_LAG = 30
DEFAULT_WINDOW = 120
DEFAULT_STRIDE = 60

_COV_REG = 1e-6
_EIG_FLOOR = 1e-10


def _frames(x, name: str) -> np.ndarray:
    arr = x.frames if isinstance(x, MotionSequence) else as_f64(x, name)
    if arr.ndim != 2:
        raise LengthMismatch(f"{name} must be 2-D, got shape {arr.shape}")
    return arr


def _group_cols(arr: np.ndarray, group: CoefficientGroup) -> np.ndarray:
    if arr.shape[1] != MOTION_DIM:
        raise LengthMismatch(f"expected width {MOTION_DIM}, got {arr.shape[1]}")
    return arr[:, group.slice]


def fd(pred, gt, group: CoefficientGroup = CoefficientGroup.EXPRESSION) -> float:
    """Mean |pred - gt| over frames and the group's dims, times 100."""
    p, g = _frames(pred, "pred"), _frames(gt, "gt")
    if p.shape[0] != g.shape[0]:
        raise LengthMismatch(f"pred frames {p.shape[0]} != gt frames {g.shape[0]}")
    return float(np.mean(np.abs(_group_cols(p, group) - _group_cols(g, group))) * 100.0)


def variation_diversity(
    seq, group: CoefficientGroup = CoefficientGroup.EXPRESSION
) -> float:
    """Temporal variance per dim (divide by T), averaged over the group."""
    arr = _frames(seq, "seq")
    if arr.shape[0] < 2:
        raise TooShort("variation_diversity needs at least 2 frames")
    cols = _group_cols(arr, group)
    # exactly-constant dims are exactly zero, no mean-rounding residue
    var = np.where(np.ptp(cols, axis=0) == 0.0, 0.0, np.var(cols, axis=0))
    return float(np.mean(var))


@dataclass
class TlccCurve:
    lags: np.ndarray  # -K .. K
    correlations: np.ndarray  # group-dim mean per lag

    def __post_init__(self):
        if np.any(np.abs(self.correlations) > 1.0 + 1e-9):
            raise NumericError("correlations must lie in [-1, 1]")

    def argmax_lag(self) -> int:
        return int(self.lags[int(np.argmax(self.correlations))])


def _pearson_columns(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Column-wise Pearson; exactly-constant columns on either side give 0."""
    ac = a - a.mean(axis=0)
    bc = b - b.mean(axis=0)
    ssa = np.sum(ac * ac, axis=0)
    ssb = np.sum(bc * bc, axis=0)
    flat = (np.ptp(a, axis=0) == 0.0) | (np.ptp(b, axis=0) == 0.0)
    denom = np.sqrt(np.where(flat, 1.0, ssa * ssb))
    return np.where(flat, 0.0, np.sum(ac * bc, axis=0) / denom)


def tlcc(
    listener,
    speaker,
    group: CoefficientGroup = CoefficientGroup.EXPRESSION,
    max_lag: int = DEFAULT_MAX_LAG,
) -> TlccCurve:
    """Correlation of listener[t] with speaker[t - k] for k in [-K, K].

    Positive lag means the listener trails the speaker. Each lag uses the
    overlapping frame range; per-dim correlations are averaged over the
    group's dims.
    """
    lst, spk = _frames(listener, "listener"), _frames(speaker, "speaker")
    if lst.shape[0] != spk.shape[0]:
        raise LengthMismatch(
            f"listener frames {lst.shape[0]} != speaker frames {spk.shape[0]}"
        )
    t = lst.shape[0]
    if max_lag < 0:
        raise TooShort(f"max_lag must be >= 0, got {max_lag}")
    if t <= max_lag + 2:
        raise TooShort(f"need more than {max_lag + 2} frames, got {t}")
    lcols, scols = _group_cols(lst, group), _group_cols(spk, group)
    lags = np.arange(-max_lag, max_lag + 1)
    curve = np.empty(lags.shape[0])
    for i, k in enumerate(lags):
        if k >= 0:
            a, b = lcols[k:], scols[: t - k]
        else:
            a, b = lcols[: t + k], scols[-k:]
        curve[i] = float(np.mean(_pearson_columns(a, b)))
    return TlccCurve(lags=lags, correlations=curve)


def rtlcc(
    pred_listener,
    gt_listener,
    speaker,
    group: CoefficientGroup = CoefficientGroup.EXPRESSION,
    max_lag: int = DEFAULT_MAX_LAG,
) -> float:
    """Mean absolute gap between the two lag-correlation curves."""
    cp = tlcc(pred_listener, speaker, group, max_lag)
    cg = tlcc(gt_listener, speaker, group, max_lag)
    return float(np.mean(np.abs(cp.correlations - cg.correlations)))


def rwtlcc(
    pred_listener,
    gt_listener,
    speaker,
    group: CoefficientGroup = CoefficientGroup.EXPRESSION,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
    max_lag: int = DEFAULT_MAX_LAG,
) -> float:
    """rtlcc per window of `window` frames every `stride`, averaged; the
    lag range shrinks to window // 4 when the window is short."""
    p = _frames(pred_listener, "pred_listener")
    g = _frames(gt_listener, "gt_listener")
    s = _frames(speaker, "speaker")
    t = p.shape[0]
    if not (t == g.shape[0] == s.shape[0]):
        raise LengthMismatch("all inputs must share one frame count")
    if window < 3:
        raise TooShort(f"window must be >= 3, got {window}")
    if stride < 1:
        raise TooShort(f"stride must be >= 1, got {stride}")
    if t < window:
        raise TooShort(f"need at least window={window} frames, got {t}")
    lag = min(max_lag, window // 4)
    vals = []
    for start in range(0, t - window + 1, stride):
        stop = start + window
        vals.append(
            rtlcc(p[start:stop], g[start:stop], s[start:stop], group, lag)
        )
    return float(np.mean(vals))


# -- distribution distance over frame differences ---------------------------------


def _pooled_diffs(seqs, group: CoefficientGroup, name: str) -> np.ndarray:
    chunks = []
    for i, seq in enumerate(seqs):
        arr = _frames(seq, f"{name}[{i}]")
        if arr.shape[0] >= 2:
            diffs = (
                frame_diff(seq)
                if isinstance(seq, MotionSequence)
                else np.diff(arr, axis=0)
            )
            chunks.append(_group_cols(diffs, group))
    if not chunks:
        raise InsufficientSamples(f"{name}: no adjacent-frame differences")
    pooled = np.concatenate(chunks, axis=0)
    if pooled.shape[0] < 2:
        raise InsufficientSamples(
            f"{name}: need at least 2 difference vectors, got {pooled.shape[0]}"
        )
    return pooled


def _gauss_fit(x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mu = x.mean(axis=0)
    cov = np.cov(x, rowvar=False, ddof=1)
    cov = np.atleast_2d(cov)
    dim = x.shape[1]
    eigs = np.linalg.eigvalsh((cov + cov.T) / 2.0)
    if x.shape[0] < dim + 1 or eigs.min() < _EIG_FLOOR:
        cov = cov + _COV_REG * np.eye(dim)
    return mu, cov


def _psd_sqrt(mat: np.ndarray) -> np.ndarray:
    vals, vecs = np.linalg.eigh((mat + mat.T) / 2.0)
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def gaussian_frechet(mu1, cov1, mu2, cov2) -> float:
    """Frechet distance between two Gaussians; the cross term uses the
    symmetric product sqrt (c1^1/2 c2 c1^1/2)^1/2 with eigenvalues clamped
    at zero, so the result is never negative."""
    mu1, mu2 = np.asarray(mu1, dtype=np.float64), np.asarray(mu2, dtype=np.float64)
    cov1 = np.atleast_2d(np.asarray(cov1, dtype=np.float64))
    cov2 = np.atleast_2d(np.asarray(cov2, dtype=np.float64))
    half = _psd_sqrt(cov1)
    inner = _psd_sqrt(half @ cov2 @ half)
    diff = mu1 - mu2
    val = float(diff @ diff + np.trace(cov1) + np.trace(cov2) - 2.0 * np.trace(inner))
    return max(val, 0.0)


def fid_delta_fm(
    pred_set, gt_set, group: CoefficientGroup = CoefficientGroup.EXPRESSION
) -> float:
    """Frechet distance between Gaussian fits of pooled adjacent-frame
    differences of the two sets, restricted to the group, times 100.
    Covariances are regularized when the pool is smaller than dim+1 or
    numerically rank-deficient."""
    p = _pooled_diffs(pred_set, group, "pred_set")
    g = _pooled_diffs(gt_set, group, "gt_set")
    mu1, c1 = _gauss_fit(p)
    mu2, c2 = _gauss_fit(g)
    return gaussian_frechet(mu1, c1, mu2, c2) * 100.0


# -- aggregate report --------------------------------------------------------------


@dataclass
class MetricReport:
    values: dict[str, float]
    metadata: dict = field(default_factory=dict)

    COLUMNS = (
        "fd_exp",
        "fd_angle",
        "fd_trans",
        "vd_exp",
        "vd_pose",
        "rtlcc_exp",
        "rtlcc_pose",
        "rwtlcc_exp",
        "rwtlcc_pose",
        "fid_exp",
        "fid_pose",
    )


def evaluate_sets(
    pred_seqs,
    gt_seqs,
    speaker_seqs,
    max_lag: int = DEFAULT_MAX_LAG,
    window: int = DEFAULT_WINDOW,
    stride: int = DEFAULT_STRIDE,
) -> MetricReport:
    """Pair-averaged metrics plus the set-level distribution distance."""
    n = len(pred_seqs)
    if not (n == len(gt_seqs) == len(speaker_seqs)):
        raise LengthMismatch("pred, gt, and speaker sets must have equal size")
    if n == 0:
        raise InsufficientSamples("empty evaluation set")

    exp, ang, tra, pose = (
        CoefficientGroup.EXPRESSION,
        CoefficientGroup.ANGLE,
        CoefficientGroup.TRANSLATION,
        CoefficientGroup.POSE,
    )

    def pair_mean(fn) -> float:
        return float(np.mean([fn(i) for i in range(n)]))

    values = {
        "fd_exp": pair_mean(lambda i: fd(pred_seqs[i], gt_seqs[i], exp)),
        "fd_angle": pair_mean(lambda i: fd(pred_seqs[i], gt_seqs[i], ang)),
        "fd_trans": pair_mean(lambda i: fd(pred_seqs[i], gt_seqs[i], tra)),
        "vd_exp": pair_mean(lambda i: variation_diversity(pred_seqs[i], exp)),
        "vd_pose": pair_mean(lambda i: variation_diversity(pred_seqs[i], pose)),
        "rtlcc_exp": pair_mean(
            lambda i: rtlcc(pred_seqs[i], gt_seqs[i], speaker_seqs[i], exp, max_lag)
        ),
        "rtlcc_pose": pair_mean(
            lambda i: rtlcc(pred_seqs[i], gt_seqs[i], speaker_seqs[i], pose, max_lag)
        ),
        "rwtlcc_exp": pair_mean(
            lambda i: rwtlcc(
                pred_seqs[i], gt_seqs[i], speaker_seqs[i], exp, window, stride, max_lag
            )
        ),
        "rwtlcc_pose": pair_mean(
            lambda i: rwtlcc(
                pred_seqs[i], gt_seqs[i], speaker_seqs[i], pose, window, stride, max_lag
            )
        ),
        "fid_exp": fid_delta_fm(pred_seqs, gt_seqs, exp),
        "fid_pose": fid_delta_fm(pred_seqs, gt_seqs, pose),
    }
    metadata = {
        "n_pairs": n,
        "max_lag": max_lag,
        "window": window,
        "stride": stride,
    }
    return MetricReport(values=values, metadata=metadata)
