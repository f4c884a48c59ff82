"""Universal finite-difference gradient checker.

Works on any scalar-valued closure over a Tensor: analytic gradients come
from the tape, numeric ones from central differences on the raw data. One
checker covers every op because ops never special-case their own testing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class GradCheckReport:
    max_rel_err: float
    passed: bool
    tol: float
    worst_index: tuple = ()
    analytic: np.ndarray | None = None
    numeric: np.ndarray | None = None
    failures: list = field(default_factory=list)


def grad_check(f, wrt, tol: float = 1e-6, h: float = 1e-5) -> GradCheckReport:
    """Compare tape gradients of f() against central differences w.r.t. wrt.

    f must be a deterministic nullary closure returning a scalar Tensor and
    reading wrt.data afresh on every call. wrt must be a leaf with
    requires_grad=True.
    """
    wrt.zero_grad()
    out = f()
    out.backward()
    analytic = np.zeros_like(wrt.data) if wrt.grad is None else wrt.grad.copy()

    numeric = np.zeros_like(wrt.data)
    flat = wrt.data.reshape(-1)
    num_flat = numeric.reshape(-1)
    for i in range(flat.size):
        keep = flat[i]
        flat[i] = keep + h
        hi = float(f().data)
        flat[i] = keep - h
        lo = float(f().data)
        flat[i] = keep
        num_flat[i] = (hi - lo) / (2.0 * h)

    diff = np.abs(analytic - numeric)
    denom = np.maximum(1.0, np.maximum(np.abs(analytic), np.abs(numeric)))
    rel = diff / denom
    worst = int(np.argmax(rel))
    report = GradCheckReport(
        max_rel_err=float(rel.reshape(-1)[worst]),
        passed=bool(rel.max() <= tol),
        tol=tol,
        worst_index=np.unravel_index(worst, wrt.data.shape),
        analytic=analytic,
        numeric=numeric,
    )
    if not report.passed:
        bad = np.argwhere(rel > tol)
        for idx in bad[:16]:
            key = tuple(int(v) for v in idx)
            report.failures.append((key, float(analytic[key]), float(numeric[key])))
    return report
