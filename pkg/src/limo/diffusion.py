"""Conditional denoising diffusion over fixed-length motion segments.

Forward process: linear beta schedule; closed-form marginal

    x_t = sqrt(abar_t) x0 + sqrt(1 - abar_t) eps .

Reverse step (fixed variance beta_t):

    mu = (x_t - beta_t / sqrt(1 - abar_t) * eps_hat) / sqrt(alpha_t)
    x_{t-1} = mu + sqrt(beta_t) z ,   z = 0 at the last step.

Steps are 0-indexed: t runs over [0, diffusion_steps), the reverse chain
walks t = steps-1 .. 0. `diffusion_steps` is always named in full to keep
it apart from frame counts.

The denoiser is a transformer decoder: motion frames are embedded with a
single affine, a projected sinusoidal embedding of t is appended as one
extra token, the stack self-attends over motion+step tokens and
cross-attends to the per-frame condition memory, and the output affine
maps back to 70 coefficients with the step token's slot discarded.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidRange, ShapeMismatch, StepOutOfRange
from .nn.layers import Affine, DecoderLayer, LayerNorm
from .nn.tensor import Tensor, add_positions, concat, sinusoid_table

DEFAULT_STEPS = 200
DEFAULT_BETA_START = 1e-4
DEFAULT_BETA_END = 0.02


@dataclass(frozen=True)
class NoiseSchedule:
    betas: np.ndarray
    alphas: np.ndarray
    alpha_bars: np.ndarray

    @property
    def steps(self) -> int:
        return len(self.betas)


def make_schedule(
    steps: int = DEFAULT_STEPS,
    beta_start: float = DEFAULT_BETA_START,
    beta_end: float = DEFAULT_BETA_END,
) -> NoiseSchedule:
    if steps < 2:
        raise InvalidRange(f"diffusion_steps must be >= 2, got {steps}")
    if not (0.0 < beta_start < beta_end < 1.0):
        raise InvalidRange(
            f"need 0 < beta_start < beta_end < 1, got {beta_start}, {beta_end}"
        )
    betas = np.linspace(beta_start, beta_end, steps)
    alphas = 1.0 - betas
    return NoiseSchedule(betas=betas, alphas=alphas, alpha_bars=np.cumprod(alphas))


def _check_step(t: int, sched: NoiseSchedule) -> None:
    if not 0 <= t < sched.steps:
        raise StepOutOfRange(f"step {t} outside [0, {sched.steps})")


def q_sample(x0: np.ndarray, t: int, eps: np.ndarray, sched: NoiseSchedule) -> np.ndarray:
    """Sample the forward marginal at step t."""
    _check_step(t, sched)
    if x0.shape != eps.shape:
        raise ShapeMismatch(f"x0 {x0.shape} vs eps {eps.shape}")
    abar = sched.alpha_bars[t]
    return np.sqrt(abar) * x0 + np.sqrt(1.0 - abar) * eps


def reverse_step(
    x_t: np.ndarray,
    eps_hat: np.ndarray,
    t: int,
    sched: NoiseSchedule,
    noise_z: np.ndarray | None,
) -> np.ndarray:
    """One reverse transition given the predicted noise. noise_z must be
    None (treated as zero) at t == 0."""
    _check_step(t, sched)
    beta = sched.betas[t]
    mu = (x_t - beta / np.sqrt(1.0 - sched.alpha_bars[t]) * eps_hat) / np.sqrt(
        sched.alphas[t]
    )
    if t == 0:
        return mu
    if noise_z is None:
        raise ShapeMismatch("noise_z required for steps t > 0")
    return mu + np.sqrt(beta) * noise_z


def p_sample_step(x_t, condition, t, sched, noise_z, predict) -> np.ndarray:
    """Reverse step with a noise predictor callable (x_t, condition, t) -> eps_hat."""
    eps_hat = predict(x_t, condition, t)
    eps_hat = eps_hat.data if isinstance(eps_hat, Tensor) else np.asarray(eps_hat)
    return reverse_step(x_t, eps_hat, t, sched, noise_z)


class MotionDenoiser:
    """Transformer-decoder noise predictor over one motion segment."""

    def __init__(
        self,
        motion_dim: int,
        width: int,
        layers: int,
        heads: int,
        ffn_width: int,
        diffusion_steps: int,
        rng: np.random.Generator,
        name: str = "denoiser",
    ):
        self.motion_dim = motion_dim
        self.width = width
        self.diffusion_steps = diffusion_steps
        self.motion_in = Affine(motion_dim, width, rng, f"{name}.motion_in")
        self.step_proj = Affine(width, width, rng, f"{name}.step_proj")
        self.layers = [
            DecoderLayer(width, heads, ffn_width, rng, f"{name}.layer{i}")
            for i in range(layers)
        ]
        self.final_ln = LayerNorm(width, f"{name}.final_ln")
        self.out = Affine(width, motion_dim, rng, f"{name}.out")
        self._step_table = sinusoid_table(diffusion_steps, width)

    def __call__(self, x_t, memory: Tensor, t: int) -> Tensor:
        if not 0 <= t < self.diffusion_steps:
            raise StepOutOfRange(f"step {t} outside [0, {self.diffusion_steps})")
        x = x_t if isinstance(x_t, Tensor) else Tensor(np.asarray(x_t, dtype=np.float64))
        if x.shape[-1] != self.motion_dim:
            raise ShapeMismatch(f"motion width {x.shape[-1]} != {self.motion_dim}")
        frames = x.shape[0]
        tokens = add_positions(self.motion_in(x))
        step_tok = self.step_proj(Tensor(self._step_table[t : t + 1]))
        seq = concat([tokens, step_tok], axis=0)
        for layer in self.layers:
            seq = layer(seq, memory)
        seq = self.final_ln(seq)
        return self.out(seq[0:frames])  # step-token slot discarded

    def parameters(self):
        ps = self.motion_in.parameters() + self.step_proj.parameters()
        for layer in self.layers:
            ps += layer.parameters()
        return ps + self.final_ln.parameters() + self.out.parameters()
