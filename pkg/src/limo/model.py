"""Network bundle: every learnable component plus the conditioning paths,
the training loss, and segment-by-segment generation.

Conditioning for one segment:

    text -> token embedding (+ positions) -> mapping net -> static tokens H
    acoustic -> audio encoder -> A
    M = responsive(A, H); E = M @ H
    dyn = proj([E | speaker motion weight])
    memory = fuse([dyn | motion prior]) + positions

The denoiser cross-attends to `memory`. Long clips are generated segment
by segment: segment k>0 takes its motion prior from segment k-1's already
generated frames, and the first `boundary_overlap` frames of its initial
noise are copied from the previous segment's last initial-noise frames.
Only noise sharing happens at the seam; frames are never blended.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .diffusion import MotionDenoiser, NoiseSchedule, q_sample, reverse_step
from .errors import ShapeMismatch, TooShort
from .nn.layers import Affine, EmbeddingTable, FeedForward, concat_features
from .nn.tensor import Tensor, add_positions, no_grad, tmean
from .portrait import (
    AudioEncoder,
    DynamicTokenProjector,
    ResponsiveInteraction,
    speaker_motion_weight,
    time_dependent_tokens,
)
from .priors import MotionPrior, first_segment_prior, motion_prior, segment_similarity
from .textprior import build_vocabulary, token_ids
from .validation import (
    ACOUSTIC_DIM,
    MOTION_DIM,
    check_acoustic_frames,
    check_motion_frames,
    check_same_length,
)


class ListenerNetworks:
    def __init__(
        self,
        feature_width: int = 64,
        decoder_layers: int = 4,
        decoder_heads: int = 4,
        ffn_width: int = 256,
        audio_layers: int = 2,
        audio_heads: int = 4,
        diffusion_steps: int = 200,
        motion_window: int = 5,
        seed: int = 0,
    ):
        rng = np.random.default_rng(seed)
        c = feature_width
        self.feature_width = c
        self.motion_window = motion_window
        self.vocab = build_vocabulary()
        self.embedder = EmbeddingTable(len(self.vocab), c, rng, "text.embed")
        self.mapping = FeedForward(c, c, rng, "text.mapping")
        self.audio_encoder = AudioEncoder(
            ACOUSTIC_DIM, c, audio_layers, audio_heads, ffn_width, rng, "audio"
        )
        self.responsive = ResponsiveInteraction(c, rng, "responsive")
        self.dynamic_proj = DynamicTokenProjector(c, MOTION_DIM, rng, "dynamic")
        self.fusion = Affine(c + MOTION_DIM, c, rng, "fusion")
        self.denoiser = MotionDenoiser(
            MOTION_DIM, c, decoder_layers, decoder_heads, ffn_width,
            diffusion_steps, rng, "denoiser",
        )
        # per-dim motion statistics; identity until set_motion_stats
        self.motion_mean = np.zeros(MOTION_DIM)
        self.motion_std = np.ones(MOTION_DIM)

    # -- motion scaling ------------------------------------------------------

    def set_motion_stats(self, mean, std) -> None:
        """Per-dimension statistics of the training motion. The denoiser
        operates on standardized coordinates; generation maps back."""
        mean = np.asarray(mean, dtype=np.float64)
        std = np.asarray(std, dtype=np.float64)
        if mean.shape != (MOTION_DIM,) or std.shape != (MOTION_DIM,):
            raise ShapeMismatch(
                f"motion stats must have shape ({MOTION_DIM},), got "
                f"{mean.shape} and {std.shape}"
            )
        self.motion_mean = mean
        self.motion_std = np.maximum(std, 1e-6)

    def normalize_motion(self, frames: np.ndarray) -> np.ndarray:
        return (frames - self.motion_mean) / self.motion_std

    def denormalize_motion(self, frames: np.ndarray) -> np.ndarray:
        return frames * self.motion_std + self.motion_mean

    # -- conditioning ------------------------------------------------------

    def token_embeddings(self, text: str) -> Tensor:
        """Vocabulary embeddings plus sinusoidal positions, (L, C)."""
        ids = token_ids(text, self.vocab)
        return add_positions(self.embedder(ids))

    def static_tokens(self, text: str) -> Tensor:
        """Static portrait tokens: mapping net over the token embeddings."""
        return self.mapping(self.token_embeddings(text))

    def encode_audio(self, acoustic) -> Tensor:
        if not isinstance(acoustic, Tensor):
            acoustic = Tensor(check_acoustic_frames(acoustic))
        elif acoustic.shape[-1] != ACOUSTIC_DIM:
            raise ShapeMismatch(
                f"acoustic width {acoustic.shape[-1]} != {ACOUSTIC_DIM}"
            )
        return self.audio_encoder(acoustic)

    def dynamic_tokens(
        self,
        static: Tensor,
        audio_tokens: Tensor,
        speaker_frames: np.ndarray,
        uniform_weights: bool = False,
    ):
        """Returns (responsive matrix M, dynamic tokens), both frame-aligned."""
        if uniform_weights:
            t_len, l_len = audio_tokens.shape[0], static.shape[0]
            m = Tensor(np.full((t_len, l_len), 1.0 / l_len))
        else:
            m = self.responsive(audio_tokens, static)
        e = time_dependent_tokens(m, static)
        weight = speaker_motion_weight(speaker_frames, self.motion_window)
        dyn = self.dynamic_proj(e, weight)
        return m, dyn

    def condition_memory(self, dyn: Tensor, prior) -> Tensor:
        """Fuse dynamic tokens with the motion prior into the cross-attention
        memory. `prior` may be a MotionPrior, a raw array, or a Tensor still
        on the tape."""
        if isinstance(prior, MotionPrior):
            g = Tensor(prior.frames)
        elif isinstance(prior, Tensor):
            g = prior
        else:
            g = Tensor(np.asarray(prior, dtype=np.float64))
        if g.shape[0] != dyn.shape[0]:
            raise ShapeMismatch(
                f"prior frames {g.shape[0]} != dynamic frames {dyn.shape[0]}"
            )
        return add_positions(self.fusion(concat_features(dyn, g)))

    def segment_condition(
        self,
        speaker_frames,
        acoustic,
        text: str,
        prior,
        uniform_weights: bool = False,
        static: Tensor | None = None,
    ) -> Tensor:
        """Full conditioning path for one segment."""
        speaker_frames = check_motion_frames(speaker_frames, "speaker_frames")
        check_same_length(speaker_frames, np.asarray(acoustic), "speaker", "acoustic")
        if static is None:
            static = self.static_tokens(text)
        audio = self.encode_audio(acoustic)
        _, dyn = self.dynamic_tokens(static, audio, speaker_frames, uniform_weights)
        return self.condition_memory(dyn, prior)

    def predict_noise(self, x_t, memory: Tensor, t: int) -> Tensor:
        return self.denoiser(x_t, memory, t)

    def parameters(self):
        return (
            self.embedder.parameters()
            + self.mapping.parameters()
            + self.audio_encoder.parameters()
            + self.responsive.parameters()
            + self.dynamic_proj.parameters()
            + self.fusion.parameters()
            + self.denoiser.parameters()
        )


# -- training --------------------------------------------------------------------


@dataclass
class PreviousSegment:
    past_listener: np.ndarray  # ground-truth motion of segment k-1
    speaker: np.ndarray
    acoustic: np.ndarray
    text: str


@dataclass
class TrainingSample:
    x0: np.ndarray  # listener motion to denoise, (L, 70)
    speaker: np.ndarray
    acoustic: np.ndarray
    text: str
    prev: PreviousSegment | None = None


def sample_condition(networks: ListenerNetworks, sample: TrainingSample) -> Tensor:
    """Condition memory for one training sample (prior from ground-truth past)."""
    static = networks.static_tokens(sample.text)
    audio = networks.encode_audio(sample.acoustic)
    _, dyn = networks.dynamic_tokens(static, audio, sample.speaker)
    if sample.prev is None:
        prior = first_segment_prior(sample.x0.shape[0])
        return networks.condition_memory(dyn, prior)
    prev = sample.prev
    static_p = static if prev.text == sample.text else networks.static_tokens(prev.text)
    audio_p = networks.encode_audio(prev.acoustic)
    _, dyn_p = networks.dynamic_tokens(static_p, audio_p, prev.speaker)
    sim = segment_similarity(dyn, dyn_p)
    g = motion_prior(sim, prev.past_listener)
    return networks.condition_memory(dyn, g)


def diffusion_loss(
    networks: ListenerNetworks,
    sched: NoiseSchedule,
    batch: list[TrainingSample],
    rng: np.random.Generator,
) -> Tensor:
    """Mean over the batch of per-sample noise-prediction MSE. One uniform
    step t and one noise draw per sample."""
    if not batch:
        raise TooShort("empty training batch")
    total = None
    for sample in batch:
        memory = sample_condition(networks, sample)
        t = int(rng.integers(0, sched.steps))
        eps = rng.standard_normal(sample.x0.shape)
        x_t = q_sample(networks.normalize_motion(sample.x0), t, eps, sched)
        eps_hat = networks.predict_noise(x_t, memory, t)
        diff = eps_hat - Tensor(eps)
        mse = tmean(diff * diff)
        total = mse if total is None else total + mse
    return total * (1.0 / len(batch))


# -- generation --------------------------------------------------------------------


@dataclass
class SegmentConditions:
    speaker: np.ndarray  # (L, 70)
    acoustic: np.ndarray  # (L, 45)
    text: str


@dataclass
class GenerationPlan:
    segments: list[SegmentConditions]
    boundary_overlap: int = 10
    master_seed: int = 0

    def __post_init__(self):
        if not self.segments:
            raise TooShort("generation plan has no segments")
        length = self.segments[0].speaker.shape[0]
        for k, seg in enumerate(self.segments):
            seg.speaker = check_motion_frames(seg.speaker, f"segment {k} speaker")
            seg.acoustic = check_acoustic_frames(seg.acoustic, f"segment {k} acoustic")
            check_same_length(seg.speaker, seg.acoustic, "speaker", "acoustic")
            if seg.speaker.shape[0] != length:
                raise ShapeMismatch("all plan segments must share one length")
        if not 0 <= self.boundary_overlap < length:
            raise ShapeMismatch(
                f"boundary_overlap {self.boundary_overlap} outside [0, {length})"
            )


def generate_segment(
    networks: ListenerNetworks,
    sched: NoiseSchedule,
    memory: Tensor,
    init_noise: np.ndarray,
    z_rng: np.random.Generator,
) -> np.ndarray:
    """Run the full reverse chain for one segment; deterministic given
    weights, memory, init_noise, and the z stream. The chain runs in the
    standardized motion space; output is mapped back to coefficients."""
    x = init_noise.copy()
    with no_grad():
        for t in reversed(range(sched.steps)):
            eps_hat = networks.predict_noise(x, memory, t).data
            z = z_rng.standard_normal(x.shape) if t > 0 else None
            x = reverse_step(x, eps_hat, t, sched, z)
    return networks.denormalize_motion(x)


def generate_long(
    networks: ListenerNetworks,
    sched: NoiseSchedule,
    plan: GenerationPlan,
    use_motion_prior: bool = True,
    share_boundary_noise: bool = True,
    uniform_weights: bool = False,
    zero_condition: bool = False,
):
    """Segment-by-segment generation. Returns (frames, manifest).

    Ablation switches: `use_motion_prior=False` conditions every segment on
    the zero prior; `share_boundary_noise=False` keeps per-segment noise
    independent; `uniform_weights` replaces the responsive matrix with
    1/L; `zero_condition` zeroes the whole condition memory.
    """
    length = plan.segments[0].speaker.shape[0]
    fb = plan.boundary_overlap
    outputs: list[np.ndarray] = []
    cond_hashes: list[str] = []
    prev_noise: np.ndarray | None = None
    prev_out: np.ndarray | None = None
    prev_dyn: Tensor | None = None
    with no_grad():
        for k, seg in enumerate(plan.segments):
            static = networks.static_tokens(seg.text)
            audio = networks.encode_audio(seg.acoustic)
            _, dyn = networks.dynamic_tokens(
                static, audio, seg.speaker, uniform_weights
            )
            if use_motion_prior and k > 0:
                sim = segment_similarity(dyn, prev_dyn)
                prior = motion_prior(sim, prev_out)
            else:
                prior = first_segment_prior(length)
            memory = networks.condition_memory(dyn, prior)
            if zero_condition:
                memory = Tensor(np.zeros_like(memory.data))
            cond_hashes.append(hashlib.sha256(memory.data.tobytes()).hexdigest())

            init_rng = np.random.default_rng(
                np.random.SeedSequence([plan.master_seed, k, 0])
            )
            z_rng = np.random.default_rng(
                np.random.SeedSequence([plan.master_seed, k, 1])
            )
            noise = init_rng.standard_normal((length, MOTION_DIM))
            if share_boundary_noise and k > 0 and fb > 0:
                noise[:fb] = prev_noise[length - fb :]
            out = generate_segment(networks, sched, memory, noise, z_rng)
            outputs.append(out)
            prev_noise, prev_out, prev_dyn = noise, out, dyn

    frames = np.concatenate(outputs, axis=0)
    manifest = {
        "master_seed": plan.master_seed,
        "boundary_overlap": fb,
        "segment_starts": [k * length for k in range(len(plan.segments))],
        "segment_length": length,
        "diffusion_steps": sched.steps,
        "beta_start": float(sched.betas[0]),
        "beta_end": float(sched.betas[-1]),
        "condition_hashes": cond_hashes,
        "ablations": {
            "use_motion_prior": use_motion_prior,
            "share_boundary_noise": share_boundary_noise,
            "uniform_weights": uniform_weights,
            "zero_condition": zero_condition,
        },
    }
    return frames, manifest
