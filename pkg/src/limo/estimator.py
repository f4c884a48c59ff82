"""Estimator facade over the network bundle.

fit consumes speaker-listener records (anything with speaker, listener,
acoustic, annotation, and text_seed, attributes or mapping keys), cuts
them into fixed-length segments, and trains the denoiser with the usual
noise-prediction objective. predict runs segment-by-segment generation
for new speaker tracks. Hyperparameters are stored verbatim so the class
composes with scikit-learn tooling (get_params, set_params, clone).
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.exceptions import NotFittedError

from .diffusion import make_schedule
from .errors import ConfigInvalid, TooShort
from .model import (
    GenerationPlan,
    ListenerNetworks,
    PreviousSegment,
    SegmentConditions,
    TrainingSample,
    diffusion_loss,
    generate_long,
)
from .motion import MotionSequence
from .nn.checkpoint import apply_checkpoint, load_checkpoint, save_checkpoint
from .nn.optim import AdamW
from .nn.tensor import Parameter
from .textprior import ListenerAnnotation, render_text_prior
from .validation import check_acoustic_frames, check_motion_frames, check_same_length


def _get(record, key):
    if hasattr(record, key):
        return getattr(record, key)
    try:
        return record[key]
    except (TypeError, KeyError):
        raise ConfigInvalid(f"training record lacks {key!r}") from None


def _frames_of(x) -> np.ndarray:
    return x.frames if isinstance(x, MotionSequence) else np.asarray(x, dtype=np.float64)


def _record_text(record) -> str:
    ann = _get(record, "annotation")
    if isinstance(ann, dict):
        ann = ListenerAnnotation.from_json_dict(ann)
    return render_text_prior(ann, int(_get(record, "text_seed")))


class ListenerMotionGenerator(BaseEstimator):
    """Conditional diffusion generator of listener motion sequences."""

    def __init__(
        self,
        feature_width: int = 64,
        decoder_layers: int = 4,
        decoder_heads: int = 4,
        ffn_width: int = 256,
        audio_layers: int = 2,
        audio_heads: int = 4,
        diffusion_steps: int = 200,
        beta_start: float = 1e-4,
        beta_end: float = 0.02,
        segment_len: int = 60,
        motion_window: int = 5,
        boundary_overlap: int = 10,
        learning_rate: float = 1e-4,
        weight_decay: float = 0.01,
        batch_size: int = 8,
        epochs: int = 5,
        seed: int = 0,
    ):
        self.feature_width = feature_width
        self.decoder_layers = decoder_layers
        self.decoder_heads = decoder_heads
        self.ffn_width = ffn_width
        self.audio_layers = audio_layers
        self.audio_heads = audio_heads
        self.diffusion_steps = diffusion_steps
        self.beta_start = beta_start
        self.beta_end = beta_end
        self.segment_len = segment_len
        self.motion_window = motion_window
        self.boundary_overlap = boundary_overlap
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.batch_size = batch_size
        self.epochs = epochs
        self.seed = seed

    # -- plumbing ---------------------------------------------------------

    def _build(self) -> None:
        self.networks_ = ListenerNetworks(
            feature_width=self.feature_width,
            decoder_layers=self.decoder_layers,
            decoder_heads=self.decoder_heads,
            ffn_width=self.ffn_width,
            audio_layers=self.audio_layers,
            audio_heads=self.audio_heads,
            diffusion_steps=self.diffusion_steps,
            motion_window=self.motion_window,
            seed=self.seed,
        )
        self.schedule_ = make_schedule(
            self.diffusion_steps, self.beta_start, self.beta_end
        )

    def _check_fitted(self) -> None:
        if not hasattr(self, "networks_"):
            raise NotFittedError(
                "this ListenerMotionGenerator is not fitted yet; call fit first"
            )

    def _segment_record(self, record, with_listener: bool):
        speaker = check_motion_frames(_frames_of(_get(record, "speaker")), "speaker")
        acoustic = check_acoustic_frames(_frames_of(_get(record, "acoustic")), "acoustic")
        check_same_length(speaker, acoustic, "speaker", "acoustic")
        listener = None
        if with_listener:
            listener = check_motion_frames(_frames_of(_get(record, "listener")), "listener")
            check_same_length(speaker, listener, "speaker", "listener")
        n_seg = speaker.shape[0] // self.segment_len
        if n_seg < 1:
            raise TooShort(
                f"record has {speaker.shape[0]} frames, needs >= {self.segment_len}"
            )
        cuts = [
            slice(k * self.segment_len, (k + 1) * self.segment_len)
            for k in range(n_seg)
        ]
        return speaker, acoustic, listener, cuts

    def _training_samples(self, records) -> list[TrainingSample]:
        samples = []
        for record in records:
            speaker, acoustic, listener, cuts = self._segment_record(record, True)
            text = _record_text(record)
            for k, cut in enumerate(cuts):
                prev = None
                if k > 0:
                    pcut = cuts[k - 1]
                    prev = PreviousSegment(
                        past_listener=listener[pcut],
                        speaker=speaker[pcut],
                        acoustic=acoustic[pcut],
                        text=text,
                    )
                samples.append(
                    TrainingSample(
                        x0=listener[cut],
                        speaker=speaker[cut],
                        acoustic=acoustic[cut],
                        text=text,
                        prev=prev,
                    )
                )
        return samples

    # -- estimator API ------------------------------------------------------

    def fit(self, X, y=None):
        """Train on records; y is ignored and accepted for API symmetry."""
        if self.epochs < 0:
            raise ConfigInvalid(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigInvalid(f"batch_size must be >= 1, got {self.batch_size}")
        records = list(X)
        if not records:
            raise TooShort("fit needs at least one record")
        self._build()
        samples = self._training_samples(records)
        stacked = np.concatenate([s.x0 for s in samples], axis=0)
        self.networks_.set_motion_stats(stacked.mean(axis=0), stacked.std(axis=0))
        rng = np.random.default_rng(self.seed)
        opt = AdamW(
            self.networks_.parameters(),
            lr=self.learning_rate,
            weight_decay=self.weight_decay,
        )
        self.loss_history_ = []
        self.epoch_losses_ = []
        for _ in range(self.epochs):
            order = rng.permutation(len(samples))
            epoch_vals = []
            for start in range(0, len(samples), self.batch_size):
                batch = [samples[i] for i in order[start : start + self.batch_size]]
                loss = diffusion_loss(self.networks_, self.schedule_, batch, rng)
                for p in self.networks_.parameters():
                    p.grad = None
                loss.backward()
                opt.step()
                val = float(loss.data)
                self.loss_history_.append(val)
                epoch_vals.append(val)
            self.epoch_losses_.append(float(np.mean(epoch_vals)))
        self.n_samples_seen_ = len(samples)
        return self

    def predict(
        self,
        X,
        master_seed: int = 0,
        use_motion_prior: bool = True,
        share_boundary_noise: bool = True,
        uniform_weights: bool = False,
        zero_condition: bool = False,
        fps: float | None = None,
    ) -> list[MotionSequence]:
        """Generate one listener sequence per record (listener field unused)."""
        self._check_fitted()
        out = []
        for i, record in enumerate(X):
            speaker, acoustic, _, cuts = self._segment_record(record, False)
            text = _record_text(record)
            plan = GenerationPlan(
                segments=[
                    SegmentConditions(
                        speaker=speaker[c], acoustic=acoustic[c], text=text
                    )
                    for c in cuts
                ],
                boundary_overlap=self.boundary_overlap,
                master_seed=int(
                    np.random.SeedSequence([master_seed, i]).generate_state(1)[0]
                ),
            )
            frames, _ = generate_long(
                self.networks_,
                self.schedule_,
                plan,
                use_motion_prior=use_motion_prior,
                share_boundary_noise=share_boundary_noise,
                uniform_weights=uniform_weights,
                zero_condition=zero_condition,
            )
            seq_fps = fps
            if seq_fps is None:
                spk = _get(record, "speaker")
                seq_fps = spk.fps if isinstance(spk, MotionSequence) else 30.0
            out.append(MotionSequence(frames=frames, fps=seq_fps))
        return out

    # -- persistence --------------------------------------------------------

    def save_checkpoint(self, path) -> None:
        self._check_fitted()
        nets = self.networks_
        extras = [
            Parameter(nets.motion_mean, "motion_stats.mean"),
            Parameter(nets.motion_std, "motion_stats.std"),
        ]
        save_checkpoint(nets.parameters() + extras, path)

    def load_checkpoint(self, path):
        """Build networks from this estimator's hyperparameters and load
        weights; incompatible dims are reported parameter by parameter."""
        self._build()
        state = load_checkpoint(path)
        mean = state.pop("motion_stats.mean", None)
        std = state.pop("motion_stats.std", None)
        apply_checkpoint(self.networks_.parameters(), state)
        if mean is not None and std is not None:
            self.networks_.set_motion_stats(mean, std)
        return self
