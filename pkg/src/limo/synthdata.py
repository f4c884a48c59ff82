"""Synthetic speaker-listener pairs with known couplings.

The speaker track is a smoothed Gaussian random walk. The listener copies
the speaker with a fixed frame lag and gain, shifted by a constant offset
that the pair's annotation describes clause by clause, plus a slow
per-pair sinusoid (a personal habit) on designated dims, plus white
noise:

    listener[t] = gain * speaker[max(0, t - lag)]
                  + offset(annotation) + habit[t] + N(0, noise_std)

    offset(annotation) = emotion term (expression dims)
                       + sum over AUs of au_scale * level/5 * AU term
                       + head term (pose dims, when present)

Every clause of the rendered text prior moves the motion it names, so a
conditional model can in principle read the whole sentence, not just the
emotion word. Acoustic features are a fixed affine image of the speaker
frames plus noise, so the audio track genuinely carries speaker timing.
Because the
coupling is linear with a known lag, lagged-correlation metrics have an
analytically known ground truth. Everything is reproducible from the
per-pair seed recorded in the dataset manifest.
"""

from __future__ import annotations

import json
import math
import random
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import ConfigInvalid, DatasetMissing
from .motion import (
    DEFAULT_FPS,
    MotionSequence,
    load_binary,
    load_feature_binary,
    save_binary,
    save_feature_binary,
)
from .textprior import AU_CATALOG, EMOTIONS, HEAD_MOTIONS, AuActivation, ListenerAnnotation
from .validation import ACOUSTIC_DIM, MOTION_DIM

_ACOUSTIC_PROJECTION_SEED = 997
_EMOTION_OFFSET_SEED = 101
_AU_OFFSET_SEED = 131
_HEAD_OFFSET_SEED = 149


def acoustic_projection() -> np.ndarray:
    """Fixed 70 -> 45 map shared by every pair; scaled to keep feature
    variance comparable to the motion variance."""
    rng = np.random.default_rng(_ACOUSTIC_PROJECTION_SEED)
    return rng.normal(size=(MOTION_DIM, ACOUSTIC_DIM)) / math.sqrt(MOTION_DIM)


def default_emotion_offsets() -> dict[str, np.ndarray]:
    """One fixed 70-dim offset per emotion label, expression dims only."""
    offsets = {}
    for i, emotion in enumerate(sorted(EMOTIONS)):
        rng = np.random.default_rng(np.random.SeedSequence([_EMOTION_OFFSET_SEED, i]))
        vec = np.zeros(MOTION_DIM)
        vec[:64] = rng.normal(size=64) * 0.5
        offsets[emotion] = vec
    return offsets


def default_au_offsets() -> dict[int, np.ndarray]:
    """Unit-scale expression-dim offset per action unit id; scaled at use
    by au_offset_scale * level/5."""
    offsets = {}
    for i, au_id in enumerate(sorted(AU_CATALOG)):
        rng = np.random.default_rng(np.random.SeedSequence([_AU_OFFSET_SEED, i]))
        vec = np.zeros(MOTION_DIM)
        vec[:64] = rng.normal(size=64)
        offsets[au_id] = vec
    return offsets


def default_head_offsets() -> dict[str, np.ndarray]:
    """Unit-scale pose-dim offset per head-motion label."""
    offsets = {}
    for i, name in enumerate(sorted(HEAD_MOTIONS)):
        rng = np.random.default_rng(np.random.SeedSequence([_HEAD_OFFSET_SEED, i]))
        vec = np.zeros(MOTION_DIM)
        vec[64:] = rng.normal(size=MOTION_DIM - 64)
        offsets[name] = vec
    return offsets


@dataclass(frozen=True)
class SynthConfig:
    seed: int = 0
    frames: int = 120
    lag: int = 5
    gain: float = 0.5
    noise_std: float = 0.05
    habit_dims: tuple[int, ...] = tuple(range(56, 64))
    habit_amp: float = 0.6
    habit_period: float = 240.0
    smooth_window: int = 5
    walk_step: float = 0.08
    au_offset_scale: float = 0.35
    head_offset_scale: float = 0.3
    fps: float = DEFAULT_FPS
    emotion_offsets: dict[str, np.ndarray] | None = None  # None -> default catalog

    def __post_init__(self):
        if self.frames < 1:
            raise ConfigInvalid(f"frames must be >= 1, got {self.frames}")
        if not 0 <= self.lag < self.frames:
            raise ConfigInvalid(f"lag {self.lag} outside [0, {self.frames})")
        if self.gain < 0:
            raise ConfigInvalid(f"gain must be >= 0, got {self.gain}")
        if self.noise_std < 0:
            raise ConfigInvalid(f"noise_std must be >= 0, got {self.noise_std}")
        if self.habit_amp < 0:
            raise ConfigInvalid(f"habit_amp must be >= 0, got {self.habit_amp}")
        if self.habit_period <= 0:
            raise ConfigInvalid(f"habit_period must be > 0, got {self.habit_period}")
        if self.smooth_window < 1:
            raise ConfigInvalid(f"smooth_window must be >= 1, got {self.smooth_window}")
        if self.walk_step < 0:
            raise ConfigInvalid(f"walk_step must be >= 0, got {self.walk_step}")
        if self.au_offset_scale < 0:
            raise ConfigInvalid(
                f"au_offset_scale must be >= 0, got {self.au_offset_scale}"
            )
        if self.head_offset_scale < 0:
            raise ConfigInvalid(
                f"head_offset_scale must be >= 0, got {self.head_offset_scale}"
            )
        dims = tuple(int(d) for d in self.habit_dims)
        if any(not 0 <= d < MOTION_DIM for d in dims):
            raise ConfigInvalid(f"habit_dims must lie in [0, {MOTION_DIM}), got {dims}")
        if len(set(dims)) != len(dims):
            raise ConfigInvalid("habit_dims must be distinct")
        object.__setattr__(self, "habit_dims", dims)
        if self.emotion_offsets is not None:
            for name, vec in self.emotion_offsets.items():
                if name not in EMOTIONS:
                    raise ConfigInvalid(f"offset for unknown emotion {name!r}")
                arr = np.asarray(vec, dtype=np.float64)
                if arr.shape != (MOTION_DIM,):
                    raise ConfigInvalid(
                        f"offset for {name!r} must have shape ({MOTION_DIM},)"
                    )

    def offsets(self) -> dict[str, np.ndarray]:
        if self.emotion_offsets is None:
            return default_emotion_offsets()
        out = dict(default_emotion_offsets())
        for name, vec in self.emotion_offsets.items():
            out[name] = np.asarray(vec, dtype=np.float64)
        return out


def annotation_offset(cfg: SynthConfig, annotation: ListenerAnnotation) -> np.ndarray:
    """The constant 70-dim motion offset a full annotation describes."""
    vec = cfg.offsets()[annotation.emotion].copy()
    au_catalog = default_au_offsets()
    for au in annotation.aus:
        vec += cfg.au_offset_scale * (au.level / 5.0) * au_catalog[au.id]
    if annotation.head_motion is not None:
        vec += cfg.head_offset_scale * default_head_offsets()[annotation.head_motion]
    return vec


@dataclass
class SpeakerListenerPair:
    speaker: MotionSequence
    listener: MotionSequence
    acoustic: np.ndarray  # (T, 45)
    annotation: ListenerAnnotation
    text_seed: int
    pair_seed: int


def random_annotation(rnd: random.Random) -> ListenerAnnotation:
    """Draw an annotation from the closed catalogs. Draw order is frozen:
    emotion, AU count, AU ids, per-AU levels, head-motion coin, head motion."""
    emotion = rnd.choice(sorted(EMOTIONS))
    n_aus = rnd.randint(1, 2)
    ids = rnd.sample(sorted(AU_CATALOG), n_aus)
    aus = [AuActivation(i, rnd.randint(1, 5)) for i in ids]
    head = rnd.choice(sorted(HEAD_MOTIONS)) if rnd.random() < 0.5 else None
    return ListenerAnnotation(emotion=emotion, aus=aus, head_motion=head)


def _smooth_trailing(walk: np.ndarray, window: int) -> np.ndarray:
    """Trailing moving average; early rows average over the prefix only."""
    csum = np.cumsum(walk, axis=0)
    out = np.empty_like(walk)
    t = walk.shape[0]
    for i in range(min(window, t)):
        out[i] = csum[i] / (i + 1)
    if t > window:
        out[window:] = (csum[window:] - csum[:-window]) / window
    return out


def gen_pair(cfg: SynthConfig) -> SpeakerListenerPair:
    """One triple, fully determined by cfg (cfg.seed included).

    Draw order is frozen: annotation seed, text seed, walk steps, habit
    phases, listener noise, acoustic noise.
    """
    rng = np.random.default_rng(cfg.seed)
    ann_seed = int(rng.integers(2**31))
    text_seed = int(rng.integers(2**31))
    annotation = random_annotation(random.Random(ann_seed))

    steps = rng.normal(size=(cfg.frames, MOTION_DIM)) * cfg.walk_step
    speaker = _smooth_trailing(np.cumsum(steps, axis=0), cfg.smooth_window)

    phases = rng.uniform(0.0, 2.0 * math.pi, size=len(cfg.habit_dims))
    noise = rng.normal(size=(cfg.frames, MOTION_DIM)) * cfg.noise_std
    acoustic_noise = rng.normal(size=(cfg.frames, ACOUSTIC_DIM)) * cfg.noise_std

    lagged = speaker[np.maximum(np.arange(cfg.frames) - cfg.lag, 0)]
    listener = cfg.gain * lagged + noise
    listener += annotation_offset(cfg, annotation)
    tgrid = np.arange(cfg.frames)
    for j, d in enumerate(cfg.habit_dims):
        listener[:, d] += cfg.habit_amp * np.sin(
            2.0 * math.pi * tgrid / cfg.habit_period + phases[j]
        )

    acoustic = speaker @ acoustic_projection() + acoustic_noise
    return SpeakerListenerPair(
        speaker=MotionSequence(frames=speaker, fps=cfg.fps),
        listener=MotionSequence(frames=listener, fps=cfg.fps),
        acoustic=acoustic,
        annotation=annotation,
        text_seed=text_seed,
        pair_seed=cfg.seed,
    )


def habit_signal(cfg: SynthConfig, pair_seed: int) -> np.ndarray:
    """The pure habit sinusoid of the pair seeded pair_seed, (frames, 70).
    Re-derives the phases by replaying the pair's frozen draw order."""
    rng = np.random.default_rng(pair_seed)
    rng.integers(2**31)  # annotation seed slot
    rng.integers(2**31)  # text seed slot
    rng.normal(size=(cfg.frames, MOTION_DIM))  # walk steps slot
    phases = rng.uniform(0.0, 2.0 * math.pi, size=len(cfg.habit_dims))
    out = np.zeros((cfg.frames, MOTION_DIM))
    tgrid = np.arange(cfg.frames)
    for j, d in enumerate(cfg.habit_dims):
        out[:, d] = cfg.habit_amp * np.sin(
            2.0 * math.pi * tgrid / cfg.habit_period + phases[j]
        )
    return out


# -- dataset persistence ---------------------------------------------------------


def pair_seed_for(dataset_seed: int, index: int) -> int:
    return int(np.random.SeedSequence([dataset_seed, index]).generate_state(1)[0])


def _config_json(cfg: SynthConfig) -> dict:
    d = {
        "seed": cfg.seed,
        "frames": cfg.frames,
        "lag": cfg.lag,
        "gain": cfg.gain,
        "noise_std": cfg.noise_std,
        "habit_dims": list(cfg.habit_dims),
        "habit_amp": cfg.habit_amp,
        "habit_period": cfg.habit_period,
        "smooth_window": cfg.smooth_window,
        "walk_step": cfg.walk_step,
        "au_offset_scale": cfg.au_offset_scale,
        "head_offset_scale": cfg.head_offset_scale,
        "fps": cfg.fps,
    }
    if cfg.emotion_offsets is None:
        d["emotion_offsets"] = None
    else:
        d["emotion_offsets"] = {
            k: np.asarray(v, dtype=np.float64).tolist()
            for k, v in cfg.emotion_offsets.items()
        }
    return d


def config_from_json(d: dict) -> SynthConfig:
    d = dict(d)
    if d.get("emotion_offsets") is not None:
        d["emotion_offsets"] = {
            k: np.asarray(v, dtype=np.float64) for k, v in d["emotion_offsets"].items()
        }
    d["habit_dims"] = tuple(d.get("habit_dims", ()))
    return SynthConfig(**d)


def _write_pair(out: Path, index: int, pair: SpeakerListenerPair) -> dict:
    stem = out / "pairs" / f"{index:04d}"
    save_binary(pair.speaker, f"{stem}.spk.bin")
    save_binary(pair.listener, f"{stem}.lst.bin")
    save_feature_binary(pair.acoustic, pair.speaker.fps, f"{stem}.aud.bin")
    return {
        "pair": index,
        "pair_seed": pair.pair_seed,
        "text_seed": pair.text_seed,
        "annotation": pair.annotation.to_json_dict(),
    }


def gen_dataset(
    cfg: SynthConfig,
    n_pairs: int,
    out_dir,
    seed: int | None = None,
    n_workers: int | None = None,
) -> dict:
    """Write pairs/NNNN.{spk,lst,aud}.bin + annotations.jsonl + manifest.json.

    cfg is a template: each pair runs with cfg.seed replaced by a per-pair
    seed derived from (seed, index), all recorded in the manifest so any
    pair regenerates bit-identically. Pairs are independent, so generation
    may fan out over n_workers threads; file contents do not depend on
    scheduling.
    """
    if n_pairs < 1:
        raise ConfigInvalid(f"n_pairs must be >= 1, got {n_pairs}")
    if seed is None:
        seed = cfg.seed
    out = Path(out_dir)
    (out / "pairs").mkdir(parents=True, exist_ok=True)

    seeds = [pair_seed_for(seed, i) for i in range(n_pairs)]

    def build(i: int) -> dict:
        return _write_pair(out, i, gen_pair(replace(cfg, seed=seeds[i])))

    if n_workers and n_workers > 1:
        with ThreadPoolExecutor(max_workers=n_workers) as pool:
            lines = list(pool.map(build, range(n_pairs)))
    else:
        lines = [build(i) for i in range(n_pairs)]

    with open(out / "annotations.jsonl", "w", encoding="utf-8") as fh:
        for line in lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")

    manifest = {
        "n_pairs": n_pairs,
        "seed": seed,
        "pair_seeds": seeds,
        "config": _config_json(cfg),
        "layout": "pairs/NNNN.{spk,lst,aud}.bin",
    }
    with open(out / "manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)
    return manifest


@dataclass
class PairRecord:
    index: int
    pair_seed: int
    text_seed: int
    speaker: MotionSequence
    listener: MotionSequence
    acoustic: np.ndarray
    annotation: ListenerAnnotation


def load_dataset(dataset_dir) -> list[PairRecord]:
    root = Path(dataset_dir)
    manifest_path = root / "manifest.json"
    if not manifest_path.is_file():
        raise DatasetMissing(f"no manifest.json under {root}")
    with open(manifest_path, "r", encoding="utf-8") as fh:
        manifest = json.load(fh)
    records = []
    with open(root / "annotations.jsonl", "r", encoding="utf-8") as fh:
        for raw in fh:
            line = json.loads(raw)
            i = line["pair"]
            stem = root / "pairs" / f"{i:04d}"
            spk = load_binary(f"{stem}.spk.bin")
            lst = load_binary(f"{stem}.lst.bin")
            aud, _ = load_feature_binary(f"{stem}.aud.bin")
            records.append(
                PairRecord(
                    index=i,
                    pair_seed=line["pair_seed"],
                    text_seed=line["text_seed"],
                    speaker=spk,
                    listener=lst,
                    acoustic=aud,
                    annotation=ListenerAnnotation.from_json_dict(line["annotation"]),
                )
            )
    if len(records) != manifest["n_pairs"]:
        raise DatasetMissing(
            f"manifest lists {manifest['n_pairs']} pairs, found {len(records)}"
        )
    return records


def load_manifest(dataset_dir) -> dict:
    path = Path(dataset_dir) / "manifest.json"
    if not path.is_file():
        raise DatasetMissing(f"no manifest.json under {dataset_dir}")
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
