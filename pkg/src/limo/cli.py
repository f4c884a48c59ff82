"""Command line surface.

One JSON config file drives every subcommand; every field has a default
and the effective (post-default) config is echoed into a run manifest
beside each command's outputs, together with content hashes of the
inputs, so identical config + seeds reproduce identical artifacts.

    limo synth    --config cfg.json --out DIR
    limo train    --config cfg.json --data DIR --out DIR
    limo generate --config cfg.json --checkpoint FILE --data DIR --out DIR
    limo evaluate --pred DIR --gt DIR --out DIR
    limo annotate --in FILE.jsonl --out FILE.jsonl

Exit codes: 0 ok, 2 config error, 3 data error, 4 numeric failure.
CL_THREADS caps worker parallelism where a module supports it.
"""

from __future__ import annotations

import argparse
import copy
import hashlib
import json
import os
import sys
from pathlib import Path

from .errors import ConfigError, ConfigInvalid, DataError, DatasetMissing, NumericError
from .estimator import ListenerMotionGenerator
from .metrics import MetricReport, evaluate_sets
from .motion import load_binary, save_binary
from .synthdata import config_from_json, gen_dataset, load_dataset
from .textprior import ListenerAnnotation, parse_text_prior, render_text_prior

DEFAULT_CONFIG: dict = {
    "model": {
        "feature_width": 64,
        "decoder_layers": 4,
        "decoder_heads": 4,
        "ffn_width": 256,
        "audio_layers": 2,
        "audio_heads": 4,
    },
    "schedule": {
        "diffusion_steps": 200,
        "beta_start": 1e-4,
        "beta_end": 0.02,
    },
    "training": {
        "learning_rate": 1e-4,
        "weight_decay": 0.01,
        "batch_size": 8,
        "epochs": 5,
        "seed": 0,
    },
    "segment_len": 60,
    "motion_window": 5,
    "boundary_overlap": 10,
    "synth": {
        "seed": 0,
        "n_pairs": 8,
        "frames": 120,
        "lag": 5,
        "gain": 0.5,
        "noise_std": 0.05,
        "habit_dims": list(range(56, 64)),
        "habit_amp": 0.6,
        "habit_period": 240.0,
        "smooth_window": 5,
        "walk_step": 0.08,
        "fps": 30.0,
    },
    "generation": {
        "master_seed": 0,
        "use_motion_prior": True,
        "share_boundary_noise": True,
        "uniform_weights": False,
        "zero_condition": False,
        "limit": None,
    },
}


def _merge_config(base: dict, override: dict, path: str = "") -> dict:
    out = copy.deepcopy(base)
    for key, val in override.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigInvalid(f"unknown config key {where!r}")
        if isinstance(base[key], dict):
            if not isinstance(val, dict):
                raise ConfigInvalid(f"{where!r} must be an object")
            out[key] = _merge_config(base[key], val, where)
        else:
            out[key] = val
    return out


def load_config(path: str | None) -> dict:
    if path is None:
        return copy.deepcopy(DEFAULT_CONFIG)
    p = Path(path)
    if not p.is_file():
        raise ConfigInvalid(f"config file not found: {path}")
    try:
        with open(p, "r", encoding="utf-8") as fh:
            user = json.load(fh)
    except json.JSONDecodeError as err:
        raise ConfigInvalid(f"config is not valid JSON: {err}") from None
    if not isinstance(user, dict):
        raise ConfigInvalid("config root must be a JSON object")
    return _merge_config(DEFAULT_CONFIG, user)


def _canonical(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"))


def _sha256_text(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def _sha256_file(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def dir_digest(root: Path) -> str:
    """Order-independent content hash: sha256 over sorted (relpath, digest)."""
    h = hashlib.sha256()
    for p in sorted(root.rglob("*")):
        if p.is_file():
            h.update(str(p.relative_to(root)).encode("utf-8"))
            h.update(_sha256_file(p).encode("ascii"))
    return h.hexdigest()


def _write_run_manifest(out_dir: Path, command: str, config: dict, **extra) -> None:
    manifest = {
        "command": command,
        "config": config,
        "config_sha256": _sha256_text(_canonical(config)),
    }
    manifest.update(extra)
    with open(out_dir / "run_manifest.json", "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, sort_keys=True, indent=1)


def _estimator_from(config: dict) -> ListenerMotionGenerator:
    m, s, t = config["model"], config["schedule"], config["training"]
    return ListenerMotionGenerator(
        feature_width=m["feature_width"],
        decoder_layers=m["decoder_layers"],
        decoder_heads=m["decoder_heads"],
        ffn_width=m["ffn_width"],
        audio_layers=m["audio_layers"],
        audio_heads=m["audio_heads"],
        diffusion_steps=s["diffusion_steps"],
        beta_start=s["beta_start"],
        beta_end=s["beta_end"],
        segment_len=config["segment_len"],
        motion_window=config["motion_window"],
        boundary_overlap=config["boundary_overlap"],
        learning_rate=t["learning_rate"],
        weight_decay=t["weight_decay"],
        batch_size=t["batch_size"],
        epochs=t["epochs"],
        seed=t["seed"],
    )


def _n_workers() -> int:
    raw = os.environ.get("CL_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ConfigInvalid(f"CL_THREADS must be an integer, got {raw!r}") from None
    if n < 1:
        raise ConfigInvalid(f"CL_THREADS must be >= 1, got {n}")
    return n


# -- subcommands -------------------------------------------------------------------


def cmd_synth(args) -> int:
    config = load_config(args.config)
    sc = config["synth"]
    n_pairs = sc["n_pairs"]
    cfg = config_from_json({k: v for k, v in sc.items() if k != "n_pairs"})
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    gen_dataset(cfg, n_pairs, out, seed=sc["seed"], n_workers=_n_workers())
    _write_run_manifest(
        out,
        "synth",
        config,
        seeds={"dataset_seed": sc["seed"]},
        outputs={"dataset_manifest_sha256": _sha256_file(out / "manifest.json")},
    )
    print(f"synth: wrote {n_pairs} pairs to {out}")
    return 0


def cmd_train(args) -> int:
    config = load_config(args.config)
    data_dir = Path(args.data)
    records = load_dataset(data_dir)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    est = _estimator_from(config)
    est.fit(records)
    ckpt_path = out / "checkpoint.clck"
    est.save_checkpoint(ckpt_path)

    loss_path = out / "loss.csv"
    with open(loss_path, "w", encoding="utf-8") as fh:
        fh.write("epoch,loss\n")
        for epoch, val in enumerate(est.epoch_losses_):
            fh.write(f"{epoch},{val:.17g}\n")

    _write_run_manifest(
        out,
        "train",
        config,
        seeds={"training_seed": config["training"]["seed"]},
        inputs={"dataset": str(data_dir), "dataset_sha256": dir_digest(data_dir)},
        outputs={
            "checkpoint_sha256": _sha256_file(ckpt_path),
            "n_samples": est.n_samples_seen_,
        },
    )
    print(f"train: {est.n_samples_seen_} segments, checkpoint at {ckpt_path}")
    return 0


def cmd_generate(args) -> int:
    config = load_config(args.config)
    gc = config["generation"]
    data_dir = Path(args.data)
    ckpt = Path(args.checkpoint)
    if not ckpt.is_file():
        raise ConfigInvalid(f"checkpoint not found: {ckpt}")
    records = load_dataset(data_dir)
    limit = gc["limit"]
    if limit is not None:
        records = records[: int(limit)]
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    est = _estimator_from(config).load_checkpoint(ckpt)
    master_seed = gc["master_seed"] if args.seed is None else args.seed
    preds = est.predict(
        records,
        master_seed=master_seed,
        use_motion_prior=gc["use_motion_prior"],
        share_boundary_noise=gc["share_boundary_noise"],
        uniform_weights=gc["uniform_weights"],
        zero_condition=gc["zero_condition"],
    )
    for rec, seq in zip(records, preds):
        save_binary(seq, out / f"{rec.index:04d}.gen.bin")

    _write_run_manifest(
        out,
        "generate",
        config,
        seeds={"master_seed": master_seed},
        inputs={
            "dataset": str(data_dir),
            "dataset_sha256": dir_digest(data_dir),
            "checkpoint_sha256": _sha256_file(ckpt),
        },
        outputs={"n_generated": len(preds)},
        ablations={
            "use_motion_prior": gc["use_motion_prior"],
            "share_boundary_noise": gc["share_boundary_noise"],
            "uniform_weights": gc["uniform_weights"],
            "zero_condition": gc["zero_condition"],
        },
    )
    print(f"generate: {len(preds)} sequences to {out}")
    return 0


def _load_predictions(pred_dir: Path):
    """A generated directory (*.gen.bin) or a dataset directory (its
    listener tracks) both work as the prediction side."""
    if (pred_dir / "pairs").is_dir():
        return [(r.index, r.listener) for r in load_dataset(pred_dir)]
    files = sorted(pred_dir.glob("*.gen.bin"))
    if not files:
        raise DatasetMissing(f"no *.gen.bin files and no pairs/ under {pred_dir}")
    return [(int(p.name.split(".")[0]), load_binary(p)) for p in files]


def cmd_evaluate(args) -> int:
    pred_dir, gt_dir = Path(args.pred), Path(args.gt)
    preds = _load_predictions(pred_dir)
    gt_records = {r.index: r for r in load_dataset(gt_dir)}
    missing = [i for i, _ in preds if i not in gt_records]
    if missing:
        raise DatasetMissing(f"prediction indices {missing} absent from {gt_dir}")

    pred_seqs = [seq for _, seq in preds]
    gt_seqs = [gt_records[i].listener for i, _ in preds]
    spk_seqs = [gt_records[i].speaker for i, _ in preds]
    report = evaluate_sets(pred_seqs, gt_seqs, spk_seqs)

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "metrics.json", "w", encoding="utf-8") as fh:
        json.dump(
            {"values": report.values, "metadata": report.metadata},
            fh,
            sort_keys=True,
            indent=1,
        )
    with open(out / "metrics.csv", "w", encoding="utf-8") as fh:
        fh.write(",".join(MetricReport.COLUMNS) + "\n")
        fh.write(",".join(f"{report.values[c]:.17g}" for c in MetricReport.COLUMNS) + "\n")

    _write_run_manifest(
        out,
        "evaluate",
        {"pred": str(pred_dir), "gt": str(gt_dir)},
        inputs={
            "pred_sha256": dir_digest(pred_dir),
            "gt_sha256": dir_digest(gt_dir),
        },
        outputs={"n_pairs": report.metadata["n_pairs"]},
    )
    print("evaluate: " + ", ".join(f"{k}={report.values[k]:.6g}" for k in ("fd_exp", "rtlcc_exp", "fid_exp")))
    return 0


def cmd_annotate(args) -> int:
    src = Path(args.infile)
    if not src.is_file():
        raise DatasetMissing(f"annotation file not found: {src}")
    out_lines = []
    with open(src, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh):
            raw = raw.strip()
            if not raw:
                continue
            try:
                line = json.loads(raw)
            except json.JSONDecodeError as err:
                raise DataError(f"{src}:{lineno + 1}: bad JSON: {err}") from None
            ann_dict = line.get("annotation", line)
            ann = ListenerAnnotation.from_json_dict(ann_dict)
            seed = int(line.get("text_seed", 0))
            text = render_text_prior(ann, seed)
            if parse_text_prior(text) != ann:
                raise NumericError(
                    f"{src}:{lineno + 1}: rendered text failed to invert"
                )
            keep = dict(line) if "annotation" in line else {"annotation": ann_dict}
            keep["text"] = text
            out_lines.append(keep)
    with open(args.out, "w", encoding="utf-8") as fh:
        for line in out_lines:
            fh.write(json.dumps(line, sort_keys=True) + "\n")
    print(f"annotate: {len(out_lines)} lines to {args.out}")
    return 0


# -- entry point -------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="limo", description="listener motion generation pipeline"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    p.add_argument("--config", default=None, help="JSON config file")
    p.add_argument("--out", required=True, help="dataset output directory")
    p.set_defaults(fn=cmd_synth)

    p = sub.add_parser("train", help="train a model on a dataset")
    p.add_argument("--config", default=None)
    p.add_argument("--data", required=True, help="dataset directory")
    p.add_argument("--out", required=True, help="run output directory")
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("generate", help="generate listener motion")
    p.add_argument("--config", default=None)
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--data", required=True, help="conditions source dataset")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int, default=None, help="override master seed")
    p.set_defaults(fn=cmd_generate)

    p = sub.add_parser("evaluate", help="metric suite over generated motion")
    p.add_argument("--pred", required=True, help="generated dir or dataset dir")
    p.add_argument("--gt", required=True, help="ground-truth dataset dir")
    p.add_argument("--out", required=True)
    p.set_defaults(fn=cmd_evaluate)

    p = sub.add_parser("annotate", help="render text priors for annotations")
    p.add_argument("--in", dest="infile", required=True, help="JSONL input")
    p.add_argument("--out", required=True, help="JSONL output")
    p.set_defaults(fn=cmd_annotate)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return 2
    except DataError as err:
        print(f"data error: {err}", file=sys.stderr)
        return 3
    except NumericError as err:
        print(f"numeric error: {err}", file=sys.stderr)
        return 4


if __name__ == "__main__":
    sys.exit(main())
