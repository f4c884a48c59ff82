import json

import numpy as np
import pytest

from limo.cli import DEFAULT_CONFIG, load_config, main
from limo.errors import ConfigInvalid
from limo.motion import load_binary
from limo.nn.checkpoint import load_checkpoint
from limo.textprior import parse_text_prior

# clips must cover the 120-frame evaluation window; everything else tiny
TINY = {
    "model": {
        "feature_width": 12,
        "decoder_layers": 1,
        "decoder_heads": 2,
        "ffn_width": 16,
        "audio_layers": 1,
        "audio_heads": 2,
    },
    "schedule": {"diffusion_steps": 10},
    "training": {"epochs": 1, "batch_size": 4, "learning_rate": 1e-3, "seed": 0},
    "segment_len": 60,
    "boundary_overlap": 10,
    "synth": {"n_pairs": 3, "frames": 120, "seed": 5},
    "generation": {"limit": 2},
}


def write_config(tmp_path, overrides=None, name="cfg.json"):
    cfg = overrides if overrides is not None else TINY
    path = tmp_path / name
    path.write_text(json.dumps(cfg))
    return str(path)


class TestConfig:
    def test_defaults_when_no_file(self):
        cfg = load_config(None)
        assert cfg == DEFAULT_CONFIG
        assert cfg is not DEFAULT_CONFIG

    def test_override_merges(self, tmp_path):
        cfg = load_config(write_config(tmp_path))
        assert cfg["model"]["feature_width"] == 12
        assert cfg["model"]["decoder_heads"] == 2
        assert cfg["training"]["weight_decay"] == 0.01  # untouched default
        assert cfg["segment_len"] == 60

    def test_unknown_key_rejected(self, tmp_path):
        with pytest.raises(ConfigInvalid, match="typo_field"):
            load_config(write_config(tmp_path, {"typo_field": 1}))
        with pytest.raises(ConfigInvalid, match="model.depht"):
            load_config(write_config(tmp_path, {"model": {"depht": 3}}))

    def test_missing_file(self):
        with pytest.raises(ConfigInvalid):
            load_config("/nonexistent/cfg.json")

    def test_bad_json(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text("{not json")
        with pytest.raises(ConfigInvalid):
            load_config(str(path))


class TestExitCodes:
    def test_config_error_is_2(self, tmp_path):
        rc = main(
            ["synth", "--config", "/nonexistent/cfg.json", "--out", str(tmp_path / "d")]
        )
        assert rc == 2

    def test_data_error_is_3(self, tmp_path):
        cfg = write_config(tmp_path)
        rc = main(
            ["train", "--config", cfg, "--data", str(tmp_path / "missing"),
             "--out", str(tmp_path / "run")]
        )
        assert rc == 3

    def test_checkpoint_mismatch_is_2(self, tmp_path):
        cfg = write_config(tmp_path)
        data = tmp_path / "data"
        run = tmp_path / "run"
        assert main(["synth", "--config", cfg, "--out", str(data)]) == 0
        assert main(["train", "--config", cfg, "--data", str(data), "--out", str(run)]) == 0
        wider = dict(TINY)
        wider["model"] = dict(TINY["model"], feature_width=16)
        cfg2 = write_config(tmp_path, wider, name="cfg2.json")
        rc = main(
            ["generate", "--config", cfg2, "--checkpoint", str(run / "checkpoint.clck"),
             "--data", str(data), "--out", str(tmp_path / "gen")]
        )
        assert rc == 2


@pytest.fixture(scope="module")
def pipeline(tmp_path_factory):
    root = tmp_path_factory.mktemp("pipe")
    cfg = write_config(root)
    data, run, gen, ev = (str(root / n) for n in ("data", "run", "gen", "eval"))
    assert main(["synth", "--config", cfg, "--out", data]) == 0
    assert main(["train", "--config", cfg, "--data", data, "--out", run]) == 0
    assert main(
        ["generate", "--config", cfg, "--checkpoint", f"{run}/checkpoint.clck",
         "--data", data, "--out", gen]
    ) == 0
    assert main(["evaluate", "--pred", gen, "--gt", data, "--out", ev]) == 0
    return root


class TestPipeline:
    def test_artifacts_exist(self, pipeline):
        assert (pipeline / "data" / "manifest.json").is_file()
        assert (pipeline / "run" / "checkpoint.clck").is_file()
        assert (pipeline / "run" / "loss.csv").is_file()
        assert (pipeline / "gen" / "0000.gen.bin").is_file()
        assert (pipeline / "gen" / "0001.gen.bin").is_file()
        # generation.limit = 2 out of 3 pairs
        assert not (pipeline / "gen" / "0002.gen.bin").exists()
        for sub in ("data", "run", "gen", "eval"):
            assert (pipeline / sub / "run_manifest.json").is_file(), sub

    def test_loss_csv_shape(self, pipeline):
        lines = (pipeline / "run" / "loss.csv").read_text().splitlines()
        assert lines[0] == "epoch,loss"
        assert len(lines) == 2  # one epoch
        epoch, loss = lines[1].split(",")
        assert epoch == "0" and np.isfinite(float(loss))

    def test_generated_shapes(self, pipeline):
        seq = load_binary(pipeline / "gen" / "0000.gen.bin")
        assert seq.frames.shape == (120, 70)
        assert np.all(np.isfinite(seq.frames))

    def test_metrics_outputs(self, pipeline):
        blob = json.loads((pipeline / "eval" / "metrics.json").read_text())
        assert set(blob["values"]) >= {"fd_exp", "rtlcc_exp", "fid_exp", "vd_pose"}
        assert all(np.isfinite(v) for v in blob["values"].values())
        lines = (pipeline / "eval" / "metrics.csv").read_text().splitlines()
        assert lines[0].startswith("fd_exp,fd_angle,fd_trans")
        assert len(lines) == 2

    def test_manifests_carry_hashes_no_timestamps(self, pipeline):
        for sub in ("data", "run", "gen", "eval"):
            blob = json.loads((pipeline / sub / "run_manifest.json").read_text())
            assert "config_sha256" in blob
            assert "timestamp" not in json.dumps(blob).lower()
        train_m = json.loads((pipeline / "run" / "run_manifest.json").read_text())
        assert train_m["inputs"]["dataset_sha256"]
        assert train_m["outputs"]["checkpoint_sha256"]


class TestSelfEvaluate:
    def test_dataset_vs_itself_is_zero(self, tmp_path):
        cfg = write_config(tmp_path)
        data = str(tmp_path / "data")
        ev = str(tmp_path / "eval")
        assert main(["synth", "--config", cfg, "--out", data]) == 0
        assert main(["evaluate", "--pred", data, "--gt", data, "--out", ev]) == 0
        blob = json.loads((tmp_path / "eval" / "metrics.json").read_text())
        assert blob["values"]["fd_exp"] == 0.0
        assert blob["values"]["fd_angle"] == 0.0
        assert blob["values"]["rtlcc_exp"] == 0.0
        assert blob["values"]["rwtlcc_pose"] == 0.0
        assert blob["values"]["fid_exp"] == pytest.approx(0.0, abs=1e-8)


class TestEpochsZero:
    def test_checkpoint_equals_init_and_header_only_csv(self, tmp_path):
        zero = dict(TINY)
        zero["training"] = dict(TINY["training"], epochs=0)
        cfg = write_config(tmp_path, zero)
        data, run = str(tmp_path / "data"), str(tmp_path / "run")
        assert main(["synth", "--config", cfg, "--out", data]) == 0
        assert main(["train", "--config", cfg, "--data", data, "--out", run]) == 0

        assert (tmp_path / "run" / "loss.csv").read_text() == "epoch,loss\n"

        from limo.cli import _estimator_from, load_config

        est = _estimator_from(load_config(cfg))
        est._build()
        state = load_checkpoint(tmp_path / "run" / "checkpoint.clck")
        for p in est.networks_.parameters():
            np.testing.assert_array_equal(state[p.name], p.data)


class TestAnnotate:
    def test_renders_and_inverts(self, tmp_path):
        src = tmp_path / "ann.jsonl"
        lines = [
            {"annotation": {"emotion": "happy", "aus": [{"id": 12, "level": 3}],
                            "head_motion": None}, "text_seed": 23},
            {"emotion": "sad", "aus": [{"id": 4, "level": 1}], "head_motion": "nod"},
        ]
        src.write_text("\n".join(json.dumps(l) for l in lines) + "\n")
        out = tmp_path / "texts.jsonl"
        assert main(["annotate", "--in", str(src), "--out", str(out)]) == 0
        got = [json.loads(l) for l in out.read_text().splitlines()]
        assert got[0]["text"] == (
            "A person seems joyful and listens with fully raised lip corners."
        )
        ann = parse_text_prior(got[1]["text"])
        assert ann.emotion == "sad" and ann.head_motion == "nod"

    def test_missing_file_is_3(self, tmp_path):
        rc = main(["annotate", "--in", str(tmp_path / "no.jsonl"),
                   "--out", str(tmp_path / "o.jsonl")])
        assert rc == 3
