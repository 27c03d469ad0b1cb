import json
from pathlib import Path

import numpy as np
import pytest

from eegintent.cli import config_hash, default_run_config, load_run_config, main

TINY_CONFIG = {
    "synth": {
        "n_trials_per_class": 10,  # seeds 0 and 1 keep every cell >= 2 trials
        "seed": 0,
    },
    "model": {
        "encoder_dims": [16, 8],
        "class_head_dims": [8, 4],
        "domain_head_dims": [8, 2],
        "epochs": 8,
        "batch_size": 8,
        "seed": 2,
    },
    "split": {"test_fraction": 0.3, "seed": 1},
    "report": {"seeds": 2},
}


@pytest.fixture()
def tiny_config_path(tmp_path):
    path = tmp_path / "config.json"
    path.write_text(json.dumps(TINY_CONFIG))
    return path


def run(*argv):
    return main(list(argv))


class TestConfig:
    def test_defaults_complete(self):
        cfg = default_run_config()
        assert set(cfg) == {"out_dir", "synth", "welch", "bands", "model",
                            "split", "stats", "report"}

    def test_overrides_merge(self, tiny_config_path):
        cfg = load_run_config(str(tiny_config_path))
        assert cfg["synth"]["n_trials_per_class"] == 10
        assert cfg["synth"]["misarticulation_rate"] == 0.3  # default retained
        assert cfg["model"]["epochs"] == 8

    def test_unknown_key_rejected(self, tmp_path):
        path = tmp_path / "bad.json"
        path.write_text(json.dumps({"synht": {}}))
        assert run("synth", "--config", str(path), "--out", str(tmp_path)) == 1

    def test_hash_stable_and_sensitive(self, tiny_config_path):
        cfg = load_run_config(str(tiny_config_path))
        again = load_run_config(str(tiny_config_path))
        assert config_hash(cfg) == config_hash(again)
        cfg["synth"]["seed"] += 1
        assert config_hash(cfg) != config_hash(again)


class TestPipeline:
    def test_full_chain(self, tmp_path, tiny_config_path, capsys):
        out = tmp_path / "run"
        cfg = ["--config", str(tiny_config_path)]

        assert run("synth", *cfg, "--out", str(out)) == 0
        manifest = out / "dataset.json"
        assert manifest.exists() and (out / "dataset.bin").exists()

        features = out / "features.bin"
        assert run("features", *cfg, "--dataset", str(manifest),
                   "--out", str(features)) == 0

        assert run("stats", *cfg, "--features", str(features),
                   "--out", str(out / "stats")) == 0
        for band in ("delta", "theta", "alpha", "beta", "gamma"):
            assert (out / "stats" / f"stats_{band}.csv").exists()
            assert (out / "stats" / f"topomap_{band}.svg").exists()

        model = out / "model.bin"
        assert run("train", *cfg, "--features", str(features),
                   "--mode", "multitask", "--out", str(model)) == 0
        assert model.exists()
        history = model.with_suffix(".history.csv")
        assert history.exists()
        lines = history.read_text().strip().split("\n")
        assert lines[1] == "epoch,l_class,l_domain,l_mmd,l_total"
        assert len(lines) == 2 + TINY_CONFIG["model"]["epochs"]

        report = out / "eval.json"
        assert run("eval", *cfg, "--features", str(features),
                   "--model", str(model), "--out", str(report)) == 0
        payload = json.loads(report.read_text())
        assert {"accuracy", "f1_all", "f1_correct", "f1_misarticulated",
                "confusion", "mode", "config_hash"} <= set(payload)

        printed = capsys.readouterr().out
        assert "accuracy" in printed

    def test_config_hash_embedded_everywhere(self, tmp_path, tiny_config_path):
        out = tmp_path / "run"
        cfg = ["--config", str(tiny_config_path)]
        chash = config_hash(load_run_config(str(tiny_config_path)))

        run("synth", *cfg, "--out", str(out))
        assert json.loads((out / "dataset.json").read_text())["config_hash"] == chash

        features = out / "features.bin"
        run("features", *cfg, "--dataset", str(out / "dataset.json"),
            "--out", str(features))
        header = json.loads(features.read_bytes().split(b"\n", 1)[0])
        assert header["config_hash"] == chash

        run("stats", *cfg, "--features", str(features), "--out", str(out / "stats"))
        csv_text = (out / "stats" / "stats_delta.csv").read_text()
        assert chash in csv_text
        svg_text = (out / "stats" / "topomap_delta.svg").read_text()
        assert chash in svg_text

    def test_seed_flag_changes_dataset(self, tmp_path, tiny_config_path):
        out_a, out_b = tmp_path / "a", tmp_path / "b"
        cfg = ["--config", str(tiny_config_path)]
        run("synth", *cfg, "--out", str(out_a), "--seed", "1")
        run("synth", *cfg, "--out", str(out_b), "--seed", "2")
        blob_a = (out_a / "dataset.bin").read_bytes()
        blob_b = (out_b / "dataset.bin").read_bytes()
        assert blob_a != blob_b


class TestExitCodes:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main(["frobnicate"])
        assert err.value.code == 2

    def test_no_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as err:
            main([])
        assert err.value.code == 2

    def test_missing_input_file_exits_1(self, tmp_path, capsys):
        code = run("features", "--dataset", str(tmp_path / "none.json"),
                   "--out", str(tmp_path / "f.bin"))
        assert code == 1
        err = capsys.readouterr().err
        assert "features" in err and "MissingFile" in err

    def test_feature_dim_mismatch_names_shape_error(self, tmp_path,
                                                    tiny_config_path, capsys):
        out = tmp_path / "run"
        cfg = ["--config", str(tiny_config_path)]
        run("synth", *cfg, "--out", str(out))
        features = out / "features.bin"
        run("features", *cfg, "--dataset", str(out / "dataset.json"),
            "--out", str(features))
        model = out / "model.bin"
        run("train", *cfg, "--features", str(features), "--out", str(model))

        # same dataset, coarser Welch grid -> different bin count F
        alt = tmp_path / "alt.json"
        alt_cfg = dict(TINY_CONFIG)
        alt_cfg["welch"] = {"segment_length": 256, "overlap": 128}
        alt.write_text(json.dumps(alt_cfg))
        alt_features = out / "alt_features.bin"
        assert run("features", "--config", str(alt), "--dataset",
                   str(out / "dataset.json"), "--out", str(alt_features)) == 0

        code = run("eval", *cfg, "--features", str(alt_features),
                   "--model", str(model), "--out", str(out / "eval.json"))
        assert code == 1
        err = capsys.readouterr().err
        assert "ShapeMismatch" in err

    def test_cell_too_small_named(self, tmp_path, capsys):
        cfg_path = tmp_path / "c.json"
        cfg_path.write_text(json.dumps({
            **TINY_CONFIG,
            "synth": {"n_trials_per_class": 2, "seed": 3},
        }))
        out = tmp_path / "run"
        run("synth", "--config", str(cfg_path), "--out", str(out))
        features = out / "features.bin"
        run("features", "--config", str(cfg_path),
            "--dataset", str(out / "dataset.json"), "--out", str(features))
        code = run("train", "--config", str(cfg_path), "--features", str(features),
                   "--out", str(out / "m.bin"))
        assert code == 1
        assert "CellTooSmall" in capsys.readouterr().err


class TestReport:
    def test_report_structure_and_determinism(self, tmp_path, tiny_config_path):
        cfg = ["--config", str(tiny_config_path)]
        out_a, out_b = tmp_path / "ra", tmp_path / "rb"
        assert run("report", *cfg, "--out", str(out_a)) == 0
        assert run("report", *cfg, "--out", str(out_b)) == 0

        csv_a = (out_a / "report.csv").read_text()
        lines = csv_a.strip().split("\n")
        # hash comment + header + 2 seeds x 2 modes + 2 mean rows
        assert len(lines) == 2 + 4 + 2
        assert lines[1].startswith("seed,mode,accuracy")
        assert lines[-1].startswith("mean,multitask")

        payload = json.loads((out_a / "report.json").read_text())
        assert payload["n_seeds"] == 2
        assert len(payload["per_seed"]) == 2
        assert {"baseline", "multitask"} <= set(payload["mean"])

        table = (out_a / "comparison.txt").read_text()
        assert "baseline" in table and "multitask" in table

        for name in ("report.csv", "report.json", "comparison.txt"):
            assert (out_a / name).read_bytes() == (out_b / name).read_bytes()
        for svg in sorted((out_a / "topomaps").glob("*.svg")):
            twin = out_b / "topomaps" / svg.name
            assert svg.read_bytes() == twin.read_bytes()

    def test_seeds_flag_overrides(self, tmp_path, tiny_config_path):
        out = tmp_path / "r"
        assert run("report", "--config", str(tiny_config_path),
                   "--out", str(out), "--seeds", "1") == 0
        payload = json.loads((out / "report.json").read_text())
        assert payload["n_seeds"] == 1
