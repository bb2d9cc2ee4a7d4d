import json

import numpy as np
import pytest

from stc import data
from stc.cli import main


TINY_CONFIG = {
    "epochs": 2,
    "batch_size": 4,
    "seed": 3,
    "num_classes": 4,
    "channels": [6, 8, 10],
}


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    d = tmp_path_factory.mktemp("data")
    rc = main(
        ["gen", "--out", str(d), "--simple", "8", "--complex", "4", "--eval", "3",
         "--seed", "1"]
    )
    assert rc == 0
    return d


@pytest.fixture(scope="module")
def run_dir(dataset_dir, tmp_path_factory):
    out = tmp_path_factory.mktemp("run")
    cfg = out / "config.json"
    cfg.write_text(json.dumps(TINY_CONFIG))
    rc = main(
        ["run", "--data", str(dataset_dir), "--out", str(out), "--config", str(cfg)]
    )
    assert rc == 0
    return out


class TestGen:
    def test_counts_and_manifest(self, dataset_dir):
        manifest = data.read_dataset(dataset_dir)
        assert len(manifest.split("simple")) == 8
        assert len(manifest.split("complex")) == 4
        assert len(manifest.split("eval")) == 3

    def test_default_counts(self, tmp_path):
        rc = main(["gen", "--out", str(tmp_path), "--seed", "4"])
        assert rc == 0
        manifest = data.read_dataset(tmp_path)
        assert len(manifest.split("simple")) == 200
        assert len(manifest.split("complex")) == 100
        assert len(manifest.split("eval")) == 50

    def test_zero_simple_rejected(self, tmp_path, capsys):
        rc = main(["gen", "--out", str(tmp_path), "--simple", "0"])
        assert rc != 0
        assert "simple" in capsys.readouterr().err

    def test_same_seed_byte_identical(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for d in (a, b):
            assert main(
                ["gen", "--out", str(d), "--simple", "3", "--complex", "2",
                 "--eval", "1", "--seed", "7"]
            ) == 0
        for rel in sorted(p.relative_to(a) for p in a.rglob("*") if p.is_file()):
            assert (a / rel).read_bytes() == (b / rel).read_bytes(), rel


class TestSaliencyCommand:
    def test_materializes_maps_and_is_idempotent(self, tmp_path):
        d = tmp_path / "data"
        assert main(["gen", "--out", str(d), "--simple", "3", "--complex", "0",
                     "--eval", "0", "--seed", "2"]) == 0
        assert main(["saliency", "--data", str(d)]) == 0
        manifest = data.read_dataset(d)
        for rec in manifest.split("simple").records:
            assert rec.saliency is not None
            assert manifest.load_saliency(rec).shape == (64, 64)
        snapshot = {
            p: p.read_bytes() for p in d.rglob("*") if p.is_file()
        }
        assert main(["saliency", "--data", str(d)]) == 0
        for p, blob in snapshot.items():
            assert p.read_bytes() == blob


class TestRun:
    def test_outputs_exist(self, run_dir):
        for stage in ("initial", "enhanced", "powerful"):
            assert (run_dir / f"checkpoint_{stage}.stcp").is_file()
            assert (run_dir / f"checkpoint_{stage}.json").is_file()
        assert (run_dir / "report.json").is_file()
        assert (run_dir / "report.csv").is_file()

    def test_report_stages_in_order(self, run_dir):
        doc = json.loads((run_dir / "report.json").read_text())
        assert [s["stage"] for s in doc["stages"]] == ["initial", "enhanced", "powerful"]

    def test_missing_manifest_nonzero_exit(self, tmp_path, capsys):
        rc = main(["run", "--data", str(tmp_path / "nope"), "--out", str(tmp_path)])
        assert rc != 0
        assert "manifest" in capsys.readouterr().err

    def test_unknown_config_key_rejected(self, dataset_dir, tmp_path, capsys):
        cfg = tmp_path / "bad.json"
        cfg.write_text(json.dumps({"epochs": 1, "bogus_knob": 3}))
        rc = main(
            ["run", "--data", str(dataset_dir), "--out", str(tmp_path), "--config", str(cfg)]
        )
        assert rc != 0
        assert "bogus_knob" in capsys.readouterr().err


class TestEval:
    def test_prints_consistent_table(self, dataset_dir, run_dir, capsys):
        ckpt = run_dir / "checkpoint_powerful.stcp"
        assert main(["eval", "--checkpoint", str(ckpt), "--data", str(dataset_dir)]) == 0
        out1 = capsys.readouterr().out
        assert main(["eval", "--checkpoint", str(ckpt), "--data", str(dataset_dir)]) == 0
        out2 = capsys.readouterr().out
        assert out1 == out2

        lines = out1.strip().splitlines()
        assert lines[0].startswith("class")
        class_rows = lines[1:-1]
        assert len(class_rows) == 5  # C+1 rows including background
        ious = [float(r.split()[1]) for r in class_rows]
        miou = float(lines[-1].split()[1])
        assert abs(miou - np.mean(ious)) < 1e-4

    def test_corrupt_checkpoint_nonzero_exit(self, dataset_dir, tmp_path, capsys):
        bad = tmp_path / "bad.stcp"
        bad.write_bytes(b"JUNKJUNKJUNK")
        rc = main(["eval", "--checkpoint", str(bad), "--data", str(dataset_dir)])
        assert rc != 0
        assert "magic" in capsys.readouterr().err


class TestStageCommand:
    def test_initial_stage_writes_checkpoint(self, dataset_dir, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(TINY_CONFIG))
        out = tmp_path / "stage_out"
        rc = main(
            ["stage", "--data", str(dataset_dir), "--out", str(out),
             "--stage", "initial", "--config", str(cfg)]
        )
        assert rc == 0
        assert (out / "checkpoint_initial.stcp").is_file()

    def test_enhanced_requires_params(self, dataset_dir, tmp_path, capsys):
        out = tmp_path / "stage_out"
        rc = main(
            ["stage", "--data", str(dataset_dir), "--out", str(out), "--stage", "enhanced"]
        )
        assert rc != 0
        assert "--params" in capsys.readouterr().err

    def test_enhanced_from_initial_checkpoint(self, dataset_dir, tmp_path):
        cfg = tmp_path / "config.json"
        cfg.write_text(json.dumps(TINY_CONFIG))
        out = tmp_path / "stage_out"
        assert main(
            ["stage", "--data", str(dataset_dir), "--out", str(out),
             "--stage", "initial", "--config", str(cfg)]
        ) == 0
        rc = main(
            ["stage", "--data", str(dataset_dir), "--out", str(out),
             "--stage", "enhanced", "--config", str(cfg),
             "--params", str(out / "checkpoint_initial.stcp")]
        )
        assert rc == 0
        assert (out / "checkpoint_enhanced.stcp").is_file()
