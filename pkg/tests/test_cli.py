import filecmp
import json
from pathlib import Path

import numpy as np
import pytest
import yaml

from destrike.cli import ExperimentConfig, CliError, main
from destrike.imaging import load_image


def tree_bytes(root: Path) -> dict[str, bytes]:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


def write_config(path: Path, dataset_root: Path, out_dir: Path, **overrides) -> Path:
    doc = {
        "manifest": str(dataset_root / "manifest.json"),
        "output_dir": str(out_dir),
        "archs": ["simple_cnn"],
        "train_split": "partition-0",
        "val_split": "partition-1",
        "test_split": "partition-1",
        "epochs": 1,
        "batch_size": 4,
        "repetitions": 1,
        "run_seed": 21,
    }
    doc.update(overrides)
    path.write_text(yaml.safe_dump(doc), encoding="utf-8")
    return path


class TestSynth:
    def test_partition_counts(self, clean_words_dir, tmp_path):
        rc = main(["synth", "--clean-dir", str(clean_words_dir), "--out",
                   str(tmp_path / "d"), "--partitions", "3", "--seed", "5"])
        assert rc == 0
        for k in range(3):
            pngs = list((tmp_path / "d" / f"partition-{k}" / "struck").glob("*.png"))
            assert len(pngs) == 10
        assert (tmp_path / "d" / "manifest.json").is_file()

    def test_byte_identical_reruns(self, clean_words_dir, tmp_path):
        for name in ("a", "b"):
            rc = main(["synth", "--clean-dir", str(clean_words_dir), "--out",
                       str(tmp_path / name), "--partitions", "2", "--seed", "9"])
            assert rc == 0
        assert tree_bytes(tmp_path / "a") == tree_bytes(tmp_path / "b")

    def test_different_seed_differs(self, clean_words_dir, tmp_path):
        main(["synth", "--clean-dir", str(clean_words_dir), "--out",
              str(tmp_path / "a"), "--partitions", "1", "--seed", "1"])
        main(["synth", "--clean-dir", str(clean_words_dir), "--out",
              str(tmp_path / "b"), "--partitions", "1", "--seed", "2"])
        assert tree_bytes(tmp_path / "a") != tree_bytes(tmp_path / "b")

    def test_empty_input_dir_is_validation_error(self, tmp_path):
        (tmp_path / "empty").mkdir()
        rc = main(["synth", "--clean-dir", str(tmp_path / "empty"),
                   "--out", str(tmp_path / "out")])
        assert rc == 1


class TestExperimentConfig:
    def test_all_problems_reported_at_once(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(yaml.safe_dump({
            "manifest": str(tmp_path / "missing.json"),
            "output_dir": str(tmp_path / "out"),
            "archs": ["simple_cnn", "vgg"],
            "epochs": 0,
        }))
        with pytest.raises(CliError) as err:
            ExperimentConfig.load(cfg)
        msg = str(err.value)
        assert "vgg" in msg and "epochs" in msg and "missing.json" in msg

    def test_unknown_keys_rejected(self, tmp_path):
        cfg = tmp_path / "c.yaml"
        cfg.write_text(yaml.safe_dump({"manifest": "x", "output_dir": "y", "epoch": 3}))
        with pytest.raises(CliError, match="epoch"):
            ExperimentConfig.load(cfg)

    def test_relative_manifest_resolves_against_config(self, dataset_root, tmp_path):
        import shutil

        shutil.copy(dataset_root / "manifest.json", tmp_path / "manifest.json")
        cfg = tmp_path / "c.yaml"
        cfg.write_text(yaml.safe_dump({
            "manifest": "manifest.json", "output_dir": str(tmp_path / "out"),
        }))
        loaded = ExperimentConfig.load(cfg)
        assert Path(loaded.manifest).is_absolute()


@pytest.fixture(scope="module")
def experiment(dataset_root, tmp_path_factory):
    base = tmp_path_factory.mktemp("exp")
    out = base / "runs"
    cfg = write_config(base / "config.yaml", dataset_root, out, repetitions=2)
    rc = main(["train", "--config", str(cfg)])
    assert rc == 0
    return out


class TestTrainEvaluateReport:

    def test_run_directories_and_index(self, experiment):
        index = json.loads((experiment / "index.json").read_text())
        assert sorted(index) == ["simple_cnn"]
        assert len(index["simple_cnn"]) == 2
        for rep_dir in index["simple_cnn"]:
            assert (Path(rep_dir) / "best.ckpt").is_file()
            assert (Path(rep_dir) / "curve.csv").is_file()
        assert (experiment / "experiment.yaml").is_file()

    def test_refuses_existing_dir_without_force(self, experiment, dataset_root, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", dataset_root, experiment)
        assert main(["train", "--config", str(cfg)]) == 1
        # resolved config is round-trippable: rerunning --force reproduces
        assert main(["train", "--config", str(experiment / "experiment.yaml"),
                     "--force"]) == 0

    def test_evaluate_writes_reports(self, experiment, dataset_root):
        rc = main(["evaluate", "--experiment", str(experiment),
                   "--manifest", str(dataset_root / "manifest.json"),
                   "--split", "partition-1", "--identity-baseline"])
        assert rc == 0
        eval_dir = experiment / "evaluation"
        summary = (eval_dir / "summary.csv").read_text().splitlines()
        assert summary[0] == "model,mean_f1,std_f1,mean_rmse,std_rmse,n"
        models = {line.split(",")[0] for line in summary[1:]}
        assert models == {"simple_cnn", "identity-baseline"}
        assert (eval_dir / "table.txt").is_file()
        assert list(eval_dir.glob("simple_cnn-rep*-records.csv"))

    def test_missing_checkpoint_skipped(self, experiment, dataset_root, tmp_path):
        index_path = experiment / "index.json"
        index = json.loads(index_path.read_text())
        index["simple_cnn"].append(str(tmp_path / "ghost"))
        index_path.write_text(json.dumps(index))
        rc = main(["evaluate", "--experiment", str(experiment),
                   "--manifest", str(dataset_root / "manifest.json"),
                   "--split", "partition-1"])
        assert rc == 0

    def test_report_prints_table(self, experiment, capsys):
        rc = main(["report", "--experiment", str(experiment)])
        assert rc == 0
        out = capsys.readouterr().out
        assert "Model" in out and "simple_cnn" in out

    def test_clean_preserves_dimensions(self, experiment, dataset_root, tmp_path):
        index = json.loads((experiment / "index.json").read_text())
        ckpt = Path(index["simple_cnn"][0]) / "best.ckpt"
        struck = next((dataset_root / "partition-0" / "struck").glob("*.png"))
        out_png = tmp_path / "cleaned.png"
        rc = main(["clean", "--checkpoint", str(ckpt),
                   "--input", str(struck), "--output", str(out_png)])
        assert rc == 0
        assert load_image(out_png).shape == load_image(struck).shape
        first = out_png.read_bytes()
        main(["clean", "--checkpoint", str(ckpt),
              "--input", str(struck), "--output", str(out_png)])
        assert out_png.read_bytes() == first  # idempotent overwrite

    def test_mean_image_single_checkpoint_matches_clean(self, experiment, dataset_root, tmp_path):
        index = json.loads((experiment / "index.json").read_text())
        only_rep = index["simple_cnn"][0]
        trimmed = dict(index)
        trimmed["simple_cnn"] = [only_rep]
        exp2 = tmp_path / "exp2"
        exp2.mkdir()
        (exp2 / "index.json").write_text(json.dumps(trimmed))
        struck = next((dataset_root / "partition-0" / "struck").glob("*.png"))
        a, b = tmp_path / "mean.png", tmp_path / "clean.png"
        assert main(["mean-image", "--experiment", str(exp2), "--arch", "simple_cnn",
                     "--input", str(struck), "--output", str(a)]) == 0
        assert main(["clean", "--checkpoint", str(Path(only_rep) / "best.ckpt"),
                     "--input", str(struck), "--output", str(b)]) == 0
        assert filecmp.cmp(a, b, shallow=False)

    def test_mean_image_unknown_arch(self, experiment, tmp_path):
        rc = main(["mean-image", "--experiment", str(experiment), "--arch", "unet",
                   "--input", "x.png", "--output", str(tmp_path / "o.png")])
        assert rc == 1


class TestDeskProfile:
    def test_desk_profile_prefers_shallow(self, dataset_root, tmp_path):
        out = tmp_path / "desk-runs"
        cfg = write_config(tmp_path / "c.yaml", dataset_root, out,
                           archs=["simple_cnn", "generator"])
        rc = main(["train", "--config", str(cfg), "--profile", "desk"])
        assert rc == 0
        index = json.loads((out / "index.json").read_text())
        assert sorted(index) == ["shallow"]

    def test_desk_profile_rejects_parallel(self, dataset_root, tmp_path):
        cfg = write_config(tmp_path / "c.yaml", dataset_root, tmp_path / "o")
        assert main(["train", "--config", str(cfg), "--profile", "desk",
                     "--parallel", "2"]) == 1


class TestParallelTraining:
    def test_parallel_reps_match_sequential(self, dataset_root, tmp_path):
        seq_out = tmp_path / "seq"
        par_out = tmp_path / "par"
        cfg_seq = write_config(tmp_path / "s.yaml", dataset_root, seq_out, repetitions=2)
        cfg_par = write_config(tmp_path / "p.yaml", dataset_root, par_out, repetitions=2)
        assert main(["train", "--config", str(cfg_seq)]) == 0
        assert main(["train", "--config", str(cfg_par), "--parallel", "2"]) == 0
        for k in range(2):
            a = (seq_out / "simple_cnn" / f"rep-{k}" / "curve.csv").read_text()
            b = (par_out / "simple_cnn" / f"rep-{k}" / "curve.csv").read_text()
            assert a == b
