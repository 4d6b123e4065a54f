import csv
import json

import numpy as np
import pytest

from lobmix import (
    DatasetManifest,
    LabeledDataset,
    exponential_counts,
    write_cifar10_binary,
)
from lobmix.cli import ExperimentConfig, config_hash, load_config, main


@pytest.fixture()
def cifar_file(tmp_path):
    """Tiny synthetic file in the 3073-byte record format, 100 examples/class."""
    rng = np.random.default_rng(0)
    labels = np.repeat(np.arange(10), 100)
    pixels = rng.integers(0, 256, size=(labels.size, 3072), dtype=np.uint8)
    ds = LabeledDataset(pixels.astype(np.float64) / 255.0, labels, 10)
    path = tmp_path / "batch.bin"
    write_cifar10_binary(ds, path)
    return path


def base_config(out_dir=None):
    return {
        "dataset": {
            "kind": "synth",
            "classes": 6,
            "dim": 6,
            "separation": 3.0,
            "base_per_class": 120,
            "test_per_class": 30,
        },
        "profile": {"kind": "exponential", "rho": 10, "n_max": 80},
        "train": {
            "epochs": 3,
            "batches_per_epoch": 5,
            "batch_size": 32,
            "lr": 0.4,
            "lr_decay_epochs": [2],
            "lr_decay_factor": 0.1,
            "alpha": 1.0,
            "strategy": "mixup",
        },
        "seed": 0,
        "out_dir": out_dir,
    }


class TestBuildLt:
    def test_counts_match_profile(self, tmp_path, cifar_file, capsys):
        out = tmp_path / "lt"
        code = main([
            "build-lt", "--base", str(cifar_file), "--rho", "10", "--profile", "exp",
            "--seed", "4", "--out", str(out),
        ])
        assert code == 0
        manifest = DatasetManifest.load(out / "manifest.json")
        assert manifest.counts == tuple(exponential_counts(100, 10, 10))
        printed = capsys.readouterr().out
        assert "imbalance ratio: 10" in printed
        info = json.loads((out / "build_info.json").read_text())
        assert "config_sha256" in info

    def test_rho_one_balanced(self, tmp_path, cifar_file):
        out = tmp_path / "flat"
        assert main(["build-lt", "--base", str(cifar_file), "--rho", "1", "--out", str(out)]) == 0
        manifest = DatasetManifest.load(out / "manifest.json")
        assert manifest.counts == (100,) * 10

    def test_missing_base(self, tmp_path, capsys):
        code = main(["build-lt", "--base", str(tmp_path / "nope.bin"), "--out", str(tmp_path / "x")])
        assert code != 0
        assert "error" in capsys.readouterr().err

    def test_synth_base(self, tmp_path):
        out = tmp_path / "synth"
        code = main([
            "build-lt", "--synth-classes", "5", "--synth-dim", "4", "--synth-per-class", "60",
            "--profile", "step", "--rho", "4", "--out", str(out),
        ])
        assert code == 0
        manifest = DatasetManifest.load(out / "manifest.json")
        assert manifest.counts == (60, 60, 15, 15, 15)

    def test_manifest_seed_reproducible(self, tmp_path, cifar_file):
        outs = [tmp_path / "a", tmp_path / "b"]
        for out in outs:
            main(["build-lt", "--base", str(cifar_file), "--rho", "5", "--seed", "7", "--out", str(out)])
        assert (outs[0] / "manifest.json").read_bytes() == (outs[1] / "manifest.json").read_bytes()


class TestAnalyze:
    @pytest.fixture()
    def manifest_path(self, tmp_path, cifar_file):
        out = tmp_path / "lt"
        main(["build-lt", "--base", str(cifar_file), "--rho", "10", "--seed", "1", "--out", str(out)])
        return out / "manifest.json"

    def test_all_combos(self, tmp_path, manifest_path):
        out = tmp_path / "occ"
        code = main([
            "analyze", "--manifest", str(manifest_path), "--samples", "20000",
            "--seed", "2", "--out", str(out),
        ])
        assert code == 0
        for name in ("ib_ib", "ib_cb", "cb_cb"):
            assert (out / f"occurrence_{name}.csv").exists()
            report = json.loads((out / f"occurrence_{name}.json").read_text())
            assert set(report) == {"combo", "counts", "analytic", "empirical"}
            assert report["empirical"]["sample_count"] == 20000
        with (out / "occurrence_summary.csv").open() as fh:
            rows = {row["combo"]: row for row in csv.DictReader(fh)}
        assert float(rows["ib-ib"]["balance_ratio_analytic"]) == 10.0
        assert float(rows["cb-cb"]["balance_ratio_analytic"]) == 1.0
        # exact-arithmetic oracle on this manifest's counts
        from fractions import Fraction

        counts = DatasetManifest.load(manifest_path).counts
        total = sum(counts)
        gamma = [(Fraction(n, total) + Fraction(1, 10)) / 2 for n in counts]
        expected = float(max(gamma) / min(gamma))
        assert float(rows["ib-cb"]["balance_ratio_analytic"]) == pytest.approx(expected, rel=1e-5)
        assert abs(float(rows["cb-cb"]["balance_ratio_empirical"]) - 1.0) < 0.2

    def test_analytic_only(self, tmp_path, manifest_path):
        out = tmp_path / "occ0"
        assert main(["analyze", "--manifest", str(manifest_path), "--samples", "0", "--out", str(out)]) == 0
        with (out / "occurrence_ib_ib.csv").open() as fh:
            rows = list(csv.DictReader(fh))
        assert all(row["gamma_empirical"] == "" for row in rows)

    def test_single_combo(self, tmp_path, manifest_path):
        out = tmp_path / "occ1"
        assert main([
            "analyze", "--manifest", str(manifest_path), "--combo", "cb-cb",
            "--samples", "1000", "--out", str(out),
        ]) == 0
        assert (out / "occurrence_cb_cb.csv").exists()
        assert not (out / "occurrence_ib_ib.csv").exists()


class TestTrainCommand:
    def test_run_directory_contents(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(base_config()))
        out = tmp_path / "run"
        assert main(["train", "--config", str(config_path), "--out", str(out)]) == 0
        for name in ("config.json", "manifest.json", "history.csv", "eval.json", "DONE"):
            assert (out / name).exists()
        evaluation = json.loads((out / "eval.json").read_text())
        assert set(evaluation["group_accuracy"]) == {"head", "medium", "tail"}
        resolved = json.loads((out / "config.json").read_text())
        expected = config_hash({k: v for k, v in resolved.items() if k != "out_dir"})
        assert (out / "DONE").read_text().strip() == expected

    def test_rerun_byte_identical(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(base_config()))
        outs = [tmp_path / "r1", tmp_path / "r2"]
        for out in outs:
            assert main(["train", "--config", str(config_path), "--seed", "9", "--out", str(out)]) == 0
        for name in ("history.csv", "eval.json", "manifest.json"):
            assert (outs[0] / name).read_bytes() == (outs[1] / name).read_bytes()

    def test_all_strategies_from_one_config(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(base_config()))
        for strategy in ("erm", "mixup", "lob", "deferred"):
            out = tmp_path / f"run_{strategy}"
            assert main([
                "train", "--config", str(config_path), "--strategy", strategy, "--out", str(out),
            ]) == 0

    def test_deferred_past_end_rejected(self, tmp_path, capsys):
        cfg = base_config()
        cfg["train"]["strategy"] = "deferred"
        cfg["train"]["defer_epoch"] = 3  # epochs == 3
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(cfg))
        assert main(["train", "--config", str(config_path), "--out", str(tmp_path / "x")]) != 0
        assert "defer" in capsys.readouterr().err

    def test_missing_out_dir_rejected(self, tmp_path, capsys):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(base_config()))
        assert main(["train", "--config", str(config_path)]) != 0
        assert "output directory" in capsys.readouterr().err


class TestReport:
    def _run_many(self, tmp_path, seeds, strategies):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(base_config()))
        dirs = []
        for strategy in strategies:
            for seed in seeds:
                out = tmp_path / f"{strategy}_{seed}"
                assert main([
                    "train", "--config", str(config_path), "--seed", str(seed),
                    "--strategy", strategy, "--out", str(out),
                ]) == 0
                dirs.append(out)
        return dirs

    def test_two_strategies_two_rows(self, tmp_path, capsys):
        dirs = self._run_many(tmp_path, seeds=range(3), strategies=("mixup", "lob"))
        out_csv = tmp_path / "aggregate.csv"
        assert main(["report", *map(str, dirs), "--out", str(out_csv)]) == 0
        with out_csv.open() as fh:
            rows = list(csv.DictReader(fh))
        assert [row["strategy"] for row in rows] == ["lob", "mixup"]
        assert all(row["runs"] == "3" for row in rows)

    def test_single_run_zero_std(self, tmp_path):
        dirs = self._run_many(tmp_path, seeds=(0,), strategies=("erm",))
        out_csv = tmp_path / "aggregate.csv"
        assert main(["report", *map(str, dirs), "--out", str(out_csv)]) == 0
        with out_csv.open() as fh:
            row = next(csv.DictReader(fh))
        assert row["balanced_std"] == "0"

    def test_mismatched_family_rejected(self, tmp_path, capsys):
        dirs = self._run_many(tmp_path, seeds=(0,), strategies=("erm",))
        other = base_config()
        other["train"]["lr"] = 0.123
        config_path = tmp_path / "other.json"
        config_path.write_text(json.dumps(other))
        out = tmp_path / "other_run"
        assert main(["train", "--config", str(config_path), "--out", str(out)]) == 0
        assert main(["report", str(dirs[0]), str(out)]) != 0
        assert "incompatible" in capsys.readouterr().err

    def test_incomplete_runs_ignored(self, tmp_path):
        dirs = self._run_many(tmp_path, seeds=(0, 1), strategies=("erm",))
        (dirs[1] / "DONE").unlink()
        out_csv = tmp_path / "aggregate.csv"
        assert main(["report", *map(str, dirs), "--out", str(out_csv)]) == 0
        with out_csv.open() as fh:
            row = next(csv.DictReader(fh))
        assert row["runs"] == "1"

    def test_no_completed_runs(self, tmp_path, capsys):
        empty = tmp_path / "empty"
        empty.mkdir()
        assert main(["report", str(empty)]) != 0
        assert "no completed runs" in capsys.readouterr().err


class TestConfigRoundTrip:
    def test_parse_serialize_parse_identity(self, tmp_path):
        config_path = tmp_path / "config.json"
        config_path.write_text(json.dumps(base_config(out_dir="runs/x")))
        cfg = load_config(config_path)
        again_path = tmp_path / "again.json"
        again_path.write_text(json.dumps(cfg.to_dict()))
        assert load_config(again_path) == cfg
        assert ExperimentConfig.from_dict(cfg.to_dict()) == cfg

    def test_family_hash_ignores_run_identity(self):
        a = ExperimentConfig.from_dict(base_config())
        b_dict = base_config(out_dir="elsewhere")
        b_dict["seed"] = 99
        b_dict["train"]["strategy"] = "lob"
        b = ExperimentConfig.from_dict(b_dict)
        assert config_hash(a.family_dict()) == config_hash(b.family_dict())

    def test_unknown_train_key_rejected(self):
        bad = base_config()
        bad["train"]["typo_field"] = 1
        with pytest.raises(ValueError, match="typo_field"):
            ExperimentConfig.from_dict(bad)
