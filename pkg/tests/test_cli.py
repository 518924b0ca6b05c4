import json
import os

import numpy as np
import pytest

from aecrack import io as aeio
from aecrack.cli import main

DATA_ARGS = ["synth", "--per-class", "4", "--seed", "7", "--duration", "2048"]


def run(argv, capsys=None):
    code = main([str(a) for a in argv])
    if capsys is None:
        return code, None
    return code, capsys.readouterr()


def summary_pairs(text):
    out = {}
    for line in text.strip().splitlines():
        if "=" in line.split()[0] or "command=" in line:
            for tok in line.split():
                if "=" in tok:
                    k, v = tok.split("=", 1)
                    out[k] = v
    return out


@pytest.fixture(scope="module")
def dataset_dir(tmp_path_factory):
    path = tmp_path_factory.mktemp("data") / "d"
    assert main(DATA_ARGS + ["--out", str(path)]) == 0
    return path


@pytest.fixture(scope="module")
def feature_file(tmp_path_factory, dataset_dir):
    out = tmp_path_factory.mktemp("feats") / "f.gamq"
    code = main(["features", "--data", str(dataset_dir), "--out", str(out),
                 "--lambda", "all", "--ned", "64", "--se-window", "256",
                 "--se-hop", "128", "--stft-window", "256", "--stft-hop", "64",
                 "--fit-stats"])
    assert code == 0
    return out


@pytest.fixture(scope="module")
def model_file(tmp_path_factory, feature_file):
    out = tmp_path_factory.mktemp("model") / "m.json"
    hist = out.with_suffix(".csv")
    code = main(["train", "--features", str(feature_file), "--lambda", "5",
                 "--d-lstm", "8", "--epochs", "6", "--batch", "8",
                 "--lr", "0.02", "--out", str(out), "--history", str(hist)])
    assert code == 0
    return out


class TestSynth:
    def test_counts_and_manifest(self, dataset_dir):
        manifest = aeio.load_manifest(dataset_dir)
        assert len(manifest["events"]) == 12
        labels = [e["label"] for e in manifest["events"]]
        assert sorted(set(labels)) == ["mixed", "shear", "tensile"]

    def test_rerun_byte_identical(self, tmp_path, dataset_dir):
        other = tmp_path / "d2"
        assert main(DATA_ARGS + ["--out", str(other)]) == 0
        for name in sorted(os.listdir(dataset_dir)):
            a = (dataset_dir / name).read_bytes()
            b = (other / name).read_bytes()
            assert a == b, name

    def test_zero_per_class_is_usage_error(self, tmp_path):
        code = main(["synth", "--per-class", "0", "--out", str(tmp_path / "x")])
        assert code == 2

    def test_seed_echoed(self, tmp_path, capsys):
        code, cap = run(["synth", "--per-class", "1", "--seed", "3",
                         "--duration", "1024", "--out", tmp_path / "d3"], capsys)
        assert code == 0
        assert summary_pairs(cap.out)["seed"] == "3"

    def test_env_seed_fallback(self, tmp_path, capsys, monkeypatch):
        monkeypatch.setenv("AECD_SEED", "55")
        code, cap = run(["synth", "--per-class", "1", "--duration", "1024",
                         "--out", tmp_path / "d4"], capsys)
        assert code == 0
        assert summary_pairs(cap.out)["seed"] == "55"


class TestFeatures:
    def test_full_superset(self, feature_file):
        data, labels, lam = aeio.load_features(feature_file)
        assert lam == 0
        assert data.shape == (12, 5, 64)
        assert set(labels.tolist()) == {0, 1, 2}
        stats = aeio.load_stats(str(feature_file) + ".stats.json")
        assert set(stats) == {"signal", "if", "se", "sk", "sln"}

    def test_lambda_one_rows(self, tmp_path, dataset_dir):
        out = tmp_path / "l1.gamq"
        code = main(["features", "--data", str(dataset_dir), "--out", str(out),
                     "--lambda", "1", "--ned", "32", "--se-window", "256",
                     "--se-hop", "128", "--stft-window", "256", "--stft-hop", "64"])
        assert code == 0
        data, _, lam = aeio.load_features(out)
        assert lam == 1
        assert data.shape[1] == 1

    def test_deterministic_bytes(self, tmp_path, dataset_dir, feature_file):
        out = tmp_path / "again.gamq"
        code = main(["features", "--data", str(dataset_dir), "--out", str(out),
                     "--lambda", "all", "--ned", "64", "--se-window", "256",
                     "--se-hop", "128", "--stft-window", "256", "--stft-hop", "64"])
        assert code == 0
        assert out.read_bytes() == feature_file.read_bytes()

    def test_threads_match_single(self, tmp_path, dataset_dir, feature_file):
        out = tmp_path / "mt.gamq"
        code = main(["features", "--data", str(dataset_dir), "--out", str(out),
                     "--lambda", "all", "--ned", "64", "--se-window", "256",
                     "--se-hop", "128", "--stft-window", "256", "--stft-hop", "64",
                     "--threads", "2"])
        assert code == 0
        assert out.read_bytes() == feature_file.read_bytes()

    def test_corrupt_waveform_skipped(self, tmp_path, dataset_dir, capsys):
        import shutil

        broken = tmp_path / "broken"
        shutil.copytree(dataset_dir, broken)
        manifest = aeio.load_manifest(broken)
        victim = broken / manifest["events"][2]["file"]
        victim.write_bytes(b"GARBAGE!")
        out = tmp_path / "skipped.gamq"
        code, cap = run(["features", "--data", broken, "--out", out,
                         "--lambda", "1", "--ned", "32", "--se-window", "256",
                         "--se-hop", "128", "--stft-window", "256",
                         "--stft-hop", "64"], capsys)
        assert code == 0
        pairs = summary_pairs(cap.out)
        assert pairs["skipped"] == "1"
        assert pairs["events"] == "11"
        assert "skipping event 2" in cap.err

    def test_missing_dataset_is_io_error(self, tmp_path):
        code = main(["features", "--data", str(tmp_path / "nope"),
                     "--out", str(tmp_path / "f.gamq")])
        assert code == 4


class TestTrainEvalClassify:
    def test_train_artifacts(self, model_file):
        theta, stats = aeio.load_model(model_file)
        assert theta.lambda_id == 5
        assert theta.d_lstm == 8
        assert stats is not None
        history = aeio.load_history_csv(model_file.with_suffix(".csv"))
        assert len(history["epoch"]) <= 6

    def test_eval_consistency(self, feature_file, model_file, capsys):
        code, cap = run(["eval", "--features", feature_file,
                         "--model", model_file], capsys)
        assert code == 0
        pairs = summary_pairs(cap.out)
        assert float(pairs["accuracy"]) == pytest.approx(
            int(pairs["trace"]) / int(pairs["total"]))

    def test_classify_output(self, tmp_path, feature_file, model_file):
        out = tmp_path / "preds.csv"
        code = main(["classify", "--features", str(feature_file),
                     "--model", str(model_file), "--out", str(out)])
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "id,label,p_tensile,p_shear,p_mixed"
        assert len(lines) == 13
        probs = np.array([[float(v) for v in ln.split(",")[2:]] for ln in lines[1:]])
        assert np.abs(probs.sum(axis=1) - 1.0).max() < 1e-9

    def test_ned_mismatch_exits_3(self, tmp_path, dataset_dir, model_file, capsys):
        small = tmp_path / "small.gamq"
        assert main(["features", "--data", str(dataset_dir), "--out", str(small),
                     "--lambda", "5", "--ned", "32", "--se-window", "256",
                     "--se-hop", "128", "--stft-window", "256",
                     "--stft-hop", "64"]) == 0
        code, cap = run(["classify", "--features", small, "--model", model_file,
                         "--out", tmp_path / "p.csv"], capsys)
        assert code == 3
        assert "32" in cap.err and "64" in cap.err

    def test_train_determinism(self, tmp_path, feature_file, model_file):
        again = tmp_path / "m2.json"
        hist = tmp_path / "h2.csv"
        code = main(["train", "--features", str(feature_file), "--lambda", "5",
                     "--d-lstm", "8", "--epochs", "6", "--batch", "8",
                     "--lr", "0.02", "--out", str(again), "--history", str(hist)])
        assert code == 0
        assert again.read_bytes() == model_file.read_bytes()
        assert hist.read_bytes() == model_file.with_suffix(".csv").read_bytes()


class TestSweepCommand:
    def test_small_grid(self, tmp_path, capsys):
        # a test split at 10% needs at least 10 events per class
        data = tmp_path / "d"
        assert main(["synth", "--per-class", "10", "--seed", "1",
                     "--duration", "1024", "--out", str(data)]) == 0
        feats = tmp_path / "f.gamq"
        assert main(["features", "--data", str(data), "--out", str(feats),
                     "--lambda", "all", "--ned", "32", "--se-window", "128",
                     "--se-hop", "64", "--stft-window", "128",
                     "--stft-hop", "32"]) == 0
        out = tmp_path / "sweep.csv"
        hist_dir = tmp_path / "hists"
        code, cap = run(["sweep", "--features", feats, "--out", out,
                         "--lambdas", "1,5", "--d-lstms", "8", "--seeds", "0",
                         "--epochs", "4", "--batch", "8", "--lr", "0.02",
                         "--history-dir", hist_dir], capsys)
        assert code == 0
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 3
        assert summary_pairs(cap.out)["cells"] == "2"
        assert summary_pairs(cap.out)["failed"] == "0"
        assert (hist_dir / "sweep_l5_d8_s0.csv").exists()


class TestConfigFile:
    def test_config_defaults_and_flag_override(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text(json.dumps({"per_class": 2, "seed": 9, "duration": 1024}))
        out = tmp_path / "dd"
        code, cap = run(["--config", cfg, "synth", "--out", out], capsys)
        assert code == 0
        pairs = summary_pairs(cap.out)
        assert pairs["events"] == "6"
        assert pairs["seed"] == "9"
        code, cap = run(["--config", cfg, "synth", "--out", tmp_path / "dd2",
                         "--per-class", "1"], capsys)
        assert code == 0
        assert summary_pairs(cap.out)["events"] == "3"

    def test_missing_config_is_io_error(self, tmp_path):
        assert main(["--config", str(tmp_path / "nope.json"), "synth",
                     "--per-class", "1", "--out", str(tmp_path / "x")]) == 4
