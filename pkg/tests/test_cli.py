from __future__ import annotations

import json

import numpy as np
import pytest

from follicle.cli import main
from follicle.config import config_from_json
from follicle.errors import ConfigError
from follicle.synthetic import write_synthetic_corpus

FAST_FLAGS = [
    "--input-size", "16",
    "--epochs", "2",
    "--batch-size", "4",
    "--nlm-patch-distance", "2",
]


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli_data")
    return write_synthetic_corpus(root, counts=(5, 4, 3), seed=77, size_range=(20, 28))


@pytest.fixture(scope="module")
def workspace(tmp_path_factory, corpus):
    """Ingested + preprocessed corpus shared by the command tests."""
    out = tmp_path_factory.mktemp("cli_out")
    assert main(["ingest", str(corpus), "--out", str(out), "--seed", "5"]) == 0
    assert (
        main(["preprocess", str(out / "manifest.json"), "--out", str(out), "--seed", "5", *FAST_FLAGS])
        == 0
    )
    return out


class TestIngest:
    def test_prints_class_counts(self, corpus, tmp_path, capsys):
        assert main(["ingest", str(corpus), "--out", str(tmp_path)]) == 0
        lines = capsys.readouterr().out
        assert "alopecia" in lines and "5" in lines
        assert "total" in lines and "12" in lines
        assert (tmp_path / "manifest.json").exists()

    def test_rerun_identical_except_timestamp(self, corpus, tmp_path):
        main(["ingest", str(corpus), "--out", str(tmp_path), "--seed", "5"])
        first = json.loads((tmp_path / "manifest.json").read_text())
        main(["ingest", str(corpus), "--out", str(tmp_path), "--seed", "5"])
        second = json.loads((tmp_path / "manifest.json").read_text())
        first.pop("created_at")
        second.pop("created_at")
        assert first == second

    def test_missing_class_is_nonzero_exit(self, tmp_path, capsys):
        (tmp_path / "alopecia").mkdir()
        assert main(["ingest", str(tmp_path), "--out", str(tmp_path / "out")]) == 1
        assert "follicle: error:" in capsys.readouterr().err

    def test_writes_resolved_config_with_hash(self, corpus, tmp_path):
        main(["ingest", str(corpus), "--out", str(tmp_path), "--seed", "9"])
        resolved = json.loads((tmp_path / "config.resolved.json").read_text())
        assert resolved["seed"] == 9
        assert resolved["train"]["seed"] == 9
        assert len(resolved["config_hash"]) == 16


class TestPreprocess:
    def test_outputs_and_log(self, workspace):
        processed = workspace / "processed"
        log = json.loads((processed / "preprocess_log.json").read_text())
        assert len(log["images"]) == 12
        assert log["denoiser"]["kind"] == "nlm"
        assert log["denoiser"]["nlm"]["patch_size"] == 3
        assert log["denoiser"]["nlm"]["patch_distance"] == 2
        assert all("seconds" in e for e in log["images"])
        manifest = json.loads((processed / "manifest.json").read_text())
        assert len(manifest["samples"]) == 12

    def test_processed_images_at_input_size(self, workspace):
        from follicle.image import decode_image

        processed = workspace / "processed"
        sample = next((processed / "alopecia").glob("*.png"))
        img = decode_image(sample.read_bytes())
        assert (img.height, img.width) == (16, 16)

    def test_rerun_byte_identical(self, corpus, tmp_path):
        for sub in ("a", "b"):
            out = tmp_path / sub
            main(["ingest", str(corpus), "--out", str(out), "--seed", "5"])
            main(["preprocess", str(out / "manifest.json"), "--out", str(out), "--seed", "5",
                  *FAST_FLAGS])
        a_files = sorted((tmp_path / "a" / "processed").rglob("*.png"))
        b_files = sorted((tmp_path / "b" / "processed").rglob("*.png"))
        assert a_files and len(a_files) == len(b_files)
        for fa, fb in zip(a_files, b_files):
            assert fa.read_bytes() == fb.read_bytes()

    def test_same_stem_jpg_and_png_do_not_collide(self, tmp_path, rng):
        from conftest import random_image
        from follicle.image import encode_jpeg, encode_png

        data = tmp_path / "data"
        for name in ("alopecia", "psoriasis", "folliculitis"):
            (data / name).mkdir(parents=True)
            (data / name / "img.png").write_bytes(encode_png(random_image(rng, 20, 20)))
            (data / name / "img.jpg").write_bytes(encode_jpeg(random_image(rng, 20, 20)))
        out = tmp_path / "out"
        assert main(["ingest", str(data), "--out", str(out)]) == 0
        assert main(["preprocess", str(out / "manifest.json"), "--out", str(out),
                     "--denoiser", "none", "--no-clahe", "--input-size", "16"]) == 0
        manifest = json.loads((out / "processed" / "manifest.json").read_text())
        paths = [s["path"] for s in manifest["samples"]]
        assert len(paths) == len(set(paths)) == 6

    def test_denoiser_none_without_clahe_is_resize_only(self, corpus, tmp_path):
        from follicle.image import decode_image, resize_bilinear

        out = tmp_path / "plain"
        main(["ingest", str(corpus), "--out", str(out)])
        assert main(["preprocess", str(out / "manifest.json"), "--out", str(out),
                     "--denoiser", "none", "--no-clahe", "--input-size", "16"]) == 0
        name = "alopecia/alopecia_000.png"
        original = decode_image((corpus / name).read_bytes())
        processed = decode_image((out / "processed" / name).read_bytes())
        expected = resize_bilinear(original, 16, 16)
        # PNG quantization only.
        assert np.abs(processed.data - expected.data).max() <= 0.5 / 255 + 1e-7


class TestTrain:
    def test_writes_all_artifacts(self, workspace, tmp_path, capsys):
        run = tmp_path / "run"
        code = main(["train", str(workspace / "processed" / "manifest.json"),
                     "--out", str(run), "--seed", "5", *FAST_FLAGS])
        assert code == 0
        for name in ("model.foll1", "history.csv", "metrics.json", "confusion.csv",
                     "split_manifest.json", "config.resolved.json"):
            assert (run / name).exists(), name
        out = capsys.readouterr().out
        assert "test accuracy" in out
        history = (run / "history.csv").read_text().strip().split("\n")
        assert len(history) == 2 + 2  # hash comment + header + one row per epoch

    def test_epochs_zero_model_equals_seeded_init(self, workspace, tmp_path):
        from follicle.model_io import load_model
        from follicle.nn import build_model

        run = tmp_path / "zero"
        assert main(["train", str(workspace / "processed" / "manifest.json"),
                     "--out", str(run), "--seed", "5", "--input-size", "16",
                     "--batch-size", "4", "--epochs", "0"]) == 0
        loaded = load_model(run / "model.foll1")
        init = build_model(loaded.config)
        for p, q in zip(loaded.model.params(), init.params()):
            assert np.array_equal(p.value, q.value)
        history = (run / "history.csv").read_text().strip().split("\n")
        assert len(history) == 2  # comment + header only

    def test_same_seed_identical_outputs(self, workspace, tmp_path):
        runs = []
        for sub in ("r1", "r2"):
            run = tmp_path / sub
            main(["train", str(workspace / "processed" / "manifest.json"),
                  "--out", str(run), "--seed", "5", *FAST_FLAGS])
            runs.append(run)
        assert (runs[0] / "model.foll1").read_bytes() == (runs[1] / "model.foll1").read_bytes()
        assert (runs[0] / "metrics.json").read_text() == (runs[1] / "metrics.json").read_text()


@pytest.fixture(scope="module")
def run(workspace, tmp_path_factory):
    run = tmp_path_factory.mktemp("run")
    main(["train", str(workspace / "processed" / "manifest.json"),
          "--out", str(run), "--seed", "5", *FAST_FLAGS])
    return run


class TestEvaluatePredict:
    def test_evaluate_manifest_writes_metrics(self, run, tmp_path, capsys):
        out = tmp_path / "eval"
        code = main(["evaluate", str(run / "model.foll1"), str(run / "split_manifest.json"),
                     "--out", str(out), *FAST_FLAGS])
        assert code == 0
        printed = capsys.readouterr().out
        assert "confusion matrix" in printed
        assert "accuracy" in printed
        metrics = json.loads((out / "metrics.json").read_text())
        assert set(metrics["per_class"]) == {"alopecia", "psoriasis", "folliculitis"}
        assert metrics["n_samples"] == 4  # test partition of 12 at 70/30

    def test_evaluate_unlabeled_dir_prints_probabilities(self, run, corpus, tmp_path, capsys):
        loose = tmp_path / "loose"
        loose.mkdir()
        src = next((corpus / "psoriasis").glob("*.png"))
        (loose / "one.png").write_bytes(src.read_bytes())
        assert main(["evaluate", str(run / "model.foll1"), str(loose),
                     "--out", str(tmp_path / "e2"), *FAST_FLAGS]) == 0
        out = capsys.readouterr().out
        assert "one.png" in out and "->" in out

    def test_model_input_mismatch_is_clean_error(self, run, workspace, capsys, tmp_path):
        # Model expects 16x16; feed a manifest of unprocessed originals.
        code = main(["evaluate", str(run / "model.foll1"),
                     str(workspace / "manifest.json"), "--out", str(tmp_path / "e3"),
                     "--input-size", "32", "--nlm-patch-distance", "2"])
        assert code == 1
        assert "follicle: error:" in capsys.readouterr().err

    def test_predict_outputs_normalized_probabilities(self, run, corpus, capsys):
        img = next((corpus / "folliculitis").glob("*.png"))
        assert main(["predict", str(run / "model.foll1"), str(img), *FAST_FLAGS]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert set(payload) == {"label", "class_name", "probabilities"}
        assert sum(payload["probabilities"]) == pytest.approx(1.0, abs=1e-5)

    def test_predict_is_deterministic(self, run, corpus, capsys):
        img = next((corpus / "alopecia").glob("*.png"))
        main(["predict", str(run / "model.foll1"), str(img), *FAST_FLAGS])
        first = capsys.readouterr().out
        main(["predict", str(run / "model.foll1"), str(img), *FAST_FLAGS])
        assert capsys.readouterr().out == first

    def test_missing_model_file_is_clean_error(self, corpus, capsys, tmp_path):
        img = next((corpus / "alopecia").glob("*.png"))
        assert main(["predict", str(tmp_path / "nope.foll1"), str(img)]) == 1
        assert "follicle: error:" in capsys.readouterr().err

    def test_overfit_model_predicts_own_training_image_confidently(
        self, workspace, tmp_path, capsys
    ):
        run = tmp_path / "overfit"
        assert main(["train", str(workspace / "processed" / "manifest.json"),
                     "--out", str(run), "--seed", "5", "--input-size", "16",
                     "--batch-size", "4", "--epochs", "200",
                     "--nlm-patch-distance", "2"]) == 0
        capsys.readouterr()
        manifest = json.loads((run / "split_manifest.json").read_text())
        sample = next(s for s in manifest["samples"]
                      if s["split"] == "train" and not s.get("augmented"))
        img_path = workspace / "processed" / sample["path"]
        # Images are already preprocessed; feed them through unchanged.
        assert main(["predict", str(run / "model.foll1"), str(img_path),
                     "--denoiser", "none", "--no-clahe"]) == 0
        payload = json.loads(capsys.readouterr().out)
        assert payload["label"] == sample["label"]
        assert payload["probabilities"][sample["label"]] > 0.9


class TestConfigFile:
    def test_config_file_with_flag_override(self, corpus, tmp_path, capsys):
        cfg_path = tmp_path / "cfg.json"
        cfg_path.write_text(json.dumps({"seed": 3, "denoiser": {"kind": "median"}}))
        assert main(["ingest", str(corpus), "--out", str(tmp_path / "out"),
                     "--config", str(cfg_path), "--seed", "8"]) == 0
        resolved = json.loads((tmp_path / "out" / "config.resolved.json").read_text())
        assert resolved["denoiser"]["kind"] == "median"  # from file
        assert resolved["seed"] == 8  # flag wins

    def test_unknown_key_rejected(self):
        with pytest.raises(ConfigError, match="unknown key"):
            config_from_json(json.dumps({"seeed": 1}))

    def test_unknown_nested_key_rejected(self):
        with pytest.raises(ConfigError, match=r"train.*optimiser"):
            config_from_json(json.dumps({"train": {"optimiser": "sgd"}}))

    def test_bad_value_rejected(self):
        with pytest.raises(ConfigError):
            config_from_json(json.dumps({"train": {"input_size": 100}}))

    def test_round_trip_through_resolved_form(self):
        from follicle.config import PipelineConfig, config_to_dict

        cfg = PipelineConfig()
        again = config_from_json(json.dumps(config_to_dict(cfg)))
        assert again == cfg
