import base64
import json
from pathlib import Path

import pytest
from fastapi.testclient import TestClient

from helpers import confusion_brute_force

from pallor.cli import main
from pallor.imaging import RgbImage, save_image
from pallor.nn import load_weights
from pallor.screening import load_regressor, read_manifest
from pallor.service import ServiceConfig, create_app


def run_cli(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def tree_bytes(root: Path) -> dict:
    return {
        str(p.relative_to(root)): p.read_bytes()
        for p in sorted(root.rglob("*"))
        if p.is_file()
    }


class TestSynthCommand:
    def test_deterministic_directory_trees(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            code, stdout, _ = run_cli(
                capsys, "synth", "--n", "3", "--seed", "7", "--out", str(out),
                "--size", "128",
            )
            assert code == 0
            assert json.loads(stdout)["n_samples"] == 3
        assert tree_bytes(a) == tree_bytes(b)

    def test_different_seed_changes_content(self, tmp_path, capsys):
        a, b = tmp_path / "a", tmp_path / "b"
        run_cli(capsys, "synth", "--n", "2", "--seed", "1", "--out", str(a), "--size", "128")
        run_cli(capsys, "synth", "--n", "2", "--seed", "2", "--out", str(b), "--size", "128")
        assert tree_bytes(a) != tree_bytes(b)


class TestPredictCommand:
    def test_clean_sample_matches_manifest_gold(
        self, capsys, clean_dataset_dir, linear_regressor_file
    ):
        weights, _ = linear_regressor_file
        rows = read_manifest(clean_dataset_dir / "manifest.csv")
        row = rows[0]
        code, stdout, _ = run_cli(
            capsys,
            "predict",
            "--image", row.image_path,
            "--card", str(row.card_roi),
            "--seg", "classical",
            "--weights", str(weights),
        )
        assert code == 0
        body = json.loads(stdout)
        assert abs(body["hb"] - row.gold_hb) < 0.01

    def test_stdout_schema_matches_service_response(
        self, capsys, clean_dataset_dir, linear_regressor_file
    ):
        weights, _ = linear_regressor_file
        row = read_manifest(clean_dataset_dir / "manifest.csv")[1]
        code, stdout, _ = run_cli(
            capsys, "predict", "--image", row.image_path, "--card", str(row.card_roi),
            "--seg", "classical", "--weights", str(weights),
        )
        cli_body = json.loads(stdout)

        app = create_app(ServiceConfig(regressor_weights=str(weights)))
        with TestClient(app) as client:
            res = client.post(
                "/v1/predict",
                json={
                    "image_b64": base64.b64encode(Path(row.image_path).read_bytes()).decode(),
                    "card_roi": {"x": row.card_roi.x, "y": row.card_roi.y,
                                 "w": row.card_roi.w, "h": row.card_roi.h},
                    "segmenter": "classical",
                },
            )
        service_body = res.json()

        def shape(obj):
            if isinstance(obj, dict):
                return {k: shape(v) for k, v in sorted(obj.items())}
            if isinstance(obj, list):
                return ["list"]
            return type(obj).__name__

        assert shape(cli_body) == shape(service_body)
        assert cli_body["hb"] == service_body["hb"]

    def test_domain_error_exits_1(self, tmp_path, capsys, linear_regressor_file):
        weights, _ = linear_regressor_file
        gray = tmp_path / "gray.ppm"
        save_image(RgbImage.full(96, 96, (120.0, 120.0, 120.0)), gray)
        code, _, err = run_cli(
            capsys, "predict", "--image", str(gray), "--card", "0,0,16,16",
            "--seg", "classical", "--weights", str(weights),
        )
        assert code == 1
        assert "error" in err

    def test_missing_image_exits_1(self, capsys, linear_regressor_file):
        weights, _ = linear_regressor_file
        code, _, err = run_cli(
            capsys, "predict", "--image", "/nonexistent.ppm", "--card", "0,0,4,4",
            "--seg", "classical", "--weights", str(weights),
        )
        assert code == 1

    def test_cnn_requires_seg_weights(self, capsys, clean_dataset_dir, linear_regressor_file):
        weights, _ = linear_regressor_file
        row = read_manifest(clean_dataset_dir / "manifest.csv")[0]
        code, _, err = run_cli(
            capsys, "predict", "--image", row.image_path, "--card", str(row.card_roi),
            "--seg", "cnn", "--weights", str(weights),
        )
        assert code == 1


class TestEvaluateCommand:
    def test_report_matches_brute_force(self, capsys, clean_dataset_dir, linear_regressor_file):
        weights, _ = linear_regressor_file
        code, stdout, _ = run_cli(
            capsys, "evaluate", "--data", str(clean_dataset_dir),
            "--weights", str(weights), "--cutoffs", "9,10,11", "--format", "json",
        )
        assert code == 0
        report = json.loads(stdout)

        # independent pass: inverse-map regressor is exact on clean files,
        # so predicted == gold and the confusion counts follow directly
        rows = read_manifest(clean_dataset_dir / "manifest.csv")
        pairs = [(r.gold_hb, r.gold_hb) for r in rows]
        for cutoff in (9.0, 10.0, 11.0):
            tp, fp, tn, fn = confusion_brute_force(pairs, cutoff)
            got = report[f"{cutoff:g}"]
            assert (got["tp"], got["fp"], got["tn"], got["fn"]) == (tp, fp, tn, fn)

    def test_text_report_layout(self, capsys, clean_dataset_dir, linear_regressor_file):
        weights, _ = linear_regressor_file
        code, stdout, _ = run_cli(
            capsys, "evaluate", "--data", str(clean_dataset_dir),
            "--weights", str(weights), "--cutoffs", "9,11",
        )
        assert code == 0
        lines = stdout.strip().split("\n")
        assert lines[0].startswith("Cut-off point")
        assert "Hb = 9" in lines[0] and "Hb = 11" in lines[0]
        assert lines[1].startswith("Accuracy")
        assert lines[2].startswith("Sensitivity")
        assert lines[3].startswith("Specificity")


class TestTrainCommands:
    def test_train_reg_smoke(self, tmp_path, capsys, clean_dataset_dir):
        out = tmp_path / "reg.pnn"
        code, stdout, err = run_cli(
            capsys, "train-reg", "--data", str(clean_dataset_dir),
            "--epochs", "40", "--seed", "3", "--out", str(out),
        )
        assert code == 0
        body = json.loads(stdout)
        assert body["val_mae"] >= 0.0
        assert "validation MAE" in err
        model = load_regressor(out)
        assert model.model_id == body["model_id"]

    def test_train_seg_smoke(self, tmp_path, capsys):
        data = tmp_path / "segdata"
        run_cli(capsys, "synth", "--n", "10", "--seed", "5", "--out", str(data),
                "--size", "128", "--gain-min", "1", "--gain-max", "1")
        out = tmp_path / "seg.pnn"
        code, stdout, err = run_cli(
            capsys, "train-seg", "--data", str(data), "--epochs", "2", "--seed", "0",
            "--out", str(out), "--train-size", "32", "--base-ch", "2", "--batch", "4",
        )
        assert code == 0
        body = json.loads(stdout)
        assert len(body["epoch_loss"]) == 2
        assert "holdout_median_iou" in body
        assert "epoch 1/2" in err and "epoch 2/2" in err
        net, _, _ = load_weights(out)
        assert net.spec.input_shape == (3, 32, 32)


class TestUsageErrors:
    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["synth", "--n", "1", "--out", "x", "--bogus"])
        assert exc.value.code == 2

    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["frobnicate"])
        assert exc.value.code == 2

    def test_bad_roi_flag_exits_2(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["predict", "--image", "x.ppm", "--card", "zzz", "--weights", "w"])
        assert exc.value.code == 2


class TestGradcheckCommand:
    def test_passes_and_reports(self, capsys):
        code, stdout, _ = run_cli(capsys, "gradcheck", "--seed", "0")
        assert code == 0
        body = json.loads(stdout)
        assert body["max_relative_error"] < 1e-5
        assert len(body["cases"]) >= 4
