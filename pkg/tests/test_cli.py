import json

import numpy as np
import pytest

from camscore.cli import main
from camscore.formats import read_cscore_report, write_f32

from test_formats import make_manifest


def write_custom_manifest(dir_path, specs, target_layers=("blockA",), class_names=None):
    """specs: list of (image_id, true_label, confidences, activations, gradients)."""
    images = []
    for image_id, label, confs, acts, grads in specs:
        layers = {}
        for layer in target_layers:
            write_f32(dir_path / f"{image_id}_{layer}_act.f32", acts)
            entry = {
                "activations": {
                    "file": f"{image_id}_{layer}_act.f32",
                    "shape": list(acts.shape),
                }
            }
            if grads is not None:
                write_f32(dir_path / f"{image_id}_{layer}_grad.f32", grads)
                entry["gradients"] = {
                    "file": f"{image_id}_{layer}_grad.f32",
                    "shape": list(grads.shape),
                }
            layers[layer] = entry
        images.append(
            {
                "image_id": image_id,
                "true_label": label,
                "confidences": list(confs),
                "layers": layers,
            }
        )
    doc = {
        "version": 1,
        "architecture": "toynet",
        "checkpoint_id": "E3",
        "target_layers": list(target_layers),
        "images": images,
    }
    if class_names:
        doc["class_names"] = list(class_names)
    path = dir_path / "manifest.json"
    path.write_text(json.dumps(doc))
    return path


class TestFixturesCommand:
    def test_writes_all_runs(self, tmp_path, capsys):
        code = main(["fixtures", "--out", str(tmp_path)])
        assert code == 0
        files = sorted(p.name for p in tmp_path.iterdir())
        assert len(files) == 6
        assert "densenet201_cscores.csv" in files
        assert "resnet50v2_epoch_metrics.csv" in files


class TestTrajectoryCommand:
    def run_fixture(self, tmp_path, arch, extra=()):
        assert main(["fixtures", "--out", str(tmp_path)]) == 0
        alerts_path = tmp_path / "alerts.json"
        code = main(
            [
                "trajectory",
                "--metrics",
                str(tmp_path / f"{arch}_epoch_metrics.csv"),
                "--scores",
                str(tmp_path / f"{arch}_cscores.csv"),
                "--alerts",
                str(alerts_path),
                *extra,
            ]
        )
        return code, alerts_path

    def test_resnet_alerts(self, tmp_path, capsys):
        code, alerts_path = self.run_fixture(tmp_path, "resnet50v2")
        assert code == 0
        out = capsys.readouterr().out
        assert "ALERT: epoch 25 AttributionCollapse scorecam" in out
        assert "7 checkpoints analysed, 2 alerts" in out
        doc = json.loads(alerts_path.read_text())
        assert [a["kind"] for a in doc] == ["AttributionCollapse", "ClassMasking"]
        assert all(a["epoch"] == 25 for a in doc)

    def test_densenet_alerts(self, tmp_path, capsys):
        code, alerts_path = self.run_fixture(tmp_path, "densenet201")
        assert code == 0
        out = capsys.readouterr().out
        assert "ALERT: epoch 25 GoldListCollapse Normal" in out
        assert "AttributionCollapse" not in out
        doc = json.loads(alerts_path.read_text())
        kinds = sorted({a["kind"] for a in doc})
        assert kinds == ["ClassMasking", "GoldListCollapse"]
        assert len(doc) == 5

    def test_method_filter(self, tmp_path, capsys):
        code, alerts_path = self.run_fixture(
            tmp_path, "resnet50v2", extra=["--methods", "gradcam"]
        )
        assert code == 0
        doc = json.loads(alerts_path.read_text())
        # scorecam's collapse is filtered out; gradcam's masking remains
        assert [a["kind"] for a in doc] == ["ClassMasking"]

    def test_threshold_flags(self, tmp_path, capsys):
        code, alerts_path = self.run_fixture(
            tmp_path, "resnet50v2", extra=["--gap-min", "0.39", "--methods", "gradcam"]
        )
        assert code == 0
        doc = json.loads(alerts_path.read_text())
        assert [a["epoch"] for a in doc] == [5, 25]

    def test_corrupt_metrics_is_usage_error(self, tmp_path, capsys):
        metrics = tmp_path / "m.csv"
        metrics.write_text("epoch,phase\n1,TL\n")
        scores = tmp_path / "s.csv"
        scores.write_text("x\n")
        code = main(["trajectory", "--metrics", str(metrics), "--scores", str(scores)])
        assert code == 2
        assert "error:" in capsys.readouterr().err


class TestScoreCommand:
    def test_score_manifest(self, tmp_path, rng, capsys):
        path, _ = make_manifest(tmp_path, rng, n_images=4)
        out = tmp_path / "scores.csv"
        code = main(
            [
                "score",
                "--manifest",
                str(path),
                "--methods",
                "gradcam,scorecam",
                "--tau",
                "0.2",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        rows = read_cscore_report(out)
        assert len(rows) == 6  # 2 methods x (2 classes + global)
        for row in rows:
            assert 0.0 <= row.cscore <= 1.0
        labels = {r.class_label for r in rows}
        assert labels == {"Normal", "Pneumonia", "global"}

    def test_default_tau_empties_minority_class(self, tmp_path, rng):
        # image confidences for class 1 sit below 0.5, so its gold list
        # empties at the default threshold and the rows say so
        path, _ = make_manifest(tmp_path, rng, n_images=4)
        out = tmp_path / "scores.csv"
        assert main(["score", "--manifest", str(path), "--methods", "gradcam", "--out", str(out)]) == 0
        rows = read_cscore_report(out)
        pneumonia = next(r for r in rows if r.class_label == "Pneumonia")
        assert pneumonia.gold_size == 0
        assert "empty_gold" in pneumonia.flags
        global_row = next(r for r in rows if r.class_label == "global")
        normal_row = next(r for r in rows if r.class_label == "Normal")
        assert global_row.cscore == normal_row.cscore

    def test_bad_tau_is_usage_error(self, tmp_path, capsys):
        code = main(
            [
                "score",
                "--manifest",
                str(tmp_path / "whatever.json"),
                "--tau",
                "1.5",
                "--out",
                str(tmp_path / "s.csv"),
            ]
        )
        assert code == 2
        err = capsys.readouterr().err
        assert "tau" in err and "between 0 and 1" in err

    def test_missing_tensor_file_is_usage_error(self, tmp_path, rng, capsys):
        path, _ = make_manifest(tmp_path, rng)
        (tmp_path / "img0000_act.f32").unlink()
        code = main(
            ["score", "--manifest", str(path), "--out", str(tmp_path / "s.csv")]
        )
        assert code == 2
        assert "img0000_act.f32" in capsys.readouterr().err

    def test_unknown_method_is_usage_error(self, tmp_path, capsys):
        code = main(
            [
                "score",
                "--manifest",
                str(tmp_path / "m.json"),
                "--methods",
                "saliency",
                "--out",
                str(tmp_path / "s.csv"),
            ]
        )
        assert code == 2
        assert "saliency" in capsys.readouterr().err

    def test_multiscale_method_runs(self, tmp_path, rng):
        path, _ = make_manifest(tmp_path, rng, n_images=3)
        out = tmp_path / "scores.csv"
        code = main(
            [
                "score",
                "--manifest",
                str(path),
                "--methods",
                "msgradcampp",
                "--tau",
                "0.2",
                "--out-size",
                "5x5",
                "--out",
                str(out),
            ]
        )
        assert code == 0
        rows = read_cscore_report(out)
        assert {r.method for r in rows} == {"msgradcampp"}

    def test_bad_out_size_is_usage_error(self, tmp_path, rng, capsys):
        path, _ = make_manifest(tmp_path, rng)
        code = main(
            [
                "score",
                "--manifest",
                str(path),
                "--methods",
                "msgradcampp",
                "--out-size",
                "seven",
                "--out",
                str(tmp_path / "s.csv"),
            ]
        )
        assert code == 2
        assert "out-size" in capsys.readouterr().err

    def test_anchor_manifest_defines_gold(self, tmp_path, rng):
        scored_dir = tmp_path / "scored"
        anchor_dir = tmp_path / "anchor"
        scored_dir.mkdir()
        anchor_dir.mkdir()
        acts = [rng.random((3, 3, 2)).astype(np.float32) for _ in range(3)]
        grads = [rng.random((3, 3, 2)).astype(np.float32) for _ in range(3)]
        # scored checkpoint: only one image confidently class 0
        scored = write_custom_manifest(
            scored_dir,
            [
                ("img0", 0, [0.9, 0.1], acts[0], grads[0]),
                ("img1", 0, [0.3, 0.7], acts[1], grads[1]),
                ("img2", 0, [0.2, 0.8], acts[2], grads[2]),
            ],
        )
        # anchor: all three pass for class 0
        anchor = write_custom_manifest(
            anchor_dir,
            [
                ("img0", 0, [0.9, 0.1], acts[0], grads[0]),
                ("img1", 0, [0.8, 0.2], acts[1], grads[1]),
                ("img2", 0, [0.7, 0.3], acts[2], grads[2]),
            ],
        )
        out_self = tmp_path / "self.csv"
        out_anchored = tmp_path / "anchored.csv"
        assert main(["score", "--manifest", str(scored), "--methods", "gradcam", "--out", str(out_self)]) == 0
        assert (
            main(
                [
                    "score",
                    "--manifest",
                    str(scored),
                    "--methods",
                    "gradcam",
                    "--anchor-manifest",
                    str(anchor),
                    "--out",
                    str(out_anchored),
                ]
            )
            == 0
        )
        self_rows = {r.class_label: r for r in read_cscore_report(out_self)}
        anchored_rows = {r.class_label: r for r in read_cscore_report(out_anchored)}
        assert self_rows["0"].gold_size == 1
        assert "singleton_gold" in self_rows["0"].flags
        assert anchored_rows["0"].gold_size == 3

    def test_anchor_with_unknown_image_is_usage_error(self, tmp_path, rng, capsys):
        scored_dir = tmp_path / "scored"
        anchor_dir = tmp_path / "anchor"
        scored_dir.mkdir()
        anchor_dir.mkdir()
        acts = rng.random((3, 3, 2)).astype(np.float32)
        grads = rng.random((3, 3, 2)).astype(np.float32)
        scored = write_custom_manifest(scored_dir, [("img0", 0, [0.9, 0.1], acts, grads)])
        anchor = write_custom_manifest(
            anchor_dir,
            [
                ("img0", 0, [0.9, 0.1], acts, grads),
                ("imgX", 0, [0.9, 0.1], acts, grads),
            ],
        )
        code = main(
            [
                "score",
                "--manifest",
                str(scored),
                "--methods",
                "gradcam",
                "--anchor-manifest",
                str(anchor),
                "--out",
                str(tmp_path / "s.csv"),
            ]
        )
        assert code == 2
        assert "imgX" in capsys.readouterr().err

    def test_pairwise_matrices_for_duplicated_images(self, tmp_path, rng):
        acts = rng.random((4, 4, 3)).astype(np.float32)
        grads = rng.random((4, 4, 3)).astype(np.float32)
        other_acts = rng.random((4, 4, 3)).astype(np.float32)
        other_grads = rng.random((4, 4, 3)).astype(np.float32)
        manifest = write_custom_manifest(
            tmp_path,
            [
                ("dup_a", 0, [0.9, 0.1], acts, grads),
                ("dup_b", 0, [0.8, 0.2], acts, grads),
                ("solo", 0, [0.7, 0.3], other_acts, other_grads),
            ],
        )
        pair_dir = tmp_path / "pairwise"
        code = main(
            [
                "score",
                "--manifest",
                str(manifest),
                "--methods",
                "gradcam",
                "--pairwise-dir",
                str(pair_dir),
                "--out",
                str(tmp_path / "s.csv"),
            ]
        )
        assert code == 0
        index = json.loads((pair_dir / "pairwise_gradcam_class0.json").read_text())
        ids = index["image_ids"]
        assert ids == sorted(ids)
        matrix = np.fromfile(pair_dir / index["file"], dtype="<f8").reshape(index["shape"])
        i, j = ids.index("dup_a"), ids.index("dup_b")
        assert matrix[i, j] == 1.0
        assert np.array_equal(matrix, matrix.T)

    def test_workers_flag(self, tmp_path, rng):
        path, _ = make_manifest(tmp_path, rng, n_images=3)
        out = tmp_path / "scores.csv"
        code = main(
            [
                "score",
                "--manifest",
                str(path),
                "--methods",
                "gradcam",
                "--tau",
                "0.2",
                "--workers",
                "2",
                "--out",
                str(out),
            ]
        )
        assert code == 0


class TestCamCommand:
    def test_writes_heatmaps_and_index(self, tmp_path, rng):
        path, _ = make_manifest(tmp_path, rng, n_images=2)
        out_dir = tmp_path / "maps"
        code = main(
            [
                "cam",
                "--manifest",
                str(path),
                "--methods",
                "gradcam,eigencam",
                "--out-dir",
                str(out_dir),
            ]
        )
        assert code == 0
        index = json.loads((out_dir / "heatmaps.json").read_text())
        assert len(index["maps"]) == 4
        for entry in index["maps"]:
            data = np.fromfile(out_dir / entry["file"], dtype="<f4")
            assert data.size == entry["shape"][0] * entry["shape"][1]
            assert data.min() >= 0.0 and data.max() <= 1.0

    def test_unknown_layer_is_usage_error(self, tmp_path, rng, capsys):
        path, _ = make_manifest(tmp_path, rng)
        code = main(
            [
                "cam",
                "--manifest",
                str(path),
                "--layer",
                "blockZ",
                "--out-dir",
                str(tmp_path / "maps"),
            ]
        )
        assert code == 2
        assert "blockZ" in capsys.readouterr().err


class TestParserBasics:
    def test_unknown_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main(["polish"])
        assert exc.value.code == 2

    def test_no_subcommand_exits_2(self):
        with pytest.raises(SystemExit) as exc:
            main([])
        assert exc.value.code == 2
