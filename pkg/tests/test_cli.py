import json
from pathlib import Path

import pytest

from motkit.cli import main
from motkit.data_model import serialize_annotations, serialize_detections
from motkit.synth import SynthConfig, generate_scenario
from motkit.teta import ground_truth_result


@pytest.fixture
def scenario_files(tmp_path):
    cfg = SynthConfig(n_tracks=4, n_frames=25, box_noise_std=1.5,
                      embedding_noise_std=0.05, detection_drop_rate=0.05,
                      clutter_rate=0.1, seed=12)
    gt, dets = generate_scenario(cfg)
    ann = tmp_path / "gt.json"
    det = tmp_path / "dets.jsonl"
    base = tmp_path / "base.txt"
    ann.write_bytes(serialize_annotations(gt))
    det.write_bytes(serialize_detections(dets))
    base.write_text("class_001\nclass_002\n")
    return gt, ann, det, base


def read_manifest(out_dir: Path) -> dict:
    return json.loads((out_dir / "manifest.json").read_text())


class TestHelpAndErrors:
    @pytest.mark.parametrize(
        "cmd", ["convert", "validate", "stats", "track", "evaluate", "synth", "report"]
    )
    def test_help_exits_zero(self, cmd, capsys):
        assert main([cmd, "--help"]) == 0
        out = capsys.readouterr().out
        assert "--out-dir" in out

    def test_no_command_is_usage_error(self):
        assert main([]) == 2

    def test_missing_detection_file_exit_2(self, tmp_path, capsys):
        missing = tmp_path / "nope.jsonl"
        code = main(["track", "--detections", str(missing), "--out-dir", str(tmp_path)])
        assert code == 2
        assert str(missing) in capsys.readouterr().err

    def test_invalid_annotation_exit_2(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{broken")
        assert main(["validate", str(bad), "--out-dir", str(tmp_path)]) == 2

    def test_unknown_config_key_exit_2(self, tmp_path, capsys):
        cfg = tmp_path / "cfg.json"
        cfg.write_text('{"nonsense_knob": 3}')
        det = tmp_path / "d.jsonl"
        det.write_text("")
        code = main(["track", "--detections", str(det), "--config", str(cfg),
                     "--out-dir", str(tmp_path)])
        assert code == 2
        assert "nonsense_knob" in capsys.readouterr().err


class TestTrack:
    def test_happy_path_writes_output_and_manifest(self, scenario_files, tmp_path):
        _, _, det, _ = scenario_files
        out_dir = tmp_path / "run"
        code = main(["track", "--detections", str(det), "--out-dir", str(out_dir)])
        assert code == 0
        assert (out_dir / "tracks.json").exists()
        manifest = read_manifest(out_dir)
        assert manifest["command"] == "track"
        assert str(det) in manifest["inputs"]
        assert manifest["config"]["mode"] == "fused"

    def test_mode_flag_changes_output(self, scenario_files, tmp_path):
        _, _, det, _ = scenario_files
        outputs = {}
        for mode in ("fused", "motion_only"):
            out_dir = tmp_path / mode
            main(["track", "--detections", str(det), "--out-dir", str(out_dir),
                  "--mode", mode])
            outputs[mode] = (out_dir / "tracks.json").read_bytes()
        assert outputs["fused"] != outputs["motion_only"]

    def test_rerun_is_byte_identical(self, scenario_files, tmp_path):
        _, _, det, _ = scenario_files
        digests = []
        for name in ("a", "b"):
            out_dir = tmp_path / name
            main(["track", "--detections", str(det), "--out-dir", str(out_dir)])
            digests.append(read_manifest(out_dir)["outputs"][str(out_dir / "tracks.json")])
        assert digests[0] == digests[1]

    def test_jobs_flag_keeps_output(self, scenario_files, tmp_path):
        gt, _, det, _ = scenario_files
        # duplicate the sequence under another video id to exercise the pool
        two = tmp_path / "two.jsonl"
        lines = det.read_text().strip().splitlines()
        others = [
            json.dumps({**json.loads(line), "video_id": 2}) for line in lines
        ]
        two.write_text("\n".join(lines + others) + "\n")
        out_a = tmp_path / "serial"
        out_b = tmp_path / "parallel"
        main(["track", "--detections", str(two), "--out-dir", str(out_a)])
        main(["track", "--detections", str(two), "--out-dir", str(out_b), "--jobs", "4"])
        assert (out_a / "tracks.json").read_bytes() == (out_b / "tracks.json").read_bytes()


class TestEvaluate:
    def test_gt_against_itself_scores_100(self, scenario_files, tmp_path):
        gt, ann, _, base = scenario_files
        pred = tmp_path / "pred.json"
        pred.write_text(ground_truth_result(gt).to_json())
        out_dir = tmp_path / "eval"
        code = main(["evaluate", "--gt", str(ann), "--pred", str(pred),
                     "--base-classes", str(base), "--out-dir", str(out_dir)])
        assert code == 0
        csv_lines = (out_dir / "teta_report.csv").read_text().strip().splitlines()
        assert csv_lines[0] == "split,TETA,LocA,AssA,ClsA"
        assert csv_lines[1] == "All,100.0,100.0,100.0,100.0"

    def test_empty_predictions_scores_zero(self, scenario_files, tmp_path):
        _, ann, _, base = scenario_files
        pred = tmp_path / "pred.json"
        pred.write_text("[]")
        out_dir = tmp_path / "eval"
        assert main(["evaluate", "--gt", str(ann), "--pred", str(pred),
                     "--base-classes", str(base), "--out-dir", str(out_dir)]) == 0
        csv_lines = (out_dir / "teta_report.csv").read_text().strip().splitlines()
        assert csv_lines[1] == "All,0.0,0.0,0.0,0.0"

    def test_video_mismatch_nonzero(self, scenario_files, tmp_path):
        gt, ann, _, base = scenario_files
        result = ground_truth_result(gt)
        doc = json.loads(result.to_json())
        for rec in doc:
            rec["video_id"] = 99
        pred = tmp_path / "pred.json"
        pred.write_text(json.dumps(doc))
        assert main(["evaluate", "--gt", str(ann), "--pred", str(pred),
                     "--base-classes", str(base), "--out-dir", str(tmp_path)]) == 2


class TestValidateStatsSynth:
    def test_validate_ok(self, scenario_files, tmp_path, capsys):
        _, ann, _, _ = scenario_files
        assert main(["validate", str(ann), "--out-dir", str(tmp_path)]) == 0
        out = capsys.readouterr().out
        assert "boxes:" in out and "valid" in out

    def test_validate_reports_problems(self, tmp_path, capsys):
        doc = {
            "videos": [{"id": 1, "name": "v", "width": 10, "height": 10,
                        "frame_count": 5, "fps": 30, "ann_fps": 30}],
            "categories": [{"id": 1, "name": "x"}],
            "annotations": [],
        }
        p = tmp_path / "ann.json"
        p.write_text(json.dumps(doc))
        assert main(["validate", str(p), "--out-dir", str(tmp_path)]) == 0

    def test_stats_writes_report(self, scenario_files, tmp_path):
        _, ann, _, base = scenario_files
        out_dir = tmp_path / "stats"
        code = main(["stats", str(ann), "--base-classes", str(base),
                     "--out-dir", str(out_dir)])
        assert code == 0
        doc = json.loads((out_dir / "stats.json").read_text())
        assert doc["summary"]["n_videos"] == 1
        assert (out_dir / "stats_tables.csv").exists()

    def test_synth_round_trip(self, tmp_path):
        out_dir = tmp_path / "synm"
        code = main(["synth", "--out-dir", str(out_dir), "--seed", "77"])
        assert code == 0
        ann = out_dir / "synthetic_annotations.json"
        det = out_dir / "synthetic_detections.jsonl"
        assert ann.exists() and det.exists()
        assert main(["validate", str(ann), "--out-dir", str(out_dir)]) == 0
        track_dir = tmp_path / "tracked"
        assert main(["track", "--detections", str(det), "--out-dir", str(track_dir)]) == 0

    def test_synth_seed_determinism(self, tmp_path):
        digests = []
        for name in ("a", "b"):
            out_dir = tmp_path / name
            main(["synth", "--out-dir", str(out_dir), "--seed", "5"])
            manifest = read_manifest(out_dir)
            digests.append(sorted(manifest["outputs"].values()))
        assert digests[0] == digests[1]

    def test_synth_config_file(self, tmp_path):
        cfg = tmp_path / "synth.json"
        cfg.write_text(json.dumps({"n_tracks": 2, "n_frames": 6, "seed": 3}))
        out_dir = tmp_path / "out"
        assert main(["synth", "--config", str(cfg), "--out-dir", str(out_dir)]) == 0
        manifest = read_manifest(out_dir)
        assert manifest["config"]["n_tracks"] == 2

    def test_tracker_config_env_var(self, scenario_files, tmp_path, monkeypatch):
        _, _, det, _ = scenario_files
        cfg = tmp_path / "tracker.json"
        cfg.write_text(json.dumps({"mode": "motion_only", "memory_frames": 5}))
        monkeypatch.setenv("MOTKIT_CONFIG", str(cfg))
        out_dir = tmp_path / "envrun"
        assert main(["track", "--detections", str(det), "--out-dir", str(out_dir)]) == 0
        manifest = read_manifest(out_dir)
        assert manifest["config"]["mode"] == "motion_only"
        assert manifest["config"]["memory_frames"] == 5


class TestReport:
    def _make_eval_report(self, scenario_files, tmp_path, label, mode):
        gt, ann, det, base = scenario_files
        track_dir = tmp_path / f"track_{label}"
        main(["track", "--detections", str(det), "--out-dir", str(track_dir),
              "--mode", mode])
        eval_dir = tmp_path / f"eval_{label}"
        main(["evaluate", "--gt", str(ann), "--pred", str(track_dir / "tracks.json"),
              "--base-classes", str(base), "--out-dir", str(eval_dir),
              "--label", label])
        return eval_dir / "teta_report.json"

    def test_single_report_table(self, scenario_files, tmp_path, capsys):
        report = self._make_eval_report(scenario_files, tmp_path, "fused", "fused")
        out_dir = tmp_path / "report"
        assert main(["report", str(report), "--out-dir", str(out_dir)]) == 0
        assert (out_dir / "comparison.png").exists()
        # table carries the same numbers as the report JSON
        doc = json.loads(Path(report).read_text())
        lines = (out_dir / "comparison.csv").read_text().strip().splitlines()
        row = lines[1].split(",")
        assert row[0] == "fused"
        assert float(row[1]) == round(doc["splits"]["all"]["teta"], 2)

    def test_two_reports_sorted_by_teta(self, scenario_files, tmp_path):
        r1 = self._make_eval_report(scenario_files, tmp_path, "fused", "fused")
        r2 = self._make_eval_report(scenario_files, tmp_path, "motion", "motion_only")
        out_dir = tmp_path / "report"
        assert main(["report", str(r1), str(r2), "--out-dir", str(out_dir)]) == 0
        lines = (out_dir / "comparison.csv").read_text().strip().splitlines()
        assert len(lines) == 3
        teta_col = [float(line.split(",")[1]) for line in lines[1:]]
        assert teta_col == sorted(teta_col, reverse=True)

    def test_stats_report_histograms(self, scenario_files, tmp_path):
        _, ann, _, _ = scenario_files
        stats_dir = tmp_path / "stats"
        main(["stats", str(ann), "--out-dir", str(stats_dir)])
        out_dir = tmp_path / "figs"
        assert main(["report", str(stats_dir / "stats.json"),
                     "--out-dir", str(out_dir)]) == 0
        for name in ("object_size", "object_shape", "track_length"):
            assert (out_dir / f"{name}.png").exists()
            assert (out_dir / f"{name}.csv").exists()

    def test_mixed_schemas_rejected(self, scenario_files, tmp_path):
        _, ann, _, _ = scenario_files
        stats_dir = tmp_path / "stats"
        main(["stats", str(ann), "--out-dir", str(stats_dir)])
        eval_report = self._make_eval_report(scenario_files, tmp_path, "fused", "fused")
        assert main(["report", str(stats_dir / "stats.json"), str(eval_report),
                     "--out-dir", str(tmp_path / "x")]) == 2


class TestConvertCli:
    def test_motchallenge(self, tmp_path):
        src = tmp_path / "gt.txt"
        src.write_text("1,1,10,20,30,40,1,-1,-1,-1\n2,1,12,20,30,40,1,-1,-1,-1\n")
        out = tmp_path / "ann.json"
        code = main(["convert", str(src), "--from", "motchallenge",
                     "--out", str(out), "--out-dir", str(tmp_path),
                     "--category-name", "person"])
        assert code == 0
        assert main(["validate", str(out), "--out-dir", str(tmp_path)]) == 0

    def test_cocovid_with_synonyms(self, tmp_path):
        doc = {
            "videos": [{"id": 1, "name": "v", "width": 640, "height": 480,
                        "length": 3, "fps": 30}],
            "categories": [{"id": 1, "name": "sofa"}],
            "annotations": [{"id": 5, "video_id": 1, "category_id": 1,
                             "bboxes": [[1, 1, 5, 5], None, [2, 2, 5, 5]]}],
        }
        src = tmp_path / "coco.json"
        src.write_text(json.dumps(doc))
        sm = tmp_path / "syn.json"
        sm.write_text(json.dumps({"couch": ["sofa"]}))
        out = tmp_path / "ann.json"
        code = main(["convert", str(src), "--from", "cocovid", "--synonyms", str(sm),
                     "--out", str(out), "--out-dir", str(tmp_path)])
        assert code == 0
        data = json.loads(out.read_text())
        assert data["categories"][0]["name"] == "couch"

    def test_imagenetvid_requires_synonyms(self, tmp_path, capsys):
        doc = {"video": {"name": "v", "width": 100, "height": 100},
               "frames": [{"frame_index": 0, "objects": []}]}
        src = tmp_path / "vid.json"
        src.write_text(json.dumps(doc))
        assert main(["convert", str(src), "--from", "imagenetvid",
                     "--out-dir", str(tmp_path)]) == 2
        assert "synonyms" in capsys.readouterr().err
