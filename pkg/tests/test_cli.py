import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from qlfquant import create_app, generate_phantom, truth_to_label_image
from qlfquant.cli import build_parser, build_store, main, _config_from_args

FAST = ["--superpixels", "36", "--compactness", "0.25"]


def write_phantom(path, seed, size=96):
    ph = generate_phantom(seed=seed, width=size, height=size)
    Image.fromarray(ph.image.pixels, "RGB").save(path)
    return ph


def write_truth(path, ph):
    Image.fromarray(truth_to_label_image(ph.truth).pixels, "RGB").save(path)


@pytest.fixture
def phantom_png(tmp_path):
    path = tmp_path / "ph7.png"
    write_phantom(path, seed=7)
    return path


class TestParser:
    def test_pinned_defaults(self):
        args = build_parser().parse_args(["segment", "x.png"])
        assert args.superpixels == 600
        assert args.compactness == 10.0
        assert args.port == 8077
        assert args.host == "127.0.0.1"
        assert args.jobs == 1
        assert args.bg_threshold is None and args.kl_threshold is None

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_jobs_validated(self, tmp_path, capsys):
        rc = main(["batch", str(tmp_path), "--jobs", "0"])
        assert rc == 1
        assert "jobs" in capsys.readouterr().err


class TestSegment:
    def test_writes_label_image_report_and_sidecar(self, tmp_path, phantom_png):
        out = tmp_path / "out"
        rc = main(["segment", str(phantom_png), "--out-dir", str(out), *FAST])
        assert rc == 0
        labels = out / "ph7_labels.png"
        report_path = out / "ph7_report.json"
        meta_path = out / "ph7_meta.json"
        assert labels.exists() and report_path.exists() and meta_path.exists()

        report = json.loads(report_path.read_text())
        assert report["image"] == "ph7.png"
        assert report["revision"] == 0
        assert report["k_actual"] == 36
        areas = report["areas"]
        assert areas["background"] + areas["tooth"] + areas["biofilm"] == 96 * 96
        assert 0.0 <= report["bqi"] <= 1.0

        meta = json.loads(meta_path.read_text())
        assert meta["config"]["superpixels"] == 36
        assert meta["config"]["compactness"] == 0.25
        assert "whole_image_divergence" in meta

        pixels = np.asarray(Image.open(labels).convert("RGB"))
        present = {tuple(c) for c in pixels.reshape(-1, 3)}
        assert present <= {(0, 0, 0), (0, 255, 0), (255, 0, 0)}

    def test_missing_input_fails(self, tmp_path, capsys):
        rc = main(["segment", str(tmp_path / "nope.png"), "--out-dir", str(tmp_path)])
        assert rc == 1
        assert "error:" in capsys.readouterr().err

    def test_threshold_flags_echoed(self, tmp_path, phantom_png):
        out = tmp_path / "out"
        rc = main([
            "segment", str(phantom_png), "--out-dir", str(out), *FAST,
            "--bg-threshold", "0.25", "--kl-threshold", "9.5",
        ])
        assert rc == 0
        report = json.loads((out / "ph7_report.json").read_text())
        assert report["thresholds"] == {"bg_threshold": 0.25, "kl_threshold": 9.5}

    def test_thresholds_file_overrides_flags(self, tmp_path, phantom_png):
        th_file = tmp_path / "th.json"
        th_file.write_text(json.dumps({"bg_threshold": 0.5, "kl_threshold": 3.0}))
        out = tmp_path / "out"
        rc = main([
            "segment", str(phantom_png), "--out-dir", str(out), *FAST,
            "--bg-threshold", "0.1", "--thresholds", str(th_file),
        ])
        assert rc == 0
        report = json.loads((out / "ph7_report.json").read_text())
        assert report["thresholds"] == {"bg_threshold": 0.5, "kl_threshold": 3.0}

    def test_byte_identical_reruns(self, tmp_path, phantom_png):
        out1, out2 = tmp_path / "a", tmp_path / "b"
        for out in (out1, out2):
            assert main(["segment", str(phantom_png), "--out-dir", str(out), *FAST]) == 0
        for name in ("ph7_labels.png", "ph7_report.json", "ph7_meta.json"):
            assert (out1 / name).read_bytes() == (out2 / name).read_bytes()

    def test_all_black_image_no_tooth(self, tmp_path):
        path = tmp_path / "black.png"
        Image.fromarray(np.zeros((64, 64, 3), dtype=np.uint8), "RGB").save(path)
        out = tmp_path / "out"
        rc = main(["segment", str(path), "--out-dir", str(out), "--superpixels", "16"])
        assert rc == 0
        report = json.loads((out / "black_report.json").read_text())
        assert report["bqi"] == 0.0
        assert report["no_tooth"] is True


class TestBatch:
    def test_mixed_directory_with_one_corrupt_file(self, tmp_path, capsys):
        indir = tmp_path / "jaw"
        indir.mkdir()
        write_phantom(indir / "a.png", seed=1)
        write_phantom(indir / "b.png", seed=2)
        (indir / "c.png").write_bytes(b"this is not a png")
        out = tmp_path / "out"
        rc = main(["batch", str(indir), "--out-dir", str(out), *FAST])
        assert rc == 0
        summary = json.loads((out / "batch_summary.json").read_text())
        assert [e["image"] for e in summary["images"]] == ["a.png", "b.png"]
        assert [e["image"] for e in summary["failures"]] == ["c.png"]
        assert (out / "a_report.json").exists() and (out / "b_report.json").exists()
        assert not (out / "c_report.json").exists()
        assert "c.png" in capsys.readouterr().err

    def test_same_image_twice_identical_bqi(self, tmp_path):
        indir = tmp_path / "jaw"
        indir.mkdir()
        ph = generate_phantom(seed=5, width=96, height=96)
        for name in ("first.png", "second.png"):
            Image.fromarray(ph.image.pixels, "RGB").save(indir / name)
        out = tmp_path / "out"
        assert main(["batch", str(indir), "--out-dir", str(out), *FAST]) == 0
        summary = json.loads((out / "batch_summary.json").read_text())
        bqis = [e["bqi"] for e in summary["images"]]
        assert bqis[0] == bqis[1]

    def test_batch_matches_single_segment(self, tmp_path, phantom_png):
        indir = phantom_png.parent
        out_batch, out_single = tmp_path / "ob", tmp_path / "os"
        assert main(["batch", str(indir), "--out-dir", str(out_batch), *FAST]) == 0
        assert main(["segment", str(phantom_png), "--out-dir", str(out_single), *FAST]) == 0
        a = json.loads((out_batch / "ph7_report.json").read_text())
        b = json.loads((out_single / "ph7_report.json").read_text())
        assert a == b

    def test_parallel_jobs_identical_outputs(self, tmp_path):
        indir = tmp_path / "jaw"
        indir.mkdir()
        for i in range(4):
            write_phantom(indir / f"p{i}.png", seed=i)
        out1, out4 = tmp_path / "j1", tmp_path / "j4"
        assert main(["batch", str(indir), "--out-dir", str(out1), *FAST]) == 0
        assert main(["batch", str(indir), "--out-dir", str(out4), "--jobs", "4", *FAST]) == 0
        for i in range(4):
            name = f"p{i}_report.json"
            assert (out1 / name).read_bytes() == (out4 / name).read_bytes()
        s1 = json.loads((out1 / "batch_summary.json").read_text())
        s4 = json.loads((out4 / "batch_summary.json").read_text())
        assert s1 == s4

    def test_empty_directory_fails(self, tmp_path, capsys):
        indir = tmp_path / "empty"
        indir.mkdir()
        rc = main(["batch", str(indir), "--out-dir", str(tmp_path / "out")])
        assert rc == 1
        assert "error:" in capsys.readouterr().err


class TestLongitudinal:
    def write_inputs(self, tmp_path):
        for seed, name in [(1, "v1.png"), (2, "v2.png"), (3, "w1.png"), (4, "w2.png")]:
            write_phantom(tmp_path / name, seed=seed)

    def test_interleaved_subjects(self, tmp_path):
        self.write_inputs(tmp_path)
        manifest = tmp_path / "visits.csv"
        manifest.write_text(
            "subject_id,timestamp,image_path\n"
            "s-v,2024-03-08T09:00:00,v2.png\n"
            "s-w,2024-03-01T09:00:00,w1.png\n"
            "s-v,2024-03-01T09:00:00,v1.png\n"
            "s-w,2024-03-08T09:00:00,w2.png\n"
        )
        out = tmp_path / "long.json"
        rc = main([
            "longitudinal", str(manifest), "--out", str(out),
            "--out-dir", str(tmp_path), *FAST,
        ])
        assert rc == 0
        doc = json.loads(out.read_text())
        assert [s["subject_id"] for s in doc["subjects"]] == ["s-v", "s-w"]
        for subject in doc["subjects"]:
            stamps = [e["timestamp"] for e in subject["series"]]
            assert stamps == sorted(stamps)
            assert len(subject["series"]) == 2
            values = [e["bqi"] for e in subject["series"]]
            assert subject["mean_bqi"] == pytest.approx(sum(values) / 2)

    def test_bad_header_cites_line_one(self, tmp_path, capsys):
        manifest = tmp_path / "m.csv"
        manifest.write_text("subject,when,file\nx,2024-01-01,a.png\n")
        rc = main(["longitudinal", str(manifest), "--out-dir", str(tmp_path)])
        assert rc == 1
        assert ":1:" in capsys.readouterr().err

    def test_bad_timestamp_cites_line(self, tmp_path, capsys):
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "subject_id,timestamp,image_path\n"
            "s1,2024-03-01T09:00:00,a.png\n"
            "s1,not-a-date,b.png\n"
        )
        rc = main(["longitudinal", str(manifest), "--out-dir", str(tmp_path)])
        assert rc == 1
        assert ":3:" in capsys.readouterr().err

    def test_duplicate_subject_timestamp_cites_line(self, tmp_path, capsys):
        write_phantom(tmp_path / "a.png", seed=1)
        manifest = tmp_path / "m.csv"
        manifest.write_text(
            "subject_id,timestamp,image_path\n"
            "s1,2024-03-01T09:00:00,a.png\n"
            "s1,2024-03-01T09:00:00,a.png\n"
        )
        rc = main(["longitudinal", str(manifest), "--out-dir", str(tmp_path)])
        assert rc == 1
        err = capsys.readouterr().err
        assert ":3:" in err and "duplicate" in err


class TestCalibrate:
    def test_fits_and_round_trips(self, tmp_path):
        indir = tmp_path / "labeled"
        indir.mkdir()
        for seed in (1, 2):
            ph = write_phantom(indir / f"t{seed}.png", seed=seed)
            write_truth(indir / f"t{seed}_truth.png", ph)
        out = tmp_path / "th.json"
        rc = main([
            "calibrate", str(indir), "--out", str(out),
            "--out-dir", str(tmp_path), *FAST,
        ])
        assert rc == 0
        th = json.loads(out.read_text())
        assert set(th) == {"bg_threshold", "kl_threshold"}
        assert 0.0 < th["bg_threshold"] < 1.0
        assert th["kl_threshold"] > 0.0
        # the fitted file feeds straight back into segmentation
        seg_out = tmp_path / "seg"
        rc = main([
            "segment", str(indir / "t1.png"), "--thresholds", str(out),
            "--out-dir", str(seg_out), *FAST,
        ])
        assert rc == 0
        report = json.loads((seg_out / "t1_report.json").read_text())
        assert report["thresholds"] == th

    def test_missing_truth_pair_fails(self, tmp_path, capsys):
        indir = tmp_path / "labeled"
        indir.mkdir()
        write_phantom(indir / "solo.png", seed=1)
        rc = main(["calibrate", str(indir), "--out-dir", str(tmp_path), *FAST])
        assert rc == 1
        assert "truth" in capsys.readouterr().err

    def test_off_palette_truth_fails(self, tmp_path, capsys):
        indir = tmp_path / "labeled"
        indir.mkdir()
        write_phantom(indir / "a.png", seed=1)
        bad = np.zeros((96, 96, 3), dtype=np.uint8)
        bad[0, 0] = (12, 34, 56)
        Image.fromarray(bad, "RGB").save(indir / "a_truth.png")
        rc = main(["calibrate", str(indir), "--out-dir", str(tmp_path), *FAST])
        assert rc == 1
        assert "palette" in capsys.readouterr().err

    def test_missing_class_fails(self, tmp_path, capsys):
        indir = tmp_path / "labeled"
        indir.mkdir()
        img = np.zeros((64, 64, 3), dtype=np.uint8)
        img[16:48, 16:48] = (140, 175, 165)
        Image.fromarray(img, "RGB").save(indir / "flat.png")
        truth = np.zeros((64, 64, 3), dtype=np.uint8)
        truth[16:48, 16:48] = (0, 255, 0)  # tooth only, no biofilm anywhere
        Image.fromarray(truth, "RGB").save(indir / "flat_truth.png")
        rc = main(["calibrate", str(indir), "--out-dir", str(tmp_path),
                   "--superpixels", "16", "--compactness", "0.25"])
        assert rc == 1
        assert "biofilm" in capsys.readouterr().err


class TestServeWiring:
    def test_store_has_one_session_per_input(self, tmp_path, phantom_png):
        config = _config_from_args(build_parser().parse_args(
            ["serve", str(phantom_png), "--out-dir", str(tmp_path), *FAST]
        ))
        store = build_store([phantom_png], config, export_on_edit=True)
        assert store.export_on_edit
        client = TestClient(create_app(store))
        sessions = client.get("/api/sessions").json()
        assert len(sessions) == 1
        assert sessions[0]["image"] == "ph7.png"
        state = client.get(f"/api/sessions/{sessions[0]['session_id']}").json()
        assert state["superpixel_count"] == 36
