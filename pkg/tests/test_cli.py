from __future__ import annotations

import json

import numpy as np
import pytest

from styluskit.cli import main
from styluskit.geometry import (
    Pose,
    angle_between,
    quat_rotate,
)
from styluskit.jsonio import write_json


def run(capsys, *argv):
    code = main(list(argv))
    captured = capsys.readouterr()
    return code, captured.out, captured.err


def simulate_position(tmp_path, capsys, **overrides):
    cfg = {
        "kind": "position",
        "seed": 11,
        "sample_count": 400,
        "rotation_span_deg": 120.0,
        "true_translation": [0.01, -0.02, -0.12],
        "true_rotation_ypr_deg": [0.0, 0.0, 0.0],
        "pivot_point": [0.4, 0.1, 0.02],
        "position_noise_std": 0.0,
        "orientation_noise_std_deg": 0.0,
        "outlier_rate": 0.0,
        "outlier_magnitude": 0.08,
    }
    cfg.update(overrides)
    tmp_path.mkdir(parents=True, exist_ok=True)
    config_path = tmp_path / "position_config.json"
    write_json(config_path, cfg)
    out_dir = tmp_path / "position_data"
    code, out, err = run(capsys, "simulate", str(config_path), "--out-dir", str(out_dir))
    assert code == 0, err
    return out_dir, cfg


def simulate_orientation(tmp_path, capsys, **overrides):
    cfg = {
        "kind": "orientation",
        "seed": 12,
        "true_translation": [0.01, -0.02, -0.12],
        "true_rotation_ypr_deg": [0.0, 3.0, 8.0],
        "orientation_noise_std_deg": 0.0,
        "hole_axes": [[0.0, 0.0, 1.0], [0.0, 0.70710678118654746, 0.70710678118654757]],
        "poses_per_hole": 60,
    }
    cfg.update(overrides)
    config_path = tmp_path / "orientation_config.json"
    write_json(config_path, cfg)
    out_dir = tmp_path / "orientation_data"
    code, out, err = run(capsys, "simulate", str(config_path), "--out-dir", str(out_dir))
    assert code == 0, err
    return out_dir, cfg


class TestCalibratePosition:
    def test_noise_free_residual_tiny(self, tmp_path, capsys):
        data_dir, _ = simulate_position(tmp_path, capsys)
        out_file = tmp_path / "position.json"
        code, out, err = run(
            capsys,
            "calibrate-position",
            str(data_dir / "poses.csv"),
            "-o",
            str(out_file),
        )
        assert code == 0, err
        doc = json.loads(out)
        assert doc["position_residual_rms"] < 1e-9
        assert np.allclose(doc["translation"], [0.01, -0.02, -0.12], atol=1e-9)
        assert json.loads(out_file.read_text()) == doc

    def test_missing_file_exit_2(self, tmp_path, capsys):
        code, _, err = run(capsys, "calibrate-position", str(tmp_path / "nope.csv"))
        assert code == 2
        assert "error" in err

    def test_single_pose_exit_3(self, tmp_path, capsys):
        csv = tmp_path / "one.csv"
        csv.write_text("t,x,y,z,qx,qy,qz,qw\n0.0,0,0,0,0,0,0,1\n")
        code, _, err = run(capsys, "calibrate-position", str(csv))
        assert code == 3

    def test_malformed_csv_exit_2(self, tmp_path, capsys):
        csv = tmp_path / "bad.csv"
        csv.write_text("t,x\n0,0\n")
        code, _, _ = run(capsys, "calibrate-position", str(csv))
        assert code == 2

    def test_byte_deterministic(self, tmp_path, capsys):
        data_dir, _ = simulate_position(tmp_path, capsys)
        first = tmp_path / "a.json"
        second = tmp_path / "b.json"
        run(capsys, "calibrate-position", str(data_dir / "poses.csv"), "-o", str(first))
        run(capsys, "calibrate-position", str(data_dir / "poses.csv"), "-o", str(second))
        assert first.read_bytes() == second.read_bytes()


class TestCalibrateOrientation:
    def _position_file(self, tmp_path, capsys, data_dir):
        out_file = tmp_path / "position.json"
        code, _, err = run(
            capsys, "calibrate-position", str(data_dir / "poses.csv"), "-o", str(out_file)
        )
        assert code == 0, err
        return out_file

    def test_two_hole_manifest(self, tmp_path, capsys):
        position_dir, _ = simulate_position(tmp_path, capsys)
        position_file = self._position_file(tmp_path, capsys, position_dir)
        orientation_dir, cfg = simulate_orientation(tmp_path, capsys)
        calib_file = tmp_path / "calibration.json"
        code, out, err = run(
            capsys,
            "calibrate-orientation",
            str(orientation_dir / "manifest.json"),
            "--position",
            str(position_file),
            "-o",
            str(calib_file),
        )
        assert code == 0, err
        doc = json.loads(calib_file.read_text())
        truth = json.loads((orientation_dir / "truth.json").read_text())
        got_axis = quat_rotate(np.asarray(doc["rotation_quat"]), [0.0, 0.0, 1.0])
        true_axis = quat_rotate(np.asarray(truth["rotation_quat"]), [0.0, 0.0, 1.0])
        assert angle_between(got_axis, true_axis) < 1e-6
        assert doc["orientation_residual_rms"] < 1e-9

    def test_parallel_axes_warn_exit_0(self, tmp_path, capsys):
        position_dir, _ = simulate_position(tmp_path, capsys)
        position_file = self._position_file(tmp_path, capsys, position_dir)
        orientation_dir, _ = simulate_orientation(
            tmp_path, capsys, hole_axes=[[0.0, 0.0, 1.0], [0.0, 0.0, 1.0]]
        )
        code, out, err = run(
            capsys,
            "calibrate-orientation",
            str(orientation_dir / "manifest.json"),
            "--position",
            str(position_file),
        )
        assert code == 0
        assert "warning" in err

    def test_malformed_manifest_exit_2(self, tmp_path, capsys):
        manifest = tmp_path / "manifest.json"
        manifest.write_text('{"not_holes": []}')
        position = tmp_path / "position.json"
        write_json(position, {"translation": [0, 0, 0], "position_residual_rms": 0.0})
        code, _, _ = run(
            capsys, "calibrate-orientation", str(manifest), "--position", str(position)
        )
        assert code == 2


class TestIdentifyFrame:
    def _waypoints_file(self, tmp_path, points):
        doc = {
            "waypoints": [
                {"t": float(i), "position": list(map(float, p)), "orientation_quat": [0, 0, 0, 1]}
                for i, p in enumerate(points)
            ]
        }
        path = tmp_path / "waypoints.json"
        write_json(path, doc)
        return path

    def test_canonical_triangle(self, tmp_path, capsys):
        wp = self._waypoints_file(tmp_path, [[1, 0, 0], [0, 0, 0], [0, 1, 0]])
        code, out, err = run(capsys, "identify-frame", str(wp))
        assert code == 0, err
        doc = json.loads(out)
        assert np.allclose(doc["rotation_quat"], [0, 0, 0, 1], atol=1e-12)
        assert np.allclose(doc["translation"], [0, 0, 0])

    def test_colinear_exit_3(self, tmp_path, capsys):
        wp = self._waypoints_file(tmp_path, [[1, 0, 0], [0, 0, 0], [0.5, 0, 0]])
        code, _, _ = run(capsys, "identify-frame", str(wp))
        assert code == 3

    def test_too_few_waypoints_exit_2(self, tmp_path, capsys):
        wp = self._waypoints_file(tmp_path, [[1, 0, 0], [0, 0, 0]])
        code, _, _ = run(capsys, "identify-frame", str(wp))
        assert code == 2

    def test_moved_triangle_equivariant(self, tmp_path, capsys):
        from styluskit.geometry import quat_from_axis_angle, transform_point

        g = Pose(quat_from_axis_angle([0.2, 0.5, 0.8], 0.9), np.array([0.3, -0.1, 0.5]))
        points = [
            transform_point(g, p)
            for p in (np.array([1.0, 0, 0]), np.zeros(3), np.array([0.0, 1.0, 0]))
        ]
        wp = self._waypoints_file(tmp_path, points)
        code, out, _ = run(capsys, "identify-frame", str(wp))
        assert code == 0
        doc = json.loads(out)
        from styluskit.geometry import quat_angle

        assert quat_angle(np.asarray(doc["rotation_quat"]), g.rotation) < 1e-9
        assert np.allclose(doc["translation"], g.translation, atol=1e-9)


def simulate_demo(tmp_path, capsys, name="demo", **overrides):
    cfg = {
        "kind": "demonstration",
        "seed": 21,
        "path": {
            "waypoints": [[0.0, 0.0], [0.1, 0.0], [0.1, 0.1]],
            "visiting_sequence": [0, 1, 2],
        },
        "lateral_noise_std": 0.0,
        "speed": 0.05,
        "sample_rate": 200.0,
        "force_profile": {"kind": "sine", "frequency_hz": 5.0, "amplitude": 1.0, "offset": 2.0},
    }
    cfg.update(overrides)
    config_path = tmp_path / f"{name}_config.json"
    write_json(config_path, cfg)
    out_dir = tmp_path / name
    code, out, err = run(capsys, "simulate", str(config_path), "--out-dir", str(out_dir))
    assert code == 0, err
    return out_dir


IDENTITY_FRAME = {
    "label": "board",
    "translation": [0.0, 0.0, 0.0],
    "rotation_quat": [0.0, 0.0, 0.0, 1.0],
    "probe_points": [[0.1, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.1, 0.0]],
}


class TestEvaluate:
    def test_perfect_trace_fraction_one(self, tmp_path, capsys):
        demo_dir = simulate_demo(tmp_path, capsys)
        frame_path = tmp_path / "frame.json"
        write_json(frame_path, IDENTITY_FRAME)
        report_dir = tmp_path / "report"
        code, out, err = run(
            capsys,
            "evaluate",
            str(demo_dir / "trace.csv"),
            "--frame",
            str(frame_path),
            "--path",
            str(demo_dir / "path.json"),
            "--out-dir",
            str(report_dir),
        )
        assert code == 0, err
        summary = json.loads(out)
        assert summary["epsilon_fraction"] == 1.0
        report = json.loads((report_dir / "report.json").read_text())
        assert report["epsilon_fraction"] == 1.0
        assert (report_dir / "segments.csv").exists()
        assert (report_dir / "histogram.csv").exists()
        assert (report_dir / "spectrum_000.csv").exists()
        header = (report_dir / "segments.csv").read_text().splitlines()[0]
        assert header == "segment,idx,mean,std,env_min,env_max"

    def test_missing_waypoint_exit_3(self, tmp_path, capsys):
        demo_dir = simulate_demo(tmp_path, capsys)
        frame_path = tmp_path / "frame.json"
        write_json(frame_path, IDENTITY_FRAME)
        bad_path = tmp_path / "bad_path.json"
        write_json(
            bad_path,
            {
                "waypoints": [[0.0, 0.0], [0.05, 0.05], [0.1, 0.1]],
                "visiting_sequence": [0, 1, 2],
            },
        )
        code, _, err = run(
            capsys,
            "evaluate",
            str(demo_dir / "trace.csv"),
            "--frame",
            str(frame_path),
            "--path",
            str(bad_path),
        )
        assert code == 3
        assert "waypoint" in err

    def test_byte_deterministic_reports(self, tmp_path, capsys):
        demo_dir = simulate_demo(tmp_path, capsys, lateral_noise_std=0.001)
        frame_path = tmp_path / "frame.json"
        write_json(frame_path, IDENTITY_FRAME)
        dirs = []
        for name in ("r1", "r2"):
            report_dir = tmp_path / name
            code, _, err = run(
                capsys,
                "evaluate",
                str(demo_dir / "trace.csv"),
                "--frame",
                str(frame_path),
                "--path",
                str(demo_dir / "path.json"),
                "--out-dir",
                str(report_dir),
            )
            assert code == 0, err
            dirs.append(report_dir)
        for name in ("report.json", "segments.csv", "histogram.csv", "spectrum_000.csv"):
            a = (dirs[0] / name).read_bytes()
            b = (dirs[1] / name).read_bytes()
            assert a == b, name


class TestSimulate:
    def test_same_seed_identical_files(self, tmp_path, capsys):
        dir_a, _ = simulate_position(tmp_path / "a", capsys)
        dir_b, _ = simulate_position(tmp_path / "b", capsys)
        assert (dir_a / "poses.csv").read_bytes() == (dir_b / "poses.csv").read_bytes()
        assert (dir_a / "truth.json").read_bytes() == (dir_b / "truth.json").read_bytes()

    def test_outliers_recorded_in_truth(self, tmp_path, capsys):
        data_dir, _ = simulate_position(
            tmp_path, capsys, sample_count=1000, outlier_rate=0.1
        )
        truth = json.loads((data_dir / "truth.json").read_text())
        assert truth["outlier_count"] == 100
        assert len(truth["outlier_indices"]) == 100

    def test_generated_files_ingest_cleanly(self, tmp_path, capsys):
        from styluskit.ingest import parse_demo_csv, parse_pose_csv

        position_dir, _ = simulate_position(tmp_path, capsys, position_noise_std=0.0002)
        with open(position_dir / "poses.csv", "r", encoding="utf-8") as f:
            rec = parse_pose_csv(f)
        assert len(rec.samples) == 400

        demo_dir = simulate_demo(tmp_path, capsys, lateral_noise_std=0.0005)
        with open(demo_dir / "trace.csv", "r", encoding="utf-8") as f:
            trace = parse_demo_csv(f)
        assert trace.forces is not None

    def test_unknown_kind_exit_2(self, tmp_path, capsys):
        config_path = tmp_path / "bad.json"
        write_json(config_path, {"kind": "mystery"})
        code, _, _ = run(capsys, "simulate", str(config_path), "--out-dir", str(tmp_path / "out"))
        assert code == 2


class TestSnapshot:
    def _setup(self, tmp_path, capsys, events_text):
        data_dir, _ = simulate_position(tmp_path, capsys, sample_count=101)
        calib_path = tmp_path / "calibration.json"
        write_json(
            calib_path,
            {
                "translation": [0.01, -0.02, -0.12],
                "rotation_quat": [0.0, 0.0, 0.0, 1.0],
                "position_residual_rms": 0.0,
                "orientation_residual_rms": 0.0,
                "filtered_outliers": 0,
            },
        )
        events_path = tmp_path / "events.txt"
        events_path.write_text(events_text)
        return data_dir / "poses.csv", events_path, calib_path

    def test_three_presses_three_waypoints(self, tmp_path, capsys):
        pose_csv, events, calib_path = self._setup(
            tmp_path,
            capsys,
            "EVT 0.10 BTN 1\nEVT 0.15 BTN 0\nEVT 0.50 BTN 1\nEVT 0.90 BTN 1\n",
        )
        code, out, err = run(
            capsys, "snapshot", str(pose_csv), str(events), "--calibration", str(calib_path)
        )
        assert code == 0, err
        doc = json.loads(out)
        assert len(doc["waypoints"]) == 3
        # tip offset applied: waypoint is fiducial pose composed with calibration
        assert doc["waypoints"][0]["t"] == pytest.approx(0.10)

    def test_no_presses_empty_list_exit_0(self, tmp_path, capsys):
        pose_csv, events, calib_path = self._setup(tmp_path, capsys, "EVT 0.15 BTN 0\n")
        code, out, _ = run(
            capsys, "snapshot", str(pose_csv), str(events), "--calibration", str(calib_path)
        )
        assert code == 0
        assert json.loads(out)["waypoints"] == []

    def test_press_outside_span_exit_3(self, tmp_path, capsys):
        pose_csv, events, calib_path = self._setup(tmp_path, capsys, "EVT 99.0 BTN 1\n")
        code, _, _ = run(
            capsys, "snapshot", str(pose_csv), str(events), "--calibration", str(calib_path)
        )
        assert code == 3


class TestHelp:
    @pytest.mark.parametrize(
        "command,expected_default",
        [
            ("calibrate-position", "0.005"),
            ("calibrate-orientation", "200"),
            ("identify-frame", "frame"),
            ("evaluate", "0.003"),
            ("snapshot", "0.1"),
        ],
    )
    def test_help_documents_defaults(self, capsys, command, expected_default):
        with pytest.raises(SystemExit) as excinfo:
            main([command, "--help"])
        assert excinfo.value.code == 0
        out = capsys.readouterr().out
        assert expected_default in out

    def test_unknown_flag_rejected(self, capsys):
        with pytest.raises(SystemExit) as excinfo:
            main(["calibrate-position", "x.csv", "--bogus"])
        assert excinfo.value.code != 0
