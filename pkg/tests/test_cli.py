"""End-to-end CLI tests: exit codes, artifacts, manifests, reproducibility."""

import csv
import json

import numpy as np
import pytest

from filippov_lab.cli import config_digest, system_from_config
from filippov_lab.systems import Side, eval_field


def read_csv(path):
    with open(path) as fh:
        reader = csv.reader(fh)
        header = next(reader)
        return header, list(reader)


def write_config(path, dimension, left, right):
    path.write_text(json.dumps({"dimension": dimension, "left": left, "right": right}))
    return path


class TestSimulate:
    def test_right_flight_artifacts(self, run_cli, tmp_path):
        proc = run_cli(
            "simulate", "--builtin", "paper-4d",
            "--x0", "1,0,0,0", "--t-max", "2", "--out", tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        header, rows = read_csv(tmp_path / "events.csv")
        assert header == ["kind", "time", "x1", "x2", "x3", "x4"]
        assert rows[0][0] == "SurfaceHit"
        assert float(rows[0][1]) == pytest.approx(1.0, abs=1e-9)
        np.testing.assert_allclose(
            [float(v) for v in rows[0][2:]], [0.0, 0.4, -0.2, -0.04], atol=1e-9
        )

    def test_excursion_modes_and_manifest(self, run_cli, tmp_path):
        proc = run_cli(
            "simulate", "--builtin", "paper-4d",
            "--x0", "0,1,0,0", "--t-max", "50", "--out", tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        header, rows = read_csv(tmp_path / "trajectory.csv")
        assert header == ["t", "x1", "x2", "x3", "x4", "mode", "segment_index"]
        modes = {row[5] for row in rows}
        assert {"S", "L"} <= modes
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        assert manifest["command"] == "simulate"
        assert set(manifest) >= {
            "command", "config_digest", "seed", "tool_version",
            "outputs", "wall_time_s",
        }
        for name in manifest["outputs"]:
            assert (tmp_path / name).exists()

    def test_escape_exit_code(self, run_cli, tmp_path):
        cfgfile = write_config(
            tmp_path / "grow.json",
            2,
            {"affine": {"M": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 0.0]}},
            {"affine": {"M": [[1.0, 0.0], [0.0, 1.0]], "b": [0.0, 0.0]}},
        )
        proc = run_cli(
            "simulate", "--config", cfgfile,
            "--x0", "1,1", "--t-max", "50", "--out", tmp_path,
        )
        assert proc.returncode == 2
        assert "Escaped" in proc.stdout

    def test_two_fold_exit_code(self, run_cli, tmp_path):
        proc = run_cli(
            "simulate", "--builtin", "paper-planar-c10-reduced",
            "--x0", "0,0.5", "--t-max", "5", "--out", tmp_path,
        )
        assert proc.returncode == 3
        assert "TwoFoldReached" in proc.stdout

    def test_missing_config_file(self, run_cli, tmp_path):
        proc = run_cli(
            "simulate", "--config", tmp_path / "nope.json", "--out", tmp_path
        )
        assert proc.returncode == 1
        assert proc.stderr

    def test_config_and_builtin_conflict(self, run_cli, tmp_path):
        cfgfile = write_config(
            tmp_path / "a.json",
            2,
            {"affine": {"M": [[0.0, 0.0], [0.0, 0.0]], "b": [-1.0, 0.0]}},
            {"affine": {"M": [[0.0, 0.0], [0.0, 0.0]], "b": [-1.0, 0.0]}},
        )
        proc = run_cli(
            "simulate", "--config", cfgfile, "--builtin", "paper-4d",
            "--out", tmp_path,
        )
        assert proc.returncode == 1

    def test_neither_config_nor_builtin(self, run_cli, tmp_path):
        proc = run_cli("simulate", "--out", tmp_path)
        assert proc.returncode == 1

    def test_bad_x0(self, run_cli, tmp_path):
        proc = run_cli(
            "simulate", "--builtin", "paper-4d",
            "--x0", "1,oops,0,0", "--out", tmp_path,
        )
        assert proc.returncode == 1
        proc = run_cli(
            "simulate", "--builtin", "paper-4d", "--x0", "1,0", "--out", tmp_path
        )
        assert proc.returncode == 1

    def test_version(self, run_cli):
        proc = run_cli("--version")
        assert proc.returncode == 0
        assert proc.stdout.strip()


class TestProbe:
    def test_planar_contrast(self, run_cli, tmp_path):
        proc = run_cli(
            "probe", "--builtin", "paper-planar-c10", "--out", tmp_path
        )
        assert proc.returncode == 0, proc.stderr
        verdicts = json.loads((tmp_path / "verdicts.json").read_text())
        assert verdicts["full"]["kind"] == "StableEvidence"
        assert verdicts["reduced"]["kind"] == "Inapplicable"
        assert verdicts["reduced"]["reason"] == "c1_zero"

    def test_4d_stable(self, run_cli, tmp_path):
        proc = run_cli("probe", "--builtin", "paper-4d", "--out", tmp_path)
        assert proc.returncode == 0, proc.stderr
        verdicts = json.loads((tmp_path / "verdicts.json").read_text())
        assert verdicts["reduced"]["kind"] == "StableEvidence"
        assert verdicts["reduced"]["T"] > 0
        assert verdicts["reduced"]["alpha"] >= 1.0
        assert verdicts["reduced"]["beta"] > 0

    def test_positive_c1_inapplicable(self, run_cli, tmp_path):
        cfgfile = write_config(
            tmp_path / "pos.json",
            2,
            {"affine": {"M": [[-1.0, 0.0], [0.0, -1.0]], "b": [0.0, 0.0]}},
            {"affine": {"M": [[0.0, 0.0], [0.0, 0.0]], "b": [1.0, 0.0]}},
        )
        proc = run_cli("probe", "--config", cfgfile, "--out", tmp_path)
        assert proc.returncode == 0, proc.stderr
        verdicts = json.loads((tmp_path / "verdicts.json").read_text())
        assert verdicts["reduced"]["kind"] == "Inapplicable"
        assert verdicts["reduced"]["reason"] == "c1_positive"

    def test_byte_identical_reruns(self, run_cli, tmp_path):
        a = tmp_path / "a"
        b = tmp_path / "b"
        a.mkdir()
        b.mkdir()
        for out in (a, b):
            proc = run_cli(
                "probe", "--builtin", "paper-planar-c10", "--out", out
            )
            assert proc.returncode == 0
        assert (a / "verdicts.json").read_bytes() == (b / "verdicts.json").read_bytes()
        ma = json.loads((a / "manifest.json").read_text())
        mb = json.loads((b / "manifest.json").read_text())
        assert ma["config_digest"] == mb["config_digest"]


class TestReturnMap:
    def test_small_run_artifacts(self, run_cli, tmp_path):
        proc = run_cli(
            "return-map", "--builtin", "paper-4d",
            "--grid", "64", "--iterates", "50", "--transient", "10",
            "--out", tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        header, rows = read_csv(tmp_path / "return_map.csv")
        assert header == ["theta_in", "theta_out", "T", "D", "status"]
        assert len(rows) == 64
        ok = [r for r in rows if r[4] == "ok"]
        assert len(ok) >= 0.9 * 64
        header, rows = read_csv(tmp_path / "orbit.csv")
        assert header == ["k", "theta", "D"]
        assert len(rows) == 50
        stats = json.loads((tmp_path / "statistics.json").read_text())
        assert set(stats) >= {
            "lyapunov", "mean_D_arith", "mean_D_geom",
            "n_iterates", "transient", "fixed_points",
        }
        assert len(stats["fixed_points"]) == 3
        manifest = json.loads((tmp_path / "manifest.json").read_text())
        for name in manifest["outputs"]:
            assert (tmp_path / name).exists()

    def test_rejects_tiny_grid(self, run_cli, tmp_path):
        proc = run_cli(
            "return-map", "--builtin", "paper-4d", "--grid", "1",
            "--out", tmp_path,
        )
        assert proc.returncode == 1

    def test_rejects_two_dimensional_builtin(self, run_cli, tmp_path):
        proc = run_cli(
            "return-map", "--builtin", "paper-planar-c10-reduced",
            "--grid", "8", "--iterates", "5", "--transient", "0",
            "--out", tmp_path,
        )
        assert proc.returncode == 1


class TestVerifyScaling:
    @pytest.mark.parametrize("gamma", ["0.5", "1.0"])
    def test_passes_for_valid_gamma(self, run_cli, tmp_path, gamma):
        proc = run_cli(
            "verify-scaling", "--builtin", "paper-4d",
            "--gamma", gamma, "--x0", "0,1,0,0", "--out", tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads((tmp_path / "scaling.json").read_text())
        assert payload["passed"] is True
        assert payload["max_deviation"] < 1e-5
        assert payload["clock_monotone"] is True
        assert payload["clock_bounds_hold"] is True

    def test_rejects_gamma_above_one(self, run_cli, tmp_path):
        proc = run_cli(
            "verify-scaling", "--builtin", "paper-4d",
            "--gamma", "1.5", "--x0", "0,1,0,0", "--out", tmp_path,
        )
        assert proc.returncode == 1

    def test_hypothesis_failure(self, run_cli, tmp_path):
        proc = run_cli(
            "verify-scaling", "--builtin", "paper-planar-c10",
            "--gamma", "0.5", "--x0", "0,1", "--out", tmp_path,
        )
        assert proc.returncode == 1
        assert proc.stderr


class TestSweep:
    def test_small_delta(self, run_cli, tmp_path):
        proc = run_cli(
            "sweep", "--builtin", "paper-4d",
            "--delta", "1e-3", "--trials", "5", "--out", tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        payload = json.loads((tmp_path / "sweep.json").read_text())
        assert payload["trials"] == 5
        assert payload["stable_fraction"] == 1.0

    def test_invalid_delta(self, run_cli, tmp_path):
        proc = run_cli(
            "sweep", "--builtin", "paper-4d",
            "--delta", "2.0", "--trials", "3", "--out", tmp_path,
        )
        assert proc.returncode == 1
        assert proc.stderr


class TestDumpConfig:
    def test_round_trip_equivalence(self, run_cli, tmp_path):
        proc = run_cli(
            "simulate", "--builtin", "paper-4d", "--dump-config",
            "--out", tmp_path,
        )
        assert proc.returncode == 0, proc.stderr
        cfg = json.loads(proc.stdout)
        # dump-config must not run the simulation
        assert not (tmp_path / "trajectory.csv").exists()
        rebuilt = system_from_config(cfg)
        from filippov_lab.catalog import get_builtin

        original = get_builtin("paper-4d").as_system()
        rng = np.random.default_rng(7)
        for _ in range(100):
            x = rng.uniform(-5, 5, 4)
            for side in (Side.LEFT, Side.RIGHT):
                a = eval_field(original, side, x)
                b = eval_field(rebuilt, side, x)
                assert np.max(np.abs(a - b)) <= 1e-13 * (1 + np.linalg.norm(a))

    def test_digest_matches_builtin(self, run_cli, tmp_path):
        proc = run_cli("simulate", "--builtin", "paper-4d", "--dump-config")
        cfg = json.loads(proc.stdout)
        cfgfile = tmp_path / "dumped.json"
        cfgfile.write_text(json.dumps(cfg))
        out1 = tmp_path / "o1"
        out2 = tmp_path / "o2"
        out1.mkdir()
        out2.mkdir()
        p1 = run_cli(
            "simulate", "--builtin", "paper-4d",
            "--x0", "1,0,0,0", "--t-max", "2", "--out", out1,
        )
        p2 = run_cli(
            "simulate", "--config", cfgfile,
            "--x0", "1,0,0,0", "--t-max", "2", "--out", out2,
        )
        assert p1.returncode == p2.returncode == 0
        m1 = json.loads((out1 / "manifest.json").read_text())
        m2 = json.loads((out2 / "manifest.json").read_text())
        assert m1["config_digest"] == m2["config_digest"]
        assert m1["config_digest"] == config_digest(cfg)
        t1 = (out1 / "trajectory.csv").read_bytes()
        t2 = (out2 / "trajectory.csv").read_bytes()
        assert t1 == t2
