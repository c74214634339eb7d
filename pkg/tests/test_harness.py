import json

import numpy as np
import pytest

from wavespeed_lab import cli
from wavespeed_lab.errors import (ConfigurationError, InsufficientDataError,
                                  ValidationError)
from wavespeed_lab.harness import (emit_outputs, fit_rate, load_config,
                                   run_experiment)

GOOD_CONFIG = """
label = "tiny-sweep"
kind = "sweep"
T_grid = [1.0]

[a]
kind = "constant"
mean = 1.0

[b]
kind = "trig-polynomial"
mean = 0.5
modes = [[1.0, 0.0, 0.25]]

[solver]
horizon = 14.0
half_width = 30.0
"""


def write_config(tmp_path, text=GOOD_CONFIG, name="config.toml"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestLoadConfig:
    def test_good_config_round_trip(self, tmp_path):
        config = load_config(write_config(tmp_path))
        assert config.kind == "sweep"
        assert config.t_grid == (1.0,)
        assert float(config.nl.b(0.25)) == pytest.approx(0.75)
        assert len(config.digest) == 64

    def test_unsorted_t_grid_rejected(self, tmp_path):
        bad = GOOD_CONFIG.replace("T_grid = [1.0]", "T_grid = [1.0, 0.5]")
        with pytest.raises(ValidationError):
            load_config(write_config(tmp_path, bad))

    def test_nonpositive_t_rejected(self, tmp_path):
        bad = GOOD_CONFIG.replace("T_grid = [1.0]", "T_grid = [-1.0, 1.0]")
        with pytest.raises(ValidationError):
            load_config(write_config(tmp_path, bad))

    def test_unknown_kind_rejected(self, tmp_path):
        bad = GOOD_CONFIG.replace('kind = "sweep"', 'kind = "mystery"')
        with pytest.raises(ConfigurationError):
            load_config(write_config(tmp_path, bad))

    def test_unknown_solver_override_rejected(self, tmp_path):
        bad = GOOD_CONFIG + "fancy_knob = 3.0\n"
        with pytest.raises(ConfigurationError):
            load_config(write_config(tmp_path, bad))

    def test_missing_coefficient_rejected(self, tmp_path):
        bad = GOOD_CONFIG.replace("[b]", "[zz]")
        with pytest.raises(ConfigurationError):
            load_config(write_config(tmp_path, bad))


class TestFitRate:
    def test_exact_line(self):
        T = [0.05, 0.1, 0.2, 0.4]
        (slope, intercept, r2), dropped = fit_rate(
            [(t, 0.7 * t) for t in T])
        assert slope == pytest.approx(1.0, abs=1e-12)
        assert np.exp(intercept) == pytest.approx(0.7, abs=1e-12)
        assert r2 == pytest.approx(1.0, abs=1e-12)
        assert dropped == []

    def test_mild_curvature_stays_near_one(self):
        T = np.linspace(0.05, 0.4, 6)
        (slope, _, r2), _ = fit_rate([(t, 0.7 * t + 0.01 * t * t)
                                      for t in T])
        assert 0.95 <= slope <= 1.05

    def test_noise_floor_drops_points(self):
        points = [(0.1, 1e-6), (0.2, 2e-3), (0.3, 3e-3), (0.4, 4e-3)]
        uncs = [1e-4, 1e-5, 1e-5, 1e-5]
        (slope, _, _), dropped = fit_rate(points, uncs)
        assert dropped == [(0.1, 1e-6)]
        assert slope > 0

    def test_all_points_below_noise(self):
        points = [(0.1, 1e-6), (0.2, 1e-6), (0.3, 1e-6)]
        with pytest.raises(InsufficientDataError):
            fit_rate(points, [1e-3, 1e-3, 1e-3])


@pytest.fixture(scope="module")
def record(tmp_path_factory):
    tmp = tmp_path_factory.mktemp("cfg")
    config = load_config(write_config(tmp), out_dir=str(tmp / "out"))
    rec = run_experiment(config, jobs=1)
    assert rec.failures == []
    return rec


class TestRunAndEmit:

    def test_sweep_report(self, record):
        assert len(record.report.per_T) == 1
        T, est, unc = record.report.per_T[0]
        assert T == 1.0
        assert abs(est) < 2e-3          # zero-mean forcing: zero speed
        assert record.report.d0 == pytest.approx(0.0, abs=1e-12)

    def test_csv_shapes(self, record, tmp_path):
        files = emit_outputs(record, str(tmp_path / "o1"))
        speeds = (tmp_path / "o1" / "speeds.csv").read_text().splitlines()
        assert speeds[0] == "T,cbar,uncertainty"
        assert len(speeds) == 2
        limits = (tmp_path / "o1" / "limits.csv").read_text().splitlines()
        assert limits[0] == "c0,cstar,d0,dstar,kpp,rate_rapid,rate_slow"
        assert len(limits) == 2

    def test_manifest_lists_every_file(self, record, tmp_path):
        out = tmp_path / "o2"
        files = emit_outputs(record, str(out))
        manifest = json.loads((out / "manifest.json").read_text())
        on_disk = {p.name for p in out.iterdir()}
        assert set(manifest["files"]) | {"manifest.json"} == on_disk
        for name, digest in manifest["files"].items():
            assert len(digest) == 64

    def test_reemission_is_deterministic(self, record, tmp_path):
        f1 = emit_outputs(record, str(tmp_path / "a"))
        f2 = emit_outputs(record, str(tmp_path / "b"))
        assert f1 == f2

    def test_unwritable_output_dir(self, record, tmp_path):
        target = tmp_path / "blocked"
        target.write_text("a file, not a directory")
        with pytest.raises(OSError):
            emit_outputs(record, str(target))


class TestCli:
    def test_run_command(self, tmp_path, capsys):
        config = write_config(tmp_path)
        out = str(tmp_path / "out")
        assert cli.main(["run", config, "--out", out, "--jobs", "1"]) == 0
        listing = json.loads(capsys.readouterr().out)
        assert "speeds.csv" in listing["files"]

    def test_invalid_config_exit_code(self, tmp_path):
        bad = write_config(tmp_path,
                           GOOD_CONFIG.replace('"sweep"', '"mystery"'))
        assert cli.main(["run", bad]) == 1

    def test_missing_config_exit_code(self, tmp_path):
        assert cli.main(["run", str(tmp_path / "nope.toml")]) == 3
