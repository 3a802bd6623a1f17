import subprocess
import sys
from pathlib import Path

import numpy as np
import pytest

from swarmstage.cli import main
from swarmstage.localization import AnchorConstellation, default_constellation
from swarmstage.orchestrator import save_script
from swarmstage.scenarios import pursuit_script


def invoke(*argv):
    return main(list(argv))


class TestRun:
    def test_run_writes_trace(self, tmp_path, capsys):
        script = tmp_path / "p.yaml"
        save_script(pursuit_script(duration=2.0), script)
        out = tmp_path / "trace"
        assert invoke("run", str(script), "--seed", "7", "--out", str(out)) == 0
        assert (out / "tracks.csv").exists()
        assert (out / "meta.yaml").exists()

    def test_missing_script_file(self, tmp_path, capsys):
        rc = invoke("run", str(tmp_path / "nope.yaml"), "--out", str(tmp_path / "t"))
        assert rc == 1
        assert "no such file" in capsys.readouterr().err

    def test_shipped_scenario_by_name(self, tmp_path):
        # Scenario names resolve without a file on disk.
        from swarmstage.cli import _load_script_arg
        assert _load_script_arg("pursuit_uwb").name == "pursuit_uwb"

    def test_unknown_flag_exits_2(self):
        with pytest.raises(SystemExit) as e:
            invoke("run", "--frobnicate")
        assert e.value.code == 2


class TestCalibrate:
    def test_calibrate_roundtrip(self, tmp_path, capsys):
        truth = default_constellation().positions()[:, :2]
        d = np.linalg.norm(truth[:, None] - truth[None, :], axis=2)
        ranges = tmp_path / "ranges.csv"
        np.savetxt(ranges, d, delimiter=",")
        out = tmp_path / "anchors.csv"
        assert invoke("calibrate", str(ranges), "--out", str(out)) == 0
        con = AnchorConstellation.load(out)
        assert len(con) == 8

    def test_calibrate_too_few_anchors(self, tmp_path, capsys):
        ranges = tmp_path / "r.csv"
        np.savetxt(ranges, np.zeros((3, 3)), delimiter=",")
        rc = invoke("calibrate", str(ranges), "--out", str(tmp_path / "a.csv"))
        assert rc == 1


class TestExport:
    @pytest.fixture()
    def trace_dir(self, tmp_path):
        script = tmp_path / "p.yaml"
        save_script(pursuit_script(duration=2.0), script)
        out = tmp_path / "trace"
        assert invoke("run", str(script), "--seed", "1", "--out", str(out)) == 0
        return out

    def test_export_bandwidth(self, trace_dir, tmp_path):
        out = tmp_path / "fig"
        assert invoke("export", str(trace_dir), "--figure", "bandwidth",
                      "--out", str(out)) == 0
        assert (out / "bandwidth.csv").exists()
        assert (out / "bandwidth_plot.yaml").exists()

    def test_export_uwb(self, trace_dir, tmp_path):
        out = tmp_path / "fig"
        assert invoke("export", str(trace_dir), "--figure", "uwb",
                      "--out", str(out)) == 0
        assert list(out.glob("uwb_vs_truth_robot*.csv"))

    def test_export_missing_channel_diagnosed(self, tmp_path, capsys):
        # A trace with no uwb_raw rows (duration 0) names the channel.
        script = tmp_path / "p.yaml"
        save_script(pursuit_script(duration=0.0), script)
        tr = tmp_path / "t0"
        invoke("run", str(script), "--out", str(tr))
        rc = invoke("export", str(tr), "--figure", "uwb", "--out", str(tmp_path / "f"))
        assert rc == 1
        assert "uwb_raw" in capsys.readouterr().err


def test_console_entry_point_exists():
    result = subprocess.run(
        [sys.executable, "-m", "swarmstage.cli", "--help"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "run" in result.stdout and "serve" in result.stdout
