"""
Integration tests for the branchcover command line
Runs main() end to end and inspects stdout and the written files
"""

import pytest
import json
import sys
from pathlib import Path

# Add app directory to path
app_dir = Path(__file__).parent.parent.parent / "app"
sys.path.insert(0, str(app_dir))

from main import EXIT_OK, EXIT_TASK_FAILED, EXIT_USAGE, attach_coordinates, build_parser, main, read_path_argument
from scenario_runner import resolve_options


def _stdout_json(capsys):
    return json.loads(capsys.readouterr().out)


@pytest.mark.integration
class TestParser:
    """Test argument parsing"""

    def test_map_is_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args(["degree", "--at", "0,0", "--rho", "0.1"])

    def test_global_flags_after_subcommand(self):
        argv = ["branch", "--map", "cubic", "--box", "-2,-2,2,2", "--cell", "0.05", "--seed", "3", "--svg"]
        args = build_parser().parse_args(attach_coordinates(argv))
        assert args.box == "-2,-2,2,2"
        assert args.cell == 0.05
        assert args.seed == 3
        assert args.svg is True


@pytest.mark.integration
class TestCommands:
    """Test single-task subcommands"""

    def test_degree(self, clean_env, temp_output_dir, capsys):
        code = main(["degree", "--map", "pow3", "--at", "0,0", "--rho", "0.1", "--out", str(temp_output_dir)])
        assert code == EXIT_OK
        entry = _stdout_json(capsys)
        assert entry["status"] == "ok"
        assert entry["result"]["degree"] == 3
        report = json.loads((temp_output_dir / "report.json").read_text())
        assert report["tasks"][0] == entry

    def test_failed_task_exit_code(self, clean_env, temp_output_dir, capsys):
        code = main(["degree", "--map", "pow2", "--at", "1.95,0", "--rho", "0.1", "--out", str(temp_output_dir)])
        assert code == EXIT_TASK_FAILED
        assert _stdout_json(capsys)["error"]["code"] == "OutOfDomain"

    def test_bad_point_is_usage_error(self, clean_env, temp_output_dir, capsys):
        code = main(["degree", "--map", "pow2", "--at", "zero", "--rho", "0.1", "--out", str(temp_output_dir)])
        assert code == EXIT_USAGE
        assert _stdout_json(capsys)["code"] == "ParseError"

    def test_unknown_map_is_usage_error(self, clean_env, temp_output_dir, capsys):
        code = main(["degree", "--map", "nope", "--at", "0,0", "--rho", "0.1", "--out", str(temp_output_dir)])
        assert code == EXIT_USAGE
        assert _stdout_json(capsys)["details"]["field"] == "map"

    def test_branch_with_svg(self, clean_env, temp_output_dir, capsys):
        code = main(
            ["branch", "--map", "pow2", "--box", "-0.5,-0.5,0.5,0.5", "--cell", "0.05",
             "--svg", "--out", str(temp_output_dir)]
        )
        assert code == EXIT_OK
        assert len(_stdout_json(capsys)["result"]["branch_points"]) == 1
        assert "deg 2" in (temp_output_dir / "task-0.svg").read_text()

    def test_factor_writes_chart(self, clean_env, temp_output_dir, capsys):
        code = main(
            ["factor", "--map", "pow2", "--at", "0,0", "--radius", "0.25", "--window", "0.7",
             "--cell", "0.02", "--tol", "0.01", "--probes", "200", "--out", str(temp_output_dir)]
        )
        assert code == EXIT_OK
        assert _stdout_json(capsys)["result"]["k"] == 2
        chart = json.loads((temp_output_dir / "chart.json").read_text())
        assert len(chart["table"]["cells"]) == len(chart["table"]["psi"])

    def test_zoo_list(self, clean_env, capsys):
        assert main(["zoo", "list"]) == EXIT_OK
        out = capsys.readouterr().out
        assert "pow2" in out
        assert "winding2" in out

    def test_diagnostics(self, clean_env, capsys):
        assert main(["diagnostics"]) == EXIT_OK
        assert capsys.readouterr().out.startswith("# branchcover diagnostics")

    def test_env_configuration_error(self, clean_env, temp_output_dir, monkeypatch, capsys):
        monkeypatch.setenv("BRANCHCOVER_CELL", "-1")
        assert main(["zoo", "list"]) == EXIT_USAGE


@pytest.mark.integration
class TestRunCommand:
    """Test scenario runs"""

    def _write(self, directory, data):
        path = directory / "scenario.json"
        path.write_text(json.dumps(data, indent=2))
        return path

    def test_run_scenario(self, clean_env, temp_output_dir, sample_scenario):
        path = self._write(temp_output_dir, sample_scenario)
        out = temp_output_dir / "out"
        assert main(["run", str(path), "--out", str(out), "--svg"]) == EXIT_OK
        report = json.loads((out / "report.json").read_text())
        assert report["succeeded"] is True
        assert (out / "task-0.svg").exists()

    def test_run_with_failing_task(self, clean_env, temp_output_dir, sample_scenario):
        data = dict(sample_scenario)
        data["tasks"] = sample_scenario["tasks"] + [{"type": "degree", "at": [1.95, 0], "rho": 0.1}]
        path = self._write(temp_output_dir, data)
        assert main(["run", str(path), "--out", str(temp_output_dir / "out")]) == EXIT_TASK_FAILED

    def test_parse_error_names_field_and_line(self, clean_env, temp_output_dir, capsys):
        data = {"map": "pow2", "tasks": [{"type": "normal", "at": [0, 0], "radius": -1}]}
        path = self._write(temp_output_dir, data)
        assert main(["run", str(path), "--out", str(temp_output_dir / "out")]) == EXIT_USAGE
        error = _stdout_json(capsys)
        assert error["details"]["field"] == "tasks[0].radius"
        assert isinstance(error["details"]["line"], int)
        assert not (temp_output_dir / "out").exists()


@pytest.mark.integration
class TestFlagNames:
    """Test alternate flag names and polyline files"""

    LIFT = ["--radius", "0.25", "--window", "0.7", "--cell", "0.01", "--tol", "0.01"]

    def test_lift_with_center_from_and_path_file(self, clean_env, temp_output_dir, capsys):
        path_file = temp_output_dir / "beta.txt"
        path_file.write_text("# target path\n0.04 0\n0.16,0\n\n")
        argv = ["lift", "--map", "pow2", "--center", "0,0", "--from", "0.2,0", "--path", str(path_file)]
        code = main(argv + self.LIFT + ["--out", str(temp_output_dir / "out")])
        assert code == EXIT_OK
        result = _stdout_json(capsys)["result"]
        assert result["end"][0] == pytest.approx(0.4, abs=0.02)
        assert len(result["target"]["vertices"]) >= 2

    def test_inline_path_matches_file(self, clean_env, temp_output_dir, capsys):
        path_file = temp_output_dir / "beta.txt"
        path_file.write_text("0.04,0\n0.16,0\n")
        ends = []
        for path in (str(path_file), "0.04,0;0.16,0"):
            argv = ["lift", "--map", "pow2", "--at", "0,0", "--start", "0.2,0", "--path", path]
            assert main(argv + self.LIFT + ["--out", str(temp_output_dir / "out")]) == EXIT_OK
            ends.append(_stdout_json(capsys)["result"]["end"])
        assert ends[0] == ends[1]

    def test_raylifts_with_dir(self, clean_env, temp_output_dir, capsys):
        argv = ["raylifts", "--map", "pow2", "--center", "0,0", "--radius", "0.25", "--window", "0.7",
                "--cell", "0.01", "--tol", "0.01", "--dir", "-1,0", "--out", str(temp_output_dir)]
        assert main(argv) == EXIT_OK
        assert _stdout_json(capsys)["result"]["count"] == 2

    def test_read_path_argument(self, temp_output_dir):
        path_file = temp_output_dir / "beta.txt"
        path_file.write_text("0 0  # start\n1 1\n")
        assert read_path_argument(str(path_file)) == ["0 0", "1 1"]
        assert read_path_argument("0,0;1,1;") == ["0,0", "1,1"]


@pytest.mark.integration
class TestThresholdFlags:
    """Test verification thresholds set from the command line"""

    NORMAL = ["normal", "--map", "pow2", "--at", "0,0", "--radius", "0.25", "--window", "0.7", "--cell", "0.02"]

    def test_thresholds_reach_the_evidence(self, clean_env, temp_output_dir, capsys):
        argv = self.NORMAL + ["--fill-threshold", "0.95", "--boundary-factor", "4", "--out", str(temp_output_dir)]
        assert main(argv) == EXIT_OK
        evidence = _stdout_json(capsys)["result"]["evidence"]
        assert evidence["fill_threshold"] == 0.95
        assert evidence["boundary_threshold"] == pytest.approx(4 * 0.02 * evidence["lipschitz"])

    def test_thresholds_override_configuration(self, clean_env, temp_output_dir, monkeypatch, mocker):
        monkeypatch.setenv("BRANCHCOVER_CELL", "0.05")
        spy = mocker.patch("main.resolve_options", wraps=resolve_options)
        argv = self.NORMAL + ["--fill-threshold", "0.9", "--out", str(temp_output_dir)]
        assert main(argv) == EXIT_OK
        overrides = spy.call_args[0][2]
        assert overrides["fill_threshold"] == 0.9
        assert overrides["cell"] == 0.02
        assert "boundary_factor" not in overrides

    @pytest.mark.parametrize(
        "flag,value", [("--fill-threshold", "1.5"), ("--fill-threshold", "0"), ("--boundary-factor", "-1")]
    )
    def test_out_of_range_threshold(self, clean_env, temp_output_dir, capsys, flag, value):
        assert main(self.NORMAL + [flag, value, "--out", str(temp_output_dir)]) == EXIT_USAGE
        assert _stdout_json(capsys)["details"]["field"] == flag
