#!/usr/bin/env python3
"""
Unit tests for scenario_runner module
"""

import pytest
import json
import sys
from pathlib import Path

import numpy as np

# Add app directory to path
app_dir = Path(__file__).parent.parent.parent / "app"
sys.path.insert(0, str(app_dir))

from config_loader import DEFAULT_OPTIONS, ConfigLoader
from errors import ParseError
from scenario_runner import (
    REPORT_FILE,
    SCHEMA_VERSION,
    ScenarioRunner,
    TaskOutcome,
    dump_json,
    resolve_options,
    run_scenario,
    run_tasks,
    write_outputs,
)
from scenario_validator import Task

SCHEMA_FILE = app_dir / "schema" / "report.schema.json"


def _task(index, **raw):
    params = {k: v for k, v in raw.items() if k != "type"}
    return Task(index=index, type=raw["type"], params=params, raw=raw)


def _without_timing(report):
    return {k: v for k, v in report.items() if k != "timing"}


@pytest.fixture
def options():
    return dict(DEFAULT_OPTIONS)


@pytest.mark.unit
class TestDumpJson:
    """Test canonical JSON output"""

    def test_sorted_keys_and_newline(self):
        text = dump_json({"b": 1, "a": 2})
        assert text == '{\n  "a": 2,\n  "b": 1\n}\n'

    def test_numpy_and_complex_values(self):
        data = json.loads(dump_json({"n": np.int64(3), "v": np.array([1.5]), "z": 1 + 2j}))
        assert data == {"n": 3, "v": [1.5], "z": [1.0, 2.0]}

    def test_unknown_type_rejected(self):
        with pytest.raises(TypeError):
            dump_json({"s": {1, 2}})


@pytest.mark.unit
class TestTaskOutcome:
    def test_ok_entry(self):
        outcome = TaskOutcome(0, "degree", payload={"degree": 2})
        assert outcome.to_dict() == {"index": 0, "type": "degree", "status": "ok", "result": {"degree": 2}}

    def test_error_entry(self):
        error = {"code": "Unresolved", "message": "m", "details": {}}
        entry = TaskOutcome(1, "degree", error=error).to_dict()
        assert entry["status"] == "error"
        assert "result" not in entry


@pytest.mark.unit
class TestScenarioRunner:
    """Test task execution and report assembly"""

    def test_degree_task(self, pow2_map, options):
        runner = ScenarioRunner(pow2_map, options)
        outcome = runner.execute(_task(0, type="degree", at=0j, rho=0.1))
        assert outcome.succeeded
        assert outcome.payload["degree"] == 2

    def test_domain_error_becomes_record(self, pow2_map, options):
        runner = ScenarioRunner(pow2_map, options)
        outcome = runner.execute(_task(0, type="degree", at=1.95 + 0j, rho=0.1))
        assert not outcome.succeeded
        assert outcome.error["code"] == "OutOfDomain"

    def test_unexpected_error_becomes_internal_error(self, pow2_map, options, mocker):
        mocker.patch("scenario_runner.local_degree", side_effect=RuntimeError("boom"))
        outcome = ScenarioRunner(pow2_map, options).execute(_task(0, type="degree", at=0j, rho=0.1))
        assert outcome.error["code"] == "InternalError"
        assert outcome.error["message"] == "boom"
        assert outcome.error["details"] == {"exception": "RuntimeError"}

    def test_failed_task_does_not_stop_later_tasks(self, pow2_map, options):
        tasks = [
            _task(0, type="degree", at=1.95 + 0j, rho=0.1),
            _task(1, type="degree", at=0j, rho=0.1),
        ]
        report, outcomes = ScenarioRunner(pow2_map, options).run(tasks, {"map": "pow2"})
        assert [t["status"] for t in report["tasks"]] == ["error", "ok"]
        assert report["succeeded"] is False
        assert len(report["timing"]["tasks"]) == 2

    def test_report_fields(self, pow2_map, options):
        report, _ = ScenarioRunner(pow2_map, options).run(
            [_task(0, type="degree", at=0j, rho=0.1)], {"map": "pow2"}
        )
        assert report["schema_version"] == SCHEMA_VERSION
        assert report["map"] == "pow2"
        assert report["scenario"] == {"map": "pow2"}
        assert report["succeeded"] is True

    def test_report_matches_schema(self, pow2_map, options):
        jsonschema = pytest.importorskip("jsonschema")
        tasks = [
            _task(0, type="degree", at=0j, rho=0.1),
            _task(1, type="degree", at=1.95 + 0j, rho=0.1),
        ]
        report, _ = ScenarioRunner(pow2_map, options).run(tasks, {"map": "pow2"})
        schema = json.loads(SCHEMA_FILE.read_text())
        jsonschema.validate(json.loads(dump_json(report)), schema)

    def test_reports_are_deterministic_apart_from_timing(self, pow2_map, options):
        tasks = [_task(0, type="degree", at=0.1 + 0.1j, rho=0.05)]
        first, _ = ScenarioRunner(pow2_map, options).run(tasks, {})
        second, _ = ScenarioRunner(pow2_map, options).run(tasks, {})
        assert dump_json(_without_timing(first)) == dump_json(_without_timing(second))


@pytest.mark.unit
class TestOptionsAndOutputs:
    """Test option precedence and written files"""

    def test_precedence(self, clean_env, temp_output_dir):
        config = ConfigLoader(temp_output_dir / "missing.yaml")
        options = resolve_options(config, {"cell": 0.02, "seed": 4}, {"cell": 0.05, "seed": None})
        assert options["cell"] == 0.05
        assert options["seed"] == 4
        assert options["tol"] == DEFAULT_OPTIONS["tol"]

    def test_write_outputs(self, pow2_map, options, temp_output_dir):
        report, outcomes = run_tasks(
            pow2_map,
            [{"type": "degree", "at": [0, 0], "rho": 0.1}, {"type": "degree", "at": [1.95, 0], "rho": 0.1}],
            options,
            {},
        )
        path = write_outputs(report, outcomes, temp_output_dir, render=[0, 1])
        assert path == temp_output_dir / REPORT_FILE
        assert json.loads(path.read_text())["tasks"][0]["result"]["degree"] == 2
        assert (temp_output_dir / "task-0.svg").exists()
        # failed tasks are not drawn
        assert not (temp_output_dir / "task-1.svg").exists()

    def test_run_tasks_rejects_invalid_record(self, pow2_map, options):
        with pytest.raises(ParseError) as exc_info:
            run_tasks(pow2_map, [{"type": "degree", "at": [0, 0], "rho": -1}], options, {})
        assert exc_info.value.field == "tasks[0].rho"

    def test_run_scenario(self, clean_env, temp_output_dir, sample_scenario):
        scenario = dict(sample_scenario, output=str(temp_output_dir / "out"), render=True)
        path = temp_output_dir / "scenario.json"
        path.write_text(json.dumps(scenario))
        report = run_scenario(path, config=ConfigLoader(temp_output_dir / "missing.yaml"))
        assert report["succeeded"]
        assert (temp_output_dir / "out" / REPORT_FILE).exists()
        assert (temp_output_dir / "out" / "task-0.svg").exists()

    def test_run_scenario_output_override(self, clean_env, temp_output_dir, sample_scenario):
        path = temp_output_dir / "scenario.json"
        path.write_text(json.dumps(dict(sample_scenario, output=str(temp_output_dir / "ignored"))))
        run_scenario(
            path,
            {"output": str(temp_output_dir / "cli"), "render": False},
            ConfigLoader(temp_output_dir / "missing.yaml"),
        )
        assert (temp_output_dir / "cli" / REPORT_FILE).exists()
        assert not (temp_output_dir / "ignored").exists()

    def test_unknown_map(self, clean_env, temp_output_dir, sample_scenario):
        path = temp_output_dir / "scenario.json"
        path.write_text(json.dumps(dict(sample_scenario, map="pow99")))
        with pytest.raises(ParseError) as exc_info:
            run_scenario(path, config=ConfigLoader(temp_output_dir / "missing.yaml"))
        assert exc_info.value.field == "map"
