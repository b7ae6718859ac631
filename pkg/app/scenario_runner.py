#!/usr/bin/env python3
"""
Scenario Runner for branchcover
Executes validated tasks against one shared map and assembles the JSON report
"""

import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterable, List, Optional, Tuple, Union

import numpy as np

from branch_detector import MIN_SAMPLES, degree_conservation_check, detect_branch_points, local_degree
from config_loader import ConfigLoader
from diagnostics import DiagnosticsCollector
from errors import BranchCoverError, ParseError
from map_zoo import resolve_map
from normal_domain import NormalDomain, establish_normal_domain, is_normal_neighbourhood
from normal_form import build_normal_form, verify_normal_form
from path_lifting import enumerate_ray_lifts, lift_path
from planar_map import PlanarMap
from region import Grid, Polyline
from regularity import check_regularity
from scenario_validator import Scenario, ScenarioValidator, Task, load_scenario
from svg_renderer import render_svg, write_svg

logger = logging.getLogger(__name__)

SCHEMA_VERSION = 1
REPORT_FILE = "report.json"


@dataclass
class TaskOutcome:
    """Result of one task: a success payload or an error record"""

    index: int
    type: str
    payload: Optional[Dict[str, Any]] = None
    error: Optional[Dict[str, Any]] = None
    renderable: Any = field(default=None, repr=False)
    artifacts: Dict[str, Any] = field(default_factory=dict, repr=False)
    seconds: float = 0.0

    @property
    def succeeded(self) -> bool:
        return self.error is None

    def to_dict(self) -> Dict[str, Any]:
        entry: Dict[str, Any] = {"index": self.index, "type": self.type}
        if self.succeeded:
            entry["status"] = "ok"
            entry["result"] = self.payload
        else:
            entry["status"] = "error"
            entry["error"] = self.error
        return entry


def _json_default(value: Any) -> Any:
    if isinstance(value, np.generic):
        return value.item()
    if isinstance(value, np.ndarray):
        return value.tolist()
    if isinstance(value, complex):
        return [value.real, value.imag]
    raise TypeError(f"Object of type {type(value).__name__} is not JSON serializable")


def dump_json(data: Any) -> str:
    """Canonical JSON text: sorted keys, two-space indent, trailing newline"""
    return json.dumps(data, sort_keys=True, indent=2, default=_json_default) + "\n"


def _domain_summary(nd: NormalDomain) -> Dict[str, Any]:
    return nd.to_dict(include_members=False)


class ScenarioRunner:
    """Runs tasks sequentially against a shared map"""

    def __init__(
        self,
        planar_map: PlanarMap,
        options: Dict[str, Any],
        diagnostics: Optional[DiagnosticsCollector] = None,
    ):
        self.map = planar_map
        self.options = options
        self.diagnostics = diagnostics or DiagnosticsCollector()
        self._handlers: Dict[str, Callable[[Task], TaskOutcome]] = {
            "normal": self._run_normal,
            "lift": self._run_lift,
            "raylifts": self._run_raylifts,
            "degree": self._run_degree,
            "branch": self._run_branch,
            "factor": self._run_factor,
            "conservation": self._run_conservation,
            "regularity": self._run_regularity,
        }

    def _option(self, task: Task, key: str) -> Any:
        return task.get(key, self.options[key])

    def _grid(self, task: Task) -> Grid:
        return Grid.around(task.get("at"), self._option(task, "window"), self._option(task, "cell"), self.map.domain)

    def _domain(self, task: Task, require_neighbourhood: bool = False) -> NormalDomain:
        return establish_normal_domain(
            self.map,
            task.get("at"),
            self._grid(task),
            radius=task.get("radius"),
            require_neighbourhood=require_neighbourhood,
            fill_threshold=self.options["fill_threshold"],
            boundary_factor=self.options["boundary_factor"],
            seed=self.options["seed"],
        )

    def _run_normal(self, task: Task) -> TaskOutcome:
        nd = self._domain(task, task.get("neighbourhood", False))
        payload = _domain_summary(nd)
        payload["normal_neighbourhood"] = is_normal_neighbourhood(self.map, nd)
        return TaskOutcome(task.index, task.type, payload=payload, renderable=nd)

    def _run_lift(self, task: Task) -> TaskOutcome:
        nd = self._domain(task)
        beta = Polyline.through(task.get("path"))
        result = lift_path(self.map, nd, beta, task.get("start"), self._option(task, "tol"))
        payload = result.to_dict()
        payload["domain"] = _domain_summary(nd)
        return TaskOutcome(task.index, task.type, payload=payload, renderable=result)

    def _run_raylifts(self, task: Task) -> TaskOutcome:
        nd = self._domain(task, require_neighbourhood=True)
        direction = task.get("direction", 1 + 0j)
        lifts = enumerate_ray_lifts(
            self.map,
            nd,
            direction / abs(direction),
            self._option(task, "tol"),
            max_lifts=self._option(task, "max_lifts"),
            workers=self.options["workers"],
        )
        payload = {
            "count": len(lifts),
            "direction": [direction.real, direction.imag],
            "domain": _domain_summary(nd),
            "lifts": [lf.to_dict() for lf in lifts],
        }
        return TaskOutcome(task.index, task.type, payload=payload, renderable=lifts)

    def _run_degree(self, task: Task) -> TaskOutcome:
        result = local_degree(self.map, task.get("at"), task.get("rho"), samples=task.get("samples", MIN_SAMPLES))
        return TaskOutcome(task.index, task.type, payload=result.to_dict(), renderable=result)

    def _run_branch(self, task: Task) -> TaskOutcome:
        box = task.get("box")
        grid = Grid(box, self._option(task, "cell"))
        report = detect_branch_points(self.map, box, grid, workers=self.options["workers"])
        return TaskOutcome(task.index, task.type, payload=report.to_dict(), renderable=report)

    def _run_factor(self, task: Task) -> TaskOutcome:
        chart = build_normal_form(
            self.map,
            task.get("at"),
            self._grid(task),
            self._option(task, "tol"),
            radius=task.get("radius"),
            k=task.get("k"),
            seed=self.options["seed"],
            fill_threshold=self.options["fill_threshold"],
            boundary_factor=self.options["boundary_factor"],
        )
        verification = verify_normal_form(chart, probes=task.get("probes", 1000), seed=self.options["seed"])
        payload = chart.to_dict()
        payload["verification"] = verification.to_dict()
        return TaskOutcome(
            task.index, task.type, payload=payload, renderable=chart, artifacts={"chart": chart}
        )

    def _run_conservation(self, task: Task) -> TaskOutcome:
        nd = self._domain(task)
        report = degree_conservation_check(self.map, nd, probe_count=task.get("probes", 50), seed=self.options["seed"])
        payload = report.to_dict()
        payload["domain"] = _domain_summary(nd)
        return TaskOutcome(task.index, task.type, payload=payload, renderable=nd)

    def _run_regularity(self, task: Task) -> TaskOutcome:
        resolution = task.get("resolution", self.options["cell"])
        report = check_regularity(self.map, task.get("box"), resolution, seed=self.options["seed"])
        return TaskOutcome(task.index, task.type, payload=report.to_dict(), renderable=report)

    def execute(self, task: Task) -> TaskOutcome:
        """
        Run one task; domain errors become error records

        Args:
            task: Validated task

        Returns:
            TaskOutcome
        """
        logger.info(f"Task {task.index}: {task.type}")
        started = time.perf_counter()
        try:
            outcome = self._handlers[task.type](task)
        except BranchCoverError as e:
            logger.error(f"Task {task.index} ({task.type}) failed: {e.code}: {e.message}")
            outcome = TaskOutcome(task.index, task.type, error=e.to_dict())
        except Exception as e:
            logger.exception(f"Task {task.index} ({task.type}) raised an unexpected error")
            outcome = TaskOutcome(
                task.index,
                task.type,
                error={"code": "InternalError", "message": str(e), "details": {"exception": type(e).__name__}},
            )
        outcome.seconds = time.perf_counter() - started
        return outcome

    def run(self, tasks: List[Task], echo: Dict[str, Any]) -> Tuple[Dict[str, Any], List[TaskOutcome]]:
        """
        Run tasks in order and assemble the report

        Returns:
            Tuple of (report dict, outcomes)
        """
        outcomes = [self.execute(task) for task in tasks]
        report = {
            "schema_version": SCHEMA_VERSION,
            "scenario": echo,
            "map": self.map.label,
            "tasks": [outcome.to_dict() for outcome in outcomes],
            "succeeded": all(outcome.succeeded for outcome in outcomes),
            "versions": self.diagnostics.versions(),
            "timing": {
                "tasks": [outcome.seconds for outcome in outcomes],
                "total": sum(outcome.seconds for outcome in outcomes),
            },
        }
        failed = sum(1 for outcome in outcomes if not outcome.succeeded)
        logger.info(f"Ran {len(outcomes)} task(s), {failed} failed")
        return report, outcomes


def write_outputs(
    report: Dict[str, Any],
    outcomes: List[TaskOutcome],
    output_dir: Union[str, Path],
    render: Iterable[int] = (),
) -> Path:
    """
    Write report.json and one task-<i>.svg per successful task listed in `render`

    Returns:
        Path of the report file
    """
    output_dir = Path(output_dir)
    output_dir.mkdir(parents=True, exist_ok=True)
    report_path = output_dir / REPORT_FILE
    report_path.write_text(dump_json(report), encoding="utf-8")
    logger.info(f"Wrote {report_path}")
    drawn = set(render)
    for outcome in outcomes:
        if outcome.succeeded and outcome.index in drawn:
            title = f"task {outcome.index}: {outcome.type}"
            write_svg(output_dir / f"task-{outcome.index}.svg", render_svg(outcome.renderable, title))
    return report_path


def resolve_options(
    config: ConfigLoader, scenario_options: Optional[Dict[str, Any]], overrides: Optional[Dict[str, Any]]
) -> Dict[str, Any]:
    """Configuration, then scenario options, then command-line overrides (None values ignored)"""
    options = config.load_options()
    options.update(scenario_options or {})
    options.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return options


def _resolve_scenario_map(scenario: Scenario, base: Path) -> PlanarMap:
    identifier = scenario.map
    if identifier.startswith("sampled:"):
        target = Path(identifier[len("sampled:"):])
        if not target.is_absolute() and not target.exists():
            identifier = f"sampled:{base / target}"
    return resolve_map(identifier)


def run_tasks(
    planar_map: PlanarMap,
    raw_tasks: List[Dict[str, Any]],
    options: Dict[str, Any],
    echo: Dict[str, Any],
) -> Tuple[Dict[str, Any], List[TaskOutcome]]:
    """
    Validate raw task records and run them

    Raises:
        ParseError: if a task record is invalid
    """
    tasks = []
    for i, raw in enumerate(raw_tasks):
        is_valid, problems, params = ScenarioValidator.validate_task(raw)
        if not is_valid:
            name, message = problems[0]
            raise ParseError(f"tasks[{i}].{name}: {message}", field=f"tasks[{i}].{name}")
        tasks.append(Task(index=i, type=raw["type"], params=params, raw=raw))
    return ScenarioRunner(planar_map, options).run(tasks, echo)


def run_scenario(
    path: Union[str, Path],
    overrides: Optional[Dict[str, Any]] = None,
    config: Optional[ConfigLoader] = None,
) -> Dict[str, Any]:
    """
    Run a scenario file and write its report

    Args:
        path: Scenario JSON file
        overrides: Command-line values (cell, tol, seed, max_lifts, output, render)
        config: Configuration loader

    Returns:
        The report dict; report["succeeded"] is True iff every task succeeded

    Raises:
        ParseError: if the scenario does not parse or names an unknown map
    """
    path = Path(path)
    overrides = dict(overrides or {})
    render = bool(overrides.pop("render", False))
    output = overrides.pop("output", None)

    scenario = load_scenario(path)
    options = resolve_options(config or ConfigLoader(), scenario.options, overrides)
    planar_map = _resolve_scenario_map(scenario, path.parent)

    report, outcomes = ScenarioRunner(planar_map, options).run(scenario.tasks, scenario.raw)

    # --svg draws every task; otherwise a task-level render flag beats the scenario one
    drawn = [t.index for t in scenario.tasks if render or t.get("render", scenario.render)]
    output_dir = Path(output or scenario.output or options["output"])
    write_outputs(report, outcomes, output_dir, drawn)
    return report
