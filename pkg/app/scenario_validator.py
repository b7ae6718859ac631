#!/usr/bin/env python3
"""
Scenario Validator for branchcover
Parses scenario files and validates every task before anything runs
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from errors import ParseError
from planar_map import Rect

logger = logging.getLogger(__name__)

Problem = Tuple[str, str]


@dataclass(frozen=True)
class Task:
    """One validated scenario task; `params` holds parsed values (points as complex, boxes as Rect)"""

    index: int
    type: str
    params: Dict[str, Any]
    raw: Dict[str, Any] = field(repr=False)

    def get(self, key: str, default: Any = None) -> Any:
        return self.params.get(key, default)


@dataclass(frozen=True)
class Scenario:
    map: str
    tasks: List[Task]
    output: Optional[str] = None
    render: bool = False
    options: Dict[str, Any] = field(default_factory=dict)
    raw: Dict[str, Any] = field(default_factory=dict, repr=False)


class ScenarioValidator:
    """Validates scenario documents"""

    TASK_TYPES = ("normal", "lift", "raylifts", "degree", "branch", "factor", "conservation", "regularity")

    # Required fields for each task type
    REQUIRED_FIELDS = {
        "normal": ["at"],
        "lift": ["at", "path", "start"],
        "raylifts": ["at"],
        "degree": ["at", "rho"],
        "branch": ["box"],
        "factor": ["at"],
        "conservation": ["at"],
        "regularity": ["box"],
    }

    # Optional fields for each task type
    OPTIONAL_FIELDS = {
        "normal": ["radius", "window", "cell", "neighbourhood"],
        "lift": ["radius", "window", "cell", "tol"],
        "raylifts": ["direction", "radius", "window", "cell", "tol", "max_lifts"],
        "degree": ["samples"],
        "branch": ["cell"],
        "factor": ["radius", "window", "cell", "tol", "k", "probes"],
        "conservation": ["radius", "window", "cell", "probes"],
        "regularity": ["resolution"],
    }

    # Field kinds: point, points, box, positive, fraction, count, bool, string
    FIELD_KINDS = {
        "at": "point",
        "start": "point",
        "direction": "point",
        "path": "points",
        "box": "box",
        "rho": "positive",
        "radius": "positive",
        "window": "positive",
        "cell": "positive",
        "tol": "positive",
        "resolution": "positive",
        "samples": "count",
        "probes": "count",
        "k": "count",
        "max_lifts": "count",
        "neighbourhood": "bool",
    }

    # Top-level scenario options overriding the configuration
    OPTION_KINDS = {
        "cell": "positive",
        "tol": "positive",
        "window": "positive",
        "seed": "seed",
        "max_lifts": "count",
        "workers": "count",
        "fill_threshold": "fraction",
        "boundary_factor": "positive",
    }

    @staticmethod
    def parse_point(value: Any) -> complex:
        """
        Parse a point given as [x, y] or "x,y"

        Raises:
            ValueError: if the value is not a finite point
        """
        if isinstance(value, str):
            parts = [p for p in re.split(r"[,\s]+", value.strip()) if p]
        elif isinstance(value, (list, tuple)):
            parts = list(value)
        else:
            raise ValueError(f"expected [x, y] or 'x,y', got {value!r}")
        if len(parts) != 2 or any(isinstance(p, bool) for p in parts):
            raise ValueError(f"expected two coordinates, got {value!r}")
        x, y = float(parts[0]), float(parts[1])
        if not (math.isfinite(x) and math.isfinite(y)):
            raise ValueError(f"coordinates must be finite, got {value!r}")
        return complex(x, y)

    @staticmethod
    def parse_box(value: Any) -> Rect:
        """Parse a rectangle given as [x0, y0, x1, y1] or "x0,y0,x1,y1" """
        if isinstance(value, str):
            parts = [p for p in re.split(r"[,\s]+", value.strip()) if p]
        elif isinstance(value, (list, tuple)):
            parts = list(value)
        else:
            raise ValueError(f"expected [x0, y0, x1, y1], got {value!r}")
        if len(parts) != 4 or any(isinstance(p, bool) for p in parts):
            raise ValueError(f"expected four numbers, got {value!r}")
        return Rect(*(float(p) for p in parts))

    @staticmethod
    def parse_positive(value: Any) -> float:
        if isinstance(value, bool):
            raise ValueError(f"expected a number, got {value!r}")
        number = float(value)
        if not (math.isfinite(number) and number > 0):
            raise ValueError(f"must be a positive number, got {value!r}")
        return number

    @staticmethod
    def parse_count(value: Any) -> int:
        if isinstance(value, bool) or not isinstance(value, int) or value < 1:
            raise ValueError(f"must be a positive integer, got {value!r}")
        return value

    @staticmethod
    def parse_field(kind: str, value: Any) -> Any:
        """
        Parse one field value by kind

        Raises:
            ValueError: with a message describing the problem
        """
        if kind == "point":
            return ScenarioValidator.parse_point(value)
        if kind == "points":
            if not isinstance(value, (list, tuple)) or len(value) < 2:
                raise ValueError("expected a list of at least two points")
            return [ScenarioValidator.parse_point(v) for v in value]
        if kind == "box":
            return ScenarioValidator.parse_box(value)
        if kind == "positive":
            return ScenarioValidator.parse_positive(value)
        if kind == "fraction":
            number = ScenarioValidator.parse_positive(value)
            if number > 1:
                raise ValueError(f"must be in (0, 1], got {value!r}")
            return number
        if kind == "count":
            return ScenarioValidator.parse_count(value)
        if kind == "seed":
            if isinstance(value, bool) or not isinstance(value, int) or value < 0:
                raise ValueError(f"must be a nonnegative integer, got {value!r}")
            return value
        if kind == "bool":
            if not isinstance(value, bool):
                raise ValueError(f"must be true or false, got {value!r}")
            return value
        raise ValueError(f"unknown field kind {kind}")

    @staticmethod
    def validate_task(task: Any) -> Tuple[bool, List[Problem], Dict[str, Any]]:
        """
        Validate a single task record

        Args:
            task: Task mapping with a "type" key

        Returns:
            Tuple of (is_valid, list of (field, message), parsed params)
        """
        problems: List[Problem] = []
        parsed: Dict[str, Any] = {}

        if not isinstance(task, dict):
            return False, [("task", f"must be an object, got {type(task).__name__}")], parsed

        task_type = task.get("type")
        if task_type not in ScenarioValidator.TASK_TYPES:
            known = ", ".join(ScenarioValidator.TASK_TYPES)
            return False, [("type", f"unknown task type {task_type!r}, expected one of {known}")], parsed

        required = ScenarioValidator.REQUIRED_FIELDS[task_type]
        allowed = set(required) | set(ScenarioValidator.OPTIONAL_FIELDS[task_type]) | {"type", "render"}

        for name in required:
            if name not in task:
                problems.append((name, f"missing required field for {task_type}"))

        for name, value in task.items():
            if name not in allowed:
                problems.append((name, f"unknown field for {task_type}"))
                continue
            if name == "type":
                continue
            kind = "bool" if name == "render" else ScenarioValidator.FIELD_KINDS[name]
            try:
                parsed[name] = ScenarioValidator.parse_field(kind, value)
            except (TypeError, ValueError) as e:
                problems.append((name, str(e)))

        direction = parsed.get("direction")
        if direction is not None and direction == 0:
            problems.append(("direction", "must be nonzero"))

        return len(problems) == 0, problems, parsed

    @staticmethod
    def validate_scenario(data: Any) -> Tuple[bool, List[Tuple[Optional[int], str, str]]]:
        """
        Validate a whole scenario document

        Returns:
            Tuple of (is_valid, list of (task index or None, field, message))
        """
        problems: List[Tuple[Optional[int], str, str]] = []
        if not isinstance(data, dict):
            return False, [(None, "scenario", f"must be an object, got {type(data).__name__}")]

        if not isinstance(data.get("map"), str) or not data.get("map"):
            problems.append((None, "map", "must be a map identifier or 'sampled:<path>'"))
        if "output" in data and not isinstance(data["output"], str):
            problems.append((None, "output", "must be a directory path"))
        if "render" in data and not isinstance(data["render"], bool):
            problems.append((None, "render", "must be true or false"))
        for name, kind in ScenarioValidator.OPTION_KINDS.items():
            if name in data:
                try:
                    ScenarioValidator.parse_field(kind, data[name])
                except (TypeError, ValueError) as e:
                    problems.append((None, name, str(e)))

        known = {"map", "tasks", "output", "render", "description"} | set(ScenarioValidator.OPTION_KINDS)
        for name in sorted(set(data) - known):
            problems.append((None, name, "unknown scenario field"))

        tasks = data.get("tasks")
        if not isinstance(tasks, list) or not tasks:
            problems.append((None, "tasks", "must be a non-empty list of task records"))
            return False, problems

        for i, task in enumerate(tasks):
            _, task_problems, _ = ScenarioValidator.validate_task(task)
            problems.extend((i, name, message) for name, message in task_problems)

        return len(problems) == 0, problems


def _task_spans(text: str) -> List[Tuple[int, int]]:
    """Character spans of the objects in the top-level "tasks" array"""
    match = re.search(r'"tasks"\s*:\s*\[', text)
    if not match:
        return []
    spans: List[Tuple[int, int]] = []
    depth, start = 0, 0
    in_string = escaped = False
    for pos in range(match.end(), len(text)):
        char = text[pos]
        if in_string:
            if escaped:
                escaped = False
            elif char == "\\":
                escaped = True
            elif char == '"':
                in_string = False
            continue
        if char == '"':
            in_string = True
        elif char in "{[":
            if depth == 0:
                start = pos
            depth += 1
        elif char in "}]":
            if depth == 0:
                break
            depth -= 1
            if depth == 0:
                spans.append((start, pos + 1))
    return spans


def _line_of(text: str, pos: int) -> int:
    return text.count("\n", 0, pos) + 1


def locate_field(text: str, task_index: Optional[int], name: str) -> Optional[int]:
    """Best-effort line number of a field, inside the given task when an index is given"""
    lo, hi = 0, len(text)
    if task_index is not None:
        spans = _task_spans(text)
        if task_index >= len(spans):
            return None
        lo, hi = spans[task_index]
    match = re.compile(r'"%s"\s*:' % re.escape(name)).search(text, lo, hi)
    return _line_of(text, match.start() if match else lo)


def parse_scenario_text(text: str, source: str = "<scenario>") -> Scenario:
    """
    Parse and validate scenario JSON

    Args:
        text: Scenario document
        source: Name used in messages

    Returns:
        Scenario

    Raises:
        ParseError: on the first problem, with line and field
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ParseError(f"{source}: invalid JSON: {e.msg}", line=e.lineno, field="scenario")

    is_valid, problems = ScenarioValidator.validate_scenario(data)
    if not is_valid:
        for task_index, name, message in problems:
            where = f"tasks[{task_index}].{name}" if task_index is not None else name
            logger.debug(f"{source}: {where}: {message}")
        task_index, name, message = problems[0]
        where = f"tasks[{task_index}].{name}" if task_index is not None else name
        raise ParseError(
            f"{source}: {where}: {message}",
            line=locate_field(text, task_index, name),
            field=where,
            details={"problems": len(problems)},
        )

    tasks = []
    for i, raw in enumerate(data["tasks"]):
        _, _, params = ScenarioValidator.validate_task(raw)
        tasks.append(Task(index=i, type=raw["type"], params=params, raw=raw))

    options = {
        name: ScenarioValidator.parse_field(kind, data[name])
        for name, kind in ScenarioValidator.OPTION_KINDS.items()
        if name in data
    }
    scenario = Scenario(
        map=data["map"],
        tasks=tasks,
        output=data.get("output"),
        render=bool(data.get("render", False)),
        options=options,
        raw=data,
    )
    logger.info(f"Loaded scenario {source}: map {scenario.map}, {len(tasks)} task(s)")
    return scenario


def load_scenario(path: Union[str, Path]) -> Scenario:
    """Read and validate a scenario file"""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise ParseError(f"Cannot read scenario {path}: {e}", field="scenario")
    return parse_scenario_text(text, str(path))
