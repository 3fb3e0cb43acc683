"""Task specifications and the built-in 8-task suite"""

import hashlib
import json
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Tuple

from ..cleanup.cleanup_utils import write_json
from ..config.config import DEFAULT_VIEWS, EPISODE_LENGTHS, IMAGE_SIZE, KNOWN_VIEWS, TASK_FAMILIES
from ..utils.errors import ConfigError, TaskLookupError

Point = Tuple[float, float]
Color = Tuple[int, int, int]

# Marker colors (RGB)
COLORS = {
    "red": (220, 40, 40),
    "green": (40, 180, 60),
    "blue": (40, 80, 220),
    "yellow": (230, 200, 30),
    "cyan": (30, 200, 210),
    "magenta": (200, 50, 200),
    "orange": (235, 130, 30),
    "purple": (120, 60, 180),
}


@dataclass(frozen=True)
class Marker:
    """A colored disc drawn in the scene (goals, distractors, waypoints)."""

    position: Point
    color: Color


@dataclass(frozen=True)
class TaskSpec:
    """One task of the suite: family, instruction and goal geometry.

    For sequence tasks `waypoints` lists the points to visit in order and the
    last waypoint equals `goal`. For push tasks `block_start` is where the
    block is placed at reset and `goal` is where it has to end up.
    """

    task_id: int
    instruction: str
    family: str
    goal: Point
    tolerance: float
    max_steps: int
    color: Color = (0, 0, 0)
    block_start: Optional[Point] = None
    waypoints: Tuple[Point, ...] = ()
    markers: Tuple[Marker, ...] = ()

    def __post_init__(self):
        problems = []
        if self.family not in TASK_FAMILIES:
            problems.append(f"task {self.task_id}: family must be one of {list(TASK_FAMILIES)}, got {self.family!r}")
        if self.tolerance <= 0:
            problems.append(f"task {self.task_id}: tolerance must be > 0")
        if self.max_steps <= 0:
            problems.append(f"task {self.task_id}: T must be > 0")
        if self.family == "push" and self.block_start is None:
            problems.append(f"task {self.task_id}: push tasks need block_start")
        if self.family == "sequence" and len(self.waypoints) < 2:
            problems.append(f"task {self.task_id}: sequence tasks need at least two waypoints")
        if problems:
            raise ConfigError(problems)

    @property
    def targets(self):
        """Points the agent has to visit in order (sequence) or the single goal."""
        return self.waypoints if self.family == "sequence" else (self.goal,)

    def to_dict(self):
        out = {
            "task_id": self.task_id,
            "instruction": self.instruction,
            "family": self.family,
            "goal": list(self.goal),
            "tolerance": self.tolerance,
            "T": self.max_steps,
            "color": list(self.color),
            "markers": [{"position": list(m.position), "color": list(m.color)} for m in self.markers],
        }
        if self.block_start is not None:
            out["block_start"] = list(self.block_start)
        if self.waypoints:
            out["waypoints"] = [list(w) for w in self.waypoints]
        return out

    @classmethod
    def from_dict(cls, raw):
        try:
            return cls(
                task_id=int(raw["task_id"]),
                instruction=str(raw["instruction"]),
                family=str(raw["family"]),
                goal=tuple(float(v) for v in raw["goal"]),
                tolerance=float(raw["tolerance"]),
                max_steps=int(raw["T"]),
                color=tuple(int(v) for v in raw.get("color", (0, 0, 0))),
                block_start=tuple(float(v) for v in raw["block_start"]) if raw.get("block_start") else None,
                waypoints=tuple(tuple(float(v) for v in w) for w in raw.get("waypoints", ())),
                markers=tuple(
                    Marker(tuple(float(v) for v in m["position"]), tuple(int(v) for v in m["color"]))
                    for m in raw.get("markers", ())
                ),
            )
        except (KeyError, TypeError, ValueError) as e:
            raise ConfigError(f"Invalid task entry {raw!r}: {e}")


@dataclass(frozen=True)
class TaskSuite:
    """Ordered task list plus rendering settings shared by every task."""

    tasks: Tuple[TaskSpec, ...]
    image_size: int = IMAGE_SIZE
    views: Tuple[str, ...] = DEFAULT_VIEWS

    def __post_init__(self):
        problems = []
        ids = [t.task_id for t in self.tasks]
        if sorted(ids) != list(range(len(ids))):
            problems.append(f"task ids must be 0..{len(ids) - 1} without gaps, got {ids}")
        instructions = [t.instruction for t in self.tasks]
        if len(set(instructions)) != len(instructions):
            problems.append("instructions must be unique per task")
        for view in self.views:
            if view not in KNOWN_VIEWS:
                problems.append(f"unknown view {view!r} (known: {list(KNOWN_VIEWS)})")
        if problems:
            raise ConfigError(problems)

    def __len__(self):
        return len(self.tasks)

    def task(self, task_id):
        for t in self.tasks:
            if t.task_id == task_id:
                return t
        raise TaskLookupError(f"Unknown task_id {task_id} (suite has {len(self.tasks)} tasks)")

    def families(self):
        return {t.task_id: t.family for t in self.tasks}

    def to_dict(self):
        return {
            "image_size": self.image_size,
            "views": list(self.views),
            "tasks": [t.to_dict() for t in sorted(self.tasks, key=lambda t: t.task_id)],
        }

    @classmethod
    def from_dict(cls, raw, image_size=None, views=None):
        if not isinstance(raw, dict) or "tasks" not in raw:
            raise ConfigError("Suite JSON must be an object with a 'tasks' array")
        return cls(
            tasks=tuple(TaskSpec.from_dict(t) for t in raw["tasks"]),
            image_size=int(image_size if image_size is not None else raw.get("image_size", IMAGE_SIZE)),
            views=tuple(views if views is not None else raw.get("views", DEFAULT_VIEWS)),
        )

    def with_render(self, image_size, views):
        return TaskSuite(self.tasks, int(image_size), tuple(views))


def suite_hash(suite):
    """sha256 of the suite's canonical JSON (sorted keys, no whitespace)."""
    text = json.dumps(suite.to_dict(), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def default_suite(image_size=IMAGE_SIZE, views=DEFAULT_VIEWS):
    """4 reach, 2 push and 2 sequence tasks on the unit workspace."""
    reach_goals = [
        ("red", (0.2, 0.2)),
        ("green", (0.8, 0.2)),
        ("blue", (0.2, 0.8)),
        ("yellow", (0.8, 0.8)),
    ]
    # Every reach scene shows all four goals, so only the task variable tells them apart
    reach_markers = tuple(Marker(pos, COLORS[name]) for name, pos in reach_goals)
    tasks = []
    for name, pos in reach_goals:
        tasks.append(TaskSpec(
            task_id=len(tasks),
            instruction=f"reach the {name} goal",
            family="reach",
            goal=pos,
            tolerance=0.05,
            max_steps=EPISODE_LENGTHS["reach"],
            color=COLORS[name],
            markers=reach_markers,
        ))

    for name, start, goal in [("orange", (0.35, 0.5), (0.7, 0.5)), ("purple", (0.5, 0.35), (0.5, 0.7))]:
        tasks.append(TaskSpec(
            task_id=len(tasks),
            instruction=f"push the block onto the {name} target",
            family="push",
            goal=goal,
            tolerance=0.05,
            max_steps=EPISODE_LENGTHS["push"],
            color=COLORS[name],
            block_start=start,
            markers=(Marker(goal, COLORS[name]),),
        ))

    a, b = (0.3, 0.5), (0.7, 0.3)
    both = (Marker(a, COLORS["cyan"]), Marker(b, COLORS["magenta"]))
    for first, second, names in [(a, b, ("cyan", "magenta")), (b, a, ("magenta", "cyan"))]:
        tasks.append(TaskSpec(
            task_id=len(tasks),
            instruction=f"visit the {names[0]} marker, then the {names[1]} marker",
            family="sequence",
            goal=second,
            tolerance=0.05,
            max_steps=EPISODE_LENGTHS["sequence"],
            color=COLORS[names[1]],
            waypoints=(first, second),
            markers=both,
        ))
    return TaskSuite(tuple(tasks), int(image_size), tuple(views))


def load_suite(path, image_size=None, views=None):
    """Load a suite JSON file (task_id, family, instruction, goal, tolerance, T per task)."""
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"Suite file not found: {path}")
    try:
        with open(path, "r") as f:
            raw = json.load(f)
    except json.JSONDecodeError as e:
        raise ConfigError(f"Invalid JSON in suite file {path}: {e}")
    return TaskSuite.from_dict(raw, image_size=image_size, views=views)


def save_suite(suite, path):
    """Write a suite as JSON; returns the path."""
    return write_json(path, suite.to_dict())


def suite_from_config(suite_config):
    """Suite described by a SuiteConfig section (file or built-in default)."""
    if suite_config.path:
        return load_suite(suite_config.path, suite_config.image_size, suite_config.views)
    return default_suite(suite_config.image_size, suite_config.views)
