"""Constrained grid worlds: the model of the world.

A task is a rectangular, 4-connected grid with three kinds of constraints:
walls (forbidden states), forbidden ``(cell, move)`` pairs and per-cell
penalties (state features that cost reward when entered).  Coordinates have
their origin at the top-left corner; ``Up`` decrements ``y``.

Grids are immutable once built, and the dynamics take the random stream as an
argument, so a single :class:`TaskSpec` can be shared freely.
"""

from __future__ import annotations

import enum
import json
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, NamedTuple


class Action(enum.Enum):
    """The four moves, declared in canonical (tie-breaking) order."""

    UP = "Up"
    DOWN = "Down"
    LEFT = "Left"
    RIGHT = "Right"

    @property
    def delta(self) -> tuple[int, int]:
        return _DELTAS[self]

    @classmethod
    def parse(cls, name: str) -> "Action":
        try:
            return cls(name)
        except ValueError:
            raise ValueError(f"unknown action {name!r}") from None


_DELTAS = {
    Action.UP: (0, -1),
    Action.DOWN: (0, 1),
    Action.LEFT: (-1, 0),
    Action.RIGHT: (1, 0),
}

ACTIONS: tuple[Action, ...] = tuple(Action)


class Cell(NamedTuple):
    x: int
    y: int

    def step(self, action: Action) -> "Cell":
        dx, dy = action.delta
        return Cell(self.x + dx, self.y + dy)


class State(NamedTuple):
    cell: Cell
    steps_taken: int = 0


class TaskError(ValueError):
    """Base class for grid-file problems; ``field`` names the culprit."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


class TaskParseError(TaskError):
    pass


class TaskValidationError(TaskError):
    pass


@dataclass(frozen=True)
class GridSpec:
    width: int
    height: int
    start: Cell
    goal: Cell
    walls: frozenset[Cell] = frozenset()
    # sorted ((cell, penalty), ...) so the grid stays hashable
    features: tuple[tuple[Cell, float], ...] = ()
    forbidden_moves: frozenset[tuple[Cell, Action]] = frozenset()
    step_cost: float = 1.0
    goal_reward: float = 10.0
    slip_prob: float = 0.0
    max_steps: int = 20
    _penalty: dict = field(default_factory=dict, init=False, repr=False, compare=False, hash=False)

    def __post_init__(self):
        object.__setattr__(self, "start", Cell(*self.start))
        object.__setattr__(self, "goal", Cell(*self.goal))
        object.__setattr__(self, "walls", frozenset(Cell(*c) for c in self.walls))
        if isinstance(self.features, Mapping):
            items = self.features.items()
        else:
            items = self.features
        feats = tuple(sorted((Cell(*c), float(p)) for c, p in items))
        object.__setattr__(self, "features", feats)
        object.__setattr__(
            self,
            "forbidden_moves",
            frozenset((Cell(*c), Action(a)) for c, a in self.forbidden_moves),
        )
        object.__setattr__(self, "_penalty", dict(feats))

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell.x < self.width and 0 <= cell.y < self.height

    def penalty(self, cell: Cell) -> float:
        return self._penalty.get(cell, 0.0)

    @property
    def max_penalty(self) -> float:
        return max((p for _, p in self.features), default=0.0)

    def cells(self) -> Iterable[Cell]:
        for y in range(self.height):
            for x in range(self.width):
                yield Cell(x, y)


@dataclass(frozen=True)
class TaskSpec:
    task_id: str
    grid: GridSpec
    r_max: float
    r_min: float
    description: str = ""

    @classmethod
    def from_grid(
        cls,
        task_id: str,
        grid: GridSpec,
        r_min: float | None = None,
        r_max: float | None = None,
        description: str = "",
    ) -> "TaskSpec":
        """Build a task, filling the default return bounds and validating."""
        if r_max is None:
            r_max = grid.goal_reward
        if r_min is None:
            r_min = -(grid.step_cost + grid.max_penalty) * grid.max_steps
        task = cls(task_id, grid, float(r_max), float(r_min), description)
        validate_task(task)
        return task

    def normalize(self, value: float) -> float:
        """Map a return onto [0, 1] using the task's return bounds."""
        return clamp01((value - self.r_min) / (self.r_max - self.r_min))


def clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def legal_actions(grid: GridSpec, state: State | Cell) -> tuple[Action, ...]:
    cell = state.cell if isinstance(state, State) else state
    out = []
    for a in ACTIONS:
        nxt = cell.step(a)
        if grid.in_bounds(nxt) and nxt not in grid.walls and (cell, a) not in grid.forbidden_moves:
            out.append(a)
    return tuple(out)


def transition(grid: GridSpec, state: State, action: Action, rng) -> State:
    """Sample the successor state.

    With probability ``slip_prob`` the agent moves as if it had chosen one of
    the *other* legal actions, picked uniformly.
    """
    legal = legal_actions(grid, state)
    if action not in legal:
        raise ValueError(f"illegal action {action.value} at {tuple(state.cell)}")
    if is_terminal(grid, state):
        raise ValueError(f"transition from terminal state {state}")
    taken = action
    if grid.slip_prob > 0.0 and len(legal) > 1 and rng.random() < grid.slip_prob:
        others = [a for a in legal if a is not action]
        taken = others[rng.randbelow(len(others))]
    return State(state.cell.step(taken), state.steps_taken + 1)


def successor_distribution(grid: GridSpec, cell: Cell, action: Action) -> list[tuple[float, Cell]]:
    """Exact ``(probability, next_cell)`` pairs for one intended move."""
    legal = legal_actions(grid, cell)
    eps = grid.slip_prob
    if len(legal) == 1 or eps == 0.0:
        return [(1.0, cell.step(action))]
    out = [(1.0 - eps, cell.step(action))] if eps < 1.0 else []
    share = eps / (len(legal) - 1)
    out.extend((share, cell.step(a)) for a in legal if a is not action)
    return out


def reward(grid: GridSpec, state: State, action: Action, next: State) -> float:
    r = -grid.step_cost - grid.penalty(next.cell)
    if next.cell == grid.goal:
        r += grid.goal_reward
    return r


def is_terminal(grid: GridSpec, state: State) -> bool:
    return state.cell == grid.goal or state.steps_taken >= grid.max_steps


def enumerate_reachable(grid: GridSpec) -> set[Cell]:
    """Breadth-first flood fill from the start; the goal is not expanded."""
    seen = {grid.start}
    queue = deque([grid.start])
    while queue:
        cell = queue.popleft()
        if cell == grid.goal:
            continue
        for a in legal_actions(grid, cell):
            nxt = cell.step(a)
            if nxt not in seen:
                seen.add(nxt)
                queue.append(nxt)
    return seen


def validate_task(task: TaskSpec) -> None:
    g = task.grid
    if g.width < 1:
        raise TaskValidationError("width", "must be a positive integer")
    if g.height < 1:
        raise TaskValidationError("height", "must be a positive integer")
    if g.max_steps < 1:
        raise TaskValidationError("max_steps", "must be a positive integer")
    for name, cell in (("start", g.start), ("goal", g.goal)):
        if not g.in_bounds(cell):
            raise TaskValidationError(name, f"{list(cell)} is out of bounds")
        if cell in g.walls:
            raise TaskValidationError(name, f"{list(cell)} is a wall")
    for cell in g.walls:
        if not g.in_bounds(cell):
            raise TaskValidationError("walls", f"{list(cell)} is out of bounds")
    for cell, p in g.features:
        if p < 0:
            raise TaskValidationError("features", f"negative penalty {p} at {list(cell)}")
    if g.step_cost < 0:
        raise TaskValidationError("step_cost", "must be nonnegative")
    if not 0.0 <= g.slip_prob <= 1.0:
        raise TaskValidationError("slip_prob", "must lie in [0, 1]")
    if not task.r_min < task.r_max:
        raise TaskValidationError("r_min", f"r_min {task.r_min} must be below r_max {task.r_max}")
    reachable = enumerate_reachable(g)
    if g.goal not in reachable:
        raise TaskValidationError("goal", f"{list(g.goal)} is unreachable from start")
    for cell in reachable:
        if cell != g.goal and not legal_actions(g, cell):
            raise TaskValidationError("forbidden_moves", f"reachable cell {list(cell)} has no legal move")


# -- grid files ---------------------------------------------------------------

_REQUIRED = ("task_id", "width", "height", "start", "goal", "step_cost", "goal_reward", "max_steps")


def _cell(value: Any, where: str) -> Cell:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise TaskParseError(where, f"expected [x, y] integer pair, got {value!r}")
    return Cell(*value)


def _number(doc: Mapping, key: str, kind=float) -> Any:
    value = doc[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise TaskParseError(key, f"expected a number, got {value!r}")
    if kind is int:
        if isinstance(value, float) and not value.is_integer():
            raise TaskParseError(key, f"expected an integer, got {value!r}")
        return int(value)
    return float(value)


def task_from_dict(doc: Mapping[str, Any]) -> TaskSpec:
    if not isinstance(doc, Mapping):
        raise TaskParseError("document", "top level must be an object")
    for key in _REQUIRED:
        if key not in doc:
            raise TaskParseError(key, "missing required key")
    if not isinstance(doc["task_id"], str):
        raise TaskParseError("task_id", "expected a string")

    walls = [_cell(c, "walls") for c in doc.get("walls", [])]
    features = []
    for i, item in enumerate(doc.get("features", [])):
        try:
            features.append((_cell(item["cell"], f"features[{i}].cell"), _number(item, "penalty")))
        except (KeyError, TypeError):
            raise TaskParseError(f"features[{i}]", "expected {\"cell\": [x, y], \"penalty\": number}") from None
    forbidden = []
    for i, item in enumerate(doc.get("forbidden_moves", [])):
        try:
            forbidden.append((_cell(item["cell"], f"forbidden_moves[{i}].cell"), Action.parse(item["action"])))
        except (KeyError, TypeError, ValueError):
            raise TaskParseError(f"forbidden_moves[{i}]", "expected {\"cell\": [x, y], \"action\": Up|Down|Left|Right}") from None

    grid = GridSpec(
        width=_number(doc, "width", int),
        height=_number(doc, "height", int),
        start=_cell(doc["start"], "start"),
        goal=_cell(doc["goal"], "goal"),
        walls=frozenset(walls),
        features=tuple(features),
        forbidden_moves=frozenset(forbidden),
        step_cost=_number(doc, "step_cost"),
        goal_reward=_number(doc, "goal_reward"),
        slip_prob=_number(doc, "slip_prob") if "slip_prob" in doc else 0.0,
        max_steps=_number(doc, "max_steps", int),
    )
    return TaskSpec.from_grid(
        doc["task_id"],
        grid,
        r_min=_number(doc, "r_min") if "r_min" in doc else None,
        r_max=_number(doc, "r_max") if "r_max" in doc else None,
        description=str(doc.get("description", "")),
    )


def task_to_dict(task: TaskSpec) -> dict[str, Any]:
    g = task.grid
    return {
        "task_id": task.task_id,
        "description": task.description,
        "width": g.width,
        "height": g.height,
        "start": list(g.start),
        "goal": list(g.goal),
        "walls": [list(c) for c in sorted(g.walls)],
        "features": [{"cell": list(c), "penalty": p} for c, p in g.features],
        "forbidden_moves": [
            {"cell": list(c), "action": a.value}
            for c, a in sorted(g.forbidden_moves, key=lambda ca: (ca[0], ACTIONS.index(ca[1])))
        ],
        "step_cost": g.step_cost,
        "goal_reward": g.goal_reward,
        "slip_prob": g.slip_prob,
        "max_steps": g.max_steps,
        "r_min": task.r_min,
        "r_max": task.r_max,
    }


def load_task(path: str | Path) -> TaskSpec:
    """Read and validate a grid file."""
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TaskParseError("document", f"invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return task_from_dict(doc)


def save_task(task: TaskSpec, path: str | Path) -> None:
    Path(path).write_text(json.dumps(task_to_dict(task), indent=2) + "\n")


REFERENCE_GRID = {
    "task_id": "reference-4x4",
    "description": "4x4 grid, one wall, one penalty cell",
    "width": 4,
    "height": 4,
    "start": [0, 0],
    "goal": [3, 3],
    "walls": [[1, 1]],
    "features": [{"cell": [2, 2], "penalty": 2.0}],
    "forbidden_moves": [],
    "step_cost": 1.0,
    "goal_reward": 10.0,
    "slip_prob": 0.0,
    "max_steps": 20,
}


def reference_task(**overrides: Any) -> TaskSpec:
    """The 4x4 reference task, optionally with some grid-file keys replaced."""
    return task_from_dict({**REFERENCE_GRID, **overrides})
