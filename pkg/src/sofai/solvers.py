"""Fast (S1) and slow (S2) solvers.

S1 reads the stored action values for the current cell and nothing else, so
its cost does not depend on the size of the grid.  S2 solves the task exactly
with backward induction over the remaining horizon.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .experience import S1, S2, ExperienceStore
from .world import (
    Action,
    Cell,
    State,
    TaskSpec,
    clamp01,
    enumerate_reachable,
    is_terminal,
    legal_actions,
    successor_distribution,
)

# relative slack for treating two planned action values as tied
TIE_TOL = 1e-9


@dataclass(frozen=True)
class SolverOutput:
    solver_id: str
    action: Action
    confidence: float
    runtime_s: float = 0.0
    trajectory: tuple[Action, ...] | None = None


def _confidence(values: list[tuple[float, int]], k: float, m_scale: float) -> float:
    n = sum(v[1] for v in values)
    if n == 0:
        return 0.0
    visit_ratio = n / (n + k)
    if len(values) < 2:
        return visit_ratio
    best, second = sorted((v[0] for v in values), reverse=True)[:2]
    return visit_ratio * clamp01((best - second) / m_scale)


def _default_scale(task: TaskSpec, m_scale: float | None) -> float:
    if m_scale is None:
        m_scale = task.grid.step_cost if task.grid.step_cost > 0 else 1.0
    if m_scale <= 0:
        raise ValueError("m_scale must be positive")
    return m_scale


def _lookup_all(store: ExperienceStore, task: TaskSpec, state: State):
    legal = legal_actions(task.grid, state)
    return legal, [store.q_lookup(task.task_id, state.cell, a) for a in legal]


def s1_confidence(store: ExperienceStore, task: TaskSpec, state: State, k: float = 5.0, m_scale: float | None = None) -> float:
    """Visit ratio ``n/(n+k)`` times the normalized gap between the two best values."""
    _, values = _lookup_all(store, task, state)
    return _confidence(values, k, _default_scale(task, m_scale))


def s1_decide(store: ExperienceStore, task: TaskSpec, state: State, k: float = 5.0, m_scale: float | None = None) -> SolverOutput:
    t0 = time.perf_counter()
    m_scale = _default_scale(task, m_scale)
    legal, values = _lookup_all(store, task, state)
    if not legal:
        raise ValueError(f"no legal action at {tuple(state.cell)}")
    if sum(n for _, n in values) == 0:
        action, conf = legal[0], 0.0
    else:
        best = 0
        for i in range(1, len(values)):
            if values[i][0] > values[best][0]:
                best = i
        action, conf = legal[best], _confidence(values, k, m_scale)
    return SolverOutput(S1, action, conf, time.perf_counter() - t0)


def s1_rollout(store: ExperienceStore, task: TaskSpec, state: State, k: float = 5.0, m_scale: float | None = None) -> SolverOutput:
    """Chain greedy S1 decisions along intended (slip-free) successors."""
    t0 = time.perf_counter()
    grid = task.grid
    actions: list[Action] = []
    confs: list[float] = []
    cur = state
    while not is_terminal(grid, cur):
        out = s1_decide(store, task, cur, k, m_scale)
        actions.append(out.action)
        confs.append(out.confidence)
        cur = State(cur.cell.step(out.action), cur.steps_taken + 1)
    if not actions:
        raise ValueError("rollout from a terminal state")
    return SolverOutput(S1, actions[0], min(confs), time.perf_counter() - t0, tuple(actions))


# -- S2: finite-horizon dynamic programming ------------------------------------


@dataclass(frozen=True)
class ValueTable:
    """``values[h, y, x]`` is the optimal expected return-to-go with ``h`` steps left.

    Unreachable cells and walls hold NaN.
    """

    task: TaskSpec
    values: np.ndarray

    def value(self, cell: Cell, horizon: int) -> float:
        return float(self.values[horizon, cell.y, cell.x])

    def action_values(self, cell: Cell, horizon: int) -> dict[Action, float]:
        """Expected return of each legal action with ``horizon`` steps left."""
        grid = self.task.grid
        out = {}
        for a in legal_actions(grid, cell):
            total = 0.0
            for p, nxt in successor_distribution(grid, cell, a):
                r = -grid.step_cost - grid.penalty(nxt)
                if nxt == grid.goal:
                    r += grid.goal_reward
                else:
                    r += self.values[horizon - 1, nxt.y, nxt.x]
                total += p * r
            out[a] = total
        return out

    def greedy(self, cell: Cell, horizon: int) -> tuple[Action, float]:
        """Best action in canonical order among near-ties."""
        qs = self.action_values(cell, horizon)
        best = max(qs.values())
        tol = TIE_TOL * max(1.0, abs(best))
        for a, q in qs.items():
            if q >= best - tol:
                return a, q
        raise AssertionError("unreachable")


def _plan(task: TaskSpec) -> ValueTable:
    grid = task.grid
    reachable = sorted(enumerate_reachable(grid) - {grid.goal})
    T = grid.max_steps
    values = np.full((T + 1, grid.height, grid.width), np.nan)
    values[:, grid.goal.y, grid.goal.x] = 0.0
    for c in reachable:
        values[0, c.y, c.x] = 0.0
    # successor lists are fixed across horizons
    models = []
    for c in reachable:
        per_action = []
        for a in legal_actions(grid, c):
            outs = []
            for p, nxt in successor_distribution(grid, c, a):
                r = -grid.step_cost - grid.penalty(nxt)
                if nxt == grid.goal:
                    outs.append((p, r + grid.goal_reward, None))
                else:
                    outs.append((p, r, nxt))
            per_action.append(outs)
        models.append((c, per_action))
    for h in range(1, T + 1):
        prev = values[h - 1]
        for c, per_action in models:
            best = -np.inf
            for outs in per_action:
                total = 0.0
                for p, r, nxt in outs:
                    total += p * (r if nxt is None else r + prev[nxt.y, nxt.x])
                if total > best:
                    best = total
            values[h, c.y, c.x] = best
    values.setflags(write=False)
    return ValueTable(task, values)


@lru_cache(maxsize=16)
def s2_plan(task: TaskSpec) -> ValueTable:
    """Exact finite-horizon Bellman optimum over every reachable cell.

    Tables are cached per task; ``TaskSpec`` is immutable and hashable, so a
    changed task gets a fresh table.
    """
    return _plan(task)


def bellman_residual(table: ValueTable) -> float:
    """Largest gap between the table and one more Bellman backup of itself."""
    grid = table.task.grid
    worst = 0.0
    for c in enumerate_reachable(grid):
        for h in range(grid.max_steps + 1):
            v = table.value(c, h)
            if c == grid.goal or h == 0:
                target = 0.0
            else:
                target = max(table.action_values(c, h).values())
            worst = max(worst, abs(v - target))
    return worst


def s2_decide(task: TaskSpec, state: State) -> SolverOutput:
    """Greedy action on the optimal table plus the full open-loop plan."""
    t0 = time.perf_counter()
    grid = task.grid
    if is_terminal(grid, state):
        raise ValueError("s2_decide called on a terminal state")
    table = s2_plan(task)
    first, _ = table.greedy(state.cell, grid.max_steps - state.steps_taken)
    plan = [first]
    cur = State(state.cell.step(first), state.steps_taken + 1)
    while not is_terminal(grid, cur):
        a, _ = table.greedy(cur.cell, grid.max_steps - cur.steps_taken)
        plan.append(a)
        cur = State(cur.cell.step(a), cur.steps_taken + 1)
    return SolverOutput(S2, first, 1.0, time.perf_counter() - t0, tuple(plan))
