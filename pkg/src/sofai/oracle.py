"""Brute-force optimum for small deterministic tasks.

Depth-first enumeration of action sequences from the start.  A branch is cut
when the same ``(cell, step)`` pair was already reached with at least the
same accumulated return: both branches face identical futures, so the cut
never loses the optimum.
"""

from __future__ import annotations

from .world import State, TaskSpec, is_terminal, legal_actions, reward

MAX_CELLS = 36


def oracle_optimal_return(task: TaskSpec) -> tuple[float, int]:
    """Best episode return and the fewest steps that achieve it."""
    grid = task.grid
    if grid.slip_prob > 0:
        raise ValueError("oracle requires a deterministic task (slip_prob = 0)")
    if grid.width * grid.height > MAX_CELLS:
        raise ValueError(f"oracle limited to {MAX_CELLS} cells")

    best_at: dict[tuple, float] = {}
    best = [float("-inf"), 0]

    def dfs(state: State, acc: float) -> None:
        if is_terminal(grid, state):
            if acc > best[0] or (acc == best[0] and state.steps_taken < best[1]):
                best[0], best[1] = acc, state.steps_taken
            return
        key = (state.cell, state.steps_taken)
        seen = best_at.get(key)
        if seen is not None and seen >= acc:
            return
        best_at[key] = acc
        for a in legal_actions(grid, state):
            nxt = State(state.cell.step(a), state.steps_taken + 1)
            dfs(nxt, acc + reward(grid, state, a, nxt))

    dfs(State(grid.start, 0), 0.0)
    return best[0], best[1]
