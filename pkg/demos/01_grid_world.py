"""A first look at the grid world.

Builds the bundled 4x4 reference task, prints its layout, walks the shortest
route by hand and shows what a slippery floor does to one move.
"""

from collections import Counter

from sofai import Action, Cell, State, reference_task, reward, transition
from sofai.rng import Xoshiro256
from sofai.world import legal_actions, successor_distribution

task = reference_task()
grid = task.grid

# S = start, G = goal, # = wall, digits = penalty
for y in range(grid.height):
    row = ""
    for x in range(grid.width):
        c = Cell(x, y)
        if c == grid.start:
            row += "S"
        elif c == grid.goal:
            row += "G"
        elif c in grid.walls:
            row += "#"
        elif grid.penalty(c):
            row += str(int(grid.penalty(c)))
        else:
            row += "."
    print(row)

print("legal moves at the start:", [a.value for a in legal_actions(grid, grid.start)])
print("return bounds used for normalization:", task.r_min, task.r_max)

# Walk a shortest path that steps around the penalty cell.
rng = Xoshiro256.for_episode(0, 0)
state, total = State(grid.start), 0.0
for a in [Action.RIGHT, Action.RIGHT, Action.RIGHT, Action.DOWN, Action.DOWN, Action.DOWN]:
    nxt = transition(grid, state, a, rng)
    total += reward(grid, state, a, nxt)
    state = nxt
print(f"reached {tuple(state.cell)} after {state.steps_taken} steps, return {total}")

# With slip the intended move wins 1 - eps of the time.
slippery = reference_task(slip_prob=0.3).grid
print("exact successors of Right from (1, 0):", successor_distribution(slippery, Cell(1, 0), Action.RIGHT))
rng = Xoshiro256.for_episode(7, 0)
seen = Counter(transition(slippery, State(Cell(1, 0)), Action.RIGHT, rng).cell for _ in range(10_000))
print("sampled:", {tuple(c): n / 10_000 for c, n in sorted(seen.items())})
