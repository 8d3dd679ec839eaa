"""The slow solver: exact finite-horizon planning.

The planner fills a value table over (steps left, row, column).  On small
deterministic grids its greedy return can be checked against brute force.
"""

from sofai import State, oracle_optimal_return, reference_task, s2_decide, s2_plan
from sofai.solvers import bellman_residual

task = reference_task()
table = s2_plan(task)
T = task.grid.max_steps

print("value with the full horizon left, by row:")
print(table.values[T].round(2))

out = s2_decide(task, State(task.grid.start))
print("first action:", out.action.value, "planned route:", [a.value for a in out.trajectory])

best, steps = oracle_optimal_return(task)
print(f"brute-force optimum {best} in {steps} steps, planner value {table.value(task.grid.start, T)}")
print("Bellman residual:", bellman_residual(table))

# A slippery floor lowers the expected return but the table stays exact.
for eps in (0.0, 0.1, 0.3):
    t = reference_task(slip_prob=eps)
    print(f"slip {eps}: expected return from start {s2_plan(t).value(t.grid.start, T):.3f}")
