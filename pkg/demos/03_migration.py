"""Watching decisions move from the slow solver to the fast one.

Early on the fast solver knows nothing, so the meta-cognitive gates hand
decisions to the planner.  The planner's moves train the fast solver's
action values, and once those are trusted the planner is left idle.
"""

from sofai import RunConfig, reference_task, run_experiment

task = reference_task()
result = run_experiment(RunConfig(mode="per-decision", episodes=100, seed=0), task)

# The S2 share first rises because episodes get shorter while the budget
# still pays for about two planner calls each; then trust takes over.
print("block  episodes  mean return  S2 share  charged s")
for b in result.blocks(10):
    print(f"{b.block:5d}  {b.first_episode:3d}-{b.last_episode:<3d}  {b.mean_return:11.2f}  {b.s2_fraction:8.3f}  {b.charged_s:9.3f}")

# Where each decision came from, over the whole run.
totals = {}
for ep in result.episodes:
    for source, n in ep.counts.items():
        totals[source.value] = totals.get(source.value, 0) + n
print(totals)
