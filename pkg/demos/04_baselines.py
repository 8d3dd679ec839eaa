"""Hybrid arbitration against the two single-solver baselines.

All three runs use the simulated clock, so the charged time is exact and
repeatable: planner calls cost half a second, meta-cognition a millisecond.
"""

from sofai import RunConfig, reference_task, run_experiment

task = reference_task()
runs = {mode: run_experiment(RunConfig(mode=mode, episodes=100), task) for mode in ("per-decision", "per-sequence", "pure-s1", "pure-s2")}

for mode, res in runs.items():
    last = res.blocks(10)[-1]
    print(f"{mode:13s} charged {res.charged_s:7.3f}s   final-block return {last.mean_return:6.2f}")

ratio = runs["per-decision"].charged_s / runs["pure-s2"].charged_s
print(f"hybrid spends {ratio:.1%} of the planner-only time")
