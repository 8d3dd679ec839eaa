"""Arbitrating once per episode instead of once per step.

In per-sequence mode the chosen solver proposes a whole route, which is then
followed without looking again.  That is cheap, but on a slippery floor a
route planned in advance can go stale.
"""

from sofai import RunConfig, reference_task, run_experiment

for eps in (0.0, 0.2):
    task = reference_task(slip_prob=eps)
    for mode in ("per-decision", "per-sequence"):
        res = run_experiment(RunConfig(mode=mode, episodes=100, seed=11), task)
        last = res.blocks(10)[-1]
        print(f"slip {eps}  {mode:12s}  final-block return {last.mean_return:6.2f}  charged {res.charged_s:6.3f}s")

# One trace line per executed step, each carrying the episode's arbitration.
res = run_experiment(RunConfig(mode="per-sequence", episodes=1), reference_task())
for rec in res.records():
    print(rec.to_json())
