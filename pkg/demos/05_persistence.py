"""Keeping experience between runs.

The store is plain JSON.  A second run that starts from a saved store skips
most of the learning phase.
"""

import json
import tempfile
from pathlib import Path

from sofai import RunConfig, load_store, reference_task, run_experiment, save_store

task = reference_task()
config = RunConfig(episodes=40, seed=3)

with tempfile.TemporaryDirectory() as tmp:
    path = Path(tmp) / "store.json"
    first = run_experiment(config, task)
    save_store(first.store, path)
    print("saved", path.stat().st_size, "bytes;", len(first.store.q_table), "action values")
    print("top-level keys:", sorted(json.loads(path.read_text())))

    second = run_experiment(config, task, load_store(path))

for name, res in (("fresh", first), ("warm", second)):
    b = res.blocks(10)[0]
    print(f"{name}: first-block return {b.mean_return:6.2f}, mean steps {b.mean_steps:5.1f}, charged {res.charged_s:.3f}s")
