"""The model of self: experience statistics kept between decisions.

The store holds the tabular action values that the fast solver acts on,
running runtime and outcome statistics per solver, per-task episode returns
and the measured cost of the two meta-cognitive phases.  All means are
incremental; ``keep_samples=True`` additionally retains the raw samples so
the means can be audited.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable

from .world import Action, Cell, TaskSpec

FORMAT_VERSION = 1

S1 = "S1"
S2 = "S2"
MC1 = "MC1"
MC2 = "MC2"


class StoreFormatError(ValueError):
    """A store file could not be read; the message names the bad record."""


@dataclass
class ActionValueStat:
    q: float
    n: int = 0


@dataclass
class RunningMean:
    mean: float = 0.0
    count: int = 0
    samples: list[float] | None = None

    def add(self, x: float) -> None:
        self.count += 1
        self.mean += (x - self.mean) / self.count
        if self.samples is not None:
            self.samples.append(x)


@dataclass
class ExperienceStore:
    alpha: float = 0.1
    gamma: float = 0.95
    q0: float = 0.0
    keep_samples: bool = False
    q_table: dict[tuple[str, Cell, Action], ActionValueStat] = field(default_factory=dict)
    runtimes: dict[tuple[str, str], RunningMean] = field(default_factory=dict)
    outcomes: dict[tuple[str, str], RunningMean] = field(default_factory=dict)
    cell_outcomes: dict[tuple[str, str, Cell], RunningMean] = field(default_factory=dict)
    task_returns: dict[str, RunningMean] = field(default_factory=dict)
    mc_costs: dict[str, RunningMean] = field(default_factory=dict)
    # instrumentation only: counts q_lookup calls, never persisted or compared
    lookups: int = field(default=0, compare=False, repr=False)

    def _mean(self, table: dict, key) -> RunningMean:
        stat = table.get(key)
        if stat is None:
            stat = table[key] = RunningMean(samples=[] if self.keep_samples else None)
        return stat

    # -- action values --------------------------------------------------------

    def q_lookup(self, task_id: str, cell: Cell, action: Action) -> tuple[float, int]:
        """Stored ``(q, n)`` or ``(q0, 0)``; a single hash probe."""
        self.lookups += 1
        stat = self.q_table.get((task_id, cell, action))
        if stat is None:
            return self.q0, 0
        return stat.q, stat.n

    def _q(self, task_id: str, cell: Cell, action: Action) -> float:
        stat = self.q_table.get((task_id, cell, action))
        return self.q0 if stat is None else stat.q

    def q_update(
        self,
        task: TaskSpec,
        cell: Cell,
        action: Action,
        r: float,
        next_cell: Cell,
        next_legal: Iterable[Action],
        terminal: bool,
    ) -> None:
        """One off-policy Q-learning backup, clamped to the task's return bounds."""
        key = (task.task_id, cell, action)
        stat = self.q_table.get(key)
        if stat is None:
            stat = self.q_table[key] = ActionValueStat(self.q0, 0)
        target = r
        if not terminal:
            nxt = [self._q(task.task_id, next_cell, a) for a in next_legal]
            if nxt:
                target += self.gamma * max(nxt)
        q = stat.q + self.alpha * (target - stat.q)
        stat.q = min(max(q, task.r_min), task.r_max)
        stat.n += 1

    def visits(self, task_id: str | None = None) -> int:
        return sum(s.n for (t, _, _), s in self.q_table.items() if task_id is None or t == task_id)

    # -- solver, task and MC statistics --------------------------------------

    def record_solver_run(self, solver_id: str, task_id: str, runtime_s: float) -> None:
        if runtime_s < 0:
            raise ValueError(f"negative runtime {runtime_s}")
        self._mean(self.runtimes, (solver_id, task_id)).add(runtime_s)

    def record_solver_outcome(self, solver_id: str, task_id: str, cell: Cell, return_to_go: float) -> None:
        self._mean(self.outcomes, (solver_id, task_id)).add(return_to_go)
        self._mean(self.cell_outcomes, (solver_id, task_id, Cell(*cell))).add(return_to_go)

    def record_task_return(self, task_id: str, episode_return: float) -> None:
        self._mean(self.task_returns, task_id).add(episode_return)

    def record_mc_cost(self, phase: str, duration_s: float) -> None:
        if phase not in (MC1, MC2):
            raise ValueError(f"unknown MC phase {phase!r}")
        if duration_s < 0:
            raise ValueError(f"negative duration {duration_s}")
        self._mean(self.mc_costs, phase).add(duration_s)

    # -- estimates used by meta-cognition -------------------------------------

    def expected_task_reward(self, task: TaskSpec, default: float = 1.0) -> float:
        stat = self.task_returns.get(task.task_id)
        if stat is None or stat.count == 0:
            return default
        return task.normalize(stat.mean)

    def expected_s2_value(self, task: TaskSpec, cell: Cell, default: float = 1.0) -> float:
        """Normalized mean return-to-go of past S2 decisions, most specific first."""
        stat = self.cell_outcomes.get((S2, task.task_id, Cell(*cell)))
        if stat is None or stat.count == 0:
            stat = self.outcomes.get((S2, task.task_id))
        if stat is None or stat.count == 0:
            return default
        return task.normalize(stat.mean)

    def mean_runtime(self, solver_id: str, task_id: str, default: float) -> float:
        stat = self.runtimes.get((solver_id, task_id))
        return default if stat is None or stat.count == 0 else stat.mean

    def expected_s2_cost(self, task_id: str, lambda_time: float, t_s2_default: float = 0.5) -> float:
        if lambda_time < 0:
            raise ValueError("lambda_time must be nonnegative")
        return lambda_time * self.mean_runtime(S2, task_id, t_s2_default)

    def mc_cost_estimate(self, t_mc_default: float = 0.001) -> tuple[float, float]:
        out = []
        for phase in (MC1, MC2):
            stat = self.mc_costs.get(phase)
            out.append(t_mc_default if stat is None or stat.count == 0 else stat.mean)
        return out[0], out[1]

    def entry_count(self) -> int:
        return (
            len(self.q_table)
            + len(self.runtimes)
            + len(self.outcomes)
            + len(self.cell_outcomes)
            + len(self.task_returns)
            + len(self.mc_costs)
        )

    # -- persistence ----------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        def mean_fields(m: RunningMean) -> dict[str, Any]:
            d: dict[str, Any] = {"mean": m.mean, "count": m.count}
            if m.samples is not None:
                d["samples"] = list(m.samples)
            return d

        action_rank = {a: i for i, a in enumerate(Action)}
        q_rows = [
            {"task": t, "cell": list(c), "action": a.value, "q": s.q, "n": s.n}
            for (t, c, a), s in sorted(self.q_table.items(), key=lambda kv: (kv[0][0], kv[0][1], action_rank[kv[0][2]]))
        ]
        return {
            "format_version": FORMAT_VERSION,
            "params": {"alpha": self.alpha, "gamma": self.gamma, "q0": self.q0, "keep_samples": self.keep_samples},
            "q_table": q_rows,
            "solver_stats": {
                "runtime": [{"solver": s, "task": t, **mean_fields(m)} for (s, t), m in sorted(self.runtimes.items())],
                "outcome": [{"solver": s, "task": t, **mean_fields(m)} for (s, t), m in sorted(self.outcomes.items())],
                "cell_outcome": [
                    {"solver": s, "task": t, "cell": list(c), **mean_fields(m)}
                    for (s, t, c), m in sorted(self.cell_outcomes.items())
                ],
            },
            "task_stats": [
                {"task": t, "mean_return": m.mean, "episode_count": m.count, **({"samples": m.samples} if m.samples is not None else {})}
                for t, m in sorted(self.task_returns.items())
            ],
            "mc_costs": [{"phase": p, **mean_fields(m)} for p, m in sorted(self.mc_costs.items())],
        }

    def dumps(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, doc: Any) -> "ExperienceStore":
        if not isinstance(doc, dict):
            raise StoreFormatError("document: top level must be an object")
        version = doc.get("format_version")
        if version != FORMAT_VERSION:
            raise StoreFormatError(f"format_version: expected {FORMAT_VERSION}, got {version!r}")
        where = "params"
        try:
            p = doc["params"]
            store = cls(
                alpha=_num(p["alpha"]),
                gamma=_num(p["gamma"]),
                q0=_num(p["q0"]),
                keep_samples=bool(p.get("keep_samples", False)),
            )
            for i, row in enumerate(doc["q_table"]):
                where = f"q_table[{i}]"
                key = (_str(row["task"]), _cell(row["cell"]), Action.parse(row["action"]))
                store.q_table[key] = ActionValueStat(_num(row["q"]), _count(row["n"]))
            stats = doc["solver_stats"]
            for i, row in enumerate(stats["runtime"]):
                where = f"solver_stats.runtime[{i}]"
                store.runtimes[(_str(row["solver"]), _str(row["task"]))] = _running(row)
            for i, row in enumerate(stats["outcome"]):
                where = f"solver_stats.outcome[{i}]"
                store.outcomes[(_str(row["solver"]), _str(row["task"]))] = _running(row)
            for i, row in enumerate(stats["cell_outcome"]):
                where = f"solver_stats.cell_outcome[{i}]"
                key3 = (_str(row["solver"]), _str(row["task"]), _cell(row["cell"]))
                store.cell_outcomes[key3] = _running(row)
            for i, row in enumerate(doc["task_stats"]):
                where = f"task_stats[{i}]"
                store.task_returns[_str(row["task"])] = _running(row, "mean_return", "episode_count")
            for i, row in enumerate(doc["mc_costs"]):
                where = f"mc_costs[{i}]"
                phase = _str(row["phase"])
                if phase not in (MC1, MC2):
                    raise ValueError(f"unknown phase {phase!r}")
                store.mc_costs[phase] = _running(row)
        except KeyError as exc:
            raise StoreFormatError(f"{where}: missing key {exc.args[0]!r}") from None
        except (TypeError, ValueError) as exc:
            raise StoreFormatError(f"{where}: {exc}") from None
        return store


def _num(v: Any) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise ValueError(f"expected a finite number, got {v!r}")
    return float(v)


def _count(v: Any) -> int:
    if isinstance(v, bool) or not isinstance(v, int) or v < 0:
        raise ValueError(f"expected a nonnegative integer, got {v!r}")
    return v


def _str(v: Any) -> str:
    if not isinstance(v, str):
        raise ValueError(f"expected a string, got {v!r}")
    return v


def _cell(v: Any) -> Cell:
    if not isinstance(v, list) or len(v) != 2 or not all(isinstance(i, int) and not isinstance(i, bool) for i in v):
        raise ValueError(f"expected [x, y], got {v!r}")
    return Cell(*v)


def _running(row: dict, mean_key: str = "mean", count_key: str = "count") -> RunningMean:
    samples = row.get("samples")
    if samples is not None:
        samples = [_num(s) for s in samples]
    return RunningMean(_num(row[mean_key]), _count(row[count_key]), samples)


def save_store(store: ExperienceStore, path: str | Path) -> None:
    Path(path).write_text(store.dumps())


def load_store(path: str | Path) -> ExperienceStore:
    text = Path(path).read_text()
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise StoreFormatError(f"document: invalid JSON at line {exc.lineno}: {exc.msg}") from None
    return ExperienceStore.from_dict(doc)
