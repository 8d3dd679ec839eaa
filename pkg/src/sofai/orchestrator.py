"""Episode and experiment driver.

Every decision starts with S1.  MC1 then either adopts the proposal or hands
over to MC2, which may activate S2.  Each phase is timed by an injected clock
and charged against the episode's time budget; the store is updated after
every step (action values) and at episode end (solver outcomes and task
return), so the next decision always sees current statistics.
"""

from __future__ import annotations

import csv
import io
import json
import time
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterator

from .experience import MC1, MC2, S1, S2, ExperienceStore
from .metacognition import ArbitrationConfig, Gate, ResourceBudget, Source, mc1, mc2
from .rng import Xoshiro256
from .solvers import SolverOutput, s1_decide, s1_rollout, s2_decide
from .world import (
    Action,
    State,
    TaskSpec,
    is_terminal,
    legal_actions,
    reward,
    transition,
)

MODES = ("per-decision", "per-sequence", "pure-s1", "pure-s2")
CLOCKS = ("simulated", "real")

TRACE_FIELDS = (
    "episode",
    "step",
    "state",
    "s1_action",
    "s1_confidence",
    "u_hat",
    "source",
    "v1",
    "v2",
    "cost2",
    "t_mc1_est",
    "t_mc2_est",
    "final_action",
    "reward",
    "budget_remaining_s",
    "elapsed_s",
)

SUMMARY_FIELDS = (
    "episode",
    "return",
    "steps",
    "reached_goal",
    "n_s1_budget",
    "n_s1_mc1",
    "n_s1_mc2",
    "n_s2",
    "wall_time_s",
)


@dataclass(frozen=True)
class RunConfig:
    mode: str = "per-decision"
    episodes: int = 100
    seed: int = 0
    episode_budget_s: float = 1.0
    arbitration: ArbitrationConfig = field(default_factory=ArbitrationConfig)
    alpha: float = 0.1
    gamma: float = 0.95
    q0: float = 0.0
    clock: str = "simulated"
    memory_budget_units: float | None = None

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {', '.join(MODES)}; got {self.mode!r}")
        if self.clock not in CLOCKS:
            raise ValueError(f"clock must be one of {', '.join(CLOCKS)}; got {self.clock!r}")
        if self.episodes < 1:
            raise ValueError("episodes must be at least 1")
        if not self.episode_budget_s >= 0:
            raise ValueError("episode_budget_s must be nonnegative")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def new_store(self) -> ExperienceStore:
        return ExperienceStore(alpha=self.alpha, gamma=self.gamma, q0=self.q0)


class SimulatedClock:
    """Charges fixed costs: nothing for S1, constants for MC phases and S2."""

    def __init__(self, cfg: ArbitrationConfig):
        self._cost = {S1: 0.0, MC1: cfg.t_mc_default, MC2: cfg.t_mc_default, S2: cfg.t_s2_default}

    def charge(self, phase: str, measured_s: float) -> float:
        return self._cost[phase]


class RealClock:
    def charge(self, phase: str, measured_s: float) -> float:
        return measured_s


def make_clock(config: RunConfig):
    return SimulatedClock(config.arbitration) if config.clock == "simulated" else RealClock()


@dataclass
class DecisionRecord:
    """One line of the trace; also the per-step entry of an episode's trajectory."""

    episode: int
    step: int
    state: State
    source: Source
    final_action: Action
    s1_action: Action | None = None
    s1_confidence: float | None = None
    u_hat: float | None = None
    v1: float | None = None
    v2: float | None = None
    cost2: float | None = None
    t_mc1_est: float | None = None
    t_mc2_est: float | None = None
    reward: float = 0.0
    budget_remaining_s: float = 0.0
    elapsed_s: float = 0.0

    def to_json(self) -> dict[str, Any]:
        d = {
            "episode": self.episode,
            "step": self.step,
            "state": list(self.state.cell),
            "s1_action": self.s1_action.value if self.s1_action else None,
            "s1_confidence": self.s1_confidence,
            "u_hat": self.u_hat,
            "source": self.source.value,
            "v1": self.v1,
            "v2": self.v2,
            "cost2": self.cost2,
            "t_mc1_est": self.t_mc1_est,
            "t_mc2_est": self.t_mc2_est,
            "final_action": self.final_action.value,
            "reward": self.reward,
            "budget_remaining_s": self.budget_remaining_s,
            "elapsed_s": self.elapsed_s,
        }
        return {k: d[k] for k in TRACE_FIELDS}


@dataclass
class ArbitrationOutcome:
    source: Source
    action: Action
    trajectory: tuple[Action, ...] | None
    s1_out: SolverOutput | None
    u_hat: float | None = None
    v1: float | None = None
    v2: float | None = None
    cost2: float | None = None
    t_mc1_est: float | None = None
    t_mc2_est: float | None = None
    budget_remaining_s: float = 0.0
    elapsed_s: float = 0.0

    @property
    def confidence(self) -> float | None:
        return None if self.s1_out is None else self.s1_out.confidence


@dataclass
class EpisodeResult:
    episode_index: int
    return_: float
    steps: int
    wall_time_s: float
    counts: Counter
    reached_goal: bool
    trajectory: list[DecisionRecord]

    @property
    def decisions(self) -> int:
        return sum(self.counts.values())

    @property
    def s2_fraction(self) -> float:
        return self.counts[Source.S2] / self.decisions if self.decisions else 0.0

    def summary_row(self) -> dict[str, Any]:
        return {
            "episode": self.episode_index,
            "return": self.return_,
            "steps": self.steps,
            "reached_goal": int(self.reached_goal),
            "n_s1_budget": self.counts[Source.S1_BUDGET],
            "n_s1_mc1": self.counts[Source.S1_MC1],
            "n_s1_mc2": self.counts[Source.S1_MC2],
            "n_s2": self.counts[Source.S2],
            "wall_time_s": self.wall_time_s,
        }


@dataclass
class EpisodeContext:
    task: TaskSpec
    store: ExperienceStore
    budget: ResourceBudget
    config: RunConfig
    rng: Xoshiro256
    clock: Any

    @property
    def cfg(self) -> ArbitrationConfig:
        return self.config.arbitration


def _timed(ctx: EpisodeContext, phase: str, fn, *args):
    t0 = time.perf_counter()
    out = fn(*args)
    charged = ctx.clock.charge(phase, time.perf_counter() - t0)
    ctx.budget.charge(charged)
    if phase in (MC1, MC2):
        ctx.store.record_mc_cost(phase, charged)
    else:
        ctx.store.record_solver_run(phase, ctx.task.task_id, charged)
    return out, charged


def _refresh_memory(ctx: EpisodeContext) -> None:
    cap = ctx.config.memory_budget_units
    if cap is not None:
        ctx.budget.memory_remaining_units = cap - ctx.store.entry_count() * ctx.cfg.entry_weight


def arbitrate(ctx: EpisodeContext, state: State, s1_out: SolverOutput, elapsed: float) -> ArbitrationOutcome:
    """MC1, then MC2 and S2 if needed, for an S1 proposal already in hand."""
    task, store, cfg = ctx.task, ctx.store, ctx.cfg
    u_hat = store.expected_task_reward(task, cfg.u_hat0)
    est = store.mc_cost_estimate(cfg.t_mc_default)
    _refresh_memory(ctx)
    gate, dt = _timed(ctx, MC1, mc1, ctx.budget, s1_out, u_hat, est, cfg, cfg.entry_weight)
    elapsed += dt
    out = ArbitrationOutcome(
        Source.S1_BUDGET,
        s1_out.action,
        s1_out.trajectory,
        s1_out,
        u_hat=u_hat,
        t_mc1_est=est[0],
        t_mc2_est=est[1],
    )
    if gate is Gate.CONFIDENT:
        out.source = Source.S1_MC1
    elif gate is Gate.ESCALATE:
        verdict, dt = _timed(ctx, MC2, mc2, store, task, state, s1_out, cfg)
        elapsed += dt
        out.v1, out.v2, out.cost2 = verdict.v1, verdict.v2, verdict.cost2
        if verdict.activate_s2:
            s2_out, dt = _timed(ctx, S2, s2_decide, task, state)
            elapsed += dt
            out.source = Source.S2
            out.action, out.trajectory = s2_out.action, s2_out.trajectory
        else:
            out.source = Source.S1_MC2
    out.budget_remaining_s = ctx.budget.time_remaining_s
    out.elapsed_s = elapsed
    return out


def run_decision(ctx: EpisodeContext, state: State) -> tuple[Action, ArbitrationOutcome]:
    cfg = ctx.cfg
    mode = ctx.config.mode
    if mode == "pure-s2":
        s2_out, dt = _timed(ctx, S2, s2_decide, ctx.task, state)
        out = ArbitrationOutcome(Source.S2, s2_out.action, s2_out.trajectory, None)
        out.budget_remaining_s, out.elapsed_s = ctx.budget.time_remaining_s, dt
        return out.action, out
    s1_out, dt = _timed(ctx, S1, s1_decide, ctx.store, ctx.task, state, cfg.k, cfg.m_scale)
    if mode == "pure-s1":
        out = ArbitrationOutcome(Source.S1_DIRECT, s1_out.action, None, s1_out)
        out.budget_remaining_s, out.elapsed_s = ctx.budget.time_remaining_s, dt
        return out.action, out
    out = arbitrate(ctx, state, s1_out, dt)
    return out.action, out


def _record(episode: int, step: int, state: State, out: ArbitrationOutcome, action: Action, elapsed: float) -> DecisionRecord:
    s1 = out.s1_out
    return DecisionRecord(
        episode=episode,
        step=step,
        state=state,
        source=out.source,
        final_action=action,
        s1_action=s1.action if s1 else None,
        s1_confidence=s1.confidence if s1 else None,
        u_hat=out.u_hat,
        v1=out.v1,
        v2=out.v2,
        cost2=out.cost2,
        t_mc1_est=out.t_mc1_est,
        t_mc2_est=out.t_mc2_est,
        budget_remaining_s=out.budget_remaining_s,
        elapsed_s=elapsed,
    )


def _step(ctx: EpisodeContext, state: State, action: Action, rec: DecisionRecord) -> State:
    grid = ctx.task.grid
    nxt = transition(grid, state, action, ctx.rng)
    r = reward(grid, state, action, nxt)
    rec.reward = r
    # time-outs are not absorbing: only the goal cuts the bootstrap
    ctx.store.q_update(
        ctx.task, state.cell, action, r, nxt.cell, legal_actions(grid, nxt.cell), nxt.cell == grid.goal
    )
    return nxt


def _finish(ctx: EpisodeContext, episode: int, records: list[DecisionRecord], counts: Counter, state: State, charged: float) -> EpisodeResult:
    store, task = ctx.store, ctx.task
    rtg = 0.0
    for rec in reversed(records):
        rtg += rec.reward
        solver = S2 if rec.source is Source.S2 else S1
        store.record_solver_outcome(solver, task.task_id, rec.state.cell, rtg)
    total = sum(r.reward for r in records)
    store.record_task_return(task.task_id, total)
    return EpisodeResult(
        episode_index=episode,
        return_=total,
        steps=len(records),
        wall_time_s=charged,
        counts=counts,
        reached_goal=state.cell == task.grid.goal,
        trajectory=records,
    )


def run_episode(ctx: EpisodeContext, episode: int = 0) -> EpisodeResult:
    """Per-decision loop (also used by the two baselines)."""
    state = State(ctx.task.grid.start, 0)
    records: list[DecisionRecord] = []
    counts: Counter = Counter()
    charged = 0.0
    while not is_terminal(ctx.task.grid, state):
        action, out = run_decision(ctx, state)
        charged += out.elapsed_s
        counts[out.source] += 1
        rec = _record(episode, len(records), state, out, action, out.elapsed_s)
        records.append(rec)
        state = _step(ctx, state, action, rec)
    return _finish(ctx, episode, records, counts, state, charged)


def run_sequence_episode(ctx: EpisodeContext, episode: int = 0) -> EpisodeResult:
    """Arbitrate once at the start, then execute the chosen plan open-loop."""
    grid = ctx.task.grid
    state = State(grid.start, 0)
    cfg = ctx.cfg
    s1_out, dt = _timed(ctx, S1, s1_rollout, ctx.store, ctx.task, state, cfg.k, cfg.m_scale)
    out = arbitrate(ctx, state, s1_out, dt)
    plan = out.trajectory or (out.action,)
    records: list[DecisionRecord] = []
    while not is_terminal(grid, state):
        i = len(records)
        legal = legal_actions(grid, state)
        planned = plan[i] if i < len(plan) else None
        action = planned if planned in legal else legal[0]
        rec = _record(episode, i, state, out, action, out.elapsed_s if i == 0 else 0.0)
        records.append(rec)
        state = _step(ctx, state, action, rec)
    return _finish(ctx, episode, records, Counter({out.source: 1}), state, out.elapsed_s)


# -- experiments -------------------------------------------------------------


@dataclass
class BlockSummary:
    block: int
    first_episode: int
    last_episode: int
    mean_return: float
    s2_fraction: float
    mean_steps: float
    charged_s: float


@dataclass
class ExperimentResult:
    config: RunConfig
    task: TaskSpec
    episodes: list[EpisodeResult]
    store: ExperienceStore

    def blocks(self, size: int = 10) -> list[BlockSummary]:
        return summarize_blocks(self.episodes, size)

    @property
    def charged_s(self) -> float:
        return sum(e.wall_time_s for e in self.episodes)

    def records(self) -> Iterator[DecisionRecord]:
        for e in self.episodes:
            yield from e.trajectory


def summarize_blocks(episodes: list[EpisodeResult], size: int = 10) -> list[BlockSummary]:
    if size < 1:
        raise ValueError("block size must be positive")
    out = []
    for b, start in enumerate(range(0, len(episodes), size)):
        chunk = episodes[start : start + size]
        decisions = sum(e.decisions for e in chunk)
        out.append(
            BlockSummary(
                block=b,
                first_episode=chunk[0].episode_index,
                last_episode=chunk[-1].episode_index,
                mean_return=sum(e.return_ for e in chunk) / len(chunk),
                s2_fraction=sum(e.counts[Source.S2] for e in chunk) / decisions if decisions else 0.0,
                mean_steps=sum(e.steps for e in chunk) / len(chunk),
                charged_s=sum(e.wall_time_s for e in chunk),
            )
        )
    return out


def run_experiment(config: RunConfig, task: TaskSpec, store: ExperienceStore | None = None) -> ExperimentResult:
    """Run ``config.episodes`` episodes in order against one persistent store."""
    if store is None:
        store = config.new_store()
    clock = make_clock(config)
    episodes = []
    for i in range(config.episodes):
        ctx = EpisodeContext(
            task=task,
            store=store,
            budget=ResourceBudget(config.episode_budget_s),
            config=config,
            rng=Xoshiro256.for_episode(config.seed, i),
            clock=clock,
        )
        if config.mode == "per-sequence":
            episodes.append(run_sequence_episode(ctx, i))
        else:
            episodes.append(run_episode(ctx, i))
    return ExperimentResult(config, task, episodes, store)


# -- trace and summary files --------------------------------------------------


class TraceFormatError(ValueError):
    def __init__(self, lineno: int, message: str):
        super().__init__(f"line {lineno}: {message}")
        self.lineno = lineno


def trace_lines(records) -> Iterator[str]:
    for rec in records:
        yield json.dumps(rec.to_json(), separators=(",", ":"))


def write_trace(path: str | Path, records) -> None:
    with open(path, "w", newline="\n") as fh:
        for line in trace_lines(records):
            fh.write(line + "\n")


def summary_csv(episodes: list[EpisodeResult]) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=SUMMARY_FIELDS, lineterminator="\n")
    writer.writeheader()
    for e in episodes:
        writer.writerow(e.summary_row())
    return buf.getvalue()


def write_summary(path: str | Path, episodes: list[EpisodeResult]) -> None:
    Path(path).write_text(summary_csv(episodes))


def read_trace(path: str | Path) -> list[dict[str, Any]]:
    rows = []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            if not line.strip():
                continue
            try:
                row = json.loads(line)
            except json.JSONDecodeError as exc:
                raise TraceFormatError(lineno, f"malformed JSON ({exc.msg})") from None
            if not isinstance(row, dict):
                raise TraceFormatError(lineno, "expected a JSON object")
            missing = [k for k in ("episode", "source") if k not in row]
            if missing:
                raise TraceFormatError(lineno, f"missing field {missing[0]!r}")
            rows.append(row)
    return rows


EXPORT_FIELDS = ("block", "first_episode", "last_episode", "episodes", "decisions", "mean_return", "s2_fraction")


def export_blocks(rows: list[dict[str, Any]], block: int = 10) -> list[dict[str, Any]]:
    """Aggregate trace rows into blocks of ``block`` consecutive episodes.

    Episode return is the sum of its rows' rewards; the S2 fraction is the
    share of rows sourced from S2.
    """
    if block < 1:
        raise ValueError("block size must be positive")
    episodes: dict[int, list[dict[str, Any]]] = {}
    for row in rows:
        episodes.setdefault(row["episode"], []).append(row)
    ids = sorted(episodes)
    out = []
    for b, start in enumerate(range(0, len(ids), block)):
        chunk = ids[start : start + block]
        lines = [r for e in chunk for r in episodes[e]]
        returns = [sum(r.get("reward", 0.0) for r in episodes[e]) for e in chunk]
        out.append(
            {
                "block": b,
                "first_episode": chunk[0],
                "last_episode": chunk[-1],
                "episodes": len(chunk),
                "decisions": len(lines),
                "mean_return": sum(returns) / len(returns),
                "s2_fraction": sum(r["source"] == Source.S2.value for r in lines) / len(lines),
            }
        )
    return out


def export_csv(rows: list[dict[str, Any]], block: int = 10) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=EXPORT_FIELDS, lineterminator="\n")
    writer.writeheader()
    for row in export_blocks(rows, block):
        writer.writerow(row)
    return buf.getvalue()


def audit_trace(rows, tau1: float) -> list[str]:
    """Check the arbitration laws on MC-arbitrated trace rows; return violations.

    A row counts as escalated when MC2 diagnostics are present.  S2 must
    appear exactly on escalated rows whose recorded values satisfy
    ``v2 - v1 > cost2``, and escalation must agree with MC1's confidence rule.
    """
    problems = []
    for i, row in enumerate(rows):
        row = row.to_json() if isinstance(row, DecisionRecord) else row
        escalated = row["v2"] is not None
        src = row["source"]
        if escalated:
            activate = row["v2"] - row["v1"] > row["cost2"]
            if (src == Source.S2.value) != activate:
                problems.append(f"row {i}: source {src} but v2-v1>cost2 is {activate}")
            if src not in (Source.S2.value, Source.S1_MC2.value):
                problems.append(f"row {i}: MC2 ran but source is {src}")
            if not row["s1_confidence"] < tau1 * row["u_hat"]:
                problems.append(f"row {i}: escalated although c >= tau1*u_hat")
        else:
            if src == Source.S2.value:
                problems.append(f"row {i}: S2 without MC2 approval")
            if src == Source.S1_MC2.value:
                problems.append(f"row {i}: S1_MC2 without MC2 diagnostics")
            if src == Source.S1_MC1.value and not row["s1_confidence"] >= tau1 * row["u_hat"]:
                problems.append(f"row {i}: MC1 adopted although c < tau1*u_hat")
    return problems
