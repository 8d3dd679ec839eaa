"""Two-phase arbitration between the fast and the slow solver.

MC1 is a cheap gate: it adopts the S1 proposal when resources cannot cover
both meta-cognitive phases, or when S1's confidence is high compared to the
reward the task usually yields.  Otherwise MC2 weighs the expected gain of
running S2 against its expected cost.

Everything here is a pure function of its arguments.  Values compared in MC2
are normalized returns in [0, 1]; ``lambda_time`` converts seconds of S2
runtime to that scale.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

from .experience import ExperienceStore
from .solvers import SolverOutput
from .world import State, TaskSpec


class Source(str, enum.Enum):
    """Who supplied a decision, and which rule let it through."""

    S1_BUDGET = "S1_BUDGET"
    S1_MC1 = "S1_MC1"
    S1_MC2 = "S1_MC2"
    S2 = "S2"
    # baseline runs without meta-cognition
    S1_DIRECT = "S1_DIRECT"


class Gate(enum.Enum):
    BUDGET = "budget"
    CONFIDENT = "confident"
    ESCALATE = "escalate"


@dataclass(frozen=True)
class ArbitrationConfig:
    tau1: float = 1.0
    lambda_time: float = 0.02
    u_hat0: float = 1.0
    v_opt: float = 1.0
    t_mc_default: float = 0.001
    t_s2_default: float = 0.5
    k: float = 5.0
    m_scale: float | None = None
    # abstract memory units charged per store entry (memory gating needs a budget)
    entry_weight: float = 0.0

    def __post_init__(self):
        for name in ("tau1", "lambda_time", "u_hat0", "v_opt", "t_mc_default", "t_s2_default", "entry_weight"):
            v = getattr(self, name)
            if not math.isfinite(v) or v < 0:
                raise ValueError(f"{name} must be finite and nonnegative, got {v}")
        if not self.k > 0:
            raise ValueError("k must be positive")
        if self.m_scale is not None and not self.m_scale > 0:
            raise ValueError("m_scale must be positive")


@dataclass
class ResourceBudget:
    time_remaining_s: float
    memory_remaining_units: float | None = None  # None disables the memory check

    def charge(self, seconds: float) -> None:
        if seconds < 0:
            raise ValueError("cannot charge negative time")
        self.time_remaining_s = max(0.0, self.time_remaining_s - seconds)


@dataclass(frozen=True)
class Mc2Result:
    activate_s2: bool
    v1: float
    v2: float
    cost2: float


def mc1(
    budget: ResourceBudget,
    s1_out: SolverOutput,
    u_hat: float,
    est: tuple[float, float],
    cfg: ArbitrationConfig,
    memory_needed: float = 0.0,
) -> Gate:
    if budget.time_remaining_s < est[0] + est[1]:
        return Gate.BUDGET
    if budget.memory_remaining_units is not None and budget.memory_remaining_units < memory_needed:
        return Gate.BUDGET
    if s1_out.confidence >= cfg.tau1 * u_hat:
        return Gate.CONFIDENT
    return Gate.ESCALATE


def s1_action_value(store: ExperienceStore, task: TaskSpec, state: State, s1_out: SolverOutput) -> float:
    """Risk-averse value of S1's action: confidence times its normalized q."""
    q, _ = store.q_lookup(task.task_id, state.cell, s1_out.action)
    return s1_out.confidence * task.normalize(q)


def mc2(store: ExperienceStore, task: TaskSpec, state: State, s1_out: SolverOutput, cfg: ArbitrationConfig) -> Mc2Result:
    v2 = store.expected_s2_value(task, state.cell, cfg.v_opt)
    v1 = s1_action_value(store, task, state, s1_out)
    cost2 = store.expected_s2_cost(task.task_id, cfg.lambda_time, cfg.t_s2_default)
    return Mc2Result(v2 - v1 > cost2, v1, v2, cost2)
