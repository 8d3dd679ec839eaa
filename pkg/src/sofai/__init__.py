"""Fast/slow solvers arbitrated by a two-phase meta-cognitive agent on constrained grids."""

from .experience import ExperienceStore, load_store, save_store
from .metacognition import ArbitrationConfig, ResourceBudget, Source, mc1, mc2, s1_action_value
from .oracle import oracle_optimal_return
from .orchestrator import RunConfig, run_experiment
from .solvers import s1_confidence, s1_decide, s1_rollout, s2_decide, s2_plan
from .world import (
    Action,
    Cell,
    GridSpec,
    State,
    TaskSpec,
    enumerate_reachable,
    is_terminal,
    legal_actions,
    load_task,
    reference_task,
    reward,
    transition,
)

__version__ = "0.1.0"

__all__ = [
    "Action",
    "ArbitrationConfig",
    "Cell",
    "ExperienceStore",
    "GridSpec",
    "ResourceBudget",
    "RunConfig",
    "Source",
    "State",
    "TaskSpec",
    "enumerate_reachable",
    "is_terminal",
    "legal_actions",
    "load_store",
    "load_task",
    "mc1",
    "mc2",
    "oracle_optimal_return",
    "reference_task",
    "reward",
    "run_experiment",
    "s1_action_value",
    "s1_confidence",
    "s1_decide",
    "s1_rollout",
    "s2_decide",
    "s2_plan",
    "save_store",
    "transition",
]
