import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridgen import random_task
from sofai.experience import ActionValueStat, ExperienceStore
from sofai.oracle import oracle_optimal_return
from sofai.rng import Xoshiro256
from sofai.solvers import bellman_residual, s1_confidence, s1_decide, s1_rollout, s2_decide, s2_plan
from sofai.world import (
    REFERENCE_GRID,
    Action,
    Cell,
    GridSpec,
    State,
    TaskSpec,
    is_terminal,
    legal_actions,
    reference_task,
    reward,
    task_from_dict,
    transition,
)

from test_experience import OPTIMAL_PATH

D, U, L, R = Action.DOWN, Action.UP, Action.LEFT, Action.RIGHT
C = Cell


def _set(store, task, cell, action, q, n):
    store.q_table[(task.task_id, cell, action)] = ActionValueStat(q, n)


def trained_store(task) -> ExperienceStore:
    store = ExperienceStore(alpha=1.0, gamma=1.0)
    for _ in range(200):
        for c, a in OPTIMAL_PATH:
            nxt = c.step(a)
            r = reward(task.grid, State(c, 0), a, State(nxt, 1))
            store.q_update(task, c, a, r, nxt, legal_actions(task.grid, nxt), nxt == task.grid.goal)
    return store


def execute(task, actions, rng=None):
    state, total = State(task.grid.start, 0), 0.0
    for a in actions:
        if is_terminal(task.grid, state):
            break
        nxt = transition(task.grid, state, a, rng or Xoshiro256.from_seed(0))
        total += reward(task.grid, state, a, nxt)
        state = nxt
    return total, state


# -- S1 -----------------------------------------------------------------------


def test_s1_cold_start(ref):
    out = s1_decide(ExperienceStore(), ref, State(C(0, 0), 0))
    assert (out.action, out.confidence, out.solver_id) == (D, 0.0, "S1")


def test_s1_margin_example(ref):
    store = ExperienceStore()
    _set(store, ref, C(0, 0), D, 0.9, 3)
    _set(store, ref, C(0, 0), R, -0.1, 2)
    out = s1_decide(store, ref, State(C(0, 0), 0), k=5, m_scale=1.0)
    assert out.action is D
    assert out.confidence == pytest.approx(0.5)


def test_s1_tie_breaks_canonically(ref):
    store = ExperienceStore()
    _set(store, ref, C(0, 0), D, 2.0, 1)
    _set(store, ref, C(0, 0), R, 2.0, 4)
    out = s1_decide(store, ref, State(C(0, 0), 0))
    assert out.action is D and out.confidence == 0.0


def test_s1_prefers_higher_later_action(ref):
    store = ExperienceStore()
    _set(store, ref, C(0, 0), D, -1.0, 1)
    out = s1_decide(store, ref, State(C(0, 0), 0))
    assert out.action is R  # unvisited Right keeps q0 = 0


def test_confidence_examples(ref):
    store = ExperienceStore()
    assert s1_confidence(store, ref, State(C(0, 0), 0)) == 0.0
    _set(store, ref, C(0, 0), D, 1.0, 5)
    assert s1_confidence(store, ref, State(C(0, 0), 0), k=5, m_scale=1.0) == pytest.approx(0.5)
    corridor = task_from_dict({**REFERENCE_GRID, "width": 3, "height": 1, "goal": [2, 0], "walls": [], "features": []})
    store2 = ExperienceStore()
    _set(store2, corridor, C(0, 0), R, -3.0, 20)
    assert s1_confidence(store2, corridor, State(C(0, 0), 0), k=5) == pytest.approx(0.8)


def test_confidence_gap_saturates_and_scales(ref):
    store = ExperienceStore()
    _set(store, ref, C(0, 0), D, 3.0, 5)
    _set(store, ref, C(0, 0), R, 2.5, 5)
    s = State(C(0, 0), 0)
    assert s1_confidence(store, ref, s, k=10, m_scale=1.0) == pytest.approx(0.5 * 0.5)
    assert s1_confidence(store, ref, s, k=10, m_scale=0.25) == pytest.approx(0.5)


@settings(max_examples=80, deadline=None)
@given(st.integers(0, 500), st.integers(0, 500), st.floats(0, 5), st.floats(0.1, 20))
def test_confidence_monotone_in_visits(n1, extra, gap, k):
    ref = reference_task()
    s = State(C(0, 0), 0)
    confs = []
    for n in (n1, n1 + extra):
        store = ExperienceStore()
        _set(store, ref, C(0, 0), D, 1.0 + gap, n)
        _set(store, ref, C(0, 0), R, 1.0, 0)
        confs.append(s1_confidence(store, ref, s, k=k))
    assert 0.0 <= confs[0] <= confs[1] <= 1.0


def test_s1_is_pure(ref):
    store = trained_store(ref)
    state = State(C(0, 2), 2)
    outs = {(o.action, o.confidence) for o in (s1_decide(store, ref, state) for _ in range(20))}
    assert len(outs) == 1


@pytest.mark.parametrize("side", [5, 50])
def test_s1_lookup_count_is_legal_count(side):
    grid = GridSpec(side, side, (0, 0), (side - 1, side - 1), walls=frozenset({(1, 1), (2, 3)}), max_steps=4 * side)
    task = TaskSpec.from_grid(f"g{side}", grid)
    store = ExperienceStore()
    for c in [C(0, 0), C(1, 0), C(2, 2), C(side - 1, 0), C(side // 2, side - 1), C(side - 2, side - 2)]:
        before = store.lookups
        s1_decide(store, task, State(c, 0))
        assert store.lookups - before == len(legal_actions(grid, c))


def test_rollout_untrained(ref):
    out = s1_rollout(ExperienceStore(), ref, State(C(0, 0), 0))
    assert out.confidence == 0.0
    # cold start bounces between (0,0) and (0,1) until the step limit
    assert len(out.trajectory) == ref.grid.max_steps


def test_rollout_trained_reaches_optimum(ref):
    out = s1_rollout(trained_store(ref), ref, State(C(0, 0), 0))
    assert out.trajectory == tuple(a for _, a in OPTIMAL_PATH)
    total, end = execute(ref, out.trajectory)
    assert (total, end.cell) == (4.0, ref.grid.goal)
    assert 0.0 < out.confidence <= 1.0


# -- S2 -----------------------------------------------------------------------


def test_s2_plan_examples(ref):
    table = s2_plan(ref)
    for h in range(1, 21):
        assert table.value(C(2, 3), h) == 9.0
        assert table.value(ref.grid.goal, h) == 0.0
    assert table.value(ref.grid.goal, 0) == 0.0
    assert table.value(C(0, 0), 20) == oracle_optimal_return(ref)[0] == 4.0


def test_s2_decide_examples(ref):
    # both first moves are optimal according to the oracle
    via_down = oracle_optimal_return(reference_task(start=[0, 1], max_steps=19))[0] - 1.0
    via_right = oracle_optimal_return(reference_task(start=[1, 0], max_steps=19))[0] - 1.0
    assert via_down == via_right == 4.0
    out = s2_decide(ref, State(C(0, 0), 0))
    assert out.action is D and out.confidence == 1.0
    assert len(out.trajectory) == 6
    out = s2_decide(ref, State(C(2, 3), 5))
    assert out.action is R
    assert s2_plan(ref).value(C(2, 3), 15) == 9.0


def test_s2_myopic_at_last_step(ref):
    state = State(C(2, 1), 19)
    out = s2_decide(ref, state)
    one_step = {a: reward(ref.grid, state, a, State(state.cell.step(a), 20)) for a in legal_actions(ref.grid, state)}
    best = max(one_step.values())
    assert one_step[out.action] == best
    assert out.action is next(a for a in legal_actions(ref.grid, state) if one_step[a] == best)


def test_s2_rejects_terminal(ref):
    with pytest.raises(ValueError):
        s2_decide(ref, State(ref.grid.goal, 3))


def test_s2_cache_rebuilds_on_change(ref):
    a = s2_plan(ref)
    b = s2_plan(reference_task(goal_reward=20.0))
    assert a.value(C(2, 3), 1) == 9.0 and b.value(C(2, 3), 1) == 19.0


@pytest.mark.parametrize("seed", range(60))
def test_s2_matches_oracle(seed):
    task = random_task(seed)
    best, _ = oracle_optimal_return(task)
    state, total = State(task.grid.start, 0), 0.0
    while not is_terminal(task.grid, state):
        out = s2_decide(task, state)
        nxt = transition(task.grid, state, out.action, Xoshiro256.from_seed(seed))
        total += reward(task.grid, state, out.action, nxt)
        state = nxt
    assert total == best
    assert s2_plan(task).value(task.grid.start, task.grid.max_steps) == best


@pytest.mark.parametrize("seed", range(25))
@pytest.mark.parametrize("slip", [0.0, 0.2, 0.7])
def test_bellman_residual(seed, slip):
    assert bellman_residual(s2_plan(random_task(seed, slip=slip))) <= 1e-9


def _expectimax(task, cell, h, eps):
    # naive recursion written from the slip rule, no tables
    g = task.grid
    if h == 0 or cell == g.goal:
        return 0.0
    legal = legal_actions(g, cell)
    best = float("-inf")
    for a in legal:
        if len(legal) == 1:
            outcomes = [(1.0, a)]
        else:
            outcomes = [(1.0 - eps, a)] + [(eps / (len(legal) - 1), b) for b in legal if b != a]
        v = 0.0
        for p, b in outcomes:
            nxt = cell.step(b)
            v += p * (reward(g, State(cell, 0), b, State(nxt, 1)) + _expectimax(task, nxt, h - 1, eps))
        best = max(best, v)
    return best


@pytest.mark.parametrize("eps", [0.1, 0.5])
def test_s2_values_match_expectimax(eps):
    task = reference_task(slip_prob=eps, max_steps=5)
    table = s2_plan(task)
    for c in [C(0, 0), C(2, 1), C(3, 2), C(1, 3)]:
        for h in range(0, 5):
            assert table.value(c, h) == pytest.approx(_expectimax(task, c, h, eps), abs=1e-12)


def test_s2_policy_monte_carlo_under_slip():
    task = reference_task(slip_prob=0.2)
    expected = s2_plan(task).value(task.grid.start, task.grid.max_steps)
    rng = Xoshiro256.from_seed(11)
    n, total = 4000, 0.0
    for _ in range(n):
        state = State(task.grid.start, 0)
        while not is_terminal(task.grid, state):
            a = s2_decide(task, state).action
            nxt = transition(task.grid, state, a, rng)
            total += reward(task.grid, state, a, nxt)
            state = nxt
    assert abs(total / n - expected) < 0.15
