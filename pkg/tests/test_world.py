import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gridgen import random_task
from sofai.rng import Xoshiro256
from sofai.world import (
    ACTIONS,
    REFERENCE_GRID,
    Action,
    Cell,
    GridSpec,
    State,
    TaskParseError,
    TaskSpec,
    TaskValidationError,
    enumerate_reachable,
    is_terminal,
    legal_actions,
    load_task,
    reference_task,
    reward,
    save_task,
    task_from_dict,
    task_to_dict,
    transition,
)

D, U, L, R = Action.DOWN, Action.UP, Action.LEFT, Action.RIGHT


class _NoRandom:
    def random(self):
        raise AssertionError("deterministic move consumed randomness")

    randbelow = random


def _state(x, y, t=0):
    return State(Cell(x, y), t)


def test_canonical_order():
    assert ACTIONS == (U, D, L, R)


def test_legal_actions_examples(ref):
    assert legal_actions(ref.grid, _state(0, 0)) == (D, R)
    assert legal_actions(ref.grid, _state(1, 0)) == (L, R)
    forb = reference_task(forbidden_moves=[{"cell": [2, 0], "action": "Right"}])
    assert legal_actions(forb.grid, _state(2, 0)) == (D, L)


def test_transition_examples(ref):
    assert transition(ref.grid, _state(0, 0), R, _NoRandom()) == _state(1, 0, 1)
    always_slip = reference_task(slip_prob=1.0)
    for seed in range(20):
        assert transition(always_slip.grid, _state(0, 0), R, Xoshiro256.from_seed(seed)).cell == Cell(0, 1)
    corridor = task_from_dict({**REFERENCE_GRID, "width": 3, "height": 1, "start": [0, 0], "goal": [2, 0],
                               "walls": [], "features": [], "slip_prob": 0.9})
    assert legal_actions(corridor.grid, _state(0, 0)) == (R,)
    for seed in range(20):
        assert transition(corridor.grid, _state(0, 0), R, Xoshiro256.from_seed(seed)) == _state(1, 0, 1)


def test_transition_rejects_illegal_and_terminal(ref):
    with pytest.raises(ValueError, match="illegal"):
        transition(ref.grid, _state(0, 0), U, Xoshiro256.from_seed(1))
    with pytest.raises(ValueError, match="terminal"):
        transition(ref.grid, _state(3, 2, 20), D, Xoshiro256.from_seed(1))


@pytest.mark.parametrize("eps", [0.1, 0.3, 0.5, 0.8])
def test_slip_frequency(eps):
    task = reference_task(slip_prob=eps)
    rng = Xoshiro256.from_seed(2024)
    hits = sum(transition(task.grid, _state(0, 0), R, rng).cell == Cell(1, 0) for _ in range(10_000))
    assert abs(hits / 10_000 - (1 - eps)) <= 0.02


def test_slip_spreads_over_other_actions():
    task = reference_task(slip_prob=0.6)
    rng = Xoshiro256.from_seed(5)
    # at (2,1) Left hits the wall, so a slip from Up goes Down or Right
    counts = {}
    for _ in range(9000):
        c = transition(task.grid, _state(2, 1), U, rng).cell
        counts[c] = counts.get(c, 0) + 1
    assert set(counts) == {Cell(2, 0), Cell(2, 2), Cell(3, 1)}
    for c in (Cell(2, 2), Cell(3, 1)):
        assert abs(counts[c] / 9000 - 0.3) < 0.02


def test_reward_examples(ref):
    g = ref.grid
    assert reward(g, _state(2, 3), R, _state(3, 3, 1)) == 9.0
    assert reward(g, _state(2, 1), D, _state(2, 2, 1)) == -3.0
    assert reward(g, _state(0, 0), D, _state(0, 1, 1)) == -1.0


def test_reward_is_three_term_sum_everywhere():
    for seed in range(30):
        task = random_task(seed)
        g = task.grid
        for c in enumerate_reachable(g):
            for a in legal_actions(g, c):
                nxt = c.step(a)
                expected = -g.step_cost - dict(g.features).get(nxt, 0.0) + (g.goal_reward if nxt == g.goal else 0.0)
                assert reward(g, State(c, 0), a, State(nxt, 1)) == expected


def test_is_terminal(ref):
    assert is_terminal(ref.grid, _state(3, 3, 3))
    assert is_terminal(ref.grid, _state(0, 1, 20))
    assert not is_terminal(ref.grid, _state(0, 1, 5))


def test_legal_moves_respect_constraints():
    for seed in range(40):
        g = random_task(seed).grid
        for c in g.cells():
            if c in g.walls:
                continue
            for a in legal_actions(g, c):
                n = c.step(a)
                assert g.in_bounds(n) and n not in g.walls and (c, a) not in g.forbidden_moves


def _flood(grid):
    # independent recursive fill over raw geometry
    out = set()

    def go(c):
        if c in out:
            return
        out.add(c)
        if c == grid.goal:
            return
        for dx, dy in ((0, -1), (0, 1), (-1, 0), (1, 0)):
            n = Cell(c.x + dx, c.y + dy)
            a = {(0, -1): U, (0, 1): D, (-1, 0): L, (1, 0): R}[(dx, dy)]
            if 0 <= n.x < grid.width and 0 <= n.y < grid.height and n not in grid.walls and (c, a) not in grid.forbidden_moves:
                go(n)

    go(grid.start)
    return out


def test_enumerate_reachable_examples(ref):
    cells = enumerate_reachable(ref.grid)
    assert len(cells) == 15
    assert cells == {Cell(x, y) for x in range(4) for y in range(4)} - {Cell(1, 1)}
    walled = GridSpec(3, 3, (1, 1), (1, 1), walls=frozenset({(0, 1), (2, 1), (1, 0), (1, 2)}))
    assert enumerate_reachable(walled) == {Cell(1, 1)}
    single = GridSpec(1, 1, (0, 0), (0, 0))
    assert enumerate_reachable(single) == {Cell(0, 0)}


def test_enumerate_reachable_matches_flood_fill():
    for seed in range(40):
        g = random_task(seed).grid
        assert enumerate_reachable(g) == _flood(g)


def test_load_reference_defaults(tmp_path):
    p = tmp_path / "ref.json"
    p.write_text(json.dumps(REFERENCE_GRID))
    task = load_task(p)
    assert (task.r_min, task.r_max) == (-60.0, 10.0)
    assert task.grid.walls == {Cell(1, 1)}
    assert task.grid.penalty(Cell(2, 2)) == 2.0


def test_load_rejects_walled_in_goal(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps({**REFERENCE_GRID, "walls": [[2, 3], [3, 2]]}))
    with pytest.raises(TaskValidationError) as exc:
        load_task(p)
    assert exc.value.field == "goal"


def test_load_missing_width(tmp_path):
    doc = dict(REFERENCE_GRID)
    del doc["width"]
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(doc))
    with pytest.raises(TaskParseError, match="width"):
        load_task(p)


@pytest.mark.parametrize(
    "override, field",
    [
        ({"start": [1, 1]}, "start"),
        ({"goal": [1, 1]}, "goal"),
        ({"features": [{"cell": [2, 2], "penalty": -1}]}, "features"),
        ({"slip_prob": 1.5}, "slip_prob"),
        ({"r_min": 20.0}, "r_min"),
        ({"forbidden_moves": [{"cell": [0, 0], "action": "Down"}, {"cell": [0, 0], "action": "Right"}]}, "goal"),
    ],
)
def test_validation_names_field(override, field):
    with pytest.raises(TaskValidationError) as exc:
        reference_task(**override)
    assert exc.value.field == field


def test_dead_end_rejected():
    # (0,1) can be entered from (0,0) but every exit is forbidden
    with pytest.raises(TaskValidationError) as exc:
        reference_task(forbidden_moves=[{"cell": [0, 1], "action": "Up"}, {"cell": [0, 1], "action": "Down"}])
    assert exc.value.field == "forbidden_moves"


@pytest.mark.parametrize(
    "override, field",
    [({"width": "4"}, "width"), ({"start": [0]}, "start"), ({"forbidden_moves": [{"cell": [0, 0], "action": "Jump"}]}, "forbidden_moves[0]")],
)
def test_parse_errors_name_field(override, field):
    with pytest.raises(TaskParseError) as exc:
        task_from_dict({**REFERENCE_GRID, **override})
    assert exc.value.field == field


def test_invalid_json(tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    with pytest.raises(TaskParseError):
        load_task(p)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000), st.sampled_from([0.0, 0.25]))
def test_roundtrip(tmp_path_factory, seed, slip):
    task = random_task(seed, slip=slip)
    p = tmp_path_factory.mktemp("rt") / "task.json"
    save_task(task, p)
    again = load_task(p)
    assert again == task
    assert task_to_dict(again) == task_to_dict(task)


def test_taskspec_is_hashable(ref):
    assert hash(ref) == hash(reference_task())
    assert isinstance(ref, TaskSpec)
