"""Graph axioms, dynamics and serialization round-trips."""

import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hystgrad.graph import (
    AdmissibleGraph,
    graph_from_dict,
    graph_to_dict,
    levels_to_steps,
    run_input,
    transition,
    validate_admissible,
)
from hystgrad.preisach import build_graph


def relay_graph() -> AdmissibleGraph:
    return AdmissibleGraph((("a",), ("b",)), {"a": "b"}, {"b": "a"}, (0.0, 1.0))


def test_relay_graph_is_admissible():
    rep = validate_admissible({"levels": [["a"], ["b"]], "up": {"a": "b"}, "down": {"b": "a"}})
    assert rep.ok


def test_preisach4_level_sizes():
    g = build_graph(4)
    assert sum(g.level_sizes()) == 16
    assert g.level_sizes() == [1, 4, 6, 4, 1]
    rep = validate_admissible(graph_to_dict(g))
    assert rep.ok


def test_missing_down_edge_is_reported():
    cand = {
        "levels": [["a"], ["b", "c"], ["d"]],
        "up": {"a": "b", "b": "d", "c": "d"},
        "down": {"b": "a", "d": "b"},  # c lacks its down-edge
    }
    rep = validate_admissible(cand)
    assert not rep.ok
    assert any("'c'" in v and "down" in v for v in rep.violations)


def test_duplicate_vertex_and_bad_target_are_violations_not_crashes():
    cand = {
        "levels": [["a"], ["a"]],
        "up": {"a": "zzz"},
        "down": {},
    }
    rep = validate_admissible(cand)
    assert not rep.ok


def test_unknown_keys_rejected():
    cand = {"levels": [["a"], ["b"]], "up": {"a": "b"}, "down": {"b": "a"}, "extra": 1}
    assert not validate_admissible(cand).ok


def test_transition_relay():
    g = relay_graph()
    assert transition(g, "a", "up") == "b"
    assert transition(g, "b", "down") == "a"
    with pytest.raises(ValueError):
        transition(g, "b", "up")
    with pytest.raises(ValueError):
        transition(g, "a", "down")


def test_transition_preisach2_by_hand():
    # applying the bit rules by hand: (0,1) up -> (1,1), (1,0) down -> (0,0)
    g = build_graph(2)
    assert transition(g, "01", "up") == "11"
    assert transition(g, "10", "down") == "00"


def test_run_input_relay_loop():
    g = relay_graph()
    traj = run_input(g, "a", [0, 1, 0])
    assert [v for _, v in traj] == ["a", "b", "a"]


def test_run_input_preisach2_stepwise():
    g = build_graph(2)
    traj = run_input(g, "00", [0, 1, 2, 1])
    assert [v for _, v in traj] == ["00", "01", "11", "10"]


def test_run_input_constant_sequence():
    g = relay_graph()
    traj = run_input(g, "a", [0, 0, 0])
    assert [v for _, v in traj] == ["a", "a", "a"]


def test_run_input_wrong_start_level():
    g = relay_graph()
    with pytest.raises(ValueError):
        run_input(g, "b", [0, 1])


def test_non_unit_step_rejected():
    with pytest.raises(ValueError):
        levels_to_steps([0, 2], 2)


@pytest.mark.parametrize("N", range(1, 9))
def test_preisach_graphs_admissible_for_all_small_N(N):
    g = build_graph(N)
    assert validate_admissible(graph_to_dict(g)).ok
    assert sum(g.level_sizes()) == 2 ** N


def test_roundtrip_bit_exact(tmp_path):
    g = build_graph(3)
    d = graph_to_dict(g)
    text = json.dumps(d)
    g2 = graph_from_dict(json.loads(text))
    assert g2 == g
    assert graph_to_dict(g2) == d


@st.composite
def random_walks(draw):
    n = draw(st.integers(min_value=1, max_value=4))
    length = draw(st.integers(min_value=1, max_value=30))
    start = draw(st.integers(min_value=0, max_value=n))
    steps = draw(st.lists(st.integers(min_value=-1, max_value=1),
                          min_size=length, max_size=length))
    levels = [start]
    for s in steps:
        levels.append(min(n, max(0, levels[-1] + s)))
    return n, levels


@settings(max_examples=60, deadline=None)
@given(random_walks())
def test_every_trajectory_step_is_an_edge(walk):
    n, levels = walk
    g = build_graph(n)
    start = g.levels[levels[0]][0]
    traj = run_input(g, start, levels)
    for (i0, v0), (i1, v1) in zip(traj, traj[1:]):
        if i1 == i0 + 1:
            assert g.up[v0] == v1
        elif i1 == i0 - 1:
            assert g.down[v0] == v1
        else:
            assert v0 == v1
