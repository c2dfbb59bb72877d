"""Relay, staircase and relay-bank semantics, including the oracle equivalence."""

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hystgrad.graph import run_input
from hystgrad.preisach import (
    Relay,
    RelayBank,
    bank_of_state,
    bank_output,
    bank_step,
    build_graph,
    fresh_bank,
    level_of_state,
    relay_step,
    staircase_down,
    staircase_up,
    state_of_bank,
    state_output,
)


def test_relay_switching_rule():
    r = Relay(0.0, 1.0, 0)
    assert relay_step(r, 2.0).state == 1
    assert relay_step(Relay(0.0, 1.0, 1), 0.5).state == 1  # bistable interval
    assert relay_step(Relay(0.0, 1.0, 1), -1.0).state == 0


def test_relay_threshold_order_enforced():
    with pytest.raises(ValueError):
        Relay(1.0, 0.5)


def test_staircase_up_cases():
    assert staircase_up((0, 1, 0, 1)) == (0, 1, 1, 1)
    assert staircase_up((0, 0, 0, 0)) == (0, 0, 0, 1)
    with pytest.raises(ValueError):
        staircase_up((1, 1))


def test_staircase_down_cases():
    assert staircase_down((0, 1, 0, 1)) == (0, 1, 0, 0)
    assert staircase_down((1, 0, 0, 0)) == (0, 0, 0, 0)
    with pytest.raises(ValueError):
        staircase_down((0, 0))


def test_bank_output_all_off_and_all_on():
    bank = fresh_bank(5)
    assert bank_output(bank) == 0
    for u in range(6):
        bank = bank_step(bank, u)
    assert bank_output(bank) == 15  # all 15 relays on after sweeping to u^5


def test_bank_step_grid_only():
    bank = fresh_bank(2)
    with pytest.raises(ValueError):
        bank_step(bank, 0.5)


def test_bank_step_idempotent():
    bank = fresh_bank(3)
    bank = bank_step(bank, 2)
    again = bank_step(bank, 2)
    assert again == bank


def test_bank_wipe_at_zero():
    bank = fresh_bank(2)
    for u in (1, 2, 1, 0):
        bank = bank_step(bank, u)
    assert bank_output(bank) == 0
    assert state_of_bank(bank) == (0, 0)


def test_history_0_2_1_gives_state_10():
    # brute-force relay oracle for the spec's N=2 example
    bank = fresh_bank(2)
    for u in (0, 2, 1):
        bank = bank_step(bank, u)
    assert state_of_bank(bank) == (1, 0)
    # output: relays on after reaching 2 then dropping to 1: (1,1) and (1,2)
    assert bank_output(bank) == 2


def test_state_of_bank_fresh_and_full():
    assert state_of_bank(fresh_bank(4)) == (0, 0, 0, 0)
    bank = fresh_bank(4)
    for u in range(5):
        bank = bank_step(bank, u)
    assert state_of_bank(bank) == (1, 1, 1, 1)


def test_state_of_bank_rejects_non_staircase():
    bank = fresh_bank(2)
    relays = list(bank.relays)
    # turn on only the hardest relay (1,2): unreachable configuration
    relays[1] = Relay(relays[1].u_minus, relays[1].u_plus, 1)
    broken = RelayBank(2, tuple(relays))
    with pytest.raises(ValueError):
        state_of_bank(broken)


def test_bank_of_state_roundtrip():
    for code in range(16):
        bits = tuple((code >> (3 - k)) & 1 for k in range(4))
        assert state_of_bank(bank_of_state(bits)) == bits


def test_build_graph_sizes():
    g1 = build_graph(1)
    assert g1.level_sizes() == [1, 1]
    g3 = build_graph(3)
    assert g3.level_sizes() == [1, 3, 3, 1]
    g4 = build_graph(4)
    assert g4.level_sizes() == [1, 4, 6, 4, 1]


def _random_level_walk(rng, n, length):
    levels = [0]
    for _ in range(length):
        lo = max(0, levels[-1] - 1)
        hi = min(n, levels[-1] + 1)
        levels.append(rng.integers(lo, hi + 1))
    return levels


@pytest.mark.parametrize("N", [1, 2, 3, 4])
def test_oracle_equivalence_small(N):
    import numpy as np

    rng = np.random.default_rng(1234 + N)
    g = build_graph(N)
    for _ in range(60):
        levels = _random_level_walk(rng, N, 40)
        # graph dynamics
        start = "0" * N
        traj = run_input(g, start, levels)
        # relay bank dynamics
        bank = fresh_bank(N)
        for (lvl, vertex), u in zip(traj, levels):
            bank = bank_step(bank, u)
            bits = state_of_bank(bank)
            assert "".join(map(str, bits)) == vertex
            assert bank_output(bank) == state_output(bits)


def test_up_transition_increases_output():
    for N in (2, 3, 4, 5):
        for code in range(2 ** N - 1):
            bits = tuple((code >> (N - 1 - k)) & 1 for k in range(N))
            if level_of_state(bits) == N:
                continue
            up = staircase_up(bits)
            assert state_output(up) > state_output(bits)


@settings(max_examples=80, deadline=None)
@given(st.integers(min_value=1, max_value=6), st.data())
def test_single_flip_inversion_rule(N, data):
    """up then down (or down then up) inverts exactly when the flip lands on
    the final position, i.e. when the trailing bit points the other way."""
    bits = tuple(data.draw(st.integers(min_value=0, max_value=1)) for _ in range(N))
    if level_of_state(bits) < N:
        restored = staircase_down(staircase_up(bits)) == bits
        assert restored == (bits[-1] == 0)
    if level_of_state(bits) > 0:
        restored = staircase_up(staircase_down(bits)) == bits
        assert restored == (bits[-1] == 1)


def _trailing_zero_run(bits):
    run = 0
    for b in reversed(bits):
        if b == 0:
            run += 1
        else:
            break
    return run


def test_minor_loop_closure_characterization():
    """up^m then down^m restores the state iff the ups only consume the
    trailing zero run; the second cycle always closes (return-point memory)."""
    for N in (2, 3, 4, 5):
        for code in range(2 ** N):
            bits = tuple((code >> (N - 1 - k)) & 1 for k in range(N))
            i = level_of_state(bits)
            for m in range(1, N - i + 1):
                s = bits
                for _ in range(m):
                    s = staircase_up(s)
                for _ in range(m):
                    s = staircase_down(s)
                once = s
                if m <= _trailing_zero_run(bits):
                    assert once == bits
                for _ in range(m):
                    s = staircase_up(s)
                for _ in range(m):
                    s = staircase_down(s)
                assert s == once
