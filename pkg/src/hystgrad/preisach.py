"""Discrete Preisach model: relays, staircase states, transition graph.

The model superposes N(N+1)/2 non-ideal relays indexed (a, b), 1 <= a <= b <= N,
driven by a common input on the grid u^k = k.  Relay (a, b) switches on at
u_+ = b - 1/4 and off at u_- = a - 3/4, so every threshold lies strictly
between grid points and the on-grid dynamics is independent of the boundary
convention.  Memory states are monotone staircases encoded as N-bit tuples;
the bit rules (flip the last 0 going up, the last 1 going down) generate the
edges of the transition graph.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

from .graph import AdmissibleGraph

__all__ = [
    "Relay",
    "relay_step",
    "StaircaseState",
    "staircase_up",
    "staircase_down",
    "RelayBank",
    "fresh_bank",
    "bank_step",
    "bank_output",
    "state_of_bank",
    "build_graph",
    "state_output",
]


@dataclass(frozen=True)
class Relay:
    """Two-state hysteretic switch, bistable on [u_minus, u_plus]."""

    u_minus: float
    u_plus: float
    state: int = 0

    def __post_init__(self):
        if not self.u_minus < self.u_plus:
            raise ValueError("relay thresholds must satisfy u_- < u_+")
        if self.state not in (0, 1):
            raise ValueError("relay state must be 0 or 1")


def relay_step(r: Relay, u: float) -> Relay:
    """Switch on at u >= u_+, off at u <= u_-, hold otherwise."""
    if u >= r.u_plus:
        return replace(r, state=1) if r.state != 1 else r
    if u <= r.u_minus:
        return replace(r, state=0) if r.state != 0 else r
    return r


StaircaseState = tuple[int, ...]


def _check_bits(s: StaircaseState) -> None:
    if not s or any(b not in (0, 1) for b in s):
        raise ValueError(f"not a bit tuple: {s!r}")


def level_of_state(s: StaircaseState) -> int:
    _check_bits(s)
    return sum(s)


def staircase_up(s: StaircaseState) -> StaircaseState:
    """Flip the last 0, i.e. the 0 followed only by 1s."""
    _check_bits(s)
    for k in range(len(s) - 1, -1, -1):
        if s[k] == 0:
            return s[:k] + (1,) + s[k + 1:]
        # positions right of k are all checked to be 1 as we scan backwards
    raise ValueError(f"state {s!r} is all ones, no up-transition")


def staircase_down(s: StaircaseState) -> StaircaseState:
    """Flip the last 1, i.e. the 1 followed only by 0s."""
    _check_bits(s)
    for k in range(len(s) - 1, -1, -1):
        if s[k] == 1:
            return s[:k] + (0,) + s[k + 1:]
    raise ValueError(f"state {s!r} is all zeros, no down-transition")


# -- relay bank --------------------------------------------------------------

@dataclass(frozen=True)
class RelayBank:
    """Triangular bank of relays sharing one input on the grid 0..N."""

    N: int
    relays: tuple[Relay, ...]  # ordered by (a, b), a outer, b inner

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if len(self.relays) != self.N * (self.N + 1) // 2:
            raise ValueError("relay count must be N(N+1)/2")

    def pairs(self):
        for a in range(1, self.N + 1):
            for b in range(a, self.N + 1):
                yield (a, b)


def fresh_bank(N: int) -> RelayBank:
    relays = tuple(Relay(a - 0.75, b - 0.25)
                   for a in range(1, N + 1) for b in range(a, N + 1))
    return RelayBank(N, relays)


def bank_step(bank: RelayBank, u: float) -> RelayBank:
    """Apply a common grid input to every relay."""
    if not (float(u).is_integer() and 0 <= u <= bank.N):
        raise ValueError(f"input {u!r} is not on the grid 0..{bank.N}")
    return RelayBank(bank.N, tuple(relay_step(r, u) for r in bank.relays))


def bank_output(bank: RelayBank) -> int:
    return sum(r.state for r in bank.relays)


def _prefixes(bank: RelayBank) -> tuple[int, ...]:
    """Per-row on-prefix lengths A_b, b = 1..N; error if a row is not a prefix."""
    on = {}
    for (a, b), r in zip(bank.pairs(), bank.relays):
        on.setdefault(b, []).append((a, r.state))
    A = []
    for b in range(1, bank.N + 1):
        states = [s for _, s in sorted(on[b])]
        k = sum(states)
        if states != [1] * k + [0] * (len(states) - k):
            raise ValueError(f"row b={b} is not an on-prefix: {states}")
        A.append(k + (b - len(states)))  # rows are restricted to a <= b
    return tuple(A)


def _prefixes_of_bits(bits: StaircaseState) -> tuple[int, ...]:
    """Row prefixes of the staircase encoded by bits (derivation of Fig. 3)."""
    N = len(bits)
    A = [None] * (N + 1)  # 1-based rows
    r, c = N, 0
    for bit in bits:
        if bit == 1:
            c += 1
        else:
            A[r] = c
            r -= 1
    for b in range(1, r + 1):
        A[b] = b  # rows below the staircase foot are fully on
    return tuple(A[1:])


@lru_cache(maxsize=16)
def _decode_table(N: int) -> dict[tuple[int, ...], StaircaseState]:
    table = {}
    for code in range(2 ** N):
        bits = tuple((code >> (N - 1 - k)) & 1 for k in range(N))
        table[_prefixes_of_bits(bits)] = bits
    return table


def state_of_bank(bank: RelayBank) -> StaircaseState:
    """The staircase tuple whose below-line relay set is the on-set."""
    try:
        A = _prefixes(bank)
    except ValueError as e:
        raise ValueError(f"relay configuration is not a staircase: {e}") from e
    table = _decode_table(bank.N)
    if A not in table:
        raise ValueError(f"relay configuration is not a staircase: prefixes {A}")
    return table[A]


def bank_of_state(s: StaircaseState) -> RelayBank:
    """Inverse of state_of_bank (used by tests and the output map)."""
    N = len(s)
    A = _prefixes_of_bits(s)
    relays = []
    for a in range(1, N + 1):
        for b in range(a, N + 1):
            relays.append(Relay(a - 0.75, b - 0.25, state=1 if a <= A[b - 1] else 0))
    return RelayBank(N, tuple(relays))


def state_output(s: StaircaseState) -> int:
    """Model output p for a staircase state (count of on relays)."""
    return sum(_prefixes_of_bits(s))


# -- transition graph --------------------------------------------------------

def build_graph(N: int) -> AdmissibleGraph:
    """Graph of all 2^N staircase states with the up/down bit-flip edges."""
    if N < 1:
        raise ValueError("N must be >= 1")
    states = [tuple((code >> (N - 1 - k)) & 1 for k in range(N))
              for code in range(2 ** N)]
    name = lambda s: "".join(map(str, s))
    levels = [[] for _ in range(N + 1)]
    for s in states:
        levels[level_of_state(s)].append(name(s))
    for lvl in levels:
        lvl.sort()
    up = {name(s): name(staircase_up(s)) for s in states if level_of_state(s) < N}
    down = {name(s): name(staircase_down(s)) for s in states if level_of_state(s) > 0}
    return AdmissibleGraph(tuple(tuple(l) for l in levels), up, down,
                           tuple(float(k) for k in range(N + 1)))
