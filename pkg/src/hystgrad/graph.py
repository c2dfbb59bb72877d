"""Admissible transition graphs and their discrete dynamics.

An admissible graph is a leveled vertex set S_0 ... S_n where every interior
vertex carries exactly one up-edge and one down-edge into the adjacent
levels.  Unit-step input sequences drive a walk along those edges.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

__all__ = [
    "AdmissibleGraph",
    "GraphValidationReport",
    "validate_admissible",
    "transition",
    "run_input",
    "levels_to_steps",
    "graph_to_dict",
    "graph_from_dict",
    "load_graph",
    "save_graph",
]


@dataclass(frozen=True)
class AdmissibleGraph:
    """Validated leveled graph with unique up/down edges per vertex."""

    levels: tuple[tuple[str, ...], ...]
    up: dict[str, str]
    down: dict[str, str]
    input_values: tuple[float, ...]

    def __post_init__(self):
        report = validate_admissible(
            {"levels": [list(l) for l in self.levels],
             "up": dict(self.up), "down": dict(self.down),
             "input_values": list(self.input_values)})
        if not report.ok:
            raise ValueError("not an admissible graph:\n" + report.summary())

    @property
    def n(self) -> int:
        return len(self.levels) - 1

    def level_of(self, vertex: str) -> int:
        for i, lvl in enumerate(self.levels):
            if vertex in lvl:
                return i
        raise KeyError(f"unknown vertex {vertex!r}")

    def level_sizes(self) -> list[int]:
        return [len(l) for l in self.levels]

    def edges(self) -> list[tuple[str, str, str]]:
        """All directed edges as (source, target, 'up'|'down'), sorted."""
        out = [(s, t, "up") for s, t in self.up.items()]
        out += [(s, t, "down") for s, t in self.down.items()]
        return sorted(out)


@dataclass
class GraphValidationReport:
    violations: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def summary(self) -> str:
        if self.ok:
            return "ok"
        return "\n".join(f"- {v}" for v in self.violations)


def validate_admissible(candidate: dict) -> GraphValidationReport:
    """Check the structural axioms; malformed input becomes violations."""
    rep = GraphValidationReport()
    levels = candidate.get("levels")
    if not isinstance(levels, (list, tuple)) or not levels:
        rep.violations.append("levels: missing or empty")
        return rep
    seen: dict[str, int] = {}
    for i, lvl in enumerate(levels):
        if not isinstance(lvl, (list, tuple)) or len(lvl) == 0:
            rep.violations.append(f"level {i}: empty or not a list")
            continue
        for v in lvl:
            if not isinstance(v, str):
                rep.violations.append(f"level {i}: vertex id {v!r} is not a string")
            elif v in seen:
                rep.violations.append(f"vertex {v!r}: duplicated in levels {seen[v]} and {i}")
            else:
                seen[v] = i
    n = len(levels) - 1
    up = candidate.get("up", {})
    down = candidate.get("down", {})
    if not isinstance(up, dict) or not isinstance(down, dict):
        rep.violations.append("up/down: must be mappings")
        return rep

    for name, mapping, lo, hi, delta in (("up", up, 0, n - 1, +1),
                                         ("down", down, 1, n, -1)):
        for s, t in mapping.items():
            if s not in seen:
                rep.violations.append(f"{name} edge source {s!r}: unknown vertex")
                continue
            i = seen[s]
            if not (lo <= i <= hi):
                rep.violations.append(f"{name} edge at {s!r}: level {i} has no {name}-edge")
            if t not in seen:
                rep.violations.append(f"{name} edge {s!r}->{t!r}: unknown target")
            elif s in seen and seen[t] != seen[s] + delta:
                rep.violations.append(
                    f"{name} edge {s!r}->{t!r}: target level {seen[t]}, expected {seen[s] + delta}")
        for i, lvl in enumerate(levels):
            if not (lo <= i <= hi):
                continue
            for s in lvl:
                if isinstance(s, str) and s not in mapping:
                    rep.violations.append(f"vertex {s!r} in level {i}: missing {name}-edge")

    values = candidate.get("input_values")
    if values is not None:
        if len(values) != n + 1:
            rep.violations.append(
                f"input_values: {len(values)} entries for {n + 1} levels")
        elif any(values[i] >= values[i + 1] for i in range(len(values) - 1)):
            rep.violations.append("input_values: not strictly increasing")
    extra = set(candidate) - {"levels", "up", "down", "input_values"}
    if extra:
        rep.violations.append(f"unknown keys: {sorted(extra)}")
    return rep


def transition(g: AdmissibleGraph, s: str, direction: str) -> str:
    """Follow the unique up or down edge of s."""
    i = g.level_of(s)
    if direction == "up":
        if i >= g.n:
            raise ValueError(f"vertex {s!r} on the top level has no up-edge")
        return g.up[s]
    if direction == "down":
        if i <= 0:
            raise ValueError(f"vertex {s!r} on the bottom level has no down-edge")
        return g.down[s]
    raise ValueError(f"direction must be 'up' or 'down', got {direction!r}")


def levels_to_steps(levels: list[int], n: int) -> list[int]:
    """Validate a level-index sequence as a unit-step input sequence."""
    if not levels:
        raise ValueError("empty input sequence")
    for i, l in enumerate(levels):
        if not (0 <= l <= n):
            raise ValueError(f"level {l} at position {i} outside 0..{n}")
        if i and abs(l - levels[i - 1]) > 1:
            raise ValueError(
                f"input sequence steps by {l - levels[i - 1]} at position {i}; "
                "only unit steps are allowed")
    return list(levels)


def run_input(g: AdmissibleGraph, start: str, levels: list[int]) -> list[tuple[int, str]]:
    """Fold transition over a unit-step level sequence.

    Returns the vertex trajectory [(level, vertex), ...]; a repeated input
    value leaves the state unchanged.
    """
    levels = levels_to_steps(levels, g.n)
    if g.level_of(start) != levels[0]:
        raise ValueError(
            f"start vertex {start!r} is on level {g.level_of(start)}, "
            f"sequence starts at level {levels[0]}")
    traj = [(levels[0], start)]
    s = start
    for prev, cur in zip(levels, levels[1:]):
        if cur == prev + 1:
            s = transition(g, s, "up")
        elif cur == prev - 1:
            s = transition(g, s, "down")
        traj.append((cur, s))
    return traj


# -- serialization ----------------------------------------------------------

def graph_to_dict(g: AdmissibleGraph) -> dict:
    return {
        "levels": [list(l) for l in g.levels],
        "up": dict(sorted(g.up.items())),
        "down": dict(sorted(g.down.items())),
        "input_values": list(g.input_values),
    }


def graph_from_dict(d: dict) -> AdmissibleGraph:
    report = validate_admissible(d)
    if not report.ok:
        raise ValueError("invalid graph file:\n" + report.summary())
    levels = tuple(tuple(l) for l in d["levels"])
    values = d.get("input_values")
    if values is None:
        values = list(range(len(levels)))
    return AdmissibleGraph(levels, dict(d["up"]), dict(d["down"]),
                           tuple(float(v) for v in values))


def save_graph(g: AdmissibleGraph, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(graph_to_dict(g), fh, indent=2)
        fh.write("\n")


def load_graph(path: str) -> AdmissibleGraph:
    with open(path) as fh:
        return graph_from_dict(json.load(fh))
