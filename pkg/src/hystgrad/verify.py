"""End-to-end verification of realizations, the exchange lemma suite, and
the Preisach oracle equivalence."""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import HystgradError
from .flow import SweepConfig, adiabatic_sweep, track_equilibrium
from .graph import AdmissibleGraph, run_input
from .multiwell import Potential1D
from .preisach import bank_output, bank_step, build_graph, fresh_bank, state_of_bank
from .schedule import DeformationSchedule, Realization
from .piecewise import bisect_root

__all__ = [
    "CheckResult",
    "VerificationReport",
    "check_realization",
    "check_lemma1",
    "oracle_compare_preisach",
    "random_admissible_graph",
    "scan_minima",
]


@dataclass
class CheckResult:
    name: str
    passed: bool
    measured: float | str | None = None
    tolerance: float | None = None
    details: str = ""


@dataclass
class VerificationReport:
    checks: list[CheckResult] = field(default_factory=list)
    elapsed: float = 0.0

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def add(self, name: str, passed: bool, measured=None, tolerance=None,
            details: str = "") -> None:
        self.checks.append(CheckResult(name, bool(passed), measured, tolerance,
                                       details))

    def summary(self) -> str:
        lines = []
        width = max((len(c.name) for c in self.checks), default=10)
        for c in self.checks:
            status = "PASS" if c.passed else "FAIL"
            extra = ""
            if c.measured is not None:
                extra = f"  measured={c.measured!r}"
                if c.tolerance is not None:
                    extra += f" tol={c.tolerance:g}"
            if c.details:
                extra += f"  ({c.details})"
            lines.append(f"{status}  {c.name:<{width}}{extra}")
        lines.append(f"{'PASS' if self.passed else 'FAIL'}  overall "
                     f"({len(self.checks)} checks, {self.elapsed:.1f}s)")
        return "\n".join(lines)

    def to_json(self) -> str:
        return json.dumps({
            "passed": self.passed,
            "elapsed": self.elapsed,
            "checks": [vars(c) for c in self.checks],
        }, indent=2)


# -- minima scanning -----------------------------------------------------------

def _polish_2d(grad_fn, x0) -> np.ndarray | None:
    x = np.asarray(x0, dtype=float).copy()
    for _ in range(40):
        g = np.asarray(grad_fn(x), dtype=float)
        if float(np.hypot(*g)) < 1e-11:
            return x
        h = 1e-6
        gx = (np.asarray(grad_fn(x + [h, 0])) - np.asarray(grad_fn(x - [h, 0]))) / (2 * h)
        gy = (np.asarray(grad_fn(x + [0, h])) - np.asarray(grad_fn(x - [0, h]))) / (2 * h)
        H = 0.5 * (np.column_stack([gx, gy]) + np.column_stack([gx, gy]).T)
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)) or float(np.hypot(*step)) > 0.5:
            return None
        x = x - step
    return None


def _min_eig(grad_fn, x) -> float:
    h = 1e-6
    gx = (np.asarray(grad_fn(x + [h, 0])) - np.asarray(grad_fn(x - [h, 0]))) / (2 * h)
    gy = (np.asarray(grad_fn(x + [0, h])) - np.asarray(grad_fn(x - [0, h]))) / (2 * h)
    H = 0.5 * (np.column_stack([gx, gy]) + np.column_stack([gx, gy]).T)
    return float(np.linalg.eigvalsh(H)[0])


def scan_minima(value_fn, grad_fn, lines, t_range: tuple[float, float],
                n: int = 600) -> list[np.ndarray]:
    """Locate all local minima along the given lines, 2-d confirmed.

    Lines are ('axis',) or ('diameter', cx, angle); for fields that are even
    in x2 and increase away from the axis, plus rotated copies, these lines
    carry every minimum.
    """
    found: list[np.ndarray] = []
    for line in lines:
        if line[0] == "axis":
            ts = np.linspace(t_range[0], t_range[1], n)
            pts = np.column_stack([ts, np.zeros(n)])
        else:
            _, cx, ang = line
            reach = 0.75
            ts = np.linspace(-reach, reach, max(n // 2, 120))
            pts = np.column_stack([cx + ts * np.cos(ang), ts * np.sin(ang)])
        vals = np.asarray(value_fn(pts), dtype=float)
        for i in range(1, len(ts) - 1):
            if vals[i] <= vals[i - 1] and vals[i] <= vals[i + 1]:
                x = _polish_2d(grad_fn, pts[i])
                if x is None:
                    continue
                if _min_eig(grad_fn, x) <= 0:
                    continue
                if any(float(np.hypot(*(x - y))) < 1e-5 for y in found):
                    continue
                found.append(x)
    return sorted(found, key=lambda p: float(p[0]))


# -- realization verification ---------------------------------------------------

def check_realization(r: Realization, g: AdmissibleGraph,
                      config: Config | None = None,
                      workers: int = 4) -> VerificationReport:
    """The executable content of the realization definition: far field,
    minima-vertex bijections at grid inputs, and every edge reproduced by
    adiabatic simulation (and nothing else claimed)."""
    t0 = time.time()
    config = config or r.config
    cfg = SweepConfig.from_config(config)
    rep = VerificationReport()
    if r.graph != g:
        rep.add("graph-pairing", False, details="realization built for a different graph")
        rep.elapsed = time.time() - t0
        return rep

    # (i) far-field identity on sampled rings and monotone radial growth
    bound = r.schedule.far_field_x1_bound() + 0.5
    rng = np.random.default_rng(config.rng_seed)
    us = list(g.input_values)
    us += [0.5 * (a + b) for a, b in zip(g.input_values, g.input_values[1:])]
    us += list(rng.uniform(g.input_values[0], g.input_values[-1], 5))
    worst_ring = 0.0
    growth_ok = True
    for u in us:
        fld = r.schedule.field_at(float(u))
        th = np.linspace(0.0, 2 * np.pi, 48, endpoint=False)
        ring = 1.5 * bound * np.column_stack([np.cos(th), np.sin(th)])
        mask = np.abs(ring[:, 0]) >= bound
        vals = np.asarray(fld.value(ring[mask]), dtype=float)
        worst_ring = max(worst_ring, float(np.max(np.abs(
            vals - np.sum(ring[mask] ** 2, axis=1)))))
        for ang in (0.0, 0.7, 1.57, 2.4, 3.14159, 4.2):
            tvals = np.linspace(bound, 3 * bound, 24)
            ray = np.column_stack([tvals * np.cos(ang), tvals * np.sin(ang)])
            v = np.asarray(fld.value(ray), dtype=float)
            growth_ok &= bool(np.all(np.diff(v) > 0))
    rep.add("far-field-identity", worst_ring < 1e-9, worst_ring, 1e-9)
    rep.add("radial-growth", growth_ok)

    # (ii) independent minima scan at each grid input
    lo = min(-1.0, -bound)
    for i, u in enumerate(g.input_values):
        fld = r.schedule.field_at(float(u))
        mins = scan_minima(fld.value, fld.grad, [("axis",)], (lo, bound))
        names = list(g.levels[i])
        ok = len(mins) == len(names)
        worst = 0.0
        if ok:
            for v in names:
                x_map = np.asarray(r.X[i][v], dtype=float)
                d = min(float(np.hypot(*(x_map - m))) for m in mins)
                worst = max(worst, d)
            ok = worst < config.verify_tol
        rep.add(f"minima-bijection-level-{i}", ok, worst if ok else len(mins),
                config.verify_tol,
                details=f"|S_{i}|={len(names)}, found {len(mins)}")

    # transition records: exactly one per edge, none for non-edges
    edges = {(s, t) for s, t, _ in g.edges()}
    recorded = [(t.source, t.target) for t in r.records]
    rep.add("records-cover-edges",
            sorted(edges) == sorted(set(recorded)) and
            len(recorded) == len(set(recorded)),
            details=f"{len(recorded)} records for {len(edges)} edges")

    # (iii) every edge reproduced by a one-step adiabatic sweep
    def run_edge(edge):
        s, t, kind = edge
        i = g.level_of(s)
        j = i + 1 if kind == "up" else i - 1
        try:
            verts, _ = adiabatic_sweep(r, s, [i, j], cfg)
            landed = verts[-1][1]
            return edge, landed == t, landed
        except HystgradError as e:
            return edge, False, f"error: {e}"

    with ThreadPoolExecutor(max_workers=workers) as pool:
        results = list(pool.map(run_edge, g.edges()))
    for edge, ok, landed in sorted(results, key=lambda r: r[0]):
        s, t, kind = edge
        rep.add(f"edge-{kind}-{s}->{t}", ok,
                details="" if ok else f"landed on {landed!r}")
    rep.elapsed = time.time() - t0
    return rep


# -- exchange lemma verification -------------------------------------------------

def check_lemma1(sched: DeformationSchedule, perm: tuple[int, ...],
                 config: Config = DEFAULT_CONFIG,
                 n_grid: int = 200, n_samples: int = 500) -> VerificationReport:
    """Endpoint identity, constant minima count, continuous tracks, and the
    terminal permutation of an exchange schedule."""
    t0 = time.time()
    rep = VerificationReport()
    N = len(perm)
    f0 = sched.field_at(sched.u_a)
    f1 = sched.field_at(sched.u_b)
    bound = sched.far_field_x1_bound() + 0.5
    rng = np.random.default_rng(config.rng_seed)
    pts = np.column_stack([rng.uniform(-bound, bound, n_samples),
                           rng.uniform(-3.0, 3.0, n_samples)])
    resid = float(np.max(np.abs(np.asarray(f0.value(pts)) -
                                np.asarray(f1.value(pts)))))
    rep.add("endpoint-identity", resid < 1e-9, resid, 1e-9)

    counts_ok = True
    bad = ""
    for u in np.linspace(sched.u_a, sched.u_b, n_grid):
        seg = sched.segment_at(float(u))
        fld = sched.field_at(float(u))
        mins = scan_minima(fld.value, fld.grad, seg.critical_lines(float(u)),
                           (-1.0, bound))
        if len(mins) != N:
            counts_ok = False
            bad = f"{len(mins)} minima at u={u:.4f}"
            break
    rep.add("minima-count-constant", counts_ok, details=bad)

    # continuous tracks and terminal assignment
    cfg = SweepConfig.from_config(config)
    starts = scan_minima(f0.value, f0.grad, [("axis",)], (-1.0, bound))
    ok_terminal = len(starts) == N
    worst = 0.0
    if ok_terminal:
        for k, x0 in enumerate(starts, start=1):
            path, event = track_equilibrium(sched, x0, sched.u_a, sched.u_b, cfg)
            if event is not None:
                ok_terminal = False
                bad = f"track {k} hit a fold at u={event.u}"
                break
            target = starts[perm[k - 1] - 1]
            d = float(np.hypot(*(path[-1][1] - target)))
            worst = max(worst, d)
        ok_terminal = ok_terminal and worst < 1e-6
    rep.add("terminal-permutation", ok_terminal, worst, 1e-6, details=bad
            if not ok_terminal else "")
    rep.elapsed = time.time() - t0
    return rep


# -- Preisach oracle --------------------------------------------------------------

def oracle_compare_preisach(N: int, trials: int, seq_len: int,
                            rng_seed: int) -> VerificationReport:
    """Graph dynamics against the relay-bank simulation, step for step."""
    t0 = time.time()
    rep = VerificationReport()
    if N > 6:
        rep.add("N-bound", False, details="N above the configured maximum 6")
        rep.elapsed = time.time() - t0
        return rep
    g = build_graph(N)
    rng = np.random.default_rng(rng_seed)
    mismatches = 0
    for _ in range(trials):
        levels = [0]
        for _ in range(seq_len):
            lo, hi = max(0, levels[-1] - 1), min(N, levels[-1] + 1)
            levels.append(int(rng.integers(lo, hi + 1)))
        traj = run_input(g, "0" * N, levels)
        bank = fresh_bank(N)
        p_prev = None
        for (lvl, vertex), u in zip(traj, levels):
            bank = bank_step(bank, u)
            bits = state_of_bank(bank)
            if "".join(map(str, bits)) != vertex:
                mismatches += 1
            p_prev = bank_output(bank)
        del p_prev
    rep.add(f"oracle-N{N}", mismatches == 0, mismatches, 0,
            details=f"{trials} trials x {seq_len} steps")
    rep.elapsed = time.time() - t0
    return rep


def random_admissible_graph(rng: np.random.Generator, n: int,
                            max_size: int = 4) -> AdmissibleGraph:
    """Uniformly random up/down targets on random level sizes."""
    sizes = [int(rng.integers(1, max_size + 1)) for _ in range(n + 1)]
    levels = tuple(tuple(f"L{i}V{k}" for k in range(sz))
                   for i, sz in enumerate(sizes))
    up, down = {}, {}
    for i in range(n):
        for v in levels[i]:
            up[v] = levels[i + 1][int(rng.integers(0, sizes[i + 1]))]
    for i in range(1, n + 1):
        for v in levels[i]:
            down[v] = levels[i - 1][int(rng.integers(0, sizes[i - 1]))]
    return AdmissibleGraph(levels, up, down,
                           tuple(float(k) for k in range(n + 1)))
