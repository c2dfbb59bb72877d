"""Deformation schedules: segments, exchanges, permutations, and the full
graph realization.

The realization follows the constructive induction: between grid inputs the
potential passes through a canonical midpoint shape holding the minima of
both adjacent levels; each half-interval alternates permutation stages
(chains of adjacent exchanges) with fold stages that eliminate the current
rightmost minimum, and ends with a tidy blend back to the canonical shape of
the grid level.
"""

from __future__ import annotations

import json
from bisect import bisect_right
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import ConstructionError
from .field import (
    BlendFamily,
    ConstantFamily,
    FieldFamily,
    FrozenFamilyField,
    LemmaGeometry,
    MollifiedPhiField,
    RotationFamily,
    ScalarField2D,
    SeparableField,
    audit_smoothed,
    build_phi,
    linear_blend,
    mollify,
    rotation_family,
    separable,
)
from .graph import AdmissibleGraph
from .multiwell import Potential1D, SNFamily1D, build_multiwell, build_sn_family, build_tilde

__all__ = [
    "DeformationSegment",
    "DeformationSchedule",
    "SNFamilyField",
    "concatenate",
    "elementary_transposition",
    "permutation_schedule",
    "TransitionRecord",
    "Realization",
    "realize",
    "manifest_dict",
]


class SNFamilyField(FieldFamily):
    """Separable lift of a 1-d fold family: V(x, u) = f(x_1, u) + x_2^2."""

    def __init__(self, fam: SNFamily1D):
        super().__init__((fam.u_a, fam.u_b))
        self.fam = fam

    def value(self, p, u: float):
        x1, x2 = np.asarray(p, dtype=float)[..., 0], np.asarray(p, dtype=float)[..., 1]
        return self.fam.value(x1, u) + x2 * x2

    def grad(self, p, u: float):
        p = np.asarray(p, dtype=float)
        x1, x2 = p[..., 0], p[..., 1]
        return np.stack([np.asarray(self.fam.d1(x1, u)), 2.0 * x2], axis=-1)

    def far_field_x1_bound(self) -> float:
        lo = min(self.fam.base.pp.span[0], self.fam.bump.span[0])
        hi = max(self.fam.base.pp.span[1], self.fam.bump.span[1])
        return max(abs(lo), abs(hi))


@dataclass
class DeformationSegment:
    """One u-interval of the schedule with its field family."""

    u_a: float
    u_b: float
    family: FieldFamily
    kind: str                      # blend | mollify-blend | rotation | sn | constant | tidy
    meta: dict = field(default_factory=dict)

    def start_field(self) -> ScalarField2D:
        return self.family.field_at(self.u_a)

    def end_field(self) -> ScalarField2D:
        return self.family.field_at(self.u_b)

    def critical_lines(self, u: float):
        """Lines that contain every local minimum of the member at u."""
        if self.kind == "rotation":
            fam: RotationFamily = self.family  # type: ignore[assignment]
            return [("axis",), ("diameter", fam.center[0], fam.angle(u))]
        return [("axis",)]


class DeformationSchedule:
    """Contiguous segments over a global u range, evaluable as V(x, u)."""

    def __init__(self, segments: list[DeformationSegment]):
        if not segments:
            raise ValueError("empty schedule")
        segments = sorted(segments, key=lambda s: s.u_a)
        for a, b in zip(segments, segments[1:]):
            if abs(a.u_b - b.u_a) > 1e-12:
                raise ConstructionError(
                    f"segments not contiguous at u={a.u_b} vs {b.u_a}")
        self.segments = segments
        self._starts = [s.u_a for s in segments]
        self.u_a = segments[0].u_a
        self.u_b = segments[-1].u_b

    def segment_at(self, u: float) -> DeformationSegment:
        if not (self.u_a - 1e-12 <= u <= self.u_b + 1e-12):
            raise ValueError(f"u={u} outside schedule range [{self.u_a}, {self.u_b}]")
        i = bisect_right(self._starts, u) - 1
        i = min(max(i, 0), len(self.segments) - 1)
        return self.segments[i]

    def value(self, p, u: float):
        s = self.segment_at(u)
        return s.family.value(p, min(max(u, s.u_a), s.u_b))

    def grad(self, p, u: float):
        s = self.segment_at(u)
        return s.family.grad(p, min(max(u, s.u_a), s.u_b))

    def field_at(self, u: float) -> ScalarField2D:
        s = self.segment_at(u)
        return s.family.field_at(min(max(u, s.u_a), s.u_b))

    def far_field_x1_bound(self) -> float:
        return max(s.family.far_field_x1_bound() for s in self.segments)

    def junction_mismatch(self, n_probe: int = 12, seed: int = 7) -> float:
        """Largest field disagreement at interior segment junctions."""
        rng = np.random.default_rng(seed)
        bound = self.far_field_x1_bound()
        pts = np.column_stack([rng.uniform(-bound, bound, n_probe),
                               rng.uniform(-2.0, 2.0, n_probe)])
        worst = 0.0
        for a, b in zip(self.segments, self.segments[1:]):
            va = np.asarray(a.family.value(pts, a.u_b), dtype=float)
            vb = np.asarray(b.family.value(pts, b.u_a), dtype=float)
            worst = max(worst, float(np.max(np.abs(va - vb))))
        return worst


def concatenate(parts: list) -> DeformationSchedule:
    """Glue segments and schedules; endpoint fields must agree."""
    segments: list[DeformationSegment] = []
    for part in parts:
        if isinstance(part, DeformationSchedule):
            segments.extend(part.segments)
        else:
            segments.append(part)
    sched = DeformationSchedule(segments)
    mism = sched.junction_mismatch()
    if mism > 1e-9:
        raise ConstructionError(f"junction mismatch {mism} in concatenation")
    return sched


# -- the elementary exchange -----------------------------------------------

_PARTS_CACHE: dict = {}


def _transposition_parts(f: Potential1D, j: int, config: Config):
    """Geometry, lowered-barrier potential and smoothed exchange field for
    swapping minima j and j+1 of f (cached on the potential's fingerprint)."""
    key = (f.fingerprint(), j, config.fast_path, config.geom_rho)
    if key in _PARTS_CACHE:
        return _PARTS_CACHE[key]
    geom = LemmaGeometry.fit(f, j, config)
    tilde = build_tilde(f, j, geom, config)
    phi = build_phi(separable(tilde), geom, config)
    mol = mollify(phi, config=config)
    mol.self_check(_selfcheck_points(geom))
    audit_smoothed(mol, config)
    parts = (geom, tilde, mol)
    if len(_PARTS_CACHE) > 512:
        _PARTS_CACHE.clear()
    _PARTS_CACHE[key] = parts
    return parts


def _selfcheck_points(geom: LemmaGeometry):
    c = geom.center
    return [
        [c - 0.98 * geom.R_S, 0.4 * geom.rho],
        [c + 1.1 * geom.R_L, 0.2 * geom.gap],
        [c, 0.95 * geom.b_S],
    ]


def elementary_transposition(V0: SeparableField, j: int,
                             u_span: tuple[float, float],
                             config: Config = DEFAULT_CONFIG) -> DeformationSchedule:
    """Four-stage exchange of minima j and j+1: lower the barrier, splice in
    the smoothed radial field, rotate the inner disc by pi, return."""
    f = V0.f
    geom, tilde, mol = _transposition_parts(f, j, config)
    V1 = separable(tilde)
    ua, ub = u_span
    v1 = ua + 0.25 * (ub - ua)
    v2 = ua + 0.50 * (ub - ua)
    v3 = ua + 0.75 * (ub - ua)
    mins = [c.x for c in f.minima]
    meta = {"swap": (j, j + 1), "center": geom.center,
            "pair": (mins[j - 1], mins[j])}
    segs = [
        DeformationSegment(ua, v1, linear_blend(V0, V1, (ua, v1)), "blend", meta),
        DeformationSegment(v1, v2, linear_blend(V1, mol, (v1, v2)),
                           "mollify-blend", meta),
        DeformationSegment(v2, v3, rotation_family(mol, geom, (v2, v3)),
                           "rotation", meta),
    ]
    end3 = segs[-1].end_field()
    segs.append(DeformationSegment(v3, ub, linear_blend(end3, V0, (v3, ub)),
                                   "blend", meta))
    return DeformationSchedule(segs)


def _bubble_swaps(order: list, target: list) -> list[int]:
    """Adjacent swaps (1-based left positions) transforming order into target."""
    work = list(order)
    swaps: list[int] = []
    for i in range(len(target)):
        k = work.index(target[i])
        for t in range(k, i, -1):
            work[t - 1], work[t] = work[t], work[t - 1]
            swaps.append(t)  # swaps positions (t, t+1)
    if work != list(target):
        raise ConstructionError("bubble decomposition failed")
    return swaps


def permutation_schedule(V0: SeparableField, perm: tuple[int, ...],
                         u_span: tuple[float, float],
                         config: Config = DEFAULT_CONFIG) -> DeformationSchedule:
    """Realize the permutation: the minimum starting at position k ends at
    position perm[k-1].  Decomposed into adjacent exchanges by bubble sort."""
    N = len(V0.f.minima)
    if sorted(perm) != list(range(1, N + 1)):
        raise ValueError(f"not a permutation of 1..{N}: {perm}")
    order = list(range(1, N + 1))
    target = [0] * N
    for k in range(1, N + 1):
        target[perm[k - 1] - 1] = k
    swaps = _bubble_swaps(order, target)
    return _swap_chain(V0, swaps, u_span, config)


def _swap_chain(V0: SeparableField, swaps: list[int],
                u_span: tuple[float, float], config: Config,
                descending: bool = False) -> DeformationSchedule:
    """Chain of adjacent exchanges; temporal order is ascending u unless
    descending is set (then the first swap sits at the top of the span)."""
    ua, ub = u_span
    if not swaps:
        return DeformationSchedule(
            [DeformationSegment(ua, ub, ConstantFamily(V0, u_span), "constant")])
    m = len(swaps)
    width = (ub - ua) / m
    laid = list(swaps)
    if descending:
        laid = laid[::-1]
    parts = []
    for idx, j in enumerate(laid):
        span = (ua + idx * width, ua + (idx + 1) * width)
        parts.append(elementary_transposition(V0, j, span, config))
    return concatenate(parts)


# -- realization -------------------------------------------------------------

@dataclass(frozen=True)
class TransitionRecord:
    source: str
    target: str
    direction: str         # up | down
    level_from: int
    level_to: int
    u_a: float             # span of the fold segment
    u_b: float
    u_sn: float
    x_merge: float
    source_position: int   # 1-based x-order position eliminated
    landing_position: int


@dataclass
class Realization:
    graph: AdmissibleGraph
    config: Config
    schedule: DeformationSchedule
    X: dict[int, dict[str, tuple[float, float]]]
    records: list[TransitionRecord]

    def record_for(self, source: str, target: str) -> TransitionRecord | None:
        for r in self.records:
            if r.source == source and r.target == target:
                return r
        return None

    def vertex_at(self, level: int, point, tol: float = 1e-6) -> str | None:
        px, py = float(point[0]), float(point[1])
        for v, (x, y) in self.X[level].items():
            if abs(px - x) <= tol and abs(py - y) <= tol:
                return v
        return None

    def field_at(self, u: float) -> ScalarField2D:
        return self.schedule.field_at(u)


class _Ledger:
    """Track labels ordered by x-position during a half-interval build."""

    def __init__(self, labels: list):
        self.order = list(labels)  # order[p-1] = label at position p

    def position(self, label) -> int:
        return self.order.index(label) + 1

    def arrange(self, doomed, target) -> list[int]:
        """Swaps after which doomed sits last and target second to last."""
        rest = [l for l in self.order if l not in (doomed, target)]
        new_order = rest + [target, doomed]
        swaps = _bubble_swaps(self.order, new_order)
        self.order = new_order
        return swaps

    def sort_to(self, final_labels: list) -> list[int]:
        swaps = _bubble_swaps(self.order, list(final_labels))
        self.order = list(final_labels)
        return swaps

    def pop_last(self):
        return self.order.pop()


def _build_half(graph: AdmissibleGraph, i: int, direction: str,
                f_mid: Potential1D, config: Config):
    """Construct one half-interval of deformations.

    direction 'up': realizes the up-edges of level i on [u_mid, u_{i+1}].
    direction 'down': realizes the down-edges of level i+1 on [u_i, u_mid],
    constructed along decreasing u.
    """
    lo_names = list(graph.levels[i])
    hi_names = list(graph.levels[i + 1])
    N, Np = len(lo_names), len(hi_names)
    u_lo, u_hi = graph.input_values[i], graph.input_values[i + 1]
    u_mid = 0.5 * (u_lo + u_hi)

    labels = [("lo", k) for k in range(N)] + [("hi", k) for k in range(Np)]
    ledger = _Ledger(labels)
    current = f_mid
    segments: list[DeformationSegment] = []
    records: list[TransitionRecord] = []

    if direction == "up":
        doomed_names, land_map = lo_names, graph.up
        doomed_tag, target_tag = "lo", "hi"
        target_names = hi_names
        n_elim = N
        grid = np.linspace(u_mid, u_hi, 2 * n_elim + 2)
        descending = False
        final_labels = [("hi", k) for k in range(Np)]
        final_count = Np
        lvl_from, lvl_to = i, i + 1
    else:
        doomed_names, land_map = hi_names, graph.down
        doomed_tag, target_tag = "hi", "lo"
        target_names = lo_names
        n_elim = Np
        grid = np.linspace(u_mid, u_lo, 2 * n_elim + 2)  # descending
        descending = True
        final_labels = [("lo", k) for k in range(N)]
        final_count = N
        lvl_from, lvl_to = i + 1, i

    def span(a: float, b: float) -> tuple[float, float]:
        return (min(a, b), max(a, b))

    for k in range(n_elim):
        v_perm_a, v_perm_b = grid[2 * k], grid[2 * k + 1]
        v_sn_a, v_sn_b = grid[2 * k + 1], grid[2 * k + 2]
        doomed = (doomed_tag, k)
        tgt_name = land_map[doomed_names[k]]
        target = (target_tag, target_names.index(tgt_name))
        swaps = ledger.arrange(doomed, target)
        segments.extend(_swap_chain(separable(current), swaps,
                                    span(v_perm_a, v_perm_b), config,
                                    descending=descending).segments)
        u_sn = 0.5 * (v_sn_a + v_sn_b)
        fam = build_sn_family(current, span(v_sn_a, v_sn_b), u_sn,
                              direction=direction, config=config)
        sn_span = span(v_sn_a, v_sn_b)
        segments.append(DeformationSegment(
            sn_span[0], sn_span[1], SNFamilyField(fam), "sn",
            {"edge": (doomed_names[k], tgt_name), "u_sn": u_sn,
             "x_merge": fam.merge_x}))
        M = len(ledger.order)
        records.append(TransitionRecord(
            source=doomed_names[k], target=tgt_name, direction=direction,
            level_from=lvl_from, level_to=lvl_to,
            u_a=sn_span[0], u_b=sn_span[1], u_sn=u_sn, x_merge=fam.merge_x,
            source_position=M, landing_position=M - 1))
        current = fam.end_potential()
        ledger.pop_last()

    # final subinterval: sort the survivors, then tidy to the canonical shape
    fa, fb = grid[2 * n_elim], grid[2 * n_elim + 1]
    f_mid_u = 0.5 * (fa + fb)
    swaps = ledger.sort_to(final_labels)
    canonical = build_multiwell([float(t + 1) for t in range(final_count)],
                                f_mid.m_star, f_mid.M_star, config)
    if direction == "up":
        segments.extend(_swap_chain(separable(current), swaps,
                                    (fa, f_mid_u), config).segments)
        segments.append(DeformationSegment(
            f_mid_u, fb,
            linear_blend(separable(current), separable(canonical), (f_mid_u, fb)),
            "tidy"))
    else:
        # along decreasing u: permutation first (upper part), tidy at the bottom
        segments.extend(_swap_chain(separable(current), swaps,
                                    (f_mid_u, fa), config,
                                    descending=True).segments)
        segments.append(DeformationSegment(
            fb, f_mid_u,
            linear_blend(separable(canonical), separable(current), (fb, f_mid_u)),
            "tidy"))
    return segments, records


def realize(graph: AdmissibleGraph, config: Config = DEFAULT_CONFIG) -> Realization:
    """Build a planar gradient realization of an admissible graph."""
    X: dict[int, dict[str, tuple[float, float]]] = {}
    for i, level in enumerate(graph.levels):
        X[i] = {v: (float(k + 1), 0.0) for k, v in enumerate(level)}

    segments: list[DeformationSegment] = []
    records: list[TransitionRecord] = []
    for i in range(graph.n):
        N, Np = len(graph.levels[i]), len(graph.levels[i + 1])
        f_mid = build_multiwell([float(k + 1) for k in range(N + Np)],
                                config=config)
        for direction in ("down", "up"):
            segs, recs = _build_half(graph, i, direction, f_mid, config)
            segments.extend(segs)
            records.extend(recs)

    if graph.n == 0:
        only = build_multiwell([1.0] * 0 or [1.0], config=config)
        segments.append(DeformationSegment(
            graph.input_values[0], graph.input_values[0] + 1.0,
            ConstantFamily(separable(only), (graph.input_values[0],
                                             graph.input_values[0] + 1.0)),
            "constant"))

    sched = concatenate(segments)
    if abs(sched.u_a - graph.input_values[0]) > 1e-12 or \
       abs(sched.u_b - graph.input_values[-1]) > 1e-12:
        raise ConstructionError("schedule does not span the input range")
    return Realization(graph, config, sched, X, records)


# -- manifest -----------------------------------------------------------------

def manifest_dict(r: Realization) -> dict:
    from .graph import graph_to_dict

    return {
        "graph": graph_to_dict(r.graph),
        "config": json.loads(r.config.to_json()),
        "u_range": [r.schedule.u_a, r.schedule.u_b],
        "segments": [
            {"u_a": s.u_a, "u_b": s.u_b, "kind": s.kind}
            for s in r.schedule.segments
        ],
        "X": {str(i): {v: list(xy) for v, xy in r.X[i].items()} for i in r.X},
        "transitions": [
            {
                "source": t.source, "target": t.target,
                "direction": t.direction,
                "level_from": t.level_from, "level_to": t.level_to,
                "u_a": t.u_a, "u_b": t.u_b, "u_sn": t.u_sn,
                "x_merge": t.x_merge,
                "source_position": t.source_position,
                "landing_position": t.landing_position,
            }
            for t in r.records
        ],
    }


def save_manifest(r: Realization, path: str) -> None:
    with open(path, "w") as fh:
        json.dump(manifest_dict(r), fh, indent=2)
        fh.write("\n")
