"""Smooth multiwell potentials with prescribed critical structure.

A potential here is a piecewise quintic with an exact x^2 tail, equal-depth
minima and equal-height maxima, an exact quadratic window around every
critical point, and strict monotonicity between critical points.  The module
also builds the lowered-barrier variant used by the exchange construction
and the one-parameter fold families that eliminate the rightmost minimum.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING, Callable

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import ConstructionError, GeometryError
from .piecewise import DEGREE, PiecewisePoly, bisect_root, find_sign_changes, ramp

if TYPE_CHECKING:
    from .field import LemmaGeometry

__all__ = [
    "CriticalPoint",
    "Potential1D",
    "build_multiwell",
    "critical_points",
    "build_tilde",
    "SNFamily1D",
    "build_sn_family",
    "sample_potential_csv",
]


@dataclass(frozen=True)
class CriticalPoint:
    x: float
    kind: str          # "min" or "max"
    value: float
    curvature: float   # f'' at the point


class Potential1D:
    """Multiwell scalar potential f with f(x) = x^2 outside its window."""

    def __init__(self, pp: PiecewisePoly, criticals: list[CriticalPoint],
                 m_star: float, M_star: float, window_q: float):
        if pp.tail != "x2":
            raise ValueError("potential must have an x^2 tail")
        self.pp = pp
        self.criticals = sorted(criticals, key=lambda c: c.x)
        self.m_star = m_star
        self.M_star = M_star
        self.window_q = window_q  # half-width of exact quadratic windows

    def __call__(self, x):
        return self.pp(x)

    def d1(self, x):
        return self.pp.d1(x)

    def d2(self, x):
        return self.pp.d2(x)

    @property
    def window(self) -> tuple[float, float]:
        return self.pp.span

    @property
    def minima(self) -> list[CriticalPoint]:
        return [c for c in self.criticals if c.kind == "min"]

    @property
    def maxima(self) -> list[CriticalPoint]:
        return [c for c in self.criticals if c.kind == "max"]

    def fingerprint(self) -> bytes:
        return self.pp.knots.tobytes() + self.pp.coeffs.tobytes()

    def audit(self, tol: float = 1e-9) -> None:
        """Detected critical set must match the stored list; tails exact; C2."""
        detected = _scan_criticals(self.pp)
        if len(detected) != len(self.criticals):
            raise ConstructionError(
                f"critical count mismatch: stored {len(self.criticals)}, "
                f"detected {len(detected)} at {[round(c.x, 6) for c in detected]}")
        for got, want in zip(detected, self.criticals):
            if abs(got.x - want.x) > tol or got.kind != want.kind:
                raise ConstructionError(
                    f"critical point mismatch: stored {want}, detected {got}")
            if abs(got.value - want.value) > 1e-9:
                raise ConstructionError(
                    f"critical value mismatch at x={want.x}: "
                    f"{got.value} vs {want.value}")
        lo, hi = self.window
        for x in np.concatenate([np.linspace(lo - 3, lo, 7),
                                 np.linspace(hi, hi + 3, 7)]):
            if abs(self.pp(x) - x * x) > 1e-12:
                raise ConstructionError(f"tail is not x^2 at x={x}")
        _check_c2(self.pp)


def _check_c2(pp: PiecewisePoly, tol: float = 1e-7) -> None:
    """One-sided second derivatives agree exactly at every interior knot."""
    for i in range(1, len(pp.knots) - 1):
        h = pp.knots[i] - pp.knots[i - 1]
        cl = pp.coeffs[i - 1]
        left = sum(k * (k - 1) * cl[k] * h ** (k - 2) for k in range(2, len(cl)))
        right = 2 * pp.coeffs[i][2]
        if abs(left - right) > tol * max(1.0, abs(left), abs(right)):
            raise ConstructionError(
                f"C2 violation at knot {pp.knots[i]}: {left} vs {right}")


def _scan_criticals(pp: PiecewisePoly, pad: float = 1.0,
                    n: int = 8001) -> list[CriticalPoint]:
    lo, hi = pp.span
    brackets = find_sign_changes(pp.d1, lo - pad, hi + pad, n)
    out = []
    for a, b in brackets:
        x = bisect_root(pp.d1, a, b)
        curv = pp.d2(x)
        out.append(CriticalPoint(x, "min" if curv > 0 else "max", pp(x), curv))
    # merge duplicates from touching brackets
    merged: list[CriticalPoint] = []
    for c in out:
        if merged and abs(c.x - merged[-1].x) < 1e-10:
            continue
        merged.append(c)
    return merged


def critical_points(f: Potential1D, tol: float = 1e-9) -> list[tuple[float, str, float]]:
    """Numerically locate and classify all critical points, audited
    against the stored list."""
    f.audit(tol)
    return [(c.x, c.kind, c.value) for c in f.criticals]


# -- construction -------------------------------------------------------------


KnotDataT = tuple[float, float, float, float]


def _monotone_piece(left: KnotDataT, right: KnotDataT, sign: float) -> bool:
    """Quintic through the two knots has sign*f' > 0 strictly inside."""
    from .piecewise import quintic_coeffs

    h = right[0] - left[0]
    c = quintic_coeffs(h, left[1:], right[1:])
    d1 = c[1:] * np.arange(1, len(c))
    u = np.linspace(1e-9, h - 1e-9, 487)
    vals = sum(d1[k] * u ** k for k in range(len(d1)))
    return bool(np.all(sign * vals > 1e-4))


def _fit_tail(edge: KnotDataT, side: str, scale: float,
              dM: float) -> list[KnotDataT]:
    """Join the outermost well window to an exact x^2 tail.

    Two quintic pieces through a gentle intermediate knot; the knot placement
    and the window edge w are found by a small deterministic search, each
    candidate checked for strict monotonicity.
    """
    sgn = -1.0 if side == "left" else 1.0
    ex, ev, es, ec = edge
    for dv in (0.15, 0.3, 0.5, 0.8, 1.2):
        for wx in (0.4, 0.6, 0.9, 1.3, 1.8):
            xg = ex + sgn * wx * 2.0 * scale
            vg = ev + dv * dM
            sg = sgn * 1.2 * (vg - ev) / abs(ex - xg)
            knot = (xg, vg, sg, 0.0)
            inner_ok = (_monotone_piece(knot, edge, sgn) if side == "left"
                        else _monotone_piece(edge, knot, sgn))
            if not inner_ok:
                continue
            for t in np.arange(0.3, 10.01, 0.1):
                w = xg + sgn * t * scale
                if side == "left" and w >= min(-0.1, xg - 0.15 * scale):
                    continue
                if side == "right" and w <= max(0.1, xg + 0.15 * scale):
                    continue
                if w * w <= vg + 0.02:
                    continue
                wknot = (w, w * w, 2.0 * w, 2.0)
                ok = (_monotone_piece(wknot, knot, sgn) if side == "left"
                      else _monotone_piece(knot, wknot, sgn))
                if ok:
                    return [knot, wknot]
    raise ConstructionError(f"no monotone {side} tail found from edge {edge}")


def build_multiwell(min_positions, m_star: float = 0.0, M_star: float = 1.0,
                    config: Config = DEFAULT_CONFIG) -> Potential1D:
    """Equal-depth multiwell with minima exactly at the given positions.

    Maxima are placed at midpoints; every critical point carries an exact
    quadratic window; the function is x^2 outside its window.
    """
    pos = [float(p) for p in min_positions]
    if any(b <= a for a, b in zip(pos, pos[1:])):
        raise ValueError("minimum positions must be strictly increasing")
    if not pos:
        raise ValueError("need at least one minimum")
    if M_star <= m_star or m_star < 0:
        raise ValueError("need M_star > m_star >= 0")
    N = len(pos)

    if N == 1 and pos[0] == 0.0 and m_star == 0.0:
        # degenerate window: the potential is exactly x^2
        pp = PiecewisePoly.from_knot_data(
            [PiecewisePoly.x2_data(-1.0), PiecewisePoly.x2_data(1.0)], tail="x2")
        return Potential1D(pp, [CriticalPoint(0.0, "min", 0.0, 2.0)],
                           m_star, M_star, config.well_window)

    dM = M_star - m_star
    maxima = [(a + b) / 2.0 for a, b in zip(pos, pos[1:])]
    gaps = [b - a for a, b in zip(pos, pos[1:])] or [1.0]
    h_min = 0.5 * min(gaps)
    kappa = config.well_curvature * dM / (2.0 * h_min) ** 2
    q = config.well_window * (h_min / 0.5)

    crit: list[CriticalPoint] = []
    data = []
    for x in pos:
        data.append((x - q, m_star + 0.5 * kappa * q * q, -kappa * q, kappa))
        data.append((x + q, m_star + 0.5 * kappa * q * q, +kappa * q, kappa))
        crit.append(CriticalPoint(x, "min", m_star, kappa))
    for x in maxima:
        data.append((x - q, M_star - 0.5 * kappa * q * q, +kappa * q, -kappa))
        data.append((x + q, M_star - 0.5 * kappa * q * q, -kappa * q, -kappa))
        crit.append(CriticalPoint(x, "max", M_star, -kappa))

    data.sort()
    data = _fit_tail(data[0], "left", h_min, dM) + data \
        + _fit_tail(data[-1], "right", h_min, dM)
    f = Potential1D(PiecewisePoly.from_knot_data(data, tail="x2"),
                    crit, m_star, M_star, q)
    f.audit()
    return f


def sample_potential_csv(f: Potential1D, xs) -> str:
    lines = ["x,f,df"]
    for x in np.asarray(xs, dtype=float):
        lines.append(f"{x:.17g},{f(x):.17g},{f.d1(x):.17g}")
    return "\n".join(lines) + "\n"


# -- lowered-barrier variant ---------------------------------------------------


def _override(pp: PiecewisePoly, lo: float, hi: float,
              inner: list[tuple[float, float, float, float]],
              blend: set[int]) -> PiecewisePoly:
    """Replace pp on (lo, hi) by segments through the given inner knot data,
    joining pp's own data at lo and hi (C2 splice)."""
    end_lo = (lo, pp(lo), pp.d1(lo), pp.d2(lo))
    end_hi = (hi, pp(hi), pp.d1(hi), pp.d2(hi))
    pts = [end_lo] + inner + [end_hi]
    section = PiecewisePoly.from_knot_data(pts, tail="zero", blend=blend)
    knots = [k for k in pp.knots if k < lo or k > hi]
    knots = np.unique(np.array(sorted(set(knots) | set(section.knots.tolist()))))
    coeffs = np.empty((len(knots) - 1, DEGREE + 1))
    for i in range(len(knots) - 1):
        a, b = knots[i], knots[i + 1]
        if lo <= a and b <= hi:
            coeffs[i] = section._interval_coeffs(a, b)
        else:
            coeffs[i] = pp._interval_coeffs(a, b)
    return PiecewisePoly(knots, coeffs, pp.tail)


def build_tilde(f: Potential1D, j: int, geom: "LemmaGeometry",
                config: Config = DEFAULT_CONFIG) -> Potential1D:
    """Lower the barrier between minima j and j+1 (1-based), keeping all
    critical locations, with mirror symmetry about the barrier on the band
    that the radial construction reads through.

    Between the pair the potential is an exact scaled smoothstep (monotone by
    construction); the climbs from the wells to the linear band and from the
    band to the unchanged outside are Taylor-blend joins.
    """
    mins = f.minima
    if not (1 <= j <= len(mins) - 1):
        raise ValueError(f"j={j} out of range for {len(mins)} minima")
    xl, xr = mins[j - 1].x, mins[j].x
    xc = geom.center
    if abs(xc - 0.5 * (xl + xr)) > 1e-12:
        raise GeometryError("geometry center must be the midpoint of the pair")

    m_star, M_star = f.m_star, f.M_star
    y_gate = min(f(geom.r_minus), f(geom.r_plus))
    if y_gate - m_star < 0.05 * (M_star - m_star):
        raise GeometryError(
            f"gate value {y_gate} too close to the well depth {m_star}")
    m_tilde = m_star + config.tilde_mtilde * (y_gate - m_star)
    y_d = m_star + config.tilde_yd * (y_gate - m_star)
    y_D = m_star + config.tilde_yD * (y_gate - m_star)
    s_band = (y_D - y_d) / (geom.r_plus_D - geom.r_plus_d)

    h = 0.5 * (xr - xl)
    kap = 6.0 * (m_tilde - m_star) / (h * h)  # smoothstep barrier curvature

    inner = [
        (2.0 * xc - geom.r_plus_D, y_D, -s_band, 0.0),
        (2.0 * xc - geom.r_plus_d, y_d, -s_band, 0.0),
        (xl, m_star, 0.0, kap),
        (xc, m_tilde, 0.0, -kap),
        (xr, m_star, 0.0, kap),
        (geom.r_plus_d, y_d, s_band, 0.0),
        (geom.r_plus_D, y_D, s_band, 0.0),
    ]
    # blend joins: outside <-> band and band <-> wells; pure quintics between
    # the pair (the scaled smoothstep) and along the linear band
    pp = _override(f.pp, geom.r_minus, geom.r_plus, inner,
                   blend={0, 2, 5, 7})
    crit = []
    for c in f.criticals:
        if abs(c.x - xc) < 1e-9:
            crit.append(CriticalPoint(c.x, "max", m_tilde, -kap))
        elif abs(c.x - xl) < 1e-9 or abs(c.x - xr) < 1e-9:
            crit.append(CriticalPoint(c.x, "min", m_star, kap))
        else:
            crit.append(c)
    tilde = Potential1D(pp, crit, m_star, M_star, f.window_q)
    tilde.audit()
    _audit_tilde(tilde, f, geom, m_tilde, config)
    return tilde


def _audit_tilde(tilde: Potential1D, f: Potential1D, geom, m_tilde: float,
                 config: Config) -> None:
    n = config.audit_samples
    # mirror symmetry on the band read by the radial formulas
    s = np.linspace(0.0, geom.r_minus_d - geom.r_minus_D, n)
    res = np.max(np.abs(tilde(geom.r_minus_D + s) - tilde(geom.r_plus_D - s)))
    if res > 1e-10:
        raise ConstructionError(f"mirror symmetry residual {res}")
    for r in (geom.r_minus_d, geom.r_plus_d, geom.r_minus, geom.r_plus):
        if not tilde(r) > m_tilde:
            raise ConstructionError(f"band value at {r} not above the barrier")
    # unchanged outside the override interval
    for x in np.linspace(geom.r_minus - 2.0, geom.r_minus, 13):
        if abs(tilde(x) - f(x)) > 1e-12:
            raise ConstructionError("tilde differs from f left of r_-")
    for x in np.linspace(geom.r_plus, geom.r_plus + 2.0, 13):
        if abs(tilde(x) - f(x)) > 1e-12:
            raise ConstructionError("tilde differs from f right of r_+")
    # strict monotonicity into the barrier region from both gates
    xs = np.linspace(geom.r_minus - geom.rho, geom.r_minus_0 + geom.rho, n)
    if not np.all(tilde.d1(xs) < 0):
        raise ConstructionError("tilde not strictly decreasing left of the pair")
    xs = np.linspace(geom.r_plus_0 - geom.rho, geom.r_plus + geom.rho, n)
    if not np.all(tilde.d1(xs) > 0):
        raise ConstructionError("tilde not strictly increasing right of the pair")


# -- saddle-node families ------------------------------------------------------


class SNFamily1D:
    """One-parameter family f(x, u) = base(x) + lambda(u) * bump(x) folding the
    rightmost (max, min) pair at exactly u_sn."""

    def __init__(self, base: Potential1D, bump: PiecewisePoly,
                 u_span: tuple[float, float], u_sn: float, lambda_star: float,
                 merge_x: float, direction: str):
        self.base = base
        self.bump = bump
        self.u_a, self.u_b = u_span
        self.u_sn = u_sn
        self.lambda_star = lambda_star
        self.merge_x = merge_x
        self.direction = direction

    def lam(self, u: float) -> float:
        ua, ub, usn = self.u_a, self.u_b, self.u_sn
        if self.direction == "up":
            if u <= usn:
                return self.lambda_star * float(ramp((u - ua) / (usn - ua)))
            return self.lambda_star + (1.0 - self.lambda_star) * float(
                ramp((u - usn) / (ub - usn)))
        if u >= usn:
            return self.lambda_star * float(ramp((ub - u) / (ub - usn)))
        return self.lambda_star + (1.0 - self.lambda_star) * float(
            ramp((usn - u) / (usn - ua)))

    def value(self, x, u: float):
        return self.base(x) + self.lam(u) * self.bump(x)

    def d1(self, x, u: float):
        return self.base.d1(x) + self.lam(u) * self.bump.d1(x)

    def d2(self, x, u: float):
        return self.base.d2(x) + self.lam(u) * self.bump.d2(x)

    def frozen(self, u: float) -> Potential1D:
        """Materialize the member at u as a plain Potential1D (numeric criticals)."""
        lam = self.lam(u)
        pp = self.base.pp.plus(self.bump.scaled(lam)) if lam != 0.0 else self.base.pp
        crit = _scan_criticals(pp)
        return Potential1D(pp, crit, self.base.m_star, self.base.M_star,
                           self.base.window_q)

    def end_potential(self) -> Potential1D:
        """The member at the eliminated end (lambda = 1), with exact criticals
        inherited from the base for the surviving points."""
        pp = self.base.pp.plus(self.bump.scaled(1.0))
        lo = self.bump.span[0]
        crit = [c for c in self.base.criticals if c.x < lo]
        out = Potential1D(pp, crit, self.base.m_star, self.base.M_star,
                          self.base.window_q)
        out.audit()
        return out


def build_sn_family(f_before: Potential1D, u_span: tuple[float, float],
                    u_sn: float, eliminate: str = "rightmost",
                    direction: str = "up",
                    config: Config = DEFAULT_CONFIG) -> SNFamily1D:
    """Family that collides the rightmost minimum with its neighbor maximum.

    The fold parameter value is located by bisection on the critical-point
    count and the input ramp is pinned so the fold happens exactly at u_sn.
    """
    if eliminate != "rightmost":
        raise ValueError("only rightmost-pair elimination is supported")
    if direction not in ("up", "down"):
        raise ValueError("direction must be 'up' or 'down'")
    ua, ub = u_span
    if not (ua < u_sn < ub):
        raise ValueError("u_sn must lie strictly inside u_span")
    mins = f_before.minima
    if len(mins) < 2:
        raise ValueError("need at least two minima to eliminate one")
    x_min = mins[-1].x
    x_max = f_before.maxima[-1].x
    if not x_max < x_min:
        raise ConstructionError("rightmost max must precede rightmost min")

    gap = x_min - mins[-2].x
    c = 0.5 * (x_max + x_min)
    delta1 = x_min - x_max
    left_guard = mins[-2].x + f_before.window_q
    if c - delta1 <= left_guard:
        delta1 = 0.9 * (c - left_guard)
    w_plus = f_before.pp.span[1]
    H = config.sn_bump_height * (f_before.M_star - f_before.m_star)
    bump = PiecewisePoly.from_knot_data(
        [(c - delta1, 0.0, 0.0, 0.0),
         (c + delta1, H, 0.0, 0.0),
         (w_plus + 0.2 * gap, H, 0.0, 0.0),
         (w_plus + 2.2 * gap, 0.0, 0.0, 0.0)],
        tail="zero")

    xs = np.linspace(c - delta1, c + delta1, 1201)

    def dip(lam: float) -> float:
        return float(np.min(f_before.d1(xs) + lam * bump.d1(xs)))

    if dip(0.0) >= 0:
        raise ConstructionError("no descending stretch between the pair")
    if dip(1.0) <= 0:
        raise GeometryError("bump too weak: no fold before lambda = 1")
    lam_star = bisect_root(dip, 0.0, 1.0)
    if lam_star > 0.95:
        raise GeometryError(f"fold too late (lambda* = {lam_star:.3f})")

    vals = f_before.d1(xs) + lam_star * bump.d1(xs)
    merge = float(xs[int(np.argmin(vals))])
    # polish the degenerate point: zero of d2 near the argmin
    d2 = lambda x: f_before.d2(x) + lam_star * bump.d2(x)
    try:
        lo, hi = merge - 0.05 * gap, merge + 0.05 * gap
        merge = bisect_root(d2, lo, hi)
    except ValueError:
        pass

    fam = SNFamily1D(f_before, bump, u_span, u_sn, lam_star, merge, direction)
    _audit_sn(fam, f_before, config)
    return fam


def _audit_sn(fam: SNFamily1D, f_before: Potential1D, config: Config) -> None:
    n_before = len(f_before.criticals)
    for lam, expect in ((0.5 * fam.lambda_star, n_before),
                        (fam.lambda_star + 0.5 * (1 - fam.lambda_star), n_before - 2),
                        (1.0, n_before - 2)):
        pp = f_before.pp.plus(fam.bump.scaled(lam))
        got = len(_scan_criticals(pp))
        if got != expect:
            raise ConstructionError(
                f"critical count {got} at lambda={lam}, expected {expect}")
    # survivors are untouched: the bump vanishes left of its support
    lo = fam.bump.span[0]
    for c in f_before.criticals[:-2]:
        if c.x >= lo:
            raise ConstructionError("bump support reaches a surviving critical point")
    # past the fold the whole morph zone climbs monotonically
    hi = fam.bump.span[1]
    xs = np.linspace(lo + 1e-9, hi + 1.0, 2401)
    if not np.all(f_before.d1(xs) + fam.bump.d1(xs) > 0):
        k = int(np.argmin(f_before.d1(xs) + fam.bump.d1(xs)))
        raise ConstructionError(
            f"post-fold slope not positive near x={xs[k]:.4f}")
