"""Planar scalar fields: separable lifts, the barrier-exchange surgery field,
its smoothing, rotations and blends.

The surgery field Phi replaces a separable double-barrier region by a radial
annulus bridged with vertical-segment interpolations; it is continuous and
piecewise smooth.  Smoothing is disc averaging; to keep the far field, the
critical points and the annulus level lines exact, the averaged field is
anchored to a smooth skeleton W:

    smooth(Phi) = W + disc_avg(Phi - W),

where Phi - W vanishes outside a bounded collar, W equals the separable
field away from the surgery and is exactly radial across the rotation
annulus.  Disc averages are evaluated by per-region Gauss rules split at the
kink curves, so doubling the order is a meaningful self-check.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import GeometryError, NumericalAccuracyError
from .multiwell import Potential1D
from .piecewise import ramp, ramp_d1, smootherstep

__all__ = [
    "LemmaGeometry",
    "ScalarField2D",
    "SeparableField",
    "PhiField",
    "MollifiedPhiField",
    "separable",
    "build_phi",
    "mollify",
    "FieldFamily",
    "BlendFamily",
    "RotationFamily",
    "linear_blend",
    "rotation_family",
    "FrozenFamilyField",
]


# -- geometry -----------------------------------------------------------------

@dataclass(frozen=True)
class LemmaGeometry:
    """Absolute coordinates of the exchange geometry around one barrier."""

    center: float          # x-coordinate of the barrier maximum
    gap: float             # distance between the two swapped minima
    r_minus: float
    r_minus_D: float
    r_minus_d: float
    r_minus_0: float
    r_plus_0: float
    r_plus_d: float
    r_plus_D: float
    r_plus: float
    a_S: float
    b_S: float
    a_L: float
    b_L: float
    rho: float
    R_rot: float
    R1: float
    R2: float
    wramp: tuple[float, float, float, float]

    @property
    def R_S(self) -> float:
        return self.center - self.r_minus_d

    @property
    def R_L(self) -> float:
        return self.center - self.r_minus_D

    @classmethod
    def fit(cls, f: Potential1D, j: int, config: Config = DEFAULT_CONFIG) -> "LemmaGeometry":
        """Default proportional fit between minima j and j+1 (1-based)."""
        mins = f.minima
        if not (1 <= j <= len(mins) - 1):
            raise GeometryError(f"j={j} out of range for {len(mins)} minima")
        xl, xr = mins[j - 1].x, mins[j].x
        g = xr - xl
        c = 0.5 * (xl + xr)
        geom = cls(
            center=c, gap=g,
            r_minus=c - config.geom_rpm * g,
            r_minus_D=c - config.geom_rD * g,
            r_minus_d=c - config.geom_rd * g,
            r_minus_0=c - config.geom_r0 * g,
            r_plus_0=c + config.geom_r0 * g,
            r_plus_d=c + config.geom_rd * g,
            r_plus_D=c + config.geom_rD * g,
            r_plus=c + config.geom_rpm * g,
            a_S=config.geom_r0 * g,
            b_S=config.geom_bS * g,
            a_L=config.geom_rpm * g,
            b_L=config.geom_bL * g,
            rho=config.geom_rho * g,
            R_rot=config.geom_R_rot * g,
            R1=config.geom_R1 * g,
            R2=config.geom_R2 * g,
            wramp=tuple(w * g for w in config.geom_wramp),
        )
        geom.validate(f, j)
        return geom

    def validate(self, f: Potential1D | None = None, j: int | None = None) -> None:
        c = self.center
        order = [self.r_minus, self.r_minus_D, self.r_minus_d, self.r_minus_0,
                 c, self.r_plus_0, self.r_plus_d, self.r_plus_D, self.r_plus]
        if any(b <= a for a, b in zip(order, order[1:])):
            raise GeometryError(f"axis points out of order: {order}")
        for a, b in ((self.r_minus_d, self.r_plus_d), (self.r_minus_D, self.r_plus_D),
                     (self.r_minus, self.r_plus)):
            if abs((c - a) - (b - c)) > 1e-12:
                raise GeometryError("geometry must be symmetric about the center")
        if not (self.b_S < self.R_S < self.R_L < self.a_L):
            raise GeometryError("need E_S subset D_S subset D_L subset E_L")
        if abs(self.a_S - (c - self.r_minus_0)) > 1e-12:
            raise GeometryError("small ellipse must cross the axis at r_0")
        if abs(self.a_L - (c - self.r_minus)) > 1e-12:
            raise GeometryError("large ellipse must cross the axis at r_-")
        if not self.rho < self.r_plus_D - self.r_plus_d:
            raise GeometryError("rho must be smaller than the annulus band width")
        w0, w1, w2, w3 = self.wramp
        eps = 1e-9 * max(1.0, self.gap)
        if not (w0 < w1 < w2 < w3):
            raise GeometryError("skeleton ramp radii out of order")
        if not w0 >= 0.5 * self.gap + self.rho + eps:
            raise GeometryError("skeleton ramp reaches the well radius")
        lo_rad = max(self.R_S, w1) + self.rho
        hi_rad = min(self.R_L, w2) - self.rho
        if not (lo_rad <= self.R1 + eps and self.R1 < self.R2
                and self.R2 <= hi_rad + eps):
            raise GeometryError("rotation annulus not inside the exact radial zone")
        if not (self.R1 < self.R_rot < self.R2):
            raise GeometryError("rotation radius outside (R1, R2)")
        if f is not None and j is not None:
            mins = f.minima
            xl, xr = mins[j - 1].x, mins[j].x
            for x0 in (xl, xr):
                if not self._disc_in_small_ellipse(x0, self.rho):
                    raise GeometryError(
                        f"rho-disc around the minimum at {x0} leaves the separable zone")
            # the surgery interval must contain no other critical points
            for cp in f.criticals:
                inside = self.r_minus < cp.x < self.r_plus
                ours = abs(cp.x - xl) < 1e-9 or abs(cp.x - xr) < 1e-9 or abs(cp.x - c) < 1e-9
                if inside != ours:
                    raise GeometryError(
                        f"critical point at {cp.x} violates the surgery interval")

    def _disc_in_small_ellipse(self, x0: float, rho: float) -> bool:
        th = np.linspace(0.0, 2.0 * np.pi, 64, endpoint=False)
        dx = (x0 - self.center) + rho * np.cos(th)
        dy = rho * np.sin(th)
        return bool(np.all((dx / self.a_S) ** 2 + (dy / self.b_S) ** 2 < 1.0))


# -- field base ----------------------------------------------------------------

class ScalarField2D:
    """Scalar field with vectorized value/grad over points of shape (..., 2)."""

    smoothness = "C1"
    far_field_x1: float = 10.0  # V(x) = |x|^2 wherever |x_1| >= this bound

    def value(self, p: np.ndarray):
        raise NotImplementedError

    def grad(self, p: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def value_at(self, x1: float, x2: float) -> float:
        return float(self.value(np.array([x1, x2])))

    def grad_at(self, x1: float, x2: float) -> np.ndarray:
        return np.asarray(self.grad(np.array([x1, x2])), dtype=float).reshape(2)

    def fd_grad(self, p: np.ndarray, h: float = 1e-6) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        e1 = np.array([h, 0.0])
        e2 = np.array([0.0, h])
        gx = (self.value(p + e1) - self.value(p - e1)) / (2 * h)
        gy = (self.value(p + e2) - self.value(p - e2)) / (2 * h)
        return np.stack([gx, gy], axis=-1)


def _split_xy(p):
    p = np.asarray(p, dtype=float)
    return p[..., 0], p[..., 1]


class SeparableField(ScalarField2D):
    """V(x) = f(x_1) + x_2^2 for a 1-d multiwell potential f."""

    smoothness = "C2"

    def __init__(self, f: Potential1D):
        self.f = f
        lo, hi = f.window
        self.far_field_x1 = max(abs(lo), abs(hi))

    def value(self, p):
        x1, x2 = _split_xy(p)
        return self.f(x1) + x2 * x2

    def grad(self, p):
        x1, x2 = _split_xy(p)
        return np.stack([np.asarray(self.f.d1(x1)), 2.0 * x2], axis=-1)

    def minima_points(self) -> list[np.ndarray]:
        return [np.array([c.x, 0.0]) for c in self.f.minima]


def separable(f: Potential1D) -> SeparableField:
    return SeparableField(f)


# -- the surgery field Phi ------------------------------------------------------

class PhiField(ScalarField2D):
    """Continuous piecewise-smooth exchange field (radial annulus + vertical
    interpolation lenses), equal to the separable field elsewhere."""

    smoothness = "C0-piecewise"

    def __init__(self, tilde: Potential1D, geom: LemmaGeometry):
        self.f = tilde
        self.geom = geom
        self.y_d = float(tilde(geom.center + geom.R_S))
        self.y_D = float(tilde(geom.center + geom.R_L))
        lo, hi = tilde.window
        self.far_field_x1 = max(abs(lo), abs(hi))

    # region classification masks share this much arithmetic
    def _frames(self, p):
        x1, x2 = _split_xy(p)
        g = self.geom
        dx = x1 - g.center
        y2 = x2 * x2
        r = np.sqrt(dx * dx + y2)
        eS = (dx / g.a_S) ** 2 + y2 / g.b_S ** 2
        eL = (dx / g.a_L) ** 2 + y2 / g.b_L ** 2
        return x1, x2, dx, y2, r, eS, eL

    def value(self, p):
        x1, x2, dx, y2, r, eS, eL = self._frames(p)
        g = self.geom
        f = self.f
        out = np.asarray(f(x1) + y2, dtype=float)          # default: separable
        scalar = out.ndim == 0
        out = np.atleast_1d(out)
        x1, dx, y2, r, eS, eL = map(np.atleast_1d, (x1, dx, y2, r, eS, eL))

        la = (eS > 1.0) & (r <= g.R_S)
        if np.any(la):
            A = g.R_S ** 2 - dx[la] ** 2
            B = np.where(np.abs(dx[la]) <= g.a_S,
                         g.b_S ** 2 * np.maximum(0.0, 1.0 - (dx[la] / g.a_S) ** 2),
                         0.0)
            phif = f(x1[la]) + B
            den = np.maximum(A - B, 1e-300)
            val = ((A - y2[la]) * phif + (y2[la] - B) * self.y_d) / den
            # at the corner where the circle meets the axis the lens collapses
            out[la] = np.where(A - B > 1e-12, val, f(x1[la]) + y2[la])

        ann = (r > g.R_S) & (r <= g.R_L)
        if np.any(ann):
            out[ann] = f(g.center + r[ann])

        lb = (r > g.R_L) & (eL <= 1.0)
        if np.any(lb):
            A = g.b_L ** 2 * np.maximum(0.0, 1.0 - (dx[lb] / g.a_L) ** 2)
            onc = np.abs(dx[lb]) <= g.R_L
            B = np.where(onc, g.R_L ** 2 - dx[lb] ** 2, 0.0)
            phif = np.where(onc, self.y_D, f(x1[lb]))
            phie = f(x1[lb]) + A
            den = np.maximum(A - B, 1e-300)
            val = ((A - y2[lb]) * phif + (y2[lb] - B) * phie) / den
            out[lb] = np.where(A - B > 1e-12, val, f(x1[lb]) + y2[lb])

        return float(out[0]) if scalar else out.reshape(np.shape(p)[:-1])

    def grad(self, p):
        x1, x2, dx, y2, r, eS, eL = self._frames(p)
        g = self.geom
        f = self.f
        scalar = np.ndim(x1) == 0
        x1, x2, dx, y2, r, eS, eL = map(np.atleast_1d, (x1, x2, dx, y2, r, eS, eL))
        gx = np.asarray(f.d1(x1), dtype=float).copy()
        gy = 2.0 * x2.copy()

        la = (eS > 1.0) & (r <= g.R_S)
        if np.any(la):
            d = dx[la]
            A = g.R_S ** 2 - d * d
            dA = -2.0 * d
            one = np.abs(d) <= g.a_S
            B = np.where(one, g.b_S ** 2 * np.maximum(0.0, 1.0 - (d / g.a_S) ** 2), 0.0)
            dB = np.where(one, -2.0 * d * g.b_S ** 2 / g.a_S ** 2, 0.0)
            fv = np.asarray(f(x1[la]))
            fd = np.asarray(f.d1(x1[la]))
            phif = fv + B
            den = np.maximum(A - B, 1e-300)
            N = (A - y2[la]) * phif + (y2[la] - B) * self.y_d
            dN = dA * phif + (A - y2[la]) * (fd + dB) - dB * self.y_d
            dD = dA - dB
            deg = A - B <= 1e-12
            gx[la] = np.where(deg, fd, (dN * den - N * dD) / den ** 2)
            gy[la] = np.where(deg, 2.0 * x2[la],
                              2.0 * x2[la] * (self.y_d - phif) / den)

        ann = (r > g.R_S) & (r <= g.R_L)
        if np.any(ann):
            fp = np.asarray(f.d1(g.center + r[ann]))
            gx[ann] = fp * dx[ann] / r[ann]
            gy[ann] = fp * x2[ann] / r[ann]

        lb = (r > g.R_L) & (eL <= 1.0)
        if np.any(lb):
            d = dx[lb]
            A = g.b_L ** 2 * np.maximum(0.0, 1.0 - (d / g.a_L) ** 2)
            dA = -2.0 * d * g.b_L ** 2 / g.a_L ** 2
            onc = np.abs(d) <= g.R_L
            B = np.where(onc, g.R_L ** 2 - d * d, 0.0)
            dB = np.where(onc, -2.0 * d, 0.0)
            fv = np.asarray(f(x1[lb]))
            fd = np.asarray(f.d1(x1[lb]))
            phif = np.where(onc, self.y_D, fv)
            dphif = np.where(onc, 0.0, fd)
            phie = fv + A
            den = np.maximum(A - B, 1e-300)
            N = (A - y2[lb]) * phif + (y2[lb] - B) * phie
            dN = dA * phif + (A - y2[lb]) * dphif + (y2[lb] - B) * (fd + dA) - dB * phie
            dD = dA - dB
            deg = A - B <= 1e-12
            gx[lb] = np.where(deg, fd, (dN * den - N * dD) / den ** 2)
            gy[lb] = np.where(deg, 2.0 * x2[lb],
                              2.0 * x2[lb] * (phie - phif) / den)

        out = np.stack([gx, gy], axis=-1)
        return out[0] if scalar else out.reshape(np.shape(p))

    def kink_curves(self) -> list[tuple]:
        g = self.geom
        c = g.center
        return [
            ("circle", c, g.R_S),
            ("circle", c, g.R_L),
            ("ellipse", c, g.a_S, g.b_S),
            ("ellipse", c, g.a_L, g.b_L),
            ("vseg", c - g.a_S, math.sqrt(max(g.R_S ** 2 - g.a_S ** 2, 0.0))),
            ("vseg", c + g.a_S, math.sqrt(max(g.R_S ** 2 - g.a_S ** 2, 0.0))),
            ("vseg", c - g.R_L, g.b_L * math.sqrt(max(1.0 - (g.R_L / g.a_L) ** 2, 0.0))),
            ("vseg", c + g.R_L, g.b_L * math.sqrt(max(1.0 - (g.R_L / g.a_L) ** 2, 0.0))),
        ]


def build_phi(base: SeparableField | Potential1D, geom: LemmaGeometry,
              config: Config = DEFAULT_CONFIG) -> PhiField:
    """Assemble the exchange field from the lowered-barrier potential."""
    tilde = base.f if isinstance(base, SeparableField) else base
    phi = PhiField(tilde, geom)
    _audit_phi(phi, config)
    return phi


def _audit_phi(phi: PhiField, config: Config) -> None:
    g = phi.geom
    n = config.audit_samples
    rng = np.random.default_rng(12345)
    # evenness
    pts = np.column_stack([
        rng.uniform(g.r_minus - 1.0, g.r_plus + 1.0, n),
        rng.uniform(-2.0 * g.R_L, 2.0 * g.R_L, n)])
    flip = pts * np.array([1.0, -1.0])
    if np.max(np.abs(phi.value(pts) - phi.value(flip))) > 1e-12:
        raise GeometryError("surgery field is not even in x2")
    # identity on the axis segment and outside the large ellipse
    xs = np.linspace(g.r_minus, g.r_plus, n)
    axis = np.column_stack([xs, np.zeros(n)])
    if np.max(np.abs(phi.value(axis) - phi.f(xs))) > 1e-9:
        raise GeometryError("surgery field does not restrict to f on the axis")
    # strict increase in x2 on sampled verticals in the upper half plane
    xs = rng.uniform(g.r_minus, g.r_plus, n)
    for frac in (0.15, 0.45, 0.8):
        lo = phi.value(np.column_stack([xs, np.full(n, frac * g.b_S)]))
        hi = phi.value(np.column_stack([xs, np.full(n, frac * g.b_S + 0.3 * g.gap)]))
        if not np.all(hi > lo):
            k = int(np.argmin(hi - lo))
            raise GeometryError(
                f"surgery field not increasing in x2 near x1={xs[k]:.4f}")
    # the level circle used by the rotation
    th = np.linspace(0.0, 2.0 * np.pi, 90, endpoint=False)
    for R in (g.R1, g.R_rot, g.R2):
        ring = np.column_stack([g.center + R * np.cos(th), R * np.sin(th)])
        vals = phi.value(ring)
        if np.max(vals) - np.min(vals) > 1e-10:
            raise GeometryError("annulus level lines are not circles")


# -- quadrature over discs, split at the kink curves ----------------------------

@lru_cache(maxsize=32)
def _leggauss(n: int):
    return np.polynomial.legendre.leggauss(n)


def _gl(a: float, b: float, n: int):
    x, w = _leggauss(n)
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    return mid + half * x, half * w


def _circle_crossings(cx: float, cy: float, r: float, curve, scan: int) -> list[float]:
    """Angles where the circle of radius r about (cx, cy) crosses the curve."""
    kind = curve[0]
    out: list[float] = []
    if kind == "circle":
        _, ccx, R = curve
        ddx, ddy = ccx - cx, -cy
        d = math.hypot(ddx, ddy)
        if d < 1e-15:
            return []
        cosv = (d * d + r * r - R * R) / (2.0 * d * r)
        if abs(cosv) <= 1.0:
            base = math.atan2(ddy, ddx)
            a = math.acos(cosv)
            out += [base + a, base - a]
    elif kind == "ellipse":
        _, ecx, a, b = curve
        th = np.linspace(-math.pi, math.pi, scan, endpoint=False)
        g = ((cx + r * np.cos(th) - ecx) / a) ** 2 + ((cy + r * np.sin(th)) / b) ** 2 - 1.0
        idx = np.nonzero(g * np.roll(g, -1) < 0.0)[0]
        if len(idx):
            lo = th[idx]
            hi = lo + (2 * math.pi / scan)
            glo = g[idx]
            for _ in range(48):
                mid = 0.5 * (lo + hi)
                gm = ((cx + r * np.cos(mid) - ecx) / a) ** 2 + \
                     ((cy + r * np.sin(mid)) / b) ** 2 - 1.0
                takes = glo * gm <= 0.0
                hi = np.where(takes, mid, hi)
                lo = np.where(takes, lo, mid)
                glo = np.where(takes, glo, gm)
            out += (0.5 * (lo + hi)).tolist()
    elif kind == "vseg":
        _, x0, ymax = curve
        cosv = (x0 - cx) / r
        if abs(cosv) <= 1.0:
            a = math.acos(cosv)
            for th in (a, -a):
                y = cy + r * math.sin(th)
                if abs(y) <= ymax + 1e-12:
                    out.append(th)
    return out


class DiscQuadrature:
    """Deterministic disc-average and contour-gradient rules split at kinks."""

    def __init__(self, curves: list[tuple], config: Config = DEFAULT_CONFIG):
        self.curves = curves
        self.config = config
        self._polylines = []
        for curve in curves:
            if curve[0] == "ellipse":
                _, ecx, a, b = curve
                th = np.linspace(0.0, 2.0 * np.pi, 256, endpoint=False)
                self._polylines.append(
                    np.column_stack([ecx + a * np.cos(th), b * np.sin(th)]))
            else:
                self._polylines.append(None)

    def _distance_band(self, cx: float, cy: float, i: int) -> tuple[float, float]:
        """Near/far distance from the point to curve i."""
        curve = self.curves[i]
        kind = curve[0]
        if kind == "circle":
            _, ccx, R = curve
            d = math.hypot(ccx - cx, cy)
            return abs(d - R), d + R
        if kind == "ellipse":
            _, ecx, a, b = curve
            pl = self._polylines[i]
            dist = np.hypot(pl[:, 0] - cx, pl[:, 1] - cy)
            n = len(pl)
            step = 2.0 * math.pi / n

            def polish(k: int, sign: float) -> float:
                lo = (k - 1) * step
                hi = (k + 1) * step
                d = lambda t: sign * math.hypot(ecx + a * math.cos(t) - cx,
                                                b * math.sin(t) - cy)
                phi_r = 0.5 * (math.sqrt(5.0) - 1.0)
                c1 = hi - phi_r * (hi - lo)
                c2 = lo + phi_r * (hi - lo)
                f1, f2 = d(c1), d(c2)
                for _ in range(70):
                    if f1 < f2:
                        hi, c2, f2 = c2, c1, f1
                        c1 = hi - phi_r * (hi - lo)
                        f1 = d(c1)
                    else:
                        lo, c1, f1 = c1, c2, f2
                        c2 = lo + phi_r * (hi - lo)
                        f2 = d(c2)
                return sign * d(0.5 * (lo + hi))

            near = polish(int(np.argmin(dist)), 1.0)
            far = polish(int(np.argmax(dist)), -1.0)
            return near, far
        _, x0, ymax = curve
        dx = abs(x0 - cx)
        near = dx if abs(cy) <= ymax else math.hypot(dx, abs(cy) - ymax)
        return near, math.hypot(dx, abs(cy) + ymax)

    def _active(self, cx: float, cy: float, rho: float):
        act = []
        splits = {0.0, rho}
        for i in range(len(self.curves)):
            near, far = self._distance_band(cx, cy, i)
            if near > rho:
                continue
            act.append(self.curves[i])
            for d in (near, far):
                if 1e-14 < d < rho:
                    splits.add(d)
        return act, sorted(splits)

    def _arcs(self, curves, cx: float, cy: float, r: float, n_ang: int, scan: int):
        cross: list[float] = []
        for curve in curves:
            cross += _circle_crossings(cx, cy, r, curve, scan)
        cross = sorted(((t + math.pi) % (2 * math.pi)) - math.pi for t in cross)
        if not cross:
            return _gl(-math.pi, math.pi, n_ang)
        thetas: list[np.ndarray] = []
        weights: list[np.ndarray] = []
        bounds = cross + [cross[0] + 2 * math.pi]
        for a, b in zip(bounds, bounds[1:]):
            if b - a < 1e-14:
                continue
            t, w = _gl(a, b, n_ang)
            thetas.append(t)
            weights.append(w)
        return np.concatenate(thetas), np.concatenate(weights)

    def average(self, fn: Callable, x: np.ndarray, rho: float,
                order: int = 1) -> float:
        cx, cy = float(x[0]), float(x[1])
        n_rad = self.config.quad_radial * order
        n_ang = self.config.quad_angular * order
        scan = self.config.quad_scan * order
        act, radii = self._active(cx, cy, rho)
        pts_all, wts_all = [], []
        for a, b in zip(radii, radii[1:]):
            rr, wr = _gl(a, b, n_rad)
            for r, w in zip(rr, wr):
                th, wth = self._arcs(act, cx, cy, r, n_ang, scan)
                pts_all.append(
                    np.column_stack([cx + r * np.cos(th), cy + r * np.sin(th)]))
                wts_all.append(w * r * wth)
        pts = np.concatenate(pts_all)
        wts = np.concatenate(wts_all)
        vals = np.asarray(fn(pts), dtype=float)
        return float(np.dot(wts, vals)) / (math.pi * rho * rho)

    def contour_grad(self, fn: Callable, x: np.ndarray, rho: float,
                     order: int = 1) -> np.ndarray:
        cx, cy = float(x[0]), float(x[1])
        n_ang = 2 * self.config.quad_angular * order
        scan = self.config.quad_scan * order
        act, _ = self._active(cx, cy, rho)
        th, w = self._arcs(act, cx, cy, rho, n_ang, scan)
        pts = np.column_stack([cx + rho * np.cos(th), cy + rho * np.sin(th)])
        vals = np.asarray(fn(pts), dtype=float)
        gx = float(np.dot(w, vals * np.cos(th))) / (math.pi * rho)
        gy = float(np.dot(w, vals * np.sin(th))) / (math.pi * rho)
        return np.array([gx, gy])


# -- smoothed surgery field ------------------------------------------------------

class MollifiedPhiField(ScalarField2D):
    """Disc-averaged surgery field anchored to the smooth skeleton W."""

    smoothness = "C1"

    def __init__(self, phi: PhiField, rho: float | None = None,
                 config: Config = DEFAULT_CONFIG):
        self.phi = phi
        self.f = phi.f
        self.geom = phi.geom
        self.rho = phi.geom.rho if rho is None else rho
        self.config = config
        curves = phi.kink_curves()
        curves += [("circle", phi.geom.center, w) for w in phi.geom.wramp]
        self.quad = DiscQuadrature(curves, config)
        self.far_field_x1 = phi.far_field_x1

    # skeleton ------------------------------------------------------------

    def _eta(self, r):
        w0, w1, w2, w3 = self.geom.wramp
        up = smootherstep((r - w0) / (w1 - w0))
        down = 1.0 - smootherstep((r - w2) / (w3 - w2))
        return np.where(r <= w1, up, down)

    def _eta_d1(self, r):
        w0, w1, w2, w3 = self.geom.wramp
        r = np.asarray(r, dtype=float)

        def s6d(s, width):
            s = np.clip(s, 0.0, 1.0)
            return 30.0 * s * s * (1.0 - s) ** 2 / width

        up = s6d((r - w0) / (w1 - w0), w1 - w0)
        down = -s6d((r - w2) / (w3 - w2), w3 - w2)
        return np.where(r <= w1, up, down)

    def w_value(self, p):
        x1, x2 = _split_xy(p)
        g = self.geom
        dx = x1 - g.center
        r = np.hypot(dx, x2)
        v1 = self.f(x1) + x2 * x2
        eta = self._eta(r)
        psi = self.f(g.center + r)
        return v1 + eta * (psi - v1)

    def w_grad(self, p):
        x1, x2 = _split_xy(p)
        g = self.geom
        dx = x1 - g.center
        r = np.maximum(np.hypot(dx, x2), 1e-300)
        rx, ry = dx / r, x2 / r
        f, fd = self.f, self.f.d1
        v1 = f(x1) + x2 * x2
        v1x = np.asarray(fd(x1), dtype=float)
        v1y = 2.0 * x2
        psi = f(g.center + r)
        psid = np.asarray(fd(g.center + r), dtype=float)
        eta = self._eta(r)
        etad = self._eta_d1(r)
        gx = v1x + etad * rx * (psi - v1) + eta * (psid * rx - v1x)
        gy = v1y + etad * ry * (psi - v1) + eta * (psid * ry - v1y)
        return np.stack([gx, gy], axis=-1)

    def _d_fn(self, pts):
        return np.asarray(self.phi.value(pts), dtype=float) - \
            np.asarray(self.w_value(pts), dtype=float)

    # classification of cheap exact zones ----------------------------------

    def _zone(self, x1: float, x2: float) -> str:
        g = self.geom
        rho = self.rho
        dx, y = x1 - g.center, abs(x2)
        r = math.hypot(dx, y)
        w0, w1, w2, w3 = g.wramp
        out_eL = ((max(dx - rho, 0.0) if dx >= 0 else max(-dx - rho, 0.0)) / g.a_L) ** 2 \
            + (max(y - rho, 0.0) / g.b_L) ** 2 > 1.0
        if r >= w3 + rho and out_eL:
            return "v1"
        if ((abs(dx) + rho) / g.a_S) ** 2 + ((y + rho) / g.b_S) ** 2 <= 1.0:
            return "v1"
        if max(g.R_S, w1) + rho <= r <= min(w2, g.R_L) - rho:
            return "radial"
        return "quad"

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            return self._value_one(p)
        flat = p.reshape(-1, 2)
        return np.array([self._value_one(q) for q in flat]).reshape(p.shape[:-1])

    def _value_one(self, q) -> float:
        x1, x2 = float(q[0]), float(q[1])
        zone = self._zone(x1, x2)
        if zone == "v1":
            return float(self.f(x1) + x2 * x2)
        if zone == "radial":
            r = math.hypot(x1 - self.geom.center, x2)
            return float(self.f(self.geom.center + r))
        w = float(self.w_value(q))
        return w + self.quad.average(self._d_fn, np.asarray(q, dtype=float), self.rho)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            return self._grad_one(p)
        flat = p.reshape(-1, 2)
        return np.array([self._grad_one(q) for q in flat]).reshape(p.shape)

    def _grad_one(self, q) -> np.ndarray:
        x1, x2 = float(q[0]), float(q[1])
        zone = self._zone(x1, x2)
        if zone == "v1":
            return np.array([float(self.f.d1(x1)), 2.0 * x2])
        if zone == "radial":
            g = self.geom
            dx = x1 - g.center
            r = math.hypot(dx, x2)
            fp = float(self.f.d1(g.center + r))
            return np.array([fp * dx / r, fp * x2 / r])
        wg = np.asarray(self.w_grad(q), dtype=float)
        return wg + self.quad.contour_grad(self._d_fn, np.asarray(q, dtype=float), self.rho)

    def self_check(self, points, tol: float | None = None) -> float:
        """Doubling the quadrature order must not move values or gradients."""
        tol = self.config.quad_selfcheck_tol if tol is None else tol
        worst = 0.0
        for q in np.atleast_2d(np.asarray(points, dtype=float)):
            if self._zone(q[0], q[1]) != "quad":
                continue
            a1 = self.quad.average(self._d_fn, q, self.rho, order=1)
            a2 = self.quad.average(self._d_fn, q, self.rho, order=2)
            g1 = self.quad.contour_grad(self._d_fn, q, self.rho, order=1)
            g2 = self.quad.contour_grad(self._d_fn, q, self.rho, order=2)
            worst = max(worst, abs(a1 - a2), float(np.max(np.abs(g1 - g2))))
        if worst > tol:
            raise NumericalAccuracyError(
                f"quadrature self-check disagreement {worst:.3e} > {tol:.1e}")
        return worst


class PoUPhiField(MollifiedPhiField):
    """Fast-path smoothing: partition-of-unity splice with the same invariants.

    Values blend the regional smooth models over thin bands inside their
    overlap; gradients are central differences (adequate for the C1 contract).
    """

    def __init__(self, phi: PhiField, rho: float | None = None,
                 config: Config = DEFAULT_CONFIG):
        super().__init__(phi, rho, config)
        self.wb = 0.025 * self.geom.gap

    def _value_one(self, q) -> float:
        x1, x2 = float(q[0]), float(q[1])
        g = self.geom
        f = self.f
        dx, y2 = x1 - g.center, x2 * x2
        r = math.hypot(dx, x2)
        eL = (dx / g.a_L) ** 2 + y2 / g.b_L ** 2
        v1 = float(f(x1)) + y2
        if eL >= 1.0:
            return v1
        wb = self.wb
        # lens-a with its vertical kink smoothed
        A = max(g.R_S ** 2 - dx * dx, 0.0)
        Be = g.b_S ** 2 * max(0.0, 1.0 - (dx / g.a_S) ** 2)
        sv = smootherstep((abs(dx) - (g.a_S - wb)) / wb)
        B = (1.0 - sv) * Be
        phif = float(f(x1)) + B
        den = max(A - B, 1e-12)
        la = ((A - y2) * phif + (y2 - B) * self.y_d) / den
        # inner blend V1 -> lens-a across the small ellipse boundary
        eS = (dx / g.a_S) ** 2 + y2 / g.b_S ** 2
        s1 = smootherstep((eS - 1.0) / 0.5)
        v = (1.0 - s1) * v1 + s1 * la
        # ring blend -> radial across the small circle
        psi = float(f(g.center + r))
        s2 = smootherstep((r - (g.R_S - wb)) / wb)
        v = (1.0 - s2) * v + s2 * psi
        # lens-b with its vertical kink smoothed
        AL = g.b_L ** 2 * max(0.0, 1.0 - (dx / g.a_L) ** 2)
        svb = smootherstep((abs(dx) - (g.R_L - wb)) / wb)
        Bc = max(g.R_L ** 2 - dx * dx, 0.0)
        Bb = (1.0 - svb) * Bc
        phifb = (1.0 - svb) * self.y_D + svb * float(f(x1))
        phieb = float(f(x1)) + AL
        denb = max(AL - Bb, 1e-12)
        lb = ((AL - y2) * phifb + (y2 - Bb) * phieb) / denb
        s3 = smootherstep((r - g.R_L) / wb)
        v = (1.0 - s3) * v + s3 * lb
        # outer blend -> V1 approaching the large ellipse boundary
        s4 = smootherstep((eL - 0.90) / 0.10)
        return (1.0 - s4) * v + s4 * v1

    def _grad_one(self, q) -> np.ndarray:
        x1, x2 = float(q[0]), float(q[1])
        h = 1e-7 * max(1.0, self.geom.gap)
        return np.array([
            (self._value_one((x1 + h, x2)) - self._value_one((x1 - h, x2))) / (2 * h),
            (self._value_one((x1, x2 + h)) - self._value_one((x1, x2 - h))) / (2 * h),
        ])

    def _zone(self, x1: float, x2: float) -> str:
        zone = super()._zone(x1, x2)
        return zone  # kept for early-out parity; quad zone falls through to PoU

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            return self._pou_dispatch(p)
        flat = p.reshape(-1, 2)
        return np.array([self._pou_dispatch(q) for q in flat]).reshape(p.shape[:-1])

    def _pou_dispatch(self, q) -> float:
        zone = super()._zone(float(q[0]), float(q[1]))
        if zone == "v1":
            return float(self.f(q[0]) + q[1] * q[1])
        if zone == "radial":
            r = math.hypot(q[0] - self.geom.center, q[1])
            return float(self.f(self.geom.center + r))
        return self._value_one(q)

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            return self._pou_grad_dispatch(p)
        flat = p.reshape(-1, 2)
        return np.array([self._pou_grad_dispatch(q) for q in flat]).reshape(p.shape)

    def _pou_grad_dispatch(self, q) -> np.ndarray:
        zone = super()._zone(float(q[0]), float(q[1]))
        if zone == "v1":
            return np.array([float(self.f.d1(q[0])), 2.0 * float(q[1])])
        if zone == "radial":
            g = self.geom
            dx = float(q[0]) - g.center
            r = math.hypot(dx, float(q[1]))
            fp = float(self.f.d1(g.center + r))
            return np.array([fp * dx / r, fp * float(q[1]) / r])
        return self._grad_one(q)

    def self_check(self, points, tol: float | None = None) -> float:
        return 0.0  # no quadrature on the fast path


class PlainMollifiedField(ScalarField2D):
    """Unanchored disc average, for smooth fields (tests, references)."""

    smoothness = "C1"

    def __init__(self, base: ScalarField2D, rho: float,
                 config: Config = DEFAULT_CONFIG):
        self.base = base
        self.rho = rho
        self.config = config
        curves = base.kink_curves() if hasattr(base, "kink_curves") else []
        self.quad = DiscQuadrature(curves, config)
        self.far_field_x1 = getattr(base, "far_field_x1", 10.0)

    def value(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            return self.quad.average(self.base.value, p, self.rho)
        flat = p.reshape(-1, 2)
        return np.array([self.quad.average(self.base.value, q, self.rho)
                         for q in flat]).reshape(p.shape[:-1])

    def grad(self, p):
        p = np.asarray(p, dtype=float)
        if p.ndim == 1:
            return self.quad.contour_grad(self.base.value, p, self.rho)
        flat = p.reshape(-1, 2)
        return np.array([self.quad.contour_grad(self.base.value, q, self.rho)
                         for q in flat]).reshape(p.shape)

    def self_check(self, points, tol: float | None = None) -> float:
        tol = self.config.quad_selfcheck_tol if tol is None else tol
        worst = 0.0
        for q in np.atleast_2d(np.asarray(points, dtype=float)):
            a1 = self.quad.average(self.base.value, q, self.rho, order=1)
            a2 = self.quad.average(self.base.value, q, self.rho, order=2)
            worst = max(worst, abs(a1 - a2))
        if worst > tol:
            raise NumericalAccuracyError(
                f"quadrature self-check disagreement {worst:.3e} > {tol:.1e}")
        return worst


def audit_smoothed(mol: "MollifiedPhiField", config: Config = DEFAULT_CONFIG,
                   n: int | None = None) -> None:
    """Construction-time invariants of a smoothed surgery field: increasing
    in x2 off the axis, strict slope signs along the gate segments, exact
    critical points of the underlying potential."""
    g = mol.geom
    f = mol.f
    n = n or config.audit_samples
    rng = np.random.default_rng(config.rng_seed + 1)
    # x2-monotonicity on the collar where the quadrature operates
    xs = rng.uniform(g.r_minus - 2 * g.rho, g.r_plus + 2 * g.rho, n)
    ys = rng.uniform(0.2 * g.rho, 1.1 * g.b_L, n)
    for x, y in zip(xs, ys):
        gy = float(mol.grad_at(float(x), float(y))[1])
        if gy <= 0:
            raise GeometryError(
                f"smoothed field not increasing in x2 at ({x:.4f}, {y:.4f}): {gy}")
    # strict monotonicity along the gate segments of the axis
    for a, b, sign in ((g.r_minus - g.rho, g.r_minus_0 + g.rho, -1.0),
                       (g.r_plus_0 - g.rho, g.r_plus + g.rho, +1.0)):
        for x in np.linspace(a, b, n):
            gx = float(mol.grad_at(float(x), 0.0)[0])
            if sign * gx <= 0:
                raise GeometryError(
                    f"smoothed field slope sign fails at x1={x:.4f}: {gx}")
    # critical points coincide with the potential's
    for c in f.criticals:
        gr = mol.grad_at(c.x, 0.0)
        if float(np.hypot(*gr)) > 1e-10:
            raise GeometryError(
                f"smoothed field moved the critical point at {c.x}: {gr}")


def mollify(phi: ScalarField2D, rho: float | None = None,
            config: Config = DEFAULT_CONFIG) -> ScalarField2D:
    """Smooth a field by disc averaging.

    Surgery fields get the skeleton-anchored average (or the fast path when
    configured); other fields get the plain disc average.
    """
    if isinstance(phi, PhiField):
        cls = PoUPhiField if config.fast_path else MollifiedPhiField
        return cls(phi, rho, config)
    if rho is None:
        raise ValueError("rho is required for non-surgery fields")
    return PlainMollifiedField(phi, rho, config)


# -- one-parameter families ------------------------------------------------------

class FieldFamily:
    """Field depending on the input u on a closed span."""

    def __init__(self, u_span: tuple[float, float]):
        self.u_a, self.u_b = float(u_span[0]), float(u_span[1])
        if not self.u_a < self.u_b:
            raise ValueError("empty u span")

    def value(self, p, u: float):
        raise NotImplementedError

    def grad(self, p, u: float) -> np.ndarray:
        raise NotImplementedError

    def field_at(self, u: float) -> "FrozenFamilyField":
        return FrozenFamilyField(self, u)

    def far_field_x1_bound(self) -> float:
        return 10.0


class FrozenFamilyField(ScalarField2D):
    def __init__(self, family: FieldFamily, u: float):
        self.family = family
        self.u = float(u)
        self.far_field_x1 = family.far_field_x1_bound()

    def value(self, p):
        return self.family.value(p, self.u)

    def grad(self, p):
        return self.family.grad(p, self.u)


class BlendFamily(FieldFamily):
    """(1 - a(u)) F0 + a(u) F1 with a the C1 ramp, flat at both ends."""

    def __init__(self, F0: ScalarField2D, F1: ScalarField2D,
                 u_span: tuple[float, float]):
        super().__init__(u_span)
        self.F0 = F0
        self.F1 = F1

    def mix(self, u: float) -> float:
        return float(ramp((u - self.u_a) / (self.u_b - self.u_a)))

    def value(self, p, u: float):
        a = self.mix(u)
        if a == 0.0:
            return self.F0.value(p)
        if a == 1.0:
            return self.F1.value(p)
        return (1.0 - a) * np.asarray(self.F0.value(p)) + a * np.asarray(self.F1.value(p))

    def grad(self, p, u: float):
        a = self.mix(u)
        if a == 0.0:
            return self.F0.grad(p)
        if a == 1.0:
            return self.F1.grad(p)
        return (1.0 - a) * np.asarray(self.F0.grad(p)) + a * np.asarray(self.F1.grad(p))

    def far_field_x1_bound(self) -> float:
        return max(self.F0.far_field_x1, self.F1.far_field_x1)


def linear_blend(F0: ScalarField2D, F1: ScalarField2D,
                 u_span: tuple[float, float]) -> BlendFamily:
    return BlendFamily(F0, F1, u_span)


class RotationFamily(FieldFamily):
    """Rigid rotation of a disc whose boundary circle is a level line."""

    def __init__(self, base: ScalarField2D, geom: LemmaGeometry,
                 u_span: tuple[float, float]):
        super().__init__(u_span)
        self.base = base
        self.center = np.array([geom.center, 0.0])
        self.R = geom.R_rot
        th = np.linspace(0.0, 2.0 * np.pi, 360, endpoint=False)
        ring = self.center + self.R * np.column_stack([np.cos(th), np.sin(th)])
        vals = np.asarray(base.value(ring), dtype=float)
        if float(np.max(vals) - np.min(vals)) > 1e-9:
            raise GeometryError(
                "rotation circle is not a level line of the base field")

    def angle(self, u: float) -> float:
        return math.pi * float(ramp((u - self.u_a) / (self.u_b - self.u_a)))

    def _pullback(self, p, u: float):
        a = self.angle(u)
        q = np.asarray(p, dtype=float) - self.center
        r = np.hypot(q[..., 0], q[..., 1])
        ca, sa = math.cos(-a), math.sin(-a)
        qx = ca * q[..., 0] - sa * q[..., 1]
        qy = sa * q[..., 0] + ca * q[..., 1]
        inside = r <= self.R
        px = np.where(inside, qx, q[..., 0]) + self.center[0]
        py = np.where(inside, qy, q[..., 1]) + self.center[1]
        return np.stack([px, py], axis=-1), inside, a

    def value(self, p, u: float):
        q, _, _ = self._pullback(p, u)
        return self.base.value(q)

    def grad(self, p, u: float):
        q, inside, a = self._pullback(p, u)
        g = np.asarray(self.base.grad(q), dtype=float)
        ca, sa = math.cos(a), math.sin(a)
        gx = ca * g[..., 0] - sa * g[..., 1]
        gy = sa * g[..., 0] + ca * g[..., 1]
        gx = np.where(inside, gx, g[..., 0])
        gy = np.where(inside, gy, g[..., 1])
        return np.stack([gx, gy], axis=-1)

    def far_field_x1_bound(self) -> float:
        return self.base.far_field_x1


def rotation_family(base: ScalarField2D, geom: LemmaGeometry,
                    u_span: tuple[float, float]) -> RotationFamily:
    return RotationFamily(base, geom, u_span)


class ConstantFamily(FieldFamily):
    def __init__(self, F: ScalarField2D, u_span: tuple[float, float]):
        super().__init__(u_span)
        self.F = F

    def value(self, p, u: float):
        return self.F.value(p)

    def grad(self, p, u: float):
        return self.F.grad(p)

    def far_field_x1_bound(self) -> float:
        return self.F.far_field_x1


# -- exports for plotting --------------------------------------------------------

def sample_field_grid(field: ScalarField2D, x1s, x2s) -> np.ndarray:
    """Row-major V values on the tensor grid (rows follow x2)."""
    X1, X2 = np.meshgrid(np.asarray(x1s, dtype=float),
                         np.asarray(x2s, dtype=float))
    pts = np.stack([X1.ravel(), X2.ravel()], axis=-1)
    return np.asarray(field.value(pts), dtype=float).reshape(X1.shape)
