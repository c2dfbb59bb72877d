"""Piecewise quintic polynomials with controlled knot data.

Every 1-d potential in this package is a PiecewisePoly: quintic Hermite
segments between knots carrying (value, slope, curvature), with an exact
x^2 tail (potentials) or a zero tail (bumps) outside the knot span.
Quintic Hermite interpolation reproduces any polynomial of degree <= 5
whose end data it is given, so exact quadratic windows, linear bands and
x^2 tail pieces all come out of the same constructor.
"""

from __future__ import annotations

import math
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ramp",
    "ramp_d1",
    "smootherstep",
    "quintic_coeffs",
    "PiecewisePoly",
    "KnotData",
    "find_sign_changes",
    "bisect_root",
]


def ramp(s):
    """C1 smoothstep 3s^2 - 2s^3 on [0,1], clipped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * (3.0 - 2.0 * s)


def ramp_d1(s):
    s = np.asarray(s, dtype=float)
    inside = (s > 0.0) & (s < 1.0)
    out = np.zeros_like(s)
    ss = s[inside]
    out[inside] = 6.0 * ss * (1.0 - ss)
    if out.ndim == 0:
        return float(out)
    return out


def smootherstep(s):
    """C2 step 6s^5 - 15s^4 + 10s^3 on [0,1], clipped outside."""
    s = np.clip(s, 0.0, 1.0)
    return s * s * s * (s * (6.0 * s - 15.0) + 10.0)


def quintic_coeffs(h: float, left: Sequence[float], right: Sequence[float]) -> np.ndarray:
    """Quintic Hermite coefficients on [0, h] in local coordinates.

    left/right are (value, first derivative, second derivative) triples.
    """
    p0, m0, c0 = left
    p1, m1, c1 = right
    a0, a1, a2 = p0, m0, 0.5 * c0
    A = p1 - (a0 + a1 * h + a2 * h * h)
    B = m1 - (a1 + 2.0 * a2 * h)
    C = c1 - 2.0 * a2
    h2, h3 = h * h, h * h * h
    a3 = (10.0 * A - 4.0 * B * h + 0.5 * C * h2) / h3
    a4 = (-15.0 * A + 7.0 * B * h - C * h2) / (h3 * h)
    a5 = (6.0 * A - 3.0 * B * h + 0.5 * C * h2) / (h3 * h2)
    return np.array([a0, a1, a2, a3, a4, a5])


def _shift_poly(c: np.ndarray, d: float) -> np.ndarray:
    """Re-center coefficients from local origin x0 to x0 + d (same degree)."""
    n = len(c)
    out = np.zeros(n)
    # out[j] = sum_k c[k] * C(k, j) * d^(k-j)
    for k in range(n):
        ck = c[k]
        if ck == 0.0:
            continue
        binom = 1.0
        dp = 1.0
        for j in range(k, -1, -1):
            out[j] += ck * binom * dp
            if j > 0:
                binom = binom * j / (k - j + 1)
                dp *= d
    return out


KnotData = tuple[float, float, float, float]  # (x, value, d1, d2)

DEGREE = 9  # segments store DEGREE+1 coefficients; Hermite fills are quintic


def _pad(c: np.ndarray) -> np.ndarray:
    out = np.zeros(DEGREE + 1)
    out[: len(c)] = np.asarray(c, dtype=float)
    return out


def blend_models(h: float, A: Sequence[float], B: Sequence[float]) -> np.ndarray:
    """Join on [0, h]: smootherstep mix of two local polynomial models
    (coefficients about 0, degree <= 4), matching A to second order at 0 and
    B to second order at h."""
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    if len(A) > 5 or len(B) > 5:
        raise ValueError("blend models must have degree <= 4")
    S = np.array([0.0, 0.0, 0.0, 10.0 / h ** 3, -15.0 / h ** 4, 6.0 / h ** 5])
    diff = np.zeros(max(len(A), len(B)))
    diff[: len(B)] += B
    diff[: len(A)] -= A
    return _pad(A) + _pad(np.convolve(S, diff))


def blend_coeffs(h: float, left: Sequence[float], right: Sequence[float]) -> np.ndarray:
    """Degree-7 join on [0, h]: smootherstep mix of the endpoint Taylor models.

    Matches (value, d1, d2) at both ends like the quintic Hermite but follows
    an S-profile between, which the plain Hermite often does not.
    """
    p0, m0, c0 = left
    p1, m1, c1 = right
    A = np.array([p0, m0, 0.5 * c0])                       # Taylor at 0
    # Taylor model of the right end, expanded about 0: p1 + m1(u-h) + c1/2 (u-h)^2
    B = np.array([p1 - m1 * h + 0.5 * c1 * h * h, m1 - c1 * h, 0.5 * c1])
    return blend_models(h, A, B)


def quintic_coeffs8(h: float, left: Sequence[float], right: Sequence[float]) -> np.ndarray:
    return _pad(quintic_coeffs(h, left, right))


class PiecewisePoly:
    """Polynomial segments (degree <= 7) on a knot grid with an x^2 or zero
    tail outside."""

    def __init__(self, knots: np.ndarray, coeffs: np.ndarray, tail: str = "x2"):
        knots = np.asarray(knots, dtype=float)
        coeffs = np.asarray(coeffs, dtype=float)
        if knots.ndim != 1 or len(knots) < 2:
            raise ValueError("need at least two knots")
        if np.any(np.diff(knots) <= 0):
            raise ValueError("knots must be strictly increasing")
        if coeffs.shape != (len(knots) - 1, DEGREE + 1):
            raise ValueError(f"coeffs must be (len(knots)-1, {DEGREE + 1})")
        if tail not in ("x2", "zero"):
            raise ValueError("tail must be 'x2' or 'zero'")
        self.knots = knots
        self.coeffs = coeffs
        self.tail = tail
        self._d1c = coeffs[:, 1:] * np.arange(1, DEGREE + 1)
        self._d2c = self._d1c[:, 1:] * np.arange(1, DEGREE)

    # -- construction -----------------------------------------------------

    @classmethod
    def from_knot_data(cls, data: Iterable[KnotData], tail: str = "x2",
                       blend: Iterable[int] = ()) -> "PiecewisePoly":
        """Quintic Hermite segments through (x, value, d1, d2) knots; the
        segment indices in `blend` use the degree-7 Taylor-blend join."""
        pts = sorted(data)
        blend = set(blend)
        knots = np.array([p[0] for p in pts])
        coeffs = np.empty((len(pts) - 1, DEGREE + 1))
        for i in range(len(pts) - 1):
            x0, p0, m0, c0 = pts[i]
            x1, p1, m1, c1 = pts[i + 1]
            fill = blend_coeffs if i in blend else quintic_coeffs8
            coeffs[i] = fill(x1 - x0, (p0, m0, c0), (p1, m1, c1))
        return cls(knots, coeffs, tail)

    @staticmethod
    def x2_data(x: float) -> KnotData:
        return (x, x * x, 2.0 * x, 2.0)

    def _interval_coeffs(self, a: float, b: float) -> np.ndarray:
        """Coefficients of this poly on [a, b] (a inside span or in a tail)."""
        if a >= self.knots[-1] or b <= self.knots[0]:
            if self.tail == "zero":
                return np.zeros(DEGREE + 1)
            return _pad(np.array([a * a, 2.0 * a, 1.0]))
        i = int(np.searchsorted(self.knots, a, side="right") - 1)
        i = min(max(i, 0), len(self.coeffs) - 1)
        return _shift_poly(self.coeffs[i], a - self.knots[i])

    def plus(self, other: "PiecewisePoly") -> "PiecewisePoly":
        """Pointwise sum.  Exactly one operand may have an x^2 tail."""
        if self.tail == "x2" and other.tail == "x2":
            raise ValueError("cannot add two x^2-tailed polynomials")
        tail = "x2" if "x2" in (self.tail, other.tail) else "zero"
        lo = min(self.knots[0], other.knots[0])
        hi = max(self.knots[-1], other.knots[-1])
        knots = np.unique(np.concatenate([self.knots, other.knots, [lo, hi]]))
        coeffs = np.empty((len(knots) - 1, DEGREE + 1))
        for i in range(len(knots) - 1):
            a, b = knots[i], knots[i + 1]
            coeffs[i] = self._interval_coeffs(a, b) + other._interval_coeffs(a, b)
        return PiecewisePoly(knots, coeffs, tail)

    def scaled(self, factor: float) -> "PiecewisePoly":
        if self.tail != "zero":
            raise ValueError("scaling is only defined for zero-tailed polynomials")
        return PiecewisePoly(self.knots, self.coeffs * factor, "zero")

    # -- evaluation --------------------------------------------------------

    def _split(self, x):
        x = np.asarray(x, dtype=float)
        idx = np.clip(np.searchsorted(self.knots, x, side="right") - 1,
                      0, len(self.coeffs) - 1)
        inside = (x >= self.knots[0]) & (x <= self.knots[-1])
        t = x - self.knots[idx]
        return x, idx, inside, t

    @staticmethod
    def _horner(c, t):
        val = c[..., c.shape[-1] - 1]
        for k in range(c.shape[-1] - 2, -1, -1):
            val = val * t + c[..., k]
        return val

    def __call__(self, x):
        x, idx, inside, t = self._split(x)
        val = self._horner(self.coeffs[idx], t)
        out = np.where(inside, val, x * x if self.tail == "x2" else 0.0)
        return float(out) if out.ndim == 0 else out

    def d1(self, x):
        x, idx, inside, t = self._split(x)
        val = self._horner(self._d1c[idx], t)
        out = np.where(inside, val, 2.0 * x if self.tail == "x2" else 0.0)
        return float(out) if out.ndim == 0 else out

    def d2(self, x):
        x, idx, inside, t = self._split(x)
        val = self._horner(self._d2c[idx], t)
        if self.tail == "x2":
            out = np.where(inside, val, 2.0)
        else:
            out = np.where(inside, val, 0.0)
        return float(out) if out.ndim == 0 else out

    @property
    def span(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])


def find_sign_changes(f, lo: float, hi: float, n: int = 2001) -> list[tuple[float, float]]:
    """Brackets [a,b] where f changes sign on a uniform scan grid."""
    xs = np.linspace(lo, hi, n)
    vals = np.asarray(f(xs), dtype=float)
    out = []
    sgn = np.sign(vals)
    for i in range(n - 1):
        if sgn[i] == 0.0:
            if 0 < i:
                out.append((xs[max(i - 1, 0)], xs[min(i + 1, n - 1)]))
        elif sgn[i] * sgn[i + 1] < 0:
            out.append((xs[i], xs[i + 1]))
    return out


def bisect_root(f, a: float, b: float, iters: int = 80) -> float:
    fa = f(a)
    fb = f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0:
        raise ValueError("root not bracketed")
    for _ in range(iters):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or (b - a) < 1e-15 * max(1.0, abs(m)):
            return m
        if fa * fm < 0:
            b, fb = m, fm
        else:
            a, fa = m, fm
    return 0.5 * (a + b)
