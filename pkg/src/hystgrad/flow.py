"""Gradient-flow integration and adiabatic input sweeps.

settle() descends to an equilibrium with an embedded Dormand-Prince pair;
track_equilibrium() continues a minimum in u with damped Newton refinement
and adaptive step halving, declaring a fold when the local curvature
collapses; adiabatic_sweep() alternates tracking and fold transits and maps
occupied minima back to graph vertices at grid inputs.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .config import DEFAULT_CONFIG, Config
from .errors import NonConvergenceError, RealizationMismatchError, TrackingError
from .field import ScalarField2D
from .graph import levels_to_steps
from .schedule import DeformationSchedule, Realization

__all__ = [
    "SweepConfig",
    "SecondOrderConfig",
    "FlowEvent",
    "FlowTrajectory",
    "settle",
    "track_equilibrium",
    "transit_saddle_node",
    "adiabatic_sweep",
    "second_order_sim",
    "dissipation",
]


@dataclass
class SweepConfig:
    du: float = 0.01
    du_min: float = 1e-6
    eps_grad: float = 1e-9
    sn_curvature_threshold: float = 1e-4
    max_settle_steps: int = 1_000_000
    max_settle_time: float = 1e6
    jump_cap: float = 0.5          # fraction of the unit minima spacing
    rtol: float = 1e-7
    atol: float = 1e-9

    @classmethod
    def from_config(cls, config: Config = DEFAULT_CONFIG) -> "SweepConfig":
        return cls(du=config.du, du_min=max(config.du / 1024.0, 1e-8),
                   eps_grad=config.eps_grad,
                   sn_curvature_threshold=config.sn_curvature_threshold,
                   max_settle_steps=config.max_settle_steps,
                   max_settle_time=config.max_settle_time)

    def __post_init__(self):
        for name in ("du", "du_min", "eps_grad", "sn_curvature_threshold"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass
class SecondOrderConfig:
    gamma: float
    nu: float

    def __post_init__(self):
        if self.gamma <= 0 or self.nu <= 0:
            raise ValueError("gamma and nu must be positive")
        if self.mu > 0.1:
            warnings.warn(f"mu = gamma*nu = {self.mu:.3g} > 0.1: "
                          "the adiabatic reduction may be inaccurate")

    @property
    def epsilon(self) -> float:
        return self.gamma ** -2

    @property
    def mu(self) -> float:
        return self.gamma * self.nu


@dataclass
class FlowEvent:
    kind: str                      # sn-detected | landed | reversible-step
    u: float
    x: tuple[float, float]
    info: dict = field(default_factory=dict)


@dataclass
class FlowTrajectory:
    t: list[float] = field(default_factory=list)
    u: list[float] = field(default_factory=list)
    x: list[tuple[float, float]] = field(default_factory=list)
    v: list[float] = field(default_factory=list)
    events: list[FlowEvent] = field(default_factory=list)

    def append(self, t: float, u: float, x, value: float) -> None:
        self.t.append(float(t))
        self.u.append(float(u))
        self.x.append((float(x[0]), float(x[1])))
        self.v.append(float(value))


# Dormand-Prince 5(4) coefficients
_DP_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_DP_B5 = [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0]
_DP_B4 = [5179 / 57600, 0.0, 7571 / 16695, 393 / 640,
          -92097 / 339200, 187 / 2100, 1 / 40]


def _rk45_step(f, t, y, h):
    ks = []
    for row in _DP_A:
        yi = y + h * sum(a * k for a, k in zip(row, ks)) if ks else y
        ks.append(f(t, yi))
    y5 = y + h * sum(b * k for b, k in zip(_DP_B5, ks))
    y4 = y + h * sum(b * k for b, k in zip(_DP_B4, ks))
    return y5, float(np.max(np.abs(y5 - y4)))


def _fd_hessian(grad_fn, x, h: float = 1e-6) -> np.ndarray:
    gx = (np.asarray(grad_fn(x + np.array([h, 0.0]))) -
          np.asarray(grad_fn(x - np.array([h, 0.0])))) / (2 * h)
    gy = (np.asarray(grad_fn(x + np.array([0.0, h]))) -
          np.asarray(grad_fn(x - np.array([0.0, h])))) / (2 * h)
    H = np.column_stack([gx, gy])
    return 0.5 * (H + H.T)


def settle(fld: ScalarField2D, x0, cfg: SweepConfig | None = None,
           trajectory: FlowTrajectory | None = None, u_tag: float = 0.0,
           t_offset: float = 0.0) -> np.ndarray:
    """Integrate the descent to an equilibrium and classify it as a minimum."""
    cfg = cfg or SweepConfig()
    x = np.asarray(x0, dtype=float).copy()
    rhs = lambda t, y: -np.asarray(fld.grad(y), dtype=float)
    t, h = 0.0, 0.01
    val = float(fld.value(x))
    if trajectory is not None:
        trajectory.append(t_offset, u_tag, x, val)
    for step in range(cfg.max_settle_steps):
        g = np.asarray(fld.grad(x), dtype=float)
        gn = float(np.hypot(g[0], g[1]))
        if gn < cfg.eps_grad:
            H = _fd_hessian(fld.grad, x)
            eig = np.linalg.eigvalsh(H)
            if eig[0] <= 0:
                raise NonConvergenceError(
                    f"settled at a non-minimum: eigenvalues {eig}")
            return x
        if gn < 1e-4:
            # inside the basin: polish to the equilibrium with Newton, which
            # the adaptive integrator cannot reach below its error floor
            H = _fd_hessian(fld.grad, x)
            if np.linalg.eigvalsh(H)[0] > 0:
                res = _newton_min(fld.grad, x, cfg)
                if res is not None and float(np.hypot(*(res[0] - x))) < 0.1:
                    xn, Hn = res
                    if np.linalg.eigvalsh(Hn)[0] > 0:
                        return xn
        y1, err = _rk45_step(rhs, t, x, h)
        tol = cfg.atol + cfg.rtol * float(np.max(np.abs(x)))
        if err <= tol:
            v1 = float(fld.value(y1))
            if v1 > val + 1e-10 * max(1.0, abs(val)):
                raise NonConvergenceError(
                    f"descent increased the potential at step {step}")
            x, t, val = y1, t + h, v1
            if trajectory is not None and step % 16 == 0:
                trajectory.append(t_offset + t, u_tag, x, val)
            h = min(h * min(2.0, 0.9 * (tol / max(err, 1e-300)) ** 0.2), 1.0)
        else:
            h = max(h * max(0.2, 0.9 * (tol / err) ** 0.2), 1e-12)
        if t > cfg.max_settle_time:
            raise NonConvergenceError("settle exceeded its time budget")
    raise NonConvergenceError("settle exceeded its step budget")


def _newton_min(value_grad, x0, cfg: SweepConfig,
                max_iter: int = 24) -> tuple[np.ndarray, np.ndarray] | None:
    """Damped Newton to a gradient zero from a warm start; returns the point
    and Hessian, or None if it fails to converge."""
    x = np.asarray(x0, dtype=float).copy()
    H = _fd_hessian(value_grad, x)
    for it in range(max_iter):
        g = np.asarray(value_grad(x), dtype=float)
        if float(np.hypot(g[0], g[1])) < 1e-10:
            return x, H
        try:
            step = np.linalg.solve(H, g)
        except np.linalg.LinAlgError:
            return None
        if not np.all(np.isfinite(step)):
            return None
        if float(np.hypot(step[0], step[1])) > 1.0:
            return None
        x = x - step
        if it % 3 == 2:
            H = _fd_hessian(value_grad, x)
    return None


def track_equilibrium(sched: DeformationSchedule, x0, u_from: float,
                      u_to: float, cfg: SweepConfig | None = None,
                      trajectory: FlowTrajectory | None = None):
    """Continue a minimum from u_from toward u_to.

    Returns (path, event): path is [(u, x)] of accepted points; event is an
    SN-detected FlowEvent if the tracked minimum folds before u_to.
    """
    cfg = cfg or SweepConfig()
    s = 1.0 if u_to >= u_from else -1.0
    u = float(u_from)
    x = np.asarray(x0, dtype=float).copy()
    res = _newton_min(lambda p: sched.grad(p, u), x, cfg)
    if res is None:
        raise TrackingError(f"start point is not a minimum at u={u}")
    x = res[0]
    path = [(u, x.copy())]
    du = cfg.du
    streak = 0
    while s * (u_to - u) > 1e-14:
        step = min(du, abs(u_to - u))
        u_next = u + s * step
        res = _newton_min(lambda p: sched.grad(p, u_next), x, cfg)
        ok = res is not None
        if ok:
            x_next, H = res
            jump = float(np.hypot(*(x_next - x)))
            eig = float(np.linalg.eigvalsh(H)[0])
            ok = jump <= cfg.jump_cap and eig > cfg.sn_curvature_threshold
        if ok:
            u, x = u_next, x_next
            path.append((u, x.copy()))
            if trajectory is not None:
                trajectory.append(len(trajectory.t), u, x,
                                  float(sched.value(x, u)))
            streak += 1
            if streak >= 3:
                du = min(du * 2.0, cfg.du)
            continue
        streak = 0
        if step > cfg.du_min:
            du = max(step / 2.0, cfg.du_min)
            continue
        # at the finest step: either the fold has been reached or tracking broke
        if res is not None:
            x_next, H = res
            eig = float(np.linalg.eigvalsh(H)[0])
            jump = float(np.hypot(*(x_next - x)))
            if eig > cfg.sn_curvature_threshold and jump > cfg.jump_cap:
                raise TrackingError(
                    f"tracked minimum jumped {jump:.3g} at u={u_next} "
                    "with healthy curvature; step size too coarse")
        event = FlowEvent("sn-detected", u, (float(x[0]), float(x[1])))
        if trajectory is not None:
            trajectory.events.append(event)
        return path, event
    return path, None


def transit_saddle_node(sched: DeformationSchedule, u_at: float, x_sn,
                        cfg: SweepConfig | None = None,
                        trajectory: FlowTrajectory | None = None) -> np.ndarray:
    """Descend from the ghost of a folded minimum to the landing minimum."""
    cfg = cfg or SweepConfig()
    fld = sched.field_at(u_at)
    landing = settle(fld, x_sn, cfg, trajectory=trajectory, u_tag=u_at,
                     t_offset=len(trajectory.t) if trajectory else 0.0)
    if trajectory is not None:
        v_start = float(fld.value(np.asarray(x_sn, dtype=float)))
        v_end = float(fld.value(landing))
        trajectory.events.append(FlowEvent(
            "landed", u_at, (float(landing[0]), float(landing[1])),
            {"from": (float(x_sn[0]), float(x_sn[1])),
             "drop": v_start - v_end}))
    return landing


def adiabatic_sweep(r: Realization, start_vertex: str, levels: list[int],
                    cfg: SweepConfig | None = None):
    """Alternate tracking and fold transits across unit input steps.

    Returns (vertex trajectory [(level, vertex)], FlowTrajectory).
    """
    cfg = cfg or SweepConfig.from_config(r.config)
    g = r.graph
    levels = levels_to_steps(levels, g.n)
    lvl = levels[0]
    if start_vertex not in g.levels[lvl]:
        raise ValueError(f"{start_vertex!r} is not on level {lvl}")
    x = np.asarray(r.X[lvl][start_vertex], dtype=float)
    traj = FlowTrajectory()
    verts = [(lvl, start_vertex)]
    for prev, cur in zip(levels, levels[1:]):
        if cur == prev:
            verts.append((cur, verts[-1][1]))
            continue
        u_from = float(g.input_values[prev])
        u_to = float(g.input_values[cur])
        u, xx = u_from, x
        n_events = 0
        while True:
            path, event = track_equilibrium(r.schedule, xx, u, u_to, cfg, traj)
            u, xx = path[-1]
            if event is None:
                break
            n_events += 1
            if n_events > len(g.levels[prev]) + len(g.levels[cur]):
                raise TrackingError("too many folds in one unit step")
            u_at = u + (1.0 if u_to > u_from else -1.0) * cfg.du
            u_at = min(max(u_at, min(u_from, u_to)), max(u_from, u_to))
            xx = transit_saddle_node(r.schedule, u_at, xx, cfg, traj)
            u = u_at
        res = _newton_min(lambda p: r.schedule.grad(p, u_to), xx, cfg)
        if res is None:
            raise RealizationMismatchError(
                f"no minimum at the grid input u={u_to}")
        xx = res[0]
        vertex = r.vertex_at(cur, xx, tol=1e-6)
        if vertex is None:
            raise RealizationMismatchError(
                f"occupied minimum {xx} at u={u_to} matches no vertex of "
                f"level {cur}")
        traj.events.append(FlowEvent("reversible-step", u_to,
                                     (float(xx[0]), float(xx[1])),
                                     {"vertex": vertex}))
        verts.append((cur, vertex))
        x = xx
    return verts, traj


def dissipation(event: FlowEvent, r: Realization) -> float:
    """Potential drop lost in a fold transit; zero for reversible steps."""
    if event.kind == "reversible-step":
        return 0.0
    if event.kind != "landed":
        raise ValueError("dissipation is defined for landed events")
    fld = r.schedule.field_at(event.u)
    start = np.asarray(event.info["from"], dtype=float)
    end = np.asarray(event.x, dtype=float)
    drop = float(fld.value(start)) - float(fld.value(end))
    if drop < -1e-12:
        raise NonConvergenceError(f"negative dissipation {drop}")
    return max(drop, 0.0)


def second_order_sim(sched: DeformationSchedule, so: SecondOrderConfig,
                     u_of_theta, t_span: tuple[float, float], x0,
                     v0=(0.0, 0.0), cfg: SweepConfig | None = None,
                     sample_every: float | None = None):
    """Integrate x'' + gamma x' + grad V(x, u(nu t)) = 0.

    u_of_theta maps the slowest time theta = nu*t to the input value.
    Returns a FlowTrajectory sampled on a uniform grid (plus the endpoint).
    """
    cfg = cfg or SweepConfig()
    t0, t1 = t_span
    gamma, nu = so.gamma, so.nu

    def rhs(t, y):
        x, v = y[:2], y[2:]
        grad = np.asarray(sched.grad(x, float(u_of_theta(nu * t))), dtype=float)
        return np.concatenate([v, -gamma * v - grad])

    y = np.concatenate([np.asarray(x0, dtype=float),
                        np.asarray(v0, dtype=float)])
    t = float(t0)
    h = min(0.2 / gamma, (t1 - t0) / 100.0)
    out = FlowTrajectory()
    sample_every = sample_every or (t1 - t0) / 2000.0
    next_sample = t
    while t < t1:
        h = min(h, t1 - t)
        y1, err = _rk45_step(rhs, t, y, h)
        tol = cfg.atol * 100 + cfg.rtol * float(np.max(np.abs(y)))
        if err <= tol:
            t, y = t + h, y1
            if not np.all(np.isfinite(y)) or float(np.max(np.abs(y))) > 1e6:
                raise NonConvergenceError(
                    "second-order integration blew up; reduce the step")
            if t >= next_sample:
                u = float(u_of_theta(nu * t))
                out.append(t, u, y[:2], float(sched.value(y[:2], u)))
                next_sample += sample_every
            h = min(h * min(2.0, 0.9 * (tol / max(err, 1e-300)) ** 0.2),
                    0.5 / gamma * 10)
        else:
            h = max(h * max(0.2, 0.9 * (tol / err) ** 0.2), 1e-12)
    u = float(u_of_theta(nu * t))
    out.append(t, u, y[:2], float(sched.value(y[:2], u)))
    return out
