"""Runtime configuration: tolerances, geometry proportions, quadrature orders.

All lengths in the lemma geometry are fractions of the gap g between the two
minima being exchanged.  The defaults are validated by the construction-time
audits (monotonicity, level lines, containment); constructions abort with a
GeometryError rather than proceed with a proportion set that violates them.
"""

from __future__ import annotations

import dataclasses
import json
from dataclasses import dataclass


@dataclass
class Config:
    # descent / tracking tolerances
    eps_grad: float = 1e-9          # |grad V| at which settle() accepts an equilibrium
    du: float = 0.01                # base input step for equilibrium tracking
    sn_curvature_threshold: float = 1e-4
    verify_tol: float = 1e-6        # coordinate tolerance for vertex <-> minimum matching
    max_settle_steps: int = 1_000_000
    max_settle_time: float = 1e6

    # lemma geometry, fractions of the swap gap g
    geom_r0: float = 0.58           # small ellipse crosses the axis at center -+ r0*g
    geom_rd: float = 0.60           # small circle radius R_S
    geom_rD: float = 0.75           # large circle radius R_L
    geom_rpm: float = 0.90          # large ellipse crosses the axis at center -+ rpm*g
    geom_bS: float = 0.10           # small ellipse vertical semi-axis
    geom_bL: float = 10.0           # large ellipse vertical semi-axis
    geom_rho: float = 0.012         # mollification radius
    geom_R_rot: float = 0.675       # rotation radius, inside (R1, R2)
    geom_R1: float = 0.66
    geom_R2: float = 0.69
    # radial ramp of the smooth skeleton used by the corrected mollifier
    geom_wramp: tuple[float, float, float, float] = (0.53, 0.63, 0.72, 0.90)
    # fractions of the gate value used for the lowered-barrier potential
    tilde_mtilde: float = 0.4
    tilde_yd: float = 0.6
    tilde_yD: float = 0.8

    # 1-d potential construction
    well_window: float = 0.06       # half-width of the exact-quadratic window at knots
    well_curvature: float = 12.0    # f'' at minima (and -f'' at maxima)
    shoulder_slope: float = 2.0     # |f'| at the non-critical shoulder points
    tail_margin: float = 1.6        # window edge offset beyond the outer minima
    sn_bump_height: float = 3.0     # bump amplitude in units of (M* - m*)
    sn_post_margin: float = 0.05    # how far past the fold lambda is driven

    # quadrature
    quad_radial: int = 8            # Gauss nodes per smooth radial piece
    quad_angular: int = 16          # Gauss nodes per smooth arc
    quad_scan: int = 64             # angular scan resolution for kink crossings
    quad_selfcheck_tol: float = 1e-8

    # audits run while a construction is being assembled (counts per check)
    audit_samples: int = 60
    fast_path: bool = False         # partition-of-unity smoothing instead of quadrature

    rng_seed: int = 20260810

    def validated(self) -> "Config":
        for name in ("eps_grad", "du", "sn_curvature_threshold", "verify_tol",
                     "geom_rho", "well_window"):
            if getattr(self, name) <= 0:
                raise ValueError(f"config field {name} must be positive")
        return self

    def to_json(self) -> str:
        d = dataclasses.asdict(self)
        d["geom_wramp"] = list(d["geom_wramp"])
        return json.dumps(d, indent=2, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "Config":
        d = json.loads(text)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        if "geom_wramp" in d:
            d["geom_wramp"] = tuple(d["geom_wramp"])
        return cls(**d).validated()


DEFAULT_CONFIG = Config()
