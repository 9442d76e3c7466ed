"""Derivatives and constraint-region checks for the score surface.

Closed-form partials of Z = reward - penalty and S = tanh(alpha * Z) with
respect to P and v (E held fixed), validated against central finite
differences. With L = ln((P+d)/(v+d)), g = tanh((b/2) L), u = ln((1+d)/(v+d)):

    dZ/dP = gamma P^(gamma-1) u g + P^gamma u (1-g^2)(b/2)/(P+d)
            + lambda k v^eta (1-P)^(k-1) + tau r (1-P)^(r-1)
    dZ/dv = -P^gamma (g + u (1-g^2)(b/2)) / (v+d)
            - lambda eta v^(eta-1) (1-P)^k
    dS/dx = alpha (1 - tanh^2(alpha Z)) dZ/dx

The grid scan counts sign violations of dZ/dP (recognizability monotonicity)
and, at low P, of -dZ/dv (detail never helps an unrecognizable sketch), and
reports per-capacity optimum locations and the empirical score-zero contour.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_HYPERPARAMS, Hyperparams, balance, economy, gate, score

__all__ = [
    "BoundaryError",
    "DerivativePair",
    "GridSpec",
    "OptimumPoint",
    "RegionReport",
    "analytic_derivatives",
    "fd_derivatives",
    "verify_monotonicity",
    "find_v_star",
    "zero_contour",
    "contour_to_csv",
]

GOLDEN_RATIO_STEP = (math.sqrt(5.0) - 1.0) / 2.0


class BoundaryError(ValueError):
    """Requested an analytic derivative at a non-interior point."""


@dataclass(frozen=True)
class DerivativePair:
    """The four partials at one (P, v) point.

    `one_sided_P` / `one_sided_v` flag finite-difference results whose
    symmetric stencil left the admissible box and fell back to a one-sided
    difference; analytic results always carry False.
    """

    dZ_dP: float
    dZ_dv: float
    dS_dP: float
    dS_dv: float
    one_sided_P: bool = False
    one_sided_v: bool = False


def _dz_dp(P, v, hp: Hyperparams):
    P = np.asarray(P, dtype=float)
    v = np.asarray(v, dtype=float)
    u = economy(v, hp)
    g = gate(P, v, hp)
    return (hp.gamma * P ** (hp.gamma - 1.0) * u * g
            + P ** hp.gamma * u * (1.0 - g * g) * (0.5 * hp.beta) / (P + hp.delta)
            + hp.lambda_ * hp.k * v ** hp.eta * (1.0 - P) ** (hp.k - 1.0)
            + hp.tau * hp.r * (1.0 - P) ** (hp.r - 1.0))


def _dz_dv(P, v, hp: Hyperparams):
    P = np.asarray(P, dtype=float)
    v = np.asarray(v, dtype=float)
    u = economy(v, hp)
    g = gate(P, v, hp)
    return (-(P ** hp.gamma) * (g + u * (1.0 - g * g) * (0.5 * hp.beta)) / (v + hp.delta)
            - hp.lambda_ * hp.eta * v ** (hp.eta - 1.0) * (1.0 - P) ** hp.k)


def _chain(P, v, hp: Hyperparams, dz):
    s = np.tanh(hp.alpha * np.asarray(balance(P, v, hp)))
    return hp.alpha * (1.0 - s * s) * dz


def analytic_derivatives(P: float, v: float,
                         hp: Hyperparams = DEFAULT_HYPERPARAMS) -> DerivativePair:
    """Exact partials of Z and S at an interior point.

    Requires P in (epsilon_clip, 1-epsilon_clip) and v in (epsilon_clip, 1];
    elsewhere raises BoundaryError (use one-sided finite differences there).
    """
    eps = hp.epsilon_clip
    if not (eps < P < 1.0 - eps):
        raise BoundaryError(f"P={P!r} is not interior to ({eps}, {1.0 - eps})")
    if not (eps < v <= 1.0):
        raise BoundaryError(f"v={v!r} is not interior to ({eps}, 1]")
    dzp = float(_dz_dp(P, v, hp))
    dzv = float(_dz_dv(P, v, hp))
    return DerivativePair(dZ_dP=dzp, dZ_dv=dzv,
                          dS_dP=float(_chain(P, v, hp, dzp)),
                          dS_dv=float(_chain(P, v, hp, dzv)))


def fd_derivatives(P: float, v: float, hp: Hyperparams = DEFAULT_HYPERPARAMS,
                   h: float = 1e-6) -> DerivativePair:
    """Central-difference estimates of the same four partials.

    Where a symmetric stencil would leave P in (eps, 1-eps) or v in (0, 1],
    degrades to a one-sided difference and sets the corresponding flag.
    """
    if h <= 0:
        raise ValueError(f"step h must be > 0, got {h!r}")
    eps = hp.epsilon_clip

    def stencil(lo, hi, x):
        if x - h > lo and x + h < hi:
            return x - h, x + h, False
        if x + h < hi:
            return x, x + h, True
        if x - h > lo:
            return x - h, x, True
        raise ValueError(f"step h={h!r} too large for domain ({lo}, {hi}) at {x!r}")

    p0, p1, one_sided_p = stencil(eps, 1.0 - eps, P)
    v0, v1, one_sided_v = stencil(0.0, 1.0 + 1e-15, v)  # v = 1 is admissible

    z_p0, z_p1 = balance(p0, v, hp), balance(p1, v, hp)
    z_v0, z_v1 = balance(P, v0, hp), balance(P, v1, hp)
    s_p0, s_p1 = score(p0, v, hp), score(p1, v, hp)
    s_v0, s_v1 = score(P, v0, hp), score(P, v1, hp)
    return DerivativePair(
        dZ_dP=(z_p1 - z_p0) / (p1 - p0),
        dZ_dv=(z_v1 - z_v0) / (v1 - v0),
        dS_dP=(s_p1 - s_p0) / (p1 - p0),
        dS_dv=(s_v1 - s_v0) / (v1 - v0),
        one_sided_P=one_sided_p,
        one_sided_v=one_sided_v,
    )


@dataclass(frozen=True)
class GridSpec:
    """Scan grid over the (P, v) box, repeated for each capacity E."""

    p_start: float = 0.1
    p_stop: float = 0.99
    p_step: float = 0.01
    v_start: float = 0.05
    v_stop: float = 1.0
    v_step: float = 0.01
    e_values: tuple[int, ...] = (4, 8, 16, 32)

    def p_axis(self) -> np.ndarray:
        n = int(round((self.p_stop - self.p_start) / self.p_step)) + 1
        return self.p_start + self.p_step * np.arange(n)

    def v_axis(self) -> np.ndarray:
        n = int(round((self.v_stop - self.v_start) / self.v_step)) + 1
        return self.v_start + self.v_step * np.arange(n)

    def to_dict(self) -> dict:
        return {"p": [self.p_start, self.p_stop, self.p_step],
                "v": [self.v_start, self.v_stop, self.v_step],
                "e_values": list(self.e_values)}


@dataclass(frozen=True)
class OptimumPoint:
    E: int
    P: float
    v_star: float
    sea_at_v_star: float
    at_boundary: bool


@dataclass
class RegionReport:
    """Outcome of the grid scan; zero counts under defaults means the surface
    satisfies the monotonicity constraints on the stated grid."""

    grid_spec: GridSpec
    monotone_P_violations: int
    low_P_monotone_v_violations: int
    low_p_max: float
    tolerance: float
    min_dZ_dP: float
    optimum_map: list[OptimumPoint] = field(default_factory=list)
    zero_contour: list[tuple[float, float]] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return self.monotone_P_violations == 0 and self.low_P_monotone_v_violations == 0

    def to_dict(self) -> dict:
        return {
            "grid_spec": self.grid_spec.to_dict(),
            "monotone_P_violations": self.monotone_P_violations,
            "low_P_monotone_v_violations": self.low_P_monotone_v_violations,
            "low_p_max": self.low_p_max,
            "tolerance": self.tolerance,
            "min_dZ_dP": self.min_dZ_dP,
            "passed": self.passed,
            "optimum_map": [{"E": o.E, "P": o.P, "v_star": o.v_star,
                             "sea_at_v_star": o.sea_at_v_star,
                             "at_boundary": o.at_boundary}
                            for o in self.optimum_map],
            "zero_contour": [{"P": p, "v": v} for p, v in self.zero_contour],
        }

    def to_json(self, **kwargs) -> str:
        kwargs.setdefault("indent", 2)
        return json.dumps(self.to_dict(), **kwargs)


def verify_monotonicity(grid: GridSpec = GridSpec(),
                        hp: Hyperparams = DEFAULT_HYPERPARAMS,
                        low_p_max: float = 0.3,
                        tolerance: float = -1e-9,
                        optimum_p_levels: tuple[float, ...] = (0.1, 0.3, 0.5, 0.7, 0.9)) -> RegionReport:
    """Scan the grid for constraint violations and summarize the surface.

    Counts points with dZ/dP < tolerance (recognizability monotonicity) and,
    restricted to P <= low_p_max, points with dZ/dv > -tolerance (extra detail
    must not raise the score when recognizability is low). The grid scan is
    repeated per capacity in e_values; v parametrizes the surface, so the
    scan is identical across capacities, but the counts keep the stated
    protocol intact.
    """
    p = grid.p_axis()
    v = grid.v_axis()
    pp, vv = np.meshgrid(p, v, indexing="ij")
    monotone_p = 0
    low_p_v = 0
    min_dzdp = math.inf
    for _ in grid.e_values:
        dzdp = _dz_dp(pp, vv, hp)
        monotone_p += int(np.count_nonzero(dzdp < tolerance))
        min_dzdp = min(min_dzdp, float(dzdp.min()))
        low_mask = pp <= low_p_max
        dzdv = _dz_dv(pp[low_mask], vv[low_mask], hp)
        low_p_v += int(np.count_nonzero(dzdv > -tolerance))

    optima = []
    for e in grid.e_values:
        for pl in optimum_p_levels:
            v_opt, s_opt, at_boundary = _v_star(float(pl), hp)
            optima.append(OptimumPoint(E=e, P=float(pl), v_star=v_opt,
                                       sea_at_v_star=s_opt, at_boundary=at_boundary))
    contour = zero_contour(grid, hp)
    return RegionReport(grid_spec=grid, monotone_P_violations=monotone_p,
                        low_P_monotone_v_violations=low_p_v,
                        low_p_max=low_p_max, tolerance=tolerance,
                        min_dZ_dP=min_dzdp, optimum_map=optima,
                        zero_contour=contour)


def _v_star(P: float, hp: Hyperparams, coarse_step: float = 1e-3,
            refine_tol: float = 1e-6) -> tuple[float, float, bool]:
    """Maximize the score over v in (0, 1]: coarse grid, then golden section."""
    grid = np.arange(coarse_step, 1.0 + 0.5 * coarse_step, coarse_step)
    values = score(np.full_like(grid, P), grid, hp)
    best = int(np.argmax(values))
    if best == 0:
        return float(grid[0]), float(values[0]), True
    lo = grid[best - 1]
    hi = grid[min(best + 1, len(grid) - 1)]
    # golden-section search on [lo, hi]; Z can be flat near the boundary, so
    # no Newton here
    a, b = float(lo), float(hi)
    c = b - GOLDEN_RATIO_STEP * (b - a)
    d = a + GOLDEN_RATIO_STEP * (b - a)
    fc = score(P, c, hp)
    fd = score(P, d, hp)
    while (b - a) > refine_tol:
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN_RATIO_STEP * (b - a)
            fc = score(P, c, hp)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN_RATIO_STEP * (b - a)
            fd = score(P, d, hp)
    v_opt = 0.5 * (a + b)
    return float(v_opt), float(score(P, v_opt, hp)), False


def find_v_star(E: int, P: float,
                hp: Hyperparams = DEFAULT_HYPERPARAMS) -> OptimumPoint:
    """Location and value of the score maximum over v in (0, 1] at fixed P.

    When the maximum sits at the left end of the searched range (a monotone
    decreasing curve), the point is reported there with `at_boundary` set.
    """
    eps = hp.epsilon_clip
    if not (eps < P < 1.0 - eps):
        raise BoundaryError(f"P={P!r} is not interior to ({eps}, {1.0 - eps})")
    v_opt, s_opt, at_boundary = _v_star(P, hp)
    return OptimumPoint(E=int(E), P=float(P), v_star=v_opt,
                        sea_at_v_star=s_opt, at_boundary=at_boundary)


def zero_contour(grid: GridSpec = GridSpec(),
                 hp: Hyperparams = DEFAULT_HYPERPARAMS) -> list[tuple[float, float]]:
    """Linear-interpolated (P, v) crossings of score = 0 along grid columns.

    One column = one fixed v; crossings are located between consecutive P
    samples whose scores change sign.
    """
    p = grid.p_axis()
    v = grid.v_axis()
    pp, vv = np.meshgrid(p, v, indexing="ij")
    s = np.asarray(score(pp, vv, hp))
    points: list[tuple[float, float]] = []
    for j, v_val in enumerate(v):
        col = s[:, j]
        for i in range(len(p) - 1):
            s0, s1 = col[i], col[i + 1]
            if s0 == 0.0:
                points.append((float(p[i]), float(v_val)))
            elif s0 * s1 < 0.0:
                p_cross = p[i] + (p[i + 1] - p[i]) * (-s0) / (s1 - s0)
                points.append((float(p_cross), float(v_val)))
        if col[-1] == 0.0:
            points.append((float(p[-1]), float(v_val)))
    return points


def contour_to_csv(points: list[tuple[float, float]]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["P", "v"])
    for p_val, v_val in points:
        writer.writerow([repr(p_val), repr(v_val)])
    return buf.getvalue()
