"""One-dimensional sweeps and hyperparameter-ablation heatmaps.

`run_sweep` traces the score against the visual ratio at fixed
recognizability levels. `run_heatmap` evaluates the full (v, P) surface for a
grid of hyperparameter variants: five rows, one per parameter group
(alpha | beta | lambda/eta/k | tau/r | gamma), three columns (halved,
default, doubled). Both are pure; equal specs give byte-identical outputs.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass, field

import numpy as np

from .core import DEFAULT_HYPERPARAMS, Hyperparams, score
from . import svgplot

__all__ = [
    "SweepSpec",
    "SweepTable",
    "AblationRow",
    "HeatmapSpec",
    "HeatmapResult",
    "default_ablation_rows",
    "run_sweep",
    "run_heatmap",
    "render_svg",
    "saturation_fraction",
    "diagonal_band_width",
]

ABLATION_GROUPS: tuple[tuple[str, tuple[str, ...]], ...] = (
    ("alpha", ("alpha",)),
    ("beta", ("beta",)),
    ("lambda_eta_k", ("lambda_", "eta", "k")),
    ("tau_r", ("tau", "r")),
    ("gamma", ("gamma",)),
)


@dataclass(frozen=True)
class SweepSpec:
    v_start: float = 0.05
    v_stop: float = 1.0
    v_step: float = 0.005
    p_levels: tuple[float, ...] = (0.3, 0.5, 0.8)
    E: int = 10
    hp: Hyperparams = DEFAULT_HYPERPARAMS

    def __post_init__(self) -> None:
        if not (0.0 < self.v_start <= self.v_stop <= 1.0):
            raise ValueError(f"need 0 < v_start <= v_stop <= 1, got [{self.v_start}, {self.v_stop}]")
        if self.v_step <= 0:
            raise ValueError(f"v_step must be > 0, got {self.v_step!r}")

    def v_axis(self) -> np.ndarray:
        n = int(round((self.v_stop - self.v_start) / self.v_step)) + 1
        return self.v_start + self.v_step * np.arange(n)


@dataclass(frozen=True)
class SweepTable:
    """Dense (P_level, v, sea) table, one row block per recognizability level."""

    p_levels: tuple[float, ...]
    v: np.ndarray
    sea: np.ndarray  # shape (len(p_levels), len(v))

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["P_level", "v", "sea"])
        for i, p in enumerate(self.p_levels):
            for j in range(len(self.v)):
                writer.writerow([repr(float(p)), repr(float(self.v[j])),
                                 repr(float(self.sea[i, j]))])
        return buf.getvalue()


def run_sweep(spec: SweepSpec = SweepSpec()) -> SweepTable:
    v = spec.v_axis()
    rows = np.stack([np.asarray(score(np.full_like(v, p), v, spec.hp))
                     for p in spec.p_levels])
    return SweepTable(p_levels=tuple(float(p) for p in spec.p_levels), v=v, sea=rows)


@dataclass(frozen=True)
class AblationRow:
    name: str
    low: Hyperparams
    default: Hyperparams
    high: Hyperparams


def default_ablation_rows(base: Hyperparams = DEFAULT_HYPERPARAMS,
                          low_factor: float = 0.5,
                          high_factor: float = 2.0) -> tuple[AblationRow, ...]:
    """One row per parameter group; low/high scale every member of the group."""
    rows = []
    for name, fields in ABLATION_GROUPS:
        low = base.replace(**{f: getattr(base, f) * low_factor for f in fields})
        high = base.replace(**{f: getattr(base, f) * high_factor for f in fields})
        rows.append(AblationRow(name=name, low=low, default=base, high=high))
    return tuple(rows)


@dataclass(frozen=True)
class HeatmapSpec:
    v_axis: tuple[float, float, int] = (0.02, 1.0, 200)
    p_axis: tuple[float, float, int] = (0.02, 0.98, 200)
    rows: tuple[AblationRow, ...] = field(default_factory=default_ablation_rows)

    def v_values(self) -> np.ndarray:
        lo, hi, n = self.v_axis
        return np.linspace(lo, hi, n)

    def p_values(self) -> np.ndarray:
        lo, hi, n = self.p_axis
        return np.linspace(lo, hi, n)


@dataclass(frozen=True)
class HeatmapResult:
    """Score grids per (row, column); grids[i][j] has shape (len(p), len(v))."""

    spec: HeatmapSpec
    row_names: tuple[str, ...]
    column_names: tuple[str, ...]
    grids: tuple[tuple[np.ndarray, ...], ...]

    def to_dict(self) -> dict:
        return {
            "v_axis": [float(x) for x in self.spec.v_values()],
            "p_axis": [float(x) for x in self.spec.p_values()],
            "rows": [
                {"name": name,
                 "columns": {col: grid.tolist()
                             for col, grid in zip(self.column_names, row_grids)}}
                for name, row_grids in zip(self.row_names, self.grids)
            ],
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)


def run_heatmap(spec: HeatmapSpec = HeatmapSpec()) -> HeatmapResult:
    v = spec.v_values()
    p = spec.p_values()
    pp, vv = np.meshgrid(p, v, indexing="ij")
    grids = []
    for row in spec.rows:
        row_grids = tuple(np.asarray(score(pp, vv, hp))
                          for hp in (row.low, row.default, row.high))
        grids.append(row_grids)
    return HeatmapResult(spec=spec,
                         row_names=tuple(r.name for r in spec.rows),
                         column_names=("low", "default", "high"),
                         grids=tuple(grids))


def render_svg(data, title: str = "") -> str:
    """Self-contained SVG for a SweepTable (line chart with legend) or a
    HeatmapResult (panel grid with a shared diverging colorbar)."""
    if isinstance(data, SweepTable):
        if data.sea.size == 0:
            raise ValueError("empty sweep table")
        series = [(f"P={p:g}", data.v, data.sea[i]) for i, p in enumerate(data.p_levels)]
        return svgplot.line_chart(series, x_label="v", y_label="score",
                                  y_range=(-1.0, 1.0), title=title)
    if isinstance(data, HeatmapResult):
        if not data.grids:
            raise ValueError("empty heatmap result")
        panels = [[(f"{name}/{col}", grid)
                   for col, grid in zip(data.column_names, row_grids)]
                  for name, row_grids in zip(data.row_names, data.grids)]
        return svgplot.heatmap_panels(panels, x_label="v", y_label="P",
                                      value_range=(-1.0, 1.0), title=title,
                                      x_extent=data.spec.v_axis[:2],
                                      y_extent=data.spec.p_axis[:2])
    raise TypeError(f"cannot render {type(data).__name__}")


def saturation_fraction(grid: np.ndarray, threshold: float = 0.99) -> float:
    """Fraction of cells pushed into the saturated extremes |score| > threshold."""
    grid = np.asarray(grid)
    return float(np.count_nonzero(np.abs(grid) > threshold)) / grid.size


def diagonal_band_width(hp: Hyperparams = DEFAULT_HYPERPARAMS,
                        center: float = 0.5, threshold: float = 0.2,
                        half_span: float = 0.6, step: float = 1e-4) -> float:
    """Measure of the near-zero band |score| < threshold along the normal of
    the v = P diagonal through (center, center).

    The normal is parametrized as (v, P) = (center - t/sqrt(2), center + t/sqrt(2));
    the returned width is the total measure of t values inside the band,
    restricted to points that stay in the admissible box.
    """
    t = np.arange(-half_span, half_span + 0.5 * step, step)
    inv_sqrt2 = 1.0 / np.sqrt(2.0)
    v = center - t * inv_sqrt2
    p = center + t * inv_sqrt2
    ok = (v > hp.epsilon_clip) & (v <= 1.0) & (p > hp.epsilon_clip) & (p < 1.0 - hp.epsilon_clip)
    s = np.asarray(score(p[ok], v[ok], hp))
    return float(np.count_nonzero(np.abs(s) < threshold)) * step
