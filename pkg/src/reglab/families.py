"""Parametrized operator families and continuity analysis in both metrics.

Families are generators ``x -> operator | relation`` over a uniform
``ParamGrid`` so that grids can be refined on demand.  ``ModeFamily`` models
truncated diagonal operators on l^2 by scalar modes; its moduli are computed
exactly from the scalar closed forms since both metrics of a direct sum are
the supremum over the summands.
"""

from __future__ import annotations

import csv
import functools
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (
    ClosedRelation,
    MatrixOperator,
    Tolerances,
    _tol,
    as_operator,
    graph_projection_and_transform,
    kernel_cokernel_dims,
    opnorm,
)
from .errors import PreconditionError, RankAmbiguityError

GRAPH_CONTINUOUS = "graph-continuous-evidence"
RIESZ_WITNESS = "riesz-discontinuity-witness"
INCONCLUSIVE = "inconclusive"

DEFAULT_OFFSET_FRACTION = 1e-3


@dataclass(frozen=True)
class ParamGrid:
    """Uniform grid on ``[start, end]`` shifted by ``offset``.

    ``offset=None`` means ``1e-3 * step``, which keeps nodes off designated
    singular parameters such as poles placed at dyadic points.
    """

    start: float
    end: float
    points: int
    offset: float | None = None

    def __post_init__(self):
        if int(self.points) != self.points or self.points < 2:
            raise PreconditionError("grid needs at least 2 points")
        if not (math.isfinite(self.start) and math.isfinite(self.end)) or not self.end > self.start:
            raise PreconditionError("grid needs finite start < end")
        if self.offset is not None and not math.isfinite(self.offset):
            raise PreconditionError("grid offset must be finite")

    @property
    def step(self) -> float:
        return (self.end - self.start) / (self.points - 1)

    @property
    def shift(self) -> float:
        return DEFAULT_OFFSET_FRACTION * self.step if self.offset is None else float(self.offset)

    def nodes(self) -> np.ndarray:
        return self.start + self.shift + self.step * np.arange(self.points)

    def refined(self) -> "ParamGrid":
        return ParamGrid(self.start, self.end, 2 * (self.points - 1) + 1, self.offset)

    def to_json(self) -> dict:
        out = {"start": self.start, "end": self.end, "points": self.points}
        if self.offset is not None:
            out["offset"] = self.offset
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "ParamGrid":
        try:
            return cls(float(obj["start"]), float(obj["end"]), int(obj["points"]),
                       None if obj.get("offset") is None else float(obj["offset"]))
        except KeyError as exc:
            raise PreconditionError(f"grid JSON missing key {exc}") from exc


# ---------------------------------------------------------------------------
# scalar closed forms


def _line(lam):
    """Unit direction (cos, sin) of the line through (1, lam); vertical for inf."""
    lam = np.asarray(lam, dtype=float)
    finite = np.isfinite(lam)
    h = np.hypot(1.0, np.where(finite, lam, 0.0))
    c = np.where(finite, 1.0 / h, 0.0)
    s = np.where(finite, np.where(finite, lam, 0.0) / h, 1.0)
    return c, s


def scalar_graph_distance(lam, mu):
    """``|lam - mu| / sqrt((1+lam^2)(1+mu^2))``; infinite arguments mean the vertical line."""
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    both = np.isfinite(lam) & np.isfinite(mu)
    lf = np.where(both, lam, 0.0)
    mf = np.where(both, mu, 0.0)
    direct = np.abs(lf - mf) / (np.hypot(1.0, lf) * np.hypot(1.0, mf))
    c1, s1 = _line(lam)
    c2, s2 = _line(mu)
    return np.where(both, direct, np.abs(c1 * s2 - s1 * c2))


def scalar_riesz_distance(lam, mu):
    """``|f(lam) - f(mu)|`` with ``f(x) = x / sqrt(1+x^2)``; nan at infinite arguments.

    Same-sign pairs use ``(lam^2 - mu^2) / (...)`` to avoid cancellation.
    """
    lam = np.asarray(lam, dtype=float)
    mu = np.asarray(mu, dtype=float)
    both = np.isfinite(lam) & np.isfinite(mu)
    lf = np.where(both, lam, 0.0)
    mf = np.where(both, mu, 0.0)
    hl, hm = np.hypot(1.0, lf), np.hypot(1.0, mf)
    same = lf * mf > 0
    denom = (np.abs(lf) * hm + np.abs(mf) * hl) * hl * hm
    with np.errstate(invalid="ignore", divide="ignore"):
        stable = np.abs(lf - mf) * np.abs(lf + mf) / np.where(same, denom, 1.0)
    apart = np.abs(lf / hl - mf / hm)
    return np.where(both, np.where(same, stable, apart), np.nan)


def scalar_distances(lam: float, mu: float) -> tuple[float, float]:
    """Graph and Riesz distance between two real scalars."""
    return float(scalar_graph_distance(lam, mu)), float(scalar_riesz_distance(lam, mu))


def _scan_nodes(lower, upper, points):
    lin = np.linspace(lower, upper, points)
    geo = lower + np.geomspace(1e-6, upper - lower, points)
    return np.unique(np.concatenate([lin, geo]))


@functools.lru_cache(maxsize=16)
def semibounded_constant(lower: float = 0.0, upper: float = 1e4, points: int = 1201) -> float:
    """Oracle scan of ``sup d_R / d_G`` over scalar pairs in ``[lower, upper]^2``."""
    x = _scan_nodes(lower, upper, points)
    best = 0.0
    for chunk in np.array_split(np.arange(x.size), max(1, x.size // 256)):
        lam = x[chunk][:, None]
        dg = scalar_graph_distance(lam, x[None, :])
        dr = scalar_riesz_distance(lam, x[None, :])
        ok = dg > 0
        if ok.any():
            best = max(best, float(np.max(dr[ok] / dg[ok])))
    return best


@functools.lru_cache(maxsize=16)
def bounded_graph_constant(radius: float = 10.0, points: int = 1201) -> float:
    """Oracle scan of ``sup d_G / d_R`` over scalar pairs in ``[-radius, radius]^2``."""
    half = _scan_nodes(0.0, radius, points // 2)
    x = np.unique(np.concatenate([-half, half]))
    best = 0.0
    for chunk in np.array_split(np.arange(x.size), max(1, x.size // 256)):
        lam = x[chunk][:, None]
        dg = scalar_graph_distance(lam, x[None, :])
        dr = scalar_riesz_distance(lam, x[None, :])
        ok = dr > 0
        if ok.any():
            best = max(best, float(np.max(dg[ok] / dr[ok])))
    return best


# ---------------------------------------------------------------------------
# mode families

_MODE_PARAMS = {
    "const": ("value",),
    "linear": ("intercept", "slope"),
    "pole": ("at", "scale", "shift"),
}


@dataclass(frozen=True)
class Mode:
    """A scalar closed-form map ``t -> a(t)``.

    ``const``: value; ``linear``: intercept + slope t;
    ``pole``: scale / (t - at) + shift, infinite exactly at ``t = at``.
    """

    kind: str
    params: tuple

    def __post_init__(self):
        if self.kind not in _MODE_PARAMS:
            raise PreconditionError(f"unknown mode kind {self.kind!r}")
        if len(self.params) != len(_MODE_PARAMS[self.kind]):
            raise PreconditionError(f"mode {self.kind} takes parameters {_MODE_PARAMS[self.kind]}")
        if not all(math.isfinite(float(p)) for p in self.params):
            raise PreconditionError("mode parameters must be finite")

    @classmethod
    def const(cls, value):
        return cls("const", (float(value),))

    @classmethod
    def linear(cls, intercept, slope):
        return cls("linear", (float(intercept), float(slope)))

    @classmethod
    def pole(cls, at, scale=1.0, shift=0.0):
        return cls("pole", (float(at), float(scale), float(shift)))

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        if self.kind == "const":
            return np.full(t.shape, self.params[0])
        if self.kind == "linear":
            return self.params[0] + self.params[1] * t
        at, scale, shift = self.params
        d = t - at
        with np.errstate(divide="ignore"):
            return np.where(d == 0, np.inf, scale / np.where(d == 0, 1.0, d) + shift)

    def to_json(self) -> dict:
        return {"kind": self.kind, **dict(zip(_MODE_PARAMS[self.kind], self.params))}

    @classmethod
    def from_json(cls, obj: dict) -> "Mode":
        kind = obj.get("kind")
        if kind not in _MODE_PARAMS:
            raise PreconditionError(f"unknown mode kind {kind!r}")
        defaults = {"scale": 1.0, "shift": 0.0}
        try:
            return cls(kind, tuple(float(obj.get(k, defaults.get(k))) for k in _MODE_PARAMS[kind]))
        except TypeError as exc:
            raise PreconditionError(f"mode {kind} missing parameters") from exc


def diagonal_relation(values) -> ClosedRelation:
    """Graph relation of ``diag(values)``; infinite entries give vertical mode blocks."""
    values = np.asarray(values, dtype=float)
    N = values.size
    c, s = _line(values)
    P = np.zeros((2 * N, 2 * N))
    idx = np.arange(N)
    P[idx, idx] = c * c
    P[idx, N + idx] = c * s
    P[N + idx, idx] = c * s
    P[N + idx, N + idx] = s * s
    return ClosedRelation(P, N, N)


@dataclass(frozen=True, eq=False)
class ModeFamily:
    """``t -> diag(a_1(t), ..., a_N(t))`` with poles giving vertical relations."""

    modes: tuple
    grid: ParamGrid
    provenance: dict = field(default_factory=lambda: {"generator": "explicit"})

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        if not self.modes:
            raise PreconditionError("mode family needs at least one mode")

    @property
    def N(self) -> int:
        return len(self.modes)

    def mode_values(self, t) -> np.ndarray:
        """Array of shape ``t.shape + (N,)``."""
        t = np.asarray(t, dtype=float)
        return np.stack([mode(t) for mode in self.modes], axis=-1)

    def at(self, x):
        vals = self.mode_values(float(x))
        if np.all(np.isfinite(vals)):
            return MatrixOperator(np.diag(vals))
        return diagonal_relation(vals)

    def with_grid(self, grid: ParamGrid) -> "ModeFamily":
        return ModeFamily(self.modes, grid, self.provenance)


@dataclass(frozen=True, eq=False)
class OperatorFamily:
    """Generator-backed family of operators or relations over a grid."""

    generator: Callable
    grid: ParamGrid
    provenance: dict = field(default_factory=lambda: {"generator": "explicit"})
    refinable: bool = True

    def at(self, x):
        value = self.generator(float(x))
        if isinstance(value, (MatrixOperator, ClosedRelation)):
            return value
        return as_operator(value)

    def values(self, grid: ParamGrid | None = None) -> list:
        grid = grid or self.grid
        return [self.at(x) for x in grid.nodes()]

    def with_grid(self, grid: ParamGrid) -> "OperatorFamily":
        if not self.refinable and grid != self.grid:
            raise PreconditionError("explicit families cannot be re-evaluated on a new grid")
        return OperatorFamily(self.generator, grid, self.provenance, self.refinable)

    @classmethod
    def constant(cls, A, grid: ParamGrid) -> "OperatorFamily":
        value = A if isinstance(A, ClosedRelation) else as_operator(A)
        return cls(lambda x: value, grid, {"generator": "constant"})

    @classmethod
    def explicit(cls, values, grid: ParamGrid | None = None) -> "OperatorFamily":
        """Wrap a list of node values; the result cannot be refined."""
        vals = [v if isinstance(v, (MatrixOperator, ClosedRelation)) else as_operator(v) for v in values]
        grid = grid or ParamGrid(0.0, 1.0, len(vals), offset=0.0)
        if grid.points != len(vals):
            raise PreconditionError(f"{len(vals)} values for a grid of {grid.points} points")
        nodes = grid.nodes()
        scale = max(1.0, float(np.max(np.abs(nodes))))

        def lookup(x):
            i = int(np.argmin(np.abs(nodes - x)))
            if abs(nodes[i] - x) > 1e-9 * scale:
                raise PreconditionError(f"x = {x} is not a node of the explicit family")
            return vals[i]

        return cls(lookup, grid, {"generator": "explicit"}, refinable=False)


def evaluate(F, x):
    """Value of a family at ``x``: an operator, or a relation at poles."""
    return F.at(x)


def _with_grid(F, grid):
    return F if grid is None or grid == F.grid else F.with_grid(grid)


# ---------------------------------------------------------------------------
# continuity analysis


@dataclass
class ContinuityReport:
    """Per-step distances on one grid level plus the refinement history."""

    nodes: np.ndarray
    d_graph: np.ndarray
    d_riesz: np.ndarray  # nan where an endpoint is not an operator
    is_graph: np.ndarray
    ker_dim: np.ndarray  # -1 where undecidable
    history: list = field(default_factory=list)
    verdict: str | None = None

    @property
    def graph_modulus(self) -> float:
        return float(np.max(self.d_graph)) if self.d_graph.size else 0.0

    @property
    def riesz_modulus(self) -> float:
        """Max Riesz step, ``inf`` if some node is not an operator."""
        if not self.d_riesz.size:
            return 0.0
        if np.any(np.isnan(self.d_riesz)):
            return math.inf
        return float(np.max(self.d_riesz))

    @property
    def step(self) -> float:
        return float(np.max(np.diff(self.nodes))) if self.nodes.size > 1 else 0.0

    def rows(self) -> list[dict]:
        out = []
        for i, x in enumerate(self.nodes):
            last = i == len(self.nodes) - 1
            dr = None if last or np.isnan(self.d_riesz[i]) else float(self.d_riesz[i])
            out.append({
                "x": float(x),
                "d_graph_step": None if last else float(self.d_graph[i]),
                "d_riesz_step": dr,
                "is_graph": bool(self.is_graph[i]),
                "ker_dim": None if self.ker_dim[i] < 0 else int(self.ker_dim[i]),
            })
        return out

    def to_csv(self, path) -> None:
        columns = ["x", "d_graph_step", "d_riesz_step", "is_graph", "ker_dim"]
        with open(path, "w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=columns, lineterminator="\n")
            writer.writeheader()
            for row in self.rows():
                writer.writerow({k: "" if v is None else (repr(v) if isinstance(v, float) else v)
                                 for k, v in row.items()})

    def summary(self) -> dict:
        return {
            "points": int(self.nodes.size),
            "step": self.step,
            "graph_modulus": self.graph_modulus,
            "riesz_modulus": None if math.isinf(self.riesz_modulus) else self.riesz_modulus,
            "verdict": self.verdict,
            "history": self.history,
        }


def _mode_kernel_dims(vals: np.ndarray, tol: Tolerances) -> np.ndarray:
    finite = np.all(np.isfinite(vals), axis=1)
    mags = np.abs(np.where(np.isfinite(vals), vals, 0.0))
    top = mags.max(axis=1, initial=0.0)
    ker = np.where(top > 0, np.count_nonzero(mags <= tol.algebraic * top[:, None], axis=1), vals.shape[1])
    return np.where(finite, ker, -1)


def _analyze_modes(F: ModeFamily, nodes: np.ndarray, tol: Tolerances) -> ContinuityReport:
    vals = F.mode_values(nodes)
    dg = scalar_graph_distance(vals[:-1], vals[1:]).max(axis=1)
    dr_modes = scalar_riesz_distance(vals[:-1], vals[1:])
    dr = np.where(np.any(np.isnan(dr_modes), axis=1), np.nan, np.nan_to_num(dr_modes).max(axis=1))
    is_graph = np.all(np.isfinite(vals), axis=1)
    return ContinuityReport(nodes, dg, dr, is_graph, _mode_kernel_dims(vals, tol))


def node_data(value, tol: Tolerances | None = None):
    """(relation, bounded transform or None, kernel dim or -1) for a node value."""
    if isinstance(value, ClosedRelation):
        return value, None, -1
    rel, data = graph_projection_and_transform(value)
    try:
        ker = kernel_cokernel_dims(value, tol)[0]
    except RankAmbiguityError:
        ker = -1
    return rel, data.a, ker


def analyze_values(nodes, values, tol: Tolerances | None = None) -> ContinuityReport:
    """Per-step distances for explicit node values (uniform or not)."""
    tol = _tol(tol)
    data = [node_data(v, tol) for v in values]
    shapes = {(r.n, r.m) for r, _, _ in data}
    if len(shapes) > 1:
        raise PreconditionError(f"family values do not share dims: {sorted(shapes)}")
    dg = np.array([opnorm(data[i + 1][0].projection - data[i][0].projection) for i in range(len(data) - 1)])
    dr = np.array([
        np.nan if data[i][1] is None or data[i + 1][1] is None else opnorm(data[i + 1][1] - data[i][1])
        for i in range(len(data) - 1)
    ])
    is_graph = np.array([a is not None for _, a, _ in data])
    ker = np.array([k for _, _, k in data], dtype=int)
    return ContinuityReport(np.asarray(nodes, dtype=float), dg, dr, is_graph, ker)


def analyze(F, grid: ParamGrid | None = None, tol: Tolerances | None = None) -> ContinuityReport:
    """Distances between consecutive nodes of ``F`` on one grid."""
    tol = _tol(tol)
    F = _with_grid(F, grid)
    nodes = F.grid.nodes()
    if isinstance(F, ModeFamily):
        return _analyze_modes(F, nodes, tol)
    return analyze_values(nodes, F.values(), tol)


def modulus(F, metric: str = "graph", grid: ParamGrid | None = None, tol: Tolerances | None = None) -> float:
    """Largest distance between consecutive grid values in the chosen metric."""
    if metric not in ("graph", "riesz"):
        raise PreconditionError(f"metric must be 'graph' or 'riesz', got {metric!r}")
    report = analyze(F, grid, tol)
    if metric == "graph":
        return report.graph_modulus
    if not np.all(report.is_graph):
        bad = report.nodes[~report.is_graph]
        raise PreconditionError(f"Riesz metric undefined at vertical-defect node(s) {bad.tolist()}")
    return report.riesz_modulus


def _decays(seq, factor):
    for prev, nxt in zip(seq[:-1], seq[1:]):
        if nxt == 0 and prev == 0:
            return False
        if nxt > 0 and prev / nxt < factor:
            return False
    return True


def refine_until(
    F,
    metric: str = "both",
    target: float = 1e-2,
    max_depth: int = 8,
    riesz_floor: float = 1.9,
    decay: float = 1.8,
    tol: Tolerances | None = None,
) -> ContinuityReport:
    """Double the grid until the moduli separate the two topologies or decay.

    A Riesz discontinuity witness needs three consecutive levels where the
    Riesz modulus stays above ``riesz_floor`` while the graph modulus shrinks
    by at least ``decay`` per doubling.  Continuity evidence needs the chosen
    modulus at or below ``target``.  Running out of depth is ``inconclusive``.
    """
    if metric not in ("graph", "riesz", "both"):
        raise PreconditionError(f"unknown metric {metric!r}")
    if max_depth < 0:
        raise PreconditionError("max_depth must be >= 0")
    history = []
    grid = F.grid
    report = None
    for depth in range(max_depth + 1):
        if depth and isinstance(F, OperatorFamily) and not F.refinable:
            break
        report = analyze(F, grid, tol)
        g, r = report.graph_modulus, report.riesz_modulus
        history.append({
            "level": depth,
            "points": grid.points,
            "step": grid.step,
            "graph_modulus": g,
            "riesz_modulus": None if math.isinf(r) else r,
        })
        report.history = list(history)
        gs = [h["graph_modulus"] for h in history[-3:]]
        rs = [math.inf if h["riesz_modulus"] is None else h["riesz_modulus"] for h in history[-3:]]
        if metric != "graph" and len(history) >= 3 and min(rs) >= riesz_floor and _decays(gs, decay):
            report.verdict = RIESZ_WITNESS
            return report
        chosen = {"graph": g, "riesz": r, "both": max(g, r)}[metric]
        if chosen <= target:
            report.verdict = GRAPH_CONTINUOUS
            return report
        grid = grid.refined()
    report.verdict = INCONCLUSIVE
    return report
