"""Self-adjoint families: spectral charts, polarizations and conjugation.

Self-adjoint families may only be conjugated, ``A -> u A u*``.  The pipeline
here covers the parameter interval by charts on which a level ``lam`` stays
in the resolvent set, chains transports of the spectral projections
``1_[lam, inf)(A_x)`` into a trivialization ``u_x`` and conjugates.

Compactness has no meaning in finite dimensions; the proxy used throughout
is the norm of a matrix restricted to the "tail" modes from ``start`` on.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import Tolerances, _tol, bounded_transform, hermitian_part, opnorm
from .errors import (
    IncompatibleChartsError,
    InconclusiveError,
    NumericalError,
    PreconditionError,
    RefinePathError,
    UncoveredNodeError,
)
from .families import (
    ContinuityReport,
    ModeFamily,
    OperatorFamily,
    ParamGrid,
    analyze_values,
    scalar_graph_distance,
    scalar_riesz_distance,
    semibounded_constant,
)
from .phi import Frame, projection_transport

POSITIVE = "essentially positive"
NEGATIVE = "essentially negative"
NEITHER = "neither"

DEFAULT_GAP_MIN = 1e-3
COMPATIBILITY_THRESHOLD = 0.1
RIESZ_CONTINUOUS_NOTE = "Riesz continuous in every trivialization"


def _check_self_adjoint(A, tol: Tolerances) -> np.ndarray:
    A = np.asarray(getattr(A, "entries", A), dtype=np.complex128)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise PreconditionError(f"self-adjoint operator must be square, got shape {A.shape}")
    if opnorm(A - A.conj().T) > tol.algebraic * max(1.0, opnorm(A)):
        raise PreconditionError("operator is not self-adjoint")
    return hermitian_part(A)


def spectral_projection(A, lam: float, gap_min: float = DEFAULT_GAP_MIN, tol: Tolerances | None = None) -> np.ndarray:
    """Projection onto eigenvectors with eigenvalue ``>= lam``."""
    tol = _tol(tol)
    H = _check_self_adjoint(A, tol)
    w, V = np.linalg.eigh(H)
    gap = float(np.min(np.abs(w - lam)))
    if gap < gap_min:
        raise PreconditionError(f"level {lam} is within {gap:.3e} of the spectrum (gap_min {gap_min})")
    W = V[:, w >= lam]
    return W @ W.conj().T


# ---------------------------------------------------------------------------
# charts


@dataclass(frozen=True, eq=False)
class SpectralChart:
    """A maximal run of consecutive nodes on which ``lam`` has gap ``>= gap_min``."""

    lam: float
    nodes: np.ndarray  # node indices
    gaps: np.ndarray

    @property
    def first(self) -> int:
        return int(self.nodes[0])

    @property
    def last(self) -> int:
        return int(self.nodes[-1])

    def __contains__(self, i) -> bool:
        return self.first <= i <= self.last

    def to_json(self) -> dict:
        return {"lam": self.lam, "nodes": [int(i) for i in self.nodes], "gaps": [float(g) for g in self.gaps]}


def _sa_values(F, grid, tol):
    if isinstance(F, (ModeFamily, OperatorFamily)):
        if grid is not None:
            F = F.with_grid(grid)
        nodes = F.grid.nodes()
        raw = [F.at(x) for x in nodes]
    else:
        raw = list(F)
        nodes = np.arange(len(raw), dtype=float)
    mats = []
    for x, v in zip(nodes, raw):
        if not hasattr(v, "entries") and not isinstance(v, np.ndarray):
            raise PreconditionError(f"node {x}: value is not an operator (pole or relation)")
        mats.append(_check_self_adjoint(v, tol))
    return nodes, mats


def chart_cover(F, candidates, gap_min: float = DEFAULT_GAP_MIN, grid: ParamGrid | None = None,
                tol: Tolerances | None = None) -> list[SpectralChart]:
    """Charts for every candidate level; every node must lie in one of them."""
    tol = _tol(tol)
    nodes, mats = _sa_values(F, grid, tol)
    spectra = [np.linalg.eigvalsh(M) for M in mats]
    charts = []
    for lam in candidates:
        gaps = np.array([np.min(np.abs(w - lam)) for w in spectra])
        ok = gaps >= gap_min
        i = 0
        while i < len(ok):
            if not ok[i]:
                i += 1
                continue
            j = i
            while j + 1 < len(ok) and ok[j + 1]:
                j += 1
            charts.append(SpectralChart(float(lam), np.arange(i, j + 1), gaps[i : j + 1]))
            i = j + 1
    covered = np.zeros(len(nodes), dtype=bool)
    for c in charts:
        covered[c.first : c.last + 1] = True
    if not covered.all():
        missing = np.flatnonzero(~covered)
        raise UncoveredNodeError(f"nodes {missing.tolist()} have no admissible level", missing.tolist())
    return sorted(charts, key=lambda c: (c.first, -c.last))


def chart_chain(charts, count: int) -> list[SpectralChart]:
    """Chart used for each step ``i -> i+1``; consecutive charts overlap on a node."""
    if count < 2:
        return []
    chain = []
    current = None
    for i in range(count - 1):
        if current is not None and i in current and i + 1 in current:
            chain.append(current)
            continue
        options = [c for c in charts if i in c and i + 1 in c]
        if not options:
            raise IncompatibleChartsError(f"no chart contains both nodes {i} and {i + 1}")
        current = max(options, key=lambda c: c.last)
        chain.append(current)
    return chain


def default_levels(mats, count: int = 3, samples: int = 9) -> list[float]:
    """Midpoints of the largest gaps in the spectra seen on a coarse scan."""
    idx = np.unique(np.linspace(0, len(mats) - 1, min(samples, len(mats))).astype(int))
    eig = np.unique(np.concatenate([np.linalg.eigvalsh(mats[i]) for i in idx]))
    if eig.size < 2:
        return [float(eig[0]) - 1.0] if eig.size else [0.0]
    gaps = np.diff(eig)
    order = np.argsort(gaps)[::-1][:count]
    return [float(0.5 * (eig[k] + eig[k + 1])) for k in order]


# ---------------------------------------------------------------------------
# tails, signs and compatibility


def default_tail_start(n_modes: int) -> int:
    return n_modes // 2


@dataclass(frozen=True)
class TailModel:
    start: int  # first tail mode (0-based)
    n_modes: int
    sup_norm: float

    def __post_init__(self):
        if not 0 <= self.start <= self.n_modes:
            raise PreconditionError(f"tail start {self.start} outside 0..{self.n_modes}")


def tail_norm(M, start: int, block_size: int = 1) -> float:
    """Norm of the rows and columns of ``M`` belonging to modes ``>= start``."""
    M = np.asarray(M)
    if M.shape[0] % block_size:
        raise PreconditionError(f"dimension {M.shape[0]} is not a multiple of block size {block_size}")
    k = start * block_size
    if k >= M.shape[0]:
        return 0.0
    return max(opnorm(M[k:, :]), opnorm(M[:, k:]))


def compact_part(A, lam: float, tail_start: int | None = None, block_size: int = 1,
                 gap_min: float = DEFAULT_GAP_MIN, tol: Tolerances | None = None):
    """``C = f(A) - (2 p_lam - 1)`` and its tail norm."""
    tol = _tol(tol)
    H = _check_self_adjoint(A, tol)
    p = spectral_projection(H, lam, gap_min, tol)
    C = hermitian_part(bounded_transform(H).a - (2 * p - np.eye(H.shape[0])))
    n_modes = H.shape[0] // block_size
    start = default_tail_start(n_modes) if tail_start is None else tail_start
    return C, TailModel(start, n_modes, tail_norm(C, start, block_size))


def sign_of_modes(values, tail_start: int | None = None, min_tail: int = 2) -> str:
    values = np.asarray(values, dtype=float)
    start = default_tail_start(values.size) if tail_start is None else tail_start
    tail = values[start:]
    if tail.size < min_tail:
        raise InconclusiveError(f"tail of {tail.size} mode(s) is too small to decide the essential sign")
    if not np.all(np.isfinite(tail)):
        raise InconclusiveError("a tail mode sits at a pole")
    if np.all(tail > 0):
        return POSITIVE
    if np.all(tail < 0):
        return NEGATIVE
    return NEITHER


def essential_sign(F: ModeFamily, tail_start: int | None = None, grid: ParamGrid | None = None,
                   min_tail: int = 2) -> str:
    """Sign pattern of the tail modes, required to be the same at every node."""
    if not isinstance(F, ModeFamily):
        raise PreconditionError("essential sign needs a mode family (tail model)")
    if grid is not None:
        F = F.with_grid(grid)
    signs = {sign_of_modes(row, tail_start, min_tail) for row in F.mode_values(F.grid.nodes())}
    if len(signs) > 1:
        raise InconclusiveError(f"essential sign changes along the family: {sorted(signs)}")
    return signs.pop()


@dataclass(frozen=True, eq=False)
class PolarizationFamily:
    nodes: np.ndarray
    projections: np.ndarray  # (k, d, d)
    lam: float | None = None
    block_size: int = 1

    def __post_init__(self):
        P = np.asarray(self.projections, dtype=np.complex128)
        object.__setattr__(self, "projections", P)
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        if P.ndim != 3 or P.shape[1] != P.shape[2]:
            raise PreconditionError("projections must have shape (k, d, d)")
        if len(self.nodes) != len(P):
            raise PreconditionError("one node per projection required")
        for i, p in enumerate(P):
            if opnorm(p - p.conj().T) > 1e-8 or opnorm(p @ p - p) > 1e-8:
                raise PreconditionError(f"node {i}: not an orthogonal projection")

    @property
    def n_modes(self) -> int:
        return self.projections.shape[1] // self.block_size

    @classmethod
    def spectral(cls, F, lam: float, grid: ParamGrid | None = None, gap_min: float = DEFAULT_GAP_MIN,
                 block_size: int = 1, tol: Tolerances | None = None) -> "PolarizationFamily":
        tol = _tol(tol)
        nodes, mats = _sa_values(F, grid, tol)
        return cls(nodes, np.array([spectral_projection(M, lam, gap_min, tol) for M in mats]), lam, block_size)


@dataclass(frozen=True)
class CompatibilityResult:
    scores: np.ndarray
    score: float
    compatible: bool
    tail_start: int


def compatibility(p: PolarizationFamily, q: PolarizationFamily, tail_start: int | None = None,
                  threshold: float = COMPATIBILITY_THRESHOLD) -> CompatibilityResult:
    """Tail norm of ``p(x) - q(x)`` at every node against ``threshold``."""
    if p.projections.shape != q.projections.shape or not np.allclose(p.nodes, q.nodes):
        raise PreconditionError("polarization families must share grid and dimension")
    if p.block_size != q.block_size:
        raise PreconditionError("polarization families use different block sizes")
    start = default_tail_start(p.n_modes) if tail_start is None else tail_start
    scores = np.array([tail_norm(a - b, start, p.block_size) for a, b in zip(p.projections, q.projections)])
    score = float(scores.max()) if scores.size else 0.0
    return CompatibilityResult(scores, score, bool(score <= threshold), start)


# ---------------------------------------------------------------------------
# trivializers


def snake_order(shape, orientation: str = "rows") -> list[int]:
    """Flat (row-major) indices of a 1-D or 2-D grid in boustrophedon order."""
    if len(shape) == 1:
        return list(range(shape[0]))
    k1, k2 = shape
    order = []
    if orientation == "rows":
        for i in range(k1):
            cols = range(k2) if i % 2 == 0 else range(k2 - 1, -1, -1)
            order.extend(i * k2 + j for j in cols)
    elif orientation == "columns":
        for j in range(k2):
            rows = range(k1) if j % 2 == 0 else range(k1 - 1, -1, -1)
            order.extend(i * k2 + j for i in rows)
    else:
        raise PreconditionError(f"unknown snake orientation {orientation!r}")
    return order


def conjugation_trivializer(projections, nodes=None, orientation: str = "rows", cap: float | None = None) -> Frame:
    """Unitaries ``u(x)`` with ``u(x) p(x) u(x)* = p(x0)`` and ``u(x0) = I``.

    ``projections`` has shape ``(k, d, d)`` or ``(k1, k2, d, d)``; 2-D grids
    are walked in snake order and ``u`` is chained along that path.
    """
    cap = Tolerances.from_env().step_cap if cap is None else cap
    P = np.asarray(projections, dtype=np.complex128)
    if P.ndim not in (3, 4):
        raise PreconditionError("projections must have shape (k, d, d) or (k1, k2, d, d)")
    shape = P.shape[:-2]
    flat = P.reshape((-1,) + P.shape[-2:])
    order = snake_order(shape, orientation)
    d = flat.shape[-1]
    us = np.empty_like(flat)
    us[order[0]] = np.eye(d)
    for prev, cur in zip(order[:-1], order[1:]):
        try:
            T = projection_transport(flat[cur], flat[prev], cap)
        except RefinePathError as exc:
            raise RefinePathError(f"step {prev} -> {cur}: {exc}", index=prev) from exc
        us[cur] = us[prev] @ T
    if nodes is None:
        nodes = np.arange(len(flat), dtype=float)
    return Frame(nodes, us, flat[order[0]], "trivialization", tuple(shape), tuple(order))


def commutation_residual(frame_a: Frame, frame_b: Frame) -> float:
    """Max ``||[u_b u_a*, p0]||``; two trivializations differ by unitaries commuting with ``p0``."""
    p0 = frame_a.base
    return max(opnorm(w @ p0 - p0 @ w) for w in (b @ a.conj().T for a, b in zip(frame_a.unitaries, frame_b.unitaries)))


# ---------------------------------------------------------------------------
# pipeline


@dataclass
class SAResult:
    nodes: np.ndarray
    values: list
    conjugated: list
    frame: Frame | None
    charts: list
    chain: list
    raw: ContinuityReport
    conj: ContinuityReport
    spectral_error: float
    adaptation_defect: float
    classification: str
    note: str = ""
    gaps: np.ndarray = field(default_factory=lambda: np.zeros(0))
    defects: np.ndarray = field(default_factory=lambda: np.zeros(0))

    def rows(self) -> list[dict]:
        out = []
        for i, x in enumerate(self.nodes):
            last = i == len(self.nodes) - 1
            out.append({
                "x": float(x),
                "gap": float(self.gaps[i]) if self.gaps.size else None,
                "defect": float(self.defects[i]) if self.defects.size else None,
                "d_riesz_raw": None if last else float(self.raw.d_riesz[i]),
                "d_riesz_conj": None if last else float(self.conj.d_riesz[i]),
            })
        return out


def make_riesz_continuous_sa(
    F,
    candidates=None,
    grid: ParamGrid | None = None,
    gap_min: float = DEFAULT_GAP_MIN,
    tail_start: int | None = None,
    threshold: float = COMPATIBILITY_THRESHOLD,
    tol: Tolerances | None = None,
) -> SAResult:
    """Conjugate a self-adjoint family by a trivialization adapted to its spectral projections."""
    tol = _tol(tol)
    classification = NEITHER
    if isinstance(F, ModeFamily):
        try:
            classification = essential_sign(F, tail_start, grid)
        except InconclusiveError:
            classification = NEITHER
    nodes, mats = _sa_values(F, grid, tol)
    if classification in (POSITIVE, NEGATIVE):
        report = analyze_values(nodes, mats, tol)
        return SAResult(nodes, mats, mats, None, [], [], report, report, 0.0, 0.0, classification,
                        RIESZ_CONTINUOUS_NOTE)

    levels = default_levels(mats) if candidates is None else list(candidates)
    charts = chart_cover(mats, levels, gap_min, tol=tol)
    chain = chart_chain(charts, len(mats))

    cache = {}

    def proj(i, lam):
        if (i, lam) not in cache:
            cache[(i, lam)] = spectral_projection(mats[i], lam, gap_min, tol)
        return cache[(i, lam)]

    if tail_start is not None:
        for a, b in zip(chain[:-1], chain[1:]):
            if a is b:
                continue
            for i in range(max(a.first, b.first), min(a.last, b.last) + 1):
                score = tail_norm(proj(i, a.lam) - proj(i, b.lam), tail_start)
                if score > threshold:
                    raise IncompatibleChartsError(
                        f"levels {a.lam} and {b.lam} differ by tail norm {score:.3g} at node {i}")

    d = mats[0].shape[0]
    us = [np.eye(d, dtype=np.complex128)]
    defects = [0.0]
    for i, chart in enumerate(chain):
        lam = chart.lam
        try:
            T = projection_transport(proj(i + 1, lam), proj(i, lam), tol.step_cap)
        except RefinePathError as exc:
            raise RefinePathError(f"spectral projection step {i} -> {i + 1}: {exc}", index=i) from exc
        us.append(us[i] @ T)
        before = us[i] @ proj(i, lam) @ us[i].conj().T
        after = us[i + 1] @ proj(i + 1, lam) @ us[i + 1].conj().T
        defects.append(opnorm(after - before))

    conjugated = [hermitian_part(u @ M @ u.conj().T) for u, M in zip(us, mats)]
    spectral_error = max(
        float(np.max(np.abs(np.linalg.eigvalsh(B) - np.linalg.eigvalsh(M)))) / max(1.0, opnorm(M))
        for B, M in zip(conjugated, mats)
    )
    if spectral_error > 1e-9:
        raise NumericalError(f"conjugation changed spectra by {spectral_error:.3e}")
    gaps = np.array([np.min(np.abs(np.linalg.eigvalsh(M) - (chain[min(i, len(chain) - 1)].lam if chain else 0.0)))
                     for i, M in enumerate(mats)])
    frame = Frame(nodes, np.array(us), proj(0, chain[0].lam) if chain else np.eye(d), "trivialization")
    return SAResult(
        nodes, mats, conjugated, frame, charts, chain,
        analyze_values(nodes, mats, tol), analyze_values(nodes, conjugated, tol),
        spectral_error, float(max(defects)), classification, gaps=gaps, defects=np.array(defects),
    )


def sa_refinement(F, depth: int, **kwargs) -> tuple[list[dict], SAResult]:
    """Raw and conjugated Riesz moduli over ``depth + 1`` grid doublings."""
    grid = F.grid
    table, result = [], None
    for level in range(depth + 1):
        result = make_riesz_continuous_sa(F, grid=grid, **kwargs)
        table.append({
            "level": level,
            "points": grid.points,
            "step": grid.step,
            "raw_riesz_modulus": result.raw.riesz_modulus,
            "conj_riesz_modulus": result.conj.riesz_modulus,
            "raw_graph_modulus": result.raw.graph_modulus,
            "spectral_error": result.spectral_error,
            "adaptation_defect": result.adaptation_defect,
        })
        grid = grid.refined()
    return table, result


# ---------------------------------------------------------------------------
# semibounded families

SEMIBOUNDED_SLACK = 1e-9


@dataclass(frozen=True)
class SemiboundedReport:
    lower_bound: float
    constant: float
    d_graph: np.ndarray
    d_riesz: np.ndarray
    max_ratio: float
    passed: bool


def semibounded_check(F, lower_bound: float = 0.0, grid: ParamGrid | None = None,
                      tol: Tolerances | None = None) -> SemiboundedReport:
    """Check Riesz steps ``<= K * graph steps`` for a family with spectra ``>= lower_bound``.

    ``K`` is the scalar oracle constant over ``[lower_bound, 1e4]^2``; a
    relative slack of ``1e-9`` absorbs rounding.
    """
    tol = _tol(tol)
    if isinstance(F, ModeFamily):
        F = F.with_grid(grid) if grid is not None else F
        vals = F.mode_values(F.grid.nodes())
        if not np.all(np.isfinite(vals)):
            raise PreconditionError("semibounded check needs operators at every node (pole found)")
        low = float(vals.min())
        dg = scalar_graph_distance(vals[:-1], vals[1:]).max(axis=1)
        dr = scalar_riesz_distance(vals[:-1], vals[1:]).max(axis=1)
    else:
        nodes, mats = _sa_values(F, grid, tol)
        low = min(float(np.linalg.eigvalsh(M).min()) for M in mats)
        report = analyze_values(nodes, mats, tol)
        dg, dr = report.d_graph, report.d_riesz
    if low < lower_bound - tol.algebraic * max(1.0, abs(lower_bound)):
        raise PreconditionError(f"spectrum reaches {low} below the bound {lower_bound}")
    K = semibounded_constant(float(lower_bound), 1e4)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratios = np.where(dg > 0, dr / np.where(dg > 0, dg, 1.0), 0.0)
    max_ratio = float(ratios.max()) if ratios.size else 0.0
    passed = bool(np.all(dr <= K * dg * (1 + SEMIBOUNDED_SLACK) + 1e-15))
    return SemiboundedReport(float(lower_bound), K, dg, dr, max_ratio if math.isfinite(max_ratio) else math.inf, passed)
