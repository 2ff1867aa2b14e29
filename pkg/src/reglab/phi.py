"""Twisting a graph-continuous family into a Riesz-continuous one.

A frame ``g`` carries the base projection ``p0`` onto ``H (+) 0`` to the
graph projection of ``A``.  Its restriction ``u_A = g|_{H (+) 0}`` and the
canonical isometry ``w_A = (q, a)`` both have range the graph of ``A``, so
``V_A = w_A* u_A`` is unitary and ``Phi(A) = A V_A`` satisfies
``f(Phi(A)) = p' u_A``: the bounded transform of the twisted operator is read
off the frame, which moves only as far as the graph projections do.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .core import (
    PROJECTION_CHECK_TOL,
    ClosedRelation,
    MatrixOperator,
    Tolerances,
    _tol,
    as_operator,
    as_relation,
    bounded_transform,
    graph_projection,
    hermitian_part,
    kernel_cokernel_dims,
    matrix_from_json,
    matrix_to_json,
    opnorm,
    psd_inv_sqrt,
)
from .errors import PreconditionError, RankAmbiguityError, RefinePathError
from .families import ContinuityReport, ModeFamily, OperatorFamily, ParamGrid, analyze_values


def _proj(p) -> np.ndarray:
    if isinstance(p, ClosedRelation):
        return p.projection
    if isinstance(p, MatrixOperator):
        return graph_projection(p).projection
    return np.asarray(p, dtype=np.complex128)


def projection_transport(p, q, cap: float | None = None) -> np.ndarray:
    """Unitary ``u`` with ``u p u* = q`` for nearby projections of equal rank.

    ``u = (q p + (1-q)(1-p)) (1 - (p-q)^2)^{-1/2}``, the identity when
    ``p = q`` and smooth in both arguments while ``||p - q|| < 1``.
    """
    cap = Tolerances.from_env().step_cap if cap is None else cap
    P, Q = _proj(p), _proj(q)
    if P.shape != Q.shape:
        raise PreconditionError(f"projection shapes differ: {P.shape} vs {Q.shape}")
    D = P - Q
    dist = opnorm(D)
    if dist >= cap:
        raise RefinePathError(f"projection distance {dist:.6g} >= step cap {cap}; refine path")
    eye = np.eye(P.shape[0])
    if dist == 0:
        return eye.astype(np.complex128)
    S = Q @ P + (eye - Q) @ (eye - P)
    return S @ psd_inv_sqrt(eye - D @ D)


@dataclass(frozen=True, eq=False)
class Frame:
    """Unitaries indexed by nodes.

    ``kind == "section"``: ``g_i p0 g_i* = P_i``.
    ``kind == "trivialization"``: ``u_i P_i u_i* = p0``.
    ``shape`` is the parameter grid shape; for 2-D grids ``order`` lists the
    flat node indices in the order the frame was built.
    """

    nodes: np.ndarray
    unitaries: np.ndarray
    base: np.ndarray
    kind: str = "section"
    shape: tuple = ()
    order: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "nodes", np.asarray(self.nodes, dtype=float))
        object.__setattr__(self, "unitaries", np.asarray(self.unitaries, dtype=np.complex128))
        object.__setattr__(self, "base", np.asarray(self.base, dtype=np.complex128))
        if not self.shape:
            object.__setattr__(self, "shape", (len(self.unitaries),))

    def __len__(self):
        return len(self.unitaries)

    def __getitem__(self, i) -> np.ndarray:
        return self.unitaries[i]

    def defects(self, projections) -> np.ndarray:
        out = []
        for g, P in zip(self.unitaries, projections):
            P = _proj(P)
            if self.kind == "section":
                out.append(opnorm(g @ self.base @ g.conj().T - P))
            else:
                out.append(opnorm(g @ P @ g.conj().T - self.base))
        return np.array(out)

    def unitarity_residual(self) -> float:
        eye = np.eye(self.base.shape[0])
        return max(opnorm(g.conj().T @ g - eye) for g in self.unitaries)

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "kind": self.kind,
            "shape": list(self.shape),
            "nodes": np.asarray(self.nodes).tolist(),
            "order": list(self.order),
            "base": matrix_to_json(self.base),
            "unitaries": [matrix_to_json(g) for g in self.unitaries],
        }

    @classmethod
    def from_json(cls, obj: dict) -> "Frame":
        return cls(
            np.asarray(obj["nodes"], dtype=float),
            np.array([matrix_from_json(g) for g in obj["unitaries"]]),
            matrix_from_json(obj["base"]),
            obj.get("kind", "section"),
            tuple(obj.get("shape", ())),
            tuple(obj.get("order", ())),
        )

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)


def section_along_family(projections, base=None, nodes=None, cap: float | None = None, start=None) -> Frame:
    """Chain local transports into ``g_i`` with ``g_i p0 g_i* = P_i``.

    ``g_0`` transports ``p0`` to ``P_0`` unless ``start`` supplies it;
    ``g_{i+1} = transport(P_i -> P_{i+1}) g_i``.
    """
    cap = Tolerances.from_env().step_cap if cap is None else cap
    Ps = [_proj(p) for p in projections]
    if not Ps:
        raise PreconditionError("empty projection list")
    if base is None:
        first = projections[0]
        if not isinstance(first, ClosedRelation):
            raise PreconditionError("base projection required for plain matrices")
        base = ClosedRelation.horizontal(first.n, first.m).projection
    base = _proj(base)
    if start is None:
        try:
            g = projection_transport(base, Ps[0], cap)
        except RefinePathError as exc:
            raise RefinePathError(f"base to node 0: {exc}", index=-1) from exc
    else:
        g = np.asarray(start, dtype=np.complex128)
    gs = [g]
    for i in range(len(Ps) - 1):
        try:
            T = projection_transport(Ps[i], Ps[i + 1], cap)
        except RefinePathError as exc:
            raise RefinePathError(f"step {i} -> {i + 1}: {exc}", index=i) from exc
        g = T @ g
        gs.append(g)
    nodes = np.arange(len(Ps), dtype=float) if nodes is None else nodes
    return Frame(nodes, np.array(gs), base, "section")


def straight_frame(A, cap: float | None = None, max_depth: int = 20) -> np.ndarray:
    """Frame entry for a single operator, chained along ``s -> s A``, ``s in [0, 1]``."""
    cap = Tolerances.from_env().step_cap if cap is None else cap
    A = as_operator(A)
    s = np.linspace(0.0, 1.0, 2)
    rels = [graph_projection(t * A.entries) for t in s]
    s, rels = _bisect_until_capped(lambda t: graph_projection(t * A.entries), s, rels, cap, max_depth)
    return section_along_family(rels, cap=cap).unitaries[-1]


@dataclass(frozen=True, eq=False)
class Isometry:
    entries: np.ndarray
    range_projection: ClosedRelation

    def __post_init__(self):
        V = np.asarray(self.entries, dtype=np.complex128)
        object.__setattr__(self, "entries", V)
        if opnorm(V.conj().T @ V - np.eye(V.shape[1])) > PROJECTION_CHECK_TOL:
            raise PreconditionError("columns are not orthonormal")
        if opnorm(V @ V.conj().T - self.range_projection.projection) > PROJECTION_CHECK_TOL:
            raise PreconditionError("isometry range does not match the declared projection")


def isometry_u(X, g) -> Isometry:
    """``u = g`` restricted to ``H (+) 0``; requires ``g p0 g* = P_X``."""
    R = as_relation(X)
    g = np.asarray(g, dtype=np.complex128)
    if g.shape != (R.dim, R.dim):
        raise PreconditionError(f"frame entry shape {g.shape} does not match relation dim {R.dim}")
    u = g[:, : R.n]
    if opnorm(u @ u.conj().T - R.projection) > PROJECTION_CHECK_TOL:
        raise PreconditionError("frame entry does not carry H (+) 0 onto the relation")
    return Isometry(u, R)


def w_isometry(A) -> Isometry:
    """Canonical isometry ``z -> ((1+A*A)^{-1/2} z, A (1+A*A)^{-1/2} z)`` onto the graph."""
    A = as_operator(A)
    d = bounded_transform(A)
    return Isometry(np.vstack([d.q, d.a]), graph_projection(A))


def coisometry_wstar(A) -> np.ndarray:
    """``w_A* = (sqrt(1 - a*a), a*)``.

    ``sqrt(1 - a*a)`` is taken as ``q = (1 + A*A)^{-1/2}`` from the SVD; forming
    ``1 - a*a`` explicitly loses all digits of ``q`` once ``||A||`` is large.
    """
    d = bounded_transform(A)
    return np.hstack([d.q, d.a.conj().T])


def twist_unitary(A, g) -> np.ndarray:
    """``V_A = w_A* u_A``, the unitary relating the two isometries onto the graph."""
    u = isometry_u(A, g).entries
    return coisometry_wstar(A) @ u


def phi(A, g) -> MatrixOperator:
    """``Phi(A) = A V_A``."""
    A = as_operator(A)
    return MatrixOperator(A.entries @ twist_unitary(A, g))


def phi_identity_residual(A, g) -> float:
    """``||f(Phi(A)) - p' u_A||``; zero in exact arithmetic."""
    A = as_operator(A)
    u = isometry_u(A, g).entries
    return opnorm(bounded_transform(phi(A, g)).a - u[A.n :])


def polar_twist(A, tol: Tolerances | None = None) -> tuple[MatrixOperator, np.ndarray]:
    """``A = |A| u`` with ``|A| = (A A*)^{1/2}`` positive and ``u`` unitary, so ``A u* = |A|``."""
    tol = _tol(tol)
    A = as_operator(A)
    if A.m != A.n:
        raise PreconditionError("polar twist needs a square operator")
    U, s, Vh = np.linalg.svd(A.entries)
    if s.min() <= tol.algebraic * max(1.0, s.max()):
        raise PreconditionError(f"near-singular operator (smallest singular value {s.min():.3e})")
    positive = hermitian_part((U * s) @ U.conj().T)
    return MatrixOperator(positive), U @ Vh


# ---------------------------------------------------------------------------
# families


def _bisect_until_capped(evaluate, nodes, rels, cap, max_depth):
    """Insert midpoints into intervals whose projection step reaches ``cap``."""
    nodes, rels = list(nodes), list(rels)
    depth = [0] * (len(nodes) - 1)
    while True:
        bad = [i for i in range(len(nodes) - 1) if opnorm(rels[i + 1].projection - rels[i].projection) >= cap]
        if not bad:
            return np.array(nodes), rels
        for i in reversed(bad):
            if depth[i] >= max_depth:
                raise RefinePathError(
                    f"interval [{nodes[i]}, {nodes[i + 1]}] still exceeds cap after {max_depth} bisections", index=i
                )
            mid = 0.5 * (nodes[i] + nodes[i + 1])
            nodes.insert(i + 1, mid)
            rels.insert(i + 1, as_relation(evaluate(mid)))
            depth[i : i + 1] = [depth[i] + 1, depth[i] + 1]


@dataclass
class PhiResult:
    """Twisted family on the (possibly bisected) nodes, with raw and twisted reports."""

    nodes: np.ndarray
    inputs: list
    phi: list  # MatrixOperator, or None where the input is not an operator
    contractions: np.ndarray  # p' u_i at every node
    frame: Frame
    raw: ContinuityReport
    out: ContinuityReport
    identity_residual: float
    kernel_mismatches: list = field(default_factory=list)
    refined: bool = False

    def as_family(self) -> OperatorFamily:
        values = [p if p is not None else None for p in self.phi]
        if any(v is None for v in values):
            raise PreconditionError("twisted family is undefined at relation nodes")
        if self.refined:
            raise PreconditionError("bisected nodes are not uniform; use .nodes and .phi")
        grid = ParamGrid(float(self.nodes[0]), float(self.nodes[-1]), len(self.nodes), offset=0.0)
        return OperatorFamily.explicit(values, grid)


def phi_family(F, grid: ParamGrid | None = None, tol: Tolerances | None = None, max_bisections: int = 20) -> PhiResult:
    """Apply the twist along a family with the frame built from the family itself.

    Intervals whose graph step reaches the cap are bisected (generator
    families only).  When the first graph projection is too far from
    ``H (+) 0`` the frame is started by a straight-line lead-in ``s A_0``.
    """
    tol = _tol(tol)
    if grid is not None:
        F = F.with_grid(grid)
    nodes = F.grid.nodes()
    values = [F.at(x) for x in nodes]
    rels = [as_relation(v) for v in values]
    cap = tol.step_cap
    refinable = isinstance(F, ModeFamily) or getattr(F, "refinable", True)
    steps = [opnorm(rels[i + 1].projection - rels[i].projection) for i in range(len(rels) - 1)]
    refined = False
    if steps and max(steps) >= cap:
        if not refinable:
            raise RefinePathError("graph step exceeds cap and the family cannot be re-evaluated")
        cache = dict(zip(nodes.tolist(), values))

        def evaluate(x):
            cache[x] = F.at(x)
            return cache[x]

        nodes, rels = _bisect_until_capped(evaluate, nodes, rels, cap, max_bisections)
        values = [cache[x] for x in nodes.tolist()]
        refined = True

    first = values[0]
    start = None
    base = ClosedRelation.horizontal(rels[0].n, rels[0].m).projection
    if opnorm(rels[0].projection - base) >= cap:
        if isinstance(first, ClosedRelation):
            raise RefinePathError("first node is a relation far from H (+) 0; no lead-in available", index=-1)
        start = straight_frame(first, cap, max_bisections)
    frame = section_along_family(rels, base=base, nodes=nodes, cap=cap, start=start)

    n = rels[0].n
    twisted, contractions, residual, mismatches = [], [], 0.0, []
    for i, (value, g) in enumerate(zip(values, frame.unitaries)):
        contractions.append(g[n:, :n])
        if isinstance(value, ClosedRelation):
            twisted.append(None)
            continue
        P = phi(value, g)
        twisted.append(P)
        residual = max(residual, opnorm(bounded_transform(P).a - g[n:, :n]))
        try:
            if kernel_cokernel_dims(value, tol) != kernel_cokernel_dims(P, tol):
                mismatches.append(i)
        except RankAmbiguityError:
            pass

    raw = analyze_values(nodes, values, tol)
    out_values = [P if P is not None else rels[i] for i, P in enumerate(twisted)]
    out = analyze_values(nodes, out_values, tol)
    # Riesz steps of the twisted family read off the frame where Phi is undefined
    contractions = np.array(contractions)
    d_phi = np.array([opnorm(contractions[i + 1] - contractions[i]) for i in range(len(nodes) - 1)])
    out.d_riesz = np.where(np.isnan(out.d_riesz), d_phi, out.d_riesz)
    return PhiResult(nodes, values, twisted, contractions, frame, raw, out, residual, mismatches, refined)


def phi_refinement(F, depth: int, tol: Tolerances | None = None) -> tuple[list[dict], PhiResult]:
    """Moduli of the raw and twisted families over ``depth + 1`` grid doublings."""
    grid = F.grid
    table, result = [], None
    for level in range(depth + 1):
        result = phi_family(F, grid, tol)
        table.append({
            "level": level,
            "points": grid.points,
            "step": grid.step,
            "raw_graph_modulus": result.raw.graph_modulus,
            "raw_riesz_modulus": result.raw.riesz_modulus,
            "phi_riesz_modulus": result.out.riesz_modulus,
            "identity_residual": result.identity_residual,
        })
        grid = grid.refined()
    return table, result
