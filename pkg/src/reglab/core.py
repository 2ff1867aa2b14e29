"""Finite-dimensional models of regular operators and closed relations.

A matrix of shape ``(m, n)`` is an everywhere-defined operator from
``H = C^n`` to ``H' = C^m``.  Relations are closed subspaces of
``H (+) H'`` stored as their orthogonal projections, with the ``H`` block
first.  The bounded transform ``f(A) = A (1 + A*A)^{-1/2}`` and the graph
projection give the two metrics compared throughout the package.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from .errors import (
    NotInImageError,
    NumericalError,
    PreconditionError,
    RankAmbiguityError,
)

# Validation tolerance for stored projections.  Looser than the algebraic
# default because transported projections accumulate rounding along paths.
PROJECTION_CHECK_TOL = 1e-8


@dataclass(frozen=True)
class Tolerances:
    """Central numerical knobs.

    ``algebraic`` is the relative tolerance used by rank and image tests,
    ``rank_threshold +/- rank_window`` is the forbidden eigenvalue window
    for projection rank decisions and ``step_cap`` bounds the projection
    distance a single transport may bridge.
    """

    algebraic: float = 1e-9
    rank_threshold: float = 0.5
    rank_window: float = 0.25
    step_cap: float = 0.9

    def __post_init__(self):
        for name in ("algebraic", "rank_threshold", "rank_window", "step_cap"):
            if not getattr(self, name) > 0:
                raise PreconditionError(f"tolerance {name} must be strictly positive")
        if not self.step_cap < 1:
            raise PreconditionError("step_cap must be < 1")
        if not self.rank_window < min(self.rank_threshold, 1 - self.rank_threshold):
            raise PreconditionError("rank window must lie strictly inside (0, 1)")

    @classmethod
    def from_env(cls, **overrides) -> "Tolerances":
        """Defaults, with ``RGL_TOL`` overriding the algebraic tolerance."""
        env = os.environ.get("RGL_TOL")
        if env and "algebraic" not in overrides:
            try:
                overrides["algebraic"] = float(env)
            except ValueError as exc:
                raise PreconditionError(f"RGL_TOL is not a number: {env!r}") from exc
        return cls(**overrides)


def _tol(tol: Tolerances | None) -> Tolerances:
    return tol if tol is not None else Tolerances.from_env()


# ---------------------------------------------------------------------------
# small dense helpers


def hermitian_part(M: np.ndarray) -> np.ndarray:
    return (M + M.conj().T) / 2


def hermitian_function(M: np.ndarray, fn) -> np.ndarray:
    """Apply ``fn`` to the eigenvalues of the Hermitian part of ``M``."""
    try:
        w, V = np.linalg.eigh(hermitian_part(M))
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"Hermitian eigendecomposition failed: {exc}") from exc
    return hermitian_part((V * fn(w)) @ V.conj().T)


def psd_sqrt(M: np.ndarray) -> np.ndarray:
    return hermitian_function(M, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def psd_inv_sqrt(M: np.ndarray, floor: float = 0.0) -> np.ndarray:
    def fn(w):
        if np.any(w <= floor):
            raise NumericalError(f"matrix is not positive definite (min eigenvalue {w.min():.3e})")
        return 1.0 / np.sqrt(w)

    return hermitian_function(M, fn)


def opnorm(M: np.ndarray) -> float:
    """Spectral norm; 0 for empty matrices."""
    M = np.asarray(M)
    if M.size == 0:
        return 0.0
    return float(np.linalg.svd(M, compute_uv=False)[0])


def _svd(M: np.ndarray, full_matrices: bool = True):
    try:
        return np.linalg.svd(M, full_matrices=full_matrices)
    except np.linalg.LinAlgError as exc:
        raise NumericalError(f"singular value decomposition failed: {exc}") from exc


def _frozen(arr) -> np.ndarray:
    out = np.array(arr, dtype=np.complex128)
    out.setflags(write=False)
    return out


# ---------------------------------------------------------------------------
# domain types


@dataclass(frozen=True, eq=False)
class MatrixOperator:
    """Complex ``(m, n)`` matrix viewed as an operator ``C^n -> C^m``."""

    entries: np.ndarray

    def __post_init__(self):
        arr = np.array(self.entries, dtype=np.complex128)
        if arr.ndim != 2 or 0 in arr.shape:
            raise PreconditionError(f"operator must be a non-empty 2-D matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise PreconditionError("operator entries must be finite")
        arr.setflags(write=False)
        object.__setattr__(self, "entries", arr)

    @property
    def n(self) -> int:
        return self.entries.shape[1]

    @property
    def m(self) -> int:
        return self.entries.shape[0]

    @property
    def shape(self) -> tuple[int, int]:
        return self.entries.shape

    def adjoint(self) -> "MatrixOperator":
        return MatrixOperator(self.entries.conj().T)

    def norm(self) -> float:
        return opnorm(self.entries)

    def __repr__(self):
        return f"MatrixOperator(shape={self.shape})"


def as_operator(A) -> MatrixOperator:
    if isinstance(A, MatrixOperator):
        return A
    return MatrixOperator(np.atleast_2d(np.asarray(A)))


@dataclass(frozen=True, eq=False)
class ClosedRelation:
    """Closed subspace of ``C^n (+) C^m`` held as its orthogonal projection."""

    projection: np.ndarray
    n: int
    m: int

    def __post_init__(self):
        P = _frozen(self.projection)
        d = self.n + self.m
        if P.shape != (d, d):
            raise PreconditionError(f"projection shape {P.shape} does not match dims ({self.n}, {self.m})")
        if not np.all(np.isfinite(P)):
            raise PreconditionError("projection entries must be finite")
        # Frobenius norms bound the spectral norm and skip an SVD
        if np.linalg.norm(P - P.conj().T) > PROJECTION_CHECK_TOL:
            raise PreconditionError("relation projection is not self-adjoint")
        if np.linalg.norm(P @ P - P) > PROJECTION_CHECK_TOL:
            raise PreconditionError("relation projection is not idempotent")
        object.__setattr__(self, "projection", P)

    @property
    def dim(self) -> int:
        return self.n + self.m

    def rank(self, tol: Tolerances | None = None) -> int:
        return projection_rank(self.projection, tol)

    @classmethod
    def vertical(cls, n: int, m: int) -> "ClosedRelation":
        """The subspace ``0 (+) C^m``."""
        P = np.zeros((n + m, n + m))
        P[n:, n:] = np.eye(m)
        return cls(P, n, m)

    @classmethod
    def horizontal(cls, n: int, m: int) -> "ClosedRelation":
        """The subspace ``C^n (+) 0``, i.e. the graph of the zero operator."""
        P = np.zeros((n + m, n + m))
        P[:n, :n] = np.eye(n)
        return cls(P, n, m)

    def __repr__(self):
        return f"ClosedRelation(n={self.n}, m={self.m})"


def projection_rank(P: np.ndarray, tol: Tolerances | None = None) -> int:
    """Rank of a projection, refusing eigenvalues inside the decision window."""
    tol = _tol(tol)
    w = np.linalg.eigvalsh(hermitian_part(np.asarray(P)))
    lo = tol.rank_threshold - tol.rank_window
    hi = tol.rank_threshold + tol.rank_window
    bad = w[(w >= lo) & (w <= hi)]
    if bad.size:
        raise RankAmbiguityError(f"projection eigenvalue(s) {bad} inside rank window [{lo}, {hi}]")
    return int(np.count_nonzero(w > tol.rank_threshold))


@dataclass(frozen=True, eq=False)
class BoundedTransformData:
    """``a = f(A)``, ``q = (1 - a*a)^{1/2} = (1 + A*A)^{-1/2}`` and ``b = a q``."""

    a: np.ndarray
    q: np.ndarray
    b: np.ndarray


# ---------------------------------------------------------------------------
# operations


def bounded_transform(A) -> BoundedTransformData:
    """Bounded transform of ``A`` together with ``q`` and ``b``.

    Computed from the SVD of ``A`` so that ``s / sqrt(1 + s^2)`` is formed
    per singular value; this keeps ``||a|| < 1`` exactly and ``q`` Hermitian.
    """
    A = as_operator(A)
    m, n = A.shape
    U, s, Vh = _svd(A.entries)
    k = s.size
    scale = np.hypot(1.0, s)
    a = (U[:, :k] * (s / scale)) @ Vh[:k]
    s_dom = np.zeros(n)
    s_dom[:k] = s
    Vv = Vh.conj().T
    q = hermitian_part((Vv * (1.0 / np.hypot(1.0, s_dom))) @ Vh)
    b = a @ q
    return BoundedTransformData(_frozen(a), _frozen(q), _frozen(b))


def inverse_bounded_transform(a, tol: Tolerances | None = None) -> MatrixOperator:
    """Recover ``A = a (1 - a*a)^{-1/2}`` from a strict contraction."""
    tol = _tol(tol)
    a = np.atleast_2d(np.asarray(a, dtype=np.complex128))
    if not np.all(np.isfinite(a)):
        raise PreconditionError("contraction entries must be finite")
    U, s, Vh = _svd(a)
    k = s.size
    if k and s.max() >= 1 - tol.algebraic:
        raise NotInImageError(
            f"||a|| = {s.max():.12g} is not below 1 - tol; not in the open image of the bounded transform"
        )
    A = (U[:, :k] * (s / np.sqrt((1 - s) * (1 + s)))) @ Vh[:k]
    return MatrixOperator(A)


def graph_projection(A) -> ClosedRelation:
    """Orthogonal projection onto the graph ``{(z, Az)}``: blocks ``[[q^2, b*], [b, a a*]]``."""
    return graph_projection_and_transform(A)[0]


def graph_projection_and_transform(A) -> tuple[ClosedRelation, BoundedTransformData]:
    A = as_operator(A)
    d = bounded_transform(A)
    n = A.n
    P = np.empty((A.n + A.m, A.n + A.m), dtype=np.complex128)
    P[:n, :n] = d.q @ d.q
    P[:n, n:] = d.b.conj().T
    P[n:, :n] = d.b
    P[n:, n:] = d.a @ d.a.conj().T
    return ClosedRelation(hermitian_part(P), A.n, A.m), d


def as_relation(X) -> ClosedRelation:
    if isinstance(X, ClosedRelation):
        return X
    return graph_projection(X)


def swap_matrix(n: int, m: int) -> np.ndarray:
    """``J(x, y) = (-y, x)`` from ``C^n (+) C^m`` to ``C^m (+) C^n``."""
    J = np.zeros((m + n, n + m))
    J[:m, n:] = -np.eye(m)
    J[m:, :n] = np.eye(n)
    return J


def adjoint_relation(R) -> ClosedRelation:
    """Adjoint relation ``J (1 - P) J*`` living in ``C^m (+) C^n``."""
    R = as_relation(R)
    J = swap_matrix(R.n, R.m)
    P = J @ (np.eye(R.dim) - R.projection) @ J.T
    return ClosedRelation(hermitian_part(P), R.m, R.n)


def riesz_distance(A, B) -> float:
    A, B = as_operator(A), as_operator(B)
    if A.shape != B.shape:
        raise PreconditionError(f"shape mismatch {A.shape} vs {B.shape}")
    return opnorm(bounded_transform(A).a - bounded_transform(B).a)


def graph_distance(X, Y) -> float:
    X, Y = as_relation(X), as_relation(Y)
    if (X.n, X.m) != (Y.n, Y.m):
        raise PreconditionError(f"relation dims mismatch ({X.n}, {X.m}) vs ({Y.n}, {Y.m})")
    return opnorm(X.projection - Y.projection)


@dataclass(frozen=True)
class GraphDecision:
    is_graph: bool
    operator: MatrixOperator | None
    defect: int  # dim of range(P) meeting 0 (+) H'
    rank: int


def is_operator_graph(R, tol: Tolerances | None = None) -> GraphDecision:
    """Decide whether a relation is the graph of an everywhere-defined operator.

    A graph needs rank ``n`` and no vector of the form ``(0, y)``; in that
    case the operator is ``W2 W1^{-1}`` for an orthonormal range basis
    ``W = [W1; W2]``.
    """
    tol = _tol(tol)
    R = as_relation(R)
    rank = projection_rank(R.projection, tol)
    w, V = np.linalg.eigh(hermitian_part(R.projection))
    W = V[:, w > tol.rank_threshold]
    W1, W2 = W[: R.n], W[R.n :]
    s1 = _svd(W1, full_matrices=False)[1] if rank else np.zeros(0)
    defect = rank - int(np.count_nonzero(s1 > tol.algebraic))
    if rank != R.n or defect:
        return GraphDecision(False, None, defect, rank)
    A = np.linalg.solve(W1.T, W2.T).T
    return GraphDecision(True, MatrixOperator(A), 0, rank)


def kernel_cokernel_dims(A, tol: Tolerances | None = None) -> tuple[int, int]:
    """Kernel and cokernel dimensions from singular values below ``tol * ||A||``.

    Singular values in ``(tol, 1e3 tol] * ||A||`` are too close to call.
    """
    tol = _tol(tol)
    A = as_operator(A)
    s = _svd(A.entries, full_matrices=False)[1]
    top = s.max()
    if top == 0:
        return A.n, A.m
    thr = tol.algebraic * top
    ambiguous = s[(s > thr) & (s <= 1e3 * thr)]
    if ambiguous.size:
        raise RankAmbiguityError(f"singular value(s) {ambiguous / top} (relative) inside ambiguity window")
    r = int(np.count_nonzero(s > thr))
    return A.n - r, A.m - r


# ---------------------------------------------------------------------------
# JSON encoding: row-major nested lists of [re, im] pairs


def matrix_to_json(M) -> list:
    M = np.atleast_2d(np.asarray(M, dtype=np.complex128))
    return [[[float(z.real), float(z.imag)] for z in row] for row in M]


def matrix_from_json(obj) -> np.ndarray:
    try:
        rows = [[complex(z[0], z[1]) if isinstance(z, (list, tuple)) else complex(z) for z in row] for row in obj]
        M = np.array(rows, dtype=np.complex128)
    except (TypeError, ValueError, IndexError) as exc:
        raise PreconditionError(f"malformed matrix JSON: {exc}") from exc
    if M.ndim != 2:
        raise PreconditionError("matrix JSON must be a list of rows")
    return M


def relation_to_json(R: ClosedRelation) -> dict:
    return {"projection": matrix_to_json(R.projection), "n": R.n, "m": R.m}


def relation_from_json(obj: dict) -> ClosedRelation:
    try:
        return ClosedRelation(matrix_from_json(obj["projection"]), int(obj["n"]), int(obj["m"]))
    except KeyError as exc:
        raise PreconditionError(f"relation JSON missing key {exc}") from exc


def value_to_json(X) -> dict:
    """Tagged encoding of an operator or relation."""
    if isinstance(X, ClosedRelation):
        return {"relation": relation_to_json(X)}
    return {"operator": matrix_to_json(as_operator(X).entries)}


def value_from_json(obj):
    if isinstance(obj, dict) and "relation" in obj:
        return relation_from_json(obj["relation"])
    if isinstance(obj, dict) and "operator" in obj:
        return MatrixOperator(matrix_from_json(obj["operator"]))
    if isinstance(obj, dict) and "projection" in obj:
        return relation_from_json(obj)
    return MatrixOperator(matrix_from_json(obj))
