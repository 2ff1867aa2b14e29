import json
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import (
    dims,
    graph_projection_oracle,
    random_matrix,
    random_unitary,
    scalars,
    seeds,
    spec_norm,
    transform_oracle,
)
from reglab.core import (
    ClosedRelation,
    MatrixOperator,
    Tolerances,
    adjoint_relation,
    bounded_transform,
    graph_distance,
    graph_projection,
    inverse_bounded_transform,
    is_operator_graph,
    kernel_cokernel_dims,
    matrix_from_json,
    matrix_to_json,
    projection_rank,
    relation_from_json,
    relation_to_json,
    riesz_distance,
    value_from_json,
    value_to_json,
)
from reglab.errors import NotInImageError, PreconditionError, RankAmbiguityError
from reglab.families import bounded_graph_constant


def closed_dg(l, m):
    return abs(l - m) / math.sqrt((1 + l * l) * (1 + m * m))


def closed_dr(l, m):
    return abs(l / math.sqrt(1 + l * l) - m / math.sqrt(1 + m * m))


# --- MatrixOperator / Tolerances -------------------------------------------


def test_operator_rejects_nonfinite():
    with pytest.raises(PreconditionError):
        MatrixOperator(np.array([[np.nan]]))
    with pytest.raises(PreconditionError):
        MatrixOperator(np.array([[np.inf, 0.0]]))


def test_operator_double_adjoint_is_exact(rng):
    A = MatrixOperator(random_matrix(rng, 3, 5, 7.0))
    assert np.array_equal(A.adjoint().adjoint().entries, A.entries)
    assert A.shape == (3, 5) and A.n == 5 and A.m == 3


def test_operator_is_read_only():
    A = MatrixOperator(np.eye(2))
    with pytest.raises(ValueError):
        A.entries[0, 0] = 5


def test_tolerances_validation(monkeypatch):
    with pytest.raises(PreconditionError):
        Tolerances(step_cap=1.0)
    with pytest.raises(PreconditionError):
        Tolerances(algebraic=0.0)
    monkeypatch.setenv("RGL_TOL", "1e-6")
    assert Tolerances.from_env().algebraic == 1e-6
    assert Tolerances.from_env(algebraic=1e-3).algebraic == 1e-3
    monkeypatch.setenv("RGL_TOL", "abc")
    with pytest.raises(PreconditionError):
        Tolerances.from_env()


# --- bounded transform -----------------------------------------------------


def test_bounded_transform_zero():
    d = bounded_transform(np.zeros((3, 3)))
    assert np.allclose(d.a, 0) and np.allclose(d.q, np.eye(3))


def test_bounded_transform_scalar_one():
    assert bounded_transform([[1.0]]).a[0, 0] == pytest.approx(1 / math.sqrt(2), abs=1e-15)


def test_bounded_transform_diagonal():
    d = bounded_transform(np.diag([3.0, -4.0]))
    assert np.allclose(d.a, np.diag([3 / math.sqrt(10), -4 / math.sqrt(17)]), atol=1e-14)


@given(seeds, dims, dims, st.floats(0.01, 100))
def test_bounded_transform_matches_oracle(seed, m, n, scale):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng, m, n, scale)
    d = bounded_transform(A)
    assert spec_norm(d.a - transform_oracle(A)) <= 1e-10
    assert spec_norm(d.a) < 1
    assert spec_norm(d.q - d.q.conj().T) <= 1e-12
    assert np.linalg.eigvalsh(d.q).min() > 0
    assert spec_norm(d.b - d.a @ d.q) <= 1e-12
    # q^2 = 1 - a*a
    assert spec_norm(d.q @ d.q - (np.eye(n) - d.a.conj().T @ d.a)) <= 1e-10


def test_inverse_examples():
    assert np.allclose(inverse_bounded_transform(np.zeros((2, 2))).entries, 0)
    assert inverse_bounded_transform([[1 / math.sqrt(2)]]).entries[0, 0] == pytest.approx(1.0, rel=1e-12)


def test_inverse_rejects_boundary():
    with pytest.raises(NotInImageError):
        inverse_bounded_transform([[1.0]])
    with pytest.raises(NotInImageError):
        inverse_bounded_transform(np.diag([0.5, 1.2]))


@given(seeds, st.integers(1, 8), st.integers(1, 8), st.floats(0.01, 10))
def test_round_trip(seed, m, n, scale):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng, m, n, scale)
    back = inverse_bounded_transform(bounded_transform(A).a).entries
    assert spec_norm(back - A) <= 1e-8 * max(1.0, spec_norm(A))


@given(seeds, st.integers(1, 8), st.floats(0.0, 0.99))
def test_round_trip_from_contraction(seed, n, r):
    rng = np.random.default_rng(seed)
    a = random_matrix(rng, n, n, r)
    assert spec_norm(bounded_transform(inverse_bounded_transform(a)).a - a) <= 1e-9


# --- graph projections -----------------------------------------------------


@pytest.mark.parametrize(
    "lam, expected",
    [(0.0, [[1, 0], [0, 0]]), (1.0, [[0.5, 0.5], [0.5, 0.5]]), (3.0, [[0.1, 0.3], [0.3, 0.9]])],
)
def test_graph_projection_scalars(lam, expected):
    P = graph_projection([[lam]]).projection
    assert np.allclose(P, expected, atol=1e-14)
    assert np.allclose(P, graph_projection_oracle([[lam]]), atol=1e-14)


@given(seeds, st.integers(1, 16), st.integers(1, 16), st.floats(0.01, 100))
def test_graph_projection_identities(seed, m, n, scale):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng, m, n, scale)
    R = graph_projection(A)
    P = R.projection
    assert spec_norm(P @ P - P) <= 1e-10
    assert spec_norm(P - P.conj().T) <= 1e-10
    assert R.rank() == n
    # graph vectors (z, Az) are fixed by P
    Z = np.vstack([np.eye(n), A])
    assert spec_norm(P @ Z - Z) <= 1e-9 * max(1.0, spec_norm(A))
    assert spec_norm(P - graph_projection_oracle(A)) <= 1e-9


def test_closed_relation_validation():
    with pytest.raises(PreconditionError):
        ClosedRelation(np.array([[1.0, 1.0], [0.0, 0.0]]), 1, 1)
    with pytest.raises(PreconditionError):
        ClosedRelation(np.eye(3), 1, 1)


def test_projection_rank_window():
    with pytest.raises(RankAmbiguityError):
        projection_rank(np.diag([1.0, 0.5]))
    assert projection_rank(np.diag([1.0, 0.9, 0.1])) == 2


# --- adjoint relation ------------------------------------------------------


def test_adjoint_relation_examples():
    assert np.allclose(adjoint_relation(graph_projection([[0.0]])).projection, [[1, 0], [0, 0]])
    N = np.array([[0.0, 1.0], [0.0, 0.0]])
    lhs = adjoint_relation(graph_projection(N)).projection
    assert spec_norm(lhs - graph_projection(N.T).projection) <= 1e-12
    # J(1 - P)J* sends 0 (+) H' to 0 (+) H: the everywhere-multivalued relation is self-dual
    out = adjoint_relation(ClosedRelation.vertical(2, 3))
    assert (out.n, out.m) == (3, 2)
    assert np.allclose(out.projection, ClosedRelation.vertical(3, 2).projection)
    flat = adjoint_relation(ClosedRelation.horizontal(2, 3))
    assert np.allclose(flat.projection, ClosedRelation.horizontal(3, 2).projection)


@given(seeds, dims, dims, st.floats(0.01, 100))
def test_adjoint_relation_matches_adjoint(seed, m, n, scale):
    rng = np.random.default_rng(seed)
    A = MatrixOperator(random_matrix(rng, m, n, scale))
    lhs = adjoint_relation(graph_projection(A)).projection
    assert spec_norm(lhs - graph_projection(A.adjoint()).projection) <= 1e-10


# --- distances -------------------------------------------------------------


@pytest.mark.parametrize(
    "l, m, dg, dr",
    [(0, 0, 0, 0), (0, 1, 0.70711, 0.70711), (100, -100, 0.02000, 1.99990)],
)
def test_distance_examples(l, m, dg, dr):
    assert graph_distance([[l]], [[m]]) == pytest.approx(dg, abs=5e-6)
    assert riesz_distance([[l]], [[m]]) == pytest.approx(dr, abs=5e-6)


def test_riesz_example_exact():
    assert riesz_distance([[100.0]], [[-100.0]]) == pytest.approx(200 / math.sqrt(10001), rel=1e-12)
    assert graph_distance([[100.0]], [[-100.0]]) == pytest.approx(200 / 10001, rel=1e-12)


@given(scalars, scalars)
def test_scalar_distances_match_closed_forms(l, m):
    assert abs(graph_distance([[l]], [[m]]) - closed_dg(l, m)) <= 1e-9
    assert abs(riesz_distance([[l]], [[m]]) - closed_dr(l, m)) <= 1e-9


def test_distance_shape_mismatch():
    with pytest.raises(PreconditionError):
        riesz_distance(np.eye(2), np.eye(3))
    with pytest.raises(PreconditionError):
        graph_distance(np.eye(2), np.ones((3, 2)))


@given(seeds, dims, dims)
def test_distances_symmetric_and_zero(seed, m, n):
    rng = np.random.default_rng(seed)
    A, B = random_matrix(rng, m, n, 3.0), random_matrix(rng, m, n, 5.0)
    assert riesz_distance(A, A) == 0 and graph_distance(A, A) == 0
    assert riesz_distance(A, B) == pytest.approx(riesz_distance(B, A), abs=1e-14)
    assert graph_distance(A, B) == pytest.approx(graph_distance(B, A), abs=1e-14)


@given(seeds, dims, dims)
def test_unitary_equivariance(seed, m, n):
    rng = np.random.default_rng(seed)
    A, B = random_matrix(rng, m, n, 4.0), random_matrix(rng, m, n, 2.0)
    u, v = random_unitary(rng, m), random_unitary(rng, n)
    tA, tB = u @ A @ v.conj().T, u @ B @ v.conj().T
    assert abs(riesz_distance(tA, tB) - riesz_distance(A, B)) <= 1e-10
    assert abs(graph_distance(tA, tB) - graph_distance(A, B)) <= 1e-10


def test_bounded_graph_constant_scan():
    # the scalar scan gives sqrt(1 + R^2) for |lam|, |mu| <= R
    C = bounded_graph_constant(10.0)
    assert C == pytest.approx(math.sqrt(101), rel=1e-3)


@given(seeds, dims, dims)
def test_riesz_dominates_graph_on_bounded_sets(seed, m, n):
    # provable matrix bound: d_G <= 2 (1 + R) d_R when ||A||, ||B|| <= R
    rng = np.random.default_rng(seed)
    R = 10.0
    A, B = random_matrix(rng, m, n, R * rng.random()), random_matrix(rng, m, n, R * rng.random())
    assert graph_distance(A, B) <= 2 * (1 + R) * riesz_distance(A, B) + 1e-12


# --- graph decision and kernels --------------------------------------------


def test_is_operator_graph_examples():
    d = is_operator_graph(ClosedRelation(np.diag([1.0, 0.0]), 1, 1))
    assert d.is_graph and np.allclose(d.operator.entries, 0)
    v = is_operator_graph(ClosedRelation(np.diag([0.0, 1.0]), 1, 1))
    assert not v.is_graph and v.operator is None and v.defect == 1
    s = is_operator_graph(graph_projection([[3.0]]))
    assert abs(s.operator.entries[0, 0] - 3) <= 1e-12


@given(seeds, dims, dims, st.floats(0.01, 50))
def test_graph_extraction_round_trip(seed, m, n, scale):
    rng = np.random.default_rng(seed)
    A = random_matrix(rng, m, n, scale)
    d = is_operator_graph(graph_projection(A))
    assert d.is_graph
    assert spec_norm(graph_projection(d.operator).projection - graph_projection(A).projection) <= 1e-9


def test_kernel_cokernel_examples():
    assert kernel_cokernel_dims(np.zeros((2, 3))) == (3, 2)
    assert kernel_cokernel_dims(np.eye(4)) == (0, 0)
    assert kernel_cokernel_dims(np.diag([1.0, 0.0])) == (1, 1)
    with pytest.raises(RankAmbiguityError):
        kernel_cokernel_dims(np.diag([1.0, 1e-8]))


@given(seeds, dims, dims, st.integers(0, 6))
def test_index_identity(seed, m, n, drop):
    rng = np.random.default_rng(seed)
    r = max(0, min(m, n) - drop)
    A = random_matrix(rng, m, r, 1.0) @ random_matrix(rng, r, n, 1.0) if r else np.zeros((m, n))
    ker, coker = kernel_cokernel_dims(A)
    assert ker - coker == n - m


# --- JSON ------------------------------------------------------------------


def test_json_round_trips(rng):
    A = random_matrix(rng, 2, 3, 2.0)
    assert np.array_equal(matrix_from_json(json.loads(json.dumps(matrix_to_json(A)))), A)
    R = graph_projection(A)
    back = relation_from_json(json.loads(json.dumps(relation_to_json(R))))
    assert (back.n, back.m) == (3, 2) and np.array_equal(back.projection, R.projection)
    assert isinstance(value_from_json(value_to_json(MatrixOperator(A))), MatrixOperator)
    assert isinstance(value_from_json(value_to_json(R)), ClosedRelation)
    assert matrix_to_json(np.array([[1 + 2j]])) == [[[1.0, 2.0]]]
