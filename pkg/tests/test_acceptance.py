"""Acceptance criteria, one test each; every test prints a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -v`` (lines are printed even
without ``-s``) or directly with ``python tests/test_acceptance.py``.
"""

import math
import sys
import time

import numpy as np
import pytest

from reglab.core import (
    adjoint_relation,
    bounded_transform,
    graph_distance,
    graph_projection,
    inverse_bounded_transform,
    kernel_cokernel_dims,
    riesz_distance,
    MatrixOperator,
)
from reglab.families import Mode, ModeFamily, ParamGrid, analyze, semibounded_constant
from reglab.gallery import dd_constancy_check, pole_crossing, rotating_spectrum
from reglab.phi import phi, phi_family, polar_twist, straight_frame
from reglab.selfadjoint import conjugation_trivializer, make_riesz_continuous_sa

RESULTS = {}


def _emit(capsys, number, title, ok, elapsed, limit, detail):
    line = f"criterion {number:2d} [{'PASS' if ok else 'FAIL'}] {title}: {detail} ({elapsed:.2f}s / {limit}s)"
    RESULTS[number] = line
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)


def _check(capsys, number, title, limit, body):
    t0 = time.perf_counter()
    ok, detail = body()
    elapsed = time.perf_counter() - t0
    passed = bool(ok) and elapsed < limit
    _emit(capsys, number, title, passed, elapsed, limit, detail)
    assert ok, detail
    assert elapsed < limit, f"runtime {elapsed:.2f}s exceeds {limit}s"


def _unitary(rng, d):
    Q, R = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def _complex(rng, m, n):
    return rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))


def _ratios(seq):
    return [a / b for a, b in zip(seq[:-1], seq[1:])]


# 1 -------------------------------------------------------------------------


def metric_oracle():
    rng = np.random.default_rng(1)
    pairs = rng.uniform(-100, 100, (1000, 2))
    err = 0.0
    for lam, mu in pairs:
        dg = abs(lam - mu) / math.sqrt((1 + lam * lam) * (1 + mu * mu))
        dr = abs(lam / math.sqrt(1 + lam * lam) - mu / math.sqrt(1 + mu * mu))
        err = max(err, abs(graph_distance([[lam]], [[mu]]) - dg), abs(riesz_distance([[lam]], [[mu]]) - dr))
    return err <= 1e-9, f"max error {err:.2e} over 1000 pairs"


def test_criterion_01_metric_oracle(capsys):
    _check(capsys, 1, "metric oracle agreement", 1.0, metric_oracle)


# 2 -------------------------------------------------------------------------


def separation_witness():
    F = pole_crossing(1, 1)
    worst_g, worst_r = 0.0, math.inf
    for k in range(4, 13):
        grid = ParamGrid(0.0, 1.0, 2**k + 1)
        r = analyze(F, grid)
        worst_g = max(worst_g, r.graph_modulus / grid.step)
        worst_r = min(worst_r, r.riesz_modulus)
    return worst_g <= 1.2 and worst_r >= 1.9, f"max graph/step {worst_g:.4f}, min Riesz {worst_r:.5f}, k = 4..12"


def test_criterion_02_separation_witness(capsys):
    _check(capsys, 2, "topology-separation witness", 5.0, separation_witness)


# 3 -------------------------------------------------------------------------


def phi_decay():
    F = pole_crossing(1, 1)
    mods, resid = [], 0.0
    for k in range(4, 11):
        res = phi_family(F, ParamGrid(0.0, 1.0, 2**k + 1))
        mods.append(res.out.riesz_modulus)
        resid = max(resid, res.identity_residual)
    worst = min(_ratios(mods))
    return worst >= 1.8 and resid <= 1e-9, f"min decay {worst:.3f}, identity residual {resid:.2e}, k = 4..10"


def test_criterion_03_phi_decay(capsys):
    _check(capsys, 3, "twisted family Riesz decay", 10.0, phi_decay)


# 4 -------------------------------------------------------------------------


def kernel_preservation():
    rng = np.random.default_rng(4)
    bad = 0
    for _ in range(200):
        m, n = rng.integers(1, 13, 2)
        r = int(rng.integers(0, min(m, n) + 1))
        A = _complex(rng, m, r) @ _complex(rng, r, n) if r else np.zeros((m, n))
        A *= 10.0 ** rng.uniform(-1, 2)
        if kernel_cokernel_dims(A) != kernel_cokernel_dims(phi(A, straight_frame(A))):
            bad += 1
    return bad == 0, f"{bad} mismatches in 200 operators"


def test_criterion_04_kernel_preservation(capsys):
    _check(capsys, 4, "kernel/cokernel preservation", 5.0, kernel_preservation)


# 5 -------------------------------------------------------------------------


def block_witness():
    n = np.arange(1, 201, dtype=float)
    F = ModeFamily([Mode.linear(k, -k * k) for k in n], ParamGrid(0.0, 0.02, 2))
    A0, A1, Ah = (F.at(t).entries for t in (0.0, 0.02, 1e-4))
    dr, dg = riesz_distance(A0, A1), graph_distance(A0, Ah)
    # per-mode closed forms as independent oracle
    a0, a1, ah = n, n * (1 - 0.02 * n), n * (1 - 1e-4 * n)
    dr_o = np.max(np.abs(a0 / np.sqrt(1 + a0**2) - a1 / np.sqrt(1 + a1**2)))
    dg_o = np.max(np.abs(a0 - ah) / np.sqrt((1 + a0**2) * (1 + ah**2)))
    ok = dr >= 1.9 and dg <= 0.02 and abs(dr - dr_o) <= 1e-9 and abs(dg - dg_o) <= 1e-9
    return ok, f"d_R(A_0, A_0.02) = {dr:.5f}, d_G(A_0, A_1e-4) = {dg:.2e}"


def test_criterion_05_block_witness(capsys):
    _check(capsys, 5, "block-family witness", 2.0, block_witness)


# 6 -------------------------------------------------------------------------


def trivializer_defect():
    def line(th):
        v = np.array([math.cos(th), math.sin(th)])
        return np.outer(v, v)

    thetas = np.linspace(0, math.pi, 65)
    path = np.array([line(t) for t in thetas])
    f1 = conjugation_trivializer(path, thetas)

    rng = np.random.default_rng(6)
    H1, H2 = (_complex(rng, 4, 4) for _ in range(2))
    H1, H2 = (H1 + H1.conj().T) / 4, (H2 + H2.conj().T) / 4
    p0 = np.diag([1.0, 1.0, 0.0, 0.0])

    def expi(H, t):
        w, V = np.linalg.eigh(H)
        return (V * np.exp(1j * t * w)) @ V.conj().T

    s = np.linspace(0, 1, 16)
    grid = np.array([[expi(H1, a) @ expi(H2, b) @ p0 @ (expi(H1, a) @ expi(H2, b)).conj().T for b in s] for a in s])
    f2 = conjugation_trivializer(grid)
    defect = max(f1.defects(path).max(), f2.defects(grid.reshape(-1, 4, 4)).max())
    unit = max(f1.unitarity_residual(), f2.unitarity_residual())
    return defect <= 1e-8 and unit <= 1e-10, f"max defect {defect:.2e}, unitarity {unit:.2e}"


def test_criterion_06_trivializer_defect(capsys):
    _check(capsys, 6, "trivializer defect", 5.0, trivializer_defect)


# 7 -------------------------------------------------------------------------


def selfadjoint_pipeline():
    F = rotating_spectrum()
    mods, spec_err = [], 0.0
    for k in range(4, 9):
        res = make_riesz_continuous_sa(F, grid=ParamGrid(0.0, 1.0, 2**k + 1))
        mods.append(res.conj.riesz_modulus)
        spec_err = max(spec_err, res.spectral_error)
    worst = min(_ratios(mods))
    return worst >= 1.8 and spec_err <= 1e-9, f"min decay {worst:.3f} over 4 doublings, spectral error {spec_err:.2e}"


def test_criterion_07_selfadjoint_pipeline(capsys):
    _check(capsys, 7, "self-adjoint pipeline", 10.0, selfadjoint_pipeline)


# 8 -------------------------------------------------------------------------


def semibounded():
    K = semibounded_constant(0.0, 1e4)
    rng = np.random.default_rng(8)
    worst = 0.0
    for _ in range(100):
        N = int(rng.integers(1, 20))
        start = rng.uniform(0, 1e3, N) * rng.random() ** 2
        end = rng.uniform(0, 1e3, N) * rng.random() ** 2
        F = ModeFamily([Mode.linear(a, b - a) for a, b in zip(start, end)], ParamGrid(0, 1, 33, offset=0.0))
        vals = F.mode_values(F.grid.nodes())
        lam, mu = vals[:-1], vals[1:]
        dg = (np.abs(lam - mu) / np.sqrt((1 + lam**2) * (1 + mu**2))).max(axis=1)
        dr = np.abs(lam / np.sqrt(1 + lam**2) - mu / np.sqrt(1 + mu**2)).max(axis=1)
        excess = np.max(dr - K * dg)
        worst = max(worst, excess)
    # closed forms are evaluated naively, so allow rounding
    return worst <= 1e-12, f"K = {K:.6f}, max (d_R - K d_G) = {worst:.2e} over 100 families"


def test_criterion_08_semibounded(capsys):
    _check(capsys, 8, "semibounded comparison", 5.0, semibounded)


# 9 -------------------------------------------------------------------------


def dd_remark():
    dev, disp = 0.0, math.inf
    for m in (1, 2, 3):
        for c1 in (2.0, 5.0):
            r = dd_constancy_check(m, c=[c1] + [1.0] * (m - 1), grid=ParamGrid(0, 1, 33))
            dev = max(dev, r["deviation"])
            disp = min(disp, r["conjugated_displacement"])
    return dev <= 1e-12 and disp >= 1.5, f"max deviation {dev:.2e}, min conjugated half-turn displacement {disp:.4f}"


def test_criterion_09_dd_remark(capsys):
    _check(capsys, 9, "constancy and conjugation asymmetry", 2.0, dd_remark)


# 10 ------------------------------------------------------------------------


def algebraic_suites():
    rng = np.random.default_rng(10)
    worst = {"round_trip": 0.0, "idempotent": 0.0, "adjoint": 0.0, "polar": 0.0}
    for _ in range(100):
        m, n = rng.integers(1, 17, 2)
        A = _complex(rng, m, n)
        A *= 10 * rng.random() / np.linalg.norm(A, 2)
        back = inverse_bounded_transform(bounded_transform(A).a).entries
        worst["round_trip"] = max(worst["round_trip"], np.linalg.norm(back - A, 2) / max(1.0, np.linalg.norm(A, 2)))
        B = A * 10
        P = graph_projection(B).projection
        worst["idempotent"] = max(worst["idempotent"], np.linalg.norm(P @ P - P, 2), np.linalg.norm(P - P.conj().T, 2))
        adj = adjoint_relation(graph_projection(B)).projection
        ref = graph_projection(MatrixOperator(B).adjoint()).projection
        worst["adjoint"] = max(worst["adjoint"], np.linalg.norm(adj - ref, 2))
        k = int(rng.integers(1, 9))
        C = _unitary(rng, k) @ np.diag(rng.uniform(0.1, 10, k)) @ _unitary(rng, k)
        pos, u = polar_twist(C)
        worst["polar"] = max(worst["polar"], np.linalg.norm(C @ u.conj().T - pos.entries, 2) / np.linalg.norm(C, 2))
    ok = (worst["round_trip"] <= 1e-8 and worst["idempotent"] <= 1e-10
          and worst["adjoint"] <= 1e-10 and worst["polar"] <= 1e-9)
    return ok, ", ".join(f"{k} {v:.1e}" for k, v in worst.items())


def test_criterion_10_algebraic_suites(capsys):
    _check(capsys, 10, "round-trip and algebraic suites", 5.0, algebraic_suites)


CRITERIA = [
    (1, "metric oracle agreement", 1.0, metric_oracle),
    (2, "topology-separation witness", 5.0, separation_witness),
    (3, "twisted family Riesz decay", 10.0, phi_decay),
    (4, "kernel/cokernel preservation", 5.0, kernel_preservation),
    (5, "block-family witness", 2.0, block_witness),
    (6, "trivializer defect", 5.0, trivializer_defect),
    (7, "self-adjoint pipeline", 10.0, selfadjoint_pipeline),
    (8, "semibounded comparison", 5.0, semibounded),
    (9, "constancy and conjugation asymmetry", 2.0, dd_remark),
    (10, "round-trip and algebraic suites", 5.0, algebraic_suites),
]


if __name__ == "__main__":
    failed = 0
    for number, title, limit, body in CRITERIA:
        try:
            _check(None, number, title, limit, body)
        except AssertionError:
            failed += 1
    sys.exit(1 if failed else 0)
