"""Canonical example families and family-spec loading."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .core import bounded_transform, matrix_from_json, opnorm, value_from_json
from .errors import PreconditionError
from .families import Mode, ModeFamily, OperatorFamily, ParamGrid

DEFAULT_GRID = ParamGrid(0.0, 1.0, 17)

# name -> default params; anything not listed is rejected
GENERATORS = {
    "pole_crossing": {"N": 1, "K": 1},
    "semibounded_drift": {"N": 8, "offset": 1.0, "drift": 1.0},
    "rotating_spectrum": {"eigenvalues": [-2.0, -1.0, 1.0, 2.0], "speed": 1.0},
    "dixmier_douady": {"m": 2, "c": None, "angles0": None, "angles1": None, "phases": None},
    "invertible_polar": {"n": 3, "min_sv": 0.1, "speed": 1.0},
}


@dataclass(frozen=True)
class GeneratorSpec:
    name: str
    params: dict = field(default_factory=dict)
    seed: int = 0

    def __post_init__(self):
        if self.name not in GENERATORS:
            raise PreconditionError(f"unknown generator {self.name!r}; choose from {sorted(GENERATORS)}")
        unknown = set(self.params) - set(GENERATORS[self.name])
        if unknown:
            raise PreconditionError(f"{self.name}: unknown parameters {sorted(unknown)}")

    def resolved(self) -> dict:
        return {**GENERATORS[self.name], **self.params}

    def to_json(self) -> dict:
        return {"generator": self.name, "params": dict(self.params), "seed": self.seed}


def _positive_int(value, name) -> int:
    if isinstance(value, bool) or int(value) != value or value < 1:
        raise PreconditionError(f"{name} must be a positive integer, got {value!r}")
    return int(value)


def _rng(seed):
    return np.random.default_rng(seed)


def _random_hermitian(rng, d) -> np.ndarray:
    G = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    H = (G + G.conj().T) / 2
    return H / np.linalg.norm(H, 2)


def random_unitary(d: int, seed: int = 0) -> np.ndarray:
    """Haar-ish unitary from the QR of a complex Gaussian matrix."""
    rng = _rng(seed)
    Q, R = np.linalg.qr(rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d)))
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def _exp_i(H, t) -> np.ndarray:
    """``exp(i t H)`` for Hermitian ``H``."""
    w, V = np.linalg.eigh(H)
    return (V * np.exp(1j * t * w)) @ V.conj().T


# ---------------------------------------------------------------------------
# generators


def pole_crossing(N: int = 1, K: int = 1, grid: ParamGrid = DEFAULT_GRID) -> ModeFamily:
    """Modes ``1/(t - 1/n)`` for ``n <= K`` and ``n`` for ``K < n <= N``."""
    N, K = _positive_int(N, "N"), _positive_int(K, "K")
    if K > N:
        raise PreconditionError(f"K = {K} exceeds N = {N}")
    modes = [Mode.pole(1.0 / n) for n in range(1, K + 1)]
    modes += [Mode.const(n) for n in range(K + 1, N + 1)]
    return ModeFamily(modes, grid, {"generator": "pole_crossing", "params": {"N": N, "K": K}})


def semibounded_drift(N: int = 8, offset: float = 1.0, drift: float = 1.0, grid: ParamGrid = DEFAULT_GRID) -> ModeFamily:
    """Modes ``n + offset - 1 + drift * t``; bounded below by ``offset`` for ``drift * t >= 0``."""
    N = _positive_int(N, "N")
    modes = [Mode.linear(n + offset - 1, drift) for n in range(1, N + 1)]
    return ModeFamily(modes, grid, {"generator": "semibounded_drift",
                                    "params": {"N": N, "offset": offset, "drift": drift}})


def rotating_spectrum(eigenvalues=(-2.0, -1.0, 1.0, 2.0), speed: float = 1.0, seed: int = 0,
                      grid: ParamGrid = DEFAULT_GRID) -> OperatorFamily:
    """``A(t) = R(t) D R(t)*`` with ``R(t) = exp(i t speed H)`` for a seeded Hermitian ``H``."""
    D = np.asarray(eigenvalues, dtype=float)
    if D.ndim != 1 or D.size < 2 or not np.all(np.isfinite(D)):
        raise PreconditionError("rotating_spectrum needs at least two finite eigenvalues")
    H = _random_hermitian(_rng(seed), D.size) * float(speed)

    def gen(t):
        R = _exp_i(H, t)
        return (R * D) @ R.conj().T

    return OperatorFamily(gen, grid, {"generator": "rotating_spectrum",
                                      "params": {"eigenvalues": D.tolist(), "speed": speed}, "seed": seed})


@dataclass(frozen=True)
class DDSpec:
    """``H = (C^2)^m``; factor ``i`` carries the line spanned by ``(cos th, e^{i ph} sin th)``."""

    m: int
    c: tuple
    angles0: tuple
    angles1: tuple
    phases: tuple

    @classmethod
    def build(cls, m=2, c=None, angles0=None, angles1=None, phases=None) -> "DDSpec":
        m = _positive_int(m, "m")
        c = tuple(float(v) for v in (c if c is not None else range(1, m + 1)))
        angles0 = tuple(float(v) for v in (angles0 if angles0 is not None else [0.0] * m))
        if angles1 is None:
            angles1 = [math.pi / 2] + [0.0] * (m - 1)
        angles1 = tuple(float(v) for v in angles1)
        phases = tuple(float(v) for v in (phases if phases is not None else [0.0] * m))
        for name, seq in (("c", c), ("angles0", angles0), ("angles1", angles1), ("phases", phases)):
            if len(seq) != m:
                raise PreconditionError(f"{name} needs {m} entries, got {len(seq)}")
            if not all(math.isfinite(v) for v in seq):
                raise PreconditionError(f"{name} must be finite")
        if any(v <= 0 for v in c):
            raise PreconditionError("c entries must be positive")
        return cls(m, c, angles0, angles1, phases)

    @property
    def A(self) -> np.ndarray:
        return np.diag(np.repeat(self.c, 2)).astype(np.complex128)

    def angles(self, x) -> np.ndarray:
        a0, a1 = np.array(self.angles0), np.array(self.angles1)
        return a0 + float(x) * (a1 - a0)

    def projection(self, x) -> np.ndarray:
        P = np.zeros((2 * self.m, 2 * self.m), dtype=np.complex128)
        for i, (th, ph) in enumerate(zip(self.angles(x), self.phases)):
            v = np.array([math.cos(th), np.exp(1j * ph) * math.sin(th)])
            P[2 * i : 2 * i + 2, 2 * i : 2 * i + 2] = np.outer(v, v.conj())
        return P

    def reflection(self, x) -> np.ndarray:
        return 2 * self.projection(x) - np.eye(2 * self.m)

    def value(self, x) -> np.ndarray:
        return self.A @ self.reflection(x)


def dixmier_douady(m=2, c=None, angles0=None, angles1=None, phases=None, grid: ParamGrid = DEFAULT_GRID) -> OperatorFamily:
    """``A(x) = A r(x)`` with ``A = diag(c_i I_2)`` and ``r = 2p - 1``."""
    dd = DDSpec.build(m, c, angles0, angles1, phases)
    params = {"m": dd.m, "c": list(dd.c), "angles0": list(dd.angles0), "angles1": list(dd.angles1),
              "phases": list(dd.phases)}
    return OperatorFamily(dd.value, grid, {"generator": "dixmier_douady", "params": params})


def invertible_polar(n: int = 3, min_sv: float = 0.1, speed: float = 1.0, seed: int = 0,
                     grid: ParamGrid = DEFAULT_GRID) -> OperatorFamily:
    """``A(t) = U diag(s) W(t)`` with every singular value ``>= min_sv``."""
    n = _positive_int(n, "n")
    if not min_sv > 0:
        raise PreconditionError("min_sv must be positive")
    rng = _rng(seed)
    s = min_sv + np.abs(rng.standard_normal(n))
    U = random_unitary(n, int(rng.integers(2**31)))
    H = _random_hermitian(rng, n) * float(speed)
    W0 = random_unitary(n, int(rng.integers(2**31)))

    def gen(t):
        return (U * s) @ _exp_i(H, t) @ W0

    return OperatorFamily(gen, grid, {"generator": "invertible_polar",
                                      "params": {"n": n, "min_sv": min_sv, "speed": speed}, "seed": seed})


_BUILDERS = {
    "pole_crossing": lambda p, seed, g: pole_crossing(p["N"], p["K"], g),
    "semibounded_drift": lambda p, seed, g: semibounded_drift(p["N"], p["offset"], p["drift"], g),
    "rotating_spectrum": lambda p, seed, g: rotating_spectrum(p["eigenvalues"], p["speed"], seed, g),
    "dixmier_douady": lambda p, seed, g: dixmier_douady(p["m"], p["c"], p["angles0"], p["angles1"], p["phases"], g),
    "invertible_polar": lambda p, seed, g: invertible_polar(p["n"], p["min_sv"], p["speed"], seed, g),
}


def generate(spec: GeneratorSpec, grid: ParamGrid | None = None):
    """Build the family described by ``spec`` on ``grid``."""
    family = _BUILDERS[spec.name](spec.resolved(), spec.seed, grid or DEFAULT_GRID)
    family.provenance["seed"] = spec.seed
    return family


# ---------------------------------------------------------------------------
# DD constancy check


def dd_constancy_check(m: int = 2, c=None, grid: ParamGrid | None = None, angles0=None, angles1=None,
                       phases=None, seed: int = 0) -> dict:
    """Right multiplication by ``r(x)`` undoes the family; conjugation cannot.

    Reports the node-wise deviation ``||A(x) r(x) - A||``, the raw end-to-end
    Riesz displacement and per-step modulus, the same for ``v A(x) v*`` with a
    fixed seeded unitary ``v``, and the modulus of the right-multiplied family.
    """
    dd = DDSpec.build(m, c, angles0, angles1, phases)
    grid = grid or DEFAULT_GRID
    nodes = grid.nodes()
    v = random_unitary(2 * dd.m, seed)
    A = dd.A
    raw, conj, right = [], [], []
    deviation = 0.0
    for x in nodes:
        Ax, r = dd.value(x), dd.reflection(x)
        fixed = Ax @ r
        deviation = max(deviation, opnorm(fixed - A))
        raw.append(bounded_transform(Ax).a)
        conj.append(bounded_transform(v @ Ax @ v.conj().T).a)
        right.append(bounded_transform(fixed).a)

    def steps(seq):
        return [opnorm(b - a) for a, b in zip(seq[:-1], seq[1:])]

    return {
        "m": dd.m,
        "c": list(dd.c),
        "points": grid.points,
        "deviation": deviation,
        "raw_displacement": opnorm(raw[-1] - raw[0]),
        "raw_modulus": max(steps(raw), default=0.0),
        "conjugated_displacement": opnorm(conj[-1] - conj[0]),
        "conjugated_modulus": max(steps(conj), default=0.0),
        "right_multiplied_modulus": max(steps(right), default=0.0),
    }


# ---------------------------------------------------------------------------
# family specs


def family_from_json(obj: dict):
    """Family from a spec dict.

    Accepted shapes: ``{"generator", "params", "grid", "seed"}``,
    ``{"modes": [...], "grid"}`` and ``{"explicit": [values], "grid"}``.
    """
    if not isinstance(obj, dict):
        raise PreconditionError("family spec must be a JSON object")
    grid = ParamGrid.from_json(obj["grid"]) if "grid" in obj else None
    if "generator" in obj:
        spec = GeneratorSpec(obj["generator"], dict(obj.get("params", {})), int(obj.get("seed", 0)))
        return generate(spec, grid)
    if "modes" in obj:
        modes = [Mode.from_json(m) for m in obj["modes"]]
        return ModeFamily(modes, grid or DEFAULT_GRID, {"generator": "modes"})
    if "explicit" in obj:
        values = []
        for v in obj["explicit"]:
            values.append(value_from_json(v) if isinstance(v, dict) else matrix_from_json(v))
        return OperatorFamily.explicit(values, grid)
    raise PreconditionError("family spec needs one of 'generator', 'modes' or 'explicit'")


def load_family(path):
    with open(path) as fh:
        try:
            obj = json.load(fh)
        except json.JSONDecodeError as exc:
            raise PreconditionError(f"{path}: invalid JSON ({exc})") from exc
    return family_from_json(obj), obj
