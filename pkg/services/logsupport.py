# services/logsupport.py
import logging
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from services.errors import BadParameters, DimensionMismatch, NotInPolytope, NotLowerSet, ZeroCoordinate
from services.polytope import (
    Polytope, contains, extreme_points, face_restrict, is_lower, make_polytope, support,
)
from services.report import Report
from services.settings import parallel_map

logger = logging.getLogger("LelongLab")

TWO_PI = 2.0 * np.pi
DESCENT_DEPTHS = (10.0, 20.0, 40.0)
DIVERGENCE_STEP = 1e-6


# =========================
# 1. POINTS IN LOG-POLAR FORM
# =========================
@dataclass(frozen=True, eq=False)
class CPoint:
    """
    Point of ℂⁿ as per-coordinate (log|z_j|, arg z_j).
    logmod_j = -inf encodes z_j = 0 exactly; arg is then ignored.
    """
    logmod: np.ndarray
    arg: np.ndarray

    def __post_init__(self):
        logmod = np.atleast_1d(np.asarray(self.logmod, dtype=float))
        arg = np.zeros_like(logmod) if self.arg is None else np.atleast_1d(np.asarray(self.arg, dtype=float))
        if logmod.shape != arg.shape or logmod.ndim != 1:
            raise DimensionMismatch(f"logmod {logmod.shape} and arg {arg.shape} must be equal-length vectors")
        if np.any(np.isnan(logmod)) or np.any(np.isposinf(logmod)):
            raise BadParameters(f"logmod must lie in [-inf, inf), got {logmod.tolist()}")
        if not np.all(np.isfinite(arg)):
            raise BadParameters("arg must be finite")
        object.__setattr__(self, "logmod", logmod)
        object.__setattr__(self, "arg", np.mod(arg, TWO_PI))

    @property
    def n(self) -> int:
        return len(self.logmod)

    @property
    def zeros(self) -> np.ndarray:
        return np.flatnonzero(np.isneginf(self.logmod))

    @classmethod
    def ones(cls, n: int) -> "CPoint":
        return cls(np.zeros(n), np.zeros(n))

    @classmethod
    def from_complex(cls, z) -> "CPoint":
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        with np.errstate(divide="ignore"):
            return cls(np.log(np.abs(z)), np.angle(z))

    @classmethod
    def from_modulus(cls, modulus, arg=None) -> "CPoint":
        modulus = np.atleast_1d(np.asarray(modulus, dtype=float))
        if np.any(modulus < 0):
            raise BadParameters("modulus must be non-negative")
        with np.errstate(divide="ignore"):
            return cls(np.log(modulus), arg)

    def to_complex(self) -> np.ndarray:
        return np.exp(self.logmod) * np.exp(1j * self.arg)

    def __repr__(self) -> str:
        return f"CPoint(logmod={self.logmod.tolist()}, arg={self.arg.tolist()})"


def multiply(z: CPoint, w: CPoint) -> CPoint:
    """Zw = (z₁w₁, …, zₙwₙ): log-moduli add, arguments add mod 2π."""
    if z.n != w.n:
        raise DimensionMismatch(f"cannot multiply points of dimension {z.n} and {w.n}")
    return CPoint(z.logmod + w.logmod, z.arg + w.arg)


def add(z: CPoint, w: CPoint) -> CPoint:
    if z.n != w.n:
        raise DimensionMismatch(f"cannot add points of dimension {z.n} and {w.n}")
    return CPoint.from_complex(z.to_complex() + w.to_complex())


def complex_to_logpolar(w: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
    """Batch version of CPoint.from_complex: (m, n) complex -> (logmod, arg)."""
    with np.errstate(divide="ignore"):
        return np.log(np.abs(w)), np.angle(w)


def log_dot(exponents: np.ndarray, logmod: np.ndarray) -> np.ndarray:
    """
    ⟨a_k, ξ_m⟩ for every row pair, with 0·(−∞) = 0 and a·(−∞) = −∞ for a > 0.
    exponents (k, n), logmod (m, n) -> (m, k).
    """
    hit = np.isneginf(logmod)
    out = np.where(hit, 0.0, logmod) @ exponents.T
    blocked = hit.astype(float) @ (exponents > 0).T.astype(float)
    out[blocked > 0] = -np.inf
    return out


# =========================
# 2. FUNCTION INTERFACE
# =========================
@dataclass(frozen=True)
class Growth:
    """u ≤ H_S + upper_const (L^S); H_S + lower_const ≤ u when lower_const is set (L^S_+)."""
    polytope: Polytope
    upper_const: Optional[float] = None
    lower_const: Optional[float] = None


class EvaluableFunction(ABC):
    n: int
    growth: Optional[Growth] = None

    def __call__(self, z: CPoint) -> float:
        if z.n != self.n:
            raise DimensionMismatch(f"function on ℂ^{self.n} evaluated at a point of ℂ^{z.n}")
        return self.evaluate(z)

    @abstractmethod
    def evaluate(self, z: CPoint) -> float:
        ...

    def batch(self, logmod: np.ndarray, arg: np.ndarray) -> np.ndarray:
        """Values at rows of (logmod, arg), shape (m, n) each. Subclasses vectorize."""
        points = [CPoint(lm, a) for lm, a in zip(np.atleast_2d(logmod), np.atleast_2d(arg))]
        return np.asarray(parallel_map(self.evaluate, points), dtype=float)


class _VectorizedFunction(EvaluableFunction):
    def evaluate(self, z: CPoint) -> float:
        return float(self.batch(z.logmod[None, :], z.arg[None, :])[0])


class HSFunction(_VectorizedFunction):
    """H_S itself, growth constants (0, 0)."""

    def __init__(self, polytope: Polytope):
        self.polytope = polytope
        self.n = polytope.n
        self.growth = Growth(polytope, 0.0, 0.0)

    def batch(self, logmod, arg):
        return hs_batch(self.polytope, np.atleast_2d(logmod))


class ConstantFunction(_VectorizedFunction):
    def __init__(self, value: float, n: int, polytope: Optional[Polytope] = None):
        self.value = float(value)
        self.n = n
        polytope = polytope or make_polytope(n, [])
        # H_S ≥ 0 nên c ≤ H_S + c luôn đúng; chặn dưới chỉ hợp lệ khi S = {0}
        lower = self.value if not np.any(polytope.vertices) else None
        self.growth = Growth(polytope, self.value, lower)

    def batch(self, logmod, arg):
        return np.full(len(np.atleast_2d(logmod)), self.value)


class TropicalFunction(_VectorizedFunction):
    """u(z) = max_k (⟨a_k, Log z⟩ + c_k), with the 0·(−∞) = 0 convention."""

    def __init__(self, pieces: Sequence[Tuple[Sequence[float], float]], polytope: Optional[Polytope] = None):
        if not pieces:
            raise BadParameters("a tropical function needs at least one piece")
        self.slopes = np.asarray([p[0] for p in pieces], dtype=float)
        self.offsets = np.asarray([p[1] for p in pieces], dtype=float)
        self.n = self.slopes.shape[1]
        if np.any(self.slopes < 0):
            raise NotInPolytope("tropical slopes must be non-negative")
        self.growth = None
        if polytope is not None:
            if polytope.n != self.n:
                raise DimensionMismatch(f"slopes in ℝ^{self.n}, polytope in ℝ^{polytope.n}")
            for a in self.slopes:
                if not contains(polytope, a):
                    raise NotInPolytope(f"slope {a.tolist()} is not in S")
            self.growth = Growth(polytope, float(np.max(self.offsets)), None)

    def batch(self, logmod, arg):
        return np.max(log_dot(self.slopes, np.atleast_2d(logmod)) + self.offsets, axis=1)


class PolyLogFunction(_VectorizedFunction):
    """u(z) = (1/m)·log|p(z)| for p = Σ coeff·z^α."""

    def __init__(self, monomials: Sequence[Tuple[Sequence[int], complex]], m: int = 1,
                 polytope: Optional[Polytope] = None):
        if not monomials:
            raise BadParameters("a polynomial needs at least one monomial")
        if m < 1:
            raise BadParameters(f"scale m must be a positive integer, got {m}")
        self.exponents = np.asarray([mono[0] for mono in monomials], dtype=float)
        self.coeffs = np.asarray([mono[1] for mono in monomials], dtype=complex)
        if np.any(self.exponents < 0) or np.any(self.exponents != np.round(self.exponents)):
            raise BadParameters("exponents must be non-negative integers")
        self.m = int(m)
        self.n = self.exponents.shape[1]
        self.growth = None
        if polytope is not None:
            for alpha in self.exponents:
                if not contains(polytope, alpha / self.m):
                    raise NotInPolytope(f"exponent {alpha.astype(int).tolist()}/{self.m} is not in S")
            # |p(z)| ≤ Σ|c|·e^{m·H_S(z)}
            self.growth = Growth(polytope, float(np.log(np.sum(np.abs(self.coeffs)))) / self.m, None)

    def batch(self, logmod, arg):
        logmod, arg = np.atleast_2d(logmod), np.atleast_2d(arg)
        nonzero = self.coeffs != 0
        if not np.any(nonzero):
            return np.full(len(logmod), -np.inf)
        expo, coef = self.exponents[nonzero], self.coeffs[nonzero]
        with np.errstate(divide="ignore"):
            log_terms = log_dot(expo, logmod) + np.log(np.abs(coef))
        phases = arg @ expo.T + np.angle(coef)
        top = np.max(log_terms, axis=1)
        out = np.full(len(logmod), -np.inf)
        live = np.isfinite(top)
        scaled = np.exp(log_terms[live] - top[live, None]) * np.exp(1j * phases[live])
        with np.errstate(divide="ignore"):
            out[live] = (top[live] + np.log(np.abs(scaled.sum(axis=1)))) / self.m
        return out


class ScaledFunction(_VectorizedFunction):
    """t·u for t > 0 (keeps −∞)."""

    def __init__(self, u: EvaluableFunction, t: float):
        if t <= 0:
            raise BadParameters(f"scale must be positive, got {t}")
        self.u, self.t, self.n = u, float(t), u.n
        self.growth = None
        if u.growth is not None and u.growth.upper_const is not None:
            self.growth = Growth(make_polytope(u.n, u.growth.polytope.vertices * t),
                                 self.t * u.growth.upper_const, None)

    def batch(self, logmod, arg):
        return self.t * self.u.batch(logmod, arg)


class FunctionOf(EvaluableFunction):
    """Wrap a plain callable CPoint -> float."""

    def __init__(self, fn: Callable[[CPoint], float], n: int, growth: Optional[Growth] = None):
        self.fn, self.n, self.growth = fn, n, growth

    def evaluate(self, z: CPoint) -> float:
        return float(self.fn(z))


# =========================
# 3. H_S
# =========================
def hs_batch(P: Polytope, logmod: np.ndarray) -> np.ndarray:
    """
    H_S at many points at once. A vertex with positive weight on a zero coordinate drops out,
    which leaves exactly the vertices of the face {x_J = 0}.
    """
    logmod = np.atleast_2d(np.asarray(logmod, dtype=float))
    if logmod.shape[1] != P.n:
        raise DimensionMismatch(f"points in ℂ^{logmod.shape[1]}, polytope in ℝ^{P.n}")
    return np.max(log_dot(P.vertices, logmod), axis=1)


def hs_interior(P: Polytope, z: CPoint) -> float:
    if z.n != P.n:
        raise DimensionMismatch(f"point in ℂ^{z.n}, polytope in ℝ^{P.n}")
    if len(z.zeros):
        raise ZeroCoordinate(f"coordinates {z.zeros.tolist()} are zero; use hs()")
    return support(P, z.logmod)


def hs(P: Polytope, z: CPoint) -> float:
    """H_S on all of ℂⁿ; on {z_J = 0} it is H_T at the remaining coordinates."""
    J = z.zeros
    if len(J) == 0:
        return hs_interior(P, z)
    if len(J) == P.n:
        return 0.0
    keep = [j for j in range(P.n) if j not in set(J.tolist())]
    T = face_restrict(P, J)
    return hs_interior(T, CPoint(z.logmod[keep], z.arg[keep]))


def hs_descent_values(P: Polytope, z: CPoint, depths: Sequence[float] = DESCENT_DEPTHS) -> np.ndarray:
    """φ_S(ξ′, −t·1_J) for each depth t: the limsup oracle for hyperplane values."""
    J = z.zeros
    values = []
    for t in depths:
        xi = np.where(np.isneginf(z.logmod), -float(t), z.logmod)
        values.append(support(P, xi))
    if len(J) == 0:
        return np.asarray(values[:1] * len(depths))
    return np.asarray(values)


def hs_descent(P: Polytope, z: CPoint, depths: Sequence[float] = DESCENT_DEPTHS) -> float:
    return float(hs_descent_values(P, z, depths)[-1])


def hs_lower_formula(P: Polytope, z: CPoint) -> float:
    """H_S(z) = φ_S(log⁺|z₁|, …, log⁺|zₙ|), valid for lower S only."""
    if not is_lower(P):
        raise NotLowerSet("log⁺ formula needs a lower set")
    return support(P, np.maximum(z.logmod, 0.0))


def hs_poly(vertices, z: CPoint) -> float:
    """h(z) = log Σ_j |z|^{v_j}, evaluated by log-sum-exp."""
    vertices = np.atleast_2d(np.asarray(vertices, dtype=float))
    if vertices.shape[1] != z.n:
        raise DimensionMismatch(f"vertices in ℝ^{vertices.shape[1]}, point in ℂ^{z.n}")
    terms = log_dot(vertices, z.logmod[None, :])[0]
    if np.all(np.isneginf(terms)):
        return -np.inf
    return float(logsumexp(terms))


# =========================
# 4. TEST FAMILIES
# =========================
def tropical_eval(f: TropicalFunction, z: CPoint) -> float:
    return f(z)


def polylog_eval(f: PolyLogFunction, z: CPoint) -> float:
    return f(z)


def tropical_envelope(P: Polytope) -> TropicalFunction:
    """Vertex pieces with c = 0; their max is H_S on ℂ*ⁿ."""
    return TropicalFunction([(v, 0.0) for v in extreme_points(P)], polytope=P)


def torus_envelope_check(P: Polytope, samples: int = 1000, seed: int = 42, tol: float = 1e-12) -> Report:
    """
    Every vertex piece is ≤ 0 on the closed unit polydisc, and the envelope equals H_S
    on ℂ*ⁿ: the computable shadow of V^S on the torus / polydisc being H_S.
    """
    rng = np.random.default_rng(seed)
    env = tropical_envelope(P)
    inside = np.log(rng.uniform(1e-6, 1.0, size=(samples, P.n)))
    anywhere = rng.uniform(-8.0, 8.0, size=(samples, P.n))
    arg = rng.uniform(0.0, TWO_PI, size=(samples, P.n))

    piece_max = float(np.max(log_dot(env.slopes, inside)))
    envelope_err = float(np.max(np.abs(env.batch(anywhere, arg) - hs_batch(P, anywhere))))
    torus_err = float(np.max(np.abs(hs_batch(P, np.zeros((1, P.n))))))
    frame = pd.DataFrame({
        "check": ["max_piece_on_polydisc", "max_envelope_error", "hs_on_torus"],
        "value": [piece_max, envelope_err, torus_err],
    })
    passed = piece_max <= tol and envelope_err <= tol and torus_err <= tol
    return Report(name="torus_envelope", frame=frame, passed=passed)


# =========================
# 5. GROWTH CONSTANTS
# =========================
def _growth_samples(n: int, R: float, k: int, rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Seeded points with ‖z‖∞ = R, axis rays R·e_j, the diagonal R·1_n and interior points."""
    logR = np.log(R)
    # ‖z‖∞ = R: một tọa độ chạm R, các tọa độ còn lại rải theo log-modulus
    sphere = logR + rng.uniform(-(logR + 6.0), 0.0, size=(k, n))
    sphere[np.arange(k), rng.integers(0, n, size=k)] = logR
    axes = np.full((n, n), -np.inf)
    np.fill_diagonal(axes, logR)
    diag = np.full((1, n), logR)
    interior = rng.uniform(-6.0, logR, size=(max(1, k // 2), n))
    logmod = np.vstack([sphere, axes, diag, interior])
    arg = rng.uniform(0.0, TWO_PI, size=logmod.shape)
    return logmod, arg


def is_diverging(values: Sequence[float], step: float = DIVERGENCE_STEP) -> bool:
    """Strict growth at every step, with the last increment at least half the first."""
    diffs = np.diff(np.asarray(values, dtype=float))
    if len(diffs) == 0 or not np.all(np.isfinite(diffs)):
        return False
    return bool(np.all(diffs > step) and diffs[-1] >= 0.5 * diffs[0])


def growth_constants(u: EvaluableFunction, P: Polytope, radii: Sequence[float],
                     samples_per_radius: int = 32, seed: int = 42) -> Report:
    """
    max / min of u − H_S over samples at each radius.
    A non-increasing max column is evidence of u ∈ L^S; a steadily growing one flags divergence.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) == 0 or np.any(radii < 1) or np.any(np.diff(radii) <= 0):
        raise BadParameters(f"radii must be increasing and ≥ 1, got {radii.tolist()}")
    if u.n != P.n:
        raise DimensionMismatch(f"function on ℂ^{u.n}, polytope in ℝ^{P.n}")

    rng = np.random.default_rng(seed)
    rows = []
    for R in radii:
        logmod, arg = _growth_samples(P.n, R, samples_per_radius, rng)
        with np.errstate(invalid="ignore"):
            gap = u.batch(logmod, arg) - hs_batch(P, logmod)
        rows.append({"radius": R, "max_gap": float(np.max(gap)), "min_gap": float(np.min(gap))})
        logger.debug(f"growth R={R:g}: max={rows[-1]['max_gap']:.6g} min={rows[-1]['min_gap']:.6g}")

    frame = pd.DataFrame(rows, columns=["radius", "max_gap", "min_gap"])
    diverging = is_diverging(frame["max_gap"])
    return Report(
        name="growth_constants",
        frame=frame,
        passed=not diverging,
        meta={"diverging": diverging, "upper_const": float(frame["max_gap"].max()),
              "lower_const": float(frame["min_gap"].min())},
    )
