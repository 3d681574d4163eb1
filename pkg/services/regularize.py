# services/regularize.py
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
import pandas as pd
from scipy.special import logsumexp

from services.errors import (
    BadParameters, DeltaTooLarge, GlueMismatch, NeverBelow, NonFiniteObjective, NotDecreasing,
    NotInPolytope, flag_underflow,
)
from services.kernel import Kernel, tensor_indices
from services.logsupport import (
    CPoint, EvaluableFunction, Growth, HSFunction, ScaledFunction, complex_to_logpolar, hs,
)
from services.polytope import Polytope, contains, contains_neighborhood
from services.report import Report
from services.search import SearchConfig, polar_search
from services.settings import parallel_map

logger = logging.getLogger("LelongLab")

OPERATORS = ("a", "b", "c", "d", "std")
QUAD_FLOOR = -1e6
MAX_LOG_RADIUS = 60.0
DECREASE_SLACK = 1e-12


# =========================
# 1. DISTANCE FUNCTIONS
# =========================
@dataclass(frozen=True)
class DistanceFn:
    """
    Complex-homogeneous distance μ with r_μ|z| ≤ μ(z) ≤ s_μ|z|.
    kind: euclidean | weighted_sup | custom.
    """
    kind: str = "euclidean"
    r_mu: float = 1.0
    s_mu: float = 1.0
    weights: Optional[Tuple[float, ...]] = None
    norm: Optional[Callable[[np.ndarray], np.ndarray]] = field(default=None, compare=False)

    def __call__(self, d) -> np.ndarray:
        d = np.atleast_2d(np.asarray(d, dtype=complex))
        if self.kind == "euclidean":
            return np.sqrt(np.sum(np.abs(d) ** 2, axis=1))
        if self.kind == "weighted_sup":
            return np.max(np.asarray(self.weights) * np.abs(d), axis=1)
        return np.asarray(self.norm(d), dtype=float)

    @classmethod
    def euclidean(cls) -> "DistanceFn":
        return cls()

    @classmethod
    def weighted_sup(cls, weights: Sequence[float]) -> "DistanceFn":
        w = np.asarray(weights, dtype=float)
        if len(w) == 0 or np.any(w <= 0):
            raise BadParameters(f"weights must be positive, got {w.tolist()}")
        return cls("weighted_sup", r_mu=float(1.0 / np.sqrt(np.sum(w ** -2))), s_mu=float(w.max()),
                   weights=tuple(w.tolist()))

    @classmethod
    def custom(cls, norm: Callable[[np.ndarray], np.ndarray], n: int, r_mu: Optional[float] = None,
               s_mu: Optional[float] = None, samples: int = 1000, seed: int = 42,
               pad: float = 1e-2) -> "DistanceFn":
        """User norm on ℂⁿ; missing constants are estimated on seeded unit samples (padded outward)."""
        if r_mu is None or s_mu is None:
            ratios = np.asarray(norm(_unit_samples(n, samples, seed)), dtype=float)
            r_mu = float(ratios.min() * (1.0 - pad)) if r_mu is None else r_mu
            s_mu = float(ratios.max() * (1.0 + pad)) if s_mu is None else s_mu
        if not r_mu > 0 or s_mu < r_mu:
            raise BadParameters(f"need 0 < r_mu ≤ s_mu, got r_mu={r_mu}, s_mu={s_mu}")
        return cls("custom", r_mu=r_mu, s_mu=s_mu, norm=norm)

    def check(self, n: int, samples: int = 1000, seed: int = 42, tol: float = 1e-9) -> bool:
        """Sampled homogeneity μ(tz) = |t|μ(z) and the r_μ / s_μ equivalence."""
        z = _unit_samples(n, samples, seed)
        rng = np.random.default_rng(seed + 1)
        t = rng.normal(size=samples) + 1j * rng.normal(size=samples)
        base = self(z)
        homogeneous = np.allclose(self(t[:, None] * z), np.abs(t) * base, rtol=1e-9, atol=tol)
        equivalent = np.all(base >= self.r_mu - tol) and np.all(base <= self.s_mu + tol)
        return bool(homogeneous and equivalent)

    @classmethod
    def from_dict(cls, data: Optional[dict]) -> "DistanceFn":
        data = data or {}
        kind = data.get("kind", "euclidean")
        if kind == "euclidean":
            return cls.euclidean()
        if kind == "weighted_sup":
            return cls.weighted_sup(data.get("weights", []))
        raise BadParameters(f"distance kind {kind!r} cannot be built from JSON; use DistanceFn.custom")


def _unit_samples(n: int, samples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seed)
    z = rng.normal(size=(samples, n)) + 1j * rng.normal(size=(samples, n))
    return z / np.sqrt(np.sum(np.abs(z) ** 2, axis=1))[:, None]


# =========================
# 2. SEARCH OPERATORS (R^a, R^b)
# =========================
def inf_conv_a(u: EvaluableFunction, mu: Optional[DistanceFn], delta: float, z: CPoint,
               cfg: Optional[SearchConfig] = None) -> float:
    """
    R^a u(z) = −log inf_w (e^{−u(w)} + δ⁻¹μ(z − w)).
    w = z already gives e^{−u(z)}, so the infimum lives in μ(z − w) ≤ δe^{−u(z)}.
    """
    if not delta > 0:
        raise BadParameters(f"delta must be positive, got {delta}")
    mu = mu or DistanceFn.euclidean()
    cfg = cfg or SearchConfig()
    u_z = u(z)
    zc = z.to_complex()

    if np.isfinite(u_z):
        rho = delta * np.exp(min(-u_z, MAX_LOG_RADIUS)) / mu.r_mu
    else:
        rho = delta / mu.r_mu
        logger.warning(f"⚠️ u(z) = -inf at {z}; searching the fallback ball of radius {rho:g}")
    if cfg.radius_override is not None:
        rho = cfg.radius_override

    def objective(W: np.ndarray) -> np.ndarray:
        logmod, arg = complex_to_logpolar(W)
        with np.errstate(over="ignore"):
            return np.exp(-u.batch(logmod, arg)) + mu(zc[None, :] - W) / delta

    res = polar_search(objective, zc, rho, cfg, anchors=[zc])
    if not np.isfinite(res.value):
        raise NonFiniteObjective(f"no finite objective value found near {z}")
    return float(max(-np.log(res.value), u_z))


def sup_conv_b(u: EvaluableFunction, delta: float, z: CPoint, cfg: Optional[SearchConfig] = None,
               M1: Optional[float] = None, M2: Optional[float] = None,
               polytope: Optional[Polytope] = None) -> float:
    """
    R^b u(z) = sup_w u(Zw) − δ⁻¹log(‖w − 1_n‖∞ + 1), searched on ‖w‖∞ ≤ r with
    r = max{1, e^{(M1 − M2)/(δ⁻¹ − σ_S)}}. Defaults: M1 = H_S(z), M2 = u(z) − c_u.
    """
    P = polytope or (u.growth.polytope if u.growth is not None else None)
    if P is None:
        raise BadParameters("R^b needs the polytope of u (declare growth or pass polytope=)")
    if not delta > 0:
        raise BadParameters(f"delta must be positive, got {delta}")
    s = P.sigma
    if s > 0 and delta >= 1.0 / s:
        raise DeltaTooLarge(f"delta={delta} must be < 1/σ_S = {1.0 / s:g}")
    cfg = cfg or SearchConfig()
    c_u = u.growth.upper_const if u.growth is not None and u.growth.upper_const is not None else 0.0

    u_z = u(z)
    M1 = hs(P, z) if M1 is None else M1
    M2 = u_z - c_u if M2 is None else M2
    if np.isfinite(M2):
        exponent = (M1 - M2) / (1.0 / delta - s)
    else:
        exponent = MAX_LOG_RADIUS
        logger.warning(f"⚠️ u(z) = -inf at {z}; capping the R^b search radius at e^{MAX_LOG_RADIUS:g}")
    r = cfg.radius_override or max(1.0, float(np.exp(min(exponent, MAX_LOG_RADIUS))))

    def objective(W: np.ndarray) -> np.ndarray:
        logmod, arg = complex_to_logpolar(W)
        values = u.batch(z.logmod[None, :] + logmod, z.arg[None, :] + arg)
        return values - np.log(np.max(np.abs(W - 1.0), axis=1) + 1.0) / delta

    res = polar_search(objective, np.zeros(z.n), r, cfg, anchors=[np.ones(z.n)], maximize=True)
    return float(max(res.value, u_z))


# =========================
# 3. QUADRATURE OPERATORS (R^c, R^d, standard smoothing)
# =========================
def _check_unit_delta(delta: float) -> None:
    if not 0 < delta < 1:
        raise BadParameters(f"delta must lie in (0, 1), got {delta}")


def _multiplicative_values(u: EvaluableFunction, delta: float, z: CPoint, k: Kernel):
    """u(Z(1 + δw̃)) at every tensor node, with product weights."""
    nodes, weights = k.disc_rule()
    factor = 1.0 + delta * nodes
    log_f, arg_f = np.log(np.abs(factor)), np.angle(factor)
    values, node_weights = [], []
    for idx in tensor_indices(len(nodes), z.n):
        logmod = z.logmod[None, :] + np.stack([log_f[i] for i in idx], axis=1)
        arg = z.arg[None, :] + np.stack([arg_f[i] for i in idx], axis=1)
        values.append(u.batch(logmod, arg))
        node_weights.append(np.prod(np.stack([weights[i] for i in idx], axis=1), axis=1))
    return np.concatenate(values), np.concatenate(node_weights)


def _additive_values(u: EvaluableFunction, delta: float, z: CPoint, k: Kernel):
    """u(z − δw̃) at every tensor node of the product polydisc kernel."""
    nodes, weights = k.disc_rule()
    zc = z.to_complex()
    values, node_weights = [], []
    for idx in tensor_indices(len(nodes), z.n):
        points = zc[None, :] - delta * np.stack([nodes[i] for i in idx], axis=1)
        values.append(u.batch(*complex_to_logpolar(points)))
        node_weights.append(np.prod(np.stack([weights[i] for i in idx], axis=1), axis=1))
    return np.concatenate(values), np.concatenate(node_weights)


def _clamped_mean(values: np.ndarray, weights: np.ndarray, label: str) -> float:
    if np.all(np.isneginf(values)):
        flag_underflow(f"{label}: every quadrature node is -inf; returning -inf")
        return -np.inf
    low = values < QUAD_FLOOR
    if np.any(low):
        flag_underflow(f"{label}: {int(low.sum())} node values below {QUAD_FLOOR:g} were clamped")
        values = np.maximum(values, QUAD_FLOOR)
    return float(np.dot(weights, values))


def int_conv_c(u: EvaluableFunction, delta: float, z: CPoint, k: Optional[Kernel] = None) -> float:
    """R^c u(z) = ∫ u(Zw) ψ_δ(w) dλ(w), ψ_δ centred at 1_n with per-variable radius δ."""
    _check_unit_delta(delta)
    values, weights = _multiplicative_values(u, delta, z, (k or Kernel()).for_dimension(z.n))
    return _clamped_mean(values, weights, "R^c")


def log_int_conv_d(u: EvaluableFunction, delta: float, z: CPoint, k: Optional[Kernel] = None) -> float:
    """R^d u(z) = log ∫ e^{u(Zw)} ψ_δ(w) dλ(w); e^{−∞} = 0 exactly."""
    _check_unit_delta(delta)
    values, weights = _multiplicative_values(u, delta, z, (k or Kernel()).for_dimension(z.n))
    if np.all(np.isneginf(values)):
        return -np.inf
    return float(logsumexp(values, b=weights))


def std_smooth(u: EvaluableFunction, delta: float, z: CPoint, k: Optional[Kernel] = None) -> float:
    """u * χ_δ(z) with the product polydisc kernel of radius δ."""
    if not delta > 0:
        raise BadParameters(f"delta must be positive, got {delta}")
    values, weights = _additive_values(u, delta, z, (k or Kernel()).for_dimension(z.n))
    return _clamped_mean(values, weights, "u*χ_δ")


def rd_growth_constant(P: Polytope, delta: float, k: Optional[Kernel] = None) -> float:
    """log ∫ e^{H_S(w)} ψ_δ(w) dλ(w), the class constant added by R^d."""
    return log_int_conv_d(HSFunction(P), delta, CPoint.ones(P.n), k)


# =========================
# 4. DISPATCH / WRAPPERS
# =========================
@dataclass(frozen=True)
class OperatorConfig:
    op: str = "a"
    delta: float = 0.5
    mu: Optional[DistanceFn] = None
    kernel: Kernel = field(default_factory=Kernel)
    search: SearchConfig = field(default_factory=SearchConfig)
    M1: Optional[float] = None
    M2: Optional[float] = None

    def __post_init__(self):
        if self.op not in OPERATORS:
            raise BadParameters(f"unknown operator {self.op!r}; choose from {OPERATORS}")

    @classmethod
    def from_dict(cls, data: dict) -> "OperatorConfig":
        """{"op", "delta", "mu", "kernel", "search"} as in the operator config JSON."""
        try:
            return cls(
                op=str(data.get("op", "a")),
                delta=float(data.get("delta", 0.5)),
                mu=DistanceFn.from_dict(data.get("mu")),
                kernel=Kernel.from_dict(data.get("kernel")),
                search=SearchConfig.from_dict(data.get("search")),
            )
        except (TypeError, AttributeError) as e:
            raise BadParameters(f"bad operator config: {e}")


def apply_operator(tag: str, u: EvaluableFunction, delta: float, z: CPoint,
                   config: Optional[OperatorConfig] = None) -> float:
    config = config or OperatorConfig(op=tag)
    if tag == "a":
        return inf_conv_a(u, config.mu, delta, z, config.search)
    if tag == "b":
        return sup_conv_b(u, delta, z, config.search, config.M1, config.M2)
    if tag == "c":
        return int_conv_c(u, delta, z, config.kernel)
    if tag == "d":
        return log_int_conv_d(u, delta, z, config.kernel)
    if tag == "std":
        return std_smooth(u, delta, z, config.kernel)
    raise BadParameters(f"unknown operator {tag!r}; choose from {OPERATORS}")


def _declared_growth(u: EvaluableFunction, config: OperatorConfig) -> Optional[Growth]:
    """Class constant kept by the operator, or None when no bound is known."""
    if u.growth is None or u.growth.upper_const is None:
        return None
    P, c_u, delta = u.growth.polytope, u.growth.upper_const, config.delta
    if config.op == "a":
        r_mu = (config.mu or DistanceFn.euclidean()).r_mu
        legal = P.sigma == 0 or delta < np.exp(c_u) * r_mu / P.sigma
        return Growth(P, c_u) if P.lower and legal else None
    if config.op == "b":
        return Growth(P, c_u)
    if config.op == "c":
        return Growth(P, c_u + P.sigma * delta)
    if config.op == "d":
        return Growth(P, c_u + rd_growth_constant(P, delta, config.kernel))
    return None


class Regularized(EvaluableFunction):
    """R^•_δ u as an EvaluableFunction, carrying the class constant the operator keeps."""

    def __init__(self, u: EvaluableFunction, config: OperatorConfig):
        self.u, self.config, self.n = u, config, u.n
        self.growth = _declared_growth(u, config)

    def evaluate(self, z: CPoint) -> float:
        return apply_operator(self.config.op, self.u, self.config.delta, z, self.config)


# =========================
# 5. GLUING
# =========================
class GluedFunction(EvaluableFunction):
    """max{H_S − C, (tu)*χ_δ} on the open polydisc R𝔻ⁿ, H_S − C outside."""

    def __init__(self, u: EvaluableFunction, P: Polytope, C: float, t: float, R: float, delta: float,
                 kernel: Kernel):
        self.smooth = ScaledFunction(u, t)
        self.P, self.C, self.R, self.delta, self.kernel = P, C, R, delta, kernel
        self.n = P.n
        self.growth = Growth(P, None, -C)

    def evaluate(self, z: CPoint) -> float:
        base = hs(self.P, z) - self.C
        if np.max(z.logmod) >= np.log(self.R):
            return base
        return max(base, std_smooth(self.smooth, self.delta, z, self.kernel))


def _boundary_points(n: int, R: float, m: int) -> list:
    """Samples of ∂(R𝔻ⁿ): one coordinate on |z_j| = R, the others at moduli 0, 1, √R, R."""
    angles = 2.0 * np.pi * np.arange(m) / m
    others = [0.0, 1.0, np.sqrt(R), R]
    points = []
    for j in range(n):
        for theta in angles:
            for rest in np.ndindex(*([len(others) * 2] * (n - 1))):
                modulus, arg = np.full(n, R), np.full(n, theta)
                free = [i for i in range(n) if i != j]
                for i, code in zip(free, rest):
                    modulus[i], arg[i] = others[code // 2], np.pi * (code % 2)
                points.append(CPoint.from_modulus(modulus, arg))
    return points


def glue(u: EvaluableFunction, P: Polytope, C: float, t: float, R: float, delta: float,
         k: Optional[Kernel] = None, a: Optional[float] = None, boundary_grid: int = 4) -> GluedFunction:
    """
    Gluing of the smoothed (tu)*χ_δ into H_S − C across ∂(R𝔻ⁿ).
    Needs 0 < t < 1, aΣ ⊆ S and R > R0 = max{1, e^{(C + t·c_u)/((1 − t)a)}};
    the smoothed branch must be strictly below H_S − C on the boundary samples.
    """
    if not 0 < t < 1:
        raise BadParameters(f"t must lie in (0, 1), got {t}")
    if not delta > 0:
        raise BadParameters(f"delta must be positive, got {delta}")
    if u.growth is None or u.growth.upper_const is None:
        raise BadParameters("glue needs u with a declared upper constant c_u")
    k = k or Kernel()
    a = contains_neighborhood(P) if a is None else float(a)
    if not a > 0:
        raise BadParameters("S contains no aΣ with a > 0")
    for j in range(P.n):
        if not contains(P, a * np.eye(P.n)[j]):
            raise NotInPolytope(f"a·e_{j + 1} with a={a:g} is not in S")

    c_u = u.growth.upper_const
    R0 = max(1.0, float(np.exp((C + t * c_u) / ((1.0 - t) * a))))
    if not R > R0:
        raise BadParameters(f"R={R:g} must exceed R0={R0:g}")

    glued = GluedFunction(u, P, C, t, R, delta, k)

    def violation(z: CPoint) -> Optional[CPoint]:
        smooth = std_smooth(glued.smooth, delta, z, k)
        return z if not smooth < hs(P, z) - C else None

    bad = [z for z in parallel_map(violation, _boundary_points(P.n, R, boundary_grid)) if z is not None]
    if bad:
        raise GlueMismatch(f"(tu)*χ_δ ≥ H_S − C at {len(bad)} boundary samples, first at {bad[0]}")
    logger.info(f"✅ glued with R={R:g} (R0={R0:g}), t={t:g}, C={C:g}, δ={delta:g}")
    return glued


# =========================
# 6. DINI INDEX
# =========================
def _on_grid(f, grid) -> np.ndarray:
    if callable(f):
        return np.asarray([f(x) for x in grid], dtype=float)
    return np.asarray(f, dtype=float)


def dini_index(f_seq: Sequence, g, grid: Optional[Sequence] = None) -> int:
    """
    Smallest j₀ (1-based) such that f_j < g on the whole grid for every provided j > j₀.
    f_seq entries and g are arrays of grid values or callables on grid points; g may be a scalar.
    """
    if len(f_seq) == 0:
        raise BadParameters("empty function sequence")
    F = np.vstack([_on_grid(f, grid) for f in f_seq])
    G = np.broadcast_to(_on_grid(g, grid) if callable(g) else np.asarray(g, dtype=float), F.shape[1:])

    rising = np.flatnonzero(np.any(F[1:] > F[:-1] + DECREASE_SLACK, axis=1))
    if len(rising):
        raise NotDecreasing(f"f_{rising[0] + 2} exceeds f_{rising[0] + 1} somewhere on the grid")
    below = np.all(F < G, axis=1)
    if not below[-1]:
        raise NeverBelow(f"f_j < g fails on the grid for every j ≤ {len(F)}")
    failing = np.flatnonzero(~below)
    return int(failing[-1] + 1) if len(failing) else 0


# =========================
# 7. MONOTONE HARNESS
# =========================
def abs_gap(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """|a − b| with −∞ − (−∞) read as 0."""
    both = np.isneginf(a) & np.isneginf(b)
    with np.errstate(invalid="ignore"):
        return np.where(both, 0.0, np.abs(a - b))


def monotone_check(op_tag: str, u: EvaluableFunction, deltas: Sequence[float], grid: Sequence[CPoint],
                   tol: float = 1e-6, config: Optional[OperatorConfig] = None) -> Report:
    """
    R_δ u on the grid for decreasing δ: per-step increases beyond tol are violations,
    and the final gap max|R_δ u − u| must not grow as δ shrinks.
    """
    deltas = [float(d) for d in deltas]
    if len(deltas) == 0 or np.any(np.diff(deltas) >= 0):
        raise BadParameters(f"deltas must be strictly decreasing, got {deltas}")
    if op_tag not in OPERATORS:
        raise BadParameters(f"unknown operator {op_tag!r}; choose from {OPERATORS}")
    config = config or OperatorConfig(op=op_tag)

    base = np.asarray([u(z) for z in grid], dtype=float)
    rows, previous = [], None
    for delta in deltas:
        values = np.asarray(parallel_map(lambda z: apply_operator(op_tag, u, delta, z, config), grid), dtype=float)
        gap = float(np.max(abs_gap(values, base))) if len(grid) else 0.0
        if previous is None:
            increase, violations = np.nan, 0
        else:
            both = np.isneginf(values) & np.isneginf(previous)
            with np.errstate(invalid="ignore"):
                step = np.where(both, 0.0, values - previous)
            increase, violations = float(np.max(step)), int(np.sum(step > tol))
        rows.append({"delta": delta, "gap": gap, "max_increase": increase, "violations": violations})
        logger.debug(f"monotone {op_tag}: δ={delta:g} gap={gap:.3g} violations={violations}")
        previous = values

    frame = pd.DataFrame(rows, columns=["delta", "gap", "max_increase", "violations"])
    gaps = frame["gap"].to_numpy()
    shrinking = bool(np.all(np.diff(gaps) <= tol))
    passed = int(frame["violations"].sum()) == 0 and shrinking
    return Report(name=f"monotone_{op_tag}", frame=frame, passed=passed,
                  meta={"final_gap": float(gaps[-1]), "shrinking": shrinking})
