# services/diagnostics.py
import itertools
import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import linprog, minimize_scalar

from services.errors import BadParameters, IsLowerSet, NotNested, StencilHitsSingularity
from services.logsupport import (
    CPoint, EvaluableFunction, HSFunction, add, complex_to_logpolar, hs, hs_batch, hs_poly,
    is_diverging, log_dot,
)
from services.polytope import (
    LOWER_MARGIN, Polytope, contains, extreme_points, face_restrict, make_polytope, support,
)
from services.regularize import DistanceFn, abs_gap, inf_conv_a
from services.report import Report, continuity_frame
from services.search import SearchConfig
from services.settings import parallel_map

logger = logging.getLogger("LelongLab")

DEFAULT_THRESHOLDS = (10.0, 20.0, 30.0)
WITNESS_RADII = tuple(10.0 ** k for k in range(1, 17))
EX12_RADII = (1e1, 1e2, 1e3, 1e4)
PERERA_RADII = (2.0, 4.0, 8.0)
ANGLE_SETS = ((0.0, 90.0), (0.0, 30.0, 60.0, 90.0), (0.0, 7.5, 15.0, 30.0, 45.0, 60.0, 75.0, 90.0))
CHECK_TOL = 1e-6
FD_STEP = 1e-3


# =========================
# 1. CONTINUITY
# =========================
@dataclass
class ContinuityReport(Report):
    """Rows of H_S(z + w) − H_S(z) along a ray, with a bound column and a verdict."""
    w: Optional[CPoint] = None
    ray: Optional[CPoint] = None
    verdict: str = "bounded"


def lipschitz_estimate(f: EvaluableFunction, pairs: int = 1000, box_radius: float = 2.0, seed: int = 42) -> float:
    """max |f(z) − f(w)| / |z − w| over seeded pairs in the box: half uniform, half close pairs."""
    if pairs < 1:
        raise BadParameters(f"pairs must be ≥ 1, got {pairs}")
    rng = np.random.default_rng(seed)
    n = f.n

    def box(m: int) -> np.ndarray:
        return rng.uniform(-box_radius, box_radius, (m, n)) + 1j * rng.uniform(-box_radius, box_radius, (m, n))

    far = (pairs + 1) // 2
    near = pairs - far
    z = np.vstack([box(far), box(near)])
    step = rng.normal(size=(near, n)) + 1j * rng.normal(size=(near, n))
    step *= (10.0 ** rng.uniform(-4.0, -1.0, near) / np.sqrt(np.sum(np.abs(step) ** 2, axis=1)))[:, None]
    w = np.vstack([box(far), z[far:] + step])

    num = abs_gap(f.batch(*complex_to_logpolar(z)), f.batch(*complex_to_logpolar(w)))
    den = np.sqrt(np.sum(np.abs(z - w) ** 2, axis=1))
    live = den > 0
    if not np.any(live):
        return 0.0
    return float(np.max(num[live] / den[live]))


def _ray_point(ray: CPoint, R: float) -> CPoint:
    """z(R): log|z_j| = e_j·log R for ray exponents e, zero where e_j = −inf."""
    with np.errstate(invalid="ignore"):
        logmod = np.where(np.isneginf(ray.logmod), -np.inf, ray.logmod * np.log(R))
    return CPoint(logmod, ray.arg)


def _lower_bound(P: Polytope, z: CPoint, wc: np.ndarray) -> float:
    """
    H_L(z′) − H_T(z′) + C_δ at z = (z′, 0_J), w = (0, w_J), maximized over the vertex s
    spanning L = ch{0, s′}; C_δ = Σ_J s_j log|w_j|. NaN when the layout does not match.
    """
    J = np.flatnonzero(wc != 0)
    if len(J) == 0 or len(J) == P.n or not np.all(np.isneginf(z.logmod[J])) or np.max(np.abs(wc[J])) > 1:
        return np.nan
    keep = [j for j in range(P.n) if j not in set(J.tolist())]
    xi = z.logmod[keep][None, :]
    h_T = hs_batch(face_restrict(P, J), xi)[0]
    h_L = np.maximum(0.0, log_dot(P.vertices[:, keep], xi)[0])
    c_delta = P.vertices[:, J] @ np.log(np.abs(wc[J]))
    return float(np.max(h_L + c_delta) - h_T)


def _verdict(values: np.ndarray, thresholds: Sequence[float]) -> str:
    th = sorted(thresholds)
    if len(values) < len(th):
        return "bounded"
    tail = np.asarray(values[-len(th):], dtype=float)
    return "diverging" if np.all(tail > np.asarray(th)) else "bounded"


def modulus_profile(P: Polytope, w: CPoint, ray: CPoint, radii: Sequence[float],
                    thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> ContinuityReport:
    """
    H_S(z + w) − H_S(z) along z(R). Bound column: σ_S‖w‖∞ (upper) for lower S,
    otherwise the lower bound H_L − H_T + C_δ.
    """
    radii = np.asarray(radii, dtype=float)
    if len(radii) == 0 or np.any(radii <= 0) or np.any(np.diff(radii) <= 0):
        raise BadParameters(f"radii must be positive and increasing, got {radii.tolist()}")
    wc = w.to_complex()
    lower = P.lower

    def row(R: float) -> dict:
        z = _ray_point(ray, R)
        value = hs(P, add(z, w)) - hs(P, z)
        bound = P.sigma * float(np.max(np.abs(wc))) if lower else _lower_bound(P, z, wc)
        return {"radius": R, "value": value, "bound": bound, "gap": value - bound}

    rows = parallel_map(row, radii)
    values = np.asarray([r["value"] for r in rows])
    verdict = _verdict(values, thresholds)
    for r in rows:
        r["verdict"] = verdict
    frame = continuity_frame(rows)
    bounds = frame["bound"].to_numpy()
    if lower:
        holds = bool(np.all(values <= bounds + CHECK_TOL))
    else:
        holds = bool(np.all(np.isnan(bounds) | (values >= bounds - CHECK_TOL)))
    return ContinuityReport(
        name="modulus_profile", frame=frame, passed=holds,
        meta={"bound_kind": "upper" if lower else "lower", "verdict": verdict},
        w=w, ray=ray, verdict=verdict,
    )


def _witness_split(P: Polytope) -> Tuple[List[int], np.ndarray]:
    """First (J, s) with s ∈ ext S and (s′, 0_J) ∉ S; trailing coordinates are tried first."""
    ext = extreme_points(P)
    for k in range(1, P.n):
        for J in reversed(list(itertools.combinations(range(P.n), k))):
            J = list(J)
            for s in ext:
                if not np.any(s[J] > 0):
                    continue
                proj = s.copy()
                proj[J] = 0.0
                if not contains(P, proj, tol=LOWER_MARGIN):
                    return J, s
    raise IsLowerSet("every zero-slice projection of every extreme point lies in S")


def _separating_direction(s_prime: np.ndarray, T_vertices: np.ndarray) -> np.ndarray:
    """e ∈ [−1, 1]^m maximizing ⟨s′, e⟩ − φ_T(e); positive since s′ ∉ T."""
    m = len(s_prime)
    c = np.concatenate([-s_prime, [1.0]])
    a_ub = np.hstack([T_vertices, -np.ones((len(T_vertices), 1))])
    res = linprog(c, A_ub=a_ub, b_ub=np.zeros(len(T_vertices)),
                  bounds=[(-1.0, 1.0)] * m + [(None, None)], method="highs")
    return np.round(res.x[:m], 12)


def nonuniform_witness(P: Polytope, delta: float = 0.1, radii: Sequence[float] = WITNESS_RADII,
                       thresholds: Sequence[float] = DEFAULT_THRESHOLDS) -> Tuple[CPoint, ContinuityReport]:
    """
    Offset w = (0, δ·1_J) and a ray along which H_S(z + w) − H_S(z) grows without bound.
    Only for non-lower S.
    """
    if P.lower:
        raise IsLowerSet("S is a lower set; H_S is Lipschitz and no witness exists")
    if not 0 < delta <= 1:
        raise BadParameters(f"delta must lie in (0, 1], got {delta}")
    J, s = _witness_split(P)
    keep = [j for j in range(P.n) if j not in J]
    T = face_restrict(P, J)
    direction = _separating_direction(s[keep], T.vertices)

    w_vec = np.zeros(P.n, dtype=complex)
    w_vec[J] = delta
    w = CPoint.from_complex(w_vec)
    ray_logmod = np.full(P.n, -np.inf)
    ray_logmod[keep] = direction
    ray = CPoint(ray_logmod, np.zeros(P.n))
    logger.info(f"witness split J={J}, vertex s={s.tolist()}, ray exponents={direction.tolist()}")

    report = modulus_profile(P, w, ray, radii, thresholds)
    report.name = "nonuniform_witness"
    report.passed = report.passed and report.verdict == "diverging"
    report.meta.update({"J": J, "vertex": s.tolist()})
    return w, report


def lipschitz_report(P: Polytope, box_radii: Sequence[float] = (1.0, 2.0, 4.0), pairs: int = 1000,
                     seed: int = 42) -> Report:
    """lipschitz_estimate of H_S per box radius against σ_S (the bound holds for lower S only)."""
    u = HSFunction(P)
    rows = []
    for radius in box_radii:
        value = lipschitz_estimate(u, pairs, radius, seed)
        bound = P.sigma if P.lower else np.nan
        verdict = "n/a" if not P.lower else ("pass" if value <= bound + CHECK_TOL else "fail")
        rows.append({"radius": float(radius), "value": value, "bound": bound, "gap": bound - value,
                     "verdict": verdict})
    frame = continuity_frame(rows)
    return Report(name="lipschitz", frame=frame, passed=bool((frame["verdict"] != "fail").all()))


# =========================
# 2. EXAMPLE: R^a BREAKS THE CLASS FOR A NON-LOWER S
# =========================
def example12_polytope(a: float, b: float) -> Polytope:
    return make_polytope(2, [(a, 0.0), (0.0, a), (b, a)])


def _check_example12(a: float, b: float) -> None:
    if not a > 0 or not b > a * (a + 1):
        raise BadParameters(f"need a > 0 and b > a(a+1); got a={a}, b={b}")


def example12_slice_oracle(a: float, b: float, delta: float, zeta_abs: float) -> float:
    """
    R^a H_S(ζ, 0) − H_S(ζ, 0) restricted to w = (ζ, η): a 1-D minimization in s = log|η|.
    Only s ≥ −((b − a)/a)·log|ζ| can beat the plateau e^{−H_S(ζ, 0)}: there the (b, a) vertex
    dominates and the objective is convex. The minimum sits near |η| = (aδ|ζ|^{−b})^{1/(a+1)}.
    """
    _check_example12(a, b)
    if not delta > 0 or not zeta_abs >= 1:
        raise BadParameters(f"need delta > 0 and |ζ| ≥ 1; got delta={delta}, |ζ|={zeta_abs}")
    P = example12_polytope(a, b)
    log_z = np.log(zeta_abs)
    h0 = hs(P, CPoint([log_z, -np.inf], [0.0, 0.0]))
    plateau = np.exp(-h0)

    def objective(s: float) -> float:
        return np.exp(-support(P, [log_z, s])) + np.exp(s) / delta

    lo = -(b - a) / a * log_z
    hi = np.log(delta) - h0
    if not hi > lo:
        return 0.0
    res = minimize_scalar(objective, bounds=(lo, hi), method="bounded", options={"xatol": 1e-12})
    return float(-np.log(min(res.fun, plateau)) - h0)


def example12_report(a: float = 1.0, b: float = 3.0, delta: float = 0.5, radii: Sequence[float] = EX12_RADII,
                     cfg: Optional[SearchConfig] = None, mu: Optional[DistanceFn] = None,
                     tol: float = CHECK_TOL) -> Report:
    """R^a H_S(ζ, 0) − H_S(ζ, 0) against (r − a)log|ζ| − log(1 + δ⁻¹), r = b/(a + 1)."""
    _check_example12(a, b)
    if not delta > 0:
        raise BadParameters(f"delta must be positive, got {delta}")
    radii = [float(R) for R in radii]
    if any(R < 1 for R in radii):
        raise BadParameters("radii must be ≥ 1")
    P = example12_polytope(a, b)
    u = HSFunction(P)
    r = b / (a + 1)

    def row(R: float) -> dict:
        z = CPoint([np.log(R), -np.inf], [0.0, 0.0])
        value = inf_conv_a(u, mu, delta, z, cfg) - hs(P, z)
        bound = (r - a) * np.log(R) - np.log(1.0 + 1.0 / delta)
        return {"radius": R, "value": value, "bound": bound, "gap": value - bound,
                "verdict": "pass" if value >= bound - tol else "fail"}

    frame = continuity_frame(parallel_map(row, radii))
    return Report(
        name="ex12", frame=frame, passed=bool((frame["verdict"] == "pass").all()),
        meta={"class_violated": is_diverging(frame["value"]), "r": r},
    )


# =========================
# 3. H_S ALONG (z₂⁻¹, z₂)
# =========================
def perera_example_report(radii: Sequence[float] = PERERA_RADII, tol: float = 1e-9) -> Report:
    """H_S(z₂⁻¹, z₂) = 0 for S = ch{0, (1,1), (1,0)}, next to the formula sup x₂·log|z₂| = log|z₂|."""
    radii = [float(R) for R in radii]
    if any(R < 1 for R in radii):
        raise BadParameters("radii must be ≥ 1")
    P = make_polytope(2, [(1.0, 1.0), (1.0, 0.0)])
    rows = []
    for R in radii:
        value = hs(P, CPoint([-np.log(R), np.log(R)], [0.0, 0.0]))
        bound = support(P, [0.0, np.log(R)])
        rows.append({"radius": R, "value": value, "bound": bound, "gap": bound - value,
                     "verdict": "pass" if abs(value) <= tol else "fail"})
    frame = continuity_frame(rows)
    return Report(name="perera", frame=frame, passed=bool((frame["verdict"] == "pass").all()))


# =========================
# 4. h_S ALONG A DECREASING SEQUENCE
# =========================
def circumscribed_polygon(angles_deg: Sequence[float]) -> Polytope:
    """{x ∈ ℝ²₊ : x₁cos α + x₂sin α ≤ 1 for every α}, tangent to the quarter disc; 0° and 90° required."""
    angles = sorted(set(float(a) for a in angles_deg))
    if angles[0] != 0.0 or angles[-1] != 90.0 or any(a < 0 or a > 90 for a in angles):
        raise BadParameters(f"angles must lie in [0, 90] and include 0 and 90, got {angles}")
    rad = np.radians(angles)
    vertices = [(1.0, 0.0), (0.0, 1.0)]
    for a, b in zip(rad[:-1], rad[1:]):
        corner = np.linalg.solve([[np.cos(a), np.sin(a)], [np.cos(b), np.sin(b)]], [1.0, 1.0])
        vertices.append(tuple(np.maximum(corner, 0.0)))
    return make_polytope(2, vertices)


def circumscribed_sequence(angle_sets: Sequence[Sequence[float]] = ANGLE_SETS) -> List[Polytope]:
    """Decreasing polygons with 3 + (#angles − 1) extreme points; they shrink towards the quarter disc."""
    return [circumscribed_polygon(angles) for angles in angle_sets]


def hs_nonmonotone_report(polytopes: Sequence[Polytope], tol: float = 1e-12) -> Report:
    """h_{S_j}(1_n) = log #ext S_j for a decreasing sequence; rising values are flagged."""
    if len(polytopes) == 0:
        raise BadParameters("need at least one polytope")
    for j in range(1, len(polytopes)):
        outer, inner = polytopes[j - 1], polytopes[j]
        if inner.n != outer.n or not all(contains(outer, v) for v in inner.vertices):
            raise NotNested(f"S_{j + 1} is not contained in S_{j}")

    rows, previous = [], None
    for j, P in enumerate(polytopes, start=1):
        ext = extreme_points(P)
        value = hs_poly(ext, CPoint.ones(P.n))
        gap = 0.0 if previous is None else value - previous
        verdict = "increasing" if gap > tol else ("decreasing" if gap < -tol else "flat")
        rows.append({"radius": float(j), "value": value, "bound": float(np.log(len(ext))), "gap": gap,
                     "verdict": verdict})
        previous = value
    frame = continuity_frame(rows)
    identity = bool(np.all(np.abs(frame["value"] - frame["bound"]) <= tol))
    return Report(name="hsmono", frame=frame, passed=identity,
                  meta={"non_monotone": bool((frame["verdict"] == "increasing").any())})


# =========================
# 5. LOG-SUBHARMONICITY BY FINITE DIFFERENCES
# =========================
def fd_tolerance(h: float = FD_STEP) -> float:
    return 1e3 * h * h


def log_sh_check(u: EvaluableFunction, base: CPoint, direction, centers: Optional[Sequence[complex]] = None,
                 h: float = FD_STEP) -> float:
    """
    Minimum 5-point Laplacian of ζ ↦ u(base + ζ·dir) over the stencil centres.
    Moving coordinates must stay 10h away from 0.
    """
    direction = np.atleast_1d(np.asarray(direction, dtype=complex))
    if direction.shape != (u.n,):
        raise BadParameters(f"direction must have {u.n} coordinates")
    base_c = base.to_complex()
    moving = np.abs(direction) > 0
    offsets = np.array([0.0, h, -h, 1j * h, -1j * h])
    laplacians = []
    for centre in (centers if centers is not None else [0j]):
        pts = base_c[None, :] + (complex(centre) + offsets)[:, None] * direction[None, :]
        if np.any(np.abs(pts[:, moving]) < 10 * h):
            raise StencilHitsSingularity(f"stencil at ζ={centre} comes within 10h of a coordinate hyperplane")
        vals = u.batch(*complex_to_logpolar(pts))
        if not np.all(np.isfinite(vals)):
            raise StencilHitsSingularity(f"u is not finite on the stencil at ζ={centre}")
        laplacians.append((vals[1:].sum() - 4.0 * vals[0]) / (h * h))
    return float(min(laplacians))
