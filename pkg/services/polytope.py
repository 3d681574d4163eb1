# services/polytope.py
import itertools
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, List, Sequence

import numpy as np
from scipy.optimize import linprog
from shapely.geometry import MultiPoint, Point

from services.errors import BadParameters, DimensionMismatch, InvalidVertex, SchemaError

logger = logging.getLogger("LelongLab")

MAX_DIM = 6
TAU_MEM = 1e-9        # sai số thành viên (convex-combination residual)
LOWER_MARGIN = 1e-7   # is_lower chỉ fail khi vượt ngưỡng này


# =========================
# 1. TYPE
# =========================
@dataclass(frozen=True, eq=False)
class Polytope:
    """
    Compact convex S ⊂ ℝⁿ₊ with 0 ∈ S, stored by its generators.
    The hull is implied; vertices may be redundant (extreme_points canonicalizes).
    """
    n: int
    vertices: np.ndarray

    @cached_property
    def lower(self) -> bool:
        return _is_lower(self)

    @cached_property
    def sigma(self) -> float:
        return support(self, np.ones(self.n))

    def __repr__(self) -> str:
        return f"Polytope(n={self.n}, vertices={self.vertices.tolist()})"


def make_polytope(n: int, generators: Iterable[Sequence[float]]) -> Polytope:
    """Polytope ch(generators ∪ {0}); duplicates are kept."""
    if not isinstance(n, (int, np.integer)) or n < 1 or n > MAX_DIM:
        raise BadParameters(f"dimension must be an integer in 1..{MAX_DIM}, got {n!r}")
    gens = [list(g) for g in generators]
    for g in gens:
        if len(g) != n:
            raise DimensionMismatch(f"generator {g} has length {len(g)}, expected {n}")
    pts = np.asarray(gens, dtype=float).reshape(-1, n)
    if not np.all(np.isfinite(pts)):
        raise InvalidVertex("generators must be finite")
    if np.any(pts < 0):
        bad = pts[np.any(pts < 0, axis=1)][0]
        raise InvalidVertex(f"generator {bad.tolist()} has a negative coordinate")
    vertices = np.vstack([np.zeros((1, n)), pts])
    vertices.setflags(write=False)
    return Polytope(n=int(n), vertices=vertices)


def simplex(n: int) -> Polytope:
    return make_polytope(n, np.eye(n))


def box(n: int) -> Polytope:
    """Unit box [0,1]ⁿ."""
    return make_polytope(n, [list(v) for v in itertools.product([0.0, 1.0], repeat=n)])


def scaled(P: Polytope, t: float) -> Polytope:
    if t < 0:
        raise BadParameters(f"scale must be non-negative, got {t}")
    return make_polytope(P.n, P.vertices * t)


# =========================
# 2. SUPPORT FUNCTION
# =========================
def support(P: Polytope, xi) -> float:
    """φ_S(ξ) = max over vertices of ⟨x, ξ⟩; accepts a batch of shape (m, n) as well."""
    xi = np.asarray(xi, dtype=float)
    if xi.shape[-1] != P.n:
        raise DimensionMismatch(f"ξ has length {xi.shape[-1]}, polytope has n={P.n}")
    values = np.max(xi @ P.vertices.T, axis=-1)
    return float(values) if values.ndim == 0 else values


def sigma(P: Polytope) -> float:
    return P.sigma


# =========================
# 3. MEMBERSHIP
# =========================
def _planar(points: np.ndarray) -> np.ndarray:
    if points.shape[1] == 1:
        return np.column_stack([points[:, 0], np.zeros(len(points))])
    return points


def _in_hull(points: np.ndarray, x: np.ndarray, tol: float) -> bool:
    """x ∈ ch(points), without adjoining anything."""
    if len(points) == 0:
        return False
    n = points.shape[1]
    if n <= 2:
        hull = MultiPoint(_planar(points)).convex_hull
        return bool(hull.distance(Point(*_planar(x[None, :])[0])) <= tol)

    # LP: min ‖s⁺ + s⁻‖₁  s.t.  Vᵀλ + s⁺ − s⁻ = x, Σλ = 1, λ, s ≥ 0
    k = len(points)
    c = np.concatenate([np.zeros(k), np.ones(2 * n)])
    a_eq = np.zeros((n + 1, k + 2 * n))
    a_eq[:n, :k] = points.T
    a_eq[:n, k:k + n] = np.eye(n)
    a_eq[:n, k + n:] = -np.eye(n)
    a_eq[n, :k] = 1.0
    b_eq = np.concatenate([x, [1.0]])
    res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
    if res.status != 0:
        logger.debug(f"membership LP ended with status {res.status}: {res.message}")
        return False
    return bool(res.fun <= tol)


def contains(P: Polytope, x, tol: float = TAU_MEM) -> bool:
    x = np.asarray(x, dtype=float).reshape(-1)
    if x.shape[0] != P.n:
        raise DimensionMismatch(f"point has length {x.shape[0]}, polytope has n={P.n}")
    if np.any(x < -tol):
        return False
    return _in_hull(P.vertices, x, tol)


# =========================
# 4. LOWER SETS
# =========================
def _projections(P: Polytope) -> np.ndarray:
    """All coordinate-zeroing projections of all vertices (2ⁿ per vertex)."""
    masks = np.array(list(itertools.product([0.0, 1.0], repeat=P.n)))
    proj = (P.vertices[:, None, :] * masks[None, :, :]).reshape(-1, P.n)
    return np.unique(proj, axis=0)


def _is_lower(P: Polytope) -> bool:
    known = {tuple(v) for v in P.vertices}
    for p in _projections(P):
        if tuple(p) in known:
            continue
        if not contains(P, p, tol=LOWER_MARGIN):
            logger.debug(f"projection {p.tolist()} is outside the polytope")
            return False
    return True


def is_lower(P: Polytope) -> bool:
    return P.lower


def lower_hull(P: Polytope) -> Polytope:
    return make_polytope(P.n, _projections(P))


# =========================
# 5. FACES / UNIONS / EXTREME POINTS
# =========================
def face_restrict(P: Polytope, J: Iterable[int]) -> Polytope:
    """
    T = {x' : (x', 0_J) ∈ S}, as a polytope in the coordinates outside J (0-based).
    S ⊂ ℝⁿ₊ makes {x ∈ S : x_J = 0} a face of S, so it is the hull of the vertices it contains.
    """
    J = sorted(set(int(j) for j in J))
    if not J or len(J) >= P.n:
        raise BadParameters(f"J must be a non-empty proper subset of 0..{P.n - 1}, got {J}")
    if J[0] < 0 or J[-1] >= P.n:
        raise BadParameters(f"index out of range in J={J} for n={P.n}")
    keep = [j for j in range(P.n) if j not in J]
    on_face = np.all(P.vertices[:, J] == 0.0, axis=1)
    return make_polytope(len(keep), P.vertices[on_face][:, keep])


def hull_union(P: Polytope, Q: Polytope) -> Polytope:
    if P.n != Q.n:
        raise DimensionMismatch(f"cannot join polytopes of dimension {P.n} and {Q.n}")
    return make_polytope(P.n, np.vstack([P.vertices, Q.vertices]))


def extreme_points(P: Polytope, tol: float = TAU_MEM) -> np.ndarray:
    pts = np.unique(P.vertices, axis=0)
    if len(pts) == 1:
        return pts
    keep = [i for i in range(len(pts)) if not _in_hull(np.delete(pts, i, axis=0), pts[i], tol)]
    return pts[keep]


def contains_neighborhood(P: Polytope) -> float:
    """Largest a with aΣ ⊆ S, i.e. min over j of max{t : t·e_j ∈ S}."""
    k = len(P.vertices)
    best = np.inf
    for j in range(P.n):
        # biến (λ, t): max t  s.t.  Vᵀλ − t·e_j = 0, Σλ = 1
        c = np.concatenate([np.zeros(k), [-1.0]])
        a_eq = np.zeros((P.n + 1, k + 1))
        a_eq[:P.n, :k] = P.vertices.T
        a_eq[j, k] = -1.0
        a_eq[P.n, :k] = 1.0
        b_eq = np.concatenate([np.zeros(P.n), [1.0]])
        res = linprog(c, A_eq=a_eq, b_eq=b_eq, bounds=(0, None), method="highs")
        best = min(best, float(-res.fun) if res.status == 0 else 0.0)
    return max(best, 0.0)


def approximating_sequence(P: Polytope, j_max: int) -> List[Polytope]:
    """Outer sequence S_j = ch((1/j)Σ ∪ S), j = 1..j_max; decreasing with intersection S."""
    if j_max < 1:
        raise BadParameters(f"j_max must be ≥ 1, got {j_max}")
    base = simplex(P.n)
    return [hull_union(scaled(base, 1.0 / j), P) for j in range(1, j_max + 1)]


# =========================
# 6. JSON SCHEMA
# =========================
def polytope_from_dict(data: dict) -> Polytope:
    """{"n": 2, "vertices": [[0,0],[1,0],...]}; coordinates may be decimal strings."""
    if not isinstance(data, dict) or "vertices" not in data:
        raise SchemaError("polytope JSON needs a 'vertices' list")
    try:
        vertices = [[float(c) for c in v] for v in data["vertices"]]
    except (TypeError, ValueError) as e:
        raise SchemaError(f"bad vertex coordinate: {e}")
    n = data.get("n", len(vertices[0]) if vertices else None)
    if n is None:
        raise SchemaError("polytope JSON needs 'n' when 'vertices' is empty")
    try:
        n = int(n)
    except (TypeError, ValueError):
        raise SchemaError(f"'n' must be an integer, got {data.get('n')!r}")
    return make_polytope(n, vertices)


def polytope_to_dict(P: Polytope) -> dict:
    return {"n": P.n, "vertices": P.vertices.tolist()}
