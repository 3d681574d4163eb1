# services/search.py
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Sequence, Tuple

import numpy as np
from scipy.optimize import minimize_scalar

from services.errors import BadParameters
from services.kernel import tensor_indices

logger = logging.getLogger("LelongLab")

LINE_XATOL = 1e-10     # dung sai của tìm kiếm một chiều (theo log bán kính hoặc góc)
SCAN_PER_RUNG = 4      # số điểm quét trên mỗi nấc thang khi r_j = 0
SMALLEST_RADIUS = 1e-4   # bán kính nhỏ nhất của lưới thô, tính theo tỉ lệ với bán kính vùng tìm
FLOOR_RADIUS = 1e-8


@dataclass(frozen=True)
class SearchConfig:
    coarse_grid: int = 9
    refine_iters: int = 3
    multistart: int = 3
    radius_override: Optional[float] = None

    def __post_init__(self):
        if self.coarse_grid < 3:
            raise BadParameters(f"coarse_grid must be ≥ 3, got {self.coarse_grid}")
        if self.refine_iters < 0 or self.multistart < 1:
            raise BadParameters("refine_iters must be ≥ 0 and multistart ≥ 1")
        if self.radius_override is not None and not self.radius_override > 0:
            raise BadParameters(f"radius_override must be positive, got {self.radius_override}")

    @classmethod
    def from_dict(cls, data: dict) -> "SearchConfig":
        data = data or {}
        override = data.get("radius_override")
        return cls(
            coarse_grid=int(data.get("coarse_grid", 9)),
            refine_iters=int(data.get("refine_iters", 3)),
            multistart=int(data.get("multistart", 3)),
            radius_override=None if override is None else float(override),
        )


@dataclass
class SearchResult:
    value: float
    point: np.ndarray
    evaluations: int


def _line_min(line: Callable[[float], float], lo: float, hi: float) -> Tuple[float, float]:
    res = minimize_scalar(line, bounds=(lo, hi), method="bounded", options={"xatol": LINE_XATOL})
    return float(res.x), float(res.fun)


def polar_search(objective: Callable[[np.ndarray], np.ndarray], center, radius: float, cfg: SearchConfig,
                 anchors: Sequence = (), maximize: bool = False) -> SearchResult:
    """
    Derivative-free search over the polydisc {w : |w_j − c_j| ≤ radius}, in per-coordinate
    polar form w_j = c_j + r_j e^{iφ_j}.

    objective maps a complex (m, n) array to m values. Coarse tensor grid (radii {0} plus a
    geometric ladder, uniform angles) keeps the best point of each ladder rung as a start;
    then cyclic bounded line searches on each polar coordinate from the best `multistart`
    starts and the anchors. A coordinate sitting at r_j = 0 is first scanned over the whole
    ladder [radius·FLOOR_RADIUS, radius] × angles. Steps are accepted only when they improve.
    """
    center = np.atleast_1d(np.asarray(center, dtype=complex))
    n = len(center)
    if not radius > 0 or not np.isfinite(radius):
        raise BadParameters(f"search radius must be positive and finite, got {radius}")
    sign = -1.0 if maximize else 1.0
    count = 0

    def f(points: np.ndarray) -> np.ndarray:
        nonlocal count
        count += len(points)
        vals = sign * np.asarray(objective(points), dtype=float)
        return np.where(np.isnan(vals), np.inf, vals)

    g = cfg.coarse_grid
    ladder = radius * np.geomspace(SMALLEST_RADIUS, 1.0, g - 1)
    angles = 2.0 * np.pi * np.arange(g) / g
    r_per = np.concatenate([[0.0], np.repeat(ladder, g)])
    phi_per = np.concatenate([[0.0], np.tile(angles, g - 1)])
    rung = np.concatenate([[0], 1 + np.arange((g - 1) * g) // g])
    offsets = r_per * np.exp(1j * phi_per)

    # --- coarse grid: best point per rung (rung = largest ladder step over the coordinates) ---
    best = {}
    for idx in tensor_indices(len(offsets), n):
        idx = np.stack(idx, axis=1)
        vals = f(center[None, :] + offsets[idx])
        keys = rung[idx].max(axis=1)
        for key in np.unique(keys):
            i = int(np.argmin(np.where(keys == key, vals, np.inf)))
            if key not in best or vals[i] < best[key][0]:
                best[key] = (vals[i], idx[i])
    ranked = sorted(best.values(), key=lambda item: item[0])[:cfg.multistart]
    starts = [(np.concatenate([r_per[i], phi_per[i]]), v) for v, i in ranked]

    for anchor in anchors:
        d = np.asarray(anchor, dtype=complex) - center
        x = np.concatenate([np.abs(d), np.angle(d)])
        starts.append((x, f((center + d)[None, :])[0]))

    # --- refinement ---
    ratio = max(2.0, (1.0 / SMALLEST_RADIUS) ** (1.0 / max(g - 2, 1)))
    dphi = 2.0 * np.pi / g
    scan_s = np.log(radius) + np.linspace(np.log(FLOOR_RADIUS), 0.0, SCAN_PER_RUNG * (g - 1))

    def to_points(x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        return center[None, :] + x[:, :n] * np.exp(1j * x[:, n:])

    def at(x: np.ndarray) -> float:
        return f(to_points(x))[0]

    def scan(x: np.ndarray, k: int) -> Tuple[np.ndarray, float, Tuple[float, float]]:
        """r_k = 0: tabulate the whole ladder × angles, return the best trial and its log-radius bracket."""
        s_grid, p_grid = np.meshgrid(scan_s, angles, indexing="ij")
        trials = np.tile(x, (s_grid.size, 1))
        trials[:, k] = np.exp(s_grid.ravel())
        trials[:, n + k] = p_grid.ravel()
        vals = f(to_points(trials))
        j = int(np.argmin(vals))
        i = j // len(angles)
        bracket = (scan_s[max(i - 1, 0)], scan_s[min(i + 1, len(scan_s) - 1)])
        return trials[j], float(vals[j]), bracket

    def refine(x: np.ndarray, fx: float) -> Tuple[np.ndarray, float]:
        x = x.copy()
        for _ in range(cfg.refine_iters):
            before = fx
            for k in range(2 * n):
                trial = x.copy()
                if k < n:
                    r = x[k]
                    if r == 0.0:
                        cand, fc, (lo, hi) = scan(x, k)
                        if not fc < fx:
                            continue
                        x, fx, trial = cand.copy(), fc, cand.copy()
                    else:
                        lo = np.log(max(r / ratio, radius * FLOOR_RADIUS))
                        hi = np.log(min(r * ratio, radius))
                    if hi <= lo:
                        continue

                    def line(s, k=k):
                        trial[k] = np.exp(s)
                        return at(trial)

                    s, fs = _line_min(line, lo, hi)
                    if fs < fx:
                        x[k], fx = np.exp(s), fs
                else:
                    if x[k - n] == 0.0:
                        continue

                    def line(p, k=k):
                        trial[k] = p
                        return at(trial)

                    p, fp = _line_min(line, x[k] - dphi, x[k] + dphi)
                    if fp < fx:
                        x[k], fx = p, fp
            if before - fx <= 1e-15 * max(1.0, abs(fx)):
                break
        return x, fx

    best_x, best_f = starts[0]
    for x0, f0 in starts:
        x, fx = refine(x0, f0) if np.isfinite(f0) else (x0, f0)
        if fx < best_f:
            best_x, best_f = x, fx

    point = to_points(best_x)[0]
    logger.debug(f"polar_search: radius={radius:.3g} evaluations={count} best={sign * best_f:.12g}")
    return SearchResult(value=float(sign * best_f), point=point, evaluations=count)
