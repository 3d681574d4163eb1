# services/kernel.py
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Dict, Tuple

import numpy as np
from scipy import integrate, special
from scipy.linalg import eigh_tridiagonal

from services.errors import BadParameters

logger = logging.getLogger("LelongLab")

FINE_NODES = 2000  # lưới Gauss–Legendre mịn để rời rạc hóa độ đo χ(ρ)ρdρ
MAX_TENSOR_NODES = 1 << 24  # trần số nút của lưới tích trên ℂⁿ


def _bump(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    inside = np.abs(rho) < 1.0
    safe = np.where(inside, 1.0 - rho ** 2, 1.0)
    return np.where(inside, np.exp(-1.0 / safe), 0.0)


def _poly(rho: np.ndarray) -> np.ndarray:
    rho = np.asarray(rho, dtype=float)
    return np.where(np.abs(rho) < 1.0, (1.0 - rho ** 2) ** 3, 0.0)


PROFILES: Dict[str, Callable[[np.ndarray], np.ndarray]] = {"bump": _bump, "poly": _poly}


@lru_cache(maxsize=32)
def _radial_rule(profile: str, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """
    Gauss rule for the probability measure ∝ χ(ρ)ρ dρ on [0, 1].
    Recurrence by discretized Stieltjes (with reorthogonalization) on a fine
    Gauss–Legendre grid, then Golub–Welsch.
    """
    x, w = special.roots_legendre(FINE_NODES)
    x = 0.5 * (x + 1.0)
    w = 0.5 * w * PROFILES[profile](x) * x
    w = w / w.sum()

    alpha = np.zeros(order)
    beta = np.zeros(max(order - 1, 0))
    basis = [np.ones_like(x)]
    prev = np.zeros_like(x)
    for k in range(order):
        q = basis[-1]
        alpha[k] = np.sum(w * x * q * q)
        r = (x - alpha[k]) * q - (beta[k - 1] * prev if k > 0 else 0.0)
        for p in basis:
            r = r - np.sum(w * r * p) * p
        if k < order - 1:
            beta[k] = np.sqrt(np.sum(w * r * r))
            prev = q
            basis.append(r / beta[k])

    nodes, vecs = eigh_tridiagonal(alpha, beta)
    weights = vecs[0, :] ** 2
    return nodes, weights / weights.sum()


@dataclass(frozen=True)
class Kernel:
    """
    Per-variable rotation-invariant kernel with radial profile χ on [0, 1].
    Quadrature: Gauss nodes for χ(ρ)ρdρ × uniform trapezoid in θ.
    """
    profile: str = "bump"
    n_radial: int = 24
    n_angular: int = 32

    def __post_init__(self):
        if self.profile not in PROFILES:
            raise BadParameters(f"unknown kernel profile {self.profile!r}; choose from {sorted(PROFILES)}")
        if self.n_radial < 1 or self.n_angular < 1:
            raise BadParameters("quadrature orders must be positive")

    @property
    def chi(self) -> Callable[[np.ndarray], np.ndarray]:
        return PROFILES[self.profile]

    def _radial_integral(self, f: Callable[[float], float]) -> float:
        value, _ = integrate.quad(lambda r: f(r) * float(self.chi(np.array(r))) * r, 0.0, 1.0,
                                  epsabs=1e-14, epsrel=1e-12, limit=200)
        return value

    @property
    def per_variable_mass(self) -> float:
        """Constant c with c·∫_𝔻 χ(|w|) dλ(w) = 1."""
        return 1.0 / (2.0 * np.pi * self._radial_integral(lambda r: 1.0))

    def total_mass(self) -> float:
        """Self-integration check; equals 1 up to quad error."""
        return 2.0 * np.pi * self.per_variable_mass * self._radial_integral(lambda r: 1.0)

    def log_moment(self) -> float:
        """E[log ρ] under the normalized radial law."""
        return self._radial_integral(np.log) / self._radial_integral(lambda r: 1.0)

    def second_moment(self) -> float:
        """E[ρ²] under the normalized radial law."""
        return self._radial_integral(lambda r: r * r) / self._radial_integral(lambda r: 1.0)

    def radial_rule(self) -> Tuple[np.ndarray, np.ndarray]:
        return _radial_rule(self.profile, self.n_radial)

    def disc_rule(self) -> Tuple[np.ndarray, np.ndarray]:
        """Nodes ρe^{iθ} in the unit disc and probability weights, flattened."""
        rho, w_rho = self.radial_rule()
        theta = 2.0 * np.pi * np.arange(self.n_angular) / self.n_angular
        nodes = (rho[:, None] * np.exp(1j * theta)[None, :]).ravel()
        weights = (w_rho[:, None] * np.full(self.n_angular, 1.0 / self.n_angular)[None, :]).ravel()
        return nodes, weights

    def doubled(self) -> "Kernel":
        return Kernel(self.profile, 2 * self.n_radial, 2 * self.n_angular)

    def nodes_in(self, n: int) -> int:
        return (self.n_radial * self.n_angular) ** n

    @lru_cache(maxsize=64)
    def for_dimension(self, n: int) -> "Kernel":
        """Same profile with orders halved (larger one first) until the n-fold rule fits MAX_TENSOR_NODES."""
        n_radial, n_angular = self.n_radial, self.n_angular
        while (n_radial * n_angular) ** n > MAX_TENSOR_NODES and n_radial * n_angular > 1:
            if n_radial >= n_angular:
                n_radial = max(1, n_radial // 2)
            else:
                n_angular = max(1, n_angular // 2)
        if (n_radial, n_angular) == (self.n_radial, self.n_angular):
            return self
        logger.warning(f"⚠️ {self.n_radial}×{self.n_angular} rule has {self.nodes_in(n):.3g} nodes on ℂ^{n}; "
                       f"using {n_radial}×{n_angular}")
        return Kernel(self.profile, n_radial, n_angular)

    @classmethod
    def from_dict(cls, data: dict) -> "Kernel":
        data = data or {}
        return cls(
            profile=data.get("profile", "bump"),
            n_radial=int(data.get("n_radial", 24)),
            n_angular=int(data.get("n_angular", 32)),
        )


def tensor_indices(size: int, n: int, chunk: int = 1 << 16):
    """Yield index tuples of the n-fold tensor grid in chunks of at most `chunk` nodes."""
    total = size ** n
    for start in range(0, total, chunk):
        yield np.unravel_index(np.arange(start, min(start + chunk, total)), (size,) * n)
