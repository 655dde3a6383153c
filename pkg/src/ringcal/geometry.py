"""Ring layouts, distance matrices and their rank structure."""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from scipy.spatial.distance import pdist, squareform

from .errors import InvalidParameter

RANK_TOL = 1e-9


@dataclass(frozen=True)
class SensorLayout:
    """Planar sensor positions scattered around a ring.

    ``positions`` is ``(n, 2)`` in meters and ``rho`` holds each sensor's
    radial offset from the central radius ``r0``.
    """

    positions: np.ndarray
    r0: float
    a: float
    seed: int | None = None
    rho: np.ndarray | None = None

    def __post_init__(self):
        pos = np.array(self.positions, dtype=float)
        if pos.ndim != 2 or pos.shape[1] != 2:
            raise InvalidParameter(f"positions must be (n, 2), got {pos.shape}")
        pos.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        if self.rho is not None:
            rho = np.array(self.rho, dtype=float)
            rho.setflags(write=False)
            object.__setattr__(self, "rho", rho)

    @property
    def n(self) -> int:
        return self.positions.shape[0]

    @property
    def radii(self) -> np.ndarray:
        return np.hypot(self.positions[:, 0], self.positions[:, 1])


def radial_cdf(rho, r0: float, a: float):
    """CDF of the radial offset for points spread uniformly over the annulus."""
    rho = np.clip(rho, -a / 2, a / 2)
    return ((r0 + rho) ** 2 - (r0 - a / 2) ** 2) / (2 * r0 * a)


def sample_radial_offsets(rng: np.random.Generator, size: int, r0: float, a: float) -> np.ndarray:
    if a == 0:
        return np.zeros(size)
    u = rng.random(size)
    return -r0 + np.sqrt((r0 - a / 2) ** 2 + 2 * r0 * a * u)


def generate_ring_layout(n: int, r0: float, a: float, seed: int | None = None) -> SensorLayout:
    """Draw ``n`` sensors uniformly over the annulus of central radius ``r0`` and width ``a``.

    Radii come from the closed-form inverse CDF of the area-uniform radial
    density, angles are uniform on ``[0, 2*pi)``.
    """
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    if not r0 > 0:
        raise InvalidParameter(f"r0 must be positive, got {r0}")
    if not 0 <= a < 2 * r0:
        raise InvalidParameter(f"ring width must satisfy 0 <= a < 2*r0, got a={a}, r0={r0}")
    rng = np.random.default_rng(seed)
    rho = sample_radial_offsets(rng, n, r0, a)
    theta = rng.uniform(0.0, 2 * np.pi, n)
    r = r0 + rho
    positions = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    return SensorLayout(positions=positions, r0=float(r0), a=float(a), seed=seed, rho=rho)


def pairwise_distance_matrix(layout) -> np.ndarray:
    """Euclidean distances, computed once per unordered pair and mirrored."""
    pos = layout.positions if isinstance(layout, SensorLayout) else np.asarray(layout, dtype=float)
    if pos.shape[0] < 2:
        return np.zeros((pos.shape[0], pos.shape[0]))
    return squareform(pdist(pos))


def squared_distance_matrix(D: np.ndarray) -> np.ndarray:
    D = np.asarray(D, dtype=float)
    return D * D


class RankCertificate(NamedTuple):
    numeric_rank: int
    singular_values: np.ndarray
    expected_max_rank: int

    @property
    def holds(self) -> bool:
        return self.numeric_rank <= self.expected_max_rank


def rank_certificate(Db: np.ndarray, on_circle: bool = False, tol: float = RANK_TOL) -> RankCertificate:
    """Numeric rank of a squared-distance matrix.

    Counts singular values above ``tol * sigma_1``. Planar points give at most
    4, points on a common circle give at most 3.
    """
    Db = np.asarray(Db, dtype=float)
    sv = np.linalg.svd(Db, compute_uv=False)
    rank = 0 if sv.size == 0 or sv[0] == 0 else int(np.sum(sv > tol * sv[0]))
    bound = min(3 if on_circle else 4, Db.shape[0])
    return RankCertificate(rank, sv, bound)


def circle_factorization(layout: SensorLayout) -> tuple[np.ndarray, np.ndarray]:
    """Factors ``(V, Sigma)`` with ``V @ Sigma @ V.T`` equal to the squared
    distance matrix of sensors lying on one circle of radius ``r0``.
    """
    x = layout.positions
    V = np.column_stack([np.full(layout.n, layout.r0), x[:, 0], x[:, 1]])
    return V, np.diag([2.0, -2.0, -2.0])
