"""Synthetic time-of-flight observations: masks, noise, delay, diagnostics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import svds

from .errors import DimensionMismatch, InvalidParameter
from .geometry import SensorLayout, pairwise_distance_matrix

MODES = ("practical", "theorem")


@dataclass(frozen=True)
class MaskPair:
    """Boolean ``(n, n)`` masks over ordered pairs.

    ``S`` marks pairs closer than the structured-missing threshold, ``E`` the
    pairs that survived random erasure. Neither touches the diagonal.
    """

    S: np.ndarray
    E: np.ndarray

    def __post_init__(self):
        S = np.array(self.S, dtype=bool)
        E = np.array(self.E, dtype=bool)
        if S.shape != E.shape or S.ndim != 2 or S.shape[0] != S.shape[1]:
            raise DimensionMismatch(f"mask shapes differ or are not square: {S.shape} vs {E.shape}")
        for m in (S, E):
            np.fill_diagonal(m, False)
            m.setflags(write=False)
        object.__setattr__(self, "S", S)
        object.__setattr__(self, "E", E)

    @property
    def n(self) -> int:
        return self.S.shape[0]

    @property
    def usable(self) -> np.ndarray:
        """Pairs carrying a real measurement, ``E`` minus ``S``."""
        return self.E & ~self.S


@dataclass(frozen=True)
class ObservationSet:
    values: np.ndarray
    masks: MaskPair
    d0_true: float = 0.0
    sigma: float = 0.0
    c0: float = 1500.0
    mode: str = "practical"
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != self.masks.E.shape:
            raise DimensionMismatch(f"values {v.shape} do not match masks {self.masks.E.shape}")
        if self.mode not in MODES:
            raise InvalidParameter(f"mode must be one of {MODES}, got {self.mode!r}")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    @property
    def n(self) -> int:
        return self.values.shape[0]

    @property
    def completion_mask(self) -> np.ndarray:
        """Entries handed to the completion step as known.

        In practical mode the close pairs are unknown; in theorem mode they are
        fed in as observed zeros.
        """
        return self.masks.E.copy() if self.mode == "theorem" else self.masks.usable


def delta_n(delta: float, r0: float, n: int) -> float:
    """Structured-missing distance threshold ``delta * r0 * sqrt(ln n / n)``."""
    return delta * r0 * np.sqrt(np.log(n) / n)


def structured_mask(layout: SensorLayout, delta: float, D: np.ndarray | None = None) -> np.ndarray:
    if delta < 0:
        raise InvalidParameter(f"delta must be nonnegative, got {delta}")
    n = layout.n
    if D is None:
        D = pairwise_distance_matrix(layout)
    S = D <= delta_n(delta, layout.r0, n) if n >= 2 else np.zeros((n, n), dtype=bool)
    np.fill_diagonal(S, False)
    return S


def random_mask(n: int, p: float, seed) -> np.ndarray:
    """Keep each ordered off-diagonal pair independently with probability ``p``."""
    if not 0 < p <= 1:
        raise InvalidParameter(f"p must lie in (0, 1], got {p}")
    rng = np.random.default_rng(seed)
    E = rng.random((n, n)) < p
    np.fill_diagonal(E, False)
    return E


def noise_matrix(n: int, sigma: float, seed, symmetric: bool = True) -> np.ndarray:
    """Centered Gaussian noise with zero diagonal, one draw per unordered pair by default."""
    if sigma < 0:
        raise InvalidParameter(f"sigma must be nonnegative, got {sigma}")
    rng = np.random.default_rng(seed)
    if not symmetric:
        Z = rng.normal(0.0, sigma, (n, n)) if sigma > 0 else np.zeros((n, n))
        np.fill_diagonal(Z, 0.0)
        return Z
    Z = np.zeros((n, n))
    iu = np.triu_indices(n, 1)
    if sigma > 0:
        Z[iu] = rng.normal(0.0, sigma, iu[0].size)
    return Z + Z.T


def child_seeds(seed) -> tuple[int, int]:
    """Independent integer seeds for the erasure mask and the noise draw."""
    mask_seed, noise_seed = np.random.SeedSequence(seed).generate_state(2)
    return int(mask_seed), int(noise_seed)


def synthesize_observation(
    layout: SensorLayout,
    delta: float,
    p: float,
    sigma: float = 0.0,
    d0: float = 0.0,
    seed=None,
    *,
    mode: str = "practical",
    c0: float = 1500.0,
    symmetric_noise: bool = True,
) -> ObservationSet:
    """Observed distances ``d_ij + d0 + z_ij`` on the retained pairs.

    Close pairs (distance at most the structured threshold) carry no
    measurement. In practical mode they are left out of the completion mask; in
    theorem mode they stay in it with value zero.
    """
    if sigma < 0:
        raise InvalidParameter(f"sigma must be nonnegative, got {sigma}")
    if d0 < 0:
        raise InvalidParameter(f"d0 must be nonnegative, got {d0}")
    if mode not in MODES:
        raise InvalidParameter(f"mode must be one of {MODES}, got {mode!r}")
    n = layout.n
    D = pairwise_distance_matrix(layout)
    S = structured_mask(layout, delta, D)
    mask_seed, noise_seed = child_seeds(seed)
    E = random_mask(n, p, mask_seed)
    Z = noise_matrix(n, sigma, noise_seed, symmetric=symmetric_noise)
    usable = E & ~S
    values = np.where(usable, D + d0 + Z, 0.0)
    meta = {
        "delta": float(delta),
        "p": float(p),
        "seed": None if seed is None else int(seed),
        "r0": layout.r0,
        "a": layout.a,
        "symmetric_noise": bool(symmetric_noise),
    }
    return ObservationSet(values, MaskPair(S, E), float(d0), float(sigma), float(c0), mode, meta)


def spectral_norm(M) -> float:
    """Largest singular value; sparse Lanczos for big, mostly-empty inputs."""
    M = np.asarray(M, dtype=float)
    if M.size == 0 or not np.any(M):
        return 0.0
    if min(M.shape) <= 300 or np.count_nonzero(M) > 0.2 * M.size:
        return float(np.linalg.norm(M, 2))
    sp = csr_matrix(M)
    v0 = np.ones(min(M.shape)) / np.sqrt(min(M.shape))
    s = svds(sp, k=1, v0=v0, return_singular_vectors=False, tol=1e-12)
    return float(s[0])


def structured_noise_norm(Db_s: np.ndarray, E: np.ndarray) -> float:
    """``||P_E(Db_s)||_2`` for the close-pair part of the squared distances."""
    Db_s = np.asarray(Db_s, dtype=float)
    E = np.asarray(E, dtype=bool)
    if Db_s.shape != E.shape:
        raise DimensionMismatch(f"{Db_s.shape} vs {E.shape}")
    return spectral_norm(np.where(E, Db_s, 0.0))


def effective_noise_norm(Zbar: np.ndarray, Dbar_sbar: np.ndarray, E: np.ndarray) -> float:
    """``||P_E(Z**2 + 2 Z D)||_2``, the noise seen after squaring measured distances."""
    Zbar = np.asarray(Zbar, dtype=float)
    Dbar_sbar = np.asarray(Dbar_sbar, dtype=float)
    E = np.asarray(E, dtype=bool)
    if not Zbar.shape == Dbar_sbar.shape == E.shape:
        raise DimensionMismatch(f"{Zbar.shape}, {Dbar_sbar.shape}, {E.shape}")
    Y = Zbar * Zbar + 2 * Zbar * Dbar_sbar
    return spectral_norm(np.where(E, Y, 0.0))


def close_pair_scale(delta: float, r0: float, a: float, p: float, n: int) -> float:
    """Predicted growth ``delta^3 (r0+a)^2 (ln n / n)^(3/2) p n`` of the close-pair norm."""
    return delta**3 * (r0 + a) ** 2 * (np.log(n) / n) ** 1.5 * p * n


def structured_parts(layout: SensorLayout, obs: ObservationSet):
    """Squared close-pair matrix and the distance matrix restricted to far pairs."""
    D = pairwise_distance_matrix(layout)
    S = obs.masks.S
    return np.where(S, D * D, 0.0), np.where(S, 0.0, D)
