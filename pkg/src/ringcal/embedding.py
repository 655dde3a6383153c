"""Classical metric MDS and the rigid-motion invariant position error."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import orthogonal_procrustes

from .errors import DimensionMismatch, InvalidParameter, NegativeSpectrumWarning


@dataclass(frozen=True)
class PositionEstimate:
    coords: np.ndarray
    source: str = "pipeline"
    clamped: float = 0.0  # largest magnitude of a negative eigenvalue set to zero

    def __post_init__(self):
        c = np.array(self.coords, dtype=float)
        c.setflags(write=False)
        object.__setattr__(self, "coords", c)

    @property
    def n(self) -> int:
        return self.coords.shape[0]


def centering_matrix(n: int) -> np.ndarray:
    """``I - 11^T / n``, the projector removing translations."""
    if n < 1:
        raise InvalidParameter(f"n must be >= 1, got {n}")
    return np.eye(n) - np.full((n, n), 1.0 / n)


def _center(A: np.ndarray) -> np.ndarray:
    # L A L without forming L
    A = A - A.mean(axis=0, keepdims=True)
    return A - A.mean(axis=1, keepdims=True)


def gram_from_squared(Db: np.ndarray) -> np.ndarray:
    """``-1/2 L Db L``."""
    return -0.5 * _center(np.asarray(Db, dtype=float))


def classical_mds(Db: np.ndarray, eta: int = 2, source: str = "mds") -> PositionEstimate:
    """Embed a squared-distance matrix in ``eta`` dimensions.

    Uses the ``eta`` largest eigenpairs of ``-1/2 L Db L``; negative
    eigenvalues among them are clamped to zero and the clamp size is kept on
    the result.
    """
    Db = np.asarray(Db, dtype=float)
    n = Db.shape[0]
    if Db.ndim != 2 or Db.shape[1] != n:
        raise DimensionMismatch(f"squared-distance matrix must be square, got {Db.shape}")
    if eta < 1:
        raise InvalidParameter(f"eta must be >= 1, got {eta}")
    B = gram_from_squared(Db)
    B = 0.5 * (B + B.T)
    w_all, V = np.linalg.eigh(B)
    order = np.argsort(w_all)[::-1][: min(eta, n)]
    w, V = w_all[order], V[:, order]
    sigma1 = float(np.abs(w_all).max()) if w_all.size else 0.0
    clamped = float(max(0.0, -w.min())) if w.size else 0.0
    if w.size and w.min() < -1e-8 * sigma1:
        warnings.warn(
            f"top-{eta} spectrum has negative eigenvalue {w.min():.3e}; input is not Euclidean",
            NegativeSpectrumWarning,
            stacklevel=2,
        )
    coords = V * np.sqrt(np.clip(w, 0.0, None))
    if coords.shape[1] < eta:
        coords = np.hstack([coords, np.zeros((n, eta - coords.shape[1]))])
    # eigenvectors of a centered matrix are orthogonal to 1 only up to rounding
    coords = coords - coords.mean(axis=0)
    return PositionEstimate(coords, source, clamped)


def _coords(X) -> np.ndarray:
    return X.coords if isinstance(X, PositionEstimate) else np.asarray(X, dtype=float)


def position_distance(X, Xh) -> float:
    """``(1/n) ||L X X^T L - L Xh Xh^T L||_F``, in squared length units."""
    X, Xh = _coords(X), _coords(Xh)
    if X.shape != Xh.shape:
        raise DimensionMismatch(f"position arrays differ: {X.shape} vs {Xh.shape}")
    Xc = X - X.mean(axis=0)
    Xhc = Xh - Xh.mean(axis=0)
    return float(np.linalg.norm(Xc @ Xc.T - Xhc @ Xhc.T) / X.shape[0])


def procrustes_align(X_ref, Xh) -> np.ndarray:
    """Rotate/reflect and translate ``Xh`` onto ``X_ref`` in the least-squares sense."""
    X_ref, Xh = _coords(X_ref), _coords(Xh)
    if X_ref.shape != Xh.shape:
        raise DimensionMismatch(f"position arrays differ: {X_ref.shape} vs {Xh.shape}")
    mu_ref, mu_h = X_ref.mean(axis=0), Xh.mean(axis=0)
    R, _ = orthogonal_procrustes(Xh - mu_h, X_ref - mu_ref)
    return (Xh - mu_h) @ R + mu_ref
