"""OptSpace low-rank matrix completion.

Trimming, a scaled rank-q spectral start, then descent on the pair of
orthonormal factors ``(X, Y)`` with the small core ``S`` solved exactly at
every point, so the descent minimizes ``F(X, Y) = min_S F(X, Y, S)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse.linalg import svds

from .errors import InvalidParameter, RankDeficientWarning, UnreliableRowsWarning

ARMIJO = 1e-4
MAX_HALVINGS = 40


@dataclass
class CompletionOptions:
    rank: int = 4
    max_iters: int = 500
    rel_tol: float = 1e-9
    p_hat: float | None = None  # None: estimate from the mask
    trimming: bool = False
    seed: int = 0
    refresh: bool = False

    def __post_init__(self):
        if self.rank < 1:
            raise InvalidParameter(f"rank must be >= 1, got {self.rank}")
        if not self.rel_tol > 0:
            raise InvalidParameter(f"rel_tol must be positive, got {self.rel_tol}")
        if self.max_iters < 0:
            raise InvalidParameter(f"max_iters must be >= 0, got {self.max_iters}")


@dataclass
class CompletionResult:
    Db_hat: np.ndarray
    X: np.ndarray
    S: np.ndarray
    Y: np.ndarray
    cost_trace: list = field(default_factory=list)
    grad_norms: list = field(default_factory=list)
    iterations: int = 0
    converged: bool = False
    unreliable_rows: list = field(default_factory=list)
    unreliable_cols: list = field(default_factory=list)

    @property
    def factors(self):
        return self.X, self.S, self.Y

    @property
    def cost(self) -> float:
        return self.cost_trace[-1] if self.cost_trace else math.nan


def estimate_sampling_rate(E: np.ndarray, n: int | None = None) -> float:
    """Fraction of off-diagonal ordered pairs present in ``E``."""
    E = np.asarray(E, dtype=bool)
    n = E.shape[0] if n is None else n
    if n < 2:
        raise InvalidParameter(f"n must be >= 2, got {n}")
    off = np.count_nonzero(E) - np.count_nonzero(np.diagonal(E))
    return off / (n * (n - 1))


def trim(M: np.ndarray, E: np.ndarray, seed=None) -> tuple[np.ndarray, np.ndarray]:
    """Thin out over-represented rows and columns.

    A row (column) holding more than twice the mean number of samples keeps
    ``ceil(2 * mean)`` of them, chosen uniformly at random.
    """
    E = np.array(E, dtype=bool)
    if not E.any():
        raise InvalidParameter("mask is empty")
    rng = np.random.default_rng(seed)
    row_cap = math.ceil(2 * E.sum(axis=1).mean())
    col_cap = math.ceil(2 * E.sum(axis=0).mean())
    out = E.copy()
    for i in np.flatnonzero(E.sum(axis=1) > 2 * E.sum(axis=1).mean()):
        idx = np.flatnonzero(out[i])
        if idx.size > row_cap:
            out[i, rng.choice(idx, idx.size - row_cap, replace=False)] = False
    counts = out.sum(axis=0)
    for j in np.flatnonzero(counts > 2 * E.sum(axis=0).mean()):
        idx = np.flatnonzero(out[:, j])
        if idx.size > col_cap:
            out[rng.choice(idx, idx.size - col_cap, replace=False), j] = False
    return np.where(out, M, 0.0), out


def _top_svd(M: np.ndarray, q: int):
    n = min(M.shape)
    if n <= 400 or q >= n - 1:
        U, s, Vt = np.linalg.svd(M, full_matrices=False)
        return U[:, :q], s[:q], Vt[:q].T, s
    v0 = np.ones(n) / np.sqrt(n)
    U, s, Vt = svds(M, k=q, v0=v0, tol=0)
    order = np.argsort(s)[::-1]
    s = s[order]
    return U[:, order], s, Vt[order].T, s


def rank_q_projection(M: np.ndarray, E: np.ndarray, q: int, p_hat: float) -> np.ndarray:
    """``(1/p_hat)`` times the best rank-``q`` approximation of the zero-filled observations."""
    M = np.asarray(M, dtype=float)
    if q > min(M.shape):
        raise InvalidParameter(f"rank {q} exceeds matrix size {M.shape}")
    if not p_hat > 0:
        raise InvalidParameter(f"p_hat must be positive, got {p_hat}")
    U, s, V, _ = _top_svd(np.where(E, M, 0.0), q)
    _check_rank(s)
    return (U * (s / p_hat)) @ V.T


def _check_rank(s: np.ndarray) -> None:
    if s.size and (s[0] == 0 or s[-1] / s[0] < 1e-12):
        warnings.warn(
            f"observed matrix is numerically rank deficient (sigma_q/sigma_1 = "
            f"{(s[-1] / s[0]) if s[0] else 0.0:.3e})",
            RankDeficientWarning,
            stacklevel=3,
        )


def objective(X, S, Y, M, W) -> float:
    """Half the squared residual over the observed entries."""
    R = W * (X @ S @ Y.T - M)
    return 0.5 * float(np.vdot(R, R))


def objective_gradient(X, S, Y, M, W):
    """Euclidean gradient of ``objective`` with respect to ``X`` and ``Y`` at fixed ``S``."""
    R = W * (X @ S @ Y.T - M)
    return R @ Y @ S.T, R.T @ X @ S


def solve_core(X, Y, M, W) -> np.ndarray:
    """Least-squares ``S`` minimizing the observed residual for fixed ``X``, ``Y``.

    Normal equations over the ``q*q`` unknowns, assembled from row-wise outer
    products so the cost stays ``O(n^2 q^2)``.
    """
    n, q = X.shape
    Kx = (X[:, :, None] * X[:, None, :]).reshape(n, q * q)
    Ky = (Y[:, :, None] * Y[:, None, :]).reshape(Y.shape[0], q * q)
    G = Kx.T @ (W @ Ky)
    A = G.reshape(q, q, q, q).transpose(0, 2, 1, 3).reshape(q * q, q * q)
    b = (X.T @ (W * M) @ Y).reshape(q * q)
    try:
        s = np.linalg.solve(A, b)
    except np.linalg.LinAlgError:
        s = np.linalg.lstsq(A, b, rcond=None)[0]
    return s.reshape(q, q)


def _retract(Z: np.ndarray) -> np.ndarray:
    Q, R = np.linalg.qr(Z)
    # keep column signs continuous with the unretracted point
    sign = np.sign(np.diagonal(R))
    sign[sign == 0] = 1.0
    return Q * sign


def _project(X: np.ndarray, G: np.ndarray) -> np.ndarray:
    return G - X @ (X.T @ G)


def _quartic_step(r0, r1, r2) -> float | None:
    """Minimizer over t > 0 of ``0.5 * ||r0 + t r1 + t^2 r2||^2``."""
    a = np.vdot(r2, r2)
    b = 2 * np.vdot(r1, r2)
    c = np.vdot(r1, r1) + 2 * np.vdot(r0, r2)
    d = 2 * np.vdot(r0, r1)
    # stationary points of a t^4 + b t^3 + c t^2 + d t
    roots = np.roots([4 * a, 3 * b, 2 * c, d])
    real = roots[np.abs(roots.imag) <= 1e-12 * max(1.0, np.abs(roots).max())].real
    real = real[real > 0]
    if real.size == 0:
        return None

    def f(t):
        return a * t**4 + b * t**3 + c * t**2 + d * t

    return float(min(real, key=f))


@dataclass
class _Descent:
    X: np.ndarray
    Y: np.ndarray
    S: np.ndarray
    R: np.ndarray
    cost: float
    trace: list
    gnorms: list
    iters_left: int
    stalled: bool = False


def _residual(X, S, Y, MW, W):
    R = W * (X @ S @ Y.T - MW)
    return R, 0.5 * float(np.vdot(R, R))


def _descend(X, Y, MW, W, max_iters, rel_tol, prev: _Descent | None = None) -> _Descent:
    """Conjugate-gradient descent on the Grassmann pair with QR retraction.

    The step length minimizes the (quartic) fixed-core objective along the
    search direction, then backtracks by halving until the Armijo condition
    holds. After the retraction the core is re-solved, so every accepted step
    lowers ``F(X, Y)``.
    """
    S = solve_core(X, Y, MW, W)
    R, cost = _residual(X, S, Y, MW, W)
    if prev is None:
        trace, gnorms = [cost], []
    else:
        trace, gnorms = prev.trace, prev.gnorms
        trace.append(cost)
    floor = 1e-30 * max(0.5 * float(np.vdot(MW, MW)), 1e-300)
    state = _Descent(X, Y, S, R, cost, trace, gnorms, max_iters)
    dX = dY = gX_prev = gY_prev = None

    while state.iters_left > 0:
        if state.cost <= floor:
            return state
        gX = _project(X, R @ Y @ S.T)
        gY = _project(Y, R.T @ X @ S)
        gsq = float(np.vdot(gX, gX) + np.vdot(gY, gY))
        gnorms.append(math.sqrt(gsq))
        if gsq == 0.0:
            state.stalled = True
            return state

        # Polak-Ribiere+; the previous direction is carried to the new
        # tangent space by projection
        if dX is None:
            dX, dY = -gX, -gY
        else:
            pgX, pgY = _project(X, gX_prev), _project(Y, gY_prev)
            prev_sq = float(np.vdot(gX_prev, gX_prev) + np.vdot(gY_prev, gY_prev))
            beta = max(0.0, float(np.vdot(gX, gX - pgX) + np.vdot(gY, gY - pgY)) / prev_sq)
            dX, dY = -gX + beta * _project(X, dX), -gY + beta * _project(Y, dY)
            if float(np.vdot(dX, gX) + np.vdot(dY, gY)) >= 0:
                dX, dY = -gX, -gY
        slope = float(np.vdot(dX, gX) + np.vdot(dY, gY))
        gX_prev, gY_prev = gX, gY

        r1 = W * (dX @ S @ Y.T + X @ S @ dY.T)
        r2 = W * (dX @ S @ dY.T)
        t = _quartic_step(R, r1, r2)
        if t is None or not np.isfinite(t):
            t = 1.0 / math.sqrt(gsq)
        for _ in range(MAX_HALVINGS + 1):
            Rt = R + t * r1 + (t * t) * r2
            if 0.5 * float(np.vdot(Rt, Rt)) <= state.cost + ARMIJO * t * slope:
                break
            t *= 0.5
        else:
            state.stalled = True
            return state

        X_new = _retract(X + t * dX)
        Y_new = _retract(Y + t * dY)
        S_new = solve_core(X_new, Y_new, MW, W)
        R_new, new_cost = _residual(X_new, S_new, Y_new, MW, W)
        if not new_cost <= state.cost:
            state.stalled = True
            return state
        rel = (state.cost - new_cost) / state.cost
        X, Y, S, R = X_new, Y_new, S_new, R_new
        state.X, state.Y, state.S, state.R, state.cost = X, Y, S, R, new_cost
        state.iters_left -= 1
        trace.append(new_cost)
        if rel < rel_tol:
            return state
    return state


def _refresh_weak_direction(state: _Descent, MW, W, p_hat):
    """Swap the weakest core direction for the residual's leading singular pair.

    A column whose core weight has collapsed receives no gradient, so plain
    descent cannot repair a bad spectral start there. Returns new ``(X, Y)``
    only when the swap lowers the objective.
    """
    A, sig, Bt = np.linalg.svd(state.S)
    U1, s1, V1, _ = _top_svd(state.R, 1)
    if s1[0] / p_hat <= sig[-1]:
        return None
    X = state.X @ A
    Y = state.Y @ Bt.T
    u = _project(X[:, :-1], U1[:, 0])
    v = _project(Y[:, :-1], V1[:, 0])
    if np.linalg.norm(u) < 1e-8 or np.linalg.norm(v) < 1e-8:
        return None
    X[:, -1] = u / np.linalg.norm(u)
    Y[:, -1] = v / np.linalg.norm(v)
    X, Y = _retract(X), _retract(Y)
    S = solve_core(X, Y, MW, W)
    _, cost = _residual(X, S, Y, MW, W)
    if not cost < state.cost:
        return None
    return X, Y


def optspace_complete(values: np.ndarray, mask: np.ndarray, opts: CompletionOptions | None = None,
                      init=None) -> CompletionResult:
    """Complete ``values`` from the entries flagged in ``mask`` at rank ``opts.rank``.

    Parameters
    ----------
    values : (n, n) array
        Observed entries; anything outside ``mask`` is ignored.
    mask : (n, n) bool array
        Known entries. It may include the diagonal.
    opts : CompletionOptions
    init : tuple (X, Y), optional
        Starting factors replacing the spectral start; orthonormalized first.

    Returns
    -------
    CompletionResult
        ``converged`` is False when ``max_iters`` ran out; rows or columns
        without a single off-diagonal sample are listed as unreliable.
    """
    opts = opts or CompletionOptions()
    M = np.asarray(values, dtype=float)
    E = np.asarray(mask, dtype=bool)
    n, m = M.shape
    q = opts.rank
    if M.shape != E.shape:
        raise InvalidParameter(f"values {M.shape} and mask {E.shape} differ")
    if not E.any():
        raise InvalidParameter("mask is empty")
    if q > min(n, m):
        raise InvalidParameter(f"rank {q} exceeds matrix size {M.shape}")

    off = E.copy()
    if n == m:
        np.fill_diagonal(off, False)
    bad_rows = [int(i) for i in np.flatnonzero(~off.any(axis=1))]
    bad_cols = [int(j) for j in np.flatnonzero(~off.any(axis=0))]
    if bad_rows or bad_cols:
        warnings.warn(
            f"rows {bad_rows} / columns {bad_cols} have no observations; their completion is unreliable",
            UnreliableRowsWarning,
            stacklevel=2,
        )

    if opts.trimming:
        M_t, E_t = trim(M, E, opts.seed)
    else:
        M_t, E_t = np.where(E, M, 0.0), E
    if opts.p_hat is not None:
        p_hat = opts.p_hat
    elif n == m:
        p_hat = estimate_sampling_rate(E_t)
    else:
        p_hat = np.count_nonzero(E_t) / E_t.size
    if not p_hat > 0:
        raise InvalidParameter("sampling rate estimate is zero")

    W = E.astype(float)
    MW = np.where(E, M, 0.0)
    if init is None:
        U, s, V, _ = _top_svd(M_t, q)
        _check_rank(s)
        X, Y = U, V
    else:
        X, Y = _retract(np.asarray(init[0], float)), _retract(np.asarray(init[1], float))

    state = _descend(X, Y, MW, W, opts.max_iters, opts.rel_tol)
    for _ in range(2 * q if opts.refresh else 0):
        if state.iters_left <= 0:
            break
        swapped = _refresh_weak_direction(state, MW, W, p_hat)
        if swapped is None:
            break
        state = _descend(swapped[0], swapped[1], MW, W, state.iters_left, opts.rel_tol, state)

    X, S, Y = state.X, state.S, state.Y
    return CompletionResult(
        Db_hat=X @ S @ Y.T,
        X=X,
        S=S,
        Y=Y,
        cost_trace=state.trace,
        grad_norms=state.gnorms,
        iterations=opts.max_iters - state.iters_left,
        converged=state.iters_left > 0,
        unreliable_rows=bad_rows,
        unreliable_cols=bad_cols,
    )
