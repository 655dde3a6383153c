"""Grid search for the unknown constant transmission delay."""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .completion import CompletionOptions, CompletionResult
from .embedding import PositionEstimate
from .errors import AllCandidatesFailed, InvalidParameter
from .observation import ObservationSet
from .pipeline import localize


@dataclass
class DelaySearchConfig:
    d_min: float = 0.0
    d_max: float | None = None  # None: half the ring radius
    M: int = 101
    refine: bool = True
    completion_opts: CompletionOptions = field(default_factory=CompletionOptions)
    eta: int = 2
    workers: int = 1

    def __post_init__(self):
        if self.M < 2:
            raise InvalidParameter(f"grid size must be >= 2, got {self.M}")
        if self.d_max is not None and self.d_min > self.d_max:
            raise InvalidParameter(f"d_min {self.d_min} exceeds d_max {self.d_max}")


@dataclass
class DelaySearchResult:
    d0_hat: float
    costs: list
    best_completion: CompletionResult | None
    best_positions: PositionEstimate | None
    coarse_d0: float = math.nan
    coarse_cost: float = math.nan
    step: float = math.nan  # spacing of the finest grid searched

    @property
    def cost(self) -> float:
        return min(c for _, c in self.costs)


def delay_cost(candidate: float, positions, obs: ObservationSet) -> float:
    """Squared misfit ``sum (d0 + |x_i - x_j| - N_ij)^2`` over measured pairs."""
    X = positions.coords if isinstance(positions, PositionEstimate) else np.asarray(positions, float)
    if X.shape[0] != obs.n:
        raise InvalidParameter(f"positions have {X.shape[0]} rows, observation has {obs.n}")
    i, j = np.nonzero(obs.masks.usable)
    dist = np.linalg.norm(X[i] - X[j], axis=1)
    r = candidate + dist - obs.values[i, j]
    return float(np.dot(r, r))


def _evaluate(obs, candidate, opts, eta):
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            pos, _, res = localize(obs, candidate, opts, eta)
        c = delay_cost(candidate, pos, obs)
    except (np.linalg.LinAlgError, ValueError, FloatingPointError):
        return math.inf, None, None
    if not math.isfinite(c):
        return math.inf, None, None
    return c, pos, res


def _evaluate_cost(args):
    obs, candidate, opts, eta = args
    return _evaluate(obs, candidate, opts, eta)[0]


def _scan(obs, grid, cfg):
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            costs = list(pool.map(_evaluate_cost, [(obs, c, cfg.completion_opts, cfg.eta) for c in grid]))
    else:
        costs = [_evaluate(obs, c, cfg.completion_opts, cfg.eta)[0] for c in grid]
    return [(float(c), float(v)) for c, v in zip(grid, costs)]


def _argmin(costs):
    # lowest candidate wins ties
    return min(costs, key=lambda cv: (cv[1], cv[0]))


def estimate_delay(obs: ObservationSet, cfg: DelaySearchConfig | None = None) -> DelaySearchResult:
    """Pick the delay whose corrected, completed and embedded geometry best
    reproduces the measured distances.

    Each candidate is removed from the measured entries, the result squared,
    completed at the configured rank and embedded; the candidate is scored on
    the measured pairs. With ``refine`` the search repeats once on a grid of
    the same size spanning the winner's two neighbours.
    """
    cfg = cfg or DelaySearchConfig()
    if not obs.masks.usable.any():
        raise InvalidParameter("observation has no measured pairs outside the close-pair set")
    d_max = cfg.d_max if cfg.d_max is not None else 0.5 * float(obs.meta.get("r0", 0.1))
    grid = np.linspace(cfg.d_min, d_max, cfg.M)
    step = grid[1] - grid[0]
    costs = _scan(obs, grid, cfg)
    coarse_d0, coarse_cost = _argmin(costs)
    if not math.isfinite(coarse_cost):
        raise AllCandidatesFailed(f"completion failed for all {cfg.M} delay candidates")

    if cfg.refine and step > 0:
        lo, hi = max(cfg.d_min, coarse_d0 - step), min(d_max, coarse_d0 + step)
        fine = np.linspace(lo, hi, cfg.M)
        seen = {c for c, _ in costs}
        costs = costs + _scan(obs, [c for c in fine if float(c) not in seen], cfg)
        costs.sort()
        step = fine[1] - fine[0]

    d0_hat, _ = _argmin(costs)
    _, pos, res = _evaluate(obs, d0_hat, cfg.completion_opts, cfg.eta)
    return DelaySearchResult(d0_hat, costs, res, pos, coarse_d0, coarse_cost, float(step))
