"""Square, complete and embed an observation set for a given delay."""

from __future__ import annotations

import numpy as np

from .completion import CompletionOptions, CompletionResult, optspace_complete
from .embedding import PositionEstimate, classical_mds
from .observation import ObservationSet


def squared_observation(obs: ObservationSet, d0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Delay-corrected squared entries and the mask handed to completion.

    The delay is removed only where a real measurement exists; the diagonal is
    added to the mask as a known zero.
    """
    usable = obs.masks.usable
    vals = np.where(usable, obs.values - d0, 0.0)
    vals = vals * vals
    mask = obs.completion_mask
    np.fill_diagonal(mask, True)
    return vals, mask


def symmetrized(Db_hat: np.ndarray) -> np.ndarray:
    D = 0.5 * (Db_hat + Db_hat.T)
    np.fill_diagonal(D, 0.0)
    return D


def complete_observation(obs: ObservationSet, d0: float = 0.0,
                         opts: CompletionOptions | None = None) -> tuple[np.ndarray, CompletionResult]:
    vals, mask = squared_observation(obs, d0)
    res = optspace_complete(vals, mask, opts)
    return symmetrized(res.Db_hat), res


def localize(obs: ObservationSet, d0: float = 0.0, opts: CompletionOptions | None = None,
             eta: int = 2) -> tuple[PositionEstimate, np.ndarray, CompletionResult]:
    """Positions from an observation set whose delay is known."""
    Db_hat, res = complete_observation(obs, d0, opts)
    return classical_mds(Db_hat, eta, source="pipeline"), Db_hat, res
