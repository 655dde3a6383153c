"""Reference localizers: MDS-MAP and a scaled zero-fill SVD reconstruction."""

from __future__ import annotations

from enum import Enum

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import connected_components, shortest_path

from .completion import estimate_sampling_rate
from .embedding import PositionEstimate, classical_mds
from .errors import DisconnectedGraph, InvalidParameter
from .observation import ObservationSet


class BaselineTag(str, Enum):
    MDS_MAP = "mds-map"
    SVD_RECONSTRUCT = "svd-reconstruct"


def measured_distances(obs: ObservationSet, d0: float = 0.0) -> tuple[np.ndarray, np.ndarray]:
    """Symmetric edge weights and adjacency from the measured pairs.

    A pair measured in both orders gets the mean of the two values.
    """
    usable = obs.masks.usable
    vals = np.where(usable, obs.values - d0, 0.0)
    cnt = usable.astype(float) + usable.T
    adj = cnt > 0
    w = np.divide(vals + vals.T, cnt, out=np.zeros_like(vals), where=adj)
    return w, adj


def shortest_path_fill(weights: np.ndarray, adjacency: np.ndarray) -> np.ndarray:
    """All-pairs shortest-path lengths over a weighted undirected graph."""
    n = weights.shape[0]
    i, j = np.nonzero(np.triu(adjacency, 1))
    # csgraph drops zero weights, so keep every edge strictly positive
    data = np.maximum(weights[i, j], np.finfo(float).tiny)
    G = csr_matrix((data, (i, j)), shape=(n, n))
    ncomp, labels = connected_components(G, directed=False)
    if ncomp > 1:
        raise DisconnectedGraph([np.flatnonzero(labels == k) for k in range(ncomp)])
    D = shortest_path(G, method="D", directed=False)
    # the two directions can sum the same path in a different order
    return np.minimum(D, D.T)


def mds_map(obs: ObservationSet, d0: float = 0.0, eta: int = 2) -> PositionEstimate:
    """Fill every pair with its shortest-path length, square, embed."""
    w, adj = measured_distances(obs, d0)
    D = shortest_path_fill(w, adj)
    return classical_mds(D * D, eta, source=BaselineTag.MDS_MAP.value)


def svd_reconstruct(obs: ObservationSet, d0: float = 0.0, eta: int = 2) -> PositionEstimate:
    """Classical MDS on zero-filled squared distances rescaled by ``1/p``.

    This is the simplified form of the cited estimator with all measured
    pairs assumed connected with the same probability and no noise variance
    term.
    """
    usable = obs.masks.usable
    if not usable.any():
        raise InvalidParameter("no measured pairs")
    p_hat = estimate_sampling_rate(usable)
    sq = np.where(usable, obs.values - d0, 0.0) ** 2 / p_hat
    return classical_mds(0.5 * (sq + sq.T), eta, source=BaselineTag.SVD_RECONSTRUCT.value)


def run_baseline(tag, obs: ObservationSet, d0: float = 0.0, eta: int = 2) -> PositionEstimate:
    tag = BaselineTag(tag)
    if tag is BaselineTag.MDS_MAP:
        return mds_map(obs, d0, eta)
    return svd_reconstruct(obs, d0, eta)
