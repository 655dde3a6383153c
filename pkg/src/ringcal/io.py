"""File formats: layouts/positions CSV, observation sets, traces and cost curves."""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np
import scipy.io
from scipy.sparse import coo_matrix

from .embedding import PositionEstimate, procrustes_align
from .geometry import SensorLayout
from .observation import MaskPair, ObservationSet

FORMAT_VERSION = 1


def write_positions_csv(path, coords) -> Path:
    """Write ``index,x_m,y_m`` rows; floats use ``repr`` so reads are bit-exact."""
    if isinstance(coords, SensorLayout):
        coords = coords.positions
    elif isinstance(coords, PositionEstimate):
        coords = coords.coords
    coords = np.asarray(coords, dtype=float)
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["index", "x_m", "y_m"])
        for i, (x, y) in enumerate(coords):
            w.writerow([i, repr(float(x)), repr(float(y))])
    return path


write_layout_csv = write_positions_csv


def read_positions_csv(path) -> np.ndarray:
    with Path(path).open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = np.empty((len(rows), 2))
    for row in rows:
        out[int(row["index"])] = float(row["x_m"]), float(row["y_m"])
    return out


def read_layout_csv(path, r0: float, a: float, seed=None) -> SensorLayout:
    pos = read_positions_csv(path)
    return SensorLayout(pos, r0, a, seed, np.hypot(pos[:, 0], pos[:, 1]) - r0)


def write_estimate_csv(path, estimate, reference=None) -> Path:
    """Estimated coordinates, optionally rigidly aligned onto ``reference`` first."""
    coords = estimate.coords if isinstance(estimate, PositionEstimate) else np.asarray(estimate)
    if reference is not None:
        ref = reference.positions if isinstance(reference, SensorLayout) else reference
        coords = procrustes_align(ref, coords)
    return write_positions_csv(path, coords)


def _pairs(mask: np.ndarray) -> list:
    i, j = np.nonzero(mask)
    return [[int(a), int(b)] for a, b in zip(i, j)]


def _mask(pairs, n: int) -> np.ndarray:
    m = np.zeros((n, n), dtype=bool)
    if pairs:
        idx = np.asarray(pairs, dtype=int)
        m[idx[:, 0], idx[:, 1]] = True
    return m


def sidecar_path(path) -> Path:
    return Path(path).with_suffix(".json")


def write_observation(path, obs: ObservationSet) -> tuple[Path, Path]:
    """Observed values over ``E`` as a Matrix Market coordinate file, masks and
    metadata in a JSON file next to it.
    """
    path = Path(path)
    E = obs.masks.E
    i, j = np.nonzero(E)
    mat = coo_matrix((obs.values[i, j], (i, j)), shape=E.shape)
    scipy.io.mmwrite(str(path), mat, comment="observed time-of-flight distances (m)", precision=17)
    if path.suffix != ".mtx":
        # mmwrite appends .mtx to bare names
        written = path.with_name(path.name + ".mtx")
        if written.exists():
            written.replace(path)
    side = {
        "format_version": FORMAT_VERSION,
        "n": obs.n,
        "d0_true_m": obs.d0_true,
        "sigma_m": obs.sigma,
        "c0_m_per_s": obs.c0,
        "mode": obs.mode,
        "meta": obs.meta,
        "S": _pairs(obs.masks.S),
        "E": _pairs(E),
    }
    sc = sidecar_path(path)
    sc.write_text(json.dumps(side))
    return path, sc


def read_observation(path) -> ObservationSet:
    path = Path(path)
    side = json.loads(sidecar_path(path).read_text())
    n = int(side["n"])
    mat = scipy.io.mmread(str(path)).tocoo()
    values = np.zeros((n, n))
    values[mat.row, mat.col] = mat.data
    masks = MaskPair(_mask(side["S"], n), _mask(side["E"], n))
    return ObservationSet(
        values, masks, side["d0_true_m"], side["sigma_m"], side["c0_m_per_s"], side["mode"], side["meta"]
    )


def write_trace_csv(path, result) -> Path:
    """Per-iteration ``iteration,cost,grad_norm`` of a completion run."""
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["iteration", "cost", "grad_norm"])
        for k, c in enumerate(result.cost_trace):
            g = result.grad_norms[k] if k < len(result.grad_norms) else ""
            w.writerow([k, repr(float(c)), repr(float(g)) if g != "" else ""])
    return path


def write_cost_curve_csv(path, search_result) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["candidate_m", "cost"])
        for c, v in sorted(search_result.costs):
            w.writerow([repr(float(c)), repr(float(v))])
    return path
