"""Seeded experiment sweeps: configs, single trials, CSV and aggregate output."""

from __future__ import annotations

import csv
import hashlib
import itertools
import json
import math
import time
import warnings
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np

from .baselines import BaselineTag, run_baseline
from .completion import CompletionOptions
from .delay import DelaySearchConfig, estimate_delay
from .embedding import position_distance
from .errors import ConfigError
from .geometry import generate_ring_layout, pairwise_distance_matrix
from .observation import MODES, synthesize_observation
from .pipeline import localize
from .units import parse_length, parse_time

METHODS = ("pipeline", "pipeline-delay", BaselineTag.MDS_MAP.value, BaselineTag.SVD_RECONSTRUCT.value)
SWEEP_VARS = ("n", "a", "sigma", "method")
LENGTH_FIELDS = ("r0", "a", "sigma", "d0")


@dataclass
class ExperimentConfig:
    experiment_id: str = "experiment"
    sweep: str = "n"
    n: list = field(default_factory=lambda: [200])
    a: list = field(default_factory=lambda: [0.01])
    sigma: list = field(default_factory=lambda: [0.0])
    method: list = field(default_factory=lambda: ["pipeline"])
    r0: float = 0.1
    delta: float = 1.0
    p_miss: float = 0.05
    d0: float = 0.0
    c0: float = 1500.0
    eta: int = 2
    trials: int = 10
    seed: int = 0
    mode: str = "practical"
    out: str | None = None
    workers: int = 1
    completion: dict = field(default_factory=dict)
    delay: dict = field(default_factory=dict)

    def validate(self) -> "ExperimentConfig":
        for name in ("n", "a", "sigma", "method"):
            v = getattr(self, name)
            if not isinstance(v, list):
                setattr(self, name, [v])
            if not getattr(self, name):
                raise ConfigError(f"field {name!r}: value list is empty")
        if self.sweep not in SWEEP_VARS:
            raise ConfigError(f"field 'sweep': expected one of {SWEEP_VARS}, got {self.sweep!r}")
        if self.trials < 1:
            raise ConfigError(f"field 'trials': must be >= 1, got {self.trials}")
        if self.mode not in MODES:
            raise ConfigError(f"field 'mode': expected one of {MODES}, got {self.mode!r}")
        for m in self.method:
            if m not in METHODS:
                raise ConfigError(f"field 'method': unknown method {m!r}; expected one of {METHODS}")
        for n in self.n:
            if not isinstance(n, int) or n < 5:
                raise ConfigError(f"field 'n': sensor counts must be integers >= 5, got {n!r}")
        if not self.r0 > 0:
            raise ConfigError(f"field 'r0': must be positive, got {self.r0}")
        for a in self.a:
            if not 0 <= a < 2 * self.r0:
                raise ConfigError(f"field 'a': need 0 <= a < 2*r0, got {a}")
        for s in self.sigma:
            if s < 0:
                raise ConfigError(f"field 'sigma': must be nonnegative, got {s}")
        if self.d0 < 0 or self.c0 <= 0 or self.delta < 0:
            raise ConfigError("fields 'd0', 'c0', 'delta': need d0 >= 0, c0 > 0, delta >= 0")
        if not 0 <= self.p_miss < 1:
            raise ConfigError(f"field 'p_miss': must lie in [0, 1), got {self.p_miss}")
        try:
            self.completion_options()
            self.delay_config()
        except (TypeError, ValueError) as exc:
            raise ConfigError(f"field 'completion'/'delay': {exc}") from exc
        return self

    def completion_options(self) -> CompletionOptions:
        return CompletionOptions(**self.completion)

    def delay_config(self) -> DelaySearchConfig:
        kw = dict(self.delay)
        for key in ("d_min", "d_max"):
            if kw.get(key) is not None:
                kw[key] = parse_length(kw[key])
        return DelaySearchConfig(completion_opts=self.completion_options(), eta=self.eta, **kw)

    def points(self) -> list:
        """Grid of config points, one per combination of the listed values."""
        return [
            ConfigPoint(n, float(a), float(s), m)
            for m, n, a, s in itertools.product(self.method, self.n, self.a, self.sigma)
        ]

    def sweep_value(self, point) -> object:
        return getattr(point, self.sweep)

    def series(self, point) -> str:
        """Label of the curve a point belongs to: the non-swept grid axes."""
        parts = [
            f"{name}={getattr(point, name)!r}"
            for name in ("n", "a", "sigma")
            if name != self.sweep and len(getattr(self, name)) > 1
        ]
        return ",".join(parts)


@dataclass(frozen=True)
class ConfigPoint:
    n: int
    a: float
    sigma: float
    method: str


@dataclass
class ExperimentRecord:
    experiment_id: str
    method: str
    n: int
    r0_m: float
    a_m: float
    delta: float
    p_miss: float
    sigma_m: float
    d0_true_m: float
    d0_est_m: float
    trial: int
    seed: int
    d_metric_m2: float
    matrix_rel_err: float
    runtime_ms: float
    status: str = "ok"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


RECORD_FIELDS = [f.name for f in fields(ExperimentRecord)]
AGG_FIELDS = ["sweep_value", "method", "series", "mean_d_metric", "std_d_metric", "n_trials"]


def trial_seed(master_seed: int, cfg: ExperimentConfig, point: ConfigPoint, trial: int) -> int:
    """Stable 63-bit seed for one trial.

    The method is left out of the key so every method sees the same layout,
    noise and masks for a given trial.
    """
    key = json.dumps(
        [int(master_seed), point.n, repr(point.a), repr(point.sigma), repr(cfg.r0), repr(cfg.delta),
         repr(cfg.p_miss), repr(cfg.d0), int(trial)]
    )
    return int.from_bytes(hashlib.sha256(key.encode()).digest()[:8], "little") >> 1


def run_trial(cfg: ExperimentConfig, point: ConfigPoint, trial: int) -> ExperimentRecord:
    """Simulate, localize and score one trial; failures become tagged records."""
    seed = trial_seed(cfg.seed, cfg, point, trial)
    rec = ExperimentRecord(
        cfg.experiment_id, point.method, point.n, cfg.r0, point.a, cfg.delta, cfg.p_miss, point.sigma,
        cfg.d0, math.nan, trial, seed, math.nan, math.nan, 0.0,
    )
    t_start = time.perf_counter()
    try:
        layout_seed, obs_seed = (int(s) for s in np.random.SeedSequence(seed).generate_state(2))
        layout = generate_ring_layout(point.n, cfg.r0, point.a, layout_seed)
        obs = synthesize_observation(
            layout, cfg.delta, 1.0 - cfg.p_miss, point.sigma, cfg.d0, obs_seed, mode=cfg.mode, c0=cfg.c0
        )
        D = pairwise_distance_matrix(layout)
        Db = D * D
        with warnings.catch_warnings():
            warnings.simplefilter("ignore")
            if point.method == "pipeline":
                est, Db_hat, _ = localize(obs, cfg.d0, cfg.completion_options(), cfg.eta)
                rec.d0_est_m = cfg.d0
            elif point.method == "pipeline-delay":
                res = estimate_delay(obs, cfg.delay_config())
                est = res.best_positions
                rec.d0_est_m = res.d0_hat
                Db_hat = 0.5 * (res.best_completion.Db_hat + res.best_completion.Db_hat.T)
                np.fill_diagonal(Db_hat, 0.0)
            else:
                est = run_baseline(point.method, obs, cfg.d0, cfg.eta)
                rec.d0_est_m = cfg.d0
                diff = est.coords[:, None, :] - est.coords[None, :, :]
                Db_hat = np.einsum("ijk,ijk->ij", diff, diff)
        rec.d_metric_m2 = position_distance(layout.positions, est.coords)
        rec.matrix_rel_err = float(np.linalg.norm(Db - Db_hat) / np.linalg.norm(Db))
    except Exception as exc:  # noqa: BLE001 - a sweep must survive any single trial
        rec.status = f"error: {type(exc).__name__}: {exc}"
    rec.runtime_ms = (time.perf_counter() - t_start) * 1e3
    return rec


def _run_job(job):
    cfg, point, trial = job
    return run_trial(cfg, point, trial)


def aggregate(cfg: ExperimentConfig, records: list) -> list:
    """Mean and sample standard deviation of ``d_metric_m2`` per curve point."""
    groups: dict = {}
    for point in cfg.points():
        groups.setdefault((cfg.sweep_value(point), point.method, cfg.series(point)), [])
    for r in records:
        point = ConfigPoint(r.n, r.a_m, r.sigma_m, r.method)
        if r.ok:
            groups[(cfg.sweep_value(point), point.method, cfg.series(point))].append(r.d_metric_m2)
    rows = []
    for (value, method, series), vals in groups.items():
        arr = np.asarray(vals, dtype=float)
        rows.append({
            "sweep_value": value,
            "method": method,
            "series": series,
            "mean_d_metric": float(arr.mean()) if arr.size else math.nan,
            "std_d_metric": float(arr.std(ddof=1)) if arr.size > 1 else 0.0,
            "n_trials": int(arr.size),
        })
    return rows


def _fmt(v):
    return repr(v) if isinstance(v, float) else str(v)


def write_records_csv(path, records) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RECORD_FIELDS)
        for r in records:
            w.writerow([_fmt(v) for v in asdict(r).values()])
    return path


def read_records_csv(path) -> list:
    types = {f.name: f.type for f in fields(ExperimentRecord)}
    out = []
    with Path(path).open(newline="") as fh:
        for row in csv.DictReader(fh):
            kw = {}
            for k, v in row.items():
                t = types[k]
                kw[k] = int(v) if t == "int" else float(v) if t == "float" else v
            out.append(ExperimentRecord(**kw))
    return out


def agg_path(path) -> Path:
    path = Path(path)
    stem = path.name[: -len(".csv")] if path.name.endswith(".csv") else path.name
    return path.with_name(stem + ".agg.csv")


def write_aggregate_csv(path, rows) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=AGG_FIELDS)
        w.writeheader()
        for row in rows:
            w.writerow({k: _fmt(v) for k, v in row.items()})
    return path


def write_curves(path, rows) -> list:
    """Two-column ``sweep_value mean_d_metric`` files, one per method and series."""
    path = Path(path)
    stem = path.name[: -len(".csv")] if path.name.endswith(".csv") else path.name
    curves: dict = {}
    for row in rows:
        curves.setdefault((row["method"], row["series"]), []).append(row)
    written = []
    for (method, series), pts in curves.items():
        tag = method + (("." + series.replace(",", ".").replace("=", "")) if series else "")
        p = path.with_name(f"{stem}.{tag}.dat")
        with p.open("w") as fh:
            fh.write(f"# {method} {series}\n# sweep_value mean_d_metric_m2\n")
            for r in pts:
                fh.write(f"{_fmt(r['sweep_value'])} {_fmt(r['mean_d_metric'])}\n")
        written.append(p)
    return written


def run_sweep(cfg: ExperimentConfig, write: bool = True) -> tuple[list, list]:
    """Run every (point, trial) job and reduce in job order.

    Returns ``(records, aggregate_rows)``; with an ``out`` path set, writes the
    record CSV, the ``.agg.csv`` file and one ``.dat`` curve per method/series.
    """
    cfg.validate()
    jobs = [(cfg, point, t) for point in cfg.points() for t in range(cfg.trials)]
    if cfg.workers > 1:
        with ProcessPoolExecutor(cfg.workers) as pool:
            records = list(pool.map(_run_job, jobs))
    else:
        records = [_run_job(j) for j in jobs]
    rows = aggregate(cfg, records)
    if write and cfg.out:
        write_records_csv(cfg.out, records)
        write_aggregate_csv(agg_path(cfg.out), rows)
        write_curves(cfg.out, rows)
    return records, rows


def config_from_dict(raw: dict) -> ExperimentConfig:
    """Build a config from parsed JSON, converting unit-suffixed strings.

    ``t0`` (a time) may replace ``d0``; it is multiplied by ``c0``.
    """
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    known = {f.name for f in fields(ExperimentConfig)} | {"t0", "comment"}
    for key in raw:
        if key not in known:
            raise ConfigError(f"field {key!r}: unknown field")
    kw = {k: v for k, v in raw.items() if k not in ("t0", "comment")}
    try:
        for name in LENGTH_FIELDS:
            if name in kw:
                v = kw[name]
                kw[name] = [parse_length(x) for x in v] if isinstance(v, list) else parse_length(v)
        if "c0" in kw:
            kw["c0"] = float(kw["c0"])
        if "t0" in raw:
            if "d0" in raw:
                raise ConfigError("fields 't0' and 'd0' are mutually exclusive")
            kw["d0"] = parse_time(raw["t0"]) * kw.get("c0", 1500.0)
    except ValueError as exc:
        if isinstance(exc, ConfigError):
            raise
        raise ConfigError(f"field {name!r}: {exc}") from exc
    if "n" in kw:
        kw["n"] = kw["n"] if isinstance(kw["n"], list) else [kw["n"]]
    if "method" in kw and not isinstance(kw["method"], list):
        kw["method"] = [kw["method"]]
    return ExperimentConfig(**kw).validate()


def load_config(path) -> ExperimentConfig:
    text = Path(path).read_text()
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}, column {exc.colno}: {exc.msg}") from exc
    try:
        return config_from_dict(raw)
    except ConfigError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# Parameter sets behind the demo subcommands. Lengths in meters.
PRESETS = {
    "fig5": dict(
        experiment_id="fig5", sweep="n", n=[200, 700, 1200, 1700], a=[0.002, 0.005, 0.01, 0.02],
        sigma=[0.0], method=["pipeline"], r0=0.1, delta=1.0, p_miss=0.05, d0=0.0, trials=10,
    ),
    "fig6": dict(
        experiment_id="fig6", sweep="n", n=[200, 700, 1200, 1700], a=[0.01],
        sigma=[0.0006, 0.003, 0.006, 0.01], method=["pipeline"], r0=0.1, delta=1.0, p_miss=0.05, d0=0.0,
        trials=10,
    ),
    "fig7": dict(
        experiment_id="fig7", sweep="n", n=[25, 50, 100, 200, 400, 800, 1600], a=[0.01], sigma=[0.0006],
        method=["pipeline", "mds-map", "svd-reconstruct"], r0=0.1, delta=1.0, p_miss=0.05, d0=0.0, trials=10,
    ),
    # delta chosen so the close-pair threshold is 3 cm at n = 200
    "fig8": dict(
        experiment_id="fig8", sweep="n", n=[200], a=[0.01], sigma=[0.0], method=["pipeline-delay"],
        r0=0.1, delta=0.03 / (0.1 * math.sqrt(math.log(200) / 200)), p_miss=0.05, d0=1500.0 * 10e-6,
        c0=1500.0, trials=1, delay={"d_min": 0.0, "d_max": 0.05, "M": 101, "refine": True},
    ),
}


def preset(name: str, **overrides) -> ExperimentConfig:
    raw = dict(PRESETS[name])
    raw.update({k: v for k, v in overrides.items() if v is not None})
    return ExperimentConfig(**raw).validate()
