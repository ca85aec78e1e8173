"""Experiment harness: (A, T) grids, NM-vs-fidelity families, matched-NM search."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import time
import zlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy import stats

from .control import OptimizationConfig, optimize
from .nonmarkov import DEFAULT_SAMPLES, blp_measure
from .spinstar import SpinStarModel, TargetKind, target_state

log = logging.getLogger(__name__)

EXPERIMENTS = ("grid", "nm_family", "matched_nm", "single")
FORMATS = ("csv", "json")
CSV_HEADER = (
    "m", "n", "coupling", "coupling_mode", "total_time", "target",
    "nm", "fidelity", "iterations", "wall_time_s",
)
MAX_GRID_AXIS = 20
MAX_SWEEP_SPINS = 8
MATCH_TOL = 5e-3

# Seven series at T = 10 with a Bell target: one A-varying series at fixed N and
# six N-varying series at fixed A.  Only the scaled A = 0.2 series is taken from
# the published figure; the other couplings are our own choices.
DEFAULT_NM_FAMILY = [
    {"label": "A-varying n=4", "n_values": [4], "couplings": [0.0, 0.05, 0.1, 0.15, 0.2], "coupling_mode": "unscaled"},
    {"label": "scaled A=0.2", "n_values": [3, 4, 5, 6, 7, 8], "couplings": [0.2], "coupling_mode": "scaled"},
    {"label": "scaled A=0.15", "n_values": [3, 4, 5, 6, 7, 8], "couplings": [0.15], "coupling_mode": "scaled"},
    {"label": "scaled A=0.1", "n_values": [3, 4, 5, 6, 7, 8], "couplings": [0.1], "coupling_mode": "scaled"},
    {"label": "unscaled A=0.1", "n_values": [3, 4, 5, 6, 7, 8], "couplings": [0.1], "coupling_mode": "unscaled"},
    {"label": "unscaled A=0.075", "n_values": [3, 4, 5, 6, 7, 8], "couplings": [0.075], "coupling_mode": "unscaled"},
    {"label": "unscaled A=0.05", "n_values": [3, 4, 5, 6, 7, 8], "couplings": [0.05], "coupling_mode": "unscaled"},
]

EXPERIMENT_DEFAULTS: dict[str, dict[str, Any]] = {
    "grid": {
        "m": 3, "n": 5, "target": "ghz",
        "couplings": [0.05, 0.1, 0.15, 0.2], "times": [2.5, 5.0, 7.5, 10.0],
    },
    "nm_family": {"m": 2, "target": "bell", "total_time": 10.0, "family": DEFAULT_NM_FAMILY},
    "matched_nm": {
        "m": 2, "n": 5, "target": "bell", "total_time": 10.0,
        "reference": {"n": 8, "coupling": 0.2, "coupling_mode": "scaled"},
        "bracket": [0.1, 0.2],
    },
    "single": {"m": 2, "n": 3, "coupling": 0.2, "target": "bell", "total_time": 10.0},
}


class ConfigError(ValueError):
    """The sweep specification is malformed."""


class BracketError(ValueError):
    """The coupling bracket does not straddle the requested NM value."""


class SweepFailure(RuntimeError):
    """One or more sweep points failed; ``records`` holds the ones that succeeded."""

    def __init__(self, failures: list[dict], records: list["SweepRecord"]):
        self.failures = failures
        self.records = records
        points = ", ".join(f"{f['key']}: {f['error']}" for f in failures)
        super().__init__(f"{len(failures)} sweep point(s) failed: {points}")


@dataclass
class SweepSpec:
    experiment: str = "single"
    m: int = 2
    n: int = 3
    coupling: float = 0.0
    couplings: list[float] = field(default_factory=list)
    coupling_mode: str = "unscaled"
    total_time: float = 10.0
    times: list[float] = field(default_factory=list)
    target: str = "bell"
    family: list[dict] = field(default_factory=list)
    reference: dict = field(default_factory=dict)
    target_nm: float | None = None
    bracket: list[float] = field(default_factory=lambda: [0.0, 0.2])
    omega0: float = 2.0
    basis: str = "collective"
    nm_samples: int = DEFAULT_SAMPLES
    run_optimizer: bool = True
    optimization: OptimizationConfig = field(default_factory=OptimizationConfig)
    seed: int = 0
    parallelism: int = 1
    output: str | None = None
    format: str = "csv"

    @classmethod
    def from_dict(cls, data: dict) -> "SweepSpec":
        data = dict(data)
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        opt = data.pop("optimization", {}) or {}
        if isinstance(opt, dict):
            bad = set(opt) - {f.name for f in dataclasses.fields(OptimizationConfig)}
            if bad:
                raise ConfigError(f"unknown optimization keys: {sorted(bad)}")
            try:
                opt = OptimizationConfig(**opt)
            except (TypeError, ValueError) as exc:
                raise ConfigError(str(exc)) from exc
        spec = cls(optimization=opt, **data)
        spec.validate()
        return spec

    @classmethod
    def defaults_for(cls, experiment: str, **overrides) -> "SweepSpec":
        if experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        data = {"experiment": experiment, **EXPERIMENT_DEFAULTS[experiment], **overrides}
        return cls.from_dict(data)

    def to_dict(self) -> dict:
        out = dataclasses.asdict(self)
        out["optimization"] = self.optimization.to_dict()
        return out

    def validate(self) -> None:
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(f"experiment must be one of {EXPERIMENTS}")
        if self.format not in FORMATS:
            raise ConfigError(f"format must be one of {FORMATS}")
        if self.parallelism < 1:
            raise ConfigError("parallelism must be >= 1")
        try:
            TargetKind(self.target)
        except ValueError as exc:
            raise ConfigError(f"unknown target {self.target!r}") from exc
        if self.experiment == "grid":
            if len(self.couplings) < 2 or len(self.times) < 2:
                raise ConfigError("grid needs at least 2 couplings and 2 times")
            if len(self.couplings) > MAX_GRID_AXIS or len(self.times) > MAX_GRID_AXIS:
                raise ConfigError(f"grid axes are capped at {MAX_GRID_AXIS} points")
        if self.experiment == "nm_family" and not self.family:
            raise ConfigError("nm_family needs a non-empty family")
        if self.experiment == "matched_nm":
            if len(self.bracket) != 2 or self.bracket[0] >= self.bracket[1]:
                raise ConfigError("bracket must be [low, high] with low < high")
            if self.target_nm is None and not self.reference:
                raise ConfigError("matched_nm needs target_nm or a reference configuration")
        for model in self.models():
            if model.n > MAX_SWEEP_SPINS:
                raise ConfigError(f"sweeps are capped at n <= {MAX_SWEEP_SPINS}")
            try:
                target_state(self.target, model.m)
            except ValueError as exc:
                raise ConfigError(str(exc)) from exc

    def make_model(self, n=None, coupling=None, coupling_mode=None) -> SpinStarModel:
        try:
            return SpinStarModel(
                m=self.m,
                n=self.n if n is None else n,
                coupling=self.coupling if coupling is None else coupling,
                coupling_mode=coupling_mode or self.coupling_mode,
                omega0=self.omega0,
                basis=self.basis,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def models(self) -> list[SpinStarModel]:
        if self.experiment == "grid":
            return [self.make_model(coupling=a) for a in self.couplings]
        if self.experiment == "nm_family":
            return [p[1] for p in family_points(self)]
        if self.experiment == "matched_nm" and self.reference:
            return [self.make_model(), self.make_model(**self.reference)]
        return [self.make_model()]


@dataclass
class SweepRecord:
    m: int
    n: int
    coupling: float
    coupling_mode: str
    total_time: float
    target: str
    nm: float
    fidelity: float
    iterations: int
    wall_time_s: float

    def as_row(self) -> list[str]:
        return [_fmt(getattr(self, name)) for name in CSV_HEADER]


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def point_seed(seed: int, *key: int) -> int:
    """Per-point seed: base seed xor a stable hash of the point key."""
    return (int(seed) ^ zlib.crc32(",".join(map(str, key)).encode())) & 0xFFFFFFFFFFFFFFFF


def evaluate_point(
    model: SpinStarModel,
    target: str,
    total_time: float,
    config: OptimizationConfig,
    nm_samples: int = DEFAULT_SAMPLES,
    run_optimizer: bool = True,
) -> SweepRecord:
    """Free-evolution NM and optimised fidelity for one configuration."""
    start = time.perf_counter()
    nm = blp_measure(model, total_time, nm_samples).value
    fidelity, iterations = math.nan, 0
    if run_optimizer:
        result = optimize(model, target_state(target, model.m), total_time, config)
        fidelity, iterations = result.best_fidelity, result.iterations_used
    return SweepRecord(
        m=model.m,
        n=model.n,
        coupling=float(model.coupling),
        coupling_mode=model.coupling_mode,
        total_time=float(total_time),
        target=TargetKind(target).value,
        nm=float(nm),
        fidelity=float(fidelity),
        iterations=int(iterations),
        wall_time_s=time.perf_counter() - start,
    )


def _task(args):
    key, model, target, total_time, config, nm_samples, run_optimizer = args
    try:
        return key, evaluate_point(model, target, total_time, config, nm_samples, run_optimizer), None
    except Exception as exc:  # isolate the failing point, keep the rest of the sweep
        return key, None, f"{type(exc).__name__}: {exc}"


def _run_tasks(tasks: list[tuple], parallelism: int) -> list[SweepRecord]:
    if parallelism > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=parallelism) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    records, failures = [], []
    for key, record, error in results:
        if error is None:
            records.append(record)
        else:
            log.error("sweep point %s failed: %s", key, error)
            failures.append({"key": key, "error": error})
    if failures:
        raise SweepFailure(failures, records)
    return records


def _point_config(spec: SweepSpec, *key: int) -> OptimizationConfig:
    return dataclasses.replace(spec.optimization, seed=point_seed(spec.seed, *key))


def run_grid(spec: SweepSpec) -> list[SweepRecord]:
    """One record per (coupling, time) lattice point, couplings varying slowest."""
    if spec.experiment != "grid":
        raise ConfigError("run_grid needs experiment='grid'")
    tasks = []
    for i, a in enumerate(spec.couplings):
        model = spec.make_model(coupling=a)
        for j, t in enumerate(spec.times):
            tasks.append(((i, j), model, spec.target, float(t), _point_config(spec, i, j),
                          spec.nm_samples, spec.run_optimizer))
    return _run_tasks(tasks, spec.parallelism)


def family_points(spec: SweepSpec) -> list[tuple[tuple[int, int], SpinStarModel]]:
    points = []
    for s, series in enumerate(spec.family):
        n_values = series.get("n_values") or [series.get("n", spec.n)]
        couplings = series.get("couplings") or [series.get("coupling", spec.coupling)]
        mode = series.get("coupling_mode", spec.coupling_mode)
        for p, (n, a) in enumerate((n, a) for n in n_values for a in couplings):
            points.append(((s, p), spec.make_model(n=int(n), coupling=float(a), coupling_mode=mode)))
    return points


def run_nm_family(spec: SweepSpec) -> list[SweepRecord]:
    """All family configurations at ``spec.total_time``, sorted by NM."""
    if spec.experiment != "nm_family":
        raise ConfigError("run_nm_family needs experiment='nm_family'")
    tasks = [
        (key, model, spec.target, spec.total_time, _point_config(spec, *key), spec.nm_samples, spec.run_optimizer)
        for key, model in family_points(spec)
    ]
    records = _run_tasks(tasks, spec.parallelism)
    return sorted(records, key=lambda r: r.nm)


def run_single(spec: SweepSpec) -> list[SweepRecord]:
    task = ((0, 0), spec.make_model(), spec.target, spec.total_time, _point_config(spec, 0, 0),
            spec.nm_samples, spec.run_optimizer)
    return _run_tasks([task], 1)


def find_matched_coupling(
    m: int,
    n: int,
    target_nm: float,
    total_time: float,
    bracket: tuple[float, float],
    coupling_mode: str = "unscaled",
    n_samples: int = DEFAULT_SAMPLES,
    tol: float = MATCH_TOL,
    max_iter: int = 100,
    **model_kwargs,
) -> float:
    """Bisect on the coupling until the free-evolution NM is within ``tol`` of ``target_nm``."""

    def nm_at(a: float) -> float:
        model = SpinStarModel(m, n, a, coupling_mode, **model_kwargs)
        return blp_measure(model, total_time, n_samples).value - target_nm

    lo, hi = map(float, bracket)
    f_lo, f_hi = nm_at(lo), nm_at(hi)
    if abs(f_lo) < tol:
        return lo
    if abs(f_hi) < tol:
        return hi
    if f_lo * f_hi > 0:
        raise BracketError(
            f"NM - target has the same sign at both ends of [{lo}, {hi}] ({f_lo:+.4f}, {f_hi:+.4f})"
        )
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        f_mid = nm_at(mid)
        if abs(f_mid) < tol:
            return mid
        if (f_mid < 0) == (f_lo < 0):
            lo, f_lo = mid, f_mid
        else:
            hi = mid
    raise BracketError(f"bisection did not reach |NM - target| < {tol} in {max_iter} steps")


def run_matched_nm(spec: SweepSpec) -> list[SweepRecord]:
    """Reference configuration plus the coupling at ``spec.n`` that reproduces its NM."""
    if spec.experiment != "matched_nm":
        raise ConfigError("run_matched_nm needs experiment='matched_nm'")
    tasks = []
    target_nm = spec.target_nm
    if spec.reference:
        ref_model = spec.make_model(**spec.reference)
        if target_nm is None:
            target_nm = blp_measure(ref_model, spec.total_time, spec.nm_samples).value
        tasks.append(((0, 0), ref_model, spec.target, spec.total_time, _point_config(spec, 0, 0),
                      spec.nm_samples, spec.run_optimizer))
    try:
        a = find_matched_coupling(
            spec.m, spec.n, target_nm, spec.total_time, tuple(spec.bracket),
            coupling_mode=spec.coupling_mode, n_samples=spec.nm_samples,
            omega0=spec.omega0, basis=spec.basis,
        )
    except BracketError as exc:
        raise SweepFailure([{"key": "matched", "error": str(exc)}], []) from exc
    tasks.append(((1, 0), spec.make_model(coupling=a), spec.target, spec.total_time,
                  _point_config(spec, 1, 0), spec.nm_samples, spec.run_optimizer))
    return _run_tasks(tasks, spec.parallelism)


RUNNERS = {
    "grid": run_grid,
    "nm_family": run_nm_family,
    "matched_nm": run_matched_nm,
    "single": run_single,
}


def run(spec: SweepSpec) -> list[SweepRecord]:
    return RUNNERS[spec.experiment](spec)


def spearman(records: list[SweepRecord]) -> float:
    """Spearman rank correlation between NM and fidelity over ``records``."""
    nm = [r.nm for r in records]
    fid = [r.fidelity for r in records]
    return float(stats.spearmanr(nm, fid).statistic)


def emit_results(records: list[SweepRecord], path, fmt: str = "csv", spec: SweepSpec | None = None) -> None:
    if not records:
        raise ValueError("no records to write")
    if fmt not in FORMATS:
        raise ValueError(f"format must be one of {FORMATS}")
    path = Path(path)
    if fmt == "csv":
        with path.open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(CSV_HEADER)
            writer.writerows(r.as_row() for r in records)
        return
    doc = {
        "spec": spec.to_dict() if spec is not None else None,
        "fields": list(CSV_HEADER),
        "records": [dataclasses.asdict(r) for r in records],
    }
    path.write_text(json.dumps(doc, indent=2, allow_nan=True) + "\n")


def load_records(path, fmt: str | None = None) -> list[SweepRecord]:
    """Parse records written by :func:`emit_results`."""
    path = Path(path)
    fmt = fmt or ("json" if path.suffix == ".json" else "csv")
    if fmt == "json":
        return [SweepRecord(**r) for r in json.loads(path.read_text())["records"]]
    with path.open(newline="") as fh:
        rows = list(csv.DictReader(fh))
    casts = {"m": int, "n": int, "iterations": int, "coupling_mode": str, "target": str}
    return [SweepRecord(**{k: casts.get(k, float)(v) for k, v in row.items()}) for row in rows]


def records_array(records: list[SweepRecord]) -> np.ndarray:
    """(nm, fidelity) pairs as an (N, 2) array."""
    return np.array([[r.nm, r.fidelity] for r in records])
